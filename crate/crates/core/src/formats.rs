//! File formats: binary PGM drive images, CSV tables, metadata JSON, and
//! atomic writes.
//!
//! Everything here is deterministic — identical inputs serialize to
//! byte-identical output, floats are printed in shortest round-trip form —
//! and every parser reports the byte offset where malformed input was
//! found.

use crate::compiler::{PhaseImage, SlopePlan};
use crate::density::TargetPlan;
use crate::device::{LutEntry, PslmModel};
use crate::simulator::SimulationResult;
use std::fmt::Write as _;
use std::path::Path;

/// A file could not be read, written, or understood.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    /// The input is not a valid instance of the expected format; `offset`
    /// is the byte position of the problem.
    #[error("byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

pub type FormatResult<T> = std::result::Result<T, FormatError>;

fn malformed(offset: usize, message: impl Into<String>) -> FormatError {
    FormatError::Malformed { offset, message: message.into() }
}

/// Writes `bytes` to `path` atomically: the content lands in a sibling
/// temporary file first and is renamed into place, so readers never observe
/// a partial file and failed runs leave no half-written output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> FormatResult<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = file_name.to_owned();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Splits CSV text into rows of `n_fields` float fields under the given
/// header, reporting byte offsets for every malformed construct. Lines are
/// separated by `\n` (a trailing `\r` is tolerated); fields never contain
/// quotes or separators, so no quoting is needed.
fn parse_float_csv(bytes: &[u8], header: &str, n_fields: usize) -> FormatResult<Vec<Vec<f64>>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| malformed(e.valid_up_to(), "file is not valid UTF-8 text"))?;
    let mut rows = Vec::new();
    let mut offset = 0usize;
    for (lineno, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if lineno == 0 {
            if line != header {
                return Err(malformed(0, format!("expected header `{header}`, got `{line}`")));
            }
        } else if !line.is_empty() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_fields {
                return Err(malformed(
                    offset,
                    format!("expected {n_fields} fields, got {}", fields.len()),
                ));
            }
            let mut values = Vec::with_capacity(n_fields);
            let mut field_offset = offset;
            for field in fields {
                let v: f64 = field.trim().parse().map_err(|_| {
                    malformed(field_offset, format!("`{field}` is not a number"))
                })?;
                if !v.is_finite() {
                    return Err(malformed(field_offset, format!("`{field}` is not finite")));
                }
                values.push(v);
                field_offset += field.len() + 1;
            }
            rows.push(values);
        }
        offset += raw.len() + 1;
    }
    Ok(rows)
}

/// Reads a float field that must hold a non-negative integer (an index).
fn index_field(row: &[f64], col: usize, offset_hint: usize) -> FormatResult<usize> {
    let v = row[col];
    if v < 0.0 || v.fract() != 0.0 || v > usize::MAX as f64 {
        return Err(malformed(offset_hint, format!("`{v}` is not a valid index")));
    }
    Ok(v as usize)
}

pub const LUT_CSV_HEADER: &str = "delta_drive,shift_m";

/// Serializes calibration entries as CSV.
pub fn lut_csv(entries: &[LutEntry]) -> String {
    let mut out = String::from(LUT_CSV_HEADER);
    out.push('\n');
    for e in entries {
        writeln!(out, "{},{}", e.delta_drive, e.shift).expect("string write");
    }
    out
}

/// Parses a calibration CSV back into entries. Monotonicity and the other
/// table invariants are the table constructor's business, not the parser's.
pub fn parse_lut_csv(bytes: &[u8]) -> FormatResult<Vec<LutEntry>> {
    let rows = parse_float_csv(bytes, LUT_CSV_HEADER, 2)?;
    if rows.is_empty() {
        return Err(malformed(bytes.len(), "calibration table has no data rows"));
    }
    Ok(rows
        .into_iter()
        .map(|r| LutEntry { delta_drive: r[0], shift: r[1] })
        .collect())
}

pub const PLAN_CSV_HEADER: &str = "pixel,deflection_rad,delta_drive,slope_rad_per_m";

/// Serializes the per-pixel deflection plan and its realization.
pub fn plan_csv(targets: &TargetPlan, plan: &SlopePlan) -> String {
    let mut out = String::from(PLAN_CSV_HEADER);
    out.push('\n');
    for i in 0..plan.slope.len() {
        writeln!(
            out,
            "{},{},{},{}",
            i, targets.deflection[i], plan.delta_drive[i], plan.slope[i]
        )
        .expect("string write");
    }
    out
}

pub const SIM_CSV_HEADER: &str =
    "pixel,nominal_s_m,target_s_m,achieved_s_m,target_shift_m,achieved_shift_m";

/// Serializes the per-pixel simulation outcome.
pub fn sim_csv(sim: &SimulationResult) -> String {
    let mut out = String::from(SIM_CSV_HEADER);
    out.push('\n');
    for i in 0..sim.nominal_s.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i,
            sim.nominal_s[i],
            sim.target_s[i],
            sim.achieved_s[i],
            sim.target_shift[i],
            sim.achieved_shift[i]
        )
        .expect("string write");
    }
    out
}

/// One row of a parsed simulation CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub pixel: usize,
    pub nominal_s: f64,
    pub target_s: f64,
    pub achieved_s: f64,
    pub target_shift: f64,
    pub achieved_shift: f64,
}

/// Parses a simulation CSV, e.g. to re-plot it.
pub fn parse_sim_csv(bytes: &[u8]) -> FormatResult<Vec<SimRecord>> {
    let rows = parse_float_csv(bytes, SIM_CSV_HEADER, 6)?;
    if rows.is_empty() {
        return Err(malformed(bytes.len(), "simulation table has no data rows"));
    }
    rows.into_iter()
        .map(|r| {
            Ok(SimRecord {
                pixel: index_field(&r, 0, 0)?,
                nominal_s: r[1],
                target_s: r[2],
                achieved_s: r[3],
                target_shift: r[4],
                achieved_shift: r[5],
            })
        })
        .collect()
}

pub const CHECKER_CSV_HEADER: &str = "cell,start_pixel,length_m";

/// Serializes checker-cell lengths.
pub fn checker_csv(cells: &[f64], cell_px: usize) -> String {
    let mut out = String::from(CHECKER_CSV_HEADER);
    out.push('\n');
    for (c, &len) in cells.iter().enumerate() {
        writeln!(out, "{},{},{}", c, c * cell_px, len).expect("string write");
    }
    out
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

/// Serializes a drive image as binary PGM (type `P5`). Samples wider than
/// 8 bits are stored most-significant byte first, as the format requires.
pub fn pgm_bytes(image: &PhaseImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n{}\n", image.width, image.height, image.maxval);
    let sample_bytes = if image.maxval > 255 { 2 } else { 1 };
    let mut out = Vec::with_capacity(header.len() + image.width * image.height * sample_bytes);
    out.extend_from_slice(header.as_bytes());
    for _ in 0..image.height {
        for &d in image.row() {
            if sample_bytes == 2 {
                out.extend_from_slice(&d.to_be_bytes());
            } else {
                out.push(d as u8);
            }
        }
    }
    out
}

/// Reads one whitespace- or comment-delimited unsigned decimal token from a
/// PGM header, returning the value and the offset just past it.
fn pgm_token(bytes: &[u8], mut pos: usize, what: &str) -> FormatResult<(u32, usize)> {
    loop {
        match bytes.get(pos) {
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(c) if c.is_ascii_digit() => break,
            Some(_) => return Err(malformed(pos, format!("expected {what}"))),
            None => return Err(malformed(bytes.len(), format!("file ends before {what}"))),
        }
    }
    let start = pos;
    let mut value: u64 = 0;
    while let Some(c) = bytes.get(pos).filter(|c| c.is_ascii_digit()) {
        value = value * 10 + (c - b'0') as u64;
        if value > u32::MAX as u64 {
            return Err(malformed(start, format!("{what} is out of range")));
        }
        pos += 1;
    }
    Ok((value as u32, pos))
}

/// Parses a binary PGM into a drive image.
///
/// The stored image replicates one row, so the raster's rows must all be
/// identical; a PGM whose rows differ is not a phase image this pipeline
/// could have produced and is rejected with the offset of the first
/// mismatch.
pub fn parse_pgm(bytes: &[u8]) -> FormatResult<PhaseImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(malformed(0, "not a binary PGM (magic `P5` missing)"));
    }
    let (width, pos) = pgm_token(bytes, 2, "image width")?;
    let (height, pos) = pgm_token(bytes, pos, "image height")?;
    let (maxval, pos) = pgm_token(bytes, pos, "sample maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(2, "image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(pos, format!("maxval {maxval} outside [1, 65535]")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => {}
        _ => return Err(malformed(pos, "expected single whitespace before raster")),
    }
    let raster_start = pos + 1;
    let sample_bytes = if maxval > 255 { 2usize } else { 1 };
    let (width, height) = (width as usize, height as usize);
    let expected = width * height * sample_bytes;
    if bytes.len() - raster_start < expected {
        return Err(malformed(
            bytes.len(),
            format!(
                "raster truncated: expected {expected} bytes, got {}",
                bytes.len() - raster_start
            ),
        ));
    }
    if bytes.len() - raster_start > expected {
        return Err(malformed(raster_start + expected, "trailing bytes after raster"));
    }
    let sample_at = |k: usize| -> u16 {
        let p = raster_start + k * sample_bytes;
        if sample_bytes == 2 {
            u16::from_be_bytes([bytes[p], bytes[p + 1]])
        } else {
            bytes[p] as u16
        }
    };
    let mut row = Vec::with_capacity(width);
    for k in 0..width {
        let d = sample_at(k);
        if d as u32 > maxval {
            return Err(malformed(
                raster_start + k * sample_bytes,
                format!("sample {d} exceeds maxval {maxval}"),
            ));
        }
        row.push(d);
    }
    for r in 1..height {
        for k in 0..width {
            let d = sample_at(r * width + k);
            if d != row[k] {
                return Err(malformed(
                    raster_start + (r * width + k) * sample_bytes,
                    format!("row {r} differs from row 0 at column {k}"),
                ));
            }
        }
    }
    PhaseImage::new(row, height, maxval as u16)
        .map_err(|e| malformed(raster_start, e.to_string()))
}

// ---------------------------------------------------------------------------
// Metadata
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a hash, used to fingerprint the raster in the metadata
/// sidecar.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(serde::Serialize)]
struct ImageMetadata<'a> {
    width: usize,
    height: usize,
    maxval: u16,
    wrap_count_per_row: usize,
    raster_fnv1a: String,
    pslm: &'a PslmModel,
}

/// Renders the JSON sidecar describing a drive image: dimensions, wrap
/// seams per row, a raster fingerprint, and the panel model it was compiled
/// for.
pub fn image_metadata_json(
    image: &PhaseImage,
    model: &PslmModel,
    wrap_count_per_row: usize,
) -> String {
    let meta = ImageMetadata {
        width: image.width,
        height: image.height,
        maxval: image.maxval,
        wrap_count_per_row,
        raster_fnv1a: format!("{:016x}", fnv1a(&pgm_bytes(image))),
        pslm: model,
    };
    let mut out = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    out.push('\n');
    out
}
