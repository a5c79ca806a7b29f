//! Phase modulator device model and deflection calibration.
//!
//! The modulator is a row of square cells on a fixed pitch. Each cell's
//! drive level maps to an optical phase retardation through a monotone
//! (generally nonlinear) response curve. A linear phase ramp across cells
//! acts as a blazed grating: light leaves the panel turned by an angle set
//! by the ramp gradient and the wavelength.
//!
//! Calibration plays a measurement campaign in software: for each candidate
//! per-cell drive increment, synthesize the wrapped, quantized ramp the
//! panel would display, recover its mean phase gradient exactly as a
//! profilometer would (unwrap, then finite differences), convert to a
//! deflection angle and then to a lateral displacement on a reference plane
//! at a known distance. The resulting lookup table maps drive increments to
//! displacements and is inverted when compiling corrections.

use crate::error::{Error, Result};
use crate::simulator::unwrap_phase_sequence;

/// Longest ramp period (in cells) that calibration will detect exactly;
/// sweeps whose ramps repeat on longer periods fall back to a fixed-length
/// averaging window of this size.
const MAX_PERIOD: usize = 8192;

/// Phase-only modulator panel parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PslmModel {
    /// Cell pitch, meters.
    pub pitch: f64,
    /// Illumination wavelength, meters.
    pub wavelength: f64,
    /// Full phase stroke at the top drive level, radians.
    pub phase_depth: f64,
    /// Number of addressable drive levels (drive values are
    /// `0..=levels-1`).
    pub levels: u32,
    /// Exponent of the drive-to-phase response curve.
    pub gamma: f64,
    /// Cells per projector pixel column.
    pub block_size: usize,
    /// Distance from the panel to the reference plane where calibration
    /// measures displacements, meters.
    pub ref_plane_distance: f64,
}

impl PslmModel {
    pub fn new(
        pitch: f64,
        wavelength: f64,
        phase_depth: f64,
        levels: u32,
        gamma: f64,
        block_size: usize,
        ref_plane_distance: f64,
    ) -> Result<PslmModel> {
        if !(pitch > 0.0) {
            return Err(Error::InvalidInput(format!("cell pitch must be positive, got {pitch}")));
        }
        if !(wavelength > 0.0) {
            return Err(Error::InvalidInput(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(phase_depth > 0.0) {
            return Err(Error::InvalidInput(format!(
                "phase depth must be positive, got {phase_depth}"
            )));
        }
        if !(2..=65536).contains(&levels) {
            return Err(Error::InvalidInput(format!(
                "drive levels must be in [2, 65536], got {levels}"
            )));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "response exponent must be positive, got {gamma}"
            )));
        }
        if block_size < 2 {
            return Err(Error::InvalidInput(format!(
                "block size must be at least 2 cells, got {block_size}"
            )));
        }
        if !(ref_plane_distance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "reference plane distance must be positive, got {ref_plane_distance}"
            )));
        }
        // The steepest representable gradient (half a cycle per cell) must
        // deflect to a real angle, or the whole usable range is evanescent.
        if wavelength / (2.0 * pitch) > 1.0 {
            return Err(Error::InvalidInput(format!(
                "wavelength {wavelength} m exceeds twice the cell pitch {pitch} m; \
                 every non-trivial grating would be evanescent"
            )));
        }
        Ok(PslmModel {
            pitch,
            wavelength,
            phase_depth,
            levels,
            gamma,
            block_size,
            ref_plane_distance,
        })
    }

    /// Optical phase produced by drive `d` (fractional drives are accepted
    /// for interpolation), radians: `depth * (d / (levels-1))^gamma`.
    /// `d` must lie in `[0, levels-1]`.
    pub fn phase_of_drive(&self, d: f64) -> Result<f64> {
        let top = (self.levels - 1) as f64;
        if !(0.0..=top).contains(&d) {
            return Err(Error::OutOfRange { what: "drive level", value: d, max: top });
        }
        let frac = d / top;
        // The linear response is both the common case and the one where
        // exactness matters (integer sawtooths); skip the power function.
        let shaped = if self.gamma == 1.0 { frac } else { frac.powf(self.gamma) };
        Ok(self.phase_depth * shaped)
    }

    /// Exact inverse of [`phase_of_drive`](Self::phase_of_drive): fractional
    /// drive producing phase `phi`. `phi` must lie in `[0, phase_depth]`.
    pub fn drive_of_phase(&self, phi: f64) -> Result<f64> {
        if !(0.0..=self.phase_depth).contains(&phi) {
            return Err(Error::OutOfRange {
                what: "phase [rad]",
                value: phi,
                max: self.phase_depth,
            });
        }
        let frac = phi / self.phase_depth;
        let shaped = if self.gamma == 1.0 { frac } else { frac.powf(1.0 / self.gamma) };
        Ok((self.levels - 1) as f64 * shaped)
    }

    /// Steepest phase gradient the panel can express without aliasing:
    /// half a phase cycle per cell, radians per meter.
    pub fn nyquist_gradient(&self) -> f64 {
        std::f64::consts::PI / self.pitch
    }

    /// Deflection produced by the Nyquist-limit gradient, radians.
    pub fn nyquist_deflection(&self) -> f64 {
        (self.wavelength / (2.0 * self.pitch)).asin()
    }

    /// First-order deflection angle of a uniform phase ramp with gradient
    /// `g` radians per meter: `asin(wavelength * g / 2pi)`.
    ///
    /// Gradients steeper than the evanescent limit are an error; gradients
    /// past the Nyquist limit (half a cycle per cell) still deflect but
    /// alias on the discrete panel, so they are allowed with a warning.
    pub fn ramp_deflection(&self, g: f64) -> Result<f64> {
        let sine = self.wavelength * g / (2.0 * std::f64::consts::PI);
        if sine.abs() > 1.0 {
            return Err(Error::EvanescentDeflection { sine });
        }
        if g.abs() > self.nyquist_gradient() {
            log::warn!(
                "phase gradient {g} rad/m beyond the Nyquist limit {} rad/m; \
                 the displayed ramp will alias",
                self.nyquist_gradient()
            );
        }
        Ok(sine.asin())
    }

    /// Lateral displacement on the reference plane produced by gradient
    /// `g`: `tan(ramp_deflection(g)) * ref_plane_distance`.
    pub fn ramp_shift(&self, g: f64) -> Result<f64> {
        Ok(self.ramp_deflection(g)?.tan() * self.ref_plane_distance)
    }
}

/// One calibration measurement: a per-cell drive increment and the lateral
/// displacement it produced on the reference plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LutEntry {
    /// Per-cell drive increment of the displayed ramp (may be fractional).
    pub delta_drive: f64,
    /// Measured displacement on the reference plane, meters.
    pub shift: f64,
}

/// Calibration table mapping drive increments to reference-plane
/// displacements. Both columns are strictly increasing and the table pins
/// zero increment to zero displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionLut {
    entries: Vec<LutEntry>,
}

impl DeflectionLut {
    /// Validates and wraps a list of calibration entries. Entries must be
    /// strictly increasing in both columns and include the exact rest point
    /// `(0, 0)`; a table violating either is reported at the first bad
    /// index.
    pub fn new(entries: Vec<LutEntry>) -> Result<DeflectionLut> {
        if entries.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "calibration table needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        for i in 1..entries.len() {
            if entries[i].delta_drive <= entries[i - 1].delta_drive
                || entries[i].shift <= entries[i - 1].shift
            {
                return Err(Error::NonMonotoneLut { index: i });
            }
        }
        if !entries
            .iter()
            .any(|e| e.delta_drive == 0.0 && e.shift == 0.0)
        {
            return Err(Error::InvalidInput(
                "calibration table must contain the rest point (0, 0)".into(),
            ));
        }
        Ok(DeflectionLut { entries })
    }

    pub fn entries(&self) -> &[LutEntry] {
        &self.entries
    }

    pub fn min_shift(&self) -> f64 {
        self.entries[0].shift
    }

    pub fn max_shift(&self) -> f64 {
        self.entries[self.entries.len() - 1].shift
    }

    /// Inverts the table: finds the drive increment whose ramp displaces by
    /// `shift` meters, interpolating linearly between knots and returning
    /// knot values exactly at knots. Shifts outside the calibrated range
    /// exceed the deflection budget.
    pub fn invert(&self, shift: f64) -> Result<f64> {
        let entries = &self.entries;
        if shift < self.min_shift() || shift > self.max_shift() {
            return Err(Error::DeflectionBudgetExceeded {
                pixel: None,
                required: shift,
                available_min: self.min_shift(),
                available_max: self.max_shift(),
            });
        }
        // Binary search by shift; exact knot hits return the knot drive
        // without interpolation noise.
        match entries.binary_search_by(|e| e.shift.total_cmp(&shift)) {
            Ok(i) => Ok(entries[i].delta_drive),
            Err(i) => {
                // i is the first entry with shift greater than the query;
                // the query lies strictly between entries i-1 and i.
                let lo = entries[i - 1];
                let hi = entries[i];
                let f = (shift - lo.shift) / (hi.shift - lo.shift);
                Ok(lo.delta_drive + f * (hi.delta_drive - lo.delta_drive))
            }
        }
    }
}

/// Per-cell drive increments to measure: `steps` values (odd, at least 3)
/// symmetric about an exact zero, spanning `[-max_delta, +max_delta]`.
pub fn sweep_increments(steps: usize, max_delta: f64) -> Result<Vec<f64>> {
    if steps < 3 || steps % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "calibration sweep needs an odd number of steps >= 3, got {steps}"
        )));
    }
    if !(max_delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sweep amplitude must be positive, got {max_delta}"
        )));
    }
    let center = steps / 2;
    let step = max_delta / center as f64;
    // Build symmetrically so the center lands on exactly 0.0.
    Ok((0..steps)
        .map(|j| (j as f64 - center as f64) * step)
        .collect())
}

/// Default calibration sweep for a panel: 33 increments spanning a quarter
/// of the drive range each way, which keeps every ramp well inside the
/// Nyquist gradient.
pub fn default_sweep(model: &PslmModel) -> Vec<f64> {
    sweep_increments(33, (model.levels - 1) as f64 / 4.0)
        .expect("fixed default sweep parameters are valid")
}

/// Checks a sweep is usable for calibration: strictly increasing, contains
/// the exact rest increment 0.0, and stays within the aliasing bound of
/// half the drive range per cell.
fn validate_sweep(model: &PslmModel, sweep: &[f64]) -> Result<()> {
    if sweep.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "calibration sweep needs at least 2 increments, got {}",
            sweep.len()
        )));
    }
    for i in 1..sweep.len() {
        if sweep[i] <= sweep[i - 1] {
            return Err(Error::InvalidInput(format!(
                "sweep increments must be strictly increasing at position {i}"
            )));
        }
    }
    if !sweep.contains(&0.0) {
        return Err(Error::InvalidInput(
            "calibration sweep must include the rest increment 0.0".into(),
        ));
    }
    let bound = (model.levels - 1) as f64 / 2.0;
    for &d in sweep {
        if d.abs() > bound {
            return Err(Error::InvalidInput(format!(
                "sweep increment {d} exceeds half the drive range ({bound}) and would alias"
            )));
        }
    }
    Ok(())
}

/// Synthesizes the wrapped, quantized drive ramp the panel displays for a
/// per-cell increment `delta`, over `len` cells.
fn quantized_ramp(model: &PslmModel, delta: f64, len: usize) -> Vec<u16> {
    let span = (model.levels - 1) as f64;
    (0..len)
        .map(|i| {
            let wrapped = (i as f64 * delta).rem_euclid(span);
            // Round half up, capped at the top level for values just under
            // the wrap point.
            let d = (wrapped + 0.5).floor().min(span);
            d as u16
        })
        .collect()
}

/// Number of cells after which the displayed ramp for increment `delta`
/// repeats exactly, if that period is at most [`MAX_PERIOD`].
fn ramp_period(model: &PslmModel, delta: f64) -> Option<usize> {
    if delta == 0.0 {
        return Some(1);
    }
    let span = (model.levels - 1) as f64;
    for p in 1..=MAX_PERIOD {
        let advance = p as f64 * delta.abs();
        let r = advance.rem_euclid(span);
        if r < 1e-9 || span - r < 1e-9 {
            return Some(p);
        }
    }
    None
}

/// Runs the software measurement campaign: for each increment in `sweep`,
/// display the quantized ramp, recover its mean phase gradient by
/// unwrapping and finite differences over a whole number of periods (or a
/// long window when the period is irrational), convert to a displacement on
/// the reference plane, and collect the calibration table.
///
/// The table is validated before being returned, so a panel whose response
/// makes displacements non-monotone in drive increment is rejected here.
pub fn simulate_calibration(model: &PslmModel, sweep: &[f64]) -> Result<DeflectionLut> {
    validate_sweep(model, sweep)?;
    let mut entries = Vec::with_capacity(sweep.len());
    for &delta in sweep {
        if delta == 0.0 {
            entries.push(LutEntry { delta_drive: 0.0, shift: 0.0 });
            continue;
        }
        let window = ramp_period(model, delta).unwrap_or(MAX_PERIOD);
        let ramp = quantized_ramp(model, delta, window + 1);
        let phases = ramp
            .iter()
            .map(|&d| model.phase_of_drive(d as f64))
            .collect::<Result<Vec<f64>>>()?;
        let unwrapped = unwrap_phase_sequence(&phases, model.phase_depth);
        let g = (unwrapped[window] - unwrapped[0]) / (window as f64 * model.pitch);
        let shift = model.ramp_shift(g)?;
        entries.push(LutEntry { delta_drive: delta, shift });
    }
    DeflectionLut::new(entries)
}
