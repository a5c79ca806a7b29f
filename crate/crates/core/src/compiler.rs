//! Deflection plan to phase image: slope planning, smooth profile
//! assembly, wrapping and quantization.
//!
//! Each projector pixel owns one block of `block_size` modulator cells.
//! The calibration table turns that pixel's required reference-plane shift
//! into a per-cell drive increment, whose ramp has a known mean phase
//! gradient — the block's planned slope. Planned slopes live at block
//! centers; the assembled profile's derivative is their continuous
//! piecewise-linear interpolant, making the unwrapped phase smooth with a
//! continuous first derivative everywhere. The profile is then sampled at
//! cell centers, wrapped into `[0, phase_depth)` and quantized to drive
//! levels.

use crate::density::{self, TargetPlan};
use crate::device::{DeflectionLut, PslmModel};
use crate::error::{Error, Result};
use crate::geometry::{ProjectorModel, SurfaceProfile};

/// Per-block drive increments and phase gradients realizing a deflection
/// plan. Block `i` spans modulator cells `[i*block_size, (i+1)*block_size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopePlan {
    /// Per-cell drive increment for each block (fractional).
    pub delta_drive: Vec<f64>,
    /// Mean phase gradient of each block's ramp, radians per meter.
    pub slope: Vec<f64>,
}

/// Smooth unwrapped phase profile over the modulator width.
///
/// The derivative is piecewise linear through `(center_i, slope_i)` knots,
/// extended at constant slope before the first and after the last center;
/// the phase itself is the exact integral of that derivative with
/// `phase(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    /// Position of the first block center, meters.
    center0: f64,
    /// Distance between adjacent block centers, meters.
    center_spacing: f64,
    /// Slope at each block center, radians per meter.
    slopes: Vec<f64>,
    /// Unwrapped phase at each block center, radians.
    knot_phase: Vec<f64>,
}

impl PhaseProfile {
    /// Derivative of the profile at `x`, radians per meter.
    pub fn slope(&self, x: f64) -> f64 {
        let n = self.slopes.len();
        if n == 1 || x <= self.center0 {
            return self.slopes[0];
        }
        let last = self.center0 + (n - 1) as f64 * self.center_spacing;
        if x >= last {
            return self.slopes[n - 1];
        }
        let f = (x - self.center0) / self.center_spacing;
        let i = (f.floor() as usize).min(n - 2);
        let u = f - i as f64;
        self.slopes[i] + u * (self.slopes[i + 1] - self.slopes[i])
    }

    /// Unwrapped phase at `x`, radians. `phase(0)` is exactly 0.
    pub fn phase(&self, x: f64) -> f64 {
        let n = self.slopes.len();
        if n == 1 || x <= self.center0 {
            // Constant slope before the first center, anchored so the
            // profile passes through its first knot.
            return self.knot_phase[0] - (self.center0 - x) * self.slopes[0];
        }
        let last = self.center0 + (n - 1) as f64 * self.center_spacing;
        if x >= last {
            return self.knot_phase[n - 1] + (x - last) * self.slopes[n - 1];
        }
        let f = (x - self.center0) / self.center_spacing;
        let i = (f.floor() as usize).min(n - 2);
        let dx = x - (self.center0 + i as f64 * self.center_spacing);
        let m = (self.slopes[i + 1] - self.slopes[i]) / self.center_spacing;
        // Integral of the linearly varying slope from knot i.
        self.knot_phase[i] + self.slopes[i] * dx + 0.5 * m * dx * dx
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn center(&self, i: usize) -> f64 {
        self.center0 + i as f64 * self.center_spacing
    }
}

/// How sampled phases outside `[0, phase_depth)` are handled when building
/// the drive image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WrapMode {
    /// Fold phases modulo `phase_depth` (seamless when the depth is one
    /// full cycle).
    Wrap,
    /// Reject any sample outside `[0, phase_depth)`.
    Strict,
}

/// Quantized drive image for the modulator. Every row is identical (the
/// cross-section profile replicated), so only one row is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    pub width: usize,
    pub height: usize,
    /// Top drive level (`levels - 1`).
    pub maxval: u16,
    row: Vec<u16>,
}

impl PhaseImage {
    pub fn new(row: Vec<u16>, height: usize, maxval: u16) -> Result<PhaseImage> {
        if row.is_empty() || height == 0 {
            return Err(Error::InvalidInput(
                "phase image must have at least one column and one row".into(),
            ));
        }
        if let Some(&bad) = row.iter().find(|&&d| d > maxval) {
            return Err(Error::InvalidInput(format!(
                "drive level {bad} exceeds the top level {maxval}"
            )));
        }
        Ok(PhaseImage { width: row.len(), height, maxval, row })
    }

    /// The shared pixel row.
    pub fn row(&self) -> &[u16] {
        &self.row
    }
}

/// Everything the compiler produces for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CompileOutput {
    pub image: PhaseImage,
    /// Number of wrap seams in each (identical) row of the stored image.
    pub wrap_count_per_row: usize,
    pub targets: TargetPlan,
    pub plan: SlopePlan,
}

/// Converts per-pixel deflections into per-block drive increments and
/// phase gradients via the calibration table.
///
/// The desired reference-plane shift for pixel `i` is
/// `tan(deflection_i) * ref_plane_distance`; the table inverts it to a
/// drive increment, whose displayed ramp advances the phase by
/// `phase_depth * delta / (levels-1)` per cell on average regardless of the
/// response exponent (each wrapped tooth spans the full stroke), giving the
/// block gradient.
pub fn plan_slopes(
    targets: &TargetPlan,
    lut: &DeflectionLut,
    model: &PslmModel,
) -> Result<SlopePlan> {
    let n = targets.deflection.len();
    let mut delta_drive = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    for (i, &defl) in targets.deflection.iter().enumerate() {
        let shift = defl.tan() * model.ref_plane_distance;
        let delta = lut.invert(shift).map_err(|e| e.with_pixel(i))?;
        let g = model.phase_depth * delta / ((model.levels - 1) as f64 * model.pitch);
        if g.abs() > model.nyquist_gradient() {
            return Err(Error::InvalidInput(format!(
                "pixel {i}: planned gradient {g} rad/m exceeds the aliasing \
                 limit {} rad/m",
                model.nyquist_gradient()
            )));
        }
        delta_drive.push(delta);
        slope.push(g);
    }
    Ok(SlopePlan { delta_drive, slope })
}

/// Integrates the planned block slopes into a smooth phase profile.
///
/// Slopes are attached to block centers `(i + 0.5) * block_size * pitch`;
/// between centers the derivative interpolates linearly, and beyond the
/// extreme centers it stays constant, so the phase is piecewise quadratic
/// with a continuous derivative and `phase(0) = 0`.
pub fn assemble_c1_profile(plan: &SlopePlan, model: &PslmModel) -> Result<PhaseProfile> {
    let n = plan.slope.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let spacing = model.block_size as f64 * model.pitch;
    let center0 = 0.5 * spacing;
    let mut knot_phase = Vec::with_capacity(n);
    // phase(0) = 0 and the slope is constant g_0 left of the first center.
    knot_phase.push(plan.slope[0] * center0);
    for i in 0..n.saturating_sub(1) {
        let step = 0.5 * (plan.slope[i] + plan.slope[i + 1]) * spacing;
        knot_phase.push(knot_phase[i] + step);
    }
    Ok(PhaseProfile {
        center0,
        center_spacing: spacing,
        slopes: plan.slope.clone(),
        knot_phase,
    })
}

/// Rounds to the nearest integer, halves up, as an `f64`.
fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Samples the profile at cell centers, wraps each phase into
/// `[0, phase_depth)` (or rejects out-of-range samples in strict mode),
/// quantizes to drive levels, and replicates across `rows` identical rows.
/// Also counts the wrap seams (adjacent wrapped-phase jumps larger than
/// half the depth) in the stored row.
pub fn wrap_and_quantize(
    profile: &PhaseProfile,
    model: &PslmModel,
    rows: usize,
    mode: WrapMode,
) -> Result<(PhaseImage, usize)> {
    if rows == 0 {
        return Err(Error::InvalidInput("image needs at least one row".into()));
    }
    let width = profile.slopes().len() * model.block_size;
    let top = (model.levels - 1) as f64;
    let depth = model.phase_depth;
    let mut row = Vec::with_capacity(width);
    let mut prev_wrapped: Option<f64> = None;
    let mut wrap_count = 0usize;
    for k in 0..width {
        let x = (k as f64 + 0.5) * model.pitch;
        let phi = profile.phase(x);
        let wrapped = match mode {
            WrapMode::Wrap => phi - depth * (phi / depth).floor(),
            WrapMode::Strict => {
                if !(0.0..depth).contains(&phi) {
                    return Err(Error::PhaseRangeExceeded { sample: k, phase: phi });
                }
                phi
            }
        };
        if let Some(prev) = prev_wrapped {
            if (wrapped - prev).abs() > depth / 2.0 {
                wrap_count += 1;
            }
        }
        prev_wrapped = Some(wrapped);
        // `wrapped` < depth, so the fractional drive is within range; only
        // rounding can push it past the top level.
        let drive = round_half_up(model.drive_of_phase(wrapped)?).min(top);
        row.push(drive as u16);
    }
    let image = PhaseImage::new(row, rows, top as u16)?;
    Ok((image, wrap_count))
}

/// Full geometry-to-image pipeline: measure nominal hits, schedule uniform
/// targets, derive deflections, plan slopes through the calibration table,
/// assemble the smooth profile, wrap and quantize.
///
/// Identical inputs produce bit-identical images. Errors are annotated with
/// the stage that raised them.
pub fn compile_phase_image(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
    model: &PslmModel,
    lut: &DeflectionLut,
    rows: usize,
    mode: WrapMode,
) -> Result<CompileOutput> {
    let schedule =
        density::uniform_targets(proj, surface).map_err(|e| e.at_stage("target scheduling"))?;
    let targets = density::required_deflections(proj, surface, &schedule)
        .map_err(|e| e.at_stage("deflection planning"))?;
    let plan = plan_slopes(&targets, lut, model).map_err(|e| e.at_stage("slope planning"))?;
    let profile =
        assemble_c1_profile(&plan, model).map_err(|e| e.at_stage("profile assembly"))?;
    let (image, wrap_count_per_row) = wrap_and_quantize(&profile, model, rows, mode)
        .map_err(|e| e.at_stage("quantization"))?;
    Ok(CompileOutput { image, wrap_count_per_row, targets, plan })
}
