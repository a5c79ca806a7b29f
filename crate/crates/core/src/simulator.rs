//! Blind forward optical model: from drive image bytes back to landing
//! points.
//!
//! Nothing in this module reads the compiler's plan. The simulator sees
//! only what the hardware would see — the quantized drive image plus the
//! projector, surface and panel models — and independently reconstructs
//! each pixel block's phase ramp, deflects the pixel ray accordingly,
//! and traces it to the surface. Agreement between its landing points and
//! the scheduled targets is therefore end-to-end evidence, not bookkeeping.

use crate::compiler::PhaseImage;
use crate::density::{self, UniformityReport};
use crate::device::PslmModel;
use crate::error::{Error, Result};
use crate::geometry::{ProjectorModel, Ray, SurfaceProfile};
use rayon::prelude::*;

/// Unwraps a sequence of phases confined to one stroke `[0, depth)` into a
/// continuous sequence: any adjacent jump larger than half the depth is
/// treated as a wrap seam and undone by a whole-stroke offset.
pub fn unwrap_phase_sequence(wrapped: &[f64], depth: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    for (k, &phi) in wrapped.iter().enumerate() {
        if k > 0 {
            let jump = phi - wrapped[k - 1];
            if jump > depth / 2.0 {
                offset -= depth;
            } else if jump < -depth / 2.0 {
                offset += depth;
            }
        }
        out.push(phi + offset);
    }
    out
}

/// Converts one row of drive levels to its continuous unwrapped phase
/// sequence through the panel's response curve.
pub fn unwrap_phase_row(drives: &[u16], model: &PslmModel) -> Result<Vec<f64>> {
    let phases = drives
        .iter()
        .map(|&d| model.phase_of_drive(d as f64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(unwrap_phase_sequence(&phases, model.phase_depth))
}

/// Returns the span of row samples used to estimate block `i`'s gradient.
///
/// For blocks of four cells or more, one sample is dropped at each side so
/// the estimate reads only the block interior, where the displayed ramp is
/// free of the smoothing that blends neighbouring blocks. Smaller blocks
/// have no interior to spare and use every sample.
fn block_interior(i: usize, block_size: usize) -> (usize, usize) {
    let lo = i * block_size;
    let hi = (i + 1) * block_size - 1;
    if block_size >= 4 {
        (lo + 1, hi - 1)
    } else {
        (lo, hi)
    }
}

/// Recovers the deflection each pixel block imparts, reading only the drive
/// image and the panel model.
///
/// The row is unwrapped, each block's mean interior phase gradient is
/// measured, and the grating equation converts it to a steering angle.
pub fn recover_block_deflections(
    image: &PhaseImage,
    model: &PslmModel,
) -> Result<Vec<f64>> {
    if image.maxval as u32 + 1 != model.levels {
        return Err(Error::InvalidInput(format!(
            "drive image top level {} does not match the panel's {} levels",
            image.maxval, model.levels
        )));
    }
    if image.width % model.block_size != 0 {
        return Err(Error::InvalidInput(format!(
            "image width {} is not a whole number of {}-cell blocks",
            image.width, model.block_size
        )));
    }
    let unwrapped = unwrap_phase_row(image.row(), model)?;
    let n_blocks = image.width / model.block_size;
    let mut deflections = Vec::with_capacity(n_blocks);
    for i in 0..n_blocks {
        let (lo, hi) = block_interior(i, model.block_size);
        let g = (unwrapped[hi] - unwrapped[lo]) / ((hi - lo) as f64 * model.pitch);
        deflections.push(model.ramp_deflection(g)?);
    }
    Ok(deflections)
}

/// Traces one deflected ray per pixel and returns the landing arc lengths.
fn landing_points(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
    deflections: &[f64],
) -> Result<Vec<f64>> {
    let traced: Vec<Result<f64>> = (0..proj.n_cols())
        .into_par_iter()
        .map(|i| {
            let ray = proj.pixel_ray(i as f64);
            let steered = Ray {
                origin: ray.origin,
                dir: ray.dir.rotated_cw(deflections[i]),
            };
            let hit = surface
                .intersect(steered)
                .and_then(|h| h.ok_or(Error::NoIntersection { pixel: None }))
                .map_err(|e| e.with_pixel(i))?;
            Ok(hit.s)
        })
        .collect();
    traced.into_iter().collect()
}

/// Consecutive differences of a landing-point sequence: the per-gap sample
/// spacing the uniformity metrics are computed over.
fn gaps(s: &[f64]) -> Vec<f64> {
    s.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Everything the forward model measures for one drive image.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Undeflected landing point of each pixel, arc-length meters.
    pub nominal_s: Vec<f64>,
    /// Scheduled uniform target of each pixel, arc-length meters.
    pub target_s: Vec<f64>,
    /// Landing point of each deflected ray, arc-length meters.
    pub achieved_s: Vec<f64>,
    /// Scheduled displacement `target - nominal`, positive rightward.
    pub target_shift: Vec<f64>,
    /// Measured displacement `achieved - nominal`, positive rightward.
    pub achieved_shift: Vec<f64>,
    /// Gap statistics of the uncorrected landing points.
    pub before: UniformityReport,
    /// Gap statistics of the corrected landing points, including the worst
    /// landing error against the schedule.
    pub after: UniformityReport,
}

/// Runs the blind forward model: recover per-block deflections from the
/// drive image, steer each pixel ray, trace to the surface, and compare the
/// landing pattern against the uniform schedule derived from the models.
pub fn forward_simulate(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
    model: &PslmModel,
    image: &PhaseImage,
) -> Result<SimulationResult> {
    let expected = proj.n_cols() * model.block_size;
    if image.width != expected {
        return Err(Error::InvalidInput(format!(
            "image width {} does not cover {} pixels of {} cells each",
            image.width,
            proj.n_cols(),
            model.block_size
        )));
    }
    let schedule = density::uniform_targets(proj, surface)?;
    let deflections = recover_block_deflections(image, model)?;
    let achieved_s = landing_points(proj, surface, &deflections)?;

    let n = proj.n_cols();
    let target_shift: Vec<f64> =
        (0..n).map(|i| schedule.target_s[i] - schedule.nominal_s[i]).collect();
    let achieved_shift: Vec<f64> =
        (0..n).map(|i| achieved_s[i] - schedule.nominal_s[i]).collect();

    let before = density::uniformity_metrics(&gaps(&schedule.nominal_s))?;
    let mut after = density::uniformity_metrics(&gaps(&achieved_s))?;
    after.max_abs_shift_error = Some(
        (0..n)
            .map(|i| (achieved_s[i] - schedule.target_s[i]).abs())
            .fold(0.0, f64::max),
    );

    Ok(SimulationResult {
        nominal_s: schedule.nominal_s,
        target_s: schedule.target_s,
        achieved_s,
        target_shift,
        achieved_shift,
        before,
        after,
    })
}

/// Measures the projected length of every checker cell — a run of
/// `cell_px` adjacent pixels — as the arc span from the run's first landing
/// point to its last.
///
/// With `image` present the landing points come from the blind forward
/// model; without it they are the uncorrected nominal hits. Uniform cell
/// lengths mean a checkerboard would render with even squares.
pub fn checker_cells(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
    model: &PslmModel,
    image: Option<&PhaseImage>,
    cell_px: usize,
) -> Result<Vec<f64>> {
    let n = proj.n_cols();
    if cell_px < 2 || n % cell_px != 0 {
        return Err(Error::InvalidInput(format!(
            "checker cell of {cell_px} px must be at least 2 px and divide \
             the {n}-pixel row evenly"
        )));
    }
    let s = match image {
        Some(image) => forward_simulate(proj, surface, model, image)?.achieved_s,
        None => density::uniform_targets(proj, surface)?.nominal_s,
    };
    Ok((0..n / cell_px)
        .map(|c| s[c * cell_px + cell_px - 1] - s[c * cell_px])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::{compile_phase_image, WrapMode};
    use crate::device::{default_sweep, simulate_calibration};
    use crate::geometry::Vec2;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn model(levels: u32, pitch: f64) -> PslmModel {
        PslmModel::new(pitch, 5.32e-7, TAU, levels, 1.0, 8, 1.0).unwrap()
    }

    /// Drive image displaying, inside each block, an exact linear phase ramp
    /// of the given slope, continuous across block boundaries.
    fn per_block_ramp_image(slopes: &[f64], m: &PslmModel, rows: usize) -> PhaseImage {
        let b = m.block_size;
        let top = (m.levels - 1) as f64;
        let mut row = Vec::with_capacity(slopes.len() * b);
        let mut base = 0.0;
        for (i, &g) in slopes.iter().enumerate() {
            let x0 = (i * b) as f64 * m.pitch;
            for k in 0..b {
                let x = ((i * b + k) as f64 + 0.5) * m.pitch;
                let phi = base + g * (x - x0);
                let wrapped = phi.rem_euclid(m.phase_depth);
                let drive = ((wrapped / m.phase_depth * top) + 0.5).floor().min(top);
                row.push(drive as u16);
            }
            base += g * b as f64 * m.pitch;
        }
        PhaseImage::new(row, rows, top as u16).unwrap()
    }

    fn flat_surface() -> SurfaceProfile {
        SurfaceProfile::new(vec![Vec2::new(-2.0, 1.0), Vec2::new(2.0, 1.0)]).unwrap()
    }

    fn bent_demo() -> (ProjectorModel, SurfaceProfile) {
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            17f64.to_radians(),
            240,
        )
        .unwrap();
        let surface = SurfaceProfile::new(vec![
            Vec2::new(-0.35, 1.30),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.35, 1.0),
        ])
        .unwrap();
        (proj, surface)
    }

    #[test]
    fn unwrap_leaves_gentle_sequences_alone() {
        let seq = [0.0, 1.0, 2.5, 1.2, 3.0];
        assert_eq!(unwrap_phase_sequence(&seq, TAU), seq.to_vec());
    }

    #[test]
    fn unwrap_corrects_only_jumps_past_half_the_depth() {
        let below = [0.0, PI - 0.1];
        assert_eq!(unwrap_phase_sequence(&below, TAU), below.to_vec());
        let above = [0.0, PI + 0.1];
        let un = unwrap_phase_sequence(&above, TAU);
        assert!((un[1] - (PI + 0.1 - TAU)).abs() < 1e-15);
        let down = [PI + 0.1, 0.0];
        let un = unwrap_phase_sequence(&down, TAU);
        assert!((un[1] - TAU).abs() < 1e-15);
    }

    #[test]
    fn unwrap_hand_sawtooth() {
        // Stride-64 staircase at 256 levels: three 64-level steps then a
        // 63-level wrap step, totalling one full stroke per four cells.
        let m = model(256, 8e-6);
        let drives = [0u16, 64, 128, 192, 0, 64, 128, 192];
        let un = unwrap_phase_row(&drives, &m).unwrap();
        let expected = [0.0, 64.0, 128.0, 192.0, 255.0, 319.0, 383.0, 447.0];
        for (u, e) in un.iter().zip(expected) {
            assert!((u - TAU * e / 255.0).abs() < 1e-12, "{u} vs {e}");
        }
    }

    #[test]
    fn recovered_deflections_of_a_blank_image_are_exactly_zero() {
        let m = model(256, 8e-6);
        let image = PhaseImage::new(vec![0; 40], 1, 255).unwrap();
        let defl = recover_block_deflections(&image, &m).unwrap();
        assert_eq!(defl, vec![0.0; 5]);
    }

    #[test]
    fn recovered_deflections_match_the_ramps_displayed() {
        // High-resolution panel: quantization at 65536 levels perturbs each
        // recovered angle by well under a microradian.
        let m = model(65536, 3.74e-6);
        let nyq = m.nyquist_gradient();
        let slopes = [0.0, 0.3 * nyq, -0.5 * nyq, 0.8 * nyq, -0.8 * nyq, 0.1 * nyq];
        let image = per_block_ramp_image(&slopes, &m, 1);
        let defl = recover_block_deflections(&image, &m).unwrap();
        for (d, &g) in defl.iter().zip(&slopes) {
            let expected = (m.wavelength * g / TAU).asin();
            assert!(
                (d - expected).abs() < 1e-6,
                "recovered {d}, ramp says {expected}"
            );
        }
    }

    #[test]
    fn recovery_rejects_mismatched_images() {
        let m = model(256, 8e-6);
        let wrong_levels = PhaseImage::new(vec![0; 16], 1, 127).unwrap();
        assert!(matches!(
            recover_block_deflections(&wrong_levels, &m),
            Err(Error::InvalidInput(_))
        ));
        let ragged = PhaseImage::new(vec![0; 17], 1, 255).unwrap();
        assert!(matches!(
            recover_block_deflections(&ragged, &m),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn blank_image_lands_every_ray_exactly_on_its_nominal_point() {
        let m = model(256, 8e-6);
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            0.3,
            16,
        )
        .unwrap();
        let surface = flat_surface();
        let image = PhaseImage::new(vec![0; 16 * 8], 4, 255).unwrap();
        let sim = forward_simulate(&proj, &surface, &m, &image).unwrap();
        for i in 0..16 {
            assert_eq!(sim.achieved_s[i], sim.nominal_s[i]);
            assert_eq!(sim.achieved_shift[i], 0.0);
        }
        // A perpendicular flat screen under an equal-tangent fan is already
        // uniform, so the schedule asks for nothing.
        assert!(sim.before.cv < 1e-9);
        assert!(sim.after.cv < 1e-9);
        assert!(sim.after.max_abs_shift_error.unwrap() < 1e-12);
        assert!(sim.before.max_abs_shift_error.is_none());
    }

    #[test]
    fn uniform_ramp_steers_the_center_ray_by_the_grating_angle() {
        // Every block displays one cycle per 8 cells of an 8 um panel;
        // the center ray must land tan(asin(lambda / 64 um)) meters to the
        // right on a screen one meter away.
        let m = model(65536, 8e-6);
        let g = TAU / (8.0 * m.pitch);
        let slopes = vec![g; 17];
        let image = per_block_ramp_image(&slopes, &m, 1);
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            0.05,
            17,
        )
        .unwrap();
        let surface = flat_surface();
        let sim = forward_simulate(&proj, &surface, &m, &image).unwrap();
        let theta = (5.32e-7f64 / 64e-6).asin();
        assert!((theta - 8.3126e-3).abs() < 1e-6);
        let expected_shift = theta.tan();
        assert!(
            (sim.achieved_shift[8] - expected_shift).abs() < 2e-6,
            "center shift {} vs {}",
            sim.achieved_shift[8],
            expected_shift
        );
        // Positive slope means rightward, for every pixel.
        assert!(sim.achieved_shift.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn simulate_rejects_images_that_do_not_cover_the_fan() {
        let m = model(256, 8e-6);
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            0.3,
            16,
        )
        .unwrap();
        let image = PhaseImage::new(vec![0; 15 * 8], 1, 255).unwrap();
        assert!(matches!(
            forward_simulate(&proj, &flat_surface(), &m, &image),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn compiled_correction_evens_out_the_bent_surface() {
        let (proj, surface) = bent_demo();
        let m = model(1024, 3.74e-6);
        let lut = simulate_calibration(&m, &default_sweep(&m)).unwrap();
        let out =
            compile_phase_image(&proj, &surface, &m, &lut, 1, WrapMode::Wrap).unwrap();
        let sim = forward_simulate(&proj, &surface, &m, &out.image).unwrap();
        assert!(sim.before.cv > 0.1, "bent surface should start uneven");
        assert!(sim.after.cv < 0.02, "correction should even the gaps");
        // Landing order is preserved: no corrected ray overtakes another.
        for w in sim.achieved_s.windows(2) {
            assert!(w[1] > w[0]);
        }
        // The landing error stays well under one mean footprint.
        let err = sim.after.max_abs_shift_error.unwrap();
        assert!(err < 0.05 * sim.before.mean, "err {err}");
    }

    #[test]
    fn halving_the_drive_levels_at_most_doubles_the_landing_error() {
        let (proj, surface) = bent_demo();
        let mut errs = Vec::new();
        for levels in [256u32, 128] {
            let m = model(levels, 3.74e-6);
            let lut = simulate_calibration(&m, &default_sweep(&m)).unwrap();
            let out =
                compile_phase_image(&proj, &surface, &m, &lut, 1, WrapMode::Wrap).unwrap();
            let sim = forward_simulate(&proj, &surface, &m, &out.image).unwrap();
            errs.push(sim.after.max_abs_shift_error.unwrap());
        }
        assert!(errs.iter().all(|&e| e > 0.0));
        let ratio = errs[1] / errs[0];
        assert!(ratio <= 2.0, "128-level error grew {ratio}x over 256-level");
    }

    #[test]
    fn checker_cells_are_even_on_a_flat_screen_and_uneven_when_bent() {
        let m = model(256, 3.74e-6);
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            17f64.to_radians(),
            240,
        )
        .unwrap();
        let flat = flat_surface();
        let cells = checker_cells(&proj, &flat, &m, None, 8).unwrap();
        assert_eq!(cells.len(), 30);
        let report = density::uniformity_metrics(&cells).unwrap();
        assert!(report.cv < 1e-9);

        let (_, bent) = bent_demo();
        let cells = checker_cells(&proj, &bent, &m, None, 8).unwrap();
        let report = density::uniformity_metrics(&cells).unwrap();
        assert!(report.cv > 0.1);
    }

    #[test]
    fn checker_cells_reject_uneven_tilings() {
        let m = model(256, 8e-6);
        let proj = ProjectorModel::new(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            0.3,
            16,
        )
        .unwrap();
        assert!(matches!(
            checker_cells(&proj, &flat_surface(), &m, None, 7),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            checker_cells(&proj, &flat_surface(), &m, None, 1),
            Err(Error::InvalidInput(_))
        ));
    }

    proptest! {
        /// Adding a constant drive offset (modulo the stroke) changes every
        /// displayed phase by a constant, so the recovered gradients — and
        /// therefore every landing point — stay put.
        #[test]
        fn constant_drive_offset_does_not_move_landings(
            seed in 0u64..200,
            offset in 1u32..4000,
        ) {
            use rand::{Rng, SeedableRng};
            let m = model(4096, 3.74e-6);
            let nyq = m.nyquist_gradient();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Gentle enough that no deflected ray overtakes its neighbour
            // on the test geometry, keeping every landing gap positive.
            let slopes: Vec<f64> =
                (0..12).map(|_| rng.gen_range(-0.05 * nyq..0.05 * nyq)).collect();
            let image = per_block_ramp_image(&slopes, &m, 1);
            let span = (m.levels - 1) as u16;
            let shifted: Vec<u16> = image
                .row()
                .iter()
                .map(|&d| (d + offset as u16) % span)
                .collect();
            let image2 = PhaseImage::new(shifted, 1, span).unwrap();
            let proj = ProjectorModel::new(
                Vec2::new(0.0, 0.0),
                Vec2::new(0.0, 1.0),
                0.2,
                12,
            )
            .unwrap();
            let surface = flat_surface();
            let a = forward_simulate(&proj, &surface, &m, &image).unwrap();
            let b = forward_simulate(&proj, &surface, &m, &image2).unwrap();
            for i in 0..12 {
                prop_assert!((a.achieved_s[i] - b.achieved_s[i]).abs() < 1e-9);
            }
        }

        /// Unwrapping is exactly invariant to the starting offset: shifting
        /// a wrapped sequence by whole strokes never changes the gaps.
        #[test]
        fn unwrap_gaps_ignore_whole_stroke_offsets(
            phis in prop::collection::vec(0.0..TAU, 2..40),
        ) {
            let un = unwrap_phase_sequence(&phis, TAU);
            for (k, w) in phis.windows(2).enumerate() {
                let jump = w[1] - w[0];
                let step = un[k + 1] - un[k];
                // The unwrapped step equals the wrapped jump moved by 0 or
                // exactly one stroke, and always lies within half a stroke.
                prop_assert!((step - jump).abs() % TAU < 1e-9
                    || ((step - jump).abs() % TAU - TAU).abs() < 1e-9);
                prop_assert!(step.abs() <= PI + 1e-12);
            }
        }
    }
}
