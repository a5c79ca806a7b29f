//! End-to-end pipeline checks: calibrate, compile, serialize, re-read, and
//! verify blind — the full loop a deployment would run, with no state
//! passed between stages except bytes.

use phaseforge_core::compiler::{compile_phase_image, WrapMode};
use phaseforge_core::density;
use phaseforge_core::device::{default_sweep, simulate_calibration, PslmModel};
use phaseforge_core::formats;
use phaseforge_core::geometry::{pixel_footprints, ProjectorModel, SurfaceProfile, Vec2};
use phaseforge_core::simulator::{checker_cells, forward_simulate};
use std::f64::consts::TAU;

fn bent_scene() -> (ProjectorModel, SurfaceProfile, PslmModel) {
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
    let model = PslmModel::new(3.74e-6, 5.32e-7, TAU, 1024, 1.0, 8, 1.0).unwrap();
    (proj, surface, model)
}

#[test]
fn bent_surface_pipeline_end_to_end() {
    let (proj, surface, model) = bent_scene();
    let lut = simulate_calibration(&model, &default_sweep(&model)).unwrap();
    let out = compile_phase_image(&proj, &surface, &model, &lut, 4, WrapMode::Wrap).unwrap();

    // The correction this scene needs: about 30 milliradians at the deep
    // end of the tilted segment, zero at the anchored edges.
    let max_defl = out
        .targets
        .deflection
        .iter()
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    eprintln!("max |deflection| = {max_defl}");
    assert!(max_defl > 0.029 && max_defl < 0.032, "{max_defl}");
    assert_eq!(*out.targets.deflection.first().unwrap(), 0.0);
    assert_eq!(*out.targets.deflection.last().unwrap(), 0.0);
    eprintln!("wrap seams per row = {}", out.wrap_count_per_row);
    assert!(
        out.wrap_count_per_row > 150 && out.wrap_count_per_row < 320,
        "{}",
        out.wrap_count_per_row
    );

    // Serialize, re-read, and hand only the bytes to the simulator.
    let bytes = formats::pgm_bytes(&out.image);
    let reread = formats::parse_pgm(&bytes).unwrap();
    assert_eq!(reread, out.image);
    let sim = forward_simulate(&proj, &surface, &model, &reread).unwrap();

    let fp = pixel_footprints(&proj, &surface).unwrap();
    let fp_report = density::uniformity_metrics(&fp).unwrap();
    eprintln!(
        "footprints: mean = {}, cv = {}",
        fp_report.mean, fp_report.cv
    );
    eprintln!("gap cv before = {}, after = {}", sim.before.cv, sim.after.cv);
    let err = sim.after.max_abs_shift_error.unwrap();
    eprintln!(
        "max landing error = {err} ({} of mean footprint)",
        err / fp_report.mean
    );
    assert!(sim.before.cv > 0.1);
    assert!(sim.after.cv < 0.02);
    assert!(err < 0.05 * fp_report.mean);

    // Checker uniformity: even 8-pixel cells after correction.
    let before = checker_cells(&proj, &surface, &model, None, 8).unwrap();
    let after = checker_cells(&proj, &surface, &model, Some(&reread), 8).unwrap();
    let cv_before = density::uniformity_metrics(&before).unwrap().cv;
    let cv_after = density::uniformity_metrics(&after).unwrap().cv;
    eprintln!("checker cv before = {cv_before}, after = {cv_after}");
    assert!(cv_before > 0.1);
    assert!(cv_after < 0.02);

    // Deterministic: a second compile produces byte-identical output.
    let again = compile_phase_image(&proj, &surface, &model, &lut, 4, WrapMode::Wrap).unwrap();
    assert_eq!(formats::pgm_bytes(&again.image), bytes);
}

#[test]
fn blind_simulator_notices_a_tampered_image() {
    let (proj, surface, model) = bent_scene();
    let lut = simulate_calibration(&model, &default_sweep(&model)).unwrap();
    let out = compile_phase_image(&proj, &surface, &model, &lut, 1, WrapMode::Wrap).unwrap();
    let honest = forward_simulate(&proj, &surface, &model, &out.image).unwrap();
    let honest_err = honest.after.max_abs_shift_error.unwrap();

    // Steepen one pixel's ramp by two extra drive levels per cell — a
    // change invisible to anything reading the compiler's plan, but the
    // simulator reads only the image, so that pixel's recovered deflection
    // and landing point must move.
    let b = model.block_size;
    let span = (model.levels - 1) as u16;
    let mut row = out.image.row().to_vec();
    for (k, cell) in row[120 * b..121 * b].iter_mut().enumerate() {
        *cell = (*cell + 2 * k as u16) % span;
    }
    let tampered =
        phaseforge_core::compiler::PhaseImage::new(row, 1, out.image.maxval).unwrap();
    let sim = forward_simulate(&proj, &surface, &model, &tampered).unwrap();
    let tampered_err = sim.after.max_abs_shift_error.unwrap();
    eprintln!("landing error honest = {honest_err}, tampered = {tampered_err}");
    assert!(tampered_err > 4.0 * honest_err);
    // And the damage is localized to the sabotaged pixel.
    let worst = (0..240)
        .max_by(|&a, &b| {
            let ea = (sim.achieved_s[a] - sim.target_s[a]).abs();
            let eb = (sim.achieved_s[b] - sim.target_s[b]).abs();
            ea.total_cmp(&eb)
        })
        .unwrap();
    assert_eq!(worst, 120);
}

#[test]
fn flat_scene_compiles_to_silence_and_simulates_to_identity() {
    let proj = ProjectorModel::new(
        Vec2::new(0.0, 0.0),
        Vec2::new(0.0, 1.0),
        17f64.to_radians(),
        240,
    )
    .unwrap();
    let surface =
        SurfaceProfile::new(vec![Vec2::new(-0.5, 1.0), Vec2::new(0.5, 1.0)]).unwrap();
    let model = PslmModel::new(3.74e-6, 5.32e-7, TAU, 1024, 1.0, 8, 1.0).unwrap();
    let lut = simulate_calibration(&model, &default_sweep(&model)).unwrap();
    let out = compile_phase_image(&proj, &surface, &model, &lut, 2, WrapMode::Wrap).unwrap();
    assert!(out.image.row().iter().all(|&d| d == 0));
    let sim = forward_simulate(&proj, &surface, &model, &out.image).unwrap();
    assert!(sim.achieved_shift.iter().all(|&d| d == 0.0));
    let fp = pixel_footprints(&proj, &surface).unwrap();
    let report = density::uniformity_metrics(&fp).unwrap();
    assert!(report.cv < 1e-9);
}
