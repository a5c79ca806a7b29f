//! Subcommand implementations: calibrate, compile, simulate, report, demo.
//!
//! Commands pass state to each other only through files, every file is
//! written atomically, and identical inputs produce byte-identical outputs
//! (no timestamps, no environment-dependent text).

use crate::config::{self, CompileSection, PslmSection, ProjectorSection, ScenarioConfig, Scene, SurfaceSection};
use crate::error::CliError;
use crate::svg;
use phaseforge_core::compiler::{compile_phase_image, CompileOutput};
use phaseforge_core::density::{uniformity_metrics, UniformityReport};
use phaseforge_core::device::{simulate_calibration, sweep_increments, DeflectionLut};
use phaseforge_core::formats::{self, SimRecord};
use phaseforge_core::geometry::pixel_footprints;
use phaseforge_core::simulator::{checker_cells, forward_simulate, SimulationResult};
use std::path::Path;

/// Checker-cell width used by the demo scenarios, pixels.
const DEMO_CELL_PX: usize = 8;

fn build_sweep(scene: &Scene) -> Result<Vec<f64>, CliError> {
    let max_delta = (scene.pslm.levels - 1) as f64 / 4.0;
    Ok(sweep_increments(scene.sweep_steps, max_delta)?)
}

fn calibrate_scene(scene: &Scene) -> Result<DeflectionLut, CliError> {
    let sweep = build_sweep(scene)?;
    Ok(simulate_calibration(&scene.pslm, &sweep)?)
}

/// Runs the calibration campaign for a scenario and writes the deflection
/// table CSV.
pub fn cmd_calibrate(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let scene = config::load_scene(config_path)?;
    let lut = calibrate_scene(&scene)?;
    formats::write_atomic(out, formats::lut_csv(lut.entries()).as_bytes())?;
    println!("knots: {}", lut.entries().len());
    println!("max shift: {} m", lut.max_shift());
    Ok(())
}

fn compile_scene(scene: &Scene, lut: &DeflectionLut) -> Result<CompileOutput, CliError> {
    Ok(compile_phase_image(
        &scene.projector,
        &scene.surface,
        &scene.pslm,
        lut,
        scene.rows,
        scene.wrap_mode,
    )?)
}

fn write_compile_outputs(
    out_dir: &Path,
    scene: &Scene,
    out: &CompileOutput,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)?;
    formats::write_atomic(&out_dir.join("phase.pgm"), &formats::pgm_bytes(&out.image))?;
    formats::write_atomic(
        &out_dir.join("phase.pgm.json"),
        formats::image_metadata_json(&out.image, &scene.pslm, out.wrap_count_per_row)
            .as_bytes(),
    )?;
    formats::write_atomic(
        &out_dir.join("plan.csv"),
        formats::plan_csv(&out.targets, &out.plan).as_bytes(),
    )?;
    Ok(())
}

/// Compiles the phase image for a scenario and writes `phase.pgm`,
/// `phase.pgm.json` and `plan.csv` into the output directory. Nothing is
/// written unless the whole compilation succeeds.
pub fn cmd_compile(config_path: &Path, lut_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let scene = config::load_scene(config_path)?;
    let entries = formats::parse_lut_csv(&std::fs::read(lut_path)?)?;
    let lut = DeflectionLut::new(entries)?;
    let out = compile_scene(&scene, &lut)?;
    write_compile_outputs(out_dir, &scene, &out)?;
    println!(
        "phase image: {}x{}, {} wrap seams per row",
        out.image.width, out.image.height, out.wrap_count_per_row
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct GapStats {
    mean_m: f64,
    stdev_m: f64,
    cv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_shift_error_m: Option<f64>,
}

impl GapStats {
    fn of(report: &UniformityReport) -> GapStats {
        GapStats {
            mean_m: report.mean,
            stdev_m: report.stdev,
            cv: report.cv,
            max_abs_shift_error_m: report.max_abs_shift_error,
        }
    }
}

#[derive(serde::Serialize)]
struct SimSummary {
    before: GapStats,
    after: GapStats,
}

fn sim_records(sim: &SimulationResult) -> Vec<SimRecord> {
    (0..sim.nominal_s.len())
        .map(|i| SimRecord {
            pixel: i,
            nominal_s: sim.nominal_s[i],
            target_s: sim.target_s[i],
            achieved_s: sim.achieved_s[i],
            target_shift: sim.target_shift[i],
            achieved_shift: sim.achieved_shift[i],
        })
        .collect()
}

/// Runs the blind forward model on a phase image and writes the per-pixel
/// outcome CSV; prints a JSON uniformity summary.
pub fn cmd_simulate(config_path: &Path, phase: &Path, out: &Path) -> Result<(), CliError> {
    let scene = config::load_scene(config_path)?;
    let image = formats::parse_pgm(&std::fs::read(phase)?)?;
    let sim = forward_simulate(&scene.projector, &scene.surface, &scene.pslm, &image)?;
    formats::write_atomic(out, formats::sim_csv(&sim).as_bytes())?;
    let summary = SimSummary {
        before: GapStats::of(&sim.before),
        after: GapStats::of(&sim.after),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn render_report(records: &[SimRecord]) -> String {
    let x: Vec<f64> = records.iter().map(|r| r.nominal_s).collect();
    let series = [
        svg::Series {
            name: "target shift",
            color: "#1f77b4",
            y: records.iter().map(|r| r.target_shift * 1e3).collect(),
        },
        svg::Series {
            name: "achieved shift",
            color: "#d62728",
            y: records.iter().map(|r| r.achieved_shift * 1e3).collect(),
        },
    ];
    svg::line_plot(
        "pixel shift along the surface",
        "nominal landing position [m]",
        "pixel shift [mm]",
        &x,
        &series,
    )
}

/// Plots target vs achieved shift from a simulation CSV as an SVG chart.
pub fn cmd_report(sim_csv: &Path, out: &Path) -> Result<(), CliError> {
    let records = formats::parse_sim_csv(&std::fs::read(sim_csv)?)?;
    formats::write_atomic(out, render_report(&records).as_bytes())?;
    println!("plotted {} pixels", records.len());
    Ok(())
}

/// Built-in demo scenarios.
fn demo_config(name: &str) -> Option<ScenarioConfig> {
    let surface = match name {
        "bent-surface" => SurfaceSection {
            vertices: vec![[-0.35, 1.30], [0.0, 1.0], [0.35, 1.0]],
        },
        "flat" => SurfaceSection { vertices: vec![[-0.5, 1.0], [0.5, 1.0]] },
        _ => return None,
    };
    Some(ScenarioConfig {
        projector: ProjectorSection {
            origin: [0.0, 0.0],
            axis: [0.0, 1.0],
            h_fov_deg: 17.0,
            n_cols: 240,
        },
        surface,
        pslm: PslmSection {
            pitch_m: 3.74e-6,
            wavelength_m: 5.32e-7,
            phase_depth_rad: std::f64::consts::TAU,
            levels: 1024,
            gamma: 1.0,
            block_size: 8,
            ref_plane_distance_m: 1.0,
        },
        compile: CompileSection {
            rows: 64,
            wrap_mode: config::WrapModeName::Wrap,
            sweep_steps: 33,
        },
    })
}

#[derive(serde::Serialize)]
struct DemoSummary<'a> {
    name: &'a str,
    h_fov_deg: f64,
    n_cols: usize,
    surface_vertices: Vec<[f64; 2]>,
    pitch_m: f64,
    wavelength_m: f64,
    phase_depth_rad: f64,
    levels: u32,
    gamma: f64,
    block_size: usize,
    ref_plane_distance_m: f64,
    rows: usize,
    lut_knots: usize,
    lut_max_shift_m: f64,
    max_deflection_rad: f64,
    nyquist_deflection_rad: f64,
    deflection_budget_utilization: f64,
    wrap_count_per_row: usize,
    mean_footprint_m: f64,
    cv_before: f64,
    cv_after: f64,
    max_abs_shift_error_m: f64,
    shift_error_vs_mean_footprint: f64,
    checker_cell_px: usize,
    checker_cv_before: f64,
    checker_cv_after: f64,
}

/// Runs a named scenario end to end, writing every pipeline artifact into
/// the output directory: `lut.csv`, `phase.pgm` (+ metadata sidecar),
/// `plan.csv`, `sim.csv`, `report.svg`, `checker_before.csv`,
/// `checker_after.csv` and `summary.json`.
pub fn cmd_demo(name: &str, out_dir: &Path) -> Result<(), CliError> {
    let raw = demo_config(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown demo `{name}`; available: bent-surface, flat"
        ))
    })?;
    let scene = raw.build()?;

    let lut = calibrate_scene(&scene)?;
    let out = compile_scene(&scene, &lut)?;

    // The built-in scenario must stay comfortably inside the panel's
    // steering range: no pixel may need more than 80% of the aliasing
    // deflection limit. The margin used is recorded in summary.json.
    let max_deflection = out
        .targets
        .deflection
        .iter()
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    let nyquist = scene.pslm.nyquist_deflection();
    if max_deflection > 0.8 * nyquist {
        return Err(CliError::Config(format!(
            "demo `{name}` needs a {max_deflection} rad deflection, over 80% of \
             the {nyquist} rad aliasing limit; reduce the field of view or tilt"
        )));
    }

    let sim = forward_simulate(&scene.projector, &scene.surface, &scene.pslm, &out.image)?;
    let before_cells =
        checker_cells(&scene.projector, &scene.surface, &scene.pslm, None, DEMO_CELL_PX)?;
    let after_cells = checker_cells(
        &scene.projector,
        &scene.surface,
        &scene.pslm,
        Some(&out.image),
        DEMO_CELL_PX,
    )?;
    let checker_cv_before = uniformity_metrics(&before_cells)?.cv;
    let checker_cv_after = uniformity_metrics(&after_cells)?.cv;
    let footprints = pixel_footprints(&scene.projector, &scene.surface)?;
    let mean_footprint = uniformity_metrics(&footprints)?.mean;
    let max_err = sim
        .after
        .max_abs_shift_error
        .expect("forward simulation reports the landing error");

    std::fs::create_dir_all(out_dir)?;
    formats::write_atomic(&out_dir.join("lut.csv"), formats::lut_csv(lut.entries()).as_bytes())?;
    write_compile_outputs(out_dir, &scene, &out)?;
    formats::write_atomic(&out_dir.join("sim.csv"), formats::sim_csv(&sim).as_bytes())?;
    formats::write_atomic(
        &out_dir.join("report.svg"),
        render_report(&sim_records(&sim)).as_bytes(),
    )?;
    formats::write_atomic(
        &out_dir.join("checker_before.csv"),
        formats::checker_csv(&before_cells, DEMO_CELL_PX).as_bytes(),
    )?;
    formats::write_atomic(
        &out_dir.join("checker_after.csv"),
        formats::checker_csv(&after_cells, DEMO_CELL_PX).as_bytes(),
    )?;
    let summary = DemoSummary {
        name,
        h_fov_deg: raw.projector.h_fov_deg,
        n_cols: raw.projector.n_cols,
        surface_vertices: raw.surface.vertices.clone(),
        pitch_m: scene.pslm.pitch,
        wavelength_m: scene.pslm.wavelength,
        phase_depth_rad: scene.pslm.phase_depth,
        levels: scene.pslm.levels,
        gamma: scene.pslm.gamma,
        block_size: scene.pslm.block_size,
        ref_plane_distance_m: scene.pslm.ref_plane_distance,
        rows: scene.rows,
        lut_knots: lut.entries().len(),
        lut_max_shift_m: lut.max_shift(),
        max_deflection_rad: max_deflection,
        nyquist_deflection_rad: nyquist,
        deflection_budget_utilization: max_deflection / nyquist,
        wrap_count_per_row: out.wrap_count_per_row,
        mean_footprint_m: mean_footprint,
        cv_before: sim.before.cv,
        cv_after: sim.after.cv,
        max_abs_shift_error_m: max_err,
        shift_error_vs_mean_footprint: max_err / mean_footprint,
        checker_cell_px: DEMO_CELL_PX,
        checker_cv_before,
        checker_cv_after,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    formats::write_atomic(&out_dir.join("summary.json"), json.as_bytes())?;

    println!("demo `{name}`:");
    println!("  gap cv before = {}", sim.before.cv);
    println!("  gap cv after  = {}", sim.after.cv);
    println!("  max landing error = {max_err} m ({:.4} of mean footprint)", max_err / mean_footprint);
    println!("  wrote {}", out_dir.display());
    Ok(())
}
