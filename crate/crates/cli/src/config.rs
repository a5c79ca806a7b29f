//! Scenario configuration: a single JSON document validated fail-closed.
//!
//! Unknown keys are rejected so typos cannot silently fall back to
//! defaults, and every validation message names the offending field path.

use crate::error::CliError;
use phaseforge_core::compiler::WrapMode;
use phaseforge_core::device::PslmModel;
use phaseforge_core::geometry::{ProjectorModel, SurfaceProfile, Vec2};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub projector: ProjectorSection,
    pub surface: SurfaceSection,
    pub pslm: PslmSection,
    #[serde(default)]
    pub compile: CompileSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectorSection {
    /// Pinhole position, `[x_m, z_m]`.
    pub origin: [f64; 2],
    /// Unit optical axis, `[x, z]`.
    pub axis: [f64; 2],
    pub h_fov_deg: f64,
    pub n_cols: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    /// Cross-section polyline, `[[x_m, z_m], ...]`, ordered by image x.
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PslmSection {
    pub pitch_m: f64,
    pub wavelength_m: f64,
    #[serde(default = "default_phase_depth")]
    pub phase_depth_rad: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    pub ref_plane_distance_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileSection {
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default)]
    pub wrap_mode: WrapModeName,
    #[serde(default = "default_sweep_steps")]
    pub sweep_steps: usize,
}

impl Default for CompileSection {
    fn default() -> CompileSection {
        CompileSection {
            rows: default_rows(),
            wrap_mode: WrapModeName::Wrap,
            sweep_steps: default_sweep_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WrapModeName {
    #[default]
    Wrap,
    Strict,
}

fn default_phase_depth() -> f64 {
    std::f64::consts::TAU
}
fn default_levels() -> u32 {
    256
}
fn default_gamma() -> f64 {
    1.0
}
fn default_block_size() -> usize {
    8
}
fn default_rows() -> usize {
    1
}
fn default_sweep_steps() -> usize {
    33
}

/// A fully validated scenario: every model constructed and every module
/// invariant re-checked.
#[derive(Debug, Clone)]
pub struct Scene {
    pub projector: ProjectorModel,
    pub surface: SurfaceProfile,
    pub pslm: PslmModel,
    pub rows: usize,
    pub wrap_mode: WrapMode,
    pub sweep_steps: usize,
}

impl ScenarioConfig {
    /// Builds the domain models, attributing any validation failure to its
    /// config field path.
    pub fn build(&self) -> Result<Scene, CliError> {
        // Scalar field checks come first so failures cite exact paths; the
        // model constructors then re-verify everything as a backstop.
        let p = &self.projector;
        let axis_norm = (p.axis[0] * p.axis[0] + p.axis[1] * p.axis[1]).sqrt();
        if (axis_norm - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "projector.axis: must be unit length, |axis| = {axis_norm}"
            )));
        }
        if !(p.h_fov_deg > 0.0 && p.h_fov_deg < 180.0) {
            return Err(CliError::Config(format!(
                "projector.h_fov_deg: must be in (0, 180), got {}",
                p.h_fov_deg
            )));
        }
        if p.n_cols < 2 {
            return Err(CliError::Config(format!(
                "projector.n_cols: need at least 2 pixel columns, got {}",
                p.n_cols
            )));
        }
        let projector = ProjectorModel::new(
            Vec2::new(p.origin[0], p.origin[1]),
            Vec2::new(p.axis[0], p.axis[1]),
            p.h_fov_deg.to_radians(),
            p.n_cols,
        )
        .map_err(|e| CliError::Config(format!("projector: {e}")))?;
        let vertices: Vec<Vec2> =
            self.surface.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        let surface = SurfaceProfile::new(vertices)
            .map_err(|e| CliError::Config(format!("surface.vertices: {e}")))?;
        let m = &self.pslm;
        for (field, value) in [
            ("pslm.pitch_m", m.pitch_m),
            ("pslm.wavelength_m", m.wavelength_m),
            ("pslm.phase_depth_rad", m.phase_depth_rad),
            ("pslm.gamma", m.gamma),
            ("pslm.ref_plane_distance_m", m.ref_plane_distance_m),
        ] {
            if !(value > 0.0) {
                return Err(CliError::Config(format!(
                    "{field}: must be positive, got {value}"
                )));
            }
        }
        if !(2..=65536).contains(&m.levels) {
            return Err(CliError::Config(format!(
                "pslm.levels: must be in [2, 65536], got {}",
                m.levels
            )));
        }
        if m.block_size < 2 {
            return Err(CliError::Config(format!(
                "pslm.block_size: must be at least 2 cells, got {}",
                m.block_size
            )));
        }
        let pslm = PslmModel::new(
            m.pitch_m,
            m.wavelength_m,
            m.phase_depth_rad,
            m.levels,
            m.gamma,
            m.block_size,
            m.ref_plane_distance_m,
        )
        .map_err(|e| CliError::Config(format!("pslm: {e}")))?;
        let c = &self.compile;
        if c.rows == 0 {
            return Err(CliError::Config("compile.rows: must be at least 1".into()));
        }
        phaseforge_core::device::sweep_increments(c.sweep_steps, 1.0)
            .map_err(|e| CliError::Config(format!("compile.sweep_steps: {e}")))?;
        let wrap_mode = match c.wrap_mode {
            WrapModeName::Wrap => WrapMode::Wrap,
            WrapModeName::Strict => WrapMode::Strict,
        };
        Ok(Scene {
            projector,
            surface,
            pslm,
            rows: c.rows,
            wrap_mode,
            sweep_steps: c.sweep_steps,
        })
    }
}

/// Reads, parses and validates a scenario config file.
pub fn load_scene(path: &Path) -> Result<Scene, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let config: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    config.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_json() -> String {
        r#"{
            "projector": {"origin": [0.0, 0.0], "axis": [0.0, 1.0], "h_fov_deg": 17.0, "n_cols": 240},
            "surface": {"vertices": [[-0.35, 1.30], [0.0, 1.0], [0.35, 1.0]]},
            "pslm": {"pitch_m": 3.74e-6, "wavelength_m": 5.32e-7, "levels": 1024, "ref_plane_distance_m": 1.0},
            "compile": {"rows": 64}
        }"#
        .to_string()
    }

    #[test]
    fn demo_config_parses_with_defaults() {
        let config: ScenarioConfig = serde_json::from_str(&demo_json()).unwrap();
        let scene = config.build().unwrap();
        assert_eq!(scene.projector.n_cols(), 240);
        assert_eq!(scene.pslm.levels, 1024);
        assert_eq!(scene.pslm.gamma, 1.0);
        assert_eq!(scene.pslm.block_size, 8);
        assert!((scene.pslm.phase_depth - std::f64::consts::TAU).abs() < 1e-15);
        assert_eq!(scene.rows, 64);
        assert!(matches!(scene.wrap_mode, WrapMode::Wrap));
        assert_eq!(scene.sweep_steps, 33);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = demo_json().replace("\"n_cols\"", "\"n_colz\"");
        let err = serde_json::from_str::<ScenarioConfig>(&bad).unwrap_err();
        assert!(err.to_string().contains("n_colz"));
    }

    #[test]
    fn bad_levels_cites_the_field_path() {
        let bad = demo_json().replace("\"levels\": 1024", "\"levels\": 1");
        let config: ScenarioConfig = serde_json::from_str(&bad).unwrap();
        match config.build() {
            Err(CliError::Config(msg)) => assert!(msg.contains("pslm.levels"), "{msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_axis_cites_the_projector_field() {
        let bad = demo_json().replace("[0.0, 1.0], \"h_fov", "[0.0, 2.0], \"h_fov");
        let config: ScenarioConfig = serde_json::from_str(&bad).unwrap();
        match config.build() {
            Err(CliError::Config(msg)) => {
                assert!(msg.starts_with("projector.axis:"), "{msg}")
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn strict_wrap_mode_round_trips() {
        let strict = demo_json().replace("\"rows\": 64", "\"rows\": 2, \"wrap_mode\": \"strict\"");
        let config: ScenarioConfig = serde_json::from_str(&strict).unwrap();
        let scene = config.build().unwrap();
        assert!(matches!(scene.wrap_mode, WrapMode::Strict));
    }

    #[test]
    fn even_sweep_steps_are_rejected_with_path() {
        let bad = demo_json().replace("\"rows\": 64", "\"rows\": 1, \"sweep_steps\": 10");
        let config: ScenarioConfig = serde_json::from_str(&bad).unwrap();
        match config.build() {
            Err(CliError::Config(msg)) => {
                assert!(msg.starts_with("compile.sweep_steps:"), "{msg}")
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
