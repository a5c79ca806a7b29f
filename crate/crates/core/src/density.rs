//! Target scheduling and uniformity metrics.
//!
//! Uncorrected pixel rays land wherever the fan geometry puts them; this
//! module redistributes those landing points uniformly in arc length along
//! the surface and computes the signed ray deflection each pixel needs to
//! reach its reassigned target.

use crate::error::{Error, Result};
use crate::geometry::{signed_deflection, ProjectorModel, SurfaceProfile};

/// Nominal landing points and their uniformly spaced replacements, both as
/// arc-length coordinates in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSchedule {
    /// Where each pixel's undeflected chief ray lands.
    pub nominal_s: Vec<f64>,
    /// Uniformly spaced targets anchored at the first and last nominal hits.
    pub target_s: Vec<f64>,
}

/// A target schedule plus the per-pixel deflection angles that realize it.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPlan {
    pub nominal_s: Vec<f64>,
    pub target_s: Vec<f64>,
    /// Signed deflection per pixel, radians, positive toward increasing
    /// image x.
    pub deflection: Vec<f64>,
}

/// Spread statistics over a set of positive lengths (footprints or gaps).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UniformityReport {
    /// The individual sample values, meters.
    pub footprints: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub stdev: f64,
    /// Coefficient of variation, `stdev / mean`.
    pub cv: f64,
    /// Largest |achieved - target| landing error, meters. Only present for
    /// reports produced after a correction pass.
    pub max_abs_shift_error: Option<f64>,
}

/// Computes mean, population standard deviation and coefficient of
/// variation over per-pixel footprint lengths.
pub fn uniformity_metrics(footprints: &[f64]) -> Result<UniformityReport> {
    if footprints.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (i, &f) in footprints.iter().enumerate() {
        if !(f > 0.0) {
            return Err(Error::NonPositiveFootprint { pixel: i });
        }
    }
    let n = footprints.len() as f64;
    let mean = footprints.iter().sum::<f64>() / n;
    let var = footprints.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n;
    let stdev = var.sqrt();
    Ok(UniformityReport {
        footprints: footprints.to_vec(),
        mean,
        stdev,
        cv: stdev / mean,
        max_abs_shift_error: None,
    })
}

/// Intersects every pixel's chief ray with the surface and replaces the
/// landing points with a uniform arc-length grid spanning the same range.
///
/// The first and last targets coincide exactly with the first and last
/// nominal hits, so the correction never pushes light off the illuminated
/// span. Nominal landing coordinates must be strictly increasing across the
/// fan (the surface is traversed monotonically by image x).
pub fn uniform_targets(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
) -> Result<TargetSchedule> {
    let n = proj.n_cols();
    let mut nominal_s = Vec::with_capacity(n);
    for i in 0..n {
        let ray = proj.pixel_ray(i as f64);
        let hit = surface
            .intersect(ray)
            .and_then(|h| h.ok_or(Error::NoIntersection { pixel: None }))
            .map_err(|e| e.with_pixel(i))?;
        nominal_s.push(hit.s);
    }
    for i in 1..n {
        if nominal_s[i] <= nominal_s[i - 1] {
            return Err(Error::InvalidInput(format!(
                "nominal landing points must increase with pixel index; \
                 pixel {i} lands at {} m after pixel {} at {} m",
                nominal_s[i],
                i - 1,
                nominal_s[i - 1]
            )));
        }
    }
    let s_first = nominal_s[0];
    let s_last = nominal_s[n - 1];
    let step = (s_last - s_first) / (n - 1) as f64;
    let mut target_s: Vec<f64> = (0..n).map(|i| s_first + i as f64 * step).collect();
    // Anchor the endpoint exactly; accumulated rounding must not move it.
    target_s[n - 1] = s_last;
    Ok(TargetSchedule { nominal_s, target_s })
}

/// Maximum distance between where a deflected ray lands and its assigned
/// target point before the plan is rejected.
const TARGET_HIT_TOL: f64 = 1e-9;

/// Deflections smaller than this are numerical noise from reconstructing
/// target points (three orders of magnitude below the 1e-9 m positional
/// tolerance at meter scale) and collapse to exactly zero, so an
/// already-uniform geometry compiles to an exactly blank correction.
const DEFLECTION_NOISE_FLOOR: f64 = 1e-12;

/// Computes, for every pixel, the signed rotation that steers its chief ray
/// from the nominal landing point to the scheduled target point, and
/// verifies by re-intersection that the rotated ray actually arrives there.
pub fn required_deflections(
    proj: &ProjectorModel,
    surface: &SurfaceProfile,
    schedule: &TargetSchedule,
) -> Result<TargetPlan> {
    let n = proj.n_cols();
    if schedule.nominal_s.len() != n || schedule.target_s.len() != n {
        return Err(Error::InvalidInput(format!(
            "schedule length {} does not match {} projector columns",
            schedule.target_s.len(),
            n
        )));
    }
    let mut deflection = Vec::with_capacity(n);
    for i in 0..n {
        let ray = proj.pixel_ray(i as f64);
        let target_point = surface.point_at_arclength(schedule.target_s[i])?;
        let to_target = target_point.sub(ray.origin);
        let mut angle = signed_deflection(ray.dir, to_target);
        if angle.abs() < DEFLECTION_NOISE_FLOOR {
            angle = 0.0;
        }
        if !(angle.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidInput(format!(
                "pixel {i} needs a deflection of {angle} rad; \
                 correction only supports |angle| < pi/2"
            )));
        }
        // Confirm the rotated ray reaches the target: the target must be the
        // first surface crossing, not hidden behind a nearer fold.
        let rotated = crate::geometry::Ray {
            origin: ray.origin,
            dir: ray.dir.rotated_cw(angle),
        };
        let hit = surface
            .intersect(rotated)
            .and_then(|h| h.ok_or(Error::NoIntersection { pixel: None }))
            .map_err(|e| e.with_pixel(i))?;
        let missed_by = hit.point.sub(target_point).norm();
        if missed_by > TARGET_HIT_TOL {
            return Err(Error::TargetUnreachable { pixel: i, missed_by });
        }
        deflection.push(angle);
    }
    Ok(TargetPlan {
        nominal_s: schedule.nominal_s.clone(),
        target_s: schedule.target_s.clone(),
        deflection,
    })
}
