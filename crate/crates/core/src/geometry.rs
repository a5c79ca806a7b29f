//! Two-dimensional cross-section geometry: vectors, rays, the projector
//! model and the piecewise-linear surface profile.
//!
//! Everything lives in a vertical slice through the projection volume. The
//! image axis of the projector maps to the x direction of that slice; "image
//! x" increases toward the projector's right-hand side when looking along
//! its optical axis. Positive rotation angles turn a ray clockwise, i.e.
//! toward increasing image x.

use crate::error::{Error, Result};

/// Maximum distance between a point and the surface for the point to be
/// accepted as "on" the surface, and for two hits to be merged as one.
const POINT_TOL: f64 = 1e-9;

/// Absolute tie window on ray parameters for ambiguity detection.
const RAY_T_TIE: f64 = 1e-12;

/// A 2D vector (or point) in the cross-section plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Z component of the 3D cross product of the two vectors lifted into
    /// the plane z = 0.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalize(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotates the vector clockwise (toward increasing image x for a vector
    /// near the projector axis) by `angle` radians.
    pub fn rotated_cw(self, angle: f64) -> Vec2 {
        let (sin, cos) = angle.sin_cos();
        Vec2::new(self.x * cos + self.y * sin, -self.x * sin + self.y * cos)
    }
}

/// A half-line: origin plus non-negative multiples of a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    pub dir: Vec2,
}

impl Ray {
    pub fn point_at(self, t: f64) -> Vec2 {
        self.origin.add(self.dir.scale(t))
    }
}

/// Signed angle that rotates `from` onto `to`, positive clockwise (toward
/// increasing image x). Result is in `(-pi, pi]`.
pub fn signed_deflection(from: Vec2, to: Vec2) -> f64 {
    f64::atan2(to.cross(from), from.dot(to))
}

/// Where a ray met the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitPoint {
    /// Intersection point in world coordinates.
    pub point: Vec2,
    /// Arc-length coordinate of the intersection along the surface, meters
    /// from the first vertex.
    pub s: f64,
    /// Index of the polyline segment containing the hit.
    pub segment: usize,
    /// Ray parameter (distance from the ray origin, since directions are
    /// unit length).
    pub t: f64,
}

/// Pinhole projector emitting a fan of pixel rays in the cross-section
/// plane.
///
/// Pixel rays are spaced uniformly in the tangent of the field angle, which
/// models a flat image plane perpendicular to the optical axis: equal pixel
/// pitches on the panel map to equal tangent steps in the fan.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorModel {
    origin: Vec2,
    axis: Vec2,
    /// Unit vector perpendicular to the axis, pointing toward increasing
    /// image x.
    right: Vec2,
    h_fov: f64,
    n_cols: usize,
    half_tan: f64,
}

impl ProjectorModel {
    /// Creates a projector at `origin` looking along `axis` (must be unit
    /// length within 1e-12), with full horizontal field of view `h_fov`
    /// radians in `(0, pi)` spread across `n_cols >= 2` pixel columns.
    pub fn new(origin: Vec2, axis: Vec2, h_fov: f64, n_cols: usize) -> Result<ProjectorModel> {
        if (axis.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "projector axis must be unit length, got |axis| = {}",
                axis.norm()
            )));
        }
        if !(h_fov > 0.0 && h_fov < std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!(
                "horizontal field of view must be in (0, pi) rad, got {h_fov}"
            )));
        }
        if n_cols < 2 {
            return Err(Error::InvalidInput(format!(
                "projector needs at least 2 pixel columns, got {n_cols}"
            )));
        }
        let right = Vec2::new(axis.y, -axis.x);
        Ok(ProjectorModel {
            origin,
            axis,
            right,
            h_fov,
            n_cols,
            half_tan: (h_fov / 2.0).tan(),
        })
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn axis(&self) -> Vec2 {
        self.axis
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn h_fov(&self) -> f64 {
        self.h_fov
    }

    /// Ray through (possibly fractional) pixel column `i`. Integer indices
    /// 0 and `n_cols - 1` are the centers of the extreme columns, at field
    /// angles `-h_fov/2` and `+h_fov/2`; the half-open extensions -0.5 and
    /// `n_cols - 0.5` are the outer edges of those columns (each column owns
    /// a half-pixel margin beyond its center). Indices are clamped to
    /// `[-0.5, n_cols - 0.5]`.
    pub fn pixel_ray(&self, i: f64) -> Ray {
        let i = i.clamp(-0.5, self.n_cols as f64 - 0.5);
        let step = 2.0 * self.half_tan / (self.n_cols - 1) as f64;
        let tangent = -self.half_tan + i * step;
        let dir = self.axis.add(self.right.scale(tangent)).normalize();
        Ray { origin: self.origin, dir }
    }
}

/// A simple (non-self-intersecting) open polyline representing the
/// projection surface in cross-section, parameterized by arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    vertices: Vec<Vec2>,
    /// `cum[i]` is the arc length from vertex 0 to vertex i; `cum[0] = 0`.
    cum: Vec<f64>,
}

impl SurfaceProfile {
    /// Builds a surface from at least two vertices. Consecutive vertices
    /// must be distinct, no segment may fold straight back onto its
    /// predecessor, and non-adjacent segments may not cross.
    pub fn new(vertices: Vec<Vec2>) -> Result<SurfaceProfile> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "surface needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        for (i, pair) in vertices.windows(2).enumerate() {
            if pair[1].sub(pair[0]).norm() <= 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "surface vertices {i} and {} coincide",
                    i + 1
                )));
            }
        }
        // Adjacent segments sharing a vertex may not double straight back:
        // that would make the shared vertex a crease of zero width and the
        // arc-length coordinate non-injective along the ray.
        for (i, triple) in vertices.windows(3).enumerate() {
            let a = triple[1].sub(triple[0]);
            let b = triple[2].sub(triple[1]);
            if a.cross(b) == 0.0 && a.dot(b) < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "surface folds back onto itself at vertex {}",
                    i + 1
                )));
            }
        }
        // Non-adjacent segment pairs must not intersect or touch.
        let n_seg = vertices.len() - 1;
        for a in 0..n_seg {
            for b in (a + 2)..n_seg {
                if segments_touch(
                    vertices[a],
                    vertices[a + 1],
                    vertices[b],
                    vertices[b + 1],
                ) {
                    return Err(Error::InvalidInput(format!(
                        "surface segments {a} and {b} intersect; profile must be simple"
                    )));
                }
            }
        }
        let mut cum = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for pair in vertices.windows(2) {
            acc += pair[1].sub(pair[0]).norm();
            cum.push(acc);
        }
        Ok(SurfaceProfile { vertices, cum })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Total arc length of the profile in meters.
    pub fn total_length(&self) -> f64 {
        *self.cum.last().expect("surface has at least two vertices")
    }

    /// Nearest intersection of `ray` with the surface, if any.
    ///
    /// Hits on the shared vertex of two adjacent segments are merged into
    /// one. If, after merging, two hits at distinct surface locations still
    /// tie for nearest within 1e-12 of ray parameter, the arc-length
    /// coordinate of "the" hit is ill-defined and an ambiguity error is
    /// returned.
    pub fn intersect(&self, ray: Ray) -> Result<Option<HitPoint>> {
        let mut hits: Vec<HitPoint> = Vec::new();
        for (seg, pair) in self.vertices.windows(2).enumerate() {
            let p = pair[0];
            let q = pair[1];
            let e = q.sub(p);
            let den = ray.dir.cross(e);
            if den == 0.0 {
                // Ray parallel to the segment. A collinear overlap would be
                // caught as hits on the segment's neighbors or endpoints;
                // skip to avoid dividing by zero.
                continue;
            }
            let w = p.sub(ray.origin);
            let t = w.cross(e) / den;
            let u = w.cross(ray.dir) / den;
            let seg_len = e.norm();
            let u_tol = POINT_TOL / seg_len;
            if t > 0.0 && u >= -u_tol && u <= 1.0 + u_tol {
                let u = u.clamp(0.0, 1.0);
                hits.push(HitPoint {
                    point: p.add(e.scale(u)),
                    s: self.cum[seg] + u * seg_len,
                    segment: seg,
                    t,
                });
            }
        }
        if hits.is_empty() {
            return Ok(None);
        }
        hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        // Merge duplicate hits on the shared vertex of adjacent segments.
        let mut merged: Vec<HitPoint> = Vec::new();
        for hit in hits {
            if let Some(prev) = merged.last() {
                if hit.segment == prev.segment + 1
                    && hit.point.sub(prev.point).norm() <= POINT_TOL
                {
                    continue;
                }
            }
            merged.push(hit);
        }
        if merged.len() >= 2 && (merged[1].t - merged[0].t).abs() <= RAY_T_TIE {
            return Err(Error::AmbiguousIntersection { pixel: None, t: merged[0].t });
        }
        Ok(Some(merged[0]))
    }

    /// World point at arc-length coordinate `s` from the first vertex.
    pub fn point_at_arclength(&self, s: f64) -> Result<Vec2> {
        let total = self.total_length();
        if !(0.0..=total).contains(&s) {
            return Err(Error::OutOfRange { what: "arc length [m]", value: s, max: total });
        }
        // Find the segment containing s.
        let seg = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(self.vertices.len() - 2),
            Err(i) => i - 1,
        };
        let p = self.vertices[seg];
        let q = self.vertices[seg + 1];
        let seg_len = q.sub(p).norm();
        let u = (s - self.cum[seg]) / seg_len;
        Ok(p.add(q.sub(p).scale(u)))
    }

    /// Arc-length coordinate of a point that lies on the surface (within
    /// 1e-9 m). Errors if the point is farther away than that.
    pub fn arclength_of_point(&self, point: Vec2) -> Result<f64> {
        let mut best_dist = f64::INFINITY;
        let mut best_s = 0.0;
        for (seg, pair) in self.vertices.windows(2).enumerate() {
            let p = pair[0];
            let e = pair[1].sub(p);
            let seg_len = e.norm();
            let u = (point.sub(p).dot(e) / (seg_len * seg_len)).clamp(0.0, 1.0);
            let closest = p.add(e.scale(u));
            let dist = point.sub(closest).norm();
            if dist < best_dist {
                best_dist = dist;
                best_s = self.cum[seg] + u * seg_len;
            }
        }
        if best_dist > POINT_TOL {
            return Err(Error::NotOnSurface { distance: best_dist });
        }
        Ok(best_s)
    }
}

/// Whether two closed segments `[a1, a2]` and `[b1, b2]` share any point.
fn segments_touch(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// Sign of the area of triangle (a, b, c): positive when c lies to the left
/// of the directed line a -> b.
fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Whether `p` (already known collinear with a-b) lies within the bounding
/// box of segment a-b.
fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Arc length of surface illuminated by each pixel column.
///
/// Boundary rays at fractional indices `i ± 0.5` split the projection into
/// per-pixel wedges (the outermost boundaries sit half a tangent step past
/// the extreme column centers, so every column spans one full tangent
/// step); each footprint is the difference of the arc-length coordinates
/// where consecutive boundary rays land. Every boundary ray must hit the
/// surface, and footprints must be positive.
pub fn pixel_footprints(proj: &ProjectorModel, surface: &SurfaceProfile) -> Result<Vec<f64>> {
    let n = proj.n_cols();
    let mut boundary_s = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let ray = proj.pixel_ray(k as f64 - 0.5);
        let hit = surface
            .intersect(ray)?
            .ok_or(Error::NoIntersection { pixel: None })
            .map_err(|e| e.with_pixel(k.min(n - 1)))?;
        boundary_s.push(hit.s);
    }
    let mut footprints = Vec::with_capacity(n);
    for i in 0..n {
        let fp = boundary_s[i + 1] - boundary_s[i];
        if fp <= 0.0 {
            return Err(Error::NonPositiveFootprint { pixel: i });
        }
        footprints.push(fp);
    }
    Ok(footprints)
}

/// Checks that every pixel boundary ray lands on the surface exactly once,
/// i.e. the surface fully covers the projector fan without ambiguity.
pub fn validate_single_coverage(proj: &ProjectorModel, surface: &SurfaceProfile) -> Result<()> {
    let n = proj.n_cols();
    for k in 0..=n {
        let ray = proj.pixel_ray(k as f64 - 0.5);
        surface
            .intersect(ray)
            .and_then(|hit| hit.ok_or(Error::NoIntersection { pixel: None }))
            .map_err(|e| e.with_pixel(k.min(n - 1)))?;
    }
    Ok(())
}
