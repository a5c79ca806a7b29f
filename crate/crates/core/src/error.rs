//! Error type shared by the geometry, density, device, compiler and
//! simulator modules.
//!
//! A single enum keeps pipeline composition simple: every stage returns the
//! same error type, and stage-level wrappers ([`Error::Stage`]) annotate
//! which phase of a multi-stage operation failed. Errors that arise while
//! processing a particular projector pixel carry the pixel index so callers
//! can report the offending column.

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A ray missed the surface entirely.
    #[error("ray{} does not intersect the surface", fmt_pixel(.pixel))]
    NoIntersection { pixel: Option<usize> },

    /// Two hits at distinct surface locations tie for nearest along the ray,
    /// so the arc-length coordinate of the hit is ill-defined.
    #[error("ambiguous intersection{}: two hits tie at ray parameter {t} m", fmt_pixel(.pixel))]
    AmbiguousIntersection { pixel: Option<usize>, t: f64 },

    /// A scalar input lies outside its valid closed range `[0, max]`.
    #[error("{what} {value} outside valid range [0, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        max: f64,
    },

    /// A point expected on the surface is farther than the tolerance from it.
    #[error("point is {distance} m from the surface (tolerance 1e-9 m)")]
    NotOnSurface { distance: f64 },

    /// A metric was requested over an empty sample list.
    #[error("empty input: no samples to aggregate")]
    EmptyInput,

    /// A pixel footprint came out zero or negative.
    #[error("non-positive footprint at pixel {pixel}")]
    NonPositiveFootprint { pixel: usize },

    /// The rotated ray for a pixel does not reach its assigned target point.
    #[error("pixel {pixel}: rotated ray misses its target by {missed_by} m")]
    TargetUnreachable { pixel: usize, missed_by: f64 },

    /// A phase gradient steeper than the evanescent limit was requested.
    #[error("evanescent deflection: |sin theta| = {sine} exceeds 1")]
    EvanescentDeflection { sine: f64 },

    /// A calibration table is not strictly increasing.
    #[error("lookup table not strictly monotone at entry {index}")]
    NonMonotoneLut { index: usize },

    /// A requested shift falls outside the calibrated range.
    #[error(
        "deflection budget exceeded{}: required shift {required} m outside \
         calibrated range [{available_min}, {available_max}] m",
        fmt_pixel(.pixel)
    )]
    DeflectionBudgetExceeded {
        pixel: Option<usize>,
        required: f64,
        available_min: f64,
        available_max: f64,
    },

    /// Strict wrap mode hit a phase sample outside `[0, phase_depth)`.
    #[error("phase {phase} rad at sample {sample} outside [0, depth) in strict mode")]
    PhaseRangeExceeded { sample: usize, phase: f64 },

    /// A precondition on an input value failed.
    #[error("{0}")]
    InvalidInput(String),

    /// An error from a named stage of a composite operation.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches a pixel index to errors that carry one. Other variants are
    /// returned unchanged.
    pub fn with_pixel(self, pixel: usize) -> Error {
        match self {
            Error::NoIntersection { .. } => Error::NoIntersection { pixel: Some(pixel) },
            Error::AmbiguousIntersection { t, .. } => {
                Error::AmbiguousIntersection { pixel: Some(pixel), t }
            }
            Error::DeflectionBudgetExceeded {
                required,
                available_min,
                available_max,
                ..
            } => Error::DeflectionBudgetExceeded {
                pixel: Some(pixel),
                required,
                available_min,
                available_max,
            },
            other => other,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Walks through [`Error::Stage`] wrappers to the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

fn fmt_pixel(pixel: &Option<usize>) -> String {
    match pixel {
        Some(i) => format!(" for pixel {i}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
