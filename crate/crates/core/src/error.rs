use thiserror::Error;

use crate::flow::GeodesicPath;
use crate::flow::InfluxCoord;

/// A geodesic that failed to leave the domain within its step budget.
#[derive(Debug, Clone)]
pub struct TrappedGeodesic {
    /// Influx coordinate of the ray, when it was launched from the boundary.
    pub origin: Option<InfluxCoord>,
    /// Everything that was traced before the budget ran out.
    pub partial: GeodesicPath,
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("metric evaluated outside its domain of definition: {0}")]
    Domain(String),

    #[error("invalid usage: {0}")]
    Usage(String),

    #[error("geodesic trapped after {} steps{}", .0.partial.samples.len(), fmt_origin(&.0.origin))]
    Trapped(Box<TrappedGeodesic>),

    #[error("inconsistent exit geometry: incidence angle {alpha} is outside (-pi/2, pi/2)")]
    GeometryInconsistency { alpha: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("reference field has zero L2 norm")]
    UndefinedNorm,

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_origin(origin: &Option<InfluxCoord>) -> String {
    match origin {
        Some(c) => format!(" (beta={}, alpha={})", c.beta, c.alpha),
        None => String::new(),
    }
}

impl GeoError {
    pub fn is_trapped(&self) -> bool {
        matches!(self, GeoError::Trapped(_))
    }
}

pub type Result<T, E = GeoError> = std::result::Result<T, E>;
