//! Metric catalog, star-shaped domains and the Herglotz test.

mod domain;
mod metric;

pub use domain::{wrap_2pi, wrap_pi, StarShapedDomain};
pub use metric::{herglotz_margin, LocalMetric, Metric, MetricEval, RadialProfile};

use crate::error::{GeoError, Result};

/// A metric paired with a computational domain.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub metric: Metric,
    pub domain: StarShapedDomain,
}

impl Manifold {
    /// Rejects domains that reach the singular circle of a negatively curved
    /// metric.
    pub fn new(metric: Metric, domain: StarShapedDomain) -> Result<Self> {
        if let Metric::ConstNeg { radius } = metric {
            if domain.r_max() >= radius {
                return Err(GeoError::Usage(format!(
                    "domain extends to r = {} but the metric is singular at r = {radius}",
                    domain.r_max()
                )));
            }
        }
        Ok(Manifold { metric, domain })
    }

    pub fn r_max(&self) -> f64 {
        self.domain.r_max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn const_neg_domain_must_fit() {
        let d = StarShapedDomain::circle(1.0).unwrap();
        assert!(Manifold::new(Metric::const_neg(2.0).unwrap(), d).is_ok());
        assert!(Manifold::new(Metric::const_neg(1.0).unwrap(), d).is_err());
        assert!(Manifold::new(Metric::const_neg(0.9).unwrap(), d).is_err());
    }
}
