//! Isotropic metrics `g = e^{2 lambda} (dx^2 + dy^2)` with hand-differentiated
//! log-conformal factors.

use std::fmt;
use std::sync::Arc;

use crate::error::{GeoError, Result};

/// A log-conformal factor that depends only on `r = |x|`.
///
/// Implementors provide `lambda(r)` together with its first two radial
/// derivatives; the Cartesian gradient and Laplacian are assembled from them.
pub trait RadialProfile: Send + Sync {
    fn lambda(&self, r: f64) -> f64;
    fn dlambda(&self, r: f64) -> f64;
    fn d2lambda(&self, r: f64) -> f64;
}

/// Pointwise values of the conformal factor and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMetric {
    pub lambda: f64,
    pub exp_neg_lambda: f64,
    pub grad: [f64; 2],
    /// Euclidean Laplacian of `lambda`.
    pub lap: f64,
}

impl LocalMetric {
    /// Gaussian curvature `-e^{-2 lambda} * lap(lambda)`.
    pub fn kappa(&self) -> f64 {
        -self.exp_neg_lambda * self.exp_neg_lambda * self.lap
    }
}

/// Result of [`Metric::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEval {
    pub lambda: f64,
    pub grad: [f64; 2],
    pub kappa: f64,
}

#[derive(Clone)]
pub enum Metric {
    Euclidean,
    /// Stereographic pullback of the round sphere of radius `radius`.
    ConstPos { radius: f64 },
    /// Poincare-type disk of radius `radius`; singular on `|x| = radius`.
    ConstNeg { radius: f64 },
    /// Gaussian lens, `lambda = (k/2) exp(-|x - center|^2 / (2 sigma^2))`.
    Lens { k: f64, sigma: f64, center: [f64; 2] },
    Radial(Arc<dyn RadialProfile>),
}

impl fmt::Debug for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Euclidean => write!(f, "Euclidean"),
            Metric::ConstPos { radius } => write!(f, "ConstPos {{ radius: {radius} }}"),
            Metric::ConstNeg { radius } => write!(f, "ConstNeg {{ radius: {radius} }}"),
            Metric::Lens { k, sigma, center } => {
                write!(f, "Lens {{ k: {k}, sigma: {sigma}, center: {center:?} }}")
            }
            Metric::Radial(_) => write!(f, "Radial(..)"),
        }
    }
}

impl Metric {
    pub fn const_pos(radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Metric::ConstPos { radius })
    }

    pub fn const_neg(radius: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        Ok(Metric::ConstNeg { radius })
    }

    pub fn lens(k: f64, sigma: f64, center: [f64; 2]) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(GeoError::Usage(format!("lens strength must be >= 0, got {k}")));
        }
        check_positive("sigma", sigma)?;
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeoError::Usage("lens center must be finite".into()));
        }
        Ok(Metric::Lens { k, sigma, center })
    }

    /// Lens centered at the origin.
    pub fn centered_lens(k: f64, sigma: f64) -> Result<Self> {
        Self::lens(k, sigma, [0.0, 0.0])
    }

    pub fn radial(profile: Arc<dyn RadialProfile>) -> Self {
        Metric::Radial(profile)
    }

    /// Whether the metric is rotationally symmetric about the origin.
    pub fn is_radial(&self) -> bool {
        match self {
            Metric::Lens { center, .. } => center[0] == 0.0 && center[1] == 0.0,
            _ => true,
        }
    }

    /// Checked evaluation of `lambda`, its gradient and the Gaussian curvature.
    pub fn eval(&self, x: f64, y: f64) -> Result<MetricEval> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeoError::Usage(format!("non-finite position ({x}, {y})")));
        }
        if let Metric::ConstNeg { radius } = self {
            if (x * x + y * y - radius * radius).abs() <= f64::EPSILON * radius * radius {
                return Err(GeoError::Domain(format!(
                    "({x}, {y}) lies on the singular circle of radius {radius}"
                )));
            }
        }
        let m = self.local(x, y);
        let out = MetricEval { lambda: m.lambda, grad: m.grad, kappa: m.kappa() };
        if !(out.lambda.is_finite() && out.kappa.is_finite()) {
            return Err(GeoError::Domain(format!("metric not finite at ({x}, {y})")));
        }
        Ok(out)
    }

    /// Unchecked evaluation of every pointwise quantity.
    pub fn local(&self, x: f64, y: f64) -> LocalMetric {
        match self {
            Metric::Euclidean => LocalMetric { lambda: 0.0, exp_neg_lambda: 1.0, grad: [0.0; 2], lap: 0.0 },
            Metric::ConstPos { radius } => {
                let r2 = radius * radius;
                let s = x * x + y * y + r2;
                LocalMetric {
                    lambda: (2.0 * r2).ln() - s.ln(),
                    exp_neg_lambda: s / (2.0 * r2),
                    grad: [-2.0 * x / s, -2.0 * y / s],
                    lap: -4.0 * r2 / (s * s),
                }
            }
            Metric::ConstNeg { radius } => {
                let r2 = radius * radius;
                let d = r2 - x * x - y * y;
                LocalMetric {
                    lambda: (2.0 * r2).ln() - d.abs().ln(),
                    exp_neg_lambda: d.abs() / (2.0 * r2),
                    grad: [2.0 * x / d, 2.0 * y / d],
                    lap: 4.0 * r2 / (d * d),
                }
            }
            Metric::Lens { k, sigma, center } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let s2 = sigma * sigma;
                let rho2 = dx * dx + dy * dy;
                let lambda = 0.5 * k * (-rho2 / (2.0 * s2)).exp();
                LocalMetric {
                    lambda,
                    exp_neg_lambda: (-lambda).exp(),
                    grad: [-lambda * dx / s2, -lambda * dy / s2],
                    lap: lambda * (rho2 / (s2 * s2) - 2.0 / s2),
                }
            }
            Metric::Radial(p) => {
                let r = (x * x + y * y).sqrt();
                let lambda = p.lambda(r);
                let d1 = p.dlambda(r);
                let d2 = p.d2lambda(r);
                let (grad, lap) = if r > 1e-12 {
                    ([d1 * x / r, d1 * y / r], d2 + d1 / r)
                } else {
                    ([0.0, 0.0], 2.0 * d2)
                };
                LocalMetric { lambda, exp_neg_lambda: (-lambda).exp(), grad, lap }
            }
        }
    }

    /// `(e^{-lambda}, d1 lambda, d2 lambda)`: the coefficients of the geodesic
    /// vector field, without the logarithms `local` needs for `lambda` itself.
    #[inline]
    pub fn flow_coeffs(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            Metric::Euclidean => (1.0, 0.0, 0.0),
            Metric::ConstPos { radius } => {
                let r2 = radius * radius;
                let s = x * x + y * y + r2;
                (s / (2.0 * r2), -2.0 * x / s, -2.0 * y / s)
            }
            Metric::ConstNeg { radius } => {
                let r2 = radius * radius;
                let d = r2 - x * x - y * y;
                (d.abs() / (2.0 * r2), 2.0 * x / d, 2.0 * y / d)
            }
            Metric::Lens { k, sigma, center } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let s2 = sigma * sigma;
                let lambda = 0.5 * k * (-(dx * dx + dy * dy) / (2.0 * s2)).exp();
                ((-lambda).exp(), -lambda * dx / s2, -lambda * dy / s2)
            }
            Metric::Radial(_) => {
                let m = self.local(x, y);
                (m.exp_neg_lambda, m.grad[0], m.grad[1])
            }
        }
    }

    /// Flow coefficients plus the Gaussian curvature.
    #[inline]
    pub fn flow_coeffs_with_curvature(&self, x: f64, y: f64) -> (f64, f64, f64, f64) {
        match self {
            Metric::Euclidean => (1.0, 0.0, 0.0, 0.0),
            Metric::ConstPos { radius } => {
                let (e, gx, gy) = self.flow_coeffs(x, y);
                (e, gx, gy, 1.0 / (radius * radius))
            }
            Metric::ConstNeg { radius } => {
                let (e, gx, gy) = self.flow_coeffs(x, y);
                (e, gx, gy, -1.0 / (radius * radius))
            }
            _ => {
                let m = self.local(x, y);
                (m.exp_neg_lambda, m.grad[0], m.grad[1], m.kappa())
            }
        }
    }

    /// Radial speed `c(r) = e^{-lambda(r)}` of a rotationally symmetric metric.
    pub fn radial_speed(&self, r: f64) -> Result<f64> {
        if !self.is_radial() {
            return Err(GeoError::Usage(format!("{self:?} is not radially symmetric")));
        }
        Ok((-self.eval(r, 0.0)?.lambda).exp())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GeoError::Usage(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Minimum over `n_samples` equispaced radii in `(0, radius]` of
/// `d/dr (r / c(r))`, using central differences with step `radius / (10 n)`.
///
/// A positive value means the Herglotz non-trapping condition holds on the
/// sampled set.
pub fn herglotz_margin(metric: &Metric, radius: f64, n_samples: usize) -> Result<f64> {
    if !metric.is_radial() {
        return Err(GeoError::Usage(format!("herglotz_margin needs a radial metric, got {metric:?}")));
    }
    if !(radius > 0.0) || n_samples == 0 {
        return Err(GeoError::Usage("herglotz_margin needs radius > 0 and n_samples >= 1".into()));
    }
    let h = radius / (10.0 * n_samples as f64);
    let slowness = |r: f64| -> Result<f64> { Ok(r * metric.eval(r, 0.0)?.lambda.exp()) };
    let mut margin = f64::INFINITY;
    for i in 1..=n_samples {
        let r = radius * i as f64 / n_samples as f64;
        let d = (slowness(r + h)? - slowness(r - h)?) / (2.0 * h);
        margin = margin.min(d);
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Radial profile reproducing the centered lens, used to cross-check the
    /// radial code path.
    struct GaussLens {
        k: f64,
        sigma: f64,
    }

    impl RadialProfile for GaussLens {
        fn lambda(&self, r: f64) -> f64 {
            0.5 * self.k * (-r * r / (2.0 * self.sigma * self.sigma)).exp()
        }
        fn dlambda(&self, r: f64) -> f64 {
            -self.lambda(r) * r / (self.sigma * self.sigma)
        }
        fn d2lambda(&self, r: f64) -> f64 {
            let s2 = self.sigma * self.sigma;
            self.lambda(r) * (r * r / (s2 * s2) - 1.0 / s2)
        }
    }

    fn catalog() -> Vec<Metric> {
        vec![
            Metric::Euclidean,
            Metric::const_pos(1.2).unwrap(),
            Metric::const_pos(2.0).unwrap(),
            Metric::const_neg(2.0).unwrap(),
            Metric::lens(1.2, 0.25, [0.2, 0.0]).unwrap(),
            Metric::centered_lens(0.49, 0.25).unwrap(),
            Metric::radial(Arc::new(GaussLens { k: 0.8, sigma: 0.3 })),
        ]
    }

    fn fd_lap(m: &Metric, x: f64, y: f64, h: f64) -> f64 {
        let l = |x, y| m.local(x, y).lambda;
        (l(x + h, y) + l(x - h, y) + l(x, y + h) + l(x, y - h) - 4.0 * l(x, y)) / (h * h)
    }

    #[test]
    fn euclidean_is_flat() {
        let e = Metric::Euclidean.eval(0.3, -0.7).unwrap();
        assert_eq!(e, MetricEval { lambda: 0.0, grad: [0.0, 0.0], kappa: 0.0 });
    }

    #[test]
    fn const_pos_curvature_at_origin() {
        let e = Metric::const_pos(2.0).unwrap().eval(0.0, 0.0).unwrap();
        assert!((e.kappa - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_curvature_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pos = Metric::const_pos(1.2).unwrap();
        let neg = Metric::const_neg(2.0).unwrap();
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            let y: f64 = rng.gen_range(-1.0..1.0);
            assert!((pos.eval(x, y).unwrap().kappa - 1.0 / 1.44).abs() < 1e-10);
            assert!((neg.eval(x, y).unwrap().kappa + 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn const_neg_singular_circle_is_rejected() {
        let neg = Metric::const_neg(2.0).unwrap();
        assert!(matches!(neg.eval(2.0, 0.0), Err(GeoError::Domain(_))));
        assert!(matches!(neg.eval(0.0, -2.0), Err(GeoError::Domain(_))));
    }

    #[test]
    fn lens_curvature_matches_finite_differences() {
        let m = Metric::lens(1.2, 0.25, [0.2, 0.0]).unwrap();
        let h = 1e-5;
        let l = |x, y| m.local(x, y).lambda;
        let (x, y) = (0.2, 0.0);
        let lap = (l(x + h, y) + l(x - h, y) + l(x, y + h) + l(x, y - h) - 4.0 * l(x, y)) / (h * h);
        let kappa_fd = -(-2.0 * l(x, y)).exp() * lap;
        let kappa = m.eval(x, y).unwrap().kappa;
        // Symbolic value at the lens center: lambda = k/2, lap = -k/sigma^2.
        let expected = (-1.2f64).exp() * 1.2 / 0.0625;
        assert!((kappa - expected).abs() < 1e-12);
        assert!((kappa - kappa_fd).abs() < 1e-6, "{kappa} vs {kappa_fd}");
    }

    #[test]
    fn analytic_laplacians_match_five_point_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in catalog() {
            for _ in 0..100 {
                let r: f64 = rng.gen_range(0.0..0.95);
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let (x, y) = (r * t.cos(), r * t.sin());
                let lap = m.local(x, y).lap;
                let fd = fd_lap(&m, x, y, 1e-4);
                assert!((lap - fd).abs() <= 1e-5 * lap.abs().max(1.0), "{m:?} at ({x},{y}): {lap} vs {fd}");
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for m in catalog() {
            for _ in 0..50 {
                let x: f64 = rng.gen_range(-0.7..0.7);
                let y: f64 = rng.gen_range(-0.7..0.7);
                let l = |x, y| m.local(x, y).lambda;
                let gx = (l(x + h, y) - l(x - h, y)) / (2.0 * h);
                let gy = (l(x, y + h) - l(x, y - h)) / (2.0 * h);
                let g = m.local(x, y).grad;
                assert!((g[0] - gx).abs() < 1e-7 && (g[1] - gy).abs() < 1e-7, "{m:?}");
                let (e, fx, fy) = m.flow_coeffs(x, y);
                assert!((e - (-l(x, y)).exp()).abs() < 1e-13);
                assert_eq!([fx, fy], g);
            }
        }
    }

    #[test]
    fn radial_profile_agrees_with_centered_lens() {
        let a = Metric::centered_lens(0.8, 0.3).unwrap();
        let b = Metric::radial(Arc::new(GaussLens { k: 0.8, sigma: 0.3 }));
        for &(x, y) in &[(0.0, 0.0), (0.1, -0.2), (0.5, 0.4)] {
            let (ma, mb) = (a.local(x, y), b.local(x, y));
            assert!((ma.lambda - mb.lambda).abs() < 1e-14);
            assert!((ma.lap - mb.lap).abs() < 1e-12);
            assert!((ma.grad[0] - mb.grad[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn herglotz_euclidean_is_one() {
        let m = herglotz_margin(&Metric::Euclidean, 1.0, 1000).unwrap();
        assert!((m - 1.0).abs() < 1e-9);
    }

    #[test]
    fn herglotz_lens_threshold() {
        let below = herglotz_margin(&Metric::centered_lens(2.6, 0.25).unwrap(), 1.0, 1000).unwrap();
        let above = herglotz_margin(&Metric::centered_lens(2.8, 0.25).unwrap(), 1.0, 1000).unwrap();
        assert!(below > 0.0, "{below}");
        assert!(above < 0.0, "{above}");
        let e = std::f64::consts::E;
        let lo = herglotz_margin(&Metric::centered_lens(e - 0.05, 0.25).unwrap(), 1.0, 1000).unwrap();
        let hi = herglotz_margin(&Metric::centered_lens(e + 0.05, 0.25).unwrap(), 1.0, 1000).unwrap();
        assert!(lo > 0.0 && hi < 0.0);
    }

    #[test]
    fn herglotz_rejects_shifted_lens() {
        let m = Metric::lens(1.0, 0.25, [0.2, 0.0]).unwrap();
        assert!(matches!(herglotz_margin(&m, 1.0, 100), Err(GeoError::Usage(_))));
    }
}
