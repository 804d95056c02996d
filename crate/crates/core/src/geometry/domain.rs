//! Domains star-shaped with respect to the origin, `x^2 + y^2 <= r(arg x)^2`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StarShapedDomain {
    Circle { radius: f64 },
    /// Ellipse with semi-axes `a` (along x) and `b` (along y).
    Ellipse { a: f64, b: f64 },
    /// `r(beta) = a + b cos(4 beta)`.
    Perturbed { a: f64, b: f64 },
}

/// Wraps an angle to `[0, 2 pi)`.
#[inline]
pub fn wrap_2pi(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle to `(-pi, pi]`.
#[inline]
pub fn wrap_pi(angle: f64) -> f64 {
    let w = PI - (PI - angle).rem_euclid(TAU);
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl StarShapedDomain {
    pub fn circle(radius: f64) -> Result<Self> {
        positive("radius", radius)?;
        Ok(StarShapedDomain::Circle { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        Ok(StarShapedDomain::Ellipse { a, b })
    }

    pub fn perturbed(a: f64, b: f64) -> Result<Self> {
        positive("a", a)?;
        if !b.is_finite() || b.abs() >= a {
            return Err(GeoError::Usage(format!("perturbed circle needs |b| < a, got a={a}, b={b}")));
        }
        Ok(StarShapedDomain::Perturbed { a, b })
    }

    /// Boundary radius `r(beta)`.
    #[inline]
    pub fn r(&self, beta: f64) -> f64 {
        match *self {
            StarShapedDomain::Circle { radius } => radius,
            StarShapedDomain::Ellipse { a, b } => {
                let (s, c) = beta.sin_cos();
                a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
            }
            StarShapedDomain::Perturbed { a, b } => a + b * (4.0 * beta).cos(),
        }
    }

    /// Derivative `r'(beta)`.
    pub fn dr(&self, beta: f64) -> f64 {
        match *self {
            StarShapedDomain::Circle { .. } => 0.0,
            StarShapedDomain::Ellipse { a, b } => {
                let (s, c) = beta.sin_cos();
                let q = (b * c).powi(2) + (a * s).powi(2);
                let dq = (a * a - b * b) * (2.0 * beta).sin();
                -0.5 * a * b * dq / (q * q.sqrt())
            }
            StarShapedDomain::Perturbed { b, .. } => -4.0 * b * (4.0 * beta).sin(),
        }
    }

    pub fn r_max(&self) -> f64 {
        match *self {
            StarShapedDomain::Circle { radius } => radius,
            StarShapedDomain::Ellipse { a, b } => a.max(b),
            StarShapedDomain::Perturbed { a, b } => a + b.abs(),
        }
    }

    pub fn r_min(&self) -> f64 {
        match *self {
            StarShapedDomain::Circle { radius } => radius,
            StarShapedDomain::Ellipse { a, b } => a.min(b),
            StarShapedDomain::Perturbed { a, b } => a - b.abs(),
        }
    }

    /// Whether `(x, y)` lies in the closed domain. The origin is inside.
    #[inline]
    pub fn inside(&self, x: f64, y: f64) -> bool {
        let rr = x * x + y * y;
        if rr == 0.0 {
            return true;
        }
        match *self {
            StarShapedDomain::Circle { radius } => rr <= radius * radius,
            _ => {
                let r = self.r(wrap_2pi(y.atan2(x)));
                rr <= r * r
            }
        }
    }

    /// Signed radial distance `|x| - r(arg x)`; negative inside.
    #[inline]
    pub fn radial_excess(&self, x: f64, y: f64) -> f64 {
        let rho = (x * x + y * y).sqrt();
        match *self {
            StarShapedDomain::Circle { radius } => rho - radius,
            _ => rho - self.r(wrap_2pi(y.atan2(x))),
        }
    }

    /// Boundary point at parameter `beta` and the angle `nu` in `[0, 2 pi)` of
    /// the unit inner normal there.
    pub fn boundary_point_and_normal(&self, beta: f64) -> ([f64; 2], f64) {
        let (s, c) = beta.sin_cos();
        let r = self.r(beta);
        let dr = self.dr(beta);
        let tangent = [dr * c - r * s, dr * s + r * c];
        // Counterclockwise parameterization: rotating the tangent by +pi/2
        // points into the domain.
        let nu = wrap_2pi(tangent[1].atan2(tangent[0]) + FRAC_PI_2);
        ([r * c, r * s], nu)
    }

    pub fn inner_normal(&self, beta: f64) -> f64 {
        self.boundary_point_and_normal(beta).1
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GeoError::Usage(format!("{name} must be positive and finite, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<StarShapedDomain> {
        vec![
            StarShapedDomain::circle(1.0).unwrap(),
            StarShapedDomain::ellipse(1.0, 0.8).unwrap(),
            StarShapedDomain::ellipse(1.2, 0.8).unwrap(),
            StarShapedDomain::perturbed(1.0, 0.05).unwrap(),
        ]
    }

    #[test]
    fn unit_circle_normals() {
        let d = StarShapedDomain::circle(1.0).unwrap();
        let (p, nu) = d.boundary_point_and_normal(0.0);
        assert_eq!(p, [1.0, 0.0]);
        assert!((nu - PI).abs() < 1e-15);
        let (p, nu) = d.boundary_point_and_normal(FRAC_PI_2);
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert!((nu - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn perturbed_circle_radius_at_zero() {
        let d = StarShapedDomain::perturbed(1.0, 0.05).unwrap();
        let (p, _) = d.boundary_point_and_normal(0.0);
        assert!((p[0] - 1.05).abs() < 1e-15 && p[1] == 0.0);
    }

    #[test]
    fn inside_unit_disk() {
        let d = StarShapedDomain::circle(1.0).unwrap();
        assert!(d.inside(0.0, 0.0));
        assert!(!d.inside(2.0, 0.0));
        assert!(d.inside(1.0, 0.0));
    }

    #[test]
    fn radius_is_periodic() {
        for d in catalog() {
            assert!((d.r(0.0) - d.r(TAU)).abs() < 1e-12);
            assert!((d.dr(0.0) - d.dr(TAU)).abs() < 1e-12);
            for i in 0..360 {
                assert!(d.r(i as f64 * TAU / 360.0) >= d.r_min() - 1e-12);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-6;
        for d in catalog() {
            for i in 0..64 {
                let b = i as f64 * TAU / 64.0 + 0.01;
                let fd = (d.r(b + h) - d.r(b - h)) / (2.0 * h);
                assert!((d.dr(b) - fd).abs() < 1e-7, "{d:?} at {b}");
            }
        }
    }

    #[test]
    fn inner_normal_points_inward() {
        for d in catalog() {
            let eps = 1e-4 * d.r_max();
            for i in 0..64 {
                let beta = i as f64 * TAU / 64.0;
                let (p, nu) = d.boundary_point_and_normal(beta);
                assert!(d.inside(p[0] + eps * nu.cos(), p[1] + eps * nu.sin()), "{d:?} beta={beta}");
                assert!(!d.inside(p[0] - eps * nu.cos(), p[1] - eps * nu.sin()), "{d:?} beta={beta}");
            }
        }
    }

    #[test]
    fn ellipse_boundary_satisfies_implicit_equation() {
        let d = StarShapedDomain::ellipse(1.2, 0.8).unwrap();
        for i in 0..100 {
            let (p, _) = d.boundary_point_and_normal(i as f64 * TAU / 100.0);
            assert!((p[0] * p[0] / 1.44 + p[1] * p[1] / 0.64 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_2pi(-1e-20), 0.0);
        assert!((wrap_2pi(-FRAC_PI_2) - 1.5 * PI).abs() < 1e-15);
        assert!((wrap_pi(1.5 * PI) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_pi(PI), PI);
        assert_eq!(wrap_pi(-PI), PI);
    }

    #[test]
    fn constructors_validate() {
        assert!(StarShapedDomain::circle(0.0).is_err());
        assert!(StarShapedDomain::perturbed(1.0, 1.0).is_err());
        assert!(StarShapedDomain::ellipse(-1.0, 1.0).is_err());
    }
}
