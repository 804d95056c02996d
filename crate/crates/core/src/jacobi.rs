//! Scaled Jacobi fields `b'' + beta * kappa(gamma(t)) * b = 0`, `b(0) = 0`,
//! `b'(0) = 1`, conjugate-point detection and the terminator constant.
//!
//! By Sturm separation, a manifold is free of `beta`-conjugate points as soon
//! as `b_beta` has no zero on `(0, tau]` along every geodesic cast from the
//! influx boundary, so the test only traces boundary-launched geodesics.

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::flow::{influx_state, march, state_theta, GeodesicPath, InfluxCoord, SampleSink, SmPoint, TraceParams};
use crate::geometry::{wrap_2pi, Manifold, Metric};
use crate::ray_transform::InfluxGrid;

/// Samples below `T_MIN_STEPS * dt` are never reported as conjugate.
pub const T_MIN_STEPS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiTrace {
    /// `b(t)` at the path sample times.
    pub b: Vec<f64>,
    pub bdot: Vec<f64>,
    pub beta_c: f64,
    /// `b` and `b'` at the refined exit time.
    pub b_exit: f64,
    pub bdot_exit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePoint {
    pub t: f64,
    pub position: [f64; 2],
}

#[inline(always)]
fn jacobi_rhs(metric: &Metric, beta_c: f64, s: &[f64; 6]) -> [f64; 6] {
    let (e, gx, gy, kappa) = metric.flow_coeffs_with_curvature(s[0], s[1]);
    let (cos, sin) = (s[2], s[3]);
    let w = e * (-sin * gx + cos * gy);
    [e * cos, e * sin, -sin * w, cos * w, s[5], -beta_c * kappa * s[4]]
}

#[inline]
fn initial_state(start: SmPoint) -> [f64; 6] {
    let [x, y, c, s] = start.state();
    [x, y, c, s, 0.0, 1.0]
}

fn check_beta(beta_c: f64) -> Result<()> {
    if beta_c.is_finite() && beta_c >= 0.0 {
        Ok(())
    } else {
        Err(GeoError::Usage(format!("curvature multiplier must be >= 0, got {beta_c}")))
    }
}

/// Integrates the geodesic from `start` together with its scaled Jacobi
/// field in a single RK4 pass.
pub fn trace_jacobi(
    m: &Manifold,
    start: SmPoint,
    beta_c: f64,
    params: &TraceParams,
) -> Result<(GeodesicPath, JacobiTrace)> {
    check_beta(beta_c)?;
    let f = |s: &[f64; 6]| jacobi_rhs(&m.metric, beta_c, s);
    let mut sink = SampleSink::new(start.theta);
    let mut b = Vec::new();
    let mut bdot = Vec::new();
    let exit = march(&f, &m.domain, initial_state(start), params, |s| {
        sink.push(s);
        b.push(s[4]);
        bdot.push(s[5]);
    });
    match exit {
        Ok(exit) => Ok((
            GeodesicPath {
                samples: sink.finish(),
                dt: params.dt,
                exit_point: [exit.state[0], exit.state[1]],
                exit_theta: wrap_2pi(state_theta(&exit.state)),
                tau: exit.tau,
            },
            JacobiTrace { b, bdot, beta_c, b_exit: exit.state[4], bdot_exit: exit.state[5] },
        )),
        Err(_) => {
            // Reuse the plain tracer to build the error with its partial path.
            let path = crate::flow::trace_from_interior(m, start, crate::flow::Direction::Forward, params);
            Err(path.err().unwrap_or_else(|| GeoError::NotApplicable("Jacobi trace did not exit".into())))
        }
    }
}

pub fn trace_jacobi_from_influx(
    m: &Manifold,
    c: InfluxCoord,
    beta_c: f64,
    params: &TraceParams,
) -> Result<(GeodesicPath, JacobiTrace)> {
    trace_jacobi(m, influx_state(&m.domain, c), beta_c, params).map_err(|e| match e {
        GeoError::Trapped(mut t) => {
            t.origin = Some(c);
            GeoError::Trapped(t)
        }
        e => e,
    })
}

/// Zeros of `b` on `(10 dt, tau]`, located by linear interpolation between
/// bracketing samples.
pub fn conjugate_points(jt: &JacobiTrace, path: &GeodesicPath) -> Vec<ConjugatePoint> {
    let dt = path.dt;
    let t_min = T_MIN_STEPS * dt;
    let n = jt.b.len().min(path.samples.len());
    let mut nodes: Vec<(f64, f64, [f64; 2])> = (0..n)
        .map(|i| (i as f64 * dt, jt.b[i], [path.samples[i].x, path.samples[i].y]))
        .collect();
    nodes.push((path.tau, jt.b_exit, path.exit_point));

    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (t0, b0, p0) = w[0];
        let (t1, b1, p1) = w[1];
        if t1 <= t_min || (b0 > 0.0) == (b1 > 0.0) {
            continue;
        }
        let s = if b1 != b0 { b0 / (b0 - b1) } else { 1.0 };
        let t = t0 + s * (t1 - t0);
        if t <= t_min {
            continue;
        }
        out.push(ConjugatePoint { t, position: [p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1])] });
    }
    out
}

/// Whether the geodesic from `c` carries a zero of `b_beta` past the exclusion
/// band. Allocation-free.
fn ray_has_zero(m: &Manifold, c: InfluxCoord, beta_c: f64, params: &TraceParams) -> Result<bool> {
    let f = |s: &[f64; 6]| jacobi_rhs(&m.metric, beta_c, s);
    let start = influx_state(&m.domain, c);
    let i_min = T_MIN_STEPS as usize;
    let mut i = 0usize;
    let mut hit = false;
    let exit = march(&f, &m.domain, initial_state(start), params, |s| {
        if i > i_min && s[4] <= 0.0 {
            hit = true;
        }
        i += 1;
    });
    match exit {
        Ok(exit) => Ok(hit || (exit.tau > T_MIN_STEPS * params.dt && exit.state[4] <= 0.0)),
        Err(_) => Err(GeoError::NotApplicable(format!(
            "geodesic from (beta={}, alpha={}) is trapped; the conjugate-point test needs a non-trapping manifold",
            c.beta, c.alpha
        ))),
    }
}

/// Tests whether the manifold is free of `beta_c`-conjugate points over the
/// influx discretization `grid`.
pub fn is_beta_free(m: &Manifold, beta_c: f64, grid: &InfluxGrid, params: &TraceParams) -> Result<bool> {
    check_beta(beta_c)?;
    check_grid(grid)?;
    let found = (0..grid.len())
        .into_par_iter()
        .map(|idx| ray_has_zero(m, grid.coord(idx), beta_c, params))
        .find_first(|r| !matches!(r, Ok(false)));
    match found {
        None => Ok(true),
        Some(Ok(_)) => Ok(false),
        Some(Err(e)) => Err(e),
    }
}

fn check_grid(grid: &InfluxGrid) -> Result<()> {
    if grid.n_beta < 16 || grid.n_alpha < 16 {
        return Err(GeoError::Usage(format!(
            "conjugate-point test needs at least 16x16 influx nodes, got {}x{}",
            grid.n_beta, grid.n_alpha
        )));
    }
    Ok(())
}

/// Every `beta_c`-conjugate point reached from the influx discretization,
/// keyed by the influx coordinate of its geodesic.
pub fn beta_conjugate_locus(
    m: &Manifold,
    beta_c: f64,
    grid: &InfluxGrid,
    params: &TraceParams,
) -> Result<Vec<(InfluxCoord, ConjugatePoint)>> {
    check_beta(beta_c)?;
    check_grid(grid)?;
    let per_ray: Vec<Result<Vec<(InfluxCoord, ConjugatePoint)>>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let c = grid.coord(idx);
            let (path, jt) = trace_jacobi_from_influx(m, c, beta_c, params)?;
            Ok(conjugate_points(&jt, &path).into_iter().map(|p| (c, p)).collect())
        })
        .collect();
    let mut out = Vec::new();
    for r in per_ray {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminatorSettings {
    /// Width of the final bracket.
    pub eps: f64,
    /// Upper end of the search; returned as-is when the manifold is free of
    /// conjugate points there.
    pub beta_cap: f64,
    pub beta_floor: f64,
}

impl Default for TerminatorSettings {
    fn default() -> Self {
        TerminatorSettings { eps: 1e-3, beta_cap: 64.0, beta_floor: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terminator {
    pub value: f64,
    /// The search hit `beta_cap`; the true constant is at least `value`.
    pub capped: bool,
}

/// Terminator constant by dichotomy on `[beta_floor, beta_cap]`.
pub fn terminator(
    m: &Manifold,
    settings: &TerminatorSettings,
    grid: &InfluxGrid,
    params: &TraceParams,
) -> Result<Terminator> {
    let TerminatorSettings { eps, beta_cap, beta_floor } = *settings;
    if !(eps > 0.0) || !(beta_cap > 1.0) || !(beta_floor >= 0.0 && beta_floor < beta_cap) {
        return Err(GeoError::Usage(format!("invalid terminator settings {settings:?}")));
    }
    if is_beta_free(m, beta_cap, grid, params)? {
        return Ok(Terminator { value: beta_cap, capped: true });
    }
    let (mut lo, mut hi) = (beta_floor, beta_cap);
    while hi - lo >= eps {
        let mid = 0.5 * (lo + hi);
        if is_beta_free(m, mid, grid, params)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Terminator { value: 0.5 * (lo + hi), capped: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarShapedDomain;
    use std::f64::consts::PI;

    fn manifold(metric: Metric, domain: StarShapedDomain) -> Manifold {
        Manifold::new(metric, domain).unwrap()
    }

    fn through_center(m: &Manifold, beta_c: f64, dt: f64) -> (GeodesicPath, JacobiTrace) {
        let pr = TraceParams::with_dt(&m.domain, dt).unwrap();
        trace_jacobi_from_influx(m, InfluxCoord { beta: PI, alpha: 0.0 }, beta_c, &pr).unwrap()
    }

    #[test]
    fn flat_field_is_linear() {
        let m = manifold(Metric::Euclidean, StarShapedDomain::circle(1.0).unwrap());
        for beta_c in [0.0, 1.0, 7.5] {
            let (path, jt) = through_center(&m, beta_c, 1e-3);
            for (t, b) in path.times().zip(&jt.b) {
                assert!((b - t).abs() < 1e-12);
            }
            assert!(conjugate_points(&jt, &path).is_empty());
        }
    }

    #[test]
    fn unit_sphere_field_is_sine() {
        // Line through the origin of length 3.5 on the unit sphere chart.
        let radius = (3.5f64 / 4.0).tan();
        let m = manifold(Metric::const_pos(1.0).unwrap(), StarShapedDomain::circle(radius).unwrap());
        let (path, jt) = through_center(&m, 1.0, 1e-3);
        assert!((path.tau - 3.5).abs() < 1e-6, "{}", path.tau);
        for (t, b) in path.times().zip(&jt.b) {
            assert!((b - t.sin()).abs() < 1e-7);
        }
        let cps = conjugate_points(&jt, &path);
        assert_eq!(cps.len(), 1);
        assert!((cps[0].t - PI).abs() < 1e-3, "{}", cps[0].t);
    }

    #[test]
    fn short_geodesic_on_large_sphere_has_no_conjugate_point() {
        // Geodesic of length 3 for R = 2: first zero of 2 sin(t/2) at 2 pi.
        let radius = 2.0 * (3.0f64 / 8.0).tan();
        let m = manifold(Metric::const_pos(2.0).unwrap(), StarShapedDomain::circle(radius).unwrap());
        let (path, jt) = through_center(&m, 1.0, 1e-3);
        assert!((path.tau - 3.0).abs() < 1e-6);
        assert!(conjugate_points(&jt, &path).is_empty());
    }

    #[test]
    fn flat_disk_is_free() {
        let m = manifold(Metric::Euclidean, StarShapedDomain::circle(1.0).unwrap());
        let grid = InfluxGrid::new(32, 16).unwrap();
        let pr = TraceParams::with_dt(&m.domain, 1e-2).unwrap();
        assert!(is_beta_free(&m, 1.0, &grid, &pr).unwrap());
    }

    #[test]
    fn antipodal_ellipse_is_not_free() {
        let m = manifold(Metric::const_pos(1.0).unwrap(), StarShapedDomain::ellipse(1.2, 0.8).unwrap());
        let grid = InfluxGrid::new(64, 32).unwrap();
        let pr = TraceParams::with_dt(&m.domain, 1e-2).unwrap();
        assert!(!is_beta_free(&m, 1.0, &grid, &pr).unwrap());
    }

    #[test]
    fn strong_lens_is_not_free() {
        let m = manifold(Metric::centered_lens(1.2, 0.25).unwrap(), StarShapedDomain::circle(1.0).unwrap());
        let grid = InfluxGrid::new(64, 32).unwrap();
        let pr = TraceParams::with_dt(&m.domain, 1e-2).unwrap();
        assert!(!is_beta_free(&m, 1.0, &grid, &pr).unwrap());
    }

    #[test]
    fn small_grids_are_rejected() {
        let m = manifold(Metric::Euclidean, StarShapedDomain::circle(1.0).unwrap());
        let pr = TraceParams::with_dt(&m.domain, 1e-2).unwrap();
        let grid = InfluxGrid::new(8, 4).unwrap();
        assert!(matches!(is_beta_free(&m, 1.0, &grid, &pr), Err(GeoError::Usage(_))));
    }

    #[test]
    fn trapping_is_not_applicable() {
        let m = manifold(Metric::centered_lens(3.5, 0.25).unwrap(), StarShapedDomain::circle(1.0).unwrap());
        let grid = InfluxGrid::new(32, 16).unwrap();
        let pr = TraceParams::new(2e-2, 60).unwrap();
        assert!(matches!(is_beta_free(&m, 0.01, &grid, &pr), Err(GeoError::NotApplicable(_))));
    }

    #[test]
    fn flat_terminator_is_capped() {
        let m = manifold(Metric::Euclidean, StarShapedDomain::circle(1.0).unwrap());
        let grid = InfluxGrid::new(32, 16).unwrap();
        let pr = TraceParams::with_dt(&m.domain, 2e-2).unwrap();
        let t = terminator(&m, &TerminatorSettings::default(), &grid, &pr).unwrap();
        assert_eq!(t, Terminator { value: 64.0, capped: true });
    }
}
