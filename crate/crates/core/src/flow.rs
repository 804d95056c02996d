//! Geodesic flow on the unit circle bundle in isothermal coordinates.
//!
//! A unit-speed geodesic is the triple `(x, y, theta)` with
//!
//! ```text
//! x'     = e^{-lambda} cos(theta)
//! y'     = e^{-lambda} sin(theta)
//! theta' = e^{-lambda} (-sin(theta) d1 lambda + cos(theta) d2 lambda)
//! ```
//!
//! integrated with classical RK4 at a fixed step. The direction is carried as
//! the unit vector `(cos theta, sin theta)`, whose derivative is
//! `theta' * (-sin theta, cos theta)`, so the right-hand side needs no
//! trigonometry. Marching stops at the first sample outside the domain, and
//! the crossing is then located by bisection on the step length of a single
//! RK4 substep from the last inside sample.

use std::f64::consts::PI;

use crate::error::{GeoError, Result, TrappedGeodesic};
use crate::geometry::{wrap_2pi, wrap_pi, Manifold, Metric, StarShapedDomain};

const BISECTION_ITERS: usize = 20;
/// Incidence angles are kept this far inside `(-pi/2, pi/2)`.
pub const ALPHA_BAND: f64 = 1e-9;
/// Maximum overshoot of `|alpha|` past `pi/2` tolerated before clamping.
pub const ALPHA_SLACK: f64 = 1e-3;

/// A point of the unit circle bundle. `theta` is wrapped at API boundaries
/// but is kept continuous along traced paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl SmPoint {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        SmPoint { x, y, theta }
    }

    pub fn wrapped(self) -> Self {
        SmPoint { theta: wrap_2pi(self.theta), ..self }
    }

    pub(crate) fn state(self) -> [f64; 4] {
        let (sin, cos) = self.theta.sin_cos();
        [self.x, self.y, cos, sin]
    }
}

/// Direction angle of a marched state.
#[inline]
pub(crate) fn state_theta(s: &[f64]) -> f64 {
    s[3].atan2(s[2])
}

/// Collects samples with `theta` unwrapped against the previous sample; the
/// first sample keeps the starting angle exactly.
pub(crate) struct SampleSink {
    samples: Vec<SmPoint>,
    theta: f64,
}

impl SampleSink {
    pub fn new(start_theta: f64) -> Self {
        SampleSink { samples: Vec::new(), theta: start_theta }
    }

    #[inline]
    pub fn push(&mut self, s: &[f64]) {
        if !self.samples.is_empty() {
            self.theta += wrap_pi(state_theta(s) - self.theta);
        }
        self.samples.push(SmPoint::new(s[0], s[1], self.theta));
    }

    pub fn finish(self) -> Vec<SmPoint> {
        self.samples
    }
}

/// Fan-beam coordinate of an inward-pointing boundary vector: boundary
/// parameter `beta` and incidence angle `alpha` measured from the inner normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluxCoord {
    pub beta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Step size and step budget of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    pub dt: f64,
    pub max_steps: usize,
}

impl TraceParams {
    pub fn new(dt: f64, max_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GeoError::Usage(format!("dt must be positive, got {dt}")));
        }
        if max_steps == 0 {
            return Err(GeoError::Usage("max_steps must be positive".into()));
        }
        Ok(TraceParams { dt, max_steps })
    }

    /// `dt` with the default budget of `ceil(8 r_max / dt)` steps.
    pub fn with_dt(domain: &StarShapedDomain, dt: f64) -> Result<Self> {
        let steps = (8.0 * domain.r_max() / dt).ceil() as usize;
        Self::new(dt, steps.max(1))
    }

    /// One grid cell per step on an `n x n` grid.
    pub fn for_resolution(domain: &StarShapedDomain, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(GeoError::Usage(format!("grid resolution must be >= 2, got {n}")));
        }
        Self::with_dt(domain, 2.0 * domain.r_max() / n as f64)
    }
}

/// Time-sampled geodesic with refined exit data.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    /// Samples at `t = i * dt` that lie inside the domain (the first one is
    /// the starting point).
    pub samples: Vec<SmPoint>,
    pub dt: f64,
    pub exit_point: [f64; 2],
    /// Direction at the exit, wrapped to `[0, 2 pi)`.
    pub exit_theta: f64,
    /// Refined first exit time.
    pub tau: f64,
}

impl GeodesicPath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| i as f64 * self.dt)
    }
}

/// Refined boundary crossing of a marched trajectory.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Exit<const N: usize> {
    pub state: [f64; N],
    pub tau: f64,
}

#[inline(always)]
fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

#[inline(always)]
pub(crate) fn rk4_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &k1));
    let k3 = f(&axpy(y, 0.5 * h, &k2));
    let k4 = f(&axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Right-hand side of the geodesic system in the state `[x, y, cos, sin]`.
#[inline(always)]
pub(crate) fn geodesic_rhs(metric: &Metric, s: &[f64; 4]) -> [f64; 4] {
    let (e, gx, gy) = metric.flow_coeffs(s[0], s[1]);
    let (cos, sin) = (s[2], s[3]);
    let w = e * (-sin * gx + cos * gy);
    [e * cos, e * sin, -sin * w, cos * w]
}

/// Marches `y0` until it leaves `domain`, calling `visit` on every inside
/// sample (including `y0`). Returns `Err(steps)` if the budget runs out.
pub(crate) fn march<const N: usize, F, V>(
    f: &F,
    domain: &StarShapedDomain,
    y0: [f64; N],
    params: &TraceParams,
    mut visit: V,
) -> std::result::Result<Exit<N>, usize>
where
    F: Fn(&[f64; N]) -> [f64; N],
    V: FnMut(&[f64; N]),
{
    let dt = params.dt;
    let mut y = y0;
    visit(&y);
    for step in 0..params.max_steps {
        let next = rk4_step(f, &y, dt);
        if !domain.inside(next[0], next[1]) {
            let (state, h) = refine_exit(f, domain, &y, &next, dt);
            return Ok(Exit { state, tau: step as f64 * dt + h });
        }
        y = next;
        visit(&y);
    }
    Err(params.max_steps)
}

/// Locates the crossing between an inside state `y` and the outside state
/// reached after a full step `dt`.
fn refine_exit<const N: usize, F>(
    f: &F,
    domain: &StarShapedDomain,
    y: &[f64; N],
    outside: &[f64; N],
    dt: f64,
) -> ([f64; N], f64)
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let (mut lo, mut hi) = (0.0, dt);
    let mut s_lo = domain.radial_excess(y[0], y[1]).min(0.0);
    let mut s_hi = domain.radial_excess(outside[0], outside[1]).max(0.0);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let p = rk4_step(f, y, mid);
        let s = domain.radial_excess(p[0], p[1]);
        if s <= 0.0 {
            lo = mid;
            s_lo = s;
        } else {
            hi = mid;
            s_hi = s;
        }
    }
    // Secant inside the final bracket.
    let h = if s_hi > s_lo { lo + (hi - lo) * (-s_lo) / (s_hi - s_lo) } else { 0.5 * (lo + hi) };
    (rk4_step(f, y, h), h)
}

fn path_from<const N: usize>(samples: Vec<SmPoint>, dt: f64, exit: &Exit<N>) -> GeodesicPath {
    GeodesicPath {
        samples,
        dt,
        exit_point: [exit.state[0], exit.state[1]],
        exit_theta: wrap_2pi(state_theta(&exit.state)),
        tau: exit.tau,
    }
}

fn trapped(origin: Option<InfluxCoord>, samples: Vec<SmPoint>, dt: f64) -> GeoError {
    let last = samples.last().copied().unwrap_or(SmPoint::new(f64::NAN, f64::NAN, f64::NAN));
    GeoError::Trapped(Box::new(TrappedGeodesic {
        origin,
        partial: GeodesicPath {
            samples,
            dt,
            exit_point: [last.x, last.y],
            exit_theta: wrap_2pi(last.theta),
            tau: f64::NAN,
        },
    }))
}

/// Initial state of the geodesic entering at `c`.
pub fn influx_state(domain: &StarShapedDomain, c: InfluxCoord) -> SmPoint {
    let (p, nu) = domain.boundary_point_and_normal(c.beta);
    SmPoint::new(p[0], p[1], nu + c.alpha)
}

/// Traces the geodesic entering the domain at influx coordinate `c`.
pub fn trace_from_influx(m: &Manifold, c: InfluxCoord, params: &TraceParams) -> Result<GeodesicPath> {
    let start = influx_state(&m.domain, c);
    let f = |s: &[f64; 4]| geodesic_rhs(&m.metric, s);
    let mut sink = SampleSink::new(start.theta);
    match march(&f, &m.domain, start.state(), params, |s| sink.push(s)) {
        Ok(exit) => Ok(path_from(sink.finish(), params.dt, &exit)),
        Err(_) => Err(trapped(Some(c), sink.finish(), params.dt)),
    }
}

fn check_strictly_inside(domain: &StarShapedDomain, p: SmPoint) -> Result<()> {
    if !(p.x.is_finite() && p.y.is_finite() && p.theta.is_finite()) {
        return Err(GeoError::Usage(format!("non-finite start point {p:?}")));
    }
    if domain.radial_excess(p.x, p.y) >= 0.0 {
        return Err(GeoError::Usage(format!("start point ({}, {}) is not strictly inside", p.x, p.y)));
    }
    Ok(())
}

/// Traces from an interior point. `Backward` follows the geodesic through
/// `start` in reverse, i.e. integrates from `(x, y, theta + pi)`.
pub fn trace_from_interior(
    m: &Manifold,
    start: SmPoint,
    direction: Direction,
    params: &TraceParams,
) -> Result<GeodesicPath> {
    check_strictly_inside(&m.domain, start)?;
    let mut y0 = start.state();
    let mut theta0 = start.theta;
    if direction == Direction::Backward {
        y0[2] = -y0[2];
        y0[3] = -y0[3];
        theta0 += PI;
    }
    let f = |s: &[f64; 4]| geodesic_rhs(&m.metric, s);
    let mut sink = SampleSink::new(theta0);
    match march(&f, &m.domain, y0, params, |s| sink.push(s)) {
        Ok(exit) => Ok(path_from(sink.finish(), params.dt, &exit)),
        Err(_) => Err(trapped(None, sink.finish(), params.dt)),
    }
}

/// Converts a backward exit `(point, outward direction)` into the influx
/// coordinate of the geodesic through it.
pub(crate) fn influx_from_backward_exit(
    domain: &StarShapedDomain,
    point: [f64; 2],
    backward_theta: f64,
) -> Result<InfluxCoord> {
    let beta = wrap_2pi(point[1].atan2(point[0]));
    let nu = domain.inner_normal(beta);
    let alpha = wrap_pi(backward_theta + PI - nu);
    let limit = std::f64::consts::FRAC_PI_2;
    if alpha.abs() > limit + ALPHA_SLACK {
        return Err(GeoError::GeometryInconsistency { alpha });
    }
    let band = limit - ALPHA_BAND;
    Ok(InfluxCoord { beta, alpha: alpha.clamp(-band, band) })
}

/// Basepoint (scattering) map: the influx coordinate of the geodesic passing
/// through `(x, theta)`.
pub fn basepoint(m: &Manifold, x: [f64; 2], theta: f64, params: &TraceParams) -> Result<InfluxCoord> {
    let path = trace_from_interior(m, SmPoint::new(x[0], x[1], theta), Direction::Backward, params)?;
    influx_from_backward_exit(&m.domain, path.exit_point, path.exit_theta)
}

/// Backward trace without sample storage. `None` when the budget runs out.
#[inline]
pub(crate) fn basepoint_unchecked(
    m: &Manifold,
    x: [f64; 2],
    theta: f64,
    params: &TraceParams,
) -> Option<Result<InfluxCoord>> {
    let f = |s: &[f64; 4]| geodesic_rhs(&m.metric, s);
    let (sin, cos) = theta.sin_cos();
    let exit = march(&f, &m.domain, [x[0], x[1], -cos, -sin], params, |_| {}).ok()?;
    Some(influx_from_backward_exit(&m.domain, [exit.state[0], exit.state[1]], wrap_2pi(state_theta(&exit.state))))
}

/// Integrates the geodesic system for `steps` steps of size `dt`, ignoring the
/// domain.
pub fn integrate(metric: &Metric, start: SmPoint, dt: f64, steps: usize) -> SmPoint {
    let f = |s: &[f64; 4]| geodesic_rhs(metric, s);
    let mut y = start.state();
    let mut sink = SampleSink::new(start.theta);
    sink.push(&y);
    for _ in 0..steps {
        y = rk4_step(&f, &y, dt);
        sink.push(&y);
    }
    *sink.finish().last().expect("at least the start sample")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StarShapedDomain;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, TAU};

    fn disk() -> StarShapedDomain {
        StarShapedDomain::circle(1.0).unwrap()
    }

    fn flat() -> Manifold {
        Manifold::new(Metric::Euclidean, disk()).unwrap()
    }

    fn params(dt: f64) -> TraceParams {
        TraceParams::with_dt(&disk(), dt).unwrap()
    }

    #[test]
    fn diameter_exit_time() {
        let p = trace_from_influx(&flat(), InfluxCoord { beta: PI, alpha: 0.0 }, &params(1e-3)).unwrap();
        assert!((p.tau - 2.0).abs() < 1e-8, "{}", p.tau);
        assert!((p.exit_point[0] - 1.0).abs() < 1e-8 && p.exit_point[1].abs() < 1e-12);
        assert!(p.samples.iter().all(|s| s.y.abs() < 1e-15));
    }

    #[test]
    fn chord_exit_time() {
        let p = trace_from_influx(&flat(), InfluxCoord { beta: PI, alpha: FRAC_PI_3 }, &params(1e-3)).unwrap();
        assert!((p.tau - 1.0).abs() < 1e-8, "{}", p.tau);
    }

    #[test]
    fn exit_point_lies_on_boundary() {
        let m = Manifold::new(Metric::const_pos(1.2).unwrap(), StarShapedDomain::ellipse(1.0, 0.8).unwrap()).unwrap();
        for i in 0..20 {
            let c = InfluxCoord { beta: i as f64 * TAU / 20.0, alpha: -1.2 + 0.12 * i as f64 };
            let p = trace_from_influx(&m, c, &TraceParams::with_dt(&m.domain, 1e-2).unwrap()).unwrap();
            let e = m.domain.radial_excess(p.exit_point[0], p.exit_point[1]);
            assert!(e.abs() <= 1e-8 * m.r_max(), "{e}");
            assert!(p.tau >= 0.0 && p.tau <= p.samples.len() as f64 * p.dt);
            for s in &p.samples[1..] {
                assert!(m.domain.inside(s.x, s.y));
            }
        }
    }

    #[test]
    fn fine_step_self_convergence() {
        let m = Manifold::new(Metric::const_pos(1.2).unwrap(), disk()).unwrap();
        let c = InfluxCoord { beta: PI, alpha: 0.3 };
        let dt = 1e-2;
        let coarse = trace_from_influx(&m, c, &params(dt)).unwrap();
        let fine = trace_from_influx(&m, c, &params(dt / 20.0)).unwrap();
        let mut worst: f64 = 0.0;
        for (i, s) in coarse.samples.iter().enumerate() {
            let r = fine.samples[i * 20];
            worst = worst.max((s.x - r.x).hypot(s.y - r.y));
        }
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn backward_from_center() {
        let p = trace_from_interior(&flat(), SmPoint::new(0.0, 0.0, 0.0), Direction::Backward, &params(1e-3)).unwrap();
        assert!((p.exit_point[0] + 1.0).abs() < 1e-8 && p.exit_point[1].abs() < 1e-12);
        let p = trace_from_interior(&flat(), SmPoint::new(0.0, 0.0, FRAC_PI_2), Direction::Backward, &params(1e-3))
            .unwrap();
        assert!(p.exit_point[0].abs() < 1e-12 && (p.exit_point[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn time_reversal() {
        let m = Manifold::new(Metric::const_neg(2.0).unwrap(), disk()).unwrap();
        let pr = params(1e-3);
        let fwd = trace_from_interior(&m, SmPoint::new(0.3, 0.1, 1.0), Direction::Forward, &pr).unwrap();
        let last = *fwd.samples.last().unwrap();
        let back = trace_from_interior(&m, last, Direction::Backward, &pr).unwrap();
        let n = fwd.samples.len();
        assert!(back.samples.len() >= n);
        for j in 0..n {
            let a = back.samples[j];
            let b = fwd.samples[n - 1 - j];
            assert!((a.x - b.x).hypot(a.y - b.y) < 1e-6);
        }
    }

    #[test]
    fn interior_start_must_be_inside() {
        let r = trace_from_interior(&flat(), SmPoint::new(1.0, 0.0, 0.0), Direction::Forward, &params(1e-2));
        assert!(matches!(r, Err(GeoError::Usage(_))));
    }

    #[test]
    fn basepoint_through_center() {
        let c = basepoint(&flat(), [0.0, 0.0], 0.0, &params(1e-3)).unwrap();
        assert!((c.beta - PI).abs() < 1e-12 && c.alpha.abs() < 1e-9);
        let c = basepoint(&flat(), [0.0, 0.0], FRAC_PI_2, &params(1e-3)).unwrap();
        assert!((c.beta - 1.5 * PI).abs() < 1e-12 && c.alpha.abs() < 1e-9);
    }

    #[test]
    fn trapped_geodesic_reports_partial_path() {
        // Circular orbit r = sqrt(2) sigma of the lens at k = e.
        let m = Manifold::new(Metric::centered_lens(std::f64::consts::E, 0.25).unwrap(), disk()).unwrap();
        let r0 = 2f64.sqrt() * 0.25;
        let pr = TraceParams::new(1e-2, 500).unwrap();
        let err = trace_from_interior(&m, SmPoint::new(r0, 0.0, FRAC_PI_2), Direction::Forward, &pr).unwrap_err();
        match err {
            GeoError::Trapped(t) => assert_eq!(t.partial.samples.len(), 501),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn euclidean_has_no_theta_drift() {
        let p = trace_from_influx(&flat(), InfluxCoord { beta: 0.7, alpha: 0.4 }, &params(1e-3)).unwrap();
        let t0 = p.samples[0].theta;
        assert!(p.samples.iter().all(|s| (s.theta - t0).abs() <= 1e-13));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let metric = Metric::const_pos(1.2).unwrap();
        let start = SmPoint::new(-0.8, 0.1, 0.3);
        let t = 1.6;
        let dt = 0.1;
        let reference = integrate(&metric, start, dt / 64.0, 16 * 64);
        let err = |h: f64| {
            let p = integrate(&metric, start, h, (t / h).round() as usize);
            (p.x - reference.x).hypot(p.y - reference.y)
        };
        let ratio = err(dt) / err(dt / 2.0);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }
}
