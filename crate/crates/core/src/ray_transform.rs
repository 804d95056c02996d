//! Fan-beam discretization of the influx boundary and the forward transforms
//! `I0 f` and `I1[X_perp h]`, computed by rectangle-rule quadrature along
//! traced geodesics.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::fields::ScalarGrid;
use crate::flow::{geodesic_rhs, influx_state, march, trace_from_influx, InfluxCoord, TraceParams};
use crate::geometry::{Manifold, StarShapedDomain};

/// Cell-centered fan-beam nodes: `beta_i = 2 pi i / n_beta`,
/// `alpha_j = -pi/2 + pi (j + 1/2) / n_alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InfluxGrid {
    pub n_beta: usize,
    pub n_alpha: usize,
}

impl InfluxGrid {
    pub fn new(n_beta: usize, n_alpha: usize) -> Result<Self> {
        if n_beta == 0 || n_alpha < 2 {
            return Err(GeoError::Usage(format!("influx grid {n_beta}x{n_alpha} is too small")));
        }
        Ok(InfluxGrid { n_beta, n_alpha })
    }

    /// The `2n x n` grid matched to an `n x n` reconstruction grid.
    pub fn build(n: usize) -> Result<Self> {
        if n < 8 {
            return Err(GeoError::Usage(format!("resolution must be >= 8, got {n}")));
        }
        Self::new(2 * n, n)
    }

    pub fn len(&self) -> usize {
        self.n_beta * self.n_alpha
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_beta(&self) -> f64 {
        TAU / self.n_beta as f64
    }

    pub fn d_alpha(&self) -> f64 {
        PI / self.n_alpha as f64
    }

    pub fn beta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.n_beta as f64
    }

    pub fn alpha(&self, j: usize) -> f64 {
        -FRAC_PI_2 + PI * (j as f64 + 0.5) / self.n_alpha as f64
    }

    /// Node at flat index `i * n_alpha + j`.
    pub fn coord(&self, idx: usize) -> InfluxCoord {
        InfluxCoord { beta: self.beta(idx / self.n_alpha), alpha: self.alpha(idx % self.n_alpha) }
    }
}

/// Values on an [`InfluxGrid`], stored with `beta` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct FanBeamData {
    pub grid: InfluxGrid,
    pub values: Vec<f64>,
}

impl FanBeamData {
    pub fn new(grid: InfluxGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GeoError::Usage(format!(
                "fan-beam data has {} values for a {}x{} grid",
                values.len(),
                grid.n_beta,
                grid.n_alpha
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(GeoError::Usage(format!("non-finite fan-beam value {v}")));
        }
        Ok(FanBeamData { grid, values })
    }

    pub fn zeros(grid: InfluxGrid) -> Self {
        FanBeamData { grid, values: vec![0.0; grid.len()] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_alpha + j]
    }

    /// Bilinear interpolation, periodic in `beta` and clamped to the node
    /// range in `alpha`.
    #[inline]
    pub fn interp(&self, beta: f64, alpha: f64) -> f64 {
        let g = &self.grid;
        let u = (beta / g.d_beta()).rem_euclid(g.n_beta as f64);
        let mut i0 = u.floor() as usize;
        let fu = u - i0 as f64;
        if i0 >= g.n_beta {
            i0 = 0;
        }
        let i1 = if i0 + 1 == g.n_beta { 0 } else { i0 + 1 };

        let v = ((alpha - g.alpha(0)) / g.d_alpha()).clamp(0.0, (g.n_alpha - 1) as f64);
        let j0 = (v.floor() as usize).min(g.n_alpha - 2);
        let fv = v - j0 as f64;

        let a = self.get(i0, j0) * (1.0 - fv) + self.get(i0, j0 + 1) * fv;
        let b = self.get(i1, j0) * (1.0 - fv) + self.get(i1, j0 + 1) * fv;
        a * (1.0 - fu) + b * fu
    }

    pub fn scaled(&self, a: f64) -> Self {
        FanBeamData { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }
}

/// Point evaluation of a scalar field, zero outside its domain.
#[derive(Clone)]
pub enum FieldSampler {
    Analytic { f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, domain: StarShapedDomain },
    Grid(ScalarGrid),
}

impl fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSampler::Analytic { domain, .. } => write!(f, "Analytic {{ domain: {domain:?} }}"),
            FieldSampler::Grid(g) => write!(f, "Grid {{ n: {}, r_max: {} }}", g.n(), g.r_max()),
        }
    }
}

impl FieldSampler {
    pub fn analytic<F>(domain: StarShapedDomain, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        FieldSampler::Analytic { f: Arc::new(f), domain }
    }

    pub fn zero(domain: StarShapedDomain) -> Self {
        Self::analytic(domain, |_, _| 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            FieldSampler::Analytic { f, domain } => {
                if domain.inside(x, y) {
                    f(x, y)
                } else {
                    0.0
                }
            }
            FieldSampler::Grid(g) => g.sample_bilinear(x, y),
        }
    }
}

/// Maps every node through `ray`, re-tracing failed rays to build the error
/// of the first failure in node order.
fn per_node<R>(m: &Manifold, grid: &InfluxGrid, params: &TraceParams, ray: R) -> Result<FanBeamData>
where
    R: Fn(InfluxCoord) -> Option<f64> + Sync,
{
    let values: Vec<Option<f64>> = (0..grid.len()).into_par_iter().map(|idx| ray(grid.coord(idx))).collect();
    if let Some(idx) = values.iter().position(Option::is_none) {
        return Err(trace_from_influx(m, grid.coord(idx), params)
            .err()
            .unwrap_or_else(|| GeoError::NotApplicable("ray failed to exit".into())));
    }
    FanBeamData::new(*grid, values.into_iter().flatten().collect())
}

/// `I0 f(beta, alpha) ~ dt * sum_p f(x_p, y_p)` over the inside samples.
pub fn forward_i0(m: &Manifold, f: &FieldSampler, grid: &InfluxGrid, params: &TraceParams) -> Result<FanBeamData> {
    let rhs = |s: &[f64; 4]| geodesic_rhs(&m.metric, s);
    per_node(m, grid, params, |c| {
        let p = influx_state(&m.domain, c);
        let mut sum = 0.0;
        march(&rhs, &m.domain, p.state(), params, |s| sum += f.eval(s[0], s[1])).ok()?;
        Some(params.dt * sum)
    })
}

/// `I1[X_perp h](beta, alpha) ~ dt * sum_p e^{-lambda} (h(x+) - h(x-)) / (2 dt)`
/// with `x+- = (x +- dt sin(theta), y -+ dt cos(theta))`.
pub fn forward_i1_xperp(
    m: &Manifold,
    h: &FieldSampler,
    grid: &InfluxGrid,
    params: &TraceParams,
) -> Result<FanBeamData> {
    let dt = params.dt;
    let rhs = |s: &[f64; 4]| geodesic_rhs(&m.metric, s);
    per_node(m, grid, params, |c| {
        let p = influx_state(&m.domain, c);
        let mut sum = 0.0;
        march(&rhs, &m.domain, p.state(), params, |s| {
            let (cos, sin) = (s[2], s[3]);
            let e = m.metric.flow_coeffs(s[0], s[1]).0;
            let hp = h.eval(s[0] + dt * sin, s[1] - dt * cos);
            let hm = h.eval(s[0] - dt * sin, s[1] + dt * cos);
            sum += e * (hp - hm) / (2.0 * dt);
        })
        .ok()?;
        Some(dt * sum)
    })
}
