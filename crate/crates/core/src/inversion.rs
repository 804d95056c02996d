//! Backprojection and Neumann-series inversion.
//!
//! `A = backproject o prep` inverts `I` up to a smoothing error operator that
//! vanishes in constant curvature; [`neumann_invert`] sums the partial
//! series `sum_k (Id - A I)^k A D`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{GeoError, Result};
use crate::fiber::{prep, Formula};
use crate::fields::{inside_indices, rel_l2, GridSpec, ScalarGrid};
use crate::flow::{basepoint_unchecked, InfluxCoord, TraceParams};
use crate::geometry::{Manifold, StarShapedDomain};
use crate::ray_transform::{forward_i0, forward_i1_xperp, FanBeamData, FieldSampler};

/// Basepoint-table entry status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableEntry {
    Basepoint(InfluxCoord),
    /// The backward geodesic exhausted its step budget.
    Trapped,
    /// The backward exit had an incidence angle outside the tolerated band.
    Inconsistent,
}

const TRAPPED: [f64; 2] = [f64::NAN, 0.0];
const INCONSISTENT: [f64; 2] = [f64::NAN, 1.0];

/// Basepoints of every inside gridpoint along `theta_l = 2 pi l / n_theta`.
#[derive(Debug, Clone)]
pub struct BasepointTable {
    pub spec: GridSpec,
    pub domain: StarShapedDomain,
    pub n_theta: usize,
    pub params: TraceParams,
    /// Flat grid indices of the inside nodes, ascending.
    pub nodes: Vec<usize>,
    /// `[beta, alpha]` per node and direction; `beta = NaN` marks a failure.
    entries: Vec<[f64; 2]>,
}

impl BasepointTable {
    #[inline]
    pub fn entry(&self, node: usize, l: usize) -> TableEntry {
        decode(self.entries[node * self.n_theta + l])
    }

    pub fn theta(&self, l: usize) -> f64 {
        TAU * l as f64 / self.n_theta as f64
    }

    /// Grid indices of nodes with at least one failed direction.
    pub fn flagged(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(k, _)| self.entries[k * self.n_theta..(k + 1) * self.n_theta].iter().any(|e| e[0].is_nan()))
            .map(|(_, &g)| g)
            .collect()
    }

    pub fn count_failed(&self) -> usize {
        self.entries.iter().filter(|e| e[0].is_nan()).count()
    }

    fn check(&self, m: &Manifold) -> Result<()> {
        if self.domain != m.domain {
            return Err(GeoError::Usage("basepoint table was built for another domain".into()));
        }
        Ok(())
    }
}

#[inline]
fn decode(e: [f64; 2]) -> TableEntry {
    if e[0].is_nan() {
        if e[1] == 0.0 {
            TableEntry::Trapped
        } else {
            TableEntry::Inconsistent
        }
    } else {
        TableEntry::Basepoint(InfluxCoord { beta: e[0], alpha: e[1] })
    }
}

pub fn precompute_basepoints(
    m: &Manifold,
    spec: GridSpec,
    n_theta: usize,
    params: &TraceParams,
) -> Result<BasepointTable> {
    if n_theta < 16 || n_theta % 4 != 0 {
        return Err(GeoError::Usage(format!("n_theta must be a multiple of 4 and >= 16, got {n_theta}")));
    }
    let nodes = inside_indices(&spec, &m.domain);
    let mut entries = vec![[0.0; 2]; nodes.len() * n_theta];
    entries.par_chunks_mut(n_theta).zip(nodes.par_iter()).for_each(|(row, &k)| {
        let x = spec.node(k % spec.n, k / spec.n);
        for (l, e) in row.iter_mut().enumerate() {
            let theta = TAU * l as f64 / n_theta as f64;
            *e = match basepoint_unchecked(m, x, theta, params) {
                Some(Ok(c)) => [c.beta, c.alpha],
                Some(Err(_)) => INCONSISTENT,
                None => TRAPPED,
            };
        }
    });
    Ok(BasepointTable { spec, domain: m.domain, n_theta, params: *params, nodes, entries })
}

/// Angular sums `(sum w, sum w cos, sum w sin) * dtheta` at every inside node.
fn angular_sums(prepped: &FanBeamData, table: &BasepointTable) -> Vec<[f64; 3]> {
    let nt = table.n_theta;
    let dtheta = TAU / nt as f64;
    let trig: Vec<(f64, f64)> = (0..nt).map(|l| table.theta(l).sin_cos()).collect();
    (0..table.nodes.len())
        .into_par_iter()
        .map(|k| {
            let mut acc = [0.0; 3];
            for (l, &(sin, cos)) in trig.iter().enumerate() {
                if let TableEntry::Basepoint(c) = table.entry(k, l) {
                    let w = prepped.interp(c.beta, c.alpha);
                    acc[0] += w;
                    acc[1] += w * cos;
                    acc[2] += w * sin;
                }
            }
            acc.map(|a| a * dtheta)
        })
        .collect()
}

fn scatter(table: &BasepointTable, vals: impl Iterator<Item = f64>) -> ScalarGrid {
    let mut g = ScalarGrid::zeros(table.spec, table.domain);
    for (&k, v) in table.nodes.iter().zip(vals) {
        g.values[k] = v;
    }
    g
}

/// `e^{-2 lambda} / (2 pi) * (-D_x(e^lambda v) + D_y(e^lambda u))` with
/// `u, v` the cosine and sine moments of the prepped data.
pub fn backproject_frc(prepped: &FanBeamData, table: &BasepointTable, m: &Manifold) -> Result<ScalarGrid> {
    table.check(m)?;
    let sums = angular_sums(prepped, table);
    let spec = table.spec;
    let lambda: Vec<f64> = table
        .nodes
        .iter()
        .map(|&k| {
            let [x, y] = spec.node(k % spec.n, k / spec.n);
            m.metric.eval(x, y).map(|e| e.lambda)
        })
        .collect::<Result<_>>()?;
    let eu = scatter(table, sums.iter().zip(&lambda).map(|(s, l)| l.exp() * s[1]));
    let ev = scatter(table, sums.iter().zip(&lambda).map(|(s, l)| l.exp() * s[2]));
    let (dx_ev, _) = ev.grad_centered();
    let (_, dy_eu) = eu.grad_centered();
    Ok(scatter(
        table,
        table
            .nodes
            .iter()
            .zip(&lambda)
            .map(|(&k, l)| (-2.0 * l).exp() / TAU * (-dx_ev.values[k] + dy_eu.values[k])),
    ))
}

/// `-(1 / 2 pi) * dtheta * sum_l w(basepoint(x, theta_l))`.
pub fn backproject_hrc(prepped: &FanBeamData, table: &BasepointTable) -> Result<ScalarGrid> {
    let sums = angular_sums(prepped, table);
    Ok(scatter(table, sums.iter().map(|s| -s[0] / (2.0 * PI))))
}

/// One application of `A` to fan-beam data.
pub fn apply_a(data: &FanBeamData, formula: Formula, table: &BasepointTable, m: &Manifold) -> Result<ScalarGrid> {
    let w = prep(data, formula);
    match formula {
        Formula::Frc => backproject_frc(&w, table, m),
        Formula::Hrc => {
            table.check(m)?;
            backproject_hrc(&w, table)
        }
    }
}

/// Forward transform matched to `formula`, sampling `g` bilinearly.
pub fn apply_forward(g: &ScalarGrid, formula: Formula, m: &Manifold, data_grid: &crate::ray_transform::InfluxGrid, params: &TraceParams) -> Result<FanBeamData> {
    let s = FieldSampler::Grid(g.clone());
    match formula {
        Formula::Frc => forward_i0(m, &s, data_grid, params),
        Formula::Hrc => forward_i1_xperp(m, &s, data_grid, params),
    }
}

/// Plain relative L2 distance of fan-beam vectors; NaN when `b` vanishes.
pub fn rel_l2_data(a: &FanBeamData, b: &FanBeamData) -> f64 {
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.values.iter().map(|y| y * y).sum();
    if den == 0.0 {
        f64::NAN
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug)]
pub struct ReconstructionReport {
    pub result: ScalarGrid,
    /// Field error per partial sum (empty without ground truth).
    pub per_iteration_field_error: Vec<f64>,
    /// Relative error of the re-computed forward data per partial sum.
    pub per_iteration_data_error: Vec<f64>,
    /// Increments `g_k`; `result` is their running sum in order.
    pub increments: Vec<ScalarGrid>,
    /// Grid indices with at least one trapped or inconsistent direction.
    pub flagged: Vec<usize>,
    /// Error that stopped the iteration early.
    pub aborted: Option<GeoError>,
}

impl ReconstructionReport {
    pub fn iterations_done(&self) -> usize {
        self.increments.len().saturating_sub(1)
    }
}

/// Partial Neumann sum `f_N = sum_{k <= N} (Id - A I)^k A D`.
#[allow(clippy::too_many_arguments)]
pub fn neumann_invert(
    data: &FanBeamData,
    formula: Formula,
    iterations: usize,
    m: &Manifold,
    table: &BasepointTable,
    params: &TraceParams,
    truth: Option<&ScalarGrid>,
) -> Result<ReconstructionReport> {
    table.check(m)?;
    if let Some(t) = truth {
        if t.spec != table.spec {
            return Err(GeoError::Usage("ground truth grid does not match the basepoint table".into()));
        }
    }
    let f0 = apply_a(data, formula, table, m)?;
    let mut report = ReconstructionReport {
        result: f0.clone(),
        per_iteration_field_error: Vec::new(),
        per_iteration_data_error: Vec::new(),
        increments: vec![f0.clone()],
        flagged: table.flagged(),
        aborted: None,
    };
    let record = |report: &mut ReconstructionReport, f: &ScalarGrid| -> Result<()> {
        if let Some(t) = truth {
            report.per_iteration_field_error.push(rel_l2(f, t)?);
        }
        let fd = apply_forward(f, formula, m, &data.grid, params)?;
        report.per_iteration_data_error.push(rel_l2_data(&fd, data));
        Ok(())
    };
    if let Err(e) = record(&mut report, &f0) {
        return abort_or_fail(report, e);
    }

    let mut g = f0;
    for _ in 0..iterations {
        let step = apply_forward(&g, formula, m, &data.grid, params).and_then(|ig| apply_a(&ig, formula, table, m));
        let agi = match step {
            Ok(v) => v,
            Err(e) => return abort_or_fail(report, e),
        };
        g = g.axpy(-1.0, &agi)?;
        report.result = report.result.axpy(1.0, &g)?;
        report.increments.push(g.clone());
        let f = report.result.clone();
        if let Err(e) = record(&mut report, &f) {
            return abort_or_fail(report, e);
        }
    }
    Ok(report)
}

fn abort_or_fail(mut report: ReconstructionReport, e: GeoError) -> Result<ReconstructionReport> {
    if e.is_trapped() {
        report.aborted = Some(e);
        Ok(report)
    } else {
        Err(e)
    }
}
