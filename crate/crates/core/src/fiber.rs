//! Antipodal fiber extension, fiberwise Hilbert transform and restriction.
//!
//! The incidence angle `alpha` runs over `(-pi/2, pi/2)` on the influx
//! boundary; extending by `w(beta, alpha + pi) = -+ w(beta, alpha)` gives a
//! full periodic fiber on which `H` acts diagonally in frequency.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{GeoError, Result};
use crate::ray_transform::{FanBeamData, InfluxGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Which reconstruction formula the data feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    /// Function reconstruction from `I0 f`.
    Frc,
    /// Solenoidal potential reconstruction from `I1[X_perp h]`.
    Hrc,
}

impl Formula {
    pub fn parity(self) -> Parity {
        match self {
            Formula::Frc => Parity::Odd,
            Formula::Hrc => Parity::Even,
        }
    }
}

/// Fibers of length `2 n_alpha` over `alpha in [-pi/2, 3pi/2)`, `beta` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedFiberData {
    pub grid: InfluxGrid,
    pub values: Vec<f64>,
    pub parity: Parity,
}

impl ExtendedFiberData {
    pub fn fiber_len(&self) -> usize {
        2 * self.grid.n_alpha
    }

    pub fn fiber(&self, i: usize) -> &[f64] {
        let l = self.fiber_len();
        &self.values[i * l..(i + 1) * l]
    }
}

pub fn extend(data: &FanBeamData, parity: Parity) -> ExtendedFiberData {
    let na = data.grid.n_alpha;
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
    };
    let mut values = Vec::with_capacity(2 * data.values.len());
    for row in data.values.chunks(na) {
        values.extend_from_slice(row);
        values.extend(row.iter().map(|v| sign * v));
    }
    ExtendedFiberData { grid: data.grid, values, parity }
}

pub fn restrict(e: &ExtendedFiberData) -> FanBeamData {
    let na = e.grid.n_alpha;
    let values = e.values.chunks(2 * na).flat_map(|f| f[..na].iter().copied()).collect();
    FanBeamData { grid: e.grid, values }
}

/// Multiplies the spectrum by `-i sgn(k)` in place, with the DC and (for even
/// lengths) Nyquist coefficients zeroed. `buf` must be in frequency order.
fn apply_symbol(buf: &mut [Complex<f64>]) {
    let n = buf.len();
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        if 2 * k == n {
            *c = Complex::new(0.0, 0.0);
        } else if 2 * k < n {
            *c = Complex::new(c.im, -c.re);
        } else {
            *c = Complex::new(-c.im, c.re);
        }
    }
}

/// Planned periodic Hilbert transform of a fixed length.
#[derive(Clone)]
pub struct HilbertPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    len: usize,
}

impl HilbertPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len < 4 {
            return Err(GeoError::Usage(format!("fiber length must be >= 4, got {len}")));
        }
        let mut planner = FftPlanner::new();
        Ok(HilbertPlan { fwd: planner.plan_fft_forward(len), inv: planner.plan_fft_inverse(len), len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Transforms complex samples in place.
    pub fn apply_complex(&self, buf: &mut [Complex<f64>]) {
        assert_eq!(buf.len(), self.len, "fiber length mismatch");
        self.fwd.process(buf);
        apply_symbol(buf);
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
    }

    /// Transforms real samples; returns the output and the largest discarded
    /// imaginary part.
    pub fn apply_real(&self, samples: &[f64]) -> (Vec<f64>, f64) {
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.apply_complex(&mut buf);
        let residue = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        (buf.into_iter().map(|c| c.re).collect(), residue)
    }
}

/// Hilbert transform of one periodic real fiber.
pub fn hilbert_periodic(samples: &[f64]) -> Result<Vec<f64>> {
    Ok(HilbertPlan::new(samples.len())?.apply_real(samples).0)
}

pub fn hilbert_fiber(e: &ExtendedFiberData) -> ExtendedFiberData {
    let len = e.fiber_len();
    let plan = HilbertPlan::new(len).expect("influx grids have n_alpha >= 2");
    let mut values = vec![0.0; e.values.len()];
    values.par_chunks_mut(len).zip(e.values.par_chunks(len)).for_each(|(out, fiber)| {
        out.copy_from_slice(&plan.apply_real(fiber).0);
    });
    ExtendedFiberData { grid: e.grid, values, parity: e.parity }
}

/// Hilbert transform of the odd (frc) or even (hrc) fiber part of the data.
///
/// Boundary data vanish on the outflux half, so their parity part is half the
/// antipodal extension; the factor is applied before restricting.
pub fn prep(data: &FanBeamData, formula: Formula) -> FanBeamData {
    restrict(&hilbert_fiber(&extend(data, formula.parity()))).scaled(0.5)
}
