//! Cartesian scalar grids on `[-r_max, r_max]^2`, masked to a domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeoError, Result};
use crate::geometry::StarShapedDomain;
use crate::ray_transform::FieldSampler;

/// `n x n` nodes including the corners, spacing `2 r_max / (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
}

impl GridSpec {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 3 {
            return Err(GeoError::Usage(format!("grid side must be >= 3, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(GeoError::Usage(format!("grid half-extent must be positive, got {r_max}")));
        }
        Ok(GridSpec { n, r_max })
    }

    /// Grid spanning the bounding square of `domain`.
    pub fn covering(domain: &StarShapedDomain, n: usize) -> Result<Self> {
        Self::new(n, domain.r_max())
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.r_max / (self.n - 1) as f64
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        -self.r_max + k as f64 * self.h()
    }

    /// Position of node `(i, j)`; `i` runs along x.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Node values stored as `values[j * n + i]`; outside nodes hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub spec: GridSpec,
    pub domain: StarShapedDomain,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(spec: GridSpec, domain: StarShapedDomain) -> Self {
        ScalarGrid { spec, domain, values: vec![0.0; spec.len()] }
    }

    /// Evaluates `f` at inside nodes.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(spec: GridSpec, domain: StarShapedDomain, f: F) -> Result<Self> {
        let mut g = Self::zeros(spec, domain);
        for j in 0..spec.n {
            for i in 0..spec.n {
                let [x, y] = spec.node(i, j);
                if domain.inside(x, y) {
                    let v = f(x, y);
                    if !v.is_finite() {
                        return Err(GeoError::Usage(format!("non-finite field value at ({x}, {y})")));
                    }
                    g.values[j * spec.n + i] = v;
                }
            }
        }
        Ok(g)
    }

    /// Wraps raw values, zeroing outside nodes.
    pub fn from_values(spec: GridSpec, domain: StarShapedDomain, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(GeoError::Usage(format!("{} values for an {}x{} grid", values.len(), spec.n, spec.n)));
        }
        for (k, v) in values.iter_mut().enumerate() {
            let [x, y] = spec.node(k % spec.n, k / spec.n);
            if !domain.inside(x, y) {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(GeoError::Usage(format!("non-finite field value at ({x}, {y})")));
            }
        }
        Ok(ScalarGrid { spec, domain, values })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn r_max(&self) -> f64 {
        self.spec.r_max
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.n + i]
    }

    #[inline]
    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        let [x, y] = self.spec.node(i, j);
        self.domain.inside(x, y)
    }

    /// Flat indices of the inside nodes, in storage order.
    pub fn inside_indices(&self) -> Vec<usize> {
        inside_indices(&self.spec, &self.domain)
    }

    /// Bilinear interpolation from the four enclosing nodes; zero outside the
    /// square or the domain.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        if !self.domain.inside(x, y) {
            return 0.0;
        }
        let n = self.spec.n;
        let h = self.spec.h();
        let u = (x + self.spec.r_max) / h;
        let v = (y + self.spec.r_max) / h;
        let last = (n - 1) as f64;
        if !(0.0..=last).contains(&u) || !(0.0..=last).contains(&v) {
            return 0.0;
        }
        let i0 = (u.floor() as usize).min(n - 2);
        let j0 = (v.floor() as usize).min(n - 2);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let a = self.get(i0, j0) * (1.0 - fu) + self.get(i0 + 1, j0) * fu;
        let b = self.get(i0, j0 + 1) * (1.0 - fu) + self.get(i0 + 1, j0 + 1) * fu;
        a * (1.0 - fv) + b * fv
    }

    /// Masked finite-difference gradient: centered where both neighbors are
    /// inside, one-sided where only one is, zero where neither is.
    pub fn grad_centered(&self) -> (ScalarGrid, ScalarGrid) {
        let n = self.spec.n;
        let h = self.spec.h();
        let mask: Vec<bool> = (0..n * n).map(|k| self.is_inside(k % n, k / n)).collect();
        let inside = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n && mask[j as usize * n + i as usize];
        let val = |i: isize, j: isize| self.values[j as usize * n + i as usize];

        let diff = |i: isize, j: isize, di: isize, dj: isize| -> f64 {
            let fwd = inside(i + di, j + dj);
            let bwd = inside(i - di, j - dj);
            match (fwd, bwd) {
                (true, true) => (val(i + di, j + dj) - val(i - di, j - dj)) / (2.0 * h),
                (true, false) => (val(i + di, j + dj) - val(i, j)) / h,
                (false, true) => (val(i, j) - val(i - di, j - dj)) / h,
                (false, false) => 0.0,
            }
        };

        let mut gx = ScalarGrid::zeros(self.spec, self.domain);
        let mut gy = ScalarGrid::zeros(self.spec, self.domain);
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if !mask[k] {
                    continue;
                }
                gx.values[k] = diff(i as isize, j as isize, 1, 0);
                gy.values[k] = diff(i as isize, j as isize, 0, 1);
            }
        }
        (gx, gy)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarGrid {
        ScalarGrid { spec: self.spec, domain: self.domain, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarGrid) -> Result<ScalarGrid> {
        check_shapes(self, other)?;
        Ok(ScalarGrid {
            spec: self.spec,
            domain: self.domain,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        })
    }

    /// Pointwise `|self - other|`.
    pub fn abs_diff(&self, other: &ScalarGrid) -> Result<ScalarGrid> {
        check_shapes(self, other)?;
        Ok(ScalarGrid {
            spec: self.spec,
            domain: self.domain,
            values: self.values.iter().zip(&other.values).map(|(x, y)| (x - y).abs()).collect(),
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

pub(crate) fn inside_indices(spec: &GridSpec, domain: &StarShapedDomain) -> Vec<usize> {
    (0..spec.len())
        .filter(|&k| {
            let [x, y] = spec.node(k % spec.n, k / spec.n);
            domain.inside(x, y)
        })
        .collect()
}

fn check_shapes(a: &ScalarGrid, b: &ScalarGrid) -> Result<()> {
    if a.spec != b.spec {
        return Err(GeoError::Usage(format!("grid shapes differ: {:?} vs {:?}", a.spec, b.spec)));
    }
    Ok(())
}

/// `||a - b|| / ||b||` over the inside nodes of `b`.
pub fn rel_l2(a: &ScalarGrid, b: &ScalarGrid) -> Result<f64> {
    check_shapes(a, b)?;
    let (mut num, mut den) = (0.0, 0.0);
    for k in b.inside_indices() {
        num += (a.values[k] - b.values[k]).powi(2);
        den += b.values[k].powi(2);
    }
    if den == 0.0 {
        return Err(GeoError::UndefinedNorm);
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// Sum of isotropic Gaussians.
    SmoothBumps,
    /// Sum of disc indicators.
    DiscPack,
}

/// One Gaussian (`size` = standard deviation) or disc (`size` = radius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomComponent {
    pub center: [f64; 2],
    pub size: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub components: Vec<PhantomComponent>,
}

impl PhantomSpec {
    pub fn smooth_default() -> Self {
        let amps = [1.0, 0.8, 0.6];
        let components = amps
            .iter()
            .enumerate()
            .map(|(i, &amp)| {
                let a = 0.3 + std::f64::consts::TAU * i as f64 / 3.0;
                PhantomComponent { center: [0.45 * a.cos(), 0.45 * a.sin()], size: 0.15, amp }
            })
            .collect();
        PhantomSpec { kind: PhantomKind::SmoothBumps, components }
    }

    pub fn disc_pack_default() -> Self {
        let c = |x, y, size, amp| PhantomComponent { center: [x, y], size, amp };
        PhantomSpec {
            kind: PhantomKind::DiscPack,
            components: vec![
                c(-0.25, 0.0, 0.3, 1.0),
                c(0.4, 0.3, 0.15, 0.8),
                c(0.35, -0.4, 0.1, 0.6),
                c(0.0, 0.55, 0.1, 0.5),
            ],
        }
    }

    pub fn default_for(kind: PhantomKind) -> Self {
        match kind {
            PhantomKind::SmoothBumps => Self::smooth_default(),
            PhantomKind::DiscPack => Self::disc_pack_default(),
        }
    }

    /// Default sizes and amplitudes with centers drawn uniformly from the
    /// disc of radius `0.6 r_min(domain)`.
    pub fn random(kind: PhantomKind, domain: &StarShapedDomain, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = Self::default_for(kind);
        let reach = 0.6 * domain.r_min();
        for c in &mut spec.components {
            let r = reach * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            c.center = [r * a.cos(), r * a.sin()];
        }
        spec
    }

    /// Analytic value, not masked.
    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d2 = (x - c.center[0]).powi(2) + (y - c.center[1]).powi(2);
                match self.kind {
                    PhantomKind::SmoothBumps => c.amp * (-d2 / (2.0 * c.size * c.size)).exp(),
                    PhantomKind::DiscPack => {
                        if d2 < c.size * c.size {
                            c.amp
                        } else {
                            0.0
                        }
                    }
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub grid: ScalarGrid,
    pub sampler: FieldSampler,
    /// Components lying entirely outside the domain.
    pub warnings: Vec<String>,
}

pub fn make_phantom(spec: &PhantomSpec, grid: GridSpec, domain: StarShapedDomain) -> Result<Phantom> {
    for c in &spec.components {
        if !(c.size > 0.0 && c.size.is_finite() && c.amp.is_finite() && c.center.iter().all(|v| v.is_finite())) {
            return Err(GeoError::Usage(format!("malformed phantom component {c:?}")));
        }
    }
    let warnings = spec
        .components
        .iter()
        .filter(|c| {
            let reach = match spec.kind {
                PhantomKind::SmoothBumps => 3.0 * c.size,
                PhantomKind::DiscPack => c.size,
            };
            c.center[0].hypot(c.center[1]) - reach > domain.r_max()
        })
        .map(|c| format!("phantom component at ({}, {}) lies outside the domain", c.center[0], c.center[1]))
        .collect();
    let s = spec.clone();
    let g = ScalarGrid::from_fn(grid, domain, |x, y| s.value(x, y))?;
    let s = spec.clone();
    Ok(Phantom { grid: g, sampler: FieldSampler::analytic(domain, move |x, y| s.value(x, y)), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> StarShapedDomain {
        StarShapedDomain::circle(1.0).unwrap()
    }

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, 1.0).unwrap()
    }

    #[test]
    fn node_and_cell_center_sampling() {
        let g = ScalarGrid::from_fn(spec(21), disk(), |x, _| x).unwrap();
        assert_eq!(g.sample_bilinear(0.1, 0.2), g.get(11, 12));
        let h = g.spec.h();
        let c = [g.spec.coord(7) + 0.5 * h, g.spec.coord(9) + 0.5 * h];
        assert!((g.sample_bilinear(c[0], c[1]) - c[0]).abs() < 1e-15);
        assert_eq!(g.sample_bilinear(0.9, 0.9), 0.0);
    }

    #[test]
    fn outside_nodes_are_zero() {
        let g = ScalarGrid::from_fn(spec(11), disk(), |_, _| 1.0).unwrap();
        assert_eq!(g.get(0, 0), 0.0);
        assert_eq!(g.get(5, 5), 1.0);
        let g = ScalarGrid::from_values(spec(11), disk(), vec![2.0; 121]).unwrap();
        assert_eq!(g.get(10, 10), 0.0);
    }

    #[test]
    fn gradients_of_polynomials() {
        let c = ScalarGrid::from_fn(spec(31), disk(), |_, _| 3.0).unwrap();
        let (gx, gy) = c.grad_centered();
        assert!(gx.values.iter().chain(&gy.values).all(|&v| v == 0.0));

        let n = 31;
        let g = ScalarGrid::from_fn(spec(n), disk(), |x, y| x * x + y).unwrap();
        let (gx, gy) = g.grad_centered();
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let interior = g.is_inside(i, j)
                    && g.is_inside(i - 1, j)
                    && g.is_inside(i + 1, j)
                    && g.is_inside(i, j - 1)
                    && g.is_inside(i, j + 1);
                if interior {
                    let [x, _] = g.spec.node(i, j);
                    assert!((gx.get(i, j) - 2.0 * x).abs() < 1e-12);
                    assert!((gy.get(i, j) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rel_l2_cases() {
        let b = ScalarGrid::from_fn(spec(15), disk(), |x, y| 1.0 + x * y).unwrap();
        assert_eq!(rel_l2(&b, &b).unwrap(), 0.0);
        let z = ScalarGrid::zeros(b.spec, disk());
        assert!((rel_l2(&z, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((rel_l2(&b.map(|v| 1.1 * v), &b).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(rel_l2(&b, &z), Err(GeoError::UndefinedNorm)));
    }

    #[test]
    fn phantom_examples() {
        let empty = PhantomSpec { kind: PhantomKind::SmoothBumps, components: vec![] };
        let p = make_phantom(&empty, spec(11), disk()).unwrap();
        assert!(p.grid.values.iter().all(|&v| v == 0.0));

        let one = PhantomSpec {
            kind: PhantomKind::SmoothBumps,
            components: vec![PhantomComponent { center: [0.0, 0.0], size: 0.2, amp: 1.7 }],
        };
        let p = make_phantom(&one, spec(11), disk()).unwrap();
        assert_eq!(p.grid.get(5, 5), 1.7);

        let discs = PhantomSpec {
            kind: PhantomKind::DiscPack,
            components: vec![
                PhantomComponent { center: [0.0, 0.0], size: 0.5, amp: 1.0 },
                PhantomComponent { center: [0.1, 0.0], size: 0.2, amp: 0.5 },
            ],
        };
        assert_eq!(discs.value(0.1, 0.0), 1.5);
    }

    #[test]
    fn phantom_sampler_matches_grid_at_nodes() {
        for spec_ in [PhantomSpec::smooth_default(), PhantomSpec::disc_pack_default()] {
            let p = make_phantom(&spec_, spec(41), disk()).unwrap();
            assert!(p.warnings.is_empty());
            for j in 0..41 {
                for i in 0..41 {
                    let [x, y] = p.grid.spec.node(i, j);
                    assert_eq!(p.sampler.eval(x, y), p.grid.get(i, j));
                }
            }
        }
    }

    #[test]
    fn far_component_warns() {
        let s = PhantomSpec {
            kind: PhantomKind::DiscPack,
            components: vec![PhantomComponent { center: [3.0, 0.0], size: 0.5, amp: 1.0 }],
        };
        assert_eq!(make_phantom(&s, spec(11), disk()).unwrap().warnings.len(), 1);
    }

    #[test]
    fn random_phantom_is_seeded() {
        let a = PhantomSpec::random(PhantomKind::DiscPack, &disk(), 7);
        let b = PhantomSpec::random(PhantomKind::DiscPack, &disk(), 7);
        let c = PhantomSpec::random(PhantomKind::DiscPack, &disk(), 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
