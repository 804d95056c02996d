//! Geodesic X-ray tomography on simple and non-simple Riemannian surfaces
//! with isothermal metrics.
//!
//! The pipeline: trace geodesics from the influx boundary, integrate to get
//! fan-beam data, apply the fiberwise Hilbert transform, backproject through
//! a precomputed basepoint table, and optionally refine with a Neumann series.

pub mod error;
pub mod fiber;
pub mod fields;
pub mod flow;
pub mod geometry;
pub mod inversion;
pub mod io;
pub mod jacobi;
pub mod ray_transform;

pub use error::{GeoError, Result, TrappedGeodesic};
pub use fiber::{extend, hilbert_fiber, prep, restrict, ExtendedFiberData, Formula, HilbertPlan, Parity};
pub use fields::{make_phantom, rel_l2, GridSpec, Phantom, PhantomComponent, PhantomKind, PhantomSpec, ScalarGrid};
pub use flow::{
    basepoint, influx_state, trace_from_influx, trace_from_interior, Direction, GeodesicPath, InfluxCoord, SmPoint,
    TraceParams,
};
pub use geometry::{herglotz_margin, Manifold, Metric, RadialProfile, StarShapedDomain};
pub use inversion::{
    backproject_frc, backproject_hrc, neumann_invert, precompute_basepoints, BasepointTable, ReconstructionReport,
    TableEntry,
};
pub use jacobi::{
    beta_conjugate_locus, conjugate_points, is_beta_free, terminator, trace_jacobi, trace_jacobi_from_influx,
    ConjugatePoint, JacobiTrace, Terminator, TerminatorSettings,
};
pub use rustfft::num_complex::Complex;
pub use ray_transform::{forward_i0, forward_i1_xperp, FanBeamData, FieldSampler, InfluxGrid};
