//! Set-valued Koopman, Liouville and Perron-Frobenius operators of time-invariant
//! control systems `ẋ = f(x, u)`, `u ∈ U`.
//!
//! The crate is `no_std` (it only needs `alloc`) and purely computational: no IO,
//! no clocks, no global state. Every operation is a deterministic function of its
//! inputs, so results are reproducible bit for bit.
//!
//! Module map:
//!
//! - [`controlled_flow`]: control samples, piecewise-constant signals, vector
//!   fields and the fixed-step RK4 flow `Φ^u_(τ,t)`.
//! - [`grid`] and [`observables`]: spatial windows and complex observables with
//!   gradients and the pull-back `φ ∘ Φ^u`.
//! - [`set_ops`]: Hausdorff distances, one-sided inclusion defects and limit
//!   diagnostics on finite observable sets.
//! - [`koopman`], [`liouville`], [`perron_frobenius`], [`spectral`]: sampled
//!   set-valued operators and the structural checks built on them.
#![no_std]
// Modules import `num_traits::Float` for no_std builds. Whenever std is in the
// dependency graph its inherent float methods take precedence, so those imports
// carry `#[allow(unused_imports)]`.
// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod controlled_flow;
pub mod error;
pub mod grid;
pub mod koopman;
pub mod liouville;
pub mod observables;
pub mod perron_frobenius;
pub mod set_ops;
pub mod spectral;

pub use controlled_flow::{
    ControlPoint, ControlSampleSet, ControlSignal, FlowResult, PrimitiveField, VectorField,
};
pub use error::{Error, Result};
pub use grid::SpatialGrid;
pub use nalgebra::DMatrix;
pub use num_complex::Complex64;
pub use observables::{Observable, ObservableSet};
pub use perron_frobenius::{ParticleMeasure, TestBank};
pub use set_ops::InclusionReport;
pub use spectral::EigenPair;
