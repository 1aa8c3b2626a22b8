//! Noise-aware preparation of entangled spin probes in the symmetric Dicke
//! subspace.
//!
//! The state-preparation channel alternates global rotations with a cavity
//! geometric phase gate whose loss is described by a complex phase matrix.
//! Probes are scored by the single-shot field-estimation variance and tuned
//! with multi-start BFGS. A permutationally invariant Lindblad solver covers
//! the signal-acquisition stage under local dephasing.
//!
//! Units: the spin-cavity coupling `g` is 1; rates are in units of `g` and
//! times in units of `1/g`. The sensing module uses the field coupling `J`
//! as its unit instead.

// `!(x > 0.0)` also rejects NaN; index loops mirror the matrix formulas;
// `is_multiple_of` is newer than the supported toolchain.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of,
    clippy::type_complexity
)]

pub mod dicke;
pub mod error;
pub mod fixtures;
pub mod gpg;
pub mod optimizer;
pub mod protocol;
pub mod sensing;

pub use error::{Error, Result};

/// Complex double precision scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
