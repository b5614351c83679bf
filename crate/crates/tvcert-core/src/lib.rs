//! Discrete total-variation certification toolkit.
//!
//! Everything lives on a rectangular pixel grid with an optional mask: scalar
//! fields u, vector fields g, the forward-difference gradient and its exact
//! negative adjoint divergence, the isotropic discrete total variation
//! TV_h(u) = Σ h²|∇_h u|, and on top of that the machinery needed to verify
//! that a claimed dual pair (u*, g) actually certifies u* ∈ ∂TV_h(u):
//!
//! * `grid` — domains, fields, gradient/divergence/TV, gradient measures;
//! * `dual` — W^q(div) norms, unit-ball projection, boundary-aware mollification;
//! * `trace` — normal and full traces of dual fields along |Du|, Gauss–Green;
//! * `certify` — certificates, the ROF solver, subgradient sampling oracles,
//!   interval-constrained (transform-domain) certification;
//! * `dct` — orthonormal blockwise DCT-II used by the interval certifier;
//! * `flow` — total-variation flow via minimizing movements;
//! * `calibrate` — calibrable-set geometry, calibration fields, verdicts;
//! * `io` — FLD and PGM file formats.
//!
//! All reductions go through fixed-shape pairwise summation so results are
//! bit-reproducible run to run.

pub mod calibrate;
pub mod certify;
pub mod dct;
pub mod dual;
pub mod flow;
pub mod grid;
pub mod io;
pub mod sum;
pub mod trace;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
