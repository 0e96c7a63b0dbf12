//! Free-probability toolkit for resolvents of R-diagonal operators.
//!
//! The crate is layered bottom-up:
//!
//! * [`ring`] holds exact multivariate polynomials over big rationals.
//! * [`nc`] enumerates non-crossing partitions and their alternating variants.
//! * [`cumulants`] turns those into free-cumulant calculus and operator models.
//! * [`series`] does truncated power series, Lagrange inversion and the
//!   negative-moment series.
//! * [`circular`] and [`measure`] handle the explicit spectrum of `|λ − c|²`.
//! * [`psd`] implements partition structure diagrams and moment polynomials.
//! * [`resolvent`] computes resolvent norms and their asymptotics.
//! * [`verify`] bundles the invariants into runnable suites, used by the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circular;
pub mod cli;
pub mod cumulants;
pub mod error;
pub mod measure;
pub mod nc;
pub mod psd;
pub mod resolvent;
pub mod ring;
pub mod series;
pub mod verify;

pub use error::{Error, Result};
