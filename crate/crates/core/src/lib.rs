//! The k-cut model on conditioned Galton-Watson trees and its continuum
//! limit on the Brownian CRT.
//!
//! Every vertex of a rooted tree carries a rate-1 Poisson clock and is
//! removed on its k-th ring; cuts are counted on vertices still attached to
//! the root. Scaled by `sigma^(1/k) n^(1 - 1/2k)`, the cut count of a size-`n`
//! conditioned tree converges to a functional `X_k` of the Aldous-Pitman
//! fragmentation run under the clock `s = (Gamma(k+1) t)^(1/k)`.
//!
//! Modules, bottom-up:
//!
//! * [`gwtree`]: offspring laws, exact conditioned sampling, reduced subtrees.
//! * [`kcut`]: clocks, record counting, root-component mass.
//! * [`excursion`]: discretized Brownian excursion, range minima, CRT distance.
//! * [`continuum`]: stable-1/2 subordinator and the limit functional `X_k`.
//! * [`moments`]: conditional moment formulas and Gamma/Poisson utilities.
//! * [`stats`]: empirical distributions and goodness-of-fit tests.
//! * [`streams`]: counter-derived random streams and the indexed worker pool.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod error;
pub mod excursion;
pub mod gwtree;
pub mod kcut;
pub mod moments;
pub mod quadrature;
pub mod rmq;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
