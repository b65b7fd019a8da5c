//! Traces of singular moduli and the exponential-sum machinery behind them.
//!
//! The library computes genus-character-twisted traces of the Faber basis
//! functions `j_m` at CM points of negative discriminant by three independent
//! routes:
//!
//! * a direct sum of `j_m(z_Q)` over reduced quadratic forms ([`traces::trace_direct`]),
//! * the exact sinh-weighted series over quadratic Weyl sums ([`traces::trace_sinh_series`]),
//! * the nearest-integer rectangle formula ([`traces::trace_rect`]).
//!
//! Supporting layers: arbitrary-precision reals/complexes and the special
//! functions they need ([`arb`]), binary quadratic forms ([`quadforms`]),
//! Kronecker symbols and genus characters ([`characters`]), Kloosterman and
//! quadratic Weyl sums ([`expsums`]), q-expansions of `j` and the Rademacher
//! coefficient series ([`modforms`]), and a numerical harness for the
//! K-Bessel test-function transform and its uniform asymptotics ([`spectral`]).
//!
//! Everything is a pure function over immutable inputs; all entry points are
//! safe to call concurrently.

pub mod arb;
pub mod characters;
pub mod error;
pub mod expsums;
pub mod modforms;
pub mod modsqrt;
pub mod quadforms;
pub mod spectral;
pub mod traces;
pub mod verify;

pub use error::{Error, Result};
