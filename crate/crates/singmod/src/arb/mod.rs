//! Arbitrary-precision real/complex arithmetic and the special functions the
//! trace formulas consume.
//!
//! Values are immutable after construction and every operation is a pure
//! function, so the whole layer is freely shareable across threads. The
//! backing bignum arithmetic comes from `astro-float`; transcendental
//! constants are computed on demand and cached per thread at the working
//! precision.

mod complex;
mod real;
pub mod special;

pub use complex::{e_of, e_rational, BigComplex};
pub use real::{pi, two_pi, BigReal, Prec, MIN_PREC};

/// Working precision for a trace computation on discriminant `-d_abs` with
/// pole order `m` and roughly `2^terms_log2` summed terms.
///
/// The largest summand has magnitude about `e^(pi m sqrt(d))`, and the
/// absolute error of the assembled sum must stay far below the rounding
/// threshold 1/2, so the bit budget is the magnitude in bits plus fixed and
/// per-term headroom.
pub fn trace_precision(d_abs: u64, m: u32, terms_log2: u32) -> Prec {
    let mag = std::f64::consts::PI * m as f64 * (d_abs as f64).sqrt() * std::f64::consts::LOG2_E;
    (mag.ceil() as u32 + 32 + terms_log2).max(MIN_PREC)
}

/// Working precision for the Rademacher series of `c(n)`: the lead term is
/// about `e^(4 pi sqrt(n))` and the certified absolute error must land below
/// 0.4.
pub fn coeff_precision(n: u64, terms_log2: u32) -> Prec {
    let mag = 4.0 * std::f64::consts::PI * (n as f64).sqrt() * std::f64::consts::LOG2_E;
    (mag.ceil() as u32 + 32 + terms_log2).max(MIN_PREC)
}
