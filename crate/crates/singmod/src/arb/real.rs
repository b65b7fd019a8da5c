//! `BigReal`: an arbitrary-precision real with an explicit bit-precision
//! contract.
//!
//! Arithmetic results carry the minimum of the operand precisions and each
//! operation rounds to nearest-even, so the relative rounding error per
//! operation is at most `2^(1-prec)`.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::{BigInt, Sign as IntSign};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Precision in bits.
pub type Prec = u32;

/// Smallest precision the layer accepts.
pub const MIN_PREC: Prec = 64;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// pi at `prec` bits (cached per thread).
pub fn pi(prec: Prec) -> BigReal {
    let prec = prec.max(MIN_PREC);
    BigReal {
        x: with_consts(|cc| cc.pi(prec as usize, RM)),
        prec,
    }
}

/// 2 pi at `prec` bits.
pub fn two_pi(prec: Prec) -> BigReal {
    let p = pi(prec);
    let two = BigFloat::from_i8(2, prec as usize);
    BigReal {
        x: p.x.mul(&two, prec as usize, RM),
        prec,
    }
}

/// Arbitrary-precision real number tagged with its working precision in bits.
#[derive(Debug, Clone)]
pub struct BigReal {
    x: BigFloat,
    prec: Prec,
}

impl BigReal {
    fn wrap(x: BigFloat, prec: Prec) -> Self {
        BigReal { x, prec }
    }

    pub fn zero(prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        Self::wrap(BigFloat::from_i8(0, prec as usize), prec)
    }

    pub fn one(prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        Self::wrap(BigFloat::from_i8(1, prec as usize), prec)
    }

    pub fn from_f64(v: f64, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        Self::wrap(BigFloat::from_f64(v, prec as usize), prec)
    }

    pub fn from_u64(v: u64, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        Self::wrap(BigFloat::from_u64(v, prec as usize), prec)
    }

    pub fn from_i64(v: i64, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        Self::wrap(BigFloat::from_i64(v, prec as usize), prec)
    }

    /// Exact conversion from a big integer, then rounding to `prec` bits.
    pub fn from_bigint(v: &BigInt, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        if v.is_zero() {
            return Self::zero(prec);
        }
        let (sign, mag) = (v.sign(), v.magnitude());
        let mut words: Vec<u64> = mag.iter_u64_digits().collect();
        // Normalize so the top bit of the top word is set; astro-float
        // interprets `from_words(w, s, e)` as `s * 0.w * 2^e`.
        let top_lz = words.last().unwrap().leading_zeros();
        let bits = words.len() as i64 * 64 - top_lz as i64;
        if top_lz > 0 {
            let mut carry = 0u64;
            for w in words.iter_mut() {
                let nw = (*w << top_lz) | carry;
                carry = *w >> (64 - top_lz);
                *w = nw;
            }
        }
        let s = if sign == IntSign::Minus { Sign::Neg } else { Sign::Pos };
        let x = BigFloat::from_words(&words, s, bits as astro_float::Exponent);
        let p = (prec as usize).max(words.len() * 64);
        let exact = x; // from_words keeps every bit we supplied
        Self::wrap(exact, p as Prec).round_to(prec)
    }

    /// v1 / v2 as a real at `prec` bits.
    pub fn from_ratio(num: &BigInt, den: &BigInt, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        let guard = prec + 32;
        let n = Self::from_bigint(num, guard);
        let d = Self::from_bigint(den, guard);
        n.div(&d).round_to(prec)
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    /// Round (re-represent) to a different precision.
    pub fn round_to(&self, prec: Prec) -> Self {
        let prec = prec.max(MIN_PREC);
        let mut x = self.x.clone();
        x.set_precision(prec as usize, RM).expect("set_precision");
        Self::wrap(x, prec)
    }

    fn op_prec(&self, rhs: &Self) -> Prec {
        self.prec.min(rhs.prec)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let p = self.op_prec(rhs);
        Self::wrap(self.x.add(&rhs.x, p as usize, RM), p)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let p = self.op_prec(rhs);
        Self::wrap(self.x.sub(&rhs.x, p as usize, RM), p)
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let p = self.op_prec(rhs);
        Self::wrap(self.x.mul(&rhs.x, p as usize, RM), p)
    }

    pub fn div(&self, rhs: &Self) -> Self {
        let p = self.op_prec(rhs);
        Self::wrap(self.x.div(&rhs.x, p as usize, RM), p)
    }

    pub fn mul_i64(&self, k: i64) -> Self {
        let rhs = BigFloat::from_i64(k, self.prec as usize);
        Self::wrap(self.x.mul(&rhs, self.prec as usize, RM), self.prec)
    }

    pub fn div_u64(&self, k: u64) -> Self {
        let rhs = BigFloat::from_u64(k, self.prec as usize);
        Self::wrap(self.x.div(&rhs, self.prec as usize, RM), self.prec)
    }

    /// Exact scaling by 2^k.
    pub fn mul_pow2(&self, k: i32) -> Self {
        let two = BigFloat::from_i8(2, self.prec as usize);
        let mut x = self.x.clone();
        if k > 0 {
            for _ in 0..k {
                x = x.mul(&two, self.prec as usize, RM);
            }
        } else {
            for _ in 0..(-k) {
                x = x.div(&two, self.prec as usize, RM);
            }
        }
        Self::wrap(x, self.prec)
    }

    pub fn neg(&self) -> Self {
        Self::wrap(self.x.neg(), self.prec)
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.x.abs(), self.prec)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.x.sqrt(self.prec as usize, RM), self.prec)
    }

    pub fn exp(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.exp(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    pub fn ln(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.ln(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    pub fn sin(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.sin(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    pub fn cos(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.cos(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    pub fn sinh(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.sinh(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    pub fn cosh(&self) -> Self {
        Self::wrap(
            with_consts(|cc| self.x.cosh(self.prec as usize, RM, cc)),
            self.prec,
        )
    }

    /// Integer power by binary exponentiation.
    pub fn powi(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// x^y for positive x.
    pub fn pow(&self, y: &Self) -> Self {
        self.ln().mul(y).exp()
    }

    pub fn recip(&self) -> Self {
        Self::one(self.prec).div(self)
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.x.is_negative()
    }

    /// Base-2 exponent of the magnitude (value is in [2^(e-1), 2^e)), or
    /// `i64::MIN` for zero. Used for headroom planning.
    pub fn mag_exponent(&self) -> i64 {
        match self.x.exponent() {
            Some(e) if !self.x.is_zero() => e as i64,
            _ => i64::MIN,
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.x.is_zero() {
            return 0.0;
        }
        let (words, _n, sign, e, _) = match self.x.as_raw_parts() {
            Some(p) => p,
            None => return f64::NAN,
        };
        let e = e as i64;
        // frac in [0.5, 1); value = sign * frac * 2^e
        let top = words[words.len() - 1] as f64;
        let next = if words.len() >= 2 {
            words[words.len() - 2] as f64
        } else {
            0.0
        };
        let frac = (top + next / 18446744073709551616.0) / 18446744073709551616.0;
        let v = if e > 1023 {
            f64::INFINITY
        } else if e < -1070 {
            0.0
        } else if e < -900 {
            // two-step scaling to reach the subnormal range without overflow
            frac * 2.0f64.powi(-900) * 2.0f64.powi((e + 900) as i32)
        } else {
            frac * 2.0f64.powi(e as i32)
        };
        if sign == Sign::Neg {
            -v
        } else {
            v
        }
    }

    /// Truncate toward zero to a big integer (exact).
    pub fn trunc_bigint(&self) -> BigInt {
        if self.x.is_zero() {
            return BigInt::zero();
        }
        let (words, n, sign, e, _) = self.x.as_raw_parts().expect("finite value");
        let e = e as i64;
        if e <= 0 {
            return BigInt::zero();
        }
        // |x| = M * 2^(e - n), with M the n-bit mantissa integer.
        let m = BigInt::from_bytes_le(
            IntSign::Plus,
            &words
                .iter()
                .flat_map(|w| w.to_le_bytes())
                .collect::<Vec<u8>>(),
        );
        let shift = e - n as i64;
        let mag = if shift >= 0 { m << shift } else { m >> (-shift) };
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    pub fn floor_bigint(&self) -> BigInt {
        let t = self.trunc_bigint();
        if self.is_negative() && self.sub(&Self::from_bigint(&t, self.prec)).x.is_zero() {
            t
        } else if self.is_negative() {
            t - 1
        } else {
            t
        }
    }

    /// Nearest integer, rounding halves away from zero.
    pub fn round_half_away(&self) -> BigInt {
        let half = Self::from_f64(0.5, self.prec);
        let shifted = self.abs().add(&half);
        let mag = shifted.trunc_bigint();
        if self.is_negative() {
            -mag
        } else {
            mag
        }
    }

    pub fn cmp_real(&self, rhs: &Self) -> Ordering {
        match self.x.cmp(&rhs.x) {
            Some(o) if o < 0 => Ordering::Less,
            Some(o) if o > 0 => Ordering::Greater,
            _ => Ordering::Equal,
        }
    }

    /// Decimal rendering at full stored precision.
    pub fn to_decimal_string(&self) -> String {
        with_consts(|cc| {
            self.x
                .format(Radix::Dec, RM, cc)
                .unwrap_or_else(|_| "nan".to_string())
        })
    }

    /// Parse a decimal literal at `prec` bits.
    pub fn parse(s: &str, prec: Prec) -> Result<Self> {
        let prec = prec.max(MIN_PREC);
        let x = with_consts(|cc| BigFloat::parse(s, Radix::Dec, prec as usize, RM, cc));
        if x.is_nan() {
            return Err(Error::PrecisionFailure(format!("cannot parse {s:?}")));
        }
        Ok(Self::wrap(x, prec))
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal_string())
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_real(other) == Ordering::Equal
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_real(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_precision_enforced() {
        let x = BigReal::from_f64(1.5, 10);
        assert_eq!(x.prec(), MIN_PREC);
    }

    #[test]
    fn op_precision_is_min_of_operands() {
        let a = BigReal::from_f64(1.5, 128);
        let b = BigReal::from_f64(2.5, 256);
        assert_eq!(a.mul(&b).prec(), 128);
        assert_eq!(b.add(&a).prec(), 128);
    }

    #[test]
    fn bigint_round_trip() {
        let v: BigInt = "-561766949784377042888940".parse().unwrap();
        let x = BigReal::from_bigint(&v, 128);
        assert_eq!(x.trunc_bigint(), v);
        assert_eq!(x.round_half_away(), v);
    }

    #[test]
    fn round_half_away_from_zero() {
        assert_eq!(BigReal::from_f64(2.5, 64).round_half_away(), BigInt::from(3));
        assert_eq!(BigReal::from_f64(-2.5, 64).round_half_away(), BigInt::from(-3));
        assert_eq!(BigReal::from_f64(2.4, 64).round_half_away(), BigInt::from(2));
        assert_eq!(BigReal::from_f64(-0.6, 64).round_half_away(), BigInt::from(-1));
    }

    #[test]
    fn floor_of_negatives() {
        assert_eq!(BigReal::from_f64(-2.5, 64).floor_bigint(), BigInt::from(-3));
        assert_eq!(BigReal::from_f64(-3.0, 64).floor_bigint(), BigInt::from(-3));
        assert_eq!(BigReal::from_f64(3.7, 64).floor_bigint(), BigInt::from(3));
    }

    #[test]
    fn to_f64_round_trip() {
        for v in [0.0, 1.0, -1.5, 3.25e10, -7.5e-11, 2.2250738585072014e-308] {
            let x = BigReal::from_f64(v, 96);
            assert_eq!(x.to_f64(), v, "{v}");
        }
    }

    #[test]
    fn exp_matches_f64_scale() {
        let x = BigReal::from_f64(210.7, 256).exp();
        let got = x.ln().to_f64();
        assert!((got - 210.7).abs() < 1e-12);
    }
}
