//! Positive definite integral binary quadratic forms: reduction, class
//! enumeration with automorphism weights, CM points, and the rectangle
//! enumeration that indexes the truncated exponential sums.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::arb::{BigComplex, BigReal, Prec};
use crate::error::{Error, Result};
use crate::modsqrt;

/// A binary quadratic form a x^2 + b x y + c y^2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QForm {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
}

impl fmt::Display for QForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.a, self.b, self.c)
    }
}

impl QForm {
    pub fn new(a: i64, b: i64, c: i64) -> Self {
        QForm {
            a: a.into(),
            b: b.into(),
            c: c.into(),
        }
    }

    pub fn from_bigints(a: BigInt, b: BigInt, c: BigInt) -> Self {
        QForm { a, b, c }
    }

    pub fn discriminant(&self) -> BigInt {
        &self.b * &self.b - 4 * &self.a * &self.c
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a.is_positive() && self.discriminant().is_negative()
    }

    /// Content gcd(a, b, c); 1 for primitive forms.
    pub fn content(&self) -> BigInt {
        use num_integer::Integer;
        self.a.gcd(&self.b).gcd(&self.c)
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == BigInt::from(1)
    }

    /// Q(x, y).
    pub fn eval(&self, x: i64, y: i64) -> BigInt {
        &self.a * x * x + &self.b * x * y + &self.c * y * y
    }

    /// Gauss reduction to the canonical representative with
    /// -a < b <= a <= c and b >= 0 when a = c.
    pub fn reduce(&self) -> QForm {
        assert!(self.is_positive_definite(), "reduce needs positive definite");
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        let mut c = self.c.clone();
        loop {
            // normalize: bring b into (-a, a]
            if b > a || b <= -&a {
                use num_integer::Integer;
                // b' = b - 2ka with b' in (-a, a]
                let two_a = 2 * &a;
                let k = (&b + &a - BigInt::from(1)).div_floor(&two_a);
                let nb = &b - &k * &two_a;
                c = &c - &k * (&b + &nb) / 2;
                b = nb;
            }
            if a > c {
                // swap the outer coefficients
                std::mem::swap(&mut a, &mut c);
                b = -b;
                continue;
            }
            if a == c && b.is_negative() {
                b = -b;
            }
            if -&a < b && b <= a && a <= c && !(a == c && b.is_negative()) {
                break;
            }
        }
        QForm { a, b, c }
    }

    /// Whether the form is already the canonical reduced representative.
    pub fn is_reduced(&self) -> bool {
        let QForm { a, b, c } = self;
        -a < b.clone() && b <= a && a <= c && !(a == c && b.is_negative())
    }
}

/// A negative discriminant split as D = d * d' with d fundamental.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscFactorization {
    pub d_full: i64,
    pub d_fund: i64,
    pub d_prime: i64,
}

impl DiscFactorization {
    /// Validates D < 0, D = 0,1 (mod 4), d fundamental, d | D,
    /// d' = D/d = 0,1 (mod 4).
    pub fn new(d_full: i64, d_fund: i64) -> Result<Self> {
        if d_full >= 0 || d_full.rem_euclid(4) > 1 {
            return Err(Error::InvalidDiscriminant(d_full));
        }
        if d_fund == 0 || d_full % d_fund != 0 {
            return Err(Error::InvalidCongruence(format!(
                "{d_fund} does not divide {d_full}"
            )));
        }
        if !crate::characters::is_fundamental(d_fund) {
            return Err(Error::InvalidCongruence(format!(
                "{d_fund} is not a fundamental discriminant"
            )));
        }
        let d_prime = d_full / d_fund;
        if d_prime.rem_euclid(4) > 1 {
            return Err(Error::InvalidCongruence(format!(
                "cofactor {d_prime} is not a discriminant"
            )));
        }
        Ok(DiscFactorization {
            d_full,
            d_fund,
            d_prime,
        })
    }

    /// The untwisted factorization D = 1 * D.
    pub fn trivial(d_full: i64) -> Result<Self> {
        Self::new(d_full, 1)
    }

    pub fn abs(&self) -> u64 {
        self.d_full.unsigned_abs()
    }

    /// All admissible factorizations of D (d fundamental, positive or
    /// negative, d' a discriminant).
    pub fn all_of(d_full: i64) -> Result<Vec<DiscFactorization>> {
        if d_full >= 0 || d_full.rem_euclid(4) > 1 {
            return Err(Error::InvalidDiscriminant(d_full));
        }
        let mut out = Vec::new();
        let a = d_full.unsigned_abs() as i64;
        for mag in 1..=a {
            if d_full % mag != 0 {
                continue;
            }
            for d in [mag, -mag] {
                if let Ok(f) = Self::new(d_full, d) {
                    out.push(f);
                }
            }
        }
        Ok(out)
    }
}

/// CM point z_Q = (-b + sqrt(D)) / (2a) in the upper half-plane.
#[derive(Debug, Clone)]
pub struct CMPoint {
    pub x: BigReal,
    pub y: BigReal,
    pub source: QForm,
}

impl CMPoint {
    pub fn to_complex(&self) -> BigComplex {
        BigComplex::new(self.x.clone(), self.y.clone())
    }
}

/// CM point of a positive definite form at `prec` bits; the square-root
/// branch is sqrt(D) = i sqrt(|D|) with sqrt(|D|) > 0.
pub fn cm_point(q: &QForm, prec: Prec) -> CMPoint {
    assert!(q.is_positive_definite());
    let pw = prec + 8;
    let disc = q.discriminant();
    let abs_d = BigReal::from_bigint(&disc.abs(), pw);
    let two_a = BigReal::from_bigint(&(2 * &q.a), pw);
    let x = BigReal::from_bigint(&(-&q.b), pw).div(&two_a).round_to(prec);
    let y = abs_d.sqrt().div(&two_a).round_to(prec);
    CMPoint {
        x,
        y,
        source: q.clone(),
    }
}

fn check_discriminant(d: i64) -> Result<()> {
    if d >= 0 || d.rem_euclid(4) > 1 {
        return Err(Error::InvalidDiscriminant(d));
    }
    Ok(())
}

/// Exactly the forms (primitive and imprimitive) of discriminant `d` whose
/// CM point lies in the standard fundamental domain with its half-open
/// boundary: -a < b <= a <= c, and b >= 0 when a = c.
pub fn reduced_forms(d: i64) -> Result<Vec<QForm>> {
    check_discriminant(d)?;
    let mut out = Vec::new();
    let ad = d.unsigned_abs();
    let mut a: i64 = 1;
    while 3 * (a as u64 * a as u64) <= ad {
        let four_a = 4 * a;
        for b in (-a + 1)..=a {
            let num = b * b - d;
            if num % four_a == 0 {
                let c = num / four_a;
                if c >= a && !(b < 0 && a == c) {
                    out.push(QForm::new(a, b, c));
                }
            }
        }
        a += 1;
    }
    Ok(out)
}

/// Automorphism weight: 2 for forms equivalent to [a,0,a], 3 for [a,a,a],
/// else 1.
pub fn omega(q: &QForm) -> u32 {
    let r = q.reduce();
    if r.a == r.c && r.b.is_zero() {
        2
    } else if r.a == r.c && r.b == r.a {
        3
    } else {
        1
    }
}

/// Weighted class number h(D) = sum over reduced forms of 1/omega, exact.
pub fn class_number_weighted(d: i64) -> Result<BigRational> {
    let forms = reduced_forms(d)?;
    let mut h = BigRational::zero();
    for q in &forms {
        h += BigRational::new(BigInt::from(1), BigInt::from(omega(q)));
    }
    Ok(h)
}

/// Default ceiling for the rectangle's leading-coefficient bound.
pub const RECT_DEFAULT_CEILING: u64 = 50_000_000;

/// All forms [c, b, (b^2-D)/(4c)] with c >= 1, -c < b <= c,
/// b^2 = D (mod 4c) and c < sqrt(|D|)/(2Y); their CM points are exactly the
/// points of discriminant D in the rectangle Im z > Y, -1/2 <= Re z < 1/2.
///
/// Output is ordered by (c, b).
pub fn forms_in_rectangle(d: i64, y: f64, ceiling: u64) -> Result<Vec<QForm>> {
    check_discriminant(d)?;
    if !(y > 0.0) {
        return Err(Error::InvalidCongruence(format!(
            "rectangle height Y must be positive, got {y}"
        )));
    }
    let bound = (d.unsigned_abs() as f64).sqrt() / (2.0 * y);
    if bound > ceiling as f64 {
        return Err(Error::ResourceCeiling {
            what: "rectangle leading-coefficient bound",
            needed: bound.ceil() as u64,
            ceiling,
        });
    }
    let c_max = bound.ceil() as u64 + 1;
    let mut out = Vec::new();
    for c in 1..=c_max {
        // strict test c < sqrt(|D|)/(2Y) <=> (2cY)^2 < |D|, exact in the
        // rationals (f64 Y is a dyadic rational, so ties are decidable)
        if !im_strictly_above(c, y, d.unsigned_abs()) {
            break;
        }
        for b in roots_half_mod(d, c)? {
            let cc = (b * b - i128::from(d)) / (4 * c as i128);
            out.push(QForm::from_bigints(
                BigInt::from(c),
                BigInt::from(b),
                BigInt::from(cc),
            ));
        }
    }
    Ok(out)
}

/// Exact test for sqrt(|D|)/(2c) > Y with Y an f64 (i.e. dyadic rational).
fn im_strictly_above(c: u64, y: f64, d_abs: u64) -> bool {
    use num_traits::Float;
    let (mant, exp, sign) = y.integer_decode();
    if sign <= 0 {
        return true;
    }
    // (2 c mant)^2 2^(2 exp) < d_abs
    let lhs = BigInt::from(2u128 * c as u128 * mant as u128);
    let lhs = &lhs * &lhs;
    let rhs = BigInt::from(d_abs);
    if exp >= 0 {
        lhs << (2 * exp as i64) < rhs
    } else {
        lhs < rhs << (2 * (-exp) as i64)
    }
}

/// The b in (-c, c] with b^2 = D (mod 4c), ascending.
///
/// Roots mod 4c fold two-to-one onto residues mod 2c (b and b + 2c are both
/// roots), which is what the half-open b-range parameterizes.
pub fn roots_half_mod(d: i64, c: u64) -> Result<Vec<i128>> {
    let m = 4 * c;
    let roots = modsqrt::sqrts_mod(d, m, 1 << 22)?;
    let mut out: Vec<i128> = Vec::with_capacity(roots.len() / 2 + 1);
    for r in roots {
        let r = r % (2 * c); // fold mod 2c
        let b = if r > c { r as i128 - 2 * c as i128 } else { r as i128 };
        out.push(b);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Brute-force class count used as an independent oracle in tests: reduce
/// every form with small coefficients and count distinct representatives.
pub fn class_count_brute(d: i64) -> Result<usize> {
    check_discriminant(d)?;
    let mut set = std::collections::BTreeSet::new();
    let ad = d.unsigned_abs() as i64;
    let amax = ((ad as f64 / 3.0).sqrt() as i64) + 2;
    for a in 1..=amax {
        for b in -(a + 2)..=(a + 2) {
            let num = b * b - d;
            if num % (4 * a) == 0 {
                let c = num / (4 * a);
                if c > 0 {
                    set.insert(QForm::new(a, b, c).reduce());
                }
            }
        }
    }
    Ok(set.len())
}

/// f64 view of a CM point (for fast scanning paths).
pub fn cm_point_f64(a: u64, b: i128, d: i64) -> (f64, f64) {
    let x = -(b as f64) / (2.0 * a as f64);
    let y = (d.unsigned_abs() as f64).sqrt() / (2.0 * a as f64);
    (x, y)
}

/// Convenience accessor used by hot paths: (a, b) as machine ints when they
/// fit.
pub fn as_small(q: &QForm) -> Option<(u64, i64)> {
    Some((q.a.to_u64()?, q.b.to_i64()?))
}
