//! Kronecker symbols, the theta-multiplier factor eps_d, genus characters,
//! and small arithmetic functions.
//!
//! Kronecker convention: (a/0) = 1 iff a = ±1 else 0; (a/-1) = -1 iff a < 0;
//! (a/2) = 0 for even a, +1 for a = ±1 (mod 8), -1 for a = ±3 (mod 8).
//! This is the convention under which the plus-space sums come out real and
//! Kohnen's identity closes; both are enforced by tests.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::quadforms::QForm;

/// Kronecker symbol (a/n) on machine integers.
pub fn kronecker_i64(mut a: i64, mut n: i64) -> i32 {
    if n == 0 {
        return i32::from(a == 1 || a == -1);
    }
    let mut res = 1i32;
    if n < 0 {
        n = -n;
        if a < 0 {
            res = -res;
        }
    }
    while n % 2 == 0 {
        n /= 2;
        if a % 2 == 0 {
            return 0;
        }
        let am = a.rem_euclid(8);
        if am == 3 || am == 5 {
            res = -res;
        }
    }
    if n == 1 {
        return res;
    }
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let nm = n % 8;
            if nm == 3 || nm == 5 {
                res = -res;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            res = -res;
        }
        a %= n;
    }
    if n == 1 {
        res
    } else {
        0
    }
}

/// Kronecker symbol (a/n) on big integers.
pub fn kronecker(a: &BigInt, n: &BigInt) -> i32 {
    if n.is_zero() {
        return i32::from(a.abs().is_one());
    }
    let mut a = a.clone();
    let mut n = n.clone();
    let mut res = 1i32;
    let three = BigInt::from(3);
    let five = BigInt::from(5);
    let eight = BigInt::from(8);
    if n.is_negative() {
        n = -n;
        if a.is_negative() {
            res = -res;
        }
    }
    while n.is_even() {
        n /= 2;
        if a.is_even() {
            return 0;
        }
        let am = a.mod_floor(&eight);
        if am == three || am == five {
            res = -res;
        }
    }
    if n.is_one() {
        return res;
    }
    a = a.mod_floor(&n);
    while !a.is_zero() {
        while a.is_even() {
            a /= 2;
            let nm = n.mod_floor(&eight);
            if nm == three || nm == five {
                res = -res;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a.mod_floor(&BigInt::from(4)) == three && n.mod_floor(&BigInt::from(4)) == three {
            res = -res;
        }
        a = a.mod_floor(&n);
    }
    if n.is_one() {
        res
    } else {
        0
    }
}

/// The theta-multiplier factor: 1 for d = 1 (mod 4), i for d = 3 (mod 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsD {
    One,
    I,
}

pub fn eps_d(dd: i64) -> Result<EpsD> {
    if dd % 2 == 0 {
        return Err(Error::EvenArgument(dd));
    }
    Ok(if dd.rem_euclid(4) == 1 {
        EpsD::One
    } else {
        EpsD::I
    })
}

/// delta_d: 1 iff d = 1.
pub fn delta_d(d: i64) -> i64 {
    i64::from(d == 1)
}

/// Number of divisors.
pub fn sigma0(m: u64) -> u64 {
    assert!(m >= 1);
    let mut count = 1u64;
    for (_, e) in crate::modsqrt::factor_u64(m) {
        count *= (e + 1) as u64;
    }
    count
}

/// Sum of divisors.
pub fn sigma1(m: u64) -> u64 {
    assert!(m >= 1);
    let mut s = 1u64;
    for (p, e) in crate::modsqrt::factor_u64(m) {
        s *= (p.pow(e + 1) - 1) / (p - 1);
    }
    s
}

/// Whether `d` is a fundamental discriminant (1 counts as the trivial one).
pub fn is_fundamental(d: i64) -> bool {
    fn squarefree(mut n: u64) -> bool {
        let mut p = 2u64;
        while p * p <= n {
            if n % (p * p) == 0 {
                return false;
            }
            while n % p == 0 {
                n /= p;
            }
            p += 1;
        }
        true
    }
    if d == 0 {
        return false;
    }
    if d.rem_euclid(4) == 1 {
        return squarefree(d.unsigned_abs());
    }
    if d % 4 == 0 {
        let q = d / 4;
        let qm = q.rem_euclid(4);
        return squarefree(q.unsigned_abs()) && (qm == 2 || qm == 3);
    }
    false
}

const GENUS_SCAN_ESCALATIONS: u32 = 3;

/// Genus character chi_d(Q) for a fundamental discriminant d dividing
/// disc(Q) with disc(Q)/d a discriminant.
///
/// 0 when gcd(a, b, c, d) > 1; otherwise (d/n) for a value n represented by
/// Q and coprime to d. The first candidates tried are the cheap ones (the
/// outer coefficients and Q(1, ±1)); only if all share a factor with d does
/// the shell scan over |x|, |y| <= 4(1 + log|d|) start, escalating the bound
/// 4x up to three times. Under `debug_assertions` a second representative is
/// checked to agree.
pub fn genus_char(d: i64, q: &QForm) -> Result<i32> {
    if d == 1 {
        return Ok(1);
    }
    let d_big = BigInt::from(d);
    let content_d = q.a.gcd(&q.b).gcd(&q.c).gcd(&d_big);
    if content_d.abs() > BigInt::one() {
        return Ok(0);
    }
    let mut witness: Option<i32> = None;
    for (x, y) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
        if let Some(v) = try_rep(&d_big, q, x, y, &mut witness) {
            return Ok(v);
        }
    }
    let mut bound = (4.0 * (1.0 + (d.unsigned_abs() as f64).ln())).ceil() as i64;
    for _ in 0..=GENUS_SCAN_ESCALATIONS {
        for r in 1..=bound {
            // shells of max(|x|,|y|) = r keep represented values small
            for x in -r..=r {
                for y in [-r, r] {
                    if let Some(v) = try_rep(&d_big, q, x, y, &mut witness) {
                        return Ok(v);
                    }
                }
            }
            for y in -(r - 1)..=(r - 1) {
                for x in [-r, r] {
                    if let Some(v) = try_rep(&d_big, q, x, y, &mut witness) {
                        return Ok(v);
                    }
                }
            }
        }
        if let Some(v) = witness {
            return Ok(v);
        }
        bound *= 4;
    }
    match witness {
        Some(v) => Ok(v),
        None => Err(Error::SearchExhausted(format!(
            "no represented value coprime to {d} for form {q} within bound {bound}"
        ))),
    }
}

/// Machine-integer genus character for the scanning paths. Same contract as
/// [`genus_char`]; coefficients must fit i64 (values are evaluated in i128).
pub fn genus_char_i64(d: i64, a: i64, b: i64, c: i64) -> Result<i32> {
    if d == 1 {
        return Ok(1);
    }
    fn gcd(mut a: i64, mut b: i64) -> i64 {
        a = a.abs();
        b = b.abs();
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    if gcd(gcd(gcd(a, b), c), d) > 1 {
        return Ok(0);
    }
    let eval = |x: i64, y: i64| -> i128 {
        a as i128 * x as i128 * x as i128
            + b as i128 * x as i128 * y as i128
            + c as i128 * y as i128 * y as i128
    };
    let try_pt = |x: i64, y: i64| -> Option<i32> {
        let n = eval(x, y);
        if n == 0 {
            return None;
        }
        let nr = (n % d as i128) as i64;
        if gcd(nr, d) != 1 {
            return None;
        }
        // (d/n) for positive n is periodic mod 4|d|; fold to stay in i64.
        // n coprime to d and |d| > 1 rules out n = 0 (mod 4|d|).
        let nm = n.rem_euclid(4 * d.unsigned_abs() as i128) as i64;
        Some(kronecker_i64(d, nm))
    };
    for (x, y) in [(1i64, 0i64), (0, 1), (1, 1), (1, -1)] {
        if let Some(v) = try_pt(x, y) {
            return Ok(v);
        }
    }
    let mut bound = (4.0 * (1.0 + (d.unsigned_abs() as f64).ln())).ceil() as i64;
    for _ in 0..=GENUS_SCAN_ESCALATIONS {
        for r in 1..=bound {
            for x in -r..=r {
                for y in [-r, r] {
                    if let Some(v) = try_pt(x, y) {
                        return Ok(v);
                    }
                }
            }
            for y in -(r - 1)..=(r - 1) {
                for x in [-r, r] {
                    if let Some(v) = try_pt(x, y) {
                        return Ok(v);
                    }
                }
            }
        }
        bound *= 4;
    }
    Err(Error::SearchExhausted(format!(
        "no represented value coprime to {d} for [{a},{b},{c}]"
    )))
}

/// Evaluate one candidate representative; in debug builds keep scanning until
/// a second witness confirms well-definedness.
fn try_rep(d: &BigInt, q: &QForm, x: i64, y: i64, witness: &mut Option<i32>) -> Option<i32> {
    let n = q.eval(x, y);
    if n.is_zero() || !n.gcd(d).is_one() {
        return None;
    }
    let v = kronecker(d, &n);
    debug_assert!(v != 0, "coprime representative cannot give 0");
    match witness {
        None => {
            *witness = Some(v);
            if cfg!(debug_assertions) {
                None // keep going: a second witness must agree
            } else {
                Some(v)
            }
        }
        Some(prev) => {
            debug_assert_eq!(
                *prev, v,
                "genus character ill-defined on {q}: disagreement at ({x},{y})"
            );
            Some(*prev)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn kronecker_trivial_top() {
        for n in -20i64..=20 {
            assert_eq!(kronecker_i64(1, n), 1, "n={n}");
        }
    }

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker_i64(5, 3), -1);
        assert_eq!(kronecker_i64(-3, 2), -1); // -3 = 5 (mod 8)
        assert_eq!(kronecker_i64(2, 7), 1);
        assert_eq!(kronecker_i64(-4, 4), 0);
        assert_eq!(kronecker_i64(3, 0), 0);
        assert_eq!(kronecker_i64(-1, 0), 1);
        assert_eq!(kronecker_i64(-1, -1), -1);
        assert_eq!(kronecker_i64(7, 2), 1); // 7 = -1 (mod 8)
        assert_eq!(kronecker_i64(5, 2), -1);
    }

    #[test]
    fn kronecker_legendre_agreement() {
        // against Euler's criterion for odd primes
        for p in [3i64, 5, 7, 11, 13, 17, 19, 23] {
            for a in 1..p {
                let euler = {
                    let mut acc = 1i64;
                    for _ in 0..(p - 1) / 2 {
                        acc = acc * a % p;
                    }
                    if acc == 1 {
                        1
                    } else {
                        -1
                    }
                };
                assert_eq!(kronecker_i64(a, p) as i64, euler, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn kronecker_big_matches_i64() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3000 {
            let a = rng.gen_range(-10_000i64..10_000);
            let n = rng.gen_range(-10_000i64..10_000);
            assert_eq!(
                kronecker(&BigInt::from(a), &BigInt::from(n)),
                kronecker_i64(a, n),
                "a={a} n={n}"
            );
        }
    }

    #[test]
    fn kronecker_multiplicative_in_bottom() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0u32;
        while checked < 10_000 {
            let a = rng.gen_range(-300i64..300);
            let n1 = rng.gen_range(1i64..150);
            let n2 = rng.gen_range(1i64..150);
            let lhs = kronecker_i64(a, n1 * n2);
            let rhs = kronecker_i64(a, n1) * kronecker_i64(a, n2);
            assert_eq!(lhs, rhs, "a={a} n1={n1} n2={n2}");
            checked += 1;
        }
    }

    #[test]
    fn eps_values() {
        assert_eq!(eps_d(1).unwrap(), EpsD::One);
        assert_eq!(eps_d(3).unwrap(), EpsD::I);
        assert_eq!(eps_d(5).unwrap(), EpsD::One);
        assert_eq!(eps_d(-1).unwrap(), EpsD::I); // -1 = 3 (mod 4)
        assert!(matches!(eps_d(2), Err(Error::EvenArgument(2))));
    }

    #[test]
    fn arith_functions() {
        assert_eq!(sigma1(6), 12);
        assert_eq!(sigma0(4), 3);
        assert_eq!(sigma1(1), 1);
        assert_eq!(sigma0(12), 6);
        assert_eq!(sigma1(12), 28);
        assert_eq!(delta_d(1), 1);
        assert_eq!(delta_d(-4), 0);
        assert_eq!(delta_d(5), 0);
    }

    #[test]
    fn fundamental_discriminants() {
        for d in [1i64, -3, -4, -7, -8, -11, 5, 8, 12, -15, -20, -24, -303] {
            assert!(is_fundamental(d), "{d}");
        }
        for d in [-9i64, -12, -16, -18, 2, 3, -25, -27, -75, 0] {
            assert!(!is_fundamental(d), "{d}");
        }
    }

    #[test]
    fn genus_char_i64_matches_bigint_path() {
        for d_full in (-300i64..-2).filter(|d| d.rem_euclid(4) <= 1) {
            for q in crate::quadforms::reduced_forms(d_full).unwrap() {
                for f in crate::quadforms::DiscFactorization::all_of(d_full).unwrap() {
                    use num_traits::ToPrimitive;
                    let big = genus_char(f.d_fund, &q).unwrap();
                    let small = genus_char_i64(
                        f.d_fund,
                        q.a.to_i64().unwrap(),
                        q.b.to_i64().unwrap(),
                        q.c.to_i64().unwrap(),
                    )
                    .unwrap();
                    assert_eq!(big, small, "d={} q={q}", f.d_fund);
                }
            }
        }
    }

    #[test]
    fn genus_char_trivial_and_examples() {
        let q = QForm::new(2, 1, 3);
        assert_eq!(genus_char(1, &q).unwrap(), 1);
        // disc -20, represents 3, (5/3) = -1
        let q = QForm::new(2, 2, 3);
        assert_eq!(genus_char(5, &q).unwrap(), -1);
        // disc -12, content 2 coprime to d = -3, represents 2, (-3/2) = -1
        let q = QForm::new(2, 2, 2);
        assert_eq!(genus_char(-3, &q).unwrap(), -1);
        // content 2 shares a factor with d = -4
        assert_eq!(genus_char(-4, &q).unwrap(), 0);
    }
}
