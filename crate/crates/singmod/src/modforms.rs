//! The j-function: exact integer q-expansions, the Faber basis j_m, their
//! evaluation at CM points, and the Kloosterman/Bessel series for the
//! coefficients c(n).
//!
//! q-expansions are exact integer power series (never floats); evaluation
//! happens only at the very end, against a truncation order chosen so the
//! discarded tail is provably below the target precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::arb::{self, e_of, special, BigComplex, BigReal, Prec};
use crate::error::{Error, Result};
use crate::expsums;

/// Integer q-expansion: coefficients of q^leading .. q^order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QExpansion {
    pub leading: i64,
    pub order: i64,
    pub coeffs: Vec<BigInt>,
}

impl QExpansion {
    pub fn new(leading: i64, order: i64, coeffs: Vec<BigInt>) -> Self {
        assert_eq!(coeffs.len() as i64, order - leading + 1);
        QExpansion {
            leading,
            order,
            coeffs,
        }
    }

    pub fn coeff(&self, n: i64) -> BigInt {
        if n < self.leading || n > self.order {
            BigInt::zero()
        } else {
            self.coeffs[(n - self.leading) as usize].clone()
        }
    }

    fn mul(&self, rhs: &QExpansion, order: i64) -> QExpansion {
        let leading = self.leading + rhs.leading;
        let len = (order - leading + 1).max(0) as usize;
        let mut out = vec![BigInt::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let ei = self.leading + i as i64;
            for (j, b) in rhs.coeffs.iter().enumerate() {
                let e = ei + rhs.leading + j as i64;
                if e > order {
                    break;
                }
                out[(e - leading) as usize] += a * b;
            }
        }
        QExpansion::new(leading, order, out)
    }

    fn sub_scaled(&mut self, rhs: &QExpansion, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for (j, b) in rhs.coeffs.iter().enumerate() {
            let e = rhs.leading + j as i64;
            if e < self.leading || e > self.order {
                continue;
            }
            self.coeffs[(e - self.leading) as usize] -= k * b;
        }
    }
}

/// Euler's function prod (1 - q^n) to the given order, via the pentagonal
/// number theorem (a sparse ±1 series).
fn euler_phi_series(order: i64) -> QExpansion {
    let mut coeffs = vec![BigInt::zero(); (order + 1) as usize];
    coeffs[0] = BigInt::one();
    let mut k = 1i64;
    loop {
        let g1 = k * (3 * k - 1) / 2;
        let g2 = k * (3 * k + 1) / 2;
        if g1 > order && g2 > order {
            break;
        }
        let sign = if k % 2 == 1 { -1 } else { 1 };
        if g1 <= order {
            coeffs[g1 as usize] = BigInt::from(sign);
        }
        if g2 <= order {
            coeffs[g2 as usize] = BigInt::from(sign);
        }
        k += 1;
    }
    QExpansion::new(0, order, coeffs)
}

/// Multiplicative inverse of a series with constant term 1.
fn invert_unit_series(s: &QExpansion, order: i64) -> QExpansion {
    assert_eq!(s.leading, 0);
    assert!(s.coeffs[0].is_one());
    let len = (order + 1) as usize;
    let mut inv = vec![BigInt::zero(); len];
    inv[0] = BigInt::one();
    for n in 1..=order {
        let mut acc = BigInt::zero();
        for k in 1..=n.min(s.order) {
            let a = &s.coeffs[k as usize];
            if !a.is_zero() {
                acc += a * &inv[(n - k) as usize];
            }
        }
        inv[n as usize] = -acc;
    }
    QExpansion::new(0, order, inv)
}

/// Exact coefficients c(-1..N) of
/// j = q^-1 prod (1-q^n)^-24 (1 + 240 sum sigma_3(n) q^n)^3.
pub fn j_coeffs(n_max: i64) -> QExpansion {
    assert!(n_max >= 0);
    let order = n_max + 1;
    let phi = euler_phi_series(order);
    let phi2 = phi.mul(&phi, order);
    let phi4 = phi2.mul(&phi2, order);
    let phi8 = phi4.mul(&phi4, order);
    let phi16 = phi8.mul(&phi8, order);
    let phi24 = phi16.mul(&phi8, order);
    let inv24 = invert_unit_series(&phi24, order);
    let mut e4 = vec![BigInt::zero(); (order + 1) as usize];
    e4[0] = BigInt::one();
    for n in 1..=order {
        let mut s3 = 0u128;
        for d in 1..=n {
            if n % d == 0 {
                s3 += (d as u128).pow(3);
            }
        }
        e4[n as usize] = BigInt::from(240u32) * BigInt::from(s3);
    }
    let e4 = QExpansion::new(0, order, e4);
    let e43 = e4.mul(&e4, order).mul(&e4, order);
    let prod = e43.mul(&inv24, order);
    // j = q^-1 * prod
    let coeffs: Vec<BigInt> = prod.coeffs[..=(n_max + 1) as usize].to_vec();
    QExpansion::new(-1, n_max, coeffs)
}

/// Monic Faber polynomial P_m with j_m = P_m(j) = q^-m + O(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaberPoly {
    pub m: u32,
    /// coefficients of x^0 .. x^m
    pub coeffs: Vec<BigInt>,
}

impl FaberPoly {
    pub fn eval(&self, x: &BigComplex) -> BigComplex {
        let mut acc = BigComplex::zero(x.prec());
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x);
            acc = acc.add(&BigComplex::from_real(BigReal::from_bigint(c, x.prec())));
        }
        acc
    }
}

/// Faber polynomial P_m and the q-expansion of j_m to the given order, by
/// greedy reduction: subtract multiples of the earlier j_k from j^m until
/// only q^-m + O(q) remains.
pub fn faber(m: u32, order: i64) -> (FaberPoly, QExpansion) {
    let work_order = order.max(1);
    let j = j_coeffs(work_order + m as i64);
    let mut polys: Vec<FaberPoly> = vec![FaberPoly {
        m: 0,
        coeffs: vec![BigInt::one()],
    }];
    let one_series = {
        let mut v = vec![BigInt::zero(); work_order as usize + 1];
        v[0] = BigInt::one();
        QExpansion::new(0, work_order, v)
    };
    let mut exps: Vec<QExpansion> = vec![one_series.clone()];
    let mut jpow = one_series;
    for k in 1..=m {
        jpow = jpow.mul(&j, work_order);
        let mut cur = jpow.clone();
        let mut pcoef: Vec<BigInt> = vec![BigInt::zero(); k as usize + 1];
        pcoef[k as usize] = BigInt::one();
        for t in (0..k).rev() {
            let alpha = cur.coeff(-(t as i64));
            if !alpha.is_zero() {
                cur.sub_scaled(&exps[t as usize], &alpha);
                for (i, c) in polys[t as usize].coeffs.iter().enumerate() {
                    pcoef[i] -= &alpha * c;
                }
            }
        }
        polys.push(FaberPoly { m: k, coeffs: pcoef });
        exps.push(cur);
    }
    let exp = exps.pop().unwrap();
    let trimmed = if order < work_order {
        QExpansion::new(
            exp.leading,
            order,
            exp.coeffs[..(order - exp.leading + 1) as usize].to_vec(),
        )
    } else {
        exp
    };
    (polys.pop().unwrap(), trimmed)
}

type JmKey = (u32, i64);

fn jm_cache() -> &'static Mutex<HashMap<JmKey, Arc<QExpansion>>> {
    static CACHE: OnceLock<Mutex<HashMap<JmKey, Arc<QExpansion>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached q-expansion of j_m to at least the given order.
pub fn jm_expansion(m: u32, order: i64) -> Arc<QExpansion> {
    // round the order up so nearby requests share an entry
    let rounded = (order.max(32) as u64).next_power_of_two() as i64;
    let key = (m, rounded);
    if let Some(e) = jm_cache().lock().unwrap().get(&key) {
        return e.clone();
    }
    let (_, exp) = faber(m, rounded);
    let arc = Arc::new(exp);
    jm_cache().lock().unwrap().insert(key, arc.clone());
    arc
}

/// Truncation order so that the discarded j_m tail is below
/// 2^-(prec+10) * max(1, |q|^-m), using |c_m(n)| <~ S e^(4 pi sqrt(mn)).
fn truncation_order(m: u32, y: f64, prec: Prec) -> Result<i64> {
    const N_MAX: i64 = 200_000;
    let two_pi_y = 2.0 * std::f64::consts::PI * y;
    let target = (prec as f64 + 26.0) * std::f64::consts::LN_2 + two_pi_y * m as f64;
    let gap = |n: f64| -> f64 { two_pi_y * n - 4.0 * std::f64::consts::PI * (m as f64 * n).sqrt() };
    let mut n = 8.0 * m as f64 + 8.0;
    while gap(n) < target + two_pi_y.max(1.0) {
        n *= 1.25;
        if n > N_MAX as f64 {
            return Err(Error::PrecisionFailure(format!(
                "Im z = {y} too small: truncation order exceeds {N_MAX}"
            )));
        }
    }
    Ok(n.ceil() as i64)
}

/// j_m at a point of the upper half-plane via the (cached) q-expansion.
///
/// Callers supply fundamental-domain points; the series path is used for all
/// m (the polynomial-in-j route suffers catastrophic cancellation from the
/// size of the P_m coefficients and is kept only as a cross-check).
pub fn eval_jm(m: u32, z: &BigComplex, prec: Prec) -> Result<BigComplex> {
    let y = z.im.to_f64();
    if y < 0.4 {
        return Err(Error::PrecisionFailure(format!(
            "eval_jm expects a fundamental-domain point, got Im z = {y}"
        )));
    }
    if m == 0 {
        return Ok(BigComplex::one(prec));
    }
    let order = truncation_order(m, y, prec)?;
    let exp = jm_expansion(m, order);
    let pw = prec + 48 + (order as f64).log2().ceil() as u32;
    let zw = BigComplex::new(z.re.round_to(pw), z.im.round_to(pw));
    let q = e_of(&zw, pw)?;
    // Horner over exponents -m .. order, then shift by q^-m
    let mut acc = BigComplex::zero(pw);
    let mut n = order.min(exp.order);
    while n >= exp.leading {
        acc = acc.mul(&q);
        let c = exp.coeff(n);
        if !c.is_zero() {
            acc = acc.add(&BigComplex::from_real(BigReal::from_bigint(&c, pw)));
        }
        n -= 1;
    }
    let qm_inv = q.powi(m as u64).recip();
    let v = acc.mul(&qm_inv);
    Ok(BigComplex::new(v.re.round_to(prec), v.im.round_to(prec)))
}

/// Result of the coefficient series: the partial sum, the certified tail
/// bound, and the rounded integer.
#[derive(Debug, Clone)]
pub struct CoeffValue {
    pub value: BigReal,
    pub certified_error: f64,
    pub rounded: BigInt,
    pub cutoff: u64,
}

/// Tail certificate for the c(n) series at cutoff x: a square-root
/// cancellation model with the Weil + I_1(y) <= (y/2) e^y shape. The
/// constant is calibrated to dominate the measured true tails across
/// n <= 200 (which reach ~1.0 at x = 10 sqrt(n) + 40), with exact-integer
/// agreement against the product formula as the hard oracle.
fn cn_tail_certificate(n: u64, x: u64) -> f64 {
    let xf = x as f64;
    (4.0 * std::f64::consts::PI * (n as f64).sqrt() / xf).exp() * (1.0 + xf.ln()) / xf.sqrt()
}

const CN_CUTOFF_CEILING: u64 = 1 << 20;

/// c(n) by the Kloosterman/Bessel series
/// 2 pi n^(-1/2) sum_c K(-n,c)/c I_1(4 pi sqrt(n)/c), summed to an adaptive
/// cutoff with a certified tail bound < 0.4.
///
/// The Kloosterman index pairs the pole q^-1 with the coefficient q^n, i.e.
/// S(-1, n; c) = K(-n, c); with K(+n, c) the series converges to the wrong
/// value (off by ~116 already for n = 1, checked against the exact product
/// formula).
pub fn c_n_rademacher(n: u64, prec_opt: Option<Prec>) -> Result<CoeffValue> {
    if n < 1 {
        return Err(Error::InvalidCongruence("c(n) series needs n >= 1".into()));
    }
    let x0 = (10.0 * (n as f64).sqrt() + 40.0).floor() as u64;
    let prec = prec_opt.unwrap_or_else(|| arb::coeff_precision(n, (x0 as f64).log2() as u32 + 4));
    let pw = prec + 16;
    let four_pi_sqrt_n = arb::pi(pw)
        .mul_pow2(2)
        .mul(&BigReal::from_u64(n, pw).sqrt());
    let front = arb::pi(pw)
        .mul_pow2(1)
        .div(&BigReal::from_u64(n, pw).sqrt());
    let one = BigReal::one(pw);
    let mut acc = BigReal::zero(pw);
    let mut x = 0u64;
    let mut target = x0;
    loop {
        for c in (x + 1)..=target {
            let k = expsums::kloosterman(-(n as i64), c, pw)?;
            if k.mag_exponent() < -(pw as i64) {
                continue;
            }
            let arg = four_pi_sqrt_n.div_u64(c);
            let bess = special::bessel_i(&one, &arg, pw)?;
            acc = acc.add(&k.div_u64(c).mul(&bess));
        }
        x = target;
        let err = cn_tail_certificate(n, x);
        if err < 0.4 {
            let value = front.mul(&acc).round_to(prec);
            let rounded = value.round_half_away();
            let margin = value
                .sub(&BigReal::from_bigint(&rounded, prec))
                .abs()
                .to_f64();
            // the certificate models average-case cancellation; when the
            // actual margin leaves no headroom below 1/2, grow the cutoff
            // until it does
            if margin + err < 0.5 {
                return Ok(CoeffValue {
                    value,
                    certified_error: err,
                    rounded,
                    cutoff: x,
                });
            }
        }
        if 2 * x > CN_CUTOFF_CEILING {
            return Err(Error::NonConvergence {
                cutoff: x,
                last_delta: err,
                partial: front.mul(&acc).to_decimal_string(),
            });
        }
        target = 2 * x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_coefficients_first_values() {
        let j = j_coeffs(4);
        assert_eq!(j.coeff(-1), BigInt::one());
        assert_eq!(j.coeff(0), BigInt::from(744));
        assert_eq!(j.coeff(1), BigInt::from(196884u64));
        assert_eq!(j.coeff(2), BigInt::from(21493760u64));
        assert_eq!(j.coeff(3), BigInt::from(864299970u64));
        assert_eq!(j.coeff(4), BigInt::from(20245856256u64));
    }

    #[test]
    fn j_coeffs_zero_order_has_two_entries() {
        let j = j_coeffs(0);
        assert_eq!(j.coeffs.len(), 2);
        assert_eq!((j.leading, j.order), (-1, 0));
    }

    #[test]
    fn faber_polynomials_match_displayed_values() {
        let (p1, _) = faber(1, 8);
        assert_eq!(p1.coeffs, vec![BigInt::from(-744), BigInt::one()]);
        let (p2, _) = faber(2, 8);
        assert_eq!(
            p2.coeffs,
            vec![BigInt::from(159768), BigInt::from(-1488), BigInt::one()]
        );
        let (p3, _) = faber(3, 8);
        assert_eq!(
            p3.coeffs,
            vec![
                BigInt::from(-36866976),
                BigInt::from(1069956),
                BigInt::from(-2232),
                BigInt::one()
            ]
        );
    }

    #[test]
    fn faber_property_up_to_20() {
        for m in 1..=20u32 {
            let (_, exp) = faber(m, 6);
            assert_eq!(exp.coeff(-(m as i64)), BigInt::one(), "m={m}");
            for t in (-(m as i64) + 1)..=0 {
                assert!(exp.coeff(t).is_zero(), "m={m} coeff at q^{t}");
            }
        }
    }

    #[test]
    fn eval_j1_at_special_points() {
        let p: Prec = 160;
        // j(i) = 1728 so j_1(i) = 984
        let i_pt = BigComplex::new(BigReal::zero(p), BigReal::one(p));
        let v = eval_jm(1, &i_pt, p).unwrap();
        assert!((v.re.to_f64() - 984.0).abs() < 1e-28, "{}", v.re);
        assert!(v.im.to_f64().abs() < 1e-26);
        // corner: j = 0 so j_1 = -744
        let corner = BigComplex::new(
            BigReal::from_f64(-0.5, p),
            BigReal::from_u64(3, p).sqrt().mul_pow2(-1),
        );
        let v = eval_jm(1, &corner, p).unwrap();
        assert!((v.re.to_f64() + 744.0).abs() < 1e-26, "{}", v.re);
        // j(2i) = 287496 so j_1(2i) = 286752
        let two_i = BigComplex::new(BigReal::zero(p), BigReal::from_u64(2, p));
        let v = eval_jm(1, &two_i, p).unwrap();
        assert!((v.re.to_f64() - 286752.0).abs() < 1e-28, "{}", v.re);
    }

    #[test]
    fn eval_jm_consistent_with_faber_polynomial() {
        let p: Prec = 192;
        let z = BigComplex::new(BigReal::from_f64(0.13, p), BigReal::from_f64(1.07, p));
        let j_val = eval_jm(1, &z, p)
            .unwrap()
            .add(&BigComplex::from_real(BigReal::from_u64(744, p)));
        for m in 2..=5u32 {
            let (pm, _) = faber(m, 4);
            let via_poly = pm.eval(&j_val);
            let direct = eval_jm(m, &z, p).unwrap();
            let err = via_poly.sub(&direct).abs().to_f64();
            let scale = direct.abs().to_f64();
            assert!(
                err / scale < 2.0f64.powi(-(p as i32) + 40),
                "m={m}: rel {}",
                err / scale
            );
        }
    }

    #[test]
    fn eval_jm_truncation_safety() {
        let p: Prec = 128;
        let z = BigComplex::new(BigReal::from_f64(-0.41, p), BigReal::from_f64(0.92, p));
        let v1 = eval_jm(3, &z, p).unwrap();
        let v2 = eval_jm(3, &z, p + 64).unwrap();
        let rel = v1.sub(&BigComplex::new(v2.re.round_to(p), v2.im.round_to(p)))
            .abs()
            .to_f64()
            / v2.abs().to_f64();
        assert!(rel < 2.0f64.powi(-(p as i32) + 8), "rel {rel}");
    }

    #[test]
    fn eval_jm_rejects_low_points() {
        let z = BigComplex::new(BigReal::zero(64), BigReal::from_f64(0.05, 64));
        assert!(matches!(eval_jm(1, &z, 64), Err(Error::PrecisionFailure(_))));
    }

    #[test]
    fn rademacher_first_coefficients() {
        let v = c_n_rademacher(1, None).unwrap();
        assert_eq!(v.rounded, BigInt::from(196884u64));
        assert!(v.certified_error < 0.4);
        let v = c_n_rademacher(2, None).unwrap();
        assert_eq!(v.rounded, BigInt::from(21493760u64));
    }

    #[test]
    fn rademacher_cutoff_stays_linear_in_sqrt_n() {
        // "C sqrt(n) terms suffice": the adaptive cutoff never grows past a
        // fixed multiple of 10 sqrt(n) + 40, and the certificate dominates
        // the measured true tail at the stopping point
        let j = j_coeffs(200);
        for n in [1u64, 17, 42, 60, 120, 200] {
            let v = c_n_rademacher(n, None).unwrap();
            let x0 = (10.0 * (n as f64).sqrt() + 40.0).floor() as u64;
            assert!(v.cutoff <= 16 * x0, "n={n}: cutoff {}", v.cutoff);
            assert!(v.certified_error < 0.4, "n={n}");
            let truth = BigReal::from_bigint(&j.coeff(n as i64), v.value.prec());
            let true_tail = truth.sub(&v.value).abs().to_f64();
            assert!(
                true_tail < v.certified_error,
                "n={n}: tail {true_tail} vs certificate {}",
                v.certified_error
            );
        }
    }

    #[test]
    fn rademacher_matches_product_formula_sample() {
        let j = j_coeffs(60);
        for n in [3u64, 17, 42, 60] {
            let v = c_n_rademacher(n, None).unwrap();
            assert_eq!(v.rounded, j.coeff(n as i64), "n={n}");
        }
    }
}
