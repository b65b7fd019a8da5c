//! Twisted traces of singular moduli by three independent routes: the direct
//! CM-point sum over reduced forms, the exact sinh-weighted series over
//! quadratic Weyl sums, and the nearest-integer rectangle formula.
//!
//! The three engines share conventions end to end (character, root
//! enumeration, boundary strictness), so cross-method deviations measure the
//! series truncation alone. Exponentially large early terms are accumulated
//! in big-float arithmetic; the O(1)-sized tails switch to f64 without
//! changing the increasing-c summation order.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::arb::{self, e_rational, BigComplex, BigReal, Prec};
use crate::characters::{self, genus_char, genus_char_i64};
use crate::error::{Error, Result};
use crate::expsums::{weyl_f64, weyl_sum, WeylMethod};
use crate::modforms::eval_jm;
use crate::modsqrt::SpfSieve;
use crate::quadforms::{
    self, class_number_weighted, cm_point, reduced_forms, DiscFactorization,
};

/// Default series stopping tolerance.
pub const DEFAULT_SERIES_TOL: f64 = 1e-4;
/// Default ceiling for the series cutoff.
pub const DEFAULT_SERIES_CEILING: u64 = 1 << 18;
/// Default ceiling for the rectangle leading coefficient.
pub const DEFAULT_RECT_CEILING: u64 = quadforms::RECT_DEFAULT_CEILING;

/// Options for [`compare`].
#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Working precision override (bits); `None` applies the policy formula.
    pub precision: Option<Prec>,
    /// Stopping tolerance for the sinh series.
    pub series_tol: f64,
    /// Ceiling on the series cutoff; reaching it flags non-convergence.
    pub series_ceiling: u64,
    /// Rectangle height; `None` uses Y = C m^-A |D|^-B with A = 3.01,
    /// B = 1.01, C = 1.
    pub rect_y: Option<f64>,
    /// Ceiling on the rectangle leading-coefficient bound.
    pub rect_ceiling: u64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            precision: None,
            series_tol: DEFAULT_SERIES_TOL,
            series_ceiling: DEFAULT_SERIES_CEILING,
            rect_y: None,
            rect_ceiling: DEFAULT_RECT_CEILING,
        }
    }
}

/// Default rectangle height family Y = m^-3.01 |D|^-1.01.
pub fn default_rect_y(f: &DiscFactorization, m: u32) -> f64 {
    (m as f64).powf(-3.01) * (f.abs() as f64).powf(-1.01)
}

/// Working precision for (D, m) under the policy formula.
pub fn policy_precision(f: &DiscFactorization, m: u32) -> Prec {
    arb::trace_precision(f.abs(), m, 16)
}

/// The class-number main term -24 delta_d sigma_1(m) h(D), exact.
pub fn main_term(f: &DiscFactorization, m: u32) -> Result<BigRational> {
    if characters::delta_d(f.d_fund) == 0 {
        return Ok(BigRational::from(BigInt::from(0)));
    }
    let h = class_number_weighted(f.d_full)?;
    Ok(h * BigRational::from(BigInt::from(-24i64 * characters::sigma1(m as u64) as i64)))
}

/// Direct trace: sum of chi_d(Q) j_m(z_Q) / omega_Q over reduced forms.
pub fn trace_direct(f: &DiscFactorization, m: u32, prec: Prec) -> Result<BigReal> {
    if m == 0 {
        return Err(Error::InvalidCongruence("trace needs m >= 1".into()));
    }
    let pw = prec + 32;
    let forms = reduced_forms(f.d_full)?;
    let mut acc = BigComplex::zero(pw);
    for q in &forms {
        let chi = genus_char(f.d_fund, q)?;
        if chi == 0 {
            continue;
        }
        let w = quadforms::omega(q);
        let z = cm_point(q, pw).to_complex();
        let v = eval_jm(m, &z, pw)?;
        let weight = BigReal::from_ratio(&BigInt::from(chi), &BigInt::from(w), pw);
        acc = acc.add(&v.scale(&weight));
    }
    let tol = 2.0f64.powi(-(prec as i32) / 2);
    let scale = acc.re.to_f64().abs().max(1.0);
    if acc.im.to_f64().abs() > tol * scale {
        return Err(Error::AssertionFailure(format!(
            "trace_direct imaginary part {:.3e} above tolerance",
            acc.im.to_f64()
        )));
    }
    Ok(acc.re.round_to(prec))
}

/// Outcome of the sinh-series accumulation.
#[derive(Debug, Clone)]
pub struct SeriesValue {
    pub value: BigReal,
    pub cutoff: u64,
    pub last_delta: f64,
    pub converged: bool,
}

/// Cutoff below which series/rectangle terms are exponentially large and are
/// accumulated in big-float arithmetic; beyond it terms are O(1) and f64
/// suffices for the stated tolerances.
fn bigfloat_c_threshold(m: u32, d_abs: u64) -> u64 {
    let u = 4.0 * std::f64::consts::PI * m as f64 * (d_abs as f64).sqrt();
    ((u / 25.0).ceil() as u64 + 4).next_multiple_of(4)
}

/// Exact sinh-weighted series, accumulated in increasing-c order with the
/// adaptive doubling stop: starting from x = 8 m sqrt(|D|), double the cutoff
/// until two successive values differ by less than `tol`.
///
/// The partial value at the ceiling is returned with `converged = false`
/// rather than discarded; [`trace_sinh_series`] maps that case to the
/// non-convergence error.
pub fn trace_sinh_series_partial(
    f: &DiscFactorization,
    m: u32,
    prec: Prec,
    tol: f64,
    ceiling: u64,
) -> Result<SeriesValue> {
    if m == 0 {
        return Err(Error::InvalidCongruence("trace needs m >= 1".into()));
    }
    let pw = prec + 32;
    let d_abs = f.abs();
    let main = main_term(f, m)?;
    let mut head = BigReal::from_ratio(main.numer(), main.denom(), pw);

    let u_arg = arb::pi(pw)
        .mul_pow2(2)
        .mul_i64(m as i64)
        .mul(&BigReal::from_u64(d_abs, pw).sqrt());
    let c_big = bigfloat_c_threshold(m, d_abs);
    let mut c = 4u64;
    while c <= c_big {
        let t = weyl_sum(m, f, c, WeylMethod::Direct, pw)?;
        if t.mag_exponent() > -(pw as i64) {
            head = head.add(&t.mul(&u_arg.div_u64(c).sinh()));
        }
        c += 4;
    }

    // f64 tail in the same increasing-c order
    let sieve = SpfSieve::new((ceiling + 8) as usize);
    let uf = 4.0 * std::f64::consts::PI * m as f64 * (d_abs as f64).sqrt();
    let mut tail = 0.0f64;
    let x0 = ((8.0 * m as f64 * (d_abs as f64).sqrt()).ceil() as u64).max(c_big + 4);
    let mut x = x0.next_multiple_of(4);
    let mut prev: Option<f64> = None;
    let mut last_delta = f64::INFINITY;
    loop {
        while c <= x {
            let t = weyl_f64(m, f, c, &sieve)?;
            if t != 0.0 {
                tail += t * (uf / c as f64).sinh();
            }
            c += 4;
        }
        if let Some(p) = prev {
            last_delta = (tail - p).abs();
            if last_delta < tol {
                return Ok(SeriesValue {
                    value: head.add(&BigReal::from_f64(tail, pw)).round_to(prec),
                    cutoff: x,
                    last_delta,
                    converged: true,
                });
            }
        }
        prev = Some(tail);
        if 2 * x > ceiling {
            return Ok(SeriesValue {
                value: head.add(&BigReal::from_f64(tail, pw)).round_to(prec),
                cutoff: x,
                last_delta,
                converged: false,
            });
        }
        x *= 2;
    }
}

/// Exact sinh-weighted series; non-convergence at the ceiling is an error
/// carrying the partial value.
pub fn trace_sinh_series(
    f: &DiscFactorization,
    m: u32,
    prec: Prec,
    tol: f64,
    ceiling: u64,
) -> Result<(BigReal, u64)> {
    let s = trace_sinh_series_partial(f, m, prec, tol, ceiling)?;
    if !s.converged {
        return Err(Error::NonConvergence {
            cutoff: s.cutoff,
            last_delta: s.last_delta,
            partial: s.value.to_decimal_string(),
        });
    }
    Ok((s.value, s.cutoff))
}

/// Rectangle-formula value and point count.
#[derive(Debug, Clone)]
pub struct RectValue {
    pub value: BigReal,
    pub nearest: BigInt,
    pub points: u64,
}

/// Nearest-integer rectangle formula:
/// -24 delta_d sigma_1(m) h(D) + sum over z_Q in R(Y) of
/// chi_d(Q) (e(-m z_Q) - e(-m conj(z_Q))).
pub fn trace_rect(
    f: &DiscFactorization,
    m: u32,
    y: f64,
    prec: Prec,
    ceiling: u64,
) -> Result<RectValue> {
    if m == 0 {
        return Err(Error::InvalidCongruence("trace needs m >= 1".into()));
    }
    let pw = prec + 32;
    let main = main_term(f, m)?;
    let mut big = BigReal::from_ratio(main.numer(), main.denom(), pw);
    let forms = quadforms::forms_in_rectangle(f.d_full, y, ceiling)?;
    let points = forms.len() as u64;
    let d_abs = f.abs();
    let a_big = bigfloat_c_threshold(m, d_abs) / 4 + 1;
    let sqrt_d = BigReal::from_u64(d_abs, pw).sqrt();
    let two_pi_m = arb::two_pi(pw).mul_i64(m as i64);
    let sqrt_d_f = (d_abs as f64).sqrt();
    let mut tail_re = 0.0f64;
    let mut tail_im = 0.0f64;
    let mut big_acc = BigComplex::zero(pw);
    for q in &forms {
        let (a, b) = quadforms::as_small(q).ok_or_else(|| Error::ResourceCeiling {
            what: "rectangle coefficients beyond machine range",
            needed: u64::MAX,
            ceiling,
        })?;
        let cc = q.c.to_i64().ok_or_else(|| Error::ResourceCeiling {
            what: "rectangle coefficients beyond machine range",
            needed: u64::MAX,
            ceiling,
        })?;
        let chi = genus_char_i64(f.d_fund, a as i64, b, cc)?;
        if chi == 0 {
            continue;
        }
        if a <= a_big {
            // e(-m z) - e(-m conj z) = e(m b / 2a) * 2 sinh(2 pi m y_a)
            let y_a = sqrt_d.div_u64(2 * a);
            let s = two_pi_m.mul(&y_a).sinh().mul_pow2(1);
            let phase = e_rational(m as i64 * b, 2 * a, pw);
            let term = phase.scale(&s).scale_i64(chi as i64);
            big_acc = big_acc.add(&term);
        } else {
            let theta = 2.0 * std::f64::consts::PI
                * ((m as i128 * b as i128).rem_euclid(2 * a as i128) as f64)
                / (2.0 * a as f64);
            let s = 2.0 * (std::f64::consts::PI * m as f64 * sqrt_d_f / a as f64).sinh();
            let (sin_t, cos_t) = theta.sin_cos();
            tail_re += chi as f64 * cos_t * s;
            tail_im += chi as f64 * sin_t * s;
        }
    }
    debug_assert!(
        tail_im.abs() < 1e-7 * (1.0 + tail_re.abs()) + 1e-6,
        "rectangle tail not real: {tail_im}"
    );
    let tol = 2.0f64.powi(-(prec as i32) / 2);
    let scale = big_acc.re.to_f64().abs().max(1.0);
    if big_acc.im.to_f64().abs() > tol * scale {
        return Err(Error::AssertionFailure(format!(
            "trace_rect imaginary part {:.3e} above tolerance",
            big_acc.im.to_f64()
        )));
    }
    big = big.add(&big_acc.re).add(&BigReal::from_f64(tail_re, pw));
    let value = big.round_to(prec);
    let nearest = value.round_half_away();
    Ok(RectValue {
        value,
        nearest,
        points,
    })
}

/// Both sides of the finite exponential-sum identity: the half c-sum
/// (1/2) sum over 4|c < (2/Y) sqrt(|D|) of T_m(d,d';c) exp(xi 4 pi m sqrt(|D|)/c)
/// and the CM-point sum over the rectangle of chi_d(Q) e(-m z_{Q,xi}).
/// Asserts agreement within 2^(-prec+24) relative and returns the CM side.
pub fn rect_exp_sum(
    f: &DiscFactorization,
    m: u32,
    y: f64,
    xi: i8,
    prec: Prec,
) -> Result<BigReal> {
    assert!(xi == 1 || xi == -1);
    let pw = prec + 40;
    let d_abs = f.abs();
    let forms = quadforms::forms_in_rectangle(f.d_full, y, DEFAULT_RECT_CEILING)?;
    let sqrt_d = BigReal::from_u64(d_abs, pw).sqrt();
    let two_pi_m = arb::two_pi(pw).mul_i64(m as i64);
    // CM side
    let mut cm = BigComplex::zero(pw);
    for q in &forms {
        let (a, b) = quadforms::as_small(q).unwrap();
        let cc = q.c.to_i64().unwrap();
        let chi = genus_char_i64(f.d_fund, a as i64, b, cc)?;
        if chi == 0 {
            continue;
        }
        // e(-m z_{Q,xi}) = e(m b/(2a)) e^(xi 2 pi m y_a)
        let y_a = sqrt_d.div_u64(2 * a);
        let expo = two_pi_m.mul(&y_a);
        let r = if xi > 0 { expo.exp() } else { expo.neg().exp() };
        let term = e_rational(m as i64 * b, 2 * a, pw).scale(&r).scale_i64(chi as i64);
        cm = cm.add(&term);
    }
    // c-side over the same leading coefficients a = c/4
    let u_arg = arb::pi(pw)
        .mul_pow2(2)
        .mul_i64(m as i64)
        .mul(&sqrt_d);
    let mut cs = BigReal::zero(pw);
    let a_max = forms.last().map(|q| q.a.to_u64().unwrap()).unwrap_or(0);
    for a in 1..=a_max {
        let c = 4 * a;
        let t = weyl_sum(m, f, c, WeylMethod::Direct, pw)?;
        if t.mag_exponent() <= -(pw as i64) {
            continue;
        }
        let e_u = u_arg.div_u64(c);
        let r = if xi > 0 { e_u.exp() } else { e_u.neg().exp() };
        cs = cs.add(&t.mul(&r));
    }
    cs = cs.mul_pow2(-1);
    let tol = 2.0f64.powi(-(prec as i32) + 24);
    let scale = cm.re.abs().to_f64().max(cs.abs().to_f64()).max(1.0);
    let dev = cm.re.sub(&cs).abs().to_f64();
    if dev > tol * scale {
        return Err(Error::AssertionFailure(format!(
            "rectangle identity violated at D={} d={} m={m} Y={y} xi={xi}: \
             c-side {} vs CM side {} (deviation {dev:.3e})",
            f.d_full,
            f.d_fund,
            cs.to_decimal_string(),
            cm.re.to_decimal_string()
        )));
    }
    Ok(cm.re.round_to(prec))
}

/// The three trace computations for one (D, d, m) with agreement diagnostics.
#[derive(Debug, Clone)]
pub struct TraceReport {
    pub d_full: i64,
    pub d_fund: i64,
    pub m: u32,
    pub direct: BigReal,
    pub series: BigReal,
    pub series_cutoff: u64,
    pub series_converged: bool,
    pub rect: BigReal,
    pub rect_y: f64,
    pub rect_points: u64,
    pub nearest_integer: BigInt,
    /// |direct - nearest_integer|
    pub margin: f64,
    pub max_pairwise_deviation: f64,
    pub precision_bits: Prec,
    pub timing_ms: f64,
    /// weighted-class-number caveat for D in {-3, -4}
    pub weight_caveat: bool,
    /// the corollary family wants Y << 1/m
    pub y_warning: bool,
    /// deviation exceeded 10x the series tolerance
    pub disagreement: bool,
}

/// Run all three methods with consistent precision and assemble the report.
pub fn compare(f: &DiscFactorization, m: u32, opt: &TraceOptions) -> Result<TraceReport> {
    let start = Instant::now();
    let prec = opt.precision.unwrap_or_else(|| policy_precision(f, m));
    let direct = trace_direct(f, m, prec)?;
    let series = trace_sinh_series_partial(f, m, prec, opt.series_tol, opt.series_ceiling)?;
    let y = opt.rect_y.unwrap_or_else(|| default_rect_y(f, m));
    let rect = trace_rect(f, m, y, prec, opt.rect_ceiling)?;
    let nearest_integer = direct.round_half_away();
    let margin = direct
        .sub(&BigReal::from_bigint(&nearest_integer, prec))
        .abs()
        .to_f64();
    let ds = direct.sub(&series.value).abs().to_f64();
    let dr = direct.sub(&rect.value).abs().to_f64();
    let sr = series.value.sub(&rect.value).abs().to_f64();
    let max_pairwise_deviation = ds.max(dr).max(sr);
    Ok(TraceReport {
        d_full: f.d_full,
        d_fund: f.d_fund,
        m,
        direct,
        series: series.value,
        series_cutoff: series.cutoff,
        series_converged: series.converged,
        rect: rect.value,
        rect_y: y,
        rect_points: rect.points,
        nearest_integer,
        margin,
        max_pairwise_deviation,
        precision_bits: prec,
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
        weight_caveat: f.d_full == -3 || f.d_full == -4,
        y_warning: y * m as f64 > 1.0,
        disagreement: max_pairwise_deviation > 10.0 * opt.series_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(d: i64) -> DiscFactorization {
        DiscFactorization::trivial(d).unwrap()
    }

    #[test]
    fn direct_small_discriminants() {
        // (1/3)(j(zeta) - 744) = -248 and (1/2)(1728 - 744) = 492
        let t = trace_direct(&tf(-3), 1, 128).unwrap();
        assert!((t.to_f64() + 248.0).abs() < 1e-25, "{t}");
        let t = trace_direct(&tf(-4), 1, 128).unwrap();
        assert!((t.to_f64() - 492.0).abs() < 1e-25, "{t}");
    }

    #[test]
    fn direct_23_matches_class_polynomial_trace() {
        // Tr j(z_-23) = -3491750, so Tr j_1 = -3491750 - 3*744 = -3493982
        let f = tf(-23);
        let t = trace_direct(&f, 1, policy_precision(&f, 1)).unwrap();
        assert_eq!(t.round_half_away(), BigInt::from(-3493982i64));
        assert!(
            t.sub(&BigReal::from_i64(-3493982, 128)).abs().to_f64() < 1e-20,
            "{t}"
        );
    }

    #[test]
    fn direct_303_matches_published_trace() {
        let f = tf(-303);
        let t = trace_direct(&f, 1, policy_precision(&f, 1)).unwrap();
        let want: BigInt = "-561766949784377042888940".parse().unwrap();
        assert_eq!(t.round_half_away(), want);
        let margin = t
            .sub(&BigReal::from_bigint(&want, t.prec()))
            .abs()
            .to_f64();
        assert!(margin < 1e-6, "margin {margin}");
    }

    #[test]
    fn main_term_vanishes_for_twists() {
        let f = DiscFactorization::new(-20, 5).unwrap();
        assert_eq!(main_term(&f, 1).unwrap(), BigRational::from(BigInt::from(0)));
        let f = tf(-20);
        assert_eq!(
            main_term(&f, 1).unwrap(),
            BigRational::from(BigInt::from(-48))
        ); // h(-20) = 2
    }

    #[test]
    fn series_approaches_direct_for_small_d() {
        // x^(-1/3) convergence: at the default ceiling the deviation sits at
        // the ~0.1 scale; this checks conventions, not the spec tolerance
        let f = tf(-4);
        let s = trace_sinh_series_partial(&f, 1, 160, 1e-3, 1 << 16).unwrap();
        assert!((s.value.to_f64() - 492.0).abs() < 1.0, "{}", s.value);
        let f = tf(-3);
        let s = trace_sinh_series_partial(&f, 1, 160, 1e-3, 1 << 16).unwrap();
        assert!((s.value.to_f64() + 248.0).abs() < 1.0, "{}", s.value);
    }

    #[test]
    fn series_nonconvergence_signals() {
        let f = tf(-23);
        match trace_sinh_series(&f, 1, 128, 1e-9, 4096) {
            Err(Error::NonConvergence { cutoff, .. }) => assert!(cutoff <= 4096),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rect_empty_rectangle_is_main_term() {
        let f = tf(-4);
        let r = trace_rect(&f, 1, 1.0, 128, DEFAULT_RECT_CEILING).unwrap();
        // -24 * sigma_1(1) * h(-4) = -24/2 = -12
        assert!((r.value.to_f64() + 12.0).abs() < 1e-25);
        assert_eq!(r.points, 0);
    }

    #[test]
    fn rect_303_matches_independent_enumeration() {
        // frozen from two independent high-precision routes (CM enumeration
        // and the sinh-weighted half c-sum)
        let f = tf(-303);
        let y = 303f64.powf(-0.99);
        let r = trace_rect(&f, 1, y, 160, DEFAULT_RECT_CEILING).unwrap();
        let want = BigReal::parse("-561766949784377042888939.568329", 160).unwrap();
        let dev = r.value.sub(&want).abs().to_f64();
        assert!(dev < 5e-3, "value {} dev {dev}", r.value);
        assert_eq!(r.points, 2754);
        assert_eq!(
            r.nearest,
            "-561766949784377042888940".parse::<BigInt>().unwrap()
        );
    }

    #[test]
    fn rect_exp_sum_single_point() {
        // D=-4, Y=0.9: only z = i; e(-z) = e^(2 pi), e(-conj z) = e^(-2 pi)
        let f = tf(-4);
        let plus = rect_exp_sum(&f, 1, 0.9, 1, 128).unwrap();
        let want = arb::two_pi(160).exp();
        assert!(plus.sub(&want.round_to(128)).abs().div(&want).to_f64() < 1e-30);
        let minus = rect_exp_sum(&f, 1, 0.9, -1, 128).unwrap();
        let want = arb::two_pi(160).neg().exp();
        assert!(minus.sub(&want.round_to(128)).abs().div(&want).to_f64() < 1e-25);
    }

    #[test]
    fn rect_exp_sum_empty() {
        let f = tf(-3);
        for xi in [1i8, -1] {
            let v = rect_exp_sum(&f, 1, 2.0, xi, 128).unwrap();
            assert!(v.to_f64().abs() < 1e-30);
        }
    }

    #[test]
    fn rect_exp_sum_identity_samples() {
        // the assertion inside rect_exp_sum is the test: run a few tuples
        for (d, dd, m, y) in [
            (-20i64, 1i64, 1u32, 0.4f64),
            (-20, 5, 2, 0.25),
            (-23, 1, 1, 0.3),
            (-24, -3, 1, 0.35),
            (-303, 1, 1, 0.8),
        ] {
            let f = DiscFactorization::new(d, dd).unwrap();
            for xi in [1i8, -1] {
                rect_exp_sum(&f, m, y, xi, 128).unwrap();
            }
        }
    }

    #[test]
    fn compare_assembles_consistent_report() {
        let f = tf(-23);
        let opt = TraceOptions {
            series_tol: 0.05,
            series_ceiling: 1 << 15,
            rect_y: Some(1.0 / 23.0),
            ..Default::default()
        };
        let r = compare(&f, 1, &opt).unwrap();
        assert_eq!(r.nearest_integer, BigInt::from(-3493982i64));
        assert!(r.margin < 1e-10);
        assert!(!r.weight_caveat);
        // pairwise deviation must dominate each pair
        let ds = r.direct.sub(&r.series).abs().to_f64();
        assert!(r.max_pairwise_deviation >= ds);
        // the report flags y * m <= 1 as fine
        assert!(!r.y_warning);
    }

    #[test]
    fn twisted_direct_vs_series_loose() {
        // convention smoke test on a twisted pair
        let f = DiscFactorization::new(-20, 5).unwrap();
        let direct = trace_direct(&f, 1, 160).unwrap();
        let s = trace_sinh_series_partial(&f, 1, 160, 1e-3, 1 << 15).unwrap();
        let dev = direct.sub(&s.value).abs().to_f64();
        assert!(dev < 0.5, "direct {direct} series {} dev {dev}", s.value);
    }
}
