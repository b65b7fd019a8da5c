//! `BigComplex` and the exponential `e(z) = e^(2 pi i z)`.

use num_bigint::BigInt;

use super::real::{two_pi, BigReal, Prec};
use crate::error::{Error, Result};

/// Complex number with equal-precision real and imaginary parts.
#[derive(Debug, Clone)]
pub struct BigComplex {
    pub re: BigReal,
    pub im: BigReal,
}

impl BigComplex {
    pub fn new(re: BigReal, im: BigReal) -> Self {
        let p = re.prec().min(im.prec());
        BigComplex {
            re: re.round_to(p),
            im: im.round_to(p),
        }
    }

    pub fn zero(prec: Prec) -> Self {
        BigComplex {
            re: BigReal::zero(prec),
            im: BigReal::zero(prec),
        }
    }

    pub fn one(prec: Prec) -> Self {
        BigComplex {
            re: BigReal::one(prec),
            im: BigReal::zero(prec),
        }
    }

    pub fn from_real(re: BigReal) -> Self {
        let z = BigReal::zero(re.prec());
        BigComplex { re, im: z }
    }

    pub fn prec(&self) -> Prec {
        self.re.prec().min(self.im.prec())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        BigComplex {
            re: self.re.add(&rhs.re),
            im: self.im.add(&rhs.im),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        BigComplex {
            re: self.re.sub(&rhs.re),
            im: self.im.sub(&rhs.im),
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let re = self.re.mul(&rhs.re).sub(&self.im.mul(&rhs.im));
        let im = self.re.mul(&rhs.im).add(&self.im.mul(&rhs.re));
        BigComplex { re, im }
    }

    pub fn scale(&self, k: &BigReal) -> Self {
        BigComplex {
            re: self.re.mul(k),
            im: self.im.mul(k),
        }
    }

    pub fn scale_i64(&self, k: i64) -> Self {
        BigComplex {
            re: self.re.mul_i64(k),
            im: self.im.mul_i64(k),
        }
    }

    pub fn mul_bigint(&self, k: &BigInt) -> Self {
        let kb = BigReal::from_bigint(k, self.prec());
        self.scale(&kb)
    }

    pub fn conj(&self) -> Self {
        BigComplex {
            re: self.re.clone(),
            im: self.im.neg(),
        }
    }

    pub fn neg(&self) -> Self {
        BigComplex {
            re: self.re.neg(),
            im: self.im.neg(),
        }
    }

    pub fn abs2(&self) -> BigReal {
        self.re.mul(&self.re).add(&self.im.mul(&self.im))
    }

    pub fn abs(&self) -> BigReal {
        self.abs2().sqrt()
    }

    pub fn recip(&self) -> Self {
        let d = self.abs2();
        BigComplex {
            re: self.re.div(&d),
            im: self.im.neg().div(&d),
        }
    }

    pub fn div(&self, rhs: &Self) -> Self {
        self.mul(&rhs.recip())
    }

    /// Integer power by binary exponentiation.
    pub fn powi(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.prec());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }
}

/// `e(z) = e^(2 pi i z)` at `prec` bits.
///
/// For `z = x + iy` this is `e^(-2 pi y) (cos 2 pi x + i sin 2 pi x)`; the
/// modulus is `e^(-2 pi y)` up to rounding. The real part of the phase
/// argument is reduced mod 1 exactly before multiplying by 2 pi.
pub fn e_of(z: &BigComplex, prec: Prec) -> Result<BigComplex> {
    let mag = z.im.to_f64().abs() * (2.0 * std::f64::consts::PI) * std::f64::consts::LOG2_E;
    if mag > (i32::MAX / 4) as f64 {
        return Err(Error::Overflow(format!(
            "e(z) with 2 pi |Im z| log2(e) = {mag:.3e} exceeds the exponent range"
        )));
    }
    let pw = prec + 16;
    let tp = two_pi(pw);
    // fractional part of x, exactly
    let x = z.re.round_to(pw);
    let frac = x.sub(&BigReal::from_bigint(&x.floor_bigint(), pw));
    let theta = frac.mul(&tp);
    let r = z.im.round_to(pw).mul(&tp).neg().exp();
    Ok(BigComplex {
        re: theta.cos().mul(&r).round_to(prec),
        im: theta.sin().mul(&r).round_to(prec),
    })
}

/// `e(a/b)` for an exact rational phase: the primitive root-of-unity power.
pub fn e_rational(num: i64, den: u64, prec: Prec) -> BigComplex {
    let pw = prec + 16;
    let tp = two_pi(pw);
    let mut r = num % den as i64;
    if r < 0 {
        r += den as i64;
    }
    let theta = tp.mul_i64(r).div_u64(den);
    BigComplex {
        re: theta.cos().round_to(prec),
        im: theta.sin().round_to(prec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_of_zero_is_one() {
        let z = BigComplex::zero(128);
        let r = e_of(&z, 128).unwrap();
        assert!(r.re.sub(&BigReal::one(128)).abs().to_f64() < 1e-35);
        assert!(r.im.abs().to_f64() < 1e-35);
    }

    #[test]
    fn e_of_half_is_minus_one() {
        let z = BigComplex::new(BigReal::from_f64(0.5, 128), BigReal::zero(128));
        let r = e_of(&z, 128).unwrap();
        assert!(r.re.add(&BigReal::one(128)).abs().to_f64() < 1e-35);
        assert!(r.im.abs().to_f64() < 1e-35);
    }

    #[test]
    fn e_of_i_matches_reference() {
        // e(i) = e^(-2 pi) = 0.001867442731707988814430212934827...
        let z = BigComplex::new(BigReal::zero(192), BigReal::one(192));
        let r = e_of(&z, 192).unwrap();
        let want = BigReal::parse("1.867442731707988814430212934827030393423e-3", 192).unwrap();
        let err = r.re.sub(&want).abs().to_f64();
        assert!(err < 1e-38, "err {err}");
        assert!(r.im.abs().to_f64() < 1e-50);
    }

    #[test]
    fn modulus_law() {
        // |e(z)| = e^(-2 pi Im z)
        let z = BigComplex::new(BigReal::from_f64(0.3, 160), BigReal::from_f64(2.25, 160));
        let r = e_of(&z, 160).unwrap();
        let want = BigReal::from_f64(2.25, 160)
            .mul(&two_pi(160))
            .neg()
            .exp();
        let rel = r.abs().sub(&want).abs().div(&want).to_f64();
        assert!(rel < 1e-40, "rel {rel}");
    }

    #[test]
    fn rational_phase_agrees_with_e_of() {
        for (n, d) in [(1i64, 3u64), (5, 8), (-7, 12), (13, 4)] {
            let a = e_rational(n, d, 160);
            let z = BigComplex::new(
                BigReal::from_i64(n, 160).div_u64(d),
                BigReal::zero(160),
            );
            let b = e_of(&z, 160).unwrap();
            assert!(a.sub(&b).abs().to_f64() < 1e-40);
        }
    }

    #[test]
    fn overflow_signalled() {
        let z = BigComplex::new(BigReal::zero(64), BigReal::from_f64(1e9, 64));
        assert!(matches!(e_of(&z, 64), Err(Error::Overflow(_))));
    }
}
