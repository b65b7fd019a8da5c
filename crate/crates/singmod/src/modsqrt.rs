//! Square roots of a discriminant modulo arbitrary moduli.
//!
//! The rectangle enumeration and the Weyl sums both need every `b (mod n)`
//! with `b^2 = D (mod n)`. Roots are found by factoring `n`, solving modulo
//! each prime power (Tonelli-Shanks plus Hensel lifting for odd primes,
//! explicit casework for powers of two), and recombining with the CRT.

use crate::error::{Error, Result};

/// Smallest-prime-factor sieve for fast repeated factorization.
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut j = i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfSieve { spf }
    }

    pub fn limit(&self) -> u64 {
        (self.spf.len() - 1) as u64
    }

    /// Prime factorization (p, e) pairs, ascending in p.
    pub fn factor(&self, mut n: u64) -> Vec<(u64, u32)> {
        assert!(n >= 1 && n <= self.limit());
        let mut out = Vec::new();
        while n > 1 {
            let p = self.spf[n as usize] as u64;
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        out
    }
}

/// Trial-division factorization for one-off moduli.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Modular inverse of a mod m (gcd(a, m) = 1), by extended gcd.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let q = r / new_r;
        t -= q * new_t;
        std::mem::swap(&mut t, &mut new_t);
        r -= q * new_r;
        std::mem::swap(&mut r, &mut new_r);
    }
    if r != 1 {
        return None;
    }
    let mut t = t % m as i128;
    if t < 0 {
        t += m as i128;
    }
    Some(t as u64)
}

/// Tonelli-Shanks: a square root of `a` mod odd prime `p`, if one exists.
fn sqrt_mod_prime(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    // write p-1 = q 2^s
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    // find a non-residue
    let mut z = 2;
    while pow_mod(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mul_mod(tt, tt, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

/// All square roots of `a` modulo `p^e` for odd prime `p`.
fn sqrt_mod_odd_prime_power(a_in: i64, p: u64, e: u32) -> Vec<u64> {
    let pe: u64 = p.pow(e);
    let a = a_in.rem_euclid(pe as i64) as u64;
    if a == 0 {
        // roots are the multiples of p^ceil(e/2)
        let step = p.pow(e.div_ceil(2));
        return (0..pe / step).map(|k| k * step).collect();
    }
    // strip the p-part of a
    let mut s = 0u32;
    let mut a0 = a;
    while a0 % p == 0 {
        a0 /= p;
        s += 1;
    }
    if s % 2 == 1 {
        return Vec::new();
    }
    // roots of a0 mod p^(e-s), then scale by p^(s/2)
    let f = e - s;
    let r0 = match sqrt_mod_prime(a0 % p, p) {
        Some(r) => r,
        None => return Vec::new(),
    };
    // Hensel lift r to mod p^f
    let pf = p.pow(f);
    let mut modulus = p;
    let mut r = r0;
    while modulus < pf {
        let next = pf.min(modulus.saturating_mul(modulus));
        // r <- r - (r^2 - a0) * inv(2r)  (mod next)
        let r2 = mul_mod(r, r, next);
        let a0n = a0 % next;
        let diff = (r2 + next - a0n) % next;
        let inv2r = inv_mod((2 * r) % next, next).expect("2r invertible");
        r = (r + next - mul_mod(diff, inv2r, next)) % next;
        modulus = next;
    }
    let ph = p.pow(s / 2);
    let pes = p.pow(e - s / 2); // distinct scaled roots live mod p^(e - s/2)
    let mut out = Vec::new();
    // x = p^(s/2) * (r_sign + t p^f), t mod p^(s/2)
    for base in [r % pf, (pf - r % pf) % pf] {
        let mut t = 0u64;
        loop {
            let inner = (base as u128 + t as u128 * pf as u128) % pes as u128;
            out.push((ph as u128 * inner % pe as u128) as u64);
            t += 1;
            if t >= p.pow(s / 2) {
                break;
            }
        }
        if base == (pf - base) % pf {
            break; // ±r coincide mod p^f
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// All square roots of `a` modulo `2^e`.
fn sqrt_mod_power_of_two(a_in: i64, e: u32) -> Vec<u64> {
    let m: u64 = 1 << e;
    let a = a_in.rem_euclid(m as i64) as u64;
    if e == 1 {
        return vec![a & 1];
    }
    if a == 0 {
        let step = 1u64 << e.div_ceil(2);
        return (0..m / step).map(|k| k * step).collect();
    }
    let s = a.trailing_zeros();
    if s % 2 == 1 {
        return Vec::new();
    }
    let a0 = a >> s;
    let f = e - s;
    // roots of odd a0 mod 2^f
    let base_roots: Vec<u64> = if f == 1 {
        vec![1]
    } else if f == 2 {
        if a0 % 4 == 1 {
            vec![1, 3]
        } else {
            return Vec::new();
        }
    } else {
        if a0 % 8 != 1 {
            return Vec::new();
        }
        // lift from mod 8 upward: keep r odd with r^2 = a0 (mod 2^(k+1))
        let mut r: u64 = 1;
        let mut k = 3u32;
        while k < f {
            let modn = 1u64 << (k + 1);
            if mul_mod(r, r, modn) != a0 % modn {
                r += 1 << (k - 1);
            }
            k += 1;
        }
        let h = 1u64 << (f - 1);
        let mf = 1u64 << f;
        let mut v = vec![r % mf, (mf - r) % mf, (r + h) % mf, (mf - (r + h) % mf) % mf];
        v.sort_unstable();
        v.dedup();
        v
    };
    let half = 1u64 << (s / 2);
    let modr = 1u64 << (e - s / 2);
    let step = 1u64 << f;
    let mut out = Vec::new();
    for r in base_roots {
        let mut x = r;
        while x < modr {
            out.push((half * x) % m);
            x += step;
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// All `b mod n` with `b^2 = d (mod n)`, given the factorization of `n`.
///
/// The returned list is sorted. `ceiling` caps the number of roots
/// (CRT recombination is a product over prime powers).
pub fn sqrts_mod_factored(d: i64, factors: &[(u64, u32)], ceiling: usize) -> Result<Vec<u64>> {
    let mut roots: Vec<u64> = vec![0];
    let mut modulus: u64 = 1;
    for &(p, e) in factors {
        let pe = p.pow(e);
        let local = if p == 2 {
            sqrt_mod_power_of_two(d, e)
        } else {
            sqrt_mod_odd_prime_power(d, p, e)
        };
        if local.is_empty() {
            return Ok(Vec::new());
        }
        if roots.len() * local.len() > ceiling {
            return Err(Error::ResourceCeiling {
                what: "square-root count in CRT recombination",
                needed: (roots.len() * local.len()) as u64,
                ceiling: ceiling as u64,
            });
        }
        // CRT: combine roots mod `modulus` with roots mod p^e
        let m1 = modulus;
        let m2 = pe;
        let inv = inv_mod(m1 % m2, m2).expect("coprime moduli");
        let mut next = Vec::with_capacity(roots.len() * local.len());
        for &r1 in &roots {
            for &r2 in &local {
                // x = r1 + m1 * ((r2 - r1) * inv mod m2)
                let diff = ((r2 as i128 - r1 as i128).rem_euclid(m2 as i128)) as u64;
                let k = mul_mod(diff, inv, m2);
                next.push(r1 + m1 * k);
            }
        }
        roots = next;
        modulus *= pe;
    }
    roots.sort_unstable();
    Ok(roots)
}

/// All `b mod n` with `b^2 = d (mod n)`, factoring `n` by trial division.
pub fn sqrts_mod(d: i64, n: u64, ceiling: usize) -> Result<Vec<u64>> {
    if n == 1 {
        return Ok(vec![0]);
    }
    sqrts_mod_factored(d, &factor_u64(n), ceiling)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(d: i64, n: u64) -> Vec<u64> {
        (0..n)
            .filter(|&b| ((b as i128 * b as i128 - d as i128).rem_euclid(n as i128)) == 0)
            .collect()
    }

    #[test]
    fn matches_brute_force_small_moduli() {
        for n in 1..=200u64 {
            for d in [-303i64, -23, -4, -3, -20, 0, 1, 9, 12, -48, 100] {
                let got = sqrts_mod(d, n, 1 << 20).unwrap();
                let want = brute(d, n);
                assert_eq!(got, want, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn matches_brute_force_prime_powers() {
        for (p, e) in [(2u64, 10u32), (3, 6), (5, 4), (7, 3), (11, 3), (13, 2)] {
            let n = p.pow(e);
            for d in [-303i64, -4, -175, 49, 98, 243, -12, 0] {
                let got = sqrts_mod(d, n, 1 << 20).unwrap();
                let want = brute(d, n);
                assert_eq!(got, want, "d={d} p={p}^{e}");
            }
        }
    }

    #[test]
    fn sieve_factorization() {
        let sieve = SpfSieve::new(10_000);
        for n in [2u64, 12, 360, 9973, 9999, 1024] {
            let f = sieve.factor(n);
            let back: u64 = f.iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(back, n);
            assert_eq!(f, factor_u64(n));
        }
    }

    #[test]
    fn larger_random_moduli_match_brute() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..80 {
            let n = rng.gen_range(2u64..5000);
            let d = rng.gen_range(-2000i64..500);
            let got = sqrts_mod(d, n, 1 << 20).unwrap();
            assert_eq!(got, brute(d, n), "d={d} n={n}");
        }
    }
}
