//! The residue ring ℤ/p^βℤ for an odd prime p and its cyclic unit group.
//!
//! For odd p the unit group (ℤ/p^βℤ)^× is cyclic of order φ(p^β) = p^{β−1}(p−1).
//! [`UnitGroup`] stores a generator together with a complete discrete-log table,
//! which turns every multiplicative sum over units into a sum over ℤ/φℤ — the key
//! device behind both the character enumeration and the FFT Kloosterman convolution.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResidueError {
    /// p = 2 (or p not an odd prime): the unit group need not be cyclic.
    #[error("unit group of {0}^{1} is not cyclic (p must be an odd prime)")]
    NotCyclic(u64, u32),
    /// p^β exceeds the supported integer width / table budget.
    #[error("modulus {0}^{1} overflows the supported range")]
    Overflow(u64, u32),
}

/// Largest modulus for which we are willing to build dlog tables (memory guard).
const MAX_MODULUS: u64 = 1 << 28;

/// A prime-power modulus p^β with p an odd prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimePowerModulus {
    pub p: u64,
    pub beta: u32,
    pub modulus: u64,
    /// α = β/2, defined exactly when β is even (Salié parameter).
    pub alpha: Option<u32>,
}

impl PrimePowerModulus {
    pub fn new(p: u64, beta: u32) -> Result<Self, ResidueError> {
        if p < 3 || p % 2 == 0 || !is_prime(p) {
            return Err(ResidueError::NotCyclic(p, beta));
        }
        if beta == 0 {
            return Err(ResidueError::Overflow(p, beta));
        }
        let modulus = p
            .checked_pow(beta)
            .filter(|&m| m <= MAX_MODULUS)
            .ok_or(ResidueError::Overflow(p, beta))?;
        let alpha = if beta % 2 == 0 { Some(beta / 2) } else { None };
        Ok(Self {
            p,
            beta,
            modulus,
            alpha,
        })
    }

    /// φ(p^β) = p^{β−1}(p − 1).
    pub fn phi(&self) -> u64 {
        (self.modulus / self.p) * (self.p - 1)
    }

    /// φ(p^{β−1}); φ(1) = 1 when β = 1.
    pub fn phi_lower(&self) -> u64 {
        if self.beta == 1 {
            1
        } else {
            let lower = self.modulus / self.p;
            (lower / self.p) * (self.p - 1)
        }
    }

    /// φ*(p^β) = φ(p^β) − φ(p^{β−1}), the number of primitive characters mod p^β.
    pub fn phi_star(&self) -> u64 {
        self.phi() - self.phi_lower()
    }
}

/// Trial-division primality check; moduli here are always small.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// a·b mod m without overflow.
#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// a^e mod m by binary exponentiation.
pub fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    a %= m;
    let mut r = 1 % m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    r
}

/// Modular inverse of a unit via the extended Euclidean algorithm.
pub fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    debug_assert_eq!(r0, 1, "inv_mod of a non-unit");
    t0.rem_euclid(m as i128) as u64
}

/// The cyclic unit group (ℤ/p^βℤ)^× with generator and discrete-log table.
#[derive(Debug, Clone)]
pub struct UnitGroup {
    pub modulus: PrimePowerModulus,
    /// Smallest positive primitive root mod p², which generates mod p^β for all β.
    pub generator: u64,
    /// φ(p^β).
    pub order: u64,
    /// dlog[x] = k with generator^k ≡ x, or u32::MAX for non-units.
    dlog: Vec<u32>,
    /// roots[k] = e(k/φ), the φ-th roots of unity; χ_t(g^k) = roots[(t·k) mod φ].
    roots: Vec<Complex64>,
}

/// Sentinel marking non-units in the dlog table.
const NOT_A_UNIT: u32 = u32::MAX;

impl UnitGroup {
    /// Value of the group's discrete log at x, or `None` if p | x.
    #[inline]
    pub fn dlog(&self, x: u64) -> Option<u64> {
        let d = self.dlog[(x % self.modulus.modulus) as usize];
        (d != NOT_A_UNIT).then_some(d as u64)
    }

    /// e(k/φ) lookup with k taken mod φ.
    #[inline]
    pub fn root_of_unity(&self, k: u64) -> Complex64 {
        self.roots[(k % self.order) as usize]
    }

    /// All unit residues in [1, p^β), in increasing order.
    pub fn units(&self) -> impl Iterator<Item = u64> + '_ {
        (1..self.modulus.modulus).filter(|&x| x % self.modulus.p != 0)
    }

    /// generator^k mod p^β.
    pub fn gen_pow(&self, k: u64) -> u64 {
        pow_mod(self.generator, k % self.order, self.modulus.modulus)
    }
}

/// Build the unit group: find the smallest primitive root mod p² (a generator for
/// every β) and tabulate discrete logs and roots of unity.
pub fn build_unit_group(m: PrimePowerModulus) -> Result<UnitGroup, ResidueError> {
    let g = smallest_primitive_root_mod_p2(m.p);
    let order = m.phi();
    let modulus = m.modulus;
    let mut dlog = vec![NOT_A_UNIT; modulus as usize];
    let mut x = 1u64;
    for k in 0..order {
        debug_assert_eq!(dlog[x as usize], NOT_A_UNIT);
        dlog[x as usize] = k as u32;
        x = mul_mod(x, g % modulus, modulus);
    }
    debug_assert_eq!(x, 1, "generator order mismatch");
    let roots = (0..order)
        .map(|k| Complex64::from_polar(1.0, crate::TWO_PI * k as f64 / order as f64))
        .collect();
    Ok(UnitGroup {
        modulus: m,
        generator: g % modulus,
        order,
        dlog,
        roots,
    })
}

/// Smallest g ≥ 2 of exact order φ(p²) = p(p−1) mod p²; standard lifting then makes
/// g a generator mod p^β for every β ≥ 1.
fn smallest_primitive_root_mod_p2(p: u64) -> u64 {
    let m = p * p;
    let phi = p * (p - 1);
    let mut prime_factors = vec![p];
    let mut n = p - 1;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            prime_factors.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        prime_factors.push(n);
    }
    'outer: for g in 2..m {
        if g % p == 0 {
            continue;
        }
        for &q in &prime_factors {
            if pow_mod(g, phi / q, m) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("every odd prime square has a primitive root");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_mod_5_and_25() {
        // Brute-force order checks fix generator 2 of order 4 mod 5 and order 20 mod 25.
        let g1 = build_unit_group(PrimePowerModulus::new(5, 1).unwrap()).unwrap();
        assert_eq!(g1.generator, 2);
        assert_eq!(g1.order, 4);
        let g2 = build_unit_group(PrimePowerModulus::new(5, 2).unwrap()).unwrap();
        assert_eq!(g2.generator, 2);
        assert_eq!(g2.order, 20);
    }

    #[test]
    fn generator_mod_3() {
        // (ℤ/3)^× = {1, 2}.
        let g = build_unit_group(PrimePowerModulus::new(3, 1).unwrap()).unwrap();
        assert_eq!(g.generator, 2);
        assert_eq!(g.order, 2);
    }

    #[test]
    fn p_equal_2_rejected() {
        assert_eq!(
            PrimePowerModulus::new(2, 3).unwrap_err(),
            ResidueError::NotCyclic(2, 3)
        );
    }

    #[test]
    fn half_order_power_is_minus_one() {
        for (p, beta) in [(5u64, 3u32), (7, 2), (11, 1), (3, 4)] {
            let g = build_unit_group(PrimePowerModulus::new(p, beta).unwrap()).unwrap();
            assert_eq!(
                g.gen_pow(g.order / 2),
                g.modulus.modulus - 1,
                "g^(φ/2) must be −1 mod {}^{}",
                p,
                beta
            );
        }
    }

    #[test]
    fn dlog_roundtrip_random_units() {
        let g = build_unit_group(PrimePowerModulus::new(7, 3).unwrap()).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED);
        for _ in 0..10_000 {
            let x: u64 = rng.gen_range(1..g.modulus.modulus);
            if x % 7 == 0 {
                continue;
            }
            let k = g.dlog(x).expect("unit must have a dlog");
            assert_eq!(g.gen_pow(k), x);
        }
    }

    #[test]
    fn phi_star_formula() {
        let m = PrimePowerModulus::new(5, 3).unwrap();
        assert_eq!(m.phi(), 100);
        assert_eq!(m.phi_lower(), 20);
        assert_eq!(m.phi_star(), 80);
        let m1 = PrimePowerModulus::new(5, 1).unwrap();
        assert_eq!(m1.phi_star(), 3);
    }

    #[test]
    fn inverse_and_pow() {
        let m = 343;
        for a in 1..m {
            if a % 7 == 0 {
                continue;
            }
            assert_eq!(mul_mod(a, inv_mod(a, m), m), 1);
        }
        assert_eq!(pow_mod(2, 10, 1_000_000), 1024);
    }
}
