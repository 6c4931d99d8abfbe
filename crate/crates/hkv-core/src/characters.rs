//! Dirichlet characters of prime-power modulus and their Gauss sums.
//!
//! Since (ℤ/p^βℤ)^× is cyclic with generator g, every character is χ_t with
//! χ_t(g^k) = e(tk/φ(p^β)) for an index t ∈ ℤ/φℤ. Parity and primitivity read off
//! the index: χ_t is even iff t is even (because g^{φ/2} ≡ −1), and primitive iff
//! p ∤ t for β ≥ 2 (t ≠ 0 for β = 1).
//!
//! The Gauss sum is τ(χ) = Σ_{a mod p^β} χ(a) e(a/p^β); for primitive χ it has
//! modulus p^{β/2}, and for even χ it satisfies τ(χ̄) = conj τ(χ).

use crate::residue::UnitGroup;
use crate::sum::ComplexSum;
use num_complex::Complex64;
use std::sync::Arc;

/// A Dirichlet character mod p^β, indexed against the group generator.
#[derive(Debug, Clone)]
pub struct DirichletCharacter {
    pub group: Arc<UnitGroup>,
    /// χ(g^k) = e(t·k/φ).
    pub index: u64,
    pub even: bool,
    pub primitive: bool,
}

/// Filter for [`list_characters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharacterFilter {
    All,
    Primitive,
    PrimitiveEven,
}

impl DirichletCharacter {
    pub fn new(group: Arc<UnitGroup>, index: u64) -> Self {
        let order = group.order;
        let t = index % order;
        let even = t % 2 == 0;
        let primitive = if group.modulus.beta >= 2 {
            t % group.modulus.p != 0
        } else {
            t != 0
        };
        Self {
            group,
            index: t,
            even,
            primitive,
        }
    }

    /// χ(x); zero when p | x.
    #[inline]
    pub fn eval(&self, x: u64) -> Complex64 {
        match self.group.dlog(x) {
            Some(k) => self.group.root_of_unity(self.index * k % self.group.order),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// χ evaluated on a signed integer (reduced into the period first).
    pub fn eval_i64(&self, x: i64) -> Complex64 {
        let m = self.group.modulus.modulus as i64;
        self.eval(x.rem_euclid(m) as u64)
    }

    /// The conjugate character χ̄ = χ_{−t}.
    pub fn conj(&self) -> Self {
        let order = self.group.order;
        Self::new(self.group.clone(), (order - self.index) % order)
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus.modulus
    }

    pub fn is_trivial(&self) -> bool {
        self.index == 0
    }
}

/// Enumerate the characters mod p^β under a filter. Counts: `Primitive` yields
/// φ*(p^β) characters; `PrimitiveEven` yields φ*(p^β)/2 for β ≥ 2 and (p−3)/2 for β = 1.
pub fn list_characters(group: &Arc<UnitGroup>, filter: CharacterFilter) -> Vec<DirichletCharacter> {
    (0..group.order)
        .map(|t| DirichletCharacter::new(group.clone(), t))
        .filter(|chi| match filter {
            CharacterFilter::All => true,
            CharacterFilter::Primitive => chi.primitive,
            CharacterFilter::PrimitiveEven => chi.primitive && chi.even,
        })
        .collect()
}

/// τ(χ) = Σ_{a mod p^β} χ(a) e(a/p^β) by direct compensated summation.
pub fn gauss_sum(chi: &DirichletCharacter) -> Complex64 {
    let m = chi.group.modulus.modulus;
    let mut acc = ComplexSum::new();
    for a in chi.group.units() {
        acc += chi.eval(a) * crate::e(a as f64 / m as f64);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::{build_unit_group, PrimePowerModulus};

    fn group(p: u64, beta: u32) -> Arc<UnitGroup> {
        Arc::new(build_unit_group(PrimePowerModulus::new(p, beta).unwrap()).unwrap())
    }

    #[test]
    fn character_counts_mod_125() {
        // φ*(125) = 100 − 20 = 80, and half of the primitive characters are even.
        let g = group(5, 3);
        assert_eq!(list_characters(&g, CharacterFilter::Primitive).len(), 80);
        assert_eq!(list_characters(&g, CharacterFilter::PrimitiveEven).len(), 40);
    }

    #[test]
    fn one_primitive_even_character_mod_5() {
        // Enumerating mod 5: only the quadratic character is even and nontrivial.
        let g = group(5, 1);
        let pe = list_characters(&g, CharacterFilter::PrimitiveEven);
        assert_eq!(pe.len(), 1);
        assert_eq!(pe[0].index, 2);
    }

    #[test]
    fn quadratic_gauss_sum_mod_5_is_sqrt_5() {
        // 5 ≡ 1 mod 4 forces a real positive Gauss sum √5 for the quadratic character.
        let g = group(5, 1);
        let chi = DirichletCharacter::new(g, 2);
        let tau = gauss_sum(&chi);
        assert!((tau.re - 5.0f64.sqrt()).abs() < 1e-12, "τ = {}", tau);
        assert!(tau.im.abs() < 1e-12);
    }

    #[test]
    fn trivial_gauss_sum_mod_5_is_minus_one() {
        // Σ_{a=1}^{4} e(a/5) = −1 (full set of nontrivial 5th roots of unity).
        let g = group(5, 1);
        let chi = DirichletCharacter::new(g, 0);
        let tau = gauss_sum(&chi);
        assert!((tau - Complex64::new(-1.0, 0.0)).norm() < 1e-12, "τ = {}", tau);
    }

    #[test]
    fn primitive_gauss_sums_have_modulus_sqrt_q() {
        let g = group(5, 2);
        for chi in list_characters(&g, CharacterFilter::Primitive) {
            let tau = gauss_sum(&chi);
            assert!(
                (tau.norm_sqr() - 25.0).abs() < 1e-10,
                "|τ|² = {} for t = {}",
                tau.norm_sqr(),
                chi.index
            );
        }
    }

    #[test]
    fn even_characters_conjugate_gauss_sum() {
        let g = group(7, 2);
        for chi in list_characters(&g, CharacterFilter::All) {
            if !chi.even {
                continue;
            }
            let lhs = gauss_sum(&chi.conj());
            let rhs = gauss_sum(&chi).conj();
            assert!((lhs - rhs).norm() < 1e-10, "t = {}", chi.index);
        }
    }

    #[test]
    fn parity_matches_value_at_minus_one() {
        let g = group(7, 2);
        for chi in list_characters(&g, CharacterFilter::All) {
            let at = chi.eval(g.modulus.modulus - 1);
            let expected = if chi.even { 1.0 } else { -1.0 };
            assert!((at.re - expected).abs() < 1e-12 && at.im.abs() < 1e-12);
        }
    }
}
