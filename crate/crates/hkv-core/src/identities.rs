//! Machine verification of the finite character/exponential-sum identities.
//!
//! The suite covers:
//! * QO — quasi-orthogonality of primitive even characters: Σ_{χ prim even} χ(m)
//!   takes the three-case value φ*(p^β)/2, −φ(p^{β−1})/2, 0 according to whether
//!   m ≡ ±1 mod p^β, mod p^{β−1} only, or neither (β = 1 variant with −1 off ±1);
//! * SOGS — sums of Gauss-sum powers: Σ_{χ prim even} χ̄(r) τ(χ)^n equals
//!   (φ(p^β)/2)·Kl_n(±r, p^β) for β ≥ 2, with the (φ(p)/2 − 1)·Kl_n(±r, p) − (−1)^n
//!   correction at β = 1;
//! * lcAC — the n = 1 specialization expressing e(m/p^β) + e(−m/p^β) through
//!   Gauss sums;
//! * gauss_twist — Σ_{h} χ̄(h) e(−xh/p^β) = χ(−x) τ(χ̄) for primitive χ;
//! * hK2 — Σ_{x:(x/p)_n=1} χ(x) Kl_n(x, p^β) = τ(χ)^n for primitive even χ;
//! * hKsum — Σ_x Kl_n(x, p^β) Kl_n(±mx, p^β) = p^{βn}·(2/φ(p^β))·Σ_{χ prim even} χ̄(m)
//!   for β ≥ 4.
//!
//! Sweeps are exhaustive for p^β ≤ 5⁴ and sampled (1000 random classes, fixed seed
//! 0x5EED) above, so reports are reproducible run to run.

use crate::characters::{gauss_sum, list_characters, CharacterFilter, DirichletCharacter};
use crate::kloosterman::{kloosterman_table, power_residue_symbol, Method};
use crate::residue::{mul_mod, UnitGroup};
use crate::sum::ComplexSum;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Identity being verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum IdentityId {
    QO,
    SOGS,
    lcAC,
    GaussTwist,
    hK2,
    hKsum,
}

/// Result of one identity sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity_id: IdentityId,
    pub p: u64,
    pub beta: u32,
    pub n: Option<u32>,
    /// Worst residual over all swept cases, in the identity's natural scaling.
    pub max_abs_residual: f64,
    pub cases_checked: u64,
    pub exhaustive: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// Exhaustive below this modulus bound, sampled above.
const EXHAUSTIVE_LIMIT: u64 = 625;
const SAMPLE_COUNT: usize = 1000;
pub const SWEEP_SEED: u64 = 0x5EED;

/// Classes to sweep: all units when the modulus is small, else a fixed-seed sample.
fn sweep_classes(g: &UnitGroup) -> (Vec<u64>, bool) {
    let m = g.modulus.modulus;
    if m <= EXHAUSTIVE_LIMIT {
        (g.units().collect(), true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);
        let classes = (0..SAMPLE_COUNT)
            .map(|_| loop {
                let c = rng.gen_range(1..m);
                if c % g.modulus.p != 0 {
                    break c;
                }
            })
            .collect();
        (classes, false)
    }
}

/// QO: the quasi-orthogonality value of Σ_{χ prim even} χ(m).
pub fn qo_predicted(g: &UnitGroup, m: u64) -> f64 {
    let md = &g.modulus;
    let pb = md.modulus;
    let m = m % pb;
    if m % md.p == 0 {
        return 0.0;
    }
    if md.beta >= 2 {
        let lower = pb / md.p;
        if m == 1 || m == pb - 1 {
            md.phi_star() as f64 / 2.0
        } else if m % lower == 1 || m % lower == lower - 1 {
            -(md.phi_lower() as f64) / 2.0
        } else {
            0.0
        }
    } else if m == 1 || m == pb - 1 {
        (md.phi() as f64) / 2.0 - 1.0
    } else {
        -1.0
    }
}

pub fn verify_qo(group: &Arc<UnitGroup>) -> IdentityReport {
    let chars = list_characters(group, CharacterFilter::PrimitiveEven);
    let (classes, exhaustive) = sweep_classes(group);
    let mut worst = 0.0f64;
    for &m in &classes {
        let mut acc = ComplexSum::new();
        for chi in &chars {
            acc += chi.eval(m);
        }
        let lhs = acc.total();
        let rhs = Complex64::new(qo_predicted(group, m), 0.0);
        worst = worst.max((lhs - rhs).norm());
    }
    report(IdentityId::QO, group, None, worst, classes.len() as u64, exhaustive, 1e-8)
}

/// Shared precomputation: Gauss sums of all primitive even characters mod p^β.
fn prim_even_with_tau(group: &Arc<UnitGroup>) -> Vec<(DirichletCharacter, Complex64)> {
    list_characters(group, CharacterFilter::PrimitiveEven)
        .into_iter()
        .map(|chi| {
            let tau = gauss_sum(&chi);
            (chi, tau)
        })
        .collect()
}

fn tau_pow(tau: Complex64, n: u32) -> Complex64 {
    let mut r = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        r *= tau;
    }
    r
}

pub fn verify_sogs(group: &Arc<UnitGroup>, n: u32) -> IdentityReport {
    let md = group.modulus;
    let chars = prim_even_with_tau(group);
    let kl = kloosterman_table(group, n, Method::Dp);
    let (classes, exhaustive) = sweep_classes(group);
    // natural magnitude p^{β(n+1)/2} = (p^β)^{(n+1)/2}
    let scale = (md.modulus as f64).powf((n as f64 + 1.0) / 2.0);
    let mut worst = 0.0f64;
    for &r in &classes {
        let mut acc = ComplexSum::new();
        for (chi, tau) in &chars {
            acc += chi.conj().eval(r) * tau_pow(*tau, n);
        }
        let lhs = acc.total();
        let pm = kl[group.dlog(r).unwrap() as usize]
            + kl[group.dlog(md.modulus - r).unwrap() as usize];
        // For β = 1 the quasi-orthogonality relation forces the coefficient φ(p)/2
        // on the Kloosterman pair (the same coefficient as β ≥ 2), with the extra
        // −(−1)^n correction; see verify_qo, whose three case values imply
        //   Σ_χ χ̄(r)τ(χ)^n = (φ(p)/2 − 1)·Kl_n(±r) − (Σ_{coprime tuples ≢ ±r})
        // and the complementary tuple sum equals (−1)^n − Kl_n(±r).
        let rhs = if md.beta >= 2 {
            pm * (md.phi() as f64 / 2.0)
        } else {
            pm * (md.phi() as f64 / 2.0) - if n % 2 == 0 { 1.0 } else { -1.0 }
        };
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    report(IdentityId::SOGS, group, Some(n), worst, classes.len() as u64, exhaustive, 1e-8)
}

/// lcAC: e(m/p^β) + e(−m/p^β) = (2/φ(p^β)) Σ_{χ prim even} χ̄(m) τ(χ) for β ≥ 2,
/// with the β = 1 variant (2/φ(p))(Σ χ̄(m)τ(χ) + (−1)^n), n = 1, obtained by
/// inverting the β = 1 Gauss-sum relation of `verify_sogs`.
pub fn verify_lcac(group: &Arc<UnitGroup>) -> IdentityReport {
    let md = group.modulus;
    if md.beta == 1 {
        assert!(md.p >= 5, "β = 1 needs a nonempty primitive even character set");
    }
    let chars = prim_even_with_tau(group);
    let (classes, exhaustive) = sweep_classes(group);
    let mut worst = 0.0f64;
    for &m in &classes {
        let mut acc = ComplexSum::new();
        for (chi, tau) in &chars {
            acc += chi.conj().eval(m) * tau;
        }
        let rhs = if md.beta >= 2 {
            acc.total() * (2.0 / md.phi() as f64)
        } else {
            (acc.total() - 1.0) * (2.0 / md.phi() as f64)
        };
        let theta = crate::TWO_PI * m as f64 / md.modulus as f64;
        let lhs = Complex64::new(2.0 * theta.cos(), 0.0);
        worst = worst.max((lhs - rhs).norm());
    }
    report(IdentityId::lcAC, group, Some(1), worst, classes.len() as u64, exhaustive, 1e-8)
}

/// gauss_twist: Σ_{h coprime} χ̄(h) e(−xh/p^β) = χ(−x) τ(χ̄), residual per case
/// scaled by p^{β/2}.
pub fn verify_gauss_twist(group: &Arc<UnitGroup>) -> IdentityReport {
    let md = group.modulus;
    let pb = md.modulus;
    let prim = list_characters(group, CharacterFilter::Primitive);
    let taus_conj: Vec<Complex64> = prim.iter().map(|chi| gauss_sum(&chi.conj())).collect();
    let (xs, exhaustive_x) = sweep_classes(group);
    // residual tolerance is 1e−9 per unit of p^{β/2}
    let scale = (pb as f64).sqrt();
    let mut worst = 0.0f64;
    let mut cases = 0u64;
    let check = |chi: &DirichletCharacter, tau_conj: Complex64, x: u64| {
        let chibar = chi.conj();
        let mut acc = ComplexSum::new();
        for h in group.units() {
            let phase = pb - mul_mod(x, h, pb);
            acc += chibar.eval(h) * crate::e(phase as f64 / pb as f64);
        }
        let rhs = chi.eval(pb - x) * tau_conj;
        (acc.total() - rhs).norm()
    };
    if exhaustive_x && pb <= EXHAUSTIVE_LIMIT {
        for (chi, tau) in prim.iter().zip(&taus_conj) {
            for &x in &xs {
                worst = worst.max(check(chi, *tau, x));
                cases += 1;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);
        for _ in 0..SAMPLE_COUNT {
            let i = rng.gen_range(0..prim.len());
            let x = loop {
                let c = rng.gen_range(1..pb);
                if c % md.p != 0 {
                    break c;
                }
            };
            worst = worst.max(check(&prim[i], taus_conj[i], x));
            cases += 1;
        }
    }
    report(
        IdentityId::GaussTwist,
        group,
        None,
        worst / scale,
        cases,
        exhaustive_x && pb <= EXHAUSTIVE_LIMIT,
        1e-9,
    )
}

/// hK2: Σ_{x:(x/p)_n=1} χ(x) Kl_n(x, p^β) = τ(χ)^n for each primitive even χ
/// (residual relative to |τ(χ)^n| = p^{βn/2}).
pub fn verify_hk2(group: &Arc<UnitGroup>, n: u32) -> IdentityReport {
    let md = group.modulus;
    let chars = prim_even_with_tau(group);
    let kl = kloosterman_table(group, n, Method::Dp);
    let residue_classes: Vec<u64> = group
        .units()
        .filter(|&x| power_residue_symbol(x, n, &md))
        .collect();
    let scale = (md.modulus as f64).powf(n as f64 / 2.0);
    let mut worst = 0.0f64;
    for (chi, tau) in &chars {
        let mut acc = ComplexSum::new();
        for &x in &residue_classes {
            acc += chi.eval(x) * kl[group.dlog(x).unwrap() as usize];
        }
        let rhs = tau_pow(*tau, n);
        worst = worst.max((acc.total() - rhs).norm() / scale);
    }
    report(IdentityId::hK2, group, Some(n), worst, chars.len() as u64, true, 1e-7)
}

/// hKsum: Σ_{x:(x/p)_n=1} Kl_n(x,p^β) Kl_n(±mx,p^β) = p^{βn}(2/φ(p^β)) Σ_{χ prim even} χ̄(m),
/// for β ≥ 4 and n ≥ 2 (residual relative to p^{βn}).
pub fn verify_hksum(group: &Arc<UnitGroup>, n: u32) -> IdentityReport {
    let md = group.modulus;
    assert!(md.beta >= 4 && n >= 2, "hKsum hypotheses: β ≥ 4, n ≥ 2");
    let kl = kloosterman_table(group, n, Method::Dp);
    let pb = md.modulus;
    let residue_classes: Vec<u64> = group
        .units()
        .filter(|&x| power_residue_symbol(x, n, &md))
        .collect();
    let (classes, exhaustive) = sweep_classes(group);
    let scale = (pb as f64).powi(n as i32);
    let mut worst = 0.0f64;
    for &m in &classes {
        let mut acc = ComplexSum::new();
        for &x in &residue_classes {
            let mx = mul_mod(m, x, pb);
            let pm = kl[group.dlog(mx).unwrap() as usize]
                + kl[group.dlog(pb - mx).unwrap() as usize];
            acc += kl[group.dlog(x).unwrap() as usize] * pm;
        }
        let rhs = scale * (2.0 / md.phi() as f64) * qo_predicted(group, m);
        worst = worst.max((acc.total() - rhs).norm() / scale);
    }
    report(IdentityId::hKsum, group, Some(n), worst, classes.len() as u64, exhaustive, 1e-7)
}

fn report(
    identity_id: IdentityId,
    group: &UnitGroup,
    n: Option<u32>,
    max_abs_residual: f64,
    cases_checked: u64,
    exhaustive: bool,
    tolerance: f64,
) -> IdentityReport {
    IdentityReport {
        identity_id,
        p: group.modulus.p,
        beta: group.modulus.beta,
        n,
        max_abs_residual,
        cases_checked,
        exhaustive,
        tolerance,
        pass: max_abs_residual < tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::{build_unit_group, PrimePowerModulus};

    fn group(p: u64, beta: u32) -> Arc<UnitGroup> {
        Arc::new(build_unit_group(PrimePowerModulus::new(p, beta).unwrap()).unwrap())
    }

    #[test]
    fn qo_case_values_mod_25() {
        let g = group(5, 2);
        // m = 1: φ*(25)/2 = (20−4)/2 = 8; m = 26 ≡ 1 mod 5 only: −φ(5)/2 = −2.
        assert_eq!(qo_predicted(&g, 1), 8.0);
        assert_eq!(qo_predicted(&g, 6), -2.0);
        assert_eq!(qo_predicted(&g, 2), 0.0);
        let g7 = group(7, 1);
        assert_eq!(qo_predicted(&g7, 3), -1.0);
        assert_eq!(qo_predicted(&g7, 6), 2.0);
    }

    #[test]
    fn qo_sweeps() {
        for (p, beta) in [(5u64, 1u32), (5, 2), (7, 1), (7, 2), (3, 3)] {
            let rep = verify_qo(&group(p, beta));
            assert!(rep.pass, "QO failed at p={p}, β={beta}: {rep:?}");
        }
    }

    #[test]
    fn sogs_small_cases() {
        for (p, beta, n) in [(5u64, 2u32, 1u32), (5, 1, 2), (5, 2, 2), (7, 2, 3), (3, 2, 2)] {
            let rep = verify_sogs(&group(p, beta), n);
            assert!(rep.pass, "SOGS failed: {rep:?}");
        }
    }

    #[test]
    fn lcac_small_cases() {
        for (p, beta) in [(5u64, 2u32), (7, 1), (7, 2), (3, 2)] {
            let rep = verify_lcac(&group(p, beta));
            assert!(rep.pass, "lcAC failed: {rep:?}");
        }
    }

    #[test]
    fn gauss_twist_mod_49() {
        let rep = verify_gauss_twist(&group(7, 2));
        assert!(rep.pass, "gauss_twist failed: {rep:?}");
        // φ*(49) = 42 − 6 = 36 primitive characters, 42 coprime classes x.
        assert_eq!(rep.cases_checked, 36 * 42);
    }

    #[test]
    fn hk2_and_hksum_mod_625() {
        let g = group(5, 4);
        let rep = verify_hk2(&g, 2);
        assert!(rep.pass, "hK2 failed: {rep:?}");
        let rep = verify_hksum(&g, 2);
        assert!(rep.pass, "hKsum failed: {rep:?}");
    }
}
