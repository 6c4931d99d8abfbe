//! Hyper-Kloosterman sums Kl_n(c, p^β) by four methods.
//!
//! Kl_n(c, p^β) = Σ e((x₁+…+x_n)/p^β) over unit n-tuples with x₁⋯x_n ≡ c, and
//! Kl_n(±c) = Kl_n(c) + Kl_n(−c). Methods:
//!
//! * `naive` — enumerate (x₁,…,x_{n−1}) with x_n forced; cost O(φ^{n−1});
//! * `dp` — iterated multiplicative convolution f_{k+1}[r] = Σ_u f_k[r ū] e(u/p^β),
//!   realized as direct cyclic convolution on ℤ/φℤ via the dlog table; cost O(n φ²);
//! * `fft_dp` — the same convolution by FFT on ℤ/φℤ; cost O(n φ log φ);
//! * `salie` — the closed form p^{β(n−1)/2} Σ_{w^n ≡ c} e(phase(w)/p^β) for even
//!   β ≥ 4 and p ∤ n, where the root-lift convention is fixed empirically by
//!   [`calibrate_salie_lift`] against a brute-force oracle (the closed form depends
//!   on a choice of lifting of the roots mod p^α to modulus p^β).

use crate::residue::{inv_mod, mul_mod, pow_mod, PrimePowerModulus, UnitGroup};
use crate::sum::ComplexSum;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Evaluation method for a Kloosterman query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Dp,
    FftDp,
    Salie,
}

/// Candidate conventions for lifting the n-th roots mod p^α into the Salié phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftConvention {
    /// Hensel-lift each root mod p^α to the exact n-th root W mod p^β and use the
    /// phase (n−1)W + c·W̄.
    C1,
    /// Exact Hensel-lifted root with the stationary-phase form n·W.
    C2,
    /// Literal root w₀ ∈ [0, p^α) zero-extended to modulus p^β, phase (n−1)w₀ + c·w̄₀.
    C3,
}

pub const ALL_CONVENTIONS: [LiftConvention; 3] =
    [LiftConvention::C1, LiftConvention::C2, LiftConvention::C3];

/// Outcome of a calibration sweep: per-convention worst residuals over all coprime c,
/// scaled by p^{β(n−1)/2}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub p: u64,
    pub beta: u32,
    pub n: u32,
    pub classes_swept: u64,
    /// (convention, max scaled residual, worst class c).
    pub residuals: Vec<(LiftConvention, f64, u64)>,
    /// Conventions that matched the oracle within tolerance on every class.
    pub matching: Vec<LiftConvention>,
}

#[derive(Debug, Error)]
pub enum KlError {
    #[error("salie method unavailable: requires β even ≥ 4 and p ∤ n (got p={p}, β={beta}, n={n})")]
    SalieUnavailable { p: u64, beta: u32, n: u32 },
    #[error("salie method requested before a calibration run fixed the lift convention")]
    LiftConventionUncalibrated,
    #[error("no lift convention matches the oracle; calibration report retained")]
    NoConventionMatches(Box<CalibrationReport>),
}

/// A single Kloosterman evaluation request.
#[derive(Debug, Clone, Copy)]
pub struct KloostermanQuery {
    pub n: u32,
    pub c: u64,
    pub modulus: PrimePowerModulus,
    pub method: Method,
}

/// Tolerance (per unit of p^{β(n−1)/2}) for method agreement and calibration.
pub const METHOD_AGREEMENT_TOL: f64 = 1e-9;
const CALIBRATION_TOL: f64 = 1e-8;

/// Natural magnitude p^{β(n−1)/2} used to scale residuals.
pub fn kl_scale(m: &PrimePowerModulus, n: u32) -> f64 {
    (m.modulus as f64).powf((n as f64 - 1.0) / 2.0)
}

fn salie_admissible(m: &PrimePowerModulus, n: u32) -> bool {
    m.beta >= 4 && m.beta % 2 == 0 && n as u64 % m.p != 0 && n >= 1
}

/// Evaluate Kl_n(c, p^β). The `salie_convention` must be supplied (from a prior
/// [`calibrate_salie_lift`] run) when `method == Salie`.
pub fn kloosterman(
    g: &UnitGroup,
    q: &KloostermanQuery,
    salie_convention: Option<LiftConvention>,
) -> Result<Complex64, KlError> {
    debug_assert_eq!(g.modulus, q.modulus);
    debug_assert_eq!(q.c % q.modulus.p != 0, true, "c must be coprime to p");
    match q.method {
        Method::Naive => Ok(kl_naive(g, q.n, q.c)),
        Method::Dp => Ok(kloosterman_table(g, q.n, Method::Dp)[g.dlog(q.c).unwrap() as usize]),
        Method::FftDp => Ok(kloosterman_table(g, q.n, Method::FftDp)[g.dlog(q.c).unwrap() as usize]),
        Method::Salie => {
            if !salie_admissible(&q.modulus, q.n) {
                return Err(KlError::SalieUnavailable {
                    p: q.modulus.p,
                    beta: q.modulus.beta,
                    n: q.n,
                });
            }
            let conv = salie_convention.ok_or(KlError::LiftConventionUncalibrated)?;
            Ok(kl_salie(g, q.n, q.c, conv))
        }
    }
}

/// Kl_n(±c) = Kl_n(c) + Kl_n(−c).
pub fn kloosterman_pm(
    g: &UnitGroup,
    q: &KloostermanQuery,
    salie_convention: Option<LiftConvention>,
) -> Result<Complex64, KlError> {
    let m = q.modulus.modulus;
    let mut q2 = *q;
    q2.c = m - q.c % m;
    Ok(kloosterman(g, q, salie_convention)? + kloosterman(g, &q2, salie_convention)?)
}

/// Direct enumeration over unit (n−1)-tuples with the last coordinate forced.
fn kl_naive(g: &UnitGroup, n: u32, c: u64) -> Complex64 {
    let m = g.modulus.modulus;
    let mf = m as f64;
    if n == 1 {
        return crate::e(c as f64 / mf);
    }
    let units: Vec<u64> = g.units().collect();
    // inv[x] via the dlog table: (g^j)^{-1} = g^{φ−j}.
    let phi = g.order;
    let mut pow_table = vec![0u64; phi as usize];
    let mut x = 1u64;
    for j in 0..phi {
        pow_table[j as usize] = x;
        x = mul_mod(x, g.generator, m);
    }
    let inv = |x: u64| pow_table[((phi - g.dlog(x).unwrap()) % phi) as usize];

    // Iterate over (x_1, ..., x_{n-2}) recursively; the innermost loop runs x_{n-1}.
    let mut acc = ComplexSum::new();
    let depth = (n - 2) as usize;
    let mut idx = vec![0usize; depth];
    loop {
        // partial product and sum of the outer coordinates
        let mut prod = 1u64;
        let mut sum = 0u64;
        for &i in &idx {
            let x = units[i];
            prod = mul_mod(prod, x, m);
            sum = (sum + x) % m;
        }
        let rest = mul_mod(c, inv(prod), m);
        for &y in &units {
            let last = mul_mod(rest, inv(y), m);
            let total = (sum + y + last) % m;
            acc += crate::e(total as f64 / mf);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == depth {
                return acc.total();
            }
            idx[d] += 1;
            if idx[d] < units.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Full table of Kl_n(c, p^β) for all units c, indexed by dlog(c), via n-fold cyclic
/// convolution of E[j] = e(g^j/p^β) on ℤ/φℤ (direct for `dp`, FFT for `fft_dp`).
pub fn kloosterman_table(g: &UnitGroup, n: u32, method: Method) -> Vec<Complex64> {
    let phi = g.order as usize;
    let m = g.modulus.modulus;
    let mut e_table = vec![Complex64::default(); phi];
    let mut x = 1u64;
    for j in 0..phi {
        e_table[j] = crate::e(x as f64 / m as f64);
        x = mul_mod(x, g.generator, m);
    }
    match method {
        Method::Dp => {
            let mut gvec = e_table.clone();
            for _ in 1..n {
                let mut next = vec![Complex64::default(); phi];
                for (j, slot) in next.iter_mut().enumerate() {
                    let mut acc = ComplexSum::new();
                    for i in 0..phi {
                        let k = if j >= i { j - i } else { j + phi - i };
                        acc += e_table[i] * gvec[k];
                    }
                    *slot = acc.total();
                }
                gvec = next;
            }
            gvec
        }
        Method::FftDp => {
            let mut planner = FftPlanner::new();
            let fft = planner.plan_fft_forward(phi);
            let ifft = planner.plan_fft_inverse(phi);
            let mut hat = e_table;
            fft.process(&mut hat);
            let mut out: Vec<Complex64> = hat.iter().map(|&z| pow_small(z, n)).collect();
            ifft.process(&mut out);
            let scale = 1.0 / phi as f64;
            for z in &mut out {
                *z *= scale;
            }
            out
        }
        Method::Naive | Method::Salie => {
            panic!("kloosterman_table supports convolution methods only")
        }
    }
}

#[inline]
fn pow_small(z: Complex64, n: u32) -> Complex64 {
    let mut r = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        r *= z;
    }
    r
}

/// n-th power residue symbol (c/p^β)_n: returns true iff c is an n-th power residue,
/// decided mod p by c^{(p−1)/gcd(n,p−1)} ≡ 1 (Hensel's lemma lifts to every p^β).
pub fn power_residue_symbol(c: u64, n: u32, m: &PrimePowerModulus) -> bool {
    let p = m.p;
    let g = gcd(n as u64, p - 1);
    pow_mod(c % p, (p - 1) / g, p) == 1
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All w mod p^level with w^n ≡ c (mod p^level), for 1 ≤ level ≤ β. Roots are found
/// mod p by scanning and Hensel-lifted (p ∤ n makes every root simple). Cardinality
/// is gcd(n, p−1) when the power-residue symbol is 1, else 0.
pub fn nth_roots(c: u64, n: u32, m: &PrimePowerModulus, level: u32) -> Vec<u64> {
    assert!(level >= 1 && level <= m.beta);
    assert!(n as u64 % m.p != 0, "Hensel lifting requires p ∤ n");
    let p = m.p;
    let mut roots: Vec<u64> = (1..p).filter(|&w| pow_mod(w, n as u64, p) == c % p).collect();
    let mut cur_level = 1u32;
    let mut modulus = p;
    while cur_level < level {
        let next_level = (2 * cur_level).min(level);
        let next_mod = p.pow(next_level);
        roots = roots
            .into_iter()
            .map(|w| {
                // Newton step: w ← w − (w^n − c)/(n w^{n−1}) mod p^{next}.
                let fw = (pow_mod(w, n as u64, next_mod) + next_mod - c % next_mod) % next_mod;
                let dfw = mul_mod(n as u64 % next_mod, pow_mod(w, n as u64 - 1, next_mod), next_mod);
                (w + next_mod - mul_mod(fw, inv_mod(dfw, next_mod), next_mod)) % next_mod
            })
            .collect();
        cur_level = next_level;
        modulus = next_mod;
    }
    let _ = modulus;
    roots.sort_unstable();
    roots
}

/// Salié closed form with an explicit lift convention (run calibration first).
fn kl_salie(g: &UnitGroup, n: u32, c: u64, conv: LiftConvention) -> Complex64 {
    let m = &g.modulus;
    let alpha = m.alpha.expect("salie requires even β");
    let pb = m.modulus;
    let scale = kl_scale(m, n);
    let roots_alpha = nth_roots(c % pb, n, m, alpha);
    let mut acc = ComplexSum::new();
    for w0 in roots_alpha {
        let phase = match conv {
            LiftConvention::C1 | LiftConvention::C2 => {
                // unique exact n-th root W mod p^β over w0
                let w = nth_root_over(g, n, c, w0, alpha);
                match conv {
                    LiftConvention::C1 => {
                        ((n as u64 - 1) % pb * w % pb + mul_mod(c, inv_mod(w, pb), pb)) % pb
                    }
                    _ => mul_mod(n as u64 % pb, w, pb),
                }
            }
            LiftConvention::C3 => {
                ((n as u64 - 1) % pb * w0 % pb + mul_mod(c, inv_mod(w0, pb), pb)) % pb
            }
        };
        acc += crate::e(phase as f64 / pb as f64);
    }
    acc.total() * scale
}

/// The unique W ≡ w0 (mod p^α) with W^n ≡ c (mod p^β).
fn nth_root_over(g: &UnitGroup, n: u32, c: u64, w0: u64, alpha: u32) -> u64 {
    let m = &g.modulus;
    let p = m.p;
    let mut w = w0;
    let mut level = alpha;
    while level < m.beta {
        let next = (2 * level).min(m.beta);
        let next_mod = p.pow(next);
        let fw = (pow_mod(w, n as u64, next_mod) + next_mod - c % next_mod) % next_mod;
        let dfw = mul_mod(n as u64 % next_mod, pow_mod(w, n as u64 - 1, next_mod), next_mod);
        w = (w + next_mod - mul_mod(fw, inv_mod(dfw, next_mod), next_mod)) % next_mod;
        level = next;
    }
    w
}

/// Sweep every coprime class c, comparing each candidate convention against the
/// chosen oracle method; returns the matching convention (preferring C1, then C2,
/// then C3) or the full failure report.
pub fn calibrate_salie_lift(
    g: &UnitGroup,
    n: u32,
    oracle: Method,
) -> Result<(LiftConvention, CalibrationReport), KlError> {
    let m = &g.modulus;
    if !salie_admissible(m, n) {
        return Err(KlError::SalieUnavailable {
            p: m.p,
            beta: m.beta,
            n,
        });
    }
    assert!(
        matches!(oracle, Method::Naive | Method::Dp | Method::FftDp),
        "oracle must be a brute-force method"
    );
    let oracle_table = match oracle {
        Method::Naive => {
            let mut t = vec![Complex64::default(); g.order as usize];
            for c in g.units() {
                t[g.dlog(c).unwrap() as usize] = kl_naive(g, n, c);
            }
            t
        }
        _ => kloosterman_table(g, n, oracle),
    };
    let scale = kl_scale(m, n);
    let mut residuals = Vec::new();
    let mut matching = Vec::new();
    for conv in ALL_CONVENTIONS {
        let mut worst = 0.0f64;
        let mut worst_c = 0u64;
        for c in g.units() {
            let v = kl_salie(g, n, c, conv);
            let r = (v - oracle_table[g.dlog(c).unwrap() as usize]).norm() / scale;
            if r > worst {
                worst = r;
                worst_c = c;
            }
        }
        residuals.push((conv, worst, worst_c));
        if worst < CALIBRATION_TOL {
            matching.push(conv);
        }
    }
    let report = CalibrationReport {
        p: m.p,
        beta: m.beta,
        n,
        classes_swept: g.order,
        residuals,
        matching: matching.clone(),
    };
    match matching.first() {
        Some(&conv) => Ok((conv, report)),
        None => Err(KlError::NoConventionMatches(Box::new(report))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::build_unit_group;
    use std::sync::Arc;

    fn group(p: u64, beta: u32) -> Arc<UnitGroup> {
        Arc::new(build_unit_group(PrimePowerModulus::new(p, beta).unwrap()).unwrap())
    }

    #[test]
    fn kl1_is_single_exponential() {
        // Kl_1(±1, 25) = e(1/25) + e(−1/25) = 2cos(2π/25).
        let g = group(5, 2);
        let q = KloostermanQuery {
            n: 1,
            c: 1,
            modulus: g.modulus,
            method: Method::Naive,
        };
        let v = kloosterman_pm(&g, &q, None).unwrap();
        let expected = 2.0 * (crate::TWO_PI / 25.0).cos();
        assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn kl2_mod_5_closed_value() {
        // Direct 4-term sum over x ∈ {1,2,3,4} with x̄ ∈ {1,3,2,4}:
        // Kl_2(1,5) = 2cos(4π/5) + 2cos(8π/5) = 2 + 2cos(4π/5) ≈ 0.381966.
        let g = group(5, 1);
        let q = KloostermanQuery {
            n: 2,
            c: 1,
            modulus: g.modulus,
            method: Method::Naive,
        };
        let v = kloosterman(&g, &q, None).unwrap();
        let expected = 2.0 + 2.0 * (2.0 * crate::TWO_PI / 5.0).cos();
        assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-12, "v = {v}");
    }

    #[test]
    fn methods_agree_mod_343() {
        let g = group(7, 3);
        let dp = kloosterman_table(&g, 2, Method::Dp);
        let fft = kloosterman_table(&g, 2, Method::FftDp);
        let scale = kl_scale(&g.modulus, 2);
        for c in g.units() {
            let nv = kl_naive(&g, 2, c);
            let j = g.dlog(c).unwrap() as usize;
            assert!((nv - dp[j]).norm() < 1e-9 * scale, "naive vs dp at c={c}");
            assert!((dp[j] - fft[j]).norm() < 1e-9 * scale, "dp vs fft at c={c}");
        }
    }

    #[test]
    fn classical_weil_bound_mod_p() {
        // |Kl_n(c, p)| ≤ n p^{(n−1)/2}.
        let g = group(11, 1);
        for n in 2..=3u32 {
            let table = kloosterman_table(&g, n, Method::Dp);
            let bound = n as f64 * (11.0f64).powf((n as f64 - 1.0) / 2.0);
            for v in &table {
                assert!(v.norm() <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn power_residue_symbol_mod_5() {
        let m = PrimePowerModulus::new(5, 1).unwrap();
        assert!(power_residue_symbol(1, 2, &m));
        assert!(!power_residue_symbol(2, 2, &m));
        assert!(power_residue_symbol(4, 2, &m));
    }

    #[test]
    fn nth_roots_examples() {
        let m5 = PrimePowerModulus::new(5, 1).unwrap();
        assert_eq!(nth_roots(4, 2, &m5, 1), vec![2, 3]);
        assert_eq!(nth_roots(2, 2, &m5, 1), Vec::<u64>::new());
        let m53 = PrimePowerModulus::new(5, 3).unwrap();
        let roots = nth_roots(4, 2, &m53, 3);
        assert_eq!(roots.len(), 2);
        for w in roots {
            assert_eq!(pow_mod(w, 2, 125), 4);
        }
        let m7 = PrimePowerModulus::new(7, 2).unwrap();
        assert_eq!(nth_roots(1, 1, &m7, 2), vec![1]);
    }

    #[test]
    fn salie_requires_calibration() {
        let g = group(5, 4);
        let q = KloostermanQuery {
            n: 2,
            c: 1,
            modulus: g.modulus,
            method: Method::Salie,
        };
        assert!(matches!(
            kloosterman(&g, &q, None),
            Err(KlError::LiftConventionUncalibrated)
        ));
    }

    #[test]
    fn salie_unavailable_for_odd_beta() {
        let g = group(5, 3);
        let q = KloostermanQuery {
            n: 2,
            c: 1,
            modulus: g.modulus,
            method: Method::Salie,
        };
        assert!(matches!(
            kloosterman(&g, &q, Some(LiftConvention::C1)),
            Err(KlError::SalieUnavailable { .. })
        ));
    }

    #[test]
    fn salie_calibration_n2_mod_625() {
        // For n = 2, c·w̄ ≡ w when w² ≡ c, so C1 and C2 coincide and match the oracle.
        let g = group(5, 4);
        let (conv, report) = calibrate_salie_lift(&g, 2, Method::Dp).unwrap();
        assert_eq!(conv, LiftConvention::C1);
        assert!(report.matching.contains(&LiftConvention::C2));
        assert_eq!(report.classes_swept, 500);
    }

    #[test]
    fn salie_support_is_power_residues() {
        // Kl_n vanishes (via the closed form) exactly off the n-th power classes.
        let g = group(5, 4);
        let table = kloosterman_table(&g, 2, Method::Dp);
        let scale = kl_scale(&g.modulus, 2);
        for c in g.units() {
            let j = g.dlog(c).unwrap() as usize;
            if !power_residue_symbol(c, 2, &g.modulus) {
                assert!(
                    table[j].norm() < 1e-9 * scale,
                    "Kl_2({c}, 625) should vanish on non-residues"
                );
            }
        }
    }
}
