//! Hurwitz zeta by Euler–Maclaurin, the evaluation oracle behind every Dirichlet
//! L-value used in the verification suite.
//!
//! ζ(s, x) = Σ_{k≥0} (x+k)^{−s} is continued by summing M initial terms and applying
//! the Euler–Maclaurin correction at x+M:
//!
//!   ζ(s,x) = Σ_{k<M} (x+k)^{−s} + a^{1−s}/(s−1) + a^{−s}/2
//!            + Σ_{j=1}^{J} B_{2j}/(2j)! · (s)_{2j−1} · a^{−s−2j+1},  a = x+M,
//!
//! with (s)_k the rising factorial. With J = 12 and M ≳ |s| the truncation error sits
//! far below 1e−12 relative for the working range |Im s| ≤ 30.
//!
//! A conductor-folded row ζ(s, a/q), a = 1..q, converts any q-periodic-coefficient
//! Dirichlet series Σ c(m) m^{−s} into the exact finite combination
//! q^{−s} Σ_a c(a) ζ(s, a/q).

use crate::sum::ComplexSum;
use num_complex::Complex64;

/// B_{2j} for j = 1..12.
const BERNOULLI_2J: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// ζ(s, x) for x > 0, s ≠ 1. Accurate to ~1e−13 relative for |Im s| ≤ 30.
pub fn hurwitz_zeta(s: Complex64, x: f64) -> Complex64 {
    assert!(x > 0.0, "Hurwitz zeta needs x > 0");
    assert!(
        (s - Complex64::new(1.0, 0.0)).norm() > 0.05,
        "evaluation too close to the pole at s = 1"
    );
    let m = (s.norm().max(30.0)).ceil() as usize + 8;
    let mut head = ComplexSum::new();
    for k in 0..m {
        head += (-s * (x + k as f64).ln()).exp();
    }
    let a = x + m as f64;
    let ln_a = a.ln();
    let one = Complex64::new(1.0, 0.0);
    let mut tail = ((one - s) * ln_a).exp() / (s - one) + (-s * ln_a).exp() * 0.5;
    // Euler–Maclaurin correction terms.
    let mut rising = s; // (s)_1
    let mut fact = 1.0f64; // (2j)!
    for (j, &b) in BERNOULLI_2J.iter().enumerate() {
        let two_j = 2 * (j + 1);
        fact *= (two_j - 1) as f64 * two_j as f64;
        let term = rising * (b / fact) * ((-s - Complex64::new((two_j - 1) as f64, 0.0)) * ln_a).exp();
        tail += term;
        // extend the rising factorial (s)_{2j−1} → (s)_{2j+1}
        rising = rising
            * (s + Complex64::new((two_j - 1) as f64, 0.0))
            * (s + Complex64::new(two_j as f64, 0.0));
    }
    head.total() + tail
}

/// The folded row q^{−s} ζ(s, a/q) for a = 1..q: `row[a−1]` is the value of the
/// arithmetic-progression series Σ_{m ≡ a (q)} m^{−s} (by analytic continuation).
pub fn progression_row(s: Complex64, q: u64) -> Vec<Complex64> {
    let scale = (-s * (q as f64).ln()).exp();
    (1..=q)
        .map(|a| scale * hurwitz_zeta(s, a as f64 / q as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_2_values() {
        let pi = std::f64::consts::PI;
        let z = hurwitz_zeta(Complex64::new(2.0, 0.0), 1.0);
        assert!((z.re - pi * pi / 6.0).abs() < 1e-12, "ζ(2) = {z}");
        // ζ(2, 1/2) = π²/2.
        let z = hurwitz_zeta(Complex64::new(2.0, 0.0), 0.5);
        assert!((z.re - pi * pi / 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_series_at_complex_s() {
        let s = Complex64::new(3.0, 2.0);
        for &x in &[0.2, 0.7, 1.0] {
            let mut direct = Complex64::new(0.0, 0.0);
            for k in 0..2_000_000u64 {
                direct += (-s * (x + k as f64).ln()).exp();
            }
            let z = hurwitz_zeta(s, x);
            assert!((z - direct).norm() < 1e-9, "x = {x}: {z} vs {direct}");
        }
    }

    #[test]
    fn progression_row_sums_to_zeta() {
        // Σ_a ζ-row = ζ(s) (all residues mod q together).
        let s = Complex64::new(2.5, 1.0);
        let row = progression_row(s, 7);
        let total: Complex64 = row.iter().sum();
        let zeta = hurwitz_zeta(s, 1.0);
        assert!((total - zeta).norm() < 1e-11);
    }

    #[test]
    fn continuation_satisfies_hurwitz_formula_spot() {
        // ζ(s, x) + ζ(s, 1−x)-type reflection is heavy; instead spot-check the
        // continuation against the recurrence ζ(s,x) = x^{−s} + ζ(s, x+1).
        for &s in &[Complex64::new(-0.7, 0.4), Complex64::new(0.3, -25.0)] {
            for &x in &[0.3, 0.9] {
                let lhs = hurwitz_zeta(s, x);
                let rhs = (-s * x.ln()).exp() + hurwitz_zeta(s, x + 1.0);
                assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0), "s={s}, x={x}");
            }
        }
    }
}
