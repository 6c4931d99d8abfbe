//! Compensated (error-free-transform) summation for real and complex accumulators.
//!
//! Sums of up to 10⁶ unit-modulus terms must keep 1e−9 residuals meaningful, so all
//! large sums in the crate go through a Kahan/Neumaier accumulator rather than a bare
//! f64 addition chain.

use num_complex::Complex64;
use std::ops::AddAssign;

/// Neumaier-improved Kahan summator for f64.
#[derive(Default, Clone, Copy, Debug)]
pub struct NeumaierSum {
    s: f64,
    c: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current compensated total.
    pub fn total(&self) -> f64 {
        self.s + self.c
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        let (s, c) = two_sum(self.s, rhs);
        self.s = s;
        self.c += c;
    }
}

/// Complex accumulator built from two Neumaier summators.
#[derive(Default, Clone, Copy, Debug)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> Complex64 {
        Complex64::new(self.re.total(), self.im.total())
    }
}

impl AddAssign<Complex64> for ComplexSum {
    fn add_assign(&mut self, rhs: Complex64) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

/// Error-free transform: s = fl(a+b), c = exact rounding error, branch-ordered
/// so it stays exact regardless of which operand is larger (Neumaier's variant).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let c = if a.abs() >= b.abs() {
        (a - s) + b
    } else {
        (b - s) + a
    };
    (s, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_is_compensated() {
        let mut s = NeumaierSum::new();
        s += 1e200;
        s += 0.1;
        s += 0.2;
        s += 0.3;
        s += -1e200;
        assert!((s.total() - 0.6).abs() < 1e-15, "got {}", s.total());
    }

    #[test]
    fn complex_accumulator_matches_naive_on_benign_data() {
        let mut s = ComplexSum::new();
        let mut naive = Complex64::new(0.0, 0.0);
        for k in 0..1000 {
            let z = Complex64::from_polar(1.0, k as f64);
            s += z;
            naive += z;
        }
        assert!((s.total() - naive).norm() < 1e-10);
    }
}
