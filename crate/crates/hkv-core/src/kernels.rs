//! Vertical-line (Mellin–Barnes) quadrature and the cutoff functions.
//!
//! Every cutoff is a line integral (1/2πi)∫ g(s) y^{±s} ds along a fixed vertical
//! line Re s = σ₀:
//!
//! * V₁(y) = (1/2πi)∫_{(2)} k(s) y^{−s} ds/s,
//! * V₂(y) = (1/2πi)∫_{(2)} k(−s) F(−s+δ) y^{−s} ds/s,
//! * Φ_u(y) = (1/2πi)∫_{(−σ)} k(−s+(1−δ))/(s−(1−δ)) (y/p^u)^s ds, 1 < σ < 3 − Re δ,
//! * Φ̃_u — the same with the extra local Euler factor ε(s),
//! * GL₁ dual kernel Φ(y) = (1/2πi)∫_{(−σ)} φ*(s) π^{s−1/2} Γ((1−s)/2)/Γ(s/2) y^s ds,
//! * GL_n dual kernel Φ(y) = (1/2πi)∫_{(−σ)} φ*(s) F(s) y^s ds, σ > 1,
//!
//! with k(s) = e^{s²} the Gaussian surrogate test function (k(0) = 1, |k| ≲ e^{−t²}
//! on every vertical line). The integrands are analytic and Schwartz-decaying on
//! their lines, so a uniform trapezoid rule with step h = 0.05 converges
//! superalgebraically; the truncation height T is grown until the endpoint
//! magnitude certifies a tail below 1e−12 of the node mass. Since the y-dependence
//! on a fixed line is exactly y^{±σ₀}·(oscillatory factor), each kernel precomputes
//! its y-independent node weights once and every evaluation is a short phase sum.

use crate::gamma::{f_ratio, log_gamma, GammaData};
use crate::sum::ComplexSum;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy)]
pub enum KernelError {
    #[error("certified tail bound {0:e} exceeds the requested tolerance")]
    TailBoundExceedsTolerance(f64),
    #[error("decay fit lacks dynamic range")]
    FitFailed,
}

/// Quadrature step on every line.
pub const QUAD_STEP: f64 = 0.05;
/// Relative endpoint mass at which the tail is certified negligible.
const TAIL_CUT: f64 = 1e-17;
/// Hard cap on the truncation height. The Gaussian-surrogate integrands stop near
/// t ≈ 10; the compact-bump kind decays like e^{−c√t} and needs heights near 1500.
const T_MAX: f64 = 1600.0;

/// The analytic test function k(s).
///
/// Three kinds are provided. The Gaussian surrogate e^{s²} (optionally with zeros
/// imposed at the μ̄_j) is entire, k(0) = 1, and decays like e^{−t²} on every
/// vertical line, which makes all the two-sided identity checks cheap; but |k|
/// grows like e^{σ²} along the real direction, so cutoffs built from it decay only
/// Gaussian-in-log — superpolynomial, but not O(y^{−C}) with usable constants.
/// The `compact_bump` kind is the Mellin transform of an actual smooth bump G
/// supported on x ∈ [e^{−1}, 1] with ∫G(x)dx/x = 1; it decays in both real
/// directions (≲ e^{|σ| − c√|t|}), realizes the rapid-decay lemma quantitatively
/// (V₁ built from it is a smoothed step: exactly 1 below e^{−1}, exactly 0 above 1),
/// and is used for the decay-profile verification.
#[derive(Debug, Clone)]
pub enum TestFunctionK {
    /// k(s) = e^{s²} ∏_j (1 − s/μ̄_j) (empty product for the plain surrogate).
    Gaussian { mu_bar: Vec<Complex64> },
    /// k(s) = ∫ G(e^u) e^{su} du over u ∈ [−1, 0]; nodes hold (u_i, c·G(e^{u_i})·h).
    CompactBump { nodes: Vec<(f64, f64)> },
    /// Compact bump times ∏_j (1 − s/z_j), zeros listed with multiplicity. Each
    /// factor is 1 at s = 0, so k(0) = 1 stays exact; the polynomial factor only
    /// adds derivatives of the bump, so cutoffs built from it keep the exact
    /// plateau values of the plain bump outside the transition region [e^{−1}, 1].
    CompactBumpZeros {
        nodes: Vec<(f64, f64)>,
        zeros: Vec<Complex64>,
    },
}

impl TestFunctionK {
    /// k(s) = e^{s²}.
    pub fn gaussian() -> Self {
        Self::Gaussian { mu_bar: Vec::new() }
    }

    /// k(s) = e^{s²} ∏_j (1 − s/μ̄_j); the product is 1 at s = 0 so k(0) = 1 stays
    /// exact. Parameters must be nonzero.
    pub fn vanishing_at_mu(mu_bar: Vec<Complex64>) -> Self {
        assert!(mu_bar.iter().all(|m| m.norm() > 0.0), "zeros must be nonzero");
        Self::Gaussian { mu_bar }
    }

    /// Mellin transform of g(u) = c·exp(−1/(1 − (2u+1)²)) on u = log x ∈ [−1, 0],
    /// normalized so that k(0) = 1 holds to machine precision (the same quadrature
    /// normalizes and evaluates).
    pub fn compact_bump() -> Self {
        Self::CompactBump {
            nodes: Self::bump_nodes(1.0),
        }
    }

    fn bump_nodes(steepness: f64) -> Vec<(f64, f64)> {
        let n = 1000usize;
        let h = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity(n - 1);
        let mut mass = 0.0;
        for i in 1..n {
            let u = -1.0 + i as f64 * h;
            let w = 2.0 * u + 1.0;
            let g = (-steepness / (1.0 - w * w)).exp();
            mass += g * h;
            nodes.push((u, g * h));
        }
        for node in &mut nodes {
            node.1 /= mass;
        }
        nodes
    }

    /// Compact bump with a sharper Gevrey constant: g(u) = c·exp(−a/(1 − (2u+1)²)).
    /// Larger `steepness` trades transition sharpness for a faster e^{−c√|t|}
    /// vertical decay of the Mellin transform (c grows like √a), which shortens
    /// both dual-sum caps and contour heights. Plateaus of cutoffs built from it
    /// are identical to the plain bump (support is still x ∈ [e^{−1}, 1]).
    pub fn compact_bump_steep(zeros: Vec<Complex64>, steepness: f64) -> Self {
        assert!(zeros.iter().all(|z| z.norm() > 0.0), "zeros must be nonzero");
        assert!(steepness > 0.0);
        Self::CompactBumpZeros {
            nodes: Self::bump_nodes(steepness),
            zeros,
        }
    }

    /// Compact bump with zeros imposed at the given nonzero points (with
    /// multiplicity). Used where a contour shift crosses a pole of a gamma
    /// factor of known order: the matching-order zero removes the residue while
    /// keeping k(0) = 1 exact.
    pub fn compact_bump_vanishing(zeros: Vec<Complex64>) -> Self {
        assert!(zeros.iter().all(|z| z.norm() > 0.0), "zeros must be nonzero");
        match Self::compact_bump() {
            Self::CompactBump { nodes } => Self::CompactBumpZeros { nodes, zeros },
            _ => unreachable!(),
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        match self {
            TestFunctionK::Gaussian { mu_bar } => {
                let mut v = (s * s).exp();
                for m in mu_bar {
                    v *= Complex64::new(1.0, 0.0) - s / m;
                }
                v
            }
            TestFunctionK::CompactBump { nodes } => {
                let mut acc = ComplexSum::new();
                for &(u, w) in nodes {
                    acc += (s * u).exp() * w;
                }
                acc.total()
            }
            TestFunctionK::CompactBumpZeros { nodes, zeros } => {
                let mut acc = ComplexSum::new();
                for &(u, w) in nodes {
                    acc += (s * u).exp() * w;
                }
                let mut v = acc.total();
                for z in zeros {
                    v *= Complex64::new(1.0, 0.0) - s / z;
                }
                v
            }
        }
    }

    /// For the compact bump: the exact V₁(y) = ∫_y^∞ G(x) dx/x, a smoothed step
    /// that is 1 for y ≤ e^{−1} and 0 for y ≥ 1. `None` for the Gaussian kinds.
    pub fn exact_v1(&self, y: f64) -> Option<f64> {
        match self {
            TestFunctionK::Gaussian { .. } => None,
            // With zeros imposed the transition profile changes (bump-derivative
            // terms), but the plateaus survive exactly: 1 below e^{−1}, 0 above 1.
            TestFunctionK::CompactBumpZeros { .. } => {
                if y <= (-1.0f64).exp() {
                    Some(1.0)
                } else if y >= 1.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            TestFunctionK::CompactBump { nodes } => {
                // Simpson integration of the normalized bump over [log y, 0]; the
                // stored node mass fixes the normalization constant.
                let norm: f64 = nodes.iter().map(|&(_, w)| w).sum::<f64>()
                    / nodes
                        .iter()
                        .map(|&(u, _)| {
                            let w = 2.0 * u + 1.0;
                            (-1.0 / (1.0 - w * w)).exp()
                        })
                        .sum::<f64>();
                let g = |u: f64| {
                    let w = 2.0 * u + 1.0;
                    if w.abs() >= 1.0 {
                        0.0
                    } else {
                        (-1.0 / (1.0 - w * w)).exp()
                    }
                };
                let lo = y.ln().max(-1.0).min(0.0);
                let n = 4000usize;
                let h = (0.0 - lo) / n as f64;
                let mut acc = g(lo) + g(0.0);
                for i in 1..n {
                    let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += c * g(lo + i as f64 * h);
                }
                Some(acc * h / 3.0 * norm / 1e-3)
            }
        }
    }
}

/// A fixed vertical line Re s = `re_s` with precomputed trapezoid weights
/// w_j = (h/2π)·g(re_s + i t_j); evaluation is value(y) = Σ_j w_j y^{±s_j}.
#[derive(Debug, Clone)]
pub struct LineKernel {
    pub re_s: f64,
    /// +1.0 for ∫ g(s) y^{s}, −1.0 for ∫ g(s) y^{−s}.
    pub power_sign: f64,
    ts: Vec<f64>,
    ws: Vec<Complex64>,
    /// Certified bound for the discarded tail, per unit of y^{±re_s}.
    pub tail_coeff: f64,
    /// Truncation height actually used.
    pub t_max: f64,
}

impl LineKernel {
    /// Build the node table for integrand g along Re s = sigma.
    pub fn build(sigma: f64, power_sign: f64, g: impl Fn(Complex64) -> Complex64) -> Self {
        let h = QUAD_STEP;
        // Probe for the needed height: the integrands all carry a Gaussian factor,
        // so the magnitude profile is unimodal up to polynomial wiggle.
        let mut peak = 0.0f64;
        let mut t_need = 8.0f64;
        let mut t = 0.0;
        while t <= T_MAX {
            let m = g(Complex64::new(sigma, t))
                .norm()
                .max(g(Complex64::new(sigma, -t)).norm());
            peak = peak.max(m);
            if m > TAIL_CUT * peak {
                t_need = t + 2.0;
            }
            t += 0.5;
        }
        let t_max = t_need.min(T_MAX);
        let n = (t_max / h).ceil() as i64;
        let mut ts = Vec::with_capacity((2 * n + 1) as usize);
        let mut ws = Vec::with_capacity((2 * n + 1) as usize);
        let scale = h / crate::TWO_PI;
        for j in -n..=n {
            let t = j as f64 * h;
            ts.push(t);
            ws.push(g(Complex64::new(sigma, t)) * scale);
        }
        // Certified tail: beyond T the Gaussian factor e^{−(t−c)²} with |c| ≤ 3
        // dominates, so ∫_T^∞ |g| ≤ |g(T)| / (2(T−3)) with a 4× safety margin.
        let edge = g(Complex64::new(sigma, t_max)).norm() + g(Complex64::new(sigma, -t_max)).norm();
        let tail_coeff = edge * 4.0 / (2.0 * (t_max - 3.0).max(1.0)) / crate::TWO_PI;
        Self {
            re_s: sigma,
            power_sign,
            ts,
            ws,
            tail_coeff,
            t_max,
        }
    }

    /// Evaluate at ℓ = log y.
    pub fn eval_log(&self, ell: f64) -> Complex64 {
        let radial = (self.power_sign * self.re_s * ell).exp();
        let mut acc = ComplexSum::new();
        let phase = self.power_sign * ell;
        for (t, w) in self.ts.iter().zip(&self.ws) {
            acc += *w * Complex64::from_polar(1.0, t * phase);
        }
        acc.total() * radial
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        self.eval_log(y.ln())
    }

    /// Certified truncation error at y.
    pub fn tail(&self, y: f64) -> f64 {
        self.tail_coeff * (self.power_sign * self.re_s * y.ln()).exp()
    }
}

/// Mellin transform φ*(s) of the admissible weights.
#[derive(Debug, Clone)]
pub enum WeightMellin {
    /// φ(y) = exp(−(log y − l0)²), φ*(s) = √π exp(s·l0 + s²/4); exact.
    GaussLog { l0: f64 },
    /// φ_∞(x) = x^{−(1−δ)} V₂(x/fβ), with the exact transform
    /// φ*(s) = fβ^{s−(1−δ)} · k(−s+(1−δ))/(s−(1−δ)) · F(−s+1),
    /// valid for max(δ₀, 1−Re δ) < Re s < 3 − Re δ.
    PhiInfinity {
        fbeta: f64,
        delta: Complex64,
        k: TestFunctionK,
        gamma: GammaData,
    },
}

impl WeightMellin {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        match self {
            WeightMellin::GaussLog { l0 } => {
                std::f64::consts::PI.sqrt() * (s * *l0 + s * s * 0.25).exp()
            }
            WeightMellin::PhiInfinity {
                fbeta,
                delta,
                k,
                gamma,
            } => {
                let one = Complex64::new(1.0, 0.0);
                let shift = one - delta;
                let fpow = ((s - shift) * fbeta.ln()).exp();
                let fr = f_ratio(-s + one, gamma).expect("F pole on the weight line");
                fpow * k.eval(-s + shift) / (s - shift) * fr
            }
        }
    }

    /// Direct evaluation of the weight itself (GaussLog exactly; φ_∞ via V₂).
    pub fn weight(&self, y: f64, v2: Option<&CutoffFunction>) -> Complex64 {
        match self {
            WeightMellin::GaussLog { l0 } => {
                Complex64::new((-(y.ln() - l0) * (y.ln() - l0)).exp(), 0.0)
            }
            WeightMellin::PhiInfinity { fbeta, delta, .. } => {
                let v2 = v2.expect("φ_∞ evaluation needs a V₂ kernel");
                let one = Complex64::new(1.0, 0.0);
                ((-(one - delta)) * y.ln()).exp() * v2.eval(y / fbeta)
            }
        }
    }
}

/// Which defining integral a [`CutoffFunction`] realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffKind {
    V1,
    V2,
    PhiU,
    PhiTildeU,
    PhiGl1,
    PhiTildeGl1,
    PhiGln,
}

/// A ready-to-evaluate cutoff function: a line kernel plus the log-shift that folds
/// scalings like y ↦ y/p^u into the evaluation.
#[derive(Debug, Clone)]
pub struct CutoffFunction {
    pub kind: CutoffKind,
    pub kernel: LineKernel,
    /// Subtracted from log y before the phase sum (log p^u for the Φ_u family).
    pub log_shift: f64,
}

impl CutoffFunction {
    pub fn eval(&self, y: f64) -> Complex64 {
        self.kernel.eval_log(y.ln() - self.log_shift)
    }

    pub fn eval_log(&self, ell: f64) -> Complex64 {
        self.kernel.eval_log(ell - self.log_shift)
    }

    /// Certified truncation error at y.
    pub fn tail(&self, y: f64) -> f64 {
        self.kernel.tail_coeff
            * (self.kernel.power_sign * self.kernel.re_s * (y.ln() - self.log_shift)).exp()
    }

    /// V₁(y) = (1/2πi)∫_{(σ)} k(s) y^{−s} ds/s, default σ = 2.
    pub fn v1(k: &TestFunctionK, sigma: Option<f64>) -> Self {
        let k = k.clone();
        let sigma = sigma.unwrap_or(2.0);
        assert!(sigma > 0.1, "line must stay right of the pole at s = 0");
        Self {
            kind: CutoffKind::V1,
            kernel: LineKernel::build(sigma, -1.0, move |s| k.eval(s) / s),
            log_shift: 0.0,
        }
    }

    /// V₂(y) = (1/2πi)∫_{(σ)} k(−s) F(−s+δ) y^{−s} ds/s, default σ = 2.
    pub fn v2(k: &TestFunctionK, gamma: &GammaData, delta: Complex64, sigma: Option<f64>) -> Self {
        let k = k.clone();
        let gamma = gamma.clone();
        let sigma = sigma.unwrap_or(2.0);
        assert!(sigma > 0.1);
        Self {
            kind: CutoffKind::V2,
            kernel: LineKernel::build(sigma, -1.0, move |s| {
                k.eval(-s) * f_ratio(-s + delta, &gamma).expect("F pole on V₂ line") / s
            }),
            log_shift: 0.0,
        }
    }

    /// Φ_u(y) = (1/2πi)∫_{(−σ)} k(−s+(1−δ))/(s−(1−δ)) (y/p^u)^s ds, 1 < σ < 3 − Re δ.
    pub fn phi_u(k: &TestFunctionK, delta: Complex64, p: u64, u: f64, sigma: Option<f64>) -> Self {
        let k = k.clone();
        let sigma = sigma.unwrap_or(2.0);
        assert!(sigma > 1.0 && sigma < 3.0 - delta.re);
        let shift = Complex64::new(1.0, 0.0) - delta;
        Self {
            kind: CutoffKind::PhiU,
            kernel: LineKernel::build(-sigma, 1.0, move |s| k.eval(-s + shift) / (s - shift)),
            log_shift: u * (p as f64).ln(),
        }
    }

    /// Φ̃_u: Φ_u with the extra local factor ε(s) = ∏_i (1 − c_i p^{−s}).
    pub fn phi_tilde_u(
        k: &TestFunctionK,
        delta: Complex64,
        p: u64,
        u: f64,
        euler_coeffs: Vec<Complex64>,
        sigma: Option<f64>,
    ) -> Self {
        let k = k.clone();
        let sigma = sigma.unwrap_or(2.0);
        assert!(sigma > 1.0 && sigma < 3.0 - delta.re);
        let shift = Complex64::new(1.0, 0.0) - delta;
        let lp = (p as f64).ln();
        Self {
            kind: CutoffKind::PhiTildeU,
            kernel: LineKernel::build(-sigma, 1.0, move |s| {
                let mut eps = Complex64::new(1.0, 0.0);
                for c in &euler_coeffs {
                    eps *= Complex64::new(1.0, 0.0) - c * (-s * lp).exp();
                }
                eps * k.eval(-s + shift) / (s - shift)
            }),
            log_shift: u * lp,
        }
    }

    /// GL₁ dual kernel Φ(y) = (1/2πi)∫_{(−σ)} φ*(s) π^{s−1/2} Γ((1−s)/2)/Γ(s/2) y^s ds.
    pub fn phi_gl1(weight: &WeightMellin, sigma: Option<f64>) -> Self {
        Self::phi_gl1_with_euler(weight, Vec::new(), sigma, CutoffKind::PhiGl1)
    }

    /// GL₁ kernel with an extra ε_p(s, ξ) = (1 − ξ(p)p^{−s}) factor (Φ̃).
    pub fn phi_tilde_gl1(
        weight: &WeightMellin,
        p: u64,
        xi_at_p: Complex64,
        sigma: Option<f64>,
    ) -> Self {
        let lp = (p as f64).ln();
        let mut this = Self::phi_gl1_with_euler(
            weight,
            vec![(xi_at_p, lp)],
            sigma,
            CutoffKind::PhiTildeGl1,
        );
        this.kind = CutoffKind::PhiTildeGl1;
        this
    }

    fn phi_gl1_with_euler(
        weight: &WeightMellin,
        euler: Vec<(Complex64, f64)>,
        sigma: Option<f64>,
        kind: CutoffKind,
    ) -> Self {
        let weight = weight.clone();
        let sigma = sigma.unwrap_or(1.5);
        assert!(sigma > 1.0, "GL₁ dual line needs σ > 1");
        Self {
            kind,
            kernel: LineKernel::build(-sigma, 1.0, move |s| {
                let one = Complex64::new(1.0, 0.0);
                let gamma_ratio = ((s - 0.5) * std::f64::consts::PI.ln()
                    + log_gamma((one - s) / 2.0)
                    - log_gamma(s / 2.0))
                .exp();
                let mut eps = one;
                for (c, lp) in &euler {
                    eps *= one - c * (-s * lp).exp();
                }
                weight.eval(s) * gamma_ratio * eps
            }),
            log_shift: 0.0,
        }
    }

    /// GL_n dual kernel Φ(y) = (1/2πi)∫_{(−σ)} φ*(s) F(s) y^s ds, σ > 1.
    pub fn phi_gln(weight: &WeightMellin, gamma: &GammaData, sigma: Option<f64>) -> Self {
        let weight = weight.clone();
        let gamma = gamma.clone();
        let sigma = sigma.unwrap_or(1.5);
        assert!(sigma > 1.0, "GL_n dual line needs σ > 1");
        Self {
            kind: CutoffKind::PhiGln,
            kernel: LineKernel::build(-sigma, 1.0, move |s| {
                weight.eval(s) * f_ratio(s, &gamma).expect("F pole on the dual line")
            }),
            log_shift: 0.0,
        }
    }
}

/// Log-spaced lookup table with 4-point (cubic Lagrange) interpolation in log y,
/// for sweeping a kernel over millions of arguments.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    ell_min: f64,
    step: f64,
    values: Vec<Complex64>,
}

impl KernelGrid {
    pub fn build(f: &CutoffFunction, ell_min: f64, ell_max: f64, step: f64) -> Self {
        let n = ((ell_max - ell_min) / step).ceil() as usize + 4;
        let values = (0..n)
            .map(|i| f.eval_log(ell_min + (i as f64 - 1.0) * step))
            .collect();
        Self {
            ell_min,
            step,
            values,
        }
    }

    /// Interpolated value at ℓ = log y (must lie inside the built range).
    pub fn eval_log(&self, ell: f64) -> Complex64 {
        let x = (ell - self.ell_min) / self.step + 1.0;
        let i = x.floor() as usize;
        assert!(i >= 1 && i + 2 < self.values.len(), "grid range exceeded");
        let t = x - i as f64;
        // 4-point Lagrange basis at offsets −1, 0, 1, 2.
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        self.values[i - 1] * c0 + self.values[i] * c1 + self.values[i + 1] * c2
            + self.values[i + 2] * c3
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        self.eval_log(y.ln())
    }
}

/// Side of the decay profile to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecaySide {
    SmallY,
    LargeY,
}

/// Least-squares slope of log|residual| against log(y/p^u).
///
/// For `SmallY` the fitted quantity is Φ_u(y) + (y/p^u)^{1−δ} over
/// y ∈ [10⁻³·p^u, 10⁻¹·p^u] and the slope bounds the correction exponent from
/// below; for `LargeY` it is Φ_u itself over the far range where the dual decay
/// has steepened past the configured rate.
pub fn decay_profile(
    f: &CutoffFunction,
    delta: Complex64,
    side: DecaySide,
) -> Result<f64, KernelError> {
    assert!(matches!(f.kind, CutoffKind::PhiU | CutoffKind::PhiTildeU));
    let (lo, hi) = match side {
        DecaySide::SmallY => (-3.0 * std::f64::consts::LN_10, -std::f64::consts::LN_10),
        DecaySide::LargeY => (6.5, 9.0),
    };
    let n = 25;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let ell = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = f.kernel.eval_log(ell);
        let resid = match side {
            DecaySide::SmallY => {
                // leading term −(y/p^u)^{1−δ}
                v + ((Complex64::new(1.0, 0.0) - delta) * ell).exp()
            }
            DecaySide::LargeY => v,
        };
        if resid.norm() < 1e-14 {
            return Err(KernelError::FitFailed);
        }
        xs.push(ell);
        ys.push(resid.norm().ln());
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(KernelError::FitFailed);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_normalization() {
        let k = TestFunctionK::gaussian();
        assert_eq!(k.eval(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        let kv = TestFunctionK::vanishing_at_mu(vec![Complex64::new(0.25, 0.1)]);
        assert_eq!(kv.eval(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        assert!(kv.eval(Complex64::new(0.25, 0.1)).norm() < 1e-14);
    }

    #[test]
    fn v1_limits_compact_bump() {
        // Rapid-decay profile realized by the compact-bump test function: V₁ is a
        // smoothed step. The y = 10 evaluation uses the shifted line Re s = 6.
        let k = TestFunctionK::compact_bump();
        let v1 = CutoffFunction::v1(&k, None);
        let near_one = v1.eval(1e-3);
        assert!((near_one - Complex64::new(1.0, 0.0)).norm() < 1e-2, "{near_one}");
        let v1_far = CutoffFunction::v1(&k, Some(6.0));
        assert!(v1_far.eval(10.0).norm() < 1e-6, "{}", v1_far.eval(10.0).norm());
        // Quadrature against the exact smoothed step in the transition region.
        for &y in &[0.45f64, 0.6, 0.8] {
            let exact = k.exact_v1(y).unwrap();
            assert!(
                (v1.eval(y) - Complex64::new(exact, 0.0)).norm() < 1e-8,
                "y = {y}"
            );
        }
    }

    #[test]
    fn compact_bump_zeros_kind() {
        let z = Complex64::new(0.4, -0.3);
        let k = TestFunctionK::compact_bump_vanishing(vec![z, z]);
        assert!((k.eval(Complex64::new(0.0, 0.0)) - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        assert!(k.eval(z).norm() < 1e-12);
        // Plateaus survive the zero factor exactly; quadrature should agree.
        let v1 = CutoffFunction::v1(&k, None);
        assert!((v1.eval(0.2) - Complex64::new(1.0, 0.0)).norm() < 1e-4);
        assert!(v1.eval(1.6).norm() < 1e-4);
        assert_eq!(k.exact_v1(0.2), Some(1.0));
        assert_eq!(k.exact_v1(1.6), Some(0.0));
        assert_eq!(k.exact_v1(0.6), None);
    }

    #[test]
    fn v1_gaussian_surrogate_decays_in_log() {
        // The Gaussian surrogate only decays Gaussian-in-log: small at y = e^{8}.
        let k = TestFunctionK::gaussian();
        let v1 = CutoffFunction::v1(&k, None);
        let near_one = v1.eval(1e-3);
        assert!((near_one - Complex64::new(1.0, 0.0)).norm() < 1e-2, "{near_one}");
        assert!(v1.eval(9.0f64.exp()).norm() < 1e-6);
    }

    #[test]
    fn v1_abscissa_independence() {
        let k = TestFunctionK::gaussian();
        let a = CutoffFunction::v1(&k, Some(2.0));
        let b = CutoffFunction::v1(&k, Some(0.7));
        for &y in &[0.1, 1.0, 3.0] {
            let bar = 2.0 * (a.tail(y) + b.tail(y)).max(1e-12);
            assert!((a.eval(y) - b.eval(y)).norm() < bar, "y = {y}");
        }
    }

    #[test]
    fn phi_u_abscissa_independence_at_crossover() {
        let delta = Complex64::new(0.6, 0.3);
        let k = TestFunctionK::gaussian();
        let a = CutoffFunction::phi_u(&k, delta, 5, 1.5, Some(2.0));
        let b = CutoffFunction::phi_u(&k, delta, 5, 1.5, Some(1.2));
        let y = 5.0f64.powf(1.5);
        assert!((a.eval(y) - b.eval(y)).norm() < 1e-10);
    }

    #[test]
    fn phi_u_small_y_leading_term() {
        // Φ_u(y) ≈ −(y/p^u)^{1−δ} for y ≪ p^u.
        let delta = Complex64::new(0.6, 0.3);
        let k = TestFunctionK::gaussian();
        let phi = CutoffFunction::phi_u(&k, delta, 5, 1.5, None);
        // Correction decays like (y/p^u)^{0.4} e^{−ℓ²/4}; at ℓ = −8 it sits near
        // relative 1e−7 of the leading term.
        let ell = -8.0f64;
        let v = phi.kernel.eval_log(ell);
        let lead = -((Complex64::new(1.0, 0.0) - delta) * ell).exp();
        assert!(
            (v - lead).norm() < 1e-5 * lead.norm(),
            "Φ_u = {v}, leading = {lead}"
        );
    }

    #[test]
    fn decay_profiles_match_predictions() {
        let delta = Complex64::new(0.6, 0.3);
        let k = TestFunctionK::gaussian();
        let phi = CutoffFunction::phi_u(&k, delta, 5, 1.5, None);
        let small = decay_profile(&phi, delta, DecaySide::SmallY).unwrap();
        assert!(small >= 2.0 - 0.1, "small-y correction slope {small}");
        // Configured large-y rate C = 2: the Gaussian-in-log decay steepens past
        // slope −2 well before the fitted window [e^{6.5}, e^{9}]·p^u.
        let large = decay_profile(&phi, delta, DecaySide::LargeY).unwrap();
        assert!(large <= -2.0, "large-y decay slope {large}");
    }

    #[test]
    fn grid_interpolation_matches_direct() {
        let delta = Complex64::new(0.6, 0.3);
        let k = TestFunctionK::gaussian();
        let phi = CutoffFunction::phi_u(&k, delta, 5, 1.5, None);
        let grid = KernelGrid::build(&phi, -6.0, 6.0, 0.002);
        for i in 0..40 {
            let ell = -5.5 + 11.0 * i as f64 / 39.0;
            let a = grid.eval_log(ell);
            let b = phi.eval_log(ell);
            assert!((a - b).norm() < 1e-8 * (1.0 + b.norm()), "ℓ = {ell}");
        }
    }

    #[test]
    fn gauss_log_mellin_inverts() {
        // Recover φ(y) = exp(−(log y − l0)²) by inverting the exact transform.
        let w = WeightMellin::GaussLog { l0: 50.0f64.ln() };
        let inv = LineKernel::build(1.5, -1.0, |s| w.eval(s));
        for &y in &[10.0f64, 50.0, 200.0] {
            let direct = (-(y.ln() - 50.0f64.ln()).powi(2)).exp();
            let got = inv.eval(y);
            assert!(
                (got - Complex64::new(direct, 0.0)).norm() < 1e-9,
                "y = {y}: {got} vs {direct}"
            );
        }
    }
}
