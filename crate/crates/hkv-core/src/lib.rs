//! Exact arithmetic in (ℤ/p^βℤ)^×, hyper-Kloosterman sums, Dirichlet characters of
//! prime-power conductor, Gauss sums, character-built L-functions, Mellin–Barnes
//! quadrature, and two-sided verification of Voronoi-type summation formulas and
//! functional identities for twisted Dirichlet series.
//!
//! The library is organized in layers:
//!
//! * [`residue`], [`characters`], [`kloosterman`] — exact finite arithmetic:
//!   unit groups with discrete-log tables, characters χ mod p^β, Gauss sums τ(χ),
//!   and Kl_n(c, p^β) by four methods (naive, dp, fft_dp, salie).
//! * [`identities`] — machine verification of the finite character/exponential-sum
//!   identities (quasi-orthogonality, Gauss-sum/Kloosterman linkage, twisted
//!   orthogonality, hyper-Kloosterman second-moment identities).
//! * [`gamma`], [`kernels`], [`hurwitz`] — complex special functions: log Γ,
//!   the gamma-ratio F(s), vertical-line quadrature with certified tails, the
//!   cutoff functions V₁, V₂, Φ_u, Φ̃_u and the GL₁/GL_n dual kernels Φ, Φ̃,
//!   and Hurwitz zeta by Euler–Maclaurin.
//! * [`ldata`] — degree-n L-function data built exactly from n primitive even
//!   Dirichlet characters, with L-values everywhere via the Hurwitz oracle.
//! * [`series`] — the additive-twist and hyper-Kloosterman Dirichlet series,
//!   each evaluable on both sides of its functional identity.
//! * [`voronoi`] — the summation formulas and the moment machinery
//!   X_β = X_{β,1} + X_{β,2} with three independent evaluation routes.

pub mod characters;
pub mod gamma;
pub mod hurwitz;
pub mod identities;
pub mod kernels;
pub mod kloosterman;
pub mod ldata;
pub mod report;
pub mod residue;
pub mod series;
pub mod sum;
pub mod voronoi;

pub use num_complex::Complex64;

/// 2π as f64, used by every additive character e(x) = exp(2πi x).
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// e(x) = exp(2πi x).
pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TWO_PI * x)
}
