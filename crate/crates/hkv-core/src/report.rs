//! Structured verification reports.
//!
//! Every two-sided check in the library reduces to "evaluate both sides
//! independently, compare against a certified (or measured) error bar"; the
//! [`VerificationReport`] captures that outcome in a serialization-stable form:
//! versioned schema, complex numbers as `{re, im}` pairs, parameters as an
//! ordered map, and no wall-clock fields in the serialized body so that replays
//! of the same configuration are byte-identical.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A complex number in the wire format `{re, im}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Outcome of one two-sided check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Wire-format version.
    pub schema: u32,
    /// Stable identifier of the check (e.g. "d_a_i", "moment_closure").
    pub check: String,
    /// Parameters, stringified, in key-sorted order for reproducibility.
    pub params: BTreeMap<String, String>,
    /// Left-hand side value.
    pub lhs: ComplexJson,
    /// Right-hand side value (prefactors included).
    pub rhs: ComplexJson,
    /// |lhs − rhs|.
    pub residual: f64,
    /// Residual divided by the comparison scale.
    pub relative: f64,
    /// Scale used for the relative residual (max(|lhs|, |rhs|, floor)).
    pub scale: f64,
    /// Combined certified/measured error bar for both sides.
    pub bar: f64,
    /// Tolerance the check was run against.
    pub tolerance: f64,
    /// Whether the check passed (relative residual within tolerance + bar).
    pub pass: bool,
    /// Optional per-term or per-block diagnostics (label → value).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<(String, ComplexJson)>,
    /// Wall-clock milliseconds; excluded from serialization so that replayed
    /// runs produce byte-identical reports.
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl VerificationReport {
    /// Build a report from two side values; `pass` compares the relative
    /// residual against `tolerance` plus the relative error bar.
    pub fn two_sided(
        check: &str,
        lhs: Complex64,
        rhs: Complex64,
        bar: f64,
        tolerance: f64,
    ) -> Self {
        let residual = (lhs - rhs).norm();
        let scale = lhs.norm().max(rhs.norm()).max(1e-30);
        let relative = residual / scale;
        Self {
            schema: 1,
            check: check.to_string(),
            params: BTreeMap::new(),
            lhs: lhs.into(),
            rhs: rhs.into(),
            residual,
            relative,
            scale,
            bar,
            tolerance,
            pass: relative <= tolerance + bar / scale,
            diagnostics: Vec::new(),
            runtime_ms: 0.0,
        }
    }

    /// Attach a parameter (builder style).
    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Attach a diagnostic value (builder style).
    pub fn with_diagnostic(mut self, label: &str, value: Complex64) -> Self {
        self.diagnostics.push((label.to_string(), value.into()));
        self
    }

    /// Serialize to pretty JSON (stable field order via the struct layout and
    /// the BTreeMap parameter ordering).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_roundtrip_and_determinism() {
        let r = VerificationReport::two_sided(
            "demo",
            Complex64::new(1.0, 2.0),
            Complex64::new(1.0, 2.0 + 1e-9),
            1e-8,
            1e-6,
        )
        .with_param("p", 5)
        .with_param("beta", 2);
        assert!(r.pass);
        let j1 = r.to_json();
        let j2 = r.to_json();
        assert_eq!(j1, j2);
        let back: VerificationReport = serde_json::from_str(&j1).unwrap();
        assert_eq!(back.check, "demo");
        assert_eq!(Complex64::from(back.lhs), Complex64::new(1.0, 2.0));
        assert_eq!(back.params["p"], "5");
    }

    #[test]
    fn failing_report_flags() {
        let r = VerificationReport::two_sided(
            "demo",
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            0.0,
            1e-6,
        );
        assert!(!r.pass);
        assert!((r.residual - 1.0).abs() < 1e-15);
    }
}
