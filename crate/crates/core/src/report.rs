use serde::{Deserialize, Serialize};

/// One checked quantity of a theorem report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when the asserted relation is violated.
    pub residual: f64,
}

impl Detail {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, residual: f64) -> Self {
        Detail {
            label: label.into(),
            lhs,
            rhs,
            residual,
        }
    }

    /// Detail for the relation `lhs ≤ rhs`.
    pub fn at_most(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Detail::new(label, lhs, rhs, lhs - rhs)
    }
}

/// Outcome of a numerical theorem check; `pass ⟺ worst_residual ≤ tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub pass: bool,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub details: Vec<Detail>,
}

impl TheoremReport {
    pub fn new(theorem_id: impl Into<String>, tolerance: f64, details: Vec<Detail>) -> Self {
        // NaN residuals propagate and fail the report.
        let worst = details.iter().fold(f64::NEG_INFINITY, |m, d| {
            if m.is_nan() || d.residual.is_nan() {
                f64::NAN
            } else {
                m.max(d.residual)
            }
        });
        let worst = if details.is_empty() { 0.0 } else { worst };
        TheoremReport {
            theorem_id: theorem_id.into(),
            pass: worst <= tolerance,
            worst_residual: worst,
            tolerance,
            details,
        }
    }

    /// The detail with the largest residual.
    pub fn worst_detail(&self) -> Option<&Detail> {
        self.details
            .iter()
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
    }
}
