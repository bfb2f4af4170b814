//! Threshold rules and ranked selection reports.
//!
//! Every rule is normalized to a cutoff on the raw statistic scale, so a
//! predictor is selected exactly when `K_j > cutoff`. The information rules
//! come out as:
//!
//! - AIC scale:  `log(1+K_j) > 2 c_n`          =>  `K_j > exp(2 c_n) - 1`
//! - BIC scale:  `log(1+K_j) > log(n) c_n`     =>  `K_j > n^{c_n} - 1`
//! - Cp  scale:  `(1-alpha_n) K_j > 2 c_n`     =>  `K_j > 2 c_n / (1-alpha_n)`

use serde::Serialize;

use crate::bootstrap::ThresholdEstimate;
use crate::dataset::Dimensions;
use crate::error::{Error, Result};
use crate::koo::KooProfile;

#[derive(Debug, Clone)]
pub enum SelectionRule {
    /// Bootstrap threshold (carries its provenance).
    Kbt(ThresholdEstimate),
    Kaic,
    Kbic,
    Kcp,
    /// Oracle margin rule: `K_j > c_n (1 + vartheta) / (1 - alpha_n - c_n)`.
    /// The admissible range of `vartheta` depends on unknown signal
    /// strengths, so this is meant for simulation use.
    FixedMargin { vartheta: f64 },
}

impl SelectionRule {
    pub fn label(&self) -> String {
        match self {
            SelectionRule::Kbt(t) => format!("KBT(nu={})", t.nu),
            SelectionRule::Kaic => "KAIC".to_string(),
            SelectionRule::Kbic => "KBIC".to_string(),
            SelectionRule::Kcp => "KCp".to_string(),
            SelectionRule::FixedMargin { vartheta } => format!("FixedMargin({vartheta})"),
        }
    }

    /// Cutoff on the raw statistic scale.
    pub fn cutoff(&self, dims: &Dimensions) -> Result<f64> {
        let c = dims.c_n;
        let alpha = dims.alpha_n;
        let cut = match self {
            SelectionRule::Kbt(t) => t.value,
            SelectionRule::Kaic => (2.0 * c).exp_m1(),
            SelectionRule::Kbic => (c * (dims.n as f64).ln()).exp_m1(),
            SelectionRule::Kcp => 2.0 * c / (1.0 - alpha),
            SelectionRule::FixedMargin { vartheta } => {
                let positive = *vartheta > 0.0;
                if !positive {
                    return Err(Error::Domain(format!(
                        "fixed margin must be positive, got {vartheta}"
                    )));
                }
                c * (1.0 + vartheta) / (1.0 - alpha - c)
            }
        };
        if !cut.is_finite() {
            return Err(Error::Domain(format!(
                "rule {} produced a non-finite cutoff",
                self.label()
            )));
        }
        Ok(cut)
    }
}

/// Indices whose statistic strictly exceeds the rule's cutoff.
pub fn select(profile: &KooProfile, rule: &SelectionRule) -> Result<Vec<usize>> {
    let cutoff = rule.cutoff(&profile.dims)?;
    Ok(profile
        .kappa
        .iter()
        .enumerate()
        .filter(|(_, k)| **k > cutoff)
        .map(|(j, _)| j)
        .collect())
}

/// One rule's normalized cutoff and selected set.
#[derive(Debug, Clone, Serialize)]
pub struct RuleOutcome {
    pub rule: String,
    /// Cutoff on the raw statistic scale.
    pub cutoff: f64,
    /// Selected candidate indices, ascending.
    pub selected: Vec<usize>,
}

/// Ranked statistics plus per-rule selections.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub dims: Dimensions,
    /// (candidate index, statistic), descending by statistic with ties
    /// broken by ascending index.
    pub ranked: Vec<(usize, f64)>,
    pub rules: Vec<RuleOutcome>,
    /// Columns that bypass selection (annotated, never in a selected set).
    pub always_keep: Vec<usize>,
}

/// Applies every rule and assembles the ranked report. `always_keep`
/// columns are excluded from the candidate ranking and from selected sets.
pub fn build_report(
    profile: &KooProfile,
    rules: &[SelectionRule],
    always_keep: &[usize],
) -> Result<SelectionReport> {
    if rules.is_empty() {
        return Err(Error::Domain("at least one rule is required".to_string()));
    }
    let keep: Vec<usize> = {
        let mut v = always_keep.to_vec();
        v.sort_unstable();
        v.dedup();
        if v.iter().any(|&j| j >= profile.kappa.len()) {
            return Err(Error::Dimension(
                "always-keep index out of range".to_string(),
            ));
        }
        v
    };
    let mut ranked: Vec<(usize, f64)> = profile
        .kappa
        .iter()
        .enumerate()
        .filter(|(j, _)| !keep.contains(j))
        .map(|(j, k)| (j, *k))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite statistics").then(a.0.cmp(&b.0)));

    let mut outcomes = Vec::with_capacity(rules.len());
    for rule in rules {
        let cutoff = rule.cutoff(&profile.dims)?;
        let selected = ranked
            .iter()
            .filter(|(_, k)| *k > cutoff)
            .map(|(j, _)| *j)
            .collect::<Vec<_>>();
        let mut selected = selected;
        selected.sort_unstable();
        outcomes.push(RuleOutcome {
            rule: rule.label(),
            cutoff,
            selected,
        });
    }
    Ok(SelectionReport {
        dims: profile.dims,
        ranked,
        rules: outcomes,
        always_keep: keep,
    })
}
