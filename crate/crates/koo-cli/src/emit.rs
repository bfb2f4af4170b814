//! Report serialization: JSON (full provenance) and TSV (plot-ready).
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so re-parsing an emitted report reproduces every number
//! bit-exactly.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use koo_core::{
    Dimensions, ErrorDist, KurtosisEstimate, LawSummary, SelectionReport, SimReport,
    ThresholdEstimate, VerificationReport,
};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Tsv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Some(OutputFormat::Json),
            "tsv" => Some(OutputFormat::Tsv),
            _ => None,
        }
    }
}

/// Writes to `out` when given, stdout otherwise.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                f.write_all(b"\n")?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
            if !content.ends_with('\n') {
                lock.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::CliError::Parse(format!("serialization failed: {e}")))
}

#[derive(Serialize)]
struct DimsOut {
    n: usize,
    p: usize,
    k: usize,
    k_candidates: usize,
    c_n: f64,
    alpha_n: f64,
    m_tilde: usize,
}

impl DimsOut {
    fn new(dims: &Dimensions, keep: usize) -> Self {
        DimsOut {
            n: dims.n,
            p: dims.p,
            k: dims.k,
            k_candidates: dims.k - keep,
            c_n: dims.c_n,
            alpha_n: dims.alpha_n,
            m_tilde: dims.m_tilde,
        }
    }
}

#[derive(Serialize)]
struct TauOut {
    raw: f64,
    clamped: f64,
    was_clamped: bool,
}

#[derive(Serialize)]
struct ThresholdProvenance {
    rule: String,
    nu: f64,
    n_reps: usize,
    seed: u64,
    sampler: ErrorDist,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap_maxima: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct RuleOut {
    rule: String,
    /// Cutoff on the raw statistic scale.
    cutoff: f64,
    /// Selected predictor ids (1-based, in the order predictors were given).
    selected: Vec<usize>,
    selected_names: Vec<String>,
}

#[derive(Serialize)]
struct RankedRow {
    rank: usize,
    id: usize,
    name: String,
    kappa: f64,
}

#[derive(Serialize)]
struct ConventionFlags {
    bernoulli_sign_convention: &'static str,
    quantile_rule: &'static str,
}

#[derive(Serialize)]
struct SelectionOut {
    dims: DimsOut,
    seed: u64,
    responses: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_hat: Option<TauOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampler: Option<ErrorDist>,
    thresholds: Vec<ThresholdProvenance>,
    rules: Vec<RuleOut>,
    ranked: Vec<RankedRow>,
    always_keep: Vec<usize>,
    always_keep_names: Vec<String>,
    flags: ConventionFlags,
}

fn flags() -> ConventionFlags {
    ConventionFlags {
        bernoulli_sign_convention: "plus",
        quantile_rule: "ceil((1-nu)*N)-th ascending order statistic",
    }
}

/// Provenance accompanying a selection report.
pub struct SelectionContext<'a> {
    pub predictor_names: &'a [String],
    pub response_names: &'a [String],
    pub tau: Option<&'a KurtosisEstimate>,
    pub sampler: Option<ErrorDist>,
    pub thresholds: &'a [ThresholdEstimate],
    pub seed: u64,
}

/// Renders a selection report. Ids are 1-based positions within the
/// predictor selection.
pub fn emit_selection_report(
    report: &SelectionReport,
    ctx: &SelectionContext<'_>,
    format: OutputFormat,
) -> Result<String> {
    let SelectionContext {
        predictor_names,
        response_names,
        tau,
        sampler,
        thresholds,
        seed,
    } = *ctx;
    match format {
        OutputFormat::Json => {
            let out = SelectionOut {
                dims: DimsOut::new(&report.dims, report.always_keep.len()),
                seed,
                responses: response_names.to_vec(),
                tau_hat: tau.map(|t| TauOut {
                    raw: t.raw_value,
                    clamped: t.tau_hat,
                    was_clamped: t.clamped,
                }),
                sampler,
                thresholds: thresholds
                    .iter()
                    .map(|t| ThresholdProvenance {
                        rule: format!("KBT(nu={})", t.nu),
                        nu: t.nu,
                        n_reps: t.n_reps,
                        seed: t.seed,
                        sampler: t.sampler,
                        bootstrap_maxima: t.bootstrap_maxima.clone(),
                    })
                    .collect(),
                rules: report
                    .rules
                    .iter()
                    .map(|r| RuleOut {
                        rule: r.rule.clone(),
                        cutoff: r.cutoff,
                        selected: r.selected.iter().map(|j| j + 1).collect(),
                        selected_names: r
                            .selected
                            .iter()
                            .map(|&j| predictor_names[j].clone())
                            .collect(),
                    })
                    .collect(),
                ranked: report
                    .ranked
                    .iter()
                    .enumerate()
                    .map(|(i, (j, kappa))| RankedRow {
                        rank: i + 1,
                        id: j + 1,
                        name: predictor_names[*j].clone(),
                        kappa: *kappa,
                    })
                    .collect(),
                always_keep: report.always_keep.iter().map(|j| j + 1).collect(),
                always_keep_names: report
                    .always_keep
                    .iter()
                    .map(|&j| predictor_names[j].clone())
                    .collect(),
                flags: flags(),
            };
            to_json(&out)
        }
        OutputFormat::Tsv => {
            let mut s = String::new();
            s.push_str("rank\tid\tname\tkappa");
            for rule in &report.rules {
                s.push('\t');
                s.push_str(&rule.rule);
            }
            s.push('\n');
            for (i, (j, kappa)) in report.ranked.iter().enumerate() {
                s.push_str(&format!("{}\t{}\t{}\t{}", i + 1, j + 1, predictor_names[*j], kappa));
                for rule in &report.rules {
                    s.push('\t');
                    s.push(if rule.selected.contains(j) { '1' } else { '0' });
                }
                s.push('\n');
            }
            Ok(s)
        }
    }
}

/// Renders simulation tallies: rows U-S / T-S / O-S / A-S, one column per
/// rule; A-S is blank when nothing over-specified.
pub fn emit_sim_tally(report: &SimReport, format: OutputFormat) -> Result<String> {
    for tally in &report.tallies {
        assert_eq!(tally.total() + report.failures, report.reps);
    }
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct TallyOut<'a> {
                rule: &'a str,
                under_specified: usize,
                true_selected: usize,
                over_specified: usize,
                avg_spurious: Option<f64>,
            }
            #[derive(Serialize)]
            struct SimOut<'a> {
                scenario: &'a koo_core::SimScenario,
                reps: usize,
                failures: usize,
                tallies: Vec<TallyOut<'a>>,
            }
            to_json(&SimOut {
                scenario: &report.scenario,
                reps: report.reps,
                failures: report.failures,
                tallies: report
                    .tallies
                    .iter()
                    .map(|t| TallyOut {
                        rule: &t.rule,
                        under_specified: t.under_specified,
                        true_selected: t.true_selected,
                        over_specified: t.over_specified,
                        avg_spurious: t.avg_spurious(),
                    })
                    .collect(),
            })
        }
        OutputFormat::Tsv => {
            let mut s = String::from("metric");
            for t in &report.tallies {
                s.push('\t');
                s.push_str(&t.rule);
            }
            s.push('\n');
            type TallyGetter = fn(&koo_core::SimTally) -> String;
            let rows: [(&str, TallyGetter); 4] = [
                ("U-S", |t| t.under_specified.to_string()),
                ("T-S", |t| t.true_selected.to_string()),
                ("O-S", |t| t.over_specified.to_string()),
                ("A-S", |t| {
                    t.avg_spurious().map(|v| v.to_string()).unwrap_or_default()
                }),
            ];
            for (label, getter) in rows {
                s.push_str(label);
                for t in &report.tallies {
                    s.push('\t');
                    s.push_str(&getter(t));
                }
                s.push('\n');
            }
            s.push_str("total");
            for t in &report.tallies {
                s.push('\t');
                s.push_str(&t.total().to_string());
            }
            s.push('\n');
            s.push_str(&format!("# reps={} failures={}\n", report.reps, report.failures));
            Ok(s)
        }
    }
}

/// Renders a threshold estimate with the kurtosis provenance.
pub fn emit_threshold(
    threshold: &ThresholdEstimate,
    tau: Option<&KurtosisEstimate>,
    format: OutputFormat,
) -> Result<String> {
    #[derive(Serialize)]
    struct ThresholdOut<'a> {
        #[serde(flatten)]
        threshold: &'a ThresholdEstimate,
        #[serde(skip_serializing_if = "Option::is_none")]
        tau_hat: Option<TauOut>,
        flags: ConventionFlags,
    }
    match format {
        OutputFormat::Json => to_json(&ThresholdOut {
            threshold,
            tau_hat: tau.map(|t| TauOut {
                raw: t.raw_value,
                clamped: t.tau_hat,
                was_clamped: t.clamped,
            }),
            flags: flags(),
        }),
        OutputFormat::Tsv => {
            let mut s = String::from("rule\tnu\tn_reps\tseed\tsampler\tvalue\n");
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                threshold.rule,
                threshold.nu,
                threshold.n_reps,
                threshold.seed,
                threshold.sampler.label(),
                threshold.value
            ));
            Ok(s)
        }
    }
}

/// Renders a verification report.
pub fn emit_verification(report: &VerificationReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Tsv => {
            let mut s = String::from("check\tobserved\ttarget\ttolerance\tpass\tparams\n");
            for r in &report.records {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.check,
                    r.observed,
                    r.target,
                    r.tolerance,
                    r.pass.map(|p| p.to_string()).unwrap_or_default(),
                    r.params
                ));
            }
            Ok(s)
        }
    }
}

/// Renders the per-law quartile summaries of the robustness experiment.
pub fn emit_law_summaries(summaries: &[LawSummary], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(&summaries),
        OutputFormat::Tsv => {
            let mut s = String::from("law\texcess_kurtosis\tq1\tmedian\tq3\tcount\n");
            for l in summaries {
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    l.law,
                    l.excess_kurtosis.map(|v| v.to_string()).unwrap_or_default(),
                    l.q1,
                    l.median,
                    l.q3,
                    l.count
                ));
            }
            Ok(s)
        }
    }
}
