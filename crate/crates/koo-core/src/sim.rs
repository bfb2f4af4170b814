//! Simulation laboratory: generative scenarios for selection-rule studies.
//!
//! A scenario fixes the design family, the true support (the first five
//! predictors), the error law and the rule set; `run_trials` replays it over
//! seeded replicates and tabulates how often each rule under-specifies,
//! exactly identifies, or over-specifies the truth.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_maxima, quantile_from_maxima, BootstrapConfig, ThresholdEstimate};
use crate::dataset::{DesignCache, Dimensions, ProjectionCache, RegressionDataset};
use crate::dist::ErrorDist;
use crate::error::{Error, Result};
use crate::koo::{koo_statistics, TrueModelSpec};
use crate::kurtosis::{excess_kurtosis_estimate, matched_sampler};
use crate::rng::{child_seed, substream};
use crate::select::{select, SelectionRule};

/// Number of true predictors in every scenario.
pub const K_STAR: usize = 5;

const DESIGN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Random design: entries i.i.d. uniform on (1, 5), coefficient rows
    /// `theta_* = ((-0.5)^0, ..., (-0.5)^{p-1})`.
    I,
    /// Rectangular diagonal design `X = (I_k, O)'`, coefficient rows
    /// `sqrt(n) * theta_*`.
    II,
}

/// Rule configuration inside a scenario (thresholds for the bootstrap rules
/// are re-estimated from each replicate's own data).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SimRule {
    Kaic,
    Kbic,
    Kcp,
    Kbt { nu: f64 },
    FixedMargin { vartheta: f64 },
}

impl SimRule {
    pub fn label(&self) -> String {
        match self {
            SimRule::Kaic => "KAIC".to_string(),
            SimRule::Kbic => "KBIC".to_string(),
            SimRule::Kcp => "KCp".to_string(),
            SimRule::Kbt { nu } => format!("KBT(nu={nu})"),
            SimRule::FixedMargin { vartheta } => format!("FixedMargin({vartheta})"),
        }
    }
}

/// Default rule set: the three information rules plus the bootstrap rule at
/// nu = 0 and nu = 0.05.
pub fn default_rules() -> Vec<SimRule> {
    vec![
        SimRule::Kaic,
        SimRule::Kbic,
        SimRule::Kcp,
        SimRule::Kbt { nu: 0.0 },
        SimRule::Kbt { nu: 0.05 },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimScenario {
    pub setting: Setting,
    pub n: usize,
    /// Target p/n; p = round(c * n).
    pub c: f64,
    /// Target k/n; k = round(alpha * n).
    pub alpha: f64,
    pub error_law: ErrorDist,
    pub reps: usize,
    pub seed: u64,
    pub rules: Vec<SimRule>,
    /// Inner bootstrap replicate count for the KBT rules.
    pub boot_reps: usize,
    /// Draw the random design once instead of per replicate (Setting I only).
    pub fixed_design: bool,
    /// Force a multiplier law instead of matching the estimated kurtosis.
    pub sampler_override: Option<ErrorDist>,
    pub workers: Option<usize>,
}

impl SimScenario {
    pub fn new(setting: Setting, n: usize, c: f64, alpha: f64, error_law: ErrorDist) -> Self {
        SimScenario {
            setting,
            n,
            c,
            alpha,
            error_law,
            reps: 1000,
            seed: 0,
            rules: default_rules(),
            boot_reps: 1000,
            fixed_design: false,
            sampler_override: None,
            workers: None,
        }
    }

    pub fn p(&self) -> usize {
        (self.c * self.n as f64).round() as usize
    }

    pub fn k(&self) -> usize {
        (self.alpha * self.n as f64).round() as usize
    }

    pub fn dims(&self) -> Result<Dimensions> {
        Dimensions::new(self.n, self.p(), self.k())
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims()?;
        if dims.k < K_STAR {
            return Err(Error::Dimension(format!(
                "need k >= {K_STAR} for the true support, got k = {}",
                dims.k
            )));
        }
        if self.reps == 0 {
            return Err(Error::Domain("reps must be at least 1".to_string()));
        }
        if self.rules.is_empty() {
            return Err(Error::Domain("rule list is empty".to_string()));
        }
        let has_kbt = self.rules.iter().any(|r| matches!(r, SimRule::Kbt { .. }));
        if has_kbt && self.boot_reps == 0 {
            return Err(Error::Domain(
                "boot_reps must be at least 1 when a KBT rule is present".to_string(),
            ));
        }
        for rule in &self.rules {
            if let SimRule::Kbt { nu } = rule {
                if !(0.0..1.0).contains(nu) {
                    return Err(Error::Domain(format!("nu must lie in [0,1), got {nu}")));
                }
            }
        }
        self.error_law.validate()?;
        if let Some(law) = &self.sampler_override {
            law.validate()?;
        }
        Ok(())
    }
}

/// `theta_* = ((-0.5)^0, ..., (-0.5)^{p-1})`.
pub fn theta_star(p: usize) -> Vec<f64> {
    (0..p).map(|i| (-0.5f64).powi(i as i32)).collect()
}

fn design_matrix(scenario: &SimScenario, rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    let (n, k) = (scenario.n, scenario.k());
    match scenario.setting {
        Setting::I => DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 4.0 + 1.0),
        Setting::II => DMatrix::identity(n, k),
    }
}

fn coeff_scale(scenario: &SimScenario) -> f64 {
    match scenario.setting {
        Setting::I => 1.0,
        Setting::II => (scenario.n as f64).sqrt(),
    }
}

/// Builds `(X, Y)` for one replicate; `Y = X Theta + E` with identity error
/// covariance.
fn generate_xy(scenario: &SimScenario, replicate: u64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = scenario.p();
    let mut rng = substream(scenario.seed, replicate);
    let x = match (scenario.setting, scenario.fixed_design) {
        (Setting::I, true) => {
            let mut design_rng = substream(child_seed(scenario.seed, DESIGN_STREAM), 0);
            design_matrix(scenario, &mut design_rng)
        }
        _ => design_matrix(scenario, &mut rng),
    };
    let mut y = scenario.error_law.fill(scenario.n, p, &mut rng)?;
    let theta = theta_star(p);
    let scale = coeff_scale(scenario);
    // Every true coefficient row equals scale * theta_*, so the signal is
    // (sum of the first K_STAR design columns) * theta' scaled.
    let mut signal_base = DVector::zeros(scenario.n);
    for s in 0..K_STAR {
        signal_base += x.column(s);
    }
    for (mut ycol, t) in y.column_iter_mut().zip(&theta) {
        ycol.axpy(scale * t, &signal_base, 1.0);
    }
    Ok((x, y))
}

/// Full coefficient matrix of the scenario's truth (k x p, first `K_STAR`
/// rows equal to the scaled `theta_*`).
fn truth_coeffs(scenario: &SimScenario) -> DMatrix<f64> {
    let (p, k) = (scenario.p(), scenario.k());
    let theta = theta_star(p);
    let scale = coeff_scale(scenario);
    DMatrix::from_fn(k, p, |i, j| if i < K_STAR { scale * theta[j] } else { 0.0 })
}

/// A fully validated dataset plus the generating truth for one replicate.
pub fn generate_scenario_data(
    scenario: &SimScenario,
    replicate: u64,
) -> Result<(RegressionDataset, TrueModelSpec)> {
    scenario.validate()?;
    let p = scenario.p();
    let (x, y) = generate_xy(scenario, replicate)?;
    let truth = TrueModelSpec::new(
        (0..K_STAR).collect(),
        truth_coeffs(scenario),
        DMatrix::identity(p, p),
        scenario.error_law,
    )?;
    let ds = crate::dataset::build_dataset(y, x)?;
    Ok((ds, truth))
}

/// Outcome of one replicate under one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    /// Missed at least one true predictor (spurious extras do not matter).
    Under,
    /// Selected exactly the support.
    Exact,
    /// Strict superset of the support.
    Over { spurious: usize },
}

fn classify(selected: &[usize], support_len: usize) -> Class {
    let true_hits = selected.iter().filter(|&&j| j < support_len).count();
    if true_hits < support_len {
        Class::Under
    } else if selected.len() == support_len {
        Class::Exact
    } else {
        Class::Over {
            spurious: selected.len() - support_len,
        }
    }
}

/// Per-rule counters over the replicates of one scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTally {
    pub rule: String,
    pub under_specified: usize,
    pub true_selected: usize,
    pub over_specified: usize,
    /// Sum of spurious counts over the over-specified replicates.
    pub spurious_total: usize,
}

impl SimTally {
    pub fn total(&self) -> usize {
        self.under_specified + self.true_selected + self.over_specified
    }

    /// Mean number of spurious predictors among over-specified replicates;
    /// absent when none over-specified.
    pub fn avg_spurious(&self) -> Option<f64> {
        (self.over_specified > 0)
            .then(|| self.spurious_total as f64 / self.over_specified as f64)
    }
}

/// Tallies for every rule plus replicate bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: SimScenario,
    pub reps: usize,
    /// Replicates that failed numerically and were excluded.
    pub failures: usize,
    pub tallies: Vec<SimTally>,
}

fn run_one(
    scenario: &SimScenario,
    replicate: u64,
    shared_design: Option<&DesignCache>,
) -> Result<Vec<Class>> {
    let (x, y) = generate_xy(scenario, replicate)?;
    let owned_design;
    let design = match shared_design {
        Some(d) => d,
        None => {
            owned_design = DesignCache::compute(&x)?;
            &owned_design
        }
    };
    let ds = RegressionDataset::with_design(y, x, design)?;
    let cache = ProjectionCache::with_design(&ds, design)?;
    let profile = koo_statistics(&ds, &cache)?;

    let needs_boot = scenario.rules.iter().any(|r| matches!(r, SimRule::Kbt { .. }));
    let (maxima, sampler) = if needs_boot {
        let tau = excess_kurtosis_estimate(&ds, &cache)?;
        let sampler = match scenario.sampler_override {
            Some(law) => law,
            None => matched_sampler(tau.tau_hat)?,
        };
        let mut config = BootstrapConfig::new(
            0.0,
            scenario.boot_reps,
            child_seed(scenario.seed, replicate),
            sampler,
            ds.dims().p,
        );
        config.workers = None; // inherit the replicate-level pool
        (
            Some(bootstrap_maxima(&cache.knockout_dirs, ds.x(), &config)?),
            Some(sampler),
        )
    } else {
        (None, None)
    };

    scenario
        .rules
        .iter()
        .map(|rule| {
            let concrete = match rule {
                SimRule::Kaic => SelectionRule::Kaic,
                SimRule::Kbic => SelectionRule::Kbic,
                SimRule::Kcp => SelectionRule::Kcp,
                SimRule::FixedMargin { vartheta } => SelectionRule::FixedMargin {
                    vartheta: *vartheta,
                },
                SimRule::Kbt { nu } => {
                    let maxima = maxima.as_ref().expect("bootstrap ran");
                    SelectionRule::Kbt(ThresholdEstimate {
                        value: quantile_from_maxima(maxima, *nu)?,
                        rule: "KBT".to_string(),
                        nu: *nu,
                        n_reps: scenario.boot_reps,
                        seed: child_seed(scenario.seed, replicate),
                        sampler: sampler.expect("bootstrap ran"),
                        bootstrap_maxima: None,
                    })
                }
            };
            let selected = select(&profile, &concrete)?;
            Ok(classify(&selected, K_STAR))
        })
        .collect()
}

/// Replays the scenario over all replicates and aggregates per-rule tallies.
/// Replicates run in parallel on per-replicate substreams; the reduction is
/// order-independent, so results do not depend on the worker count.
pub fn run_trials(scenario: &SimScenario) -> Result<SimReport> {
    scenario.validate()?;
    let shared_design = match (scenario.setting, scenario.fixed_design) {
        (Setting::II, _) | (Setting::I, true) => {
            let mut rng = match scenario.setting {
                Setting::II => substream(0, 0), // unused by the identity design
                Setting::I => substream(child_seed(scenario.seed, DESIGN_STREAM), 0),
            };
            Some(DesignCache::compute(&design_matrix(scenario, &mut rng))?)
        }
        _ => None,
    };

    let body = || -> Vec<Result<Vec<Class>>> {
        (0..scenario.reps as u64)
            .into_par_iter()
            .map(|rep| run_one(scenario, rep, shared_design.as_ref()))
            .collect()
    };
    let outcomes = match scenario.workers {
        None => body(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(body),
    };

    let mut failures = 0usize;
    let mut tallies: Vec<SimTally> = scenario
        .rules
        .iter()
        .map(|r| SimTally {
            rule: r.label(),
            under_specified: 0,
            true_selected: 0,
            over_specified: 0,
            spurious_total: 0,
        })
        .collect();
    for outcome in outcomes {
        match outcome {
            Err(_) => failures += 1,
            Ok(classes) => {
                for (tally, class) in tallies.iter_mut().zip(classes) {
                    match class {
                        Class::Under => tally.under_specified += 1,
                        Class::Exact => tally.true_selected += 1,
                        Class::Over { spurious } => {
                            tally.over_specified += 1;
                            tally.spurious_total += spurious;
                        }
                    }
                }
            }
        }
    }
    Ok(SimReport {
        scenario: scenario.clone(),
        reps: scenario.reps,
        failures,
        tallies,
    })
}
