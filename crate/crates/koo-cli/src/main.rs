//! `koo`: knock-one-out variable selection for multivariate linear
//! regression, plus the simulation and verification laboratory.

mod emit;
mod error;
mod ingest;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use koo_core::rng::child_seed;
use koo_core::{
    bootstrap_maxima, build_report, excess_kurtosis_estimate, figure1_experiment, koo_statistics,
    matched_sampler, quantile_from_maxima, run_trials, verify_all, verify_clt_spurious,
    verify_clt_true, verify_limits, verify_tau, BootstrapConfig, ErrorDist, Figure1Design,
    ProjectionCache, SelectionRule, Setting, SimRule, SimScenario, ThresholdEstimate,
};

use emit::{write_output, OutputFormat};
use error::{CliError, Result};
use spec::{parse_data_dist, parse_dist, parse_rules, ColumnSpec, RuleSpec};

#[derive(Parser)]
#[command(
    name = "koo",
    version,
    about = "Knock-one-out variable selection for multivariate linear regression"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank predictors of a dataset and apply threshold rules.
    Select(SelectArgs),
    /// Estimate the bootstrap threshold for a dataset.
    Threshold(ThresholdArgs),
    /// Replay a generative scenario and tabulate selection outcomes.
    Simulate(SimulateArgs),
    /// Empirically check the asymptotic theory.
    Verify(VerifyArgs),
    /// Spurious-statistic quartiles across error laws on one design.
    Figure1(Figure1Args),
}

#[derive(Args)]
struct IngestArgs {
    /// Input file (delimited text, one header row).
    #[arg(long)]
    input: PathBuf,
    /// Response columns: names, 1-based indices or ranges, e.g. "23-28".
    #[arg(long)]
    responses: String,
    /// Predictor columns, same syntax.
    #[arg(long)]
    predictors: String,
    /// Field delimiter: "comma", "tab" or a single character.
    #[arg(long, default_value = "comma")]
    delimiter: String,
    /// Natural-log transform of all responses (requires positive values).
    #[arg(long)]
    log_responses: bool,
    /// Append an all-ones intercept predictor, excluded from selection.
    #[arg(long)]
    intercept: bool,
    /// Predictor ids (1-based, in selection order) that bypass selection.
    #[arg(long)]
    keep: Option<String>,
}

impl IngestArgs {
    fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.to_ascii_lowercase().as_str() {
            "comma" | "," => Ok(b','),
            "tab" | "\\t" | "\t" => Ok(b'\t'),
            s if s.len() == 1 => Ok(s.as_bytes()[0]),
            other => Err(CliError::Parse(format!("bad delimiter '{other}'"))),
        }
    }

    fn ingest(&self) -> Result<ingest::IngestedDataset> {
        let options = ingest::IngestOptions {
            delimiter: self.delimiter_byte()?,
            responses: ColumnSpec::parse(&self.responses)?,
            predictors: ColumnSpec::parse(&self.predictors)?,
            log_responses: self.log_responses,
            intercept: self.intercept,
        };
        let mut ingested = ingest::ingest_table(&self.input, &options)?;
        if let Some(keep) = &self.keep {
            for token in keep.split(',') {
                let token = token.trim();
                if token.is_empty() {
                    continue;
                }
                let id: usize = token
                    .parse()
                    .map_err(|_| CliError::Parse(format!("bad keep id '{token}'")))?;
                if id == 0 || id > ingested.predictor_names.len() {
                    return Err(CliError::Parse(format!("keep id {id} out of range")));
                }
                ingested.always_keep.push(id - 1);
            }
            ingested.always_keep.sort_unstable();
            ingested.always_keep.dedup();
        }
        Ok(ingested)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// "json" or "tsv".
    #[arg(long, default_value = "json")]
    format: String,
}

impl OutputArgs {
    fn format(&self) -> Result<OutputFormat> {
        OutputFormat::parse(&self.format)
            .ok_or_else(|| CliError::Parse(format!("bad format '{}'", self.format)))
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    /// Comma list of rules; kbt takes nu= and n=, e.g.
    /// "kbt:nu=0.05,n=1000,kaic,kbic,kcp".
    #[arg(long, default_value = "kbt:nu=0.05,n=1000,kaic,kbic,kcp")]
    rules: String,
    /// Multiplier law override (default: matched to the estimated kurtosis).
    #[arg(long)]
    sampler: Option<String>,
    /// Keep the bootstrap maxima in the JSON report.
    #[arg(long)]
    retain_maxima: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    ingest: IngestArgs,
    /// Significance level in [0, 1).
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    boot_reps: usize,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    retain_maxima: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design family: I (random uniform) or II (rectangular diagonal).
    #[arg(long)]
    setting: String,
    /// Error law: a case tag (i..vi) or a law spec such as "chisq:3".
    #[arg(long)]
    dist: String,
    #[arg(long)]
    n: usize,
    /// Target p/n.
    #[arg(long)]
    c: f64,
    /// Target k/n.
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Inner bootstrap replicates for the KBT rules.
    #[arg(long, default_value_t = 1000)]
    boot_reps: usize,
    /// Rule list (default: kaic, kbic, kcp, kbt at nu=0 and nu=0.05).
    #[arg(long)]
    rules: Option<String>,
    /// Draw the random design once instead of per replicate.
    #[arg(long)]
    fixed_design: bool,
    /// Multiplier law override for the KBT rules.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: limits, clt-spurious, clt-true, tau, all.
    #[arg(long)]
    check: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Error law spec.
    #[arg(long, default_value = "normal")]
    dist: String,
    /// Monte Carlo replicates (fluctuation and kurtosis checks).
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    /// Independent draws (limit check).
    #[arg(long, default_value_t = 1)]
    draws: usize,
    /// Number of joint spurious coordinates (clt-spurious).
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Planted signal strength (clt-true).
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Also plant a predictor with this signal strength (limits).
    #[arg(long)]
    planted_delta: Option<f64>,
    /// Response count override (tau check; default round(c*n)).
    #[arg(long)]
    p: Option<usize>,
    /// Predictor count override (tau check; default round(alpha*n)).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct Figure1Args {
    /// "random" (uniform entries) or "diagonal" (rectangular identity).
    #[arg(long, default_value = "random")]
    design: String,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 600)]
    k: usize,
    #[arg(long, default_value_t = 600)]
    p: usize,
    /// Comma list of law specs.
    #[arg(
        long,
        default_value = "normal,uniform,bernoulli:0.295875854768068,chisq:12,t:10,poisson:1"
    )]
    laws: String,
    #[arg(long, default_value_t = 2)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn run_select(args: &SelectArgs) -> Result<()> {
    let format = args.output.format()?;
    let rules = parse_rules(&args.rules)?;
    let ingested = args.ingest.ingest()?;
    let ds = &ingested.dataset;
    let cache = ProjectionCache::compute(ds)?;
    let profile = koo_statistics(ds, &cache)?;
    let tau = excess_kurtosis_estimate(ds, &cache)?;

    let kbt_requests: Vec<(f64, usize)> = rules
        .iter()
        .filter_map(|r| match r {
            RuleSpec::Kbt { nu, n_reps } => Some((*nu, n_reps.unwrap_or(1000))),
            _ => None,
        })
        .collect();
    let mut sampler_used = None;
    let mut thresholds: Vec<ThresholdEstimate> = Vec::new();
    if !kbt_requests.is_empty() {
        let sampler = match &args.sampler {
            Some(spec) => parse_dist(spec)?,
            None => matched_sampler(tau.tau_hat)?,
        };
        sampler_used = Some(sampler);
        let candidates: Vec<usize> = (0..ds.dims().k)
            .filter(|j| !ingested.always_keep.contains(j))
            .collect();
        // One bootstrap run per distinct replicate count; thresholds for
        // every requested nu come from the same maxima.
        let mut distinct_n: Vec<usize> = kbt_requests.iter().map(|(_, n)| *n).collect();
        distinct_n.sort_unstable();
        distinct_n.dedup();
        for (group, n_reps) in distinct_n.iter().enumerate() {
            let mut config = BootstrapConfig::new(
                0.0,
                *n_reps,
                child_seed(args.seed, group as u64),
                sampler,
                ds.dims().p,
            );
            config.candidates = Some(candidates.clone());
            let maxima = bootstrap_maxima(&cache.knockout_dirs, ds.x(), &config)?;
            for (nu, n) in kbt_requests.iter().filter(|(_, n)| n == n_reps) {
                thresholds.push(ThresholdEstimate {
                    value: quantile_from_maxima(&maxima, *nu)?,
                    rule: "KBT".to_string(),
                    nu: *nu,
                    n_reps: *n,
                    seed: config.seed,
                    sampler,
                    bootstrap_maxima: args.retain_maxima.then(|| maxima.clone()),
                });
            }
        }
    }

    let mut concrete: Vec<SelectionRule> = Vec::new();
    let mut kbt_cursor = 0usize;
    for rule in &rules {
        concrete.push(match rule {
            RuleSpec::Kaic => SelectionRule::Kaic,
            RuleSpec::Kbic => SelectionRule::Kbic,
            RuleSpec::Kcp => SelectionRule::Kcp,
            RuleSpec::FixedMargin { vartheta } => SelectionRule::FixedMargin {
                vartheta: *vartheta,
            },
            RuleSpec::Kbt { .. } => {
                let t = thresholds[kbt_cursor].clone();
                kbt_cursor += 1;
                SelectionRule::Kbt(t)
            }
        });
    }
    let report = build_report(&profile, &concrete, &ingested.always_keep)?;
    let context = emit::SelectionContext {
        predictor_names: &ingested.predictor_names,
        response_names: &ingested.response_names,
        tau: Some(&tau),
        sampler: sampler_used,
        thresholds: &thresholds,
        seed: args.seed,
    };
    let rendered = emit::emit_selection_report(&report, &context, format)?;
    write_output(args.output.out.as_deref(), &rendered)
}

fn run_threshold(args: &ThresholdArgs) -> Result<()> {
    let format = args.output.format()?;
    let ingested = args.ingest.ingest()?;
    let ds = &ingested.dataset;
    let cache = ProjectionCache::compute(ds)?;
    let tau = excess_kurtosis_estimate(ds, &cache)?;
    let sampler = match &args.sampler {
        Some(spec) => parse_dist(spec)?,
        None => matched_sampler(tau.tau_hat)?,
    };
    let mut config = BootstrapConfig::new(args.nu, args.boot_reps, args.seed, sampler, ds.dims().p);
    config.retain_maxima = args.retain_maxima;
    config.candidates = Some(
        (0..ds.dims().k)
            .filter(|j| !ingested.always_keep.contains(j))
            .collect(),
    );
    let threshold = koo_core::bootstrap_threshold(&cache.knockout_dirs, ds.x(), &config)?;
    let rendered = emit::emit_threshold(&threshold, Some(&tau), format)?;
    write_output(args.output.out.as_deref(), &rendered)
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let format = args.output.format()?;
    let setting = match args.setting.to_ascii_uppercase().as_str() {
        "I" | "1" => Setting::I,
        "II" | "2" => Setting::II,
        other => return Err(CliError::Parse(format!("bad setting '{other}' (I or II)"))),
    };
    let mut scenario =
        SimScenario::new(setting, args.n, args.c, args.alpha, parse_data_dist(&args.dist)?);
    scenario.reps = args.reps;
    scenario.boot_reps = args.boot_reps;
    scenario.seed = args.seed;
    scenario.fixed_design = args.fixed_design;
    if let Some(spec) = &args.sampler {
        scenario.sampler_override = Some(parse_dist(spec)?);
    }
    if let Some(rules) = &args.rules {
        let mut parsed = Vec::new();
        for rule in parse_rules(rules)? {
            parsed.push(match rule {
                RuleSpec::Kaic => SimRule::Kaic,
                RuleSpec::Kbic => SimRule::Kbic,
                RuleSpec::Kcp => SimRule::Kcp,
                RuleSpec::FixedMargin { vartheta } => SimRule::FixedMargin { vartheta },
                RuleSpec::Kbt { nu, n_reps } => {
                    if let Some(n) = n_reps {
                        scenario.boot_reps = n;
                    }
                    SimRule::Kbt { nu }
                }
            });
        }
        scenario.rules = parsed;
    }
    let report = run_trials(&scenario)?;
    let rendered = emit::emit_sim_tally(&report, format)?;
    write_output(args.output.out.as_deref(), &rendered)
}

fn run_verify(args: &VerifyArgs) -> Result<()> {
    let format = args.output.format()?;
    let law = parse_data_dist(&args.dist)?;
    let report = match args.check.to_ascii_lowercase().as_str() {
        "limits" => verify_limits(
            args.n,
            args.c,
            args.alpha,
            law,
            args.draws,
            args.planted_delta,
            args.seed,
        )?,
        "clt-spurious" => {
            verify_clt_spurious(args.n, args.c, args.alpha, args.q, law, args.reps, args.seed)?
        }
        "clt-true" => {
            verify_clt_true(args.n, args.c, args.alpha, args.delta, law, args.reps, args.seed)?
        }
        "tau" => {
            let p = args.p.unwrap_or((args.c * args.n as f64).round() as usize);
            let k = args
                .k
                .unwrap_or((args.alpha * args.n as f64).round() as usize);
            verify_tau(law, args.n, p, k, args.reps, args.seed)?
        }
        "all" => verify_all(args.n, args.c, args.alpha, law, args.reps, args.seed)?,
        other => {
            return Err(CliError::Parse(format!(
                "bad check '{other}' (limits, clt-spurious, clt-true, tau, all)"
            )))
        }
    };
    let rendered = emit::emit_verification(&report, format)?;
    write_output(args.output.out.as_deref(), &rendered)
}

fn run_figure1(args: &Figure1Args) -> Result<()> {
    let format = args.output.format()?;
    let design = match args.design.to_ascii_lowercase().as_str() {
        "random" | "random_uniform" => Figure1Design::RandomUniform,
        "diagonal" | "rect_diagonal" => Figure1Design::RectDiagonal,
        other => {
            return Err(CliError::Parse(format!(
                "bad design '{other}' (random or diagonal)"
            )))
        }
    };
    let laws: Vec<ErrorDist> = args
        .laws
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse_dist)
        .collect::<Result<_>>()?;
    let summaries =
        figure1_experiment(design, args.n, args.k, args.p, &laws, args.reps, args.seed)?;
    let rendered = emit::emit_law_summaries(&summaries, format)?;
    write_output(args.output.out.as_deref(), &rendered)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(workers) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global();
    }
    match &cli.command {
        Command::Select(args) => run_select(args),
        Command::Threshold(args) => run_threshold(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Verify(args) => run_verify(args),
        Command::Figure1(args) => run_figure1(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
