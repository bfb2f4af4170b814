//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! per clause (run with `--nocapture` to see them live).
//!
//! Every tolerance is pinned here; none are tuned to the observed output.

use koo_core::dataset::DesignCache;
use koo_core::rng::{child_seed, substream};
use koo_core::*;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

struct Criterion {
    name: &'static str,
    clauses: Vec<(String, bool)>,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            clauses: Vec::new(),
        }
    }

    fn clause(&mut self, label: impl Into<String>, pass: bool) {
        self.clauses.push((label.into(), pass));
    }

    fn finish(self) {
        let all = self.clauses.iter().all(|(_, p)| *p);
        for (label, pass) in &self.clauses {
            println!(
                "acceptance {}: {} — {}",
                self.name,
                if *pass { "PASS" } else { "FAIL" },
                label
            );
        }
        let failed: Vec<&str> = self
            .clauses
            .iter()
            .filter(|(_, p)| !p)
            .map(|(l, _)| l.as_str())
            .collect();
        assert!(all, "{} failed clauses: {}", self.name, failed.join(" | "));
    }
}

fn within(observed: f64, target: f64, tol: f64) -> bool {
    (observed - target).abs() <= tol
}

fn tally<'a>(report: &'a SimReport, rule: &str) -> &'a SimTally {
    report
        .tallies
        .iter()
        .find(|t| t.rule == rule)
        .unwrap_or_else(|| panic!("no tally for rule {rule}"))
}

// 1. Random-design selection-count reproduction at n=100, c=0.4, alpha=0.2,
//    normal errors, 1000 replications, inner bootstrap N=1000.
#[test]
fn criterion_1_selection_counts_random_design() {
    let mut scenario = SimScenario::new(Setting::I, 100, 0.4, 0.2, ErrorDist::StandardNormal);
    scenario.reps = 1000;
    scenario.boot_reps = 1000;
    scenario.seed = 1;
    let report = run_trials(&scenario).unwrap();

    let mut c = Criterion::new("1 (selection counts, random design)");
    c.clause(
        format!("no numerical failures (got {})", report.failures),
        report.failures == 0,
    );
    let kbt = tally(&report, "KBT(nu=0.05)");
    c.clause(
        format!("KBT(0.05) exact-identification count {} in 940+-40", kbt.true_selected),
        within(kbt.true_selected as f64, 940.0, 40.0),
    );
    let kbic = tally(&report, "KBIC");
    c.clause(
        format!("KBIC exact-identification count {} in 62+-40", kbic.true_selected),
        within(kbic.true_selected as f64, 62.0, 40.0),
    );
    let kaic = tally(&report, "KAIC");
    c.clause(
        format!("KAIC over-selection count {} in 965+-40", kaic.over_specified),
        within(kaic.over_specified as f64, 965.0, 40.0),
    );
    let avg = kaic.avg_spurious().unwrap_or(f64::NAN);
    c.clause(
        format!("KAIC average spurious count {avg:.3} in 3.69+-0.5"),
        within(avg, 3.69, 0.5),
    );
    c.finish();
}

// 2. Orthonormal-design selection-count reproduction at n=100, c=0.2,
//    alpha=0.4, standardized exponential errors.
#[test]
fn criterion_2_selection_counts_diagonal_design() {
    let mut scenario = SimScenario::new(
        Setting::II,
        100,
        0.2,
        0.4,
        ErrorDist::StandardizedExponential,
    );
    scenario.reps = 1000;
    scenario.boot_reps = 1000;
    scenario.seed = 1;
    let report = run_trials(&scenario).unwrap();

    let mut c = Criterion::new("2 (selection counts, diagonal design)");
    c.clause(
        format!("no numerical failures (got {})", report.failures),
        report.failures == 0,
    );
    let kaic = tally(&report, "KAIC");
    c.clause(
        format!("KAIC over-selects in every replicate (got {})", kaic.over_specified),
        kaic.over_specified == 1000,
    );
    let avg = kaic.avg_spurious().unwrap_or(f64::NAN);
    c.clause(
        format!("KAIC average spurious count {avg:.3} in 15.31+-1.0"),
        within(avg, 15.31, 1.0),
    );
    // The miss count of the bootstrap rule in this cell is extremely
    // sensitive to the multiplier's tail beyond its matched fourth moment:
    // even the oracle multiplier (the data law itself) lands near 470/1000
    // here, and the kurtosis-clamped matched sampler lands near 310/1000.
    let kbt = tally(&report, "KBT(nu=0.05)");
    c.clause(
        format!("KBT(0.05) miss count {} in 597+-50", kbt.under_specified),
        within(kbt.under_specified as f64, 597.0, 50.0),
    );
    c.finish();
}

// 3. Almost-sure-limit deviations at n=2000, c=alpha=0.2, normal errors,
//    one draw per seed over twenty seeds.
#[test]
fn criterion_3_null_limit_deviations() {
    let mut c = Criterion::new("3 (null limit deviations)");
    for seed in 1..=20u64 {
        let report =
            verify_limits(2000, 0.2, 0.2, ErrorDist::StandardNormal, 1, None, seed).unwrap();
        let mean_dev = report.records[0].observed;
        let max_dev = report.records[1].observed;
        // The max over 400 deviations of scale sqrt(G_1/p) ~ 0.027 sits at
        // ~0.087 with ~15% mass above 0.1, so this bound is knife-edge by
        // construction; it is asserted as pinned.
        c.clause(
            format!("seed {seed}: |mean - 1/3| = {mean_dev:.5} < 0.01, max = {max_dev:.5} < 0.1"),
            mean_dev < 0.01 && max_dev < 0.1,
        );
    }
    c.finish();
}

// 4. Fluctuation variance of one spurious statistic at n=1000, c=alpha=0.2,
//    normal errors, 2000 replications: within 10% of 8/27.
#[test]
fn criterion_4_spurious_fluctuation_variance() {
    let report =
        verify_clt_spurious(1000, 0.2, 0.2, 1, ErrorDist::StandardNormal, 2000, 1).unwrap();
    let record = &report.records[0];
    let mut c = Criterion::new("4 (spurious fluctuation variance)");
    c.clause(
        format!("formula target {:.6} equals 0.296296 to 1e-6", record.target),
        within(record.target, 0.296296, 1e-6),
    );
    let rel = (record.observed - record.target).abs() / record.target;
    c.clause(
        format!(
            "empirical variance {:.6} within 10% of {:.6} (rel {:.3})",
            record.observed, record.target, rel
        ),
        rel <= 0.10,
    );
    c.finish();
}

// 5. Kurtosis estimator unbiasedness at n=500, p=100, k=50 over 500
//    replications for three generators.
#[test]
fn criterion_5_kurtosis_estimator() {
    let mut c = Criterion::new("5 (kurtosis estimator)");
    let cases = [
        (ErrorDist::StandardNormal, 0.0),
        (ErrorDist::StandardizedUniform, -1.2),
        (ErrorDist::StandardizedChiSquared { df: 12.0 }, 1.0),
    ];
    for (law, target) in cases {
        let report = verify_tau(law, 500, 100, 50, 500, 1).unwrap();
        let record = &report.records[0];
        c.clause(
            format!(
                "{}: mean {:.4} within 3 SE ({:.4}) of {target}",
                law.label(),
                record.observed,
                record.tolerance
            ),
            record.pass == Some(true),
        );
    }
    c.finish();
}

// 6. Normal-theory representation: two-sample Kolmogorov-Smirnov between
//    2000 statistics (n=200, p=40, k=40, null model) and 2000 draws of the
//    chi-square ratio, at the 1% level, over ten seeds with >= 9 passes.
#[test]
fn criterion_6_chisq_ratio_oracle_equivalence() {
    fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let f = i as f64 / a.len() as f64;
            let g = j as f64 / b.len() as f64;
            d = d.max((f - g).abs());
        }
        d
    }

    let draws = 2000usize;
    // critical value at the 1% level: sqrt(-ln(0.005)/2) * sqrt(2/draws)
    let crit = (-(0.005f64).ln() / 2.0).sqrt() * ((2 * draws) as f64 / (draws * draws) as f64).sqrt();
    let dims = Dimensions::new(200, 40, 40).unwrap();

    let mut passes = 0;
    let mut c = Criterion::new("6 (chi-square ratio representation)");
    for seed in 1..=10u64 {
        let mut design_rng = substream(child_seed(seed, u64::MAX), 0);
        let x = DMatrix::from_fn(200, 40, |_, _| design_rng.random::<f64>() * 4.0 + 1.0);
        let design = DesignCache::compute(&x).unwrap();
        let mut stats: Vec<f64> = (0..draws as u64)
            .into_par_iter()
            .map(|draw| {
                let e = ErrorDist::StandardNormal
                    .fill(200, 40, &mut substream(seed, draw))
                    .unwrap();
                let ds = RegressionDataset::with_design(e, x.clone(), &design).unwrap();
                let cache = ProjectionCache::with_design(&ds, &design).unwrap();
                koo_statistics(&ds, &cache).unwrap().kappa[0]
            })
            .collect();
        let mut oracle_rng = substream(child_seed(seed, 7), 0);
        let mut oracle: Vec<f64> = (0..draws)
            .map(|_| chisq_ratio_oracle_sample(&dims, 0.0, &mut oracle_rng))
            .collect();
        let d = ks_statistic(&mut stats, &mut oracle);
        let pass = d < crit;
        println!("  seed {seed}: KS D = {d:.5} vs critical {crit:.5} -> {pass}");
        if pass {
            passes += 1;
        }
    }
    c.clause(
        format!("{passes}/10 seeds accept equality at the 1% level (need >= 9)"),
        passes >= 9,
    );
    c.finish();
}

// 7. Family-wise error calibration of the bootstrap threshold: null model,
//    nu=0.05, N=1000, n=100, p=k=20, 1000 outer replications.
#[test]
fn criterion_7_bootstrap_fwer() {
    let (n, p, k) = (100usize, 20usize, 20usize);
    let outer = 1000u64;
    let seed = 1u64;
    let rejections: usize = (0..outer)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep);
            let x = DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 4.0 + 1.0);
            let e = ErrorDist::StandardNormal.fill(n, p, &mut rng).unwrap();
            let design = DesignCache::compute(&x).unwrap();
            let ds = RegressionDataset::with_design(e, x, &design).unwrap();
            let cache = ProjectionCache::with_design(&ds, &design).unwrap();
            let profile = koo_statistics(&ds, &cache).unwrap();
            let tau = excess_kurtosis_estimate(&ds, &cache).unwrap();
            let sampler = matched_sampler(tau.tau_hat).unwrap();
            let config =
                BootstrapConfig::new(0.05, 1000, child_seed(seed, rep), sampler, p);
            let threshold = bootstrap_threshold(&cache.knockout_dirs, ds.x(), &config).unwrap();
            let max_stat = profile.kappa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            usize::from(max_stat > threshold.value)
        })
        .sum();
    let rate = rejections as f64 / outer as f64;
    let mut c = Criterion::new("7 (bootstrap family-wise error)");
    c.clause(
        format!("rejection frequency {rate:.4} in [0.03, 0.07]"),
        (0.03..=0.07).contains(&rate),
    );
    c.finish();
}

// 8. Algebraic identity suite: exact / 1e-8 relations, tally conservation
//    and worker-count determinism.
#[test]
fn criterion_8_algebraic_identities() {
    let mut c = Criterion::new("8 (algebraic identities)");

    // log scale equals the determinant ratio; shift scale is exact.
    {
        let mut rng = substream(81, 0);
        let x = DMatrix::from_fn(14, 3, |_, _| rng.random::<f64>() * 4.0 + 1.0);
        let y = ErrorDist::StandardNormal.fill(14, 3, &mut rng).unwrap();
        let ds = build_dataset(y.clone(), x.clone()).unwrap();
        let cache = ProjectionCache::compute(&ds).unwrap();
        let profile = koo_statistics(&ds, &cache).unwrap();
        let a = log_lr_statistics(&profile);
        let cstat = lawley_hotelling_statistics(&profile);
        let gram_inv = x.tr_mul(&x).try_inverse().unwrap();
        let q = DMatrix::identity(14, 14) - &x * gram_inv * x.transpose();
        let log_det_full = y.tr_mul(&(&q * &y)).determinant().ln();
        let mut worst: f64 = 0.0;
        for j in 0..3 {
            let others = x.clone().remove_column(j);
            let g = others.tr_mul(&others).try_inverse().unwrap();
            let qj = DMatrix::identity(14, 14) - &others * g * others.transpose();
            let log_det_j = y.tr_mul(&(&qj * &y)).determinant().ln();
            worst = worst.max((a[j] - (log_det_j - log_det_full)).abs());
            assert_eq!(cstat[j], 3.0 + profile.kappa[j]);
            assert_eq!(a[j], profile.kappa[j].ln_1p());
        }
        c.clause(
            format!("log scale matches determinant ratio within 1e-8 (worst {worst:.2e})"),
            worst < 1e-8,
        );
        c.clause("shift scale is p + statistic exactly".to_string(), true);
    }

    // fast knockout directions match the per-column residualization oracle
    {
        let mut rng = substream(82, 0);
        let x = DMatrix::from_fn(30, 8, |_, _| rng.random::<f64>() * 4.0 + 1.0);
        let fast = knockout_directions(&x).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..8 {
            let others = x.clone().remove_column(j);
            let xj = x.column(j).into_owned();
            let gram = others.tr_mul(&others);
            let coef = gram.cholesky().unwrap().solve(&others.tr_mul(&xj));
            let resid = xj - &others * coef;
            let oracle = &resid / resid.norm();
            worst = worst.max((fast.column(j) - oracle).amax());
        }
        c.clause(
            format!("one-shot directions match the per-column oracle (worst {worst:.2e})"),
            worst < 1e-8,
        );
    }

    // invariance under response transform and predictor scaling
    {
        let mut rng = substream(83, 0);
        let x = DMatrix::from_fn(40, 6, |_, _| rng.random::<f64>() * 4.0 + 1.0);
        let y = ErrorDist::StandardNormal.fill(40, 5, &mut rng).unwrap();
        let t = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() * 0.4)
            + DMatrix::identity(5, 5) * 2.0;
        let kappa = |y: &DMatrix<f64>, x: &DMatrix<f64>| -> Vec<f64> {
            let ds = build_dataset(y.clone(), x.clone()).unwrap();
            let cache = ProjectionCache::compute(&ds).unwrap();
            koo_statistics(&ds, &cache).unwrap().kappa
        };
        let base = kappa(&y, &x);
        let transformed = kappa(&(&y * &t), &x);
        let mut scaled_x = x.clone();
        scaled_x.column_mut(2).scale_mut(-11.0);
        let scaled = kappa(&y, &scaled_x);
        let worst_t = base
            .iter()
            .zip(&transformed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let worst_s = base
            .iter()
            .zip(&scaled)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        c.clause(
            format!("invariance under response transform (worst {worst_t:.2e})"),
            worst_t < 1e-8,
        );
        c.clause(
            format!("invariance under predictor scaling (worst {worst_s:.2e})"),
            worst_s < 1e-8,
        );
    }

    // tally conservation and worker-count determinism
    {
        let mut scenario = SimScenario::new(Setting::I, 60, 0.2, 0.15, ErrorDist::StandardNormal);
        scenario.reps = 16;
        scenario.boot_reps = 24;
        scenario.seed = 5;
        scenario.workers = Some(1);
        let a = run_trials(&scenario).unwrap();
        scenario.workers = Some(8);
        let b = run_trials(&scenario).unwrap();
        c.clause(
            "tallies conserve replicate counts".to_string(),
            a.tallies.iter().all(|t| t.total() == 16) && a.failures == 0,
        );
        c.clause(
            "simulation tallies identical for 1 and 8 workers".to_string(),
            a.tallies == b.tallies,
        );

        let mut rng = substream(84, 0);
        let x = DMatrix::from_fn(50, 8, |_, _| rng.random::<f64>() * 4.0 + 1.0);
        let dirs = knockout_directions(&x).unwrap();
        let mut config = BootstrapConfig::new(0.05, 128, 9, ErrorDist::StandardNormal, 10);
        config.workers = Some(1);
        let t1 = bootstrap_threshold(&dirs, &x, &config).unwrap();
        config.workers = Some(8);
        let t8 = bootstrap_threshold(&dirs, &x, &config).unwrap();
        c.clause(
            format!(
                "bootstrap threshold bit-identical for 1 and 8 workers ({} vs {})",
                t1.value, t8.value
            ),
            t1.value.to_bits() == t8.value.to_bits(),
        );
    }

    c.finish();
}
