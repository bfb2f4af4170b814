//! End-to-end tests of the `koo` binary: ingestion, report emission, exit
//! codes and reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

fn koo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

struct TempFile {
    path: PathBuf,
}

impl TempFile {
    fn new(name: &str, contents: &str) -> Self {
        let path = std::env::temp_dir().join(format!(
            "koo-cli-test-{}-{}",
            std::process::id(),
            name
        ));
        std::fs::write(&path, contents).unwrap();
        TempFile { path }
    }

    fn path(&self) -> &str {
        self.path.to_str().unwrap()
    }
}

impl Drop for TempFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

// Deterministic pseudo-random numbers for building test tables.
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// A table shaped like a small chemometrics study: 56 rows, 22 predictors,
/// 6 responses (positive, so the log transform applies).
fn chem_like_table(delim: char) -> String {
    let mut rng = Lcg(42);
    let mut s = String::new();
    let headers: Vec<String> = (1..=22)
        .map(|j| format!("temp{j}"))
        .chain((1..=6).map(|j| format!("out{j}")))
        .collect();
    s.push_str(&headers.join(&delim.to_string()));
    s.push('\n');
    for _ in 0..56 {
        let x: Vec<f64> = (0..22).map(|_| 1.0 + 4.0 * rng.next_f64()).collect();
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
        for j in 0..6 {
            let signal = x[0] - 0.5 * x[2] + 0.25 * x[4];
            let y = (signal + 2.0 * rng.next_f64() + 0.1 * j as f64).exp() / 20.0;
            row.push(format!("{y:.6}"));
        }
        s.push_str(&row.join(&delim.to_string()));
        s.push('\n');
    }
    s
}

#[test]
fn select_reports_chem_like_dimensions() {
    let file = TempFile::new("chem.csv", &chem_like_table(','));
    let out = koo(&[
        "select",
        "--input",
        file.path(),
        "--responses",
        "23-28",
        "--predictors",
        "1-22",
        "--log-responses",
        "--rules",
        "kbt:nu=0.05,n=200,kaic,kbic,kcp",
        "--seed",
        "7",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["dims"]["n"], 56);
    assert_eq!(json["dims"]["p"], 6);
    assert_eq!(json["dims"]["k"], 22);
    assert_eq!(json["ranked"].as_array().unwrap().len(), 22);
    assert_eq!(json["rules"].as_array().unwrap().len(), 4);
    // the planted signal columns rank on top
    assert_eq!(json["ranked"][0]["id"], 1);
    let flags = &json["flags"];
    assert_eq!(flags["bernoulli_sign_convention"], "plus");
}

#[test]
fn select_json_roundtrips_cutoffs_bit_exactly() {
    let file = TempFile::new("roundtrip.csv", &chem_like_table(','));
    let args = [
        "select",
        "--input",
        file.path(),
        "--responses",
        "23-28",
        "--predictors",
        "1-22",
        "--rules",
        "kbt:nu=0.05,n=100,kaic",
        "--seed",
        "3",
    ];
    let a = koo(&args);
    let b = koo(&args);
    assert!(a.status.success());
    // identical bytes across runs with the same seed
    assert_eq!(stdout(&a), stdout(&b));
    let json: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    // re-serializing the parsed cutoff reproduces the exact float
    for rule in json["rules"].as_array().unwrap() {
        let cutoff = rule["cutoff"].as_f64().unwrap();
        let reprinted: f64 = serde_json::from_str(&serde_json::to_string(&cutoff).unwrap()).unwrap();
        assert_eq!(cutoff.to_bits(), reprinted.to_bits());
    }
}

#[test]
fn tsv_and_json_rankings_agree() {
    let file = TempFile::new("agree.csv", &chem_like_table(','));
    let base = [
        "select",
        "--input",
        file.path(),
        "--responses",
        "23-28",
        "--predictors",
        "1-22",
        "--rules",
        "kaic,kbic",
        "--seed",
        "5",
    ];
    let json_out = koo(&base);
    let mut tsv_args = base.to_vec();
    tsv_args.extend(["--format", "tsv"]);
    let tsv_out = koo(&tsv_args);
    assert!(json_out.status.success() && tsv_out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&json_out)).unwrap();
    let tsv = stdout(&tsv_out);
    let mut lines = tsv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split('\t').count(), 4 + 2);
    for (line, ranked) in lines.zip(json["ranked"].as_array().unwrap()) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields[1].parse::<u64>().unwrap(), ranked["id"].as_u64().unwrap());
        let kappa_tsv: f64 = fields[3].parse().unwrap();
        assert_eq!(kappa_tsv.to_bits(), ranked["kappa"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn tab_delimited_input_parses_identically() {
    let csv_file = TempFile::new("c.csv", &chem_like_table(','));
    let tsv_file = TempFile::new("t.tsv", &chem_like_table('\t'));
    let run = |path: &str, delim: &str| {
        let out = koo(&[
            "select",
            "--input",
            path,
            "--delimiter",
            delim,
            "--responses",
            "23-28",
            "--predictors",
            "1-22",
            "--rules",
            "kaic",
            "--seed",
            "2",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    assert_eq!(run(csv_file.path(), "comma"), run(tsv_file.path(), "tab"));
}

#[test]
fn log_transform_rejects_nonpositive_responses() {
    let table = "x1,x2,y1\n1.0,2.0,3.0\n2.0,1.0,0.0\n3.0,4.0,1.0\n4.0,3.0,2.0\n";
    let file = TempFile::new("logzero.csv", table);
    let out = koo(&[
        "select",
        "--input",
        file.path(),
        "--responses",
        "y1",
        "--predictors",
        "x1,x2",
        "--log-responses",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("log transform"));
}

#[test]
fn missing_values_are_rejected_with_row_numbers() {
    let table = "x1,x2,y1\n1.0,2.0,3.0\n2.0,NA,1.0\n3.0,4.0,1.0\n4.0,3.0,\n";
    let file = TempFile::new("missing.csv", table);
    let out = koo(&[
        "select",
        "--input",
        file.path(),
        "--responses",
        "y1",
        "--predictors",
        "x1,x2",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("missing"), "{err}");
    assert!(err.contains('2') && err.contains('4'), "{err}");
}

#[test]
fn ragged_and_non_numeric_rows_fail_validation() {
    let ragged = TempFile::new("ragged.csv", "a,b,c\n1,2,3\n4,5\n");
    let out = koo(&[
        "select",
        "--input",
        ragged.path(),
        "--responses",
        "c",
        "--predictors",
        "a,b",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let text = TempFile::new("text.csv", "a,b,c\n1,2,3\n4,five,6\n7,8,9\n10,11,12\n");
    let out = koo(&[
        "select",
        "--input",
        text.path(),
        "--responses",
        "c",
        "--predictors",
        "a,b",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("five"));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = koo(&[
        "select",
        "--input",
        "/nonexistent/nope.csv",
        "--responses",
        "1",
        "--predictors",
        "2",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn overlapping_selectors_fail_validation() {
    let file = TempFile::new("overlap.csv", &chem_like_table(','));
    let out = koo(&[
        "select",
        "--input",
        file.path(),
        "--responses",
        "1-6",
        "--predictors",
        "5-10",
        "--rules",
        "kaic",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("both response and predictor"));
}

#[test]
fn threshold_is_reproducible_across_worker_counts() {
    let file = TempFile::new("thresh.csv", &chem_like_table(','));
    let run = |workers: &str| {
        let out = koo(&[
            "threshold",
            "--input",
            file.path(),
            "--responses",
            "23-28",
            "--predictors",
            "1-22",
            "--nu",
            "0.05",
            "--boot-reps",
            "200",
            "--seed",
            "11",
            "--workers",
            workers,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        stdout(&out)
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn simulate_emits_conserving_tallies_in_both_formats() {
    let out = koo(&[
        "simulate", "--setting", "II", "--dist", "iv", "--n", "60", "--c", "0.2", "--alpha",
        "0.2", "--reps", "6", "--boot-reps", "30", "--seed", "4", "--format", "tsv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = stdout(&out);
    let lines: Vec<&str> = tsv.lines().collect();
    assert!(lines[0].starts_with("metric\tKAIC\tKBIC\tKCp\tKBT(nu=0)\tKBT(nu=0.05)"));
    let total_line = lines.iter().find(|l| l.starts_with("total")).unwrap();
    for v in total_line.split('\t').skip(1) {
        assert_eq!(v.parse::<usize>().unwrap(), 6);
    }

    let out_json = koo(&[
        "simulate", "--setting", "II", "--dist", "iv", "--n", "60", "--c", "0.2", "--alpha",
        "0.2", "--reps", "6", "--boot-reps", "30", "--seed", "4", "--format", "json",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out_json)).unwrap();
    assert_eq!(json["failures"], 0);
    // numeric agreement between the two emissions
    let us_row = lines.iter().find(|l| l.starts_with("U-S")).unwrap();
    let us_tsv: Vec<usize> = us_row
        .split('\t')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    for (tally, expected) in json["tallies"].as_array().unwrap().iter().zip(us_tsv) {
        assert_eq!(tally["under_specified"].as_u64().unwrap() as usize, expected);
    }
    // A-S blank when nothing over-specified
    let as_row = lines.iter().find(|l| l.starts_with("A-S")).unwrap();
    for (tally, field) in json["tallies"]
        .as_array()
        .unwrap()
        .iter()
        .zip(as_row.split('\t').skip(1))
    {
        match tally["avg_spurious"].as_f64() {
            None => assert!(field.is_empty(), "expected blank, got '{field}'"),
            Some(v) => assert_eq!(field.parse::<f64>().unwrap(), v),
        }
    }
}

#[test]
fn verify_and_figure1_run_end_to_end() {
    let out = koo(&[
        "verify", "--check", "limits", "--n", "200", "--c", "0.2", "--alpha", "0.2", "--draws",
        "1", "--planted-delta", "1.0", "--seed", "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 4);

    let out = koo(&[
        "figure1", "--design", "diagonal", "--n", "120", "--k", "20", "--p", "20", "--laws",
        "normal,uniform", "--reps", "1", "--seed", "6", "--format", "tsv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tsv = stdout(&out);
    assert_eq!(tsv.lines().count(), 3);
    assert!(tsv.starts_with("law\t"));
}

#[test]
fn intercept_and_keep_columns_bypass_selection() {
    let file = TempFile::new("keep.csv", &chem_like_table(','));
    let out = koo(&[
        "select",
        "--input",
        file.path(),
        "--responses",
        "23-28",
        "--predictors",
        "1-22",
        "--intercept",
        "--keep",
        "2",
        "--rules",
        "kaic",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["dims"]["k"], 23);
    assert_eq!(json["dims"]["k_candidates"], 21);
    assert_eq!(json["ranked"].as_array().unwrap().len(), 21);
    let keep_names: Vec<&str> = json["always_keep_names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(keep_names, vec!["temp2", "(intercept)"]);
    for rule in json["rules"].as_array().unwrap() {
        for id in rule["selected"].as_array().unwrap() {
            assert_ne!(id.as_u64().unwrap(), 2);
            assert_ne!(id.as_u64().unwrap(), 23);
        }
    }
}
