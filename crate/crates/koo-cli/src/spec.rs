//! Parsers for the small command-line mini-languages: error-law specs,
//! rule lists and column selectors.

use koo_core::ErrorDist;

use crate::error::{CliError, Result};

/// Parses an error-law spec such as `normal`, `chisq:12`, `bernoulli:0.3`,
/// `t:10`, `poisson:1`, `uniform`, `exponential`, or one of the simulation
/// case tags `i`..`vi`.
pub fn parse_dist(s: &str) -> Result<ErrorDist> {
    let s = s.trim().to_ascii_lowercase();
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (s.as_str(), None),
    };
    let num = |what: &str| -> Result<f64> {
        arg.ok_or_else(|| CliError::Parse(format!("{name} needs a parameter ({what})")))?
            .parse::<f64>()
            .map_err(|_| CliError::Parse(format!("bad {what} in '{s}'")))
    };
    let law = match name {
        "normal" | "gaussian" | "i" => ErrorDist::StandardNormal,
        "uniform" | "vi" => ErrorDist::StandardizedUniform,
        "exponential" | "exp" | "iv" => ErrorDist::StandardizedExponential,
        "chisq" | "chisquared" => ErrorDist::StandardizedChiSquared { df: num("df")? },
        "t" | "student" => ErrorDist::StandardizedT { df: num("df")? },
        "poisson" | "pois" => ErrorDist::StandardizedPoisson { lambda: num("lambda")? },
        "bernoulli" | "bern" => ErrorDist::StandardizedBernoulli { rho: num("rho")? },
        "ii" => ErrorDist::StandardizedT { df: 3.0 },
        "iii" => ErrorDist::StandardizedChiSquared { df: 3.0 },
        "v" => ErrorDist::StandardizedPoisson { lambda: 1.0 },
        other => {
            return Err(CliError::Parse(format!(
                "unknown error law '{other}' (try normal, uniform, exponential, chisq:DF, t:DF, poisson:LAMBDA, bernoulli:RHO, or a case tag i..vi)"
            )))
        }
    };
    law.validate()?;
    Ok(law)
}

/// The t law with df = 3 has unit variance but an infinite fourth moment;
/// it is accepted for data generation even though `validate` would reject a
/// generic df <= 2.
pub fn parse_data_dist(s: &str) -> Result<ErrorDist> {
    let lowered = s.trim().to_ascii_lowercase();
    if lowered == "ii" || lowered == "t:3" {
        return Ok(ErrorDist::StandardizedT { df: 3.0 });
    }
    parse_dist(s)
}

/// One rule request from the `--rules` list.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSpec {
    Kaic,
    Kbic,
    Kcp,
    Kbt { nu: f64, n_reps: Option<usize> },
    FixedMargin { vartheta: f64 },
}

/// Parses a comma-separated rule list; `key=value` tokens attach to the
/// preceding rule, e.g. `kbt:nu=0.05,n=1000,kaic,kbic`.
pub fn parse_rules(s: &str) -> Result<Vec<RuleSpec>> {
    let mut rules: Vec<RuleSpec> = Vec::new();
    for raw in s.split(',') {
        let token = raw.trim().to_ascii_lowercase();
        if token.is_empty() {
            continue;
        }
        let (head, inline_param) = match token.split_once(':') {
            Some((h, p)) => (h.trim().to_string(), Some(p.trim().to_string())),
            None => (token.clone(), None),
        };
        match head.as_str() {
            "kaic" | "aic" => rules.push(RuleSpec::Kaic),
            "kbic" | "bic" => rules.push(RuleSpec::Kbic),
            "kcp" | "cp" => rules.push(RuleSpec::Kcp),
            "kbt" | "boot" | "bootstrap" => {
                rules.push(RuleSpec::Kbt {
                    nu: 0.05,
                    n_reps: None,
                });
                if let Some(p) = inline_param {
                    apply_param(rules.last_mut().unwrap(), &p)?;
                }
            }
            "fixedmargin" | "margin" => {
                rules.push(RuleSpec::FixedMargin { vartheta: f64::NAN });
                if let Some(p) = inline_param {
                    apply_param(rules.last_mut().unwrap(), &p)?;
                }
            }
            _ if head.contains('=') => {
                let last = rules.last_mut().ok_or_else(|| {
                    CliError::Parse(format!("parameter '{token}' appears before any rule"))
                })?;
                apply_param(last, &token)?;
            }
            other => {
                return Err(CliError::Parse(format!(
                    "unknown rule '{other}' (try kbt, kaic, kbic, kcp, fixedmargin)"
                )))
            }
        }
    }
    if rules.is_empty() {
        return Err(CliError::Parse("empty rule list".to_string()));
    }
    for rule in &rules {
        if let RuleSpec::FixedMargin { vartheta } = rule {
            if !vartheta.is_finite() {
                return Err(CliError::Parse(
                    "fixedmargin needs vartheta=<value>".to_string(),
                ));
            }
        }
    }
    Ok(rules)
}

fn apply_param(rule: &mut RuleSpec, param: &str) -> Result<()> {
    let (key, value) = param
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("expected key=value, got '{param}'")))?;
    let key = key.trim();
    let value = value.trim();
    match (rule, key) {
        (RuleSpec::Kbt { nu, .. }, "nu") => {
            *nu = value
                .parse()
                .map_err(|_| CliError::Parse(format!("bad nu '{value}'")))?;
        }
        (RuleSpec::Kbt { n_reps, .. }, "n") => {
            *n_reps = Some(
                value
                    .parse()
                    .map_err(|_| CliError::Parse(format!("bad n '{value}'")))?,
            );
        }
        (RuleSpec::FixedMargin { vartheta }, "vartheta" | "theta") => {
            *vartheta = value
                .parse()
                .map_err(|_| CliError::Parse(format!("bad vartheta '{value}'")))?;
        }
        (_, other) => {
            return Err(CliError::Parse(format!(
                "parameter '{other}' does not apply to this rule"
            )))
        }
    }
    Ok(())
}

/// Column selector: comma-separated names, 1-based indices and index
/// ranges (`3-8`).
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    items: Vec<ColumnItem>,
}

#[derive(Debug, Clone)]
enum ColumnItem {
    Index(usize),
    Range(usize, usize),
    Name(String),
}

impl ColumnSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let mut items = Vec::new();
        for raw in s.split(',') {
            let token = raw.trim();
            if token.is_empty() {
                continue;
            }
            if let Ok(ix) = token.parse::<usize>() {
                if ix == 0 {
                    return Err(CliError::Parse("column indices are 1-based".to_string()));
                }
                items.push(ColumnItem::Index(ix));
            } else if let Some((a, b)) = token.split_once('-') {
                match (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
                    (Ok(lo), Ok(hi)) if lo >= 1 && hi >= lo => items.push(ColumnItem::Range(lo, hi)),
                    _ => items.push(ColumnItem::Name(token.to_string())),
                }
            } else {
                items.push(ColumnItem::Name(token.to_string()));
            }
        }
        if items.is_empty() {
            return Err(CliError::Parse("empty column selector".to_string()));
        }
        Ok(ColumnSpec { items })
    }

    /// Resolves to 0-based column indices against the header.
    pub fn resolve(&self, headers: &[String]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                ColumnItem::Index(ix) => {
                    if *ix > headers.len() {
                        return Err(CliError::Parse(format!(
                            "column index {ix} exceeds the {} columns present",
                            headers.len()
                        )));
                    }
                    out.push(ix - 1);
                }
                ColumnItem::Range(lo, hi) => {
                    if *hi > headers.len() {
                        return Err(CliError::Parse(format!(
                            "column range {lo}-{hi} exceeds the {} columns present",
                            headers.len()
                        )));
                    }
                    out.extend((lo - 1)..*hi);
                }
                ColumnItem::Name(name) => {
                    let pos = headers.iter().position(|h| h == name).ok_or_else(|| {
                        CliError::Parse(format!("no column named '{name}' in the header"))
                    })?;
                    out.push(pos);
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for ix in &out {
            if !seen.insert(*ix) {
                return Err(CliError::Parse(format!(
                    "column '{}' selected twice",
                    headers[*ix]
                )));
            }
        }
        Ok(out)
    }
}
