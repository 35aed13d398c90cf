//! One-parameter sweeps: every grid point is an independent analysis of the
//! configuration with the parameter substituted, merged in grid order.

use crate::analyze::{analyze, Analysis};
use crate::config::RunConfig;
use crate::error::{ErrorKind, RunError};
use crate::report::{verdict_str, Table};
use offdiag_core::criteria::{EvidenceDetail, CRIT_CARLEMAN};
use offdiag_core::{SeqExpr, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub param: String,
    pub values: Vec<f64>,
}

const RESERVED: &[&str] = &["n", "p", "q", "i", "pi", "e", "sqrt", "ln", "log", "exp", "abs"];
const MAX_POINTS: usize = 10_000;

impl Grid {
    /// `param=start:stop:step`, inclusive of `stop` up to rounding.
    pub fn parse(text: &str) -> Result<Grid, RunError> {
        let bad = |msg: String| RunError::config("--grid", "", msg);
        let (param, range) = text.split_once('=').ok_or_else(|| bad(format!("{text:?}: expected param=start:stop:step")))?;
        let param = param.trim();
        let ident = param.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && param.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ident || RESERVED.contains(&param) || is_generator(param) {
            return Err(bad(format!("{param:?} is not a usable parameter name")));
        }
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("{range:?}: expected start:stop:step")));
        }
        let nums: Vec<f64> = parts.iter().map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")))).collect::<Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !nums.iter().all(|v| v.is_finite()) || step <= 0.0 || stop < start {
            return Err(bad("need finite start ≤ stop and step > 0".into()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        if count > MAX_POINTS {
            return Err(bad(format!("{count} points exceed the limit of {MAX_POINTS}")));
        }
        // round away accumulated binary noise so 0.5 + 3·0.25 prints as 1.25
        let values = (0..count).map(|i| round12(start + i as f64 * step)).collect();
        Ok(Grid { param: param.into(), values })
    }
}

fn is_generator(s: &str) -> bool {
    (s.starts_with('p') || s.starts_with('q')) && s.len() > 1 && s[1..].chars().all(|c| c.is_ascii_digit())
}

fn round12(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Replaces whole-word occurrences of `param` by `(value)`.
fn substitute(text: &str, param: &str, value: f64) -> String {
    let mut out = String::with_capacity(text.len());
    let b = text.as_bytes();
    let word = |c: u8| c.is_ascii_alphanumeric() || c == b'_';
    let mut i = 0;
    while i < b.len() {
        if text[i..].starts_with(param) && (i == 0 || !word(b[i - 1])) && b.get(i + param.len()).map_or(true, |&c| !word(c)) {
            out.push_str(&format!("({value})"));
            i += param.len();
        } else {
            let ch = text[i..].chars().next().unwrap();
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

/// The configuration for one grid point; the parameter must occur somewhere.
pub fn bind(config: &RunConfig, grid: &Grid, value: f64) -> Result<RunConfig, RunError> {
    let mut used = false;
    for (field, e) in config.operator.expressions() {
        if substitute(e, &grid.param, 0.0) != e {
            used = true;
            // for sequence rules the parser must agree that it is a free parameter
            if field.starts_with("operator.a") || field.starts_with("operator.b") {
                if let Ok(s) = SeqExpr::parse(e) {
                    if !s.params().contains(&grid.param) {
                        return Err(RunError::config("", &field, format!("{:?} is not a free parameter of {e:?}", grid.param)));
                    }
                }
            }
        }
    }
    if !used {
        return Err(RunError::config("", "operator", format!("parameter {:?} does not occur in any operator expression", grid.param)));
    }
    Ok(RunConfig { operator: config.operator.map_expressions(|e| substitute(e, &grid.param, value)), ..config.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub verdict: Option<Verdict>,
    pub provenance: Option<String>,
    pub carleman: Option<Verdict>,
    pub n_plus: Option<usize>,
    pub n_minus: Option<usize>,
    pub stable: Option<bool>,
    /// Verdict and a stable deficiency estimate are both decisive and agree
    /// (`None` when either is not decisive).
    pub agreement: Option<bool>,
    pub directory: String,
    pub error: Option<String>,
}

pub struct SweepPoint {
    pub value: f64,
    pub directory: String,
    pub outcome: Result<Analysis, RunError>,
}

pub fn point_dir(grid: &Grid, value: f64) -> String {
    format!("{}={value}", grid.param)
}

/// Runs every point; failures are kept in place, never abort the sweep.
pub fn run_sweep(config: &RunConfig, grid: &Grid, seed: u64) -> Result<Vec<SweepPoint>, RunError> {
    // a parameter that is nowhere used is a configuration error, not a point failure
    bind(config, grid, grid.values[0])?;
    Ok(grid
        .values
        .par_iter()
        .map(|&v| SweepPoint { value: v, directory: point_dir(grid, v), outcome: bind(config, grid, v).and_then(|c| analyze(&c, seed)) })
        .collect())
}

pub fn summary_row(grid: &Grid, p: &SweepPoint) -> SweepRow {
    let mut row = SweepRow {
        param: grid.param.clone(),
        value: p.value,
        verdict: None,
        provenance: None,
        carleman: None,
        n_plus: None,
        n_minus: None,
        stable: None,
        agreement: None,
        directory: p.directory.clone(),
        error: None,
    };
    match &p.outcome {
        Err(e) => row.error = Some(e.to_string()),
        Ok(a) => {
            let v = &a.report.verdict;
            row.verdict = Some(v.verdict);
            row.provenance = Some(v.provenance.clone());
            row.carleman = v.evidence.iter().find(|e| e.criterion == CRIT_CARLEMAN && matches!(e.detail, EvidenceDetail::Carleman(_))).map(|e| e.verdict);
            if let Some(d) = &v.deficiency {
                row.n_plus = Some(d.n_plus);
                row.n_minus = Some(d.n_minus);
                row.stable = Some(d.is_stable());
                if d.is_stable() && v.verdict != Verdict::Inconclusive {
                    row.agreement = Some((v.verdict == Verdict::Esa) == d.stable_zero());
                }
            }
        }
    }
    row
}

pub fn summary_table(rows: &[SweepRow]) -> Table {
    let header = ["param", "value", "verdict", "provenance", "carleman", "n_plus", "n_minus", "stable", "agreement", "directory", "error"];
    let s = |v: Option<String>| v.unwrap_or_default();
    Table {
        name: "summary.csv".into(),
        header: header.iter().map(|h| h.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.param.clone(),
                    r.value.to_string(),
                    s(r.verdict.map(|v| verdict_str(v).into())),
                    s(r.provenance.clone()),
                    s(r.carleman.map(|v| verdict_str(v).into())),
                    s(r.n_plus.map(|v| v.to_string())),
                    s(r.n_minus.map(|v| v.to_string())),
                    s(r.stable.map(|v| v.to_string())),
                    s(r.agreement.map(|v| v.to_string())),
                    r.directory.clone(),
                    s(r.error.clone()),
                ]
            })
            .collect(),
    }
}

/// Exit status of a finished sweep: 2 if any point broke an invariant.
pub fn sweep_exit_code(points: &[SweepPoint]) -> i32 {
    let internal = points.iter().any(|p| match &p.outcome {
        Err(e) => e.kind == ErrorKind::Internal,
        Ok(a) => a.inequality_violations() > 0,
    });
    if internal {
        2
    } else {
        0
    }
}
