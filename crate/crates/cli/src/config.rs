//! Run configurations: JSON text, validated before anything is computed.

use crate::error::RunError;
use offdiag_core::criteria::COMMUTATOR_TOL;
use offdiag_core::diagnostics::CHAIN_REL_TOL;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorSpec,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub horizons: Horizons,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Outputs::is_default")]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Tridiagonal matrix with diagonal `a_n` and off-diagonal `b_n + i·b_im_n`.
    Jacobi {
        a: String,
        b: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_im: Option<String>,
    },
    Ncpoly {
        expr: String,
        #[serde(default = "one")]
        k: usize,
    },
    /// Commuting family `S_1, …, S_m`; the classified operator is `Σ S_i²`.
    Family { exprs: Vec<String>, k: usize },
}

fn one() -> usize {
    1
}

impl OperatorSpec {
    /// `(field path, expression)` for every expression string.
    pub fn expressions(&self) -> Vec<(String, &str)> {
        match self {
            OperatorSpec::Jacobi { a, b, b_im } => {
                let mut v = vec![("operator.a".to_string(), a.as_str()), ("operator.b".to_string(), b.as_str())];
                if let Some(e) = b_im {
                    v.push(("operator.b_im".into(), e.as_str()));
                }
                v
            }
            OperatorSpec::Ncpoly { expr, .. } => vec![("operator.expr".into(), expr.as_str())],
            OperatorSpec::Family { exprs, .. } => exprs.iter().enumerate().map(|(i, e)| (format!("operator.exprs[{i}]"), e.as_str())).collect(),
        }
    }

    pub fn map_expressions(&self, f: impl Fn(&str) -> String) -> OperatorSpec {
        match self {
            OperatorSpec::Jacobi { a, b, b_im } => OperatorSpec::Jacobi { a: f(a), b: f(b), b_im: b_im.as_deref().map(&f) },
            OperatorSpec::Ncpoly { expr, k } => OperatorSpec::Ncpoly { expr: f(expr), k: *k },
            OperatorSpec::Family { exprs, k } => OperatorSpec::Family { exprs: exprs.iter().map(|e| f(e)).collect(), k: *k },
        }
    }

    pub fn k(&self) -> usize {
        match self {
            OperatorSpec::Jacobi { .. } => 1,
            OperatorSpec::Ncpoly { k, .. } | OperatorSpec::Family { k, .. } => *k,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LadderSpec {
    #[default]
    Unit,
    Arithmetic {
        step: usize,
    },
    Explicit {
        cutoffs: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    /// `x_α ∝ 2^{−|α|}`, materialized up to `horizon` (default: what the tables need).
    Geometric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
    },
    /// Finitely supported vector; amplitudes `[re, im]` in graded basis order.
    Dense { id: String, amplitudes: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizons {
    /// Defect-solver horizons; the last two are compared.
    #[serde(default = "default_defect")]
    pub defect: Vec<usize>,
    #[serde(default = "default_series")]
    pub series: usize,
    /// Ladder levels `J` for the `b_j` sequence and the tables.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_defect() -> Vec<usize> {
    vec![2000, 4000]
}
fn default_series() -> usize {
    100_000
}
fn default_levels() -> usize {
    1000
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons { defect: default_defect(), series: default_series(), levels: default_levels() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Commutator residual accepted for a commuting family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commutator: Option<f64>,
    /// Relative slack for the inequality checks on defect vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inequality: Option<f64>,
}

impl Tolerances {
    pub fn commutator(&self) -> f64 {
        self.commutator.unwrap_or(COMMUTATOR_TOL)
    }
    pub fn inequality(&self) -> f64 {
        self.inequality.unwrap_or(CHAIN_REL_TOL)
    }
}

pub const TOL_MIN: f64 = 1e-15;
pub const TOL_MAX: f64 = 1e-2;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

impl Outputs {
    fn is_default(&self) -> bool {
        self.dir.is_none()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, RunError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| RunError::config(&shown, "", format!("cannot read: {e}")))?;
        let cfg = RunConfig::from_json(&text).map_err(|e| e.with_path(&shown))?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<RunConfig, RunError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| RunError::config("", "", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |field: &str, msg: String| Err(RunError::config("", field, msg));
        match &self.operator {
            OperatorSpec::Ncpoly { k, .. } | OperatorSpec::Family { k, .. } if *k == 0 => return bad("operator.k", "must be ≥ 1".into()),
            OperatorSpec::Family { exprs, .. } if exprs.is_empty() => return bad("operator.exprs", "empty family".into()),
            _ => {}
        }
        for (field, e) in self.operator.expressions() {
            if e.trim().is_empty() {
                return bad(&field, "empty expression".into());
            }
        }
        match &self.ladder {
            LadderSpec::Arithmetic { step: 0 } => return bad("ladder.step", "must be positive".into()),
            LadderSpec::Explicit { cutoffs } if cutoffs.is_empty() || cutoffs[0] == 0 || cutoffs.windows(2).any(|w| w[0] >= w[1]) => {
                return bad("ladder.cutoffs", "must be strictly increasing positive integers".into())
            }
            _ => {}
        }
        if self.horizons.defect.is_empty() {
            return bad("horizons.defect", "at least one horizon is required".into());
        }
        for (i, &n) in self.horizons.defect.iter().enumerate() {
            if n < 64 {
                return bad(&format!("horizons.defect[{i}]"), format!("{n} is too small (minimum 64)"));
            }
        }
        if self.horizons.series < 20 {
            return bad("horizons.series", format!("{} is too small (minimum 20)", self.horizons.series));
        }
        if self.horizons.levels == 0 {
            return bad("horizons.levels", "must be positive".into());
        }
        for (name, v) in [("commutator", self.tolerances.commutator), ("inequality", self.tolerances.inequality)] {
            if let Some(t) = v {
                if !(TOL_MIN..=TOL_MAX).contains(&t) {
                    return bad(&format!("tolerances.{name}"), format!("{t:e} outside [{TOL_MIN:e}, {TOL_MAX:e}]"));
                }
            }
        }
        for (i, p) in self.probes.iter().enumerate() {
            match p {
                ProbeSpec::Geometric { horizon: Some(0) } => return bad(&format!("probes[{i}].horizon"), "must be positive".into()),
                ProbeSpec::Dense { amplitudes, .. } if amplitudes.is_empty() => return bad(&format!("probes[{i}].amplitudes"), "empty vector".into()),
                ProbeSpec::Dense { amplitudes, .. } if amplitudes.iter().flatten().any(|v| !v.is_finite()) => {
                    return bad(&format!("probes[{i}].amplitudes"), "non-finite amplitude".into())
                }
                ProbeSpec::Dense { id, .. } if id.is_empty() => return bad(&format!("probes[{i}].id"), "empty id".into()),
                _ => {}
            }
        }
        Ok(())
    }

    /// The configuration as it must be echoed: seed resolved, output location dropped.
    pub fn echo(&self, seed: u64) -> RunConfig {
        RunConfig { outputs: Outputs::default(), seed: Some(seed), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_and_defaults() {
        let c = RunConfig::from_json(r#"{"operator": {"kind": "ncpoly", "expr": "p*q*p"}}"#).unwrap();
        assert_eq!(c.operator, OperatorSpec::Ncpoly { expr: "p*q*p".into(), k: 1 });
        assert_eq!(c.horizons, Horizons::default());
        assert_eq!(c.ladder, LadderSpec::Unit);
    }

    #[test]
    fn rejections_name_the_field() {
        let cases = [
            (r#"{"operator": {"kind": "jacobi", "a": "0"}}"#, "missing field `b`"),
            (r#"{"operator": {"kind": "jacobi", "a": "0", "b": "n", "expr": "q"}}"#, "unknown field"),
            (r#"{"operator": {"kind": "bogus"}}"#, "unknown variant"),
            (r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "tolerances": {"commutator": 0.5}}"#, "tolerances.commutator"),
            (r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "tolerances": {"inequality": 1e-16}}"#, "tolerances.inequality"),
            (r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "horizons": {"defect": [4000, 10]}}"#, "horizons.defect[1]"),
            (r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "horizons": {"levels": 0}}"#, "horizons.levels"),
            (r#"{"operator": {"kind": "ncpoly", "expr": "q"}, "ladder": {"rule": "explicit", "cutoffs": [3, 2]}}"#, "ladder.cutoffs"),
            (r#"{"operator": {"kind": "family", "exprs": [], "k": 2}}"#, "operator.exprs"),
        ];
        for (text, want) in cases {
            let e = RunConfig::from_json(text).unwrap_err().to_string();
            assert!(e.contains(want), "{text}: {e}");
        }
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_json(
            r#"{"operator": {"kind": "jacobi", "a": "0", "b": "n^2"}, "outputs": {"dir": "x"}, "probes": [{"kind": "geometric"}],
                "tolerances": {"inequality": 1e-9}}"#,
        )
        .unwrap();
        let echo = c.echo(7);
        assert_eq!(echo.outputs, Outputs::default());
        let back = RunConfig::from_json(&serde_json::to_string(&echo).unwrap()).unwrap();
        assert_eq!(back, echo);
    }
}
