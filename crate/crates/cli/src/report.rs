use crate::checks::InequalityCheck;
use crate::config::RunConfig;
use crate::error::RunError;
use offdiag_core::criteria::{EvidenceDetail, NelsonOutcome};
use offdiag_core::defect::DefectSummary;
use offdiag_core::{CriterionVerdict, DefectSolution, OffDiagReport};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo { name: "offdiag".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorInfo {
    pub label: String,
    pub k: usize,
    pub band_order: usize,
    pub smoothness_shift: usize,
    pub positive: bool,
}

/// The deterministic body: identical config and seed give identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub seed: u64,
    /// Re-runnable as is.
    pub config: RunConfig,
    pub operator: OperatorInfo,
    pub verdict: CriterionVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nelson: Option<NelsonOutcome>,
    pub sequences: Vec<OffDiagReport>,
    pub defect: Vec<DefectSummary>,
    pub inequalities: Vec<InequalityCheck>,
    pub tables: Vec<String>,
}

/// Wall-clock figures, written next to the report so the body stays reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u64,
    pub classify_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn num(v: f64) -> String {
    // shortest round-trip form; empty for NaN
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "+-_.".contains(c) { c } else { '_' }).collect()
}

impl Table {
    fn new(name: String, header: &[&str]) -> Self {
        Table { name, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn sequences(r: &OffDiagReport) -> Self {
        let mut t = Table::new(format!("sequences-{}.csv", slug(&r.probe_id)), &["level", "b", "c", "d", "xi", "slack"]);
        for row in &r.rows {
            t.rows.push(vec![row.level.to_string(), num(row.b), num(row.c), opt(row.d), num(row.xi), opt(row.slack)]);
        }
        t
    }

    pub fn defect_vector(id: &str, s: &DefectSolution) -> Self {
        let mut t = Table::new(format!("{}.csv", slug(id)), &["degree", "re", "im", "tail_mass"]);
        for (n, re, im, tail) in s.export_rows() {
            t.rows.push(vec![n.to_string(), num(re), num(im), num(tail)]);
        }
        t
    }

    pub fn inequalities(checks: &[InequalityCheck]) -> Self {
        let mut t = Table::new("inequalities.csv".into(), &["probe", "check", "levels", "violations", "worst_excess"]);
        for c in checks {
            t.rows.push(vec![c.probe.clone(), c.check.clone(), c.levels.to_string(), c.violations.to_string(), num(c.worst_excess)]);
        }
        t
    }

    /// One row per piece of evidence: criterion id, its verdict, and the kind of record.
    pub fn evidence(v: &CriterionVerdict) -> Self {
        let mut t = Table::new("evidence.csv".into(), &["criterion", "verdict", "detail"]);
        for e in &v.evidence {
            let kind = match &e.detail {
                EvidenceDetail::Carleman(_) => "carleman",
                EvidenceDetail::Deficiency(_) => "deficiency",
                EvidenceDetail::Positivity(_) => "positivity",
                EvidenceDetail::PositiveDefect(_) => "positive_defect",
                EvidenceDetail::Ladder { .. } => "ladder",
                EvidenceDetail::Contrapositive(c) => c.criterion.as_str(),
                EvidenceDetail::BoundedNorm(_) => "bounded_norm",
                EvidenceDetail::Converse { .. } => "converse",
                EvidenceDetail::DefectVectors { .. } => "defect_vectors",
                EvidenceDetail::Skipped { .. } => "skipped",
            };
            t.rows.push(vec![e.criterion.clone(), verdict_str(e.verdict).into(), kind.into()]);
        }
        t
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }
}

pub fn verdict_str(v: offdiag_core::Verdict) -> &'static str {
    match v {
        offdiag_core::Verdict::Esa => "ESA",
        offdiag_core::Verdict::NotEsa => "NotESA",
        offdiag_core::Verdict::Inconclusive => "Inconclusive",
    }
}

pub fn report_bytes(r: &Report) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(r).expect("report serializes");
    b.push(b'\n');
    b
}

fn io_err(dir: &Path, e: std::io::Error) -> RunError {
    RunError::config("", "outputs.dir", format!("{}: {e}", dir.display()))
}

pub fn write_all(dir: &Path, report: &Report, tables: &[Table], timing: &Timing) -> Result<(), RunError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    std::fs::write(dir.join(REPORT_FILE), report_bytes(report)).map_err(|e| io_err(dir, e))?;
    std::fs::write(dir.join(TIMING_FILE), serde_json::to_vec_pretty(timing).expect("timing serializes")).map_err(|e| io_err(dir, e))?;
    for t in tables {
        std::fs::write(dir.join(&t.name), t.to_csv()).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}
