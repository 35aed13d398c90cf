use crate::checks::{defect_vector_checks, positive_checks, total_violations, InequalityCheck};
use crate::config::{LadderSpec, OperatorSpec, ProbeSpec, RunConfig};
use crate::error::RunError;
use crate::report::{OperatorInfo, Report, Table, Timing, ToolInfo};
use log::info;
use offdiag_core::criteria::{nelson_verdict_tol, EvidenceDetail, NelsonOutcome};
use offdiag_core::defect::{solve_defect, DefectSummary};
use offdiag_core::diagnostics::detect_smoothness_shift;
use offdiag_core::ncpoly::Coefficients;
use offdiag_core::{
    classify, compile, compile_jacobi, parse_ncpoly, ClassifyConfig, DefectSolution, Eigentag, GradedOperator, GradedVector, JacobiSpec, L2Verdict, NcPoly,
    OffDiagReport, Probe, ProjectionLadder, RuleVector, SeqExpr, C64,
};
use std::time::Instant;

/// Degree cap for `b_j` and table levels when `k > 1`; block sizes grow with the layer.
pub const MULTIMODE_MAX_DEGREE: usize = 60;
/// Levels used for the inequality checks on defect vectors.
pub const CHECK_LEVELS: usize = 200;
/// Basis degree up to which a family's commutators are evaluated.
pub const COMMUTATOR_DEGREE: usize = 10;

pub struct Built {
    pub op: GradedOperator,
    pub family: Vec<GradedOperator>,
}

fn seq(text: &str, field: &str) -> Result<SeqExpr, RunError> {
    SeqExpr::parse(text).map_err(|e| RunError::from_core(e, field))
}

fn poly(text: &str, k: usize, field: &str) -> Result<NcPoly, RunError> {
    parse_ncpoly(text, k).map_err(|e| RunError::from_core(e, field))
}

pub fn build_operator(spec: &OperatorSpec) -> Result<Built, RunError> {
    match spec {
        OperatorSpec::Jacobi { a, b, b_im } => {
            let b_co = Coefficients::Rule { re: seq(b, "operator.b")?, im: b_im.as_deref().map(|e| seq(e, "operator.b_im")).transpose()? };
            let spec = JacobiSpec { a: Coefficients::Rule { re: seq(a, "operator.a")?, im: None }, b: b_co, length_hint: None, offset: 0 };
            let op = compile_jacobi(&spec).map_err(|e| RunError::from_core(e, "operator"))?;
            Ok(Built { op, family: Vec::new() })
        }
        OperatorSpec::Ncpoly { expr, k } => {
            let p = poly(expr, *k, "operator.expr")?;
            Ok(Built { op: compile(&p).map_err(|e| RunError::from_core(e, "operator.expr"))?, family: Vec::new() })
        }
        OperatorSpec::Family { exprs, k } => {
            let mut family = Vec::new();
            let mut sum = NcPoly::zero(*k);
            for (i, e) in exprs.iter().enumerate() {
                let field = format!("operator.exprs[{i}]");
                let p = poly(e, *k, &field)?;
                family.push(compile(&p).map_err(|e| RunError::from_core(e, &field))?);
                sum = sum.add(&p.mul(&p));
            }
            let op = compile(&sum).map_err(|e| RunError::from_core(e, "operator.exprs"))?;
            Ok(Built { op, family })
        }
    }
}

pub fn build_ladder(spec: &LadderSpec) -> Result<ProjectionLadder, RunError> {
    match spec {
        LadderSpec::Unit => Ok(ProjectionLadder::unit()),
        LadderSpec::Arithmetic { step } => ProjectionLadder::arithmetic(*step).map_err(|e| RunError::from_core(e, "ladder.step")),
        LadderSpec::Explicit { cutoffs } => ProjectionLadder::explicit(cutoffs.clone()).map_err(|e| RunError::from_core(e, "ladder.cutoffs")),
    }
}

/// Table levels: the configured `J`, kept below the degree cap for `k > 1`.
fn table_levels(op: &GradedOperator, ladder: &ProjectionLadder, levels: usize) -> usize {
    if op.k() == 1 {
        levels
    } else {
        ladder.levels_below(MULTIMODE_MAX_DEGREE, op.band_order()).clamp(1, levels)
    }
}

pub fn build_probes(config: &RunConfig, op: &GradedOperator, ladder: &ProjectionLadder) -> Result<Vec<Probe>, RunError> {
    let k = op.k();
    let levels = table_levels(op, ladder, config.horizons.levels);
    let needed = ladder.cutoff(levels) + op.band_order() + 1;
    let mut out = Vec::new();
    for (i, p) in config.probes.iter().enumerate() {
        match p {
            ProbeSpec::Geometric { horizon } => out.push(Probe::from_rule(&RuleVector::geometric(k), horizon.unwrap_or(needed))),
            ProbeSpec::Dense { id, amplitudes } => {
                if out.iter().any(|q: &Probe| &q.id == id) {
                    return Err(RunError::config("", &format!("probes[{i}].id"), format!("duplicate probe id {id:?}")));
                }
                let v = GradedVector::from_dense(k, amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect());
                if v.is_zero() {
                    return Err(RunError::config("", &format!("probes[{i}].amplitudes"), "zero vector"));
                }
                out.push(Probe::finite(id.clone(), v));
            }
        }
    }
    Ok(out)
}

/// Everything `analyze` produces before anything touches the file system.
pub struct Analysis {
    pub report: Report,
    pub tables: Vec<Table>,
    pub timing: Timing,
}

impl Analysis {
    pub fn inequality_violations(&self) -> usize {
        total_violations(&self.report.inequalities)
    }
}

pub fn analyze(config: &RunConfig, seed: u64) -> Result<Analysis, RunError> {
    let start = Instant::now();
    config.validate()?;
    let Built { op, family } = build_operator(&config.operator)?;
    let ladder = build_ladder(&config.ladder)?;
    let user_probes = build_probes(config, &op, &ladder)?;
    let tol = config.tolerances.inequality();
    info!("analyzing {}", op.label());

    let cc = ClassifyConfig {
        defect_horizons: config.horizons.defect.clone(),
        series_horizon: config.horizons.series,
        levels: config.horizons.levels,
        multimode_max_degree: MULTIMODE_MAX_DEGREE,
        positivity_schedule: None,
        seed,
    };
    let t0 = Instant::now();
    let verdict = classify(&op, &ladder, &user_probes, &cc).map_err(|e| RunError::from_core(e, "operator"))?;
    let classify_ms = t0.elapsed().as_millis() as u64;

    let levels = table_levels(&op, &ladder, config.horizons.levels);
    let geometric = Probe::from_rule(&RuleVector::geometric(op.k()), ladder.cutoff(levels) + op.band_order() + 1);
    let mut probes = vec![geometric];
    probes.extend(user_probes.iter().filter(|p| p.id != "geometric").cloned());

    let nelson: Option<NelsonOutcome> = if family.is_empty() {
        None
    } else {
        let nl = levels.min(MULTIMODE_MAX_DEGREE);
        Some(nelson_verdict_tol(&family, &probes, COMMUTATOR_DEGREE, nl, seed, config.tolerances.commutator()).map_err(|e| RunError::from_core(e, "operator.exprs"))?)
    };

    let positive = verdict.evidence.iter().any(|e| matches!(&e.detail, EvidenceDetail::Positivity(p) if p.is_positive()));
    let shift = detect_smoothness_shift(&op, &ladder).map_err(|e| RunError::from_core(e, "ladder"))?;

    // solver vectors at the largest horizon
    let horizon = *config.horizons.defect.iter().max().unwrap();
    let mut solutions: Vec<(String, DefectSolution)> = Vec::new();
    let mut summaries: Vec<DefectSummary> = Vec::new();
    if op.k() == 1 && shift > 0 {
        let mut tags = vec![Eigentag::PlusI, Eigentag::MinusI];
        if positive {
            tags.push(Eigentag::MinusOne);
        }
        for tag in tags {
            let r = solve_defect(&op, tag, horizon).map_err(|e| RunError::from_core(e, "horizons.defect"))?;
            for (i, s) in r.solutions.into_iter().enumerate() {
                summaries.push(s.summary());
                if s.verdict == L2Verdict::L2 {
                    solutions.push((format!("defect{}-{i}", tag_slug(tag)), s));
                }
            }
        }
    }

    let mut sequences = Vec::new();
    let mut inequalities: Vec<InequalityCheck> = Vec::new();
    for p in &probes {
        sequences.push(OffDiagReport::build(&op, &ladder, p, levels, positive, None, seed).map_err(|e| RunError::from_core(e, "probes"))?);
        if positive {
            inequalities.extend(positive_checks(&op, &ladder, p, CHECK_LEVELS, tol).map_err(|e| RunError::from_core(e, "probes"))?);
        }
    }
    let mut tables = Vec::new();
    for (id, s) in &solutions {
        let x = Probe::truncated(id.clone(), s.vector.clone(), s.horizon);
        let imaginary = s.eigentag != Eigentag::MinusOne;
        let defect = imaginary.then_some((s.eigentag.z(), s.residual));
        let check_levels = levels.min(CHECK_LEVELS);
        sequences.push(OffDiagReport::build(&op, &ladder, &x, check_levels, positive, defect, seed).map_err(|e| RunError::from_core(e, "horizons.defect"))?);
        if imaginary {
            inequalities.extend(defect_vector_checks(&op, &ladder, id, s, CHECK_LEVELS, tol, seed).map_err(|e| RunError::from_core(e, "horizons.defect"))?);
        } else {
            inequalities.extend(positive_checks(&op, &ladder, &x, CHECK_LEVELS, tol).map_err(|e| RunError::from_core(e, "horizons.defect"))?);
        }
        tables.push(Table::defect_vector(id, s));
    }
    for s in &sequences {
        tables.push(Table::sequences(s));
    }
    tables.push(Table::inequalities(&inequalities));
    tables.push(Table::evidence(&verdict));

    let report = Report {
        tool: ToolInfo::current(),
        seed,
        config: config.echo(seed),
        operator: OperatorInfo { label: op.label().to_string(), k: op.k(), band_order: op.band_order(), smoothness_shift: shift, positive },
        verdict,
        nelson,
        sequences,
        defect: summaries,
        inequalities,
        tables: tables.iter().map(|t| t.name.clone()).collect(),
    };
    let timing = Timing { total_ms: start.elapsed().as_millis() as u64, classify_ms };
    Ok(Analysis { report, tables, timing })
}

fn tag_slug(t: Eigentag) -> &'static str {
    match t {
        Eigentag::PlusI => "+i",
        Eigentag::MinusI => "-i",
        Eigentag::MinusOne => "-1",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_errors_carry_fields() {
        let e = build_operator(&OperatorSpec::Ncpoly { expr: "p*q".into(), k: 1 }).err().unwrap();
        assert_eq!(e.field, "operator.expr");
        assert!(e.msg.contains("not symmetric"), "{e}");
        let e = build_operator(&OperatorSpec::Jacobi { a: "0".into(), b: "n^".into(), b_im: None }).err().unwrap();
        assert_eq!(e.field, "operator.b");
        let e = build_operator(&OperatorSpec::Family { exprs: vec!["p1".into(), "q3".into()], k: 2 }).err().unwrap();
        assert_eq!(e.field, "operator.exprs[1]");
    }

    #[test]
    fn family_builds_sum_of_squares() {
        let b = build_operator(&OperatorSpec::Family { exprs: vec!["p1".into(), "q2".into()], k: 2 }).unwrap();
        assert_eq!(b.family.len(), 2);
        let l = compile(&parse_ncpoly("p1^2 + q2^2", 2).unwrap()).unwrap();
        for a in [[0u32, 0], [1, 2], [3, 0]] {
            for c in [[0u32, 0], [1, 2], [3, 0], [1, 0], [3, 2]] {
                assert_eq!(b.op.matrix_element(&c, &a).unwrap(), l.matrix_element(&c, &a).unwrap());
            }
        }
    }
}
