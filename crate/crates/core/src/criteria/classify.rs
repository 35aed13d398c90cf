//! Runs the tests in decreasing strength and keeps every piece of evidence.
//!
//! Order: Carleman (tridiagonal, an equivalence) → positive-operator
//! equivalence → the `c_j` branch (converse certificate on solver vectors, or
//! divergence for every formal solution) → `Σ 1/b_j` → `Σ 1/b_j²` → bounded
//! norms → the deficiency estimate itself. A verdict that contradicts a
//! stable deficiency estimate is downgraded to `Inconclusive`.

use super::positivity::{default_positivity_schedule, positivity_check, Positivity};
use super::sufficient::{
    bounded_norm_test, carleman_test, contrapositive_tests, converse_certificate, jacobi_of, positive_defect_test, BoundedNorm, CarlemanOutcome,
    ContrapositiveResult, ConverseCertificate, PositiveDefectOutcome, BRANCH_INVERSE, BRANCH_INVERSE_SQUARE, BRANCH_LOCAL, CARLEMAN_HORIZON,
};
use super::Verdict;
use crate::blocks::DEFAULT_SEED;
use crate::defect::{estimate_deficiency_indices, solve_defect, DefectSummary, DeficiencyEstimate, Eigentag, L2Verdict};
use crate::diagnostics::{detect_smoothness_shift, local_seq, offdiag_norm_seq_seeded, Probe};
use crate::error::{Error, Result};
use crate::ladder::ProjectionLadder;
use crate::operator::GradedOperator;
use log::{debug, info};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Horizons of the deficiency estimate; the last two are compared.
    pub defect_horizons: Vec<usize>,
    pub series_horizon: usize,
    /// Cap on ladder levels for the `b_j` sequence.
    pub levels: usize,
    /// Cap on the largest cutoff used for `b_j` when `k > 1` (block sizes grow with the layer).
    pub multimode_max_degree: usize,
    pub positivity_schedule: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            defect_horizons: vec![2000, 4000],
            series_horizon: CARLEMAN_HORIZON,
            levels: 1000,
            multimode_max_degree: 60,
            positivity_schedule: None,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum EvidenceDetail {
    Carleman(CarlemanOutcome),
    Deficiency(DeficiencyEstimate),
    Positivity(Positivity),
    PositiveDefect(PositiveDefectOutcome),
    Ladder { given: String, shift: usize, used: String, used_shift: usize },
    Contrapositive(ContrapositiveResult),
    BoundedNorm(BoundedNorm),
    Converse { probe_id: String, certificate: Option<ConverseCertificate>, refused: Option<String> },
    DefectVectors { solutions: Vec<DefectSummary> },
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub criterion: String,
    pub verdict: Verdict,
    pub detail: EvidenceDetail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub verdict: Verdict,
    /// Direction of the evidence when the verdict is `Inconclusive`.
    pub leaning: Option<Verdict>,
    /// Criterion that decided, or `none`.
    pub provenance: String,
    pub evidence: Vec<Evidence>,
    pub deficiency: Option<DeficiencyEstimate>,
    pub notes: Vec<String>,
}

impl CriterionVerdict {
    pub fn evidence_for(&self, criterion: &str) -> impl Iterator<Item = &Evidence> {
        let c = criterion.to_string();
        self.evidence.iter().filter(move |e| e.criterion == c)
    }

    pub fn has_converse_certificate(&self) -> bool {
        self.evidence.iter().any(|e| matches!(&e.detail, EvidenceDetail::Converse { certificate: Some(_), .. }))
    }
}

pub const CRIT_CARLEMAN: &str = "carleman";
pub const CRIT_POSITIVE: &str = "positive-defect";
pub const CRIT_CONVERSE: &str = "converse-local-sum";
pub const CRIT_BOUNDED: &str = "bounded-norm";
pub const CRIT_DEFECT: &str = "defect-solver";
pub const CRIT_LADDER: &str = "ladder";
pub const CRIT_POSITIVITY: &str = "positivity";

pub fn classify(op: &GradedOperator, ladder: &ProjectionLadder, probes: &[Probe], config: &ClassifyConfig) -> Result<CriterionVerdict> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if config.defect_horizons.is_empty() {
        return Err(Error::InvalidArgument("no defect horizons".into()));
    }
    let mut ev: Vec<Evidence> = Vec::new();
    let mut notes = Vec::new();
    let push = |ev: &mut Vec<Evidence>, c: &str, v: Verdict, d: EvidenceDetail| ev.push(Evidence { criterion: c.into(), verdict: v, detail: d });

    // independent pieces first, in parallel
    let schedule = config.positivity_schedule.clone().unwrap_or_else(|| default_positivity_schedule(op.k()));
    let (est, (positivity, shift)) = rayon::join(
        || estimate_deficiency_indices(op, &config.defect_horizons),
        || (positivity_check(op, &schedule), detect_smoothness_shift(op, ladder)),
    );
    let est = est?;
    let positivity = positivity?;
    let shift = shift?;
    info!("{}: deficiency estimate ({}, {}) {:?}", op.label(), est.n_plus, est.n_minus, est.confidence);
    let est_verdict = if est.stable_nonzero() {
        Verdict::NotEsa
    } else {
        Verdict::Inconclusive
    };
    push(&mut ev, CRIT_DEFECT, est_verdict, EvidenceDetail::Deficiency(est.clone()));

    let mut decided: Option<(Verdict, String)> = None;

    // Carleman
    if op.is_tridiagonal() && op.k() == 1 {
        let spec = jacobi_of(op, config.series_horizon)?;
        let c = carleman_test(&spec, config.series_horizon)?;
        let mut v = c.verdict;
        if c.candidate_not_esa && est.stable_nonzero() {
            v = Verdict::NotEsa;
        }
        if v != Verdict::Inconclusive {
            decided = Some((v, CRIT_CARLEMAN.into()));
        }
        push(&mut ev, CRIT_CARLEMAN, v, EvidenceDetail::Carleman(c));
    }

    // positive operators
    let positive = positivity.is_positive();
    push(&mut ev, CRIT_POSITIVITY, Verdict::Inconclusive, EvidenceDetail::Positivity(positivity));
    if decided.is_none() && positive && op.k() == 1 {
        let horizon = *config.defect_horizons.iter().max().unwrap();
        let p = positive_defect_test(op, ladder, horizon)?;
        // only the ESA side is taken from here; non-ESA is left to the certificate and estimate
        let v = if p.verdict == Verdict::Esa { Verdict::Esa } else { Verdict::Inconclusive };
        if v == Verdict::Esa {
            decided = Some((v, CRIT_POSITIVE.into()));
        }
        push(&mut ev, CRIT_POSITIVE, v, EvidenceDetail::PositiveDefect(p));
    }

    // relabel the ladder to reach shift 1
    let (work, used_shift) = if shift > 1 {
        let l = ladder.relabel(shift);
        let s = detect_smoothness_shift(op, &l)?;
        (l, s)
    } else {
        (ladder.clone(), shift)
    };
    push(
        &mut ev,
        CRIT_LADDER,
        Verdict::Inconclusive,
        EvidenceDetail::Ladder { given: ladder.describe(), shift, used: work.describe(), used_shift },
    );

    if decided.is_none() && used_shift == 0 {
        // nothing leaves any P_j: block diagonal in the grading
        let b = vec![0.0; 16];
        let bn = bounded_norm_test(&b);
        decided = Some((Verdict::Esa, CRIT_BOUNDED.into()));
        push(&mut ev, CRIT_BOUNDED, Verdict::Esa, EvidenceDetail::BoundedNorm(bn));
    }

    if decided.is_none() {
        // c_j branch on solver vectors (k = 1 only)
        let mut c_candidates: Vec<(String, Vec<f64>)> = Vec::new();
        let mut complete = false;
        if op.k() == 1 && used_shift == 1 {
            let horizon = *config.defect_horizons.iter().max().unwrap();
            let (p, m) = rayon::join(|| solve_defect(op, Eigentag::PlusI, horizon), || solve_defect(op, Eigentag::MinusI, horizon));
            let (p, m) = (p?, m?);
            complete = p.undecided.is_none() && m.undecided.is_none() && p.solutions.len() == p.formal_dim && m.solutions.len() == m.formal_dim && p.formal_dim == 1;
            let mut summaries = Vec::new();
            for s in p.solutions.iter().chain(&m.solutions) {
                summaries.push(s.summary());
                let id = format!("{:?}-{}", s.eigentag, summaries.len());
                let probe = Probe::truncated(id.clone(), s.vector.clone(), s.horizon);
                let levels = probe.max_levels(op, &work, config.levels.max(1) * 4);
                c_candidates.push((id.clone(), local_seq(op, &work, &probe, levels)?));
                if s.verdict == L2Verdict::L2 && decided.is_none() {
                    match converse_certificate(op, &work, &probe, Some(s)) {
                        Ok(cert) => {
                            let v = if cert.is_some() && !est.stable_zero() { Verdict::NotEsa } else { Verdict::Inconclusive };
                            if v == Verdict::NotEsa {
                                decided = Some((v, CRIT_CONVERSE.into()));
                            }
                            push(&mut ev, CRIT_CONVERSE, v, EvidenceDetail::Converse { probe_id: id, certificate: cert, refused: None });
                        }
                        Err(e) => push(&mut ev, CRIT_CONVERSE, Verdict::Inconclusive, EvidenceDetail::Converse { probe_id: id, certificate: None, refused: Some(e.to_string()) }),
                    }
                }
            }
            push(&mut ev, CRIT_DEFECT, Verdict::Inconclusive, EvidenceDetail::DefectVectors { solutions: summaries });
        }
        // user-supplied probes: converse certificate only
        for pr in probes {
            if decided.is_some() {
                break;
            }
            match converse_certificate(op, &work, pr, None) {
                Ok(cert) => {
                    let v = if cert.is_some() && !est.stable_zero() { Verdict::NotEsa } else { Verdict::Inconclusive };
                    if v == Verdict::NotEsa {
                        decided = Some((v, CRIT_CONVERSE.into()));
                    }
                    push(&mut ev, CRIT_CONVERSE, v, EvidenceDetail::Converse { probe_id: pr.id.clone(), certificate: cert, refused: None });
                }
                Err(e) => push(&mut ev, CRIT_CONVERSE, Verdict::Inconclusive, EvidenceDetail::Converse { probe_id: pr.id.clone(), certificate: None, refused: Some(e.to_string()) }),
            }
        }

        if decided.is_none() {
            let levels = b_levels(op, &work, config);
            debug!("{}: b_j on {} over {levels} levels", op.label(), work.describe());
            let b = offdiag_norm_seq_seeded(op, &work, levels, config.seed)?;
            let results = contrapositive_tests(&b, &c_candidates, complete, used_shift);
            for id in [BRANCH_LOCAL, BRANCH_INVERSE, BRANCH_INVERSE_SQUARE] {
                if let Some(r) = results.iter().find(|r| r.criterion == id) {
                    if decided.is_none() && r.verdict == Verdict::Esa {
                        decided = Some((Verdict::Esa, id.into()));
                    }
                    push(&mut ev, id, r.verdict, EvidenceDetail::Contrapositive(r.clone()));
                }
            }
            let bn = bounded_norm_test(&b);
            if decided.is_none() && bn.verdict == Verdict::Esa {
                decided = Some((Verdict::Esa, CRIT_BOUNDED.into()));
            }
            push(&mut ev, CRIT_BOUNDED, bn.verdict, EvidenceDetail::BoundedNorm(bn));
        }
    }

    // deficiency fallback
    let mut leaning = None;
    if decided.is_none() {
        if est.stable_nonzero() {
            decided = Some((Verdict::NotEsa, CRIT_DEFECT.into()));
        } else if est.stable_zero() {
            leaning = Some(Verdict::Esa);
            notes.push("stable (0, 0) deficiency estimate without a sufficient criterion".into());
        }
    }

    let (mut verdict, mut provenance) = decided.unwrap_or((Verdict::Inconclusive, "none".into()));
    if verdict == Verdict::Esa && est.stable_nonzero() {
        notes.push(format!("{provenance} says ESA but the deficiency estimate is stably ({}, {}); downgraded", est.n_plus, est.n_minus));
        leaning = None;
        verdict = Verdict::Inconclusive;
        provenance = "conflict".into();
    }
    if verdict == Verdict::NotEsa && est.stable_zero() {
        notes.push(format!("{provenance} says not ESA but the deficiency estimate is stably (0, 0); downgraded"));
        leaning = None;
        verdict = Verdict::Inconclusive;
        provenance = "conflict".into();
    }
    if verdict == Verdict::Inconclusive && leaning.is_none() && est.stable_zero() && provenance != "conflict" {
        leaning = Some(Verdict::Esa);
    }
    Ok(CriterionVerdict { verdict, leaning, provenance, evidence: ev, deficiency: Some(est), notes })
}

/// Levels for the `b_j` sequence: capped by `config.levels`, and for `k > 1`
/// by the degree bound (blocks are `layer × layer` dense matrices).
fn b_levels(op: &GradedOperator, ladder: &ProjectionLadder, config: &ClassifyConfig) -> usize {
    if op.k() == 1 {
        return config.levels;
    }
    ladder.levels_below(config.multimode_max_degree, op.band_order()).clamp(1, config.levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, compile_jacobi, parse_ncpoly, JacobiSpec};

    fn op(s: &str) -> GradedOperator {
        compile(&parse_ncpoly(s, 1).unwrap()).unwrap()
    }

    fn run(o: &GradedOperator) -> CriterionVerdict {
        classify(o, &ProjectionLadder::unit(), &[], &ClassifyConfig::default()).unwrap()
    }

    #[test]
    fn q_is_esa_by_carleman() {
        let v = run(&op("q"));
        assert_eq!((v.verdict, v.provenance.as_str()), (Verdict::Esa, CRIT_CARLEMAN));
    }

    #[test]
    fn pqp_has_a_certificate() {
        let v = run(&op("p*q*p"));
        assert_eq!(v.verdict, Verdict::NotEsa, "{:?}", v.notes);
        assert!(v.has_converse_certificate());
        let d = v.deficiency.unwrap();
        assert_eq!((d.n_plus, d.n_minus), (1, 1));
    }

    #[test]
    fn free_jacobi_is_esa() {
        let o = compile_jacobi(&JacobiSpec::from_rules("0", "1").unwrap()).unwrap();
        assert_eq!(run(&o).verdict, Verdict::Esa);
    }

    #[test]
    fn jacobi_n_squared_is_not_esa() {
        let o = compile_jacobi(&JacobiSpec::from_rules("0", "n^2").unwrap()).unwrap();
        let v = run(&o);
        assert_eq!((v.verdict, v.provenance.as_str()), (Verdict::NotEsa, CRIT_CARLEMAN));
    }

    #[test]
    fn reference_examples() {
        let v = run(&op("p^2 - q^4"));
        assert_eq!(v.verdict, Verdict::NotEsa, "{:?}", v.notes);
        let v = run(&op("p^2 + q^4"));
        assert!(v.verdict == Verdict::Esa || (v.verdict == Verdict::Inconclusive && v.leaning == Some(Verdict::Esa)), "{v:?}");
        let v = run(&op("p*q + q*p"));
        assert_eq!(v.verdict, Verdict::Esa, "{:?}", v.notes);
    }

    #[test]
    fn local_branch_decides_where_norm_branches_do_not() {
        let v = run(&op("p*q*p"));
        assert_eq!(v.provenance, CRIT_CONVERSE);
        // on the relabelled ladder both norm sums converge
        let l3 = ProjectionLadder::arithmetic(3).unwrap();
        let b = offdiag_norm_seq_seeded(&op("p*q*p"), &l3, 1000, DEFAULT_SEED).unwrap();
        let r = contrapositive_tests(&b, &[], false, 1);
        assert!(r.iter().filter(|r| r.criterion != BRANCH_LOCAL).all(|r| r.verdict == Verdict::Inconclusive));
    }

    #[test]
    fn diagonal_is_esa() {
        let o = compile_jacobi(&JacobiSpec::from_rules("n", "0").unwrap()).unwrap();
        assert_eq!(run(&o).verdict, Verdict::Esa);
        assert_eq!(run(&op("p^2 + q^2")).verdict, Verdict::Esa);
    }

    #[test]
    fn verdicts_round_trip_through_json() {
        for o in [op("p*q*p"), op("q"), op("p^2 - q^4")] {
            let v = run(&o);
            let text = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<CriterionVerdict>(&text).unwrap(), v);
        }
    }
}
