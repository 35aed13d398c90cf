//! Individual selfadjointness tests. Each returns its evidence and the
//! verdict it can justify on its own (often `Inconclusive`).

use super::positivity::{default_positivity_schedule, positivity_check, Positivity};
use super::series::{series_test_slice, SeriesKind, SeriesVerdict};
use super::Verdict;
use crate::defect::{solve_defect, DefectSolution, DefectSummary, Eigentag, L2Verdict, TailThresholds};
use crate::diagnostics::{detect_smoothness_shift, local_seq, quad_seq_unchecked, Probe};
use crate::error::{Error, Result};
use crate::ladder::ProjectionLadder;
use crate::ncpoly::JacobiSpec;
use crate::operator::GradedOperator;
use crate::stats::loglog_fit;
use serde::{Deserialize, Serialize};

pub const CARLEMAN_HORIZON: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanOutcome {
    /// Index after the last zero coupling; the block from there on is the
    /// infinite summand that decides.
    pub block_start: usize,
    pub series: SeriesVerdict,
    /// `Esa` on divergence; convergence only marks a candidate for `NotEsa`.
    pub verdict: Verdict,
    pub candidate_not_esa: bool,
}

/// `Σ |b_n|^{-1}` over the infinite block of a Jacobi matrix. Divergence is
/// equivalent to essential selfadjointness for this class.
pub fn carleman_test(spec: &JacobiSpec, horizon: usize) -> Result<CarlemanOutcome> {
    let (start, block) = spec.tail_block(horizon)?;
    let len = horizon.saturating_sub(start);
    let terms: Vec<f64> = (1..=len).map(|n| Ok(1.0 / block.b_at(n)?.norm())).collect::<Result<_>>()?;
    let series = series_test_slice(&terms);
    let verdict = if series.is_divergent() { Verdict::Esa } else { Verdict::Inconclusive };
    Ok(CarlemanOutcome { block_start: start, candidate_not_esa: series.is_convergent(), series, verdict })
}

/// Jacobi data read off a tridiagonal `k = 1` operator: `a_n = ⟨h_{n−1}|S|h_{n−1}⟩`,
/// `b_n = ⟨h_n|S|h_{n−1}⟩`.
pub fn jacobi_of(op: &GradedOperator, len: usize) -> Result<JacobiSpec> {
    if let Some(spec) = op.jacobi() {
        return Ok(spec.clone());
    }
    if op.k() != 1 || !op.is_tridiagonal() {
        return Err(Error::InvalidArgument("not a tridiagonal single-mode operator".into()));
    }
    let mut a = Vec::with_capacity(len);
    let mut b = Vec::with_capacity(len);
    for n in 0..len {
        let col = op.column_ranked(&[n as u32])?;
        let get = |r: usize| col.iter().find(|(i, _)| *i == r).map(|(_, v)| *v).unwrap_or_default();
        a.push(get(n).re);
        b.push(get(n + 1));
    }
    Ok(JacobiSpec::from_arrays(a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedNorm {
    pub verdict: Verdict,
    pub max: f64,
    /// 1-based level of the maximum.
    pub argmax: usize,
    pub tail_slope: Option<f64>,
    pub reason: String,
}

const BOUNDED_REL_TOL: f64 = 1e-9;
const BOUNDED_MAX_SLOPE: f64 = 0.01;

/// `sup_j b_j < ∞` cannot be verified from finitely many terms. We accept it
/// when the maximum is attained in the first half and the second half is
/// non-increasing or flat in a log-log fit.
pub fn bounded_norm_test(b: &[f64]) -> BoundedNorm {
    let n = b.len();
    let (argmax, max) = b.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let mut out = BoundedNorm { verdict: Verdict::Inconclusive, max, argmax: argmax + 1, tail_slope: None, reason: String::new() };
    if n < 8 {
        out.reason = "too few levels".into();
        return out;
    }
    if max == 0.0 {
        out.verdict = Verdict::Esa;
        out.reason = "all block norms vanish".into();
        return out;
    }
    let half = n / 2;
    let head_max = b[..half].iter().copied().fold(0.0, f64::max);
    let tail = &b[half..];
    let xs: Vec<f64> = (half + 1..=n).map(|j| j as f64).collect();
    out.tail_slope = loglog_fit(&xs, tail).map(|f| f.slope);
    let tail_max = tail.iter().copied().fold(0.0, f64::max);
    if tail_max > head_max * (1.0 + BOUNDED_REL_TOL) {
        out.reason = format!("maximum {max:.6e} attained late, at level {}", argmax + 1);
        return out;
    }
    let non_increasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + BOUNDED_REL_TOL));
    let flat = out.tail_slope.map(|s| s.abs() <= BOUNDED_MAX_SLOPE).unwrap_or(false);
    if non_increasing || flat {
        out.verdict = Verdict::Esa;
        out.reason = if non_increasing { "tail non-increasing".into() } else { "tail flat".into() };
    } else {
        out.reason = "tail neither monotone nor flat".into();
    }
    out
}

pub const BRANCH_INVERSE_SQUARE: &str = "inverse-square-norm-sum";
pub const BRANCH_INVERSE: &str = "inverse-norm-sum";
pub const BRANCH_LOCAL: &str = "inverse-local-sum";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrapositiveResult {
    pub criterion: String,
    pub statement: String,
    pub series: Vec<SeriesVerdict>,
    pub verdict: Verdict,
    pub skipped: Option<String>,
}

/// A defect vector forces `Σ 1/b_j² < ∞`, `Σ 1/b_j < ∞` and `Σ 1/c_j(x) < ∞`
/// whenever `P_{j+1}SP_j = SP_j`; divergence of a sum therefore excludes
/// defect vectors. The `c_j` branch needs the sums for every candidate `x`
/// of the (formal) solution space, so it only concludes when `c_complete`.
pub fn contrapositive_tests(b: &[f64], c: &[(String, Vec<f64>)], c_complete: bool, shift: usize) -> Vec<ContrapositiveResult> {
    let mut out = Vec::new();
    let skip = (shift != 1).then(|| format!("smoothness shift is {shift}; these implications need shift 1"));
    let mk = |criterion: &str, statement: &str, series: Vec<SeriesVerdict>, verdict: Verdict, skipped: Option<String>| ContrapositiveResult {
        criterion: criterion.into(),
        statement: statement.into(),
        series,
        verdict,
        skipped,
    };
    if let Some(reason) = skip {
        for (id, st) in [(BRANCH_LOCAL, LOCAL_STATEMENT), (BRANCH_INVERSE, INVERSE_STATEMENT), (BRANCH_INVERSE_SQUARE, SQUARE_STATEMENT)] {
            out.push(mk(id, st, Vec::new(), Verdict::Inconclusive, Some(reason.clone())));
        }
        return out;
    }
    if c.is_empty() {
        out.push(mk(BRANCH_LOCAL, LOCAL_STATEMENT, Vec::new(), Verdict::Inconclusive, Some("no candidate vectors".into())));
    } else {
        let series: Vec<SeriesVerdict> = c.iter().map(|(_, cs)| series_test_slice(&cs.iter().map(|v| 1.0 / v).collect::<Vec<_>>())).collect();
        let all_div = series.iter().all(|s| s.is_divergent());
        let verdict = if all_div && c_complete { Verdict::Esa } else { Verdict::Inconclusive };
        let skipped = (all_div && !c_complete).then(|| "candidates do not span the formal solution space".to_string());
        out.push(mk(BRANCH_LOCAL, LOCAL_STATEMENT, series, verdict, skipped));
    }
    let inv = series_test_slice(&b.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    let v = if inv.is_divergent() { Verdict::Esa } else { Verdict::Inconclusive };
    out.push(mk(BRANCH_INVERSE, INVERSE_STATEMENT, vec![inv], v, None));
    let sq = series_test_slice(&b.iter().map(|v| 1.0 / (v * v)).collect::<Vec<_>>());
    let v = if sq.is_divergent() { Verdict::Esa } else { Verdict::Inconclusive };
    out.push(mk(BRANCH_INVERSE_SQUARE, SQUARE_STATEMENT, vec![sq], v, None));
    out
}

const LOCAL_STATEMENT: &str = "Σ 1/c_j(x) = ∞ for every candidate x ⇒ no defect vector";
const INVERSE_STATEMENT: &str = "Σ 1/b_j = ∞ ⇒ no defect vector";
const SQUARE_STATEMENT: &str = "Σ 1/b_j² = ∞ ⇒ no defect vector";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverseCertificate {
    pub probe_id: String,
    pub levels: usize,
    pub series: SeriesVerdict,
    pub sum: f64,
}

/// Relative residual below which a solver vector counts as a solution of
/// `S*x = zx` (and hence as an element of `D(S*)`).
pub const DOMAIN_RESIDUAL_TOL: f64 = 1e-9;

/// A vector `x ∈ D(S*)` with `Σ c_n(x)^{-1} < ∞` (and shift 1) lies outside
/// the domain of the closure, so `S` is not essentially selfadjoint.
///
/// Domain membership comes from `solution` when given (an ℓ² solver vector
/// with a small residual); otherwise `Sx` is computed on the probe's horizon
/// and must itself pass the ℓ² tail test.
pub fn converse_certificate(
    op: &GradedOperator,
    ladder: &ProjectionLadder,
    x: &Probe,
    solution: Option<&DefectSolution>,
) -> Result<Option<ConverseCertificate>> {
    let horizon = x.horizon.ok_or_else(|| {
        Error::Refused("finitely supported vector: c_j(x) = 0 beyond its support, so Σ 1/c_j(x) is undefined; such vectors lie in D(S) anyway".into())
    })?;
    let shift = detect_smoothness_shift(op, ladder)?;
    if shift != 1 {
        return Err(Error::ShiftNotOne { shift });
    }
    match solution {
        Some(s) => {
            if s.verdict != L2Verdict::L2 || s.relative_residual > DOMAIN_RESIDUAL_TOL {
                return Err(Error::Refused(format!(
                    "vector not certified in D(S*): verdict {:?}, relative residual {:e}",
                    s.verdict, s.relative_residual
                )));
            }
        }
        None => certify_image(op, x, horizon)?,
    }
    let levels = x.max_levels(op, ladder, usize::MAX);
    let c = local_seq(op, ladder, x, levels)?;
    let series = series_test_slice(&c.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    Ok(series.is_convergent().then(|| ConverseCertificate { probe_id: x.id.clone(), levels, sum: series.sum, series }))
}

fn certify_image(op: &GradedOperator, x: &Probe, horizon: usize) -> Result<()> {
    let d = op.band_order();
    let keep = horizon.saturating_sub(d);
    let y = op.apply(&x.vector.project_below(horizon))?.project_below(keep);
    let masses = y.degree_masses();
    let t = crate::defect::tail_profile(&masses, keep);
    match crate::defect::decide_two_horizons(&t, TailThresholds::default()) {
        L2Verdict::L2 => Ok(()),
        v => Err(Error::Refused(format!("formal image Sx is not certified square-summable ({v:?})"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveSums {
    pub solution: usize,
    /// `Σ 1/d_n(x)`.
    pub quad: SeriesVerdict,
    /// `Σ c_n(x)^{-1/2}`.
    pub local_half: SeriesVerdict,
    /// `Σ c^{-1/2} ≤ ‖x‖ Σ 1/d` on the computed partial sums.
    pub partial_sum_bound_holds: bool,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveDefectOutcome {
    pub positivity: Positivity,
    pub verdict: Verdict,
    pub stable: bool,
    /// ℓ² solution counts at `N/2` and `N`.
    pub l2_counts: Vec<(usize, usize)>,
    pub solutions: Vec<DefectSummary>,
    pub sums: Vec<PositiveSums>,
    pub notes: Vec<String>,
}

/// For positive `L`: essentially selfadjoint iff `L*x = −x` has no nonzero
/// solution. Solved at horizons `N/2` and `N`; found ℓ² solutions are
/// checked for `Σ 1/d_n(x) < ∞` and `Σ c_n(x)^{-1/2} < ∞`.
pub fn positive_defect_test(op: &GradedOperator, ladder: &ProjectionLadder, horizon: usize) -> Result<PositiveDefectOutcome> {
    let positivity = positivity_check(op, &default_positivity_schedule(op.k()))?;
    if let Positivity::Violation { degree, eigenvalue } = positivity {
        return Err(Error::NotPositive { degree, eigenvalue });
    }
    let mut notes = Vec::new();
    let mut stable = true;
    let mut counts = Vec::new();
    let mut last = None;
    for n in [horizon / 2, horizon] {
        let r = solve_defect(op, Eigentag::MinusOne, n)?;
        if let Some(u) = &r.undecided {
            stable = false;
            notes.push(format!("N={n}: {u}"));
        }
        let l2 = r.solutions.iter().filter(|s| s.verdict == L2Verdict::L2).count();
        let undecided = r.solutions.iter().filter(|s| s.verdict == L2Verdict::Undecided).count();
        let halved = r.solutions.iter().filter(|s| s.verdict_with(TailThresholds::default().halved()) == L2Verdict::L2).count();
        if undecided > 0 || halved != l2 {
            stable = false;
            notes.push(format!("N={n}: {undecided} undecided directions, {halved} ℓ² under halved thresholds vs {l2}"));
        }
        counts.push((n, l2));
        last = Some(r);
    }
    if counts[0].1 != counts[1].1 {
        stable = false;
        notes.push("ℓ² counts differ between horizons".into());
    }
    let r = last.unwrap();
    let l2_count = counts[1].1;
    let verdict = match (stable, l2_count) {
        (true, 0) => Verdict::Esa,
        (true, _) => Verdict::NotEsa,
        _ => Verdict::Inconclusive,
    };
    let mut sums = Vec::new();
    let shift = detect_smoothness_shift(op, ladder)?;
    for (i, s) in r.solutions.iter().enumerate().filter(|(_, s)| s.verdict == L2Verdict::L2) {
        if shift == 0 {
            break;
        }
        let probe = Probe::truncated(format!("minus-one-{i}"), s.vector.clone(), s.horizon);
        let levels = probe.max_levels(op, ladder, usize::MAX);
        let d = quad_seq_unchecked(op, ladder, &probe, levels)?;
        let c = local_seq(op, ladder, &probe, levels)?;
        let quad = series_test_slice(&d.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
        let local_half = series_test_slice(&c.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
        let xn = s.vector.norm();
        let (mut sc, mut sd, mut holds) = (0.0, 0.0, true);
        for (cv, dv) in c.iter().zip(&d) {
            if *cv > 0.0 && *dv > 0.0 {
                sc += 1.0 / cv.sqrt();
                sd += 1.0 / dv;
                holds &= sc <= xn * sd * (1.0 + 1e-9);
            }
        }
        let consistent = quad.kind != SeriesKind::Divergent && local_half.kind != SeriesKind::Divergent;
        sums.push(PositiveSums { solution: i, quad, local_half, partial_sum_bound_holds: holds, consistent });
    }
    Ok(PositiveDefectOutcome {
        positivity,
        verdict,
        stable,
        l2_counts: counts,
        solutions: r.solutions.iter().map(|s| s.summary()).collect(),
        sums,
        notes,
    })
}
