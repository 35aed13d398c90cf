//! Inequalities that every defect vector (and, for positive operators, every
//! vector) must satisfy, evaluated level by level with residual-aware slack.
//! A violation means the solver or the diagnostics are wrong, never that the
//! operator is unusual.

use offdiag_core::diagnostics::{check_basic_estimate, check_growth_chain, detect_smoothness_shift, local_seq, offdiag_norm_seq_seeded, quad_seq};
use offdiag_core::{DefectSolution, GradedOperator, Probe, ProjectionLadder, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub probe: String,
    /// `basic-estimate`, `local-lower-bound`, `growth-chain`, `block-comparison`,
    /// `inverse-square-comparison`, `quadratic-bound` or `quadratic-sum-bound`.
    pub check: String,
    pub levels: usize,
    pub violations: usize,
    /// Largest relative excess over the allowed slack (≤ 0 when every level holds).
    pub worst_excess: f64,
}

struct Tally {
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally { violations: 0, worst: f64::NEG_INFINITY }
    }
    /// `excess` already relative; a violation when it is positive.
    fn push(&mut self, excess: f64) {
        if excess > 0.0 || excess.is_nan() {
            self.violations += 1;
        }
        self.worst = self.worst.max(if excess.is_nan() { f64::INFINITY } else { excess });
    }
    fn done(self, probe: &str, check: &str, levels: usize) -> InequalityCheck {
        InequalityCheck { probe: probe.into(), check: check.into(), levels, violations: self.violations, worst_excess: if levels == 0 { 0.0 } else { self.worst } }
    }
}

/// Checks on a computed solution of `S*x = ±ix`: the basic block estimate
/// and its identity, `ξ_j < 1` with the lower bound on `‖P_j⊥SP_jx‖`, the
/// growth chain `F_{c_j}(ξ_j) ≤ ξ_{j+1}`, `c_j ≤ ‖x‖²b_j²` and the partial
/// sums of `Σ 1/b_j² ≤ ‖x‖² Σ 1/c_j`.
pub fn defect_vector_checks(op: &GradedOperator, ladder: &ProjectionLadder, id: &str, sol: &DefectSolution, max_levels: usize, tol: f64, seed: u64) -> Result<Vec<InequalityCheck>> {
    let x = Probe::truncated(id, sol.vector.clone(), sol.horizon);
    let z = sol.eigentag.z();
    let r = sol.residual;
    let levels = x.max_levels(op, ladder, max_levels);
    let mut out = Vec::new();

    let mut basic = Tally::new();
    for j in 1..=levels {
        let s = check_basic_estimate(op, ladder, j, &x, z, r)?;
        let scale = s.rhs.max(1.0);
        let px = (s.rhs / z.im.abs()).sqrt();
        basic.push(((-s.slack - tol * scale) / scale).max((s.identity_gap - r * px - tol * scale) / scale));
    }
    out.push(basic.done(id, "basic-estimate", levels));

    // the chain needs P_{j+1}SP_j = SP_j: coarsen the ladder by the shift
    let shift = detect_smoothness_shift(op, ladder)?;
    let chain_ladder = if shift > 1 { ladder.relabel(shift) } else { ladder.clone() };
    let chain_levels = x.max_levels(op, &chain_ladder, max_levels + 1).saturating_sub(1);
    let (mut lower, mut chain) = (Tally::new(), Tally::new());
    if chain_levels > 0 {
        for row in check_growth_chain(op, &chain_ladder, &x, r, chain_levels)?.rows {
            let scale = row.xi_next.max(1.0);
            let chain_excess = if row.f_value.is_infinite() { row.xi - row.chain_slack } else { row.f_value - row.xi_next - row.chain_slack };
            chain.push((chain_excess - tol * scale) / scale);
            let lb = (-(row.lower_bound_margin + row.lower_bound_slack) - tol * scale) / scale;
            lower.push(if row.xi < 1.0 { lb } else { f64::INFINITY });
        }
    }
    out.push(lower.done(id, "local-lower-bound", chain_levels));
    out.push(chain.done(id, "growth-chain", chain_levels));

    let b = offdiag_norm_seq_seeded(op, ladder, levels, seed)?;
    let c = local_seq(op, ladder, &x, levels)?;
    let xn2 = x.vector.norm_sq();
    let mut block = Tally::new();
    for (bj, cj) in b.iter().zip(&c) {
        let bound = xn2 * bj * bj;
        block.push((cj - bound - tol * bound.max(f64::MIN_POSITIVE)) / bound.max(1.0));
    }
    out.push(block.done(id, "block-comparison", levels));

    let mut sums = Tally::new();
    let (mut sb, mut sc) = (0.0f64, 0.0f64);
    for (bj, cj) in b.iter().zip(&c) {
        if *cj == 0.0 {
            // 1/c_j = ∞ from here on
            sc = f64::INFINITY;
        } else {
            sb += 1.0 / (bj * bj);
            sc += xn2 / cj;
        }
        sums.push(if sc.is_infinite() { -1.0 } else { (sb - sc * (1.0 + tol)) / sc });
    }
    out.push(sums.done(id, "inverse-square-comparison", levels));
    Ok(out)
}

/// For positive operators and any vector: `d_n(x) ≤ c_n(x)^{1/2}‖x‖`, and
/// the partial sums of `Σ c_n^{-1/2} ≤ ‖x‖ Σ 1/d_n`.
pub fn positive_checks(op: &GradedOperator, ladder: &ProjectionLadder, x: &Probe, max_levels: usize, tol: f64) -> Result<Vec<InequalityCheck>> {
    let levels = x.max_levels(op, ladder, max_levels);
    let d = quad_seq(op, ladder, x, levels)?;
    let c = local_seq(op, ladder, x, levels)?;
    let xn = x.vector.norm();
    let mut bound = Tally::new();
    let mut sums = Tally::new();
    let (mut sc, mut sd) = (0.0f64, 0.0f64);
    for (dn, cn) in d.iter().zip(&c) {
        let rhs = cn.sqrt() * xn;
        bound.push((dn - rhs - tol * rhs.max(f64::MIN_POSITIVE)) / rhs.max(1.0));
        if *cn > 0.0 {
            if *dn == 0.0 {
                sd = f64::INFINITY;
            } else {
                sc += 1.0 / cn.sqrt();
                sd += xn / dn;
            }
        }
        sums.push(if sd.is_infinite() || sd == 0.0 { -1.0 } else { (sc - sd * (1.0 + tol)) / sd });
    }
    Ok(vec![bound.done(&x.id, "quadratic-bound", levels), sums.done(&x.id, "quadratic-sum-bound", levels)])
}

pub fn total_violations(checks: &[InequalityCheck]) -> usize {
    checks.iter().map(|c| c.violations).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use offdiag_core::defect::solve_defect;
    use offdiag_core::{compile, compile_jacobi, parse_ncpoly, Eigentag, JacobiSpec, L2Verdict, RuleVector};

    #[test]
    fn limit_circle_jacobi_vectors_pass() {
        let op = compile_jacobi(&JacobiSpec::from_rules("0", "n^2").unwrap()).unwrap();
        let unit = ProjectionLadder::unit();
        for tag in [Eigentag::PlusI, Eigentag::MinusI] {
            let r = solve_defect(&op, tag, 2000).unwrap();
            let sol = r.solutions.iter().find(|s| s.verdict == L2Verdict::L2).unwrap();
            let checks = defect_vector_checks(&op, &unit, "x", sol, 200, 1e-8, 1).unwrap();
            assert_eq!(checks.len(), 5);
            assert!(checks.iter().all(|c| c.levels >= 199), "{checks:?}");
            assert_eq!(total_violations(&checks), 0, "{checks:?}");
        }
    }

    #[test]
    fn a_corrupted_vector_is_caught() {
        let op = compile_jacobi(&JacobiSpec::from_rules("0", "n^2").unwrap()).unwrap();
        let mut sol = solve_defect(&op, Eigentag::PlusI, 2000).unwrap().solutions.remove(0);
        // claim the solution of S*x = −ix: the block identity now has the wrong sign
        sol.eigentag = Eigentag::MinusI;
        let checks = defect_vector_checks(&op, &ProjectionLadder::unit(), "x", &sol, 50, 1e-8, 1).unwrap();
        assert!(total_violations(&checks) > 0);
    }

    #[test]
    fn positive_bounds_on_geometric_probe() {
        let op = compile(&parse_ncpoly("p^2 + q^4", 1).unwrap()).unwrap();
        let g = Probe::from_rule(&RuleVector::geometric(1), 120);
        let checks = positive_checks(&op, &ProjectionLadder::unit(), &g, 100, 1e-8).unwrap();
        assert_eq!(total_violations(&checks), 0, "{checks:?}");
        assert!(checks[0].levels > 90);
    }
}
