//! Off-diagonal measurements along a ladder: `b_j = ‖P_j⊥SP_j‖`,
//! `c_j(x) = ‖P_j⊥SP_jx‖²`, `d_n(x) = |⟨x, P_n⊥LP_nx⟩|`, `ξ_j = ‖P_jx‖²`,
//! and pointwise checks of the inequalities relating them.

use crate::basis::offset;
use crate::blocks::{self, offdiag_block, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::ladder::ProjectionLadder;
use crate::operator::GradedOperator;
use crate::vector::{GradedVector, RuleVector};
use crate::C64;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A probe vector together with the degree range over which it is known.
#[derive(Clone, Debug)]
pub struct Probe {
    pub id: String,
    pub vector: GradedVector,
    /// `None`: finitely supported, known exactly everywhere.
    pub horizon: Option<usize>,
    /// Bound on the mass beyond the horizon (NaN when only estimated elsewhere).
    pub tail_bound: f64,
}

impl Probe {
    pub fn finite(id: impl Into<String>, vector: GradedVector) -> Self {
        Probe { id: id.into(), vector, horizon: None, tail_bound: 0.0 }
    }

    pub fn from_rule(rule: &RuleVector, horizon: usize) -> Self {
        let m = rule.materialize(horizon);
        Probe { id: rule.name.clone(), vector: m.vector, horizon: Some(horizon), tail_bound: m.tail_bound }
    }

    /// Vector known on degrees `< horizon` with no analytic tail bound.
    pub fn truncated(id: impl Into<String>, vector: GradedVector, horizon: usize) -> Self {
        Probe { id: id.into(), vector, horizon: Some(horizon), tail_bound: f64::NAN }
    }

    pub fn k(&self) -> usize {
        self.vector.k()
    }

    fn require(&self, needed: usize) -> Result<()> {
        match self.horizon {
            Some(h) if h < needed => Err(Error::HorizonTooSmall { given: h, required: needed }),
            _ => Ok(()),
        }
    }

    /// Largest `J` for which level-`J` quantities are exact on this probe.
    pub fn max_levels(&self, op: &GradedOperator, ladder: &ProjectionLadder, cap: usize) -> usize {
        match self.horizon {
            None => cap,
            Some(h) => ladder.levels_below(h, op.band_order()).min(cap),
        }
    }
}

fn check_k(op: &GradedOperator, x: &Probe) -> Result<()> {
    if op.k() != x.k() {
        return Err(Error::ModeMismatch { expected: op.k(), got: x.k() });
    }
    Ok(())
}

/// `[b_1, …, b_J]`.
pub fn offdiag_norm_seq(op: &GradedOperator, ladder: &ProjectionLadder, levels: usize) -> Result<Vec<f64>> {
    offdiag_norm_seq_seeded(op, ladder, levels, DEFAULT_SEED)
}

pub fn offdiag_norm_seq_seeded(op: &GradedOperator, ladder: &ProjectionLadder, levels: usize, seed: u64) -> Result<Vec<f64>> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    (1..=levels).into_par_iter().map(|j| blocks::block_norm_seeded(op, ladder, j, seed)).collect()
}

/// `P_j⊥ S P_j x` restricted to its rows `n_j ≤ |β| < n_j + d`, plus the
/// matching slice of `x` on those rows.
fn block_action(op: &GradedOperator, ladder: &ProjectionLadder, j: usize, x: &GradedVector) -> Result<(Vec<C64>, Vec<C64>)> {
    let b = offdiag_block(op, ladder, j)?;
    let cols = DVector::from_iterator(b.matrix.ncols(), (0..b.matrix.ncols()).map(|i| x.get_index(b.col_start + i)));
    let y = &b.matrix * cols;
    let xr = (0..b.matrix.nrows()).map(|i| x.get_index(b.row_start + i)).collect();
    Ok((y.iter().copied().collect(), xr))
}

/// `[c_1(x), …, c_J(x)]`.
pub fn local_seq(op: &GradedOperator, ladder: &ProjectionLadder, x: &Probe, levels: usize) -> Result<Vec<f64>> {
    check_k(op, x)?;
    if levels > 0 {
        x.require(ladder.cutoff(levels) + op.band_order())?;
    }
    (1..=levels)
        .into_par_iter()
        .map(|j| Ok(block_action(op, ladder, j, &x.vector)?.0.iter().map(|c| c.norm_sqr()).sum()))
        .collect()
}

/// `[ξ_1, …, ξ_J]` with `ξ_j = ‖P_j x‖²`.
pub fn xi_seq(ladder: &ProjectionLadder, x: &Probe, levels: usize) -> Result<Vec<f64>> {
    if levels > 0 {
        x.require(ladder.cutoff(levels))?;
    }
    let masses = x.vector.degree_masses();
    let mut prefix = vec![0.0; masses.len() + 1];
    for (i, m) in masses.iter().enumerate() {
        prefix[i + 1] = prefix[i] + m;
    }
    Ok((1..=levels).map(|j| prefix[ladder.cutoff(j).min(masses.len())]).collect())
}

/// `[d_1(x), …, d_J(x)]` for a positive operator `L`. Each value is checked
/// against `d_n ≤ √c_n·‖x‖`; a violation is an internal error.
pub fn quad_seq(op: &GradedOperator, ladder: &ProjectionLadder, x: &Probe, levels: usize) -> Result<Vec<f64>> {
    check_k(op, x)?;
    if let crate::criteria::Positivity::Violation { degree, eigenvalue } = crate::criteria::positivity_check(op, &crate::criteria::default_positivity_schedule(op.k()))? {
        return Err(Error::NotPositive { degree, eigenvalue });
    }
    quad_seq_unchecked(op, ladder, x, levels)
}

pub(crate) fn quad_seq_unchecked(op: &GradedOperator, ladder: &ProjectionLadder, x: &Probe, levels: usize) -> Result<Vec<f64>> {
    if levels > 0 {
        x.require(ladder.cutoff(levels) + op.band_order())?;
    }
    let xn = x.vector.norm();
    (1..=levels)
        .into_par_iter()
        .map(|j| {
            let (y, xr) = block_action(op, ladder, j, &x.vector)?;
            let d = xr.iter().zip(&y).map(|(a, b)| a.conj() * b).sum::<C64>().norm();
            let c: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            let bound = c.sqrt() * xn;
            if d > bound + 1e-9 * bound.max(1.0) {
                return Err(Error::Invariant(format!("d_{j} = {d:e} exceeds sqrt(c_{j})·‖x‖ = {bound:e}")));
            }
            Ok(d)
        })
        .collect()
}

/// Smallest `m` with `P_{j+m} S P_j = S P_j`, verified on the first 50 levels
/// by scanning the actual output degrees.
pub fn detect_smoothness_shift(op: &GradedOperator, ladder: &ProjectionLadder) -> Result<usize> {
    let d = op.band_order();
    if d == 0 {
        return Ok(0);
    }
    let mut m_needed = 0;
    for j in 1..=50 {
        let n = ladder.cutoff(j);
        // highest degree reached from below the cutoff
        let mut top = 0;
        for deg in n.saturating_sub(d)..n {
            for alpha in crate::basis::layer(op.k(), deg) {
                for (s, _) in op.column(&alpha.0)? {
                    top = top.max(s.degree());
                }
            }
        }
        let mut m = 0;
        while ladder.cutoff(j + m) <= top {
            m += 1;
        }
        m_needed = m_needed.max(m);
    }
    Ok(m_needed)
}

/// Basic estimate at one level for an approximate solution of
/// `S*x = zx` with residual norm `r`:
/// `|Im z|·‖Px‖² ≤ ‖P⊥SPx‖·‖P⊥x‖ + r‖Px‖`, together with the identity
/// `Im⟨P⊥SPx, P⊥x⟩ = Im z·‖Px‖²` (up to `r‖Px‖`).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SlackReport {
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub identity_im: f64,
    pub identity_target: f64,
    pub identity_gap: f64,
    pub holds: bool,
}

pub const CHECK_ABS_TOL: f64 = 1e-9;

pub fn check_basic_estimate(op: &GradedOperator, ladder: &ProjectionLadder, j: usize, x: &Probe, z: C64, residual: f64) -> Result<SlackReport> {
    check_k(op, x)?;
    let n = ladder.cutoff(j);
    x.require(n + op.band_order())?;
    let (y, xr) = block_action(op, ladder, j, &x.vector)?;
    let px2: f64 = x.vector.amps()[..offset(x.k(), n).min(x.vector.amps().len())].iter().map(|c| c.norm_sqr()).sum();
    let perp2 = (x.vector.norm_sq() - px2).max(0.0);
    let ny = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let lhs = ny * perp2.sqrt() + residual * px2.sqrt();
    let rhs = z.im.abs() * px2;
    let ip: C64 = y.iter().zip(&xr).map(|(a, b)| a.conj() * b).sum();
    let target = z.im * px2;
    let gap = (ip.im - target).abs();
    let holds = lhs >= rhs - CHECK_ABS_TOL && gap <= residual * px2.sqrt() + CHECK_ABS_TOL;
    Ok(SlackReport { level: j, lhs, rhs, slack: lhs - rhs, identity_im: ip.im, identity_target: target, identity_gap: gap, holds })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainRow {
    pub level: usize,
    pub xi: f64,
    pub xi_next: f64,
    pub c: f64,
    /// `F_{c_j}(ξ_j)`
    pub f_value: f64,
    /// allowance on `F_{c_j}(ξ_j) ≤ ξ_{j+1}` from the residual
    pub chain_slack: f64,
    /// `‖P_j⊥SP_jx‖ − ξ_j/√(1−ξ_j)`
    pub lower_bound_margin: f64,
    pub lower_bound_slack: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChainReport {
    pub rows: Vec<ChainRow>,
    pub violations: usize,
    /// Largest excess beyond slack, relative to `max(1, ξ_{j+1})`.
    pub worst_excess: f64,
}

/// Relative tolerance on top of the residual-derived slack.
pub const CHAIN_REL_TOL: f64 = 1e-8;

/// Checks `ξ_j < 1`, `F_{c_j}(ξ_j) ≤ ξ_{j+1}` and
/// `‖P_j⊥SP_jx‖ ≥ ξ_j/√(1−ξ_j)` for an approximate defect vector (`z = ±i`).
///
/// With residual `r` (after normalizing `‖x‖ = 1`) the identity gives
/// `ξ_j − r√ξ_j ≤ √c_j·√(ξ_{j+1}−ξ_j)`, hence
/// `F_{c_j}(ξ_j) ≤ ξ_{j+1} + 2rξ_j^{3/2}/c_j` and
/// `√c_j ≥ ξ_j/√(1−ξ_j) − r√ξ_j/√(1−ξ_j)`.
pub fn check_growth_chain(op: &GradedOperator, ladder: &ProjectionLadder, x: &Probe, residual: f64, levels: usize) -> Result<ChainReport> {
    check_k(op, x)?;
    let shift = detect_smoothness_shift(op, ladder)?;
    if shift > 1 {
        return Err(Error::ShiftNotOne { shift });
    }
    let horizon = match x.horizon {
        None => {
            return Err(Error::Refused(
                "finitely supported vectors are not defect vectors: ‖P_j x‖ reaches ‖x‖ at a finite level".into(),
            ))
        }
        Some(h) => h,
    };
    let norm = x.vector.norm();
    if norm == 0.0 {
        return Err(Error::Refused("zero vector".into()));
    }
    if let Some(top) = x.vector.max_degree() {
        if top + 1 < ladder.cutoff(levels + 1) && top + 1 < horizon {
            return Err(Error::Refused(format!("support ends at degree {top}; ξ_j = ‖x‖² from level {levels} on")));
        }
    }
    let xs = Probe { id: x.id.clone(), vector: x.vector.scaled(C64::new(1.0 / norm, 0.0)), horizon: x.horizon, tail_bound: x.tail_bound };
    let r = residual / norm;
    let c = local_seq(op, ladder, &xs, levels)?;
    let xi = xi_seq(ladder, &xs, levels + 1)?;
    let mut rows = Vec::with_capacity(levels);
    let (mut violations, mut worst) = (0, 0.0f64);
    for j in 0..levels {
        let (x0, x1, cj) = (xi[j], xi[j + 1], c[j]);
        let tol = CHAIN_REL_TOL * x1.max(1.0);
        let sq = x0.sqrt();
        let (f, slack, chain_ok, excess) = if cj > 0.0 {
            let f = x0 + x0 * x0 / cj;
            let slack = 2.0 * r * x0 * sq / cj;
            let ex = f - x1 - slack;
            (f, slack, ex <= tol, ex)
        } else {
            // P⊥SPx = 0 forces ξ_j ≤ r√ξ_j
            let ex = x0 - r * sq;
            (f64::INFINITY, r * sq, ex <= tol, ex)
        };
        let denom = (1.0 - x0).max(0.0).sqrt();
        let lb_margin = cj.sqrt() - x0 / denom;
        let lb_slack = r * sq / denom;
        let lb_ok = x0 < 1.0 && lb_margin + lb_slack >= -tol;
        let ok = x0 < 1.0 && chain_ok && lb_ok;
        if !ok {
            violations += 1;
        }
        worst = worst.max(excess / x1.max(1.0)).max(-(lb_margin + lb_slack) / x1.max(1.0));
        rows.push(ChainRow {
            level: j + 1,
            xi: x0,
            xi_next: x1,
            c: cj,
            f_value: f,
            chain_slack: slack,
            lower_bound_margin: lb_margin,
            lower_bound_slack: lb_slack,
            ok,
        });
    }
    Ok(ChainReport { rows, violations, worst_excess: worst })
}

/// One row per level; `d` and `slack` are empty when not applicable.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub level: usize,
    pub b: f64,
    pub c: f64,
    pub d: Option<f64>,
    pub xi: f64,
    pub slack: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OffDiagReport {
    pub probe_id: String,
    pub ladder: String,
    pub rows: Vec<ReportRow>,
}

impl OffDiagReport {
    /// Collects `b, c, ξ` (and `d` for positive operators, and the basic
    /// estimate slack when `defect` carries `(z, residual)`).
    pub fn build(
        op: &GradedOperator,
        ladder: &ProjectionLadder,
        x: &Probe,
        levels: usize,
        positive: bool,
        defect: Option<(C64, f64)>,
        seed: u64,
    ) -> Result<Self> {
        let levels = x.max_levels(op, ladder, levels);
        let b = offdiag_norm_seq_seeded(op, ladder, levels, seed)?;
        let c = local_seq(op, ladder, x, levels)?;
        let xi = xi_seq(ladder, x, levels)?;
        let d = if positive { Some(quad_seq_unchecked(op, ladder, x, levels)?) } else { None };
        let slack = match defect {
            Some((z, r)) => Some((1..=levels).map(|j| Ok(check_basic_estimate(op, ladder, j, x, z, r)?.slack)).collect::<Result<Vec<_>>>()?),
            None => None,
        };
        let rows = (0..levels)
            .map(|i| ReportRow {
                level: i + 1,
                b: b[i],
                c: c[i],
                d: d.as_ref().map(|v| v[i]),
                xi: xi[i],
                slack: slack.as_ref().map(|v| v[i]),
            })
            .collect();
        Ok(OffDiagReport { probe_id: x.id.clone(), ladder: ladder.describe(), rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, compile_jacobi, parse_ncpoly, JacobiSpec};
    use crate::MultiIndex;
    use proptest::prelude::*;

    fn op(s: &str, k: usize) -> GradedOperator {
        compile(&parse_ncpoly(s, k).unwrap()).unwrap()
    }

    fn h(n: u32) -> Probe {
        Probe::finite(format!("h{n}"), GradedVector::basis_state(&MultiIndex(vec![n])))
    }

    #[test]
    fn norm_sequences() {
        let unit = ProjectionLadder::unit();
        let free = compile_jacobi(&JacobiSpec::from_rules("0", "1").unwrap()).unwrap();
        assert!(offdiag_norm_seq(&free, &unit, 20).unwrap().iter().all(|&b| (b - 1.0).abs() < 1e-15));
        let q = op("q", 1);
        for (j, b) in offdiag_norm_seq(&q, &unit, 30).unwrap().into_iter().enumerate() {
            assert!((b - ((j + 1) as f64 / 2.0).sqrt()).abs() < 1e-12);
        }
        let diag = compile_jacobi(&JacobiSpec::from_rules("n", "0").unwrap()).unwrap();
        assert!(offdiag_norm_seq(&diag, &unit, 5).unwrap().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn local_sequences() {
        let unit = ProjectionLadder::unit();
        let q = op("q", 1);
        let c = local_seq(&q, &unit, &h(0), 5).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
        // finite support below n_3: exactly zero from level 4 on
        let x = Probe::finite("x", GradedVector::from_dense(1, vec![C64::new(1.0, 0.0), C64::new(-2.0, 1.0), C64::new(0.5, 0.0)]));
        let pqp = op("p*q*p", 1);
        let l3 = ProjectionLadder::arithmetic(3).unwrap();
        let c = local_seq(&pqp, &l3, &x, 6).unwrap();
        assert!(c[0] > 0.0);
        assert!(c[1..].iter().all(|&v| v == 0.0));
        let diag = compile_jacobi(&JacobiSpec::from_rules("n", "0").unwrap()).unwrap();
        assert!(local_seq(&diag, &unit, &x, 5).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizon_is_enforced() {
        let q = op("q", 1);
        let g = Probe::from_rule(&RuleVector::geometric(1), 10);
        assert!(matches!(local_seq(&q, &ProjectionLadder::unit(), &g, 10), Err(Error::HorizonTooSmall { given: 10, required: 11 })));
        assert!(local_seq(&q, &ProjectionLadder::unit(), &g, 9).is_ok());
    }

    #[test]
    fn quadratic_form_on_q_squared() {
        // ⟨h_0|q²|h_0⟩ = 1/2 and q²h_0 = (h_0 + √2 h_2)/2: no level ever
        // sees h_0 on both sides of a cutoff, so every d_n(h_0) is 0.
        let q2 = op("q^2", 1);
        let d = quad_seq(&q2, &ProjectionLadder::unit(), &h(0), 6).unwrap();
        assert!(d.iter().all(|&v| v == 0.0), "{d:?}");
        // a probe straddling cutoffs: x = h_0 + h_2 gives d_1 = d_2 = √2/2
        let x = Probe::finite("x", GradedVector::from_dense(1, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
        let d = quad_seq(&q2, &ProjectionLadder::unit(), &x, 4).unwrap();
        let want = 2f64.sqrt() / 2.0;
        assert!((d[0] - want).abs() < 1e-15 && (d[1] - want).abs() < 1e-15 && d[2] == 0.0 && d[3] == 0.0, "{d:?}");
        let diag = compile_jacobi(&JacobiSpec::from_rules("n", "0").unwrap()).unwrap();
        assert!(quad_seq(&diag, &ProjectionLadder::unit(), &x, 4).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(quad_seq(&op("p^2 - q^4", 1), &ProjectionLadder::unit(), &x, 4), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn smoothness_shifts() {
        let unit = ProjectionLadder::unit();
        let free = compile_jacobi(&JacobiSpec::from_rules("0", "1").unwrap()).unwrap();
        assert_eq!(detect_smoothness_shift(&free, &unit).unwrap(), 1);
        assert_eq!(detect_smoothness_shift(&op("p^2 - q^4", 1), &unit).unwrap(), 4);
        assert_eq!(detect_smoothness_shift(&op("p*q*p", 1), &ProjectionLadder::arithmetic(3).unwrap()).unwrap(), 1);
        assert_eq!(detect_smoothness_shift(&op("p*q*p", 1), &ProjectionLadder::arithmetic(2).unwrap()).unwrap(), 2);
        assert_eq!(detect_smoothness_shift(&op("p^2+q^2", 1), &unit).unwrap(), 0);
    }

    #[test]
    fn zero_vector_estimate_is_trivial() {
        let q = op("q", 1);
        let z = Probe::finite("0", GradedVector::zeros(1));
        let r = check_basic_estimate(&q, &ProjectionLadder::unit(), 3, &z, C64::new(0.0, 1.0), 0.0).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.holds);
    }

    #[test]
    fn chain_refuses_finite_support() {
        let q = op("q", 1);
        assert!(matches!(check_growth_chain(&q, &ProjectionLadder::unit(), &h(2), 0.0, 5), Err(Error::Refused(_))));
        assert!(matches!(
            check_growth_chain(&op("p*q*p", 1), &ProjectionLadder::unit(), &Probe::from_rule(&RuleVector::geometric(1), 40), 0.0, 5),
            Err(Error::ShiftNotOne { shift: 3 })
        ));
    }

    proptest! {
        /// c_j(x) ≤ ‖x‖² b_j² and ξ_j monotone with ξ_j ≤ ‖x‖².
        #[test]
        fn local_bounded_by_block_norm(vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..30),
                                       which in 0usize..4, step in 1usize..3) {
            let (s, k) = [("p*q*p", 1), ("p^2 - q^4", 1), ("p1*q2*p1 + q2^2", 2), ("q1^3 + p2*q1*p2", 2)][which];
            let o = op(s, k);
            let ladder = ProjectionLadder::arithmetic(step).unwrap();
            let x = Probe::finite("x", GradedVector::from_dense(k, vals.into_iter().map(|(a, b)| C64::new(a, b)).collect()));
            let levels = 8;
            let b = offdiag_norm_seq(&o, &ladder, levels).unwrap();
            let c = local_seq(&o, &ladder, &x, levels).unwrap();
            let xi = xi_seq(&ladder, &x, levels).unwrap();
            let n2 = x.vector.norm_sq();
            for j in 0..levels {
                prop_assert!(c[j] <= n2 * b[j] * b[j] * (1.0 + 1e-9) + 1e-300);
                prop_assert!(xi[j] <= n2 * (1.0 + 1e-15));
                if j > 0 { prop_assert!(xi[j] >= xi[j - 1]); }
            }
            // eventually exactly zero once the support sits below the cutoff
            let top = x.vector.max_degree().unwrap_or(0);
            let shift = detect_smoothness_shift(&o, &ladder).unwrap();
            let ladder1 = ladder.relabel(shift.max(1));
            let c1 = local_seq(&o, &ladder1, &x, top + 3).unwrap();
            for j in 1..=top + 3 {
                if ladder1.cutoff(j) > top + o.band_order() {
                    prop_assert_eq!(c1[j - 1], 0.0);
                }
            }
        }
    }
}
