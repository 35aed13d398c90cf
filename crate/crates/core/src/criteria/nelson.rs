//! Joint verdict for commuting families `S_1, …, S_k`: exact commutativity
//! on low-degree states, `c_i(n, x) = O(n)` growth, and the resulting bound on
//! the off-diagonal terms of `L = Σ S_i²`.

use crate::basis::layer;
use crate::blocks::block_norm_seeded;
use crate::diagnostics::{detect_smoothness_shift, local_seq, Probe};
use crate::error::{Error, Result};
use crate::ladder::ProjectionLadder;
use crate::operator::GradedOperator;
use crate::stats::{loglog_fit, LineFit};
use crate::vector::GradedVector;
use crate::{MultiIndex, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointVerdict {
    JointEsa,
    Inconclusive,
    Refused,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub operator: usize,
    /// Probe id, or `worst-case` for `sup_{‖x‖=1} c_i(n, x) = b_n²`.
    pub probe: String,
    /// Fit of the running maximum of `c_i(n, ·)` over the last decade of levels.
    pub fit: Option<LineFit>,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NelsonOutcome {
    pub verdict: JointVerdict,
    pub commutator_residual: f64,
    /// Basis state and pair `(i, j)` with the largest commutator.
    pub witness: Option<(MultiIndex, usize, usize)>,
    pub shifts: Vec<usize>,
    pub growth: Vec<GrowthRow>,
    /// Levels where `d(L,n,x) ≤ (Σ_i c_i(n,x) Σ_j c_j(n+1,x))^{1/2}` failed.
    pub chain_violations: usize,
    pub notes: Vec<String>,
}

pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const NELSON_MAX_SLOPE: f64 = 1.1;
pub const NELSON_MIN_R2: f64 = 0.98;

/// `ops` must share the mode count; `degree` bounds the basis states used
/// for the commutator, `levels` the ladder levels used for growth fits (unit
/// ladder `P_n` = degrees `< n`).
pub fn nelson_verdict(ops: &[GradedOperator], probes: &[Probe], degree: usize, levels: usize, seed: u64) -> Result<NelsonOutcome> {
    nelson_verdict_tol(ops, probes, degree, levels, seed, COMMUTATOR_TOL)
}

/// As [`nelson_verdict`] with a caller-chosen commutator tolerance.
pub fn nelson_verdict_tol(ops: &[GradedOperator], probes: &[Probe], degree: usize, levels: usize, seed: u64, commutator_tol: f64) -> Result<NelsonOutcome> {
    let k = ops.first().map(|o| o.k()).ok_or_else(|| Error::InvalidArgument("empty operator family".into()))?;
    for o in ops {
        if o.k() != k {
            return Err(Error::ModeMismatch { expected: k, got: o.k() });
        }
        if !o.is_hermitian() {
            return Err(Error::NotHermitian);
        }
    }
    let mut notes = Vec::new();
    let (residual, witness) = commutator_residual(ops, degree)?;
    let shifts: Vec<usize> = ops.iter().map(|o| detect_smoothness_shift(o, &ProjectionLadder::unit())).collect::<Result<_>>()?;
    let mut out = NelsonOutcome {
        verdict: JointVerdict::Inconclusive,
        commutator_residual: residual,
        witness: None,
        shifts: shifts.clone(),
        growth: Vec::new(),
        chain_violations: 0,
        notes: Vec::new(),
    };
    if residual > commutator_tol {
        out.verdict = JointVerdict::Refused;
        out.witness = witness;
        out.notes.push(format!("operators do not commute: residual {residual:e}"));
        return Ok(out);
    }
    let ladder = ProjectionLadder::unit();
    for (i, o) in ops.iter().enumerate() {
        let worst: Vec<f64> = (1..=levels).into_par_iter().map(|n| block_norm_seeded(o, &ladder, n, seed).map(|b| b * b)).collect::<Result<_>>()?;
        out.growth.push(growth_row(i, "worst-case", &worst));
        for p in probes {
            let lv = p.max_levels(o, &ladder, levels);
            let c = local_seq(o, &ladder, p, lv)?;
            out.growth.push(growth_row(i, &p.id, &c));
        }
    }
    for p in probes {
        let lv = ops.iter().map(|o| p.max_levels(o, &ladder, levels)).min().unwrap_or(0);
        if lv >= 2 && shifts.iter().all(|&s| s <= 1) {
            out.chain_violations += chain_bound_violations(ops, p, lv - 1)?;
        }
    }
    let shift_ok = shifts.iter().all(|&s| s <= 1);
    if !shift_ok {
        notes.push(format!("smoothness shifts {shifts:?}: each operator must satisfy P_(n+1) S P_n = S P_n"));
    }
    if out.chain_violations > 0 {
        notes.push(format!("{} levels violate the off-diagonal bound for Σ S_i²", out.chain_violations));
    }
    let growth_ok = out.growth.iter().all(|g| g.passes);
    out.verdict = if shift_ok && growth_ok && out.chain_violations == 0 { JointVerdict::JointEsa } else { JointVerdict::Inconclusive };
    out.notes.extend(notes);
    Ok(out)
}

/// `max ‖S_iS_je − S_jS_ie‖` over basis states of degree `≤ degree`, computed
/// exactly on finite vectors.
pub fn commutator_residual(ops: &[GradedOperator], degree: usize) -> Result<(f64, Option<(MultiIndex, usize, usize)>)> {
    let k = ops[0].k();
    let mut best = (0.0, None);
    for d in 0..=degree {
        for alpha in layer(k, d) {
            let e = GradedVector::basis_state(&alpha);
            let images: Vec<GradedVector> = ops.iter().map(|o| o.apply(&e)).collect::<Result<_>>()?;
            for i in 0..ops.len() {
                for j in i + 1..ops.len() {
                    let a = ops[i].apply(&images[j])?;
                    let b = ops[j].apply(&images[i])?;
                    let r = a.axpy(C64::new(-1.0, 0.0), &b)?.norm();
                    if r > best.0 {
                        best = (r, Some((alpha.clone(), i, j)));
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Running maximum of the sequence (levels `1..`) fitted against `n` over
/// the last decade of levels.
fn growth_row(operator: usize, probe: &str, c: &[f64]) -> GrowthRow {
    let n = c.len();
    let mut env = Vec::with_capacity(n);
    let mut m = 0.0f64;
    for &v in c {
        m = m.max(v);
        env.push(m);
    }
    let lo = (n / 10).max(1);
    let xs: Vec<f64> = (lo..=n).map(|j| j as f64).collect();
    let fit = if env.iter().all(|&v| v == 0.0) { None } else { loglog_fit(&xs, &env[lo - 1..]) };
    // identically zero envelopes are trivially O(n)
    let passes = match fit {
        None => env.iter().all(|&v| v == 0.0),
        Some(f) => f.slope <= NELSON_MAX_SLOPE && f.r2 >= NELSON_MIN_R2,
    };
    GrowthRow { operator, probe: probe.into(), fit, passes }
}

/// `d(L,n,x) = |Σ_i ⟨S_iP_n⊥x, S_iP_nx⟩|` against `(Σ_i c_i(n,x) Σ_j c_j(n+1,x))^{1/2}`.
fn chain_bound_violations(ops: &[GradedOperator], x: &Probe, levels: usize) -> Result<usize> {
    let ladder = ProjectionLadder::unit();
    let cs: Vec<Vec<f64>> = ops.iter().map(|o| local_seq(o, &ladder, x, levels + 1)).collect::<Result<_>>()?;
    let mut bad = 0;
    for n in 1..=levels {
        let px = x.vector.project_below(n);
        // only degrees n..n+2 of P⊥x meet S_i P_n x when every shift is 1
        let window = x.vector.project_below(n + 3).axpy(C64::new(-1.0, 0.0), &px)?;
        let mut d = C64::new(0.0, 0.0);
        for o in ops {
            d += o.apply(&window)?.inner(&o.apply(&px)?)?;
        }
        let bound = (cs.iter().map(|c| c[n - 1]).sum::<f64>() * cs.iter().map(|c| c[n]).sum::<f64>()).sqrt();
        if d.norm() > bound * (1.0 + 1e-9) + 1e-12 {
            bad += 1;
        }
    }
    Ok(bad)
}
