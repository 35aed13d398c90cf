//! Direct numerical solution of the defect equations `S*x = zx`
//! (`z = ±i`, or `z = −1` for positive operators), with an ℓ² decision on
//! the computed solutions and a deficiency-index estimate built from it.

mod banded;
mod tail;
mod tridiagonal;

pub use banded::{solve_banded_defect, BandedDefect};
pub use tail::{decide_two_horizons, tail_profile, tail_profile_log, window_profile, window_profile_log, TailProfile, TailThresholds, WindowProfile};
pub use tridiagonal::solve_tridiagonal_defect;

use crate::error::Result;
use crate::operator::GradedOperator;
use crate::vector::GradedVector;
use crate::C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Eigentag {
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
    #[serde(rename = "-1")]
    MinusOne,
}

impl Eigentag {
    pub fn z(self) -> C64 {
        match self {
            Eigentag::PlusI => C64::new(0.0, 1.0),
            Eigentag::MinusI => C64::new(0.0, -1.0),
            Eigentag::MinusOne => C64::new(-1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum L2Verdict {
    L2,
    NotL2,
    Undecided,
}

/// A computed formal solution on degrees `< horizon`, unit-normalized.
#[derive(Clone, Debug)]
pub struct DefectSolution {
    pub eigentag: Eigentag,
    pub vector: GradedVector,
    pub horizon: usize,
    /// `ln` of the factor relating `vector` to the raw recurrence solution.
    pub log_scale: f64,
    /// `‖(S* − z)x‖` over all rows except the last `boundary` ones.
    pub residual: f64,
    /// The same divided by `‖(|S*| + |z|)|x|‖`: rounding-level when the
    /// recurrence was solved accurately, whatever the coefficient size.
    pub relative_residual: f64,
    pub boundary: usize,
    pub tail: TailProfile,
    pub verdict: L2Verdict,
}

/// Serializable digest of a [`DefectSolution`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSummary {
    pub eigentag: Eigentag,
    pub horizon: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub boundary_levels_excluded: usize,
    pub final_window_mass: f64,
    pub window_ratios: [f64; 2],
    pub half_horizon_ratios: [f64; 2],
    pub verdict: L2Verdict,
}

impl DefectSolution {
    pub fn summary(&self) -> DefectSummary {
        DefectSummary {
            eigentag: self.eigentag,
            horizon: self.horizon,
            residual: self.residual,
            relative_residual: self.relative_residual,
            boundary_levels_excluded: self.boundary,
            final_window_mass: self.tail.full.masses[2],
            window_ratios: [self.tail.full.r1, self.tail.full.r2],
            half_horizon_ratios: [self.tail.half.r1, self.tail.half.r2],
            verdict: self.verdict,
        }
    }

    /// Rows `(degree, re, im, tail mass from this degree on)`.
    pub fn export_rows(&self) -> Vec<(usize, f64, f64, f64)> {
        let masses = self.vector.degree_masses();
        let total: f64 = masses.iter().sum();
        let mut tail = total;
        let mut out = Vec::with_capacity(masses.len());
        for (deg, m) in masses.iter().enumerate() {
            // k = 1 for every solver-produced vector
            let c = self.vector.get_index(deg);
            out.push((deg, c.re, c.im, if total > 0.0 { (tail / total).max(0.0) } else { 0.0 }));
            tail -= m;
        }
        out
    }

    /// Verdict recomputed with other thresholds (for the halving check).
    pub fn verdict_with(&self, th: TailThresholds) -> L2Verdict {
        decide_two_horizons(&self.tail, th)
    }

    /// Conjugate-phase normalization: the largest entry is made real positive.
    pub(crate) fn fix_phase(v: &mut Vec<C64>) {
        if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
            if big.norm() > 0.0 {
                let ph = big.conj() / big.norm();
                for c in v.iter_mut() {
                    *c *= ph;
                }
            }
        }
    }
}

/// Absolute and relative residual of `(S* − z)x` over rows `0..rows` for a
/// `k = 1` vector.
pub(crate) fn residual_k1(op: &GradedOperator, x: &[C64], z: C64, rows: usize) -> Result<(f64, f64)> {
    let d = op.band_order();
    let mut acc = vec![C64::new(0.0, 0.0); rows];
    let mut mag = vec![0.0f64; rows];
    // (S*x)_m = Σ_n M[m][n] x_n with M[m][n] from column n
    for (n, &xn) in x.iter().enumerate().take(rows + d) {
        if xn == C64::new(0.0, 0.0) {
            continue;
        }
        for (m, v) in op.column_ranked(&[n as u32])? {
            if m < rows {
                acc[m] += v * xn;
                mag[m] += v.norm() * xn.norm();
            }
        }
    }
    for m in 0..rows {
        acc[m] -= z * x[m];
        mag[m] += z.norm() * x[m].norm();
    }
    Ok(residual_pair(&acc, &mag))
}

pub(crate) fn residual_pair(r: &[C64], mag: &[f64]) -> (f64, f64) {
    let abs = r.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let den = mag.iter().map(|m| m * m).sum::<f64>().sqrt();
    (abs, if den > 0.0 { abs / den } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Stable,
    Low,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub l2: usize,
    pub not_l2: usize,
    pub undecided: usize,
}

impl Counts {
    fn of(sols: &[DefectSolution], th: Option<TailThresholds>) -> Counts {
        let mut c = Counts::default();
        for s in sols {
            match th.map(|t| s.verdict_with(t)).unwrap_or(s.verdict) {
                L2Verdict::L2 => c.l2 += 1,
                L2Verdict::NotL2 => c.not_l2 += 1,
                L2Verdict::Undecided => c.undecided += 1,
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonCounts {
    pub horizon: usize,
    pub plus: Counts,
    pub minus: Counts,
    pub max_residual: f64,
    pub max_relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyEstimate {
    pub n_plus: usize,
    pub n_minus: usize,
    pub confidence: Confidence,
    pub horizons: Vec<HorizonCounts>,
    pub notes: Vec<String>,
}

impl DeficiencyEstimate {
    pub fn is_stable(&self) -> bool {
        self.confidence == Confidence::Stable
    }
    pub fn stable_nonzero(&self) -> bool {
        self.is_stable() && (self.n_plus > 0 || self.n_minus > 0)
    }
    pub fn stable_zero(&self) -> bool {
        self.is_stable() && self.n_plus == 0 && self.n_minus == 0
    }
}

/// All solutions at one horizon for `z`; Jacobi operators go through the
/// tail block of their direct-sum decomposition.
pub fn solve_defect(op: &GradedOperator, tag: Eigentag, horizon: usize) -> Result<BandedDefect> {
    if let Some(spec) = op.jacobi() {
        if op.band_order() == 0 {
            return solve_banded_defect(op, tag, horizon);
        }
        let (start, block) = spec.tail_block(horizon)?;
        if start + 16 >= horizon {
            // a zero coupling close to the horizon: effectively finite
            return Ok(BandedDefect {
                solutions: Vec::new(),
                formal_dim: 0,
                undecided: Some(format!("zero coupling at b_{start}: the analysed block is too short")),
                null_directions: 0,
            });
        }
        let sol = solve_tridiagonal_defect(&block, tag, horizon - start)?;
        return Ok(BandedDefect { solutions: vec![sol], formal_dim: 1, undecided: None, null_directions: 0 });
    }
    solve_banded_defect(op, tag, horizon)
}

/// Counts ℓ² solutions of `S*x = ±ix` at the last two horizons of the
/// schedule. `Stable` requires identical counts at both horizons, no
/// undecided directions, and unchanged verdicts under halved thresholds.
pub fn estimate_deficiency_indices(op: &GradedOperator, schedule: &[usize]) -> Result<DeficiencyEstimate> {
    let mut horizons: Vec<usize> = schedule.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    let tail: Vec<usize> = horizons.iter().rev().take(2).rev().copied().collect();
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut stable = tail.len() == 2;
    if !stable {
        notes.push("a single horizon cannot establish stability".into());
    }
    let mut last = (0, 0);
    for &n in &tail {
        let (p, m) = rayon::join(|| solve_defect(op, Eigentag::PlusI, n), || solve_defect(op, Eigentag::MinusI, n));
        let (p, m) = (p?, m?);
        for r in [&p, &m] {
            if let Some(u) = &r.undecided {
                stable = false;
                notes.push(format!("N={n}: {u}"));
            }
        }
        let (cp, cm) = (Counts::of(&p.solutions, None), Counts::of(&m.solutions, None));
        let halved = TailThresholds::default().halved();
        let (hp, hm) = (Counts::of(&p.solutions, Some(halved)), Counts::of(&m.solutions, Some(halved)));
        if cp.undecided + cm.undecided > 0 {
            stable = false;
            notes.push(format!("N={n}: undecided directions (+i: {}, −i: {})", cp.undecided, cm.undecided));
        }
        if hp != cp || hm != cm {
            stable = false;
            notes.push(format!("N={n}: verdicts change under threshold halving"));
        }
        let max_residual = p.solutions.iter().chain(&m.solutions).map(|s| s.residual).fold(0.0, f64::max);
        let max_relative_residual = p.solutions.iter().chain(&m.solutions).map(|s| s.relative_residual).fold(0.0, f64::max);
        if rows.last().map(|r: &HorizonCounts| r.plus.l2 != cp.l2 || r.minus.l2 != cm.l2).unwrap_or(false) {
            stable = false;
            notes.push("ℓ² counts differ between the last two horizons".into());
        }
        last = (cp.l2, cm.l2);
        rows.push(HorizonCounts { horizon: n, plus: cp, minus: cm, max_residual, max_relative_residual });
    }
    Ok(DeficiencyEstimate {
        n_plus: last.0,
        n_minus: last.1,
        confidence: if stable { Confidence::Stable } else { Confidence::Low },
        horizons: rows,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, compile_jacobi, parse_ncpoly, JacobiSpec};

    fn est(op: &GradedOperator) -> DeficiencyEstimate {
        estimate_deficiency_indices(op, &[2000, 4000]).unwrap()
    }

    #[test]
    fn jacobi_estimates() {
        let sq = compile_jacobi(&JacobiSpec::from_rules("0", "n^2").unwrap()).unwrap();
        let e = est(&sq);
        assert_eq!((e.n_plus, e.n_minus, e.confidence), (1, 1, Confidence::Stable), "{e:?}");
        let free = compile_jacobi(&JacobiSpec::from_rules("0", "1").unwrap()).unwrap();
        assert!(est(&free).stable_zero());
    }

    #[test]
    fn polynomial_estimates() {
        for (s, n) in [("q", 0), ("p^2 + q^2", 0), ("p*q*p", 1), ("p^2 - q^4", 2), ("p^2 + q^4", 0)] {
            let op = compile(&parse_ncpoly(s, 1).unwrap()).unwrap();
            let e = est(&op);
            assert_eq!((e.n_plus, e.n_minus), (n, n), "{s}: {e:?}");
            assert!(e.is_stable(), "{s}: {e:?}");
            assert!(e.horizons.iter().all(|h| h.max_relative_residual <= 1e-12), "{s}: {e:?}");
        }
    }

    #[test]
    fn export_rows_tail_mass() {
        let sq = JacobiSpec::from_rules("0", "n^2").unwrap();
        let s = solve_tridiagonal_defect(&sq, Eigentag::PlusI, 100).unwrap();
        let rows = s.export_rows();
        assert!((rows[0].3 - 1.0).abs() < 1e-12);
        assert!(rows.windows(2).all(|w| w[1].3 <= w[0].3 + 1e-15));
    }
}
