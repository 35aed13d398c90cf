//! Nested degree projections `P_j` onto `span{|α⟩ : |α| < n_j}`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoffs {
    /// `n_j = step·j`.
    Arithmetic { step: usize },
    /// Explicit strictly increasing prefix; continued arithmetically with the
    /// last gap so that every basis state is eventually included.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionLadder {
    pub cutoffs: Cutoffs,
}

impl Default for ProjectionLadder {
    fn default() -> Self {
        ProjectionLadder::unit()
    }
}

impl ProjectionLadder {
    /// `n_j = j`.
    pub fn unit() -> Self {
        ProjectionLadder { cutoffs: Cutoffs::Arithmetic { step: 1 } }
    }

    pub fn arithmetic(step: usize) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidLadder("step must be positive".into()));
        }
        Ok(ProjectionLadder { cutoffs: Cutoffs::Arithmetic { step } })
    }

    pub fn explicit(cuts: Vec<usize>) -> Result<Self> {
        if cuts.is_empty() || cuts[0] == 0 || cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLadder("cutoffs must be strictly increasing positive integers".into()));
        }
        Ok(ProjectionLadder { cutoffs: Cutoffs::Explicit(cuts) })
    }

    /// `n_j` for `j ≥ 1`.
    pub fn cutoff(&self, j: usize) -> usize {
        assert!(j >= 1, "ladder levels start at 1");
        match &self.cutoffs {
            Cutoffs::Arithmetic { step } => step * j,
            Cutoffs::Explicit(v) => {
                if j <= v.len() {
                    v[j - 1]
                } else {
                    let gap = if v.len() >= 2 { v[v.len() - 1] - v[v.len() - 2] } else { v[0] };
                    v[v.len() - 1] + gap * (j - v.len())
                }
            }
        }
    }

    /// Smallest gap `n_{j+1} − n_j` over levels `1..=levels`.
    pub fn min_gap(&self, levels: usize) -> usize {
        (1..=levels.max(1)).map(|j| self.cutoff(j + 1) - self.cutoff(j)).min().unwrap()
    }

    /// Coarser ladder `n'_j = n_{m·j}`.
    pub fn relabel(&self, m: usize) -> ProjectionLadder {
        let m = m.max(1);
        match &self.cutoffs {
            Cutoffs::Arithmetic { step } => ProjectionLadder { cutoffs: Cutoffs::Arithmetic { step: step * m } },
            Cutoffs::Explicit(v) => {
                let len = (v.len() / m).max(2);
                ProjectionLadder { cutoffs: Cutoffs::Explicit((1..=len).map(|j| self.cutoff(m * j)).collect()) }
            }
        }
    }

    /// Largest `J` with `n_J + margin ≤ horizon`.
    pub fn levels_below(&self, horizon: usize, margin: usize) -> usize {
        let mut j = 0;
        while self.cutoff(j + 1) + margin <= horizon {
            j += 1;
        }
        j
    }

    pub fn describe(&self) -> String {
        match &self.cutoffs {
            Cutoffs::Arithmetic { step } => format!("n_j = {step}j"),
            Cutoffs::Explicit(v) => format!("explicit({v:?})"),
        }
    }
}
