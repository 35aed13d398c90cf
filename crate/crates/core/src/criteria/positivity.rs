use crate::basis::graded_basis_size;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::GradedOperator;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Positivity {
    /// Smallest eigenvalue of every sampled truncation.
    PositiveOnSample { min_eigenvalues: Vec<(usize, f64)> },
    Violation { degree: usize, eigenvalue: f64 },
}

pub const POSITIVITY_TOL: f64 = 1e-9;

/// Truncation degrees keeping the dense sections at most a few hundred states.
pub fn default_positivity_schedule(k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for d in [8usize, 16, 32, 64] {
        if graded_basis_size(k, d).map(|s| s <= 400).unwrap_or(false) {
            out.push(d);
        }
    }
    if out.is_empty() {
        out.push(2);
    }
    out
}

/// Compressions of a positive operator are positive, so a truncation with an
/// eigenvalue below `−1e−9` witnesses non-positivity.
pub fn positivity_check(op: &GradedOperator, schedule: &[usize]) -> Result<Positivity> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let mut mins = Vec::with_capacity(schedule.len());
    for &d in schedule {
        let m = op.truncate(d)?;
        let ev = linalg::min_eigenvalue(&m);
        if ev < -POSITIVITY_TOL {
            return Ok(Positivity::Violation { degree: d, eigenvalue: ev });
        }
        mins.push((d, ev));
    }
    Ok(Positivity::PositiveOnSample { min_eigenvalues: mins })
}

impl Positivity {
    pub fn is_positive(&self) -> bool {
        matches!(self, Positivity::PositiveOnSample { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, parse_ncpoly};

    fn op(s: &str) -> GradedOperator {
        compile(&parse_ncpoly(s, 1).unwrap()).unwrap()
    }

    #[test]
    fn examples() {
        let sched = default_positivity_schedule(1);
        assert!(positivity_check(&op("q^2"), &sched).unwrap().is_positive());
        match positivity_check(&op("p^2 - q^4"), &sched).unwrap() {
            Positivity::Violation { degree, eigenvalue } => assert!(degree == 8 && eigenvalue < -1.0),
            p => panic!("{p:?}"),
        }
        match positivity_check(&op("p^2 + q^2"), &sched).unwrap() {
            Positivity::PositiveOnSample { min_eigenvalues } => {
                assert!(min_eigenvalues.iter().all(|(_, e)| (e - 1.0).abs() < 1e-9))
            }
            p => panic!("{p:?}"),
        }
    }
}
