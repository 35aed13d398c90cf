//! Off-diagonal blocks `P_j⊥ S P_j`.

use crate::basis::{self, offset};
use crate::error::Result;
use crate::ladder::ProjectionLadder;
use crate::linalg;
use crate::operator::GradedOperator;
use crate::C64;
use nalgebra::DMatrix;

/// Default seed for the power iteration start vector.
pub const DEFAULT_SEED: u64 = 0x0FF_D1A6;

/// The non-trivial part of `P_j⊥ S P_j`: rows are the states with
/// `n ≤ |β| < n + d`, columns the states with `n − d ≤ |α| < n` (columns of
/// lower degree map inside `P_j` and contribute zero).
#[derive(Clone, Debug)]
pub struct OffDiagBlock {
    pub cutoff: usize,
    /// Basis index of the first row / column state.
    pub row_start: usize,
    pub col_start: usize,
    pub matrix: DMatrix<C64>,
}

pub fn offdiag_block_at(op: &GradedOperator, n: usize) -> Result<OffDiagBlock> {
    let k = op.k();
    let d = op.band_order();
    let col_lo = n.saturating_sub(d);
    let (row_start, row_end) = (offset(k, n), offset(k, n + d));
    let col_start = offset(k, col_lo);
    let col_end = offset(k, n);
    let mut m = DMatrix::from_element(row_end - row_start, col_end - col_start, C64::new(0.0, 0.0));
    for deg in col_lo..n {
        for (i, alpha) in basis::layer(k, deg).into_iter().enumerate() {
            let c = offset(k, deg) + i - col_start;
            for (r, v) in op.column_ranked(&alpha.0)? {
                if r >= row_start {
                    debug_assert!(r < row_end);
                    m[(r - row_start, c)] = v;
                }
            }
        }
    }
    Ok(OffDiagBlock { cutoff: n, row_start, col_start, matrix: m })
}

pub fn offdiag_block(op: &GradedOperator, ladder: &ProjectionLadder, j: usize) -> Result<OffDiagBlock> {
    offdiag_block_at(op, ladder.cutoff(j))
}

/// `‖P_j⊥ S P_j‖`.
pub fn block_norm(op: &GradedOperator, ladder: &ProjectionLadder, j: usize) -> Result<f64> {
    block_norm_seeded(op, ladder, j, DEFAULT_SEED)
}

pub fn block_norm_seeded(op: &GradedOperator, ladder: &ProjectionLadder, j: usize, seed: u64) -> Result<f64> {
    let b = offdiag_block(op, ladder, j)?;
    Ok(linalg::power_norm(&b.matrix, seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncpoly::{compile, compile_jacobi, parse_ncpoly, JacobiSpec};
    use crate::vector::GradedVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(s: &str, k: usize) -> GradedOperator {
        compile(&parse_ncpoly(s, k).unwrap()).unwrap()
    }

    #[test]
    fn examples() {
        let unit = ProjectionLadder::unit();
        let jac = compile_jacobi(&JacobiSpec::from_rules("n", "n^1.5 + 1").unwrap()).unwrap();
        for j in 1..20 {
            let want = (j as f64).powf(1.5) + 1.0;
            assert!((block_norm(&jac, &unit, j).unwrap() - want).abs() < 1e-12 * want);
        }
        let id = GradedOperator::identity(2);
        assert_eq!(block_norm(&id, &unit, 4).unwrap(), 0.0);
        let q = op("q", 1);
        for j in 1..30 {
            assert!((block_norm(&q, &unit, j).unwrap() - (j as f64 / 2.0).sqrt()).abs() < 1e-12);
        }
    }

    /// SVD oracle plus the variational characterisation: no unit vector below
    /// the cutoff is mapped further out than the norm.
    #[test]
    fn norm_is_maximal_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (s, k) in [("p*q*p", 1), ("p^2 - q^4", 1), ("p1*q2*q1 + q1*q2*p1 + q2^2", 2), ("p1^2 + q2^2", 2)] {
            let s_op = op(s, k);
            let ladder = ProjectionLadder::unit();
            for j in 1..12 {
                let b = offdiag_block(&s_op, &ladder, j).unwrap();
                let norm = block_norm(&s_op, &ladder, j).unwrap();
                let svd = b.matrix.clone().singular_values().iter().copied().fold(0.0, f64::max);
                assert!((norm - svd).abs() <= 1e-8 * svd.max(1e-300), "{s} j={j}: {norm} vs {svd}");
                let n = ladder.cutoff(j);
                for _ in 0..20 {
                    let dim = offset(k, n);
                    let u = GradedVector::from_dense(k, (0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect());
                    let u = u.scaled(C64::new(1.0 / u.norm(), 0.0));
                    let su = s_op.apply(&u).unwrap();
                    let out_mass: f64 = su.amps().iter().skip(dim).map(|c| c.norm_sqr()).sum();
                    assert!(out_mass.sqrt() <= norm * (1.0 + 1e-8));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn norm_matches_svd_on_random_jacobi(a in proptest::collection::vec(-5.0f64..5.0, 12),
                                             b in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12),
                                             j in 1usize..10) {
            let spec = JacobiSpec::from_arrays(a, b.iter().map(|&(r, i)| C64::new(r, i)).collect());
            let s = compile_jacobi(&spec).unwrap();
            let want = spec.b_at(j).unwrap().norm();
            let got = block_norm(&s, &ProjectionLadder::unit(), j).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }
    }
}
