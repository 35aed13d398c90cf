//! Small dense helpers over nalgebra.

use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const POWER_TOL: f64 = 1e-10;
pub(crate) const POWER_CAP: usize = 10_000;

/// Largest singular value by power iteration on `BᴴB`.
pub(crate) fn power_norm(b: &DMatrix<C64>, seed: u64) -> f64 {
    let (r, c) = b.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(c, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let bh = b.adjoint();
    let mut lambda = 0.0;
    // Stop on the eigen-residual of BᴴB: a relative change criterion alone
    // stalls early when the top two singular values are close.
    for _ in 0..POWER_CAP {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= C64::new(nv, 0.0);
        let w = &bh * (b * &v);
        lambda = v.dotc(&w).re;
        if lambda <= 0.0 {
            return 0.0;
        }
        let resid = (&w - &v * C64::new(lambda, 0.0)).norm();
        if resid <= POWER_TOL * lambda {
            break;
        }
        v = w;
    }
    lambda.sqrt()
}

pub(crate) fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Solves `T v = μ G v` for Hermitian `T` and positive definite `G`.
/// Eigenpairs come back sorted by ascending `μ`; `None` if `G` is not
/// numerically positive definite.
pub(crate) fn generalized_eigh(t: &DMatrix<C64>, g: &DMatrix<C64>) -> Option<Vec<(f64, DVector<C64>)>> {
    let gh = (g + g.adjoint()) * C64::new(0.5, 0.0);
    let chol = gh.cholesky()?;
    let l = chol.l();
    let linv = l.clone().try_inverse()?;
    let c = &linv * t * linv.adjoint();
    let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
    let eig = c.symmetric_eigen();
    let lh_inv = linv.adjoint();
    let mut out: Vec<(f64, DVector<C64>)> =
        (0..eig.eigenvalues.len()).map(|i| (eig.eigenvalues[i], &lh_inv * eig.eigenvectors.column(i))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (r, c) in [(3, 4), (5, 2), (6, 6)] {
            let m = DMatrix::from_fn(r, c, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            let svd_top = m.clone().singular_values().iter().copied().fold(0.0, f64::max);
            let p = power_norm(&m, 1);
            assert!((p - svd_top).abs() <= 1e-8 * svd_top, "{p} vs {svd_top}");
        }
    }

    #[test]
    fn generalized_problem() {
        let g = DMatrix::from_row_slice(2, 2, &[C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0)]);
        let t = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(3.0, 0.0)]);
        for (mu, v) in generalized_eigh(&t, &g).unwrap() {
            let res = &t * &v - (&g * &v) * C64::new(mu, 0.0);
            assert!(res.norm() < 1e-12);
        }
    }
}
