//! Least-squares line fits used by the series and growth gates.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. A perfectly flat `y`
/// counts as an exact fit (R² = 1). Needs at least two distinct `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-300 * nf { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Some(LineFit { slope, intercept: my - slope * mx, r2, points: n })
}

/// Fit of `ln y` against `ln x` over the entries with positive finite `y`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).unzip();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_lines() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let f = fit_line(&xs, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
        let flat = fit_line(&xs, &[2.0; 4]).unwrap();
        assert_eq!((flat.slope, flat.r2), (0.0, 1.0));
        let p = loglog_fit(&xs, &xs.map(|x: f64| 5.0 * x.powf(1.5))).unwrap();
        assert!((p.slope - 1.5).abs() < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_none());
    }
}
