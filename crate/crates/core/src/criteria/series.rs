//! Finite-horizon decisions on `Σ t_n` for nonnegative terms.
//!
//! Convergence and divergence are limit statements; the gates below only
//! fire on evidence that is hard to produce by accident, and `Undecided` is
//! an ordinary outcome. Every gate looks at the final decade `(N/10, N]`.

use crate::stats::{fit_line, loglog_fit, LineFit};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeriesKind {
    Divergent,
    Convergent,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub kind: SeriesKind,
    /// `cap`, `cauchy`, `term-exponent`, `power`, `log`, or why nothing fired.
    pub gate: String,
    pub horizon: usize,
    pub sum: f64,
    /// `sum` plus a power-law tail estimate when the terms decay like `n^{−s}`, `s > 1`.
    pub limit_estimate: Option<f64>,
    /// `(n, S_n)` at log-spaced `n`.
    pub partial_sums: Vec<(usize, f64)>,
    /// `ln S_n` against `ln n` over the final decade.
    pub growth_fit: Option<LineFit>,
    /// `S_n` against `ln n` over the final decade.
    pub log_fit: Option<LineFit>,
    /// Log-binned term means against `ln n`; the decay exponent is `−slope`.
    pub term_fit: Option<LineFit>,
    pub final_decade_sum: f64,
    /// 1-based indices of terms that were not finite and nonnegative (first 64).
    pub excluded: Vec<usize>,
    pub excluded_count: usize,
}

impl SeriesVerdict {
    pub fn is_convergent(&self) -> bool {
        self.kind == SeriesKind::Convergent
    }
    pub fn is_divergent(&self) -> bool {
        self.kind == SeriesKind::Divergent
    }
    /// Decay exponent `s` of the terms, if fitted.
    pub fn term_exponent(&self) -> Option<f64> {
        self.term_fit.map(|f| -f.slope)
    }
}

/// Increase of the partial sums over the final decade that counts as divergence outright.
pub const SUM_CAP: f64 = 1e6;
pub const CAUCHY_TOL: f64 = 1e-10;
pub const GROWTH_MIN_EXPONENT: f64 = 0.02;
pub const FIT_R2: f64 = 0.99;
pub const CONVERGENT_MIN_DECAY: f64 = 1.1;
pub const POWER_MAX_DECAY: f64 = 0.98;
pub const LOG_MAX_DECAY: f64 = 1.002;
const MIN_HORIZON: usize = 20;
const TERM_BINS: usize = 16;
const GROWTH_SAMPLES: usize = 32;
const EXCLUDED_KEEP: usize = 64;

/// `Σ_{n=1}^{N} t(n)`.
pub fn series_test(terms: impl Fn(usize) -> f64, horizon: usize) -> SeriesVerdict {
    let v: Vec<f64> = (1..=horizon).map(terms).collect();
    series_test_slice(&v)
}

/// Same on explicit terms; `terms[i]` is the term of index `i + 1`.
pub fn series_test_slice(terms: &[f64]) -> SeriesVerdict {
    let n = terms.len();
    let mut excluded = Vec::new();
    let mut excluded_count = 0;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    let mut ok = vec![true; n];
    for (i, &t) in terms.iter().enumerate() {
        let good = t.is_finite() && t >= 0.0;
        if !good {
            ok[i] = false;
            excluded_count += 1;
            if excluded.len() < EXCLUDED_KEEP {
                excluded.push(i + 1);
            }
        }
        prefix.push(prefix[i] + if good { t } else { 0.0 });
    }
    let sum = prefix[n];
    let partial_sums = log_samples(1, n, 48).into_iter().map(|m| (m, prefix[m])).collect();
    let mut v = SeriesVerdict {
        kind: SeriesKind::Undecided,
        gate: String::new(),
        horizon: n,
        sum,
        limit_estimate: None,
        partial_sums,
        growth_fit: None,
        log_fit: None,
        term_fit: None,
        final_decade_sum: 0.0,
        excluded,
        excluded_count,
    };
    if n < MIN_HORIZON {
        v.gate = "horizon too short".into();
        return v;
    }
    let lo = n / 10;
    v.final_decade_sum = prefix[n] - prefix[lo];
    if !ok[lo..].iter().any(|&g| g) {
        v.gate = "no admissible terms in the final decade".into();
        return v;
    }

    let samples = log_samples(lo.max(1), n, GROWTH_SAMPLES);
    let xs: Vec<f64> = samples.iter().map(|&m| m as f64).collect();
    let ss: Vec<f64> = samples.iter().map(|&m| prefix[m]).collect();
    v.growth_fit = loglog_fit(&xs, &ss).filter(|f| f.points >= 8);
    let lnx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    v.log_fit = fit_line(&lnx, &ss);
    v.term_fit = binned_term_fit(terms, &ok, lo, n);
    if let Some(s) = v.term_exponent().filter(|&s| s > 1.0) {
        let f = v.term_fit.unwrap();
        let t_n = (f.intercept + f.slope * (n as f64).ln()).exp();
        v.limit_estimate = Some(sum + t_n * n as f64 / (s - 1.0));
    }

    let term_ok = |f: &LineFit| f.r2 >= FIT_R2;
    let (kind, gate) = if v.final_decade_sum > SUM_CAP {
        (SeriesKind::Divergent, "cap")
    } else if v.final_decade_sum < CAUCHY_TOL * sum.max(1.0) {
        (SeriesKind::Convergent, "cauchy")
    } else if v.term_fit.filter(term_ok).map(|f| -f.slope >= CONVERGENT_MIN_DECAY).unwrap_or(false) {
        (SeriesKind::Convergent, "term-exponent")
    } else if v.term_fit.filter(term_ok).map(|f| -f.slope < POWER_MAX_DECAY).unwrap_or(false)
        && v.growth_fit.map(|g| g.slope > GROWTH_MIN_EXPONENT && g.r2 > FIT_R2).unwrap_or(false)
    {
        (SeriesKind::Divergent, "power")
    } else if v.term_fit.filter(term_ok).map(|f| -f.slope <= LOG_MAX_DECAY).unwrap_or(false)
        && v.log_fit.map(|g| g.slope > 0.0 && g.r2 >= FIT_R2).unwrap_or(false)
    {
        (SeriesKind::Divergent, "log")
    } else {
        (SeriesKind::Undecided, "no gate fired")
    };
    v.kind = kind;
    v.gate = gate.into();
    v
}

/// About `count` distinct integers, log-spaced over `[lo, hi]`, ending at `hi`.
fn log_samples(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if hi == 0 {
        return Vec::new();
    }
    let lo = lo.max(1).min(hi);
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp().round() as usize).map(|m| m.clamp(lo, hi)).collect();
    out.push(hi);
    out.dedup();
    out
}

/// Means of the admissible terms in log-spaced bins over `(lo, n]`, fitted in
/// log-log form. Bins with zero mean are skipped; oscillating terms are
/// smoothed by the averaging.
fn binned_term_fit(terms: &[f64], ok: &[bool], lo: usize, n: usize) -> Option<LineFit> {
    let (a, b) = (((lo + 1) as f64).ln(), ((n + 1) as f64).ln());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..TERM_BINS {
        let s = (a + (b - a) * k as f64 / TERM_BINS as f64).exp().round() as usize;
        let e = (a + (b - a) * (k + 1) as f64 / TERM_BINS as f64).exp().round() as usize;
        let (s, e) = (s.max(lo + 1), e.min(n + 1));
        if e <= s {
            continue;
        }
        // 1-based indices s..e map to slice positions s-1..e-1
        let vals: Vec<f64> = (s - 1..e - 1).filter(|&i| ok[i]).map(|i| terms[i]).collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        if mean > 0.0 {
            // centre of mass of the bin for a power law is close to its geometric mean
            xs.push(((s as f64) * ((e - 1) as f64)).sqrt());
            ys.push(mean);
        }
    }
    loglog_fit(&xs, &ys).filter(|f| f.points >= 5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_diverges_logarithmically() {
        let v = series_test(|n| 1.0 / n as f64, 100_000);
        assert_eq!((v.kind, v.gate.as_str()), (SeriesKind::Divergent, "log"));
    }

    #[test]
    fn basel() {
        let v = series_test(|n| 1.0 / (n as f64).powi(2), 1_000_000);
        assert!(v.is_convergent());
        // oracle: partial sums in long double-free Kahan-style pairwise form
        let oracle: f64 = (1..=1_000_000u64).rev().map(|n| 1.0 / (n as f64 * n as f64)).sum();
        assert!((v.sum - oracle).abs() < 1e-12);
        assert!((v.sum - 1.6449).abs() < 1e-3);
        assert!((v.limit_estimate.unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_sqrt_grows_like_sqrt() {
        let v = series_test(|n| 1.0 / (n as f64).sqrt(), 100_000);
        assert_eq!((v.kind, v.gate.as_str()), (SeriesKind::Divergent, "power"));
        let g = v.growth_fit.unwrap().slope;
        assert!((g - 0.5).abs() < 0.05, "{g}");
    }

    #[test]
    fn borderline_is_undecided() {
        for s in [1.01, 1.05] {
            assert_eq!(series_test(|n| (n as f64).powf(-s), 100_000).kind, SeriesKind::Undecided, "{s}");
        }
        // divergent, but far too slowly to show at this horizon
        assert_eq!(series_test(|n| 1.0 / (n as f64 * (n as f64 + 1.0).ln()), 100_000).kind, SeriesKind::Undecided);
        // convergent with effective exponent 1 + 2/ln n ≈ 1.19 over the last decade
        assert!(series_test(|n| 1.0 / (n as f64 * (n as f64 + 1.0).ln().powi(2)), 100_000).is_convergent());
    }

    #[test]
    fn exclusions_are_reported() {
        let v = series_test(|n| if n % 1000 == 7 { f64::INFINITY } else { (n as f64).powi(-2) }, 10_000);
        assert!(v.is_convergent());
        assert_eq!(v.excluded_count, 10);
        assert_eq!(&v.excluded[..2], &[7, 1007]);
    }

    #[test]
    fn early_spikes_do_not_count_as_divergence() {
        let v = series_test(|n| if n < 5 { 1e12 } else { (n as f64).powi(-2) }, 10_000);
        assert!(v.is_convergent(), "{}", v.gate);
    }

    #[test]
    fn geometric_and_zero_tails() {
        assert_eq!(series_test(|n| 0.5f64.powi(n as i32), 5000).gate, "cauchy");
        assert!(series_test(|n| if n < 50 { 1.0 } else { 0.0 }, 5000).is_convergent());
        assert_eq!(series_test(|_| 1.0, 30).kind, SeriesKind::Divergent);
        assert_eq!(series_test(|_| f64::INFINITY, 100).kind, SeriesKind::Undecided);
    }

    #[test]
    fn growing_terms_diverge() {
        assert!(series_test(|n| n as f64, 1000).is_divergent());
        assert!(series_test(|n| 1.1f64.powi(n as i32), 300).is_divergent());
    }
}
