//! The ℓ² decision for a computed sequence.
//!
//! Dyadic windows `W1 = [N/8, N/4)`, `W2 = [N/4, N/2)`, `W3 = [N/2, N)` of
//! the degree range; masses are relative to the total. A sequence whose
//! window masses shrink geometrically (both ratios `< 0.9`) is summable; one
//! whose last window holds a non-vanishing share (`≥ 1e−3`) and does not
//! shrink (ratio `≥ 1`) is not; anything else is undecided.

use super::L2Verdict;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailThresholds {
    /// Upper bound on both window ratios for an ℓ² verdict.
    pub ratio: f64,
    /// Lower bound on the relative last-window mass for a non-ℓ² verdict.
    pub mass_floor: f64,
}

impl Default for TailThresholds {
    fn default() -> Self {
        TailThresholds { ratio: 0.9, mass_floor: 1e-3 }
    }
}

impl TailThresholds {
    /// Halves both margins: ratio margin `1 − ratio`, and the mass floor.
    pub fn halved(&self) -> Self {
        TailThresholds { ratio: 1.0 - (1.0 - self.ratio) / 2.0, mass_floor: self.mass_floor / 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowProfile {
    pub horizon: usize,
    /// Relative masses of `W1, W2, W3`.
    pub masses: [f64; 3],
    /// `m(W2)/m(W1)` and `m(W3)/m(W2)`.
    pub r1: f64,
    pub r2: f64,
}

/// Profiles at the horizon `N` and at `N/2` (prefix of the same sequence).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    pub full: WindowProfile,
    pub half: WindowProfile,
}

/// Window profile of per-degree masses truncated to `horizon`.
pub fn window_profile(degree_masses: &[f64], horizon: usize) -> WindowProfile {
    let logs: Vec<f64> = degree_masses.iter().map(|m| m.ln()).collect();
    window_profile_log(&logs, horizon)
}

fn log_sum(logs: &[f64]) -> f64 {
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln()
}

/// Same, from natural logs of the masses; solutions that grow or decay by
/// hundreds of orders of magnitude keep every window representable.
pub fn window_profile_log(log_masses: &[f64], horizon: usize) -> WindowProfile {
    let n = horizon;
    let m = |lo: usize, hi: usize| -> f64 {
        let hi = hi.min(log_masses.len());
        if lo >= hi {
            f64::NEG_INFINITY
        } else {
            log_sum(&log_masses[lo..hi])
        }
    };
    let total = m(0, n);
    let (w1, w2, w3) = (m(n / 8, n / 4), m(n / 4, n / 2), m(n / 2, n));
    let rel = |x: f64| if total > f64::NEG_INFINITY { (x - total).exp() } else { 0.0 };
    let ratio = |a: f64, b: f64| {
        if b > f64::NEG_INFINITY {
            (a - b).exp()
        } else if a > f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            f64::NAN
        }
    };
    WindowProfile { horizon: n, masses: [rel(w1), rel(w2), rel(w3)], r1: ratio(w2, w1), r2: ratio(w3, w2) }
}

pub fn decide(p: &WindowProfile, th: TailThresholds) -> L2Verdict {
    if p.r1 < th.ratio && p.r2 < th.ratio {
        L2Verdict::L2
    } else if p.r2 >= 1.0 && p.masses[2] >= th.mass_floor {
        L2Verdict::NotL2
    } else {
        L2Verdict::Undecided
    }
}

pub fn tail_profile(degree_masses: &[f64], horizon: usize) -> TailProfile {
    let logs: Vec<f64> = degree_masses.iter().map(|m| m.ln()).collect();
    tail_profile_log(&logs, horizon)
}

pub fn tail_profile_log(log_masses: &[f64], horizon: usize) -> TailProfile {
    let half = &log_masses[..(horizon / 2).min(log_masses.len())];
    TailProfile { full: window_profile_log(log_masses, horizon), half: window_profile_log(half, horizon / 2) }
}

/// A last window holding at least this share and growing at least this
/// factor over its predecessor decides non-ℓ² on its own.
pub const DOMINANT_TAIL_SHARE: f64 = 0.5;
pub const DOMINANT_TAIL_RATIO: f64 = 2.0;

/// Decisive only when both horizons agree, except for a dominant tail: a
/// combination of growing and decaying solutions may look summable on the
/// prefix while the growth takes over later.
pub fn decide_two_horizons(t: &TailProfile, th: TailThresholds) -> L2Verdict {
    if t.full.masses[2] >= DOMINANT_TAIL_SHARE && t.full.r2 >= DOMINANT_TAIL_RATIO {
        return L2Verdict::NotL2;
    }
    match (decide(&t.half, th), decide(&t.full, th)) {
        (a, b) if a == b => b,
        _ => L2Verdict::Undecided,
    }
}
