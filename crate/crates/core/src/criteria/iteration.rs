//! Nested iterates of `F_c(s) = s + s²/c` and the correspondence between
//! bounded iteration and summability of `Σ 1/c_j`.

use super::series::{series_test, SeriesKind, SeriesVerdict};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Positive sequence `c_j`, `j ≥ 1`, evaluable at real indices so that the
/// iteration can be followed far past any explicit horizon. `+∞` is allowed
/// (then `F_c` is the identity).
#[derive(Clone)]
pub struct PositiveSeq {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    nondecreasing: bool,
    len: Option<usize>,
}

impl fmt::Debug for PositiveSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PositiveSeq({})", self.name)
    }
}

impl PositiveSeq {
    /// `nondecreasing` must be true of the rule; it licenses block bounds.
    pub fn new(name: impl Into<String>, nondecreasing: bool, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PositiveSeq { name: name.into(), f: Arc::new(f), nondecreasing, len: None }
    }

    /// `c_j = j^p`.
    pub fn power(p: f64) -> Self {
        Self::new(format!("j^{p}"), p >= 0.0, move |j| j.powf(p))
    }

    /// `c_j = r^j`.
    pub fn geometric(r: f64) -> Self {
        Self::new(format!("{r}^j"), r >= 1.0, move |j| r.powf(j))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), true, move |_| c)
    }

    /// Finite data `c_1..c_len`; the iteration never looks past `len`.
    pub fn from_slice(name: impl Into<String>, values: Vec<f64>) -> Self {
        let len = values.len();
        let nondecreasing = values.windows(2).all(|w| w[0] <= w[1]);
        let v = Arc::new(values);
        let mut s = Self::new(name, nondecreasing, move |j| v.get((j as usize).wrapping_sub(1)).copied().unwrap_or(f64::NAN));
        s.len = Some(len);
        s
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn at(&self, j: f64) -> f64 {
        (self.f)(j)
    }

    pub fn len(&self) -> Option<usize> {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == Some(0)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.nondecreasing
    }
}

#[inline]
fn step(t: f64, c: f64) -> f64 {
    if c.is_infinite() {
        t
    } else {
        t + t * t / c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub xi0: f64,
    /// `t_1, t_2, …` up to `J` or the first `t_j ≥ 1`.
    pub t: Vec<f64>,
    /// All computed iterates are `< 1`.
    pub bounded: bool,
    pub escaped_at: Option<usize>,
    /// `∏_{i≤j}(1+1/c_i)·ξ` alongside `t`.
    pub product_bound: Vec<f64>,
    /// `t_j ≤ product_bound_j` at every computed `j` (strict while `t_{j−1} < 1`).
    pub bound_respected: bool,
}

/// `t_1 = F_{c_1}(ξ)`, `t_{j+1} = F_{c_{j+1}}(t_j)`.
pub fn iterate_chain(c: &PositiveSeq, xi0: f64, levels: usize) -> IterationTrace {
    assert!(xi0 > 0.0 && xi0 < 1.0, "ξ must lie in (0, 1)");
    let levels = c.len().map_or(levels, |l| l.min(levels));
    let (mut t, mut prod) = (xi0, xi0);
    let mut ts = Vec::with_capacity(levels.min(1 << 20));
    let mut bounds = Vec::with_capacity(levels.min(1 << 20));
    let mut escaped_at = None;
    let mut bound_respected = true;
    for j in 1..=levels {
        let cj = c.at(j as f64);
        let prev = t;
        t = step(t, cj);
        if !cj.is_infinite() {
            prod *= 1.0 + 1.0 / cj;
        }
        // F_c(s) ≤ (1 + 1/c)s with equality only at s = 1
        let strict = !cj.is_infinite() && prev < 1.0;
        if t > prod * (1.0 + 4.0 * f64::EPSILON) || (strict && t > prod) {
            bound_respected = false;
        }
        ts.push(t);
        bounds.push(prod);
        if t >= 1.0 {
            escaped_at = Some(j);
            break;
        }
    }
    IterationTrace { xi0, bounded: escaped_at.is_none(), t: ts, escaped_at, product_bound: bounds, bound_respected }
}

/// Fate of the orbit of one `ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Survival {
    /// `t_j < 1` for every `j ≤ certified_to`.
    Survives { certified_to: f64 },
    /// `t_j ≥ 1` at some `j ≤ by`.
    Escapes { by: f64 },
    Unknown { at: f64 },
}

/// Index up to which block bounds are followed after the explicit steps.
pub const BLOCK_REACH: f64 = 1e300;
const BLOCK_FRACTION: f64 = 0.02;
/// Blocks are refined no further than this before survival is given up.
const MIN_BLOCK_FRACTION: f64 = 1e-4;

/// Explicit iteration for `explicit` steps; for nondecreasing `c` the orbit
/// is then followed in blocks `[a, b)` of ~2% of the index with certified
/// bounds on `w = 1/t`. One step lowers `w` by `1/(c_j + t_{j−1})`, which
/// inside a surviving block lies between `1/(c_{b−1} + 1)` and
/// `1/(c_a + t_{a−1})`.
pub fn survival(c: &PositiveSeq, xi0: f64, explicit: usize) -> Survival {
    let explicit = c.len().map_or(explicit, |l| l.min(explicit));
    let mut t = xi0;
    for j in 1..=explicit {
        t = step(t, c.at(j as f64));
        if t >= 1.0 {
            return Survival::Escapes { by: j as f64 };
        }
    }
    if !c.is_nondecreasing() || c.len().is_some() {
        return Survival::Survives { certified_to: explicit as f64 };
    }
    let (mut w_lo, mut w_hi) = (1.0 / t, 1.0 / t);
    // the upper chain bounds w whether or not the orbit survives, so escape
    // stays certifiable after the lower chain is given up
    let mut lower_valid = true;
    let mut a = explicit as f64 + 1.0;
    let mut len = (a * BLOCK_FRACTION).floor().max(1.0);
    while a < BLOCK_REACH {
        let ca = c.at(a);
        if ca.is_infinite() {
            return if lower_valid { Survival::Survives { certified_to: f64::INFINITY } } else { Survival::Unknown { at: a } };
        }
        let b = a + len;
        let cb = c.at(b - 1.0);
        let hi = w_hi - len / (cb + 1.0);
        if hi <= 1.0 {
            return Survival::Escapes { by: b - 1.0 };
        }
        if lower_valid {
            let lo = w_lo - len / (ca + 1.0 / w_hi);
            if lo > 1.0 {
                w_lo = lo;
            } else if len > (a * MIN_BLOCK_FRACTION).max(1.0) {
                len = (len / 2.0).floor().max(1.0);
                continue;
            } else {
                lower_valid = false;
            }
        }
        w_hi = hi;
        a = b;
        len = (a * BLOCK_FRACTION).floor().max(1.0);
    }
    if lower_valid {
        Survival::Survives { certified_to: BLOCK_REACH }
    } else {
        Survival::Unknown { at: a }
    }
}

/// `ξ ∈ {0.01, …, 0.99}`.
pub fn xi_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationSide {
    /// Largest grid `ξ` certified to stay below 1.
    Exists { xi: f64, certified_to: f64 },
    NoneInGrid,
    Undecided,
}

/// Binary search over the grid: the orbit of `ξ` is pointwise increasing in
/// `ξ`, so survival is monotone. A point that can be neither certified nor
/// refuted is searched past like an escape, so the result is the largest
/// certified survivor.
pub fn grid_search(c: &PositiveSeq, explicit: usize) -> IterationSide {
    let grid = xi_grid();
    let fate = |i: usize| survival(c, grid[i], explicit);
    let mut best = match fate(0) {
        Survival::Escapes { .. } => return IterationSide::NoneInGrid,
        Survival::Unknown { .. } => return IterationSide::Undecided,
        Survival::Survives { certified_to } => certified_to,
    };
    let (mut lo, mut hi) = (0usize, grid.len());
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        match fate(mid) {
            Survival::Survives { certified_to } => {
                lo = mid;
                best = certified_to;
            }
            _ => hi = mid,
        }
    }
    IterationSide::Exists { xi: grid[lo], certified_to: best }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOutcome {
    pub agree: bool,
    /// The sum side was undecided, so agreement holds vacuously.
    pub vacuous: bool,
    pub sum_side: SeriesVerdict,
    pub iter_side: IterationSide,
}

/// Explicit iteration steps before block bounds take over.
pub const ITER_EXPLICIT: usize = 20_000;

/// Compares `Σ 1/c_j` (to `horizon`) with existence of a surviving grid `ξ`.
pub fn sum_iteration_equivalence(c: &PositiveSeq, horizon: usize) -> EquivalenceOutcome {
    let horizon = c.len().map_or(horizon, |l| l.min(horizon));
    let sum_side = series_test(|j| 1.0 / c.at(j as f64), horizon);
    let iter_side = grid_search(c, horizon.min(ITER_EXPLICIT));
    let (agree, vacuous) = match sum_side.kind {
        SeriesKind::Undecided => (true, true),
        SeriesKind::Convergent => (matches!(iter_side, IterationSide::Exists { .. }), false),
        SeriesKind::Divergent => (iter_side == IterationSide::NoneInGrid, false),
    };
    EquivalenceOutcome { agree, vacuous, sum_side, iter_side }
}
