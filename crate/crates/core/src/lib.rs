//! Off-diagonal selfadjointness diagnostics for banded symmetric operators.
//!
//! Operators act on a graded (Hermite/Fock) basis indexed by multi-indices
//! `α ∈ ℕ^k`. The crate measures how strongly an operator couples the range
//! of nested degree projections `P_j` to their complements, and turns those
//! measurements into essential-selfadjointness verdicts that are cross-checked
//! against a direct numerical solve of the defect equations `S*x = ±ix`.

pub mod basis;
pub mod blocks;
pub mod criteria;
pub mod defect;
pub mod diagnostics;
mod error;
pub mod ladder;
pub(crate) mod linalg;
pub mod ncpoly;
pub mod operator;
pub mod stats;
pub mod vector;

pub use basis::{graded_basis_size, MultiIndex};
pub use criteria::{classify, ClassifyConfig, CriterionVerdict, SeriesKind, SeriesVerdict, Verdict};
pub use defect::{DefectSolution, DeficiencyEstimate, Eigentag, L2Verdict};
pub use diagnostics::{OffDiagReport, Probe};
pub use error::{Error, Result};
pub use ladder::ProjectionLadder;
pub use ncpoly::{compile, compile_jacobi, parse_ncpoly, JacobiSpec, NcPoly, SeqExpr};
pub use num_complex::Complex64 as C64;
pub use operator::GradedOperator;
pub use vector::{GradedVector, RuleVector};
