//! Selfadjointness criteria and the verdict engine.

mod classify;
mod iteration;
mod nelson;
mod positivity;
mod series;
mod sufficient;

pub use classify::{
    classify, ClassifyConfig, CriterionVerdict, Evidence, EvidenceDetail, CRIT_BOUNDED, CRIT_CARLEMAN, CRIT_CONVERSE, CRIT_DEFECT, CRIT_LADDER,
    CRIT_POSITIVE, CRIT_POSITIVITY,
};
pub use iteration::{
    sum_iteration_equivalence, grid_search, iterate_chain, survival, xi_grid, EquivalenceOutcome, IterationSide, IterationTrace, PositiveSeq, Survival, BLOCK_REACH,
    ITER_EXPLICIT,
};
pub use nelson::{commutator_residual, nelson_verdict, nelson_verdict_tol, GrowthRow, JointVerdict, NelsonOutcome, COMMUTATOR_TOL, NELSON_MAX_SLOPE, NELSON_MIN_R2};
pub use positivity::{default_positivity_schedule, positivity_check, Positivity, POSITIVITY_TOL};
pub use series::{series_test, series_test_slice, SeriesKind, SeriesVerdict};
pub use sufficient::{
    bounded_norm_test, carleman_test, contrapositive_tests, converse_certificate, jacobi_of, positive_defect_test, BoundedNorm, CarlemanOutcome,
    ContrapositiveResult, ConverseCertificate, PositiveDefectOutcome, PositiveSums, BRANCH_INVERSE, BRANCH_INVERSE_SQUARE, BRANCH_LOCAL,
    CARLEMAN_HORIZON, DOMAIN_RESIDUAL_TOL,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ESA")]
    Esa,
    #[serde(rename = "NotESA")]
    NotEsa,
    Inconclusive,
}
