//! Benchmark fixtures shared by the bench targets.

use offdiag_core::{compile, compile_jacobi, parse_ncpoly, GradedOperator, JacobiSpec};

pub fn ncpoly(s: &str, k: usize) -> GradedOperator {
    compile(&parse_ncpoly(s, k).expect("fixture parses")).expect("fixture compiles")
}

pub fn jacobi(a: &str, b: &str) -> GradedOperator {
    compile_jacobi(&JacobiSpec::from_rules(a, b).expect("fixture parses")).expect("fixture compiles")
}
