//! The vector evaluation module: C^n with the formal-variable twist on the
//! affine node.
//!
//! Convention for the affine generators on the weight basis e_1, …, e_n:
//! E_i = E_{i,i+1}, F_i = E_{i+1,i}, K_i = diag(…, q, q^{-1}, …) for
//! i = 1..n-1; E_0 = E_{n,1} with twist z^{+1}, F_0 = E_{1,n} with twist
//! z^{-1}, K_0 = (K_1 ⋯ K_{n-1})^{-1}; q^c acts by 1. The relation checker
//! certifies the choice.

use super::{Gen, TensorFactor};
use crate::cnum::C64;
use crate::weights::RootSystem;

#[derive(Debug, Clone)]
pub struct EvaluationModule {
    pub n: usize,
    weights: Vec<Vec<C64>>,
}

impl EvaluationModule {
    pub fn new(n: usize) -> Self {
        let rs = RootSystem::new(n);
        EvaluationModule {
            n,
            weights: rs.vector_weights(),
        }
    }

    /// The z-power carried by a generator (the evaluation twist table).
    pub fn twist_power(&self, g: Gen) -> i64 {
        super::gen_degree_shift(g)
    }
}

impl TensorFactor for EvaluationModule {
    fn dim(&self) -> usize {
        self.n
    }

    fn n(&self) -> usize {
        self.n
    }

    fn weight_coords(&self, b: usize) -> Vec<C64> {
        self.weights[b].clone()
    }

    fn level(&self) -> C64 {
        C64::new(0.0, 0.0)
    }

    fn degree(&self, _b: usize) -> i64 {
        0
    }

    fn has_formal_variable(&self) -> bool {
        true
    }

    fn act(&self, g: Gen, b: usize) -> Vec<(usize, C64)> {
        let one = C64::new(1.0, 0.0);
        match g {
            // E_i = E_{i,i+1}: e_{i+1} ↦ e_i (0-indexed: basis i ↦ i-1).
            Gen::E(i) if i >= 1 => {
                if b == i {
                    vec![(i - 1, one)]
                } else {
                    Vec::new()
                }
            }
            // E_0 = E_{n,1}: e_1 ↦ e_n.
            Gen::E(_) => {
                if b == 0 {
                    vec![(self.n - 1, one)]
                } else {
                    Vec::new()
                }
            }
            // F_i = E_{i+1,i}: e_i ↦ e_{i+1}.
            Gen::F(i) if i >= 1 => {
                if b == i - 1 {
                    vec![(i, one)]
                } else {
                    Vec::new()
                }
            }
            // F_0 = E_{1,n}: e_n ↦ e_1.
            Gen::F(_) => {
                if b == self.n - 1 {
                    vec![(0, one)]
                } else {
                    Vec::new()
                }
            }
        }
    }
}
