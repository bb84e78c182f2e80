//! Weight bookkeeping for sl_n and its affinization.
//!
//! Finite weights are stored by their values on the simple coroots,
//! μ = (μ(h_1), …, μ(h_{n-1})). The invariant form is normalized by the
//! trace form, so (α_i, α_i) = 2 and (λ, μ) = λᵀ C⁻¹ μ in these
//! coordinates, C the finite Cartan matrix.

use crate::cnum::{CMat, C64};
use serde::{Deserialize, Serialize};

/// A finite weight together with the affine labels it carries on a module:
/// the level (q^c eigen-exponent) and the d-eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    #[serde(with = "crate::params::serde_c64_vec")]
    pub coords: Vec<C64>,
    #[serde(with = "crate::params::serde_c64")]
    pub level: C64,
    #[serde(with = "crate::params::serde_c64")]
    pub degree: C64,
}

impl Weight {
    pub fn new(coords: Vec<C64>, level: C64, degree: C64) -> Self {
        Weight { coords, level, degree }
    }

    /// Componentwise sum; affine labels add under tensor products.
    pub fn add(&self, other: &Weight) -> Weight {
        Weight {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
            level: self.level + other.level,
            degree: self.degree + other.degree,
        }
    }
}

/// Rank-level tables for sl_n: Cartan data, roots, and the invariant form.
#[derive(Debug, Clone)]
pub struct RootSystem {
    pub n: usize,
    /// Finite Cartan matrix, (n-1) x (n-1).
    pub cartan: Vec<Vec<i64>>,
    /// Inverse finite Cartan matrix (dense, real).
    cartan_inv: CMat,
    /// Affine Cartan matrix of type A_{n-1}^(1), n x n, indices 0..n-1.
    pub affine_cartan: Vec<Vec<i64>>,
}

impl RootSystem {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let r = n - 1;
        let mut cartan = vec![vec![0i64; r]; r];
        for i in 0..r {
            cartan[i][i] = 2;
            if i + 1 < r {
                cartan[i][i + 1] = -1;
                cartan[i + 1][i] = -1;
            }
        }
        let mut affine = vec![vec![0i64; n]; n];
        if n == 2 {
            affine = vec![vec![2, -2], vec![-2, 2]];
        } else {
            for i in 0..n {
                affine[i][i] = 2;
                affine[i][(i + 1) % n] = -1;
                affine[(i + 1) % n][i] = -1;
            }
        }
        let cm = CMat::from_fn(r, r, |i, j| C64::new(cartan[i][j] as f64, 0.0));
        let cartan_inv = cm.try_inverse().expect("finite Cartan matrix is invertible");
        RootSystem {
            n,
            cartan,
            cartan_inv,
            affine_cartan: affine,
        }
    }

    pub fn rank(&self) -> usize {
        self.n - 1
    }

    /// Invariant form (λ, μ) = λᵀ C⁻¹ μ on fundamental-weight coordinates.
    pub fn pairing(&self, a: &[C64], b: &[C64]) -> C64 {
        let r = self.rank();
        assert_eq!(a.len(), r);
        assert_eq!(b.len(), r);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..r {
            for j in 0..r {
                acc += a[i] * self.cartan_inv[(i, j)] * b[j];
            }
        }
        acc
    }

    /// Coordinates of the finite simple root α_i (1-based index i in 1..n-1):
    /// the i-th column of the Cartan matrix.
    pub fn simple_root(&self, i: usize) -> Vec<C64> {
        assert!((1..self.n).contains(&i));
        (0..self.rank())
            .map(|j| C64::new(self.cartan[j][i - 1] as f64, 0.0))
            .collect()
    }

    /// Coordinates of the highest root θ = α_1 + … + α_{n-1}.
    pub fn highest_root(&self) -> Vec<C64> {
        let r = self.rank();
        let mut acc = vec![C64::new(0.0, 0.0); r];
        for i in 1..self.n {
            for (a, s) in acc.iter_mut().zip(self.simple_root(i)) {
                *a += s;
            }
        }
        acc
    }

    /// Finite part of the affine simple root ᾱ_i: α_i for i >= 1, -θ for i = 0.
    pub fn affine_simple_finite_part(&self, i: usize) -> Vec<C64> {
        if i == 0 {
            self.highest_root().iter().map(|z| -z).collect()
        } else {
            self.simple_root(i)
        }
    }

    /// ρ = sum of fundamental weights: all coordinates 1.
    pub fn rho(&self) -> Vec<C64> {
        vec![C64::new(1.0, 0.0); self.rank()]
    }

    /// Eigenvalue exponent of h_i (i = 0..n-1) on an affine weight:
    /// the coordinate for i >= 1, and level - Σ coords (i.e. λ(c - θ^) ) for i = 0.
    pub fn h_eigen(&self, i: usize, coords: &[C64], level: C64) -> C64 {
        if i == 0 {
            level - coords.iter().sum::<C64>()
        } else {
            coords[i - 1]
        }
    }

    /// Weights of the standard vector representation C^n:
    /// ε_i(h_j) = δ_{ij} - δ_{i,j+1}, i = 1..n (0-indexed basis).
    pub fn vector_weights(&self) -> Vec<Vec<C64>> {
        let r = self.rank();
        (0..self.n)
            .map(|i| {
                (0..r)
                    .map(|j| {
                        let mut v = 0.0;
                        if i == j {
                            v += 1.0;
                        }
                        if i == j + 1 {
                            v -= 1.0;
                        }
                        C64::new(v, 0.0)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Subtract coordinate vectors.
pub fn coords_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Add coordinate vectors.
pub fn coords_add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Conformal weight Δ_k(λ) = (λ, λ + 2ρ) / (2 (k + ȟ)), ȟ = n.
pub fn delta_k(rs: &RootSystem, lambda: &[C64], k: C64) -> crate::Result<C64> {
    let hv = C64::new(rs.n as f64, 0.0);
    if k == -hv {
        return Err(crate::Error::CriticalLevel {
            dual_coxeter: rs.n as u32,
        });
    }
    let lam2rho: Vec<C64> = lambda
        .iter()
        .zip(rs.rho())
        .map(|(l, r)| l + 2.0 * r)
        .collect();
    Ok(rs.pairing(lambda, &lam2rho) / (2.0 * (k + hv)))
}
