//! Global parameter pack and deterministic generic-parameter sampling.

use crate::cnum::{branch_pow, C64};
use crate::error::Error;
use crate::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Bound up to which the root-of-unity guard samples powers of q.
const ROOT_OF_UNITY_BOUND: u32 = 64;

/// Global parameters: deformation parameter, level, highest weight,
/// truncation orders and tolerances.
///
/// `lambda` holds the weight coordinates λ(h_1), …, λ(h_{n-1}) in the
/// fundamental-weight basis. The step of the difference equations,
/// p = q^{-2(k+ȟ)} with ȟ = n, is always derived, never stored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Params {
    #[serde(with = "serde_c64")]
    pub q: C64,
    /// Chosen branch of log q; all powers q^a mean exp(a log q).
    #[serde(with = "serde_c64")]
    pub logq: C64,
    #[serde(with = "serde_c64")]
    pub k: C64,
    #[serde(with = "serde_c64_vec")]
    pub lambda: Vec<C64>,
    pub n: usize,
    /// Series truncation order.
    pub big_n: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Params {
    pub fn new(q: C64, k: C64, lambda: Vec<C64>, n: usize, big_n: usize, seed: u64) -> Result<Self> {
        let p = Params {
            q,
            logq: q.ln(),
            k,
            lambda,
            n,
            big_n,
            tol: 1e-10,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Dual Coxeter number ȟ = n.
    pub fn dual_coxeter(&self) -> usize {
        self.n
    }

    /// q^a with the pinned branch of log q.
    pub fn qpow(&self, a: C64) -> C64 {
        branch_pow(self.logq, a)
    }

    /// log p for the derived step p = q^{-2(k+ȟ)}.
    pub fn logp(&self) -> C64 {
        -2.0 * (self.k + C64::new(self.n as f64, 0.0)) * self.logq
    }

    /// The qKZ step p = q^{-2(k+ȟ)}.
    pub fn p(&self) -> C64 {
        self.logp().exp()
    }

    /// p^a with the derived branch.
    pub fn ppow(&self, a: C64) -> C64 {
        branch_pow(self.logp(), a)
    }

    /// The q-number [a]_q = (q^a - q^{-a})/(q - q^{-1}).
    pub fn qnum(&self, a: C64) -> C64 {
        (self.qpow(a) - self.qpow(-a)) / (self.q - 1.0 / self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams("rank parameter n must be >= 2".into()));
        }
        if self.lambda.len() != self.n - 1 {
            return Err(Error::InvalidParams(format!(
                "lambda must have n-1 = {} coordinates, got {}",
                self.n - 1,
                self.lambda.len()
            )));
        }
        if self.tol <= 0.0 {
            return Err(Error::InvalidParams("tol must be positive".into()));
        }
        let qn = self.q.norm();
        if !(qn > 0.0 && qn < 1.0) {
            return Err(Error::InvalidParams(format!("|q| must lie in (0,1), got {qn}")));
        }
        if (self.logq.exp() - self.q).norm() > 1e-12 * qn.max(1.0) {
            return Err(Error::InvalidParams("exp(logq) != q".into()));
        }
        // Root-of-unity guard. |q| < 1 already excludes roots of unity; the
        // sampled check additionally rejects q so close to the unit circle
        // that low powers become numerically indistinguishable from 1.
        let mut qm = C64::new(1.0, 0.0);
        for m in 1..=ROOT_OF_UNITY_BOUND {
            qm *= self.q;
            if (qm - 1.0).norm() < 1e-6 {
                return Err(Error::InvalidParams(format!("q^{m} is numerically 1")));
            }
        }
        if self.k == -C64::new(self.n as f64, 0.0) {
            return Err(Error::CriticalLevel {
                dual_coxeter: self.n as u32,
            });
        }
        Ok(())
    }

    /// Deterministic seeded RNG for genericity sampling.
    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.seed)
    }

    /// Sample a generic parameter set for rank `n` at the given seed.
    ///
    /// Weight coordinates land in a complex box away from small-denominator
    /// resonances; k is placed so that |p| is comfortably inside (0, 1),
    /// which every downstream difference-equation computation requires.
    pub fn sample_generic(n: usize, big_n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5eed_c0de);
        let q = C64::new(0.69 + 0.04 * rng.gen::<f64>(), 0.13 + 0.05 * rng.gen::<f64>());
        let k = C64::new(
            -(n as f64) - 3.1 - 1.2 * rng.gen::<f64>(),
            0.17 + 0.2 * rng.gen::<f64>(),
        );
        let lambda = (0..n - 1)
            .map(|_| C64::new(0.55 + 0.8 * rng.gen::<f64>(), 0.21 + 0.35 * rng.gen::<f64>()))
            .collect();
        let mut p = Params::new(q, k, lambda, n, big_n, seed)?;
        p.tol = 1e-10;
        let pn = p.p().norm();
        if !(1e-6..=0.45).contains(&pn) {
            return Err(Error::InvalidParams(format!("derived |p| = {pn} out of range")));
        }
        Ok(p)
    }

    /// Shift the highest weight by `delta` (coordinate-wise).
    pub fn with_lambda_shift(&self, delta: &[C64]) -> Params {
        let mut p = self.clone();
        for (l, d) in p.lambda.iter_mut().zip(delta) {
            *l -= d;
        }
        p
    }

    /// Same parameters at level k - l.
    pub fn with_level_shift(&self, l: C64) -> Params {
        let mut p = self.clone();
        p.k -= l;
        p
    }
}

pub mod serde_c64 {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

pub mod serde_c64_vec {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let v = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(v.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_step_matches_definition() {
        let p = Params::sample_generic(2, 3, 7).unwrap();
        let direct = p.qpow(-2.0 * (p.k + 2.0));
        assert!((p.p() - direct).norm() < 1e-12);
    }

    #[test]
    fn critical_level_rejected() {
        let err = Params::new(C64::new(0.7, 0.1), C64::new(-2.0, 0.0), vec![C64::new(1.0, 0.0)], 2, 2, 0);
        assert!(matches!(err, Err(Error::CriticalLevel { dual_coxeter: 2 })));
    }

    #[test]
    fn qnum_small_integer() {
        let p = Params::sample_generic(2, 2, 3).unwrap();
        let two = p.qnum(C64::new(2.0, 0.0));
        assert!((two - (p.q + 1.0 / p.q)).norm() < 1e-13);
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = Params::sample_generic(2, 4, 11).unwrap();
        let b = Params::sample_generic(2, 4, 11).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.k, b.k);
        assert_eq!(a.lambda, b.lambda);
    }
}
