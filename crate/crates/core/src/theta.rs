//! The odd Jacobi theta function and annulus expansions of theta quotients.
//!
//! Convention, fixed once for the whole crate:
//!
//!   θ(u|τ) = −Σ_{j ∈ Z+1/2} exp(πiτ j² + 2πi j (u + 1/2))
//!
//! This is odd in u with θ(0|τ) = 0, satisfies θ(u+1) = −θ(u) and
//! θ(u+τ) = −e^{−πiτ−2πiu} θ(u), and has the product form
//! θ(u|τ) = 2 q̃^{1/4} sin(πu) Π_{m≥1} (1−q̃^{2m})(1−q̃^{2m}e^{2πiu})(1−q̃^{2m}e^{−2πiu})
//! with q̃ = e^{πiτ}.

use crate::cnum::C64;
use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaParams {
    #[serde(with = "crate::params::serde_c64")]
    pub tau: C64,
    /// Number of q-series terms on each side of j = ±1/2.
    pub truncation: usize,
}

impl ThetaParams {
    pub fn new(tau: C64, truncation: usize) -> Result<Self> {
        if tau.im <= 0.0 {
            return Err(Error::BadModulus(tau.im));
        }
        Ok(ThetaParams { tau, truncation })
    }

    /// Nome q̃ = e^{πiτ}, |q̃| < 1.
    pub fn nome(&self) -> C64 {
        (C64::new(0.0, PI) * self.tau).exp()
    }
}

fn theta_sum(u: C64, tau: C64, terms: usize) -> C64 {
    let pii = C64::new(0.0, PI);
    let mut acc = C64::new(0.0, 0.0);
    // j runs over half-integers ±1/2, ±3/2, …
    for t in 0..terms {
        let j = t as f64 + 0.5;
        let quad = (pii * tau * j * j).exp();
        let plus = (2.0 * pii * j * (u + 0.5)).exp();
        let minus = (2.0 * pii * (-j) * (u + 0.5)).exp();
        acc += quad * (plus + minus);
    }
    -acc
}

/// θ(u|τ) by truncated q-series, with a self-convergence check: refining the
/// truncation by 5 terms must move the value by less than 1e-12 relative.
pub fn theta(u: C64, tp: &ThetaParams) -> Result<C64> {
    if tp.tau.im <= 0.0 {
        return Err(Error::BadModulus(tp.tau.im));
    }
    let terms = tp.truncation.max(4);
    let a = theta_sum(u, tp.tau, terms);
    let b = theta_sum(u, tp.tau, terms + 5);
    let scale = b.norm().max(1.0);
    if (a - b).norm() > 1e-12 * scale {
        return Err(Error::ThetaNotConverged((a - b).norm() / scale));
    }
    Ok(b)
}

/// Scalar Laurent data on the annulus |q_τ| < |z| < 1, q_τ = e^{2πiτ}, for
/// functions of z = e^{2πiu}. A prefactor carrying z^{half_shift/2} is kept
/// apart from the integer-power table; quotients with balanced theta counts
/// end up with `half_shift` even, i.e. a genuine Laurent series times z^{j}.
#[derive(Debug, Clone)]
pub struct AnnulusExpansion {
    pub prefactor: C64,
    pub half_shift: i64,
    pub coeffs: BTreeMap<i64, C64>,
}

impl AnnulusExpansion {
    pub fn one() -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, C64::new(1.0, 0.0));
        AnnulusExpansion {
            prefactor: C64::new(1.0, 0.0),
            half_shift: 0,
            coeffs,
        }
    }

    pub fn mul(&self, other: &Self, window: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        for (i, a) in &self.coeffs {
            for (j, b) in &other.coeffs {
                let m = i + j;
                if m.abs() > window {
                    continue;
                }
                *coeffs.entry(m).or_insert(C64::new(0.0, 0.0)) += a * b;
            }
        }
        AnnulusExpansion {
            prefactor: self.prefactor * other.prefactor,
            half_shift: self.half_shift + other.half_shift,
            coeffs,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.prefactor *= s;
        out
    }

    pub fn eval_at_u(&self, u: C64) -> C64 {
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        let z = (two_pi_i * u).exp();
        let mut acc = C64::new(0.0, 0.0);
        for (m, a) in &self.coeffs {
            acc += a * z.powi(*m as i32);
        }
        let half = (two_pi_i * u * 0.5 * self.half_shift as f64).exp();
        self.prefactor * half * acc
    }

    /// Integer Laurent coefficient of z^m, including the prefactor scalar.
    /// Only meaningful when `half_shift` is even (offset absorbed by caller).
    pub fn coeff(&self, m: i64) -> C64 {
        debug_assert!(self.half_shift % 2 == 0);
        let mm = m - self.half_shift / 2;
        self.prefactor * self.coeffs.get(&mm).cloned().unwrap_or(C64::new(0.0, 0.0))
    }
}

/// Triple-product factor data for θ(u + c|τ) as a function of z = e^{2πiu}:
///
/// θ(u+c) = [−i q̃^{1/4} e^{πic}] · z^{1/2} · (1 − e_c⁻¹ z⁻¹)
///          · Π_{m≥1} (1−q̃^{2m}) (1 − q̃^{2m} e_c z) (1 − q̃^{2m} e_c⁻¹ z⁻¹),
/// with e_c = e^{2πic}. Each parenthesis is geometric on the annulus, in the
/// z or z⁻¹ direction as written, which fixes the expansion branch of the
/// reciprocal as well.
struct ThetaFactors {
    prefactor: C64,
    /// (direction, ratio): the factor is (1 − ratio·z^{direction}).
    factors: Vec<(i64, C64)>,
}

fn theta_factors(c_shift: C64, tp: &ThetaParams) -> ThetaFactors {
    let qt = tp.nome();
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    let e_c = (two_pi_i * c_shift).exp();
    let mut prefactor = qt.powf(0.25) * (C64::new(0.0, PI) * c_shift).exp() * C64::new(0.0, -1.0);
    let mut factors = vec![(-1i64, 1.0 / e_c)];
    let mut m = 1;
    loop {
        let q2m = qt.powi(2 * m);
        if q2m.norm() < 1e-18 || m > 400 {
            break;
        }
        prefactor *= C64::new(1.0, 0.0) - q2m;
        factors.push((1, q2m * e_c));
        factors.push((-1, q2m / e_c));
        m += 1;
    }
    ThetaFactors { prefactor, factors }
}

fn mul_factor(acc: &AnnulusExpansion, dir: i64, ratio: C64, window: i64) -> AnnulusExpansion {
    let mut f = AnnulusExpansion::one();
    f.coeffs.insert(dir, -ratio);
    acc.mul(&f, window)
}

/// Multiply by the reciprocal of (1 − ratio·z^{dir}) with the branch fixed by
/// the annulus: direction +1 factors expand as Σ ratioᵗ zᵗ; direction −1
/// boundary factors (|ratio| ≈ 1) expand as −Σ_{t≥1} ratio^{−t} z^{t}, and
/// direction −1 interior factors (|ratio| < |q_τ|·…) as Σ ratioᵗ z^{−t}.
fn mul_inv_factor(
    acc: &AnnulusExpansion,
    dir: i64,
    ratio: C64,
    boundary: bool,
    window: i64,
) -> AnnulusExpansion {
    let mut f = AnnulusExpansion::one();
    f.coeffs.clear();
    if dir == 1 {
        let mut r = C64::new(1.0, 0.0);
        for t in 0..=(2 * window) {
            f.coeffs.insert(t, r);
            r *= ratio;
        }
    } else if boundary {
        // (1 − a z⁻¹)⁻¹ = −Σ_{t≥1} a^{−t} z^{t} when |z| < |a|.
        let mut r = 1.0 / ratio;
        for t in 1..=(2 * window) {
            f.coeffs.insert(t, -r);
            r /= ratio;
        }
        // This branch raises the lowest power by one: combined with the
        // numerator boundary factor it restores integer alignment.
    } else {
        let mut r = C64::new(1.0, 0.0);
        for t in 0..=(2 * window) {
            f.coeffs.insert(-t, r);
            r *= ratio;
        }
    }
    acc.mul(&f, window)
}

/// Laurent expansion of θ(u + c|τ) in z = e^{2πiu} on |q_τ| < |z| < 1.
pub fn theta_shift_expansion(c_shift: C64, tp: &ThetaParams, window: i64) -> AnnulusExpansion {
    let tf = theta_factors(c_shift, tp);
    let mut out = AnnulusExpansion::one();
    out.prefactor = tf.prefactor;
    out.half_shift = 1;
    for (dir, ratio) in tf.factors {
        out = mul_factor(&out, dir, ratio, window);
    }
    out
}

/// Laurent expansion of a quotient Π θ(u+a_i) / Π θ(u+b_j) with equal counts
/// (so half-integer prefactors cancel), truncated to `window` powers.
///
/// Valid on the annulus |q_τ| < |z| < 1 provided the shifts keep the theta
/// zeros off the interior, which holds for real-ish shifts.
pub fn theta_quotient_expansion(
    numerators: &[C64],
    denominators: &[C64],
    tp: &ThetaParams,
    window: i64,
) -> Result<AnnulusExpansion> {
    assert_eq!(numerators.len(), denominators.len());
    let mut out = AnnulusExpansion::one();
    for a in numerators {
        let tf = theta_factors(*a, tp);
        out.prefactor *= tf.prefactor;
        out.half_shift += 1;
        for (dir, ratio) in tf.factors {
            out = mul_factor(&out, dir, ratio, window);
        }
    }
    for b in denominators {
        let tf = theta_factors(*b, tp);
        if tf.prefactor.norm() < 1e-300 {
            return Err(Error::SingularLeading {
                power: 0,
                detail: "theta prefactor vanished".into(),
            });
        }
        out.prefactor /= tf.prefactor;
        out.half_shift -= 1;
        let mut first = true;
        for (dir, ratio) in tf.factors {
            let boundary = first && dir == -1;
            out = mul_inv_factor(&out, dir, ratio, boundary, window);
            first = false;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnum::c;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};

    fn tp() -> ThetaParams {
        ThetaParams::new(c(0.0, 0.5), 40).unwrap()
    }

    /// Direct high-truncation summation oracle (200 terms).
    fn theta_oracle(u: C64, tau: C64) -> C64 {
        theta_sum(u, tau, 200)
    }

    #[test]
    fn odd_and_zero_at_origin() {
        let tp = tp();
        assert!(theta(c(0.0, 0.0), &tp).unwrap().norm() < 1e-14);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = c(rng.gen::<f64>() - 0.5, 0.4 * (rng.gen::<f64>() - 0.5));
            let a = theta(u, &tp).unwrap();
            let b = theta(-u, &tp).unwrap();
            assert!((a + b).norm() < 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn matches_direct_summation_oracle() {
        let tp = ThetaParams::new(c(0.0, 0.5), 40).unwrap();
        let u = c(0.3, 0.1);
        let v = theta(u, &tp).unwrap();
        let oracle = theta_oracle(u, tp.tau);
        assert!((v - oracle).norm() < 1e-12 * oracle.norm().max(1.0));
    }

    #[test]
    fn quasi_periodicity() {
        let tp = ThetaParams::new(c(0.13, 0.62), 60).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let pii = C64::new(0.0, PI);
        for _ in 0..20 {
            let u = c(rng.gen::<f64>() - 0.5, 0.3 * (rng.gen::<f64>() - 0.5));
            let t = theta(u, &tp).unwrap();
            let t1 = theta(u + 1.0, &tp).unwrap();
            assert!((t1 + t).norm() < 1e-11 * t.norm().max(1.0));
            let ttau = theta(u + tp.tau, &tp).unwrap();
            let law = -(-pii * tp.tau - 2.0 * pii * u).exp() * t;
            assert!((ttau - law).norm() < 1e-10 * ttau.norm().max(1.0));
        }
    }

    #[test]
    fn bad_modulus_rejected() {
        assert!(ThetaParams::new(c(0.3, -0.2), 30).is_err());
    }

    #[test]
    fn product_form_matches_series() {
        // The triple-product factorization evaluates to the q-series value.
        let tp = ThetaParams::new(c(0.09, 0.58), 50).unwrap();
        let exp = theta_shift_expansion(c(0.0, 0.0), &tp, 30);
        let u = c(0.27, 0.11);
        let via = exp.eval_at_u(u);
        let direct = theta(u, &tp).unwrap();
        assert!((via - direct).norm() < 1e-10 * direct.norm().max(1.0));
    }

    #[test]
    fn shift_expansion_matches_pointwise_theta() {
        let tp = ThetaParams::new(c(0.11, 0.71), 60).unwrap();
        let shift = c(0.23, 0.05);
        let exp = theta_shift_expansion(shift, &tp, 24);
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..6 {
            let im_u = 0.05 + 0.4 * rng.gen::<f64>() * tp.tau.im;
            let u = c(rng.gen::<f64>() - 0.5, im_u);
            let direct = theta(u + shift, &tp).unwrap();
            let via = exp.eval_at_u(u);
            assert!(
                (direct - via).norm() < 1e-9 * direct.norm().max(1.0),
                "direct {direct} vs expansion {via}"
            );
        }
    }

    #[test]
    fn quotient_expansion_matches_pointwise_ratio() {
        let tp = ThetaParams::new(c(0.07, 0.83), 60).unwrap();
        let a = c(0.31, 0.02);
        let b = c(0.11, -0.04);
        let q = theta_quotient_expansion(&[a], &[b], &tp, 32).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..6 {
            let u = c(rng.gen::<f64>() - 0.5, 0.15 + 0.2 * rng.gen::<f64>() * tp.tau.im);
            let direct = theta(u + a, &tp).unwrap() / theta(u + b, &tp).unwrap();
            let via = q.eval_at_u(u);
            assert!(
                (direct - via).norm() < 1e-8 * direct.norm().max(1.0),
                "direct {direct} vs expansion {via}"
            );
        }
    }
}
