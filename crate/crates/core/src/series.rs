//! Truncated matrix Laurent series with a fractional exponent offset.
//!
//! A one-variable series represents z^{-Δ} · Σ_{m=lo..hi} A_m z^m with a
//! complex offset Δ carried symbolically, never expanded. Coefficients
//! below `lo` are exactly zero; coefficients above `hi` are zero when
//! `tail_exact` is set (the series is really a Laurent polynomial) and
//! unknown otherwise (a truncation). Every operation tracks exactness and
//! refuses to fabricate coefficients it cannot know.

use crate::cnum::{eye, CMat, C64};
use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct MatrixSeries {
    pub offset: C64,
    pub lo: i64,
    pub hi: i64,
    pub rows: usize,
    pub cols: usize,
    pub tail_exact: bool,
    coeffs: BTreeMap<i64, CMat>,
}

impl MatrixSeries {
    pub fn zero(rows: usize, cols: usize, lo: i64, hi: i64) -> Self {
        MatrixSeries {
            offset: C64::new(0.0, 0.0),
            lo,
            hi,
            rows,
            cols,
            tail_exact: false,
            coeffs: BTreeMap::new(),
        }
    }

    /// The identity series: z^0 · I on the window [0, hi], exact tail.
    pub fn identity(n: usize, hi: i64) -> Self {
        let mut s = MatrixSeries::zero(n, n, 0, hi);
        s.tail_exact = true;
        s.set(0, eye(n));
        s
    }

    /// A single monomial z^{-Δ} A z^m, exact everywhere.
    pub fn monomial(offset: C64, m: i64, a: CMat) -> Self {
        let mut s = MatrixSeries::zero(a.nrows(), a.ncols(), m, m);
        s.offset = offset;
        s.tail_exact = true;
        s.set(m, a);
        s
    }

    pub fn with_offset(mut self, offset: C64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_exact_tail(mut self, exact: bool) -> Self {
        self.tail_exact = exact;
        self
    }

    pub fn set(&mut self, m: i64, a: CMat) {
        assert_eq!((a.nrows(), a.ncols()), (self.rows, self.cols), "coefficient shape");
        assert!(m >= self.lo && m <= self.hi, "power {m} outside window [{}, {}]", self.lo, self.hi);
        self.coeffs.insert(m, a);
    }

    /// Coefficient of z^m (relative to the offset); zero below the window.
    pub fn coeff(&self, m: i64) -> CMat {
        self.coeffs
            .get(&m)
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.rows, self.cols))
    }

    pub fn coeff_ref(&self, m: i64) -> Option<&CMat> {
        self.coeffs.get(&m)
    }

    pub fn powers(&self) -> impl Iterator<Item = i64> + '_ {
        self.coeffs.keys().cloned()
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs
            .values()
            .map(crate::cnum::mat_max)
            .fold(0.0, f64::max)
    }

    /// Is the coefficient of z^m known exactly?
    pub fn is_exact_at(&self, m: i64) -> bool {
        m <= self.hi || self.tail_exact
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, &CMat) -> CMat) -> MatrixSeries {
        let mut out = self.clone();
        for (m, a) in self.coeffs.iter() {
            out.coeffs.insert(*m, f(*m, a));
        }
        out
    }

    pub fn scale(&self, c: C64) -> MatrixSeries {
        self.map_coeffs(|_, a| a * c)
    }

    /// Shift integer powers by s (multiplication by z^s with exact bookkeeping).
    pub fn shift(&self, s: i64) -> MatrixSeries {
        let mut out = MatrixSeries::zero(self.rows, self.cols, self.lo + s, self.hi + s);
        out.offset = self.offset;
        out.tail_exact = self.tail_exact;
        for (m, a) in self.coeffs.iter() {
            out.coeffs.insert(m + s, a.clone());
        }
        out
    }

    pub fn add(&self, other: &MatrixSeries) -> Result<MatrixSeries> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch(format!(
                "add: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if (self.offset - other.offset).norm() > 1e-12 {
            return Err(Error::ShapeMismatch("add: offsets differ".into()));
        }
        let lo = self.lo.min(other.lo);
        // The sum is unknown above the smaller of the two known ranges.
        let (hi, tail_exact) = match (self.tail_exact, other.tail_exact) {
            (true, true) => (self.hi.max(other.hi), true),
            (true, false) => (other.hi, false),
            (false, true) => (self.hi, false),
            (false, false) => (self.hi.min(other.hi), false),
        };
        let mut out = MatrixSeries::zero(self.rows, self.cols, lo, hi);
        out.offset = self.offset;
        out.tail_exact = tail_exact;
        for m in lo..=hi {
            let a = self.coeff(m) + other.coeff(m);
            if a.iter().any(|z| z.norm() > 0.0) {
                out.coeffs.insert(m, a);
            }
        }
        Ok(out)
    }

    /// Product truncated to the window `[lo, hi]`. Offsets add. Errors if a
    /// requested coefficient would need unknown data from either factor.
    pub fn mul_windowed(&self, other: &MatrixSeries, lo: i64, hi: i64) -> Result<MatrixSeries> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "mul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // Exactness bound: contributions from unknown tails start above these.
        let bound_a = if self.tail_exact { i64::MAX } else { self.hi.saturating_add(other.lo) };
        let bound_b = if other.tail_exact { i64::MAX } else { other.hi.saturating_add(self.lo) };
        let exact_hi = bound_a.min(bound_b);
        if hi > exact_hi {
            return Err(Error::WindowUnderflow {
                power: exact_hi + 1,
                lo,
                hi,
                context: "product coefficient needs data above a stored window".into(),
            });
        }
        let mut out = MatrixSeries::zero(self.rows, other.cols, lo, hi);
        out.offset = self.offset + other.offset;
        out.tail_exact = self.tail_exact && other.tail_exact && hi >= self.hi + other.hi;
        for (i, a) in self.coeffs.iter() {
            for (j, b) in other.coeffs.iter() {
                let m = i + j;
                if m < lo || m > hi {
                    continue;
                }
                let prod = a * b;
                match out.coeffs.get_mut(&m) {
                    Some(acc) => *acc += prod,
                    None => {
                        out.coeffs.insert(m, prod);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Product on the natural exact window.
    pub fn mul(&self, other: &MatrixSeries) -> Result<MatrixSeries> {
        let lo = self.lo + other.lo;
        let bound_a = if self.tail_exact { i64::MAX } else { self.hi.saturating_add(other.lo) };
        let bound_b = if other.tail_exact { i64::MAX } else { other.hi.saturating_add(self.lo) };
        let hi = if bound_a == i64::MAX && bound_b == i64::MAX {
            self.hi + other.hi
        } else {
            bound_a.min(bound_b)
        };
        self.mul_windowed(other, lo, hi)
    }

    /// Series inverse: requires an invertible lowest-window coefficient.
    /// The result window is chosen so every retained coefficient is exact.
    pub fn invert(&self, rel_order: i64) -> Result<MatrixSeries> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("invert: non-square".into()));
        }
        let lead = self.coeff(self.lo);
        let lead_inv = crate::cnum::inverse(&lead).ok_or(Error::SingularLeading {
            power: self.lo,
            detail: format!("leading coefficient at z^{} is singular", self.lo),
        })?;
        let known_rel = if self.tail_exact { i64::MAX } else { self.hi - self.lo };
        if rel_order > known_rel {
            return Err(Error::WindowUnderflow {
                power: self.lo + known_rel + 1,
                lo: self.lo,
                hi: self.hi,
                context: "inverse needs source coefficients beyond the stored window".into(),
            });
        }
        let out_lo = -self.lo;
        let mut out = MatrixSeries::zero(self.rows, self.cols, out_lo, out_lo + rel_order);
        out.offset = -self.offset;
        out.tail_exact = false;
        out.coeffs.insert(out_lo, lead_inv.clone());
        for m in 1..=rel_order {
            // b_m = -a_lo^{-1} Σ_{i=1..m} a_{lo+i} b_{m-i}
            let mut acc = CMat::zeros(self.rows, self.cols);
            for i in 1..=m {
                if let Some(ai) = self.coeffs.get(&(self.lo + i)) {
                    if let Some(bj) = out.coeffs.get(&(out_lo + m - i)) {
                        acc += ai * bj;
                    }
                }
            }
            out.coeffs.insert(out_lo + m, -(&lead_inv) * acc);
        }
        Ok(out)
    }

    /// Evaluate the integer part Σ A_m x^m at a numeric point (no offset factor).
    pub fn eval_integer(&self, x: C64) -> CMat {
        let mut acc = CMat::zeros(self.rows, self.cols);
        for (m, a) in self.coeffs.iter() {
            acc += a * x.powi(*m as i32);
        }
        acc
    }

    /// Full evaluation with the offset factor z^{-Δ}, z = e^{2πiu}.
    /// The branch is pinned by u, not by z.
    pub fn eval_at_u(&self, u: C64) -> CMat {
        let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
        let z = (two_pi_i * u).exp();
        let phase = (-self.offset * two_pi_i * u).exp();
        self.eval_integer(z) * phase
    }

    pub fn max_diff(&self, other: &MatrixSeries) -> f64 {
        let lo = self.lo.min(other.lo);
        let hi = self.hi.max(other.hi);
        let mut d: f64 = 0.0;
        for m in lo..=hi {
            d = d.max(crate::cnum::mat_diff(&self.coeff(m), &other.coeff(m)));
        }
        d
    }
}

/// JSON schema for a matrix series: `offset` as a [re, im] pair, the window,
/// the shape, and row-major [re, im] coefficient matrices.
#[derive(Serialize, Deserialize)]
pub struct MatrixSeriesJson {
    pub offset: [f64; 2],
    pub lo: i64,
    pub hi: i64,
    pub shape: [usize; 2],
    pub tail_exact: bool,
    pub coeffs: Vec<(i64, Vec<[f64; 2]>)>,
}

impl From<&MatrixSeries> for MatrixSeriesJson {
    fn from(s: &MatrixSeries) -> Self {
        MatrixSeriesJson {
            offset: [s.offset.re, s.offset.im],
            lo: s.lo,
            hi: s.hi,
            shape: [s.rows, s.cols],
            tail_exact: s.tail_exact,
            coeffs: s
                .coeffs
                .iter()
                .map(|(m, a)| {
                    // Row-major flattening.
                    let flat = (0..s.rows)
                        .flat_map(|i| (0..s.cols).map(move |j| (i, j)))
                        .map(|(i, j)| [a[(i, j)].re, a[(i, j)].im])
                        .collect();
                    (*m, flat)
                })
                .collect(),
        }
    }
}

impl MatrixSeriesJson {
    pub fn into_series(self) -> Result<MatrixSeries> {
        let [rows, cols] = self.shape;
        let mut s = MatrixSeries::zero(rows, cols, self.lo, self.hi);
        s.offset = C64::new(self.offset[0], self.offset[1]);
        s.tail_exact = self.tail_exact;
        for (m, flat) in self.coeffs {
            if flat.len() != rows * cols {
                return Err(Error::ShapeMismatch("serialized coefficient length".into()));
            }
            let a = CMat::from_fn(rows, cols, |i, j| {
                let [re, im] = flat[i * cols + j];
                C64::new(re, im)
            });
            s.set(m, a);
        }
        Ok(s)
    }
}

/// Two-variable truncated series z1^{-Δ1} z2^{-Δ2} Σ A_{ij} x^i y^j with
/// bidegree-indexed coefficients.
#[derive(Debug, Clone)]
pub struct TwoVarSeries {
    pub offsets: (C64, C64),
    pub rows: usize,
    pub cols: usize,
    pub coeffs: BTreeMap<(i64, i64), CMat>,
}

impl TwoVarSeries {
    pub fn new(rows: usize, cols: usize, offsets: (C64, C64)) -> Self {
        TwoVarSeries {
            offsets,
            rows,
            cols,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, i: i64, j: i64, a: CMat) {
        assert_eq!((a.nrows(), a.ncols()), (self.rows, self.cols));
        self.coeffs.insert((i, j), a);
    }

    pub fn coeff(&self, i: i64, j: i64) -> CMat {
        self.coeffs
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| CMat::zeros(self.rows, self.cols))
    }

    /// Substitute y = 0: the one-variable series of coefficients A_{i,0}.
    pub fn at_y_zero(&self) -> MatrixSeries {
        let powers: Vec<i64> = self
            .coeffs
            .keys()
            .filter(|(_, j)| *j == 0)
            .map(|(i, _)| *i)
            .collect();
        let lo = powers.iter().cloned().min().unwrap_or(0);
        let hi = powers.iter().cloned().max().unwrap_or(0);
        let mut s = MatrixSeries::zero(self.rows, self.cols, lo, hi);
        s.offset = self.offsets.0;
        for ((i, j), a) in self.coeffs.iter() {
            if *j == 0 {
                s.set(*i, a.clone());
            }
        }
        s
    }

    /// Max variation along anti-diagonals i + j = const after removing
    /// offsets: zero exactly when the series depends on x·y only through
    /// one combined variable.
    pub fn antidiagonal_variation(&self) -> f64 {
        let mut groups: BTreeMap<i64, Vec<&CMat>> = BTreeMap::new();
        for ((i, j), a) in self.coeffs.iter() {
            groups.entry(i + j).or_default().push(a);
        }
        let mut worst: f64 = 0.0;
        for (_, mats) in groups {
            for w in mats.windows(2) {
                worst = worst.max(crate::cnum::mat_diff(w[0], w[1]));
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnum::{c, eye};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};

    fn random_series(seed: u64, n: usize, lo: i64, hi: i64) -> MatrixSeries {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut s = MatrixSeries::zero(n, n, lo, hi);
        for m in lo..=hi {
            let a = CMat::from_fn(n, n, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
            s.set(m, a);
        }
        s
    }

    #[test]
    fn identity_times_a_is_a() {
        let a = random_series(1, 2, 0, 4);
        let id = MatrixSeries::identity(2, 0);
        let prod = id.mul_windowed(&a, 0, 4).unwrap();
        assert!(prod.max_diff(&a) < 1e-14);
    }

    #[test]
    fn offsets_add_for_monomials() {
        let a = MatrixSeries::monomial(c(0.3, 0.1), 0, eye(2));
        let b = MatrixSeries::monomial(c(0.2, -0.4), 0, eye(2));
        let prod = a.mul(&b).unwrap();
        assert!((prod.offset - c(0.5, -0.3)).norm() < 1e-15);
        assert!(prod.max_diff(&MatrixSeries::monomial(c(0.5, -0.3), 0, eye(2))) < 1e-15);
    }

    #[test]
    fn product_matches_schoolbook_convolution() {
        // Independent double-loop oracle.
        let a = random_series(11, 2, 0, 4);
        let b = random_series(12, 2, 0, 4);
        let prod = a.mul_windowed(&b, 0, 4).unwrap();
        for m in 0..=4i64 {
            let mut oracle = CMat::zeros(2, 2);
            for i in 0..=m {
                oracle += a.coeff(i) * b.coeff(m - i);
            }
            assert!(crate::cnum::mat_diff(&prod.coeff(m), &oracle) < 1e-13);
        }
    }

    #[test]
    fn mul_refuses_unknown_coefficients() {
        let a = random_series(3, 2, 0, 2); // truncated: tail unknown
        let b = random_series(4, 2, 0, 2);
        let err = a.mul_windowed(&b, 0, 4);
        match err {
            Err(Error::WindowUnderflow { power, .. }) => assert_eq!(power, 3),
            other => panic!("expected window underflow, got {other:?}"),
        }
    }

    #[test]
    fn invert_identity() {
        let id = MatrixSeries::identity(3, 0);
        let inv = id.invert(4).unwrap();
        for m in 1..=4 {
            assert!(crate::cnum::mat_max(&inv.coeff(m)) < 1e-15);
        }
        assert!(crate::cnum::mat_diff(&inv.coeff(0), &eye(3)) < 1e-15);
    }

    #[test]
    fn invert_geometric_series() {
        // (I + z N)^{-1} = I - zN + z^2 N^2 - ... for nilpotent N.
        let nilp = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let mut s = MatrixSeries::zero(2, 2, 0, 1);
        s.tail_exact = true;
        s.set(0, eye(2));
        s.set(1, nilp.clone());
        let inv = s.invert(4).unwrap();
        assert!(crate::cnum::mat_diff(&inv.coeff(1), &(-&nilp)) < 1e-14);
        assert!(crate::cnum::mat_diff(&inv.coeff(2), &(&nilp * &nilp)) < 1e-14);
    }

    #[test]
    fn invert_multiply_back() {
        let mut a = random_series(21, 2, 0, 6);
        // Make the leading coefficient well-conditioned.
        a.set(0, eye(2) + a.coeff(0).scale(0.3));
        let inv = a.invert(6).unwrap();
        let prod = a.mul_windowed(&inv, 0, 6).unwrap();
        let id = MatrixSeries::identity(2, 0);
        assert!(prod.max_diff(&id) < 1e-12);
    }

    #[test]
    fn singular_leading_rejected() {
        let mut s = MatrixSeries::zero(2, 2, 0, 2);
        s.set(0, CMat::zeros(2, 2));
        s.set(1, eye(2));
        assert!(matches!(s.invert(2), Err(Error::SingularLeading { power: 0, .. })));
    }

    #[test]
    fn two_var_y_zero_recovers_one_var() {
        let mut tv = TwoVarSeries::new(2, 2, (c(0.1, 0.0), c(0.2, 0.0)));
        let a0 = eye(2);
        let a1 = eye(2) * c(2.0, 1.0);
        tv.set(0, 0, a0.clone());
        tv.set(1, 0, a1.clone());
        tv.set(0, 1, eye(2) * c(9.0, 0.0));
        let s = tv.at_y_zero();
        assert!(crate::cnum::mat_diff(&s.coeff(0), &a0) < 1e-15);
        assert!(crate::cnum::mat_diff(&s.coeff(1), &a1) < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn ring_axioms_on_window(sa in 0u64..1000, sb in 0u64..1000, sc in 0u64..1000) {
            let a = random_series(sa, 2, 0, 4);
            let b = random_series(sb.wrapping_add(7919), 2, 0, 4);
            let cs = random_series(sc.wrapping_add(104729), 2, 0, 4);
            // Associativity on the window.
            let ab_c = a.mul_windowed(&b, 0, 4).unwrap().mul_windowed(&cs, 0, 4).unwrap();
            let a_bc = a.mul_windowed(&b.mul_windowed(&cs, 0, 4).unwrap(), 0, 4).unwrap();
            let scale = ab_c.max_coeff_norm().max(1.0);
            prop_assert!(ab_c.max_diff(&a_bc) / scale < 1e-12);
            // Distributivity.
            let bc = b.add(&cs).unwrap();
            let lhs = a.mul_windowed(&bc, 0, 4).unwrap();
            let rhs = a.mul_windowed(&b, 0, 4).unwrap().add(&a.mul_windowed(&cs, 0, 4).unwrap()).unwrap();
            prop_assert!(lhs.max_diff(&rhs) / scale < 1e-12);
        }

        #[test]
        fn json_round_trip(seed in 0u64..1000) {
            let a = random_series(seed, 3, -2, 3).with_offset(c(0.37, -1.2));
            let json = serde_json::to_string(&MatrixSeriesJson::from(&a)).unwrap();
            let back: MatrixSeriesJson = serde_json::from_str(&json).unwrap();
            let b = back.into_series().unwrap();
            prop_assert!((a.offset - b.offset).norm() < 1e-15);
            prop_assert!(a.max_diff(&b) < 1e-15 * a.max_coeff_norm().max(1.0));
        }
    }
}
