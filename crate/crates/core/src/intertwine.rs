//! Intertwining operators, quantum correlation functions, and fusion
//! matrices (qKZ twists).
//!
//! An intertwiner Φ^v: M_{λ,k} → M_{μ,k'} ⊗̂ Y is determined by its
//! expectation value v. Its coefficient table is solved grade by grade in
//! the affine-letter grading; the annihilation conditions at grade g form
//! a linear system whose unique solvability at generic parameters is the
//! existence/uniqueness statement the tests verify.
//!
//! The composed matrix element ⟨x*, Φ^v Φ^w x_λ⟩ never needs the outer
//! intertwiner's coefficient tail: pairing against the dual highest-weight
//! functional collapses the outer operator to a word recursion, because
//! lowering generators only move down and only the leading term survives.
//! The explicit operator-composition route is kept as a test oracle.

use crate::cnum::{lstsq, CMat, CVec, C64};
use crate::error::Error;
use crate::qaff::verma::{block_from_drop, BlockId, TruncatedVermaModule};
use crate::qaff::{BuildPolicy, Gen, TensorFactor};
use crate::series::{MatrixSeries, TwoVarSeries};
use crate::weights::{coords_add, coords_sub, delta_k, RootSystem};
use crate::{Params, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Tensor-product index, first factor major.
pub fn kron_index(a: usize, b: usize, dim_b: usize) -> usize {
    a * dim_b + b
}

/// One solved coefficient cell: a Verma block paired with a Y-basis index,
/// in the block's pivot coordinates.
#[derive(Debug, Clone)]
pub struct Cell {
    pub block: BlockId,
    pub y: usize,
    pub coords: CVec,
}

#[derive(Debug, Clone)]
pub struct Intertwiner {
    /// Source highest weight (the target's weight plus the leading weight).
    pub lambda: Vec<C64>,
    pub k: C64,
    /// Leading Y-basis index: the expectation value is e_leading.
    pub leading: usize,
    pub target: Arc<TruncatedVermaModule>,
    /// Coefficient cells per grade 0..=max_grade.
    pub grades: Vec<Vec<Cell>>,
    /// Worst annihilation-system solve residual over grades.
    pub residual: f64,
    pub y_dim: usize,
}

impl Intertwiner {
    pub fn max_grade(&self) -> i64 {
        self.grades.len() as i64 - 1
    }
}

fn qpow(logq: C64, a: C64) -> C64 {
    (a * logq).exp()
}

/// Blocks of the target Verma needed to solve grades 0..=gmax against Y.
pub fn needed_blocks(
    rs: &RootSystem,
    y: &dyn TensorFactor,
    v_weight: &[C64],
    leading_deg: i64,
    gmax: i64,
) -> Vec<BlockId> {
    let mut out = Vec::new();
    for g in 0..=gmax {
        for b in 0..y.dim() {
            if !y.has_formal_variable() && y.degree(b) != leading_deg + g {
                continue;
            }
            let drop = coords_sub(&y.weight_coords(b), v_weight);
            if let Some(id) = block_from_drop(rs, &drop, g) {
                out.push(id);
            }
        }
    }
    out
}

fn grade_cells(
    target: &TruncatedVermaModule,
    y: &dyn TensorFactor,
    v_weight: &[C64],
    leading_deg: i64,
    g: i64,
) -> Vec<(BlockId, usize)> {
    let rs = target.root_system();
    let mut cells = Vec::new();
    for b in 0..y.dim() {
        if !y.has_formal_variable() && y.degree(b) != leading_deg + g {
            continue;
        }
        let drop = coords_sub(&y.weight_coords(b), v_weight);
        if let Some(id) = block_from_drop(rs, &drop, g) {
            if let Some(block) = target.blocks.get(&id) {
                if block.dim() > 0 {
                    cells.push((id, b));
                }
            }
        }
    }
    cells
}

enum CellSource<'a> {
    Unknown(usize),
    Known(&'a CVec),
}

/// Solve the intertwiner with expectation value e_`leading` ∈ Y through
/// grade `gmax`. The target truncation must contain the needed blocks.
pub fn solve_intertwiner(
    params: &Params,
    target: Arc<TruncatedVermaModule>,
    y: &dyn TensorFactor,
    leading: usize,
    gmax: i64,
) -> Result<Intertwiner> {
    let n = params.n;
    let rs = RootSystem::new(n);
    let logq = params.logq;
    let v_weight = y.weight_coords(leading);
    let leading_deg = y.degree(leading);
    let lambda: Vec<C64> = coords_add(&target.lambda, &v_weight);

    let mut grades: Vec<Vec<Cell>> = Vec::new();
    let mut worst_res: f64 = 0.0;

    for g in 0..=gmax {
        let cells = grade_cells(&target, y, &v_weight, leading_deg, g);
        if cells.is_empty() {
            grades.push(Vec::new());
            continue;
        }
        let top_id = vec![0u16; n];
        let mut unknown_offsets: BTreeMap<(BlockId, usize), usize> = BTreeMap::new();
        let mut pinned: Vec<(BlockId, usize, C64)> = Vec::new();
        let mut ncols = 0;
        for (id, b) in &cells {
            if g == 0 && *id == top_id {
                let val = if *b == leading {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                pinned.push((id.clone(), *b, val));
            } else {
                unknown_offsets.insert((id.clone(), *b), ncols);
                ncols += target.blocks[id].dim();
            }
        }

        // Enumerate output cells of all annihilation terms.
        let mut row_offsets: BTreeMap<(BlockId, usize), usize> = BTreeMap::new();
        let mut nrows = 0usize;
        {
            let mut touch = |key: (BlockId, usize), dim: usize| {
                row_offsets.entry(key).or_insert_with(|| {
                    let ofs = nrows;
                    nrows += dim;
                    ofs
                });
            };
            for (id, b) in &cells {
                for i in 0..n {
                    if id[i] > 0 {
                        let mut down = id.clone();
                        down[i] -= 1;
                        if let Some(bk) = target.blocks.get(&down) {
                            if bk.dim() > 0 {
                                touch((down.clone(), *b), bk.dim());
                            }
                        }
                    }
                    if i >= 1 {
                        for (b2, _) in y.act(Gen::E(i), *b) {
                            touch((id.clone(), b2), target.blocks[id].dim());
                        }
                    }
                }
            }
            if g >= 1 {
                for cell in &grades[(g - 1) as usize] {
                    for (b2, _) in y.act(Gen::E(0), cell.y) {
                        touch((cell.block.clone(), b2), target.blocks[&cell.block].dim());
                    }
                }
            }
        }

        if ncols == 0 {
            let mut solved = Vec::new();
            for (id, b, val) in pinned {
                let dim = target.blocks[&id].dim();
                let mut coords = CVec::zeros(dim);
                if val.norm() > 0.0 {
                    coords[0] = val;
                }
                solved.push(Cell {
                    block: id,
                    y: b,
                    coords,
                });
            }
            grades.push(solved);
            continue;
        }

        let mut a = CMat::zeros(nrows, ncols);
        let mut rhs = CVec::zeros(nrows);
        let k_eigen = |i: usize, b: usize| -> C64 {
            qpow(logq, rs.h_eigen(i, &y.weight_coords(b), y.level()))
        };

        {
            let mut add_terms = |id: &BlockId, b: usize, source: CellSource<'_>| {
                for i in 0..n {
                    // (E_i ⊗ K_i): within this grade.
                    if id[i] > 0 {
                        if let Some(emat) = target.e_mats.get(&(i, id.clone())) {
                            let mut down = id.clone();
                            down[i] -= 1;
                            if let Some(&r0) = row_offsets.get(&(down, b)) {
                                let kappa = k_eigen(i, b);
                                match &source {
                                    CellSource::Unknown(c0) => {
                                        for r in 0..emat.nrows() {
                                            for j in 0..emat.ncols() {
                                                a[(r0 + r, c0 + j)] += kappa * emat[(r, j)];
                                            }
                                        }
                                    }
                                    CellSource::Known(v) => {
                                        let img = emat * *v;
                                        for (r, val) in img.iter().enumerate() {
                                            rhs[r0 + r] -= kappa * val;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    // (1 ⊗ E_i) for i ≥ 1: same grade.
                    if i >= 1 {
                        for (b2, coef) in y.act(Gen::E(i), b) {
                            if let Some(&r0) = row_offsets.get(&(id.clone(), b2)) {
                                let dim = target.blocks[id].dim();
                                match &source {
                                    CellSource::Unknown(c0) => {
                                        for j in 0..dim {
                                            a[(r0 + j, c0 + j)] += coef;
                                        }
                                    }
                                    CellSource::Known(v) => {
                                        for j in 0..dim {
                                            rhs[r0 + j] -= coef * v[j];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            };

            for ((id, b), c0) in &unknown_offsets {
                add_terms(id, *b, CellSource::Unknown(*c0));
            }
            let pinned_vecs: Vec<(BlockId, usize, CVec)> = pinned
                .iter()
                .map(|(id, b, val)| {
                    let dim = target.blocks[id].dim();
                    let mut v = CVec::zeros(dim);
                    if val.norm() > 0.0 {
                        v[0] = *val;
                    }
                    (id.clone(), *b, v)
                })
                .collect();
            for (id, b, v) in &pinned_vecs {
                add_terms(id, *b, CellSource::Known(v));
            }
            // Previous grade through (1 ⊗ E_0).
            if g >= 1 {
                for cell in &grades[(g - 1) as usize] {
                    for (b2, coef) in y.act(Gen::E(0), cell.y) {
                        if let Some(&r0) = row_offsets.get(&(cell.block.clone(), b2)) {
                            for j in 0..cell.coords.len() {
                                rhs[r0 + j] -= coef * cell.coords[j];
                            }
                        }
                    }
                }
            }

            let (x, res, rank) = lstsq(&a, &rhs, 1e-12);
            let scale = a
                .iter()
                .map(|z| z.norm())
                .fold(rhs.norm().max(1e-300), f64::max);
            if rank < ncols {
                return Err(Error::RankDeficient {
                    grade: g,
                    rank,
                    expected: ncols,
                });
            }
            let rel = res / scale.max(1.0);
            worst_res = worst_res.max(rel);
            if rel > 1e-7 {
                return Err(Error::SolveFailed(format!(
                    "annihilation system inconsistent at grade {g}: residual {rel:.3e}"
                )));
            }
            let mut solved: Vec<Cell> = pinned_vecs
                .into_iter()
                .map(|(id, b, coords)| Cell {
                    block: id,
                    y: b,
                    coords,
                })
                .collect();
            for ((id, b), c0) in &unknown_offsets {
                let dim = target.blocks[id].dim();
                let coords = CVec::from_iterator(dim, (0..dim).map(|j| x[c0 + j]));
                solved.push(Cell {
                    block: id.clone(),
                    y: *b,
                    coords,
                });
            }
            grades.push(solved);
        }
    }

    Ok(Intertwiner {
        lambda,
        k: params.k,
        leading,
        target,
        grades,
        residual: worst_res,
        y_dim: y.dim(),
    })
}

/// Annihilation residual of a solved intertwiner, recomputed from scratch:
/// max over generators and grades of ‖(E_i ⊗ K_i + 1 ⊗ E_i)·Φ‖ relative to
/// the coefficient scale.
pub fn annihilation_residual(params: &Params, phi: &Intertwiner, y: &dyn TensorFactor) -> f64 {
    let n = params.n;
    let rs = RootSystem::new(n);
    let target = &phi.target;
    let mut worst: f64 = 0.0;
    let scale = phi
        .grades
        .iter()
        .flatten()
        .map(|c| c.coords.norm())
        .fold(1.0, f64::max);
    for g in 0..phi.grades.len() as i64 {
        for i in 0..n {
            let mut acc: BTreeMap<(BlockId, usize), CVec> = BTreeMap::new();
            let mut push = |key: (BlockId, usize), v: CVec, acc: &mut BTreeMap<(BlockId, usize), CVec>| {
                match acc.get_mut(&key) {
                    Some(w) => *w += v,
                    None => {
                        acc.insert(key, v);
                    }
                }
            };
            for cell in &phi.grades[g as usize] {
                if cell.block[i] > 0 {
                    if let Some(emat) = target.e_mats.get(&(i, cell.block.clone())) {
                        let mut down = cell.block.clone();
                        down[i] -= 1;
                        let kappa =
                            qpow(params.logq, rs.h_eigen(i, &y.weight_coords(cell.y), y.level()));
                        push((down, cell.y), emat * &cell.coords * kappa, &mut acc);
                    }
                }
            }
            let gsrc = if i == 0 { g - 1 } else { g };
            if gsrc >= 0 && (gsrc as usize) < phi.grades.len() {
                for cell in &phi.grades[gsrc as usize] {
                    for (b2, coef) in y.act(Gen::E(i), cell.y) {
                        push((cell.block.clone(), b2), &cell.coords * coef, &mut acc);
                    }
                }
            }
            for (_, v) in acc.iter() {
                worst = worst.max(v.norm() / scale);
            }
        }
    }
    worst
}

/// The functional u ↦ ⟨x*_top ⊗ id_Y, Φ^v(u)⟩ realized as a word recursion:
/// each lowering letter j contributes q^{-top(h_j)} π_Y(F_j) acting toward
/// the leading vector. Exact for any u expressed in F-words.
pub struct TopFunctional<'a> {
    pub y: &'a dyn TensorFactor,
    pub top_coords: Vec<C64>,
    pub top_level: C64,
    pub logq: C64,
}

impl<'a> TopFunctional<'a> {
    /// Apply to a word (outermost letter first), starting from e_v.
    pub fn apply_word(&self, word: &[u8], v: usize) -> CVec {
        let rs = RootSystem::new(self.y.n());
        let mut acc = CVec::zeros(self.y.dim());
        acc[v] = C64::new(1.0, 0.0);
        for t in (0..word.len()).rev() {
            let j = word[t] as usize;
            let chi = qpow(self.logq, -rs.h_eigen(j, &self.top_coords, self.top_level));
            let mut next = CVec::zeros(self.y.dim());
            for b in 0..self.y.dim() {
                if acc[b].norm() == 0.0 {
                    continue;
                }
                for (b2, coef) in self.y.act(Gen::F(j), b) {
                    next[b2] += chi * coef * acc[b];
                }
            }
            acc = next;
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Both factors evaluation modules (two spectral variables).
    FiniteFinite,
    /// Evaluation ⊗ category-O: one spectral variable, powers ≤ 0,
    /// finite per input vector.
    FiniteO,
    /// Category-O ⊗ evaluation: one spectral variable, powers ≥ 0,
    /// windowed at the truncation order.
    OFinite,
}

/// A fusion matrix: the correlation functions over a tensor-product basis,
/// stored as an integer-power matrix series plus a per-column fractional
/// offset ledger.
#[derive(Debug, Clone)]
pub struct FusionMatrix {
    pub flavor: Flavor,
    pub dim_a: usize,
    pub dim_b: usize,
    /// Integer-power part. FiniteFinite: powers of x = z2/z1 in [0, N];
    /// FiniteO: powers of z in [-G, 0]; OFinite: powers of z in [0, N].
    pub series: MatrixSeries,
    /// Per input column: (Δ1, Δ2) with prefactor z1^{-Δ1} z2^{-Δ2};
    /// single-variable flavors use Δ1 only.
    pub col_offsets: Vec<(C64, C64)>,
    /// Finite weight coordinates per tensor-basis index.
    pub weights: Vec<Vec<C64>>,
    /// Worst intertwiner solve residual over columns.
    pub residual: f64,
}

impl FusionMatrix {
    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }
}

/// Correlation data for one input pair.
pub struct CorrelationFunction {
    /// Coefficient of (z2/z1)^j as a vector in the tensor product.
    pub diag: Vec<CVec>,
    pub offsets: (C64, C64),
}

/// Fusion matrix of two vector evaluation modules through order `n_order`
/// in x = z2/z1: column v ⊗ w is the quantum correlation function of the
/// composed intertwiners with expectation values v and w.
pub fn fusion_ff(params: &Params, n_order: i64) -> Result<FusionMatrix> {
    let n = params.n;
    let rs = RootSystem::new(n);
    let v_mod = crate::qaff::EvaluationModule::new(n);
    let dim = n;
    let lambda = params.lambda.clone();

    let mut series = MatrixSeries::zero(dim * dim, dim * dim, 0, n_order);
    let mut col_offsets = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); dim * dim];
    let mut worst_res: f64 = 0.0;

    for w in 0..dim {
        let nu = v_mod.weight_coords(w);
        let mu_target = coords_sub(&lambda, &nu);
        let blocks = needed_blocks(&rs, &v_mod, &nu, 0, n_order);
        let target = Arc::new(TruncatedVermaModule::build(
            params,
            &mu_target,
            params.k,
            &BuildPolicy::Blocks(blocks),
            1e8,
        )?);
        let inner = solve_intertwiner(params, target.clone(), &v_mod, w, n_order)?;
        worst_res = worst_res.max(inner.residual);
        let delta2 = delta_k(&rs, &lambda, params.k)? - delta_k(&rs, &mu_target, params.k)?;

        for v in 0..dim {
            let mu = v_mod.weight_coords(v);
            let out_top = coords_sub(&mu_target, &mu);
            let delta1 = delta_k(&rs, &mu_target, params.k)? - delta_k(&rs, &out_top, params.k)?;
            let functional = TopFunctional {
                y: &v_mod,
                top_coords: out_top,
                top_level: params.k,
                logq: params.logq,
            };
            let col = kron_index(v, w, dim);
            col_offsets[col] = (delta1, delta2);
            for (g, cells) in inner.grades.iter().enumerate() {
                let mut out = CVec::zeros(dim * dim);
                for cell in cells {
                    let block = &target.blocks[&cell.block];
                    for (pi, &p) in block.pivots.iter().enumerate() {
                        if cell.coords[pi].norm() == 0.0 {
                            continue;
                        }
                        let tv = functional.apply_word(&block.words[p], v);
                        for a in 0..dim {
                            if tv[a].norm() > 0.0 {
                                out[kron_index(a, cell.y, dim)] +=
                                    tv[a] * cell.coords[pi] * block.pivot_scale[pi];
                            }
                        }
                    }
                }
                let mut coeff = series.coeff(g as i64);
                for r in 0..dim * dim {
                    coeff[(r, col)] = out[r];
                }
                series.set(g as i64, coeff);
            }
        }
    }

    let weights: Vec<Vec<C64>> = (0..dim * dim)
        .map(|idx| {
            let (a, b) = (idx / dim, idx % dim);
            coords_add(&v_mod.weight_coords(a), &v_mod.weight_coords(b))
        })
        .collect();

    Ok(FusionMatrix {
        flavor: Flavor::FiniteFinite,
        dim_a: dim,
        dim_b: dim,
        series,
        col_offsets,
        weights,
        residual: worst_res,
    })
}

/// Correlation function of one pair (v, w) of vector-module indices, with
/// its two-variable table (powers of z1 and z2 tracked separately).
pub fn correlation_series(
    params: &Params,
    v: usize,
    w: usize,
    n_order: i64,
) -> Result<(CorrelationFunction, TwoVarSeries)> {
    let n = params.n;
    let rs = RootSystem::new(n);
    let v_mod = crate::qaff::EvaluationModule::new(n);
    let dim = n;
    let lambda = params.lambda.clone();
    let nu = v_mod.weight_coords(w);
    let mu = v_mod.weight_coords(v);
    let mu_target = coords_sub(&lambda, &nu);
    let out_top = coords_sub(&mu_target, &mu);
    let blocks = needed_blocks(&rs, &v_mod, &nu, 0, n_order);
    let target = Arc::new(TruncatedVermaModule::build(
        params,
        &mu_target,
        params.k,
        &BuildPolicy::Blocks(blocks),
        1e8,
    )?);
    let inner = solve_intertwiner(params, target.clone(), &v_mod, w, n_order)?;
    let delta2 = delta_k(&rs, &lambda, params.k)? - delta_k(&rs, &mu_target, params.k)?;
    let delta1 = delta_k(&rs, &mu_target, params.k)? - delta_k(&rs, &out_top, params.k)?;
    let functional = TopFunctional {
        y: &v_mod,
        top_coords: out_top,
        top_level: params.k,
        logq: params.logq,
    };
    let mut diag = Vec::new();
    let mut table = TwoVarSeries::new(dim * dim, 1, (delta1, delta2));
    for (g, cells) in inner.grades.iter().enumerate() {
        let mut out = CVec::zeros(dim * dim);
        for cell in cells {
            let block = &target.blocks[&cell.block];
            for (pi, &p) in block.pivots.iter().enumerate() {
                if cell.coords[pi].norm() == 0.0 {
                    continue;
                }
                let tv = functional.apply_word(&block.words[p], v);
                for a in 0..dim {
                    if tv[a].norm() > 0.0 {
                        out[kron_index(a, cell.y, dim)] +=
                                    tv[a] * cell.coords[pi] * block.pivot_scale[pi];
                    }
                }
            }
        }
        table.set(
            -(g as i64),
            g as i64,
            CMat::from_column_slice(dim * dim, 1, out.as_slice()),
        );
        diag.push(out);
    }
    Ok((
        CorrelationFunction {
            diag,
            offsets: (delta1, delta2),
        },
        table,
    ))
}

/// Mixed fusion J_{V,X}(z): V the vector module, X a truncated category-O
/// module at level l. Exact per column: powers of z in [-G(b), 0] where
/// G(b) is the height of the input X-vector below the top of X.
pub fn fusion_finite_o(
    params: &Params,
    x_factor: &crate::qaff::VermaFactor<'_>,
) -> Result<FusionMatrix> {
    let n = params.n;
    let rs = RootSystem::new(n);
    let v_mod = crate::qaff::EvaluationModule::new(n);
    let dim_a = n;
    let dim_b = x_factor.dim();
    let lambda = params.lambda.clone();
    let l = x_factor.level();
    let k_shift = params.k - l;

    let gmax: i64 = (0..dim_b).map(|b| -x_factor.degree(b)).max().unwrap_or(0);
    let mut series = MatrixSeries::zero(dim_a * dim_b, dim_a * dim_b, -gmax, 0);
    series.tail_exact = true;
    let mut col_offsets = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); dim_a * dim_b];
    let mut worst_res: f64 = 0.0;

    let mut shifted = params.clone();
    shifted.k = k_shift;
    for b in 0..dim_b {
        let nu = x_factor.weight_coords(b);
        let mu_target = coords_sub(&lambda, &nu);
        let g_b = -x_factor.degree(b);
        let blocks = needed_blocks(&rs, x_factor, &nu, x_factor.degree(b), g_b);
        let target = Arc::new(TruncatedVermaModule::build(
            params,
            &mu_target,
            k_shift,
            &BuildPolicy::Blocks(blocks),
            1e8,
        )?);
        let inner = solve_intertwiner(&shifted, target.clone(), x_factor, b, g_b)?;
        worst_res = worst_res.max(inner.residual);

        for v in 0..dim_a {
            let mu = v_mod.weight_coords(v);
            let out_top = coords_sub(&mu_target, &mu);
            let delta1 = delta_k(&rs, &mu_target, k_shift)? - delta_k(&rs, &out_top, k_shift)?;
            let functional = TopFunctional {
                y: &v_mod,
                top_coords: out_top,
                top_level: k_shift,
                logq: params.logq,
            };
            let col = kron_index(v, b, dim_b);
            col_offsets[col] = (delta1, C64::new(0.0, 0.0));
            for (g, cells) in inner.grades.iter().enumerate() {
                let mut out = CVec::zeros(dim_a * dim_b);
                for cell in cells {
                    let block = &target.blocks[&cell.block];
                    for (pi, &p) in block.pivots.iter().enumerate() {
                        if cell.coords[pi].norm() == 0.0 {
                            continue;
                        }
                        let tv = functional.apply_word(&block.words[p], v);
                        for a in 0..dim_a {
                            if tv[a].norm() > 0.0 {
                                out[kron_index(a, cell.y, dim_b)] +=
                                    tv[a] * cell.coords[pi] * block.pivot_scale[pi];
                            }
                        }
                    }
                }
                let m = -(g as i64);
                let mut coeff = series.coeff(m);
                for r in 0..dim_a * dim_b {
                    coeff[(r, col)] = out[r];
                }
                series.set(m, coeff);
            }
        }
    }

    let weights: Vec<Vec<C64>> = (0..dim_a * dim_b)
        .map(|idx| {
            let (a, b) = (idx / dim_b, idx % dim_b);
            coords_add(&v_mod.weight_coords(a), &x_factor.weight_coords(b))
        })
        .collect();

    Ok(FusionMatrix {
        flavor: Flavor::FiniteO,
        dim_a,
        dim_b,
        series,
        col_offsets,
        weights,
        residual: worst_res,
    })
}

/// Reversed-order mixed fusion J*_{X,V}(z): powers of z in [0, N], windowed.
pub fn fusion_o_finite(
    params: &Params,
    x_factor: &crate::qaff::VermaFactor<'_>,
    n_order: i64,
) -> Result<FusionMatrix> {
    let n = params.n;
    let rs = RootSystem::new(n);
    let v_mod = crate::qaff::EvaluationModule::new(n);
    let dim_a = x_factor.dim();
    let dim_b = n;
    let lambda = params.lambda.clone();
    let l = x_factor.level();
    let k_shift = params.k - l;

    let mut series = MatrixSeries::zero(dim_a * dim_b, dim_a * dim_b, 0, n_order);
    let mut col_offsets = vec![(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); dim_a * dim_b];
    let mut worst_res: f64 = 0.0;

    for v in 0..dim_b {
        let mu = v_mod.weight_coords(v);
        let mu_target = coords_sub(&lambda, &mu);
        let blocks = needed_blocks(&rs, &v_mod, &mu, 0, n_order);
        let target = Arc::new(TruncatedVermaModule::build(
            params,
            &mu_target,
            params.k,
            &BuildPolicy::Blocks(blocks),
            1e8,
        )?);
        let inner = solve_intertwiner(params, target.clone(), &v_mod, v, n_order)?;
        worst_res = worst_res.max(inner.residual);
        let delta1 = delta_k(&rs, &lambda, params.k)? - delta_k(&rs, &mu_target, params.k)?;

        for b in 0..dim_a {
            let nu = x_factor.weight_coords(b);
            let out_top = coords_sub(&mu_target, &nu);
            let functional = TopFunctional {
                y: x_factor,
                top_coords: out_top,
                top_level: k_shift,
                logq: params.logq,
            };
            let col = kron_index(b, v, dim_b);
            col_offsets[col] = (delta1, C64::new(0.0, 0.0));
            for (g, cells) in inner.grades.iter().enumerate() {
                let mut out = CVec::zeros(dim_a * dim_b);
                for cell in cells {
                    let block = &target.blocks[&cell.block];
                    for (pi, &p) in block.pivots.iter().enumerate() {
                        if cell.coords[pi].norm() == 0.0 {
                            continue;
                        }
                        let tx = functional.apply_word(&block.words[p], b);
                        for xb in 0..dim_a {
                            if tx[xb].norm() > 0.0 {
                                out[kron_index(xb, cell.y, dim_b)] +=
                                    tx[xb] * cell.coords[pi] * block.pivot_scale[pi];
                            }
                        }
                    }
                }
                let mut coeff = series.coeff(g as i64);
                for r in 0..dim_a * dim_b {
                    coeff[(r, col)] = out[r];
                }
                series.set(g as i64, coeff);
            }
        }
    }

    let weights: Vec<Vec<C64>> = (0..dim_a * dim_b)
        .map(|idx| {
            let (a, b) = (idx / dim_b, idx % dim_b);
            coords_add(&x_factor.weight_coords(a), &v_mod.weight_coords(b))
        })
        .collect();

    Ok(FusionMatrix {
        flavor: Flavor::OFinite,
        dim_a,
        dim_b,
        series,
        col_offsets,
        weights,
        residual: worst_res,
    })
}

/// Weight-zero residual: total-weight off-block entries must vanish.
pub fn weight_zero_residual(j: &FusionMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for m in j.series.powers().collect::<Vec<_>>() {
        let coeff = j.series.coeff(m);
        for r in 0..coeff.nrows() {
            for c in 0..coeff.ncols() {
                let same = j.weights[r]
                    .iter()
                    .zip(&j.weights[c])
                    .all(|(a, b)| (a - b).norm() < 1e-9);
                if !same {
                    worst = worst.max(coeff[(r, c)].norm());
                }
            }
        }
    }
    worst
}
