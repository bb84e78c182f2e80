//! Truncated Verma modules for U_q(ŝl_n) via the contravariant form.
//!
//! The module M_{λ,k} is spanned by words in the lowering generators F_i
//! applied to the highest weight vector. A weight block is labelled by the
//! exponent vector m = (m_0, …, m_{n-1}) counting letters of each color;
//! all words of a block share the multiset of letters. Within each block we
//! compute the Gram matrix of the contravariant form on the word spanning
//! set by commuting E's to the right, pick a pivot basis by rank-revealing
//! column selection, and express every generator action in pivot
//! coordinates by Gram solves.

use super::{Gen, TensorFactor};
use crate::cnum::{cond_svd, CMat, CVec, C64};
use crate::error::Error;
use crate::weights::{delta_k, RootSystem};
use crate::{Params, Result};
use std::collections::BTreeMap;

pub type BlockId = Vec<u16>;
pub type Word = Vec<u8>;

/// Which weight blocks of the truncation to populate.
#[derive(Debug, Clone)]
pub enum BuildPolicy {
    /// All blocks with total F-word length ≤ depth.
    ByLength(usize),
    /// The given blocks plus their closure under componentwise decrease
    /// (the closure is what the Gram induction and E-actions need).
    Blocks(Vec<BlockId>),
}

#[derive(Debug, Clone)]
pub struct VermaBlock {
    pub id: BlockId,
    /// Lex-sorted distinct words with the block's letter multiset.
    pub words: Vec<Word>,
    /// Contravariant Gram matrix on the word spanning set.
    pub gram: CMat,
    /// Indices into `words` forming a pivot basis.
    pub pivots: Vec<usize>,
    /// Equilibration factors: the basis vector for pivot i is
    /// `pivot_scale[i]` times the pivot word, keeping Gram columns of
    /// comparable size across a block.
    pub pivot_scale: Vec<f64>,
    /// Scaled-pivot coordinates of every word: pivots.len() × words.len().
    pub expand: CMat,
    /// Gram matrix in the scaled pivot basis.
    pub gram_pp: CMat,
    pub cond: f64,
    /// Finite weight coordinates of the block.
    pub coords: Vec<C64>,
    /// Number of affine-node letters (the d-grade drop).
    pub degree_drop: i64,
}

impl VermaBlock {
    pub fn dim(&self) -> usize {
        self.pivots.len()
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedVermaModule {
    pub n: usize,
    pub q: C64,
    pub logq: C64,
    /// Highest weight coordinates.
    pub lambda: Vec<C64>,
    /// Level: the exponent by which q^c acts.
    pub level: C64,
    /// Conformal weight at this module's own level.
    pub delta: C64,
    pub blocks: BTreeMap<BlockId, VermaBlock>,
    /// E_i matrices, block m → block m - e_i, in pivot bases.
    pub e_mats: BTreeMap<(usize, BlockId), CMat>,
    /// F_i matrices, block m → block m + e_i, in pivot bases.
    pub f_mats: BTreeMap<(usize, BlockId), CMat>,
    rs: RootSystem,
}

/// A vector in the truncation, stored per block in pivot coordinates.
#[derive(Debug, Clone, Default)]
pub struct VermaVector {
    pub comps: BTreeMap<BlockId, CVec>,
}

impl VermaVector {
    pub fn zero() -> Self {
        VermaVector::default()
    }

    pub fn highest(n: usize) -> Self {
        let mut comps = BTreeMap::new();
        comps.insert(vec![0u16; n], CVec::from_element(1, C64::new(1.0, 0.0)));
        VermaVector { comps }
    }

    pub fn add_scaled(&mut self, other: &VermaVector, s: C64) {
        for (b, v) in &other.comps {
            match self.comps.get_mut(b) {
                Some(acc) => *acc += v * s,
                None => {
                    self.comps.insert(b.clone(), v * s);
                }
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.comps.values().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }
}

/// Solve m_{1..n-1} from a finite weight drop and affine-letter count g:
/// drop = Σ_{i≥1} m_i α_i − g·θ. Returns the block id (g, m_1, …) when the
/// solution is a nonnegative integer vector.
pub fn block_from_drop(rs: &RootSystem, drop: &[C64], g: i64) -> Option<BlockId> {
    let r = rs.rank();
    let theta = rs.highest_root();
    // C · m = coords(drop) + g·coords(θ)
    let rhs: Vec<C64> = (0..r)
        .map(|j| drop[j] + C64::new(g as f64, 0.0) * theta[j])
        .collect();
    let cmat = CMat::from_fn(r, r, |i, j| C64::new(rs.cartan[i][j] as f64, 0.0));
    let rhsv = CVec::from_iterator(r, rhs.iter().cloned());
    let sol = cmat.lu().solve(&rhsv)?;
    let mut id = vec![0u16; rs.n];
    if g < 0 {
        return None;
    }
    id[0] = g as u16;
    for i in 0..r {
        let x = sol[i];
        let rounded = x.re.round();
        if (x - C64::new(rounded, 0.0)).norm() > 1e-6 || rounded < 0.0 || rounded > 60000.0 {
            return None;
        }
        id[i + 1] = rounded as u16;
    }
    Some(id)
}

fn multiset_words(id: &BlockId) -> Vec<Word> {
    let mut letters: Vec<u8> = Vec::new();
    for (i, m) in id.iter().enumerate() {
        for _ in 0..*m {
            letters.push(i as u8);
        }
    }
    let mut out = Vec::new();
    let mut current = letters.clone();
    // Lexicographic multiset permutations.
    loop {
        out.push(current.clone());
        // next_permutation
        let len = current.len();
        if len < 2 {
            break;
        }
        let mut i = len - 1;
        while i > 0 && current[i - 1] >= current[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = len - 1;
        while current[j] <= current[i - 1] {
            j -= 1;
        }
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

fn block_len(id: &BlockId) -> usize {
    id.iter().map(|m| *m as usize).sum()
}

impl TruncatedVermaModule {
    /// Build the truncation of the Verma module with highest weight
    /// `lambda` and level `level`, populating the blocks selected by
    /// `policy`. Fails if any populated block's pivot Gram matrix is worse
    /// conditioned than `cond_bound` (non-generic parameters).
    pub fn build(
        params: &Params,
        lambda: &[C64],
        level: C64,
        policy: &BuildPolicy,
        cond_bound: f64,
    ) -> Result<Self> {
        let n = params.n;
        let rs = RootSystem::new(n);
        let delta = delta_k(&rs, lambda, level)?;
        let mut ids: Vec<BlockId> = match policy {
            BuildPolicy::ByLength(depth) => {
                let mut ids = Vec::new();
                // Enumerate m ∈ N^n with |m| ≤ depth.
                fn rec(n: usize, depth: usize, pos: usize, cur: &mut BlockId, out: &mut Vec<BlockId>) {
                    if pos == n {
                        out.push(cur.clone());
                        return;
                    }
                    let used: usize = cur.iter().map(|m| *m as usize).sum();
                    for m in 0..=(depth - used) {
                        cur.push(m as u16);
                        rec(n, depth, pos + 1, cur, out);
                        cur.pop();
                    }
                }
                rec(n, *depth, 0, &mut Vec::new(), &mut ids);
                ids
            }
            BuildPolicy::Blocks(list) => {
                // Closure under componentwise decrease.
                let mut seen = std::collections::BTreeSet::new();
                let mut stack: Vec<BlockId> = list.clone();
                while let Some(id) = stack.pop() {
                    if !seen.insert(id.clone()) {
                        continue;
                    }
                    for i in 0..n {
                        if id[i] > 0 {
                            let mut smaller = id.clone();
                            smaller[i] -= 1;
                            stack.push(smaller);
                        }
                    }
                }
                seen.into_iter().collect()
            }
        };
        ids.sort_by_key(|id| (block_len(id), id.clone()));

        let mut module = TruncatedVermaModule {
            n,
            q: params.q,
            logq: params.logq,
            lambda: lambda.to_vec(),
            level,
            delta,
            blocks: BTreeMap::new(),
            e_mats: BTreeMap::new(),
            f_mats: BTreeMap::new(),
            rs,
        };

        for id in &ids {
            module.build_block(id, cond_bound)?;
        }
        for id in &ids {
            module.build_generator_mats(id);
        }
        Ok(module)
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    fn qpow(&self, a: C64) -> C64 {
        (a * self.logq).exp()
    }

    fn qnum(&self, a: C64) -> C64 {
        (self.qpow(a) - self.qpow(-a)) / (self.q - 1.0 / self.q)
    }

    /// Finite weight coordinates of a block.
    fn block_coords(&self, id: &BlockId) -> Vec<C64> {
        let mut coords = self.lambda.clone();
        for (i, m) in id.iter().enumerate() {
            if *m == 0 {
                continue;
            }
            let alpha = self.rs.affine_simple_finite_part(i);
            for (c, a) in coords.iter_mut().zip(&alpha) {
                *c -= C64::new(*m as f64, 0.0) * a;
            }
        }
        coords
    }

    /// h_i-eigenvalue exponent on a vector of finite weight `coords` at this
    /// module's level (i = 0 uses level − ⟨coords, θ^⟩).
    fn h_eigen(&self, i: usize, coords: &[C64]) -> C64 {
        self.rs.h_eigen(i, coords, self.level)
    }

    /// One-step raising action on a word: E_i eats one letter i, with the
    /// q-number coefficient of the suffix weight at that position.
    fn e_word(&self, i: usize, word: &[u8]) -> Vec<(Word, C64)> {
        let mut acc: BTreeMap<Word, C64> = BTreeMap::new();
        // Suffix weights scanned from the right.
        let len = word.len();
        let mut suffix = self.lambda.clone();
        let mut suffix_at = vec![self.lambda.clone(); len + 1];
        for t in (0..len).rev() {
            suffix_at[t + 1] = suffix.clone();
            let alpha = self.rs.affine_simple_finite_part(word[t] as usize);
            for (c, a) in suffix.iter_mut().zip(&alpha) {
                *c -= a;
            }
            // suffix now holds weight of F_{word[t]} · (suffix vector)
        }
        suffix_at[0] = suffix;
        for t in 0..len {
            if word[t] as usize != i {
                continue;
            }
            let coeff = self.qnum(self.h_eigen(i, &suffix_at[t + 1]));
            let mut reduced = Vec::with_capacity(len - 1);
            reduced.extend_from_slice(&word[..t]);
            reduced.extend_from_slice(&word[t + 1..]);
            *acc.entry(reduced).or_insert(C64::new(0.0, 0.0)) += coeff;
        }
        acc.into_iter().collect()
    }

    fn build_block(&mut self, id: &BlockId, cond_bound: f64) -> Result<()> {
        let words = multiset_words(id);
        let nw = words.len();
        let mut gram = CMat::zeros(nw, nw);
        if block_len(id) == 0 {
            gram[(0, 0)] = C64::new(1.0, 0.0);
        } else {
            // ⟨F_j a', b⟩ = ⟨a', E_j b⟩ with the smaller block's Gram.
            // Cache the one-step E-expansions per (j, b).
            let mut e_cache: BTreeMap<(usize, usize), Vec<(usize, C64)>> = BTreeMap::new();
            let mut sub_index: BTreeMap<usize, BTreeMap<Word, usize>> = BTreeMap::new();
            for (bi, b) in words.iter().enumerate() {
                for j in 0..self.n {
                    if id[j] == 0 {
                        continue;
                    }
                    let mut sub = id.clone();
                    sub[j] -= 1;
                    let subwords = &self.blocks[&sub].words;
                    let si = sub_index.entry(j).or_insert_with(|| {
                        subwords.iter().cloned().zip(0..).collect()
                    });
                    let exp = self
                        .e_word(j, b)
                        .into_iter()
                        .map(|(w, c)| (si[&w], c))
                        .collect();
                    e_cache.insert((j, bi), exp);
                }
            }
            for (ai, a) in words.iter().enumerate() {
                let j = a[0] as usize;
                let mut sub = id.clone();
                sub[j] -= 1;
                let sub_block = &self.blocks[&sub];
                let sub_words_index: &BTreeMap<Word, usize> = &sub_index[&j];
                let a_rest: Word = a[1..].to_vec();
                let a_rest_idx = sub_words_index[&a_rest];
                for bi in 0..nw {
                    let mut acc = C64::new(0.0, 0.0);
                    for (ci, coef) in &e_cache[&(j, bi)] {
                        acc += *coef * sub_block.gram[(a_rest_idx, *ci)];
                    }
                    gram[(ai, bi)] = acc;
                }
            }
        }

        // Rank-revealing pivot selection by modified Gram–Schmidt on columns.
        let scale = gram.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut work = gram.clone();
        let mut pivots: Vec<usize> = Vec::new();
        let mut available: Vec<usize> = (0..nw).collect();
        loop {
            let (best_pos, best_norm) = available
                .iter()
                .enumerate()
                .map(|(pos, &c)| (pos, work.column(c).norm()))
                .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best_pos == usize::MAX || best_norm < 1e-9 * scale {
                break;
            }
            let c = available.remove(best_pos);
            pivots.push(c);
            let picked = work.column(c).into_owned();
            let pn2 = picked.norm_squared();
            for &other in &available {
                let proj = picked.dotc(&work.column(other).into_owned()) / C64::new(pn2, 0.0);
                let corrected = work.column(other).into_owned() - &picked * proj;
                work.set_column(other, &corrected);
            }
        }
        pivots.sort_unstable();
        let r = pivots.len();
        if r == 0 && nw > 0 && block_len(id) == 0 {
            return Err(Error::DegenerateBlock {
                block: format!("{id:?}"),
                cond: f64::INFINITY,
            });
        }

        // Equilibrate: scale each pivot so its Gram column has unit norm.
        let pivot_scale: Vec<f64> = pivots
            .iter()
            .map(|&p| {
                let nrm = gram.column(p).norm();
                if nrm > 1e-300 {
                    1.0 / nrm.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let gram_pp = CMat::from_fn(r, r, |i, j| {
            gram[(pivots[i], pivots[j])] * pivot_scale[i] * pivot_scale[j]
        });
        let cond = if r > 0 { cond_svd(&gram_pp) } else { 1.0 };
        if !cond.is_finite() || cond > cond_bound {
            return Err(Error::DegenerateBlock {
                block: format!("{id:?}"),
                cond,
            });
        }
        // Scaled-pivot coordinates of every word: G'_pp X = diag(s) G[pivots, :].
        let rhs = CMat::from_fn(r, nw, |i, j| gram[(pivots[i], j)] * pivot_scale[i]);
        let expand = if r > 0 {
            gram_pp
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::DegenerateBlock {
                    block: format!("{id:?}"),
                    cond,
                })?
        } else {
            CMat::zeros(0, nw)
        };

        let block = VermaBlock {
            id: id.clone(),
            words,
            gram,
            pivots,
            pivot_scale,
            expand,
            gram_pp,
            cond,
            coords: self.block_coords(id),
            degree_drop: id[0] as i64,
        };
        self.blocks.insert(id.clone(), block);
        Ok(())
    }

    fn build_generator_mats(&mut self, id: &BlockId) {
        let block = self.blocks[id].clone();
        let r = block.dim();
        for i in 0..self.n {
            // F_i: block -> block + e_i (needs the target stored).
            let mut up = id.clone();
            up[i] += 1;
            if let Some(target) = self.blocks.get(&up) {
                let t_index: BTreeMap<Word, usize> =
                    target.words.iter().cloned().zip(0..).collect();
                let mut mat = CMat::zeros(target.dim(), r);
                for (pi, &p) in block.pivots.iter().enumerate() {
                    let mut w = Vec::with_capacity(block.words[p].len() + 1);
                    w.push(i as u8);
                    w.extend_from_slice(&block.words[p]);
                    let col = target
                        .expand
                        .column(t_index[&w])
                        .into_owned()
                        .scale(block.pivot_scale[pi]);
                    mat.set_column(pi, &col);
                }
                self.f_mats.insert((i, id.clone()), mat);
            }
            // E_i: block -> block - e_i.
            if id[i] > 0 {
                let mut down = id.clone();
                down[i] -= 1;
                let target = &self.blocks[&down];
                let t_index: BTreeMap<Word, usize> =
                    target.words.iter().cloned().zip(0..).collect();
                let mut mat = CMat::zeros(target.dim(), r);
                for (pi, &p) in block.pivots.iter().enumerate() {
                    let mut col = CVec::zeros(target.dim());
                    for (w, coef) in self.e_word(i, &block.words[p]) {
                        col += target.expand.column(t_index[&w]).into_owned() * coef;
                    }
                    mat.set_column(pi, &col.scale(block.pivot_scale[pi]));
                }
                self.e_mats.insert((i, id.clone()), mat);
            }
        }
    }

    /// Apply E_i to a vector.
    pub fn apply_e(&self, i: usize, v: &VermaVector) -> VermaVector {
        let mut out = VermaVector::zero();
        for (id, comp) in &v.comps {
            if id[i] == 0 {
                continue;
            }
            if let Some(mat) = self.e_mats.get(&(i, id.clone())) {
                let mut down = id.clone();
                down[i] -= 1;
                let image = mat * comp;
                match out.comps.get_mut(&down) {
                    Some(acc) => *acc += image,
                    None => {
                        out.comps.insert(down, image);
                    }
                }
            }
        }
        out
    }

    /// Apply F_i to a vector; components whose target block is not stored
    /// are an error (truncation too small).
    pub fn apply_f(&self, i: usize, v: &VermaVector) -> Result<VermaVector> {
        let mut out = VermaVector::zero();
        for (id, comp) in &v.comps {
            if comp.norm() == 0.0 {
                continue;
            }
            let mut up = id.clone();
            up[i] += 1;
            let mat = self.f_mats.get(&(i, id.clone())).ok_or_else(|| {
                Error::DepthTooSmall(format!("F_{i} image of block {id:?} not stored"))
            })?;
            let image = mat * comp;
            match out.comps.get_mut(&up) {
                Some(acc) => *acc += image,
                None => {
                    out.comps.insert(up, image);
                }
            }
        }
        Ok(out)
    }

    /// K_i eigenvalue on a block.
    pub fn k_eigen(&self, i: usize, id: &BlockId) -> C64 {
        let coords = &self.blocks[id].coords;
        self.qpow(self.h_eigen(i, coords))
    }

    /// d eigenvalue on a block: −Δ − (affine-letter count).
    pub fn d_eigen(&self, id: &BlockId) -> C64 {
        -self.delta - C64::new(id[0] as f64, 0.0)
    }

    /// The functional dual to the highest weight vector: the coefficient of
    /// x_λ in the top block (weight orthogonality kills everything else).
    pub fn dual_pairing(&self, v: &VermaVector) -> C64 {
        let top = vec![0u16; self.n];
        v.comps
            .get(&top)
            .map(|c| c[0])
            .unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Contravariance residual ⟨E_i x, y⟩ − ⟨x, F_i y⟩ maximized over stored
    /// pivot bases; a structural self-check of the construction.
    pub fn contravariance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (id, block) in &self.blocks {
            for i in 0..self.n {
                let (e_mat, down) = match self.e_mats.get(&(i, id.clone())) {
                    Some(m) => {
                        let mut d = id.clone();
                        d[i] -= 1;
                        (m, d)
                    }
                    None => continue,
                };
                let down_block = &self.blocks[&down];
                if self.f_mats.get(&(i, down.clone())).is_none() {
                    continue;
                }
                let f_mat = &self.f_mats[&(i, down.clone())];
                // ⟨E_i p_a, p_b⟩ = (G_down · E)_{b a}; ⟨p_a, F_i p_b⟩ = (G_id · F)_{a b}.
                let lhs = &down_block.gram_pp * e_mat; // (dim_down × dim_id)
                let rhs = &block.gram_pp * f_mat; // (dim_id × dim_down)
                let scale = lhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
                worst = worst.max(crate::cnum::mat_diff(&lhs, &rhs.transpose()) / scale);
            }
        }
        worst
    }

    /// Max pivot-Gram condition number over stored blocks.
    pub fn max_cond(&self) -> f64 {
        self.blocks.values().map(|b| b.cond).fold(1.0, f64::max)
    }
}

/// Flattened view of a truncated Verma module as a tensor factor.
pub struct VermaFactor<'a> {
    pub module: &'a TruncatedVermaModule,
    pub basis: Vec<(BlockId, usize)>,
    pub offsets: BTreeMap<BlockId, usize>,
}

impl<'a> VermaFactor<'a> {
    pub fn new(module: &'a TruncatedVermaModule) -> Self {
        let mut basis = Vec::new();
        let mut offsets = BTreeMap::new();
        for (id, block) in &module.blocks {
            offsets.insert(id.clone(), basis.len());
            for j in 0..block.dim() {
                basis.push((id.clone(), j));
            }
        }
        VermaFactor {
            module,
            basis,
            offsets,
        }
    }

    pub fn index_of(&self, id: &BlockId, j: usize) -> usize {
        self.offsets[id] + j
    }
}

impl<'a> TensorFactor for VermaFactor<'a> {
    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn n(&self) -> usize {
        self.module.n
    }

    fn weight_coords(&self, b: usize) -> Vec<C64> {
        self.module.blocks[&self.basis[b].0].coords.clone()
    }

    fn level(&self) -> C64 {
        self.module.level
    }

    fn degree(&self, b: usize) -> i64 {
        -(self.basis[b].0[0] as i64)
    }

    fn has_formal_variable(&self) -> bool {
        false
    }

    fn act(&self, g: Gen, b: usize) -> Vec<(usize, C64)> {
        let (id, j) = &self.basis[b];
        match g {
            Gen::E(i) => {
                if id[i] == 0 {
                    return Vec::new();
                }
                let mat = match self.module.e_mats.get(&(i, id.clone())) {
                    Some(m) => m,
                    None => return Vec::new(),
                };
                let mut down = id.clone();
                down[i] -= 1;
                let base = self.offsets[&down];
                (0..mat.nrows())
                    .filter(|r| mat[(*r, *j)].norm() > 0.0)
                    .map(|r| (base + r, mat[(r, *j)]))
                    .collect()
            }
            Gen::F(i) => {
                let mat = match self.module.f_mats.get(&(i, id.clone())) {
                    Some(m) => m,
                    // Truncation boundary: the image falls outside the
                    // stored window and is dropped.
                    None => return Vec::new(),
                };
                let mut up = id.clone();
                up[i] += 1;
                let base = self.offsets[&up];
                (0..mat.nrows())
                    .filter(|r| mat[(*r, *j)].norm() > 0.0)
                    .map(|r| (base + r, mat[(r, *j)]))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnum::c;

    /// Independent affine Kostant partition enumerator: the number of ways
    /// to write the exponent vector as a multiset of positive-root exponent
    /// vectors (imaginary roots with multiplicity n-1).
    fn kostant_count(n: usize, target: &BlockId, max_len: usize) -> u64 {
        // Positive roots as exponent vectors over (α_0, …, α_{n-1}):
        // real: finite root shifted by jδ; imaginary: jδ with multiplicity n-1.
        let rs = RootSystem::new(n);
        let r = n - 1;
        // Finite positive roots of sl_n as α-exponent vectors: α_i + … + α_j.
        let mut finite: Vec<Vec<i64>> = Vec::new();
        for i in 0..r {
            for j in i..r {
                let mut v = vec![0i64; r];
                for t in i..=j {
                    v[t] = 1;
                }
                finite.push(v);
            }
        }
        let _ = rs;
        let mut roots: Vec<Vec<i64>> = Vec::new();
        let bound = max_len as i64;
        for j in 0..=bound {
            for f in &finite {
                // f + jδ and -f + (j+1)δ, δ = (1, …, 1) over all n nodes.
                let mut plus = vec![j; n];
                let mut minus = vec![j + 1; n];
                for t in 0..r {
                    plus[t + 1] += f[t];
                    minus[t + 1] -= f[t];
                }
                if plus.iter().all(|x| *x >= 0) && plus.iter().sum::<i64>() <= bound && plus.iter().any(|x| *x > 0) {
                    roots.push(plus);
                }
                if minus.iter().all(|x| *x >= 0) && minus.iter().sum::<i64>() <= bound {
                    roots.push(minus);
                }
            }
        }
        // Imaginary roots jδ, multiplicity n-1.
        for j in 1..=bound {
            if (j as usize) * n <= max_len {
                for _ in 0..r {
                    roots.push(vec![j; n]);
                }
            }
        }
        roots.sort();
        // Duplicates are kept deliberately: imaginary roots enter with
        // multiplicity n-1.
        // Bounded multiset counting by DP over the root list.
        fn count(roots: &[Vec<i64>], target: &mut Vec<i64>, idx: usize) -> u64 {
            if target.iter().all(|x| *x == 0) {
                return 1;
            }
            if idx == roots.len() {
                return 0;
            }
            let mut total = count(roots, target, idx + 1);
            // Use root idx at least once.
            if (0..target.len()).all(|t| target[t] >= roots[idx][t]) {
                for t in 0..target.len() {
                    target[t] -= roots[idx][t];
                }
                total += count(roots, target, idx);
                for t in 0..target.len() {
                    target[t] += roots[idx][t];
                }
            }
            total
        }
        let mut tv: Vec<i64> = target.iter().map(|x| *x as i64).collect();
        count(&roots, &mut tv, 0)
    }

    fn generic_params(seed: u64) -> Params {
        Params::sample_generic(2, 3, seed).unwrap()
    }

    #[test]
    fn depth_zero_is_the_highest_weight_line() {
        let p = generic_params(1);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(0), 1e8)
                .unwrap();
        assert_eq!(m.blocks.len(), 1);
        let top = &m.blocks[&vec![0u16, 0]];
        assert_eq!(top.dim(), 1);
        assert!((top.gram[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m.d_eigen(&vec![0, 0]) + m.delta).norm() < 1e-15);
    }

    #[test]
    fn one_step_gram_matches_hand_commutation() {
        // ⟨F_1 x, F_1 x⟩ = (q^m − q^{−m})/(q − q^{−1}) for λ = mω.
        let mut p = generic_params(2);
        p.lambda = vec![c(3.0, 0.0)];
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(1), 1e8)
                .unwrap();
        let b = &m.blocks[&vec![0u16, 1]];
        let expected = (p.qpow(c(3.0, 0.0)) - p.qpow(c(-3.0, 0.0))) / (p.q - 1.0 / p.q);
        assert!((b.gram[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn block_dimensions_match_partition_counts() {
        // Generic λ, depth 4: pivot counts equal affine Kostant numbers.
        let p = generic_params(3);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(4), 1e8)
                .unwrap();
        for (id, block) in &m.blocks {
            let expected = kostant_count(2, id, 4);
            assert_eq!(
                block.dim() as u64,
                expected,
                "block {id:?}: got {}, partitions {}",
                block.dim(),
                expected
            );
        }
    }

    #[test]
    fn contravariance_holds_on_stored_blocks() {
        let p = generic_params(4);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(4), 1e8)
                .unwrap();
        assert!(m.contravariance_residual() < 1e-10);
    }

    #[test]
    fn weight_additivity_of_f_action() {
        let p = generic_params(5);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(2), 1e8)
                .unwrap();
        let v = VermaVector::highest(2);
        let fv = m.apply_f(0, &v).unwrap();
        let id: Vec<u16> = vec![1, 0];
        assert!(fv.comps.contains_key(&id));
        // degree label dropped by the affine letter
        assert!((m.d_eigen(&id) - (m.d_eigen(&vec![0, 0]) - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn dual_pairing_picks_the_top_coefficient() {
        let p = generic_params(6);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(2), 1e8)
                .unwrap();
        let mut v = VermaVector::highest(2);
        assert!((m.dual_pairing(&v) - c(1.0, 0.0)).norm() < 1e-15);
        let lower = m.apply_f(1, &v).unwrap();
        assert!(m.dual_pairing(&lower).norm() < 1e-15);
        v.add_scaled(&VermaVector::highest(2), c(2.0, 0.0));
        v.add_scaled(&lower, c(5.0, -1.0));
        assert!((m.dual_pairing(&v) - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ef_commutator_on_highest_vector() {
        // [E_1, F_1] x_λ = [λ(h_1)]_q x_λ.
        let p = generic_params(7);
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(1), 1e8)
                .unwrap();
        let x = VermaVector::highest(2);
        let ef = m.apply_e(1, &m.apply_f(1, &x).unwrap());
        let expected = (p.qpow(p.lambda[0]) - p.qpow(-p.lambda[0])) / (p.q - 1.0 / p.q);
        assert!((m.dual_pairing(&ef) - expected).norm() < 1e-11);
    }

    #[test]
    fn n3_blocks_build_and_match_partitions() {
        let p = Params::sample_generic(3, 2, 9).unwrap();
        let m =
            TruncatedVermaModule::build(&p, &p.lambda.clone(), p.k, &BuildPolicy::ByLength(3), 1e8)
                .unwrap();
        for (id, block) in &m.blocks {
            let expected = kostant_count(3, id, 3);
            assert_eq!(block.dim() as u64, expected, "block {id:?}");
        }
        assert!(m.contravariance_residual() < 1e-10);
    }

    #[test]
    fn block_from_drop_round_trip() {
        let rs = RootSystem::new(2);
        // Block (3, 2): drop = 2α_1 − 3θ.
        let alpha = rs.simple_root(1);
        let theta = rs.highest_root();
        let drop: Vec<C64> = (0..1)
            .map(|j| 2.0 * alpha[j] - 3.0 * theta[j])
            .collect();
        assert_eq!(block_from_drop(&rs, &drop, 3), Some(vec![3u16, 2]));
        // A non-integral drop has no block.
        let half = vec![c(1.0, 0.0)]; // ω = α/2
        assert_eq!(block_from_drop(&rs, &half, 0), None);
        // Negative exponents are rejected.
        let neg: Vec<C64> = alpha.iter().map(|z| -z).collect();
        assert_eq!(block_from_drop(&rs, &neg, 0), None);
    }
}
