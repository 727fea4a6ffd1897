//! Sparse symmetric storage and a fill-reducing `L D L^T` direct solver.
//!
//! The factorization uses transposes, never conjugates, so it serves both the
//! real SPD static systems and the complex-symmetric `K + i w M` systems of
//! the time-harmonic problem (positive definite real part, no pivoting).

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Debug;
use std::sync::Arc;
use std::ops::Neg;

use num_complex::Complex64;
use num_traits::NumAssign;

use crate::error::{Error, Result};

pub trait Scalar: Copy + Debug + NumAssign + Neg<Output = Self> + Send + Sync + 'static {
    fn from_real(x: f64) -> Self;
    fn abs_sq(self) -> f64;
    fn real(self) -> f64;
}

impl Scalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn real(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn real(self) -> f64 {
        self.re
    }
}

pub fn norm2<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs_sq()).sum::<f64>().sqrt()
}

/// Compressed sparse row matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Square matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Matrix on an existing pattern; `values` follows `other`'s storage order.
    pub fn with_values<U: Scalar>(&self, values: Vec<U>) -> CsrMatrix<U> {
        assert_eq!(values.len(), self.values.len());
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    /// Storage slot of entry `(i, j)`, if present in the pattern.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn same_pattern<U>(&self, other: &CsrMatrix<U>) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.col_idx == other.col_idx
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::zero();
                for (j, v) in self.row(i) {
                    s += v * x[j];
                }
                s
            })
            .collect()
    }

    /// `x^T A y` (no conjugation).
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let ay = self.mul_vec(y);
        let mut s = T::zero();
        for (a, b) in x.iter().zip(&ay) {
            s += *a * *b;
        }
        s
    }

    /// `self + s * other`, both with identical dimensions.
    pub fn add_scaled<U: Scalar>(&self, s: U, other: &CsrMatrix<f64>) -> CsrMatrix<U>
    where
        T: Into<U>,
    {
        if self.same_pattern(other) {
            let values = self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a.into() + s * U::from_real(b))
                .collect();
            return self.with_values(values);
        }
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            trip.extend(self.row(i).map(|(j, v)| (i, j, v.into())));
            trip.extend(other.row(i).map(|(j, v)| (i, j, s * U::from_real(v))));
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adjacency lists of the off-diagonal pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }
}

/// Greedy minimum-degree ordering on the explicit elimination graph. Exact
/// degrees make it quadratic in the worst case, so it is meant for small
/// graphs; ties go to the lowest index.
pub fn minimum_degree(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut graph: Vec<Vec<usize>> = adj
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.sort_unstable();
            a.dedup();
            a
        })
        .collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((graph[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != graph[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut graph[v]);
        for &u in &nbrs {
            // N(u) <- N(u) + N(v) - {u, v}, kept sorted
            merged.clear();
            let (a, b) = (&graph[u], &nbrs);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let x = if j == b.len() || (i < a.len() && a[i] <= b[j]) {
                    let x = a[i];
                    if j < b.len() && b[j] == x {
                        j += 1;
                    }
                    i += 1;
                    x
                } else {
                    let x = b[j];
                    j += 1;
                    x
                };
                if x != u && x != v {
                    merged.push(x);
                }
            }
            std::mem::swap(&mut graph[u], &mut merged);
            heap.push(Reverse((graph[u].len(), u)));
        }
    }
    order
}

/// Minimum degree for small graphs, nested dissection otherwise.
pub fn fill_reducing_ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    if adj.len() <= MINIMUM_DEGREE_LIMIT {
        minimum_degree(adj)
    } else {
        nested_dissection(adj)
    }
}

const MINIMUM_DEGREE_LIMIT: usize = 12_000;

/// Fill-reducing ordering by recursive level-structure dissection: a
/// breadth-first level set from a pseudo-peripheral vertex splits each
/// component, separators are numbered last.
pub fn nested_dissection(adj: &[Vec<usize>]) -> Vec<usize> {
    const LEAF: usize = 64;
    enum Task {
        Split(Vec<usize>),
        Emit(Vec<usize>),
    }
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    // part id of every vertex; a vertex is visible to a search only inside its own part
    let mut part = vec![0usize; n];
    let mut next_part = 1usize;
    let mut level = vec![usize::MAX; n];

    let mut stack = vec![Task::Split((0..n).collect())];
    while let Some(task) = stack.pop() {
        let verts = match task {
            Task::Emit(v) => {
                order.extend(v);
                continue;
            }
            Task::Split(v) => v,
        };
        let id = next_part;
        next_part += 1;
        for &v in &verts {
            part[v] = id;
        }
        let comps = components(adj, &mut part, id, &verts, &mut next_part);
        if comps.len() > 1 {
            for c in comps.into_iter().rev() {
                stack.push(Task::Split(c));
            }
            continue;
        }
        let id = part[verts[0]];
        if verts.len() <= LEAF {
            let (bfs, _) = bfs_levels(adj, &part, id, verts[0], &mut level);
            reset(&mut level, &bfs);
            order.extend(bfs);
            continue;
        }
        let start = pseudo_peripheral(adj, &part, id, verts[0], &mut level);
        let (bfs, n_levels) = bfs_levels(adj, &part, id, start, &mut level);
        if n_levels < 3 {
            reset(&mut level, &bfs);
            order.extend(bfs);
            continue;
        }
        let mid = n_levels / 2;
        let (sep, rest): (Vec<usize>, Vec<usize>) = bfs.iter().partition(|&&v| level[v] == mid);
        reset(&mut level, &bfs);
        for &v in &sep {
            part[v] = 0;
        }
        stack.push(Task::Emit(sep));
        stack.push(Task::Split(rest));
    }
    debug_assert_eq!(order.len(), n);
    order
}

/// Splits the vertices of part `id` into connected components, each with a
/// fresh part id.
fn components(
    adj: &[Vec<usize>],
    part: &mut [usize],
    id: usize,
    verts: &[usize],
    next_part: &mut usize,
) -> Vec<Vec<usize>> {
    let mut comps = Vec::new();
    for &s in verts {
        if part[s] != id {
            continue;
        }
        let cid = *next_part;
        *next_part += 1;
        part[s] = cid;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            let v = comp[k];
            k += 1;
            for &w in &adj[v] {
                if part[w] == id {
                    part[w] = cid;
                    comp.push(w);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Breadth-first search inside part `id`; fills `level` for the visited
/// vertices, which the caller must `reset` afterwards.
fn bfs_levels(
    adj: &[Vec<usize>],
    part: &[usize],
    id: usize,
    start: usize,
    level: &mut [usize],
) -> (Vec<usize>, usize) {
    let mut out = vec![start];
    level[start] = 0;
    let mut k = 0;
    while k < out.len() {
        let v = out[k];
        k += 1;
        for &w in &adj[v] {
            if part[w] == id && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                out.push(w);
            }
        }
    }
    let depth = level[*out.last().unwrap()] + 1;
    (out, depth)
}

fn reset(level: &mut [usize], verts: &[usize]) {
    for &v in verts {
        level[v] = usize::MAX;
    }
}

fn pseudo_peripheral(
    adj: &[Vec<usize>],
    part: &[usize],
    id: usize,
    mut start: usize,
    level: &mut [usize],
) -> usize {
    let (mut bfs, mut depth) = bfs_levels(adj, part, id, start, level);
    for _ in 0..8 {
        // farthest vertex of minimum degree
        let far = bfs
            .iter()
            .copied()
            .filter(|&v| level[v] + 1 == depth)
            .min_by_key(|&v| adj[v].iter().filter(|&&w| part[w] == id).count())
            .unwrap();
        reset(level, &bfs);
        let (b2, d2) = bfs_levels(adj, part, id, far, level);
        if d2 <= depth {
            reset(level, &b2);
            return start;
        }
        start = far;
        bfs = b2;
        depth = d2;
    }
    reset(level, &bfs);
    start
}

/// Ordering, elimination tree and nonzero structure of `P A P^T = L D L^T`
/// for one sparsity pattern. Reusable for every matrix with that pattern.
#[derive(Debug, Clone)]
pub struct SymbolicLdl {
    n: usize,
    a_nnz: usize,
    perm: Vec<usize>,
    /// Permuted upper triangle, column-wise: row index and source slot in
    /// the CSR value array.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    src: Vec<usize>,
    /// Row patterns of `L` (strictly lower part), in elimination order.
    row_ptr_l: Vec<usize>,
    row_cols: Vec<usize>,
    /// Column structure of `L`.
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
}

impl SymbolicLdl {
    pub fn new<T: Scalar>(a: &CsrMatrix<T>) -> Self {
        let perm = fill_reducing_ordering(&a.adjacency());
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering<T: Scalar>(a: &CsrMatrix<T>, perm: Vec<usize>) -> Self {
        let n = a.dim();
        assert_eq!(perm.len(), n);
        let mut inv = vec![0; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            let r = perm[k];
            col_ptr[k + 1] = col_ptr[k]
                + a.col_idx[a.row_ptr[r]..a.row_ptr[r + 1]]
                    .iter()
                    .filter(|&&j| inv[j] <= k)
                    .count();
        }
        let mut row_idx = vec![0usize; col_ptr[n]];
        let mut src = vec![0usize; col_ptr[n]];
        for k in 0..n {
            let r = perm[k];
            let mut p = col_ptr[k];
            for q in a.row_ptr[r]..a.row_ptr[r + 1] {
                let j = a.col_idx[q];
                if inv[j] <= k {
                    row_idx[p] = inv[j];
                    src[p] = q;
                    p += 1;
                }
            }
        }

        // elimination tree and the row patterns of L
        let none = usize::MAX;
        let mut parent = vec![none; n];
        let mut flag = vec![none; n];
        let mut lnz = vec![0usize; n];
        let mut row_ptr_l = vec![0usize; n + 1];
        let mut row_cols = Vec::new();
        let mut stack = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            let mut top = n;
            for &i0 in &row_idx[col_ptr[k]..col_ptr[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                let mut len = 0;
                while flag[i] != k {
                    if parent[i] == none {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    stack[len] = i;
                    len += 1;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    stack[top] = stack[len];
                }
            }
            row_cols.extend_from_slice(&stack[top..n]);
            row_ptr_l[k + 1] = row_cols.len();
        }
        let mut l_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_ptr[k + 1] = l_ptr[k] + lnz[k];
        }
        let mut fill = l_ptr[..n].to_vec();
        let mut l_idx = vec![0usize; l_ptr[n]];
        for k in 0..n {
            for &i in &row_cols[row_ptr_l[k]..row_ptr_l[k + 1]] {
                l_idx[fill[i]] = k;
                fill[i] += 1;
            }
        }
        Self {
            n,
            a_nnz: a.nnz(),
            perm,
            col_ptr,
            row_idx,
            src,
            row_ptr_l,
            row_cols,
            l_ptr,
            l_idx,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len()
    }

    /// Multiply-add count of one numeric factorization.
    pub fn flops(&self) -> usize {
        (0..self.n)
            .map(|j| {
                let c = self.l_ptr[j + 1] - self.l_ptr[j];
                c * (c + 1) / 2
            })
            .sum()
    }
}

/// Numeric factors `L` (unit lower) and `D` on a shared symbolic structure.
#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    symbolic: Arc<SymbolicLdl>,
    l_val: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> LdlFactor<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        Self::numeric(Arc::new(SymbolicLdl::new(a)), a)
    }

    pub fn with_ordering(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        Self::numeric(Arc::new(SymbolicLdl::with_ordering(a, perm)), a)
    }

    /// Up-looking factorization; `a` must have the pattern `sym` was built on.
    pub fn numeric(sym: Arc<SymbolicLdl>, a: &CsrMatrix<T>) -> Result<Self> {
        let n = sym.n;
        if a.dim() != n || a.nnz() != sym.a_nnz {
            return Err(Error::InvalidArgument("matrix does not match the symbolic pattern".into()));
        }
        let mut l_val = vec![T::zero(); sym.l_idx.len()];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut dinv = vec![T::zero(); n];
        let mut fill: Vec<usize> = sym.l_ptr[..n].to_vec();
        for k in 0..n {
            for p in sym.col_ptr[k]..sym.col_ptr[k + 1] {
                y[sym.row_idx[p]] += a.values[sym.src[p]];
            }
            let mut dk = y[k];
            y[k] = T::zero();
            for &i in &sym.row_cols[sym.row_ptr_l[k]..sym.row_ptr_l[k + 1]] {
                let yi = y[i];
                y[i] = T::zero();
                let end = fill[i];
                let start = sym.l_ptr[i];
                for (&r, &l) in sym.l_idx[start..end].iter().zip(&l_val[start..end]) {
                    // SAFETY: every row index in L is below n = y.len()
                    unsafe { *y.get_unchecked_mut(r) -= l * yi };
                }
                let lki = yi * dinv[i];
                dk -= lki * yi;
                l_val[end] = lki;
                fill[i] += 1;
            }
            if dk.abs_sq() == 0.0 || !dk.abs_sq().is_finite() {
                return Err(Error::Singular(format!("zero pivot at step {k} of {n}")));
            }
            d[k] = dk;
            dinv[k] = T::one() / dk;
        }
        Ok(Self {
            symbolic: sym,
            l_val,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn factor_nnz(&self) -> usize {
        self.l_val.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let sym = &*self.symbolic;
        let n = self.dim();
        let mut x: Vec<T> = sym.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            for p in sym.l_ptr[j]..sym.l_ptr[j + 1] {
                x[sym.l_idx[p]] -= self.l_val[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in sym.l_ptr[j]..sym.l_ptr[j + 1] {
                s -= self.l_val[p] * x[sym.l_idx[p]];
            }
            x[j] = s;
        }
        let mut out = vec![T::zero(); n];
        for (k, &p) in sym.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

/// Outcome of a direct solve with residual-driven refinement.
#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub x: Vec<T>,
    /// `||b - A x||_2 / ||b||_2`.
    pub relative_residual: f64,
    /// `||b - A x||_inf / (||A||_inf ||x||_inf + ||b||_inf)`.
    pub backward_error: f64,
    pub refinement_steps: usize,
}

fn norm_inf<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs_sq()).fold(0.0, f64::max).sqrt()
}

impl<T: Scalar> CsrMatrix<T> {
    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs_sq().sqrt()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Solves `A x = b`, refining until `||b - A x|| <= tol * ||b||`.
///
/// When refinement stalls at the rounding floor of the residual itself, the
/// solve is still accepted if the normwise backward error is within `tol`;
/// otherwise `NotConverged` carries the achieved relative residual.
pub fn solve_refined<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    tol: f64,
    max_steps: usize,
) -> Result<SolveReport<T>> {
    solve_refined_with(Arc::new(SymbolicLdl::new(a)), a, b, tol, max_steps)
}

/// `solve_refined` on a precomputed symbolic structure.
pub fn solve_refined_with<T: Scalar>(
    symbolic: Arc<SymbolicLdl>,
    a: &CsrMatrix<T>,
    b: &[T],
    tol: f64,
    max_steps: usize,
) -> Result<SolveReport<T>> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            x: vec![T::zero(); b.len()],
            relative_residual: 0.0,
            backward_error: 0.0,
            refinement_steps: 0,
        });
    }
    let factor = LdlFactor::numeric(symbolic, a)?;
    let a_inf = a.norm_inf();
    let b_inf = norm_inf(b);
    let mut x = factor.solve(b);
    let mut steps = 0;
    let mut best: Option<SolveReport<T>> = None;
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let rel = norm2(&r) / bnorm;
        if !rel.is_finite() {
            return Err(Error::NotConverged {
                achieved: rel,
                target: tol,
            });
        }
        let stalled = best.as_ref().is_some_and(|b| rel > 0.5 * b.relative_residual);
        if best.as_ref().map_or(true, |b| rel < b.relative_residual) {
            best = Some(SolveReport {
                x: x.clone(),
                relative_residual: rel,
                backward_error: norm_inf(&r) / (a_inf * norm_inf(&x) + b_inf),
                refinement_steps: steps,
            });
        }
        if rel <= tol {
            break;
        }
        if stalled || steps == max_steps {
            break;
        }
        let dx = factor.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        steps += 1;
    }
    let best = best.unwrap();
    if best.relative_residual <= tol || best.backward_error <= tol {
        Ok(best)
    } else {
        Err(Error::NotConverged {
            achieved: best.relative_residual,
            target: tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_2d(nx: usize) -> CsrMatrix<f64> {
        let id = |i: usize, j: usize| i * nx + j;
        let mut t = Vec::new();
        for i in 0..nx {
            for j in 0..nx {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                }
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < nx {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(nx * nx, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.nnz(), 3);
        assert!(a.is_symmetric());
    }

    #[test]
    fn ordering_is_permutation() {
        let a = laplace_2d(23);
        let mut p = nested_dissection(&a.adjacency());
        p.sort_unstable();
        assert_eq!(p, (0..a.dim()).collect::<Vec<_>>());
    }

    #[test]
    fn real_solve_matches_rhs() {
        let a = laplace_2d(40);
        let b: Vec<f64> = (0..a.dim()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let rep = solve_refined(&a, &b, 1e-12, 3).unwrap();
        assert!(rep.relative_residual <= 1e-12);
    }

    #[test]
    fn dissection_beats_natural_fill() {
        let a = laplace_2d(60);
        let nd = LdlFactor::new(&a).unwrap().factor_nnz();
        let natural = LdlFactor::with_ordering(&a, (0..a.dim()).collect()).unwrap().factor_nnz();
        assert!(nd < natural, "nd {nd} natural {natural}");
    }

    #[test]
    fn complex_symmetric_solve() {
        let k = laplace_2d(20);
        let m = CsrMatrix::from_triplets(k.dim(), (0..k.dim()).map(|i| (i, i, 0.5)).collect());
        let a: CsrMatrix<Complex64> = k.add_scaled(Complex64::new(0.0, 3.0), &m);
        let b: Vec<Complex64> = (0..a.dim()).map(|i| Complex64::new(1.0, (i % 5) as f64)).collect();
        let rep = solve_refined(&a, &b, 1e-12, 3).unwrap();
        let r: Vec<Complex64> = a.mul_vec(&rep.x).iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(norm2(&r) / norm2(&b) <= 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_2d(5);
        let rep = solve_refined(&a, &vec![0.0; 25], 1e-10, 2).unwrap();
        assert!(rep.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(solve_refined(&a, &[1.0, 2.0], 1e-10, 2), Err(Error::Singular(_))));
    }
}
