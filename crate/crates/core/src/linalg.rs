//! Sparse symmetric positive definite solves for Dirichlet problems.
//!
//! Every exact quantity in the crate reduces to `L_U f = b`, where `L_U` is the
//! weighted graph Laplacian `D − W` restricted to a set `U` of free vertices.
//! Small systems are factored directly (reverse Cuthill–McKee ordering followed
//! by envelope Cholesky), so one factorization serves many right-hand sides.
//! Larger ones use Jacobi-preconditioned conjugate gradients.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Systems with fewer unknowns than this are factored directly.
    pub direct_limit: usize,
    /// Relative residual target for the iterative path.
    pub rel_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { direct_limit: 5000, rel_tol: 1e-12 }
    }
}

/// Symmetric matrix stored as a diagonal plus both triangles of the
/// off-diagonal part in CSR form.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymmetric {
    /// `rows[i]` lists the off-diagonal entries `(j, a_ij)`; the caller
    /// guarantees symmetry.
    pub fn new(diag: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(diag.len() + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (j, a) in row {
                cols.push(j);
                vals.push(a);
            }
            offsets.push(cols.len());
        }
        SparseSymmetric { diag, offsets, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim() {
            let mut s = self.diag[i] * x[i];
            for (j, a) in self.row(i) {
                s += a * x[j];
            }
            y[i] = s;
        }
    }
}

/// Reverse Cuthill–McKee ordering; returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &SparseSymmetric) -> Vec<usize> {
    let n = m.dim();
    let degree: Vec<usize> = (0..n).map(|i| m.offsets[i + 1] - m.offsets[i]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    // farthest low-degree vertex of the component containing `start`
    let peripheral = |start: usize, level: &mut Vec<usize>| -> usize {
        let mut root = start;
        let mut best_depth = 0;
        for _ in 0..4 {
            let mut touched = vec![root];
            level[root] = 0;
            let mut queue = VecDeque::from([root]);
            let mut depth = 0;
            while let Some(v) = queue.pop_front() {
                depth = depth.max(level[v]);
                for (w, _) in m.row(v) {
                    if level[w] == usize::MAX {
                        level[w] = level[v] + 1;
                        touched.push(w);
                        queue.push_back(w);
                    }
                }
            }
            let candidate = touched
                .iter()
                .copied()
                .filter(|&v| level[v] == depth)
                .min_by_key(|&v| (degree[v], v))
                .unwrap_or(root);
            for v in touched {
                level[v] = usize::MAX;
            }
            if depth <= best_depth && best_depth > 0 {
                break;
            }
            best_depth = depth;
            root = candidate;
        }
        root
    };

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (degree[v], v));
    for s in seeds {
        if visited[s] {
            continue;
        }
        let root = peripheral(s, &mut level);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = m.row(v).map(|(w, _)| w).filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) factor `A = L D Lᵀ` with unit lower `L`, in a permuted
/// ordering. No square roots, so small integer systems solve exactly.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(m: &SparseSymmetric) -> Result<Self> {
        let n = m.dim();
        let perm = reverse_cuthill_mckee(m);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0; n];
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let f = m.row(perm[i]).map(|(j, _)| inv[j]).filter(|&j| j < i).min().unwrap_or(i);
            first[i] = f;
            start.push(start[i] + (i - f + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            let old = perm[i];
            data[start[i] + (i - first[i])] = m.diag[old];
            for (j, a) in m.row(old) {
                let jn = inv[j];
                if jn < i {
                    data[start[i] + (jn - first[i])] = a;
                }
            }
        }
        // Crout order: while row i is in progress its entries hold L_ik·D_k
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let mut s = data[si + (j - fi)];
                for k in fi.max(fj)..j {
                    s -= data[si + (k - fi)] * data[sj + (k - fj)];
                }
                data[si + (j - fi)] = s;
            }
            let diag = data[si + (i - fi)];
            let mut d = diag;
            for k in fi..i {
                let u = data[si + (k - fi)];
                let l = u / data[start[k] + (k - first[k])];
                d -= u * l;
                data[si + (k - fi)] = l;
            }
            if !(d > 1e-13 * diag.abs()) {
                return Err(Error::Singular(format!("non-positive pivot at row {i}")));
            }
            data[si + (i - fi)] = d;
        }
        Ok(EnvelopeCholesky { perm, first, start, data })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[si + (k - fi)] * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.data[self.start[i] + (i - self.first[i])];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            let xi = y[i];
            for k in fi..i {
                y[k] -= self.data[si + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients. Iteration order is fixed, so
/// results are bit-reproducible.
pub fn conjugate_gradient(m: &SparseSymmetric, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut x = vec![0.0; n];
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&m.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 20 * n + 1000;
    let mut res = 1.0;
    for _ in 0..max_iter {
        m.mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Singular("conjugate gradient met a non-positive curvature".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / b_norm;
        if res <= rel_tol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / m.diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res })
}

#[derive(Debug, Clone)]
enum Backend {
    Direct(EnvelopeCholesky),
    Iterative(SparseSymmetric, f64),
}

/// The restricted Laplacian `(D − W)_U` of a weighted graph, ready to solve.
#[derive(Debug, Clone)]
pub struct LaplacianBlock {
    unknowns: Vec<usize>,
    backend: Backend,
}

impl LaplacianBlock {
    /// Assembles and factors `(D − W)_U`. Fails when some connected piece of
    /// `U` has no edge leaving `U` (the system would be singular).
    pub fn new(g: &WeightedGraph, unknowns: &[usize], opts: &SolverOptions) -> Result<Self> {
        let mut unknowns = unknowns.to_vec();
        unknowns.sort_unstable();
        unknowns.dedup();
        let local = |v: usize| unknowns.binary_search(&v).ok();
        let n = unknowns.len();
        let mut rows = Vec::with_capacity(n);
        let mut leaks = vec![false; n];
        for (i, &v) in unknowns.iter().enumerate() {
            let mut row = Vec::with_capacity(g.degree(v));
            for (w, mu) in g.neighbors(v) {
                match local(w) {
                    Some(j) => row.push((j, -mu)),
                    None => leaks[i] = true,
                }
            }
            rows.push(row);
        }
        check_grounded(&rows, &leaks)?;
        let diag = unknowns.iter().map(|&v| g.measure(v)).collect();
        let matrix = SparseSymmetric::new(diag, rows);
        let backend = if n < opts.direct_limit {
            Backend::Direct(EnvelopeCholesky::factor(&matrix)?)
        } else {
            Backend::Iterative(matrix, opts.rel_tol)
        };
        Ok(LaplacianBlock { unknowns, backend })
    }

    /// Free vertices in increasing id order; solution vectors follow this order.
    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.unknowns.binary_search(&v).ok()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Direct(chol) => Ok(chol.solve(rhs)),
            Backend::Iterative(m, tol) => conjugate_gradient(m, rhs, *tol),
        }
    }
}

fn check_grounded(rows: &[Vec<(usize, f64)>], leaks: &[bool]) -> Result<()> {
    let n = rows.len();
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut grounded = false;
        while let Some(v) = stack.pop() {
            grounded |= leaks[v];
            for &(w, _) in &rows[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if !grounded {
            return Err(Error::Singular(
                "a component of the free vertices never reaches clamped data".into(),
            ));
        }
    }
    Ok(())
}
