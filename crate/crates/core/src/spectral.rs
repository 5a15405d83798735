//! Top eigenpairs of sparse symmetric operators.
//!
//! Block Krylov iteration with twice-repeated classical Gram-Schmidt,
//! Rayleigh-Ritz on the growing basis and thick restart on the best Ritz
//! vectors when the basis reaches its cap. The start block comes from a
//! seeded ChaCha generator, so results are reproducible.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::UndirectedGraph;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("eigensolver did not reach tolerance {tol} after {restarts} restarts (worst residual {worst})")]
    NotConverged { tol: f64, restarts: usize, worst: f64 },
}

pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// `D^{-1/2} A D^{-1/2}` of a weighted undirected graph, in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn new(g: &UndirectedGraph) -> Self {
        let n = g.node_count();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|u| {
                let d = g.weighted_degree(u);
                if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for u in 0..n {
            for (&v, &w) in g.neighbors(u).iter().zip(g.neighbor_weights(u)) {
                targets.push(v);
                values.push(w * inv_sqrt[u] * inv_sqrt[v]);
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets, values }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for u in 0..n {
            for i in self.offsets[u]..self.offsets[u + 1] {
                m[(u, self.targets[i])] = self.values[i];
            }
        }
        m
    }
}

impl SymmetricOperator for NormalizedAdjacency {
    fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let row = |u: usize| -> f64 {
            (self.offsets[u]..self.offsets[u + 1])
                .map(|i| self.values[i] * x[self.targets[i]])
                .sum()
        };
        if y.len() > 20_000 {
            y.par_iter_mut().enumerate().for_each(|(u, out)| *out = row(u));
        } else {
            for (u, out) in y.iter_mut().enumerate() {
                *out = row(u);
            }
        }
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (u, out) in y.iter_mut().enumerate() {
            *out = (0..self.ncols()).map(|v| self[(u, v)] * x[v]).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_restarts: usize,
}

impl EigenConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            tol: DEFAULT_TOLERANCE,
            max_restarts: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    /// Descending.
    pub values: Vec<f64>,
    /// Unit vectors, one per value; sign fixed so the largest-magnitude entry is positive.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v − λ v‖₂` recomputed with the operator.
    pub residuals: Vec<f64>,
    pub basis_size: usize,
    pub restarts: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormalizes `block` against `basis` and itself (two Gram-Schmidt
/// passes), dropping columns that collapse numerically.
fn orthonormalize(basis: &[Vec<f64>], block: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut w in block {
        let before = norm(&w);
        if before == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in basis.iter().chain(out.iter()) {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let after = norm(&w);
        if after > 1e-10 * before {
            w.iter_mut().for_each(|x| *x /= after);
            out.push(w);
        }
    }
    out
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Vec<Vec<f64>> {
    (0..b)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

fn apply(op: &dyn SymmetricOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    op.apply(x, &mut y);
    y
}

pub fn residual_norm(op: &dyn SymmetricOperator, lambda: f64, v: &[f64]) -> f64 {
    let mut r = apply(op, v);
    axpy(-lambda, v, &mut r);
    norm(&r)
}

fn combine(cols: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; cols[0].len()];
    for (c, col) in coeffs.zip(cols) {
        axpy(c, col, &mut out);
    }
    out
}

/// The `cfg.k` algebraically largest eigenpairs of `op`.
pub fn top_eigenpairs(op: &dyn SymmetricOperator, cfg: &EigenConfig) -> Result<EigenResult, SpectralError> {
    let n = op.dim();
    let k = cfg.k.min(n);
    if k == 0 {
        return Ok(EigenResult {
            values: Vec::new(),
            vectors: Vec::new(),
            residuals: Vec::new(),
            basis_size: 0,
            restarts: 0,
        });
    }
    let b = (k + 4).min(n);
    let max_basis = n.min((30 * b).max(4 * k + 40));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut aq: Vec<Vec<f64>> = Vec::new();
    let mut t: Vec<Vec<f64>> = Vec::new();
    let mut block = orthonormalize(&q, random_block(&mut rng, n, b));
    let mut restarts = 0usize;
    loop {
        let start = q.len();
        for v in block {
            aq.push(apply(op, &v));
            q.push(v);
        }
        let m = q.len();
        for row in t.iter_mut() {
            row.resize(m, 0.0);
        }
        for j in start..m {
            let mut row = vec![0.0; m];
            for i in 0..m {
                row[i] = dot(&q[i], &aq[j]);
            }
            for i in 0..start {
                t[i][j] = row[i];
            }
            t.push(row);
        }
        let tm = DMatrix::from_fn(m, m, |i, j| 0.5 * (t[i][j] + t[j][i]));
        let eig = SymmetricEigen::new(tm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].partial_cmp(&eig.eigenvalues[a]).unwrap());

        let keep = b.min(m);
        let mut ritz = Vec::with_capacity(keep);
        let mut aritz = Vec::with_capacity(keep);
        let mut worst = 0.0f64;
        for (rank, &idx) in order.iter().take(keep).enumerate() {
            let y = eig.eigenvectors.column(idx);
            let x = combine(&q, y.iter().copied());
            let ax = combine(&aq, y.iter().copied());
            if rank < k {
                let mut r = ax.clone();
                axpy(-eig.eigenvalues[idx], &x, &mut r);
                worst = worst.max(norm(&r));
            }
            ritz.push(x);
            aritz.push(ax);
        }
        let theta: Vec<f64> = order.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect();

        if worst <= cfg.tol || m == n {
            return Ok(finish(op, &theta[..k], ritz.into_iter().take(k).collect(), m, restarts));
        }

        let mut next = orthonormalize(&q, aq[start..].to_vec());
        if next.is_empty() {
            next = orthonormalize(&q, random_block(&mut rng, n, b));
            if next.is_empty() {
                return Ok(finish(op, &theta[..k], ritz.into_iter().take(k).collect(), m, restarts));
            }
        }
        if m + next.len() > max_basis {
            restarts += 1;
            if restarts > cfg.max_restarts {
                return Err(SpectralError::NotConverged {
                    tol: cfg.tol,
                    restarts: cfg.max_restarts,
                    worst,
                });
            }
            let residual_dirs: Vec<Vec<f64>> = ritz
                .iter()
                .zip(&aritz)
                .zip(&theta)
                .map(|((x, ax), &th)| {
                    let mut r = ax.clone();
                    axpy(-th, x, &mut r);
                    r
                })
                .collect();
            q = orthonormalize(&[], ritz);
            aq = q.iter().map(|v| apply(op, v)).collect();
            t = (0..q.len())
                .map(|i| (0..q.len()).map(|j| dot(&q[i], &aq[j])).collect())
                .collect();
            next = orthonormalize(&q, residual_dirs);
            if next.is_empty() {
                next = orthonormalize(&q, random_block(&mut rng, n, b));
            }
        }
        next.truncate(n - q.len());
        block = next;
    }
}

fn finish(op: &dyn SymmetricOperator, theta: &[f64], vectors: Vec<Vec<f64>>, basis_size: usize, restarts: usize) -> EigenResult {
    let mut values = Vec::with_capacity(theta.len());
    let mut out = Vec::with_capacity(theta.len());
    let mut residuals = Vec::with_capacity(theta.len());
    for (&th, mut v) in theta.iter().zip(vectors) {
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() + 1e-12 { (i, x) } else { best })
            .0;
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let lambda = dot(&v, &apply(op, &v));
        residuals.push(residual_norm(op, lambda, &v));
        values.push(if (lambda - th).abs() < 1e-9 { th } else { lambda });
        out.push(v);
    }
    EigenResult {
        values,
        vectors: out,
        residuals,
        basis_size,
        restarts,
    }
}
