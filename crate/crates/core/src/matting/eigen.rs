//! Smallest eigenpairs of a sparse symmetric positive semidefinite matrix.
//!
//! Shift-invert block subspace iteration: each step solves `(L + σI) Y = X`
//! through a banded Cholesky factor of the bandwidth-reduced matrix, then
//! re-orthonormalizes and applies a Rayleigh–Ritz projection with `L` itself.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::laplacian::SparseSymMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    /// Subspace width; `None` picks `min(n, 2m + 4)`.
    pub block_size: Option<usize>,
    pub max_iterations: usize,
    /// Bound on `‖Lv − λv‖` for every returned unit vector.
    pub tolerance: f64,
    pub seed: u64,
    /// Relative shift; the absolute shift is this times the largest diagonal magnitude.
    pub relative_shift: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { block_size: None, max_iterations: 500, tolerance: 1e-8, seed: 0, relative_shift: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub max_residual: f64,
}

pub fn smallest_eigenvectors(matrix: &SparseSymMatrix, m: usize, options: &EigenOptions) -> Result<EigenPairs> {
    let n = matrix.dim();
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 0 < m < n, got m = {m}, n = {n}")));
    }
    let p = options.block_size.unwrap_or(2 * m + 4).clamp(m, n);
    let diag_scale =
        matrix.entries().iter().filter(|e| e.0 == e.1).fold(0.0f64, |acc, e| acc.max(e.2.abs())).max(f64::MIN_POSITIVE);
    let shift = options.relative_shift * diag_scale;
    let factor = BandedCholesky::factor(matrix, shift)?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut random_vector = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(rng)).collect() };
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| random_vector(&mut rng)).collect();
    orthonormalize(&mut x, &mut rng, &mut random_vector);

    let mut lx = vec![vec![0.0; n]; p];
    let mut max_residual = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        for v in x.iter_mut() {
            factor.solve_in_place(v);
        }
        orthonormalize(&mut x, &mut rng, &mut random_vector);
        for (v, out) in x.iter().zip(lx.iter_mut()) {
            matrix.matvec(v, out);
        }
        let mut h = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let v = dot(&x[a], &lx[b]);
                h[a * p + b] = v;
                h[b * p + a] = v;
            }
        }
        let (theta, basis) = jacobi_eigen(&h, p);
        x = combine(&x, &basis, p);
        lx = combine(&lx, &basis, p);

        max_residual = (0..m)
            .map(|j| lx[j].iter().zip(&x[j]).map(|(l, v)| (l - theta[j] * v).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        if max_residual <= options.tolerance {
            let mut vectors: Vec<Vec<f64>> = x.into_iter().take(m).collect();
            vectors.iter_mut().for_each(|v| normalize_sign(v));
            return Ok(EigenPairs { values: theta[..m].to_vec(), vectors, iterations: iteration, max_residual });
        }
    }
    Err(Error::NonConvergence { iterations: options.max_iterations, residual: max_residual })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(cols: &[Vec<f64>], basis: &[f64], p: usize) -> Vec<Vec<f64>> {
    let n = cols[0].len();
    (0..p)
        .map(|j| {
            let mut out = vec![0.0; n];
            for (a, col) in cols.iter().enumerate() {
                let c = basis[a * p + j];
                if c != 0.0 {
                    out.iter_mut().zip(col).for_each(|(o, v)| *o += c * v);
                }
            }
            out
        })
        .collect()
}

/// Modified Gram–Schmidt applied twice; collapsed columns are replaced by fresh random vectors.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng, fresh: &mut impl FnMut(&mut ChaCha8Rng) -> Vec<f64>) {
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let original = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let (done, rest) = cols.split_at_mut(j);
                    let c = dot(&done[i], &rest[0]);
                    rest[0].iter_mut().zip(&done[i]).for_each(|(v, q)| *v -= c * q);
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) && norm > 0.0 {
                cols[j].iter_mut().for_each(|v| *v /= norm);
                break;
            }
            attempts += 1;
            assert!(attempts < 16, "unable to extend orthonormal basis");
            cols[j] = fresh(rng);
        }
    }
}

/// Largest-magnitude entry (first on ties) made positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cyclic Jacobi for a dense symmetric `p × p` matrix (row-major).
/// Returns ascending eigenvalues and the eigenvector matrix with eigenvectors in columns.
pub(crate) fn jacobi_eigen(a: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a.to_vec();
    let mut v = vec![0.0; p * p];
    for i in 0..p {
        v[i * p + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * p + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = a[i * p + j];
                if aij == 0.0 {
                    continue;
                }
                let (aii, ajj) = (a[i * p + i], a[j * p + j]);
                let tau = (ajj - aii) / (2.0 * aij);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aki, akj) = (a[k * p + i], a[k * p + j]);
                    a[k * p + i] = c * aki - s * akj;
                    a[k * p + j] = s * aki + c * akj;
                }
                for k in 0..p {
                    let (aik, ajk) = (a[i * p + k], a[j * p + k]);
                    a[i * p + k] = c * aik - s * ajk;
                    a[j * p + k] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[k * p + i], v[k * p + j]);
                    v[k * p + i] = c * vki - s * vkj;
                    v[k * p + j] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[x * p + x].total_cmp(&a[y * p + y]).then(x.cmp(&y)));
    let values = order.iter().map(|&i| a[i * p + i]).collect();
    let mut vectors = vec![0.0; p * p];
    for (col, &src) in order.iter().enumerate() {
        for k in 0..p {
            vectors[k * p + col] = v[k * p + src];
        }
    }
    (values, vectors)
}

/// Reverse Cuthill–McKee ordering; `order[k]` is the original index placed at position `k`.
pub(crate) fn reverse_cuthill_mckee(n: usize, entries: &[(usize, usize, f64)]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, _) in entries {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for list in adj.iter_mut() {
        list.sort_by_key(|&k| (degree[k], k));
        list.dedup();
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&k| (degree[k], k));
    for s in starts {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut head = order.len();
        order.push(s);
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order.reverse();
    order
}

fn bandwidth(pos: &[usize], entries: &[(usize, usize, f64)]) -> usize {
    entries.iter().map(|&(i, j, _)| pos[i].abs_diff(pos[j])).max().unwrap_or(0)
}

/// Cholesky factor `LLᵀ = P(A + σI)Pᵀ` stored as a lower band.
pub(crate) struct BandedCholesky {
    n: usize,
    band: usize,
    /// `order[k]` = original index at permuted position `k`.
    order: Vec<usize>,
    /// Row `i` holds columns `i − band ..= i` at offsets `0 ..= band`.
    data: Vec<f64>,
}

impl BandedCholesky {
    pub(crate) fn factor(matrix: &SparseSymMatrix, shift: f64) -> Result<Self> {
        let n = matrix.dim();
        let entries = matrix.entries();
        let natural: Vec<usize> = (0..n).collect();
        let rcm = reverse_cuthill_mckee(n, entries);
        let inverse = |order: &[usize]| {
            let mut pos = vec![0; n];
            for (k, &i) in order.iter().enumerate() {
                pos[i] = k;
            }
            pos
        };
        let (pos_n, pos_r) = (inverse(&natural), inverse(&rcm));
        let (order, pos) =
            if bandwidth(&pos_r, entries) < bandwidth(&pos_n, entries) { (rcm, pos_r) } else { (natural, pos_n) };
        let band = bandwidth(&pos, entries);
        let w = band + 1;
        let mut data = vec![0.0; n * w];
        for &(i, j, v) in entries {
            let (a, b) = (pos[i].max(pos[j]), pos[i].min(pos[j]));
            data[a * w + (b + band - a)] += v;
        }
        for i in 0..n {
            data[i * w + band] += shift;
        }
        for i in 0..n {
            let lo = i.saturating_sub(band);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(band));
                let ri = &data[i * w + (klo + band - i)..i * w + (j + band - i)];
                let rj = &data[j * w + (klo + band - j)..j * w + band];
                let s = data[i * w + (j + band - i)] - dot(ri, rj);
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::InvalidParameter(
                            "matrix is not positive semidefinite (shifted Cholesky failed)".into(),
                        ));
                    }
                    data[i * w + band] = s.sqrt();
                } else {
                    data[i * w + (j + band - i)] = s / data[j * w + band];
                }
            }
        }
        Ok(Self { n, band, order, data })
    }

    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let (n, band, w) = (self.n, self.band, self.band + 1);
        let mut y: Vec<f64> = self.order.iter().map(|&i| rhs[i]).collect();
        for i in 0..n {
            let lo = i.saturating_sub(band);
            let row = &self.data[i * w + (lo + band - i)..i * w + band];
            let s = y[i] - dot(row, &y[lo..i]);
            y[i] = s / self.data[i * w + band];
        }
        for i in (0..n).rev() {
            y[i] /= self.data[i * w + band];
            let yi = y[i];
            let lo = i.saturating_sub(band);
            for j in lo..i {
                y[j] -= self.data[i * w + (j + band - i)] * yi;
            }
        }
        for (k, &i) in self.order.iter().enumerate() {
            rhs[i] = y[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * rank).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..rank).map(|k| b[i * rank + k] * b[j * rank + k]).sum();
            }
        }
        a
    }

    #[test]
    fn diagonal_matrix() {
        let m = SparseSymMatrix::from_triplets(3, [(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        let e = smallest_eigenvectors(&m, 1, &EigenOptions::default()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.vectors[0][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_psd_matches_dense_oracle() {
        let n = 50;
        let dense = random_psd(n, 60, 5);
        let sparse = SparseSymMatrix::from_dense(n, &dense).unwrap();
        let e = smallest_eigenvectors(&sparse, 6, &EigenOptions::default()).unwrap();
        let oracle = nalgebra::DMatrix::from_row_slice(n, n, &dense).symmetric_eigen();
        let mut reference: Vec<f64> = oracle.eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (got, want) in e.values.iter().zip(&reference) {
            assert!((got - want).abs() <= 1e-6, "{got} vs {want}");
        }
        for (i, a) in e.vectors.iter().enumerate() {
            for (j, b) in e.vectors.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - expected).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn rank_deficient_null_space_is_found() {
        let n = 40;
        let dense = random_psd(n, 30, 9);
        let sparse = SparseSymMatrix::from_dense(n, &dense).unwrap();
        let e = smallest_eigenvectors(&sparse, 12, &EigenOptions::default()).unwrap();
        assert!(e.values[..10].iter().all(|v| v.abs() <= 1e-8));
        assert!(e.values[10] > 1e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let n = 30;
        let dense = random_psd(n, 40, 2);
        let sparse = SparseSymMatrix::from_dense(n, &dense).unwrap();
        let opts = EigenOptions { max_iterations: 1, tolerance: 1e-300, block_size: Some(4), ..Default::default() };
        match smallest_eigenvectors(&sparse, 2, &opts) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_counts_and_indefinite_matrices() {
        let m = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(smallest_eigenvectors(&m, 2, &EigenOptions::default()).is_err());
        assert!(smallest_eigenvectors(&m, 0, &EigenOptions::default()).is_err());
        let m = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(smallest_eigenvectors(&m, 1, &EigenOptions::default()).is_err());
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let a = [2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0];
        let (vals, vecs) = jacobi_eigen(&a, 3);
        for (got, want) in vals.iter().zip([1.0, 3.0, 5.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((vecs[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn banded_solve_matches_dense() {
        let n = 25;
        let mut dense = random_psd(n, 25, 3);
        for i in 0..n {
            dense[i * n + i] += 0.5;
        }
        let sparse = SparseSymMatrix::from_dense(n, &dense).unwrap();
        let f = BandedCholesky::factor(&sparse, 0.0).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        let mut back = vec![0.0; n];
        sparse.matvec(&x, &mut back);
        for (u, v) in back.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let entries: Vec<(usize, usize, f64)> = (0..9).map(|i| (i, (i * 4) % 10, 1.0)).collect();
        let mut order = reverse_cuthill_mckee(10, &entries);
        order.sort();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }
}
