use crate::error::{Error, Result};
use crate::imageops::{invert3, ImageBuffer};

/// Symmetric sparse matrix in coordinate form; only `i <= j` entries are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSymMatrix {
    /// Entries with `i > j` are mirrored into the upper triangle; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidParameter(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite entry at ({i}, {j})")));
            }
            entries.push((i.min(j), i.max(j), v));
        }
        entries.sort_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 += e.2,
                _ => merged.push(e),
            }
        }
        Ok(Self { n, entries: merged })
    }

    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::dims(format!("{} entries", n * n), format!("{} entries", dense.len())));
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = dense[i * n + j];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Upper-triangle entries `(i, j, value)` with `i <= j`, sorted.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            s[i] += v;
            if i != j {
                s[j] += v;
            }
        }
        s
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut d = vec![0.0; n * n];
        for &(i, j, v) in &self.entries {
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
        d
    }
}

/// Closed-form matting Laplacian of a 3-channel patch.
///
/// For every window `ω_k` lying fully inside the patch, with color mean `μ_k`
/// and covariance `Σ_k`, each pixel pair `(i, j)` in the window accumulates
/// `δ_ij − (1 + (I_i − μ_k)ᵀ (Σ_k + ε/|ω| · Id)⁻¹ (I_j − μ_k)) / |ω|`.
/// Pixel `(x, y)` maps to index `y · width + x`.
pub fn matting_laplacian(patch: &ImageBuffer, window_radius: usize, epsilon: f64) -> Result<SparseSymMatrix> {
    if patch.channels() != 3 {
        return Err(Error::dims("3-channel patch", format!("{} channels", patch.channels())));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("matting epsilon must be > 0, got {epsilon}")));
    }
    let (w, h, r) = (patch.width(), patch.height(), window_radius);
    let side = 2 * r + 1;
    if w < side || h < side {
        return Err(Error::InvalidParameter(format!("patch {w}x{h} smaller than the {side}x{side} matting window")));
    }
    let count = (side * side) as f64;
    // Neighbour offsets span [-2r, 2r] in each axis.
    let span = 4 * r + 1;
    let stencil = span * span;
    let mut acc = vec![0.0; w * h * stencil];
    let mut idx = Vec::with_capacity(side * side);
    let mut dev = Vec::with_capacity(side * side);
    let pixel = |x: usize, y: usize| [patch.get(x, y, 0), patch.get(x, y, 1), patch.get(x, y, 2)];

    for cy in r..h - r {
        for cx in r..w - r {
            idx.clear();
            let mut mean = [0.0; 3];
            for y in cy - r..=cy + r {
                for x in cx - r..=cx + r {
                    idx.push((x, y));
                    let p = pixel(x, y);
                    for c in 0..3 {
                        mean[c] += p[c];
                    }
                }
            }
            mean.iter_mut().for_each(|m| *m /= count);
            let mut cov = [[0.0; 3]; 3];
            dev.clear();
            for &(x, y) in &idx {
                let p = pixel(x, y);
                let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
                for a in 0..3 {
                    for b in 0..3 {
                        cov[a][b] += d[a] * d[b];
                    }
                }
                dev.push(d);
            }
            for (a, row) in cov.iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v /= count;
                }
                row[a] += epsilon / count;
            }
            let inv = invert3(&cov);
            for (p, &(xi, yi)) in idx.iter().enumerate() {
                let di = dev[p];
                let t = [
                    inv[0][0] * di[0] + inv[0][1] * di[1] + inv[0][2] * di[2],
                    inv[1][0] * di[0] + inv[1][1] * di[1] + inv[1][2] * di[2],
                    inv[2][0] * di[0] + inv[2][1] * di[1] + inv[2][2] * di[2],
                ];
                let i = yi * w + xi;
                for (q, &(xj, yj)) in idx.iter().enumerate() {
                    let dj = dev[q];
                    let affinity = (1.0 + t[0] * dj[0] + t[1] * dj[1] + t[2] * dj[2]) / count;
                    let delta = if p == q { 1.0 } else { 0.0 };
                    let o = (yj + 2 * r - yi) * span + (xj + 2 * r - xi);
                    acc[i * stencil + o] += delta - affinity;
                }
            }
        }
    }

    let mut triplets = Vec::new();
    for yi in 0..h {
        for xi in 0..w {
            let i = yi * w + xi;
            for o in 0..stencil {
                let v = acc[i * stencil + o];
                if v == 0.0 {
                    continue;
                }
                let (dy, dx) = (o / span, o % span);
                let (xj, yj) = (xi + dx - 2 * r, yi + dy - 2 * r);
                let j = yj * w + xj;
                if j >= i {
                    triplets.push((i, j, v));
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(w * h, triplets)
}
