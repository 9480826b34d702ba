//! K-means in CIELAB and per-product color palettes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageops::LabColor;

pub const PALETTE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductClass {
    Foundation,
    Eyeshadow,
    Lip,
}

impl ProductClass {
    pub const ALL: [ProductClass; 3] = [ProductClass::Foundation, ProductClass::Eyeshadow, ProductClass::Lip];

    pub fn as_str(self) -> &'static str {
        match self {
            ProductClass::Foundation => "foundation",
            ProductClass::Eyeshadow => "eyeshadow",
            ProductClass::Lip => "lip",
        }
    }
}

impl fmt::Display for ProductClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProductClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "foundation" => Ok(ProductClass::Foundation),
            "eyeshadow" => Ok(ProductClass::Eyeshadow),
            "lip" => Ok(ProductClass::Lip),
            other => Err(format!("unknown product class {other:?}")),
        }
    }
}

/// Result of a k-means run over `dim`-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k * dim` row-major centers.
    pub centers: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&f64::NAN)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(point: &[f64], centers: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Seeded farthest-point initialization: a random first center, then
/// repeatedly the point farthest from its nearest chosen center (ties → lowest index).
pub fn kmeans_init(points: &[f64], dim: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    let n = check_points(points, dim, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut centers = points[first * dim..(first + 1) * dim].to_vec();
    let mut nearest_d: Vec<f64> = points.chunks_exact(dim).map(|p| sq_dist(p, &centers)).collect();
    while centers.len() < k * dim {
        let mut pick = 0;
        for i in 1..n {
            if nearest_d[i] > nearest_d[pick] {
                pick = i;
            }
        }
        let c = points[pick * dim..(pick + 1) * dim].to_vec();
        for (i, p) in points.chunks_exact(dim).enumerate() {
            nearest_d[i] = nearest_d[i].min(sq_dist(p, &c));
        }
        centers.extend(c);
    }
    Ok(centers)
}

fn check_points(points: &[f64], dim: usize, k: usize) -> Result<usize> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidParameter(format!(
            "point buffer of length {} is not a multiple of dimension {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if n == 0 || k > n {
        return Err(Error::TooFewSamples { needed: k, available: n });
    }
    Ok(n)
}

/// Lloyd iterations from explicit initial centers.
pub fn kmeans_from(points: &[f64], dim: usize, init: Vec<f64>, max_iters: usize) -> Result<KMeansResult> {
    let k = init.len() / dim;
    let n = check_points(points, dim, k)?;
    let mut centers = init;
    let mut assignments: Vec<usize> = points.chunks_exact(dim).map(|p| nearest(p, &centers, dim).0).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        // Update step.
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, p) in points.chunks_exact(dim).enumerate() {
            let j = assignments[i];
            counts[j] += 1;
            for d in 0..dim {
                sums[j * dim + d] += p[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                for d in 0..dim {
                    centers[j * dim + d] = sums[j * dim + d] / counts[j] as f64;
                }
            }
        }
        // Re-seed empty clusters from the point farthest from its own center.
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut pick = 0;
            let mut pick_d = f64::NEG_INFINITY;
            for (i, p) in points.chunks_exact(dim).enumerate() {
                if counts[assignments[i]] <= 1 {
                    continue;
                }
                let a = assignments[i];
                let d = sq_dist(p, &centers[a * dim..(a + 1) * dim]);
                if d > pick_d {
                    pick = i;
                    pick_d = d;
                }
            }
            if pick_d < 0.0 {
                continue;
            }
            counts[assignments[pick]] -= 1;
            assignments[pick] = j;
            counts[j] = 1;
            centers[j * dim..(j + 1) * dim].copy_from_slice(&points[pick * dim..(pick + 1) * dim]);
        }
        history.push(wcss(points, dim, &centers, &assignments));
        iterations += 1;
        if iterations >= max_iters {
            break;
        }
        let next: Vec<usize> = points.chunks_exact(dim).map(|p| nearest(p, &centers, dim).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    debug_assert_eq!(assignments.len(), n);
    Ok(KMeansResult { centers, assignments, objective_history: history, iterations })
}

pub fn wcss(points: &[f64], dim: usize, centers: &[f64], assignments: &[usize]) -> f64 {
    points.chunks_exact(dim).zip(assignments).map(|(p, &a)| sq_dist(p, &centers[a * dim..(a + 1) * dim])).sum()
}

/// k-means over arbitrary-dimension points stored row-major.
pub fn kmeans_nd(points: &[f64], dim: usize, k: usize, seed: u64, max_iters: usize) -> Result<KMeansResult> {
    let init = kmeans_init(points, dim, k, seed)?;
    kmeans_from(points, dim, init, max_iters.max(1))
}

/// k-means over Lab colors. Returns centers and per-point assignments.
pub fn kmeans(points: &[LabColor], k: usize, seed: u64, max_iters: usize) -> Result<(Vec<LabColor>, Vec<usize>)> {
    let flat: Vec<f64> = points.iter().flat_map(|c| c.to_array()).collect();
    let r = kmeans_nd(&flat, 3, k, seed, max_iters)?;
    let centers = r.centers.chunks_exact(3).map(|c| LabColor::new(c[0], c[1], c[2])).collect();
    Ok((centers, r.assignments))
}

/// Clustered codebook of makeup colors, ordered by descending sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub product_class: ProductClass,
    pub centers: Vec<LabColor>,
    pub counts: Vec<usize>,
}

impl Palette {
    pub fn new(product_class: ProductClass, centers: Vec<LabColor>, counts: Vec<usize>) -> Result<Self> {
        if centers.is_empty() || centers.len() != counts.len() {
            return Err(Error::InvalidParameter("palette needs matching non-empty centers and counts".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) || counts.contains(&0) {
            return Err(Error::InvalidParameter("palette centers must be finite with positive counts".into()));
        }
        Ok(Self { product_class, centers, counts })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s =
            format!("schema {PALETTE_SCHEMA_VERSION}\nclass {}\ncenters {}\n", self.product_class, self.centers.len());
        for (c, n) in self.centers.iter().zip(&self.counts) {
            s.push_str(&format!("{} {} {} {}\n", c.l, c.a, c.b, n));
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = crate::io::record_lines(text);
        let mut header = |key: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((line, f)) if f.len() == 2 && f[0] == key => Ok((line, f[1].to_string())),
                Some((line, _)) => Err(Error::format(path, format!("line {line}: expected `{key} <value>`"))),
                None => Err(Error::format(path, format!("missing `{key}`"))),
            }
        };
        let (_, version) = header("schema")?;
        if version != PALETTE_SCHEMA_VERSION.to_string() {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found: version,
                supported: PALETTE_SCHEMA_VERSION.to_string(),
            });
        }
        let (line, class) = header("class")?;
        let product_class = class.parse().map_err(|e: String| Error::format(path, format!("line {line}: {e}")))?;
        let (line, count) = header("centers")?;
        let count = crate::io::parse_usize(path, line, &count)?;
        let mut centers = Vec::with_capacity(count);
        let mut counts = Vec::with_capacity(count);
        for (line, f) in lines {
            if f.len() != 4 {
                return Err(Error::format(path, format!("line {line}: expected `L a b count`")));
            }
            centers.push(LabColor::new(
                crate::io::parse_f64(path, line, f[0])?,
                crate::io::parse_f64(path, line, f[1])?,
                crate::io::parse_f64(path, line, f[2])?,
            ));
            counts.push(crate::io::parse_usize(path, line, f[3])?);
        }
        if centers.len() != count {
            return Err(Error::format(path, format!("declared {count} centers, found {}", centers.len())));
        }
        Palette::new(product_class, centers, counts).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Cluster one Lab sample per image region into a `k`-color palette.
pub fn build_palette(samples: &[LabColor], product_class: ProductClass, k: usize, seed: u64) -> Result<Palette> {
    if k == 0 {
        return Err(Error::InvalidParameter("palette size must be >= 1".into()));
    }
    if samples.len() < k {
        return Err(Error::TooFewSamples { needed: k, available: samples.len() });
    }
    let (centers, assignments) = kmeans(samples, k, seed, 100)?;
    let mut counts = vec![0usize; k];
    for &a in &assignments {
        counts[a] += 1;
    }
    let mut order: Vec<usize> = (0..k).filter(|&j| counts[j] > 0).collect();
    // Stable: equal counts keep center order.
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    Palette::new(product_class, order.iter().map(|&j| centers[j]).collect(), order.iter().map(|&j| counts[j]).collect())
}

/// Nearest palette center by ΔE76; ties go to the lowest index.
pub fn quantize(color: &LabColor, palette: &Palette) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in palette.centers.iter().enumerate() {
        let d = color.distance_sq(c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}
