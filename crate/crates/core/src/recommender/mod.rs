//! Latent structural SVM over (features, facial attributes, makeup label).
//!
//! The joint feature map has three blocks:
//! `x ⊗ onehot(h)`, `onehot(h) ⊗ onehot(slot value)` for each of the four
//! label slots, and `onehot(eyeshadow color) ⊗ onehot(lip color)`.
//! The score therefore splits into independent per-slot terms plus one
//! eye/lip pair term, which makes the exact argmax cheap.

mod features;

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use features::{
    extract_features, forehead_stats, geometric_features, FeatureVector, Standardizer, FEATURE_DIM, FEATURE_NAMES,
    FOREHEAD_PATCH, GEOMETRIC_FEATURES, SHAPE_SECTORS,
};

use crate::colormodel::kmeans_nd;
use crate::error::{Error, Result};
use crate::geometry::LandmarkSet;
use crate::imageops::LabColor;
use crate::io::{parse_f64, parse_usize, read_text, record_lines, write_atomic};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
const MODEL_MAGIC: &str = "vanity-latent-svm";

pub const FACE_SHAPES: [&str; 5] = ["oval", "round", "square", "heart", "long"];
pub const EYE_SHAPES: [&str; 3] = ["almond", "round", "hooded"];
pub const SKIN_TONES: [&str; 3] = ["light", "medium", "dark"];

/// Sizes of the latent attribute factors; a state is their mixed-radix index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentSpace {
    pub factors: Vec<usize>,
}

impl Default for LatentSpace {
    fn default() -> Self {
        Self { factors: vec![FACE_SHAPES.len(), EYE_SHAPES.len(), SKIN_TONES.len()] }
    }
}

impl LatentSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::InvalidParameter("latent factors must be non-empty and positive".into()));
        }
        Ok(Self { factors })
    }

    pub fn size(&self) -> usize {
        self.factors.iter().product()
    }

    /// Factor values of state `h`, first factor most significant.
    pub fn decode(&self, mut h: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (i, &f) in self.factors.iter().enumerate().rev() {
            out[i] = h % f;
            h /= f;
        }
        out
    }

    /// Human-readable attribute names when the default taxonomy is in use.
    pub fn describe(&self, h: usize) -> AttributeState {
        let v = self.decode(h);
        if *self == LatentSpace::default() {
            AttributeState {
                index: h,
                face_shape: FACE_SHAPES[v[0]].to_string(),
                eye_shape: EYE_SHAPES[v[1]].to_string(),
                skin_tone: SKIN_TONES[v[2]].to_string(),
            }
        } else {
            let name = |i: usize| v.get(i).map_or_else(String::new, |x| format!("state{x}"));
            AttributeState { index: h, face_shape: name(0), eye_shape: name(1), skin_tone: name(2) }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeState {
    pub index: usize,
    pub face_shape: String,
    pub eye_shape: String,
    pub skin_tone: String,
}

/// Codebook sizes of the four label slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub templates: usize,
    pub eyeshadow_colors: usize,
    pub lip_colors: usize,
    pub foundation_colors: usize,
}

impl LabelSpace {
    pub fn new(templates: usize, eyeshadow_colors: usize, lip_colors: usize, foundation_colors: usize) -> Result<Self> {
        let s = Self { templates, eyeshadow_colors, lip_colors, foundation_colors };
        if s.slots().contains(&0) {
            return Err(Error::InvalidParameter("every label slot needs at least one value".into()));
        }
        Ok(s)
    }

    pub fn slots(&self) -> [usize; 4] {
        [self.templates, self.eyeshadow_colors, self.lip_colors, self.foundation_colors]
    }

    pub fn size(&self) -> usize {
        self.slots().iter().product()
    }

    pub fn slot_total(&self) -> usize {
        self.slots().iter().sum()
    }

    pub fn contains(&self, y: &MakeupLabel) -> bool {
        y.as_array().iter().zip(self.slots()).all(|(v, n)| *v < n)
    }

    /// Every label in lexicographic order.
    pub fn labels(&self) -> impl Iterator<Item = MakeupLabel> + '_ {
        let [t, e, l, f] = self.slots();
        (0..t).flat_map(move |a| {
            (0..e).flat_map(move |b| (0..l).flat_map(move |c| (0..f).map(move |d| MakeupLabel::new(a, b, c, d))))
        })
    }
}

impl fmt::Display for LabelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [t, e, l, c] = self.slots();
        write!(f, "{t}x{e}x{l}x{c}")
    }
}

/// Structured recommendation output; field order is the lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MakeupLabel {
    pub eyeshadow_template: usize,
    pub eyeshadow_color: usize,
    pub lip_color: usize,
    pub foundation_color: usize,
}

impl MakeupLabel {
    pub const fn new(
        eyeshadow_template: usize,
        eyeshadow_color: usize,
        lip_color: usize,
        foundation_color: usize,
    ) -> Self {
        Self { eyeshadow_template, eyeshadow_color, lip_color, foundation_color }
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.eyeshadow_template, self.eyeshadow_color, self.lip_color, self.foundation_color]
    }
}

/// Hamming loss over the four slots.
pub fn hamming(a: &MakeupLabel, b: &MakeupLabel) -> usize {
    a.as_array().iter().zip(b.as_array()).filter(|(x, y)| **x != *y).count()
}

/// Index layout of the joint feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointLayout {
    pub feature_dim: usize,
    pub latent: usize,
    pub labels: LabelSpace,
}

impl JointLayout {
    pub fn dim(&self) -> usize {
        self.feature_dim * self.latent
            + self.latent * self.labels.slot_total()
            + self.labels.eyeshadow_colors * self.labels.lip_colors
    }

    fn slot_base(&self, h: usize) -> usize {
        self.feature_dim * self.latent + h * self.labels.slot_total()
    }

    fn slot_offsets(&self) -> [usize; 4] {
        let s = self.labels.slots();
        [0, s[0], s[0] + s[1], s[0] + s[1] + s[2]]
    }

    fn harmony_base(&self) -> usize {
        self.feature_dim * self.latent + self.latent * self.labels.slot_total()
    }

    /// Φ(x, h, y) as `(index, value)` pairs: `feature_dim + 4 + 1` entries.
    pub fn joint_feature(&self, x: &[f64], h: usize, y: &MakeupLabel) -> Vec<(usize, f64)> {
        let mut phi = Vec::with_capacity(self.feature_dim + 5);
        phi.extend(x.iter().enumerate().map(|(f, &v)| (h * self.feature_dim + f, v)));
        let base = self.slot_base(h);
        for (off, v) in self.slot_offsets().iter().zip(y.as_array()) {
            phi.push((base + off + v, 1.0));
        }
        phi.push((self.harmony_base() + y.eyeshadow_color * self.labels.lip_colors + y.lip_color, 1.0));
        phi
    }
}

pub fn sparse_dot(w: &[f64], phi: &[(usize, f64)]) -> f64 {
    phi.iter().map(|&(i, v)| w[i] * v).sum()
}

/// Per-(x, h) score tables; `score(h, y) = base + t[y0] + e[y1] + l[y2] + f[y3] + pair[y1][y2]`.
struct Tables<'a> {
    layout: &'a JointLayout,
    w: &'a [f64],
}

struct LatentTable {
    base: f64,
    slots: [Vec<f64>; 4],
}

impl<'a> Tables<'a> {
    fn latent(&self, x: &[f64], h: usize, gold: Option<&MakeupLabel>) -> LatentTable {
        let l = self.layout;
        let base: f64 = x.iter().enumerate().map(|(f, v)| self.w[h * l.feature_dim + f] * v).sum();
        let sb = l.slot_base(h);
        let offs = l.slot_offsets();
        let sizes = l.labels.slots();
        let gold = gold.map(MakeupLabel::as_array);
        let slots = std::array::from_fn(|s| {
            (0..sizes[s])
                .map(|v| {
                    let loss = match gold {
                        Some(g) if g[s] != v => 1.0,
                        _ => 0.0,
                    };
                    self.w[sb + offs[s] + v] + loss
                })
                .collect()
        });
        LatentTable { base, slots }
    }

    fn pair(&self, e: usize, lip: usize) -> f64 {
        self.w[self.layout.harmony_base() + e * self.layout.labels.lip_colors + lip]
    }
}

fn argmax_first(v: &[f64]) -> (usize, f64) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub latent: usize,
    pub label: MakeupLabel,
    pub score: f64,
}

/// Exact `argmax_{h,y} w·Φ(x,h,y) [+ Δ(y, gold)]`, ties to the lexicographically first `(h, y)`.
fn exact_argmax(layout: &JointLayout, w: &[f64], x: &[f64], gold: Option<&MakeupLabel>) -> Inference {
    let tables = Tables { layout, w };
    let mut best: Option<Inference> = None;
    for h in 0..layout.latent {
        let t = tables.latent(x, h, gold);
        let (ti, tv) = argmax_first(&t.slots[0]);
        let (fi, fv) = argmax_first(&t.slots[3]);
        let mut el = (0, 0, f64::NEG_INFINITY);
        for (e, ev) in t.slots[1].iter().enumerate() {
            for (lip, lv) in t.slots[2].iter().enumerate() {
                let s = ev + lv + tables.pair(e, lip);
                if s > el.2 {
                    el = (e, lip, s);
                }
            }
        }
        let score = t.base + tv + fv + el.2;
        if best.is_none_or(|b| score > b.score) {
            best = Some(Inference { latent: h, label: MakeupLabel::new(ti, el.0, el.1, fi), score });
        }
    }
    best.expect("non-empty latent space")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Regularization trade-off in `½‖w‖² + (C/N) Σ ξ_i`.
    pub c: f64,
    pub outer_iters: usize,
    pub inner_epochs: usize,
    pub seed: u64,
    /// Stop the outer loop once the objective improves by less than this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { c: 10.0, outer_iters: 50, inner_epochs: 50, seed: 0, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: FeatureVector,
    pub label: MakeupLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Latent objective at the start and after every outer iteration.
    pub objective_history: Vec<f64>,
    pub outer_iterations: usize,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSvmModel {
    pub latent: LatentSpace,
    pub labels: LabelSpace,
    pub standardizer: Standardizer,
    pub train_config: TrainConfig,
    pub weights: Vec<f64>,
}

impl LatentSvmModel {
    pub fn zeros(feature_dim: usize, latent: LatentSpace, labels: LabelSpace) -> Self {
        let mut m = Self {
            latent,
            labels,
            standardizer: Standardizer::identity(feature_dim),
            train_config: TrainConfig::default(),
            weights: Vec::new(),
        };
        m.weights = vec![0.0; m.layout().dim()];
        m
    }

    pub fn feature_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn layout(&self) -> JointLayout {
        JointLayout { feature_dim: self.feature_dim(), latent: self.latent.size(), labels: self.labels }
    }

    fn check(&self) -> Result<()> {
        let d = self.layout().dim();
        if self.weights.len() != d {
            return Err(Error::dims(format!("{d} weights"), format!("{}", self.weights.len())));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("model weights must be finite".into()));
        }
        Ok(())
    }

    pub fn standardize(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.standardizer.apply(x)
    }

    /// `w·Φ(x, h, y)` on standardized features.
    pub fn score(&self, x: &[f64], h: usize, y: &MakeupLabel) -> f64 {
        sparse_dot(&self.weights, &self.layout().joint_feature(x, h, y))
    }

    pub fn infer(&self, x: &[f64]) -> Inference {
        exact_argmax(&self.layout(), &self.weights, x, None)
    }

    pub fn loss_augmented_infer(&self, x: &[f64], gold: &MakeupLabel) -> Inference {
        exact_argmax(&self.layout(), &self.weights, x, Some(gold))
    }

    /// Distinct labels ranked by `max_h w·Φ`, ties to lexicographic label order.
    pub fn top_k(&self, x: &[f64], k: usize) -> Result<Vec<Inference>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        let layout = self.layout();
        let tables = Tables { layout: &layout, w: &self.weights };
        let [nt, ne, nl, nf] = self.labels.slots();
        let mut best = vec![(f64::NEG_INFINITY, 0usize); self.labels.size()];
        for h in 0..layout.latent {
            let t = tables.latent(x, h, None);
            let mut idx = 0;
            for a in 0..nt {
                for e in 0..ne {
                    for lip in 0..nl {
                        let partial = t.base + t.slots[0][a] + t.slots[1][e] + t.slots[2][lip] + tables.pair(e, lip);
                        for f in 0..nf {
                            let s = partial + t.slots[3][f];
                            if s > best[idx].0 {
                                best[idx] = (s, h);
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
        let mut ranked: Vec<Inference> =
            self.labels.labels().zip(best).map(|(label, (score, latent))| Inference { latent, label, score }).collect();
        ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal).then(a.label.cmp(&b.label)));
        ranked.truncate(k);
        Ok(ranked)
    }

    /// `max_h w·Φ(x, h, y)` and its first maximizer.
    pub fn best_latent(&self, x: &[f64], y: &MakeupLabel) -> (usize, f64) {
        let layout = self.layout();
        let mut best = (0, f64::NEG_INFINITY);
        for h in 0..layout.latent {
            let s = sparse_dot(&self.weights, &layout.joint_feature(x, h, y));
            if s > best.1 {
                best = (h, s);
            }
        }
        best
    }

    /// `½‖w‖² + (C/N) Σ_i [max_{h,y}(w·Φ + Δ) − max_h w·Φ(x_i, h, y_i)]`.
    pub fn objective(&self, data: &[(Vec<f64>, MakeupLabel)], c: f64) -> f64 {
        let reg = 0.5 * self.weights.iter().map(|w| w * w).sum::<f64>();
        let hinge: f64 = data
            .iter()
            .map(|(x, y)| {
                let aug = self.loss_augmented_infer(x, y);
                (aug.score - self.best_latent(x, y).1).max(0.0)
            })
            .sum();
        reg + c / data.len() as f64 * hinge
    }

    pub fn training_accuracy(&self, data: &[(Vec<f64>, MakeupLabel)]) -> f64 {
        let hits = data.iter().filter(|(x, y)| self.infer(x).label == *y).count();
        hits as f64 / data.len() as f64
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        let tc = &self.train_config;
        let mut s = format!("{MODEL_MAGIC} {MODEL_SCHEMA_VERSION}\n");
        s += &format!("feature_dim {}\n", self.feature_dim());
        s += &format!("latent {}\n", self.latent.factors.iter().map(usize::to_string).collect::<Vec<_>>().join(" "));
        let [t, e, l, f] = self.labels.slots();
        s += &format!("labels {t} {e} {l} {f}\n");
        s += &format!(
            "train c {} outer_iters {} inner_epochs {} seed {} tolerance {}\n",
            tc.c, tc.outer_iters, tc.inner_epochs, tc.seed, tc.tolerance
        );
        s += &format!("mean {}\n", join(&self.standardizer.mean));
        s += &format!("std {}\n", join(&self.standardizer.std));
        s += &format!("weights {}\n", self.weights.len());
        for w in &self.weights {
            s += &format!("{w}\n");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = record_lines(text);
        let mut next = |key: &str| -> Result<(usize, Vec<&str>)> {
            let (no, f) = lines.next().ok_or_else(|| Error::format(path, format!("missing {key} line")))?;
            if f[0] != key {
                return Err(Error::format(path, format!("line {no}: expected {key:?}, got {:?}", f[0])));
            }
            Ok((no, f))
        };
        let (no, head) = next(MODEL_MAGIC)?;
        if head.len() != 2 {
            return Err(Error::format(path, format!("line {no}: malformed header")));
        }
        if head[1] != MODEL_SCHEMA_VERSION.to_string() {
            return Err(Error::VersionMismatch {
                path: path.to_path_buf(),
                found: head[1].to_string(),
                supported: MODEL_SCHEMA_VERSION.to_string(),
            });
        }
        let usizes = |no: usize, f: &[&str]| f.iter().map(|v| parse_usize(path, no, v)).collect::<Result<Vec<_>>>();
        let floats = |no: usize, f: &[&str]| f.iter().map(|v| parse_f64(path, no, v)).collect::<Result<Vec<_>>>();
        let (no, f) = next("feature_dim")?;
        let dim = *usizes(no, &f[1..])?.first().ok_or_else(|| Error::format(path, "empty feature_dim"))?;
        let (no, f) = next("latent")?;
        let latent = LatentSpace::new(usizes(no, &f[1..])?).map_err(|e| Error::format(path, e.to_string()))?;
        let (no, f) = next("labels")?;
        let sizes = usizes(no, &f[1..])?;
        if sizes.len() != 4 {
            return Err(Error::format(path, format!("line {no}: labels needs 4 sizes")));
        }
        let labels =
            LabelSpace::new(sizes[0], sizes[1], sizes[2], sizes[3]).map_err(|e| Error::format(path, e.to_string()))?;
        let (no, f) = next("train")?;
        if f.len() != 11
            || f[1] != "c"
            || f[3] != "outer_iters"
            || f[5] != "inner_epochs"
            || f[7] != "seed"
            || f[9] != "tolerance"
        {
            return Err(Error::format(path, format!("line {no}: malformed train record")));
        }
        let train_config = TrainConfig {
            c: parse_f64(path, no, f[2])?,
            outer_iters: parse_usize(path, no, f[4])?,
            inner_epochs: parse_usize(path, no, f[6])?,
            seed: f[8].parse().map_err(|_| Error::format(path, format!("line {no}: bad seed")))?,
            tolerance: parse_f64(path, no, f[10])?,
        };
        let (no, f) = next("mean")?;
        let mean = floats(no, &f[1..])?;
        let (no, f) = next("std")?;
        let std = floats(no, &f[1..])?;
        if mean.len() != dim || std.len() != dim {
            return Err(Error::format(path, format!("line {no}: expected {dim} standardization values")));
        }
        let (no, f) = next("weights")?;
        let count = parse_usize(path, no, f.get(1).ok_or_else(|| Error::format(path, "missing weight count"))?)?;
        let mut weights = Vec::with_capacity(count);
        for (no, f) in lines.by_ref() {
            if f.len() != 1 {
                return Err(Error::format(path, format!("line {no}: expected one weight")));
            }
            weights.push(parse_f64(path, no, f[0])?);
        }
        let model = Self { latent, labels, standardizer: Standardizer { mean, std }, train_config, weights };
        if count != model.layout().dim() || model.weights.len() != count {
            return Err(Error::format(
                path,
                format!("expected {} weights, found {}", model.layout().dim(), model.weights.len()),
            ));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }
}

/// CCCP training of the latent structural SVM.
///
/// The first latent imputation clusters the standardized features into
/// `min(|H|, N)` groups (all states score 0 under `w = 0`). Each outer
/// iteration then solves the convex problem for the fixed imputation with
/// Pegasos steps `η_t = 1/(λ t)`, `λ = 1/C`, over deterministically shuffled
/// epochs, keeping the best iterate (the start point included) under the
/// convex objective, and re-imputes `h_i = argmax_h w·Φ(x_i, h, y_i)`.
pub fn train(
    examples: &[TrainingExample],
    latent: LatentSpace,
    labels: LabelSpace,
    config: &TrainConfig,
) -> Result<(LatentSvmModel, TrainReport)> {
    if examples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, available: 0 });
    }
    if !(config.c > 0.0) || !config.c.is_finite() {
        return Err(Error::InvalidParameter(format!("C must be > 0, got {}", config.c)));
    }
    if let Some(e) = examples.iter().find(|e| !labels.contains(&e.label)) {
        return Err(Error::InvalidParameter(format!("label {:?} outside label space {labels}", e.label)));
    }
    let feats: Vec<FeatureVector> = examples.iter().map(|e| e.features.clone()).collect();
    let standardizer = Standardizer::fit(&feats)?;
    let mut model = LatentSvmModel::zeros(standardizer.dim(), latent, labels);
    model.standardizer = standardizer;
    model.train_config = *config;
    let data: Vec<(Vec<f64>, MakeupLabel)> =
        examples.iter().map(|e| Ok((model.standardize(&e.features)?, e.label))).collect::<Result<_>>()?;
    let n = data.len();
    let layout = model.layout();
    let lambda = 1.0 / config.c;

    let flat: Vec<f64> = data.iter().flat_map(|(x, _)| x.iter().copied()).collect();
    let groups = layout.latent.min(n);
    let mut imputed = kmeans_nd(&flat, layout.feature_dim, groups, config.seed, 100)?.assignments;

    let convex = |w: &[f64], imputed: &[usize]| -> f64 {
        let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let hinge: f64 = data
            .iter()
            .zip(imputed)
            .map(|((x, y), &h)| {
                let aug = exact_argmax(&layout, w, x, Some(y));
                (aug.score - sparse_dot(w, &layout.joint_feature(x, h, y))).max(0.0)
            })
            .sum();
        reg + config.c / n as f64 * hinge
    };

    let mut history = vec![model.objective(&data, config.c)];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    let radius = 1.0 / lambda.sqrt();
    let mut outer = 0;
    while outer < config.outer_iters {
        outer += 1;
        let mut w = model.weights.clone();
        let mut best_w = w.clone();
        let mut best_obj = convex(&w, &imputed);
        for _ in 0..config.inner_epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let (x, y) = &data[i];
                let aug = exact_argmax(&layout, &w, x, Some(y));
                let gold = layout.joint_feature(x, imputed[i], y);
                let margin = aug.score - sparse_dot(&w, &gold);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin > 0.0 {
                    for (j, v) in gold {
                        w[j] += eta * v;
                    }
                    for (j, v) in layout.joint_feature(x, aug.latent, &aug.label) {
                        w[j] -= eta * v;
                    }
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    w.iter_mut().for_each(|v| *v *= radius / norm);
                }
            }
            let obj = convex(&w, &imputed);
            if obj < best_obj {
                best_obj = obj;
                best_w.clone_from(&w);
            }
        }
        model.weights = best_w;
        for (h, (x, y)) in imputed.iter_mut().zip(&data) {
            *h = model.best_latent(x, y).0;
        }
        let obj = model.objective(&data, config.c);
        let prev = *history.last().expect("initial objective");
        history.push(obj);
        if prev - obj < config.tolerance && model.training_accuracy(&data) == 1.0 {
            break;
        }
    }
    model.check()?;
    let report = TrainReport {
        objective_history: history,
        outer_iterations: outer,
        training_accuracy: model.training_accuracy(&data),
    };
    Ok((model, report))
}

/// A resolved palette entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorSwatch {
    pub index: usize,
    pub lab: LabColor,
    pub hex: String,
}

/// One ranked recommendation with concrete template and colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationCard {
    pub rank: usize,
    pub label: MakeupLabel,
    pub score: f64,
    pub attributes: AttributeState,
    pub template_id: usize,
    pub eyeshadow: ColorSwatch,
    pub lip: ColorSwatch,
    pub foundation: ColorSwatch,
}

/// Ranked cards for a face, resolved against the makeup database.
pub fn recommend(
    model: &LatentSvmModel,
    db: &crate::dataset::MakeupDb,
    image: &RgbImage,
    landmarks: &LandmarkSet,
    k: usize,
) -> Result<Vec<RecommendationCard>> {
    let db_labels = db.label_space()?;
    if db_labels != model.labels {
        return Err(Error::SchemaMismatch(format!("model labels {} vs db labels {}", model.labels, db_labels)));
    }
    let x = model.standardize(&extract_features(image, landmarks)?)?;
    let swatch = |p: &crate::colormodel::Palette, index: usize| ColorSwatch {
        index,
        lab: p.centers[index],
        hex: p.centers[index].to_hex(),
    };
    Ok(model
        .top_k(&x, k)?
        .into_iter()
        .enumerate()
        .map(|(rank, inf)| RecommendationCard {
            rank: rank + 1,
            label: inf.label,
            score: inf.score,
            attributes: model.latent.describe(inf.latent),
            template_id: db.templates[inf.label.eyeshadow_template].id,
            eyeshadow: swatch(&db.eyeshadow, inf.label.eyeshadow_color),
            lip: swatch(&db.lip, inf.label.lip_color),
            foundation: swatch(&db.foundation, inf.label.foundation_color),
        })
        .collect())
}
