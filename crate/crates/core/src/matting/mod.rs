//! Spectral matting on eye crops and eye-shadow template extraction.

mod eigen;
mod laplacian;

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

pub use eigen::{smallest_eigenvectors, EigenOptions, EigenPairs};
pub use laplacian::{matting_laplacian, SparseSymMatrix};

use crate::colormodel::kmeans_nd;
use crate::error::{Error, Result};
use crate::geometry::{
    boundary_distance, brow_polygon, canonical_eye_mesh, canonical_zone_mask, canonical_zone_polygon, eye_polygon,
    face_eye_mesh, mean_shape, point_in_polygon, warp_image, EyeSide, LandmarkSet, Point, EYE_FRAME_HEIGHT,
    EYE_FRAME_WIDTH,
};
use crate::imageops::{read_gray8, srgb_unit_to_lab, write_gray8, AlphaMatte, ImageBuffer, LabColor};
use crate::io::{parse_f64, parse_usize, read_text, write_atomic};

pub const TEMPLATE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MattingConfig {
    pub window_radius: usize,
    pub epsilon: f64,
    /// Number of smallest Laplacian eigenvectors used as the embedding.
    pub eigenvectors: usize,
    pub components: usize,
    /// The 192×128 eye crop is box-averaged by this factor before matting.
    pub downsample: usize,
    /// Skin reference ring: pixels this far outside the zone polygon.
    pub ring_distance: f64,
    pub ring_width: f64,
    /// Extra padding beyond the skin ring when cutting the matting window out of the eye frame.
    pub window_margin: f64,
    /// Minimum chroma distance between a component's mean color and the skin ring.
    pub chroma_threshold: f64,
    pub kmeans_restarts: usize,
    /// Eigenvector `j` is scaled by `sqrt(τ / (λ_j + τ))` before clustering.
    pub eigenvalue_scale: f64,
    pub seed: u64,
    pub eigen: EigenOptions,
}

impl Default for MattingConfig {
    fn default() -> Self {
        Self {
            window_radius: 1,
            epsilon: 1e-5,
            eigenvectors: 10,
            components: 8,
            downsample: 2,
            ring_distance: 8.0,
            ring_width: 2.0,
            window_margin: 4.0,
            chroma_threshold: 8.0,
            kmeans_restarts: 5,
            eigenvalue_scale: 0.01,
            seed: 0,
            eigen: EigenOptions::default(),
        }
    }
}

impl MattingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.window_radius == 0 {
            return bad("matting window radius must be >= 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("matting epsilon must be > 0");
        }
        if self.components == 0 || self.components > self.eigenvectors {
            return bad("matting components must be in 1..=eigenvectors");
        }
        if self.downsample == 0
            || !EYE_FRAME_WIDTH.is_multiple_of(self.downsample)
            || !EYE_FRAME_HEIGHT.is_multiple_of(self.downsample)
        {
            return bad("matting downsample must divide the 192x128 eye frame");
        }
        if !(self.ring_distance > 0.0)
            || !(self.ring_width > 0.0)
            || !(self.chroma_threshold >= 0.0)
            || !(self.window_margin >= 0.0)
        {
            return bad("ring distance/width must be > 0 and chroma threshold >= 0");
        }
        if !(self.eigenvalue_scale > 0.0) {
            return bad("eigenvalue scale must be > 0");
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans restarts must be >= 1");
        }
        Ok(())
    }
}

/// Soft segmentation from the Laplacian's smallest eigenvectors.
///
/// Pixel rows of the eigenvector matrix, each column weighted by
/// `sqrt(τ / (λ + τ))` so that near-null directions dominate and each row
/// scaled to unit length so small segments are not isolated by size alone,
/// are clustered with k-means (best of `restarts` seeds). Each cluster indicator is projected onto the
/// eigenvector span, clamped into `[0, 1]`, and the components are
/// renormalized per pixel to sum to one. Pixels where every projection
/// clamps to zero fall back to their hard cluster label.
pub fn matting_components(
    eig: &EigenPairs,
    width: usize,
    height: usize,
    k: usize,
    seed: u64,
    config: &MattingConfig,
) -> Result<Vec<AlphaMatte>> {
    let n = width * height;
    let eigvecs = &eig.vectors;
    let m = eigvecs.len();
    if eig.values.len() != m {
        return Err(Error::dims(format!("{m} eigenvalues"), format!("{}", eig.values.len())));
    }
    let tau = config.eigenvalue_scale;
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= {m} eigenvectors, got k = {k}")));
    }
    if let Some(v) = eigvecs.iter().find(|v| v.len() != n) {
        return Err(Error::dims(format!("eigenvectors of length {n}"), format!("length {}", v.len())));
    }
    let mut rows = vec![0.0; n * m];
    for (j, v) in eigvecs.iter().enumerate() {
        let weight = (tau / (eig.values[j].max(0.0) + tau)).sqrt();
        for (i, &x) in v.iter().enumerate() {
            rows[i * m + j] = weight * x;
        }
    }
    for r in rows.chunks_exact_mut(m) {
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            r.iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut best: Option<crate::colormodel::KMeansResult> = None;
    for r in 0..config.kmeans_restarts.max(1) {
        let res = kmeans_nd(&rows, m, k, seed.wrapping_add(r as u64), 300)?;
        if best.as_ref().is_none_or(|b| res.objective() < b.objective()) {
            best = Some(res);
        }
    }
    let labels = best.expect("at least one restart").assignments;

    let mut comps = vec![vec![0.0; n]; k];
    for (c, comp) in comps.iter_mut().enumerate() {
        // E Eᵀ χ_c with orthonormal columns E.
        let coeffs: Vec<f64> =
            eigvecs.iter().map(|v| labels.iter().zip(v).filter(|(&l, _)| l == c).map(|(_, x)| x).sum()).collect();
        for (i, out) in comp.iter_mut().enumerate() {
            let a: f64 = coeffs.iter().zip(eigvecs).map(|(c, v)| c * v[i]).sum();
            *out = a.clamp(0.0, 1.0);
        }
    }
    for i in 0..n {
        let s: f64 = comps.iter().map(|c| c[i]).sum();
        if s > 1e-9 {
            comps.iter_mut().for_each(|c| c[i] /= s);
        } else {
            comps.iter_mut().enumerate().for_each(|(c, v)| v[i] = if labels[i] == c { 1.0 } else { 0.0 });
        }
    }
    comps.into_iter().map(|v| AlphaMatte::from_vec(width, height, v)).collect()
}

/// Laplacian, eigensolve and component clustering for one patch.
pub fn spectral_matting(patch: &ImageBuffer, config: &MattingConfig) -> Result<Vec<AlphaMatte>> {
    config.validate()?;
    let lap = matting_laplacian(patch, config.window_radius, config.epsilon)?;
    let eig = smallest_eigenvectors(&lap, config.eigenvectors, &EigenOptions { seed: config.seed, ..config.eigen })?;
    matting_components(&eig, patch.width(), patch.height(), config.components, config.seed, config)
}

/// Eye-shadow alpha in the canonical left-eye frame (192×128).
#[derive(Debug, Clone, PartialEq)]
pub struct EyeShadowTemplate {
    pub id: usize,
    pub alpha: AlphaMatte,
    pub mean_color: LabColor,
    pub source_image_id: String,
}

impl EyeShadowTemplate {
    pub fn new(id: usize, alpha: AlphaMatte, mean_color: LabColor, source_image_id: impl Into<String>) -> Result<Self> {
        if alpha.width() != EYE_FRAME_WIDTH || alpha.height() != EYE_FRAME_HEIGHT {
            return Err(Error::dims(
                format!("{EYE_FRAME_WIDTH}x{EYE_FRAME_HEIGHT} alpha"),
                format!("{}x{}", alpha.width(), alpha.height()),
            ));
        }
        if !mean_color.is_finite() {
            return Err(Error::InvalidParameter("template mean color must be finite".into()));
        }
        let source_image_id = source_image_id.into();
        if source_image_id.contains('\n') {
            return Err(Error::InvalidParameter("source id must be a single line".into()));
        }
        Ok(Self { id, alpha, mean_color, source_image_id })
    }

    pub fn png_path(dir: &Path, id: usize) -> PathBuf {
        dir.join(format!("{id}.png"))
    }

    pub fn meta_path(dir: &Path, id: usize) -> PathBuf {
        dir.join(format!("{id}.meta"))
    }

    pub fn meta_text(&self) -> String {
        let c = self.mean_color;
        format!(
            "schema {TEMPLATE_SCHEMA_VERSION}\nid {}\nmean_lab {} {} {}\nsource {}\n",
            self.id, c.l, c.a, c.b, self.source_image_id
        )
    }

    /// Writes `<dir>/<id>.png` and `<dir>/<id>.meta`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_gray8(&Self::png_path(dir, self.id), &self.alpha.to_gray8())?;
        write_atomic(&Self::meta_path(dir, self.id), self.meta_text().as_bytes())
    }

    pub fn load(dir: &Path, id: usize) -> Result<Self> {
        let meta_path = Self::meta_path(dir, id);
        let text = read_text(&meta_path)?;
        let (mut schema, mut file_id, mut color, mut source) = (None, None, None, None);
        for (no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "schema" => schema = Some(parse_usize(&meta_path, no, rest.trim())?),
                "id" => file_id = Some(parse_usize(&meta_path, no, rest.trim())?),
                "mean_lab" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(Error::format(&meta_path, format!("line {no}: mean_lab needs 3 values")));
                    }
                    color = Some(LabColor::new(
                        parse_f64(&meta_path, no, f[0])?,
                        parse_f64(&meta_path, no, f[1])?,
                        parse_f64(&meta_path, no, f[2])?,
                    ));
                }
                "source" => source = Some(rest.to_string()),
                other => return Err(Error::format(&meta_path, format!("line {no}: unknown key {other:?}"))),
            }
        }
        match schema {
            Some(v) if v == TEMPLATE_SCHEMA_VERSION as usize => {}
            Some(v) => {
                return Err(Error::VersionMismatch {
                    path: meta_path,
                    found: v.to_string(),
                    supported: TEMPLATE_SCHEMA_VERSION.to_string(),
                })
            }
            None => return Err(Error::format(&meta_path, "missing schema line")),
        }
        let missing = |k: &str| Error::format(&meta_path, format!("missing {k} line"));
        let file_id = file_id.ok_or_else(|| missing("id"))?;
        if file_id != id {
            return Err(Error::format(&meta_path, format!("id {file_id} does not match file name {id}")));
        }
        let color = color.ok_or_else(|| missing("mean_lab"))?;
        let source = source.ok_or_else(|| missing("source"))?;
        let alpha = AlphaMatte::from_gray8(&read_gray8(&Self::png_path(dir, id))?);
        Self::new(id, alpha, color, source)
    }
}

/// Warp the left eye region into the canonical eye frame.
pub fn eye_crop(image: &RgbImage, landmarks: &LandmarkSet, side: EyeSide) -> Result<ImageBuffer> {
    if (image.width() as usize, image.height() as usize) != (landmarks.width(), landmarks.height()) {
        return Err(Error::dims(
            format!("{}x{} image", landmarks.width(), landmarks.height()),
            format!("{}x{}", image.width(), image.height()),
        ));
    }
    let src = ImageBuffer::from_rgb8(image);
    let mesh = face_eye_mesh(landmarks, side)?;
    warp_image(&src, &mesh, canonical_eye_mesh(side), EYE_FRAME_WIDTH, EYE_FRAME_HEIGHT)
}

fn downsample(img: &ImageBuffer, factor: usize) -> ImageBuffer {
    let (w, h, ch) = (img.width() / factor, img.height() / factor, img.channels());
    let mut out = ImageBuffer::new(w, h, ch);
    let norm = (factor * factor) as f64;
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut s = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        s += img.get(x * factor + dx, y * factor + dy, c);
                    }
                }
                out.set(x, y, c, s / norm);
            }
        }
    }
    out
}

/// Window of the eye frame around the zone, padded to cover the skin ring and
/// snapped to the downsampling grid. Returns `(x0, y0, width, height)`.
fn matting_window(zone: &[Point], config: &MattingConfig) -> (usize, usize, usize, usize) {
    let pad = config.ring_distance + config.ring_width + config.window_margin;
    let f = config.downsample;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in zone {
        x0 = x0.min(p.x - pad);
        y0 = y0.min(p.y - pad);
        x1 = x1.max(p.x + pad);
        y1 = y1.max(p.y + pad);
    }
    let snap_lo = |v: f64| ((v.max(0.0) as usize) / f) * f;
    let snap_hi = |v: f64, n: usize| ((v.ceil().max(0.0) as usize + f) / f * f).min(n);
    let (x0, y0) = (snap_lo(x0), snap_lo(y0));
    let (x1, y1) = (snap_hi(x1, EYE_FRAME_WIDTH), snap_hi(y1, EYE_FRAME_HEIGHT));
    (x0, y0, x1 - x0, y1 - y0)
}

fn upsample(alpha: &AlphaMatte, factor: usize, width: usize, height: usize) -> Vec<f64> {
    let f = factor as f64;
    let (xmax, ymax) = ((alpha.width() - 1) as f64, (alpha.height() - 1) as f64);
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let sx = ((x as f64 + 0.5) / f - 0.5).clamp(0.0, xmax);
            let sy = ((y as f64 + 0.5) / f - 0.5).clamp(0.0, ymax);
            out.push(alpha.sample_bilinear(sx, sy));
        }
    }
    out
}

/// Frame pixels in a band around `ring_distance` outside the zone polygon,
/// excluding the eye and brow.
fn skin_ring(config: &MattingConfig) -> Vec<usize> {
    let origin = EyeSide::Left.frame_origin();
    let shape: Vec<Point> = mean_shape().iter().map(|&p| p - origin).collect();
    let zone = canonical_zone_polygon(EyeSide::Left);
    let eye = eye_polygon(&shape, EyeSide::Left);
    let brow = brow_polygon(&shape, EyeSide::Left);
    let (lo, hi) = (config.ring_distance - config.ring_width / 2.0, config.ring_distance + config.ring_width / 2.0);
    let mut ring = Vec::new();
    for y in 0..EYE_FRAME_HEIGHT {
        for x in 0..EYE_FRAME_WIDTH {
            let p = Point::new(x as f64, y as f64);
            if point_in_polygon(&zone, p) || point_in_polygon(&eye, p) || point_in_polygon(&brow, p) {
                continue;
            }
            let d = boundary_distance(&zone, p);
            if d >= lo && d <= hi {
                ring.push(y * EYE_FRAME_WIDTH + x);
            }
        }
    }
    ring
}

fn weighted_mean(lab: &[LabColor], weights: impl Iterator<Item = (usize, f64)>) -> Option<LabColor> {
    let (mut s, mut acc) = (0.0, [0.0; 3]);
    for (i, w) in weights {
        let c = lab[i];
        acc[0] += w * c.l;
        acc[1] += w * c.a;
        acc[2] += w * c.b;
        s += w;
    }
    (s > 1e-9).then(|| LabColor::new(acc[0] / s, acc[1] / s, acc[2] / s))
}

/// Pixels whose `(2r+1)²` neighbourhood is fully opaque. Boundary pixels mix
/// shadow and skin, so the color estimate skips them.
fn opaque_core(alpha: &AlphaMatte, r: usize) -> Vec<usize> {
    let (w, h) = (alpha.width(), alpha.height());
    let mut core = Vec::new();
    for y in r..h.saturating_sub(r) {
        for x in r..w.saturating_sub(r) {
            let solid = (y - r..=y + r).all(|yy| (x - r..=x + r).all(|xx| alpha.get(xx, yy) >= 1.0));
            if solid {
                core.push(y * w + x);
            }
        }
    }
    core
}

/// Extract the left-eye shadow as a canonical-frame template.
///
/// The eye region is warped into the 192×128 frame; a window around the
/// zone (padded past the skin ring) is spectrally matted.
/// Components whose alpha-weighted centroid falls inside the zone polygon
/// and whose mean color differs in chroma from the skin ring by at least
/// the threshold are summed, clipped to the zone, and snapped to 8 bits.
/// The mean color is taken over the opaque interior of the final alpha.
pub fn extract_eyeshadow_template(
    image: &RgbImage,
    landmarks: &LandmarkSet,
    config: &MattingConfig,
    source_image_id: &str,
) -> Result<EyeShadowTemplate> {
    config.validate()?;
    let crop = eye_crop(image, landmarks, EyeSide::Left)?;
    let (w, h) = (EYE_FRAME_WIDTH, EYE_FRAME_HEIGHT);
    let lab: Vec<LabColor> = crop.data().chunks_exact(3).map(|p| srgb_unit_to_lab([p[0], p[1], p[2]])).collect();
    let ring = skin_ring(config);
    let skin = weighted_mean(&lab, ring.iter().map(|&i| (i, 1.0))).ok_or(Error::NoEyeShadow)?;

    let zone_poly = canonical_zone_polygon(EyeSide::Left);
    let zone_mask = canonical_zone_mask(EyeSide::Left, 0.0);
    let (x0, y0, ww, wh) = matting_window(&zone_poly, config);
    let window = ImageBuffer::from_fn(ww * 3, wh, |x, y| crop.get(x0 + x / 3, y0 + y, x % 3));
    let window = ImageBuffer::from_vec(ww, wh, 3, window.into_vec())?;
    let patch = downsample(&window, config.downsample);
    let comps = spectral_matting(&patch, config)?;

    let mut total = vec![0.0; w * h];
    let mut selected = 0;
    for comp in &comps {
        let local = upsample(comp, config.downsample, ww, wh);
        let mut alpha = vec![0.0; w * h];
        for y in 0..wh {
            alpha[(y0 + y) * w + x0..(y0 + y) * w + x0 + ww].copy_from_slice(&local[y * ww..(y + 1) * ww]);
        }
        let mass: f64 = alpha.iter().sum();
        if mass <= 1e-9 {
            continue;
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (i, a) in alpha.iter().enumerate() {
            cx += a * (i % w) as f64;
            cy += a * (i / w) as f64;
        }
        if !point_in_polygon(&zone_poly, Point::new(cx / mass, cy / mass)) {
            continue;
        }
        let mean = weighted_mean(&lab, alpha.iter().copied().enumerate()).expect("positive mass");
        if mean.chroma_distance(&skin) < config.chroma_threshold {
            continue;
        }
        selected += 1;
        total.iter_mut().zip(&alpha).for_each(|(t, a)| *t += a);
    }
    if selected == 0 {
        return Err(Error::NoEyeShadow);
    }
    let values: Vec<f64> = total.iter().zip(&zone_mask).map(|(t, z)| t.min(1.0) * z).collect();
    let alpha = AlphaMatte::from_vec(w, h, values)?.quantized();
    let core = opaque_core(&alpha, 2);
    let mean_color = weighted_mean(&lab, core.iter().map(|&i| (i, 1.0)))
        .or_else(|| weighted_mean(&lab, alpha.values().iter().copied().enumerate()))
        .ok_or(Error::NoEyeShadow)?;
    EyeShadowTemplate::new(0, alpha, mean_color, source_image_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_patch_single_component() {
        let patch = ImageBuffer::filled(8, 8, 3, 0.3);
        let cfg = MattingConfig { eigenvectors: 3, components: 1, ..Default::default() };
        let comps = spectral_matting(&patch, &cfg).unwrap();
        assert_eq!(comps.len(), 1);
        assert!(comps[0].values().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn two_tone_patch_splits_into_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (16, 12);
        let data: Vec<f64> = (0..w * h)
            .flat_map(|i| {
                let base = if i % w < w / 2 { 0.0 } else { 1.0 };
                let noise: f64 = rng.random_range(-0.01..0.01);
                [(base + noise).clamp(0.0, 1.0); 3]
            })
            .collect();
        let patch = ImageBuffer::from_vec(w, h, 3, data).unwrap();
        let cfg = MattingConfig { eigenvectors: 6, components: 2, ..Default::default() };
        let comps = spectral_matting(&patch, &cfg).unwrap();
        let left_is_zero = comps[0].get(0, 0) > 0.5;
        let agree = (0..w * h)
            .filter(|&i| {
                let truth_first = (i % w < w / 2) == left_is_zero;
                (comps[0].values()[i] > 0.5) == truth_first
            })
            .count();
        assert!(agree as f64 >= 0.95 * (w * h) as f64, "{agree}");
        for i in 0..w * h {
            let s: f64 = comps.iter().map(|c| c.values()[i]).sum();
            assert!((s - 1.0).abs() <= 0.05);
        }
    }

    #[test]
    fn component_count_is_checked() {
        let eig =
            EigenPairs { values: vec![0.0, 0.1], vectors: vec![vec![0.5; 4]; 2], iterations: 1, max_residual: 0.0 };
        let cfg = MattingConfig::default();
        assert!(matting_components(&eig, 2, 2, 3, 0, &cfg).is_err());
        assert!(matting_components(&eig, 2, 3, 1, 0, &cfg).is_err());
    }

    #[test]
    fn template_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let alpha = AlphaMatte::from_fn(EYE_FRAME_WIDTH, EYE_FRAME_HEIGHT, |x, y| ((x + y) % 256) as f64 / 255.0);
        let t = EyeShadowTemplate::new(7, alpha, LabColor::new(40.125, 22.5, -13.0625), "refs/a b.png").unwrap();
        t.save(dir.path()).unwrap();
        let back = EyeShadowTemplate::load(dir.path(), 7).unwrap();
        assert_eq!(back, t);
        std::fs::write(EyeShadowTemplate::meta_path(dir.path(), 7), "schema 9\nid 7\n").unwrap();
        assert!(matches!(EyeShadowTemplate::load(dir.path(), 7), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(MattingConfig::default().validate().is_ok());
        assert!(MattingConfig { components: 11, ..Default::default() }.validate().is_err());
        assert!(MattingConfig { downsample: 5, ..Default::default() }.validate().is_err());
        assert!(MattingConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
    }

    fn iou(a: &AlphaMatte, b: &AlphaMatte) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (x, y) in a.values().iter().zip(b.values()) {
            let (p, q) = (*x >= 0.5, *y >= 0.5);
            inter += (p && q) as usize;
            union += (p || q) as usize;
        }
        inter as f64 / union.max(1) as f64
    }

    #[test]
    fn painted_zone_is_recovered() {
        use crate::synthetic::{posed_landmarks, render_face, FaceStyle, Pose, ShadowShape};
        let lm = posed_landmarks(&Pose::default()).unwrap();
        for shape in ShadowShape::ALL {
            let color = LabColor::new(45.0, 35.0, -40.0);
            let style = FaceStyle { eyeshadow: Some((shape, color)), ..FaceStyle::default() };
            let img = render_face(&lm, &style).unwrap();
            let t = extract_eyeshadow_template(&img, &lm, &MattingConfig::default(), "synthetic").unwrap();
            let score = iou(&t.alpha, &shape.canonical_alpha());
            let de = t.mean_color.distance(&color);
            println!("{shape:?} iou {score:.3} dE {de:.2}");
            assert!(score >= 0.7, "{shape:?} iou {score}");
            assert!(de <= 5.0, "{shape:?} dE {de}");
        }
    }

    #[test]
    fn bare_face_has_no_eye_shadow() {
        use crate::synthetic::{posed_landmarks, render_face, FaceStyle, Pose};
        let lm = posed_landmarks(&Pose::default()).unwrap();
        let img = render_face(&lm, &FaceStyle::default()).unwrap();
        assert!(matches!(
            extract_eyeshadow_template(&img, &lm, &MattingConfig::default(), "bare"),
            Err(Error::NoEyeShadow)
        ));
    }
}
