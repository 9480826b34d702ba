use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    align_face, centroid, LandmarkSet, Point, LANDMARK_COUNT, LEFT_BROW, LEFT_EYE, RIGHT_BROW, RIGHT_EYE,
};
use crate::imageops::{srgb_unit_to_lab, ImageBuffer};

pub const FEATURE_DIM: usize = 24;
pub const GEOMETRIC_FEATURES: usize = 18;
pub const SHAPE_SECTORS: usize = 8;

/// Forehead patch in the canonical frame, inclusive pixel bounds.
pub const FOREHEAD_PATCH: (Point, Point) = (Point::new(216.0, 120.0), Point::new(296.0, 160.0));

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "face_aspect",
    "jaw_width_ratio",
    "eye_aspect",
    "interocular_face_width",
    "brow_eye_left",
    "brow_eye_right",
    "lip_fullness",
    "lip_width_ratio",
    "nose_width",
    "nose_length",
    "sector_0",
    "sector_1",
    "sector_2",
    "sector_3",
    "sector_4",
    "sector_5",
    "sector_6",
    "sector_7",
    "skin_l_mean",
    "skin_a_mean",
    "skin_b_mean",
    "skin_l_std",
    "skin_a_std",
    "skin_b_std",
];

/// Raw (unstandardized) descriptor of a face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// False when the forehead patch fell outside the image; the skin-tone
    /// entries are then placeholders replaced by the standardization mean.
    pub skin_valid: bool,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, skin_valid: true }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Geometric descriptors from landmarks already in the canonical frame.
pub fn geometric_features(p: &[Point]) -> [f64; GEOMETRIC_FEATURES] {
    let iod = centroid(&p[LEFT_EYE]).distance(centroid(&p[RIGHT_EYE]));
    let face_width = p[0].distance(p[16]);
    let brow_line = 0.5 * (centroid(&p[LEFT_BROW]).y + centroid(&p[RIGHT_BROW]).y);
    let eye_aspect =
        |a: usize| (p[a + 1].distance(p[a + 5]) + p[a + 2].distance(p[a + 4])) / (2.0 * p[a].distance(p[a + 3]));
    let lip_width = p[48].distance(p[54]);

    let mut f = [0.0; GEOMETRIC_FEATURES];
    f[0] = (p[8].y - brow_line) / face_width;
    f[1] = p[4].distance(p[12]) / face_width;
    f[2] = 0.5 * (eye_aspect(36) + eye_aspect(42));
    f[3] = iod / face_width;
    f[4] = centroid(&p[LEFT_EYE]).distance(centroid(&p[LEFT_BROW])) / iod;
    f[5] = centroid(&p[RIGHT_EYE]).distance(centroid(&p[RIGHT_BROW])) / iod;
    f[6] = p[51].distance(p[57]) / lip_width;
    f[7] = lip_width / face_width;
    f[8] = p[31].distance(p[35]) / iod;
    f[9] = p[27].distance(p[33]) / iod;

    // Mean landmark radius per 45° sector around the landmark centroid.
    let c = centroid(p);
    let mut sums = [0.0; SHAPE_SECTORS];
    let mut counts = [0usize; SHAPE_SECTORS];
    for &q in p {
        let d = q - c;
        let angle = d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU);
        let k = ((angle / std::f64::consts::TAU * SHAPE_SECTORS as f64) as usize).min(SHAPE_SECTORS - 1);
        sums[k] += d.norm();
        counts[k] += 1;
    }
    for k in 0..SHAPE_SECTORS {
        f[10 + k] = if counts[k] > 0 { sums[k] / counts[k] as f64 / iod } else { 0.0 };
    }
    f
}

/// Lab mean and standard deviation over the forehead patch, or `None` when
/// any patch sample maps outside the image.
pub fn forehead_stats(image: &RgbImage, landmarks: &LandmarkSet) -> Result<Option<[f64; 6]>> {
    let to_image = align_face(landmarks)?.inverse();
    let img = ImageBuffer::from_rgb8(image);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (lo, hi) = FOREHEAD_PATCH;
    let mut samples = Vec::new();
    let mut y = lo.y;
    while y <= hi.y {
        let mut x = lo.x;
        while x <= hi.x {
            let q = to_image.apply(Point::new(x, y));
            if q.x < 0.0 || q.y < 0.0 || q.x > w - 1.0 || q.y > h - 1.0 {
                return Ok(None);
            }
            let rgb = [0, 1, 2].map(|c| img.sample_bilinear(q.x, q.y, c));
            samples.push(srgb_unit_to_lab(rgb).to_array());
            x += 1.0;
        }
        y += 1.0;
    }
    let n = samples.len() as f64;
    let mut out = [0.0; 6];
    for s in &samples {
        for c in 0..3 {
            out[c] += s[c] / n;
        }
    }
    for s in &samples {
        for c in 0..3 {
            out[3 + c] += (s[c] - out[c]).powi(2) / n;
        }
    }
    for v in &mut out[3..] {
        *v = v.sqrt();
    }
    Ok(Some(out))
}

pub fn extract_features(image: &RgbImage, landmarks: &LandmarkSet) -> Result<FeatureVector> {
    if (image.width() as usize, image.height() as usize) != (landmarks.width(), landmarks.height()) {
        return Err(Error::dims(
            format!("{}x{} image", landmarks.width(), landmarks.height()),
            format!("{}x{}", image.width(), image.height()),
        ));
    }
    let t = align_face(landmarks)?;
    let canonical: Vec<Point> = landmarks.points().iter().map(|&q| t.apply(q)).collect();
    debug_assert_eq!(canonical.len(), LANDMARK_COUNT);
    let mut values = geometric_features(&canonical).to_vec();
    let skin = forehead_stats(image, landmarks)?;
    values.extend(skin.unwrap_or([0.0; 6]));
    Ok(FeatureVector { values, skin_valid: skin.is_some() })
}

/// Per-component mean and standard deviation from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Skin-tone entries of vectors flagged invalid are left out of their statistics.
    /// Components with (near-)zero spread get unit std.
    pub fn fit(samples: &[FeatureVector]) -> Result<Self> {
        let dim = samples.first().map(FeatureVector::len).ok_or(Error::TooFewSamples { needed: 1, available: 0 })?;
        if let Some(s) = samples.iter().find(|s| s.len() != dim) {
            return Err(Error::dims(format!("{dim} features"), format!("{}", s.len())));
        }
        let skin_start = if dim == FEATURE_DIM { GEOMETRIC_FEATURES } else { dim };
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for j in 0..dim {
            let vals: Vec<f64> =
                samples.iter().filter(|s| j < skin_start || s.skin_valid).map(|s| s.values[j]).collect();
            if vals.is_empty() {
                std[j] = 1.0;
                continue;
            }
            let n = vals.len() as f64;
            mean[j] = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
            std[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::dims(format!("{} features", self.dim()), format!("{}", x.len())));
        }
        let skin_start = if self.dim() == FEATURE_DIM { GEOMETRIC_FEATURES } else { self.dim() };
        Ok((0..self.dim())
            .map(|j| if j >= skin_start && !x.skin_valid { 0.0 } else { (x.values[j] - self.mean[j]) / self.std[j] })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{mean_landmarks, mean_shape, SimilarityTransform};
    use crate::synthetic::{posed_landmarks, render_face, FaceStyle, Pose};

    #[test]
    fn geometry_is_similarity_invariant() {
        let base = posed_landmarks(&Pose { jitter: 2.0, seed: 4, ..Pose::default() }).unwrap();
        let img = RgbImage::new(base.width() as u32, base.height() as u32);
        let f0 = extract_features(&img, &base).unwrap();
        for (s, r, tx, ty) in [(0.8, 0.2, 20.0, -10.0), (1.1, -0.15, -15.0, 12.0)] {
            let t = SimilarityTransform::new(s, r, Point::new(tx, ty)).unwrap();
            let c = Point::new(192.0, 192.0);
            let pts: Vec<Point> =
                base.points().iter().map(|&p| t.apply(p - c) - t.apply(Point::default()) + c).collect();
            let lm = LandmarkSet::new(base.width(), base.height(), 1.0, pts).unwrap();
            let f = extract_features(&img, &lm).unwrap();
            for j in 0..GEOMETRIC_FEATURES {
                assert!((f.values[j] - f0.values[j]).abs() < 1e-6, "feature {j}");
            }
        }
    }

    #[test]
    fn symmetric_face_has_equal_paired_ratios() {
        let f = geometric_features(mean_shape());
        assert!((f[4] - f[5]).abs() < 1e-12);
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rectangle_face_lip_ratio() {
        // Rectangle-ish face: jaw corners 300 px apart, lip corners 126 px apart.
        let mut pts: Vec<Point> = mean_shape().to_vec();
        pts[0] = Point::new(106.0, 200.0);
        pts[16] = Point::new(406.0, 200.0);
        pts[48] = Point::new(193.0, 390.0);
        pts[54] = Point::new(319.0, 390.0);
        let lm = LandmarkSet::new(512, 512, 1.0, pts).unwrap();
        let img = RgbImage::new(512, 512);
        let f = extract_features(&img, &lm).unwrap();
        assert!((f.values[7] - 0.42).abs() < 1e-6);
    }

    #[test]
    fn forehead_stats_match_rendered_skin() {
        let lm = posed_landmarks(&Pose::default()).unwrap();
        let style = FaceStyle { noise: 0.0, ..FaceStyle::default() };
        let img = render_face(&lm, &style).unwrap();
        let f = extract_features(&img, &lm).unwrap();
        assert!(f.skin_valid);
        let skin = style.skin;
        assert!((f.values[18] - skin.l).abs() < 0.5);
        assert!((f.values[19] - skin.a).abs() < 0.5);
        assert!((f.values[20] - skin.b).abs() < 0.5);
        assert!(f.values[21] < 0.5);
    }

    #[test]
    fn cropped_forehead_is_flagged() {
        let lm = mean_landmarks();
        let shifted: Vec<Point> = lm.points().iter().map(|&p| p - Point::new(0.0, 150.0)).collect();
        let lm = LandmarkSet::new(512, 512, 1.0, shifted).unwrap();
        let f = extract_features(&RgbImage::new(512, 512), &lm).unwrap();
        assert!(!f.skin_valid);
        let st = Standardizer { mean: vec![1.0; FEATURE_DIM], std: vec![2.0; FEATURE_DIM] };
        let z = st.apply(&f).unwrap();
        assert!(z[GEOMETRIC_FEATURES..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardizer_fit() {
        let xs = vec![FeatureVector::new(vec![1.0, 5.0]), FeatureVector::new(vec![3.0, 5.0])];
        let st = Standardizer::fit(&xs).unwrap();
        assert_eq!(st.mean, vec![2.0, 5.0]);
        assert_eq!(st.std, vec![1.0, 1.0]);
        assert_eq!(st.apply(&xs[0]).unwrap(), vec![-1.0, 0.0]);
    }
}
