//! Procedural face renderer used for fixtures, demos and benchmarks.
//!
//! Faces are flat-shaded polygons over the mean landmark shape, with an
//! optional painted eye-shadow look whose ground-truth alpha is known in the
//! canonical eye frame.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{manifest_text, FilterThresholds, ManifestEntry, RejectReason};
use crate::error::{Error, Result};
use crate::geometry::{
    brow_polygon, canonical_eye_mesh, canonical_zone_mask, canonical_zone_polygon, centroid, eye_polygon,
    face_eye_mesh, face_polygon, mean_shape, point_in_polygon, polygon_mask, warp_alpha, EyeSide, LandmarkSet, Point,
    EYE_FRAME_HEIGHT, EYE_FRAME_WIDTH, INNER_LIP, LEFT_EYE, NOSE_BRIDGE_TOP, OUTER_LIP, RIGHT_EYE,
};
use crate::imageops::{lab_to_srgb_unit, quantize_unit, write_rgb8, AlphaMatte, LabColor};
use crate::io::write_atomic;
use crate::matting::EyeShadowTemplate;
use crate::recommender::{FeatureVector, MakeupLabel, TrainingExample};
use crate::synthesis::{Intensities, MakeupSpec};

/// Eye-shadow coverage patterns, defined inside the canonical zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowShape {
    FullZone,
    /// The half of the zone towards the outer eye corner.
    OuterHalf,
    /// The half of the zone nearest the lid.
    LidBand,
}

impl ShadowShape {
    pub const ALL: [ShadowShape; 3] = [ShadowShape::FullZone, ShadowShape::OuterHalf, ShadowShape::LidBand];

    /// Binary alpha in the canonical left-eye frame.
    pub fn canonical_alpha(self) -> AlphaMatte {
        let (w, h) = (EYE_FRAME_WIDTH, EYE_FRAME_HEIGHT);
        let zone = canonical_zone_mask(EyeSide::Left, 0.0);
        let poly = canonical_zone_polygon(EyeSide::Left);
        let keep: Vec<f64> = match self {
            ShadowShape::FullZone => vec![1.0; w * h],
            ShadowShape::OuterHalf => {
                let cx = centroid(&poly).x;
                (0..w * h).map(|i| if ((i % w) as f64) < cx { 1.0 } else { 0.0 }).collect()
            }
            ShadowShape::LidBand => {
                // The zone polygon lists the lid, then the lifted lid in reverse.
                let n = poly.len() / 2;
                let mut band: Vec<Point> = poly[..n].to_vec();
                for i in (0..n).rev() {
                    let lid = poly[i];
                    let top = poly[poly.len() - 1 - i];
                    band.push(lid + (top - lid) * 0.5);
                }
                polygon_mask(&band, w, h, 0.0)
            }
        };
        AlphaMatte::from_vec(w, h, zone.iter().zip(&keep).map(|(z, k)| z * k).collect()).expect("sized")
    }
}

/// Colors and noise for one rendered face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceStyle {
    pub skin: LabColor,
    pub lip: LabColor,
    pub eyeshadow: Option<(ShadowShape, LabColor)>,
    pub background: LabColor,
    /// Per-channel Gaussian noise in 8-bit units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FaceStyle {
    fn default() -> Self {
        Self {
            skin: LabColor::new(70.0, 12.0, 18.0),
            lip: LabColor::new(52.0, 30.0, 14.0),
            eyeshadow: None,
            background: LabColor::new(45.0, -4.0, -12.0),
            noise: 1.5,
            seed: 0,
        }
    }
}

/// A complete makeup look as painted by the renderer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Look {
    pub shape: ShadowShape,
    pub eyeshadow: LabColor,
    pub lip: LabColor,
    pub foundation: LabColor,
}

impl Look {
    /// Three well-separated looks used by the fixture sets.
    pub fn presets() -> [Look; 3] {
        [
            Look {
                shape: ShadowShape::FullZone,
                eyeshadow: LabColor::new(45.0, 35.0, -40.0),
                lip: LabColor::new(45.0, 55.0, 25.0),
                foundation: LabColor::new(72.0, 10.0, 16.0),
            },
            Look {
                shape: ShadowShape::OuterHalf,
                eyeshadow: LabColor::new(50.0, -30.0, 10.0),
                lip: LabColor::new(55.0, 40.0, 5.0),
                foundation: LabColor::new(62.0, 14.0, 24.0),
            },
            Look {
                shape: ShadowShape::LidBand,
                eyeshadow: LabColor::new(48.0, 20.0, 45.0),
                lip: LabColor::new(38.0, 45.0, 30.0),
                foundation: LabColor::new(80.0, 6.0, 12.0),
            },
        ]
    }

    pub fn style(&self, noise: f64, seed: u64) -> FaceStyle {
        FaceStyle {
            skin: self.foundation,
            lip: self.lip,
            eyeshadow: Some((self.shape, self.eyeshadow)),
            noise,
            seed,
            ..FaceStyle::default()
        }
    }
}

/// Pose of a synthetic face inside its image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub width: usize,
    pub height: usize,
    /// Scale relative to the canonical 512-px frame.
    pub scale: f64,
    pub rotation_deg: f64,
    /// Image position of the canonical frame center.
    pub center: Point,
    /// Uniform per-coordinate landmark perturbation in pixels.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for Pose {
    fn default() -> Self {
        Self {
            width: 384,
            height: 384,
            scale: 0.75,
            rotation_deg: 0.0,
            center: Point::new(192.0, 184.0),
            jitter: 0.0,
            seed: 0,
        }
    }
}

/// Mean shape posed into an image.
pub fn posed_landmarks(pose: &Pose) -> Result<LandmarkSet> {
    if !(pose.scale > 0.0) {
        return Err(Error::InvalidParameter("pose scale must be > 0".into()));
    }
    let (s, c) = pose.rotation_deg.to_radians().sin_cos();
    let mut rng = ChaCha8Rng::seed_from_u64(pose.seed);
    let points = mean_shape()
        .iter()
        .map(|&p| {
            let d = (p - Point::new(256.0, 256.0)) * pose.scale;
            let mut q = pose.center + Point::new(c * d.x - s * d.y, s * d.x + c * d.y);
            if pose.jitter > 0.0 {
                q.x += rng.random_range(-pose.jitter..=pose.jitter);
                q.y += rng.random_range(-pose.jitter..=pose.jitter);
            }
            q
        })
        .collect();
    LandmarkSet::new(pose.width, pose.height, 0.95, points)
}

/// Ground-truth eye-shadow alpha of a rendered face at image resolution.
pub fn painted_alpha(landmarks: &LandmarkSet, shape: ShadowShape) -> Result<AlphaMatte> {
    let (w, h) = (landmarks.width(), landmarks.height());
    let left = shape.canonical_alpha();
    let right = left.mirrored();
    let a = warp_alpha(&left, canonical_eye_mesh(EyeSide::Left), &face_eye_mesh(landmarks, EyeSide::Left)?, w, h)?;
    let b = warp_alpha(&right, canonical_eye_mesh(EyeSide::Right), &face_eye_mesh(landmarks, EyeSide::Right)?, w, h)?;
    AlphaMatte::from_vec(w, h, a.values().iter().zip(b.values()).map(|(x, y)| x.max(*y)).collect())
}

fn mix(a: LabColor, b: LabColor, t: f64) -> LabColor {
    LabColor::new(a.l + (b.l - a.l) * t, a.a + (b.a - a.a) * t, a.b + (b.b - a.b) * t)
}

pub fn render_face(landmarks: &LandmarkSet, style: &FaceStyle) -> Result<RgbImage> {
    let (w, h) = (landmarks.width(), landmarks.height());
    let pts = landmarks.points();
    let mut lab = vec![style.background; w * h];
    let paint = |lab: &mut Vec<LabColor>, mask: &[f64], color: LabColor| {
        for (px, &m) in lab.iter_mut().zip(mask) {
            if m > 0.0 {
                *px = mix(*px, color, m);
            }
        }
    };
    paint(&mut lab, &polygon_mask(&face_polygon(pts), w, h, 0.0), style.skin);
    if let Some((shape, color)) = style.eyeshadow {
        paint(&mut lab, painted_alpha(landmarks, shape)?.values(), color);
    }
    let brow = LabColor::new(28.0, 8.0, 14.0);
    for side in [EyeSide::Left, EyeSide::Right] {
        paint(&mut lab, &polygon_mask(&brow_polygon(pts, side), w, h, 0.0), brow);
    }
    let sclera = LabColor::new(88.0, 0.0, 2.0);
    let iris = LabColor::new(30.0, 6.0, 12.0);
    for (side, range) in [(EyeSide::Left, LEFT_EYE), (EyeSide::Right, RIGHT_EYE)] {
        let poly = eye_polygon(pts, side);
        paint(&mut lab, &polygon_mask(&poly, w, h, 0.0), sclera);
        let c = centroid(&pts[range.clone()]);
        let radius = 0.45 * (pts[range.start + 4].y - pts[range.start + 2].y).abs().max(1.0);
        for (i, px) in lab.iter_mut().enumerate() {
            let p = Point::new((i % w) as f64, (i / w) as f64);
            if p.distance(c) <= radius && point_in_polygon(&poly, p) {
                *px = iris;
            }
        }
    }
    paint(&mut lab, &polygon_mask(&pts[OUTER_LIP], w, h, 0.0), style.lip);
    paint(&mut lab, &polygon_mask(&pts[INNER_LIP], w, h, 0.0), LabColor::new(22.0, 12.0, 6.0));

    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    let noise = if style.noise > 0.0 {
        Some(Normal::new(0.0, style.noise / 255.0).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let mut raw = Vec::with_capacity(w * h * 3);
    for c in lab {
        for v in lab_to_srgb_unit(c) {
            let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
            raw.push(quantize_unit(v + n));
        }
    }
    Ok(RgbImage::from_raw(w as u32, h as u32, raw).expect("sized"))
}

/// The face shipped with the CLI demo and used as the golden synthesis fixture.
pub fn sample_face() -> (RgbImage, LandmarkSet) {
    let pose = Pose { rotation_deg: 4.0, jitter: 1.5, seed: 7, ..Pose::default() };
    let landmarks = posed_landmarks(&pose).expect("sample pose is valid");
    let style = FaceStyle { noise: 3.0, seed: 11, ..FaceStyle::default() };
    let image = render_face(&landmarks, &style).expect("sample face renders");
    (image, landmarks)
}

/// Faces painted with the preset looks in rotation: face `i` wears look `i % 3`.
pub fn look_faces(count: usize, seed: u64) -> Result<Vec<(RgbImage, LandmarkSet, Look)>> {
    let looks = Look::presets();
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let pose = Pose {
                scale: rng.random_range(0.7..0.8),
                rotation_deg: rng.random_range(-6.0..6.0),
                center: Point::new(rng.random_range(186.0..198.0), rng.random_range(178.0..190.0)),
                jitter: 1.0,
                seed: rng.random(),
                ..Pose::default()
            };
            let lm = posed_landmarks(&pose)?;
            let look = looks[i % looks.len()];
            let img = render_face(&lm, &look.style(1.5, rng.random()))?;
            Ok((img, lm, look))
        })
        .collect()
}

/// Write `count` look faces as PNG + landmark files plus `manifest.jsonl`
/// into `dir`; returns the manifest path.
pub fn write_look_set(dir: &Path, count: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(count);
    for (i, (img, lm, _)) in look_faces(count, seed)?.into_iter().enumerate() {
        let id = format!("face_{i:02}");
        write_rgb8(&dir.join(format!("{id}.png")), &img)?;
        lm.save(&dir.join(format!("{id}.pts")))?;
        entries.push(ManifestEntry {
            id: id.clone(),
            image: PathBuf::from(format!("{id}.png")),
            landmarks: PathBuf::from(format!("{id}.pts")),
            detector_confidence: 0.97,
            landmark_confidence: lm.confidence(),
            width: lm.width(),
            height: lm.height(),
        });
    }
    let path = dir.join("manifest.jsonl");
    write_atomic(&path, manifest_text(&entries).as_bytes())?;
    Ok(path)
}

/// A manifest with known violations and the outcome each entry must get.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedManifest {
    pub entries: Vec<ManifestEntry>,
    pub expected: Vec<Option<RejectReason>>,
    pub thresholds: FilterThresholds,
}

/// `plants[j]` entries violate only rule `RejectReason::ALL[j]`; the rest
/// are valid. Landmark files are written into `dir`; images are not.
pub fn planted_manifest(dir: &Path, total: usize, plants: &[usize], seed: u64) -> Result<PlantedManifest> {
    if plants.len() > RejectReason::ALL.len() || plants.iter().sum::<usize>() > total {
        return Err(Error::InvalidParameter("more plants than entries or rules".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut expected: Vec<Option<RejectReason>> = vec![None; total];
    let mut slot = 0;
    for (reason, &n) in RejectReason::ALL.iter().zip(plants) {
        for _ in 0..n {
            expected[slot] = Some(*reason);
            slot += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expected.shuffle(&mut rng);
    let mut allow = HashSet::new();
    let mut entries = Vec::with_capacity(total);
    for (i, plant) in expected.iter().enumerate() {
        let id = format!("img_{i:03}");
        let pose = Pose {
            scale: if *plant == Some(RejectReason::LowResolution) {
                rng.random_range(0.2..0.3)
            } else {
                rng.random_range(0.7..0.8)
            },
            rotation_deg: rng.random_range(-8.0..8.0),
            jitter: 0.5,
            seed: rng.random(),
            ..Pose::default()
        };
        let mut lm = posed_landmarks(&pose)?;
        if *plant == Some(RejectReason::NonFrontal) {
            // Slide the nose bridge towards one eye, as a turned head would.
            let shift = (lm.right_eye_centroid() - lm.left_eye_centroid()) * rng.random_range(0.2..0.3);
            let mut pts = lm.points().to_vec();
            pts[NOSE_BRIDGE_TOP] = pts[NOSE_BRIDGE_TOP] + shift;
            lm = LandmarkSet::new(lm.width(), lm.height(), lm.confidence(), pts)?;
        }
        let lm_path = dir.join(format!("{id}.pts"));
        if *plant != Some(RejectReason::Io) {
            lm.save(&lm_path)?;
        }
        if *plant != Some(RejectReason::NotAllowlisted) {
            allow.insert(id.clone());
        }
        let low = |rng: &mut ChaCha8Rng| rng.random_range(0.05..0.75);
        let high = |rng: &mut ChaCha8Rng| rng.random_range(0.85..1.0);
        let detector_confidence =
            if *plant == Some(RejectReason::LowDetectorConfidence) { low(&mut rng) } else { high(&mut rng) };
        let landmark_confidence =
            if *plant == Some(RejectReason::LowLandmarkConfidence) { low(&mut rng) } else { high(&mut rng) };
        entries.push(ManifestEntry {
            id: id.clone(),
            image: dir.join(format!("{id}.png")),
            landmarks: lm_path,
            detector_confidence,
            landmark_confidence,
            width: lm.width(),
            height: lm.height(),
        });
    }
    Ok(PlantedManifest {
        entries,
        expected,
        thresholds: FilterThresholds { allowlist: Some(allow), ..FilterThresholds::default() },
    })
}

/// Spec rendered onto [`sample_face`] for the golden-image fixture.
pub fn sample_spec(intensities: Intensities) -> MakeupSpec {
    let look = Look::presets()[0];
    let template = EyeShadowTemplate::new(0, look.shape.canonical_alpha(), look.eyeshadow, "sample")
        .expect("preset template is valid");
    MakeupSpec {
        template,
        eyeshadow_color: look.eyeshadow,
        lip_color: look.lip,
        foundation_color: look.foundation,
        intensities,
    }
}

/// Label-space sizes for [`separable_fixture`].
pub const SEPARABLE_LABELS: [usize; 4] = [3, 2, 2, 2];
/// Latent factors for [`separable_fixture`].
pub const SEPARABLE_LATENT: [usize; 2] = [3, 3];

/// Eight 4-d feature prototypes, each tied to a distinct label.
pub fn separable_fixture() -> Vec<TrainingExample> {
    (0..8)
        .map(|i| {
            let mut v = vec![0.0; 4];
            v[i % 4] = if i < 4 { 1.0 } else { -1.0 };
            TrainingExample {
                features: FeatureVector::new(v),
                label: MakeupLabel::new(i % 3, i % 2, (i / 2) % 2, i / 4),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_are_distinct_and_inside_zone() {
        let zone = canonical_zone_mask(EyeSide::Left, 0.0);
        let full = ShadowShape::FullZone.canonical_alpha();
        for s in ShadowShape::ALL {
            let a = s.canonical_alpha();
            assert!(a.sum() > 100.0);
            assert!(a.values().iter().zip(&zone).all(|(v, z)| *v <= *z));
            if s != ShadowShape::FullZone {
                assert!(a.sum() < 0.8 * full.sum());
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let (a, la) = sample_face();
        let (b, lb) = sample_face();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert!(la.interocular() > 100.0);
    }

    #[test]
    fn painted_alpha_sits_in_the_zones() {
        let lm = posed_landmarks(&Pose::default()).unwrap();
        let alpha = painted_alpha(&lm, ShadowShape::FullZone).unwrap();
        let masks = crate::geometry::region_masks(&lm, lm.width(), lm.height(), 0.0).unwrap();
        let mut inside = 0.0;
        for (i, a) in alpha.values().iter().enumerate() {
            let z = masks.left_eye_shadow_zone.as_raw()[i].max(masks.right_eye_shadow_zone.as_raw()[i]);
            if z > 0 {
                inside += a;
            }
        }
        assert!(inside >= 0.9 * alpha.sum());
    }
}
