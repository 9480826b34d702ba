//! Manifest filtering, knowledge-base construction and the on-disk makeup DB.
//!
//! DB layout under a directory:
//!
//! ```text
//! version                 "vanity-db <schema>"
//! palettes.foundation     Palette text records
//! palettes.eyeshadow
//! palettes.lip
//! templates/<id>.png      8-bit alpha in the canonical left-eye frame
//! templates/<id>.meta
//! annotations.jsonl       {"schema":1} header, then one JSON record per image
//! ```

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::colormodel::{build_palette, quantize, Palette, ProductClass};
use crate::error::{Error, Result};
use crate::geometry::{
    centroid, region_masks, EyeSide, LandmarkSet, DEFAULT_FEATHER, LEFT_EYE, NOSE_BRIDGE_TOP, RIGHT_EYE,
};
use crate::imageops::{read_rgb8, srgb_to_lab, AlphaMatte, LabColor};
use crate::io::{read_text, write_atomic};
use crate::matting::{extract_eyeshadow_template, EyeShadowTemplate, MattingConfig};
use crate::recommender::{extract_features, FeatureVector, LabelSpace, MakeupLabel, TrainingExample};
use crate::synthesis::{Intensities, MakeupSpec};

pub const DB_SCHEMA_VERSION: u32 = 1;
const DB_MAGIC: &str = "vanity-db";

/// One candidate image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Defaults to the image file stem.
    #[serde(default)]
    pub id: String,
    pub image: PathBuf,
    pub landmarks: PathBuf,
    pub detector_confidence: f64,
    pub landmark_confidence: f64,
    pub width: usize,
    pub height: usize,
}

impl ManifestEntry {
    pub fn validate(&self) -> Result<()> {
        if self.image.as_os_str().is_empty() || self.landmarks.as_os_str().is_empty() {
            return Err(Error::InvalidParameter("manifest paths must be non-empty".into()));
        }
        for (name, c) in [("detector", self.detector_confidence), ("landmark", self.landmark_confidence)] {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidParameter(format!("{name} confidence must be in [0, 1], got {c}")));
            }
        }
        if self.id.is_empty() || self.id.contains('\n') {
            return Err(Error::InvalidParameter("manifest id must be a non-empty single line".into()));
        }
        Ok(())
    }

    fn with_defaults(mut self, base: &Path) -> Self {
        if self.id.is_empty() {
            self.id = self.image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        if self.image.is_relative() {
            self.image = base.join(&self.image);
        }
        if self.landmarks.is_relative() {
            self.landmarks = base.join(&self.landmarks);
        }
        self
    }
}

/// Parse JSON-lines manifest text; relative paths resolve against `base`.
pub fn parse_manifest(text: &str, base: &Path, path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        let entry = entry.with_defaults(base);
        entry.validate().map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new(""));
    parse_manifest(&read_text(path)?, base, path)
}

pub fn manifest_text(entries: &[ManifestEntry]) -> String {
    entries.iter().map(|e| serde_json::to_string(e).expect("manifest entries serialize") + "\n").collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    pub min_detector_confidence: f64,
    pub min_landmark_confidence: f64,
    /// Minimum longest side of the landmark bounding box.
    pub min_face_box: f64,
    pub min_interocular: f64,
    /// Minimum `min/max` of the two eye-to-nose-bridge distances.
    pub min_frontality: f64,
    /// Manual curation list of accepted ids; `None` accepts all.
    pub allowlist: Option<HashSet<String>>,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            min_detector_confidence: 0.8,
            min_landmark_confidence: 0.8,
            min_face_box: 200.0,
            min_interocular: 60.0,
            min_frontality: 0.85,
            allowlist: None,
        }
    }
}

/// Rejection rules in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RejectReason {
    #[serde(rename = "low detector confidence")]
    LowDetectorConfidence,
    #[serde(rename = "low landmark confidence")]
    LowLandmarkConfidence,
    #[serde(rename = "io")]
    Io,
    #[serde(rename = "low resolution")]
    LowResolution,
    #[serde(rename = "non-frontal pose")]
    NonFrontal,
    #[serde(rename = "not in allowlist")]
    NotAllowlisted,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        RejectReason::LowDetectorConfidence,
        RejectReason::LowLandmarkConfidence,
        RejectReason::Io,
        RejectReason::LowResolution,
        RejectReason::NonFrontal,
        RejectReason::NotAllowlisted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::LowDetectorConfidence => "low detector confidence",
            RejectReason::LowLandmarkConfidence => "low landmark confidence",
            RejectReason::Io => "io",
            RejectReason::LowResolution => "low resolution",
            RejectReason::NonFrontal => "non-frontal pose",
            RejectReason::NotAllowlisted => "not in allowlist",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Longest side of the landmark bounding box.
pub fn face_box(landmarks: &LandmarkSet) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in landmarks.points() {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    (x1 - x0).max(y1 - y0)
}

/// `min/max` of the left and right eye-centroid distances to the nose bridge.
pub fn frontality(landmarks: &LandmarkSet) -> f64 {
    let bridge = landmarks.point(NOSE_BRIDGE_TOP);
    let l = centroid(landmarks.contour(LEFT_EYE)).distance(bridge);
    let r = centroid(landmarks.contour(RIGHT_EYE)).distance(bridge);
    if l.max(r) == 0.0 {
        return 0.0;
    }
    l.min(r) / l.max(r)
}

/// First failed rule for one entry, or `None` when it is accepted.
pub fn check_entry(entry: &ManifestEntry, t: &FilterThresholds) -> Option<RejectReason> {
    if entry.detector_confidence < t.min_detector_confidence {
        return Some(RejectReason::LowDetectorConfidence);
    }
    if entry.landmark_confidence < t.min_landmark_confidence {
        return Some(RejectReason::LowLandmarkConfidence);
    }
    let lm = match LandmarkSet::load(&entry.landmarks) {
        Ok(lm) if (lm.width(), lm.height()) == (entry.width, entry.height) => lm,
        _ => return Some(RejectReason::Io),
    };
    if face_box(&lm) < t.min_face_box || lm.interocular() < t.min_interocular {
        return Some(RejectReason::LowResolution);
    }
    if frontality(&lm) < t.min_frontality {
        return Some(RejectReason::NonFrontal);
    }
    if let Some(allow) = &t.allowlist {
        if !allow.contains(&entry.id) {
            return Some(RejectReason::NotAllowlisted);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub entry: ManifestEntry,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub accepted: Vec<ManifestEntry>,
    pub rejected: Vec<Rejection>,
}

impl FilterOutcome {
    /// Rejection counts for every rule, zeros included.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut m: BTreeMap<String, usize> = RejectReason::ALL.iter().map(|r| (r.as_str().to_string(), 0)).collect();
        for r in &self.rejected {
            *m.get_mut(r.reason.as_str()).expect("all reasons present") += 1;
        }
        m
    }

    pub fn report(&self) -> FilterReport {
        FilterReport {
            total: self.accepted.len() + self.rejected.len(),
            accepted: self.accepted.len(),
            rejected: self.counts(),
            rejections: self.rejected.iter().map(|r| (r.entry.id.clone(), r.reason)).collect(),
        }
    }
}

/// Machine-readable summary written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub rejections: Vec<(String, RejectReason)>,
}

/// Partition entries into accepted and rejected, preserving input order.
pub fn filter_manifest(entries: &[ManifestEntry], thresholds: &FilterThresholds) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for e in entries {
        match check_entry(e, thresholds) {
            None => out.accepted.push(e.clone()),
            Some(reason) => out.rejected.push(Rejection { entry: e.clone(), reason }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaletteSizes {
    pub foundation: usize,
    pub eyeshadow: usize,
    pub lip: usize,
}

impl Default for PaletteSizes {
    fn default() -> Self {
        Self { foundation: 8, eyeshadow: 8, lip: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub matting: MattingConfig,
    pub palette_sizes: PaletteSizes,
    pub max_templates: usize,
    /// A new template is kept only if its alpha IoU with every kept template is below this.
    pub template_merge_iou: f64,
    pub feather: f64,
    pub seed: u64,
    /// Worker threads for per-image analysis; 0 uses the available parallelism.
    pub workers: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            matting: MattingConfig::default(),
            palette_sizes: PaletteSizes::default(),
            max_templates: 10,
            template_merge_iou: 0.8,
            feather: DEFAULT_FEATHER,
            seed: 0,
            workers: 0,
        }
    }
}

/// Per-image record of the DB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: String,
    pub label: MakeupLabel,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MakeupDb {
    pub schema_version: u32,
    pub templates: Vec<EyeShadowTemplate>,
    pub foundation: Palette,
    pub eyeshadow: Palette,
    pub lip: Palette,
    pub annotations: Vec<Annotation>,
}

impl MakeupDb {
    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(self.templates.len(), self.eyeshadow.len(), self.lip.len(), self.foundation.len())
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.label_space()?;
        for (i, t) in self.templates.iter().enumerate() {
            if t.id != i {
                return Err(Error::InvalidParameter(format!("template at position {i} has id {}", t.id)));
            }
        }
        for (class, p) in [
            (ProductClass::Foundation, &self.foundation),
            (ProductClass::Eyeshadow, &self.eyeshadow),
            (ProductClass::Lip, &self.lip),
        ] {
            if p.product_class != class {
                return Err(Error::InvalidParameter(format!("{class} palette has class {}", p.product_class)));
            }
        }
        if let Some(a) = self.annotations.iter().find(|a| !space.contains(&a.label)) {
            return Err(Error::InvalidParameter(format!(
                "annotation for {} has label {:?} outside {space}",
                a.image_id, a.label
            )));
        }
        Ok(())
    }

    pub fn training_examples(&self) -> Vec<TrainingExample> {
        self.annotations.iter().map(|a| TrainingExample { features: a.features.clone(), label: a.label }).collect()
    }

    /// Concrete template and colors for a label.
    pub fn spec_for(&self, label: &MakeupLabel, intensities: Intensities) -> Result<MakeupSpec> {
        let space = self.label_space()?;
        if !space.contains(label) {
            return Err(Error::InvalidParameter(format!("label {label:?} outside {space}")));
        }
        Ok(MakeupSpec {
            template: self.templates[label.eyeshadow_template].clone(),
            eyeshadow_color: self.eyeshadow.centers[label.eyeshadow_color],
            lip_color: self.lip.centers[label.lip_color],
            foundation_color: self.foundation.centers[label.foundation_color],
            intensities,
        })
    }
}

/// Soft IoU `Σ min / Σ max` of two alphas on the same grid.
pub fn alpha_iou(a: &AlphaMatte, b: &AlphaMatte) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        num += x.min(*y);
        den += x.max(*y);
    }
    if den == 0.0 {
        return 1.0;
    }
    num / den
}

/// Nearest template by alpha IoU; ties go to the lowest id.
pub fn nearest_template(alpha: &AlphaMatte, templates: &[EyeShadowTemplate]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, t) in templates.iter().enumerate() {
        let iou = alpha_iou(alpha, &t.alpha);
        if iou > best.1 {
            best = (i, iou);
        }
    }
    best.0
}

fn weighted_mean(lab: &[LabColor], weight: &[f64]) -> Option<LabColor> {
    let total: f64 = weight.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = [0.0; 3];
    for (c, w) in lab.iter().zip(weight) {
        if *w > 0.0 {
            acc[0] += w * c.l;
            acc[1] += w * c.a;
            acc[2] += w * c.b;
        }
    }
    Some(LabColor::new(acc[0] / total, acc[1] / total, acc[2] / total))
}

/// Region color samples and template of one analysed image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAnalysis {
    pub image_id: String,
    pub template: EyeShadowTemplate,
    pub foundation: LabColor,
    pub lip: LabColor,
    pub features: FeatureVector,
}

/// Template extraction, region samples and features for one aligned face.
///
/// The foundation sample is the skin mask minus both eye-shadow zones, so
/// painted lids do not leak into the skin color.
pub fn analyse_image(
    image_id: &str,
    image: &RgbImage,
    landmarks: &LandmarkSet,
    config: &BuildConfig,
) -> Result<ImageAnalysis> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if (w, h) != (landmarks.width(), landmarks.height()) {
        return Err(Error::dims(format!("{}x{} image", landmarks.width(), landmarks.height()), format!("{w}x{h}")));
    }
    let template = extract_eyeshadow_template(image, landmarks, &config.matting, image_id)?;
    let masks = region_masks(landmarks, w, h, config.feather)?;
    let lab: Vec<LabColor> = image.pixels().map(|p| srgb_to_lab(p.0)).collect();
    let unit = |v: u8| f64::from(v) / 255.0;
    let skin: Vec<f64> = (0..w * h)
        .map(|i| {
            let zones = unit(masks.zone(EyeSide::Left).as_raw()[i]).max(unit(masks.zone(EyeSide::Right).as_raw()[i]));
            unit(masks.skin.as_raw()[i]) * (1.0 - zones)
        })
        .collect();
    let lips: Vec<f64> = masks.lips.as_raw().iter().map(|&v| unit(v)).collect();
    let foundation = weighted_mean(&lab, &skin).ok_or_else(|| Error::InvalidParameter("empty skin region".into()))?;
    let lip = weighted_mean(&lab, &lips).ok_or_else(|| Error::InvalidParameter("empty lip region".into()))?;
    Ok(ImageAnalysis {
        image_id: image_id.to_string(),
        template,
        foundation,
        lip,
        features: extract_features(image, landmarks)?,
    })
}

fn analyse_entry(entry: &ManifestEntry, config: &BuildConfig) -> Result<ImageAnalysis> {
    let image = read_rgb8(&entry.image)?;
    let landmarks = LandmarkSet::load(&entry.landmarks)?;
    analyse_image(&entry.id, &image, &landmarks, config)
}

/// Run `f` over `items` on `workers` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = if workers == 0 { thread::available_parallelism().map_or(1, |n| n.get()) } else { workers }
        .clamp(1, items.len().max(1));
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let chunk = items.len().div_ceil(workers).max(1);
        for (part, out) in items.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (item, slot) in part.iter().zip(out) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Per-image failure kept for the build report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildFailure {
    pub image_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub analysed: usize,
    pub succeeded: usize,
    pub failures: Vec<BuildFailure>,
    pub templates: usize,
}

/// Assemble a DB from already analysed images.
pub fn assemble_db(analyses: &[ImageAnalysis], config: &BuildConfig) -> Result<MakeupDb> {
    let sizes = config.palette_sizes;
    let needed = sizes.foundation.max(sizes.eyeshadow).max(sizes.lip).max(1);
    if analyses.len() < needed {
        return Err(Error::TooFewSamples { needed, available: analyses.len() });
    }
    if config.max_templates == 0 {
        return Err(Error::InvalidParameter("max_templates must be >= 1".into()));
    }
    let mut templates: Vec<EyeShadowTemplate> = Vec::new();
    for a in analyses {
        if templates.len() == config.max_templates {
            break;
        }
        if templates.iter().all(|t| alpha_iou(&t.alpha, &a.template.alpha) < config.template_merge_iou) {
            let mut t = a.template.clone();
            t.id = templates.len();
            templates.push(t);
        }
    }
    let shadow: Vec<LabColor> = analyses.iter().map(|a| a.template.mean_color).collect();
    let skin: Vec<LabColor> = analyses.iter().map(|a| a.foundation).collect();
    let lips: Vec<LabColor> = analyses.iter().map(|a| a.lip).collect();
    let foundation = build_palette(&skin, ProductClass::Foundation, sizes.foundation, config.seed)?;
    let eyeshadow = build_palette(&shadow, ProductClass::Eyeshadow, sizes.eyeshadow, config.seed)?;
    let lip = build_palette(&lips, ProductClass::Lip, sizes.lip, config.seed)?;
    let annotations = analyses
        .iter()
        .map(|a| Annotation {
            image_id: a.image_id.clone(),
            label: MakeupLabel::new(
                nearest_template(&a.template.alpha, &templates),
                quantize(&a.template.mean_color, &eyeshadow),
                quantize(&a.lip, &lip),
                quantize(&a.foundation, &foundation),
            ),
            features: a.features.clone(),
        })
        .collect();
    let db = MakeupDb { schema_version: DB_SCHEMA_VERSION, templates, foundation, eyeshadow, lip, annotations };
    db.validate()?;
    Ok(db)
}

/// Analyse every accepted entry and build the DB. Images without a
/// detectable eye shadow are skipped and listed in the report.
pub fn build_db(entries: &[ManifestEntry], config: &BuildConfig) -> Result<(MakeupDb, BuildReport)> {
    config.matting.validate()?;
    if entries.is_empty() {
        return Err(Error::BuildFailed { successes: 0, needed: 1, failures: Vec::new() });
    }
    let results = parallel_map(entries, config.workers, |e| analyse_entry(e, config));
    let mut analyses = Vec::new();
    let mut failures = Vec::new();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(a) => analyses.push(a),
            Err(err) => failures.push(BuildFailure { image_id: e.id.clone(), error: err.to_string() }),
        }
    }
    let sizes = config.palette_sizes;
    let needed = sizes.foundation.max(sizes.eyeshadow).max(sizes.lip).max(1);
    if analyses.len() < needed {
        return Err(Error::BuildFailed {
            successes: analyses.len(),
            needed,
            failures: failures.iter().map(|f| format!("{}: {}", f.image_id, f.error)).collect(),
        });
    }
    let db = assemble_db(&analyses, config)?;
    let report =
        BuildReport { analysed: entries.len(), succeeded: analyses.len(), failures, templates: db.templates.len() };
    Ok((db, report))
}

fn palette_path(dir: &Path, class: ProductClass) -> PathBuf {
    dir.join(format!("palettes.{class}"))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationHeader {
    schema: u32,
}

/// Write the DB; stale template files from an earlier save are removed.
pub fn save_db(db: &MakeupDb, dir: &Path) -> Result<()> {
    db.validate()?;
    let tdir = dir.join("templates");
    fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
    for entry in fs::read_dir(&tdir).map_err(|e| Error::io(&tdir, e))? {
        let path = entry.map_err(|e| Error::io(&tdir, e))?.path();
        let stale = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<usize>().ok())
            .is_some_and(|id| id >= db.templates.len());
        if stale {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    for t in &db.templates {
        t.save(&tdir)?;
    }
    for (class, p) in [
        (ProductClass::Foundation, &db.foundation),
        (ProductClass::Eyeshadow, &db.eyeshadow),
        (ProductClass::Lip, &db.lip),
    ] {
        write_atomic(&palette_path(dir, class), p.to_text().as_bytes())?;
    }
    let mut ann = serde_json::to_string(&AnnotationHeader { schema: DB_SCHEMA_VERSION }).expect("header") + "\n";
    for a in &db.annotations {
        ann += &serde_json::to_string(a).map_err(|e| Error::format(dir, e.to_string()))?;
        ann.push('\n');
    }
    write_atomic(&dir.join("annotations.jsonl"), ann.as_bytes())?;
    // The version file goes last so a partially written DB fails to load.
    write_atomic(&dir.join("version"), format!("{DB_MAGIC} {DB_SCHEMA_VERSION}\n").as_bytes())
}

fn version_mismatch(path: &Path, found: impl Into<String>) -> Error {
    Error::VersionMismatch { path: path.to_path_buf(), found: found.into(), supported: DB_SCHEMA_VERSION.to_string() }
}

pub fn load_db(dir: &Path) -> Result<MakeupDb> {
    let vpath = dir.join("version");
    let version = read_text(&vpath)?;
    let fields: Vec<&str> = version.split_whitespace().collect();
    match fields.as_slice() {
        [DB_MAGIC, v] if *v == DB_SCHEMA_VERSION.to_string() => {}
        [DB_MAGIC, v] => return Err(version_mismatch(&vpath, *v)),
        _ => return Err(Error::format(&vpath, "expected `vanity-db <version>`")),
    }
    let palette = |class: ProductClass| -> Result<Palette> {
        let path = palette_path(dir, class);
        let p = Palette::parse(&read_text(&path)?, &path)?;
        if p.product_class != class {
            return Err(Error::format(&path, format!("expected class {class}, found {}", p.product_class)));
        }
        Ok(p)
    };
    let foundation = palette(ProductClass::Foundation)?;
    let eyeshadow = palette(ProductClass::Eyeshadow)?;
    let lip = palette(ProductClass::Lip)?;

    let tdir = dir.join("templates");
    let mut ids: Vec<usize> = fs::read_dir(&tdir)
        .map_err(|e| Error::io(&tdir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension()? == "meta").then(|| p.file_stem()?.to_str()?.parse().ok())?
        })
        .collect();
    ids.sort_unstable();
    if ids.iter().enumerate().any(|(i, &id)| i != id) {
        return Err(Error::format(&tdir, "template ids must be 0..T without gaps"));
    }
    let templates = ids.iter().map(|&id| EyeShadowTemplate::load(&tdir, id)).collect::<Result<Vec<_>>>()?;

    let apath = dir.join("annotations.jsonl");
    let text = read_text(&apath)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| Error::format(&apath, "missing schema header"))?;
    let header: AnnotationHeader =
        serde_json::from_str(head).map_err(|e| Error::format(&apath, format!("line 1: {e}")))?;
    if header.schema != DB_SCHEMA_VERSION {
        return Err(version_mismatch(&apath, header.schema.to_string()));
    }
    let annotations = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(&apath, format!("line {}: {e}", i + 1))))
        .collect::<Result<Vec<Annotation>>>()?;

    let db = MakeupDb { schema_version: DB_SCHEMA_VERSION, templates, foundation, eyeshadow, lip, annotations };
    db.validate().map_err(|e| Error::format(dir, e.to_string()))?;
    Ok(db)
}
