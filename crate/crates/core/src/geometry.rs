//! Landmark schema, similarity alignment, region masks and piecewise-affine warping.
//!
//! Coordinates are pixel coordinates with pixel centres on integers. The
//! 68-point contour schema follows the usual layout:
//!
//! | contour    | indices |
//! |------------|---------|
//! | jaw        | 0–16    |
//! | left brow  | 17–21   |
//! | right brow | 22–26   |
//! | nose       | 27–35   |
//! | left eye   | 36–41   |
//! | right eye  | 42–47   |
//! | outer lip  | 48–59   |
//! | inner lip  | 60–67   |
//!
//! "Left" is the viewer's left (smaller x). Region polygons are built from
//! these contours; see [`region_masks`] for how each one is derived.

use std::ops::{Add, Mul, Sub};
use std::path::Path;
use std::sync::OnceLock;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageops::{AlphaMatte, ImageBuffer};

pub const LANDMARK_COUNT: usize = 68;
pub const SCHEMA_NAME: &str = "contour68";

pub const JAW: std::ops::Range<usize> = 0..17;
pub const LEFT_BROW: std::ops::Range<usize> = 17..22;
pub const RIGHT_BROW: std::ops::Range<usize> = 22..27;
pub const NOSE: std::ops::Range<usize> = 27..36;
pub const LEFT_EYE: std::ops::Range<usize> = 36..42;
pub const RIGHT_EYE: std::ops::Range<usize> = 42..48;
pub const OUTER_LIP: std::ops::Range<usize> = 48..60;
pub const INNER_LIP: std::ops::Range<usize> = 60..68;
pub const NOSE_BRIDGE_TOP: usize = 27;

pub const CANONICAL_SIZE: usize = 512;
pub const CANONICAL_LEFT_EYE: Point = Point::new(176.0, 232.0);
pub const CANONICAL_RIGHT_EYE: Point = Point::new(336.0, 232.0);
pub const CANONICAL_INTEROCULAR: f64 = 160.0;

/// Size of the canonical left-eye template frame.
pub const EYE_FRAME_WIDTH: usize = 192;
pub const EYE_FRAME_HEIGHT: usize = 128;
/// Canonical-frame position of the left-eye frame's (0, 0) pixel.
pub const LEFT_EYE_FRAME_ORIGIN: Point = Point::new(80.0, 150.0);
/// Origin of the horizontally mirrored frame used for the right eye.
pub const RIGHT_EYE_FRAME_ORIGIN: Point =
    Point::new(CANONICAL_SIZE as f64 - 80.0 - (EYE_FRAME_WIDTH as f64 - 1.0), 150.0);

/// Eye-shadow zone height as a fraction of the eye-to-brow distance.
pub const ZONE_EXTENT: f64 = 0.55;
/// Half thickness of the brow polygon as a fraction of inter-ocular distance.
pub const BROW_HALF_THICKNESS: f64 = 0.05;
/// Forehead height above the brows as a fraction of inter-ocular distance.
pub const FOREHEAD_HEIGHT: f64 = 0.5;
pub const DEFAULT_FEATHER: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let s = points.iter().fold(Point::default(), |acc, &p| acc + p);
    Point::new(s.x / n, s.y / n)
}

/// 68 facial key points for an image of known size.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    width: usize,
    height: usize,
    confidence: f64,
    points: Vec<Point>,
}

impl LandmarkSet {
    pub fn new(width: usize, height: usize, confidence: f64, points: Vec<Point>) -> Result<Self> {
        let set = Self { width, height, confidence, points };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLandmarks(m));
        if self.points.len() != LANDMARK_COUNT {
            return bad(format!("expected {LANDMARK_COUNT} points, got {}", self.points.len()));
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return bad(format!("confidence {} outside [0, 1]", self.confidence));
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for (i, p) in self.points.iter().enumerate() {
            if !p.is_finite() {
                return bad(format!("point {i} is not finite"));
            }
            if p.x < -0.1 * w || p.x > 1.1 * w || p.y < -0.1 * h || p.y > 1.1 * h {
                return bad(format!("point {i} ({}, {}) outside image bounds", p.x, p.y));
            }
        }
        if self.left_eye_centroid().x >= self.right_eye_centroid().x {
            return bad("left eye centroid must lie left of the right eye centroid".into());
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    pub fn contour(&self, range: std::ops::Range<usize>) -> &[Point] {
        &self.points[range]
    }

    pub fn left_eye_centroid(&self) -> Point {
        centroid(&self.points[LEFT_EYE])
    }

    pub fn right_eye_centroid(&self) -> Point {
        centroid(&self.points[RIGHT_EYE])
    }

    pub fn interocular(&self) -> f64 {
        self.left_eye_centroid().distance(self.right_eye_centroid())
    }

    /// Apply `t` to every point, keeping the image size.
    pub fn transformed(&self, t: &SimilarityTransform) -> Result<Self> {
        Self::new(self.width, self.height, self.confidence, self.points.iter().map(|&p| t.apply(p)).collect())
    }

    pub fn with_image_size(&self, width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, self.confidence, self.points.clone())
    }

    /// Parse the `contour68` text document.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut schema = None;
        let mut width = None;
        let mut height = None;
        let mut confidence = None;
        let mut points = Vec::new();
        let mut expected = None;
        for (line, fields) in crate::io::record_lines(text) {
            if let Some(n) = expected {
                if points.len() < n {
                    if fields.len() != 2 {
                        return Err(Error::format(path, format!("line {line}: expected `x y`")));
                    }
                    points.push(Point::new(
                        crate::io::parse_f64(path, line, fields[0])?,
                        crate::io::parse_f64(path, line, fields[1])?,
                    ));
                    continue;
                }
                return Err(Error::format(path, format!("line {line}: trailing data after points")));
            }
            if fields.len() != 2 {
                return Err(Error::format(path, format!("line {line}: expected `key value`")));
            }
            match fields[0] {
                "schema" => schema = Some(fields[1].to_string()),
                "width" => width = Some(crate::io::parse_usize(path, line, fields[1])?),
                "height" => height = Some(crate::io::parse_usize(path, line, fields[1])?),
                "confidence" => confidence = Some(crate::io::parse_f64(path, line, fields[1])?),
                "points" => expected = Some(crate::io::parse_usize(path, line, fields[1])?),
                other => return Err(Error::format(path, format!("line {line}: unknown field {other:?}"))),
            }
        }
        let missing = |f: &str| Error::format(path, format!("missing field {f:?}"));
        let schema = schema.ok_or_else(|| missing("schema"))?;
        if schema != SCHEMA_NAME {
            return Err(Error::format(path, format!("unsupported schema {schema:?}")));
        }
        let expected = expected.ok_or_else(|| missing("points"))?;
        if points.len() != expected {
            return Err(Error::format(path, format!("declared {expected} points but found {}", points.len())));
        }
        Self::new(
            width.ok_or_else(|| missing("width"))?,
            height.ok_or_else(|| missing("height"))?,
            confidence.ok_or_else(|| missing("confidence"))?,
            points,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::io::read_text(path)?, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "schema {SCHEMA_NAME}\nwidth {}\nheight {}\nconfidence {}\npoints {}\n",
            self.width,
            self.height,
            self.confidence,
            self.points.len()
        );
        for p in &self.points {
            s.push_str(&format!("{} {}\n", p.x, p.y));
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn to_document(&self) -> LandmarkDocument {
        LandmarkDocument {
            schema: SCHEMA_NAME.to_string(),
            width: self.width,
            height: self.height,
            confidence: self.confidence,
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

/// JSON form of the landmark document used by the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkDocument {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub confidence: f64,
    pub points: Vec<[f64; 2]>,
}

impl TryFrom<LandmarkDocument> for LandmarkSet {
    type Error = Error;

    fn try_from(doc: LandmarkDocument) -> Result<Self> {
        if doc.schema != SCHEMA_NAME {
            return Err(Error::InvalidLandmarks(format!(
                "unsupported schema {:?}, expected {SCHEMA_NAME:?}",
                doc.schema
            )));
        }
        LandmarkSet::new(
            doc.width,
            doc.height,
            doc.confidence,
            doc.points.iter().map(|p| Point::new(p[0], p[1])).collect(),
        )
    }
}

/// `p ↦ scale·R(rotation)·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: f64,
    pub translation: Point,
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform =
        SimilarityTransform { scale: 1.0, rotation: 0.0, translation: Point::new(0.0, 0.0) };

    pub fn new(scale: f64, rotation: f64, translation: Point) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("scale must be > 0, got {scale}")));
        }
        Ok(Self { scale, rotation, translation })
    }

    fn linear(&self) -> (f64, f64) {
        (self.scale * self.rotation.cos(), self.scale * self.rotation.sin())
    }

    fn from_linear(re: f64, im: f64, translation: Point) -> Self {
        Self { scale: re.hypot(im), rotation: im.atan2(re), translation }
    }

    pub fn apply(&self, p: Point) -> Point {
        let (c, s) = self.linear();
        Point::new(c * p.x - s * p.y + self.translation.x, s * p.x + c * p.y + self.translation.y)
    }

    pub fn inverse(&self) -> Self {
        let (c, s) = self.linear();
        let d = c * c + s * s;
        let (ic, is) = (c / d, -s / d);
        let t = self.translation;
        Self::from_linear(ic, is, Point::new(-(ic * t.x - is * t.y), -(is * t.x + ic * t.y)))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> Self {
        let (c1, s1) = self.linear();
        let (c2, s2) = other.linear();
        let t = self.apply(other.translation);
        Self::from_linear(c1 * c2 - s1 * s2, c1 * s2 + s1 * c2, t)
    }
}

/// Similarity taking the two eye centroids onto the canonical eye positions.
pub fn align_face(landmarks: &LandmarkSet) -> Result<SimilarityTransform> {
    align_eyes(landmarks.left_eye_centroid(), landmarks.right_eye_centroid())
}

pub(crate) fn align_eyes(left: Point, right: Point) -> Result<SimilarityTransform> {
    let d = right - left;
    let n2 = d.dot(d);
    if !(n2 > 1e-12) {
        return Err(Error::DegenerateLandmarks);
    }
    let dc = CANONICAL_RIGHT_EYE - CANONICAL_LEFT_EYE;
    // Complex division dc / d.
    let re = (dc.x * d.x + dc.y * d.y) / n2;
    let im = (dc.y * d.x - dc.x * d.y) / n2;
    let lin = SimilarityTransform::from_linear(re, im, Point::default());
    let t = CANONICAL_LEFT_EYE - lin.apply(left);
    Ok(SimilarityTransform { translation: t, ..lin })
}

/// Reference face in the canonical frame, symmetric about x = 256.
pub fn mean_shape() -> &'static [Point; LANDMARK_COUNT] {
    static SHAPE: OnceLock<[Point; LANDMARK_COUNT]> = OnceLock::new();
    SHAPE.get_or_init(|| {
        let mut p = [Point::default(); LANDMARK_COUNT];
        for (j, q) in p[JAW].iter_mut().enumerate() {
            let t = std::f64::consts::PI * j as f64 / 16.0;
            *q = Point::new(256.0 - 160.0 * t.cos(), 230.0 + 210.0 * t.sin());
        }
        // Jaw endpoints are pinned so the shape is exactly symmetric.
        p[8] = Point::new(256.0, 440.0);
        let left_brow = [(126.0, 192.0), (148.0, 182.0), (172.0, 178.0), (196.0, 180.0), (220.0, 186.0)];
        for (k, &(x, y)) in left_brow.iter().enumerate() {
            p[17 + k] = Point::new(x, y);
            p[26 - k] = Point::new(512.0 - x, y);
        }
        let nose = [
            (256.0, 232.0),
            (256.0, 262.0),
            (256.0, 292.0),
            (256.0, 322.0),
            (228.0, 336.0),
            (242.0, 342.0),
            (256.0, 346.0),
            (270.0, 342.0),
            (284.0, 336.0),
        ];
        for (k, &(x, y)) in nose.iter().enumerate() {
            p[27 + k] = Point::new(x, y);
        }
        let left_eye = [(144.0, 232.0), (160.0, 221.0), (192.0, 221.0), (208.0, 232.0), (192.0, 243.0), (160.0, 243.0)];
        // Right eye mirrors the left one: 42 (inner) ↔ 39, 43 ↔ 38, 44 ↔ 37, 45 (outer) ↔ 36, 46 ↔ 41, 47 ↔ 40.
        let mirror = [3, 2, 1, 0, 5, 4];
        for (k, &(x, y)) in left_eye.iter().enumerate() {
            p[36 + k] = Point::new(x, y);
        }
        for k in 0..6 {
            let q = p[36 + mirror[k]];
            p[42 + k] = Point::new(512.0 - q.x, q.y);
        }
        let outer = [
            (208.0, 392.0),
            (222.0, 382.0),
            (238.0, 376.0),
            (256.0, 380.0),
            (274.0, 376.0),
            (290.0, 382.0),
            (304.0, 392.0),
            (290.0, 404.0),
            (274.0, 410.0),
            (256.0, 412.0),
            (238.0, 410.0),
            (222.0, 404.0),
        ];
        for (k, &(x, y)) in outer.iter().enumerate() {
            p[48 + k] = Point::new(x, y);
        }
        let inner = [
            (216.0, 392.0),
            (238.0, 388.0),
            (256.0, 389.0),
            (274.0, 388.0),
            (296.0, 392.0),
            (274.0, 396.0),
            (256.0, 397.0),
            (238.0, 396.0),
        ];
        for (k, &(x, y)) in inner.iter().enumerate() {
            p[60 + k] = Point::new(x, y);
        }
        p
    })
}

/// The mean shape as a landmark set on a canonical-size image.
pub fn mean_landmarks() -> LandmarkSet {
    LandmarkSet::new(CANONICAL_SIZE, CANONICAL_SIZE, 1.0, mean_shape().to_vec()).expect("mean shape is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeSide {
    Left,
    Right,
}

impl EyeSide {
    fn eye(self) -> std::ops::Range<usize> {
        match self {
            EyeSide::Left => LEFT_EYE,
            EyeSide::Right => RIGHT_EYE,
        }
    }

    fn brow(self) -> std::ops::Range<usize> {
        match self {
            EyeSide::Left => LEFT_BROW,
            EyeSide::Right => RIGHT_BROW,
        }
    }

    /// Upper-eyelid contour from outer to inner corner.
    fn upper_lid(self) -> [usize; 4] {
        match self {
            EyeSide::Left => [36, 37, 38, 39],
            EyeSide::Right => [45, 44, 43, 42],
        }
    }

    pub fn frame_origin(self) -> Point {
        match self {
            EyeSide::Left => LEFT_EYE_FRAME_ORIGIN,
            EyeSide::Right => RIGHT_EYE_FRAME_ORIGIN,
        }
    }
}

/// Unit vector perpendicular to the eye axis, pointing towards the brows.
fn up_vector(points: &[Point]) -> Point {
    let e = centroid(&points[RIGHT_EYE]) - centroid(&points[LEFT_EYE]);
    let n = e.norm();
    Point::new(e.y / n, -e.x / n)
}

fn interocular_of(points: &[Point]) -> f64 {
    centroid(&points[LEFT_EYE]).distance(centroid(&points[RIGHT_EYE]))
}

pub fn face_polygon(points: &[Point]) -> Vec<Point> {
    let up = up_vector(points) * (FOREHEAD_HEIGHT * interocular_of(points));
    let mut poly: Vec<Point> = points[JAW].to_vec();
    for i in (17..27).rev() {
        poly.push(points[i] + up);
    }
    poly
}

pub fn eye_polygon(points: &[Point], side: EyeSide) -> Vec<Point> {
    points[side.eye()].to_vec()
}

/// Brow polyline thickened into a band.
pub fn brow_polygon(points: &[Point], side: EyeSide) -> Vec<Point> {
    let off = up_vector(points) * (BROW_HALF_THICKNESS * interocular_of(points));
    let brow = &points[side.brow()];
    let mut poly: Vec<Point> = brow.iter().map(|&p| p - off).collect();
    poly.extend(brow.iter().rev().map(|&p| p + off));
    poly
}

/// Upper-eyelid contour plus the same contour lifted by [`ZONE_EXTENT`] of
/// the eye-to-brow distance. Brow clipping happens at rasterisation.
pub fn eye_shadow_zone_polygon(points: &[Point], side: EyeSide) -> Vec<Point> {
    let up = up_vector(points);
    let eye_c = centroid(&points[side.eye()]);
    let brow_c = centroid(&points[side.brow()]);
    let lift = up * (ZONE_EXTENT * (brow_c - eye_c).dot(up).max(0.0));
    let lid = side.upper_lid();
    let mut poly: Vec<Point> = lid.iter().map(|&i| points[i]).collect();
    poly.extend(lid.iter().rev().map(|&i| points[i] + lift));
    poly
}

pub fn shoelace_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        s += poly[i].cross(poly[(i + 1) % n]);
    }
    0.5 * s.abs()
}

pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

pub(crate) fn boundary_distance(poly: &[Point], p: Point) -> f64 {
    let n = poly.len();
    (0..n).map(|i| segment_distance(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Inward feather ramp: 0 outside, rising to 1 at `feather` px inside.
fn coverage(poly: &[Point], w: usize, h: usize, feather: f64) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for_each_near(poly, w, h, 1.0, |x, y, idx| {
        let p = Point::new(x as f64, y as f64);
        if point_in_polygon(poly, p) {
            out[idx] = if feather > 0.0 { (boundary_distance(poly, p) / feather).min(1.0) } else { 1.0 };
        }
    });
    out
}

/// Outward ramp: 0 inside, rising to 1 at `feather` px outside.
fn clearance(poly: &[Point], w: usize, h: usize, feather: f64) -> Vec<f64> {
    let mut out = vec![1.0; w * h];
    for_each_near(poly, w, h, feather + 1.0, |x, y, idx| {
        let p = Point::new(x as f64, y as f64);
        out[idx] = if point_in_polygon(poly, p) {
            0.0
        } else if feather > 0.0 {
            (boundary_distance(poly, p) / feather).min(1.0)
        } else {
            1.0
        };
    });
    out
}

fn for_each_near(poly: &[Point], w: usize, h: usize, margin: f64, mut f: impl FnMut(usize, usize, usize)) {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let lo = |v: f64| (v - margin).floor().max(0.0) as usize;
    let hi = |v: f64, n: usize| ((v + margin).ceil().max(-1.0) as isize).min(n as isize - 1);
    let (xs, ys) = (lo(x0), lo(y0));
    let (xe, ye) = (hi(x1, w), hi(y1, h));
    if xe < 0 || ye < 0 {
        return;
    }
    for y in ys..=ye as usize {
        for x in xs..=xe as usize {
            f(x, y, y * w + x);
        }
    }
}

fn to_mask(values: &[f64], w: usize, h: usize) -> GrayImage {
    let raw = values.iter().map(|&v| crate::imageops::quantize_unit(v)).collect();
    GrayImage::from_raw(w as u32, h as u32, raw).expect("sized")
}

/// Feathered byte masks for each facial region at image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub skin: GrayImage,
    pub lips: GrayImage,
    pub left_eye_shadow_zone: GrayImage,
    pub right_eye_shadow_zone: GrayImage,
    pub eyes: GrayImage,
    pub brows: GrayImage,
}

impl RegionMasks {
    pub fn zone(&self, side: EyeSide) -> &GrayImage {
        match side {
            EyeSide::Left => &self.left_eye_shadow_zone,
            EyeSide::Right => &self.right_eye_shadow_zone,
        }
    }
}

/// Rasterise the region polygons with an inward feather ramp of `feather` px.
///
/// Skin is the face polygon (jaw closed over a forehead band) minus the eyes,
/// brows and outer lip; lips are the outer minus the inner lip polygon; each
/// eye-shadow zone is clipped away from its eye and brow. Exclusions use an
/// outward ramp, so excluded masks and skin never overlap.
pub fn region_masks(landmarks: &LandmarkSet, width: usize, height: usize, feather: f64) -> Result<RegionMasks> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter("mask dimensions must be positive".into()));
    }
    if !(feather >= 0.0) || !feather.is_finite() {
        return Err(Error::InvalidParameter(format!("feather must be >= 0, got {feather}")));
    }
    let pts = landmarks.points();
    let (w, h, f) = (width, height, feather);

    let eye_l = eye_polygon(pts, EyeSide::Left);
    let eye_r = eye_polygon(pts, EyeSide::Right);
    let brow_l = brow_polygon(pts, EyeSide::Left);
    let brow_r = brow_polygon(pts, EyeSide::Right);
    let outer = pts[OUTER_LIP].to_vec();
    let inner = pts[INNER_LIP].to_vec();

    let cov_eye_l = coverage(&eye_l, w, h, f);
    let cov_eye_r = coverage(&eye_r, w, h, f);
    let cov_brow_l = coverage(&brow_l, w, h, f);
    let cov_brow_r = coverage(&brow_r, w, h, f);
    let clr_eye_l = clearance(&eye_l, w, h, f);
    let clr_eye_r = clearance(&eye_r, w, h, f);
    let clr_brow_l = clearance(&brow_l, w, h, f);
    let clr_brow_r = clearance(&brow_r, w, h, f);
    let clr_outer = clearance(&outer, w, h, f);
    let clr_inner = clearance(&inner, w, h, f);
    let cov_outer = coverage(&outer, w, h, f);
    let cov_face = coverage(&face_polygon(pts), w, h, f);
    let cov_zone_l = coverage(&eye_shadow_zone_polygon(pts, EyeSide::Left), w, h, f);
    let cov_zone_r = coverage(&eye_shadow_zone_polygon(pts, EyeSide::Right), w, h, f);

    let n = w * h;
    let mut skin = vec![0.0; n];
    let mut lips = vec![0.0; n];
    let mut zone_l = vec![0.0; n];
    let mut zone_r = vec![0.0; n];
    let mut eyes = vec![0.0; n];
    let mut brows = vec![0.0; n];
    for i in 0..n {
        skin[i] = cov_face[i] * clr_eye_l[i] * clr_eye_r[i] * clr_brow_l[i] * clr_brow_r[i] * clr_outer[i];
        lips[i] = cov_outer[i].min(clr_inner[i]);
        zone_l[i] = cov_zone_l[i] * clr_brow_l[i] * clr_eye_l[i];
        zone_r[i] = cov_zone_r[i] * clr_brow_r[i] * clr_eye_r[i];
        eyes[i] = cov_eye_l[i].max(cov_eye_r[i]);
        brows[i] = cov_brow_l[i].max(cov_brow_r[i]);
    }
    Ok(RegionMasks {
        skin: to_mask(&skin, w, h),
        lips: to_mask(&lips, w, h),
        left_eye_shadow_zone: to_mask(&zone_l, w, h),
        right_eye_shadow_zone: to_mask(&zone_r, w, h),
        eyes: to_mask(&eyes, w, h),
        brows: to_mask(&brows, w, h),
    })
}

/// Binary rasterisation of a polygon given in the same coordinates as the grid.
pub fn polygon_mask(poly: &[Point], width: usize, height: usize, feather: f64) -> Vec<f64> {
    coverage(poly, width, height, feather)
}

/// Triangulated vertex set. Two meshes are compatible when they share the
/// vertex count and triangle list.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for t in &triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::InvalidParameter("triangle index out of range".into()));
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::TopologyMismatch);
        }
        Ok(Self { vertices, triangles: self.triangles.clone() })
    }

    pub fn same_topology(&self, other: &TriangleMesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.triangles == other.triangles
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(c - a)
    }

    pub fn translated(&self, d: Point) -> Self {
        Self { vertices: self.vertices.iter().map(|&p| p + d).collect(), triangles: self.triangles.clone() }
    }
}

/// Bowyer–Watson Delaunay triangulation; triangles are returned counter-clockwise
/// (positive signed area in x-right/y-down coordinates) and sorted.
pub fn delaunay(points: &[Point]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0);
    let mid = Point::new((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let mut verts = points.to_vec();
    verts.push(mid + Point::new(-20.0 * span, -span));
    verts.push(mid + Point::new(0.0, 20.0 * span));
    verts.push(mid + Point::new(20.0 * span, -span));
    let mut tris: Vec<[usize; 3]> = vec![orient([n, n + 1, n + 2], &verts)];

    for i in 0..n {
        let p = verts[i];
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
            tris.iter().partition(|t| in_circumcircle(&verts, **t, p));
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (ti, t) in bad.iter().enumerate() {
            for k in 0..3 {
                let e = (t[k], t[(k + 1) % 3]);
                let shared = bad
                    .iter()
                    .enumerate()
                    .any(|(oi, o)| oi != ti && (0..3).any(|m| (o[m], o[(m + 1) % 3]) == (e.1, e.0)));
                if !shared {
                    edges.push(e);
                }
            }
        }
        tris = keep;
        for (a, b) in edges {
            tris.push(orient([a, b, i], &verts));
        }
    }
    let mut out: Vec<[usize; 3]> = tris.into_iter().filter(|t| t.iter().all(|&v| v < n)).collect();
    for t in &mut out {
        // Rotate so the smallest index comes first, keeping orientation.
        let m = (0..3).min_by_key(|&k| t[k]).unwrap();
        *t = [t[m], t[(m + 1) % 3], t[(m + 2) % 3]];
    }
    out.sort();
    out
}

fn orient(t: [usize; 3], v: &[Point]) -> [usize; 3] {
    let area = (v[t[1]] - v[t[0]]).cross(v[t[2]] - v[t[0]]);
    if area < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn in_circumcircle(v: &[Point], t: [usize; 3], p: Point) -> bool {
    let [a, b, c] = t.map(|i| v[i] - p);
    let det = (a.x * a.x + a.y * a.y) * b.cross(c) - (b.x * b.x + b.y * b.y) * a.cross(c)
        + (c.x * c.x + c.y * c.y) * a.cross(b);
    // Positive orientation: inside when det > 0.
    det > 1e-9
}

fn eye_region_indices(side: EyeSide) -> Vec<usize> {
    side.eye().chain(side.brow()).collect()
}

fn frame_corners() -> [Point; 4] {
    let (w, h) = ((EYE_FRAME_WIDTH - 1) as f64, (EYE_FRAME_HEIGHT - 1) as f64);
    [Point::new(0.0, 0.0), Point::new(w, 0.0), Point::new(w, h), Point::new(0.0, h)]
}

/// Eye-region mesh in template-frame coordinates: the mean shape's eye and
/// brow points plus the four frame corners, triangulated once.
pub fn canonical_eye_mesh(side: EyeSide) -> &'static TriangleMesh {
    static LEFT: OnceLock<TriangleMesh> = OnceLock::new();
    static RIGHT: OnceLock<TriangleMesh> = OnceLock::new();
    let cell = match side {
        EyeSide::Left => &LEFT,
        EyeSide::Right => &RIGHT,
    };
    cell.get_or_init(|| {
        let origin = side.frame_origin();
        let shape = mean_shape();
        let mut vertices: Vec<Point> = eye_region_indices(side).iter().map(|&i| shape[i] - origin).collect();
        vertices.extend(frame_corners());
        let triangles = delaunay(&vertices);
        TriangleMesh { vertices, triangles }
    })
}

/// The canonical eye mesh's counterpart on a face: landmark vertices at their
/// image positions and frame corners carried through the inverse alignment.
pub fn face_eye_mesh(landmarks: &LandmarkSet, side: EyeSide) -> Result<TriangleMesh> {
    let to_image = align_face(landmarks)?.inverse();
    let origin = side.frame_origin();
    let mut vertices: Vec<Point> = eye_region_indices(side).iter().map(|&i| landmarks.point(i)).collect();
    vertices.extend(frame_corners().iter().map(|&c| to_image.apply(c + origin)));
    canonical_eye_mesh(side).with_vertices(vertices)
}

/// Zone polygon of the mean shape in template-frame coordinates.
pub fn canonical_zone_polygon(side: EyeSide) -> Vec<Point> {
    let origin = side.frame_origin();
    eye_shadow_zone_polygon(mean_shape(), side).into_iter().map(|p| p - origin).collect()
}

/// Zone mask of the mean shape in template-frame coordinates, clipped away
/// from the eye and brow like the face-space zone mask.
pub fn canonical_zone_mask(side: EyeSide, feather: f64) -> Vec<f64> {
    let origin = side.frame_origin();
    let shape: Vec<Point> = mean_shape().iter().map(|&p| p - origin).collect();
    let (w, h) = (EYE_FRAME_WIDTH, EYE_FRAME_HEIGHT);
    let zone = coverage(&eye_shadow_zone_polygon(&shape, side), w, h, feather);
    let eye = clearance(&eye_polygon(&shape, side), w, h, feather);
    let brow = clearance(&brow_polygon(&shape, side), w, h, feather);
    (0..w * h).map(|i| zone[i] * eye[i] * brow[i]).collect()
}

/// Piecewise-affine warp: each target triangle samples its source triangle
/// bilinearly. Pixels outside every target triangle are 0.
pub fn warp_image(
    src: &ImageBuffer,
    source_mesh: &TriangleMesh,
    target_mesh: &TriangleMesh,
    width: usize,
    height: usize,
) -> Result<ImageBuffer> {
    if !source_mesh.same_topology(target_mesh) {
        return Err(Error::TopologyMismatch);
    }
    let ch = src.channels();
    let mut out = ImageBuffer::new(width, height, ch);
    for_each_mapped_pixel(source_mesh, target_mesh, width, height, |idx, s| {
        for c in 0..ch {
            out.data_mut()[idx * ch + c] = src.sample_bilinear(s.x, s.y, c);
        }
    });
    Ok(out)
}

pub fn warp_alpha(
    template_alpha: &AlphaMatte,
    source_mesh: &TriangleMesh,
    target_mesh: &TriangleMesh,
    width: usize,
    height: usize,
) -> Result<AlphaMatte> {
    if !source_mesh.same_topology(target_mesh) {
        return Err(Error::TopologyMismatch);
    }
    let mut values = vec![0.0; width * height];
    for_each_mapped_pixel(source_mesh, target_mesh, width, height, |idx, s| {
        values[idx] = template_alpha.sample_bilinear(s.x, s.y);
    });
    AlphaMatte::from_vec(width, height, values)
}

fn for_each_mapped_pixel(
    source: &TriangleMesh,
    target: &TriangleMesh,
    width: usize,
    height: usize,
    mut f: impl FnMut(usize, Point),
) {
    for tri in &target.triangles {
        let [a, b, c] = tri.map(|i| target.vertices[i]);
        let [sa, sb, sc] = tri.map(|i| source.vertices[i]);
        let area = (b - a).cross(c - a);
        if area.abs() < 1e-12 {
            continue;
        }
        let x0 = a.x.min(b.x).min(c.x).ceil().max(0.0);
        let y0 = a.y.min(b.y).min(c.y).ceil().max(0.0);
        let x1 = a.x.max(b.x).max(c.x).floor().min(width as f64 - 1.0);
        let y1 = a.y.max(b.y).max(c.y).floor().min(height as f64 - 1.0);
        if x1 < x0 || y1 < y0 {
            continue;
        }
        let tol = -1e-9;
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                let p = Point::new(x as f64, y as f64);
                let l1 = (p - a).cross(c - a) / (b - a).cross(c - a);
                let l2 = (b - a).cross(p - a) / (b - a).cross(c - a);
                let l0 = 1.0 - l1 - l2;
                if l0 < tol || l1 < tol || l2 < tol {
                    continue;
                }
                let s = sa * l0 + sb * l1 + sc * l2;
                f(y * width + x, s);
            }
        }
    }
}
