//! Pixel containers, sRGB/CIELAB conversion, box and guided filtering, blending and PNG I/O.
//!
//! The working space is `f64`. Conversion to 8 bits happens only at I/O
//! boundaries and rounds half up.

use std::path::Path;
use std::sync::OnceLock;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major floating-point image with 1 or 3 interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::from_vec(width, height, channels, vec![0.0; width * height * channels])
            .expect("length matches by construction")
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::from_vec(width, height, channels, vec![value; width * height * channels])
            .expect("length matches by construction")
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!("channels must be 1 or 3, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{} samples", width * height * channels),
                format!("{} samples", data.len()),
            ));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, channels: 1, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    fn shape(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Bilinear sample of channel `c` at a continuous position whose integer
    /// coordinates are pixel centres. Positions outside the image read 0.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> f64 {
        bilinear(&self.data, self.width, self.height, self.channels, c, x, y)
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self { width: img.width() as usize, height: img.height() as usize, channels: 3, data }
    }

    pub fn from_gray8(img: &GrayImage) -> Self {
        let data = img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Self { width: img.width() as usize, height: img.height() as usize, channels: 1, data }
    }

    pub fn to_rgb8(&self) -> Result<RgbImage> {
        if self.channels != 3 {
            return Err(Error::dims("3 channels", format!("{} channels", self.channels)));
        }
        let raw = self.data.iter().map(|&v| quantize_unit(v)).collect();
        Ok(RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("sized"))
    }

    pub fn to_gray8(&self) -> Result<GrayImage> {
        if self.channels != 1 {
            return Err(Error::dims("1 channel", format!("{} channels", self.channels)));
        }
        let raw = self.data.iter().map(|&v| quantize_unit(v)).collect();
        Ok(GrayImage::from_raw(self.width as u32, self.height as u32, raw).expect("sized"))
    }
}

pub(crate) fn bilinear(data: &[f64], width: usize, height: usize, channels: usize, c: usize, x: f64, y: f64) -> f64 {
    if !(x > -1.0 && y > -1.0 && x < width as f64 && y < height as f64) {
        return 0.0;
    }
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= width as isize || yi >= height as isize {
            0.0
        } else {
            data[(yi as usize * width + xi as usize) * channels + c]
        }
    };
    // Exact reads on pixel centres keep identity warps lossless.
    if fx == 0.0 && fy == 0.0 {
        return at(x0, y0);
    }
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Round half up to 8 bits, clamping to the representable range.
pub fn quantize_unit(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Per-pixel opacity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatte {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AlphaMatte {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    /// Values are clamped into `[0, 1]`; NaN becomes 0.
    pub fn from_vec(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::dims(format!("{} values", width * height), format!("{} values", values.len())));
        }
        for v in &mut values {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                values.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        bilinear(&self.values, self.width, self.height, 1, 0, x, y)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mirrored(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                values.push(self.values[y * self.width + x]);
            }
        }
        Self { width: self.width, height: self.height, values }
    }

    /// Snap every value onto the 8-bit grid so PNG persistence is lossless.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f64::from(quantize_unit(v)) / 255.0).collect(),
        }
    }

    pub fn to_gray8(&self) -> GrayImage {
        let raw = self.values.iter().map(|&v| quantize_unit(v)).collect();
        GrayImage::from_raw(self.width as u32, self.height as u32, raw).expect("sized")
    }

    pub fn from_gray8(img: &GrayImage) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            values: img.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    /// ΔE76.
    pub fn distance(&self, other: &LabColor) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn distance_sq(&self, other: &LabColor) -> f64 {
        let dl = self.l - other.l;
        let da = self.a - other.a;
        let db = self.b - other.b;
        dl * dl + da * da + db * db
    }

    pub fn chroma_distance(&self, other: &LabColor) -> f64 {
        ((self.a - other.a).powi(2) + (self.b - other.b).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.a.is_finite() && self.b.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_hex(self) -> String {
        let [r, g, b] = lab_to_srgb(self);
        format!("#{r:02x}{g:02x}{b:02x}")
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        let s = hex.strip_prefix('#').unwrap_or(hex);
        if s.len() != 6 || !s.is_ascii() {
            return None;
        }
        let channel = |i: usize| u8::from_str_radix(&s[i..i + 2], 16).ok();
        Some(srgb_to_lab([channel(0)?, channel(2)?, channel(4)?]))
    }
}

// sRGB primaries, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] =
    [[0.4124564, 0.3575761, 0.1804375], [0.2126729, 0.7151522, 0.0721750], [0.0193339, 0.1191920, 0.9503041]];

struct ColorTables {
    white: [f64; 3],
    xyz_to_rgb: [[f64; 3]; 3],
}

fn tables() -> &'static ColorTables {
    static TABLES: OnceLock<ColorTables> = OnceLock::new();
    TABLES
        .get_or_init(|| ColorTables { white: mat_vec(&RGB_TO_XYZ, [1.0, 1.0, 1.0]), xyz_to_rgb: invert3(&RGB_TO_XYZ) })
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let inv_det = 1.0 / det;
    [
        [
            c00 * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            c01 * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            c02 * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

const DELTA: f64 = 6.0 / 29.0;

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// sRGB in `[0, 1]` (not clamped) to CIELAB.
pub fn srgb_unit_to_lab(rgb: [f64; 3]) -> LabColor {
    let t = tables();
    let lin = [srgb_decode(rgb[0]), srgb_decode(rgb[1]), srgb_decode(rgb[2])];
    let xyz = mat_vec(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / t.white[0]);
    let fy = lab_f(xyz[1] / t.white[1]);
    let fz = lab_f(xyz[2] / t.white[2]);
    LabColor { l: 116.0 * fy - 16.0, a: 500.0 * (fx - fy), b: 200.0 * (fy - fz) }
}

/// CIELAB to sRGB in `[0, 1]`, clamped to the gamut in linear light.
pub fn lab_to_srgb_unit(lab: LabColor) -> [f64; 3] {
    let t = tables();
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let xyz = [lab_f_inv(fx) * t.white[0], lab_f_inv(fy) * t.white[1], lab_f_inv(fz) * t.white[2]];
    let lin = mat_vec(&t.xyz_to_rgb, xyz);
    lin.map(|c| {
        let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
        srgb_encode(c)
    })
}

pub fn srgb_to_lab(rgb: [u8; 3]) -> LabColor {
    srgb_unit_to_lab(rgb.map(|c| f64::from(c) / 255.0))
}

pub fn lab_to_srgb(lab: LabColor) -> [u8; 3] {
    lab_to_srgb_unit(lab).map(quantize_unit)
}

/// Planar CIELAB image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabImage {
    pub fn from_rgb8(img: &RgbImage) -> Self {
        let n = (img.width() * img.height()) as usize;
        let mut out = Self {
            width: img.width() as usize,
            height: img.height() as usize,
            l: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
        };
        for p in img.pixels() {
            let lab = srgb_to_lab(p.0);
            out.l.push(lab.l);
            out.a.push(lab.a);
            out.b.push(lab.b);
        }
        out
    }

    pub fn from_image(img: &ImageBuffer) -> Result<Self> {
        if img.channels() != 3 {
            return Err(Error::dims("3 channels", format!("{} channels", img.channels())));
        }
        let n = img.width() * img.height();
        let mut out = Self {
            width: img.width(),
            height: img.height(),
            l: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
        };
        for px in img.data().chunks_exact(3) {
            let lab = srgb_unit_to_lab([px[0], px[1], px[2]]);
            out.l.push(lab.l);
            out.a.push(lab.a);
            out.b.push(lab.b);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn pixel(&self, i: usize) -> LabColor {
        LabColor::new(self.l[i], self.a[i], self.b[i])
    }

    pub fn set_pixel(&mut self, i: usize, c: LabColor) {
        self.l[i] = c.l;
        self.a[i] = c.a;
        self.b[i] = c.b;
    }

    pub fn is_finite(&self) -> bool {
        self.l.iter().chain(&self.a).chain(&self.b).all(|v| v.is_finite())
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let mut raw = Vec::with_capacity(self.len() * 3);
        for i in 0..self.len() {
            raw.extend_from_slice(&lab_to_srgb(self.pixel(i)));
        }
        RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("sized")
    }

    pub fn to_image(&self) -> ImageBuffer {
        let mut data = Vec::with_capacity(self.len() * 3);
        for i in 0..self.len() {
            data.extend_from_slice(&lab_to_srgb_unit(self.pixel(i)));
        }
        ImageBuffer::from_vec(self.width, self.height, 3, data).expect("sized")
    }
}

/// Mean over the `(2r+1)²` window around each pixel, clipped to the image
/// and divided by the number of in-bounds samples. Channels are filtered
/// independently. Cost is independent of `radius`.
pub fn box_filter(img: &ImageBuffer, radius: usize) -> ImageBuffer {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let mut out = ImageBuffer::new(w, h, ch);
    if w == 0 || h == 0 {
        return out;
    }
    let mut plane = vec![0.0; w * h];
    for c in 0..ch {
        for (i, v) in plane.iter_mut().enumerate() {
            *v = img.data[i * ch + c];
        }
        let filtered = box_filter_plane(&plane, w, h, radius);
        for (i, v) in filtered.into_iter().enumerate() {
            out.data[i * ch + c] = v;
        }
    }
    out
}

/// Box mean of a single plane via separable prefix sums.
pub(crate) fn box_filter_plane(data: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return data.to_vec();
    }
    // Horizontal window sums.
    let mut horiz = vec![0.0; w * h];
    let mut prefix = vec![0.0; w.max(h) + 1];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + row[x];
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            horiz[y * w + x] = prefix[hi + 1] - prefix[lo];
        }
    }
    // Vertical window sums, then divide by the clipped window count.
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + horiz[y * w + x];
        }
        let cx = ((x + r).min(w - 1) - x.saturating_sub(r) + 1) as f64;
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r).min(h - 1);
            let cy = (hi - lo + 1) as f64;
            out[y * w + x] = (prefix[hi + 1] - prefix[lo]) / (cx * cy);
        }
    }
    out
}

/// Gray-guide guided filter.
///
/// Per window `a = cov(I, p) / (var(I) + eps)` and `b = mean(p) - a * mean(I)`;
/// the output is `mean(a) * I + mean(b)` where the outer means run over all
/// windows covering the pixel. All means use border-clipped counts.
pub fn guided_filter(guide: &ImageBuffer, input: &ImageBuffer, radius: usize, epsilon: f64) -> Result<ImageBuffer> {
    if guide.channels != 1 || input.channels != 1 {
        return Err(Error::dims("single-channel guide and input", format!("{} and {}", guide.shape(), input.shape())));
    }
    if !guide.same_shape(input) {
        return Err(Error::dims(guide.shape(), input.shape()));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("guided filter epsilon must be > 0, got {epsilon}")));
    }
    if radius < 1 {
        return Err(Error::InvalidParameter("guided filter radius must be >= 1".into()));
    }
    let (w, h) = (guide.width, guide.height);
    let out = guided_filter_plane(&guide.data, &input.data, w, h, radius, epsilon);
    ImageBuffer::from_vec(w, h, 1, out)
}

pub(crate) fn guided_filter_plane(guide: &[f64], input: &[f64], w: usize, h: usize, r: usize, eps: f64) -> Vec<f64> {
    let ip: Vec<f64> = guide.iter().zip(input).map(|(i, p)| i * p).collect();
    let ii: Vec<f64> = guide.iter().map(|i| i * i).collect();
    let mean_i = box_filter_plane(guide, w, h, r);
    let mean_p = box_filter_plane(input, w, h, r);
    let mean_ip = box_filter_plane(&ip, w, h, r);
    let mean_ii = box_filter_plane(&ii, w, h, r);

    let n = w * h;
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for k in 0..n {
        let cov = mean_ip[k] - mean_i[k] * mean_p[k];
        let var = mean_ii[k] - mean_i[k] * mean_i[k];
        a[k] = cov / (var + eps);
        b[k] = mean_p[k] - a[k] * mean_i[k];
    }
    let mean_a = box_filter_plane(&a, w, h, r);
    let mean_b = box_filter_plane(&b, w, h, r);
    (0..n).map(|i| mean_a[i] * guide[i] + mean_b[i]).collect()
}

pub enum Overlay<'a> {
    Color(&'a [f64]),
    Image(&'a ImageBuffer),
}

/// `out = (1 - α)·base + α·overlay`, clamped to `[0, 1]`.
pub fn blend(base: &ImageBuffer, overlay: Overlay<'_>, alpha: &AlphaMatte) -> Result<ImageBuffer> {
    if alpha.width != base.width || alpha.height != base.height {
        return Err(Error::dims(
            format!("{}x{} alpha", base.width, base.height),
            format!("{}x{} alpha", alpha.width, alpha.height),
        ));
    }
    let ch = base.channels;
    match &overlay {
        Overlay::Color(c) if c.len() != ch => {
            return Err(Error::dims(format!("{ch}-channel color"), format!("{}-channel color", c.len())))
        }
        Overlay::Image(img) if !img.same_shape(base) => return Err(Error::dims(base.shape(), img.shape())),
        _ => {}
    }
    let mut out = base.clone();
    for (i, &a) in alpha.values.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for c in 0..ch {
            let o = match &overlay {
                Overlay::Color(col) => col[c],
                Overlay::Image(img) => img.data[i * ch + c],
            };
            let v = &mut out.data[i * ch + c];
            *v = ((1.0 - a) * *v + a * o).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

fn image_err(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image { path: path.to_path_buf(), source: other },
    }
}

pub fn read_rgb8(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(img.into_rgb8())
}

pub fn decode_png_rgb8(bytes: &[u8]) -> std::result::Result<RgbImage, image::ImageError> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    Ok(img.into_rgb8())
}

pub fn encode_png_rgb8(img: &RgbImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn encode_png_gray8(img: &GrayImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn write_rgb8(path: &Path, img: &RgbImage) -> Result<()> {
    crate::io::write_atomic(path, &encode_png_rgb8(img))
}

pub fn read_gray8(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    Ok(img.into_luma8())
}

pub fn write_gray8(path: &Path, img: &GrayImage) -> Result<()> {
    crate::io::write_atomic(path, &encode_png_gray8(img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageBuffer::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    fn naive_box(img: &ImageBuffer, r: usize) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut s = 0.0;
                let mut n = 0.0;
                for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                    for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                        s += img.get(xx, yy, 0);
                        n += 1.0;
                    }
                }
                out[y * w + x] = s / n;
            }
        }
        out
    }

    #[test]
    fn white_and_black_points() {
        let white = srgb_to_lab([255, 255, 255]);
        assert!((white.l - 100.0).abs() < 1e-12, "{white:?}");
        assert!(white.a.abs() <= 0.01 && white.b.abs() <= 0.01);
        let black = srgb_to_lab([0, 0, 0]);
        assert!(black.l.abs() < 1e-12 && black.a.abs() < 1e-12 && black.b.abs() < 1e-12);
        assert_eq!(lab_to_srgb(white), [255, 255, 255]);
        assert_eq!(lab_to_srgb(black), [0, 0, 0]);
    }

    #[test]
    fn lab_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let rgb: [u8; 3] = [rng.random(), rng.random(), rng.random()];
            let back = lab_to_srgb(srgb_to_lab(rgb));
            for c in 0..3 {
                assert!((i16::from(rgb[c]) - i16::from(back[c])).abs() <= 1, "{rgb:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn out_of_gamut_lab_is_clamped() {
        let rgb = lab_to_srgb_unit(LabColor::new(50.0, 200.0, -200.0));
        assert!(rgb.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn hex_round_trip() {
        let c = srgb_to_lab([0xb0, 0x30, 0x60]);
        assert_eq!(c.to_hex(), "#b03060");
        assert_eq!(LabColor::from_hex("#b03060").unwrap(), c);
        assert!(LabColor::from_hex("#b0306").is_none());
    }

    #[test]
    fn box_radius_zero_is_identity() {
        let img = random_image(7, 5, 1);
        assert_eq!(box_filter(&img, 0), img);
    }

    #[test]
    fn box_of_constant_is_constant() {
        let img = ImageBuffer::filled(9, 6, 1, 0.37);
        for r in [1, 2, 5, 20] {
            let out = box_filter(&img, r);
            assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn box_matches_naive_window_sum() {
        let img = random_image(5, 5, 42);
        let fast = box_filter(&img, 2);
        let slow = naive_box(&img, 2);
        for (a, b) in fast.data().iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9);
        }
        let img = random_image(13, 8, 3);
        for r in 1..6 {
            let fast = box_filter(&img, r);
            let slow = naive_box(&img, r);
            for (a, b) in fast.data().iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn box_filters_channels_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f64> = (0..6 * 4 * 3).map(|_| rng.random()).collect();
        let img = ImageBuffer::from_vec(6, 4, 3, data).unwrap();
        let out = box_filter(&img, 1);
        for c in 0..3 {
            let plane = ImageBuffer::from_fn(6, 4, |x, y| img.get(x, y, c));
            let expect = naive_box(&plane, 1);
            for y in 0..4 {
                for x in 0..6 {
                    assert!((out.get(x, y, c) - expect[y * 6 + x]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn guided_constant_input_passes_through() {
        let guide = random_image(10, 8, 9);
        let p = ImageBuffer::filled(10, 8, 1, 0.6);
        let q = guided_filter(&guide, &p, 2, 0.01).unwrap();
        assert!(q.data().iter().all(|v| (v - 0.6).abs() < 1e-9));
    }

    #[test]
    fn guided_hand_case() {
        let img = ImageBuffer::from_vec(3, 1, 1, vec![0.0, 0.0, 1.0]).unwrap();
        let q = guided_filter(&img, &img, 1, 0.1).unwrap();
        let expect = [3.0 / 58.0, (3.0 / 29.0 + 1.0 / 7.0) / 3.0, (23.0 / 29.0 + 6.0 / 7.0) / 2.0];
        for (a, b) in q.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn guided_rejects_bad_arguments() {
        let a = random_image(4, 4, 1);
        let b = random_image(5, 4, 1);
        assert!(matches!(guided_filter(&a, &b, 1, 0.1), Err(Error::DimensionMismatch { .. })));
        assert!(guided_filter(&a, &a, 1, 0.0).is_err());
        assert!(guided_filter(&a, &a, 0, 0.1).is_err());
    }

    #[test]
    fn guided_shift_invariance() {
        let guide = random_image(16, 12, 11);
        let p = random_image(16, 12, 12);
        let shifted = ImageBuffer::from_fn(16, 12, |x, y| p.get(x, y, 0) + 0.25);
        let q0 = guided_filter(&guide, &p, 3, 0.01).unwrap();
        let q1 = guided_filter(&guide, &shifted, 3, 0.01).unwrap();
        for (a, b) in q0.data().iter().zip(q1.data()) {
            assert!((b - a - 0.25).abs() <= 1e-9);
        }
    }

    #[test]
    fn blend_cases() {
        let base = ImageBuffer::filled(4, 3, 3, 0.2);
        let zero = AlphaMatte::zeros(4, 3);
        let out = blend(&base, Overlay::Color(&[0.8, 0.8, 0.8]), &zero).unwrap();
        assert_eq!(out, base);

        let ones = AlphaMatte::from_fn(4, 3, |_, _| 1.0);
        let out = blend(&base, Overlay::Color(&[0.9, 0.1, 0.5]), &ones).unwrap();
        for px in out.data().chunks(3) {
            assert_eq!(px, [0.9, 0.1, 0.5]);
        }

        let half = AlphaMatte::from_fn(4, 3, |_, _| 0.5);
        let over = ImageBuffer::filled(4, 3, 3, 0.8);
        let out = blend(&base, Overlay::Image(&over), &half).unwrap();
        assert!(out.data().iter().all(|v| (v - 0.5).abs() < 1e-12));

        let small = AlphaMatte::zeros(2, 2);
        assert!(blend(&base, Overlay::Color(&[0.0; 3]), &small).is_err());
        assert!(blend(&base, Overlay::Color(&[0.0; 1]), &zero).is_err());
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize_unit(0.5 / 255.0), 1);
        assert_eq!(quantize_unit(0.49 / 255.0), 0);
        assert_eq!(quantize_unit(-1.0), 0);
        assert_eq!(quantize_unit(2.0), 255);
    }
}
