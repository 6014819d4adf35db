use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ::image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::tensor::Tensor;

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `v / 255`.
    #[default]
    Scale01,
    /// `(v / 255 - mean) / std` per channel with the ImageNet statistics.
    Imagenet,
}

impl Normalization {
    /// Maps a raw 0..=255 intensity of `channel`.
    pub fn apply(self, channel: usize, v: f32) -> f32 {
        match self {
            Normalization::Scale01 => v / 255.0,
            Normalization::Imagenet => (v / 255.0 - IMAGENET_MEAN[channel]) / IMAGENET_STD[channel],
        }
    }

    /// Value range `[lo, hi]` of normalized pixels in `channel`.
    pub fn range(self, channel: usize) -> (f32, f32) {
        (self.apply(channel, 0.0), self.apply(channel, 255.0))
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Scale01 => "scale01",
            Normalization::Imagenet => "imagenet",
        })
    }
}

impl FromStr for Normalization {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scale01" => Ok(Normalization::Scale01),
            "imagenet" | "imagenet_mean" => Ok(Normalization::Imagenet),
            other => Err(DataError::UnknownNormalization(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadOptions {
    pub size: usize,
    pub normalization: Normalization,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { size: 150, normalization: Normalization::Scale01 }
    }
}

/// A decoded, resized and normalized image with its one-hot label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `[3, size, size]`.
    pub pixels: Tensor<f32>,
    /// `[num_classes]`, one-hot.
    pub label: Tensor<f32>,
    pub class: usize,
    pub source_path: PathBuf,
}

pub(crate) fn one_hot(class: usize, num_classes: usize) -> Tensor<f32> {
    let mut t = Tensor::zeros([num_classes]);
    t.data_mut()[class] = 1.0;
    t
}

/// Decodes PNG/JPEG to 8-bit RGB; alpha is dropped and gray is replicated.
pub fn decode_rgb(path: &Path) -> Result<RgbImage, DataError> {
    let img = ::image::ImageReader::open(path)
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?
        .with_guessed_format()
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?
        .decode()
        .map_err(|e| DataError::Decode { path: path.to_path_buf(), reason: e.to_string() })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(DataError::ZeroDimension(path.to_path_buf()));
    }
    Ok(img.to_rgb8())
}

/// Source coordinate and blend weight for each destination index, with
/// half-pixel centers and edge clamping.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, (s - lo as f64) as f32)
        })
        .collect()
}

fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Bilinear resize of channel-planar `[c, h, w]` data to `[c, out_h, out_w]`.
pub fn resize_bilinear(src: &[f32], c: usize, h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    if h == out_h && w == out_w {
        return src.to_vec();
    }
    let ys = axis_taps(h, out_h);
    let xs = axis_taps(w, out_w);
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for plane in src.chunks(h * w).take(c) {
        for &(y0, y1, fy) in &ys {
            let (r0, r1) = (&plane[y0 * w..(y0 + 1) * w], &plane[y1 * w..(y1 + 1) * w]);
            for &(x0, x1, fx) in &xs {
                out.push(lerp(lerp(r0[x0], r0[x1], fx), lerp(r1[x0], r1[x1], fx), fy));
            }
        }
    }
    out
}

/// Planar `[3, h, w]` intensities in 0..=255.
fn planar(img: &RgbImage) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let mut out = vec![0.0; 3 * w * h];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for ch in 0..3 {
            out[ch * w * h + i] = px[ch] as f32;
        }
    }
    out
}

/// Decodes `path`, resizes to `opts.size` square and normalizes.
pub fn load_sample(path: &Path, class: usize, num_classes: usize, opts: LoadOptions) -> Result<Sample, DataError> {
    let img = decode_rgb(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let s = opts.size;
    let mut data = resize_bilinear(&planar(&img), 3, h, w, s, s);
    for (ch, plane) in data.chunks_mut(s * s).enumerate() {
        plane.iter_mut().for_each(|v| *v = opts.normalization.apply(ch, *v));
    }
    Ok(Sample {
        pixels: Tensor::new([3, s, s], data).expect("resize output length"),
        label: one_hot(class, num_classes),
        class,
        source_path: path.to_path_buf(),
    })
}
