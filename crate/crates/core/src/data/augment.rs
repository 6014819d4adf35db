use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::Sample;
use crate::error::DataError;
use crate::tensor::Tensor;

/// Ranges for the random geometric augmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Rotation drawn from `U(-max, +max)` degrees.
    pub rotation_max_deg: f64,
    /// Translation per axis drawn from `U(-max, +max)` times the image size.
    pub shift_max_frac: f64,
    /// Zoom factor drawn from `U(1 - max, 1 + max)`.
    pub zoom_max_frac: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { enabled: true, rotation_max_deg: 20.0, shift_max_frac: 0.10, zoom_max_frac: 0.10 }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let finite = [self.rotation_max_deg, self.shift_max_frac, self.zoom_max_frac].iter().all(|v| v.is_finite());
        if !finite || self.rotation_max_deg < 0.0 || self.shift_max_frac < 0.0 || self.zoom_max_frac < 0.0 {
            return Err(DataError::InvalidAugment("magnitudes must be finite and nonnegative".into()));
        }
        if self.shift_max_frac >= 1.0 || self.zoom_max_frac >= 1.0 {
            return Err(DataError::InvalidAugment("shift and zoom fractions must be below 1".into()));
        }
        Ok(())
    }

    /// Draws one transform: rotation, then x/y shift, then zoom.
    pub fn draw<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> AugmentParams {
        let mut sym = |max: f64| (2.0 * rng.random::<f64>() - 1.0) * max;
        let rotation_deg = sym(self.rotation_max_deg);
        let shift_x = sym(self.shift_max_frac) * size as f64;
        let shift_y = sym(self.shift_max_frac) * size as f64;
        let zoom = 1.0 + sym(self.zoom_max_frac);
        AugmentParams { rotation_deg, shift_x, shift_y, zoom }
    }
}

/// One concrete transform. Rotation is counter-clockwise as displayed
/// (y axis pointing down), about the image center; shifts are in pixels;
/// `zoom > 1` magnifies about the center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    pub zoom: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self { rotation_deg: 0.0, shift_x: 0.0, shift_y: 0.0, zoom: 1.0 };
}

/// Bilinear sample of a `[h, w]` plane with edge replication.
fn sample(plane: &[f32], h: usize, w: usize, x: f64, y: f64) -> f32 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
    let at = |yy: usize, xx: usize| plane[yy * w + xx];
    let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
    let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
    top + (bottom - top) * fy
}

/// Applies `params` to a `[c, h, w]` tensor by inverse mapping each output
/// pixel into the source.
pub fn apply_transform(pixels: &Tensor<f32>, params: &AugmentParams) -> Tensor<f32> {
    let [c, h, w] = match *pixels.shape() {
        [c, h, w] => [c, h, w],
        _ => panic!("apply_transform expects [c, h, w], got {:?}", pixels.shape()),
    };
    if *params == AugmentParams::IDENTITY {
        return pixels.clone();
    }
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let theta = params.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let mut out = Vec::with_capacity(pixels.len());
    for plane in pixels.data().chunks(h * w).take(c) {
        for qy in 0..h {
            for qx in 0..w {
                // undo zoom, then shift, then rotation
                let zx = (qx as f64 - cx) / params.zoom + cx - params.shift_x;
                let zy = (qy as f64 - cy) / params.zoom + cy - params.shift_y;
                let (dx, dy) = (zx - cx, zy - cy);
                let sx = cos * dx - sin * dy + cx;
                let sy = sin * dx + cos * dy + cy;
                out.push(sample(plane, h, w, sx, sy));
            }
        }
    }
    Tensor::new(pixels.shape(), out).expect("same shape")
}

/// Random rotation, shift and zoom of a sample; the label is untouched.
pub fn augment<R: Rng + ?Sized>(s: &Sample, cfg: &AugmentConfig, rng: &mut R) -> Sample {
    if !cfg.enabled {
        return s.clone();
    }
    let size = s.pixels.shape()[2];
    let params = cfg.draw(size, rng);
    Sample { pixels: apply_transform(&s.pixels, &params), ..s.clone() }
}
