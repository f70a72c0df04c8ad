//! Training-time descriptor augmentation.
//!
//! Patch mode treats the descriptor as a flattened `h x w x c` raster
//! (channel-interleaved, index `(y * w + x) * c + ch`) and applies a
//! horizontal flip followed by a random rotation with bilinear resampling,
//! filling out-of-bounds samples with zero. Abstract mode perturbs the
//! descriptor the same way the scenario generator perturbs views: additive
//! Gaussian noise plus occlusion zeroing a random coordinate subset.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum AugmentMode {
    /// Pass descriptors through unchanged.
    None,
    Abstract {
        noise_sigma: f64,
        occlusion_fraction: f64,
    },
    Patch {
        height: usize,
        width: usize,
        channels: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    /// Rotation bound in degrees for patch mode; the angle is drawn
    /// uniformly from [-max, max].
    pub max_rotation_deg: f64,
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            mode: AugmentMode::None,
            max_rotation_deg: 10.0,
        }
    }

    pub fn patch(height: usize, width: usize, channels: usize) -> Self {
        Self {
            mode: AugmentMode::Patch {
                height,
                width,
                channels,
            },
            max_rotation_deg: 10.0,
        }
    }
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentError {
    PatchShapeMismatch {
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for AugmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentError::PatchShapeMismatch { expected, got } => write!(
                f,
                "descriptor length {got} does not match patch dims (expected {expected})"
            ),
        }
    }
}

impl std::error::Error for AugmentError {}

pub fn augment(
    descriptor: &[f64],
    config: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, AugmentError> {
    match config.mode {
        AugmentMode::None => Ok(descriptor.to_vec()),
        AugmentMode::Abstract {
            noise_sigma,
            occlusion_fraction,
        } => {
            let mut out = descriptor.to_vec();
            if noise_sigma > 0.0 {
                let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
                for v in &mut out {
                    *v += normal.sample(rng);
                }
            }
            let occluded = (occlusion_fraction * out.len() as f64).floor() as usize;
            for _ in 0..occluded {
                let idx = rng.random_range(0..out.len());
                out[idx] = 0.0;
            }
            Ok(out)
        }
        AugmentMode::Patch {
            height,
            width,
            channels,
        } => {
            let expected = height * width * channels;
            if descriptor.len() != expected {
                return Err(AugmentError::PatchShapeMismatch {
                    expected,
                    got: descriptor.len(),
                });
            }
            let flipped = flip_horizontal(descriptor, height, width, channels);
            let angle_deg = if config.max_rotation_deg > 0.0 {
                rng.random_range(-config.max_rotation_deg..config.max_rotation_deg)
            } else {
                0.0
            };
            Ok(rotate_bilinear(
                &flipped,
                height,
                width,
                channels,
                angle_deg.to_radians(),
            ))
        }
    }
}

pub fn flip_horizontal(patch: &[f64], height: usize, width: usize, channels: usize) -> Vec<f64> {
    let mut out = vec![0.0; patch.len()];
    for y in 0..height {
        for x in 0..width {
            for ch in 0..channels {
                let src = (y * width + (width - 1 - x)) * channels + ch;
                let dst = (y * width + x) * channels + ch;
                out[dst] = patch[src];
            }
        }
    }
    out
}

/// Rotates around the patch center; each output pixel samples the source at
/// the inverse-rotated location with bilinear interpolation, zero outside.
pub fn rotate_bilinear(
    patch: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    angle_rad: f64,
) -> Vec<f64> {
    if angle_rad == 0.0 {
        return patch.to_vec();
    }
    let (sin, cos) = angle_rad.sin_cos();
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; patch.len()];
    for y in 0..height {
        for x in 0..width {
            // Inverse mapping: rotate the output coordinate back by -angle.
            let dy = y as f64 - cy;
            let dx = x as f64 - cx;
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            for ch in 0..channels {
                out[(y * width + x) * channels + ch] =
                    sample_bilinear(patch, height, width, channels, sy, sx, ch);
            }
        }
    }
    out
}

fn sample_bilinear(
    patch: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    y: f64,
    x: f64,
    ch: usize,
) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let mut acc = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let py = y0 + dy;
            let px = x0 + dx;
            let inside =
                py >= 0.0 && px >= 0.0 && (py as usize) < height && (px as usize) < width;
            let v = if inside {
                patch[((py as usize) * width + (px as usize)) * channels + ch]
            } else {
                0.0
            };
            acc += wy * wx * v;
        }
    }
    acc
}
