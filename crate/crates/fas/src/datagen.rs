//! Synthetic edge images, the anti-correlated noise process, and patch
//! extraction from grayscale images.
//!
//! An edge image is a straight intensity step at a random orientation and
//! position, softened with a logistic profile, with a low side and a high
//! side drawn from configurable intensity ranges. Noise draws one standard
//! normal per pixel, adds `self_amp * x` to the pixel and subtracts
//! `neighbor_amp * x` from each 4-connected neighbor, creating negative
//! short-range correlations.

use serde::{Deserialize, Serialize};

use crate::data::DataBatch;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::RngStream;

/// Parameters of the synthetic edge-image generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeImageParams {
    pub width: usize,
    pub height: usize,
    /// Range of the dark side intensity.
    pub low_range: (f64, f64),
    /// Range of the bright side intensity.
    pub high_range: (f64, f64),
    /// Slope of the logistic blend across the edge, in 1/pixels.
    pub blend_slope: f64,
    /// Noise amplitude added at each pixel.
    pub noise_self: f64,
    /// Noise amplitude subtracted from each 4-neighbor.
    pub noise_neighbor: f64,
    /// Replace pixels outside the inscribed circle with the edge midpoint
    /// intensity.
    pub circular_mask: bool,
}

impl Default for EdgeImageParams {
    fn default() -> Self {
        EdgeImageParams {
            width: 16,
            height: 16,
            low_range: (0.0, 0.3),
            high_range: (0.7, 1.0),
            blend_slope: 2.0,
            noise_self: 0.4,
            noise_neighbor: 0.1,
            circular_mask: false,
        }
    }
}

impl EdgeImageParams {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidInput(format!(
                "image must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        let (l0, l1) = self.low_range;
        let (h0, h1) = self.high_range;
        if !(0.0 <= l0 && l0 <= l1 && l1 <= h0 && h0 <= h1 && h1 <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "intensity ranges must satisfy 0 <= low <= high <= 1, got [{l0},{l1}] and [{h0},{h1}]"
            )));
        }
        if self.noise_self < 0.0 || self.noise_neighbor < 0.0 {
            return Err(Error::InvalidInput("noise amplitudes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Geometry and intensities of a generated edge.
#[derive(Debug, Clone, Copy)]
pub struct EdgeMeta {
    /// Orientation of the edge normal, in `[0, pi)`.
    pub angle: f64,
    /// Perpendicular offset of the edge line along the normal.
    pub offset: f64,
    pub low: f64,
    pub high: f64,
}

/// Intensity at signed distance `d` (pixels) from the edge line; the
/// positive-normal side is the high side.
pub fn edge_profile(d: f64, low: f64, high: f64, blend_slope: f64) -> f64 {
    low + (high - low) / (1.0 + (-blend_slope * d).exp())
}

/// Generate one edge image: logistic edge, optional circular mask, then the
/// anti-correlated noise process. Returns the flattened image and the edge
/// metadata.
pub fn generate_edge_image(
    params: &EdgeImageParams,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, EdgeMeta)> {
    params.validate()?;
    let (w, h) = (params.width, params.height);

    let angle = rng.uniform_in(0.0, std::f64::consts::PI);
    let (nx, ny) = (angle.cos(), angle.sin());
    // Offset range covering all projections of the image rectangle onto the
    // normal, so the line always intersects the bounding box.
    let corners = [
        (0.0, 0.0),
        (w as f64, 0.0),
        (0.0, h as f64),
        (w as f64, h as f64),
    ];
    let projs: Vec<f64> = corners.iter().map(|&(x, y)| nx * x + ny * y).collect();
    let pmin = projs.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = projs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let offset = rng.uniform_in(pmin, pmax);

    let low = rng.uniform_in(params.low_range.0, params.low_range.1);
    let high = rng.uniform_in(params.high_range.0, params.high_range.1);

    let mut pixels = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let d = nx * cx + ny * cy - offset;
            pixels[y * w + x] = edge_profile(d, low, high, params.blend_slope);
        }
    }

    if params.circular_mask {
        apply_circular_mask(&mut pixels, w, h, 0.5 * (low + high));
    }

    add_anticorrelated_noise(
        &mut pixels,
        w,
        h,
        params.noise_self,
        params.noise_neighbor,
        rng,
    )?;

    Ok((
        pixels,
        EdgeMeta {
            angle,
            offset,
            low,
            high,
        },
    ))
}

/// Set pixels outside the inscribed circle to `fill`. The circle is centered
/// on the image with radius `min(w, h) / 2`.
pub fn apply_circular_mask(pixels: &mut [f64], w: usize, h: usize, fill: f64) {
    let r = 0.5 * w.min(h) as f64;
    let (cx, cy) = (0.5 * w as f64, 0.5 * h as f64);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy > r * r {
                pixels[y * w + x] = fill;
            }
        }
    }
}

/// In-place anti-correlated noise: per pixel, draw `x ~ N(0,1)` (scan order),
/// add `self_amp * x` to the pixel and subtract `neighbor_amp * x` from each
/// in-bounds 4-neighbor. Neighbors outside the image are skipped.
pub fn add_anticorrelated_noise(
    pixels: &mut [f64],
    w: usize,
    h: usize,
    self_amp: f64,
    neighbor_amp: f64,
    rng: &mut RngStream,
) -> Result<()> {
    if pixels.len() != w * h {
        return Err(Error::DimensionMismatch {
            expected: w * h,
            got: pixels.len(),
        });
    }
    if self_amp < 0.0 || neighbor_amp < 0.0 {
        return Err(Error::InvalidInput("noise amplitudes must be >= 0".into()));
    }
    if self_amp == 0.0 && neighbor_amp == 0.0 {
        return Ok(());
    }
    for y in 0..h {
        for x in 0..w {
            let g = rng.normal();
            pixels[y * w + x] += self_amp * g;
            if x > 0 {
                pixels[y * w + x - 1] -= neighbor_amp * g;
            }
            if x + 1 < w {
                pixels[y * w + x + 1] -= neighbor_amp * g;
            }
            if y > 0 {
                pixels[(y - 1) * w + x] -= neighbor_amp * g;
            }
            if y + 1 < h {
                pixels[(y + 1) * w + x] -= neighbor_amp * g;
            }
        }
    }
    Ok(())
}

/// Generate a batch of edge images, one derived RNG stream per image.
pub fn generate_edge_batch(
    params: &EdgeImageParams,
    count: usize,
    rng: &RngStream,
) -> Result<DataBatch> {
    params.validate()?;
    let n = params.width * params.height;
    let mut batch = DataBatch::empty(n);
    for i in 0..count {
        let mut stream = rng.substream(rng.stream().wrapping_add(1 + i as u64));
        let (pixels, _) = generate_edge_image(params, &mut stream)?;
        batch.push_case(&pixels)?;
    }
    Ok(batch)
}

/// Optional noise applied to extracted patches.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseParams {
    pub self_amp: f64,
    pub neighbor_amp: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            self_amp: 0.4,
            neighbor_amp: 0.1,
        }
    }
}

/// Extract `count` square patches at uniformly random positions from
/// uniformly random source images, flattened row-major. Noise, when given,
/// is applied per patch.
pub fn extract_patches(
    images: &[GrayImage],
    patch_side: usize,
    count: usize,
    rng: &mut RngStream,
    noise: Option<NoiseParams>,
) -> Result<DataBatch> {
    if images.is_empty() {
        return Err(Error::InvalidInput("no source images".into()));
    }
    if patch_side == 0 {
        return Err(Error::InvalidInput("patch side must be >= 1".into()));
    }
    for (i, img) in images.iter().enumerate() {
        if img.width < patch_side || img.height < patch_side {
            return Err(Error::InvalidInput(format!(
                "source image {i} is {}x{}, smaller than patch side {patch_side}",
                img.width, img.height
            )));
        }
    }
    let n = patch_side * patch_side;
    let mut batch = DataBatch::empty(n);
    let mut patch = vec![0.0; n];
    for _ in 0..count {
        let img = &images[rng.below(images.len())];
        let x0 = rng.below(img.width - patch_side + 1);
        let y0 = rng.below(img.height - patch_side + 1);
        for py in 0..patch_side {
            for px in 0..patch_side {
                patch[py * patch_side + px] = img.get(x0 + px, y0 + py);
            }
        }
        if let Some(np) = noise {
            add_anticorrelated_noise(
                &mut patch,
                patch_side,
                patch_side,
                np.self_amp,
                np.neighbor_amp,
                rng,
            )?;
        }
        batch.push_case(&patch)?;
    }
    Ok(batch)
}
