//! Filter-mosaic rendering and violation histograms.

use crate::data::DataBatch;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::simple::StudentTExpertSet;

/// Mid-gray used for zero weights and tile separators.
const MID_GRAY: f64 = 0.5;

/// Tile a set of filters into one image. Each filter is normalized on its
/// own: zero maps to mid-gray and the gray scale is symmetric in the
/// filter's max absolute weight, so positive weights render white and
/// negative black. Tiles are separated by a 1-pixel mid-gray border.
pub fn render_filter_mosaic(
    filters: &[Vec<f64>],
    patch_width: usize,
    patch_height: usize,
    grid_cols: usize,
) -> Result<GrayImage> {
    if filters.is_empty() || grid_cols == 0 {
        return Err(Error::InvalidInput("no filters or zero columns".into()));
    }
    let n = patch_width * patch_height;
    for (j, f) in filters.iter().enumerate() {
        if f.len() != n {
            return Err(Error::InvalidInput(format!(
                "filter {j} has length {}, expected {n}",
                f.len()
            )));
        }
    }
    let grid_rows = filters.len().div_ceil(grid_cols);
    let out_w = grid_cols * patch_width + (grid_cols - 1);
    let out_h = grid_rows * patch_height + (grid_rows - 1);
    let mut img = GrayImage::from_pixels(out_w, out_h, vec![MID_GRAY; out_w * out_h])?;

    for (idx, filter) in filters.iter().enumerate() {
        let (gc, gr) = (idx % grid_cols, idx / grid_cols);
        let (x0, y0) = (gc * (patch_width + 1), gr * (patch_height + 1));
        let max_abs = filter.iter().fold(0.0_f64, |m, &w| m.max(w.abs()));
        for py in 0..patch_height {
            for px in 0..patch_width {
                let w = filter[py * patch_width + px];
                let gray = if max_abs == 0.0 {
                    MID_GRAY
                } else {
                    MID_GRAY + MID_GRAY * w / max_abs
                };
                img.set(x0 + px, y0 + py, gray);
            }
        }
    }
    Ok(img)
}

/// Binned counts over sorted bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Uniform bins spanning the observed range symmetrically around zero.
    pub fn symmetric(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidInput("need at least one bin".into()));
        }
        let max_abs = values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let half = if max_abs == 0.0 { 1.0 } else { max_abs };
        let lo = -half;
        let width = 2.0 * half / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let mut b = ((v - lo) / width) as usize;
            if b >= bins {
                b = bins - 1;
            }
            counts[b] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// CSV body with columns (bin-low, bin-high, count), LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        for (b, &c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[b], self.edges[b + 1], c));
        }
        out
    }
}

/// Pooled filter outputs of every expert on every case, binned.
pub fn violation_histogram(
    model: &StudentTExpertSet,
    batch: &DataBatch,
    bins: usize,
) -> Result<Histogram> {
    let outputs = model.filter_outputs(batch)?;
    Histogram::symmetric(&outputs, bins)
}
