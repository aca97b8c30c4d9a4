//! Shared helpers for the integration suites.

use fas::datagen::{edge_profile, extract_patches, NoiseParams};
use fas::linalg::Matrix;
use fas::pl::{PlModel, QuantizedSpace};
use fas::simple::StudentTExpertSet;
use fas::{DataBatch, GrayImage, Result, RngStream};

/// Relative agreement with a floor so near-zero derivative pairs are
/// compared absolutely.
pub fn close_rel(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / scale <= tol
}

/// Central finite difference of `f` at step `h`.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Random student-t expert model on a uniform lattice.
pub fn random_pl_model(n: usize, a: usize, m: usize, k: f64, rng: &mut RngStream) -> PlModel {
    let experts = StudentTExpertSet {
        n,
        k,
        weights: (0..m)
            .map(|_| (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect())
            .collect(),
    };
    PlModel::new(experts, QuantizedSpace::uniform(a).unwrap())
}

/// Batch of random on-lattice configurations.
pub fn random_lattice_batch(
    space: &QuantizedSpace,
    n: usize,
    count: usize,
    rng: &mut RngStream,
) -> DataBatch {
    let mut batch = DataBatch::empty(n);
    for _ in 0..count {
        let case: Vec<f64> = (0..n).map(|_| space.level(rng.below(space.a()))).collect();
        batch.push_case(&case).unwrap();
    }
    batch
}

/// The two planted orthonormal constraint normals used by the subspace
/// recovery runs.
pub const PLANTED_NORMALS: [[f64; 4]; 2] = [[0.5, 0.5, 0.5, 0.5], [0.5, -0.5, 0.5, -0.5]];

/// Samples near a 2-dimensional subspace of R^4: mixture noise along the
/// planted normals (std 0.05 with probability 0.9, else std 1.0), uniform
/// spread along the two free directions.
pub fn planted_subspace_data(count: usize, rng: &mut RngStream) -> Result<DataBatch> {
    let free = [[0.5, -0.5, -0.5, 0.5], [0.5, 0.5, -0.5, -0.5]];
    let mut data = DataBatch::empty(4);
    for _ in 0..count {
        let mut d = [0.0_f64; 4];
        for nrm in &PLANTED_NORMALS {
            let std = if rng.bernoulli(0.9) { 0.05 } else { 1.0 };
            let c = std * rng.normal();
            for (di, ni) in d.iter_mut().zip(nrm) {
                *di += c * ni;
            }
        }
        for f in &free {
            let c = rng.uniform_in(-1.0, 1.0);
            for (di, fi) in d.iter_mut().zip(f) {
                *di += c * fi;
            }
        }
        data.push_case(&d)?;
    }
    Ok(data)
}

pub fn planted_normal_matrix() -> Matrix {
    Matrix::from_fn(4, 2, |i, j| PLANTED_NORMALS[j][i])
}

/// Synthetic natural-image stand-in: smooth low-frequency shading plus a
/// few soft intensity edges.
pub fn synth_natural_image(side: usize, rng: &mut RngStream) -> GrayImage {
    let mut img = GrayImage::new(side, side);
    let mut gratings = Vec::new();
    for _ in 0..3 {
        let angle = rng.uniform_in(0.0, std::f64::consts::PI);
        let freq = rng.uniform_in(0.5, 2.0) / side as f64;
        let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
        let amp = rng.uniform_in(0.05, 0.2);
        gratings.push((angle.cos(), angle.sin(), freq, phase, amp));
    }
    let mut edges = Vec::new();
    for _ in 0..4 {
        let angle = rng.uniform_in(0.0, std::f64::consts::PI);
        let offset = rng.uniform_in(-(side as f64) * 0.5, side as f64 * 0.5);
        let step = rng.uniform_in(-0.3, 0.3);
        edges.push((angle.cos(), angle.sin(), offset, step));
    }
    for y in 0..side {
        for x in 0..side {
            let (cx, cy) = (x as f64 - side as f64 / 2.0, y as f64 - side as f64 / 2.0);
            let mut v = 0.5;
            for &(ax, ay, freq, phase, amp) in &gratings {
                v += amp * (std::f64::consts::TAU * freq * (ax * cx + ay * cy) + phase).sin();
            }
            for &(ax, ay, offset, step) in &edges {
                let d = ax * cx + ay * cy - offset;
                v += step * (edge_profile(d, 0.0, 1.0, 1.0) - 0.5);
            }
            img.set(x, y, v.clamp(0.0, 1.0));
        }
    }
    img
}

/// Noised 16x16 patches from a stack of synthetic natural images.
pub fn natural_patches(count: usize, rng: &mut RngStream) -> Result<DataBatch> {
    let images: Vec<GrayImage> = (0..20).map(|_| synth_natural_image(64, rng)).collect();
    extract_patches(&images, 16, count, rng, Some(NoiseParams::default()))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}
