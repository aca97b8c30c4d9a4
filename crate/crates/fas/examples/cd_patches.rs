//! Larger-scale smoke run: many mixture experts on noised patches from
//! synthetic natural-image stand-ins (smooth shading plus soft edges).

use fas::cd::{train_cd, MixtureExpertSet, CdTrainConfig};
use fas::datagen::{edge_profile, extract_patches, NoiseParams};
use fas::simple::FixedSource;
use fas::{GrayImage, Result, RngStream};

fn synth_image(side: usize, rng: &mut RngStream) -> GrayImage {
    let mut img = GrayImage::new(side, side);
    // Smooth shading: a few long-wavelength gratings at random orientation.
    let mut components = Vec::new();
    for _ in 0..3 {
        let angle = rng.uniform_in(0.0, std::f64::consts::PI);
        let freq = rng.uniform_in(0.5, 2.0) / side as f64;
        let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
        let amp = rng.uniform_in(0.05, 0.2);
        components.push((angle.cos(), angle.sin(), freq, phase, amp));
    }
    // Soft intensity edges at random positions and orientations.
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
            for &(ax, ay, freq, phase, amp) in &components {
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

fn main() -> Result<()> {
    let mut rng = RngStream::from_seed(31);
    let images: Vec<GrayImage> = (0..20).map(|_| synth_image(64, &mut rng)).collect();
    let patches = extract_patches(&images, 16, 5000, &mut rng, Some(NoiseParams::default()))?;
    println!("extracted {} noised 16x16 patches", patches.count());

    let mut init_rng = RngStream::new(31, 1);
    let init = MixtureExpertSet::random_init(256, 256, &mut init_rng);
    let config = CdTrainConfig {
        updates: 1000,
        seed: 31,
        ..CdTrainConfig::default()
    };
    let t = std::time::Instant::now();
    let (trained, trace) = train_cd(init, &mut FixedSource(&patches), &config)?;
    println!("1000 updates in {:?}", t.elapsed());

    let finite = trained.lambda.iter().all(|x| x.is_finite())
        && trained.mix.iter().all(|x| x.is_finite())
        && trained.log_var1.iter().all(|x| x.is_finite())
        && trained.log_var0.iter().all(|x| x.is_finite());
    println!("all parameters finite: {finite}");

    let decile = trace.len() / 10;
    let median = |xs: &mut [f64]| {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs[xs.len() / 2]
    };
    let mut first: Vec<f64> = trace[..decile].iter().map(|d| d.mean_recon_error).collect();
    let mut last: Vec<f64> = trace[trace.len() - decile..]
        .iter()
        .map(|d| d.mean_recon_error)
        .collect();
    let (mf, ml) = (median(&mut first), median(&mut last));
    println!("median recon error: first decile {mf:.4}, last decile {ml:.4}");
    Ok(())
}
