//! Generate a batch of synthetic soft-edge images with anti-correlated
//! noise and write a few of them out as PGM files.
//!
//! Run with: cargo run --example edge_images

use fas::datagen::{generate_edge_batch, EdgeImageParams};
use fas::pgm::write_pgm;
use fas::stats::{mean, variance};
use fas::{GrayImage, Result, RngStream};

fn main() -> Result<()> {
    let params = EdgeImageParams::default();
    let rng = RngStream::from_seed(7);
    let batch = generate_edge_batch(&params, 1000, &rng)?;

    println!(
        "generated {} images ({}x{}), pixel mean {:.3}, variance {:.3}",
        batch.count(),
        params.width,
        params.height,
        mean(batch.values()),
        variance(batch.values()),
    );

    let dir = std::env::temp_dir().join("fas_edges");
    std::fs::create_dir_all(&dir)?;
    for i in 0..8 {
        let img = GrayImage::from_pixels(params.width, params.height, batch.case(i).to_vec())?;
        let path = dir.join(format!("edge_{i}.pgm"));
        write_pgm(&img, &path, 255)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
