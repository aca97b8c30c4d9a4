//! Render a trained filter set as a PGM mosaic and export the pooled
//! filter-output histogram as CSV.
//!
//! Run with: cargo run --release --example inspect

use fas::datagen::{generate_edge_batch, EdgeImageParams};
use fas::simple::{train_simple, EdgeSource, SimpleTrainConfig, StudentTExpertSet};
use fas::pgm::write_pgm;
use fas::stats::excess_kurtosis;
use fas::viz::{render_filter_mosaic, violation_histogram};
use fas::{Result, RngStream};

fn main() -> Result<()> {
    let params = EdgeImageParams::default();
    let n = params.width * params.height;
    let config = SimpleTrainConfig {
        batch_size: 200,
        updates: 200,
        seed: 17,
        ..SimpleTrainConfig::default()
    };
    let mut init_rng = RngStream::new(config.seed, 1);
    let init = StudentTExpertSet::random_init(n, 25, 100.0, &mut init_rng)?;
    let mut source = EdgeSource::new(params.clone());
    let (trained, _) = train_simple(init, &mut source, &config)?;

    let dir = std::env::temp_dir().join("fas_inspect");
    std::fs::create_dir_all(&dir)?;

    let mosaic = render_filter_mosaic(&trained.weights, params.width, params.height, 5)?;
    let mosaic_path = dir.join("filters.pgm");
    write_pgm(&mosaic, &mosaic_path, 255)?;
    println!("wrote {}x{} mosaic to {}", mosaic.width, mosaic.height, mosaic_path.display());

    let held_out = generate_edge_batch(&params, 1000, &RngStream::new(99, 0))?;
    let hist = violation_histogram(&trained, &held_out, 64)?;
    let csv_path = dir.join("violations.csv");
    std::fs::write(&csv_path, hist.to_csv())?;
    let outputs = trained.filter_outputs(&held_out)?;
    println!(
        "wrote histogram ({} outputs, excess kurtosis {:.2}) to {}",
        hist.total(),
        excess_kurtosis(&outputs),
        csv_path.display()
    );
    Ok(())
}
