//! Train student-t experts on fresh edge images by momentum gradient
//! descent and report the energy improvement on held-out images.
//!
//! Run with: cargo run --release --example train_simple

use fas::datagen::{generate_edge_batch, EdgeImageParams};
use fas::simple::{
    rescale_weights, total_energy, train_simple, EdgeSource, SimpleTrainConfig, StudentTExpertSet,
};
use fas::{Result, RngStream};

fn main() -> Result<()> {
    let params = EdgeImageParams::default();
    let n = params.width * params.height;
    let config = SimpleTrainConfig {
        batch_size: 200,
        updates: 1000,
        seed: 11,
        ..SimpleTrainConfig::default()
    };

    let mut init_rng = RngStream::new(config.seed, 1);
    let mut init = StudentTExpertSet::random_init(n, 25, 100.0, &mut init_rng)?;
    rescale_weights(&mut init)?;

    let held_out = generate_edge_batch(&params, 500, &RngStream::new(99, 0))?;
    let (_, before) = total_energy(&init, &held_out)?;

    let mut source = EdgeSource::new(params);
    let (trained, trace) = train_simple(init, &mut source, &config)?;
    let (_, after) = total_energy(&trained, &held_out)?;

    println!("trace: first mean batch energy {:.3}, last {:.3}", trace[0], trace[trace.len() - 1]);
    println!(
        "held-out mean energy: {:.3} -> {:.3} ({:.1}% reduction)",
        before / held_out.count() as f64,
        after / held_out.count() as f64,
        100.0 * (1.0 - after / before),
    );
    Ok(())
}
