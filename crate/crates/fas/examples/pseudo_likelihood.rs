//! Fit a quantized model by exact pseudo-likelihood on data drawn from a
//! planted constraint, and verify the fast conditionals against the
//! brute-force enumeration oracle along the way.
//!
//! Run with: cargo run --release --example pseudo_likelihood

use fas::pl::{
    brute_force_joint, conditional_distribution, train_pl, PlModel, PlTrainConfig, QuantizedSpace,
};
use fas::simple::StudentTExpertSet;
use fas::{DataBatch, Result, RngStream};

fn main() -> Result<()> {
    // Planted model: one strong constraint on four pixels, eight levels.
    let space = QuantizedSpace::uniform(8)?;
    let planted = StudentTExpertSet {
        n: 4,
        k: 100.0,
        weights: vec![vec![2.0, -2.0, 2.0, -2.0]],
    };
    let truth = PlModel::new(planted, space.clone());
    let table = brute_force_joint(&truth)?;

    // Oracle spot check: fast conditionals match the enumerated joint.
    let probe = table.state(1234, &space);
    let fast = conditional_distribution(&truth, &probe, 2)?;
    let exact = table.conditional(&probe, 2, &space)?;
    let dev = fast
        .iter()
        .zip(&exact)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0_f64, f64::max);
    println!("conditional oracle deviation: {dev:.2e}");

    // Draw training data from the exact joint.
    let mut rng = RngStream::from_seed(123);
    let mut data = DataBatch::empty(4);
    for _ in 0..400 {
        let s = rng.categorical(&table.probs);
        data.push_case(&table.state(s, &space))?;
    }

    let mut init_rng = RngStream::from_seed(321);
    let init = StudentTExpertSet {
        n: 4,
        k: 100.0,
        weights: vec![(0..4).map(|_| 0.1 * init_rng.normal()).collect()],
    };
    let model = PlModel::new(init, space);
    let config = PlTrainConfig {
        iterations: 300,
        ..PlTrainConfig::default()
    };
    let (trained, trace) = train_pl(model, &data, &config)?;

    let w = &trained.experts.weights[0];
    let p = &truth.experts.weights[0];
    let dot: f64 = w.iter().zip(p).map(|(a, b)| a * b).sum();
    let cosine = dot.abs()
        / (w.iter().map(|x| x * x).sum::<f64>().sqrt()
            * p.iter().map(|x| x * x).sum::<f64>().sqrt());

    println!(
        "log pseudo-likelihood: {:.2} -> {:.2}",
        trace[0],
        trace[trace.len() - 1]
    );
    println!("|cosine(learned, planted)| = {cosine:.4}");
    Ok(())
}
