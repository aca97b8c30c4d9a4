//! Run a single-site Gibbs chain on a tiny quantized model and compare the
//! empirical state frequencies against the enumerated joint distribution.
//!
//! Run with: cargo run --release --example gibbs_sampling

use fas::pl::{brute_force_joint, gibbs_chain, PlModel, QuantizedSpace};
use fas::simple::StudentTExpertSet;
use fas::stats::total_variation;
use fas::{Result, RngStream};

fn main() -> Result<()> {
    let mut rng = RngStream::from_seed(1);
    let experts = StudentTExpertSet::random_init(3, 2, 100.0, &mut rng)?;
    let model = PlModel::new(experts, QuantizedSpace::uniform(4)?);
    let table = brute_force_joint(&model)?;

    let start = vec![model.space.level(0); model.n()];
    let mut chain_rng = RngStream::new(1, 7);
    let states = gibbs_chain(&model, &start, 50_000, 1_000, &mut chain_rng)?;

    let mut counts = vec![0.0_f64; table.probs.len()];
    for state in &states {
        counts[table.index(state, &model.space)?] += 1.0;
    }
    for c in &mut counts {
        *c /= states.len() as f64;
    }

    let tv = total_variation(&counts, &table.probs);
    println!("{} sweeps over {} states", states.len(), table.probs.len());
    println!("total-variation distance to the enumerated joint: {tv:.4}");
    Ok(())
}
