//! The one-step reconstruction sampler: draw binary component states from
//! the responsibilities, sample new violations u_hat, and map them back to
//! data space through the pseudo-inverse of Lambda^T. On the augmented
//! model (identity block appended, so Lambda has full column rank) the
//! defining identity Lambda^T d_hat = u_hat holds on every draw.
//!
//! Run with: cargo run --release --example reconstruction

use fas::cd::{AugmentedModel, MixtureExpertSet};
use fas::{Result, RngStream};

fn main() -> Result<()> {
    let mut rng = RngStream::from_seed(4);
    // Wide (m > n) and tall (m < n) pre-augmentation shapes both work.
    for (n, m) in [(3, 5), (6, 2), (4, 4)] {
        let base = MixtureExpertSet::random_init(n, m, &mut rng);
        let aug = AugmentedModel::from_base(&base);
        let map = aug.model().reconstruction_map()?;

        let d: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let d_aug = aug.augment_case(&d)?;

        let mut worst = 0.0_f64;
        let mut mean_flip = 0.0;
        for _ in 0..1000 {
            let rec = aug.model().reconstruct_with(&d_aug, &map, &mut rng)?;
            let v = aug.model().violations(&rec.d_hat)?;
            for (a, b) in v.iter().zip(&rec.u_hat) {
                worst = worst.max((a - b).abs());
            }
            mean_flip += rec.s.iter().filter(|&&s| s).count() as f64 / m as f64;
        }
        println!(
            "n = {n}, m = {m}: max |Lambda^T d_hat - u_hat| = {worst:.2e}, \
             mean broad-component rate {:.2}",
            mean_flip / 1000.0
        );
    }
    Ok(())
}
