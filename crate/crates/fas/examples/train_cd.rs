//! Recover a planted constraint subspace with CD-1 mixture experts.
//!
//! Data lives near a 2-dimensional subspace of R^4: along the two planted
//! constraint normals the coordinates are usually tiny and occasionally
//! large (a two-component Gaussian mixture), while the two free directions
//! are spread uniformly. Training should align the expert constraint
//! vectors with the planted normals and drive the two mixture variances
//! apart.
//!
//! Run with: cargo run --release --example train_cd

use fas::cd::{train_cd, CdTrainConfig, MixtureExpertSet};
use fas::linalg::{max_principal_angle, Matrix};
use fas::simple::FixedSource;
use fas::{DataBatch, Result, RngStream};

fn main() -> Result<()> {
    let normals = [
        [0.5, 0.5, 0.5, 0.5],
        [0.5, -0.5, 0.5, -0.5],
    ];
    let free = [
        [0.5, -0.5, -0.5, 0.5],
        [0.5, 0.5, -0.5, -0.5],
    ];

    let mut rng = RngStream::from_seed(21);
    let mut data = DataBatch::empty(4);
    for _ in 0..2000 {
        let mut d = [0.0_f64; 4];
        for nrm in &normals {
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

    let mut init_rng = RngStream::new(21, 1);
    let init = MixtureExpertSet::random_init(4, 2, &mut init_rng);
    let config = CdTrainConfig {
        updates: 8000,
        batch_size: 500,
        seed: 21,
        ..CdTrainConfig::default()
    };
    let (trained, trace) = train_cd(init, &mut FixedSource(&data), &config)?;

    let planted = Matrix::from_fn(4, 2, |i, j| normals[j][i]);
    let angle = max_principal_angle(&trained.lambda, &planted)?;
    println!(
        "largest principal angle to the planted span: {:.1} degrees",
        angle.to_degrees()
    );
    for j in 0..trained.m() {
        let v1 = trained.log_var1[j].exp();
        let v0 = trained.log_var0[j].exp();
        println!(
            "expert {j}: variance ratio (broad/narrow) = {:.1}",
            v1.max(v0) / v1.min(v0)
        );
    }
    let last = trace.last().unwrap();
    println!(
        "final mean reconstruction error: {:.4}",
        last.mean_recon_error
    );
    Ok(())
}
