//! The simplistic constraint learner: `m` linear constraints with a shared
//! student-t violation cost `log(1 + k v^2)`, fitted by gradient descent on
//! the summed cost while repeatedly rescaling each weight vector to sum to
//! one. Training cases can be reweighted by their own total violation energy
//! relative to the batch mean, which pushes uncommitted experts toward
//! constraints the others have not found.

use serde::{Deserialize, Serialize};

use crate::data::DataBatch;
use crate::datagen::{generate_edge_batch, EdgeImageParams};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `m` linear constraints of dimension `n` with shared stiffness `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTExpertSet {
    pub n: usize,
    pub k: f64,
    /// One weight vector per expert, each of length `n`.
    pub weights: Vec<Vec<f64>>,
}

impl StudentTExpertSet {
    pub fn m(&self) -> usize {
        self.weights.len()
    }

    /// Small random initialization, `N(0, 0.01)` entries, followed by one
    /// rescale so every weight vector sums to one.
    pub fn random_init(n: usize, m: usize, k: f64, rng: &mut RngStream) -> Result<Self> {
        let weights = (0..m)
            .map(|_| (0..n).map(|_| 0.1 * rng.normal()).collect())
            .collect();
        let mut model = StudentTExpertSet { n, k, weights };
        rescale_weights(&mut model)?;
        Ok(model)
    }

    /// Filter outputs `v_j(d^c)` for every expert and case, pooled.
    pub fn filter_outputs(&self, batch: &DataBatch) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.m() * batch.count());
        for case in batch.cases() {
            for w in &self.weights {
                out.push(violation(w, case)?);
            }
        }
        Ok(out)
    }
}

/// Linear violation `v = sum_i w_i d_i`.
pub fn violation(w: &[f64], d: &[f64]) -> Result<f64> {
    if w.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: d.len(),
        });
    }
    Ok(w.iter().zip(d).map(|(wi, di)| wi * di).sum())
}

/// Student-t violation cost `log(1 + k v^2)` (additive constant dropped).
pub fn violation_energy(v: f64, k: f64) -> f64 {
    (1.0 + k * v * v).ln()
}

/// d/dv of [`violation_energy`].
#[inline]
fn energy_slope(v: f64, k: f64) -> f64 {
    2.0 * k * v / (1.0 + k * v * v)
}

/// Per-case energies `E_c = sum_j log(1 + k v_j(d^c)^2)` and their sum.
pub fn total_energy(model: &StudentTExpertSet, batch: &DataBatch) -> Result<(Vec<f64>, f64)> {
    if batch.count() > 0 && batch.n() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            got: batch.n(),
        });
    }
    let mut per_case = Vec::with_capacity(batch.count());
    for case in batch.cases() {
        let mut e = 0.0;
        for w in &model.weights {
            e += violation_energy(violation(w, case)?, model.k);
        }
        per_case.push(e);
    }
    let total = per_case.iter().sum();
    Ok((per_case, total))
}

/// Gradient of the case-weighted total energy with respect to every expert
/// weight: for expert `j`, `sum_c g_c * 2 k v_j / (1 + k v_j^2) * d^c`.
pub fn energy_gradient(
    model: &StudentTExpertSet,
    batch: &DataBatch,
    case_weights: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if case_weights.len() != batch.count() {
        return Err(Error::DimensionMismatch {
            expected: batch.count(),
            got: case_weights.len(),
        });
    }
    if case_weights.iter().any(|&g| g < 0.0) {
        return Err(Error::InvalidInput("case weights must be nonnegative".into()));
    }
    let mut grads = vec![vec![0.0; model.n]; model.m()];
    for (c, case) in batch.cases().enumerate() {
        let g = case_weights[c];
        for (j, w) in model.weights.iter().enumerate() {
            let slope = g * energy_slope(violation(w, case)?, model.k);
            let gj = &mut grads[j];
            for (gi, di) in gj.iter_mut().zip(case) {
                *gi += slope * di;
            }
        }
    }
    Ok(grads)
}

/// Divide each weight vector by its component sum so it sums to one.
pub fn rescale_weights(model: &mut StudentTExpertSet) -> Result<()> {
    for (j, w) in model.weights.iter_mut().enumerate() {
        let sum: f64 = w.iter().sum();
        if sum.abs() < 1e-8 {
            return Err(Error::DegenerateConstraint { expert: j, sum });
        }
        for wi in w.iter_mut() {
            *wi /= sum;
        }
    }
    Ok(())
}

/// Energy-proportional case weights `g_c = E_c / mean(E)`. A zero-mean batch
/// (all energies zero) gets unit weights.
pub fn energy_case_weights(per_case: &[f64]) -> Vec<f64> {
    let mean = crate::stats::mean(per_case);
    if mean <= 0.0 {
        return vec![1.0; per_case.len()];
    }
    per_case.iter().map(|&e| e / mean).collect()
}

/// Training configuration for [`train_simple`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimpleTrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub updates: usize,
    pub reweight_by_energy: bool,
    pub seed: u64,
}

impl Default for SimpleTrainConfig {
    fn default() -> Self {
        SimpleTrainConfig {
            learning_rate: 2e-4,
            momentum: 0.98,
            batch_size: 1000,
            updates: 4000,
            reweight_by_energy: true,
            seed: 0,
        }
    }
}

impl SimpleTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput("momentum must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// A source of training batches of fixed dimension.
pub trait BatchSource {
    fn dim(&self) -> usize;
    fn next_batch(&mut self, size: usize, rng: &mut RngStream) -> Result<DataBatch>;
}

/// Samples minibatches with replacement from a fixed batch.
pub struct FixedSource<'a>(pub &'a DataBatch);

impl BatchSource for FixedSource<'_> {
    fn dim(&self) -> usize {
        self.0.n()
    }

    fn next_batch(&mut self, size: usize, rng: &mut RngStream) -> Result<DataBatch> {
        if self.0.count() == 0 {
            return Err(Error::InvalidInput("empty data batch".into()));
        }
        Ok(self.0.sample_with_replacement(size, rng))
    }
}

/// Generates a fresh batch of edge images per request.
pub struct EdgeSource {
    pub params: EdgeImageParams,
    counter: u64,
}

impl EdgeSource {
    pub fn new(params: EdgeImageParams) -> Self {
        EdgeSource { params, counter: 0 }
    }
}

impl BatchSource for EdgeSource {
    fn dim(&self) -> usize {
        self.params.width * self.params.height
    }

    fn next_batch(&mut self, size: usize, rng: &mut RngStream) -> Result<DataBatch> {
        // Disjoint stream block per batch.
        self.counter += 1;
        let root = rng.substream(rng.stream() ^ (self.counter << 24));
        generate_edge_batch(&self.params, size, &root)
    }
}

/// Per-update mean batch energy, recorded before the weight update.
pub type EnergyTrace = Vec<f64>;

/// Fit the expert set: each update rescales the weights to sum to one, then
/// takes one momentum gradient-descent step on the (optionally case-
/// reweighted) batch energy. A final rescale leaves the returned model on the
/// constraint surface.
pub fn train_simple(
    mut model: StudentTExpertSet,
    source: &mut dyn BatchSource,
    config: &SimpleTrainConfig,
) -> Result<(StudentTExpertSet, EnergyTrace)> {
    config.validate()?;
    if source.dim() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            got: source.dim(),
        });
    }
    let mut rng = RngStream::from_seed(config.seed);
    let mut velocity = vec![vec![0.0; model.n]; model.m()];
    let mut trace = Vec::with_capacity(config.updates);

    for update in 0..config.updates {
        rescale_weights(&mut model)?;
        let batch = source.next_batch(config.batch_size, &mut rng)?;
        let (per_case, total) = total_energy(&model, &batch)?;
        if !total.is_finite() {
            return Err(Error::Diverged { update });
        }
        trace.push(total / batch.count().max(1) as f64);

        let case_weights = if config.reweight_by_energy {
            energy_case_weights(&per_case)
        } else {
            vec![1.0; batch.count()]
        };
        let grads = energy_gradient(&model, &batch, &case_weights)?;
        // The step uses the per-case mean gradient (batch-size independent)
        // with its component along the all-ones direction removed. Without
        // that removal every step would leave the constraint surface only
        // for the rescale to stretch the whole filter back, and on
        // all-positive data that stretch compounds into runaway filter
        // growth.
        let inv = 1.0 / batch.count().max(1) as f64;
        for j in 0..model.m() {
            let dc = grads[j].iter().sum::<f64>() / model.n as f64;
            for i in 0..model.n {
                velocity[j][i] = config.momentum * velocity[j][i]
                    - config.learning_rate * inv * (grads[j][i] - dc);
                model.weights[j][i] += velocity[j][i];
            }
        }
    }
    rescale_weights(&mut model)?;
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_batch() -> DataBatch {
        DataBatch::from_values(3, vec![0.2, 0.5, 0.9, 0.8, 0.1, 0.4, 0.3, 0.3, 0.3]).unwrap()
    }

    #[test]
    fn violation_basics() {
        assert_eq!(violation(&[1.0, -2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(violation(&[0.5, 0.5], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(violation(&[1.0, 0.0, 0.0], &[0.3, 9.0, 9.0]).unwrap(), 0.3);
        assert!(violation(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn violation_energy_values() {
        assert_eq!(violation_energy(0.0, 100.0), 0.0);
        assert!((violation_energy(0.1, 100.0) - 2.0_f64.ln()).abs() < 1e-12);
        assert_eq!(violation_energy(0.3, 7.0), violation_energy(-0.3, 7.0));
    }

    #[test]
    fn violation_energy_monotone_in_magnitude() {
        let mut prev = -1.0;
        for i in 0..100 {
            let v = i as f64 * 0.05;
            let e = violation_energy(v, 100.0);
            assert!(e >= 0.0);
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn total_energy_empty_batch() {
        let model = StudentTExpertSet {
            n: 3,
            k: 100.0,
            weights: vec![vec![0.5, 0.25, 0.25]],
        };
        let batch = DataBatch::empty(3);
        let (per_case, total) = total_energy(&model, &batch).unwrap();
        assert!(per_case.is_empty());
        assert_eq!(total, 0.0);
    }

    #[test]
    fn total_energy_single_term() {
        // One expert, one case, arranged so v = 0.1 with k = 100.
        let model = StudentTExpertSet {
            n: 2,
            k: 100.0,
            weights: vec![vec![1.0, 0.0]],
        };
        let batch = DataBatch::from_values(2, vec![0.1, 0.7]).unwrap();
        let (_, total) = total_energy(&model, &batch).unwrap();
        assert!((total - 2.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn total_energy_matches_scalar_resummation() {
        let mut rng = RngStream::from_seed(5);
        let model = StudentTExpertSet::random_init(3, 4, 100.0, &mut rng).unwrap();
        let batch = toy_batch();
        let (per_case, total) = total_energy(&model, &batch).unwrap();
        // Independent re-summation, expert-major instead of case-major.
        let mut expect = 0.0;
        for w in &model.weights {
            for case in batch.cases() {
                let v: f64 = w.iter().zip(case).map(|(a, b)| a * b).sum();
                expect += (1.0 + model.k * v * v).ln();
            }
        }
        assert!((total - expect).abs() < 1e-12);
        assert!((per_case.iter().sum::<f64>() - total).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_when_violations_zero() {
        let model = StudentTExpertSet {
            n: 2,
            k: 100.0,
            weights: vec![vec![1.0, -1.0]],
        };
        let batch = DataBatch::from_values(2, vec![0.5, 0.5, 0.2, 0.2]).unwrap();
        let grads = energy_gradient(&model, &batch, &[1.0, 1.0]).unwrap();
        assert!(grads[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_linear_in_case_weights() {
        let mut rng = RngStream::from_seed(6);
        let model = StudentTExpertSet::random_init(3, 2, 100.0, &mut rng).unwrap();
        let batch = toy_batch();
        let g1 = energy_gradient(&model, &batch, &[1.0; 3]).unwrap();
        let g2 = energy_gradient(&model, &batch, &[2.0; 3]).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::from_seed(7);
        let h = 1e-6;
        for trial in 0..100 {
            let n = 2 + trial % 3;
            let m = 1 + trial % 2;
            let model = StudentTExpertSet::random_init(n, m, 100.0, &mut rng).unwrap();
            let mut values = Vec::new();
            for _ in 0..2 {
                for _ in 0..n {
                    values.push(rng.uniform());
                }
            }
            let batch = DataBatch::from_values(n, values).unwrap();
            let weights: Vec<f64> = (0..batch.count()).map(|_| 0.5 + rng.uniform()).collect();
            let grads = energy_gradient(&model, &batch, &weights).unwrap();
            for j in 0..m {
                for i in 0..n {
                    let mut plus = model.clone();
                    plus.weights[j][i] += h;
                    let mut minus = model.clone();
                    minus.weights[j][i] -= h;
                    let weighted = |mdl: &StudentTExpertSet| -> f64 {
                        let (per_case, _) = total_energy(mdl, &batch).unwrap();
                        per_case.iter().zip(&weights).map(|(e, g)| e * g).sum()
                    };
                    let fd = (weighted(&plus) - weighted(&minus)) / (2.0 * h);
                    let scale = fd.abs().max(grads[j][i].abs()).max(1e-8);
                    assert!(
                        (fd - grads[j][i]).abs() / scale < 1e-6,
                        "expert {j} weight {i}: fd {fd} vs {}",
                        grads[j][i]
                    );
                }
            }
        }
    }

    #[test]
    fn rescale_cases() {
        let mut m = StudentTExpertSet {
            n: 2,
            k: 100.0,
            weights: vec![vec![2.0, 2.0], vec![0.3, 0.7], vec![-1.0, 3.0]],
        };
        rescale_weights(&mut m).unwrap();
        assert_eq!(m.weights[0], vec![0.5, 0.5]);
        assert_eq!(m.weights[1], vec![0.3, 0.7]);
        assert_eq!(m.weights[2], vec![-0.5, 1.5]);
    }

    #[test]
    fn rescale_degenerate_names_expert() {
        let mut m = StudentTExpertSet {
            n: 2,
            k: 100.0,
            weights: vec![vec![0.5, 0.5], vec![1e-9, -2e-9]],
        };
        match rescale_weights(&mut m) {
            Err(Error::DegenerateConstraint { expert, .. }) => assert_eq!(expert, 1),
            other => panic!("expected degenerate-constraint error, got {other:?}"),
        }
    }

    #[test]
    fn case_weights_mean_one() {
        let weights = energy_case_weights(&[0.5, 1.5, 3.0, 0.1]);
        let mean = crate::stats::mean(&weights);
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case_weights_zero_energy_batch() {
        assert_eq!(energy_case_weights(&[0.0, 0.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_learning_rate_only_rescales() {
        let mut rng = RngStream::from_seed(8);
        let init = StudentTExpertSet::random_init(4, 2, 100.0, &mut rng).unwrap();
        let data = toy_data(4, 20);
        let mut source = FixedSource(&data);
        let config = SimpleTrainConfig {
            learning_rate: 1e-300,
            updates: 5,
            batch_size: 4,
            ..Default::default()
        };
        let (trained, trace) = train_simple(init.clone(), &mut source, &config).unwrap();
        assert_eq!(trace.len(), 5);
        for (a, b) in init.weights.iter().flatten().zip(trained.weights.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_one_after_training() {
        let mut rng = RngStream::from_seed(9);
        let init = StudentTExpertSet::random_init(4, 3, 100.0, &mut rng).unwrap();
        let data = toy_data(4, 50);
        let mut source = FixedSource(&data);
        let config = SimpleTrainConfig {
            learning_rate: 2e-4,
            updates: 20,
            batch_size: 10,
            ..Default::default()
        };
        let (trained, _) = train_simple(init, &mut source, &config).unwrap();
        for w in &trained.weights {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn toy_data(n: usize, count: usize) -> DataBatch {
        let mut rng = RngStream::from_seed(100);
        let values = (0..n * count).map(|_| rng.uniform()).collect();
        DataBatch::from_values(n, values).unwrap()
    }
}
