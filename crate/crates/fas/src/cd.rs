//! Contrastive-divergence learning of mixture-of-two-Gaussians constraint
//! experts.
//!
//! Each expert `j` owns a constraint vector `lambda_j` and models the
//! violation `v_j = lambda_j . d` with a zero-mean two-Gaussian mixture: a
//! binary latent variable picks variance `sigma2_1` with prior probability
//! `sigmoid(mix_j)` and `sigma2_0` otherwise. With one Gaussian broad and
//! the other narrow this is a heavy-tailed violation model.
//!
//! Training runs one latent-then-visible Gibbs step per case: sample the
//! binary states from their posteriors, sample the violations from the
//! resulting diagonal Gaussian, map them back to data space through the
//! pseudo-inverse of `Lambda^T`, and move each parameter along the
//! difference between the log-density gradients evaluated at the data and at
//! the reconstruction. Constraint matrices with dependent columns are
//! handled by appending an identity block to `Lambda` and zeros to the data,
//! which leaves every violation unchanged.
//!
//! All analytic derivatives here are the true derivatives of the mixture
//! log-density, checked against central finite differences by
//! [`gradient_self_check`] before any training step runs. The mixing-logit
//! derivative is `s_1 - prior`, not bare `s_1`; the prior offset cancels in
//! the data-minus-reconstruction difference, so the training update is
//! unaffected. The constraint-vector derivative carries a minus sign:
//! `-(s_1/sigma2_1 + s_0/sigma2_0) v d`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::DataBatch;
use crate::error::{Error, Result};
use crate::linalg::{pseudo_inverse, sample_gaussian_diag, Matrix, DEFAULT_PINV_TOL};
use crate::rng::RngStream;
use crate::simple::BatchSource;

const LN_2PI: f64 = 1.8378770664093453;

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log N(v; 0, sigma2)` with the variance given as its log.
#[inline]
fn log_normal(v: f64, log_var: f64) -> f64 {
    -0.5 * (LN_2PI + log_var + v * v * (-log_var).exp())
}

/// `m` linear constraints with per-expert two-Gaussian violation mixtures.
///
/// `sigma2_1 >= sigma2_0` is not enforced; the two components may swap
/// roles during learning, and consumers must stay role-agnostic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureExpertSet {
    pub n: usize,
    /// `n x m`; column `j` is `lambda_j`.
    pub lambda: Matrix,
    /// Mixing logit `m_j`; prior on component 1 is `sigmoid(m_j)`.
    pub mix: Vec<f64>,
    /// `log sigma2_j1`.
    pub log_var1: Vec<f64>,
    /// `log sigma2_j0`.
    pub log_var0: Vec<f64>,
}

impl MixtureExpertSet {
    pub fn m(&self) -> usize {
        self.lambda.ncols()
    }

    /// Initialization: `lambda` entries `N(0, 1/n)`, neutral mixing logit,
    /// one broad component (variance 1) and one narrower (variance 0.1).
    /// Starting the narrow component too tight invites early expert
    /// collapse: a constraint vector that shrinks while its violations fit
    /// the narrow Gaussian never recovers.
    pub fn random_init(n: usize, m: usize, rng: &mut RngStream) -> Self {
        let scale = (1.0 / n as f64).sqrt();
        MixtureExpertSet {
            n,
            lambda: Matrix::from_fn(n, m, |_, _| scale * rng.normal()),
            mix: vec![0.0; m],
            log_var1: vec![0.0; m],
            log_var0: vec![0.1_f64.ln(); m],
        }
    }

    /// Violations `v = Lambda^T d`.
    pub fn violations(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: d.len(),
            });
        }
        let dv = DVector::from_column_slice(d);
        Ok((self.lambda.transpose() * dv).iter().cloned().collect())
    }

    /// Log density of violation `v` under expert `j`'s mixture.
    pub fn expert_log_density(&self, j: usize, v: f64) -> f64 {
        let a1 = -softplus(-self.mix[j]) + log_normal(v, self.log_var1[j]);
        let a0 = -softplus(self.mix[j]) + log_normal(v, self.log_var0[j]);
        let hi = a1.max(a0);
        hi + ((a1 - hi).exp() + (a0 - hi).exp()).ln()
    }

    /// Posterior probability that component 1 produced violation `v`.
    pub fn responsibility(&self, j: usize, v: f64) -> f64 {
        let a1 = -softplus(-self.mix[j]) + log_normal(v, self.log_var1[j]);
        let a0 = -softplus(self.mix[j]) + log_normal(v, self.log_var0[j]);
        sigmoid(a1 - a0)
    }

    /// Pseudo-inverse map `P = pinv(Lambda^T)` used by the reconstruction
    /// sampler; satisfies `Lambda^T P = I` when `Lambda` has full column
    /// rank.
    pub fn reconstruction_map(&self) -> Result<Matrix> {
        pseudo_inverse(&self.lambda.transpose(), DEFAULT_PINV_TOL)
    }

    /// One latent-then-visible Gibbs step from `d` using a precomputed
    /// reconstruction map.
    pub fn reconstruct_with(
        &self,
        d: &[f64],
        map: &Matrix,
        rng: &mut RngStream,
    ) -> Result<Reconstruction> {
        let v = self.violations(d)?;
        let s: Vec<bool> = v
            .iter()
            .enumerate()
            .map(|(j, &vj)| rng.bernoulli(self.responsibility(j, vj)))
            .collect();
        self.reconstruct_given_states(&s, rng, map)
    }

    /// Visible half of the Gibbs step with the binary states held fixed.
    pub fn reconstruct_given_states(
        &self,
        s: &[bool],
        rng: &mut RngStream,
        map: &Matrix,
    ) -> Result<Reconstruction> {
        // D_jj = s_j / sigma2_1 + (1 - s_j) / sigma2_0; u ~ N(0, D^-1).
        let variances: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(j, &sj)| {
                if sj {
                    self.log_var1[j].exp()
                } else {
                    self.log_var0[j].exp()
                }
            })
            .collect();
        let u_hat = sample_gaussian_diag(&variances, rng)?;
        let d_hat = map * &u_hat;
        Ok(Reconstruction {
            s: s.to_vec(),
            u_hat: u_hat.iter().cloned().collect(),
            d_hat: d_hat.iter().cloned().collect(),
        })
    }

    /// True gradients of `sum_j log f_j(v_j)` with respect to every
    /// parameter, with `v_j = lambda_j . d`.
    pub fn log_density_gradients(&self, d: &[f64]) -> Result<ExpertGradients> {
        let v = self.violations(d)?;
        let m = self.m();
        let mut g = ExpertGradients::zeros(self.n, m);
        for j in 0..m {
            let s1 = self.responsibility(j, v[j]);
            let s0 = 1.0 - s1;
            let prior = sigmoid(self.mix[j]);
            let var1 = self.log_var1[j].exp();
            let var0 = self.log_var0[j].exp();
            g.mix[j] = s1 - prior;
            g.log_var1[j] = s1 * (v[j] * v[j] / var1 - 1.0) / 2.0;
            g.log_var0[j] = s0 * (v[j] * v[j] / var0 - 1.0) / 2.0;
            let coeff = -(s1 / var1 + s0 / var0) * v[j];
            for i in 0..self.n {
                g.lambda[(i, j)] = coeff * d[i];
            }
        }
        Ok(g)
    }
}

/// Result of one visible reconstruction step.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Sampled binary component choices.
    pub s: Vec<bool>,
    /// Sampled violations, covariance `D^-1`.
    pub u_hat: Vec<f64>,
    /// Reconstructed data vector, `Lambda^T d_hat = u_hat`.
    pub d_hat: Vec<f64>,
}

/// Per-parameter gradients of the summed expert log densities.
#[derive(Debug, Clone)]
pub struct ExpertGradients {
    pub lambda: Matrix,
    pub mix: Vec<f64>,
    pub log_var1: Vec<f64>,
    pub log_var0: Vec<f64>,
}

impl ExpertGradients {
    fn zeros(n: usize, m: usize) -> Self {
        ExpertGradients {
            lambda: Matrix::zeros(n, m),
            mix: vec![0.0; m],
            log_var1: vec![0.0; m],
            log_var0: vec![0.0; m],
        }
    }

    fn add_scaled(&mut self, other: &ExpertGradients, scale: f64) {
        self.lambda += other.lambda.clone() * scale;
        for (a, b) in self.mix.iter_mut().zip(&other.mix) {
            *a += scale * b;
        }
        for (a, b) in self.log_var1.iter_mut().zip(&other.log_var1) {
            *a += scale * b;
        }
        for (a, b) in self.log_var0.iter_mut().zip(&other.log_var0) {
            *a += scale * b;
        }
    }

    fn is_finite(&self) -> bool {
        self.lambda.iter().all(|x| x.is_finite())
            && self.mix.iter().all(|x| x.is_finite())
            && self.log_var1.iter().all(|x| x.is_finite())
            && self.log_var0.iter().all(|x| x.is_finite())
    }
}

/// A [`MixtureExpertSet`] lifted to the `(n + m)`-dimensional augmented
/// space: `Lambda` gains an `m x m` identity block (guaranteeing full column
/// rank) and data vectors gain `m` trailing zeros, so every violation is
/// unchanged. The identity block is frozen: gradients never touch it.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    model: MixtureExpertSet,
    n_data: usize,
}

impl AugmentedModel {
    pub fn from_base(base: &MixtureExpertSet) -> Self {
        let (n, m) = (base.n, base.m());
        let mut lambda = Matrix::zeros(n + m, m);
        lambda.view_mut((0, 0), (n, m)).copy_from(&base.lambda);
        for j in 0..m {
            lambda[(n + j, j)] = 1.0;
        }
        AugmentedModel {
            model: MixtureExpertSet {
                n: n + m,
                lambda,
                mix: base.mix.clone(),
                log_var1: base.log_var1.clone(),
                log_var0: base.log_var0.clone(),
            },
            n_data: n,
        }
    }

    pub fn n_data(&self) -> usize {
        self.n_data
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    /// The augmented expert set (dimension `n + m`).
    pub fn model(&self) -> &MixtureExpertSet {
        &self.model
    }

    /// Drop the identity block: the learned `n`-dimensional expert set.
    pub fn to_base(&self) -> MixtureExpertSet {
        MixtureExpertSet {
            n: self.n_data,
            lambda: self
                .model
                .lambda
                .view((0, 0), (self.n_data, self.m()))
                .into_owned(),
            mix: self.model.mix.clone(),
            log_var1: self.model.log_var1.clone(),
            log_var0: self.model.log_var0.clone(),
        }
    }

    /// Append the `m` zeros.
    pub fn augment_case(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.n_data {
            return Err(Error::DimensionMismatch {
                expected: self.n_data,
                got: d.len(),
            });
        }
        let mut out = d.to_vec();
        out.resize(self.n_data + self.m(), 0.0);
        Ok(out)
    }
}

/// Configuration for CD-1 training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdTrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub updates: usize,
    pub seed: u64,
    /// Per-parameter learning-rate scale for `lambda`.
    pub scale_lambda: f64,
    /// Per-parameter learning-rate scale for the mixing logits.
    pub scale_mix: f64,
    /// Per-parameter learning-rate scale for the log variances.
    pub scale_log_var: f64,
}

impl Default for CdTrainConfig {
    fn default() -> Self {
        CdTrainConfig {
            learning_rate: 1e-3,
            momentum: 0.5,
            batch_size: 100,
            updates: 1000,
            seed: 0,
            scale_lambda: 1.0,
            scale_mix: 0.1,
            scale_log_var: 0.1,
        }
    }
}

impl CdTrainConfig {
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

/// Per-update training diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdDiagnostics {
    pub update: usize,
    /// Mean `||d - d_hat||` over the batch (data coordinates only).
    pub mean_recon_error: f64,
    /// Mean responsibility at the data, over experts and cases.
    pub mean_responsibility: f64,
    /// Frobenius norm of the learned rows of `Lambda`.
    pub lambda_norm: f64,
}

/// Momentum state for CD training.
pub struct CdVelocity {
    lambda: Matrix,
    mix: Vec<f64>,
    log_var1: Vec<f64>,
    log_var0: Vec<f64>,
}

impl CdVelocity {
    pub fn zeros(aug: &AugmentedModel) -> Self {
        let m = aug.m();
        CdVelocity {
            lambda: Matrix::zeros(aug.n_data(), m),
            mix: vec![0.0; m],
            log_var1: vec![0.0; m],
            log_var0: vec![0.0; m],
        }
    }
}

/// The CD-1 parameter step for one case, given its reconstruction:
/// log-density gradients at the data minus the same gradients at the
/// reconstruction (states, violations and responsibilities all recomputed
/// from `d_hat`).
pub fn contrastive_gradient(
    aug: &AugmentedModel,
    d_aug: &[f64],
    d_hat: &[f64],
) -> Result<ExpertGradients> {
    let mut delta = aug.model.log_density_gradients(d_aug)?;
    let neg = aug.model.log_density_gradients(d_hat)?;
    delta.add_scaled(&neg, -1.0);
    Ok(delta)
}

/// One CD-1 update over a batch. The pseudo-inverse map is computed once and
/// shared across cases; the identity block of the augmented `Lambda` stays
/// frozen.
pub fn cd_update(
    aug: &mut AugmentedModel,
    batch: &DataBatch,
    config: &CdTrainConfig,
    velocity: &mut CdVelocity,
    update: usize,
    rng: &mut RngStream,
) -> Result<CdDiagnostics> {
    config.validate()?;
    let (n, m) = (aug.n_data(), aug.m());
    let map = aug.model.reconstruction_map()?;

    let mut accum = ExpertGradients::zeros(n + m, m);
    let mut recon_err = 0.0;
    let mut resp_sum = 0.0;
    for case in batch.cases() {
        let d_aug = aug.augment_case(case)?;
        let recon = aug.model.reconstruct_with(&d_aug, &map, rng)?;
        let delta = contrastive_gradient(aug, &d_aug, &recon.d_hat)?;
        accum.add_scaled(&delta, 1.0);

        let v = aug.model.violations(&d_aug)?;
        for (j, &vj) in v.iter().enumerate() {
            resp_sum += aug.model.responsibility(j, vj);
        }
        recon_err += case
            .iter()
            .zip(&recon.d_hat[..n])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    }
    let count = batch.count().max(1) as f64;
    let inv = 1.0 / count;
    if !accum.is_finite() {
        return Err(Error::Diverged { update });
    }

    let lr = config.learning_rate;
    for j in 0..m {
        for i in 0..n {
            velocity.lambda[(i, j)] = config.momentum * velocity.lambda[(i, j)]
                + lr * config.scale_lambda * inv * accum.lambda[(i, j)];
            aug.model.lambda[(i, j)] += velocity.lambda[(i, j)];
        }
        velocity.mix[j] =
            config.momentum * velocity.mix[j] + lr * config.scale_mix * inv * accum.mix[j];
        aug.model.mix[j] += velocity.mix[j];
        velocity.log_var1[j] = config.momentum * velocity.log_var1[j]
            + lr * config.scale_log_var * inv * accum.log_var1[j];
        aug.model.log_var1[j] += velocity.log_var1[j];
        velocity.log_var0[j] = config.momentum * velocity.log_var0[j]
            + lr * config.scale_log_var * inv * accum.log_var0[j];
        aug.model.log_var0[j] += velocity.log_var0[j];
    }
    let finite = aug.model.lambda.iter().all(|x| x.is_finite())
        && aug.model.mix.iter().all(|x| x.is_finite())
        && aug.model.log_var1.iter().all(|x| x.is_finite())
        && aug.model.log_var0.iter().all(|x| x.is_finite());
    if !finite {
        return Err(Error::Diverged { update });
    }

    Ok(CdDiagnostics {
        update,
        mean_recon_error: recon_err / count,
        mean_responsibility: resp_sum / (count * m as f64),
        lambda_norm: aug
            .model
            .lambda
            .view((0, 0), (n, m))
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt(),
    })
}

/// Verify the four analytic derivatives against central finite differences
/// of [`MixtureExpertSet::expert_log_density`] on random instances. This
/// gate runs before training; a failure here means the analytic gradients
/// (in particular the sign of the constraint-vector derivative) cannot be
/// trusted.
pub fn gradient_self_check(rng: &mut RngStream) -> Result<()> {
    let h = 1e-6;
    let tol = 1e-5;
    for trial in 0..20 {
        let n = 2 + trial % 3;
        let mut model = MixtureExpertSet::random_init(n, 2, rng);
        for j in 0..2 {
            model.mix[j] = rng.uniform_in(-1.5, 1.5);
            model.log_var1[j] = rng.uniform_in(-1.0, 1.0);
            model.log_var0[j] = rng.uniform_in(-4.0, -1.0);
        }
        let d: Vec<f64> = (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let g = model.log_density_gradients(&d)?;

        let total = |m: &MixtureExpertSet| -> f64 {
            let v = m.violations(&d).unwrap();
            (0..m.m()).map(|j| m.expert_log_density(j, v[j])).sum()
        };
        let check = |analytic: f64, perturb: &dyn Fn(&mut MixtureExpertSet, f64), what: &str| -> Result<()> {
            let mut plus = model.clone();
            perturb(&mut plus, h);
            let mut minus = model.clone();
            perturb(&mut minus, -h);
            let fd = (total(&plus) - total(&minus)) / (2.0 * h);
            // The floor keeps finite-difference roundoff (absolute error
            // around 1e-10 at this step size) from failing near-zero
            // derivatives.
            let scale = fd.abs().max(analytic.abs()).max(1e-3);
            if (fd - analytic).abs() / scale > tol {
                return Err(Error::InvalidInput(format!(
                    "gradient self-check failed for {what}: analytic {analytic} vs finite difference {fd}"
                )));
            }
            Ok(())
        };
        for j in 0..2 {
            check(g.mix[j], &|m, e| m.mix[j] += e, "mixing logit")?;
            check(g.log_var1[j], &|m, e| m.log_var1[j] += e, "log sigma2_1")?;
            check(g.log_var0[j], &|m, e| m.log_var0[j] += e, "log sigma2_0")?;
            for i in 0..n {
                check(g.lambda[(i, j)], &|m, e| m.lambda[(i, j)] += e, "lambda")?;
            }
        }
    }
    Ok(())
}

/// Train by CD-1 over batches from `source`. Runs the gradient self-check
/// first and returns the de-augmented model plus per-update diagnostics.
pub fn train_cd(
    model: MixtureExpertSet,
    source: &mut dyn BatchSource,
    config: &CdTrainConfig,
) -> Result<(MixtureExpertSet, Vec<CdDiagnostics>)> {
    config.validate()?;
    if source.dim() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            got: source.dim(),
        });
    }
    let mut rng = RngStream::from_seed(config.seed);
    gradient_self_check(&mut rng.substream(u64::MAX))?;

    let mut aug = AugmentedModel::from_base(&model);
    let mut velocity = CdVelocity::zeros(&aug);
    let mut trace = Vec::with_capacity(config.updates);
    for update in 0..config.updates {
        let batch = source.next_batch(config.batch_size, &mut rng)?;
        let diag = cd_update(&mut aug, &batch, config, &mut velocity, update, &mut rng)?;
        trace.push(diag);
    }
    Ok((aug.to_base(), trace))
}
