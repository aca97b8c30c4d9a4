//! Pseudo-likelihood fitting over quantized visible variables.
//!
//! The visible variables live on a shared quantization lattice. Because the
//! model is a single global energy function, the per-site conditionals are
//! mutually consistent, and each site only needs a one-dimensional partition
//! function over the `a` lattice levels. The exact objective (sum over sites
//! and cases of the conditional log-probability of the observed level) and
//! its exact gradient cost `O(mna)` per training case.
//!
//! The module also houses single-site Gibbs sampling from the product
//! distribution and a brute-force enumeration of the joint over all `a^n`
//! states, which serves as the oracle for the conditionals, the
//! pseudo-likelihood, and the exact log-likelihood gradient.

use serde::{Deserialize, Serialize};

use crate::data::DataBatch;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simple::StudentTExpertSet;

/// Tolerance for deciding a value sits on a lattice level.
const LATTICE_TOL: f64 = 1e-12;

/// Enumeration guard for [`brute_force_joint`].
const MAX_ENUM_STATES: u64 = 1_000_000;

/// The discretized per-variable state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedSpace {
    levels: Vec<f64>,
}

impl QuantizedSpace {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 levels".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("levels must be strictly increasing".into()));
        }
        Ok(QuantizedSpace { levels })
    }

    /// `a` uniform levels spanning `[0, 1]`.
    pub fn uniform(a: usize) -> Result<Self> {
        if a < 2 {
            return Err(Error::InvalidInput("need at least 2 levels".into()));
        }
        Self::new(
            (0..a)
                .map(|t| t as f64 / (a - 1) as f64)
                .collect(),
        )
    }

    pub fn a(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, t: usize) -> f64 {
        self.levels[t]
    }

    /// Index of `value` on the lattice, or an off-lattice error naming the
    /// component.
    pub fn index_of(&self, value: f64, component: usize) -> Result<usize> {
        let (t, dist) = self.nearest(value);
        if dist > LATTICE_TOL {
            return Err(Error::OffLattice { component, value });
        }
        Ok(t)
    }

    /// Nearest level index and its distance.
    pub fn nearest(&self, value: f64) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (t, &l) in self.levels.iter().enumerate() {
            let d = (value - l).abs();
            if d < best_d {
                best = t;
                best_d = d;
            }
        }
        (best, best_d)
    }

    /// Snap every value of a batch to its nearest level. Returns the snapped
    /// batch and the maximum snap distance, which callers should report.
    pub fn snap_batch(&self, batch: &DataBatch) -> (DataBatch, f64) {
        let mut max_dist = 0.0_f64;
        let values = batch
            .values()
            .iter()
            .map(|&v| {
                let (t, d) = self.nearest(v);
                max_dist = max_dist.max(d);
                self.levels[t]
            })
            .collect();
        (
            DataBatch::from_values(batch.n(), values).expect("snapped values are finite"),
            max_dist,
        )
    }
}

/// Student-t constraint experts over a quantized space. Unlike the
/// simplistic learner there is no weight-sum constraint: the objective is
/// not scale-invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlModel {
    pub experts: StudentTExpertSet,
    pub space: QuantizedSpace,
}

impl PlModel {
    pub fn new(experts: StudentTExpertSet, space: QuantizedSpace) -> Self {
        PlModel { experts, space }
    }

    pub fn n(&self) -> usize {
        self.experts.n
    }

    pub fn m(&self) -> usize {
        self.experts.m()
    }

    fn check_on_lattice(&self, d: &[f64]) -> Result<()> {
        if d.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: d.len(),
            });
        }
        for (i, &v) in d.iter().enumerate() {
            self.space.index_of(v, i)?;
        }
        Ok(())
    }

    /// Violations `v_j = w_j . d` for every expert.
    fn violations(&self, d: &[f64]) -> Vec<f64> {
        self.experts
            .weights
            .iter()
            .map(|w| w.iter().zip(d).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[inline]
fn t_energy(v: f64, k: f64) -> f64 {
    (1.0 + k * v * v).ln()
}

#[inline]
fn t_slope(v: f64, k: f64) -> f64 {
    2.0 * k * v / (1.0 + k * v * v)
}

/// Energy of one on-lattice configuration: `sum_j log(1 + k (w_j . d)^2)`.
pub fn case_energy(model: &PlModel, d: &[f64]) -> Result<f64> {
    model.check_on_lattice(d)?;
    Ok(energy_unchecked(model, d))
}

fn energy_unchecked(model: &PlModel, d: &[f64]) -> f64 {
    model
        .violations(d)
        .into_iter()
        .map(|v| t_energy(v, model.experts.k))
        .sum()
}

/// Normalized probabilities proportional to `exp(-e)` via log-sum-exp.
fn softmax_neg(energies: &[f64]) -> Vec<f64> {
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut out: Vec<f64> = energies.iter().map(|&e| (-(e - min)).exp()).collect();
    let z: f64 = out.iter().sum();
    for p in &mut out {
        *p /= z;
    }
    out
}

/// Energies of the `a` single-site alternatives at site `i`, given the base
/// violations of `d`. Incremental: `v_j(t) = v_j + w_ji (level_t - d_i)`.
fn site_energies(model: &PlModel, d: &[f64], i: usize, base_v: &[f64]) -> Vec<f64> {
    let k = model.experts.k;
    let a = model.space.a();
    let mut energies = vec![0.0; a];
    for (j, w) in model.experts.weights.iter().enumerate() {
        let wji = w[i];
        for (t, e) in energies.iter_mut().enumerate() {
            let v = base_v[j] + wji * (model.space.level(t) - d[i]);
            *e += t_energy(v, k);
        }
    }
    energies
}

/// Conditional distribution of visible variable `i` over the lattice levels,
/// given the rest of `d`.
pub fn conditional_distribution(model: &PlModel, d: &[f64], i: usize) -> Result<Vec<f64>> {
    model.check_on_lattice(d)?;
    if i >= model.n() {
        return Err(Error::InvalidInput(format!(
            "site index {i} out of range for n = {}",
            model.n()
        )));
    }
    let base_v = model.violations(d);
    Ok(softmax_neg(&site_energies(model, d, i, &base_v)))
}

/// Log pseudo-likelihood of a batch: sum over cases and sites of the log
/// conditional probability of the observed level.
pub fn log_pseudo_likelihood(model: &PlModel, batch: &DataBatch) -> Result<f64> {
    let mut total = 0.0;
    for case in batch.cases() {
        model.check_on_lattice(case)?;
        let base_v = model.violations(case);
        for i in 0..model.n() {
            let t_obs = model.space.index_of(case[i], i)?;
            let energies = site_energies(model, case, i, &base_v);
            let probs = softmax_neg(&energies);
            total += probs[t_obs].ln();
        }
    }
    Ok(total)
}

/// Exact gradient of the log pseudo-likelihood with respect to every expert
/// weight, `O(mna)` per training case.
///
/// Per (case, site) the contribution is the conditional expectation of the
/// energy gradient over the site's alternatives minus the gradient at the
/// observed configuration. Alternatives differ from `d` only at the site, so
/// each contribution splits into a rank-one term on `d` plus a single-
/// component correction.
pub fn pl_gradient(model: &PlModel, batch: &DataBatch) -> Result<Vec<Vec<f64>>> {
    let (n, m, a) = (model.n(), model.m(), model.space.a());
    let k = model.experts.k;
    let mut grads = vec![vec![0.0; n]; m];
    for case in batch.cases() {
        model.check_on_lattice(case)?;
        let base_v = model.violations(case);
        let base_slope: Vec<f64> = base_v.iter().map(|&v| t_slope(v, k)).collect();
        // coeff[j] multiplies the data vector; the beta terms hit single
        // components.
        let mut coeff = vec![0.0; m];
        for i in 0..n {
            let energies = site_energies(model, case, i, &base_v);
            let probs = softmax_neg(&energies);
            for j in 0..m {
                let wji = model.experts.weights[j][i];
                let mut alpha = 0.0;
                let mut beta = 0.0;
                for t in 0..a {
                    let delta = model.space.level(t) - case[i];
                    let slope = t_slope(base_v[j] + wji * delta, k);
                    alpha += probs[t] * slope;
                    beta += probs[t] * slope * delta;
                }
                coeff[j] += alpha - base_slope[j];
                grads[j][i] += beta;
            }
        }
        for j in 0..m {
            for (g, &di) in grads[j].iter_mut().zip(case) {
                *g += coeff[j] * di;
            }
        }
    }
    Ok(grads)
}

/// One Gibbs sweep: visit sites in fixed order `0..n`, resampling each from
/// its conditional. Returns the updated vector.
pub fn gibbs_sweep(model: &PlModel, d: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    model.check_on_lattice(d)?;
    let mut state = d.to_vec();
    let mut base_v = model.violations(&state);
    for i in 0..model.n() {
        let energies = site_energies(model, &state, i, &base_v);
        let probs = softmax_neg(&energies);
        let t = rng.categorical(&probs);
        let new_val = model.space.level(t);
        let delta = new_val - state[i];
        if delta != 0.0 {
            for (j, w) in model.experts.weights.iter().enumerate() {
                base_v[j] += w[i] * delta;
            }
            state[i] = new_val;
        }
    }
    Ok(state)
}

/// Run a Gibbs chain and return the visited states after burn-in, one per
/// sweep.
pub fn gibbs_chain(
    model: &PlModel,
    start: &[f64],
    sweeps: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vec<f64>>> {
    let mut state = start.to_vec();
    for _ in 0..burn_in {
        state = gibbs_sweep(model, &state, rng)?;
    }
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        state = gibbs_sweep(model, &state, rng)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Exact enumeration of the joint distribution over all `a^n` lattice
/// states.
#[derive(Debug, Clone)]
pub struct JointTable {
    pub n: usize,
    pub a: usize,
    /// `probs[s]` for the state whose base-`a` digits (least significant =
    /// site 0) index the lattice levels.
    pub probs: Vec<f64>,
}

impl JointTable {
    /// Decode a flat state index into a configuration.
    pub fn state(&self, mut s: usize, space: &QuantizedSpace) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for di in d.iter_mut() {
            *di = space.level(s % self.a);
            s /= self.a;
        }
        d
    }

    /// Flat index of an on-lattice configuration.
    pub fn index(&self, d: &[f64], space: &QuantizedSpace) -> Result<usize> {
        let mut s = 0usize;
        for (i, &v) in d.iter().enumerate().rev() {
            s = s * self.a + space.index_of(v, i)?;
        }
        Ok(s)
    }

    /// Conditional of site `i` given the rest of `d`, read off the table.
    pub fn conditional(
        &self,
        d: &[f64],
        i: usize,
        space: &QuantizedSpace,
    ) -> Result<Vec<f64>> {
        let stride = self.a.pow(i as u32);
        let base = self.index(d, space)? - space.index_of(d[i], i)? * stride;
        let mut probs: Vec<f64> = (0..self.a).map(|t| self.probs[base + t * stride]).collect();
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(probs)
    }
}

/// Enumerate the normalized joint `p(c) ~ exp(-E(c))` over all `a^n` states.
pub fn brute_force_joint(model: &PlModel) -> Result<JointTable> {
    let (n, a) = (model.n(), model.space.a());
    let states = (a as u128).pow(n as u32);
    if states > MAX_ENUM_STATES as u128 {
        return Err(Error::CapacityExceeded {
            states,
            limit: MAX_ENUM_STATES,
        });
    }
    let states = states as usize;
    let table = JointTable {
        n,
        a,
        probs: Vec::new(),
    };
    let mut energies = Vec::with_capacity(states);
    for s in 0..states {
        let d = table.state(s, &model.space);
        energies.push(energy_unchecked(model, &d));
    }
    let probs = softmax_neg(&energies);
    Ok(JointTable { n, a, probs })
}

/// Mean exact log-likelihood of a batch under the enumerated joint.
pub fn exact_avg_log_likelihood(
    model: &PlModel,
    table: &JointTable,
    batch: &DataBatch,
) -> Result<f64> {
    let mut total = 0.0;
    for case in batch.cases() {
        let s = table.index(case, &model.space)?;
        total += table.probs[s].ln();
    }
    Ok(total / batch.count().max(1) as f64)
}

/// Exact gradient of the mean log-likelihood: data average of the per-expert
/// log-density gradient minus its expectation under the enumerated joint.
pub fn exact_log_likelihood_gradient(
    model: &PlModel,
    table: &JointTable,
    batch: &DataBatch,
) -> Result<Vec<Vec<f64>>> {
    let (n, m) = (model.n(), model.m());
    let k = model.experts.k;
    // d log f_j / d w_j = -slope(v_j) * x for a configuration x.
    let accumulate = |x: &[f64], weight: f64, grads: &mut Vec<Vec<f64>>| {
        let v = model.violations(x);
        for j in 0..m {
            let s = -t_slope(v[j], k) * weight;
            for (g, &xi) in grads[j].iter_mut().zip(x) {
                *g += s * xi;
            }
        }
    };
    let mut grads = vec![vec![0.0; n]; m];
    let inv_count = 1.0 / batch.count().max(1) as f64;
    for case in batch.cases() {
        model.check_on_lattice(case)?;
        accumulate(case, inv_count, &mut grads);
    }
    for s in 0..table.probs.len() {
        let d = table.state(s, &model.space);
        accumulate(&d, -table.probs[s], &mut grads);
    }
    Ok(grads)
}

/// Optimizer choice for [`train_pl`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlMethod {
    /// Gradient ascent with momentum.
    Ascent,
    /// Polak-Ribiere nonlinear conjugate gradient.
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlTrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    /// Backtracking line search; guarantees a non-decreasing objective.
    pub line_search: bool,
    pub method: PlMethod,
    pub seed: u64,
}

impl Default for PlTrainConfig {
    fn default() -> Self {
        PlTrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            iterations: 200,
            line_search: true,
            method: PlMethod::Ascent,
            seed: 0,
        }
    }
}

impl PlTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidInput("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Maximize the log pseudo-likelihood of `batch`. Returns the trained model
/// and the per-iteration objective trace (including the initial value).
pub fn train_pl(
    mut model: PlModel,
    batch: &DataBatch,
    config: &PlTrainConfig,
) -> Result<(PlModel, Vec<f64>)> {
    config.validate()?;
    let (n, m) = (model.n(), model.m());
    let mut objective = log_pseudo_likelihood(&model, batch)?;
    let mut trace = vec![objective];
    let mut direction = vec![vec![0.0; n]; m];
    let mut prev_grad: Option<Vec<Vec<f64>>> = None;

    for iter in 0..config.iterations {
        let grad = pl_gradient(&model, batch)?;
        match config.method {
            PlMethod::Ascent => {
                for j in 0..m {
                    for i in 0..n {
                        direction[j][i] = config.momentum * direction[j][i] + grad[j][i];
                    }
                }
            }
            PlMethod::ConjugateGradient => {
                let beta = match &prev_grad {
                    None => 0.0,
                    Some(pg) => {
                        let mut num = 0.0;
                        let mut den = 0.0;
                        for j in 0..m {
                            for i in 0..n {
                                num += grad[j][i] * (grad[j][i] - pg[j][i]);
                                den += pg[j][i] * pg[j][i];
                            }
                        }
                        if den > 0.0 {
                            (num / den).max(0.0)
                        } else {
                            0.0
                        }
                    }
                };
                for j in 0..m {
                    for i in 0..n {
                        direction[j][i] = grad[j][i] + beta * direction[j][i];
                    }
                }
                prev_grad = Some(grad.clone());
            }
        }

        let mut step = config.learning_rate;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = model.clone();
            for j in 0..m {
                for i in 0..n {
                    trial.experts.weights[j][i] += step * direction[j][i];
                }
            }
            let trial_obj = log_pseudo_likelihood(&trial, batch)?;
            if !trial_obj.is_finite() {
                return Err(Error::Diverged { update: iter });
            }
            if !config.line_search || trial_obj >= objective {
                model = trial;
                objective = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Ascent stalled along this direction; drop the memory so the
            // next iteration starts from the raw gradient.
            for d in direction.iter_mut().flatten() {
                *d = 0.0;
            }
        }
        trace.push(objective);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(seed: u64, n: usize, a: usize, m: usize) -> PlModel {
        let mut rng = RngStream::from_seed(seed);
        let weights = (0..m)
            .map(|_| (0..n).map(|_| rng.normal()).collect())
            .collect();
        PlModel::new(
            StudentTExpertSet {
                n,
                k: 100.0,
                weights,
            },
            QuantizedSpace::uniform(a).unwrap(),
        )
    }

    fn lattice_batch(model: &PlModel, count: usize, seed: u64) -> DataBatch {
        let mut rng = RngStream::from_seed(seed);
        let mut batch = DataBatch::empty(model.n());
        for _ in 0..count {
            let case: Vec<f64> = (0..model.n())
                .map(|_| model.space.level(rng.below(model.space.a())))
                .collect();
            batch.push_case(&case).unwrap();
        }
        batch
    }

    #[test]
    fn space_invariants() {
        assert!(QuantizedSpace::new(vec![0.5]).is_err());
        assert!(QuantizedSpace::new(vec![0.2, 0.2]).is_err());
        let s = QuantizedSpace::uniform(16).unwrap();
        assert_eq!(s.a(), 16);
        assert_eq!(s.level(0), 0.0);
        assert_eq!(s.level(15), 1.0);
    }

    #[test]
    fn off_lattice_error_names_component() {
        let model = tiny_model(1, 3, 4, 2);
        let d = vec![0.0, 0.17, 1.0];
        match case_energy(&model, &d) {
            Err(Error::OffLattice { component, .. }) => assert_eq!(component, 1),
            other => panic!("expected off-lattice error, got {other:?}"),
        }
    }

    #[test]
    fn zero_experts_energy_and_conditional() {
        let model = tiny_model(1, 3, 4, 0);
        let d = vec![0.0, 1.0 / 3.0, 1.0];
        assert_eq!(case_energy(&model, &d).unwrap(), 0.0);
        let p = conditional_distribution(&model, &d, 1).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn case_energy_matches_simple_total_energy() {
        let model = tiny_model(2, 3, 4, 2);
        let d = vec![0.0, 2.0 / 3.0, 1.0];
        let batch = DataBatch::from_values(3, d.clone()).unwrap();
        let (_, total) = crate::simple::total_energy(&model.experts, &batch).unwrap();
        assert!((case_energy(&model, &d).unwrap() - total).abs() < 1e-12);
    }

    #[test]
    fn conditionals_normalize() {
        let model = tiny_model(3, 3, 5, 2);
        let d = vec![0.0, 0.25, 1.0];
        for i in 0..3 {
            let p = conditional_distribution(&model, &d, i).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn conditionals_match_enumerated_joint() {
        let model = tiny_model(4, 3, 4, 2);
        let table = brute_force_joint(&model).unwrap();
        let batch = lattice_batch(&model, 20, 9);
        for case in batch.cases() {
            for i in 0..model.n() {
                let fast = conditional_distribution(&model, case, i).unwrap();
                let exact = table.conditional(case, i, &model.space).unwrap();
                for (a, b) in fast.iter().zip(&exact) {
                    assert!((a - b).abs() < 1e-10, "site {i}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn pseudo_likelihood_uniform_when_no_experts() {
        let model = tiny_model(5, 3, 4, 0);
        let batch = lattice_batch(&model, 7, 3);
        let lpl = log_pseudo_likelihood(&model, &batch).unwrap();
        let expect = 7.0 * 3.0 * (0.25_f64).ln();
        assert!((lpl - expect).abs() < 1e-10);
    }

    #[test]
    fn pseudo_likelihood_matches_enumerated_conditionals() {
        let model = tiny_model(6, 3, 4, 2);
        let table = brute_force_joint(&model).unwrap();
        let batch = lattice_batch(&model, 15, 4);
        let fast = log_pseudo_likelihood(&model, &batch).unwrap();
        let mut exact = 0.0;
        for case in batch.cases() {
            for i in 0..model.n() {
                let cond = table.conditional(case, i, &model.space).unwrap();
                let t = model.space.index_of(case[i], i).unwrap();
                exact += cond[t].ln();
            }
        }
        assert!((fast - exact).abs() < 1e-10);
    }

    #[test]
    fn pl_gradient_additivity_under_duplication() {
        let model = tiny_model(7, 3, 4, 2);
        let batch = lattice_batch(&model, 6, 5);
        let mut doubled = DataBatch::empty(3);
        for case in batch.cases().chain(batch.cases()) {
            doubled.push_case(case).unwrap();
        }
        let g1 = pl_gradient(&model, &batch).unwrap();
        let g2 = pl_gradient(&model, &doubled).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((2.0 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pl_gradient_empty_for_no_experts() {
        let model = tiny_model(8, 3, 4, 0);
        let batch = lattice_batch(&model, 3, 6);
        assert!(pl_gradient(&model, &batch).unwrap().is_empty());
    }

    #[test]
    fn pl_gradient_matches_finite_differences() {
        let h = 1e-5;
        for trial in 0..100 {
            let n = 2 + trial % 2;
            let a = 3 + trial % 2;
            let m = 1 + trial % 2;
            let model = tiny_model(1000 + trial as u64, n, a, m);
            let batch = lattice_batch(&model, 3, 2000 + trial as u64);
            let grads = pl_gradient(&model, &batch).unwrap();
            for j in 0..m {
                for i in 0..n {
                    let mut plus = model.clone();
                    plus.experts.weights[j][i] += h;
                    let mut minus = model.clone();
                    minus.experts.weights[j][i] -= h;
                    let fd = (log_pseudo_likelihood(&plus, &batch).unwrap()
                        - log_pseudo_likelihood(&minus, &batch).unwrap())
                        / (2.0 * h);
                    let scale = fd.abs().max(grads[j][i].abs()).max(1e-6);
                    assert!(
                        (fd - grads[j][i]).abs() / scale < 1e-5,
                        "trial {trial} expert {j} weight {i}: fd {fd} vs {}",
                        grads[j][i]
                    );
                }
            }
        }
    }

    #[test]
    fn joint_table_normalizes_and_uniform_for_no_experts() {
        let model = tiny_model(9, 3, 4, 0);
        let table = brute_force_joint(&model).unwrap();
        assert!((table.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(table.probs.iter().all(|&p| (p - 1.0 / 64.0).abs() < 1e-12));
        let model2 = tiny_model(10, 3, 4, 2);
        let table2 = brute_force_joint(&model2).unwrap();
        assert!((table2.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let model = tiny_model(11, 12, 16, 1);
        assert!(matches!(
            brute_force_joint(&model),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn exact_gradient_matches_finite_differences() {
        let h = 1e-6;
        let model = tiny_model(12, 3, 4, 2);
        let batch = lattice_batch(&model, 5, 7);
        let table = brute_force_joint(&model).unwrap();
        let grads = exact_log_likelihood_gradient(&model, &table, &batch).unwrap();
        for j in 0..model.m() {
            for i in 0..model.n() {
                let mut plus = model.clone();
                plus.experts.weights[j][i] += h;
                let mut minus = model.clone();
                minus.experts.weights[j][i] -= h;
                let lp = exact_avg_log_likelihood(&plus, &brute_force_joint(&plus).unwrap(), &batch)
                    .unwrap();
                let lm =
                    exact_avg_log_likelihood(&minus, &brute_force_joint(&minus).unwrap(), &batch)
                        .unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let scale = fd.abs().max(grads[j][i].abs()).max(1e-6);
                assert!(
                    (fd - grads[j][i]).abs() / scale < 1e-6,
                    "expert {j} weight {i}: fd {fd} vs {}",
                    grads[j][i]
                );
            }
        }
    }

    #[test]
    fn gibbs_uniform_when_no_experts() {
        let model = tiny_model(13, 2, 3, 0);
        let mut rng = RngStream::from_seed(3);
        let mut counts = vec![0usize; 3];
        let mut state = vec![0.0, 0.0];
        for _ in 0..6000 {
            state = gibbs_sweep(&model, &state, &mut rng).unwrap();
            counts[model.space.index_of(state[0], 0).unwrap()] += 1;
        }
        for &c in &counts {
            assert!((c as f64 / 6000.0 - 1.0 / 3.0).abs() < 0.03);
        }
    }

    #[test]
    fn gibbs_deterministic_under_fixed_seed() {
        let model = tiny_model(14, 3, 4, 2);
        let start = vec![0.0; 3];
        let mut a = RngStream::new(5, 1);
        let mut b = RngStream::new(5, 1);
        let xa = gibbs_chain(&model, &start, 50, 10, &mut a).unwrap();
        let xb = gibbs_chain(&model, &start, 50, 10, &mut b).unwrap();
        assert_eq!(xa, xb);
    }

    #[test]
    fn gibbs_converges_to_enumerated_joint() {
        let model = tiny_model(15, 3, 4, 2);
        let table = brute_force_joint(&model).unwrap();
        let mut rng = RngStream::from_seed(77);
        let start = vec![0.0; 3];
        let samples = gibbs_chain(&model, &start, 50_000, 1_000, &mut rng).unwrap();
        let mut counts = vec![0.0; table.probs.len()];
        for s in &samples {
            counts[table.index(s, &model.space).unwrap()] += 1.0;
        }
        for c in &mut counts {
            *c /= samples.len() as f64;
        }
        let tv = crate::stats::total_variation(&counts, &table.probs);
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn train_pl_zero_rate_keeps_model() {
        let model = tiny_model(16, 3, 4, 2);
        let batch = lattice_batch(&model, 10, 8);
        let config = PlTrainConfig {
            learning_rate: 1e-300,
            iterations: 3,
            ..Default::default()
        };
        let (trained, _) = train_pl(model.clone(), &batch, &config).unwrap();
        for (a, b) in model
            .experts
            .weights
            .iter()
            .flatten()
            .zip(trained.experts.weights.iter().flatten())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_pl_objective_non_decreasing_with_line_search() {
        for method in [PlMethod::Ascent, PlMethod::ConjugateGradient] {
            let model = tiny_model(17, 3, 4, 2);
            let batch = lattice_batch(&model, 30, 9);
            let config = PlTrainConfig {
                iterations: 50,
                method,
                ..Default::default()
            };
            let (_, trace) = train_pl(model, &batch, &config).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "objective decreased: {w:?}");
            }
            assert!(trace.last().unwrap() > trace.first().unwrap());
        }
    }

    #[test]
    fn train_pl_recovers_planted_constraint() {
        // Plant a single constraint on a 4-pixel lattice and sample exactly
        // from the planted joint, then fit a fresh single-expert model.
        let space = QuantizedSpace::uniform(8).unwrap();
        let planted = vec![2.0, -2.0, 2.0, -2.0];
        let true_model = PlModel::new(
            StudentTExpertSet {
                n: 4,
                k: 100.0,
                weights: vec![planted.clone()],
            },
            space.clone(),
        );
        let table = brute_force_joint(&true_model).unwrap();
        let mut rng = RngStream::from_seed(123);
        let mut batch = DataBatch::empty(4);
        for _ in 0..400 {
            let s = rng.categorical(&table.probs);
            batch.push_case(&table.state(s, &space)).unwrap();
        }

        let mut init_rng = RngStream::from_seed(321);
        let weights = vec![(0..4).map(|_| 0.1 * init_rng.normal()).collect()];
        let model = PlModel::new(
            StudentTExpertSet {
                n: 4,
                k: 100.0,
                weights,
            },
            space,
        );
        let config = PlTrainConfig {
            iterations: 300,
            ..Default::default()
        };
        let (trained, trace) = train_pl(model, &batch, &config).unwrap();
        assert!(trace.last().unwrap() > trace.first().unwrap());

        let w = &trained.experts.weights[0];
        let dot: f64 = w.iter().zip(&planted).map(|(a, b)| a * b).sum();
        let nw: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let np: f64 = planted.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cosine = (dot / (nw * np)).abs();
        assert!(cosine > 0.95, "cosine similarity {cosine}, w = {w:?}");
    }
}
