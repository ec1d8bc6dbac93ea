//! Detailed-balance Markov kernels and the classical Jarzynski equality
//! for an inverse-temperature ramp.
//!
//! Kernels are one-step and column-stochastic: entry `(to, from)` is the
//! probability of the move `from -> to`. Each neighbor is proposed with
//! probability `1 / d_max`, where `d_max` is the largest degree of the move
//! graph; unused proposal mass and rejections stay on the diagonal. On
//! regular graphs this is the plain uniform-neighbor proposal.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gibbs_state, shifted_weights, CostFunction, Schedule};
use crate::rng::{self, Stream};

/// Acceptance rule of the single-move kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// `min(1, exp(-beta dE))`.
    #[default]
    Metropolis,
    /// `1 / (1 + exp(beta dE))`.
    HeatBath,
}

impl KernelKind {
    fn acceptance(self, beta: f64, de: f64) -> f64 {
        let x = beta * de;
        match self {
            KernelKind::Metropolis => (-x.max(0.0)).exp(),
            KernelKind::HeatBath => {
                if x > 0.0 {
                    let e = (-x).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + x.exp())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub entries: DMatrix<f64>,
    pub beta: f64,
}

impl TransitionMatrix {
    /// Kernel that never moves.
    pub fn identity(n: usize, beta: f64) -> Self {
        TransitionMatrix {
            entries: DMatrix::identity(n, n),
            beta,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest deviation of a column sum from one.
    pub fn stochasticity_residual(&self) -> f64 {
        self.entries
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Draws the successor of `from` given a uniform variate `u` in [0, 1).
    pub fn step(&self, from: usize, u: f64) -> usize {
        let column = self.entries.column(from);
        let mut acc = 0.0;
        let mut last = from;
        for (to, &p) in column.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = to;
            if u < acc {
                return to;
            }
        }
        last
    }
}

pub fn build_kernel(cost: &CostFunction, beta: f64, kind: KernelKind) -> Result<TransitionMatrix> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Parameter(format!(
            "inverse temperature must be finite and >= 0, got {beta}"
        )));
    }
    let n = cost.len();
    let mut entries = DMatrix::zeros(n, n);
    let proposal = match cost.max_degree() {
        0 => 0.0,
        d => 1.0 / d as f64,
    };
    for from in 0..n {
        let e_from = cost.energy(from);
        let mut out = 0.0;
        for &to in cost.neighbors(from) {
            let p = proposal * kind.acceptance(beta, cost.energy(to) - e_from);
            entries[(to, from)] = p;
            out += p;
        }
        entries[(from, from)] = 1.0 - out;
    }
    Ok(TransitionMatrix { entries, beta })
}

pub fn build_metropolis_matrix(cost: &CostFunction, beta: f64) -> Result<TransitionMatrix> {
    build_kernel(cost, beta, KernelKind::Metropolis)
}

/// `max |M(s', s) g(s) - M(s, s') g(s')|` over all pairs, with
/// `g = exp(-beta (E - min E))` at the kernel's inverse temperature.
pub fn verify_detailed_balance(m: &TransitionMatrix, cost: &CostFunction) -> Result<f64> {
    let n = cost.len();
    if m.dim() != n {
        return Err(Error::Parameter(format!(
            "kernel has dimension {} but cost has {n} states",
            m.dim()
        )));
    }
    let (g, _) = shifted_weights(cost, m.beta);
    let mut worst = 0.0f64;
    for s in 0..n {
        for t in s + 1..n {
            let r = (m.entries[(t, s)] * g[s] - m.entries[(s, t)] * g[t]).abs();
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// One realization of the ramp: visited states and its exponentiated work.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkSample {
    pub trajectory: Vec<usize>,
    /// `sum_k -(beta_{k+1} - beta_k) E(sigma_k)`.
    pub work_exponent: f64,
    pub weight: f64,
}

/// Trajectory sampler with kernels precomputed on a fixed inverse-temperature grid.
///
/// `betas` has one more entry than `kernels`; kernel `k` is used for the
/// transition that follows the work increment `betas[k + 1] - betas[k]`.
pub struct TrajectorySampler<'a> {
    cost: &'a CostFunction,
    betas: Vec<f64>,
    kernels: Vec<TransitionMatrix>,
    initial: Vec<f64>,
}

impl<'a> TrajectorySampler<'a> {
    pub fn new(cost: &'a CostFunction, schedule: &Schedule, kind: KernelKind) -> Result<Self> {
        let betas = schedule.betas();
        let kernels = betas[1..]
            .iter()
            .map(|&b| build_kernel(cost, b, kind))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(cost, betas, kernels)
    }

    pub fn from_parts(cost: &'a CostFunction, betas: Vec<f64>, kernels: Vec<TransitionMatrix>) -> Result<Self> {
        if betas.len() != kernels.len() + 1 {
            return Err(Error::Parameter(format!(
                "{} inverse temperatures need {} kernels, got {}",
                betas.len(),
                betas.len().saturating_sub(1),
                kernels.len()
            )));
        }
        if let Some(k) = kernels.iter().position(|m| m.dim() != cost.len()) {
            return Err(Error::Parameter(format!(
                "kernel {k} does not match the cost dimension"
            )));
        }
        let initial = gibbs_state(cost, betas[0])?.probabilities;
        Ok(TrajectorySampler {
            cost,
            betas,
            kernels,
            initial,
        })
    }

    fn initial_state(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (s, &p) in self.initial.iter().enumerate() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.initial.len() - 1
    }

    pub fn sample(&self, rng: &mut Stream) -> WorkSample {
        let mut state = self.initial_state(rng::unit_f64(rng));
        let mut trajectory = Vec::with_capacity(self.betas.len());
        trajectory.push(state);
        let mut work_exponent = 0.0;
        for (k, kernel) in self.kernels.iter().enumerate() {
            work_exponent -= (self.betas[k + 1] - self.betas[k]) * self.cost.energy(state);
            state = kernel.step(state, rng::unit_f64(rng));
            trajectory.push(state);
        }
        WorkSample {
            trajectory,
            work_exponent,
            weight: work_exponent.exp(),
        }
    }
}

pub fn sample_trajectory(cost: &CostFunction, schedule: &Schedule, rng_seed: u64) -> Result<WorkSample> {
    let sampler = TrajectorySampler::new(cost, schedule, KernelKind::Metropolis)?;
    Ok(sampler.sample(&mut rng::generator(rng_seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JarzynskiEstimate {
    pub n_samples: usize,
    pub mean: f64,
    pub std_error: f64,
}

impl JarzynskiEstimate {
    /// Sample mean and standard error of the mean, summed in index order.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::Parameter(format!("need at least 2 samples, got {n}")));
        }
        let mean = weights.iter().sum::<f64>() / n as f64;
        let var = weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(JarzynskiEstimate {
            n_samples: n,
            mean,
            std_error: (var / n as f64).sqrt(),
        })
    }

    /// `(mean - exact) / std_error`; zero when both the error and the
    /// deviation vanish.
    pub fn z_score(&self, exact: f64) -> f64 {
        let dev = self.mean - exact;
        if self.std_error > 0.0 {
            dev / self.std_error
        } else if dev == 0.0 {
            0.0
        } else {
            dev.signum() * f64::INFINITY
        }
    }
}

/// Weights of `n_samples` independent trajectories; sample `i` draws from
/// stream `i` of `rng_seed`, so the result does not depend on thread count.
pub fn jarzynski_weights(
    cost: &CostFunction,
    schedule: &Schedule,
    n_samples: usize,
    rng_seed: u64,
    kind: KernelKind,
) -> Result<Vec<f64>> {
    let sampler = TrajectorySampler::new(cost, schedule, kind)?;
    Ok((0..n_samples as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut rng::substream(rng_seed, i)).weight)
        .collect())
}

pub fn jarzynski_estimate(
    cost: &CostFunction,
    schedule: &Schedule,
    n_samples: usize,
    rng_seed: u64,
) -> Result<JarzynskiEstimate> {
    if n_samples < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n_samples}")));
    }
    let weights = jarzynski_weights(cost, schedule, n_samples, rng_seed, KernelKind::Metropolis)?;
    JarzynskiEstimate::from_weights(&weights)
}

/// `Z(beta_n) / Z(beta_0)` with `Z(beta) = sum exp(-beta E)`.
pub fn exact_partition_ratio(cost: &CostFunction, beta_0: f64, beta_n: f64) -> Result<f64> {
    if !(beta_0.is_finite() && beta_n.is_finite()) {
        return Err(Error::Parameter(
            "partition ratio needs finite inverse temperatures".into(),
        ));
    }
    let e_min = cost.min_energy();
    let shifted = |b: f64| -> f64 { cost.energies().iter().map(|&e| (-b * (e - e_min)).exp()).sum() };
    let ratio = (-(beta_n - beta_0) * e_min).exp() * shifted(beta_n) / shifted(beta_0);
    if ratio.is_finite() {
        Ok(ratio)
    } else {
        Err(Error::NumericRange(format!(
            "partition ratio overflows between beta {beta_0} and {beta_n}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_random_potential;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_state_metropolis_by_hand() {
        let cost = CostFunction::chain(vec![0.0, 1.0]).unwrap();
        let m = build_metropolis_matrix(&cost, 2f64.ln()).unwrap();
        assert_relative_eq!(m.entries[(1, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m.entries[(0, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(m.entries[(0, 1)], 1.0);
        assert_eq!(m.entries[(1, 1)], 0.0);
        // Stationary distribution (2/3, 1/3).
        let pi = nalgebra::DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!((&m.entries * &pi - &pi).amax() < 1e-15);
        assert!(verify_detailed_balance(&m, &cost).unwrap() < 1e-15);
    }

    #[test]
    fn infinite_temperature_accepts_everything() {
        let cost = build_random_potential(7, 2, 0.0, 1.0).unwrap();
        let m = build_metropolis_matrix(&cost, 0.0).unwrap();
        for s in 0..7 {
            for &t in cost.neighbors(s) {
                assert_eq!(m.entries[(t, s)], 0.5);
            }
        }
        let uniform = nalgebra::DVector::from_element(7, 1.0 / 7.0);
        assert!((&m.entries * &uniform - &uniform).amax() < 1e-15);
    }

    #[test]
    fn heat_bath_satisfies_detailed_balance() {
        let cost = build_random_potential(9, 4, 0.0, 1.0).unwrap();
        for beta in [0.0, 1.0, 30.0] {
            let m = build_kernel(&cost, beta, KernelKind::HeatBath).unwrap();
            assert!(m.stochasticity_residual() < 1e-12);
            assert!(verify_detailed_balance(&m, &cost).unwrap() < 1e-12);
        }
    }

    #[test]
    fn detailed_balance_detects_injected_fault() {
        let cost = build_random_potential(6, 8, 0.0, 1.0).unwrap();
        let mut m = build_metropolis_matrix(&cost, 3.0).unwrap();
        let ground = crate::model::ground_state_set(&cost, 0.0).states[0];
        let other = cost.neighbors(ground)[0];
        m.entries[(other, ground)] += 1e-4;
        let r = verify_detailed_balance(&m, &cost).unwrap();
        assert_relative_eq!(r, 1e-4, max_relative = 1e-9);
    }

    #[test]
    fn detailed_balance_single_state() {
        let cost = CostFunction::chain(vec![1.5]).unwrap();
        let m = build_metropolis_matrix(&cost, 2.0).unwrap();
        assert_eq!(m.entries[(0, 0)], 1.0);
        assert_eq!(verify_detailed_balance(&m, &cost).unwrap(), 0.0);
    }

    #[test]
    fn no_protocol_gives_unit_weight() {
        let cost = build_random_potential(4, 1, 0.0, 1.0).unwrap();
        let sampler = TrajectorySampler::from_parts(&cost, vec![0.0], vec![]).unwrap();
        let s = sampler.sample(&mut rng::generator(5));
        assert_eq!(s.trajectory.len(), 1);
        assert_eq!(s.weight, 1.0);
    }

    #[test]
    fn constant_beta_gives_unit_weight() {
        let cost = build_random_potential(5, 1, 0.0, 1.0).unwrap();
        let schedule = Schedule::new(0.0, 1.0, 20).unwrap();
        for seed in 0..20 {
            let s = sample_trajectory(&cost, &schedule, seed).unwrap();
            assert_eq!(s.weight, 1.0);
            assert_eq!(s.trajectory.len(), 21);
        }
        let est = jarzynski_estimate(&cost, &schedule, 100, 3).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn frozen_kernel_telescopes() {
        let cost = build_random_potential(5, 3, 0.0, 1.0).unwrap();
        let schedule = Schedule::new(2.0, 1.0, 10).unwrap();
        let betas = schedule.betas();
        let kernels = betas[1..].iter().map(|&b| TransitionMatrix::identity(5, b)).collect();
        let sampler = TrajectorySampler::from_parts(&cost, betas, kernels).unwrap();
        for seed in 0..10 {
            let s = sampler.sample(&mut rng::generator(seed));
            let start = s.trajectory[0];
            assert!(s.trajectory.iter().all(|&x| x == start));
            let expected = -2.0 * cost.energy(start);
            assert_relative_eq!(s.work_exponent, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_state_estimate_is_exact() {
        let cost = CostFunction::chain(vec![-0.7]).unwrap();
        let schedule = Schedule::new(2.0, 1.0, 10).unwrap();
        let est = jarzynski_estimate(&cost, &schedule, 10, 1).unwrap();
        let exact = exact_partition_ratio(&cost, 0.0, 2.0).unwrap();
        assert_relative_eq!(exact, (1.4f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(est.mean, exact, max_relative = 1e-14);
    }

    #[test]
    fn estimate_agrees_with_exact_ratio() {
        let cost = build_random_potential(4, 17, 0.0, 1.0).unwrap();
        let schedule = Schedule::new(2.0, 1.0, 10).unwrap();
        let est = jarzynski_estimate(&cost, &schedule, 100_000, 99).unwrap();
        let exact = exact_partition_ratio(&cost, 0.0, 2.0).unwrap();
        assert!(est.z_score(exact).abs() < 3.0, "z = {}", est.z_score(exact));
    }

    #[test]
    fn estimate_is_reproducible() {
        let cost = build_random_potential(4, 17, 0.0, 1.0).unwrap();
        let schedule = Schedule::new(2.0, 1.0, 10).unwrap();
        let a = jarzynski_estimate(&cost, &schedule, 1000, 5).unwrap();
        let b = jarzynski_estimate(&cost, &schedule, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert!(jarzynski_estimate(&cost, &schedule, 1, 5).is_err());
    }

    #[test]
    fn partition_ratio_examples() {
        let cost = CostFunction::chain(vec![0.0, 1.0]).unwrap();
        assert_eq!(exact_partition_ratio(&cost, 0.7, 0.7).unwrap(), 1.0);
        let expected = (1.0 + (-1f64).exp()) / 2.0;
        assert_relative_eq!(
            exact_partition_ratio(&cost, 0.0, 1.0).unwrap(),
            expected,
            epsilon = 1e-15
        );
    }

    proptest! {
        #[test]
        fn kernels_are_stochastic_and_reversible(seed in 0u64..1000, n in 2usize..20, beta in 0.0f64..100.0) {
            let cost = build_random_potential(n, seed, 0.0, 1.0).unwrap();
            let m = build_metropolis_matrix(&cost, beta).unwrap();
            prop_assert!(m.entries.iter().all(|&p| p >= 0.0));
            prop_assert!(m.stochasticity_residual() < 1e-12);
            prop_assert!(verify_detailed_balance(&m, &cost).unwrap() < 1e-12);
        }

        #[test]
        fn partition_ratio_shift_bookkeeping(seed in 0u64..1000, c in -3.0f64..3.0, b0 in 0.0f64..3.0, b1 in 0.0f64..3.0) {
            let cost = build_random_potential(6, seed, 0.0, 1.0).unwrap();
            let moved = cost.offset_by(c).unwrap();
            let r = exact_partition_ratio(&cost, b0, b1).unwrap();
            let r_moved = exact_partition_ratio(&moved, b0, b1).unwrap();
            let expected = r * (-(b1 - b0) * c).exp();
            prop_assert!((r_moved - expected).abs() <= 1e-12 * expected);
        }
    }
}
