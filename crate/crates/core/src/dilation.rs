//! Unitary realization of the work weight with one ancilla qubit per step.
//!
//! Step `k` rotates a fresh ancilla by the block
//! `[[sqrt y, sqrt(1-y)], [-sqrt(1-y), sqrt y]]` with `y(s) = exp(-dbeta_k E(s))`,
//! so the all-zero ancilla branch carries exactly the weighted amplitudes of
//! the non-unitary protocol. Energies must be nonnegative for `y <= 1`.
//!
//! Amplitudes are stored branch-major: index `b * N + s` for ancilla
//! bitstring `b` (ancilla `j` is bit `j`) and basis state `s`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::anneal::{uniform_initial_state, WaveVector};
use crate::error::{Error, Result};
use crate::model::{ground_state_set, shifted_weights, CostFunction, Schedule};
use crate::qmap::build_hq_with;
use crate::stochastic::KernelKind;

/// Largest number of dilated amplitudes `N * 2^m` that is simulated.
pub const AMPLITUDE_BUDGET: u128 = 1 << 22;

/// Degeneracy tolerance for the classical gap in the cost estimators.
pub const GAP_TOL: f64 = 1e-12;

fn check_budget(n_states: usize, n_ancilla: usize) -> Result<usize> {
    let amplitudes = (n_states as u128)
        .checked_shl(n_ancilla as u32)
        .filter(|_| n_ancilla < 100);
    match amplitudes {
        Some(a) if a <= AMPLITUDE_BUDGET => Ok(a as usize),
        _ => Err(Error::Resource {
            amplitudes: amplitudes.unwrap_or(u128::MAX),
            budget: AMPLITUDE_BUDGET,
        }),
    }
}

/// Sign of the lower-left entry of the ancilla block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `<1|W|0> = -sqrt(1 - y)`.
    #[default]
    Printed,
    /// `<1|W|0> = +sqrt(1 - y)`, with the upper-right entry negated to stay unitary.
    Flipped,
}

/// System-plus-ancilla state of the dilated protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedState {
    amplitudes: Vec<Complex64>,
    n_states: usize,
    n_ancilla: usize,
    next_fresh: usize,
}

impl DilatedState {
    /// `psi` tensored with `m` ancillas in state zero.
    pub fn new(psi: &WaveVector, n_ancilla: usize) -> Result<Self> {
        let n = psi.len();
        let total = check_budget(n, n_ancilla)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); total];
        amplitudes[..n].copy_from_slice(psi.amplitudes().as_slice());
        Ok(DilatedState {
            amplitudes,
            n_states: n,
            n_ancilla,
            next_fresh: 0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_ancilla(&self) -> usize {
        self.n_ancilla
    }

    /// Ancillas with this index or higher are still in state zero.
    pub fn next_fresh(&self) -> usize {
        self.next_fresh
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    fn active_branches(&self) -> usize {
        1 << self.next_fresh
    }

    fn pattern_index(&self, pattern: &[bool]) -> Result<usize> {
        if pattern.len() != self.n_ancilla {
            return Err(Error::Parameter(format!(
                "pattern has {} bits, state has {} ancillas",
                pattern.len(),
                self.n_ancilla
            )));
        }
        Ok(pattern
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| 1usize << j)
            .sum())
    }

    /// Unnormalized system amplitudes on the branch with ancilla pattern `pattern`.
    pub fn branch(&self, pattern: &[bool]) -> Result<WaveVector> {
        let b = self.pattern_index(pattern)?;
        let n = self.n_states;
        Ok(WaveVector::new(self.amplitudes[b * n..(b + 1) * n].to_vec().into()))
    }

    /// Probability of every ancilla pattern, indexed by its bitstring.
    pub fn pattern_probabilities(&self) -> Vec<f64> {
        self.amplitudes
            .chunks(self.n_states)
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Applies `U` to the system part of every branch that can be occupied.
    pub fn apply_system(&mut self, u: &DMatrix<Complex64>) -> Result<()> {
        let n = self.n_states;
        if u.shape() != (n, n) {
            return Err(Error::Parameter(format!("system operator must be {n}x{n}")));
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        let active = self.active_branches() * n;
        for chunk in self.amplitudes[..active].chunks_mut(n) {
            for (r, out) in scratch.iter_mut().enumerate() {
                *out = chunk.iter().enumerate().map(|(c, z)| u[(r, c)] * z).sum();
            }
            chunk.copy_from_slice(&scratch);
        }
        Ok(())
    }
}

/// `[[<0|W|0>, <0|W|1>], [<1|W|0>, <1|W|1>]]` for weight `y` in [0, 1].
pub fn ancilla_block(y: f64, sign: SignConvention) -> [[f64; 2]; 2] {
    let (a, b) = (y.sqrt(), (1.0 - y).sqrt());
    match sign {
        SignConvention::Printed => [[a, b], [-b, a]],
        SignConvention::Flipped => [[a, -b], [b, a]],
    }
}

/// `W_unit` acting on one ancilla, block diagonal in the basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct WUnit {
    y: Vec<f64>,
    ancilla: usize,
    n_ancilla: usize,
    sign: SignConvention,
}

pub fn build_w_unit(cost: &CostFunction, dbeta: f64, ancilla_index: usize, m: usize) -> Result<WUnit> {
    if cost.min_energy() < 0.0 {
        return Err(Error::Precondition(format!(
            "energies must be nonnegative, min E = {}; shift the instance first",
            cost.min_energy()
        )));
    }
    if !(dbeta.is_finite() && dbeta >= 0.0) {
        return Err(Error::Parameter(format!("dbeta must be finite and >= 0, got {dbeta}")));
    }
    let cap = dbeta * cost.max_energy();
    if cap >= 1.0 {
        return Err(Error::PErrorCap { value: cap });
    }
    if ancilla_index >= m {
        return Err(Error::Parameter(format!(
            "ancilla {ancilla_index} out of range for {m} ancillas"
        )));
    }
    check_budget(cost.len(), m)?;
    Ok(WUnit {
        y: cost.energies().iter().map(|&e| (-dbeta * e).exp()).collect(),
        ancilla: ancilla_index,
        n_ancilla: m,
        sign: SignConvention::Printed,
    })
}

impl WUnit {
    pub fn with_sign(mut self, sign: SignConvention) -> Self {
        self.sign = sign;
        self
    }

    pub fn ancilla(&self) -> usize {
        self.ancilla
    }

    /// Ancilla block for basis state `s`.
    pub fn block(&self, s: usize) -> [[f64; 2]; 2] {
        ancilla_block(self.y[s], self.sign)
    }

    /// `max |B^T B - I|` over all blocks; equal to that of the full operator.
    pub fn unitarity_residual(&self) -> f64 {
        (0..self.y.len())
            .map(|s| {
                let w = self.block(s);
                let mut worst = 0.0f64;
                for i in 0..2 {
                    for j in 0..2 {
                        let dot = w[0][i] * w[0][j] + w[1][i] * w[1][j];
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    /// The operator on the full `N * 2^m` space.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.y.len();
        let dim = n << self.n_ancilla;
        let bit = 1usize << self.ancilla;
        let mut w = DMatrix::zeros(dim, dim);
        for b in (0..1usize << self.n_ancilla).filter(|b| b & bit == 0) {
            for s in 0..n {
                let (i0, i1) = (b * n + s, (b | bit) * n + s);
                let blk = self.block(s);
                w[(i0, i0)] = blk[0][0];
                w[(i0, i1)] = blk[0][1];
                w[(i1, i0)] = blk[1][0];
                w[(i1, i1)] = blk[1][1];
            }
        }
        w
    }

    pub fn apply(&self, state: &mut DilatedState) -> Result<()> {
        let n = self.y.len();
        if state.n_states != n || state.n_ancilla != self.n_ancilla {
            return Err(Error::Parameter("operator and state dimensions differ".into()));
        }
        let bit = 1usize << self.ancilla;
        let reach = state.next_fresh.max(self.ancilla + 1);
        let blocks: Vec<[[f64; 2]; 2]> = (0..n).map(|s| self.block(s)).collect();
        for b in (0..1usize << reach).filter(|b| b & bit == 0) {
            for (s, w) in blocks.iter().enumerate() {
                let (i0, i1) = (b * n + s, (b | bit) * n + s);
                let (a0, a1) = (state.amplitudes[i0], state.amplitudes[i1]);
                state.amplitudes[i0] = a0 * w[0][0] + a1 * w[0][1];
                state.amplitudes[i1] = a0 * w[1][0] + a1 * w[1][1];
            }
        }
        state.next_fresh = reach;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DilationOptions {
    pub kernel: KernelKind,
    pub sign: SignConvention,
    /// When false the unitary step is skipped, leaving only the weights.
    pub evolve: bool,
}

impl DilationOptions {
    pub fn new() -> Self {
        DilationOptions {
            evolve: true,
            ..Default::default()
        }
    }
}

pub fn run_qja_dilated(cost: &CostFunction, schedule: &Schedule) -> Result<DilatedState> {
    run_qja_dilated_with(cost, schedule, &DilationOptions::new())
}

pub fn run_qja_dilated_with(
    cost: &CostFunction,
    schedule: &Schedule,
    options: &DilationOptions,
) -> Result<DilatedState> {
    let m = schedule.n_steps();
    let mut state = DilatedState::new(&uniform_initial_state(cost.len())?, m)?;
    let dt = schedule.dt();
    for k in 0..m {
        let mut step = || -> Result<()> {
            build_w_unit(cost, schedule.dbeta(k), k, m)?
                .with_sign(options.sign)
                .apply(&mut state)?;
            if options.evolve {
                let h = build_hq_with(cost, schedule.beta(k + 1), options.kernel)?;
                state.apply_system(&h.propagator().propagator_matrix(dt))?;
            }
            Ok(())
        };
        step().map_err(Error::at_step(k + 1))?;
    }
    Ok(state)
}

/// Normalized system state on an ancilla pattern, and the pattern's probability.
pub fn postselect(state: &DilatedState, pattern: &[bool]) -> Result<(WaveVector, f64)> {
    let branch = state.branch(pattern)?;
    if branch.amplitudes().iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroProbability);
    }
    let p = branch.norm_sq();
    if !p.is_normal() {
        return Err(Error::ProbabilityUnderflow);
    }
    Ok((branch.normalized()?, p))
}

/// Total probability of all patterns with `pattern_weight_class` ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightClassRow {
    pub n_ancilla: usize,
    pub pattern_weight_class: usize,
    pub total_probability: f64,
}

pub fn weight_class_report(state: &DilatedState) -> Vec<WeightClassRow> {
    let m = state.n_ancilla;
    let mut totals = vec![0.0; m + 1];
    for (b, p) in state.pattern_probabilities().into_iter().enumerate() {
        totals[b.count_ones() as usize] += p;
    }
    totals
        .into_iter()
        .enumerate()
        .map(|(j, total_probability)| WeightClassRow {
            n_ancilla: m,
            pattern_weight_class: j,
            total_probability,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub p_error_cap: f64,
    pub n_steps: usize,
    pub expected_repetitions: f64,
    pub max_energy: f64,
    pub epsilon: f64,
    pub beta_final: f64,
    pub dbeta: f64,
}

fn require_shifted(cost: &CostFunction) -> Result<()> {
    if cost.min_energy() < 0.0 {
        Err(Error::Precondition(format!(
            "cost estimates need nonnegative energies, min E = {}",
            cost.min_energy()
        )))
    } else {
        Ok(())
    }
}

/// `(1 - p)^(-n)`, or a range error when it overflows.
fn repetition_formula(p_error: f64, n_steps: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p_error) {
        return Err(Error::PErrorCap { value: p_error });
    }
    let r = (-(n_steps as f64) * (-p_error).ln_1p()).exp();
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NumericRange(format!("(1 - {p_error})^-{n_steps} overflows")))
    }
}

/// Steps needed to reach `beta_final` (default `1 / epsilon`) with
/// `dbeta * max E = p_error_cap`.
pub fn steps_estimate(cost: &CostFunction, beta_final: Option<f64>, p_error_cap: f64) -> Result<CostEstimate> {
    require_shifted(cost)?;
    if !(p_error_cap > 0.0 && p_error_cap < 1.0) {
        return Err(Error::Parameter(format!(
            "p_error_cap must lie in (0, 1), got {p_error_cap}"
        )));
    }
    let epsilon = ground_state_set(cost, GAP_TOL)
        .epsilon
        .ok_or_else(|| Error::Precondition("every state is a ground state; the classical gap is undefined".into()))?;
    let beta_final = beta_final.unwrap_or(1.0 / epsilon);
    if !(beta_final.is_finite() && beta_final > 0.0) {
        return Err(Error::Parameter(format!(
            "beta_final must be finite and > 0, got {beta_final}"
        )));
    }
    let max_energy = cost.max_energy();
    let dbeta = p_error_cap / max_energy;
    // Relative slack keeps exact ratios such as 1000 from rounding up to 1001.
    let ratio = beta_final / dbeta;
    let n_steps = ((ratio * (1.0 - 1e-9)).ceil() as usize).max(1);
    Ok(CostEstimate {
        p_error_cap,
        n_steps,
        expected_repetitions: repetition_formula(p_error_cap, n_steps)?,
        max_energy,
        epsilon,
        beta_final,
        dbeta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepetitionEstimate {
    pub p_error: f64,
    pub n_steps: usize,
    /// `(1 - p_error)^(-n)`.
    pub formula: f64,
    /// `N / Z(beta_final)`, the inverse all-zero probability; `None` if it overflows.
    pub exact: Option<f64>,
    /// `1 + beta_final * max E`, the first-order expansion of `formula`.
    pub linearized: f64,
}

pub fn repetition_estimate(cost: &CostFunction, beta_final: f64, n_steps: usize) -> Result<RepetitionEstimate> {
    require_shifted(cost)?;
    if !(beta_final.is_finite() && beta_final >= 0.0) || n_steps == 0 {
        return Err(Error::Parameter(format!(
            "need finite beta_final >= 0 and n_steps >= 1, got {beta_final} and {n_steps}"
        )));
    }
    let max_energy = cost.max_energy();
    let p_error = beta_final / n_steps as f64 * max_energy;
    let formula = repetition_formula(p_error, n_steps)?;
    // Z = exp(-beta E_min) * sum of shifted weights.
    let (weights, _) = shifted_weights(cost, beta_final);
    let log_ratio = (cost.len() as f64).ln() + beta_final * cost.min_energy() - weights.iter().sum::<f64>().ln();
    let exact = Some(log_ratio.exp()).filter(|x| x.is_finite());
    Ok(RepetitionEstimate {
        p_error,
        n_steps,
        formula,
        exact,
        linearized: 1.0 + beta_final * max_energy,
    })
}
