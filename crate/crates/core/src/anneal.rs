//! Wavefunction annealing: ordinary QA and quantum Jarzynski annealing.
//!
//! Both protocols start from the uniform superposition, which is the
//! ground state of the mapped Hamiltonian at `beta = 0`. QA evolves it
//! unitarily under `H_q(beta(t))`. QJA multiplies each step by the diagonal
//! weight `exp(-dbeta E / 2)`, which maps the Gibbs amplitudes at `beta_k`
//! onto those at `beta_{k+1}`; the following unitary step leaves that
//! zero-energy ground state unchanged, so QJA tracks the instantaneous Gibbs
//! state for any annealing time.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, symmetric_eigen};
use crate::model::{gibbs_state, ground_state_set, CostFunction, GroundSet, Schedule};
use crate::qmap::{build_hq_with, QuantumHamiltonian};
use crate::stochastic::KernelKind;

/// Degeneracy tolerance used for the ground-state set unless overridden.
pub const DEFAULT_GROUND_TOL: f64 = 1e-12;

/// Complex amplitudes over the basis states with a cached squared norm.
///
/// QJA evolution is not norm preserving, so states are kept unnormalized
/// and observables divide by `norm_sq`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveVector {
    amplitudes: DVector<Complex64>,
    norm_sq: f64,
}

impl WaveVector {
    pub fn new(amplitudes: DVector<Complex64>) -> Self {
        let norm_sq = norm_sq(&amplitudes);
        WaveVector { amplitudes, norm_sq }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `|psi(s)|^2 / ||psi||^2`.
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let n = self.nonzero_norm()?;
        Ok(self.amplitudes.iter().map(|z| z.norm_sqr() / n).collect())
    }

    pub fn normalized(&self) -> Result<WaveVector> {
        let scale = 1.0 / self.nonzero_norm()?.sqrt();
        Ok(WaveVector::new(self.amplitudes.map(|z| z * scale)))
    }

    fn nonzero_norm(&self) -> Result<f64> {
        if self.norm_sq > 0.0 {
            Ok(self.norm_sq)
        } else {
            Err(Error::ZeroVector)
        }
    }
}

/// `(1, ..., 1) / sqrt(n)`.
pub fn uniform_initial_state(n: usize) -> Result<WaveVector> {
    if n == 0 {
        return Err(Error::Parameter("state space must have at least one state".into()));
    }
    let a = 1.0 / (n as f64).sqrt();
    Ok(WaveVector::from_real(&vec![a; n]))
}

fn check_dims(psi: &WaveVector, n: usize) -> Result<()> {
    if psi.len() == n {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "state has {} amplitudes, expected {n}",
            psi.len()
        )))
    }
}

/// `exp(-i dt H) psi` through the eigen-decomposition of `H`.
pub fn propagate_step(psi: &WaveVector, h: &QuantumHamiltonian, dt: f64) -> Result<WaveVector> {
    check_dims(psi, h.dim())?;
    if !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be finite, got {dt}")));
    }
    Ok(WaveVector::new(h.propagator().propagate(&psi.amplitudes, dt)))
}

/// Multiplies `psi(s)` by `exp(-dbeta E(s) / 2)`. The result is not renormalized.
pub fn apply_work_weight(psi: &WaveVector, cost: &CostFunction, dbeta: f64) -> Result<WaveVector> {
    check_dims(psi, cost.len())?;
    if !(dbeta.is_finite() && dbeta >= 0.0) {
        return Err(Error::Parameter(format!("dbeta must be finite and >= 0, got {dbeta}")));
    }
    let amplitudes = DVector::from_iterator(
        psi.len(),
        psi.amplitudes
            .iter()
            .zip(cost.energies())
            .map(|(z, &e)| z * (-0.5 * dbeta * e).exp()),
    );
    let out = WaveVector::new(amplitudes);
    if out.norm_sq.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericRange("work-weighted state norm overflows".into()))
    }
}

/// `|<Psi_eq(beta)| psi / ||psi||>|^2`.
pub fn gibbs_fidelity(psi: &WaveVector, cost: &CostFunction, beta: f64) -> Result<f64> {
    check_dims(psi, cost.len())?;
    let n = psi.nonzero_norm()?;
    let g = gibbs_state(cost, beta)?;
    let overlap: Complex64 = psi.amplitudes.iter().zip(&g.amplitudes).map(|(z, a)| z * *a).sum();
    Ok((overlap.norm_sqr() / n).min(1.0))
}

/// Probability of measuring a state in the ground set of `cost`.
pub fn ground_state_probability(psi: &WaveVector, cost: &CostFunction, tol: f64) -> Result<f64> {
    check_dims(psi, cost.len())?;
    let set = ground_state_set(cost, tol);
    ground_probability_in(psi, &set)
}

fn ground_probability_in(psi: &WaveVector, set: &GroundSet) -> Result<f64> {
    let n = psi.nonzero_norm()?;
    let mass: f64 = set.states.iter().map(|&s| psi.amplitudes[s].norm_sqr()).sum();
    Ok((mass / n).min(1.0))
}

/// Which protocol produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Qa,
    Qja,
    QaInterp,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Qa => "qa",
            Method::Qja => "qja",
            Method::QaInterp => "qa-interp",
        }
    }
}

/// Interleaving of weight and unitary within one QJA step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QjaOrdering {
    /// Weight to `beta_{k+1}`, then evolve under `H_q(beta_{k+1})`.
    #[default]
    WeightThenUnitary,
    /// Evolve under `H_q(beta_k)`, then weight to `beta_{k+1}`.
    UnitaryThenWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub ground_tol: f64,
    /// Record every this many steps; `None` uses `ceil(n_steps / 500)`.
    /// Step 0 and the final step are always recorded.
    pub record_every: Option<usize>,
    pub ordering: QjaOrdering,
    pub kernel: KernelKind,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            ground_tol: DEFAULT_GROUND_TOL,
            record_every: None,
            ordering: QjaOrdering::default(),
            kernel: KernelKind::default(),
        }
    }
}

impl RunOptions {
    fn cadence(&self, n_steps: usize) -> usize {
        self.record_every.unwrap_or_else(|| n_steps.div_ceil(500)).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRecord {
    pub step: usize,
    pub t: f64,
    pub beta: f64,
    pub p_ground: f64,
    pub p_ground_gibbs: f64,
    pub fidelity: f64,
    pub norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub method: Method,
    pub schedule: Schedule,
    pub records: Vec<RunRecord>,
    pub final_state: WaveVector,
}

impl RunResult {
    pub fn final_record(&self) -> &RunRecord {
        self.records.last().expect("runs always record the initial step")
    }

    /// `max_k |p_ground - p_ground_gibbs|` over recorded steps.
    pub fn max_gibbs_deviation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| (r.p_ground - r.p_ground_gibbs).abs())
            .fold(0.0, f64::max)
    }
}

struct Recorder<'a> {
    cost: &'a CostFunction,
    schedule: &'a Schedule,
    set: GroundSet,
    every: usize,
    records: Vec<RunRecord>,
}

impl<'a> Recorder<'a> {
    fn new(cost: &'a CostFunction, schedule: &'a Schedule, options: &RunOptions) -> Self {
        Recorder {
            cost,
            schedule,
            set: ground_state_set(cost, options.ground_tol),
            every: options.cadence(schedule.n_steps()),
            records: Vec::new(),
        }
    }

    fn observe(&mut self, k: usize, psi: &WaveVector) -> Result<()> {
        if !k.is_multiple_of(self.every) && k != self.schedule.n_steps() {
            return Ok(());
        }
        let beta = self.schedule.beta(k);
        let gibbs = gibbs_state(self.cost, beta)?;
        self.records.push(RunRecord {
            step: k,
            t: self.schedule.time(k),
            beta,
            p_ground: ground_probability_in(psi, &self.set)?,
            p_ground_gibbs: self.set.states.iter().map(|&s| gibbs.probabilities[s]).sum(),
            fidelity: gibbs_fidelity(psi, self.cost, beta)?,
            norm_sq: psi.norm_sq(),
        });
        Ok(())
    }
}

pub fn run_qja(cost: &CostFunction, schedule: &Schedule) -> Result<RunResult> {
    run_qja_with(cost, schedule, &RunOptions::default())
}

pub fn run_qja_with(cost: &CostFunction, schedule: &Schedule, options: &RunOptions) -> Result<RunResult> {
    let dt = schedule.dt();
    let mut psi = uniform_initial_state(cost.len())?;
    let mut rec = Recorder::new(cost, schedule, options);
    rec.observe(0, &psi)?;
    for k in 0..schedule.n_steps() {
        let step = || -> Result<WaveVector> {
            let dbeta = schedule.dbeta(k);
            match options.ordering {
                QjaOrdering::WeightThenUnitary => {
                    let weighted = apply_work_weight(&psi, cost, dbeta)?;
                    let h = build_hq_with(cost, schedule.beta(k + 1), options.kernel)?;
                    propagate_step(&weighted, &h, dt)
                }
                QjaOrdering::UnitaryThenWeight => {
                    let h = build_hq_with(cost, schedule.beta(k), options.kernel)?;
                    let evolved = propagate_step(&psi, &h, dt)?;
                    apply_work_weight(&evolved, cost, dbeta)
                }
            }
        };
        psi = step().map_err(Error::at_step(k + 1))?;
        rec.observe(k + 1, &psi).map_err(Error::at_step(k + 1))?;
    }
    Ok(RunResult {
        method: Method::Qja,
        schedule: *schedule,
        records: rec.records,
        final_state: psi,
    })
}

pub fn run_qa(cost: &CostFunction, schedule: &Schedule) -> Result<RunResult> {
    run_qa_with(cost, schedule, &RunOptions::default())
}

pub fn run_qa_with(cost: &CostFunction, schedule: &Schedule, options: &RunOptions) -> Result<RunResult> {
    let dt = schedule.dt();
    let mut psi = uniform_initial_state(cost.len())?;
    let mut rec = Recorder::new(cost, schedule, options);
    rec.observe(0, &psi)?;
    for k in 0..schedule.n_steps() {
        let step = || -> Result<WaveVector> {
            let h = build_hq_with(cost, schedule.beta(k + 1), options.kernel)?;
            propagate_step(&psi, &h, dt)
        };
        psi = step().map_err(Error::at_step(k + 1))?;
        rec.observe(k + 1, &psi).map_err(Error::at_step(k + 1))?;
    }
    Ok(RunResult {
        method: Method::Qa,
        schedule: *schedule,
        records: rec.records,
        final_state: psi,
    })
}

/// `f H_0 + (1 - f) H_1` with `H_0 = diag(E)` and
/// `H_1 = strength (I - |u><u|)` for the uniform state `u`.
pub fn interpolated_hamiltonian(cost: &CostFunction, f: f64, strength: f64) -> DMatrix<f64> {
    let n = cost.len();
    let u = 1.0 / n as f64;
    let mut h = DMatrix::from_element(n, n, -(1.0 - f) * strength * u);
    for s in 0..n {
        h[(s, s)] += (1.0 - f) * strength + f * cost.energy(s);
    }
    h
}

/// Smallest gap of [`interpolated_hamiltonian`] over `grid` evenly spaced
/// values of `f` in [0, 1], together with the `f` where it occurs.
pub fn interpolated_min_gap(cost: &CostFunction, strength: f64, grid: usize) -> Result<(f64, f64)> {
    if cost.len() < 2 {
        return Err(Error::UndefinedGap);
    }
    if grid < 2 {
        return Err(Error::Parameter(format!("gap scan needs grid >= 2, got {grid}")));
    }
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..grid {
        let f = i as f64 / (grid - 1) as f64;
        let values = symmetric_eigen(&interpolated_hamiltonian(cost, f, strength)).values;
        let gap = values[1] - values[0];
        if gap < best.0 {
            best = (gap, f);
        }
    }
    Ok(best)
}

/// QA along the two-Hamiltonian interpolation with `f(t) = t / tau`.
pub fn run_qa_interpolated(cost: &CostFunction, schedule: &Schedule, transverse_strength: f64) -> Result<RunResult> {
    run_qa_interpolated_with(cost, schedule, transverse_strength, &RunOptions::default())
}

pub fn run_qa_interpolated_with(
    cost: &CostFunction,
    schedule: &Schedule,
    transverse_strength: f64,
    options: &RunOptions,
) -> Result<RunResult> {
    if !(transverse_strength.is_finite() && transverse_strength > 0.0) {
        return Err(Error::Parameter(format!(
            "transverse strength must be finite and > 0, got {transverse_strength}"
        )));
    }
    let dt = schedule.dt();
    let mut psi = uniform_initial_state(cost.len())?;
    let mut rec = Recorder::new(cost, schedule, options);
    rec.observe(0, &psi)?;
    for k in 0..schedule.n_steps() {
        let f = schedule.interpolation(schedule.time(k + 1));
        let spectrum = symmetric_eigen(&interpolated_hamiltonian(cost, f, transverse_strength));
        psi = WaveVector::new(spectrum.propagate(psi.amplitudes(), dt));
        rec.observe(k + 1, &psi).map_err(Error::at_step(k + 1))?;
    }
    Ok(RunResult {
        method: Method::QaInterp,
        schedule: *schedule,
        records: rec.records,
        final_state: psi,
    })
}
