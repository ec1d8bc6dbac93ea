//! Classical-quantum mapping of a reversible kernel onto a stoquastic
//! Hamiltonian.
//!
//! `H = I - D^{1/2} M D^{-1/2}` with `D = diag(exp(beta E))`. Detailed
//! balance makes `H` symmetric, its ground state is the vector of Gibbs
//! amplitudes with eigenvalue zero, and the rest of the spectrum is
//! positive on a connected move graph.
//!
//! Each undirected edge `(s, t)` contributes one row
//! `sqrt(M(t|s)) e_s - sqrt(M(s|t)) e_t` to a factor `G` with `H = G^T G`.
//! `G` is a diagonally scaled incidence matrix, and the certified spectrum
//! is computed from that structure, which keeps metastable eigenvalues (of
//! order `exp(-beta * barrier)`) distinguishable from the zero mode. Time evolution only needs backward-stable eigenpairs and uses
//! the faster dense QR solver on `H` itself.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{factor_eigen, scaled_unimodular_eigen, symmetric_eigen, SpectralDecomposition};
use crate::model::{gibbs_state, CostFunction, Schedule};
use crate::stochastic::{build_kernel, KernelKind, TransitionMatrix};

/// Largest `beta * range(E)` accepted by [`build_hq`]. Beyond it the
/// Metropolis factors `exp(-beta dE)` leave the normal floating-point range.
pub const MAX_BETA_RANGE: f64 = 700.0;

/// `G = diag(rows) signs diag(cols)` with `signs` an oriented incidence matrix.
#[derive(Debug, Clone)]
struct Scaling {
    signs: DMatrix<f64>,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

#[derive(Debug)]
pub struct QuantumHamiltonian {
    pub matrix: DMatrix<f64>,
    pub beta: f64,
    factor: Option<DMatrix<f64>>,
    scaling: Option<Scaling>,
    asymmetry: f64,
    spectrum: OnceLock<SpectralDecomposition>,
    dense: OnceLock<SpectralDecomposition>,
}

impl Clone for QuantumHamiltonian {
    fn clone(&self) -> Self {
        let copy = |cell: &OnceLock<SpectralDecomposition>| {
            let out = OnceLock::new();
            if let Some(s) = cell.get() {
                let _ = out.set(s.clone());
            }
            out
        };
        QuantumHamiltonian {
            matrix: self.matrix.clone(),
            beta: self.beta,
            factor: self.factor.clone(),
            scaling: self.scaling.clone(),
            asymmetry: self.asymmetry,
            spectrum: copy(&self.spectrum),
            dense: copy(&self.dense),
        }
    }
}

impl QuantumHamiltonian {
    /// Wraps an arbitrary symmetric matrix. The spectrum then comes from the
    /// dense QR solver, since no factor is known.
    pub fn from_matrix(matrix: DMatrix<f64>, beta: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Parameter("Hamiltonian must be square".into()));
        }
        let asymmetry = (&matrix - matrix.transpose()).amax();
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(QuantumHamiltonian {
            matrix,
            beta,
            factor: None,
            scaling: None,
            asymmetry,
            spectrum: OnceLock::new(),
            dense: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H(s', s) - H(s, s')|` of the matrix as assembled, before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn factor(&self) -> Option<&DMatrix<f64>> {
        self.factor.as_ref()
    }

    /// Eigenpairs for time evolution, from the dense QR solver.
    pub fn propagator(&self) -> &SpectralDecomposition {
        self.dense.get_or_init(|| symmetric_eigen(&self.matrix))
    }

    /// Certified eigenpairs: from the factor when one is known.
    pub fn spectrum(&self) -> Result<&SpectralDecomposition> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let computed = match (&self.scaling, &self.factor) {
            (Some(sc), _) => scaled_unimodular_eigen(&sc.signs, &sc.rows, &sc.cols)?,
            (None, Some(g)) => factor_eigen(g)?,
            (None, None) => symmetric_eigen(&self.matrix),
        };
        let _ = self.spectrum.set(computed);
        Ok(self.spectrum.get().expect("spectrum was just set"))
    }

    pub fn ground_energy(&self) -> Result<f64> {
        Ok(self.spectrum()?.values[0])
    }
}

/// Mapped Hamiltonian of an arbitrary kernel that is reversible with
/// respect to the Gibbs state of `cost` at `kernel.beta`.
pub fn hamiltonian_from_kernel(cost: &CostFunction, kernel: &TransitionMatrix) -> Result<QuantumHamiltonian> {
    let n = cost.len();
    if kernel.dim() != n {
        return Err(Error::Parameter(format!(
            "kernel has dimension {} but cost has {n} states",
            kernel.dim()
        )));
    }
    let beta = kernel.beta;
    let range = cost.energy_range();
    if beta * range > MAX_BETA_RANGE {
        return Err(Error::NumericRange(format!(
            "beta * range(E) = {} exceeds {MAX_BETA_RANGE}; the similarity transform is not representable",
            beta * range
        )));
    }
    let m = &kernel.entries;
    let mut h = DMatrix::zeros(n, n);
    for from in 0..n {
        for to in 0..n {
            let p = m[(to, from)];
            let delta = if to == from { 1.0 } else { 0.0 };
            let similar = if p == 0.0 {
                0.0
            } else if to == from {
                p
            } else {
                p * (0.5 * beta * (cost.energy(to) - cost.energy(from))).exp()
            };
            h[(to, from)] = delta - similar;
        }
    }
    let edges = cost.edges();
    let mut g = DMatrix::zeros(edges.len(), n);
    for (row, &(s, t)) in edges.iter().enumerate() {
        g[(row, s)] = m[(t, s)].sqrt();
        g[(row, t)] = -m[(s, t)].sqrt();
    }
    // G = diag(sqrt(flux)) T diag(exp(beta (E - E_min) / 2)); edges without
    // flux contribute nothing to G^T G.
    let e_min = cost.min_energy();
    let cols: Vec<f64> = cost
        .energies()
        .iter()
        .map(|&e| (0.5 * beta * (e - e_min)).exp())
        .collect();
    let live: Vec<usize> = (0..edges.len()).filter(|&r| g[(r, edges[r].0)] > 0.0).collect();
    let mut signs = DMatrix::zeros(live.len(), n);
    let mut rows = Vec::with_capacity(live.len());
    for (k, &r) in live.iter().enumerate() {
        let (s, t) = edges[r];
        signs[(k, s)] = 1.0;
        signs[(k, t)] = -1.0;
        rows.push(g[(r, s)] / cols[s]);
    }
    let mut out = QuantumHamiltonian::from_matrix(h, beta)?;
    out.factor = Some(g);
    if cols.iter().all(|c| c.is_finite()) {
        out.scaling = Some(Scaling { signs, rows, cols });
    }
    Ok(out)
}

pub fn build_hq_with(cost: &CostFunction, beta: f64, kind: KernelKind) -> Result<QuantumHamiltonian> {
    let kernel = build_kernel(cost, beta, kind)?;
    hamiltonian_from_kernel(cost, &kernel)
}

/// Mapped Hamiltonian of the Metropolis kernel at `beta`.
pub fn build_hq(cost: &CostFunction, beta: f64) -> Result<QuantumHamiltonian> {
    build_hq_with(cost, beta, KernelKind::Metropolis)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundCheck {
    /// `||H a||` for the Gibbs amplitude vector `a`.
    pub energy_residual: f64,
    /// `1 - |<a|v_0>|^2` for the computed lowest eigenvector `v_0`.
    pub overlap_deficit: f64,
}

pub fn ground_state_check(h: &QuantumHamiltonian, cost: &CostFunction) -> Result<GroundCheck> {
    if h.dim() != cost.len() {
        return Err(Error::Parameter(format!(
            "Hamiltonian has dimension {} but cost has {} states",
            h.dim(),
            cost.len()
        )));
    }
    let a = DVector::from_vec(gibbs_state(cost, h.beta)?.amplitudes);
    let energy_residual = (&h.matrix * &a).norm();
    let v0 = h.spectrum()?.ground_vector();
    let sign = if a.dot(&v0) < 0.0 { -1.0 } else { 1.0 };
    // sin^2 of the angle between unit vectors, from their chord length.
    let chord_sq = (&a - &v0 * sign).norm_squared();
    let overlap_deficit = (chord_sq * (1.0 - chord_sq / 4.0)).max(0.0);
    Ok(GroundCheck {
        energy_residual,
        overlap_deficit,
    })
}

/// `lambda_1 - lambda_0`.
pub fn spectral_gap(h: &QuantumHamiltonian) -> Result<f64> {
    if h.dim() < 2 {
        return Err(Error::UndefinedGap);
    }
    let values = &h.spectrum()?.values;
    Ok(values[1] - values[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub beta: f64,
    pub lambda_0: f64,
    pub lambda_1: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapScan {
    pub delta_min: f64,
    pub beta_at_min: f64,
    pub rows: Vec<SpectrumRow>,
}

/// Instantaneous gap of the mapped Hamiltonian on `grid` evenly spaced
/// inverse temperatures from `beta(0)` to `beta(t_n)`.
pub fn min_gap_along_schedule(cost: &CostFunction, schedule: &Schedule, grid: usize) -> Result<GapScan> {
    if grid < 2 {
        return Err(Error::Parameter(format!("gap scan needs grid >= 2, got {grid}")));
    }
    let beta_max = schedule.beta_max();
    let rows = (0..grid)
        .into_par_iter()
        .map(|i| {
            let beta = if i + 1 == grid {
                beta_max
            } else {
                beta_max * i as f64 / (grid - 1) as f64
            };
            let h = build_hq(cost, beta)?;
            let gap = spectral_gap(&h)?;
            let values = &h.spectrum()?.values;
            Ok(SpectrumRow {
                beta,
                lambda_0: values[0],
                lambda_1: values[1],
                gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .fold(None::<&SpectrumRow>, |best, r| match best {
            Some(b) if b.gap <= r.gap => Some(b),
            _ => Some(r),
        })
        .expect("grid >= 2");
    Ok(GapScan {
        delta_min: best.gap,
        beta_at_min: best.beta,
        rows,
    })
}
