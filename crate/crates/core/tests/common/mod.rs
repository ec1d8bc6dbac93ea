//! Reference computations that share no code with the library: matrices are
//! assembled entry by entry from their definitions and exponentials use a
//! scaled Taylor series instead of an eigen-decomposition.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn chain_neighbors(n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut v = Vec::new();
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < n {
                v.push(i + 1);
            }
            v
        })
        .collect()
}

/// Gibbs probabilities by direct summation; only for moderate `beta * E`.
pub fn gibbs_probabilities(energies: &[f64], beta: f64) -> Vec<f64> {
    let w: Vec<f64> = energies.iter().map(|e| (-beta * e).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

pub fn partition_function(energies: &[f64], beta: f64) -> f64 {
    energies.iter().map(|e| (-beta * e).exp()).sum()
}

/// Column-stochastic Metropolis kernel: each neighbor is proposed with
/// probability `1 / max degree`, accepted with `min(1, exp(-beta dE))`.
pub fn metropolis(energies: &[f64], neighbors: &[Vec<usize>], beta: f64) -> DMatrix<f64> {
    let n = energies.len();
    let d = neighbors.iter().map(Vec::len).max().unwrap_or(0).max(1) as f64;
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        let mut leave = 0.0;
        for &t in &neighbors[s] {
            let p = (1.0 / d) * (-beta * (energies[t] - energies[s])).exp().min(1.0);
            m[(t, s)] = p;
            leave += p;
        }
        m[(s, s)] = 1.0 - leave;
    }
    m
}

/// `I - D^{1/2} M D^{-1/2}` with `D = diag(exp(beta E))`.
pub fn mapped_hamiltonian(energies: &[f64], neighbors: &[Vec<usize>], beta: f64) -> DMatrix<f64> {
    let n = energies.len();
    let m = metropolis(energies, neighbors, beta);
    DMatrix::from_fn(n, n, |t, s| {
        let delta = if t == s { 1.0 } else { 0.0 };
        delta - (0.5 * beta * energies[t]).exp() * m[(t, s)] * (-0.5 * beta * energies[s]).exp()
    })
}

fn complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings), 0.0);
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
        if one_norm(&term) < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(-i dt H)`.
pub fn unitary(h: &DMatrix<f64>, dt: f64) -> DMatrix<Complex64> {
    expm(&(complex(h) * Complex64::new(0.0, -dt)))
}

fn weight(energies: &[f64], dbeta: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(energies.len(), energies.len(), |i, j| {
        if i == j {
            Complex64::new((-0.5 * dbeta * energies[i]).exp(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Unnormalized QJA state from the explicit product
/// `U_n W_n ... U_1 W_1 |uniform>` with `U_k` at `beta_k`.
pub fn qja_product(
    energies: &[f64],
    neighbors: &[Vec<usize>],
    beta_max: f64,
    tau: f64,
    n: usize,
) -> DVector<Complex64> {
    let dim = energies.len();
    let dt = tau / n as f64;
    let beta = |k: usize| beta_max * k as f64 / n as f64;
    let mut product = DMatrix::<Complex64>::identity(dim, dim);
    for k in 0..n {
        let w = weight(energies, beta(k + 1) - beta(k));
        let u = unitary(&mapped_hamiltonian(energies, neighbors, beta(k + 1)), dt);
        product = u * w * product;
    }
    let start = DVector::from_element(dim, Complex64::new(1.0 / (dim as f64).sqrt(), 0.0));
    product * start
}

/// Unitary-only evolution `U_n ... U_1 |uniform>`.
pub fn qa_product(energies: &[f64], neighbors: &[Vec<usize>], beta_max: f64, tau: f64, n: usize) -> DVector<Complex64> {
    let dim = energies.len();
    let dt = tau / n as f64;
    let mut psi = DVector::from_element(dim, Complex64::new(1.0 / (dim as f64).sqrt(), 0.0));
    for k in 0..n {
        let beta = beta_max * (k + 1) as f64 / n as f64;
        psi = unitary(&mapped_hamiltonian(energies, neighbors, beta), dt) * psi;
    }
    psi
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
