//! Cost functions, Gibbs states and annealing schedules.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Move structure over the basis states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Neighbors {
    /// Sites `i` and `i + 1` are adjacent; the two ends have one neighbor.
    OpenChain,
    /// Like `OpenChain`, plus the wrap-around edge between the two ends.
    PeriodicChain,
    /// Explicit adjacency list, one entry per basis state.
    Explicit(Vec<Vec<usize>>),
}

impl Neighbors {
    fn adjacency(&self, n: usize) -> Vec<Vec<usize>> {
        match self {
            Neighbors::OpenChain | Neighbors::PeriodicChain => {
                let periodic = matches!(self, Neighbors::PeriodicChain);
                (0..n)
                    .map(|i| {
                        let mut adj = Vec::with_capacity(2);
                        if i > 0 {
                            adj.push(i - 1);
                        } else if periodic && n > 2 {
                            adj.push(n - 1);
                        }
                        if i + 1 < n {
                            adj.push(i + 1);
                        } else if periodic && n > 2 {
                            adj.push(0);
                        }
                        adj.sort_unstable();
                        adj
                    })
                    .collect()
            }
            Neighbors::Explicit(list) => list.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NeighborsRepr {
    Named(String),
    Explicit(Vec<Vec<usize>>),
}

impl Serialize for Neighbors {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Neighbors::OpenChain => NeighborsRepr::Named("open-chain".into()),
            Neighbors::PeriodicChain => NeighborsRepr::Named("periodic-chain".into()),
            Neighbors::Explicit(list) => NeighborsRepr::Explicit(list.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Neighbors {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NeighborsRepr::deserialize(d)? {
            NeighborsRepr::Named(name) => match name.as_str() {
                "open-chain" => Ok(Neighbors::OpenChain),
                "periodic-chain" => Ok(Neighbors::PeriodicChain),
                other => Err(serde::de::Error::custom(format!(
                    "unknown neighbor structure `{other}` (expected open-chain, periodic-chain or an adjacency list)"
                ))),
            },
            NeighborsRepr::Explicit(list) => Ok(Neighbors::Explicit(list)),
        }
    }
}

/// On-disk instance record.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    n: usize,
    energies: Vec<f64>,
    neighbors: Neighbors,
    #[serde(default)]
    seed: Option<u64>,
}

/// Classical cost function over an explicit set of basis states.
///
/// Energies are finite, the neighbor relation is symmetric and the move
/// graph is connected. Instances are immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct CostFunction {
    energies: Vec<f64>,
    neighbors: Neighbors,
    adjacency: Vec<Vec<usize>>,
    seed: Option<u64>,
    label: String,
}

impl TryFrom<InstanceRecord> for CostFunction {
    type Error = Error;

    fn try_from(rec: InstanceRecord) -> Result<Self> {
        if rec.n != rec.energies.len() {
            return Err(Error::Parameter(format!(
                "instance declares n = {} but lists {} energies",
                rec.n,
                rec.energies.len()
            )));
        }
        let mut cost = CostFunction::new(rec.energies, rec.neighbors)?;
        cost.seed = rec.seed;
        if let Some(seed) = rec.seed {
            cost.label = format!("instance n={} seed={seed}", cost.len());
        }
        Ok(cost)
    }
}

impl From<CostFunction> for InstanceRecord {
    fn from(c: CostFunction) -> Self {
        InstanceRecord {
            n: c.energies.len(),
            energies: c.energies,
            neighbors: c.neighbors,
            seed: c.seed,
        }
    }
}

impl CostFunction {
    pub fn new(energies: Vec<f64>, neighbors: Neighbors) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::Parameter("cost function needs at least one state".into()));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::Parameter(format!("energy of state {i} is not finite")));
        }
        let adjacency = neighbors.adjacency(n);
        validate_adjacency(&adjacency, n)?;
        Ok(CostFunction {
            label: format!("instance n={n}"),
            energies,
            neighbors,
            adjacency,
            seed: None,
        })
    }

    /// Open chain over the given energies.
    pub fn chain(energies: Vec<f64>) -> Result<Self> {
        Self::new(energies, Neighbors::OpenChain)
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, state: usize) -> f64 {
        self.energies[state]
    }

    pub fn neighbors(&self, state: usize) -> &[usize] {
        &self.adjacency[state]
    }

    pub fn topology(&self) -> &Neighbors {
        &self.neighbors
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest vertex degree of the move graph (0 for a single state).
    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Each undirected edge once, as `(low, high)` index pairs in ascending order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, adj) in self.adjacency.iter().enumerate() {
            for &t in adj {
                if s < t {
                    out.push((s, t));
                }
            }
        }
        out
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn energy_range(&self) -> f64 {
        self.max_energy() - self.min_energy()
    }

    /// Same instance with every energy moved by `offset`.
    pub fn offset_by(&self, offset: f64) -> Result<Self> {
        let mut out = self.clone();
        out.energies.iter_mut().for_each(|e| *e += offset);
        if let Some(i) = out.energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NumericRange(format!(
                "shifted energy of state {i} is not finite"
            )));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn validate_adjacency(adj: &[Vec<usize>], n: usize) -> Result<()> {
    if adj.len() != n {
        return Err(Error::Parameter(format!(
            "adjacency list has {} entries for {n} states",
            adj.len()
        )));
    }
    for (s, list) in adj.iter().enumerate() {
        for (k, &t) in list.iter().enumerate() {
            if t >= n {
                return Err(Error::Parameter(format!("state {s} lists out-of-range neighbor {t}")));
            }
            if t == s {
                return Err(Error::Parameter(format!("state {s} lists itself as a neighbor")));
            }
            if list[..k].contains(&t) {
                return Err(Error::Parameter(format!("state {s} lists neighbor {t} twice")));
            }
            if !adj[t].contains(&s) {
                return Err(Error::Parameter(format!(
                    "neighbor relation is not symmetric: {t} in nbr({s}) but {s} not in nbr({t})"
                )));
            }
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s] {
            if !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    if let Some(lonely) = seen.iter().position(|&v| !v) {
        return Err(Error::Parameter(format!(
            "move graph is disconnected: state {lonely} is unreachable from state 0"
        )));
    }
    Ok(())
}

/// Boundary of the generated one-dimensional potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    OpenChain,
    PeriodicChain,
}

/// Random one-dimensional potential `E(i) = -V_i` on an open chain.
///
/// `V_i` is i.i.d. uniform on `[v_low, v_high)` from the ChaCha8 stream keyed
/// by `seed`; see [`crate::rng`].
pub fn build_random_potential(n_sites: usize, seed: u64, v_low: f64, v_high: f64) -> Result<CostFunction> {
    build_random_potential_with(n_sites, seed, v_low, v_high, Boundary::OpenChain)
}

pub fn build_random_potential_with(
    n_sites: usize,
    seed: u64,
    v_low: f64,
    v_high: f64,
    boundary: Boundary,
) -> Result<CostFunction> {
    if n_sites < 2 {
        return Err(Error::Parameter(format!(
            "random potential needs n_sites >= 2, got {n_sites}"
        )));
    }
    if !(v_low.is_finite() && v_high.is_finite() && v_low < v_high) {
        return Err(Error::Parameter(format!(
            "potential bounds must satisfy v_low < v_high, got [{v_low}, {v_high})"
        )));
    }
    let mut gen = rng::generator(seed);
    let width = v_high - v_low;
    let energies = (0..n_sites)
        .map(|_| {
            let mut v = v_low + width * rng::unit_f64(&mut gen);
            if v >= v_high {
                v = v_high.next_down();
            }
            -v
        })
        .collect();
    let neighbors = match boundary {
        Boundary::OpenChain => Neighbors::OpenChain,
        Boundary::PeriodicChain => Neighbors::PeriodicChain,
    };
    let mut cost = CostFunction::new(energies, neighbors)?;
    cost.seed = Some(seed);
    cost.label = format!("random-potential n={n_sites} seed={seed}");
    Ok(cost)
}

/// Normalized Gibbs distribution and its square-root amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub beta: f64,
    pub probabilities: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub log_z: f64,
}

/// Boltzmann factors `exp(-beta (E - min E))` and their sum.
pub(crate) fn shifted_weights(cost: &CostFunction, beta: f64) -> (Vec<f64>, f64) {
    let e_min = cost.min_energy();
    let w: Vec<f64> = cost.energies().iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let s = w.iter().sum();
    (w, s)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "inverse temperature must be finite and >= 0, got {beta}"
        )))
    }
}

pub fn gibbs_state(cost: &CostFunction, beta: f64) -> Result<GibbsState> {
    check_beta(beta)?;
    let e_min = cost.min_energy();
    let (w, z_shifted) = shifted_weights(cost, beta);
    let root_z = z_shifted.sqrt();
    let probabilities = w.iter().map(|x| x / z_shifted).collect();
    let amplitudes = cost
        .energies()
        .iter()
        .map(|&e| (-0.5 * beta * (e - e_min)).exp() / root_z)
        .collect();
    Ok(GibbsState {
        beta,
        probabilities,
        amplitudes,
        log_z: -beta * e_min + z_shifted.ln(),
    })
}

/// Degenerate ground-state set and the classical gap above it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundSet {
    pub states: Vec<usize>,
    /// Smallest `E - min E` among states outside the set; `None` when every
    /// state is a ground state.
    pub epsilon: Option<f64>,
}

impl GroundSet {
    pub fn contains(&self, state: usize) -> bool {
        self.states.binary_search(&state).is_ok()
    }
}

pub fn ground_state_set(cost: &CostFunction, tol: f64) -> GroundSet {
    let e_min = cost.min_energy();
    let mut states = Vec::new();
    let mut epsilon: Option<f64> = None;
    for (s, &e) in cost.energies().iter().enumerate() {
        let excess = e - e_min;
        if excess <= tol {
            states.push(s);
        } else {
            epsilon = Some(epsilon.map_or(excess, |g| g.min(excess)));
        }
    }
    GroundSet { states, epsilon }
}

/// Shifts energies so that the minimum is zero when any energy is negative.
///
/// Returns the shifted instance and the offset added to every energy.
/// Instances that are already nonnegative come back unchanged with offset 0.
pub fn shift_nonnegative(cost: &CostFunction) -> (CostFunction, f64) {
    let e_min = cost.min_energy();
    if e_min >= 0.0 {
        return (cost.clone(), 0.0);
    }
    let offset = -e_min;
    let shifted = cost
        .offset_by(offset)
        .expect("shifting by -min E keeps finite energies finite");
    (shifted, offset)
}

/// Linear inverse-temperature ramp `beta(t) = beta_max * t / tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    beta_max: f64,
    tau: f64,
    n_steps: usize,
}

impl Schedule {
    pub fn new(beta_max: f64, tau: f64, n_steps: usize) -> Result<Self> {
        check_beta(beta_max)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Parameter(format!("tau must be finite and > 0, got {tau}")));
        }
        if n_steps == 0 {
            return Err(Error::Parameter("schedule needs n_steps >= 1".into()));
        }
        Ok(Schedule { beta_max, tau, n_steps })
    }

    /// Schedule with the default step policy, see [`default_steps`].
    pub fn with_default_steps(cost: &CostFunction, beta_max: f64, tau: f64) -> Result<Self> {
        Self::new(beta_max, tau, default_steps(cost, beta_max))
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.tau
        } else {
            self.tau * k as f64 / self.n_steps as f64
        }
    }

    pub fn beta(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.beta_max
        } else {
            self.beta_max * k as f64 / self.n_steps as f64
        }
    }

    /// `beta(k + 1) - beta(k)`.
    pub fn dbeta(&self, k: usize) -> f64 {
        self.beta(k + 1) - self.beta(k)
    }

    /// Grid `beta(0), ..., beta(n_steps)`.
    pub fn betas(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.beta(k)).collect()
    }

    /// Interpolation profile `f(t) = t / tau`, clamped to [0, 1].
    pub fn interpolation(&self, t: f64) -> f64 {
        (t / self.tau).clamp(0.0, 1.0)
    }
}

/// `max(1000, ceil(beta_max * range(E) / 0.01))`, so that each weight step
/// satisfies `dbeta * range(E) <= 0.01`.
pub fn default_steps(cost: &CostFunction, beta_max: f64) -> usize {
    let needed = (beta_max * cost.energy_range() / 0.01).ceil();
    if needed.is_finite() && needed > 1000.0 {
        needed as usize
    } else {
        1000
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn random_potential_energies_in_range() {
        let cost = build_random_potential(50, 7, 0.0, 1.0).unwrap();
        assert_eq!(cost.len(), 50);
        assert!(cost.energies().iter().all(|&e| e > -1.0 && e <= 0.0));
        assert_eq!(cost.neighbors(0), &[1]);
        assert_eq!(cost.neighbors(10), &[9, 11]);
        assert_eq!(cost.neighbors(49), &[48]);
    }

    #[test]
    fn random_potential_rejects_bad_parameters() {
        assert!(matches!(
            build_random_potential(2, 1, 0.5, 0.5),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            build_random_potential(2, 1, 1.0, 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            build_random_potential(1, 1, 0.0, 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn random_potential_is_deterministic() {
        let a = build_random_potential(30, 42, 0.0, 1.0).unwrap();
        let b = build_random_potential(30, 42, 0.0, 1.0).unwrap();
        let bits = |c: &CostFunction| c.energies().iter().map(|e| e.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = build_random_potential(30, 43, 0.0, 1.0).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn periodic_chain_wraps() {
        let cost = build_random_potential_with(5, 1, 0.0, 1.0, Boundary::PeriodicChain).unwrap();
        assert_eq!(cost.neighbors(0), &[1, 4]);
        assert_eq!(cost.neighbors(4), &[0, 3]);
        assert_eq!(cost.edges().len(), 5);
        let two = build_random_potential_with(2, 1, 0.0, 1.0, Boundary::PeriodicChain).unwrap();
        assert_eq!(two.neighbors(0), &[1]);
    }

    #[test]
    fn explicit_neighbors_are_validated() {
        let asym = Neighbors::Explicit(vec![vec![1], vec![]]);
        assert!(CostFunction::new(vec![0.0, 1.0], asym).is_err());
        let split = Neighbors::Explicit(vec![vec![1], vec![0], vec![3], vec![2]]);
        assert!(CostFunction::new(vec![0.0; 4], split).is_err());
        let star = Neighbors::Explicit(vec![vec![1, 2, 3], vec![0], vec![0], vec![0]]);
        let cost = CostFunction::new(vec![0.0, 1.0, 2.0, 3.0], star).unwrap();
        assert_eq!(cost.max_degree(), 3);
        assert!(CostFunction::chain(vec![0.0, f64::NAN]).is_err());
        assert!(CostFunction::chain(vec![]).is_err());
    }

    #[test]
    fn gibbs_at_infinite_temperature_is_uniform() {
        let cost = CostFunction::chain(vec![-0.3, -0.9, 0.0, -0.1]).unwrap();
        let g = gibbs_state(&cost, 0.0).unwrap();
        for (p, a) in g.probabilities.iter().zip(&g.amplitudes) {
            assert_relative_eq!(*p, 0.25, epsilon = 1e-15);
            assert_relative_eq!(*a, 0.5, epsilon = 1e-15);
        }
        assert_relative_eq!(g.log_z, 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn gibbs_single_state() {
        let cost = CostFunction::chain(vec![-2.5]).unwrap();
        for beta in [0.0, 1.0, 100.0] {
            let g = gibbs_state(&cost, beta).unwrap();
            assert_eq!(g.probabilities, vec![1.0]);
            assert_eq!(g.amplitudes, vec![1.0]);
        }
    }

    #[test]
    fn gibbs_three_level_matches_direct_sum() {
        // Direct evaluation: Z = 1 + e^-1 + e^-2.
        let z = 1.0 + (-1f64).exp() + (-2f64).exp();
        let expected = [1.0 / z, (-1f64).exp() / z, (-2f64).exp() / z];
        let cost = CostFunction::chain(vec![0.0, 1.0, 2.0]).unwrap();
        let g = gibbs_state(&cost, 1.0).unwrap();
        for (p, q) in g.probabilities.iter().zip(expected) {
            assert_relative_eq!(*p, q, epsilon = 1e-15);
        }
        assert_relative_eq!(g.log_z, z.ln(), epsilon = 1e-15);
    }

    #[test]
    fn gibbs_survives_large_beta() {
        let cost = build_random_potential(50, 3, 0.0, 1.0).unwrap();
        let g = gibbs_state(&cost, 100.0).unwrap();
        assert!(g.probabilities.iter().all(|p| p.is_finite()));
        assert_relative_eq!(g.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(gibbs_state(&cost, -1.0).is_err());
        assert!(gibbs_state(&cost, f64::INFINITY).is_err());
    }

    #[test]
    fn ground_set_examples() {
        let cost = CostFunction::chain(vec![-0.9, -0.3, -0.9]).unwrap();
        let set = ground_state_set(&cost, 1e-12);
        assert_eq!(set.states, vec![0, 2]);
        assert_relative_eq!(set.epsilon.unwrap(), 0.6, epsilon = 1e-15);

        let flat = CostFunction::chain(vec![0.4; 5]).unwrap();
        let set = ground_state_set(&flat, 1e-12);
        assert_eq!(set.states, (0..5).collect::<Vec<_>>());
        assert_eq!(set.epsilon, None);
    }

    #[test]
    fn random_instance_has_unique_ground_state() {
        let cost = build_random_potential(50, 11, 0.0, 1.0).unwrap();
        let set = ground_state_set(&cost, 1e-12);
        assert_eq!(set.states.len(), 1);
        let argmin = cost
            .energies()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(set.states[0], argmin);
        assert!(set.epsilon.unwrap() > 0.0);
    }

    #[test]
    fn shift_examples() {
        let cost = CostFunction::chain(vec![-1.0, -0.5]).unwrap();
        let (shifted, offset) = shift_nonnegative(&cost);
        assert_eq!(shifted.energies(), &[0.0, 0.5]);
        assert_eq!(offset, 1.0);

        let cost = CostFunction::chain(vec![0.0, 1.0]).unwrap();
        let (shifted, offset) = shift_nonnegative(&cost);
        assert_eq!(shifted, cost);
        assert_eq!(offset, 0.0);
    }

    #[test]
    fn shift_preserves_gibbs_state() {
        let cost = build_random_potential(20, 5, 0.0, 1.0).unwrap();
        let (shifted, _) = shift_nonnegative(&cost);
        for beta in [0.0, 1.0, 10.0] {
            let a = gibbs_state(&cost, beta).unwrap();
            let b = gibbs_state(&shifted, beta).unwrap();
            for (p, q) in a.probabilities.iter().zip(&b.probabilities) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gibbs_ground_probability_grows_with_beta() {
        let cost = build_random_potential(50, 21, 0.0, 1.0).unwrap();
        let ground = ground_state_set(&cost, 1e-12).states[0];
        let mut last = 0.0;
        for b in 0..=100 {
            let p = gibbs_state(&cost, b as f64).unwrap().probabilities[ground];
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn schedule_ramp_endpoints_and_telescoping() {
        let s = Schedule::new(100.0, 10.0, 9_817).unwrap();
        assert_eq!(s.beta(0), 0.0);
        assert_eq!(s.beta(s.n_steps()), 100.0);
        assert_eq!(s.time(s.n_steps()), 10.0);
        let total: f64 = (0..s.n_steps()).map(|k| s.dbeta(k)).sum();
        assert_relative_eq!(total, 100.0, max_relative = 1e-12);
        assert!((0..s.n_steps()).all(|k| s.dbeta(k) >= 0.0));
        assert_relative_eq!(s.dt(), 10.0 / 9_817.0);
        assert_eq!(s.interpolation(0.0), 0.0);
        assert_eq!(s.interpolation(10.0), 1.0);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(Schedule::new(1.0, 0.0, 10).is_err());
        assert!(Schedule::new(1.0, -1.0, 10).is_err());
        assert!(Schedule::new(-1.0, 1.0, 10).is_err());
        assert!(Schedule::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn default_step_policy() {
        let cost = CostFunction::chain(vec![0.0, -0.98]).unwrap();
        assert_eq!(default_steps(&cost, 100.0), 9_800);
        assert_eq!(default_steps(&cost, 1.0), 1_000);
        let flat = CostFunction::chain(vec![0.0, 0.0]).unwrap();
        assert_eq!(default_steps(&flat, 100.0), 1_000);
    }

    proptest! {
        #[test]
        fn gibbs_normalized_and_shift_invariant(
            energies in prop::collection::vec(-5.0f64..5.0, 1..12),
            beta in 0.0f64..100.0,
            c in -10.0f64..10.0,
        ) {
            let cost = CostFunction::chain(energies).unwrap();
            let g = gibbs_state(&cost, beta).unwrap();
            prop_assert!((g.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (p, a) in g.probabilities.iter().zip(&g.amplitudes) {
                prop_assert!((a * a - p).abs() < 1e-12);
            }
            let moved = gibbs_state(&cost.offset_by(c).unwrap(), beta).unwrap();
            for (p, q) in g.probabilities.iter().zip(&moved.probabilities) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }

        #[test]
        fn instance_json_round_trips_bit_exact(
            energies in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 1..20),
            periodic in any::<bool>(),
        ) {
            let nb = if periodic { Neighbors::PeriodicChain } else { Neighbors::OpenChain };
            let cost = CostFunction::new(energies, nb).unwrap();
            let back = CostFunction::from_json(&cost.to_json().unwrap()).unwrap();
            let bits = |c: &CostFunction| c.energies().iter().map(|e| e.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&cost), bits(&back));
            prop_assert_eq!(cost.topology(), back.topology());
        }
    }

    #[test]
    fn instance_json_schema() {
        let text = r#"{"n": 3, "energies": [-0.5, 0.25, 0.0], "neighbors": [[1], [0, 2], [1]], "seed": 4}"#;
        let cost = CostFunction::from_json(text).unwrap();
        assert_eq!(cost.seed(), Some(4));
        assert_eq!(cost.neighbors(1), &[0, 2]);
        let value: serde_json::Value = serde_json::from_str(&cost.to_json().unwrap()).unwrap();
        assert_eq!(value["n"], 3);
        let chain = build_random_potential(4, 9, 0.0, 1.0).unwrap();
        let value: serde_json::Value = serde_json::from_str(&chain.to_json().unwrap()).unwrap();
        assert_eq!(value["neighbors"], "open-chain");
        assert_eq!(value["seed"], 9);

        assert!(CostFunction::from_json(r#"{"n": 2, "energies": [0.0], "neighbors": "open-chain"}"#).is_err());
        assert!(CostFunction::from_json(r#"{"n": 1, "energies": [0.0], "neighbors": "ring"}"#).is_err());
        assert!(CostFunction::from_json(r#"{"n": 1, "energies": [0.0], "neighbors": "open-chain", "x": 1}"#).is_err());
    }
}
