//! Experiment runner behind the `qjasim` binary.
//!
//! [`build_artifacts`] computes every output file in memory and is a pure
//! function of the validated config; [`run_experiment`] adds the manifest
//! and publishes the bundle with a single directory rename.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    validate_config, ConfigIssue, ExperimentConfig, ExperimentMethod, InstanceSpec, Options, ScheduleSpec, StepPolicy,
    Tolerances,
};

use crate::anneal::{run_qa_interpolated_with, run_qa_with, run_qja_with, Method, RunOptions, RunResult};
use crate::dilation::{
    postselect, repetition_estimate, run_qja_dilated_with, steps_estimate, weight_class_report, DilationOptions,
};
use crate::error::{Error, Result};
use crate::model::{
    build_random_potential_with, default_steps, gibbs_state, ground_state_set, shift_nonnegative, CostFunction,
    Schedule,
};
use crate::qmap::min_gap_along_schedule;
use crate::rng::derive_seed;
use crate::stochastic::{exact_partition_ratio, jarzynski_weights, JarzynskiEstimate};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GIBBS_FILE: &str = "gibbs_reference.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const COST_ESTIMATE_FILE: &str = "cost_estimate.json";
pub const PLOT_FILE: &str = "plot.py";

/// Points on the beta grid of the Gibbs reference series.
const GIBBS_GRID: usize = 501;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub method: String,
    pub files: Vec<String>,
}

/// Output files (name, contents) in a fixed order, plus human-readable
/// summary lines.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FigureBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Vec<String>,
}

/// SHA-256 (hex) of the canonical JSON form of the validated config. The
/// output directory is not part of it.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn resolve_instance(config: &ExperimentConfig) -> Result<CostFunction> {
    match &config.instance {
        InstanceSpec::Random {
            n_sites,
            seed,
            v_low,
            v_high,
            boundary,
        } => {
            let seed = seed.unwrap_or_else(|| derive_seed(config.seed, "instance"));
            build_random_potential_with(*n_sites, seed, *v_low, *v_high, *boundary)
        }
        InstanceSpec::Inline(cost) => Ok(cost.clone()),
        InstanceSpec::Path(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(vec![ConfigIssue {
                    path: "instance.path".into(),
                    expected: "readable instance file".into(),
                    found: format!("{} ({e})", path.display()),
                }])
            })?;
            CostFunction::from_json(&text).map_err(|e| {
                Error::Config(vec![ConfigIssue {
                    path: "instance.path".into(),
                    expected: "valid instance record".into(),
                    found: e.to_string(),
                }])
            })
        }
    }
}

fn schedule_for(cost: &CostFunction, spec: &ScheduleSpec, tau: f64) -> Result<Schedule> {
    match spec.n_steps {
        StepPolicy::Auto => Schedule::new(spec.beta_max, tau, default_steps(cost, spec.beta_max)),
        StepPolicy::Fixed(n) => Schedule::new(spec.beta_max, tau, n),
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn run_file(method: Method, tau: f64, seed: u64) -> String {
    format!("{}_{tau}_{seed}.csv", method.label())
}

#[derive(Serialize)]
struct GibbsRow {
    beta: f64,
    p_ground_gibbs: f64,
    log_z: f64,
}

fn gibbs_reference(cost: &CostFunction, beta_max: f64, tol: f64) -> Result<Vec<u8>> {
    let set = ground_state_set(cost, tol);
    let rows = (0..GIBBS_GRID)
        .map(|i| {
            let beta = if i + 1 == GIBBS_GRID {
                beta_max
            } else {
                beta_max * i as f64 / (GIBBS_GRID - 1) as f64
            };
            let g = gibbs_state(cost, beta)?;
            Ok(GibbsRow {
                beta,
                p_ground_gibbs: set.states.iter().map(|&s| g.probabilities[s]).sum(),
                log_z: g.log_z,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    csv_bytes(&rows)
}

fn run_one(method: Method, cost: &CostFunction, schedule: &Schedule, config: &ExperimentConfig) -> Result<RunResult> {
    let options = RunOptions {
        ground_tol: config.tolerances.ground,
        record_every: config.options.record_every,
        ordering: config.options.ordering,
        kernel: config.options.kernel,
    };
    match method {
        Method::Qa => run_qa_with(cost, schedule, &options),
        Method::Qja => run_qja_with(cost, schedule, &options),
        Method::QaInterp => run_qa_interpolated_with(cost, schedule, config.options.transverse_strength, &options),
    }
}

fn annealing_artifacts(methods: &[Method], cost: &CostFunction, config: &ExperimentConfig) -> Result<Artifacts> {
    let jobs: Vec<(Method, f64)> = methods
        .iter()
        .flat_map(|&m| config.schedule.taus.iter().map(move |&t| (m, t)))
        .collect();
    let results: Vec<Result<(Method, f64, RunResult)>> = jobs
        .par_iter()
        .map(|&(m, tau)| {
            let schedule = schedule_for(cost, &config.schedule, tau)?;
            Ok((m, tau, run_one(m, cost, &schedule, config)?))
        })
        .collect();
    let mut out = Artifacts::default();
    for r in results {
        let (m, tau, run) = r?;
        let last = run.final_record();
        let deviation = run.max_gibbs_deviation();
        let mut line = format!(
            "{} tau={tau} n_steps={}: final p_ground={:.6e} (Gibbs {:.6e}), max |p_ground - p_gibbs|={deviation:.3e}",
            m.label(),
            run.schedule.n_steps(),
            last.p_ground,
            last.p_ground_gibbs
        );
        if m == Method::Qja {
            let ok = deviation < config.tolerances.tracking;
            line.push_str(if ok {
                " [tracks Gibbs]"
            } else {
                " [OUTSIDE tracking tolerance]"
            });
        }
        out.summary.push(line);
        out.files
            .push((run_file(m, tau, config.seed), csv_bytes(&run.records)?));
    }
    out.files.push((
        GIBBS_FILE.into(),
        gibbs_reference(cost, config.schedule.beta_max, config.tolerances.ground)?,
    ));
    Ok(out)
}

#[derive(Serialize)]
struct JeRow {
    sample_count: usize,
    mean: f64,
    std_error: f64,
    exact_ratio: f64,
    z_score: f64,
}

fn je_artifacts(cost: &CostFunction, config: &ExperimentConfig) -> Result<Artifacts> {
    let mut out = Artifacts::default();
    let exact = exact_partition_ratio(cost, 0.0, config.schedule.beta_max)?;
    for &tau in &config.schedule.taus {
        let schedule = schedule_for(cost, &config.schedule, tau)?;
        let n = config.options.samples;
        let seed = derive_seed(config.seed, &format!("je-check/{tau}"));
        let weights = jarzynski_weights(cost, &schedule, n, seed, config.options.kernel)?;
        let mut counts: Vec<usize> = std::iter::successors(Some(100usize), |c| c.checked_mul(10))
            .take_while(|&c| c < n)
            .collect();
        counts.push(n);
        let rows = counts
            .into_iter()
            .map(|c| {
                let est = JarzynskiEstimate::from_weights(&weights[..c])?;
                Ok(JeRow {
                    sample_count: c,
                    mean: est.mean,
                    std_error: est.std_error,
                    exact_ratio: exact,
                    z_score: est.z_score(exact),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let last = rows.last().expect("at least one row");
        let ok = last.z_score.abs() < config.tolerances.z_score;
        out.summary.push(format!(
            "je-check tau={tau} n_steps={}: mean={:.6e} +- {:.2e}, exact={exact:.6e}, z={:.3} [{}]",
            schedule.n_steps(),
            last.mean,
            last.std_error,
            last.z_score,
            if ok { "consistent" } else { "INCONSISTENT" }
        ));
        out.files
            .push((format!("je-check_{tau}_{}.csv", config.seed), csv_bytes(&rows)?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CostEstimateRecord {
    p_error_cap: f64,
    n_steps: usize,
    expected_repetitions: f64,
    exact_expected_repetitions: Option<f64>,
    linearized_repetitions: f64,
    max_energy: f64,
    epsilon: f64,
    beta_final: f64,
}

fn dilation_artifacts(cost: &CostFunction, config: &ExperimentConfig) -> Result<Artifacts> {
    let (shifted, offset) = shift_nonnegative(cost);
    let spec = &config.schedule;
    let cap = config.options.p_error_cap;
    let beta_final = (spec.beta_max > 0.0).then_some(spec.beta_max);
    let estimate = steps_estimate(&shifted, beta_final, cap)?;
    let repetitions = repetition_estimate(&shifted, estimate.beta_final, estimate.n_steps)?;
    let mut out = Artifacts::default();
    out.summary.push(format!(
        "dilate-check: energy offset {offset:.6e}; p_error_cap={cap} needs n_steps={} for beta_final={:.6e}; \
         repetitions at the cap={:.6e}, at p_error={:.4e}: {:.6e}, exact={}, linearized={:.6e}",
        estimate.n_steps,
        estimate.beta_final,
        estimate.expected_repetitions,
        repetitions.p_error,
        repetitions.formula,
        repetitions.exact.map_or("overflow".into(), |x| format!("{x:.6e}")),
        repetitions.linearized
    ));
    let options = DilationOptions {
        kernel: config.options.kernel,
        ..DilationOptions::new()
    };
    for &tau in &spec.taus {
        let n_steps = match spec.n_steps {
            StepPolicy::Fixed(n) => n,
            StepPolicy::Auto => estimate.n_steps,
        };
        let schedule = Schedule::new(spec.beta_max, tau, n_steps)?;
        let state = run_qja_dilated_with(&shifted, &schedule, &options)?;
        let (_, p) = postselect(&state, &vec![false; n_steps])?;
        let z = exact_partition_ratio(&shifted, 0.0, spec.beta_max)?;
        out.summary.push(format!(
            "dilate-check tau={tau} n_steps={n_steps}: P(all ancillas 0)={p:.12e}, Z_shifted/N={z:.12e}, norm drift={:.2e}",
            (state.norm_sq() - 1.0).abs()
        ));
        out.files.push((
            format!("dilate-check_{tau}_{}.csv", config.seed),
            csv_bytes(&weight_class_report(&state))?,
        ));
    }
    let record = CostEstimateRecord {
        p_error_cap: cap,
        n_steps: estimate.n_steps,
        expected_repetitions: estimate.expected_repetitions,
        exact_expected_repetitions: repetitions.exact,
        linearized_repetitions: repetitions.linearized,
        max_energy: estimate.max_energy,
        epsilon: estimate.epsilon,
        beta_final: estimate.beta_final,
    };
    let mut json = serde_json::to_vec_pretty(&record)?;
    json.push(b'\n');
    out.files.push((COST_ESTIMATE_FILE.into(), json));
    Ok(out)
}

fn spectrum_artifacts(cost: &CostFunction, config: &ExperimentConfig) -> Result<Artifacts> {
    let tau = config.schedule.taus[0];
    let schedule = Schedule::new(config.schedule.beta_max, tau, 1)?;
    let scan = min_gap_along_schedule(cost, &schedule, config.options.grid)?;
    Ok(Artifacts {
        files: vec![(SPECTRUM_FILE.into(), csv_bytes(&scan.rows)?)],
        summary: vec![format!(
            "spectrum: minimum gap {:.6e} at beta={:.6e} over {} grid points",
            scan.delta_min, scan.beta_at_min, config.options.grid
        )],
    })
}

const PLOT_SCRIPT: &str = r#"# Plots every run series in this directory against the Gibbs reference.
import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def load(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


fig, ax = plt.subplots()
for path in sorted(glob.glob(os.path.join(here, "*_*_*.csv"))):
    rows = load(path)
    if not rows or "p_ground" not in rows[0]:
        continue
    label = os.path.basename(path)[:-4]
    ax.plot([float(r["beta"]) for r in rows], [float(r["p_ground"]) for r in rows], label=label)
gibbs = os.path.join(here, "gibbs_reference.csv")
if os.path.exists(gibbs):
    rows = load(gibbs)
    ax.plot([float(r["beta"]) for r in rows], [float(r["p_ground_gibbs"]) for r in rows], "k--", label="Gibbs")
ax.set_xlabel("beta")
ax.set_ylabel("ground-state probability")
ax.legend()
fig.savefig(os.path.join(here, "p_ground.png"), dpi=150)
"#;

/// Every output file of the experiment, computed in memory.
pub fn build_artifacts(config: &ExperimentConfig) -> Result<Artifacts> {
    let cost = resolve_instance(config)?;
    let mut artifacts = match config.method {
        ExperimentMethod::Qa => annealing_artifacts(&[Method::Qa], &cost, config)?,
        ExperimentMethod::Qja => annealing_artifacts(&[Method::Qja], &cost, config)?,
        ExperimentMethod::QaInterp => annealing_artifacts(&[Method::QaInterp], &cost, config)?,
        ExperimentMethod::Fig1 => annealing_artifacts(&[Method::Qa, Method::Qja], &cost, config)?,
        ExperimentMethod::JeCheck => je_artifacts(&cost, config)?,
        ExperimentMethod::DilateCheck => dilation_artifacts(&cost, config)?,
        ExperimentMethod::Spectrum => spectrum_artifacts(&cost, config)?,
    };
    if config.options.plot_script {
        artifacts
            .files
            .push((PLOT_FILE.into(), PLOT_SCRIPT.as_bytes().to_vec()));
    }
    Ok(artifacts)
}

/// Writes `files` plus the manifest into a fresh sibling directory and
/// renames it onto `dir`. An existing `dir` is replaced only when it is
/// empty or holds a previous bundle.
fn publish(dir: &Path, files: &[(String, Vec<u8>)], manifest: &Manifest) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let staging = tempfile::Builder::new().prefix(".qjasim-").tempdir_in(&parent)?;
    for (name, bytes) in files {
        fs::write(staging.path().join(name), bytes)?;
    }
    let mut json = serde_json::to_vec_pretty(manifest)?;
    json.push(b'\n');
    fs::write(staging.path().join(MANIFEST_FILE), json)?;

    if dir.exists() {
        let empty = fs::read_dir(dir)?.next().is_none();
        if !empty && !dir.join(MANIFEST_FILE).is_file() {
            return Err(Error::Precondition(format!(
                "output directory {} exists and does not hold a previous bundle",
                dir.display()
            )));
        }
        let retired = tempfile::Builder::new().prefix(".qjasim-old-").tempdir_in(&parent)?;
        let old = retired.path().join("bundle");
        fs::rename(dir, &old)?;
        fs::rename(staging.keep(), dir)?;
        drop(retired);
    } else {
        fs::rename(staging.keep(), dir)?;
    }
    Ok(())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<FigureBundle> {
    let artifacts = build_artifacts(config)?;
    let manifest = Manifest {
        config_hash: config_hash(config)?,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        method: config.method.name().into(),
        files: artifacts.files.iter().map(|(n, _)| n.clone()).collect(),
    };
    publish(&config.output_dir, &artifacts.files, &manifest)?;
    Ok(FigureBundle {
        dir: config.output_dir.clone(),
        manifest,
        summary: artifacts.summary,
    })
}
