//! Experiment configuration: a single JSON object validated in full before
//! anything runs. Every problem is reported with its JSON path, what was
//! expected there and what was found; unknown keys are errors.
//!
//! ```json
//! {
//!   "method": "qja",
//!   "instance": {"random": {"n_sites": 50, "seed": 7}},
//!   "schedule": {"beta_max": 100, "tau": [1, 10, 100], "n_steps": "auto"},
//!   "seed": 1,
//!   "output_dir": "out",
//!   "tolerances": {"ground": 1e-12, "tracking": 1e-4, "z_score": 3},
//!   "options": {"kernel": "metropolis", "record_every": 20}
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::anneal::QjaOrdering;
use crate::error::{Error, Result};
use crate::model::{Boundary, CostFunction};
use crate::stochastic::KernelKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.path, self.expected, self.found)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMethod {
    Qa,
    Qja,
    QaInterp,
    JeCheck,
    DilateCheck,
    Fig1,
    Spectrum,
}

impl ExperimentMethod {
    pub const ALL: [ExperimentMethod; 7] = [
        ExperimentMethod::Qa,
        ExperimentMethod::Qja,
        ExperimentMethod::QaInterp,
        ExperimentMethod::JeCheck,
        ExperimentMethod::DilateCheck,
        ExperimentMethod::Fig1,
        ExperimentMethod::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentMethod::Qa => "qa",
            ExperimentMethod::Qja => "qja",
            ExperimentMethod::QaInterp => "qa-interp",
            ExperimentMethod::JeCheck => "je-check",
            ExperimentMethod::DilateCheck => "dilate-check",
            ExperimentMethod::Fig1 => "fig1",
            ExperimentMethod::Spectrum => "spectrum",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    fn valid_list() -> String {
        let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
        format!("one of {}", names.join(", "))
    }
}

impl fmt::Display for ExperimentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSpec {
    Random {
        n_sites: usize,
        /// `None` derives the instance seed from the master seed.
        seed: Option<u64>,
        v_low: f64,
        v_high: f64,
        boundary: Boundary,
    },
    Inline(CostFunction),
    /// Resolved relative to the config file's directory.
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleSpec {
    pub beta_max: f64,
    pub taus: Vec<f64>,
    pub n_steps: StepPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Degeneracy tolerance of the ground-state set.
    pub ground: f64,
    /// Allowed `|p_ground - p_ground_gibbs|` for QJA tracking reports.
    pub tracking: f64,
    /// Allowed `|z|` for the Jarzynski check.
    pub z_score: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ground: 1e-12,
            tracking: 1e-4,
            z_score: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Options {
    pub kernel: KernelKind,
    pub ordering: QjaOrdering,
    pub record_every: Option<usize>,
    pub samples: usize,
    pub transverse_strength: f64,
    pub grid: usize,
    pub p_error_cap: f64,
    pub plot_script: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            kernel: KernelKind::Metropolis,
            ordering: QjaOrdering::WeightThenUnitary,
            record_every: None,
            samples: 100_000,
            transverse_strength: 1.0,
            grid: 101,
            p_error_cap: 0.1,
            plot_script: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub method: ExperimentMethod,
    pub instance: InstanceSpec,
    pub schedule: ScheduleSpec,
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
    pub options: Options,
}

pub const DEFAULT_OUTPUT_DIR: &str = "out";

fn fig1_instance() -> InstanceSpec {
    InstanceSpec::Random {
        n_sites: 50,
        seed: None,
        v_low: 0.0,
        v_high: 1.0,
        boundary: Boundary::OpenChain,
    }
}

fn fig1_schedule() -> ScheduleSpec {
    ScheduleSpec {
        beta_max: 100.0,
        taus: vec![1.0, 10.0, 100.0],
        n_steps: StepPolicy::Auto,
    }
}

fn describe(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Array(a) => format!("array of length {}", a.len()),
        Value::Object(_) => "object".into(),
    }
}

#[derive(Default)]
struct Checker {
    issues: Vec<ConfigIssue>,
}

impl Checker {
    fn issue(&mut self, path: &str, expected: impl Into<String>, found: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.into(),
            expected: expected.into(),
            found: found.into(),
        });
    }

    fn object<'v>(&mut self, path: &str, v: &'v Value, allowed: &[&str]) -> Option<&'v Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.issue(path, "object", describe(v));
            return None;
        };
        for key in map.keys().filter(|k| !allowed.contains(&k.as_str())) {
            self.issue(
                &format!("{path}.{key}"),
                format!("no such key (allowed: {})", allowed.join(", ")),
                "unknown key",
            );
        }
        Some(map)
    }

    fn number(&mut self, path: &str, v: &Value, valid: impl Fn(f64) -> bool, expected: &str) -> Option<f64> {
        match v.as_f64() {
            Some(x) if valid(x) => Some(x),
            _ => {
                self.issue(path, expected, describe(v));
                None
            }
        }
    }

    fn integer(&mut self, path: &str, v: &Value, min: u64, expected: &str) -> Option<u64> {
        match v.as_u64() {
            Some(x) if x >= min => Some(x),
            _ => {
                self.issue(path, expected, describe(v));
                None
            }
        }
    }

    fn boolean(&mut self, path: &str, v: &Value) -> Option<bool> {
        let b = v.as_bool();
        if b.is_none() {
            self.issue(path, "boolean", describe(v));
        }
        b
    }

    fn choice<T: Copy>(&mut self, path: &str, v: &Value, choices: &[(&str, T)]) -> Option<T> {
        let found = v
            .as_str()
            .and_then(|s| choices.iter().find(|(n, _)| *n == s).map(|(_, t)| *t));
        if found.is_none() {
            let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
            self.issue(path, format!("one of {}", names.join(", ")), describe(v));
        }
        found
    }

    fn positive(&mut self, path: &str, v: &Value) -> Option<f64> {
        self.number(path, v, |x| x.is_finite() && x > 0.0, "finite number > 0")
    }

    fn instance(&mut self, v: &Value) -> Option<InstanceSpec> {
        let map = self.object("instance", v, &["random", "inline", "path"])?;
        if map.len() != 1 {
            self.issue(
                "instance",
                "exactly one of random, inline, path",
                format!("{} keys", map.len()),
            );
            return None;
        }
        let (kind, body) = map.iter().next().expect("map has one entry");
        match kind.as_str() {
            "random" => {
                let r = self.object(
                    "instance.random",
                    body,
                    &["n_sites", "seed", "v_low", "v_high", "boundary"],
                )?;
                let n_sites = match r.get("n_sites") {
                    Some(x) => self.integer("instance.random.n_sites", x, 2, "integer >= 2"),
                    None => {
                        self.issue("instance.random.n_sites", "integer >= 2", "missing");
                        None
                    }
                };
                let seed = match r.get("seed") {
                    Some(x) => Some(self.integer("instance.random.seed", x, 0, "unsigned 64-bit integer")?),
                    None => None,
                };
                let finite = |x: f64| x.is_finite();
                let v_low = r.get("v_low").map_or(Some(0.0), |x| {
                    self.number("instance.random.v_low", x, finite, "finite number")
                });
                let v_high = r.get("v_high").map_or(Some(1.0), |x| {
                    self.number("instance.random.v_high", x, finite, "finite number")
                });
                if let (Some(lo), Some(hi)) = (v_low, v_high) {
                    if lo >= hi {
                        self.issue(
                            "instance.random.v_high",
                            format!("number > v_low = {lo}"),
                            format!("number {hi}"),
                        );
                    }
                }
                let boundary = r.get("boundary").map_or(Some(Boundary::OpenChain), |x| {
                    self.choice(
                        "instance.random.boundary",
                        x,
                        &[
                            ("open-chain", Boundary::OpenChain),
                            ("periodic-chain", Boundary::PeriodicChain),
                        ],
                    )
                });
                Some(InstanceSpec::Random {
                    n_sites: n_sites? as usize,
                    seed,
                    v_low: v_low?,
                    v_high: v_high?,
                    boundary: boundary?,
                })
            }
            "inline" => match serde_json::from_value::<CostFunction>(body.clone()) {
                Ok(c) => Some(InstanceSpec::Inline(c)),
                Err(e) => {
                    self.issue(
                        "instance.inline",
                        "valid instance record {n, energies, neighbors, seed}",
                        e.to_string(),
                    );
                    None
                }
            },
            _ => match body.as_str() {
                Some(p) if !p.is_empty() => Some(InstanceSpec::Path(PathBuf::from(p))),
                _ => {
                    self.issue("instance.path", "nonempty string", describe(body));
                    None
                }
            },
        }
    }

    fn schedule(&mut self, v: &Value) -> Option<ScheduleSpec> {
        let map = self.object("schedule", v, &["beta_max", "tau", "n_steps"])?;
        let beta_max = match map.get("beta_max") {
            Some(x) => self.number(
                "schedule.beta_max",
                x,
                |b| b.is_finite() && b >= 0.0,
                "finite number >= 0",
            ),
            None => {
                self.issue("schedule.beta_max", "finite number >= 0", "missing");
                None
            }
        };
        let taus = match map.get("tau") {
            Some(Value::Array(items)) if !items.is_empty() => {
                let parsed: Vec<Option<f64>> = items
                    .iter()
                    .enumerate()
                    .map(|(i, x)| self.positive(&format!("schedule.tau[{i}]"), x))
                    .collect();
                parsed.into_iter().collect::<Option<Vec<f64>>>()
            }
            Some(x @ Value::Array(_)) => {
                self.issue("schedule.tau", "nonempty list of numbers > 0", describe(x));
                None
            }
            Some(x) => self.positive("schedule.tau", x).map(|t| vec![t]),
            None => {
                self.issue("schedule.tau", "number > 0 or list of them", "missing");
                None
            }
        };
        let n_steps = match map.get("n_steps") {
            None => Some(StepPolicy::Auto),
            Some(Value::String(s)) if s == "auto" => Some(StepPolicy::Auto),
            Some(x) => self
                .integer("schedule.n_steps", x, 1, "integer >= 1 or \"auto\"")
                .map(|n| StepPolicy::Fixed(n as usize)),
        };
        Some(ScheduleSpec {
            beta_max: beta_max?,
            taus: taus?,
            n_steps: n_steps?,
        })
    }

    fn tolerances(&mut self, v: &Value) -> Option<Tolerances> {
        let map = self.object("tolerances", v, &["ground", "tracking", "z_score"])?;
        let mut t = Tolerances::default();
        if let Some(x) = map.get("ground") {
            t.ground = self.number(
                "tolerances.ground",
                x,
                |g| g.is_finite() && g >= 0.0,
                "finite number >= 0",
            )?;
        }
        if let Some(x) = map.get("tracking") {
            t.tracking = self.positive("tolerances.tracking", x)?;
        }
        if let Some(x) = map.get("z_score") {
            t.z_score = self.positive("tolerances.z_score", x)?;
        }
        Some(t)
    }

    fn options(&mut self, v: &Value) -> Option<Options> {
        let map = self.object(
            "options",
            v,
            &[
                "kernel",
                "ordering",
                "record_every",
                "samples",
                "transverse_strength",
                "grid",
                "p_error_cap",
                "plot_script",
            ],
        )?;
        let mut o = Options::default();
        let mut ok = true;
        for (key, x) in map {
            let path = format!("options.{key}");
            let done = match key.as_str() {
                "kernel" => self
                    .choice(
                        &path,
                        x,
                        &[
                            ("metropolis", KernelKind::Metropolis),
                            ("heat-bath", KernelKind::HeatBath),
                        ],
                    )
                    .map(|k| o.kernel = k),
                "ordering" => self
                    .choice(
                        &path,
                        x,
                        &[
                            ("weight-then-unitary", QjaOrdering::WeightThenUnitary),
                            ("unitary-then-weight", QjaOrdering::UnitaryThenWeight),
                        ],
                    )
                    .map(|v| o.ordering = v),
                "record_every" => self
                    .integer(&path, x, 1, "integer >= 1")
                    .map(|n| o.record_every = Some(n as usize)),
                "samples" => self
                    .integer(&path, x, 2, "integer >= 2")
                    .map(|n| o.samples = n as usize),
                "transverse_strength" => self.positive(&path, x).map(|s| o.transverse_strength = s),
                "grid" => self.integer(&path, x, 2, "integer >= 2").map(|n| o.grid = n as usize),
                "p_error_cap" => self
                    .number(&path, x, |p| p > 0.0 && p < 1.0, "number in (0, 1)")
                    .map(|p| o.p_error_cap = p),
                _ => self.boolean(&path, x).map(|b| o.plot_script = b),
            };
            ok &= done.is_some();
        }
        ok.then_some(o)
    }
}

/// Parses and checks a config. `method` (from the command line) fills in
/// or must agree with the config's own `method` key.
pub fn validate_config(raw: &str, method: Option<ExperimentMethod>) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(raw).map_err(|e| {
        Error::Config(vec![ConfigIssue {
            path: "$".into(),
            expected: "JSON object".into(),
            found: format!("malformed JSON ({e})"),
        }])
    })?;
    let mut c = Checker::default();
    let Some(map) = c.object(
        "$",
        &value,
        &[
            "method",
            "instance",
            "schedule",
            "seed",
            "output_dir",
            "tolerances",
            "options",
        ],
    ) else {
        return Err(Error::Config(c.issues));
    };

    let declared = map
        .get("method")
        .and_then(|v| match v.as_str().and_then(ExperimentMethod::parse) {
            Some(m) => Some(m),
            None => {
                c.issue("method", ExperimentMethod::valid_list(), describe(v));
                None
            }
        });
    let method = match (method, declared) {
        (Some(a), Some(b)) if a != b => {
            c.issue(
                "method",
                format!("{a} (as given on the command line)"),
                format!("string {:?}", b.name()),
            );
            None
        }
        (Some(a), _) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => {
            if !map.contains_key("method") {
                c.issue("method", ExperimentMethod::valid_list(), "missing");
            }
            None
        }
    };
    let is_fig1 = method == Some(ExperimentMethod::Fig1);

    let instance = match map.get("instance") {
        Some(v) => c.instance(v),
        None if is_fig1 => Some(fig1_instance()),
        None => {
            c.issue("instance", "object with one of random, inline, path", "missing");
            None
        }
    };
    let schedule = match map.get("schedule") {
        Some(v) => c.schedule(v),
        None if is_fig1 => Some(fig1_schedule()),
        None => {
            c.issue("schedule", "object {beta_max, tau, n_steps}", "missing");
            None
        }
    };
    let seed = match map.get("seed") {
        Some(v) => c.integer("seed", v, 0, "unsigned 64-bit integer"),
        None => Some(0),
    };
    let output_dir = match map.get("output_dir") {
        Some(Value::String(s)) if !s.is_empty() => Some(PathBuf::from(s)),
        Some(v) => {
            c.issue("output_dir", "nonempty string", describe(v));
            None
        }
        None => Some(PathBuf::from(DEFAULT_OUTPUT_DIR)),
    };
    let tolerances = map
        .get("tolerances")
        .map_or(Some(Tolerances::default()), |v| c.tolerances(v));
    let options = map.get("options").map_or(Some(Options::default()), |v| c.options(v));

    match (method, instance, schedule, seed, output_dir, tolerances, options) {
        (
            Some(method),
            Some(instance),
            Some(schedule),
            Some(seed),
            Some(output_dir),
            Some(tolerances),
            Some(options),
        ) if c.issues.is_empty() => Ok(ExperimentConfig {
            method,
            instance,
            schedule,
            seed,
            output_dir,
            tolerances,
            options,
        }),
        _ => Err(Error::Config(c.issues)),
    }
}

impl ExperimentConfig {
    /// Default config for `method`, as used by `fig1` with no config file.
    pub fn fig1(seed: u64) -> Self {
        ExperimentConfig {
            method: ExperimentMethod::Fig1,
            instance: fig1_instance(),
            schedule: fig1_schedule(),
            seed,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
            tolerances: Tolerances::default(),
            options: Options::default(),
        }
    }

    /// Reads and validates a config file; instance paths become relative to it.
    pub fn from_file(path: &Path, method: Option<ExperimentMethod>) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(vec![ConfigIssue {
                path: "$".into(),
                expected: format!("readable file {}", path.display()),
                found: e.to_string(),
            }])
        })?;
        let mut config = validate_config(&raw, method)?;
        if let InstanceSpec::Path(p) = &mut config.instance {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(config)
    }
}
