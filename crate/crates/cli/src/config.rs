//! Versioned JSON experiment configuration and the built-in presets.

use serde::{Deserialize, Serialize};

use qsmpc_core::model::ModelConfig;
use qsmpc_core::pmp::{InitPolicy, OptimizerOptions};
use qsmpc_core::quantum::{chain_edges, DensityMatrix, HermitianOperator};

use crate::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ThreeLevel,
    Scaling,
    Ising,
    Compare,
    ReductionCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ThreeLevel => "three-level",
            Experiment::Scaling => "scaling",
            Experiment::Ising => "ising",
            Experiment::Compare => "compare",
            Experiment::ReductionCheck => "reduction-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemSpec {
    /// Spin-`j` system with `H0 = L = J_z`, `H_c = J_y`.
    Spin { j: f64 },
    /// Qubit chain with uniform nearest-neighbour coupling and local `Z` field.
    Ising { qubits: usize, coupling: f64, field: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub system: SystemSpec,
    /// Diagonal initial populations; the system default when absent.
    #[serde(default)]
    pub initial_populations: Option<Vec<f64>>,
    /// Basis index of the target eigenstate; the system default when absent.
    #[serde(default)]
    pub target_index: Option<usize>,
    pub eta: f64,
    pub kappa: f64,
    pub dt: f64,
    pub delta_t: f64,
    pub t_final: f64,
    pub u_min: f64,
    pub u_max: f64,
    #[serde(default)]
    pub reoptimize_every: Option<usize>,
}

impl ModelSpec {
    fn three_level() -> Self {
        Self {
            system: SystemSpec::Spin { j: 1.0 },
            initial_populations: Some(vec![0.3, 0.4, 0.3]),
            target_index: Some(2),
            eta: 1.0,
            kappa: 1.0,
            dt: 0.01,
            delta_t: 0.5,
            t_final: 20.0,
            u_min: -5.0,
            u_max: 5.0,
            reoptimize_every: None,
        }
    }

    fn spin(j: f64, t_final: f64) -> Self {
        Self {
            system: SystemSpec::Spin { j },
            initial_populations: None,
            target_index: None,
            t_final,
            ..Self::three_level()
        }
    }

    fn ising(qubits: usize, t_final: f64) -> Self {
        Self {
            system: SystemSpec::Ising {
                qubits,
                coupling: 1.0,
                field: 0.5,
            },
            initial_populations: None,
            target_index: None,
            dt: 0.0025,
            delta_t: 0.05,
            t_final,
            ..Self::three_level()
        }
    }

    /// Same model with a different system.
    pub fn with_system(&self, system: SystemSpec) -> Self {
        Self {
            system,
            ..self.clone()
        }
    }

    pub fn build(&self) -> Result<ModelConfig> {
        let mut model = match self.system {
            SystemSpec::Spin { j } => ModelConfig::spin(j, self.t_final)?,
            SystemSpec::Ising {
                qubits,
                coupling,
                field,
            } => ModelConfig::ising(qubits, &chain_edges(qubits, coupling), &vec![field; qubits])?,
        };
        let d = model.dim();
        if let Some(pops) = &self.initial_populations {
            if pops.len() != d {
                return Err(CliError::config(
                    "model.initial_populations",
                    format!("{} entries for dimension {d}", pops.len()),
                ));
            }
            model.rho0 = DensityMatrix::diagonal(pops)
                .map_err(|e| CliError::config("model.initial_populations", e.to_string()))?;
        }
        if let Some(k) = self.target_index {
            if k >= d {
                return Err(CliError::config("model.target_index", format!("{k} is out of range for dimension {d}")));
            }
            model.target = HermitianOperator::basis_projector(d, k);
        }
        model.eta = self.eta;
        model.kappa = self.kappa;
        model.dt = self.dt;
        model.delta_t = self.delta_t;
        model.t_final = self.t_final;
        model.u_min = self.u_min;
        model.u_max = self.u_max;
        model.reoptimize_every = self.reoptimize_every;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    Zeros,
    WarmStartShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSpec {
    pub max_iters: usize,
    pub step_size: f64,
    pub grad_tol: f64,
    pub init_policy: InitSpec,
    pub escape_saddles: bool,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        let d = OptimizerOptions::default();
        Self {
            max_iters: d.max_iters,
            step_size: d.step_size,
            grad_tol: d.grad_tol,
            init_policy: InitSpec::WarmStartShift,
            escape_saddles: d.escape_saddles,
        }
    }
}

impl OptimizerSpec {
    pub fn build(&self) -> Result<OptimizerOptions> {
        let opts = OptimizerOptions {
            max_iters: self.max_iters,
            step_size: self.step_size,
            grad_tol: self.grad_tol,
            init_policy: match self.init_policy {
                InitSpec::Zeros => InitPolicy::Zeros,
                InitSpec::WarmStartShift => InitPolicy::WarmStartShift,
            },
            escape_saddles: self.escape_saddles,
            ..OptimizerOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub j_values: Vec<f64>,
    /// Paths per `j`; `n_paths` for every `j` when absent.
    #[serde(default)]
    pub paths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub scenario_counts: Vec<usize>,
    /// Cost blocks of the scenario controller.
    pub blocks: usize,
    /// Paths run one at a time on one thread to time horizon solves.
    pub timing_paths: usize,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            scenario_counts: vec![8, 32, 128],
            blocks: 2,
            timing_paths: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsingSpec {
    /// Sampling periods per averaging window.
    pub window_periods: usize,
}

impl Default for IsingSpec {
    fn default() -> Self {
        Self { window_periods: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReductionSpec {
    /// Constant control applied on `[0, pulse_end]`, then `u = 0`.
    pub amplitude: f64,
    pub pulse_end: f64,
}

impl Default for ReductionSpec {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            pulse_end: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub model: ModelSpec,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Record ensemble series every this many substeps.
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub ising: Option<IsingSpec>,
    #[serde(default)]
    pub reduction: Option<ReductionSpec>,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    fn base(experiment: Experiment, model: ModelSpec, n_paths: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            model,
            n_paths,
            seed: 0,
            threads: None,
            record_every: 1,
            optimizer: OptimizerSpec::default(),
            scaling: None,
            compare: None,
            ising: None,
            reduction: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("{} is not supported (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.n_paths == 0 {
            return Err(CliError::config("n_paths", "at least one path is required".into()));
        }
        if self.record_every == 0 {
            return Err(CliError::config("record_every", "must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::config("threads", "must be at least 1".into()));
        }
        self.optimizer.build()?;
        match self.experiment {
            Experiment::Scaling => {
                let s = self.scaling.as_ref().ok_or_else(|| CliError::config("scaling", "section is required".into()))?;
                if s.j_values.is_empty() {
                    return Err(CliError::config("scaling.j_values", "is empty".into()));
                }
                if let Some(p) = &s.paths {
                    if p.len() != s.j_values.len() || p.contains(&0) {
                        return Err(CliError::config(
                            "scaling.paths",
                            "needs one positive count per j value".into(),
                        ));
                    }
                }
                for &j in &s.j_values {
                    self.model.with_system(SystemSpec::Spin { j }).build()?;
                }
            }
            Experiment::Compare => {
                let c = self.compare_spec();
                if c.scenario_counts.is_empty() || c.scenario_counts.contains(&0) {
                    return Err(CliError::config("compare.scenario_counts", "needs positive counts".into()));
                }
                if c.blocks < 2 {
                    return Err(CliError::config("compare.blocks", "must be at least 2".into()));
                }
                if c.timing_paths == 0 {
                    return Err(CliError::config("compare.timing_paths", "must be at least 1".into()));
                }
                self.model.build()?;
            }
            Experiment::ReductionCheck => {
                let r = self.reduction_spec();
                let model = self.model.build()?;
                if !(r.pulse_end > 0.0 && r.pulse_end <= model.t_final) {
                    return Err(CliError::config("reduction.pulse_end", format!("{} is outside (0, t_final]", r.pulse_end)));
                }
                if !(model.u_min..=model.u_max).contains(&r.amplitude) {
                    return Err(CliError::config("reduction.amplitude", format!("{} is outside the control bounds", r.amplitude)));
                }
            }
            Experiment::Ising => {
                if !matches!(self.model.system, SystemSpec::Ising { .. }) {
                    return Err(CliError::config("model.system", "ising experiment needs an ising system".into()));
                }
                if self.ising_spec().window_periods == 0 {
                    return Err(CliError::config("ising.window_periods", "must be at least 1".into()));
                }
                self.model.build()?;
            }
            Experiment::ThreeLevel => {
                self.model.build()?;
            }
        }
        Ok(())
    }

    pub fn compare_spec(&self) -> CompareSpec {
        self.compare.clone().unwrap_or_default()
    }

    pub fn ising_spec(&self) -> IsingSpec {
        self.ising.clone().unwrap_or_default()
    }

    pub fn reduction_spec(&self) -> ReductionSpec {
        self.reduction.clone().unwrap_or_default()
    }
}

/// Built-in presets: name, description.
pub const PRESETS: &[(&str, &str)] = &[
    ("three-level", "spin-1 filter from diag(0.3, 0.4, 0.3), T = 20, 1000 paths"),
    ("scaling", "spin j = 1..5 from I/d, T = 150, 1000 paths each"),
    ("scaling-ci", "j = 1 with 1000 paths and j = 3 with 300 paths, T = 150"),
    ("scaling-j1", "j = 1, T = 150, 1000 paths"),
    ("scaling-j2", "j = 2, T = 150, 1000 paths"),
    ("scaling-j3", "j = 3, T = 150, 1000 paths"),
    ("scaling-j4", "j = 4, T = 150, 1000 paths"),
    ("scaling-j5", "j = 5, T = 150, 1000 paths"),
    ("ising-8", "8-qubit chain, T = 5, 1000 paths"),
    ("ising-4", "4-qubit chain, T = 2, 32 paths"),
    ("compare", "reduced vs scenario controller with 8, 32, 128 scenarios, 200 paths"),
    ("compare-ci", "as compare with 24 paths"),
    ("reduction-check", "reduced cost vs collapse statistics, pulse u = 2 on [0, 0.5], 1000 paths"),
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let scaling = |j_values: Vec<f64>, paths: Option<Vec<usize>>| {
        let mut c = ExperimentConfig::base(Experiment::Scaling, ModelSpec::spin(1.0, 150.0), 1000);
        c.record_every = 500;
        c.scaling = Some(ScalingSpec { j_values, paths });
        c
    };
    let compare = |n_paths| {
        let mut c = ExperimentConfig::base(Experiment::Compare, ModelSpec::three_level(), n_paths);
        c.record_every = 10;
        c.compare = Some(CompareSpec::default());
        c
    };
    let ising = |qubits, t_final, n_paths| {
        let mut c = ExperimentConfig::base(Experiment::Ising, ModelSpec::ising(qubits, t_final), n_paths);
        c.ising = Some(IsingSpec::default());
        c
    };
    let cfg = match name {
        "three-level" => ExperimentConfig::base(Experiment::ThreeLevel, ModelSpec::three_level(), 1000),
        "scaling" => scaling(vec![1.0, 2.0, 3.0, 4.0, 5.0], None),
        "scaling-ci" => scaling(vec![1.0, 3.0], Some(vec![1000, 300])),
        "scaling-j1" => scaling(vec![1.0], None),
        "scaling-j2" => scaling(vec![2.0], None),
        "scaling-j3" => scaling(vec![3.0], None),
        "scaling-j4" => scaling(vec![4.0], None),
        "scaling-j5" => scaling(vec![5.0], None),
        "ising-8" => ising(8, 5.0, 1000),
        "ising-4" => ising(4, 2.0, 32),
        "compare" => compare(200),
        "compare-ci" => compare(24),
        "reduction-check" => {
            let mut c = ExperimentConfig::base(Experiment::ReductionCheck, ModelSpec::three_level(), 1000);
            c.record_every = 100;
            c.reduction = Some(ReductionSpec::default());
            c
        }
        _ => return None,
    };
    Some(cfg)
}

/// Preset used when neither a config file nor a preset name is given.
pub fn default_preset(experiment: Experiment) -> &'static str {
    match experiment {
        Experiment::ThreeLevel => "three-level",
        Experiment::Scaling => "scaling",
        Experiment::Ising => "ising-8",
        Experiment::Compare => "compare",
        Experiment::ReductionCheck => "reduction-check",
    }
}
