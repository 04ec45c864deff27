//! TOML run configuration.

use std::path::{Path, PathBuf};

use djl_core::kernel::KernelParams;
use djl_core::model::{FamilyParams, ModelConfig};
use djl_core::simulate::{Ar1Params, MaskPolicy, Scheme1Params, Scheme2Params, Scheme3Params, SimSizes};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub mask: MaskSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub predict: PredictSection,
    #[serde(default)]
    pub align: AlignSection,
}

/// File locations. `dir` is relative to the config file; the others are
/// relative to `dir`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dir: PathBuf,
    pub edges: PathBuf,
    pub attributes: PathBuf,
    pub ledger_edges: PathBuf,
    pub ledger_attributes: PathBuf,
    pub truth_edges: PathBuf,
    pub truth_attributes: PathBuf,
    pub archive: PathBuf,
    pub diagnostics: PathBuf,
    pub edge_predictions: PathBuf,
    pub attr_predictions: PathBuf,
    pub metrics: PathBuf,
    pub positions: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            dir: ".".into(),
            edges: "edges.csv".into(),
            attributes: "attributes.csv".into(),
            ledger_edges: "ledger_edges.csv".into(),
            ledger_attributes: "ledger_attributes.csv".into(),
            truth_edges: "truth_edges.csv".into(),
            truth_attributes: "truth_attributes.csv".into(),
            archive: "archive.djl".into(),
            diagnostics: "diagnostics.txt".into(),
            edge_predictions: "edge_predictions.csv".into(),
            attr_predictions: "attr_predictions.csv".into(),
            metrics: "metrics.csv".into(),
            positions: "positions.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// 1, 2 or 3.
    pub scheme: u8,
    pub nodes: usize,
    pub layers: usize,
    pub attrs: usize,
    /// Training grid length; held-out future times come on top.
    pub times: usize,
    pub shared_rank: usize,
    pub layer_rank: usize,
    pub depth: usize,
    pub sigma_bias_sq: f64,
    pub sigma_weight_sq: f64,
    pub noise_var: f64,
    pub standardize: bool,
    pub rho: f64,
    pub innovation_var: f64,
    pub theta1_scale: f64,
    pub theta2: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            scheme: 1,
            nodes: 20,
            layers: 2,
            attrs: 2,
            times: 20,
            shared_rank: 4,
            layer_rank: 4,
            depth: 1,
            sigma_bias_sq: 0.01,
            sigma_weight_sq: 0.4,
            noise_var: 1.0,
            standardize: true,
            rho: 0.5,
            innovation_var: 4.0,
            theta1_scale: 1.0,
            theta2: 0.5,
        }
    }
}

impl SimulateSection {
    pub fn sizes(&self) -> SimSizes {
        SimSizes {
            nodes: self.nodes,
            layers: self.layers,
            attrs: self.attrs,
            shared_rank: self.shared_rank,
            layer_rank: self.layer_rank,
        }
    }

    pub fn scheme1(&self) -> Result<Scheme1Params, CliError> {
        let p = KernelParams::new(self.sigma_bias_sq, self.sigma_weight_sq, self.depth).map_err(config_err)?;
        Ok(Scheme1Params {
            sizes: self.sizes(),
            betas: FamilyParams::uniform(p, true),
            noise_var: self.noise_var,
            standardize: self.standardize,
        })
    }

    pub fn scheme2(&self) -> Scheme2Params {
        let a = Ar1Params {
            rho: self.rho,
            innovation_var: self.innovation_var,
        };
        Scheme2Params {
            sizes: self.sizes(),
            mu: a,
            eta: a,
            zeta: a,
            xi: a,
            alpha: a,
            noise_var: self.noise_var,
            standardize: self.standardize,
        }
    }

    pub fn scheme3(&self) -> Result<Scheme3Params, CliError> {
        Ok(Scheme3Params {
            attributes: self.scheme1()?,
            theta1_scale: self.theta1_scale,
            theta2: self.theta2,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskSection {
    pub time_select_prob: f64,
    pub edge_drop_prob: f64,
    pub attr_time_select_prob: f64,
    pub attr_drop_prob: f64,
    pub holdout_future_times: usize,
}

impl Default for MaskSection {
    fn default() -> Self {
        let d = MaskPolicy::default();
        MaskSection {
            time_select_prob: d.time_select_prob,
            edge_drop_prob: d.edge_drop_prob,
            attr_time_select_prob: d.attr_time_select_prob,
            attr_drop_prob: d.attr_drop_prob,
            holdout_future_times: 2,
        }
    }
}

impl MaskSection {
    pub fn policy(&self) -> MaskPolicy {
        MaskPolicy {
            time_select_prob: self.time_select_prob,
            edge_drop_prob: self.edge_drop_prob,
            attr_time_select_prob: self.attr_time_select_prob,
            attr_drop_prob: self.attr_drop_prob,
            holdout_future_times: self.holdout_future_times,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub shared_rank: usize,
    pub layer_rank: usize,
    pub depth: usize,
    /// `(σ_c², σ_g²)` pairs; the default grid when absent.
    pub hyper_grid: Option<Vec<(f64, f64)>>,
    pub initial_beta: (f64, f64),
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub jitter: f64,
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub joint_mode: bool,
    pub chains: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        ModelSection {
            shared_rank: d.shared_rank,
            layer_rank: d.layer_rank,
            depth: d.depth,
            hyper_grid: None,
            initial_beta: d.initial_beta,
            a_sigma: d.a_sigma,
            b_sigma: d.b_sigma,
            jitter: d.jitter,
            burn_in: d.burn_in,
            keep: d.keep,
            thin: d.thin,
            joint_mode: d.joint_mode,
            chains: 1,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, seed: u64) -> Result<ModelConfig, CliError> {
        let c = ModelConfig {
            shared_rank: self.shared_rank,
            layer_rank: self.layer_rank,
            depth: self.depth,
            hyper_grid: self.hyper_grid.clone().unwrap_or_else(ModelConfig::default_hyper_grid),
            initial_beta: self.initial_beta,
            a_sigma: self.a_sigma,
            b_sigma: self.b_sigma,
            jitter: self.jitter,
            burn_in: self.burn_in,
            keep: self.keep,
            thin: self.thin,
            seed,
            joint_mode: self.joint_mode,
        };
        c.validate().map_err(config_err)?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub threshold: f64,
    pub bernoulli_scores: bool,
    /// Future time stamps to forecast; taken from the ledger when absent.
    pub future_times: Option<Vec<f64>>,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            threshold: 0.5,
            bernoulli_scores: false,
            future_times: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignSection {
    /// Grid indices to project; all when empty.
    pub times: Vec<usize>,
    pub gram: bool,
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(config_err)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads `path`, resolving `paths.dir` against the config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if cfg.paths.dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.paths.dir = base.join(&cfg.paths.dir);
        }
        Ok(cfg)
    }

    /// Absolute-or-cwd path of a file under `paths.dir`.
    pub fn file(&self, name: &Path) -> PathBuf {
        self.paths.dir.join(name)
    }
}
