//! TOML run and generator configurations. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::TensorFormat;
use crate::losses::LossSpec;
use crate::objective::DEFAULT_GAMMA;
use crate::optimize::{AdamConfig, LbfgsbConfig};
use crate::partition::ModePartition;
use crate::stochastic::{SamplerConfig, SamplerKind, ZeroScale};
use crate::synth::BinaryGenConfig;

/// A decomposition run as written in the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    /// `sparse` or `dense`; taken from the input extension when absent.
    #[serde(default)]
    pub format: Option<String>,
    /// Bracket notation with 1-based modes; every mode in one cell when absent.
    #[serde(default)]
    pub partition: Option<String>,
    pub rank: usize,
    pub loss: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_true")]
    pub optimize_lambda: bool,
    /// One MTTKRP per cell. When absent, enabled if the data is symmetric.
    #[serde(default)]
    pub fastpath: Option<bool>,
    #[serde(default = "default_inits")]
    pub n_initializations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub sampler: Option<SamplerSection>,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_true() -> bool {
    true
}

fn default_inits() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("symgcp-out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSection {
    Lbfgsb(LbfgsbSection),
    Adam(AdamSection),
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection::Lbfgsb(LbfgsbSection::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsbSection {
    pub memory: Option<usize>,
    pub max_iterations: Option<usize>,
    pub max_evaluations: Option<usize>,
    pub pg_tolerance: Option<f64>,
    pub rel_decrease_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamSection {
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub iters_per_epoch: Option<usize>,
    pub max_epochs: Option<usize>,
    pub kappa: Option<f64>,
    pub max_bad_epochs: Option<usize>,
    pub bad_epoch_decay: Option<f64>,
    pub project_to_bounds: Option<bool>,
    pub estimator_factor: Option<usize>,
    pub exact_monitor: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    /// `uniform` or `stratified`.
    pub kind: String,
    pub batch: Option<usize>,
    pub nonzeros: Option<usize>,
    pub zeros: Option<usize>,
    pub max_rejection_iters: Option<usize>,
    /// `unbiased` or `one-minus-nnz`.
    pub zero_scale: Option<String>,
}

impl LbfgsbSection {
    pub fn to_config(&self) -> Result<LbfgsbConfig> {
        let d = LbfgsbConfig::default();
        let cfg = LbfgsbConfig {
            memory: self.memory.unwrap_or(d.memory),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            max_evaluations: self.max_evaluations.unwrap_or(d.max_evaluations),
            pg_tolerance: self.pg_tolerance.unwrap_or(d.pg_tolerance),
            rel_decrease_tolerance: self.rel_decrease_tolerance.unwrap_or(d.rel_decrease_tolerance),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SamplerSection {
    /// Sampler settings; the seed is filled in per initialization.
    pub fn to_config(&self) -> Result<SamplerConfig> {
        let kind = match self.kind.as_str() {
            "uniform" => {
                if self.nonzeros.is_some() || self.zeros.is_some() {
                    return Err(Error::Config("sampler.nonzeros/zeros apply to stratified sampling only".into()));
                }
                SamplerKind::Uniform {
                    batch: self.batch.unwrap_or(1000),
                }
            }
            "stratified" => {
                if self.batch.is_some() {
                    return Err(Error::Config("sampler.batch applies to uniform sampling only".into()));
                }
                SamplerKind::Stratified {
                    nonzeros: self.nonzeros.unwrap_or(500),
                    zeros: self.zeros.unwrap_or(500),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "sampler.kind must be \"uniform\" or \"stratified\", got {other:?}"
                )))
            }
        };
        let zero_scale = match self.zero_scale.as_deref() {
            None | Some("unbiased") => ZeroScale::Unbiased,
            Some("one-minus-nnz") => ZeroScale::OneMinusNnz,
            Some(other) => {
                return Err(Error::Config(format!(
                    "sampler.zero_scale must be \"unbiased\" or \"one-minus-nnz\", got {other:?}"
                )))
            }
        };
        let cfg = SamplerConfig {
            kind,
            seed: 0,
            max_rejection_iters: self.max_rejection_iters.unwrap_or(1000),
            zero_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl AdamSection {
    pub fn to_config(&self, sampler: SamplerConfig) -> Result<AdamConfig> {
        let d = AdamConfig::default();
        let cfg = AdamConfig {
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            iters_per_epoch: self.iters_per_epoch.unwrap_or(d.iters_per_epoch),
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            kappa: self.kappa.unwrap_or(d.kappa),
            max_bad_epochs: self.max_bad_epochs.unwrap_or(d.max_bad_epochs),
            bad_epoch_decay: self.bad_epoch_decay.unwrap_or(d.bad_epoch_decay),
            project_to_bounds: self.project_to_bounds.unwrap_or(d.project_to_bounds),
            sampler,
            estimator_factor: self.estimator_factor.unwrap_or(d.estimator_factor),
            exact_monitor: self.exact_monitor.unwrap_or(d.exact_monitor),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Optimizer settings after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerChoice {
    Lbfgsb(LbfgsbConfig),
    Adam(AdamConfig),
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text.as_bytes()[..pos.min(text.len())].iter().filter(|b| **b == b'\n').count() + 1
}

fn from_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: path.to_string(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        msg: e.message().to_string(),
    })
}

impl RunConfig {
    /// Parses and validates; relative paths stay relative.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let cfg: RunConfig = from_toml(text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative `input` and `output` are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        Ok(cfg)
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.n_initializations == 0 {
            return Err(Error::Config("n_initializations must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be a nonnegative number, got {}", self.gamma)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.loss_spec()?;
        self.tensor_format()?;
        self.optimizer()?;
        Ok(())
    }

    pub fn loss_spec(&self) -> Result<LossSpec> {
        LossSpec::from_name(&self.loss)
    }

    pub fn tensor_format(&self) -> Result<TensorFormat> {
        match &self.format {
            Some(name) => TensorFormat::from_name(name),
            None => Ok(TensorFormat::from_path(&self.input)),
        }
    }

    /// Partition for a tensor of the given order.
    pub fn partition_for(&self, order: usize) -> Result<ModePartition> {
        match &self.partition {
            Some(p) => ModePartition::parse(p, order),
            None => Ok(ModePartition::full(order)),
        }
    }

    /// Optimizer settings with a placeholder sampler seed.
    pub fn optimizer(&self) -> Result<OptimizerChoice> {
        match &self.optimizer {
            OptimizerSection::Lbfgsb(s) => {
                if self.sampler.is_some() {
                    return Err(Error::Config("a [sampler] section needs optimizer.kind = \"adam\"".into()));
                }
                Ok(OptimizerChoice::Lbfgsb(s.to_config()?))
            }
            OptimizerSection::Adam(s) => {
                let sampler = match &self.sampler {
                    Some(sec) => sec.to_config()?,
                    None => AdamConfig::default().sampler,
                };
                Ok(OptimizerChoice::Adam(s.to_config(sampler)?))
            }
        }
    }
}

/// Settings for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    #[serde(default = "gen_defaults::m")]
    pub m: usize,
    #[serde(default = "gen_defaults::n")]
    pub n: usize,
    #[serde(default = "gen_defaults::r")]
    pub r: usize,
    #[serde(default = "gen_defaults::delta")]
    pub delta: f64,
    #[serde(default = "gen_defaults::rho_high")]
    pub rho_high: f64,
    #[serde(default = "gen_defaults::rho_low")]
    pub rho_low: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

mod gen_defaults {
    use crate::synth::BinaryGenConfig;

    pub fn m() -> usize {
        BinaryGenConfig::default().m
    }
    pub fn n() -> usize {
        BinaryGenConfig::default().n
    }
    pub fn r() -> usize {
        BinaryGenConfig::default().r
    }
    pub fn delta() -> f64 {
        BinaryGenConfig::default().delta
    }
    pub fn rho_high() -> f64 {
        BinaryGenConfig::default().rho_high
    }
    pub fn rho_low() -> f64 {
        BinaryGenConfig::default().rho_low
    }
}

impl GenConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let cfg: GenConfig = from_toml(text, path)?;
        cfg.binary().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        if let Some(out) = &cfg.output {
            if out.is_relative() {
                cfg.output = Some(path.parent().unwrap_or(Path::new(".")).join(out));
            }
        }
        Ok(cfg)
    }

    pub fn binary(&self) -> BinaryGenConfig {
        BinaryGenConfig {
            m: self.m,
            n: self.n,
            r: self.r,
            delta: self.delta,
            rho_high: self.rho_high,
            rho_low: self.rho_low,
            seed: self.seed,
        }
    }
}
