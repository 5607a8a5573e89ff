//! Run configuration file.
//!
//! ```json
//! {
//!   "arch": "vgg16.json",
//!   "methods": ["structured_pruning"],
//!   "metric": "flops",
//!   "acc_thr": 80.0,
//!   "ga": {"population_size": 50, "iterations": 50, "rng_seed": 1},
//!   "oracle": {"surrogate": "surrogate.json"},
//!   "init": "directed",
//!   "bounds": "compute",
//!   "bounds_resolution_steps": 64,
//!   "checkpoint_every": 10,
//!   "output_dir": "run"
//! }
//! ```
//!
//! `arch` and the surrogate may be given inline instead of as paths.
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundsFile, DEFAULT_RESOLUTION_STEPS};
use crate::costmodel::CostMetric;
use crate::engine::{BoundsSource, CheckpointPolicy, EngineSettings, InitStrategy};
use crate::error::{Error, Result};
use crate::evaluator::{AccuracyOracle, SurrogateModel, SurrogateOracle, WorkerPoolConfig};
use crate::genetic::GaConfig;
use crate::genotype::{build_search_space, Method, ModelArch, SearchSpace};
use crate::scoring::Accuracy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchRef {
    Path(PathBuf),
    Inline(ModelArch),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurrogateRef {
    Path(PathBuf),
    Inline(SurrogateModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleConfig {
    Surrogate(SurrogateRef),
    Workers(WorkerPoolConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsConfig {
    Compute,
    Load(PathBuf),
}

fn default_steps() -> u32 {
    DEFAULT_RESOLUTION_STEPS
}

fn default_output() -> PathBuf {
    PathBuf::from("run")
}

fn default_bounds() -> BoundsConfig {
    BoundsConfig::Compute
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub arch: ArchRef,
    pub methods: Vec<String>,
    #[serde(default)]
    pub metric: CostMetric,
    pub acc_thr: f64,
    #[serde(default)]
    pub ga: GaConfig,
    pub oracle: OracleConfig,
    #[serde(default)]
    pub init: InitStrategy,
    #[serde(default = "default_bounds")]
    pub bounds: BoundsConfig,
    #[serde(default = "default_steps")]
    pub bounds_resolution_steps: u32,
    /// Iterations between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("run config: {e}")))
    }

    /// Reads a config file and makes its relative paths absolute.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ArchRef::Path(p) = &mut self.arch {
            fix(p);
        }
        if let OracleConfig::Surrogate(SurrogateRef::Path(p)) = &mut self.oracle {
            fix(p);
        }
        if let BoundsConfig::Load(p) = &mut self.bounds {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    pub fn load_arch(&self) -> Result<ModelArch> {
        match &self.arch {
            ArchRef::Path(p) => ModelArch::load(p),
            ArchRef::Inline(a) => Ok(a.clone()),
        }
    }

    pub fn parse_methods(&self) -> Result<Vec<Method>> {
        let methods = Method::parse_list(&self.methods.join(","))?;
        if methods.is_empty() {
            return Err(Error::config(
                "methods must name at least one compression method",
            ));
        }
        Ok(methods)
    }

    /// Validates everything that can be checked without touching the oracle
    /// and reports every problem at once.
    pub fn prepare(&self) -> Result<PreparedRun> {
        let mut problems = Vec::new();
        let arch = self
            .load_arch()
            .map_err(|e| problems.push(e.to_string()))
            .ok();
        let methods = self
            .parse_methods()
            .map_err(|e| problems.push(e.to_string()))
            .ok();
        let acc_thr = Accuracy::new(self.acc_thr)
            .map_err(|_| problems.push(format!("acc_thr {} outside [0, 100]", self.acc_thr)))
            .ok();
        let space = match (&arch, &methods) {
            (Some(a), Some(m)) => build_search_space(a, m)
                .map_err(|e| problems.push(e.to_string()))
                .ok(),
            _ => None,
        };
        let surrogate = match &self.oracle {
            OracleConfig::Surrogate(r) => {
                let model = match r {
                    SurrogateRef::Path(p) => SurrogateModel::load(p),
                    SurrogateRef::Inline(m) => m.validate(None).map(|_| m.clone()),
                };
                match (model, &space) {
                    (Ok(m), Some(s)) => match m.validate(Some(s.dim())) {
                        Ok(()) => Some(m),
                        Err(e) => {
                            problems.push(e.to_string());
                            None
                        }
                    },
                    (Ok(m), None) => Some(m),
                    (Err(e), _) => {
                        problems.push(e.to_string());
                        None
                    }
                }
            }
            OracleConfig::Workers(w) => {
                problems.extend(w.problems());
                None
            }
        };
        let bounds = match (&self.bounds, self.init) {
            (_, InitStrategy::Naive) | (BoundsConfig::Compute, _) => BoundsSource::Compute {
                steps: self.bounds_resolution_steps,
            },
            (BoundsConfig::Load(p), InitStrategy::Directed) => {
                match BoundsFile::load(p).and_then(|f| match &space {
                    Some(s) => {
                        if s.arch().name != f.arch {
                            return Err(Error::config(format!(
                                "bounds file {} is for architecture '{}', not '{}'",
                                p.display(),
                                f.arch,
                                s.arch().name
                            )));
                        }
                        f.bounds_for(s).map(Some)
                    }
                    None => Ok(None),
                }) {
                    Ok(Some(b)) => BoundsSource::Provided(b),
                    Ok(None) => BoundsSource::Compute { steps: 1 },
                    Err(e) => {
                        problems.push(e.to_string());
                        BoundsSource::Compute { steps: 1 }
                    }
                }
            }
        };
        let checkpoint = (self.checkpoint_every > 0).then(|| CheckpointPolicy {
            every: self.checkpoint_every,
            dir: self.output_dir.join("checkpoints"),
        });

        let (Some(space), Some(acc_thr)) = (space, acc_thr) else {
            problems.extend(self.ga.problems());
            return Err(Error::ConfigList(problems));
        };
        let settings = EngineSettings {
            metric: self.metric,
            acc_thr,
            ga: self.ga.clone(),
            init: self.init,
            bounds,
            checkpoint,
        };
        problems.extend(settings.problems(&space));
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        Ok(PreparedRun {
            space,
            settings,
            surrogate,
            workers: match &self.oracle {
                OracleConfig::Workers(w) => Some(w.clone()),
                OracleConfig::Surrogate(_) => None,
            },
        })
    }
}

/// A validated configuration, ready to connect its oracle and run.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub space: SearchSpace,
    pub settings: EngineSettings,
    pub surrogate: Option<SurrogateModel>,
    pub workers: Option<WorkerPoolConfig>,
}

impl PreparedRun {
    pub fn connect_oracle(&self) -> Result<Box<dyn AccuracyOracle>> {
        if let Some(model) = &self.surrogate {
            return Ok(Box::new(SurrogateOracle::new(model.clone(), &self.space)?));
        }
        let workers = self
            .workers
            .as_ref()
            .ok_or_else(|| Error::config("no oracle configured"))?
            .clone()
            .with_env_override()?;
        Ok(Box::new(workers.connect(&self.space.arch().name)?))
    }
}
