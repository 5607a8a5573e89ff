//! Deterministic stand-in for held-out accuracy.
//!
//! `A = clamp(a0 - sum_i w_i g_i - sum_(i,j) v_ij g_i g_j, 0, 100)` where
//! `g_i` is the compression intensity of gene `i`: the pruning rate for
//! pruning genes and `1 - r / R` for rank genes.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::AccuracyOracle;
use crate::error::{Error, Result};
use crate::genotype::{
    decode, CompressedModelSpec, Decomposition, Individual, ModelArch, SearchSpace,
};
use crate::scoring::Accuracy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateModel {
    pub base_accuracy: f64,
    /// Per-gene sensitivity, in gene order.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
}

impl SurrogateModel {
    pub fn new(base_accuracy: f64, weights: Vec<f64>) -> Self {
        SurrogateModel {
            base_accuracy,
            weights,
            interactions: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: SurrogateModel = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        model.validate(None)?;
        Ok(model)
    }

    /// Checks weights are non-negative and finite, and that the gene count
    /// matches `dim` when given.
    pub fn validate(&self, dim: Option<usize>) -> Result<()> {
        let mut problems = Vec::new();
        if Accuracy::new(self.base_accuracy).is_err() {
            problems.push(format!(
                "base_accuracy {} outside [0, 100]",
                self.base_accuracy
            ));
        }
        if let Some(d) = dim {
            if self.weights.len() != d {
                problems.push(format!(
                    "surrogate has {} weights but the search space has {d} genes",
                    self.weights.len()
                ));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            problems.push("surrogate weights must be finite and non-negative".into());
        }
        for it in &self.interactions {
            if it.i >= self.weights.len() || it.j >= self.weights.len() {
                problems.push(format!(
                    "interaction ({}, {}) refers to a missing gene",
                    it.i, it.j
                ));
            }
            if !(it.weight.is_finite() && it.weight >= 0.0) {
                problems.push(format!(
                    "interaction ({}, {}) weight must be non-negative",
                    it.i, it.j
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }

    /// Accuracy for a vector of per-gene intensities.
    pub fn accuracy_from_intensities(&self, g: &[f64]) -> Result<Accuracy> {
        if g.len() != self.weights.len() {
            return Err(Error::Dimension {
                expected: self.weights.len(),
                actual: g.len(),
            });
        }
        let mut a = self.base_accuracy;
        for (w, gi) in self.weights.iter().zip(g) {
            a -= w * gi;
        }
        for it in &self.interactions {
            a -= it.weight * g[it.i] * g[it.j];
        }
        Accuracy::new(a.clamp(0.0, 100.0))
    }

    pub fn accuracy(&self, arch: &ModelArch, spec: &CompressedModelSpec) -> Result<Accuracy> {
        self.accuracy_from_intensities(&compression_intensities(arch, spec)?)
    }
}

/// Per-gene compression intensities in `[0, 1]`, in search-space gene order:
/// decomposition entries by layer, then pruning entries by layer.
pub fn compression_intensities(arch: &ModelArch, spec: &CompressedModelSpec) -> Result<Vec<f64>> {
    spec.validate(arch)?;
    let mut out = Vec::new();
    for (layer, t) in arch.layers.iter().zip(&spec.layers) {
        match t.decomposition {
            Some(Decomposition::Svd { rank }) => {
                out.push(1.0 - rank as f64 / layer.full_rank() as f64);
            }
            Some(Decomposition::Tucker { rank_in, rank_out }) => {
                out.push(1.0 - rank_in as f64 / layer.in_channels as f64);
                out.push(1.0 - rank_out as f64 / layer.out_channels as f64);
            }
            None => {}
        }
    }
    out.extend(spec.layers.iter().filter_map(|t| t.pruning.map(|p| p.rate)));
    Ok(out)
}

/// Surrogate accuracy of an individual.
pub fn surrogate_accuracy(
    model: &SurrogateModel,
    space: &SearchSpace,
    x: &Individual,
) -> Result<Accuracy> {
    model.accuracy(space.arch(), &decode(space, x)?)
}

/// In-process oracle backed by a [`SurrogateModel`]. An optional per-spec
/// delay emulates slow evaluation.
#[derive(Debug, Clone)]
pub struct SurrogateOracle {
    model: SurrogateModel,
    arch: ModelArch,
    delay: Option<Duration>,
    calls: usize,
}

impl SurrogateOracle {
    pub fn new(model: SurrogateModel, space: &SearchSpace) -> Result<Self> {
        model.validate(Some(space.dim()))?;
        Ok(SurrogateOracle {
            model,
            arch: space.arch().clone(),
            delay: None,
            calls: 0,
        })
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn model(&self) -> &SurrogateModel {
        &self.model
    }

    /// Number of specs evaluated so far.
    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl AccuracyOracle for SurrogateOracle {
    fn evaluate_batch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<Accuracy>> {
        specs
            .iter()
            .map(|s| {
                if let Some(d) = self.delay {
                    std::thread::sleep(d);
                }
                self.calls += 1;
                self.model.accuracy(&self.arch, s)
            })
            .collect()
    }
}
