//! Analytic FLOPs / parameter accounting for original and compressed chains.
//!
//! FLOPs are counted as multiply-accumulates (one MAC = one FLOP). Bias and
//! activation work is ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{CompressedModelSpec, Decomposition, LayerKind, LayerSpec, ModelArch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    #[default]
    Flops,
    Params,
}

impl std::str::FromStr for CostMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flops" => Ok(CostMetric::Flops),
            "params" => Ok(CostMetric::Params),
            other => Err(Error::config(format!("unknown cost metric '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub metric: CostMetric,
    pub total: u64,
    pub per_layer: Vec<u64>,
    pub original_total: u64,
    pub original_per_layer: Vec<u64>,
    /// `(C(M) - C(M_hat)) / C(M)`.
    pub delta_c: f64,
}

impl CostReport {
    /// Fraction of each layer's original cost that was removed.
    pub fn pruned_fraction(&self) -> Vec<f64> {
        self.per_layer
            .iter()
            .zip(&self.original_per_layer)
            .map(|(&c, &o)| {
                if o == 0 {
                    0.0
                } else {
                    1.0 - c as f64 / o as f64
                }
            })
            .collect()
    }
}

/// Dense cost of an uncompressed layer.
pub fn layer_cost(layer: &LayerSpec, metric: CostMetric) -> u64 {
    dense_cost(layer, layer.in_channels, layer.out_channels, metric)
}

fn spatial_factor(layer: &LayerSpec, metric: CostMetric) -> u64 {
    match metric {
        CostMetric::Flops => layer.spatial(),
        CostMetric::Params => 1,
    }
}

fn dense_cost(layer: &LayerSpec, c: u64, f: u64, metric: CostMetric) -> u64 {
    let k2 = layer.kernel * layer.kernel;
    let per_position = match layer.kind {
        LayerKind::DepthwiseConv => k2 * c.min(f),
        _ => k2 * c * f,
    };
    per_position * spatial_factor(layer, metric)
}

/// `c_eff` for a layer whose predecessor kept `prev_kept` of its
/// `prev_total` output channels. Handles flattening (c a multiple of the
/// predecessor's f) by scaling proportionally.
fn inherited_inputs(c: u64, prev_total: u64, prev_kept: u64) -> u64 {
    if c == prev_total {
        prev_kept
    } else {
        c * prev_kept / prev_total
    }
}

fn floor_fraction(rate: f64, n: u64) -> u64 {
    ((rate * n as f64).floor() as u64).min(n)
}

/// Cost of `arch` compressed according to `spec`.
pub fn compressed_cost(
    arch: &ModelArch,
    spec: &CompressedModelSpec,
    metric: CostMetric,
) -> Result<CostReport> {
    if spec.layers.len() != arch.len() {
        return Err(Error::Dimension {
            expected: arch.len(),
            actual: spec.layers.len(),
        });
    }
    let original_per_layer: Vec<u64> = arch.layers.iter().map(|l| layer_cost(l, metric)).collect();
    let original_total: u64 = original_per_layer.iter().sum();

    let mut per_layer = Vec::with_capacity(arch.len());
    // (original f, kept f) of the predecessor when it propagates pruning
    let mut carried: Option<(u64, u64)> = None;
    for (layer, t) in arch.layers.iter().zip(&spec.layers) {
        let c_eff = match carried {
            Some((total, kept)) => inherited_inputs(layer.in_channels, total, kept),
            None => layer.in_channels,
        };
        let mut f_eff = layer.out_channels;
        let structured = t.pruning.filter(|p| p.structured);
        if let Some(p) = structured {
            f_eff -= floor_fraction(p.rate, layer.out_channels);
        }
        if layer.kind == LayerKind::DepthwiseConv {
            f_eff = f_eff.min(c_eff);
        }

        let dense = dense_cost(layer, c_eff, f_eff, metric);
        let mut cost = match t.decomposition {
            None => dense,
            Some(d) => {
                let k2 = layer.kernel * layer.kernel;
                let per_position = match d {
                    Decomposition::Svd { rank } => rank * (c_eff + f_eff),
                    Decomposition::Tucker { rank_in, rank_out } => {
                        c_eff * rank_in + k2 * rank_in * rank_out + rank_out * f_eff
                    }
                };
                (per_position * spatial_factor(layer, metric)).min(dense)
            }
        };
        if let Some(p) = t.pruning.filter(|p| !p.structured) {
            if metric == CostMetric::Params {
                cost -= floor_fraction(p.rate, cost);
            }
        }
        per_layer.push(cost);
        carried = layer
            .propagate_pruning
            .then_some((layer.out_channels, f_eff));
    }

    let total: u64 = per_layer.iter().sum();
    let delta_c = if original_total == 0 {
        0.0
    } else {
        (original_total as f64 - total as f64) / original_total as f64
    };
    Ok(CostReport {
        metric,
        total,
        per_layer,
        original_total,
        original_per_layer,
        delta_c,
    })
}
