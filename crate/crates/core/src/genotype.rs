//! Search space over per-layer compression hyperparameters.
//!
//! A [`ModelArch`] is an ordered chain of weighted layers. Choosing a set of
//! compression [`Method`]s turns it into a [`SearchSpace`]: one gene per
//! (layer, hyperparameter). An [`Individual`] is a point in that space and
//! [`decode`] maps it to a [`CompressedModelSpec`], the per-layer list of
//! transformations a downstream evaluator applies.
//!
//! Gene layout is fixed: every decomposition gene in layer order, then every
//! pruning gene in layer order. Within a Tucker-2 layer the input-rank gene
//! precedes the output-rank gene.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of encoded bins for an SVD rank gene.
pub const SVD_BINS: u32 = 64;
/// Number of encoded bins for each Tucker-2 rank gene.
pub const TUCKER_BINS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    PointwiseConv,
    DepthwiseConv,
    FullyConnected,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerKind::Conv => "conv",
            LayerKind::PointwiseConv => "pointwise_conv",
            LayerKind::DepthwiseConv => "depthwise_conv",
            LayerKind::FullyConnected => "fully_connected",
        };
        f.write_str(s)
    }
}

/// One weighted layer of the uncompressed network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLayer", into = "RawLayer")]
pub struct LayerSpec {
    pub index: usize,
    pub kind: LayerKind,
    pub kernel: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub out_h: u64,
    pub out_w: u64,
    /// Whether removing this layer's output channels removes the matching
    /// input work of the next layer.
    pub propagate_pruning: bool,
}

impl LayerSpec {
    pub fn new(
        kind: LayerKind,
        kernel: u64,
        in_channels: u64,
        out_channels: u64,
        out_h: u64,
        out_w: u64,
    ) -> Result<Self> {
        let layer = LayerSpec {
            index: 0,
            kind,
            kernel,
            in_channels,
            out_channels,
            out_h,
            out_w,
            propagate_pruning: true,
        };
        layer.validate().map_err(Error::Config)?;
        Ok(layer)
    }

    pub fn conv(k: u64, c: u64, f: u64, h: u64, w: u64) -> Result<Self> {
        Self::new(LayerKind::Conv, k, c, f, h, w)
    }

    pub fn pointwise(c: u64, f: u64, h: u64, w: u64) -> Result<Self> {
        Self::new(LayerKind::PointwiseConv, 1, c, f, h, w)
    }

    pub fn depthwise(k: u64, c: u64, h: u64, w: u64) -> Result<Self> {
        Self::new(LayerKind::DepthwiseConv, k, c, c, h, w)
    }

    pub fn fully_connected(c: u64, f: u64) -> Result<Self> {
        Self::new(LayerKind::FullyConnected, 1, c, f, 1, 1)
    }

    pub fn with_propagation(mut self, propagate: bool) -> Self {
        self.propagate_pruning = propagate;
        self
    }

    pub fn spatial(&self) -> u64 {
        self.out_h * self.out_w
    }

    /// Full SVD rank `min(c, f)`.
    pub fn full_rank(&self) -> u64 {
        self.in_channels.min(self.out_channels)
    }

    pub fn svd_eligible(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::FullyConnected | LayerKind::PointwiseConv
        )
    }

    pub fn tucker_eligible(&self) -> bool {
        self.kind == LayerKind::Conv && self.kernel > 1
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let dims = [
            ("k", self.kernel),
            ("c", self.in_channels),
            ("f", self.out_channels),
            ("h_out", self.out_h),
            ("w_out", self.out_w),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(format!("{} layer: {name} must be positive", self.kind));
            }
        }
        match self.kind {
            LayerKind::PointwiseConv if self.kernel != 1 => {
                return Err("pointwise_conv layer must have k = 1".into());
            }
            LayerKind::FullyConnected if self.kernel != 1 || self.out_h != 1 || self.out_w != 1 => {
                return Err("fully_connected layer must have k = 1 and h_out = w_out = 1".into());
            }
            LayerKind::DepthwiseConv if self.in_channels != self.out_channels => {
                return Err("depthwise_conv layer must have c = f".into());
            }
            _ => {}
        }
        // Dense cost must fit comfortably in a u64.
        let product = [
            self.kernel,
            self.kernel,
            self.in_channels,
            self.out_channels,
            self.out_h,
            self.out_w,
        ]
        .iter()
        .try_fold(1u64, |acc, &v| acc.checked_mul(v))
        .and_then(|p| p.checked_mul(16));
        if product.is_none() {
            return Err(format!(
                "{} layer: dimensions overflow cost arithmetic",
                self.kind
            ));
        }
        Ok(())
    }
}

/// On-disk layer record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    kind: LayerKind,
    #[serde(default = "one")]
    k: u64,
    c: u64,
    f: u64,
    #[serde(default = "one")]
    h_out: u64,
    #[serde(default = "one")]
    w_out: u64,
    #[serde(default = "yes")]
    propagate_pruning: bool,
}

fn one() -> u64 {
    1
}

fn yes() -> bool {
    true
}

impl TryFrom<RawLayer> for LayerSpec {
    type Error = String;

    fn try_from(raw: RawLayer) -> std::result::Result<Self, String> {
        let layer = LayerSpec {
            index: 0,
            kind: raw.kind,
            kernel: raw.k,
            in_channels: raw.c,
            out_channels: raw.f,
            out_h: raw.h_out,
            out_w: raw.w_out,
            propagate_pruning: raw.propagate_pruning,
        };
        layer.validate()?;
        Ok(layer)
    }
}

impl From<LayerSpec> for RawLayer {
    fn from(l: LayerSpec) -> Self {
        RawLayer {
            kind: l.kind,
            k: l.kernel,
            c: l.in_channels,
            f: l.out_channels,
            h_out: l.out_h,
            w_out: l.out_w,
            propagate_pruning: l.propagate_pruning,
        }
    }
}

/// The uncompressed network, as an ordered chain of layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawArch")]
pub struct ModelArch {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArch {
    name: String,
    layers: Vec<RawLayer>,
}

impl TryFrom<RawArch> for ModelArch {
    type Error = String;

    fn try_from(raw: RawArch) -> std::result::Result<Self, String> {
        if raw.layers.is_empty() {
            return Err("architecture must contain at least one layer".into());
        }
        let layers = raw
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| LayerSpec::try_from(l).map_err(|e| format!("layer {i}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ModelArch::from_layers_unchecked(raw.name, layers))
    }
}

impl ModelArch {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config(
                "architecture must contain at least one layer",
            ));
        }
        Ok(Self::from_layers_unchecked(name.into(), layers))
    }

    fn from_layers_unchecked(name: String, mut layers: Vec<LayerSpec>) -> Self {
        for (i, layer) in layers.iter_mut().enumerate() {
            layer.index = i;
        }
        ModelArch { name, layers }
    }

    /// Parses an architecture document. Errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("architecture: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("architecture serializes")
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// User-facing compression method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    StructuredPruning,
    NonstructuredPruning,
    Svd,
    Tucker2,
}

impl Method {
    /// Parses a comma separated method list. `decomposition` expands to
    /// `svd,tucker2`.
    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "structured_pruning" | "pruning" => out.push(Method::StructuredPruning),
                "nonstructured_pruning" => out.push(Method::NonstructuredPruning),
                "svd" => out.push(Method::Svd),
                "tucker2" | "tucker" => out.push(Method::Tucker2),
                "decomposition" => out.extend([Method::Svd, Method::Tucker2]),
                other => {
                    return Err(Error::config(format!(
                        "unknown compression method '{other}'"
                    )))
                }
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn is_pruning(self) -> bool {
        matches!(
            self,
            Method::StructuredPruning | Method::NonstructuredPruning
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::StructuredPruning => "structured_pruning",
            Method::NonstructuredPruning => "nonstructured_pruning",
            Method::Svd => "svd",
            Method::Tucker2 => "tucker2",
        };
        f.write_str(s)
    }
}

/// What a single gene controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneKind {
    PruneStructured,
    PruneNonstructured,
    SvdRank,
    TuckerRankIn,
    TuckerRankOut,
}

impl GeneKind {
    pub fn is_pruning(self) -> bool {
        matches!(
            self,
            GeneKind::PruneStructured | GeneKind::PruneNonstructured
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneDomain {
    /// Real value in `[0, 1]`.
    Continuous,
    /// Integer value in `1..=max`.
    Discrete { max: u32 },
}

impl GeneDomain {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            GeneDomain::Continuous => (0.0..=1.0).contains(&v),
            GeneDomain::Discrete { max } => v.fract() == 0.0 && v >= 1.0 && v <= max as f64,
        }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        match *self {
            GeneDomain::Continuous => {
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(0.0, 1.0)
                }
            }
            GeneDomain::Discrete { max } => {
                if v.is_nan() {
                    1.0
                } else {
                    v.round().clamp(1.0, max as f64)
                }
            }
        }
    }

    /// Normalization constant: 1 for continuous genes, `K` for discrete.
    pub fn scale(&self) -> f64 {
        match *self {
            GeneDomain::Continuous => 1.0,
            GeneDomain::Discrete { max } => max as f64,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, GeneDomain::Discrete { .. })
    }
}

impl fmt::Display for GeneDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneDomain::Continuous => f.write_str("[0, 1]"),
            GeneDomain::Discrete { max } => write!(f, "{{1..{max}}}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneSpec {
    pub layer_index: usize,
    pub kind: GeneKind,
    pub domain: GeneDomain,
}

impl GeneSpec {
    pub fn new(layer_index: usize, kind: GeneKind) -> Self {
        let domain = match kind {
            GeneKind::PruneStructured | GeneKind::PruneNonstructured => GeneDomain::Continuous,
            GeneKind::SvdRank => GeneDomain::Discrete { max: SVD_BINS },
            GeneKind::TuckerRankIn | GeneKind::TuckerRankOut => {
                GeneDomain::Discrete { max: TUCKER_BINS }
            }
        };
        GeneSpec {
            layer_index,
            kind,
            domain,
        }
    }

    /// Gene value that leaves its layer uncompressed.
    pub fn identity_value(&self) -> f64 {
        match self.domain {
            GeneDomain::Continuous => 0.0,
            GeneDomain::Discrete { max } => max as f64,
        }
    }
}

/// Ordered gene list derived from an architecture and a method set.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    arch: ModelArch,
    methods: Vec<Method>,
    genes: Vec<GeneSpec>,
}

impl SearchSpace {
    pub fn arch(&self) -> &ModelArch {
        &self.arch
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn genes(&self) -> &[GeneSpec] {
        &self.genes
    }

    pub fn gene(&self, i: usize) -> &GeneSpec {
        &self.genes[i]
    }

    /// Dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.genes.len()
    }

    /// Per-gene normalization constant `K_i`.
    pub fn scale(&self, i: usize) -> f64 {
        self.genes[i].domain.scale()
    }

    /// The individual that decodes to the uncompressed model.
    pub fn identity(&self) -> Individual {
        Individual {
            values: self.genes.iter().map(GeneSpec::identity_value).collect(),
        }
    }

    pub fn has_continuous(&self) -> bool {
        self.genes.iter().any(|g| !g.domain.is_discrete())
    }

    pub fn has_discrete(&self) -> bool {
        self.genes.iter().any(|g| g.domain.is_discrete())
    }

    /// Checks that every entry of `values` lies in its gene domain.
    pub fn check(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: values.len(),
            });
        }
        for (i, (v, g)) in values.iter().zip(&self.genes).enumerate() {
            if !g.domain.contains(*v) {
                return Err(Error::Domain {
                    gene: i,
                    value: *v,
                    domain: g.domain.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Builds the search space for `methods` over `arch`.
pub fn build_search_space(arch: &ModelArch, methods: &[Method]) -> Result<SearchSpace> {
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    if methods.is_empty() {
        return Err(Error::config("at least one compression method is required"));
    }
    if methods.contains(&Method::StructuredPruning)
        && methods.contains(&Method::NonstructuredPruning)
    {
        return Err(Error::config(
            "structured and non-structured pruning cannot be combined in one search space",
        ));
    }
    for &m in &methods {
        let eligible = arch.layers.iter().any(|l| match m {
            Method::Svd => l.svd_eligible(),
            Method::Tucker2 => l.tucker_eligible(),
            Method::StructuredPruning | Method::NonstructuredPruning => true,
        });
        if !eligible {
            let need = match m {
                Method::Svd => "a fully_connected or pointwise_conv layer",
                Method::Tucker2 => "a conv layer with k > 1",
                _ => "a weighted layer",
            };
            return Err(Error::config(format!(
                "method {m} has no eligible layer in '{}' (needs {need})",
                arch.name
            )));
        }
    }

    let svd = methods.contains(&Method::Svd);
    let tucker = methods.contains(&Method::Tucker2);
    let mut genes = Vec::new();
    for layer in &arch.layers {
        if svd && layer.svd_eligible() {
            genes.push(GeneSpec::new(layer.index, GeneKind::SvdRank));
        }
        if tucker && layer.tucker_eligible() {
            genes.push(GeneSpec::new(layer.index, GeneKind::TuckerRankIn));
            genes.push(GeneSpec::new(layer.index, GeneKind::TuckerRankOut));
        }
    }
    let prune_kind = if methods.contains(&Method::StructuredPruning) {
        Some(GeneKind::PruneStructured)
    } else if methods.contains(&Method::NonstructuredPruning) {
        Some(GeneKind::PruneNonstructured)
    } else {
        None
    };
    if let Some(kind) = prune_kind {
        genes.extend(arch.layers.iter().map(|l| GeneSpec::new(l.index, kind)));
    }

    Ok(SearchSpace {
        arch: arch.clone(),
        methods,
        genes,
    })
}

/// A genotype: one value per gene, every value inside its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Individual {
    values: Vec<f64>,
}

impl Individual {
    /// Validating constructor.
    pub fn new(space: &SearchSpace, values: Vec<f64>) -> Result<Self> {
        space.check(&values)?;
        Ok(Individual { values })
    }

    /// Caller guarantees every value is in-domain.
    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Individual { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl std::ops::Index<usize> for Individual {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Projects a raw vector onto the search space: continuous entries clipped
/// to `[0, 1]`, discrete entries rounded then clipped to `[1, K]`.
pub fn clamp_to_domain(space: &SearchSpace, raw: &[f64]) -> Result<Individual> {
    if raw.len() != space.dim() {
        return Err(Error::Dimension {
            expected: space.dim(),
            actual: raw.len(),
        });
    }
    let values = raw
        .iter()
        .zip(space.genes())
        .map(|(&v, g)| g.domain.clamp(v))
        .collect();
    Ok(Individual { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    Svd { rank: u64 },
    Tucker { rank_in: u64, rank_out: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pruning {
    pub structured: bool,
    /// Fraction of channels (structured) or weights (non-structured) removed.
    pub rate: f64,
}

/// Transformations applied to one layer. Decomposition is applied first,
/// pruning second. Both `None` means the layer is left untouched.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerTransform {
    pub decomposition: Option<Decomposition>,
    pub pruning: Option<Pruning>,
}

impl LayerTransform {
    pub fn is_unmodified(&self) -> bool {
        self.decomposition.is_none() && self.pruning.is_none()
    }
}

/// Concrete per-layer compression plan for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompressedModelSpec {
    pub layers: Vec<LayerTransform>,
}

impl CompressedModelSpec {
    pub fn identity(n_layers: usize) -> Self {
        CompressedModelSpec {
            layers: vec![LayerTransform::default(); n_layers],
        }
    }

    /// Checks that ranks, rates and transform kinds are realizable on `arch`.
    pub fn validate(&self, arch: &ModelArch) -> Result<()> {
        if self.layers.len() != arch.len() {
            return Err(Error::Dimension {
                expected: arch.len(),
                actual: self.layers.len(),
            });
        }
        for (t, l) in self.layers.iter().zip(&arch.layers) {
            let bad = |msg: String| Error::config(format!("layer {}: {msg}", l.index));
            match t.decomposition {
                Some(Decomposition::Svd { rank }) => {
                    if !l.svd_eligible() {
                        return Err(bad(format!("svd not applicable to {}", l.kind)));
                    }
                    if rank == 0 || rank > l.full_rank() {
                        return Err(bad(format!(
                            "svd rank {rank} outside 1..={}",
                            l.full_rank()
                        )));
                    }
                }
                Some(Decomposition::Tucker { rank_in, rank_out }) => {
                    if !l.tucker_eligible() {
                        return Err(bad(format!(
                            "tucker-2 not applicable to {} k={}",
                            l.kind, l.kernel
                        )));
                    }
                    if rank_in == 0
                        || rank_in > l.in_channels
                        || rank_out == 0
                        || rank_out > l.out_channels
                    {
                        return Err(bad(format!(
                            "tucker ranks ({rank_in}, {rank_out}) out of range"
                        )));
                    }
                }
                None => {}
            }
            if let Some(p) = t.pruning {
                if !(0.0..=1.0).contains(&p.rate) {
                    return Err(bad(format!("pruning rate {} outside [0, 1]", p.rate)));
                }
            }
        }
        Ok(())
    }
}

/// Rank for encoded `bin` out of `bins` over full rank `full`:
/// `max(1, round_half_up(bin * full / bins))`.
pub fn dequantize_rank(bin: u32, bins: u32, full: u64) -> u64 {
    let num = 2 * bin as u64 * full + bins as u64;
    (num / (2 * bins as u64)).max(1)
}

/// Decodes an individual into its compressed-model plan.
pub fn decode(space: &SearchSpace, x: &Individual) -> Result<CompressedModelSpec> {
    space.check(x.values())?;
    let arch = space.arch();
    let mut spec = CompressedModelSpec::identity(arch.len());
    let genes = space.genes();
    let mut i = 0;
    while i < genes.len() {
        let g = &genes[i];
        let layer = &arch.layers[g.layer_index];
        let slot = &mut spec.layers[g.layer_index];
        let v = x[i];
        match g.kind {
            GeneKind::PruneStructured | GeneKind::PruneNonstructured => {
                slot.pruning = Some(Pruning {
                    structured: g.kind == GeneKind::PruneStructured,
                    rate: v,
                });
            }
            GeneKind::SvdRank => {
                slot.decomposition = Some(Decomposition::Svd {
                    rank: dequantize_rank(v as u32, SVD_BINS, layer.full_rank()),
                });
            }
            GeneKind::TuckerRankIn => {
                let out = genes.get(i + 1).filter(|n| {
                    n.kind == GeneKind::TuckerRankOut && n.layer_index == g.layer_index
                });
                if out.is_none() {
                    return Err(Error::Invariant(format!(
                        "tucker input-rank gene {i} lacks its output-rank partner"
                    )));
                }
                slot.decomposition = Some(Decomposition::Tucker {
                    rank_in: dequantize_rank(v as u32, TUCKER_BINS, layer.in_channels),
                    rank_out: dequantize_rank(x[i + 1] as u32, TUCKER_BINS, layer.out_channels),
                });
                i += 1;
            }
            GeneKind::TuckerRankOut => {
                return Err(Error::Invariant(format!(
                    "orphan tucker output-rank gene {i}"
                )));
            }
        }
        i += 1;
    }
    Ok(spec)
}
