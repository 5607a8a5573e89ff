//! Per-gene boundary characterization and directed initial sampling.
//!
//! With every other gene at identity, each gene is pushed toward stronger
//! compression until the accuracy threshold breaks. The resulting bound
//! vector `theta` (maximum pruning rate, minimum encoded rank) confines the
//! initial population to the region that can still meet the threshold.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::AccuracyOracle;
use crate::genotype::{decode, GeneDomain, Individual, Method, SearchSpace};
use crate::scoring::Accuracy;

/// Default number of grid steps over `[0, 1]` for continuous genes.
pub const DEFAULT_RESOLUTION_STEPS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundsVector {
    pub theta: Vec<f64>,
}

impl BoundsVector {
    /// Bounds that exclude nothing.
    pub fn unconstrained(space: &SearchSpace) -> Self {
        BoundsVector {
            theta: space
                .genes()
                .iter()
                .map(|g| match g.domain {
                    GeneDomain::Continuous => 1.0,
                    GeneDomain::Discrete { .. } => 1.0,
                })
                .collect(),
        }
    }

    pub fn check(&self, space: &SearchSpace) -> Result<()> {
        space.check(&self.theta)
    }
}

/// Outcome of [`characterize_bounds`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub bounds: BoundsVector,
    /// Oracle probes spent per gene, excluding the shared identity probe.
    pub probes: Vec<usize>,
    pub identity_accuracy: f64,
}

/// Number of compression levels above identity for a gene.
fn max_level(domain: &GeneDomain, steps: u32) -> u32 {
    match *domain {
        GeneDomain::Continuous => steps,
        GeneDomain::Discrete { max } => max - 1,
    }
}

/// Gene value at compression level `level` (0 = identity).
fn level_value(domain: &GeneDomain, level: u32, steps: u32) -> f64 {
    match *domain {
        GeneDomain::Continuous => level as f64 / steps as f64,
        GeneDomain::Discrete { max } => (max - level) as f64,
    }
}

#[derive(Debug, Clone, Copy)]
enum Search {
    Top,
    Bisect { feasible: u32, infeasible: u32 },
    Done(u32),
}

/// Binary-searches each gene alone for the strongest compression that keeps
/// accuracy strictly above `threshold`, at `steps` grid points over `[0, 1]`
/// for continuous genes and unit steps for discrete genes. The searches for
/// all genes run in lockstep, one oracle batch per round.
///
/// Assumes accuracy is monotone in each gene. On a non-monotone oracle the
/// result is still feasible but may not be the extreme.
pub fn characterize_bounds(
    space: &SearchSpace,
    oracle: &mut dyn AccuracyOracle,
    threshold: Accuracy,
    steps: u32,
) -> Result<BoundsReport> {
    if steps == 0 {
        return Err(Error::config(
            "bounds resolution must have at least one step",
        ));
    }
    let d = space.dim();
    let identity = space.identity();
    let probe_spec = |gene: usize, level: u32| {
        let mut values = identity.values().to_vec();
        values[gene] = level_value(&space.gene(gene).domain, level, steps);
        decode(space, &Individual::new(space, values)?)
    };
    let feasible = |a: &Accuracy| a.value() > threshold.value();

    let mut state: Vec<Search> = space
        .genes()
        .iter()
        .map(|g| {
            if max_level(&g.domain, steps) == 0 {
                Search::Done(0)
            } else {
                Search::Top
            }
        })
        .collect();
    let mut probes = vec![0usize; d];

    // first round: identity plus the strongest setting of every gene
    let mut batch = vec![decode(space, &identity)?];
    let mut owners = Vec::new();
    for (i, s) in state.iter().enumerate() {
        if let Search::Top = s {
            batch.push(probe_spec(i, max_level(&space.gene(i).domain, steps))?);
            owners.push(i);
        }
    }
    let results = oracle.evaluate_batch(&batch)?;
    check_len(&results, batch.len())?;
    let identity_accuracy = results[0];
    if !feasible(&identity_accuracy) {
        return Err(Error::config(format!(
            "accuracy threshold {} is not met by the uncompressed model (accuracy {})",
            threshold.value(),
            identity_accuracy.value()
        )));
    }
    for (&i, acc) in owners.iter().zip(&results[1..]) {
        probes[i] += 1;
        let top = max_level(&space.gene(i).domain, steps);
        state[i] = if feasible(acc) {
            Search::Done(top)
        } else {
            narrow(0, top)
        };
    }

    loop {
        let mut batch = Vec::new();
        let mut owners = Vec::new();
        for (i, s) in state.iter().enumerate() {
            if let Search::Bisect {
                feasible,
                infeasible,
            } = *s
            {
                let mid = feasible + (infeasible - feasible) / 2;
                batch.push(probe_spec(i, mid)?);
                owners.push((i, mid));
            }
        }
        if batch.is_empty() {
            break;
        }
        let results = oracle.evaluate_batch(&batch)?;
        check_len(&results, batch.len())?;
        for (&(i, mid), acc) in owners.iter().zip(&results) {
            probes[i] += 1;
            if let Search::Bisect {
                feasible: lo,
                infeasible: hi,
            } = state[i]
            {
                state[i] = if feasible(acc) {
                    narrow(mid, hi)
                } else {
                    narrow(lo, mid)
                };
            }
        }
    }

    let theta = state
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Search::Done(level) => Ok(level_value(&space.gene(i).domain, *level, steps)),
            _ => Err(Error::Invariant(format!(
                "bound search for gene {i} did not finish"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundsReport {
        bounds: BoundsVector { theta },
        probes,
        identity_accuracy: identity_accuracy.value(),
    })
}

fn narrow(feasible: u32, infeasible: u32) -> Search {
    if infeasible - feasible <= 1 {
        Search::Done(feasible)
    } else {
        Search::Bisect {
            feasible,
            infeasible,
        }
    }
}

fn check_len(results: &[Accuracy], expected: usize) -> Result<()> {
    if results.len() != expected {
        return Err(Error::oracle(format!(
            "oracle returned {} results for {expected} specs",
            results.len()
        )));
    }
    Ok(())
}

/// Fraction of the search volume left inside the bounds: `theta` for
/// continuous genes, `(K - theta + 1) / K` for discrete genes, multiplied
/// over all genes.
pub fn search_volume_reduction(space: &SearchSpace, theta: &BoundsVector) -> Result<f64> {
    theta.check(space)?;
    Ok(space
        .genes()
        .iter()
        .zip(&theta.theta)
        .map(|(g, &t)| match g.domain {
            GeneDomain::Continuous => t,
            GeneDomain::Discrete { max } => (max as f64 - t + 1.0) / max as f64,
        })
        .product())
}

/// Directed initial population. Continuous gene `i` is drawn from a normal
/// with mean and standard deviation `theta[i] / 2`, clipped to
/// `[0, theta[i]]`; discrete gene `i` is uniform over `theta[i]..=K`.
pub fn sample_initial<R: Rng + ?Sized>(
    space: &SearchSpace,
    theta: &BoundsVector,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    theta.check(space)?;
    let pop = (0..n)
        .map(|_| {
            let values = space
                .genes()
                .iter()
                .zip(&theta.theta)
                .map(|(g, &t)| match g.domain {
                    GeneDomain::Continuous => {
                        let z: f64 = rng.sample(StandardNormal);
                        (t / 2.0 + t / 2.0 * z).clamp(0.0, t)
                    }
                    GeneDomain::Discrete { max } => rng.random_range(t as u32..=max) as f64,
                })
                .collect();
            Individual::from_values_unchecked(values)
        })
        .collect();
    Ok(pop)
}

/// Uniform initial population over the whole space.
pub fn sample_uniform<R: Rng + ?Sized>(
    space: &SearchSpace,
    n: usize,
    rng: &mut R,
) -> Vec<Individual> {
    (0..n)
        .map(|_| {
            let values = space
                .genes()
                .iter()
                .map(|g| match g.domain {
                    GeneDomain::Continuous => rng.random::<f64>(),
                    GeneDomain::Discrete { max } => rng.random_range(1..=max) as f64,
                })
                .collect();
            Individual::from_values_unchecked(values)
        })
        .collect()
}

/// On-disk record of a bounds run, reusable by a later optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub arch: String,
    pub methods: Vec<Method>,
    pub acc_thr: f64,
    pub resolution_steps: u32,
    pub identity_accuracy: f64,
    pub theta: Vec<f64>,
    pub probes: Vec<usize>,
}

impl BoundsFile {
    pub fn new(space: &SearchSpace, acc_thr: Accuracy, steps: u32, report: &BoundsReport) -> Self {
        BoundsFile {
            arch: space.arch().name.clone(),
            methods: space.methods().to_vec(),
            acc_thr: acc_thr.value(),
            resolution_steps: steps,
            identity_accuracy: report.identity_accuracy,
            theta: report.bounds.theta.clone(),
            probes: report.probes.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("bounds serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// The bound vector, after checking it belongs to `space`.
    pub fn bounds_for(&self, space: &SearchSpace) -> Result<BoundsVector> {
        if self.methods != space.methods() {
            return Err(Error::config(format!(
                "bounds were computed for methods {:?}, run uses {:?}",
                self.methods,
                space.methods()
            )));
        }
        let b = BoundsVector {
            theta: self.theta.clone(),
        };
        b.check(space)?;
        Ok(b)
    }
}
