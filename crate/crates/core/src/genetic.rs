//! Genetic operators: fitness-proportionate selection, distance-paired
//! crossover, population diversity and diversity-adaptive mutation.
//!
//! All operators take an explicit RNG. Draw order is fixed so that a seeded
//! stream reproduces a run exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{GeneDomain, Individual, SearchSpace};
use crate::scoring::selection_probs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub p_cross: f64,
    pub p_swap: f64,
    pub p_tweak: f64,
    /// Variance of the Gaussian perturbation applied to continuous genes.
    pub sigma_eta_sq: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            iterations: 50,
            p_cross: 0.8,
            p_swap: 0.2,
            p_tweak: 0.05,
            sigma_eta_sq: 0.2,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    /// Returns every problem found, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            out.push(format!(
                "population_size must be an even number >= 2, got {}",
                self.population_size
            ));
        }
        for (name, v) in [
            ("p_cross", self.p_cross),
            ("p_swap", self.p_swap),
            ("p_tweak", self.p_tweak),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.p_tweak <= 0.0 {
            out.push("p_tweak must be positive".into());
        }
        if !(self.sigma_eta_sq > 0.0 && self.sigma_eta_sq.is_finite()) {
            out.push(format!(
                "sigma_eta_sq must be positive, got {}",
                self.sigma_eta_sq
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(p))
        }
    }
}

/// A population at one stage of an iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub iteration: usize,
    pub members: Vec<Individual>,
}

/// Draws `fitnesses.len()` indices with replacement, proportionally to
/// [`selection_probs`]. The weakest individual is never drawn unless all
/// fitnesses tie.
pub fn select<R: Rng + ?Sized>(fitnesses: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let probs = selection_probs(fitnesses)?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let total = acc;
    let last_positive = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1);
    let draws = (0..fitnesses.len())
        .map(|_| {
            let u = rng.random::<f64>() * total;
            let i = cumulative.partition_point(|&c| c <= u);
            i.min(last_positive)
        })
        .collect();
    Ok(draws)
}

/// Normalized distance `(1/d) * sqrt(sum(((a_i - b_i) / K_i)^2))`.
pub fn distance(a: &Individual, b: &Individual, space: &SearchSpace) -> Result<f64> {
    let d = space.dim();
    for x in [a, b] {
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: x.len(),
            });
        }
    }
    if d == 0 {
        return Ok(0.0);
    }
    let sum: f64 = (0..d)
        .map(|i| {
            let t = (a[i] - b[i]) / space.scale(i);
            t * t
        })
        .sum();
    Ok(sum.sqrt() / d as f64)
}

/// Greedy pairing: the fittest remaining member is paired with the remaining
/// member farthest from it. Ties go to the lower index. Returns index pairs
/// into `members`; every index appears exactly once.
pub fn pair_parents(
    members: &[Individual],
    fitnesses: &[f64],
    space: &SearchSpace,
) -> Result<Vec<(usize, usize)>> {
    let n = members.len();
    if n != fitnesses.len() {
        return Err(Error::Dimension {
            expected: n,
            actual: fitnesses.len(),
        });
    }
    if !n.is_multiple_of(2) {
        return Err(Error::config(format!(
            "pairing needs an even population, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal fitness keeps index order
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]));
    let mut used = vec![false; n];
    let mut pairs = Vec::with_capacity(n / 2);
    for &first in &order {
        if used[first] {
            continue;
        }
        used[first] = true;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let dist = distance(&members[first], &members[j], space)?;
            if best.is_none_or(|(_, bd)| dist > bd) {
                best = Some((j, dist));
            }
        }
        let (second, _) =
            best.ok_or_else(|| Error::Invariant("pairing ran out of members".into()))?;
        used[second] = true;
        pairs.push((first, second));
    }
    Ok(pairs)
}

/// Uniform crossover. With probability `1 - p_cross` the parents are copied;
/// otherwise every position swaps independently with probability `p_swap`.
pub fn crossover<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    cfg: &GaConfig,
    rng: &mut R,
) -> (Individual, Individual) {
    let mut a = p1.values().to_vec();
    let mut b = p2.values().to_vec();
    if rng.random::<f64>() < cfg.p_cross {
        for i in 0..a.len() {
            if rng.random::<f64>() < cfg.p_swap {
                std::mem::swap(&mut a[i], &mut b[i]);
            }
        }
    }
    (
        Individual::from_values_unchecked(a),
        Individual::from_values_unchecked(b),
    )
}

/// Mean squared dispersion around the per-gene mean:
/// `(1/N) * sum_n sum_i (x_n[i] - mu[i])^2`, on raw gene values.
pub fn diversity(members: &[Individual]) -> f64 {
    let n = members.len();
    if n == 0 {
        return 0.0;
    }
    let d = members[0].len();
    let mut mean = vec![0.0; d];
    for m in members {
        for (acc, v) in mean.iter_mut().zip(m.values()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    let total: f64 = members
        .iter()
        .map(|m| {
            m.values()
                .iter()
                .zip(&mean)
                .map(|(v, mu)| (v - mu) * (v - mu))
                .sum::<f64>()
        })
        .sum();
    total / n as f64
}

/// Perturbation variance of one gene: `sigma_eta_sq` for continuous genes,
/// 1 for discrete genes (steps of +/-1).
pub fn perturbation_variance(domain: &GeneDomain, cfg: &GaConfig) -> f64 {
    match domain {
        GeneDomain::Continuous => cfg.sigma_eta_sq,
        GeneDomain::Discrete { .. } => 1.0,
    }
}

/// Mutation probability that closes the diversity deficit in one step.
///
/// Inverts `div_next = div_current + d * P_M * var` for `P_M`, where `var`
/// is the mean per-gene perturbation variance, then
/// `p_mutate = clamp(P_M / p_tweak, 0, 1)`.
pub fn adapt_mutation_rate(
    div_current: f64,
    div_target: f64,
    space: &SearchSpace,
    cfg: &GaConfig,
) -> f64 {
    let deficit = div_target - div_current;
    if deficit <= 0.0 || space.dim() == 0 {
        return 0.0;
    }
    // d * mean variance == sum of per-gene variances
    let total_var: f64 = space
        .genes()
        .iter()
        .map(|g| perturbation_variance(&g.domain, cfg))
        .sum();
    let p_m = deficit / total_var;
    (p_m / cfg.p_tweak).clamp(0.0, 1.0)
}

/// Mutates `x` with probability `p_mutate`; when it does, every gene is
/// tweaked independently with probability `p_tweak`. Continuous genes get
/// Gaussian noise and are clipped to `[0, 1]`; discrete genes step by +/-1
/// and are clamped to `[1, K]`.
pub fn mutate<R: Rng + ?Sized>(
    x: &Individual,
    space: &SearchSpace,
    p_mutate: f64,
    cfg: &GaConfig,
    rng: &mut R,
) -> Individual {
    let mut values = x.values().to_vec();
    if rng.random::<f64>() < p_mutate {
        let sigma = cfg.sigma_eta_sq.sqrt();
        for (v, g) in values.iter_mut().zip(space.genes()) {
            if rng.random::<f64>() >= cfg.p_tweak {
                continue;
            }
            match g.domain {
                GeneDomain::Continuous => {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = (*v + sigma * z).clamp(0.0, 1.0);
                }
                GeneDomain::Discrete { max } => {
                    let step = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *v = (*v + step).clamp(1.0, max as f64);
                }
            }
        }
    }
    Individual::from_values_unchecked(values)
}
