//! The search loop.
//!
//! One iteration: decode and cost every member, query the oracle for the
//! whole batch, score, offer every point to the Pareto archive, then select,
//! pair, cross over, and mutate only if the crossed-over population's
//! diversity has fallen to the threshold fixed at initialization (half the
//! initial diversity).
//!
//! All randomness comes from one seeded stream owned by [`RunState`], drawn
//! in a fixed order, so a run is a pure function of its configuration and a
//! checkpointed state resumes bit-exactly.

use std::path::{Path, PathBuf};

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{ArchiveRecord, ParetoArchive};
use crate::boundary::{characterize_bounds, sample_initial, sample_uniform, BoundsVector};
use crate::costmodel::{compressed_cost, CostMetric};
use crate::error::{Error, Result};
use crate::evaluator::AccuracyOracle;
use crate::genetic::{
    adapt_mutation_rate, crossover, diversity, mutate, pair_parents, select, GaConfig,
};
use crate::genotype::{decode, Individual, Method, SearchSpace};
use crate::scoring::{Accuracy, Evaluation};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Sample inside the characterized per-gene bounds.
    #[default]
    Directed,
    /// Sample uniformly over the whole space.
    Naive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundsSource {
    Compute { steps: u32 },
    Provided(BoundsVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPolicy {
    pub every: usize,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub metric: CostMetric,
    pub acc_thr: Accuracy,
    pub ga: GaConfig,
    pub init: InitStrategy,
    pub bounds: BoundsSource,
    pub checkpoint: Option<CheckpointPolicy>,
}

impl EngineSettings {
    pub fn new(acc_thr: Accuracy, ga: GaConfig) -> Self {
        EngineSettings {
            metric: CostMetric::Flops,
            acc_thr,
            ga,
            init: InitStrategy::Directed,
            bounds: BoundsSource::Compute {
                steps: crate::boundary::DEFAULT_RESOLUTION_STEPS,
            },
            checkpoint: None,
        }
    }

    /// Every problem with these settings for `space`.
    pub fn problems(&self, space: &SearchSpace) -> Vec<String> {
        let mut out = self.ga.problems();
        if self.metric == CostMetric::Flops
            && space.methods().contains(&Method::NonstructuredPruning)
        {
            out.push(
                "non-structured pruning does not change dense FLOPs; use the params metric".into(),
            );
        }
        match &self.bounds {
            BoundsSource::Compute { steps: 0 } => {
                out.push("bounds resolution must have at least one step".into())
            }
            BoundsSource::Provided(b) => {
                if let Err(e) = b.check(space) {
                    out.push(format!("provided bounds: {e}"));
                }
            }
            _ => {}
        }
        if let Some(c) = &self.checkpoint {
            if c.every == 0 {
                out.push("checkpoint cadence must be positive".into());
            }
        }
        out
    }
}

/// Identifies the run a checkpoint belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFingerprint {
    pub arch: String,
    pub methods: Vec<Method>,
    pub dim: usize,
    pub metric: CostMetric,
    pub acc_thr: f64,
    pub init: InitStrategy,
    pub ga: GaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Diversity of the crossed-over population.
    pub diversity: f64,
    pub p_mutate: f64,
    pub archive_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub iteration: usize,
    pub individual: Individual,
    pub evaluation: Evaluation,
}

/// Complete resumable state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub fingerprint: RunFingerprint,
    /// Number of completed iterations.
    pub iteration: usize,
    pub population: Vec<Individual>,
    pub initial_population: Vec<Individual>,
    pub div_thr: f64,
    pub original_accuracy: f64,
    pub bounds: Option<BoundsVector>,
    pub rng: ChaCha8Rng,
    pub archive: ParetoArchive,
    pub best: Option<BestRecord>,
    /// Per-iteration best individual's fitness history and diagnostics.
    pub trace: Vec<IterationStats>,
    /// Scores of the final population, set once the run is complete.
    pub final_evaluations: Option<Vec<Evaluation>>,
}

impl RunState {
    pub fn is_finished(&self) -> bool {
        self.final_evaluations.is_some()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("run state serializes");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let state: RunState = serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if state.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "{}: checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                path.display(),
                state.version
            )));
        }
        Ok(state)
    }
}

pub fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("checkpoint-{iteration:06}.json"))
}

pub fn latest_checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint-latest.json")
}

pub struct Engine<'a> {
    space: &'a SearchSpace,
    settings: EngineSettings,
    oracle: &'a mut dyn AccuracyOracle,
}

impl<'a> Engine<'a> {
    pub fn new(
        space: &'a SearchSpace,
        settings: EngineSettings,
        oracle: &'a mut dyn AccuracyOracle,
    ) -> Result<Self> {
        let problems = settings.problems(space);
        if !problems.is_empty() {
            return Err(Error::ConfigList(problems));
        }
        Ok(Engine {
            space,
            settings,
            oracle,
        })
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn fingerprint(&self) -> RunFingerprint {
        RunFingerprint {
            arch: self.space.arch().name.clone(),
            methods: self.space.methods().to_vec(),
            dim: self.space.dim(),
            metric: self.settings.metric,
            acc_thr: self.settings.acc_thr.value(),
            init: self.settings.init,
            ga: self.settings.ga.clone(),
        }
    }

    /// Measures the uncompressed model, builds the initial population and
    /// fixes the diversity threshold.
    pub fn initialize(&mut self) -> Result<RunState> {
        let thr = self.settings.acc_thr;
        let mut rng = ChaCha8Rng::seed_from_u64(self.settings.ga.rng_seed);
        let n = self.settings.ga.population_size;

        let (original, bounds) = match (self.settings.init, self.settings.bounds.clone()) {
            (InitStrategy::Directed, BoundsSource::Compute { steps }) => {
                let report = characterize_bounds(self.space, self.oracle, thr, steps)?;
                info!(
                    "bounds characterized with {} probes",
                    report.probes.iter().sum::<usize>() + 1
                );
                (
                    Accuracy::new(report.identity_accuracy)?,
                    Some(report.bounds),
                )
            }
            (InitStrategy::Directed, BoundsSource::Provided(b)) => {
                (self.identity_accuracy()?, Some(b))
            }
            (InitStrategy::Naive, _) => (self.identity_accuracy()?, None),
        };
        if thr.value() > original.value() {
            return Err(Error::config(format!(
                "accuracy threshold {} exceeds the uncompressed model's accuracy {}",
                thr.value(),
                original.value()
            )));
        }

        let population = match &bounds {
            Some(b) => sample_initial(self.space, b, n, &mut rng)?,
            None => sample_uniform(self.space, n, &mut rng),
        };
        let div_thr = diversity(&population) / 2.0;
        Ok(RunState {
            version: CHECKPOINT_VERSION,
            fingerprint: self.fingerprint(),
            iteration: 0,
            initial_population: population.clone(),
            population,
            div_thr,
            original_accuracy: original.value(),
            bounds,
            rng,
            archive: ParetoArchive::new(),
            best: None,
            trace: Vec::new(),
            final_evaluations: None,
        })
    }

    fn identity_accuracy(&mut self) -> Result<Accuracy> {
        let spec = decode(self.space, &self.space.identity())?;
        let out = self.oracle.evaluate_batch(std::slice::from_ref(&spec))?;
        out.first()
            .copied()
            .ok_or_else(|| Error::oracle("oracle returned no result for the identity probe"))
    }

    /// Scores a population. Evaluation ids are population indices.
    pub fn evaluate(
        &mut self,
        population: &[Individual],
        original: Accuracy,
    ) -> Result<Vec<Evaluation>> {
        let arch = self.space.arch();
        let specs = population
            .iter()
            .map(|x| decode(self.space, x))
            .collect::<Result<Vec<_>>>()?;
        let costs = specs
            .iter()
            .map(|s| compressed_cost(arch, s, self.settings.metric))
            .collect::<Result<Vec<_>>>()?;
        for c in &costs {
            if c.per_layer.iter().sum::<u64>() != c.total {
                return Err(Error::Invariant(
                    "per-layer cost does not sum to the total".into(),
                ));
            }
        }
        let accuracies = self.oracle.evaluate_batch(&specs)?;
        if accuracies.len() != specs.len() {
            return Err(Error::oracle(format!(
                "oracle returned {} results for {} specs",
                accuracies.len(),
                specs.len()
            )));
        }
        Ok(accuracies
            .into_iter()
            .zip(&costs)
            .enumerate()
            .map(|(i, (a, c))| {
                Evaluation::new(i, a, c.total, c.delta_c, original, self.settings.acc_thr)
            })
            .collect())
    }

    fn record(&self, state: &mut RunState, population: &[Individual], evals: &[Evaluation]) {
        for (x, e) in population.iter().zip(evals) {
            state.archive.offer(ArchiveRecord {
                genotype: x.clone(),
                accuracy: e.accuracy,
                cost: e.cost_total,
                delta_c: e.delta_c,
                fitness: e.fitness,
            });
            if state
                .best
                .as_ref()
                .is_none_or(|b| e.fitness > b.evaluation.fitness)
            {
                state.best = Some(BestRecord {
                    iteration: state.iteration,
                    individual: x.clone(),
                    evaluation: e.clone(),
                });
            }
        }
    }

    /// Runs one iteration. `state` is left untouched if the oracle fails.
    pub fn step(&mut self, state: &mut RunState) -> Result<()> {
        self.check_state(state)?;
        let original = Accuracy::new(state.original_accuracy)?;
        let evals = self.evaluate(&state.population, original)?;

        let population = std::mem::take(&mut state.population);
        self.record(state, &population, &evals);
        let fitnesses: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        let best_fitness = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_fitness = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;

        let ga = &self.settings.ga;
        let picks = select(&fitnesses, &mut state.rng)?;
        let selected: Vec<Individual> = picks.iter().map(|&i| population[i].clone()).collect();
        let selected_fit: Vec<f64> = picks.iter().map(|&i| fitnesses[i]).collect();
        let pairs = pair_parents(&selected, &selected_fit, self.space)?;
        let mut children = Vec::with_capacity(selected.len());
        for (a, b) in pairs {
            let (c1, c2) = crossover(&selected[a], &selected[b], ga, &mut state.rng);
            children.push(c1);
            children.push(c2);
        }

        let div_c = diversity(&children);
        let mut p_mutate = 0.0;
        if div_c <= state.div_thr {
            p_mutate = adapt_mutation_rate(div_c, state.div_thr, self.space, ga);
            children = children
                .iter()
                .map(|x| mutate(x, self.space, p_mutate, ga, &mut state.rng))
                .collect();
        }
        if children.len() != ga.population_size {
            return Err(Error::Invariant(format!(
                "population size changed from {} to {}",
                ga.population_size,
                children.len()
            )));
        }

        state.trace.push(IterationStats {
            iteration: state.iteration,
            best_fitness,
            mean_fitness,
            diversity: div_c,
            p_mutate,
            archive_size: state.archive.len(),
        });
        debug!(
            "iteration {}: best {best_fitness:.6} mean {mean_fitness:.6} div {div_c:.6} p_mutate {p_mutate:.4}",
            state.iteration
        );
        state.population = children;
        state.iteration += 1;
        Ok(())
    }

    /// Scores the final population and marks the run complete.
    pub fn finish(&mut self, state: &mut RunState) -> Result<()> {
        self.check_state(state)?;
        let original = Accuracy::new(state.original_accuracy)?;
        let evals = self.evaluate(&state.population, original)?;
        let population = state.population.clone();
        self.record(state, &population, &evals);
        state.final_evaluations = Some(evals);
        Ok(())
    }

    fn check_state(&self, state: &RunState) -> Result<()> {
        if state.fingerprint != self.fingerprint() {
            return Err(Error::config(
                "checkpoint belongs to a different run configuration",
            ));
        }
        if state.is_finished() {
            return Err(Error::config("run is already complete"));
        }
        Ok(())
    }

    fn checkpoint(&self, state: &RunState) -> Result<()> {
        if let Some(policy) = &self.settings.checkpoint {
            if state.iteration.is_multiple_of(policy.every) {
                std::fs::create_dir_all(&policy.dir).map_err(|e| Error::io(&policy.dir, e))?;
                state.save(checkpoint_path(&policy.dir, state.iteration))?;
                state.save(latest_checkpoint_path(&policy.dir))?;
            }
        }
        Ok(())
    }

    /// Continues `state` until all iterations are done and the final
    /// population is scored. On an oracle failure the last consistent state
    /// is written as the latest checkpoint (when checkpointing is enabled)
    /// before the error is returned.
    pub fn resume(&mut self, mut state: RunState) -> Result<RunState> {
        self.check_state(&state)?;
        let total = self.settings.ga.iterations;
        while state.iteration < total {
            if let Err(e) = self.step(&mut state) {
                self.save_on_failure(&state);
                return Err(e);
            }
            info!("iteration {}/{total} done", state.iteration);
            self.checkpoint(&state)?;
        }
        if let Err(e) = self.finish(&mut state) {
            self.save_on_failure(&state);
            return Err(e);
        }
        Ok(state)
    }

    fn save_on_failure(&self, state: &RunState) {
        if let Some(policy) = &self.settings.checkpoint {
            let path = latest_checkpoint_path(&policy.dir);
            let _ = std::fs::create_dir_all(&policy.dir);
            match state.save(&path) {
                Ok(()) => log::error!("run state saved to {}", path.display()),
                Err(e) => log::error!("could not save run state: {e}"),
            }
        }
    }

    pub fn run(&mut self) -> Result<RunState> {
        let state = self.initialize()?;
        self.resume(state)
    }
}
