//! Run directory outputs and plot-ready CSV exports.
//!
//! A finished `optimize` run directory holds:
//!
//! | file | content |
//! |------|---------|
//! | `arch.json` | the architecture searched |
//! | `run_config.json` | the resolved configuration |
//! | `state.json` | final [`RunState`] |
//! | `summary.csv` | `iteration,best_fitness,mean_fitness,diversity,p_mutate,archive_size` |
//! | `archive.csv` | `accuracy,cost,delta_c,genotype` |
//! | `checkpoints/` | periodic resumable states |
//!
//! `report` adds four more from those:
//!
//! | file | content |
//! |------|---------|
//! | `convergence.csv` | `iteration,best_fitness,mean_fitness,best_so_far,p_mutate` |
//! | `population_heatmap.csv` | `gene,layer_index,kind,x0..x{N-1}`: initial population, one row per gene |
//! | `layer_costs.csv` | `layer_index,original_cost,compressed_cost,pruned_fraction` for the best individual |
//! | `pareto.csv` | `accuracy,cost,delta_c,genotype` ordered by cost |
//!
//! Genotypes are written as their gene values joined with `;`. Floats use
//! the shortest representation that round-trips.

use std::path::{Path, PathBuf};

use crate::archive::ParetoArchive;
use crate::config::RunConfig;
use crate::costmodel::compressed_cost;
use crate::engine::RunState;
use crate::error::{Error, Result};
use crate::genotype::{build_search_space, decode, GeneKind, Individual, ModelArch};

pub const SUMMARY_HEADER: [&str; 6] = [
    "iteration",
    "best_fitness",
    "mean_fitness",
    "diversity",
    "p_mutate",
    "archive_size",
];
pub const ARCHIVE_HEADER: [&str; 4] = ["accuracy", "cost", "delta_c", "genotype"];
pub const CONVERGENCE_HEADER: [&str; 5] = [
    "iteration",
    "best_fitness",
    "mean_fitness",
    "best_so_far",
    "p_mutate",
];
pub const LAYER_COSTS_HEADER: [&str; 4] = [
    "layer_index",
    "original_cost",
    "compressed_cost",
    "pruned_fraction",
];

pub const ARCH_FILE: &str = "arch.json";
pub const CONFIG_FILE: &str = "run_config.json";
pub const STATE_FILE: &str = "state.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ARCHIVE_FILE: &str = "archive.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const HEATMAP_FILE: &str = "population_heatmap.csv";
pub const LAYER_COSTS_FILE: &str = "layer_costs.csv";
pub const PARETO_FILE: &str = "pareto.csv";

pub fn format_genotype(x: &Individual) -> String {
    x.values()
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_genotype(text: &str) -> Result<Vec<f64>> {
    text.split([';', ','])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::config(format!("genotype entry '{t}' is not a number")))
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::config(format!("{}: {other:?}", path.display())),
    })
}

fn write_archive(path: &Path, archive: &ParetoArchive) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ARCHIVE_HEADER)?;
    for r in archive.sorted_by_cost() {
        w.write_record([
            r.accuracy.to_string(),
            r.cost.to_string(),
            r.delta_c.to_string(),
            format_genotype(&r.genotype),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, state: &RunState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &state.trace {
        w.write_record([
            s.iteration.to_string(),
            s.best_fitness.to_string(),
            s.mean_fitness.to_string(),
            s.diversity.to_string(),
            s.p_mutate.to_string(),
            s.archive_size.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the files an `optimize` run leaves behind.
pub fn write_run_outputs(
    dir: &Path,
    arch: &ModelArch,
    cfg: Option<&RunConfig>,
    state: &RunState,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join(ARCH_FILE), &(arch.to_json_pretty() + "\n"))?;
    if let Some(cfg) = cfg {
        write_text(&dir.join(CONFIG_FILE), &(cfg.to_json_pretty() + "\n"))?;
    }
    state.save(dir.join(STATE_FILE))?;
    write_summary(&dir.join(SUMMARY_FILE), state)?;
    write_archive(&dir.join(ARCHIVE_FILE), &state.archive)
}

/// Derives the plot-ready CSVs from a run directory and returns their paths.
pub fn write_report(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let arch = ModelArch::load(run_dir.join(ARCH_FILE))?;
    let state = RunState::load(run_dir.join(STATE_FILE))?;
    let space = build_search_space(&arch, &state.fingerprint.methods)?;
    if space.dim() != state.fingerprint.dim {
        return Err(Error::config("state.json does not match arch.json"));
    }

    let convergence = run_dir.join(CONVERGENCE_FILE);
    let mut w = writer(&convergence)?;
    w.write_record(CONVERGENCE_HEADER)?;
    let mut best_so_far = f64::NEG_INFINITY;
    for s in &state.trace {
        best_so_far = best_so_far.max(s.best_fitness);
        w.write_record([
            s.iteration.to_string(),
            s.best_fitness.to_string(),
            s.mean_fitness.to_string(),
            best_so_far.to_string(),
            s.p_mutate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&convergence, e))?;

    let heatmap = run_dir.join(HEATMAP_FILE);
    let mut w = writer(&heatmap)?;
    let n = state.initial_population.len();
    let mut header = vec!["gene".to_string(), "layer_index".into(), "kind".into()];
    header.extend((0..n).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, gene) in space.genes().iter().enumerate() {
        let kind = match gene.kind {
            GeneKind::PruneStructured => "structured_pruning",
            GeneKind::PruneNonstructured => "nonstructured_pruning",
            GeneKind::SvdRank => "svd_rank",
            GeneKind::TuckerRankIn => "tucker_rank_in",
            GeneKind::TuckerRankOut => "tucker_rank_out",
        };
        let mut row = vec![
            i.to_string(),
            gene.layer_index.to_string(),
            kind.to_string(),
        ];
        row.extend(state.initial_population.iter().map(|x| x[i].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&heatmap, e))?;

    let layer_costs = run_dir.join(LAYER_COSTS_FILE);
    let mut w = writer(&layer_costs)?;
    w.write_record(LAYER_COSTS_HEADER)?;
    if let Some(best) = &state.best {
        let spec = decode(&space, &best.individual)?;
        let report = compressed_cost(&arch, &spec, state.fingerprint.metric)?;
        for (i, frac) in report.pruned_fraction().iter().enumerate() {
            w.write_record([
                i.to_string(),
                report.original_per_layer[i].to_string(),
                report.per_layer[i].to_string(),
                frac.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&layer_costs, e))?;

    let pareto = run_dir.join(PARETO_FILE);
    write_archive(&pareto, &state.archive)?;

    Ok(vec![convergence, heatmap, layer_costs, pareto])
}
