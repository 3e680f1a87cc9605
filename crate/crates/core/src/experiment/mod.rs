//! Configuration-driven experiment runner: lambda sweeps over multi-seed
//! runs with aggregated reports.

mod config;
mod report;

pub use config::{load_config, parse_config, CorpusSource, ExperimentConfig, ShaperConfig};
pub use report::emit_reports;

use rayon::prelude::*;

use crate::corpus::{load_corpus, synthesize_corpus, Corpus, Split};
use crate::error::{Error, Result};
use crate::metrics::{
    evaluate_descriptive, evaluate_normative, evaluate_novelty, NormativeConfig, NormativeReport,
    NoveltyReport, RankReport,
};
use crate::scoring::{rank_slate, rank_slate_content_only, RankedSlate};
use crate::shaper::{export_embeddings, train, Objective};
use crate::stats::{corpus_stats, StatsReport};
use crate::SpaceTag;

/// Everything evaluated for one (lambda, seed) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub lambda: f64,
    pub seed: u64,
    pub slates: Vec<RankedSlate>,
    pub rank: RankReport,
    pub normative: NormativeReport,
    pub novelty: NoveltyReport,
}

/// A failed cell, kept as a diagnostic while the sweep continues.
#[derive(Debug, Clone)]
pub struct CellFailure {
    pub lambda: f64,
    pub seed: u64,
    pub message: String,
}

/// Per-lambda mean and population standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Aggregated metrics for one lambda across seeds.
#[derive(Debug, Clone)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub auc: MeanStd,
    pub mrr: MeanStd,
    pub ndcg5: MeanStd,
    pub ndcg10: MeanStd,
    pub cal_category: MeanStd,
    pub cal_frame: MeanStd,
    pub rep_frame: MeanStd,
    pub activation: MeanStd,
    pub avg_unique: MeanStd,
    pub avg_novel: MeanStd,
    pub avg_kl: MeanStd,
    pub n_seeds: usize,
}

/// Full sweep output: every successful cell, failures, per-seed corpus
/// statistics, and per-lambda aggregates.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub stats: Vec<(u64, StatsReport)>,
}

impl SweepReport {
    pub fn cell(&self, lambda: f64, seed: u64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.lambda == lambda && c.seed == seed)
    }

    /// Per-lambda aggregates in grid order. Lambdas whose every cell failed
    /// are skipped.
    pub fn lambda_summaries(&self) -> Vec<LambdaSummary> {
        self.lambdas
            .iter()
            .filter_map(|&lambda| {
                let cells: Vec<&CellResult> =
                    self.cells.iter().filter(|c| c.lambda == lambda).collect();
                if cells.is_empty() {
                    return None;
                }
                let collect = |f: &dyn Fn(&CellResult) -> f64| -> Vec<f64> {
                    cells.iter().map(|c| f(c)).collect()
                };
                Some(LambdaSummary {
                    lambda,
                    auc: mean_std(&collect(&|c| c.rank.auc)),
                    mrr: mean_std(&collect(&|c| c.rank.mrr)),
                    ndcg5: mean_std(&collect(&|c| {
                        c.rank.ndcg_at.get(&5).copied().unwrap_or(0.0)
                    })),
                    ndcg10: mean_std(&collect(&|c| {
                        c.rank.ndcg_at.get(&10).copied().unwrap_or(0.0)
                    })),
                    cal_category: mean_std(&collect(&|c| c.normative.cal_category)),
                    cal_frame: mean_std(&collect(&|c| c.normative.cal_frame)),
                    rep_frame: mean_std(&collect(&|c| c.normative.rep_frame)),
                    activation: mean_std(&collect(&|c| c.normative.activation)),
                    avg_unique: mean_std(&collect(&|c| c.novelty.avg_unique_frames)),
                    avg_novel: mean_std(&collect(&|c| c.novelty.avg_novel_frames)),
                    avg_kl: mean_std(&collect(&|c| c.novelty.avg_kl)),
                    n_seeds: cells.len(),
                })
            })
            .collect()
    }

    pub fn all_cells_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Builds the corpus for one seed: loaded corpora are reused as-is,
/// synthetic corpora are regenerated per seed, and the shaper (when
/// enabled) is retrained per seed.
pub fn prepare_corpus(config: &ExperimentConfig, seed: u64) -> Result<Corpus> {
    let mut corpus = match &config.source {
        CorpusSource::Files(paths) => load_corpus(paths, &config.load_config())?,
        CorpusSource::Synthetic(spec) => {
            // The experiment-level split fractions govern synthesis too.
            let mut spec = spec.clone();
            spec.split_train = config.split_train;
            spec.split_val = config.split_val;
            synthesize_corpus(&spec, seed)?
        }
    };
    if let Some(shaper) = &config.shaper {
        if shaper.shape_frame {
            let train_config = shaper.train_config(Objective::Frame, seed);
            let (model, _) = train(&corpus, &train_config)?;
            let shaped = export_embeddings(&model, corpus.content_embeddings(), SpaceTag::Frame)?;
            corpus = corpus.with_embeddings(shaped)?;
        }
        if shaper.shape_click {
            let train_config = shaper.train_config(Objective::Click, seed);
            let (model, _) = train(&corpus, &train_config)?;
            let shaped = export_embeddings(&model, corpus.content_embeddings(), SpaceTag::Content)?;
            corpus = corpus.with_embeddings(shaped)?;
        }
    }
    Ok(corpus)
}

/// Ranks the test impressions under one lambda and runs the three metric
/// suites. Impressions are ranked in parallel and reduced in impression
/// order, so the result is independent of the worker count.
pub fn evaluate_cell(
    corpus: &Corpus,
    config: &ExperimentConfig,
    lambda: f64,
    seed: u64,
) -> Result<CellResult> {
    let impressions: Vec<_> = corpus.impressions_in(Split::Test).cloned().collect();
    if impressions.is_empty() {
        return Err(Error::EmptyInput("test impressions"));
    }
    let slates: Vec<RankedSlate> = impressions
        .par_iter()
        .map(|imp| {
            if config.disable_frame {
                rank_slate_content_only(imp, corpus)
            } else {
                rank_slate(imp, corpus, lambda)
            }
        })
        .collect::<Result<_>>()?;

    let rank = evaluate_descriptive(&slates, &impressions, &config.ndcg_ks)?;
    let normative_config = NormativeConfig {
        top_k: config.top_k,
        n_bins: config.n_bins,
        discount: config.discount,
    };
    let normative = evaluate_normative(corpus, &impressions, &slates, &normative_config)?;
    let novelty = evaluate_novelty(corpus, &impressions, &slates, config.top_k)?;

    Ok(CellResult {
        lambda,
        seed,
        slates,
        rank,
        normative,
        novelty,
    })
}

/// Runs the full (lambda x seed) grid. Cell errors are recorded and the
/// sweep continues. Deterministic for a fixed config regardless of the
/// rayon worker count.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    let mut stats = Vec::new();

    for &seed in &config.seeds {
        let corpus = match prepare_corpus(config, seed) {
            Ok(corpus) => corpus,
            Err(e) => {
                for &lambda in &config.lambda_grid {
                    failures.push(CellFailure {
                        lambda,
                        seed,
                        message: format!("corpus preparation failed: {e}"),
                    });
                }
                continue;
            }
        };
        match corpus_stats(&corpus, config.stats_signed_sentiment) {
            Ok(report) => stats.push((seed, report)),
            Err(e) => failures.push(CellFailure {
                lambda: f64::NAN,
                seed,
                message: format!("stats failed: {e}"),
            }),
        }
        for &lambda in &config.lambda_grid {
            match evaluate_cell(&corpus, config, lambda, seed) {
                Ok(cell) => cells.push(cell),
                Err(e) => failures.push(CellFailure {
                    lambda,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
    }

    Ok(SweepReport {
        lambdas: config.lambda_grid.clone(),
        seeds: config.seeds.clone(),
        cells,
        failures,
        stats,
    })
}
