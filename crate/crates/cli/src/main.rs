//! Command-line runner: corpus synthesis, shaper training, single-lambda
//! ranking, the full lambda sweep, metric evaluation of stored slates, and
//! corpus statistics.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use framerank::corpus::{write_corpus, Split};
use framerank::experiment::{
    emit_reports, load_config, prepare_corpus, run_sweep, CorpusSource, ExperimentConfig,
};
use framerank::metrics::{
    evaluate_descriptive, evaluate_normative, evaluate_novelty, NormativeConfig,
};
use framerank::scoring::{rank_slate, read_slates, write_slates, RankedSlate};
use framerank::shaper::{export_embeddings, save_checkpoint, train, Objective};
use framerank::stats::corpus_stats;
use framerank::{Corpus, Impression, SpaceTag};

#[derive(Parser)]
#[command(
    name = "framerank",
    about = "Frame-aware news re-ranking and normative diversity evaluation",
    version
)]
struct Cli {
    /// Experiment config file (key = value format).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Rayon worker threads (0 = default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

/// Overrides mirroring the top-level config keys.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Comma-separated lambda grid, e.g. -1.0,-0.4,0.0,0.4,1.0.
    #[arg(long, allow_hyphen_values = true)]
    lambda_grid: Option<String>,

    /// Comma-separated seeds, e.g. 1,2,3,4,5.
    #[arg(long)]
    seeds: Option<String>,

    /// Top-k cutoff for the normative and novelty metrics.
    #[arg(long)]
    top_k: Option<usize>,

    /// Number of |sentiment| bins for activation.
    #[arg(long)]
    n_bins: Option<usize>,

    /// Maximum stored history length.
    #[arg(long)]
    history_max: Option<usize>,

    /// Output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    /// Rank with the frame score disabled entirely.
    #[arg(long)]
    disable_frame: bool,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) -> anyhow::Result<()> {
        if let Some(grid) = &self.lambda_grid {
            config.lambda_grid = grid
                .split(',')
                .map(|v| v.trim().parse::<f64>().context("bad --lambda-grid value"))
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(seeds) = &self.seeds {
            config.seeds = seeds
                .split(',')
                .map(|v| v.trim().parse::<u64>().context("bad --seeds value"))
                .collect::<anyhow::Result<_>>()?;
        }
        if let Some(k) = self.top_k {
            config.top_k = k;
        }
        if let Some(n) = self.n_bins {
            config.n_bins = n;
        }
        if let Some(h) = self.history_max {
            config.history_max = h;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if self.disable_frame {
            config.disable_frame = true;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and write its four files.
    Synth {
        #[command(flatten)]
        overrides: Overrides,
        /// Synthesis seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Target directory for the corpus files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the shaper and export the projected embedding space.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Contrastive objective: frame or click.
        #[arg(long, default_value = "frame")]
        objective: String,
        /// Training seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rank the test impressions under one lambda and dump the slates.
    Rank {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Corpus seed (synthetic sources only).
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Slate dump path (default: <output_dir>/slates.tsv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full (lambda x seed) grid and write all reports.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate all metric suites on slates from a dump file.
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        /// Slate dump produced by `rank` (or a sweep audit directory file).
        #[arg(long)]
        slates: PathBuf,
        /// Corpus seed (synthetic sources only).
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print corpus statistics (Cramér's V, ANOVA eta squared) as JSON.
    Stats {
        #[command(flatten)]
        overrides: Overrides,
        /// Corpus seed (synthetic sources only).
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Group the ANOVA by absolute sentiment instead of signed polarity.
        #[arg(long)]
        absolute_sentiment: bool,
    },
}

fn load_experiment_config(cli_config: &Option<PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let path = cli_config
        .as_ref()
        .context("this command needs --config <file>")?;
    Ok(load_config(path)?)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("failed to build the rayon pool")?;
    }

    match cli.command {
        Command::Synth {
            overrides,
            seed,
            out_dir,
        } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            let CorpusSource::Synthetic(spec) = &config.source else {
                bail!("`synth` needs a [synth] section in the config");
            };
            let corpus = framerank::synthesize_corpus(spec, seed)?;
            let dir = out_dir.unwrap_or_else(|| config.output_dir.join("corpus"));
            let paths = write_corpus(&corpus, &dir)?;
            println!(
                "wrote {} articles, {} impressions to {}",
                corpus.articles().len(),
                corpus.impressions().len(),
                paths.articles.parent().unwrap_or(&dir).display()
            );
        }
        Command::Train {
            overrides,
            objective,
            seed,
        } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            let objective = Objective::parse(&objective)?;
            let corpus = base_corpus(&config, seed)?;
            let shaper = config.shaper.clone().unwrap_or_default();
            let train_config = shaper.train_config(objective, seed);
            let (model, trace) = train(&corpus, &train_config)?;

            std::fs::create_dir_all(&config.output_dir)?;
            let tag = match objective {
                Objective::Frame => SpaceTag::Frame,
                Objective::Click => SpaceTag::Content,
            };
            let shaped = export_embeddings(&model, corpus.content_embeddings(), tag)?;
            let ids: Vec<&str> = corpus
                .articles()
                .iter()
                .map(|a| a.article_id.as_str())
                .collect();
            let emb_path = config
                .output_dir
                .join(format!("shaped_{}.emb", objective.as_str()));
            framerank::corpus::write_embeddings(&emb_path, &shaped, &ids)?;
            let ckpt_path = config
                .output_dir
                .join(format!("model_{}.ckpt", objective.as_str()));
            save_checkpoint(&ckpt_path, &model, seed)?;
            let trace_path = config
                .output_dir
                .join(format!("trace_{}.tsv", objective.as_str()));
            std::fs::write(&trace_path, trace.to_tsv())?;
            println!(
                "trained {} epochs (early stop: {}); wrote {}, {}, {}",
                trace.epochs.len(),
                trace.stopped_early,
                emb_path.display(),
                ckpt_path.display(),
                trace_path.display()
            );
        }
        Command::Rank {
            overrides,
            lambda,
            seed,
            out,
        } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            let corpus = prepare_corpus(&config, seed)?;
            let impressions: Vec<Impression> =
                corpus.impressions_in(Split::Test).cloned().collect();
            if impressions.is_empty() {
                bail!("corpus has no test impressions");
            }
            let slates: Vec<RankedSlate> = impressions
                .iter()
                .map(|imp| rank_slate(imp, &corpus, lambda))
                .collect::<framerank::Result<_>>()?;
            std::fs::create_dir_all(&config.output_dir)?;
            let path = out.unwrap_or_else(|| config.output_dir.join("slates.tsv"));
            write_slates(&path, &slates)?;
            println!(
                "ranked {} impressions at lambda={lambda} -> {}",
                slates.len(),
                path.display()
            );
        }
        Command::Sweep { overrides } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            let report = run_sweep(&config)?;
            emit_reports(&report, &config.output_dir)?;
            println!(
                "sweep: {} cells ({} failed) -> {}",
                report.cells.len() + report.failures.len(),
                report.failures.len(),
                config.output_dir.display()
            );
            for failure in &report.failures {
                eprintln!(
                    "failed cell lambda={} seed={}: {}",
                    failure.lambda, failure.seed, failure.message
                );
            }
            if !report.all_cells_succeeded() {
                std::process::exit(1);
            }
        }
        Command::Eval {
            overrides,
            slates,
            seed,
        } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            // Metrics depend on labels and stored scores, never on the
            // embedding spaces, so skip any shaper training.
            let corpus = base_corpus(&config, seed)?;
            let loaded = read_slates(&slates)?;
            if loaded.is_empty() {
                bail!("slate dump {} is empty", slates.display());
            }
            let impressions: Vec<Impression> = loaded
                .iter()
                .map(|slate| {
                    corpus
                        .impressions()
                        .iter()
                        .find(|imp| imp.impression_id == slate.impression_id)
                        .cloned()
                        .ok_or_else(|| {
                            framerank::Error::Invalid(format!(
                                "impression `{}` not found in the corpus",
                                slate.impression_id
                            ))
                        })
                })
                .collect::<framerank::Result<_>>()?;

            let rank = evaluate_descriptive(&loaded, &impressions, &config.ndcg_ks)?;
            let normative_config = NormativeConfig {
                top_k: config.top_k,
                n_bins: config.n_bins,
                discount: config.discount,
            };
            let normative = evaluate_normative(&corpus, &impressions, &loaded, &normative_config)?;
            let novelty = evaluate_novelty(&corpus, &impressions, &loaded, config.top_k)?;

            println!("impressions: {}", rank.n_impressions);
            println!("auc: {:.2}", rank.auc * 100.0);
            println!("mrr: {:.2}", rank.mrr * 100.0);
            for (k, value) in &rank.ndcg_at {
                println!("ndcg@{k}: {:.2}", value * 100.0);
            }
            println!("cal_c: {:.2}", normative.cal_category * 100.0);
            println!("cal_f: {:.2}", normative.cal_frame * 100.0);
            println!("rep_f: {:.2}", normative.rep_frame * 100.0);
            println!("act: {:.2}", normative.activation * 100.0);
            println!("avg_unique_frames: {:.4}", novelty.avg_unique_frames);
            println!("avg_novel_frames: {:.4}", novelty.avg_novel_frames);
            println!("avg_kl: {:.4}", novelty.avg_kl);
        }
        Command::Stats {
            overrides,
            seed,
            absolute_sentiment,
        } => {
            let mut config = load_experiment_config(&cli.config)?;
            overrides.apply(&mut config)?;
            let corpus = base_corpus(&config, seed)?;
            let report = corpus_stats(&corpus, !absolute_sentiment)?;
            println!("{}", report.to_json());
        }
    }
    Ok(())
}

/// Corpus without shaper training (synthesis or load only).
fn base_corpus(config: &ExperimentConfig, seed: u64) -> anyhow::Result<Corpus> {
    Ok(match &config.source {
        CorpusSource::Files(paths) => framerank::load_corpus(paths, &config.load_config())?,
        CorpusSource::Synthetic(spec) => framerank::synthesize_corpus(spec, seed)?,
    })
}
