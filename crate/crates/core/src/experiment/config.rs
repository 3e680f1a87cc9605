//! Experiment configuration: a flat `key = value` text format with
//! sectioned blocks for the corpus source and the shaper.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::{CorpusPaths, LoadConfig, SynthSpec};
use crate::error::{Error, Result};
use crate::frame::FrameLabel;
use crate::metrics::Discount;
use crate::shaper::{Objective, TrainConfig};

/// Where the corpus comes from.
#[derive(Debug, Clone)]
pub enum CorpusSource {
    Files(CorpusPaths),
    Synthetic(SynthSpec),
}

/// Shaper settings used by the sweep when training is enabled.
#[derive(Debug, Clone)]
pub struct ShaperConfig {
    pub shape_frame: bool,
    pub shape_click: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub tau: f64,
    pub instances_per_class: usize,
    pub classes_per_batch: usize,
    pub neg_ratio: usize,
}

impl Default for ShaperConfig {
    fn default() -> Self {
        Self {
            shape_frame: true,
            shape_click: false,
            epochs: 40,
            learning_rate: 0.5,
            patience: 3,
            tau: 0.9,
            instances_per_class: 20,
            classes_per_batch: 3,
            neg_ratio: 4,
        }
    }
}

impl ShaperConfig {
    pub fn train_config(&self, objective: Objective, seed: u64) -> TrainConfig {
        let mut config = TrainConfig::new(objective);
        config.epochs = self.epochs;
        config.learning_rate = self.learning_rate;
        config.patience = self.patience;
        config.tau = self.tau;
        config.instances_per_class = self.instances_per_class;
        config.classes_per_batch = self.classes_per_batch;
        config.neg_ratio = self.neg_ratio;
        config.seed = seed;
        config
    }
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: CorpusSource,
    pub lambda_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub top_k: usize,
    pub n_bins: usize,
    pub discount: Discount,
    pub ndcg_ks: Vec<usize>,
    pub history_max: usize,
    pub split_train: f64,
    pub split_val: f64,
    pub shaper: Option<ShaperConfig>,
    pub disable_frame: bool,
    pub stats_signed_sentiment: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// The seven-point default grid.
    pub fn default_lambda_grid() -> Vec<f64> {
        vec![-1.0, -0.4, -0.1, 0.0, 0.1, 0.4, 1.0]
    }

    pub fn default_seeds() -> Vec<u64> {
        vec![1, 2, 3, 4, 5]
    }

    pub fn synthetic(spec: SynthSpec) -> Self {
        Self {
            source: CorpusSource::Synthetic(spec),
            lambda_grid: Self::default_lambda_grid(),
            seeds: Self::default_seeds(),
            top_k: 10,
            n_bins: 10,
            discount: Discount::Log2,
            ndcg_ks: vec![5, 10],
            history_max: 50,
            split_train: 0.6,
            split_val: 0.2,
            shaper: None,
            disable_frame: false,
            stats_signed_sentiment: true,
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn from_files(paths: CorpusPaths) -> Self {
        let mut config = Self::synthetic(SynthSpec::desk_scale(1));
        config.source = CorpusSource::Files(paths);
        config
    }

    pub fn load_config(&self) -> LoadConfig {
        LoadConfig {
            history_max: self.history_max,
            split_train: self.split_train,
            split_val: self.split_val,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("empty lambda grid".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("empty seed list".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::Config("n_bins must be at least 2".into()));
        }
        Ok(())
    }
}

/// Parses the text config format. Unknown keys are rejected so typos are
/// caught early.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current = String::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                line_no + 1
            )));
        };
        sections
            .entry(current.clone())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }

    let mut root = sections.remove("").unwrap_or_default();
    let corpus_section = sections.remove("corpus");
    let synth_section = sections.remove("synth");
    let shaper_section = sections.remove("shaper");
    if let Some(unknown) = sections.keys().next() {
        return Err(Error::Config(format!("unknown section `[{unknown}]`")));
    }

    let parse_f64 = |value: &str, key: &str| -> Result<f64> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("bad number for `{key}`: `{value}`")))
    };
    let parse_usize = |value: &str, key: &str| -> Result<usize> {
        value
            .parse()
            .map_err(|_| Error::Config(format!("bad integer for `{key}`: `{value}`")))
    };

    let source = match (corpus_section, synth_section) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "config declares both [corpus] and [synth]; pick one".into(),
            ))
        }
        (Some(mut corpus), None) => {
            let mut take_path = |key: &str| -> Result<PathBuf> {
                corpus
                    .remove(key)
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config(format!("[corpus] missing `{key}`")))
            };
            let paths = CorpusPaths {
                articles: take_path("articles")?,
                behaviors: take_path("behaviors")?,
                content_embeddings: take_path("content_embeddings")?,
                frame_embeddings: take_path("frame_embeddings")?,
            };
            if let Some(unknown) = corpus.keys().next() {
                return Err(Error::Config(format!("unknown [corpus] key `{unknown}`")));
            }
            CorpusSource::Files(paths)
        }
        (None, Some(mut synth)) => {
            let n_frames = synth
                .remove("frames")
                .map(|v| parse_usize(&v, "frames"))
                .transpose()?
                .unwrap_or(8);
            if n_frames == 0 || n_frames > FrameLabel::COUNT {
                return Err(Error::Config(format!(
                    "frames must be in 1..={}",
                    FrameLabel::COUNT
                )));
            }
            let mut spec = SynthSpec::desk_scale(n_frames);
            macro_rules! take {
                ($key:literal, $field:expr, $parser:ident) => {
                    if let Some(value) = synth.remove($key) {
                        $field = $parser(&value, $key)?;
                    }
                };
            }
            take!("articles", spec.n_articles, parse_usize);
            take!("users", spec.n_users, parse_usize);
            take!("impressions", spec.n_impressions, parse_usize);
            take!("dim", spec.dim, parse_usize);
            take!("topics", spec.n_topics, parse_usize);
            take!("topic_frame_mix", spec.topic_frame_mix, parse_f64);
            take!("content_noise", spec.content_noise, parse_f64);
            take!("frame_noise", spec.frame_noise, parse_f64);
            take!("sentiment_noise", spec.sentiment_noise, parse_f64);
            take!(
                "affinity_concentration",
                spec.affinity_concentration,
                parse_f64
            );
            take!("candidates", spec.n_candidates, parse_usize);
            take!("max_clicks", spec.max_clicks, parse_usize);
            take!("click_temperature", spec.click_temperature, parse_f64);
            if let Some(value) = synth.remove("history_min") {
                spec.history_len.0 = parse_usize(&value, "history_min")?;
            }
            if let Some(value) = synth.remove("history_max_len") {
                spec.history_len.1 = parse_usize(&value, "history_max_len")?;
            }
            if let Some(unknown) = synth.keys().next() {
                return Err(Error::Config(format!("unknown [synth] key `{unknown}`")));
            }
            CorpusSource::Synthetic(spec)
        }
        (None, None) => {
            return Err(Error::Config(
                "config needs a [corpus] or [synth] section".into(),
            ))
        }
    };

    let mut config = match source {
        CorpusSource::Files(paths) => ExperimentConfig::from_files(paths),
        CorpusSource::Synthetic(spec) => ExperimentConfig::synthetic(spec),
    };

    if let Some(value) = root.remove("lambda_grid") {
        config.lambda_grid = value
            .split(',')
            .map(|v| parse_f64(v.trim(), "lambda_grid"))
            .collect::<Result<_>>()?;
    }
    if let Some(value) = root.remove("seeds") {
        config.seeds = value
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("bad seed `{v}`")))
            })
            .collect::<Result<_>>()?;
    }
    if let Some(value) = root.remove("top_k") {
        config.top_k = parse_usize(&value, "top_k")?;
    }
    if let Some(value) = root.remove("n_bins") {
        config.n_bins = parse_usize(&value, "n_bins")?;
    }
    if let Some(value) = root.remove("discount") {
        config.discount = Discount::parse(&value)?;
    }
    if let Some(value) = root.remove("history_max") {
        config.history_max = parse_usize(&value, "history_max")?;
    }
    if let Some(value) = root.remove("split_train") {
        config.split_train = parse_f64(&value, "split_train")?;
    }
    if let Some(value) = root.remove("split_val") {
        config.split_val = parse_f64(&value, "split_val")?;
    }
    if let Some(value) = root.remove("disable_frame") {
        config.disable_frame = parse_bool(&value, "disable_frame")?;
    }
    if let Some(value) = root.remove("stats_sentiment") {
        config.stats_signed_sentiment = match value.as_str() {
            "signed" => true,
            "absolute" => false,
            other => {
                return Err(Error::Config(format!(
                    "stats_sentiment must be `signed` or `absolute`, got `{other}`"
                )))
            }
        };
    }
    if let Some(value) = root.remove("output_dir") {
        config.output_dir = PathBuf::from(value);
    }
    if let Some(unknown) = root.keys().next() {
        return Err(Error::Config(format!("unknown key `{unknown}`")));
    }

    if let Some(mut shaper) = shaper_section {
        let enabled = shaper
            .remove("enabled")
            .map(|v| parse_bool(&v, "enabled"))
            .transpose()?
            .unwrap_or(true);
        let mut sc = ShaperConfig::default();
        if let Some(value) = shaper.remove("shape_frame") {
            sc.shape_frame = parse_bool(&value, "shape_frame")?;
        }
        if let Some(value) = shaper.remove("shape_click") {
            sc.shape_click = parse_bool(&value, "shape_click")?;
        }
        if let Some(value) = shaper.remove("epochs") {
            sc.epochs = parse_usize(&value, "epochs")?;
        }
        if let Some(value) = shaper.remove("learning_rate") {
            sc.learning_rate = parse_f64(&value, "learning_rate")?;
        }
        if let Some(value) = shaper.remove("patience") {
            sc.patience = parse_usize(&value, "patience")?;
        }
        if let Some(value) = shaper.remove("tau") {
            sc.tau = parse_f64(&value, "tau")?;
        }
        if let Some(value) = shaper.remove("instances_per_class") {
            sc.instances_per_class = parse_usize(&value, "instances_per_class")?;
        }
        if let Some(value) = shaper.remove("classes_per_batch") {
            sc.classes_per_batch = parse_usize(&value, "classes_per_batch")?;
        }
        if let Some(value) = shaper.remove("neg_ratio") {
            sc.neg_ratio = parse_usize(&value, "neg_ratio")?;
        }
        if let Some(unknown) = shaper.keys().next() {
            return Err(Error::Config(format!("unknown [shaper] key `{unknown}`")));
        }
        if enabled {
            config.shaper = Some(sc);
        }
    }

    config.validate()?;
    Ok(config)
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("bad boolean for `{key}`: `{other}`"))),
    }
}

/// Reads and parses a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
