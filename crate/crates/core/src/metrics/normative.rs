//! Normative diversity metrics: the generalized divergence D_f*, and
//! calibration / representation / activation built on Jensen-Shannon
//! divergence over categorical feature distributions.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::corpus::{Corpus, Impression};
use crate::dist::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::scoring::RankedSlate;

/// Smoothing constant for asymmetric divergence generators.
pub const KL_EPSILON: f64 = 1e-12;

/// Rank discount family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discount {
    /// w_r proportional to 1 / log2(r + 1).
    Log2,
    /// w_r proportional to 1 / r.
    Inverse,
    /// Equal weights.
    Uniform,
}

impl Discount {
    pub fn as_str(self) -> &'static str {
        match self {
            Discount::Log2 => "log2",
            Discount::Inverse => "inverse",
            Discount::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "log2" => Ok(Discount::Log2),
            "inverse" => Ok(Discount::Inverse),
            "uniform" => Ok(Discount::Uniform),
            other => Err(Error::Config(format!("unknown discount `{other}`"))),
        }
    }
}

/// Per-rank weights: strictly positive, non-increasing, normalized to sum 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RankWeights {
    discount: Discount,
    weights: Vec<f64>,
}

impl RankWeights {
    pub fn new(discount: Discount, n: usize) -> Self {
        let raw: Vec<f64> = (1..=n)
            .map(|r| match discount {
                Discount::Log2 => 1.0 / ((r + 1) as f64).log2(),
                Discount::Inverse => 1.0 / r as f64,
                Discount::Uniform => 1.0,
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Self {
            discount,
            weights: raw.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same discount family renormalized over the first `n` ranks.
    pub fn prefix(&self, n: usize) -> Self {
        if n >= self.len() {
            self.clone()
        } else {
            Self::new(self.discount, n)
        }
    }
}

/// Relative frequencies, or rank-weighted masses when weights are given.
/// Weights must align with the label order.
pub fn categorical_distribution<S: AsRef<str>>(
    labels: &[S],
    weights: Option<&RankWeights>,
) -> Result<CategoricalDistribution> {
    match weights {
        None => CategoricalDistribution::from_labels(labels.iter().map(|l| l.as_ref())),
        Some(w) => {
            if w.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: labels.len(),
                });
            }
            CategoricalDistribution::from_weighted(
                labels
                    .iter()
                    .map(|l| l.as_ref())
                    .zip(w.weights().iter().copied()),
            )
        }
    }
}

/// Jensen-Shannon divergence, log base 2, over the union support. Bounded in
/// [0, 1]; zero iff the inputs are equal.
pub fn jsd(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    p.check_normalized()?;
    q.check_normalized()?;
    let labels: BTreeSet<&str> = p.labels().chain(q.labels()).collect();
    let mut total = 0.0;
    for label in labels {
        let pi = p.mass(label);
        let qi = q.mass(label);
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            total += 0.5 * pi * (pi / m).log2();
        }
        if qi > 0.0 {
            total += 0.5 * qi * (qi / m).log2();
        }
    }
    Ok(total.max(0.0))
}

/// Divergence generator for [`divergence_dstar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    /// Generator reproducing Jensen-Shannon divergence exactly.
    Jsd,
    /// Kullback-Leibler of the recommendation from the context, with
    /// epsilon-smoothed inputs.
    Kl,
}

/// Generalized f-divergence `sum_x Q*(x) * f(P*(x) / Q*(x))` with `P` the
/// context and `Q` the recommendation.
pub fn divergence_dstar(
    context: &CategoricalDistribution,
    recommendation: &CategoricalDistribution,
    kind: DivergenceKind,
) -> Result<f64> {
    context.check_normalized()?;
    recommendation.check_normalized()?;
    match kind {
        DivergenceKind::Jsd => {
            let labels: BTreeSet<&str> = context.labels().chain(recommendation.labels()).collect();
            let mut total = 0.0;
            for label in labels {
                let p = context.mass(label);
                let q = recommendation.mass(label);
                total += if q > 0.0 && p > 0.0 {
                    let t = p / q;
                    q * 0.5 * (t * t.log2() - (1.0 + t) * ((1.0 + t) / 2.0).log2())
                } else if q > 0.0 {
                    // f(0) = log2(2) / 2
                    q * 0.5
                } else {
                    // lim_{q -> 0} q * f(p/q) = p / 2
                    p * 0.5
                };
            }
            Ok(total.max(0.0))
        }
        DivergenceKind::Kl => {
            let labels: BTreeSet<&str> = context.labels().chain(recommendation.labels()).collect();
            let support: Vec<&str> = labels.into_iter().collect();
            let p = context.smoothed(support.iter().copied(), KL_EPSILON);
            let q = recommendation.smoothed(support.iter().copied(), KL_EPSILON);
            let mut total = 0.0;
            for label in &support {
                let pi = p.mass(label);
                let qi = q.mass(label);
                total += qi * (qi / pi).log2();
            }
            Ok(total.max(0.0))
        }
    }
}

/// Feature dimension for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Category,
    Frame,
}

fn feature_label<'a>(corpus: &'a Corpus, id: &str, feature: Feature) -> Result<&'a str> {
    let article = corpus.article(id)?;
    Ok(match feature {
        Feature::Category => article.category.as_str(),
        Feature::Frame => article.frame.as_str(),
    })
}

/// Divergence between the (unweighted) history feature distribution and the
/// rank-weighted top-k slate feature distribution. The evaluated k is
/// `weights.len()` clamped to the slate length.
pub fn calibration(
    impression: &Impression,
    corpus: &Corpus,
    slate: &RankedSlate,
    feature: Feature,
    weights: &RankWeights,
) -> Result<f64> {
    if impression.history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let history_labels: Vec<&str> = impression
        .history
        .iter()
        .map(|id| feature_label(corpus, id, feature))
        .collect::<Result<_>>()?;
    let history_dist = categorical_distribution(&history_labels, None)?;

    let k = weights.len().min(slate.entries.len());
    let slate_labels: Vec<&str> = slate
        .top_k(k)
        .map(|id| feature_label(corpus, id, feature))
        .collect::<Result<_>>()?;
    let slate_dist = categorical_distribution(&slate_labels, Some(&weights.prefix(k)))?;

    jsd(&history_dist, &slate_dist)
}

/// Divergence between the corpus frame distribution and the unweighted top-k
/// slate frame distribution.
pub fn representation(corpus: &Corpus, slate: &RankedSlate, top_k: usize) -> Result<f64> {
    representation_with(&corpus.frame_distribution(), corpus, slate, top_k)
}

fn representation_with(
    corpus_dist: &CategoricalDistribution,
    corpus: &Corpus,
    slate: &RankedSlate,
    top_k: usize,
) -> Result<f64> {
    let labels: Vec<&str> = slate
        .top_k(top_k)
        .map(|id| corpus.article(id).map(|a| a.frame.as_str()))
        .collect::<Result<_>>()?;
    let slate_dist = categorical_distribution(&labels, None)?;
    jsd(corpus_dist, &slate_dist)
}

fn sentiment_bin(sentiment: f64, n_bins: usize) -> String {
    let abs = sentiment.abs().clamp(0.0, 1.0);
    let bin = ((abs * n_bins as f64) as usize).min(n_bins - 1);
    format!("b{bin:03}")
}

fn activation_distribution<I>(sentiments: I, n_bins: usize) -> Result<CategoricalDistribution>
where
    I: Iterator<Item = f64>,
{
    let labels: Vec<String> = sentiments.map(|s| sentiment_bin(s, n_bins)).collect();
    categorical_distribution(&labels, None)
}

/// Divergence between the binned |sentiment| distribution of the corpus and
/// of the unweighted top-k slate. Bins are equal width over [0, 1].
pub fn activation(
    corpus: &Corpus,
    slate: &RankedSlate,
    n_bins: usize,
    top_k: usize,
) -> Result<f64> {
    if n_bins < 2 {
        return Err(Error::Invalid(format!("n_bins {n_bins} < 2")));
    }
    let corpus_dist =
        activation_distribution(corpus.articles().iter().map(|a| a.sentiment), n_bins)?;
    activation_with(&corpus_dist, corpus, slate, n_bins, top_k)
}

fn activation_with(
    corpus_dist: &CategoricalDistribution,
    corpus: &Corpus,
    slate: &RankedSlate,
    n_bins: usize,
    top_k: usize,
) -> Result<f64> {
    let sentiments: Vec<f64> = slate
        .top_k(top_k)
        .map(|id| corpus.article(id).map(|a| a.sentiment))
        .collect::<Result<_>>()?;
    let slate_dist = activation_distribution(sentiments.into_iter(), n_bins)?;
    jsd(corpus_dist, &slate_dist)
}

/// Settings shared by the normative metrics.
#[derive(Debug, Clone)]
pub struct NormativeConfig {
    pub top_k: usize,
    pub n_bins: usize,
    pub discount: Discount,
}

impl Default for NormativeConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            n_bins: 10,
            discount: Discount::Log2,
        }
    }
}

/// Per-impression normative values.
#[derive(Debug, Clone, PartialEq)]
pub struct NormativeRow {
    pub impression_id: String,
    pub cal_category: f64,
    pub cal_frame: f64,
    pub rep_frame: f64,
    pub activation: f64,
}

/// Macro-averaged normative metrics with per-impression rows retained.
#[derive(Debug, Clone, PartialEq)]
pub struct NormativeReport {
    pub cal_category: f64,
    pub cal_frame: f64,
    pub rep_frame: f64,
    pub activation: f64,
    pub per_impression: Vec<NormativeRow>,
}

/// Evaluates all four normative metrics for aligned impressions and slates.
pub fn evaluate_normative(
    corpus: &Corpus,
    impressions: &[Impression],
    slates: &[RankedSlate],
    config: &NormativeConfig,
) -> Result<NormativeReport> {
    if impressions.len() != slates.len() {
        return Err(Error::LengthMismatch {
            left: impressions.len(),
            right: slates.len(),
        });
    }
    if impressions.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    if config.n_bins < 2 {
        return Err(Error::Invalid(format!("n_bins {} < 2", config.n_bins)));
    }

    let corpus_frames = corpus.frame_distribution();
    let corpus_activation =
        activation_distribution(corpus.articles().iter().map(|a| a.sentiment), config.n_bins)?;
    let weights = RankWeights::new(config.discount, config.top_k);

    let rows: Vec<NormativeRow> = impressions
        .par_iter()
        .zip(slates.par_iter())
        .map(|(impression, slate)| {
            Ok(NormativeRow {
                impression_id: impression.impression_id.clone(),
                cal_category: calibration(impression, corpus, slate, Feature::Category, &weights)?,
                cal_frame: calibration(impression, corpus, slate, Feature::Frame, &weights)?,
                rep_frame: representation_with(&corpus_frames, corpus, slate, config.top_k)?,
                activation: activation_with(
                    &corpus_activation,
                    corpus,
                    slate,
                    config.n_bins,
                    config.top_k,
                )?,
            })
        })
        .collect::<Result<_>>()?;

    let n = rows.len() as f64;
    Ok(NormativeReport {
        cal_category: rows.iter().map(|r| r.cal_category).sum::<f64>() / n,
        cal_frame: rows.iter().map(|r| r.cal_frame).sum::<f64>() / n,
        rep_frame: rows.iter().map(|r| r.rep_frame).sum::<f64>() / n,
        activation: rows.iter().map(|r| r.activation).sum::<f64>() / n,
        per_impression: rows,
    })
}
