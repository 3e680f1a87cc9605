//! Descriptive ranking metrics: AUC, MRR, nDCG@k, macro-averaged per
//! impression.

use std::collections::BTreeMap;

use crate::corpus::Impression;
use crate::error::{Error, Result};
use crate::scoring::RankedSlate;

/// Macro-averaged descriptive metrics over an evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub auc: f64,
    pub mrr: f64,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub n_impressions: usize,
    /// Impressions excluded from the AUC mean because every candidate shared
    /// one label.
    pub n_auc_skipped: usize,
}

/// Probability that a random positive outranks a random negative; ties count
/// one half. Errors when either class is missing.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let positives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let negatives: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::AucUndefined);
    }
    let mut wins = 0.0f64;
    for &p in &positives {
        for &n in &negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (positives.len() * negatives.len()) as f64)
}

/// Reciprocal rank of the first positive; 0 when there is none.
pub fn mrr(ranked_labels: &[bool]) -> f64 {
    ranked_labels
        .iter()
        .position(|&l| l)
        .map(|pos| 1.0 / (pos + 1) as f64)
        .unwrap_or(0.0)
}

/// Binary-gain nDCG with the 1/log2(rank+1) discount; 0 when there is no
/// positive.
pub fn ndcg_at_k(ranked_labels: &[bool], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let n_pos = ranked_labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return 0.0;
    }
    let dcg: f64 = ranked_labels
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, &l)| l)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..n_pos.min(k))
        .map(|i| 1.0 / ((i + 2) as f64).log2())
        .sum();
    dcg / ideal
}

/// Click labels of a slate, in rank order.
pub fn slate_labels(slate: &RankedSlate, impression: &Impression) -> Result<Vec<bool>> {
    slate
        .entries
        .iter()
        .map(|(id, _)| {
            impression
                .candidates
                .iter()
                .position(|c| c == id)
                .map(|i| impression.clicks[i])
                .ok_or_else(|| Error::UnknownArticle(id.clone()))
        })
        .collect()
}

/// Unweighted mean of per-impression AUC, MRR and nDCG@k. Slates must be
/// aligned with their impressions.
pub fn evaluate_descriptive(
    slates: &[RankedSlate],
    impressions: &[Impression],
    ks: &[usize],
) -> Result<RankReport> {
    if slates.len() != impressions.len() {
        return Err(Error::LengthMismatch {
            left: slates.len(),
            right: impressions.len(),
        });
    }
    if slates.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }

    let mut auc_sum = 0.0;
    let mut auc_n = 0usize;
    let mut auc_skipped = 0usize;
    let mut mrr_sum = 0.0;
    let mut ndcg_sums: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();

    for (slate, impression) in slates.iter().zip(impressions) {
        let labels = slate_labels(slate, impression)?;
        let scores: Vec<f64> = slate.entries.iter().map(|(_, s)| s.final_score).collect();
        match auc(&scores, &labels) {
            Ok(value) => {
                auc_sum += value;
                auc_n += 1;
            }
            Err(Error::AucUndefined) => auc_skipped += 1,
            Err(e) => return Err(e),
        }
        mrr_sum += mrr(&labels);
        for (&k, sum) in ndcg_sums.iter_mut() {
            *sum += ndcg_at_k(&labels, k);
        }
    }

    let n = slates.len();
    Ok(RankReport {
        auc: if auc_n > 0 {
            auc_sum / auc_n as f64
        } else {
            0.0
        },
        mrr: mrr_sum / n as f64,
        ndcg_at: ndcg_sums
            .into_iter()
            .map(|(k, sum)| (k, sum / n as f64))
            .collect(),
        n_impressions: n,
        n_auc_skipped: auc_skipped,
    })
}
