//! Frame-novelty measurements: unique frames, novel frames, and the
//! history-to-recommendation KL divergence.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Corpus, Impression};
use crate::dist::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::frame::FrameLabel;
use crate::metrics::normative::KL_EPSILON;
use crate::scoring::RankedSlate;

/// Count of distinct frame labels among the top-k slate entries.
pub fn unique_frames(slate: &RankedSlate, corpus: &Corpus, k: usize) -> Result<usize> {
    let frames: BTreeSet<FrameLabel> = slate
        .top_k(k)
        .map(|id| corpus.article(id).map(|a| a.frame))
        .collect::<Result<_>>()?;
    Ok(frames.len())
}

/// Count of top-k slate frames absent from the user's history.
pub fn novel_frames(
    impression: &Impression,
    corpus: &Corpus,
    slate: &RankedSlate,
    k: usize,
) -> Result<usize> {
    if impression.history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let history: BTreeSet<FrameLabel> = impression
        .history
        .iter()
        .map(|id| corpus.article(id).map(|a| a.frame))
        .collect::<Result<_>>()?;
    let slate_frames: BTreeSet<FrameLabel> = slate
        .top_k(k)
        .map(|id| corpus.article(id).map(|a| a.frame))
        .collect::<Result<_>>()?;
    Ok(slate_frames.difference(&history).count())
}

/// KL(slate frame distribution || history frame distribution), both
/// epsilon-smoothed over their union support, log base 2.
pub fn history_kl(
    impression: &Impression,
    corpus: &Corpus,
    slate: &RankedSlate,
    k: usize,
) -> Result<f64> {
    if impression.history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let history_labels: Vec<&str> = impression
        .history
        .iter()
        .map(|id| corpus.article(id).map(|a| a.frame.as_str()))
        .collect::<Result<_>>()?;
    let slate_labels: Vec<&str> = slate
        .top_k(k)
        .map(|id| corpus.article(id).map(|a| a.frame.as_str()))
        .collect::<Result<_>>()?;
    let history_dist = CategoricalDistribution::from_labels(history_labels)?;
    let slate_dist = CategoricalDistribution::from_labels(slate_labels)?;

    let support: BTreeSet<&str> = history_dist.labels().chain(slate_dist.labels()).collect();
    let support: Vec<&str> = support.into_iter().collect();
    let h = history_dist.smoothed(support.iter().copied(), KL_EPSILON);
    let s = slate_dist.smoothed(support.iter().copied(), KL_EPSILON);

    let mut total = 0.0;
    for label in &support {
        let si = s.mass(label);
        let hi = h.mass(label);
        total += si * (si / hi).log2();
    }
    Ok(total.max(0.0))
}

/// Per-user novelty values (means over the user's impressions).
#[derive(Debug, Clone, PartialEq)]
pub struct UserNovelty {
    pub user_id: String,
    pub unique_frames: f64,
    pub novel_frames: f64,
    pub kl: f64,
    pub n_impressions: usize,
}

/// Novelty metrics aggregated per impression, then macro-averaged per user.
#[derive(Debug, Clone, PartialEq)]
pub struct NoveltyReport {
    pub avg_unique_frames: f64,
    pub avg_novel_frames: f64,
    pub avg_kl: f64,
    pub per_user: Vec<UserNovelty>,
}

/// Evaluates novelty for aligned impressions and slates.
pub fn evaluate_novelty(
    corpus: &Corpus,
    impressions: &[Impression],
    slates: &[RankedSlate],
    k: usize,
) -> Result<NoveltyReport> {
    if impressions.len() != slates.len() {
        return Err(Error::LengthMismatch {
            left: impressions.len(),
            right: slates.len(),
        });
    }
    if impressions.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }

    let mut per_user: BTreeMap<&str, (f64, f64, f64, usize)> = BTreeMap::new();
    for (impression, slate) in impressions.iter().zip(slates) {
        let unique = unique_frames(slate, corpus, k)? as f64;
        let novel = novel_frames(impression, corpus, slate, k)? as f64;
        let kl = history_kl(impression, corpus, slate, k)?;
        let entry = per_user
            .entry(impression.user_id.as_str())
            .or_insert((0.0, 0.0, 0.0, 0));
        entry.0 += unique;
        entry.1 += novel;
        entry.2 += kl;
        entry.3 += 1;
    }

    let per_user: Vec<UserNovelty> = per_user
        .into_iter()
        .map(|(user_id, (unique, novel, kl, n))| UserNovelty {
            user_id: user_id.to_string(),
            unique_frames: unique / n as f64,
            novel_frames: novel / n as f64,
            kl: kl / n as f64,
            n_impressions: n,
        })
        .collect();

    let n_users = per_user.len() as f64;
    Ok(NoveltyReport {
        avg_unique_frames: per_user.iter().map(|u| u.unique_frames).sum::<f64>() / n_users,
        avg_novel_frames: per_user.iter().map(|u| u.novel_frames).sum::<f64>() / n_users,
        avg_kl: per_user.iter().map(|u| u.kl).sum::<f64>() / n_users,
        per_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Article, EmbeddingMatrix, SpaceTag, Split};
    use crate::scoring::ScoreBreakdown;
    use proptest::prelude::*;

    fn corpus_with_frames(frames: &[usize]) -> Corpus {
        let articles: Vec<Article> = frames
            .iter()
            .enumerate()
            .map(|(i, &f)| Article {
                article_id: format!("a{i}"),
                category: "c".into(),
                frame: FrameLabel::ALL[f],
                sentiment: 0.0,
                row_index: i,
            })
            .collect();
        let n = articles.len();
        let values = vec![0.1f32; n * 2];
        Corpus::new(
            articles,
            EmbeddingMatrix::new(n, 2, values.clone(), SpaceTag::Content).unwrap(),
            EmbeddingMatrix::new(n, 2, values, SpaceTag::Frame).unwrap(),
            vec![],
        )
        .unwrap()
    }

    fn slate_of(ids: &[&str]) -> RankedSlate {
        RankedSlate {
            impression_id: "i0".into(),
            entries: ids
                .iter()
                .enumerate()
                .map(|(rank, id)| {
                    (
                        id.to_string(),
                        ScoreBreakdown {
                            content_raw: 0.0,
                            frame_raw: 0.0,
                            content_z: 0.0,
                            frame_z: 0.0,
                            final_score: -(rank as f64),
                        },
                    )
                })
                .collect(),
            lambda: 0.0,
        }
    }

    fn impression(history: &[&str], user: &str) -> Impression {
        Impression {
            impression_id: "i0".into(),
            user_id: user.into(),
            history: history.iter().map(|s| s.to_string()).collect(),
            candidates: vec!["a0".into()],
            clicks: vec![true],
            split: Split::Test,
        }
    }

    #[test]
    fn unique_frames_counts_distinct_labels() {
        let corpus = corpus_with_frames(&[0, 0, 1]);
        let slate = slate_of(&["a0", "a1", "a2"]);
        assert_eq!(unique_frames(&slate, &corpus, 3).unwrap(), 2);
    }

    #[test]
    fn unique_frames_upper_bound_is_fifteen() {
        let frames: Vec<usize> = (0..15).collect();
        let corpus = corpus_with_frames(&frames);
        let ids: Vec<String> = (0..15).map(|i| format!("a{i}")).collect();
        let slate = slate_of(&ids.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(unique_frames(&slate, &corpus, 15).unwrap(), 15);
    }

    #[test]
    fn novel_frames_set_difference() {
        // history frames {A}; slate frames {A, B, C} -> 2 novel.
        let corpus = corpus_with_frames(&[0, 0, 1, 2]);
        let imp = impression(&["a0"], "u0");
        let slate = slate_of(&["a1", "a2", "a3"]);
        assert_eq!(novel_frames(&imp, &corpus, &slate, 3).unwrap(), 2);
    }

    #[test]
    fn novel_frames_subset_is_zero() {
        let corpus = corpus_with_frames(&[0, 1, 0, 1]);
        let imp = impression(&["a0", "a1"], "u0");
        let slate = slate_of(&["a2", "a3"]);
        assert_eq!(novel_frames(&imp, &corpus, &slate, 2).unwrap(), 0);
    }

    #[test]
    fn novel_frames_empty_history_errors() {
        let corpus = corpus_with_frames(&[0]);
        let imp = impression(&[], "u0");
        let slate = slate_of(&["a0"]);
        assert!(matches!(
            novel_frames(&imp, &corpus, &slate, 1),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn history_kl_identical_distributions_is_zero() {
        let corpus = corpus_with_frames(&[0, 1, 0, 1]);
        let imp = impression(&["a0", "a1"], "u0");
        let slate = slate_of(&["a2", "a3"]);
        assert!(history_kl(&imp, &corpus, &slate, 2).unwrap() < 1e-9);
    }

    #[test]
    fn history_kl_disjoint_support_is_large_but_finite() {
        let corpus = corpus_with_frames(&[0, 1]);
        let imp = impression(&["a0"], "u0");
        let slate = slate_of(&["a1"]);
        let value = history_kl(&imp, &corpus, &slate, 1).unwrap();
        // Scale of log2(1/eps) under the 1e-12 smoothing.
        assert!(value.is_finite());
        assert!(value > 30.0 && value < 45.0);
    }

    #[test]
    fn history_kl_hand_computed_fixture() {
        // history {A: 0.5, B: 0.5}, slate {A: 0.9, B: 0.1} -> 0.531.
        let corpus = corpus_with_frames(&[0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]);
        let imp = impression(&["a0", "a1"], "u0");
        let ids: Vec<String> = (2..12).map(|i| format!("a{i}")).collect();
        let slate = slate_of(&ids.iter().map(String::as_str).collect::<Vec<_>>());
        let value = history_kl(&imp, &corpus, &slate, 10).unwrap();
        let expected = 0.9 * (0.9f64 / 0.5).log2() + 0.1 * (0.1f64 / 0.5).log2();
        assert!((value - expected).abs() < 1e-6);
        assert!((value - 0.531).abs() < 1e-3);
    }

    proptest! {
        /// novel <= unique always; novel = 0 when slate frames are a subset
        /// of history frames; kl >= 0.
        #[test]
        fn novelty_bounds(
            history_frames in proptest::collection::vec(0usize..5, 1..6),
            slate_frames in proptest::collection::vec(0usize..5, 1..6),
        ) {
            let mut frames = history_frames.clone();
            frames.extend(&slate_frames);
            let corpus = corpus_with_frames(&frames);
            let history_ids: Vec<String> =
                (0..history_frames.len()).map(|i| format!("a{i}")).collect();
            let slate_ids: Vec<String> = (history_frames.len()..frames.len())
                .map(|i| format!("a{i}"))
                .collect();
            let imp = impression(
                &history_ids.iter().map(String::as_str).collect::<Vec<_>>(),
                "u0",
            );
            let slate = slate_of(&slate_ids.iter().map(String::as_str).collect::<Vec<_>>());

            let unique = unique_frames(&slate, &corpus, 10).unwrap();
            let novel = novel_frames(&imp, &corpus, &slate, 10).unwrap();
            let kl = history_kl(&imp, &corpus, &slate, 10).unwrap();
            prop_assert!(novel <= unique);
            prop_assert!(kl >= 0.0);

            // Brute-force set oracle over the raw frame indices.
            let mut distinct = slate_frames.clone();
            distinct.sort_unstable();
            distinct.dedup();
            prop_assert_eq!(unique, distinct.len());
            let history_set: std::collections::BTreeSet<usize> =
                history_frames.iter().copied().collect();
            let oracle_novel = distinct.iter().filter(|f| !history_set.contains(f)).count();
            prop_assert_eq!(novel, oracle_novel);

            if slate_frames.iter().all(|f| history_set.contains(f)) {
                prop_assert_eq!(novel, 0);
            }
        }
    }

    #[test]
    fn evaluate_novelty_macro_averages_per_user() {
        let corpus = corpus_with_frames(&[0, 1, 2]);
        // u0 has two impressions with 1 and 2 novel frames; u1 has one with 0.
        let mut i0 = impression(&["a0"], "u0");
        i0.impression_id = "i0".into();
        let mut i1 = impression(&["a0"], "u0");
        i1.impression_id = "i1".into();
        let mut i2 = impression(&["a0"], "u1");
        i2.impression_id = "i2".into();
        let slates = vec![
            slate_of(&["a1"]),
            slate_of(&["a1", "a2"]),
            slate_of(&["a0"]),
        ];
        let report = evaluate_novelty(&corpus, &[i0, i1, i2], &slates, 10).unwrap();
        assert_eq!(report.per_user.len(), 2);
        // u0 mean novel = (1 + 2) / 2 = 1.5; u1 = 0; average = 0.75.
        assert_eq!(report.avg_novel_frames, 0.75);
        assert_eq!(report.per_user[0].n_impressions, 2);
    }
}
