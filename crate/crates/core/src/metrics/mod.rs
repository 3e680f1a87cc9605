//! Descriptive, normative, and novelty evaluation of ranked slates.

pub mod normative;
pub mod novelty;
pub mod rank;

pub use normative::{
    activation, calibration, categorical_distribution, divergence_dstar, evaluate_normative, jsd,
    representation, Discount, DivergenceKind, Feature, NormativeConfig, NormativeReport,
    NormativeRow, RankWeights,
};
pub use novelty::{
    evaluate_novelty, history_kl, novel_frames, unique_frames, NoveltyReport, UserNovelty,
};
pub use rank::{auc, evaluate_descriptive, mrr, ndcg_at_k, RankReport};
