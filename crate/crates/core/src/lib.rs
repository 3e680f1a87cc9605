//! Frame-aware news re-ranking and evaluation engine.
//!
//! Candidates are scored against a user's click history in two embedding
//! spaces (content relevance and frame similarity), z-score normalized per
//! impression, and linearly aggregated under a tunable weight lambda:
//! negative values diversify frames, positive values personalize. Ranked
//! slates are then measured with descriptive ranking metrics (AUC, MRR,
//! nDCG@k), normative diversity metrics (calibration, representation,
//! activation) built on Jensen-Shannon divergence, and frame-novelty
//! statistics.

pub mod corpus;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod frame;
pub mod metrics;
pub mod scoring;
pub mod shaper;
pub mod stats;

pub use corpus::{
    load_corpus, synthesize_corpus, write_corpus, Article, Corpus, CorpusPaths, EmbeddingMatrix,
    Impression, LoadConfig, SpaceTag, Split, SynthSpec,
};
pub use dist::CategoricalDistribution;
pub use error::{Error, Result};
pub use frame::FrameLabel;
pub use metrics::{NormativeConfig, NormativeReport, NoveltyReport, RankReport};
pub use scoring::{rank_slate, RankedSlate, ScoreBreakdown};
