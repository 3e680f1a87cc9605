//! Benchmark fixtures shared by the criterion targets.

use framerank::corpus::{synthesize_corpus, SynthSpec};
use framerank::Corpus;

/// Mid-sized synthetic corpus used by the ranking benchmarks.
pub fn bench_corpus() -> Corpus {
    let mut spec = SynthSpec::desk_scale(8);
    spec.n_articles = 1_000;
    spec.n_users = 100;
    spec.n_impressions = 300;
    spec.dim = 32;
    spec.n_candidates = 50;
    synthesize_corpus(&spec, 42).expect("bench corpus")
}
