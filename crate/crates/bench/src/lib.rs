//! Deterministic fixtures for the pipeline benchmarks.

use corefmerge_core::corpus::{Corpus, EmbeddingTable, PosTagset};
use corefmerge_core::neural::{ModelKind, PairInstance, PairwiseModel};
use corefmerge_core::scorers::build_training_set;
use corefmerge_core::synth::{gen_synthetic, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EMBEDDING_DIM: usize = 16;

/// A plain synthetic corpus with its embedding table.
pub fn corpus(
    n_topics: usize,
    docs_per_topic: usize,
    chains_per_topic: usize,
    mentions_per_chain: usize,
) -> (Corpus, EmbeddingTable) {
    let spec = SyntheticSpec {
        n_topics,
        docs_per_topic,
        chains_per_topic,
        mentions_per_chain,
        embedding_dim: EMBEDDING_DIM,
        seed: 11,
        ..SyntheticSpec::default()
    };
    gen_synthetic(&spec).expect("feasible spec")
}

/// A corpus whose topics carry the second-order fixture chains.
pub fn fixture_corpus() -> (Corpus, EmbeddingTable) {
    let spec = SyntheticSpec {
        n_topics: 2,
        docs_per_topic: 4,
        chains_per_topic: 2,
        mentions_per_chain: 6,
        second_order_fixtures: true,
        embedding_dim: EMBEDDING_DIM,
        seed: 11,
        ..SyntheticSpec::default()
    };
    gen_synthetic(&spec).expect("feasible spec")
}

/// The tagset the synthetic corpora use.
pub fn tagset() -> PosTagset {
    PosTagset::new(vec!["NNP".to_string(), "VBD".to_string()]).expect("valid tags")
}

/// An untrained model with default layer sizes (forward cost is identical
/// either way).
pub fn model(kind: ModelKind) -> PairwiseModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    PairwiseModel::new(kind, EMBEDDING_DIM, vec!["NNP".to_string(), "VBD".to_string()], &mut rng)
}

/// Labeled pair instances drawn from a corpus.
pub fn instances(corpus: &Corpus, table: &EmbeddingTable, kind: ModelKind) -> Vec<PairInstance> {
    build_training_set(corpus, table, &tagset(), kind, 5).expect("instances")
}
