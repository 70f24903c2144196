//! Pairwise scoring on top of the neural models: feature extraction from the
//! corpus, training-set construction, and the `PairScorer` interface consumed
//! by the merge engine.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ArgSets, Corpus, EmbeddingTable, EventMention, PosTagset, Role};
use crate::error::{Error, Result};
use crate::neural::{ModelKind, PairFeatures, PairInstance, PairwiseModel, CONTEXT_WINDOW};

/// Jaccard overlap of two sets; 0 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Per-role Jaccard overlap between two argument sets.
pub fn argument_overlap(a: &ArgSets, b: &ArgSets) -> [f64; 4] {
    std::array::from_fn(|i| {
        let role = Role::ALL[i];
        jaccard(a.get(role), b.get(role))
    })
}

/// One mention's numeric encoding together with its effective argument sets
/// (own arguments unioned with its current cluster's).
#[derive(Debug, Clone, PartialEq)]
pub struct MentionFeatures {
    pub features: PairFeatures,
    pub effective_args: ArgSets,
}

/// Turns corpus mentions into the numeric features the models consume.
pub struct FeatureExtractor<'a> {
    corpus: &'a Corpus,
    embeddings: &'a EmbeddingTable,
    tagset: &'a PosTagset,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(
        corpus: &'a Corpus,
        embeddings: &'a EmbeddingTable,
        tagset: &'a PosTagset,
    ) -> FeatureExtractor<'a> {
        FeatureExtractor { corpus, embeddings, tagset }
    }

    /// Event-word vector: embedding of the lowercased head lemma, then the
    /// one-hot POS encoding of the head token.
    pub fn word_vector(&self, mention: &EventMention) -> Vec<f64> {
        let head = self.corpus.head_token(mention);
        let mut v = Vec::with_capacity(self.embeddings.dim() + self.tagset.one_hot_dim());
        v.extend_from_slice(self.embeddings.get(&head.lemma));
        v.extend(self.tagset.one_hot(&head.pos));
        v
    }

    /// Context window: embeddings of the lowercased surface forms of the head
    /// token and up to three same-sentence tokens on each side verbatim by
    /// position, zero-padded at sentence boundaries.
    pub fn context_window(&self, mention: &EventMention) -> Vec<Vec<f64>> {
        let doc = self.corpus.document(&mention.doc_id).expect("mention doc exists");
        let head = mention.head_token;
        let (start, end) = doc.sentence_bounds[doc.tokens[head].sentence];
        let radius = (CONTEXT_WINDOW - 1) / 2;
        (0..CONTEXT_WINDOW)
            .map(|slot| {
                let offset = slot as isize - radius as isize;
                let idx = head as isize + offset;
                if idx < start as isize || idx >= end as isize {
                    vec![0.0; self.embeddings.dim()]
                } else {
                    self.embeddings.get(&doc.tokens[idx as usize].surface).to_vec()
                }
            })
            .collect()
    }

    pub fn encode(&self, mention: &EventMention) -> PairFeatures {
        PairFeatures {
            word: self.word_vector(mention),
            context: self.context_window(mention),
        }
    }

    /// Full mention encoding with effective arguments = own ∪ cluster-level.
    pub fn extract(&self, mention: &EventMention, cluster_args: &ArgSets) -> MentionFeatures {
        MentionFeatures {
            features: self.encode(mention),
            effective_args: ArgSets::union(&mention.arguments, cluster_args),
        }
    }

    /// Builds a scoring/training instance for a mention pair under the given
    /// (possibly cluster-level or augmented) argument sets.
    pub fn instance(
        &self,
        a: &EventMention,
        b: &EventMention,
        args_a: &ArgSets,
        args_b: &ArgSets,
        label: f64,
    ) -> PairInstance {
        PairInstance {
            a: self.encode(a),
            b: self.encode(b),
            arg_overlap: argument_overlap(args_a, args_b),
            label,
        }
    }
}

/// Scores a mention pair with a within-document model.
pub fn wd_score(model: &PairwiseModel, a: &MentionFeatures, b: &MentionFeatures) -> Result<f64> {
    if model.kind != ModelKind::Wd {
        return Err(Error::KindMismatch(format!("wd_score given a {} model", model.kind)));
    }
    let overlap = argument_overlap(&a.effective_args, &b.effective_args);
    model.score_parts(&a.features, &b.features, &overlap)
}

/// Scores a mention pair with a cross-document model.
pub fn cd_score(model: &PairwiseModel, a: &MentionFeatures, b: &MentionFeatures) -> Result<f64> {
    if model.kind != ModelKind::Cd {
        return Err(Error::KindMismatch(format!("cd_score given a {} model", model.kind)));
    }
    let overlap = argument_overlap(&a.effective_args, &b.effective_args);
    model.score_parts(&a.features, &b.features, &overlap)
}

/// 1.0 when the two mentions share a lowercased head lemma, else 0.0.
pub fn lemma_score(corpus: &Corpus, a: &EventMention, b: &EventMention) -> f64 {
    let la = corpus.head_token(a).lemma.to_lowercase();
    let lb = corpus.head_token(b).lemma.to_lowercase();
    if la == lb {
        1.0
    } else {
        0.0
    }
}

/// Head-layer weights by feature name, in head order, with the bias last.
pub fn dump_feature_weights(model: &PairwiseModel) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = crate::neural::head_feature_names(model.kind)
        .iter()
        .zip(&model.head.weights)
        .map(|(name, &w)| (name.to_string(), w))
        .collect();
    out.push(("bias".to_string(), model.head.bias));
    out
}

/// One labeled training pair with its effective argument sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub label: f64,
    pub args_a: ArgSets,
    pub args_b: ArgSets,
}

/// Builds the labeled mention pairs for one classifier kind.
///
/// Within-document: every same-document gold pair is a positive and every
/// other same-document pair a negative. Cross-document: a seeded 70% sample of
/// the cross-document gold pairs, with five negatives per positive drawn from
/// same-topic cross-document non-coreferent pairs. Afterwards a seeded half of
/// the mentions occurring in positive pairs have their argument sets augmented
/// with their partner's arguments (within those positive pairs).
pub fn build_training_pairs(
    corpus: &Corpus,
    kind: ModelKind,
    seed: u64,
) -> Result<Vec<LabeledPair>> {
    if corpus.gold_chains.is_empty() {
        return Err(Error::invalid("cannot build a training set: corpus has no gold chains"));
    }
    let mut chain_of: HashMap<&str, usize> = HashMap::new();
    for (c, chain) in corpus.gold_chains.iter().enumerate() {
        for id in chain {
            chain_of.insert(id, c);
        }
    }
    let coref = |a: &str, b: &str| match (chain_of.get(a), chain_of.get(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

    match kind {
        ModelKind::Wd => {
            for doc in corpus.documents() {
                for (i, a) in doc.mentions.iter().enumerate() {
                    for b in doc.mentions.iter().skip(i + 1) {
                        let label = if coref(a, b) { 1.0 } else { 0.0 };
                        let ra = corpus.mention_rank(a).expect("listed mention");
                        let rb = corpus.mention_rank(b).expect("listed mention");
                        pairs.push((ra, rb, label));
                    }
                }
            }
        }
        ModelKind::Cd => {
            let mentions = corpus.mentions();
            let mut positives: Vec<(usize, usize)> = Vec::new();
            for chain in &corpus.gold_chains {
                let ranks: Vec<usize> = chain
                    .iter()
                    .filter_map(|id| corpus.mention_rank(id))
                    .collect();
                for (i, &ra) in ranks.iter().enumerate() {
                    for &rb in ranks.iter().skip(i + 1) {
                        if mentions[ra].doc_id != mentions[rb].doc_id {
                            positives.push((ra.min(rb), ra.max(rb)));
                        }
                    }
                }
            }
            positives.sort_unstable();
            let take = (positives.len() as f64 * 0.7).floor() as usize;
            positives.shuffle(&mut rng);
            let mut sampled: Vec<(usize, usize)> = positives.into_iter().take(take).collect();
            sampled.sort_unstable();

            let topic_of = |m: &EventMention| {
                corpus
                    .document(&m.doc_id)
                    .and_then(|d| d.gold_topic.clone())
                    .unwrap_or_default()
            };
            let mut negatives: Vec<(usize, usize)> = Vec::new();
            for (ra, a) in mentions.iter().enumerate() {
                for (rb, b) in mentions.iter().enumerate().skip(ra + 1) {
                    if a.doc_id != b.doc_id
                        && topic_of(a) == topic_of(b)
                        && !coref(&a.id, &b.id)
                    {
                        negatives.push((ra, rb));
                    }
                }
            }
            let want = sampled.len() * 5;
            negatives.shuffle(&mut rng);
            let mut kept: Vec<(usize, usize)> = negatives.into_iter().take(want).collect();
            kept.sort_unstable();

            pairs.extend(sampled.into_iter().map(|(a, b)| (a, b, 1.0)));
            pairs.extend(kept.into_iter().map(|(a, b)| (a, b, 0.0)));
        }
    }

    // Argument augmentation over a seeded half of the positive-pair mentions.
    let mut positive_mentions: Vec<usize> = {
        let set: BTreeSet<usize> = pairs
            .iter()
            .filter(|(_, _, label)| *label > 0.5)
            .flat_map(|&(a, b, _)| [a, b])
            .collect();
        set.into_iter().collect()
    };
    positive_mentions.shuffle(&mut rng);
    let augmented: BTreeSet<usize> =
        positive_mentions.iter().take(positive_mentions.len() / 2).copied().collect();

    let mentions = corpus.mentions();
    Ok(pairs
        .into_iter()
        .map(|(ra, rb, label)| {
            let (a, b) = (&mentions[ra], &mentions[rb]);
            let mut args_a = a.arguments.clone();
            let mut args_b = b.arguments.clone();
            if label > 0.5 {
                if augmented.contains(&ra) {
                    args_a.union_with(&b.arguments);
                }
                if augmented.contains(&rb) {
                    args_b.union_with(&a.arguments);
                }
            }
            LabeledPair { a: a.id.clone(), b: b.id.clone(), label, args_a, args_b }
        })
        .collect())
}

/// Converts labeled pairs into numeric training instances.
pub fn pairs_to_instances(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    tagset: &PosTagset,
    pairs: &[LabeledPair],
) -> Result<Vec<PairInstance>> {
    let extractor = FeatureExtractor::new(corpus, embeddings, tagset);
    pairs
        .iter()
        .map(|p| {
            let a = corpus.mention_or_err(&p.a)?;
            let b = corpus.mention_or_err(&p.b)?;
            Ok(extractor.instance(a, b, &p.args_a, &p.args_b, p.label))
        })
        .collect()
}

/// End-to-end training-set construction for one classifier kind.
pub fn build_training_set(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    tagset: &PosTagset,
    kind: ModelKind,
    seed: u64,
) -> Result<Vec<PairInstance>> {
    let pairs = build_training_pairs(corpus, kind, seed)?;
    pairs_to_instances(corpus, embeddings, tagset, &pairs)
}

/// What the merge engine needs from a classifier: a symmetric score in [0, 1]
/// for two mentions under their current effective argument sets.
pub trait PairScorer {
    fn score(&self, a: &str, b: &str, args_a: &ArgSets, args_b: &ArgSets) -> Result<f64>;
}

/// Scores pairs with a pairwise model over precomputed mention encodings.
pub struct ModelScorer<'a> {
    model: &'a PairwiseModel,
    features: HashMap<String, PairFeatures>,
}

impl<'a> ModelScorer<'a> {
    pub fn new(
        model: &'a PairwiseModel,
        corpus: &Corpus,
        embeddings: &EmbeddingTable,
    ) -> Result<ModelScorer<'a>> {
        if embeddings.dim() != model.embedding_dim {
            return Err(Error::shape(format!(
                "model expects {}-dim embeddings, table has {}",
                model.embedding_dim,
                embeddings.dim()
            )));
        }
        let tagset = model.tagset()?;
        let extractor = FeatureExtractor::new(corpus, embeddings, &tagset);
        let features = corpus
            .mentions()
            .iter()
            .map(|m| (m.id.clone(), extractor.encode(m)))
            .collect();
        Ok(ModelScorer { model, features })
    }
}

impl PairScorer for ModelScorer<'_> {
    fn score(&self, a: &str, b: &str, args_a: &ArgSets, args_b: &ArgSets) -> Result<f64> {
        let fa = self
            .features
            .get(a)
            .ok_or_else(|| Error::invalid(format!("unknown mention id {a:?}")))?;
        let fb = self
            .features
            .get(b)
            .ok_or_else(|| Error::invalid(format!("unknown mention id {b:?}")))?;
        self.model.score_parts(fa, fb, &argument_overlap(args_a, args_b))
    }
}

/// Head-lemma match baseline: 1.0 on a lowercased lemma match, else 0.0.
pub struct LemmaScorer {
    lemmas: HashMap<String, String>,
}

impl LemmaScorer {
    pub fn new(corpus: &Corpus) -> LemmaScorer {
        LemmaScorer {
            lemmas: corpus
                .mentions()
                .iter()
                .map(|m| (m.id.clone(), corpus.head_token(m).lemma.to_lowercase()))
                .collect(),
        }
    }
}

impl PairScorer for LemmaScorer {
    fn score(&self, a: &str, b: &str, _args_a: &ArgSets, _args_b: &ArgSets) -> Result<f64> {
        let la = self.lemmas.get(a).ok_or_else(|| Error::invalid(format!("unknown mention id {a:?}")))?;
        let lb = self.lemmas.get(b).ok_or_else(|| Error::invalid(format!("unknown mention id {b:?}")))?;
        Ok(if la == lb { 1.0 } else { 0.0 })
    }
}
