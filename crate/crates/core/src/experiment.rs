//! End-to-end experiment harness: clusters documents, trains (or selects)
//! the pairwise classifiers for a chosen variant, resolves coreference, and
//! evaluates the result at the within- and cross-document levels, including
//! a per-round account of the stage-1 merge history.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmbeddingTable, PosTagset};
use crate::docluster::{cluster_documents, DocClusterConfig, DocClusters};
use crate::engine::{resolve, Clustering, MergeConfig, MergeRecord, MergeType};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, project_wd, EvalReport};
use crate::neural::{train, ModelKind, PairwiseModel, TrainConfig};
use crate::scorers::{build_training_set, LemmaScorer, ModelScorer};

/// Which pairwise classifiers drive the merge engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierVariant {
    /// Head-lemma match for both mergers (no training).
    Lemma,
    /// A within-document model for the WD merger and a cross-document model
    /// for the CD merger, each trained on its own pair sample.
    #[default]
    Distinct,
    /// The within-document model used for both mergers.
    CommonWd,
    /// The cross-document model used for both mergers.
    CommonCd,
}

impl ClassifierVariant {
    pub const ALL: [ClassifierVariant; 4] = [
        ClassifierVariant::Lemma,
        ClassifierVariant::Distinct,
        ClassifierVariant::CommonWd,
        ClassifierVariant::CommonCd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ClassifierVariant::Lemma => "lemma",
            ClassifierVariant::Distinct => "distinct",
            ClassifierVariant::CommonWd => "common_wd",
            ClassifierVariant::CommonCd => "common_cd",
        }
    }
}

/// Full configuration of one experiment run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub variant: ClassifierVariant,
    pub doc_cluster: DocClusterConfig,
    pub train: TrainConfig,
    pub merge: MergeConfig,
    /// Seed for training-pair sampling and parameter initialization.
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.merge.validate()?;
        Ok(cfg)
    }
}

/// One row of the per-round merge table: how many merges each stage-1 sweep
/// contributed in that alternation round, optionally with the quality of the
/// clustering snapshot after the round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub round: usize,
    pub wd_merges: usize,
    pub cd_merges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wd_eval: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cd_eval: Option<EvalReport>,
    /// True on the closing row: the sweep that found nothing left to merge.
    pub quiescent: bool,
}

/// Evaluation summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: ClassifierVariant,
    pub documents: usize,
    pub mentions: usize,
    pub gold_chains: usize,
    pub system_clusters: usize,
    /// Scores against the gold partition across the whole corpus.
    pub cd: EvalReport,
    /// Scores with both partitions projected onto document boundaries.
    pub wd: EvalReport,
    pub iterations: Vec<IterationRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Report plus the artifacts it was computed from.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub clustering: Clustering,
    pub doc_clusters: DocClusters,
}

/// Union-find over mention ranks, used to replay merge logs.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn partition(&mut self, corpus: &Corpus) -> Vec<std::collections::BTreeSet<String>> {
        let mut groups: BTreeMap<usize, std::collections::BTreeSet<String>> = BTreeMap::new();
        for (rank, mention) in corpus.mentions().iter().enumerate() {
            groups.entry(self.find(rank)).or_default().insert(mention.id.clone());
        }
        groups.into_values().collect()
    }
}

/// Tabulates the stage-1 merge history by alternation round. When a corpus
/// with gold chains is supplied, each row also scores the clustering
/// snapshot reached by replaying all merges up to and including that round.
/// Stage-2 merges carry no round and are not part of this table. The table
/// ends with one quiescent row; an empty stage-1 history yields no rows.
pub fn report_iterations(
    merge_log: &[MergeRecord],
    corpus: Option<&Corpus>,
) -> Result<Vec<IterationRow>> {
    if let Some(corpus) = corpus {
        if corpus.gold_chains.is_empty() {
            return Err(Error::invalid("per-round evaluation needs gold chains"));
        }
    }
    let mut rounds: BTreeMap<usize, Vec<&MergeRecord>> = BTreeMap::new();
    for record in merge_log.iter().filter(|r| r.stage == 1) {
        let round = record.round.ok_or_else(|| {
            Error::invalid(format!(
                "stage-1 merge of clusters {} and {} lacks a round",
                record.a, record.b
            ))
        })?;
        rounds.entry(round).or_default().push(record);
    }
    if rounds.is_empty() {
        return Ok(Vec::new());
    }

    let mut replay = corpus.map(|c| (c, UnionFind::new(c.mentions().len()), c.gold_partition()));
    let mut rows = Vec::new();
    for (&round, records) in &rounds {
        let wd_merges = records.iter().filter(|r| r.merge_type == MergeType::Wd).count();
        let cd_merges = records.iter().filter(|r| r.merge_type == MergeType::Cd).count();
        let (mut wd_eval, mut cd_eval) = (None, None);
        if let Some((corpus, uf, gold)) = replay.as_mut() {
            for record in records {
                let rank = |id: &str| {
                    corpus.mention_rank(id).ok_or_else(|| {
                        Error::invalid(format!("merge witness {id:?} is not in the corpus"))
                    })
                };
                uf.union(rank(&record.witness.0)?, rank(&record.witness.1)?);
            }
            let snapshot = uf.partition(corpus);
            cd_eval = Some(evaluate(gold, &snapshot)?);
            wd_eval = Some(evaluate(
                &project_wd(gold, corpus)?,
                &project_wd(&snapshot, corpus)?,
            )?);
        }
        rows.push(IterationRow { round, wd_merges, cd_merges, wd_eval, cd_eval, quiescent: false });
    }
    let last = rows.last().expect("at least one round").clone();
    rows.push(IterationRow {
        round: last.round + 1,
        wd_merges: 0,
        cd_merges: 0,
        wd_eval: last.wd_eval,
        cd_eval: last.cd_eval,
        quiescent: true,
    });
    Ok(rows)
}

/// POS tags actually present in the corpus, in sorted order.
fn corpus_tagset(corpus: &Corpus) -> Result<PosTagset> {
    let tags: std::collections::BTreeSet<String> = corpus
        .documents()
        .iter()
        .flat_map(|d| d.tokens.iter().map(|t| t.pos.clone()))
        .collect();
    PosTagset::new(tags.into_iter().collect())
}

/// Builds the pair sample for `kind` and trains a fresh model on it.
pub fn train_model(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    kind: ModelKind,
    config: &TrainConfig,
    seed: u64,
) -> Result<PairwiseModel> {
    let tagset = corpus_tagset(corpus)?;
    let instances = build_training_set(corpus, embeddings, &tagset, kind, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model =
        PairwiseModel::new(kind, embeddings.dim(), tagset.tags().to_vec(), &mut rng);
    Ok(train(&model, &instances, &[], config)?.model)
}

/// Runs one experiment: document clustering, classifier setup per the
/// variant, two-stage resolution, and evaluation at both levels.
pub fn run_experiment(
    corpus: &Corpus,
    embeddings: &EmbeddingTable,
    config: &RunConfig,
) -> Result<ExperimentOutcome> {
    if corpus.gold_chains.is_empty() {
        return Err(Error::invalid("experiments need a corpus with gold chains"));
    }
    config.merge.validate()?;
    let doc_clusters = cluster_documents(corpus, &config.doc_cluster)?;

    let clustering = match config.variant {
        ClassifierVariant::Lemma => {
            let scorer = LemmaScorer::new(corpus);
            resolve(corpus, &doc_clusters, &scorer, &scorer, &config.merge)?
        }
        ClassifierVariant::Distinct => {
            let wd_model =
                train_model(corpus, embeddings, ModelKind::Wd, &config.train, config.seed)?;
            let cd_model =
                train_model(corpus, embeddings, ModelKind::Cd, &config.train, config.seed)?;
            let wd = ModelScorer::new(&wd_model, corpus, embeddings)?;
            let cd = ModelScorer::new(&cd_model, corpus, embeddings)?;
            resolve(corpus, &doc_clusters, &wd, &cd, &config.merge)?
        }
        ClassifierVariant::CommonWd => {
            let model =
                train_model(corpus, embeddings, ModelKind::Wd, &config.train, config.seed)?;
            let scorer = ModelScorer::new(&model, corpus, embeddings)?;
            resolve(corpus, &doc_clusters, &scorer, &scorer, &config.merge)?
        }
        ClassifierVariant::CommonCd => {
            let model =
                train_model(corpus, embeddings, ModelKind::Cd, &config.train, config.seed)?;
            let scorer = ModelScorer::new(&model, corpus, embeddings)?;
            resolve(corpus, &doc_clusters, &scorer, &scorer, &config.merge)?
        }
    };

    let gold = corpus.gold_partition();
    let system = clustering.partition();
    let cd = evaluate(&gold, &system)?;
    let wd = evaluate(&project_wd(&gold, corpus)?, &project_wd(&system, corpus)?)?;
    let iterations = report_iterations(&clustering.merge_log, Some(corpus))?;
    let mut warnings = clustering.warnings.clone();
    if !doc_clusters.converged {
        warnings.push("document clustering did not converge".to_string());
    }
    let report = ExperimentReport {
        variant: config.variant,
        documents: corpus.documents().len(),
        mentions: corpus.mentions().len(),
        gold_chains: corpus.gold_chains.len(),
        system_clusters: clustering.clusters.len(),
        cd,
        wd,
        iterations,
        warnings,
    };
    Ok(ExperimentOutcome { report, clustering, doc_clusters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ArgSets;
    use crate::scorers::PairScorer;
    use crate::synth::{gen_synthetic, SyntheticSpec};

    fn record(
        stage: u8,
        merge_type: MergeType,
        round: Option<usize>,
        witness: (&str, &str),
    ) -> MergeRecord {
        MergeRecord {
            stage,
            merge_type,
            a: 0,
            b: 1,
            witness: (witness.0.to_string(), witness.1.to_string()),
            score: 0.95,
            round,
        }
    }

    #[test]
    fn iteration_table_groups_stage1_rounds() {
        let log = vec![
            record(1, MergeType::Wd, Some(1), ("a", "b")),
            record(1, MergeType::Wd, Some(1), ("c", "d")),
            record(1, MergeType::Cd, Some(1), ("a", "c")),
            record(1, MergeType::Wd, Some(2), ("e", "f")),
            record(2, MergeType::Gm, None, ("g", "h")),
        ];
        let rows = report_iterations(&log, None).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].round, rows[0].wd_merges, rows[0].cd_merges), (1, 2, 1));
        assert_eq!((rows[1].round, rows[1].wd_merges, rows[1].cd_merges), (2, 1, 0));
        assert_eq!((rows[2].round, rows[2].wd_merges, rows[2].cd_merges), (3, 0, 0));
        assert!(rows[2].quiescent && !rows[0].quiescent);
        assert!(rows.iter().all(|r| r.cd_eval.is_none()));

        assert!(report_iterations(&[], None).unwrap().is_empty());
        let only_stage2 = vec![record(2, MergeType::Ctx, None, ("a", "b"))];
        assert!(report_iterations(&only_stage2, None).unwrap().is_empty());
    }

    /// Scores 0.95 for gold-coreferent pairs, 0.05 otherwise.
    struct GoldStub {
        chain: std::collections::HashMap<String, usize>,
    }

    impl GoldStub {
        fn new(corpus: &Corpus) -> GoldStub {
            let chain = corpus
                .gold_chains
                .iter()
                .enumerate()
                .flat_map(|(i, c)| c.iter().map(move |id| (id.clone(), i)))
                .collect();
            GoldStub { chain }
        }
    }

    impl PairScorer for GoldStub {
        fn score(&self, a: &str, b: &str, _: &ArgSets, _: &ArgSets) -> Result<f64> {
            Ok(match (self.chain.get(a), self.chain.get(b)) {
                (Some(x), Some(y)) if x == y => 0.95,
                _ => 0.05,
            })
        }
    }

    #[test]
    fn iteration_snapshots_converge_to_the_final_partition() {
        let spec = SyntheticSpec {
            n_topics: 1,
            docs_per_topic: 2,
            chains_per_topic: 2,
            mentions_per_chain: 4,
            ..SyntheticSpec::default()
        };
        let (corpus, _) = gen_synthetic(&spec).unwrap();
        let stub = GoldStub::new(&corpus);
        let doc_clusters = DocClusters {
            clusters: vec![corpus.documents().iter().map(|d| d.doc_id.clone()).collect()],
            converged: true,
        };
        let merge = MergeConfig { enable_second_order: false, ..MergeConfig::default() };
        let clustering = resolve(&corpus, &doc_clusters, &stub, &stub, &merge).unwrap();
        let rows = report_iterations(&clustering.merge_log, Some(&corpus)).unwrap();
        assert!(rows.len() >= 2);
        let last = rows.last().unwrap();
        assert!(last.quiescent);
        let final_eval =
            evaluate(&corpus.gold_partition(), &clustering.partition()).unwrap();
        assert_eq!(last.cd_eval.as_ref().unwrap().conll_f1, final_eval.conll_f1);
        assert!((final_eval.conll_f1 - 1.0).abs() < 1e-12);
        // Merge counts across rounds account for every stage-1 record.
        let total: usize = rows.iter().map(|r| r.wd_merges + r.cd_merges).sum();
        assert_eq!(total, clustering.merge_log.len());
    }

    #[test]
    fn lemma_variant_is_the_head_lemma_transitive_closure() {
        let spec = SyntheticSpec {
            n_topics: 2,
            docs_per_topic: 2,
            chains_per_topic: 1,
            mentions_per_chain: 4,
            synonym_groups: vec![vec!["strike".to_string()], vec!["march".to_string()]],
            ..SyntheticSpec::default()
        };
        let (corpus, embeddings) = gen_synthetic(&spec).unwrap();
        let config = RunConfig { variant: ClassifierVariant::Lemma, ..RunConfig::default() };
        let outcome = run_experiment(&corpus, &embeddings, &config).unwrap();
        // Each chain repeats a single lemma, so the closure equals gold.
        assert_eq!(outcome.report.system_clusters, 2);
        assert!((outcome.report.cd.conll_f1 - 1.0).abs() < 1e-12);
        assert!((outcome.report.wd.conll_f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_variant_trains_and_resolves_end_to_end() {
        let spec = SyntheticSpec {
            n_topics: 2,
            docs_per_topic: 2,
            chains_per_topic: 2,
            mentions_per_chain: 4,
            embedding_dim: 8,
            ..SyntheticSpec::default()
        };
        let (corpus, embeddings) = gen_synthetic(&spec).unwrap();
        let config = RunConfig {
            variant: ClassifierVariant::Distinct,
            train: TrainConfig { max_epochs: 3, ..TrainConfig::default() },
            ..RunConfig::default()
        };
        let outcome = run_experiment(&corpus, &embeddings, &config).unwrap();
        let clustered: usize = outcome.clustering.clusters.iter().map(|c| c.len()).sum();
        assert_eq!(clustered, corpus.mentions().len());
        assert!((0.0..=1.0).contains(&outcome.report.cd.conll_f1));
        assert_eq!(outcome.report.mentions, 16);

        let chainless = Corpus::from_json(
            &serde_json::json!({"documents": [], "gold_chains": []}).to_string(),
            "empty",
        );
        if let Ok(chainless) = chainless {
            assert!(run_experiment(&chainless, &embeddings, &config).is_err());
        }
    }
}
