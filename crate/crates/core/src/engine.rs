//! Two-stage iterative cluster merging: alternating within-document and
//! cross-document single-link sweeps with argument propagation, followed by
//! second-order merging via shared dependency relations and context-vector
//! similarity. Operates independently inside each document cluster.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{ArgSets, Corpus};
use crate::docluster::DocClusters;
use crate::error::{Error, Result};
use crate::scorers::PairScorer;

/// Stage-1 control flow: exit as soon as a within-document sweep is quiet
/// (`AsWritten`), or keep alternating until a full round makes no merge of
/// either kind (`BothStagesQuiescent`, the default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoopVariant {
    AsWritten,
    #[default]
    BothStagesQuiescent,
}

/// Thresholds and switches for the merge engine.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct MergeConfig {
    pub theta_wd: f64,
    pub theta_cd: f64,
    pub theta_second: f64,
    pub theta_ctx: f64,
    pub loop_variant: LoopVariant,
    pub max_sweeps: usize,
    /// When false, pairs are scored with mention-local argument sets instead
    /// of the merged clusters' unions (ablation switch).
    pub propagate_args: bool,
    /// When false, resolution stops after stage 1 (ablation switch).
    pub enable_second_order: bool,
}

impl Default for MergeConfig {
    fn default() -> MergeConfig {
        MergeConfig {
            theta_wd: 0.60,
            theta_cd: 0.90,
            theta_second: 0.80,
            theta_ctx: 0.70,
            loop_variant: LoopVariant::default(),
            max_sweeps: 50,
            propagate_args: true,
            enable_second_order: true,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("theta_wd", self.theta_wd),
            ("theta_cd", self.theta_cd),
            ("theta_second", self.theta_second),
            ("theta_ctx", self.theta_ctx),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be at least 1"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<MergeConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: MergeConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The four merge kinds: stage-1 within/cross-document sweeps and stage-2
/// governor–modifier / context-similarity merges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeType {
    #[serde(rename = "WD")]
    Wd,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "GM")]
    Gm,
    #[serde(rename = "CTX")]
    Ctx,
}

impl MergeType {
    pub fn stage(self) -> u8 {
        match self {
            MergeType::Wd | MergeType::Cd => 1,
            MergeType::Gm | MergeType::Ctx => 2,
        }
    }
}

/// One logged merge: the surviving/absorbed cluster ids, the mention pair
/// whose score licensed the merge, and (for stage 1) the alternation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub stage: u8,
    #[serde(rename = "type")]
    pub merge_type: MergeType,
    pub a: usize,
    pub b: usize,
    pub witness: (String, String),
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
}

/// A cluster of mentions, identified by its earliest member's corpus rank.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCluster {
    pub id: usize,
    /// Corpus ranks of the members, ascending (document order, token order).
    pub members: Vec<usize>,
    /// Per-role union of member arguments, grown by propagation.
    pub args: ArgSets,
}

/// Mutable clustering state for one document cluster.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub clusters: BTreeMap<usize, EventCluster>,
    /// Mention corpus rank → owning cluster id.
    pub mention_to_cluster: HashMap<usize, usize>,
    /// Documents of this document cluster.
    pub doc_cluster: Vec<String>,
    pub merge_log: Vec<MergeRecord>,
    /// Set when stage 1 stopped at `max_sweeps` before reaching quiescence.
    pub sweep_capped: bool,
}

/// One singleton cluster per mention of the given documents; cluster ids are
/// the mentions' corpus ranks, so scan order follows corpus appearance.
pub fn init_state(corpus: &Corpus, doc_cluster: &[String]) -> Result<ClusterState> {
    let mut clusters = BTreeMap::new();
    let mut mention_to_cluster = HashMap::new();
    for doc_id in doc_cluster {
        let doc = corpus
            .document(doc_id)
            .ok_or_else(|| Error::invalid(format!("unknown document id {doc_id:?}")))?;
        for id in &doc.mentions {
            let rank = corpus.mention_rank(id).expect("listed mention");
            let mention = corpus.mention(id).expect("listed mention");
            clusters.insert(
                rank,
                EventCluster { id: rank, members: vec![rank], args: mention.arguments.clone() },
            );
            mention_to_cluster.insert(rank, rank);
        }
    }
    Ok(ClusterState {
        clusters,
        mention_to_cluster,
        doc_cluster: doc_cluster.to_vec(),
        merge_log: Vec::new(),
        sweep_capped: false,
    })
}

impl ClusterState {
    /// Merges cluster `b` into cluster `a` (the lower id survives), unions
    /// arguments, and appends a merge record. Returns the surviving id.
    pub fn merge(
        &mut self,
        a: usize,
        b: usize,
        merge_type: MergeType,
        witness: (String, String),
        score: f64,
        round: Option<usize>,
    ) -> Result<usize> {
        if a == b {
            return Err(Error::invalid(format!("cannot merge cluster {a} with itself")));
        }
        let (keep, gone) = (a.min(b), a.max(b));
        let absorbed = self
            .clusters
            .remove(&gone)
            .ok_or_else(|| Error::invalid(format!("no cluster with id {gone}")))?;
        let survivor = self
            .clusters
            .get_mut(&keep)
            .ok_or_else(|| Error::invalid(format!("no cluster with id {keep}")))?;
        for &rank in &absorbed.members {
            self.mention_to_cluster.insert(rank, keep);
        }
        survivor.members.extend(absorbed.members);
        survivor.members.sort_unstable();
        survivor.args.union_with(&absorbed.args);
        self.merge_log.push(MergeRecord {
            stage: merge_type.stage(),
            merge_type,
            a,
            b,
            witness,
            score,
            round,
        });
        Ok(keep)
    }

    /// Effective argument sets for scoring one mention: the cluster-level
    /// union under propagation, otherwise the mention's own arguments.
    fn scoring_args<'a>(&'a self, corpus: &'a Corpus, rank: usize, cfg: &MergeConfig) -> &'a ArgSets {
        if cfg.propagate_args {
            let cid = self.mention_to_cluster[&rank];
            &self.clusters[&cid].args
        } else {
            &corpus.mentions()[rank].arguments
        }
    }

    /// Highest score over cross-cluster mention pairs of the requested
    /// locality (same-document or cross-document), with its witness pair.
    fn best_pair(
        &self,
        corpus: &Corpus,
        a: usize,
        b: usize,
        scorer: &dyn PairScorer,
        same_doc: bool,
        cfg: &MergeConfig,
    ) -> Result<Option<(String, String, f64)>> {
        let mentions = corpus.mentions();
        let mut best: Option<(String, String, f64)> = None;
        for &ra in &self.clusters[&a].members {
            for &rb in &self.clusters[&b].members {
                let (ma, mb) = (&mentions[ra], &mentions[rb]);
                if (ma.doc_id == mb.doc_id) != same_doc {
                    continue;
                }
                let args_a = self.scoring_args(corpus, ra, cfg);
                let args_b = self.scoring_args(corpus, rb, cfg);
                let score = scorer.score(&ma.id, &mb.id, args_a, args_b)?;
                if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
                    best = Some((ma.id.clone(), mb.id.clone(), score));
                }
            }
        }
        Ok(best)
    }
}

/// One locality-restricted sweep to its own fixpoint: scan cluster pairs in
/// id order, merge the first pair whose best qualifying mention-pair score
/// exceeds the threshold, restart after each merge; stop after a clean scan.
fn sweep(
    state: &mut ClusterState,
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    cfg: &MergeConfig,
    merge_type: MergeType,
    round: usize,
) -> Result<usize> {
    let (same_doc, theta) = match merge_type {
        MergeType::Wd => (true, cfg.theta_wd),
        MergeType::Cd => (false, cfg.theta_cd),
        other => return Err(Error::invalid(format!("{other:?} is not a stage-1 sweep"))),
    };
    let mut merges = 0;
    // Scores depend only on the two clusters' members and args, so pairs
    // untouched by a merge keep their cached best witness across restarts.
    let mut cache: HashMap<(usize, usize), Option<(String, String, f64)>> = HashMap::new();
    'restart: loop {
        let ids: Vec<usize> = state.clusters.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let best = match cache.get(&(a, b)) {
                    Some(cached) => cached.clone(),
                    None => {
                        let fresh = state.best_pair(corpus, a, b, scorer, same_doc, cfg)?;
                        cache.insert((a, b), fresh.clone());
                        fresh
                    }
                };
                if let Some((wa, wb, score)) = best {
                    if score > theta {
                        state.merge(a, b, merge_type, (wa, wb), score, Some(round))?;
                        merges += 1;
                        cache.retain(|&(x, y), _| x != a && y != a && x != b && y != b);
                        continue 'restart;
                    }
                }
            }
        }
        return Ok(merges);
    }
}

/// Within-document sweep: merges same-document mention pairs above `theta_wd`.
pub fn wd_sweep(
    state: &mut ClusterState,
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    cfg: &MergeConfig,
    round: usize,
) -> Result<usize> {
    sweep(state, corpus, scorer, cfg, MergeType::Wd, round)
}

/// Cross-document sweep: merges cross-document mention pairs above `theta_cd`.
pub fn cd_sweep(
    state: &mut ClusterState,
    corpus: &Corpus,
    scorer: &dyn PairScorer,
    cfg: &MergeConfig,
    round: usize,
) -> Result<usize> {
    sweep(state, corpus, scorer, cfg, MergeType::Cd, round)
}

/// Stage 1: alternate within- and cross-document sweeps until quiescent (or
/// until a within-document sweep is quiet, under `AsWritten`), bounded by
/// `max_sweeps` rounds.
pub fn stage1(
    state: &mut ClusterState,
    corpus: &Corpus,
    wd: &dyn PairScorer,
    cd: &dyn PairScorer,
    cfg: &MergeConfig,
) -> Result<()> {
    let mut round = 1;
    loop {
        if round > cfg.max_sweeps {
            state.sweep_capped = true;
            return Ok(());
        }
        match cfg.loop_variant {
            LoopVariant::AsWritten => {
                if wd_sweep(state, corpus, wd, cfg, round)? == 0 {
                    return Ok(());
                }
                cd_sweep(state, corpus, cd, cfg, round)?;
            }
            LoopVariant::BothStagesQuiescent => {
                let n_wd = wd_sweep(state, corpus, wd, cfg, round)?;
                let n_cd = cd_sweep(state, corpus, cd, cfg, round)?;
                if n_wd + n_cd == 0 {
                    return Ok(());
                }
            }
        }
        round += 1;
    }
}

/// Witness search for a governor–modifier merge of `e1` and `e2`: both
/// clusters must contain mentions linked by the same dependency relation to
/// some third cluster, and the best such mention pair must clear
/// `theta_second` under the cross-document classifier.
pub fn governor_modifier_related(
    state: &ClusterState,
    corpus: &Corpus,
    e1: usize,
    e2: usize,
    cd: &dyn PairScorer,
    cfg: &MergeConfig,
) -> Result<Option<(String, String, f64)>> {
    if e1 == e2 {
        return Err(Error::invalid("governor-modifier check needs distinct clusters"));
    }
    // (relation, third-cluster id) → member ranks carrying such a link.
    let keyed_links = |cluster: usize| -> BTreeMap<(String, usize), Vec<usize>> {
        let mut keys: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
        for &rank in &state.clusters[&cluster].members {
            for link in &corpus.mentions()[rank].dep_links {
                let Some(target_rank) = corpus.mention_rank(&link.target) else {
                    continue; // dangling target: reported at validation
                };
                let Some(&third) = state.mention_to_cluster.get(&target_rank) else {
                    continue;
                };
                if third != e1 && third != e2 {
                    keys.entry((link.rel.clone(), third)).or_default().push(rank);
                }
            }
        }
        keys
    };
    let keys1 = keyed_links(e1);
    let keys2 = keyed_links(e2);
    let mentions = corpus.mentions();
    let mut best: Option<(String, String, f64)> = None;
    for (key, ranks1) in &keys1 {
        let Some(ranks2) = keys2.get(key) else { continue };
        for &ra in ranks1 {
            for &rb in ranks2 {
                let args_a = state.scoring_args(corpus, ra, cfg);
                let args_b = state.scoring_args(corpus, rb, cfg);
                let score = cd.score(&mentions[ra].id, &mentions[rb].id, args_a, args_b)?;
                if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
                    best = Some((mentions[ra].id.clone(), mentions[rb].id.clone(), score));
                }
            }
        }
    }
    Ok(best.filter(|(_, _, score)| *score > cfg.theta_second))
}

/// Per-cluster sparse context vectors: entry (E, F) counts the distinct
/// sentences containing a mention of E and a mention of F.
pub fn build_context_vectors(
    state: &ClusterState,
    corpus: &Corpus,
) -> BTreeMap<usize, BTreeMap<usize, usize>> {
    // Clusters present in each sentence, keyed by (document, sentence index).
    let mut by_sentence: BTreeMap<(usize, usize), HashSet<usize>> = BTreeMap::new();
    let mentions = corpus.mentions();
    for (&rank, &cluster) in &state.mention_to_cluster {
        let mention = &mentions[rank];
        let doc_pos = corpus.doc_position(&mention.doc_id).expect("known document");
        by_sentence
            .entry((doc_pos, corpus.sentence_of(mention)))
            .or_default()
            .insert(cluster);
    }
    let mut vectors: BTreeMap<usize, BTreeMap<usize, usize>> =
        state.clusters.keys().map(|&id| (id, BTreeMap::new())).collect();
    for present in by_sentence.values() {
        let mut ids: Vec<usize> = present.iter().copied().collect();
        ids.sort_unstable();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                *vectors.get_mut(&a).unwrap().entry(b).or_insert(0) += 1;
                *vectors.get_mut(&b).unwrap().entry(a).or_insert(0) += 1;
            }
        }
    }
    vectors
}

/// Cosine of two sparse context vectors over the union key space, ignoring
/// entries indexed by either cluster itself.
fn context_cosine(
    vectors: &BTreeMap<usize, BTreeMap<usize, usize>>,
    e1: usize,
    e2: usize,
) -> f64 {
    let (va, vb) = (&vectors[&e1], &vectors[&e2]);
    let relevant = |key: usize| key != e1 && key != e2;
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&key, &count) in va.iter().filter(|(&k, _)| relevant(k)) {
        na += (count * count) as f64;
        if let Some(&other) = vb.get(&key) {
            dot += (count * other) as f64;
        }
    }
    for (_, &count) in vb.iter().filter(|(&k, _)| relevant(k)) {
        nb += (count * count) as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Witness search for a context-similarity merge: context-vector cosine above
/// `theta_ctx` and best cross-pair score above `theta_second`.
pub fn context_similarity(
    state: &ClusterState,
    corpus: &Corpus,
    vectors: &BTreeMap<usize, BTreeMap<usize, usize>>,
    e1: usize,
    e2: usize,
    cd: &dyn PairScorer,
    cfg: &MergeConfig,
) -> Result<Option<(String, String, f64)>> {
    if e1 == e2 {
        return Err(Error::invalid("context-similarity check needs distinct clusters"));
    }
    if context_cosine(vectors, e1, e2) <= cfg.theta_ctx {
        return Ok(None);
    }
    let mentions = corpus.mentions();
    let mut best: Option<(String, String, f64)> = None;
    for &ra in &state.clusters[&e1].members {
        for &rb in &state.clusters[&e2].members {
            let args_a = state.scoring_args(corpus, ra, cfg);
            let args_b = state.scoring_args(corpus, rb, cfg);
            let score = cd.score(&mentions[ra].id, &mentions[rb].id, args_a, args_b)?;
            if best.as_ref().is_none_or(|(_, _, s)| score > *s) {
                best = Some((mentions[ra].id.clone(), mentions[rb].id.clone(), score));
            }
        }
    }
    Ok(best.filter(|(_, _, score)| *score > cfg.theta_second))
}

/// Stage 2: governor–modifier merges to fixpoint, then context-similarity
/// merges to fixpoint (context vectors rebuilt after every merge).
pub fn stage2(
    state: &mut ClusterState,
    corpus: &Corpus,
    cd: &dyn PairScorer,
    cfg: &MergeConfig,
) -> Result<()> {
    'gm: loop {
        let ids: Vec<usize> = state.clusters.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if let Some((wa, wb, score)) =
                    governor_modifier_related(state, corpus, a, b, cd, cfg)?
                {
                    state.merge(a, b, MergeType::Gm, (wa, wb), score, None)?;
                    continue 'gm;
                }
            }
        }
        break;
    }
    'ctx: loop {
        let vectors = build_context_vectors(state, corpus);
        let ids: Vec<usize> = state.clusters.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if let Some((wa, wb, score)) =
                    context_similarity(state, corpus, &vectors, a, b, cd, cfg)?
                {
                    state.merge(a, b, MergeType::Ctx, (wa, wb), score, None)?;
                    continue 'ctx;
                }
            }
        }
        break;
    }
    Ok(())
}

/// Final clustering over the whole corpus: member id lists per cluster plus
/// the audit log of every merge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Vec<String>>,
    pub merge_log: Vec<MergeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Clustering {
    /// The clustering as mention-id sets, for scoring.
    pub fn partition(&self) -> Vec<std::collections::BTreeSet<String>> {
        self.clusters.iter().map(|c| c.iter().cloned().collect()).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Clustering> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Runs the full two-stage resolution inside each document cluster and unions
/// the results. Deterministic for fixed inputs.
pub fn resolve(
    corpus: &Corpus,
    doc_clusters: &DocClusters,
    wd: &dyn PairScorer,
    cd: &dyn PairScorer,
    cfg: &MergeConfig,
) -> Result<Clustering> {
    cfg.validate()?;
    doc_clusters.check_cover(corpus)?;
    let mut states: Vec<ClusterState> = Vec::with_capacity(doc_clusters.clusters.len());
    for docs in &doc_clusters.clusters {
        let mut state = init_state(corpus, docs)?;
        stage1(&mut state, corpus, wd, cd, cfg)?;
        if cfg.enable_second_order {
            stage2(&mut state, corpus, cd, cfg)?;
        }
        states.push(state);
    }

    let mut clusters: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut merge_log = Vec::new();
    let mut warnings = Vec::new();
    for (i, state) in states.iter().enumerate() {
        if state.sweep_capped {
            warnings.push(format!(
                "document cluster {i} stopped at max_sweeps = {} before quiescence",
                cfg.max_sweeps
            ));
        }
        for cluster in state.clusters.values() {
            let ids = cluster.members.iter().map(|&r| corpus.mentions()[r].id.clone()).collect();
            clusters.insert(cluster.id, ids);
        }
        merge_log.extend(state.merge_log.iter().cloned());
    }
    Ok(Clustering { clusters: clusters.into_values().collect(), merge_log, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Role;
    use crate::scorers::LemmaScorer;

    /// Symmetric lookup scorer with a default for unlisted pairs.
    struct StubScorer {
        scores: HashMap<(String, String), f64>,
        default: f64,
    }

    impl StubScorer {
        fn new(entries: &[(&str, &str, f64)], default: f64) -> StubScorer {
            let mut scores = HashMap::new();
            for &(a, b, s) in entries {
                scores.insert((a.to_string(), b.to_string()), s);
                scores.insert((b.to_string(), a.to_string()), s);
            }
            StubScorer { scores, default }
        }
    }

    impl PairScorer for StubScorer {
        fn score(&self, a: &str, b: &str, _: &ArgSets, _: &ArgSets) -> Result<f64> {
            Ok(*self.scores.get(&(a.to_string(), b.to_string())).unwrap_or(&self.default))
        }
    }

    /// Scores `high` when the pair is listed and the Arg0 sets overlap,
    /// otherwise `low`; used to exercise argument propagation.
    struct ArgGatedScorer {
        pairs: HashSet<(String, String)>,
        high: f64,
        low: f64,
    }

    impl PairScorer for ArgGatedScorer {
        fn score(&self, a: &str, b: &str, args_a: &ArgSets, args_b: &ArgSets) -> Result<f64> {
            let listed = self.pairs.contains(&(a.to_string(), b.to_string()))
                || self.pairs.contains(&(b.to_string(), a.to_string()));
            let overlap = args_a.get(Role::Arg0).intersection(args_b.get(Role::Arg0)).count() > 0;
            Ok(if listed && overlap { self.high } else { self.low })
        }
    }

    fn doc_json(doc_id: &str, lemmas: &[&str], mentions: serde_json::Value) -> serde_json::Value {
        let tokens: Vec<serde_json::Value> = lemmas
            .iter()
            .map(|l| serde_json::json!({"surface": l, "lemma": l, "pos": "VBD"}))
            .collect();
        serde_json::json!({"doc_id": doc_id, "sentences": [tokens], "mentions": mentions})
    }

    /// d1: kill, kill, talk; d2: kill, talk. Chains the four "kill"s.
    fn lemma_corpus() -> Corpus {
        let json = serde_json::json!({
            "documents": [
                doc_json("d1", &["kill", "kill", "talk"], serde_json::json!([
                    {"id": "k1", "head_token": 0, "span": [0, 1]},
                    {"id": "k2", "head_token": 1, "span": [1, 2]},
                    {"id": "t1", "head_token": 2, "span": [2, 3]}
                ])),
                doc_json("d2", &["kill", "talk"], serde_json::json!([
                    {"id": "k3", "head_token": 0, "span": [0, 1]},
                    {"id": "t2", "head_token": 1, "span": [1, 2]}
                ]))
            ],
            "gold_chains": [["k1", "k2", "k3"], ["t1", "t2"]]
        })
        .to_string();
        Corpus::from_json(&json, "test").unwrap()
    }

    fn all_docs(corpus: &Corpus) -> Vec<String> {
        corpus.documents().iter().map(|d| d.doc_id.clone()).collect()
    }

    fn members_of(state: &ClusterState, corpus: &Corpus, mention: &str) -> Vec<String> {
        let rank = corpus.mention_rank(mention).unwrap();
        let cluster = &state.clusters[&state.mention_to_cluster[&rank]];
        cluster.members.iter().map(|&r| corpus.mentions()[r].id.clone()).collect()
    }

    #[test]
    fn init_state_builds_singletons_in_corpus_order() {
        let corpus = lemma_corpus();
        let state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        assert_eq!(state.clusters.len(), 5);
        let ids: Vec<usize> = state.clusters.keys().copied().collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert!(state.clusters[&2].args.is_empty());
        assert!(init_state(&corpus, &["nope".to_string()]).is_err());
    }

    #[test]
    fn merge_keeps_lower_id_and_unions_args() {
        let json = serde_json::json!({
            "documents": [
                doc_json("d1", &["kill", "kill"], serde_json::json!([
                    {"id": "a", "head_token": 0, "span": [0, 1], "arguments": {"Arg0": ["mother of 12"]}},
                    {"id": "b", "head_token": 1, "span": [1, 2]}
                ]))
            ],
            "gold_chains": [["a", "b"]]
        })
        .to_string();
        let corpus = Corpus::from_json(&json, "test").unwrap();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        let kept = state
            .merge(1, 0, MergeType::Wd, ("a".into(), "b".into()), 0.8, Some(1))
            .unwrap();
        assert_eq!(kept, 0);
        assert_eq!(state.mention_to_cluster[&1], 0);
        assert_eq!(state.clusters[&0].members, vec![0, 1]);
        assert_eq!(
            state.clusters[&0].args.get(Role::Arg0).iter().next().unwrap(),
            "mother of 12"
        );
        assert_eq!(state.merge_log.len(), 1);
        assert_eq!(state.merge_log[0].stage, 1);
        assert!(state.merge(0, 0, MergeType::Wd, ("a".into(), "b".into()), 0.8, None).is_err());
    }

    #[test]
    fn wd_sweep_merges_equal_lemmas_within_documents() {
        let corpus = lemma_corpus();
        let scorer = LemmaScorer::new(&corpus);
        let cfg = MergeConfig::default();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        let merges = wd_sweep(&mut state, &corpus, &scorer, &cfg, 1).unwrap();
        assert_eq!(merges, 1, "only the same-document kill pair merges");
        assert_eq!(members_of(&state, &corpus, "k1"), vec!["k1", "k2"]);
        assert_eq!(members_of(&state, &corpus, "k3"), vec!["k3"]);
        assert_eq!(members_of(&state, &corpus, "t1"), vec!["t1"]);
    }

    #[test]
    fn sweep_is_single_link() {
        let json = serde_json::json!({
            "documents": [doc_json("d1", &["x", "y", "z"], serde_json::json!([
                {"id": "a", "head_token": 0, "span": [0, 1]},
                {"id": "b", "head_token": 1, "span": [1, 2]},
                {"id": "c", "head_token": 2, "span": [2, 3]}
            ]))],
            "gold_chains": [["a", "b", "c"]]
        })
        .to_string();
        let corpus = Corpus::from_json(&json, "test").unwrap();
        let scorer = StubScorer::new(&[("a", "b", 0.7), ("b", "c", 0.7), ("a", "c", 0.1)], 0.0);
        let cfg = MergeConfig::default();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        let merges = wd_sweep(&mut state, &corpus, &scorer, &cfg, 1).unwrap();
        assert_eq!(merges, 2);
        assert_eq!(state.clusters.len(), 1, "a-b and b-c chain into one cluster");
        // Below-threshold scores leave the state untouched.
        let mut fresh = init_state(&corpus, &all_docs(&corpus)).unwrap();
        let low = StubScorer::new(&[("a", "b", 0.55)], 0.1);
        assert_eq!(wd_sweep(&mut fresh, &corpus, &low, &cfg, 1).unwrap(), 0);
        assert_eq!(fresh.clusters.len(), 3);
    }

    #[test]
    fn cd_sweep_requires_cross_document_pairs_and_strict_threshold() {
        let corpus = lemma_corpus();
        let cfg = MergeConfig::default();

        // Exactly at the threshold: no merge.
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        let at = StubScorer::new(&[("k1", "k3", 0.90)], 0.0);
        assert_eq!(cd_sweep(&mut state, &corpus, &at, &cfg, 1).unwrap(), 0);

        // Above it: one merge.
        let above = StubScorer::new(&[("k1", "k3", 0.95)], 0.0);
        assert_eq!(cd_sweep(&mut state, &corpus, &above, &cfg, 1).unwrap(), 1);
        assert_eq!(members_of(&state, &corpus, "k3"), vec!["k1", "k3"]);

        // A same-document pair never qualifies for a CD sweep.
        let mut fresh = init_state(&corpus, &["d1".to_string()]).unwrap();
        let same = StubScorer::new(&[("k1", "k2", 0.99)], 0.0);
        assert_eq!(cd_sweep(&mut fresh, &corpus, &same, &cfg, 1).unwrap(), 0);
    }

    #[test]
    fn loop_variants_differ_on_cd_only_corpora() {
        let corpus = lemma_corpus();
        let wd = StubScorer::new(&[], 0.0);
        let cd = StubScorer::new(&[("k1", "k3", 0.95)], 0.0);

        let as_written = MergeConfig {
            loop_variant: LoopVariant::AsWritten,
            ..MergeConfig::default()
        };
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &as_written).unwrap();
        assert_eq!(state.merge_log.len(), 0, "quiet WD sweep exits before any CD merge");

        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &MergeConfig::default()).unwrap();
        assert_eq!(state.merge_log.len(), 1);
        assert_eq!(state.merge_log[0].merge_type, MergeType::Cd);
        assert_eq!(state.merge_log[0].round, Some(1));
    }

    /// One document holds "killed" (with the Arg0) plus "murdered" (bare);
    /// another holds "murder" (with the Arg0). The cross-document murder pair
    /// only clears 0.9 once the within-document merge propagates the Arg0.
    fn propagation_fixture() -> (Corpus, StubScorer, ArgGatedScorer) {
        let json = serde_json::json!({
            "documents": [
                doc_json("d1", &["kill", "murder"], serde_json::json!([
                    {"id": "k1", "head_token": 0, "span": [0, 1], "arguments": {"Arg0": ["mother of 12"]}},
                    {"id": "ma", "head_token": 1, "span": [1, 2]}
                ])),
                doc_json("d2", &["murder"], serde_json::json!([
                    {"id": "mb", "head_token": 0, "span": [0, 1], "arguments": {"Arg0": ["mother of 12"]}}
                ]))
            ],
            "gold_chains": [["k1", "ma", "mb"]]
        })
        .to_string();
        let corpus = Corpus::from_json(&json, "test").unwrap();
        let wd = StubScorer::new(&[("k1", "ma", 0.7)], 0.0);
        let cd = ArgGatedScorer {
            pairs: [("ma".to_string(), "mb".to_string())].into_iter().collect(),
            high: 0.95,
            low: 0.3,
        };
        (corpus, wd, cd)
    }

    #[test]
    fn propagation_enables_the_cross_document_merge() {
        let (corpus, wd, cd) = propagation_fixture();
        let cfg = MergeConfig::default();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 1, "WD merge then propagated CD merge");
        let kinds: Vec<MergeType> = state.merge_log.iter().map(|r| r.merge_type).collect();
        assert_eq!(kinds, vec![MergeType::Wd, MergeType::Cd]);

        let no_prop = MergeConfig { propagate_args: false, ..MergeConfig::default() };
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &no_prop).unwrap();
        assert_eq!(state.clusters.len(), 2, "without propagation the CD merge is unreachable");
    }

    #[test]
    fn sweep_cap_sets_warning_flag() {
        let (corpus, wd, cd) = propagation_fixture();
        let cfg = MergeConfig { max_sweeps: 1, ..MergeConfig::default() };
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &cfg).unwrap();
        assert!(state.sweep_capped, "quiescence was never confirmed within one round");
        assert_eq!(state.clusters.len(), 1, "the merges themselves still happened");
    }

    /// d1: "released" nmod→ "trial"; d2: "presented" nmod→ "trial". The two
    /// trial mentions are cross-document coreferent.
    fn gm_corpus(rel2: &str) -> Corpus {
        let json = serde_json::json!({
            "documents": [
                doc_json("d1", &["release", "trial"], serde_json::json!([
                    {"id": "r", "head_token": 0, "span": [0, 1],
                     "dep_links": [{"rel": "nmod", "target": "t1"}]},
                    {"id": "t1", "head_token": 1, "span": [1, 2]}
                ])),
                doc_json("d2", &["present", "trial"], serde_json::json!([
                    {"id": "p", "head_token": 0, "span": [0, 1],
                     "dep_links": [{"rel": rel2, "target": "t2"}]},
                    {"id": "t2", "head_token": 1, "span": [1, 2]}
                ]))
            ],
            "gold_chains": [["r", "p"], ["t1", "t2"]]
        })
        .to_string();
        Corpus::from_json(&json, "test").unwrap()
    }

    #[test]
    fn governor_modifier_merge_requires_shared_relation_to_third_cluster() {
        let corpus = gm_corpus("nmod");
        let wd = StubScorer::new(&[], 0.0);
        let cd = StubScorer::new(&[("t1", "t2", 0.95), ("r", "p", 0.85)], 0.0);
        let cfg = MergeConfig::default();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 3, "stage 1 merges only the trial pair");

        // 0.85 > theta_second licenses the governor-modifier merge.
        let witness = {
            let ids: Vec<usize> = state.clusters.keys().copied().collect();
            governor_modifier_related(&state, &corpus, ids[0], ids[2], &cd, &cfg).unwrap()
        };
        assert_eq!(witness, Some(("r".to_string(), "p".to_string(), 0.85)));
        stage2(&mut state, &corpus, &cd, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 2);
        assert_eq!(members_of(&state, &corpus, "r"), vec!["r", "p"]);
        assert_eq!(state.merge_log.last().unwrap().merge_type, MergeType::Gm);

        // Different relation labels on the two sides: no witness. (Stage 2 as
        // a whole could still merge them through context similarity, since
        // both co-occur with the trial cluster; the relation gate alone must
        // say no.)
        let corpus = gm_corpus("dobj");
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &cfg).unwrap();
        assert_eq!(governor_modifier_related(&state, &corpus, 0, 2, &cd, &cfg).unwrap(), None);

        // Structure present but the score misses the gate: no witness.
        let corpus = gm_corpus("nmod");
        let weak = StubScorer::new(&[("t1", "t2", 0.95), ("r", "p", 0.75)], 0.0);
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &weak, &cfg).unwrap();
        stage2(&mut state, &corpus, &weak, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 3);
    }

    /// Two documents, each with one "fight" mention sharing a sentence with
    /// one "clash" mention; the clash pair is already coreferent.
    fn ctx_corpus() -> Corpus {
        let json = serde_json::json!({
            "documents": [
                doc_json("d1", &["fight", "clash"], serde_json::json!([
                    {"id": "f1", "head_token": 0, "span": [0, 1]},
                    {"id": "c1", "head_token": 1, "span": [1, 2]}
                ])),
                doc_json("d2", &["fight", "clash"], serde_json::json!([
                    {"id": "f2", "head_token": 0, "span": [0, 1]},
                    {"id": "c2", "head_token": 1, "span": [1, 2]}
                ]))
            ],
            "gold_chains": [["f1", "f2"], ["c1", "c2"]]
        })
        .to_string();
        Corpus::from_json(&json, "test").unwrap()
    }

    #[test]
    fn context_vectors_count_sentence_cooccurrence() {
        let corpus = ctx_corpus();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        // Merge the two clash clusters (ids 1 and 3) so both fight clusters
        // share the clash cluster as context.
        state.merge(1, 3, MergeType::Cd, ("c1".into(), "c2".into()), 0.95, Some(1)).unwrap();
        let vectors = build_context_vectors(&state, &corpus);
        assert_eq!(vectors[&0].get(&1), Some(&1));
        assert_eq!(vectors[&2].get(&1), Some(&1));
        assert_eq!(vectors[&1].get(&0), Some(&1), "symmetric entries");
        assert_eq!(vectors[&1].get(&2), Some(&1));
        assert_eq!(vectors[&0].get(&2), None, "no shared sentence, no entry");
        assert_eq!(vectors[&0].get(&0), None, "no self entry");
    }

    #[test]
    fn context_similarity_needs_both_gates() {
        let corpus = ctx_corpus();
        let wd = StubScorer::new(&[], 0.0);
        let cfg = MergeConfig::default();

        // Stage 1 merges the clash pair; stage 2's context phase then sees
        // identical fight context vectors and a 0.85 witness.
        let cd = StubScorer::new(&[("c1", "c2", 0.95), ("f1", "f2", 0.85)], 0.0);
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &cd, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 3);
        stage2(&mut state, &corpus, &cd, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 2);
        assert_eq!(state.merge_log.last().unwrap().merge_type, MergeType::Ctx);
        assert_eq!(members_of(&state, &corpus, "f1"), vec!["f1", "f2"]);

        // Cosine passes but the witness score misses theta_second: no merge.
        let weak = StubScorer::new(&[("c1", "c2", 0.95), ("f1", "f2", 0.79)], 0.0);
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &weak, &cfg).unwrap();
        stage2(&mut state, &corpus, &weak, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 3);

        // Without the clash merge the context vectors share no keys: no merge.
        let disjoint = StubScorer::new(&[("f1", "f2", 0.85)], 0.0);
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &wd, &disjoint, &cfg).unwrap();
        stage2(&mut state, &corpus, &disjoint, &cfg).unwrap();
        assert_eq!(state.clusters.len(), 4);
    }

    /// Oracle scorer: 1.0 iff the two mentions share a gold chain.
    struct GoldScorer {
        chain_of: HashMap<String, usize>,
    }

    impl GoldScorer {
        fn new(corpus: &Corpus) -> GoldScorer {
            let mut chain_of = HashMap::new();
            for (c, chain) in corpus.gold_chains.iter().enumerate() {
                for id in chain {
                    chain_of.insert(id.clone(), c);
                }
            }
            GoldScorer { chain_of }
        }
    }

    impl PairScorer for GoldScorer {
        fn score(&self, a: &str, b: &str, _: &ArgSets, _: &ArgSets) -> Result<f64> {
            Ok(match (self.chain_of.get(a), self.chain_of.get(b)) {
                (Some(x), Some(y)) if x == y => 1.0,
                _ => 0.0,
            })
        }
    }

    #[test]
    fn resolve_with_gold_scorer_recovers_gold_chains() {
        let corpus = lemma_corpus();
        let doc_clusters =
            DocClusters { clusters: vec![all_docs(&corpus)], converged: true };
        let oracle = GoldScorer::new(&corpus);
        let cfg = MergeConfig::default();
        let clustering = resolve(&corpus, &doc_clusters, &oracle, &oracle, &cfg).unwrap();
        assert_eq!(
            clustering.clusters,
            vec![vec!["k1".to_string(), "k2".into(), "k3".into()], vec!["t1".into(), "t2".into()]]
        );
        assert!(clustering.warnings.is_empty());

        // Deterministic: identical merge logs across runs.
        let again = resolve(&corpus, &doc_clusters, &oracle, &oracle, &cfg).unwrap();
        assert_eq!(clustering, again);

        // Constant-zero scorers leave every mention a singleton.
        let zero = StubScorer::new(&[], 0.0);
        let singletons = resolve(&corpus, &doc_clusters, &zero, &zero, &cfg).unwrap();
        assert_eq!(singletons.clusters.len(), 5);
        assert!(singletons.merge_log.is_empty());
    }

    #[test]
    fn resolve_respects_document_cluster_boundaries() {
        let corpus = lemma_corpus();
        let split = DocClusters {
            clusters: vec![vec!["d1".to_string()], vec!["d2".to_string()]],
            converged: true,
        };
        let oracle = GoldScorer::new(&corpus);
        let cfg = MergeConfig::default();
        let clustering = resolve(&corpus, &split, &oracle, &oracle, &cfg).unwrap();
        // The cross-document kill and talk links are out of reach.
        assert_eq!(
            clustering.clusters,
            vec![
                vec!["k1".to_string(), "k2".into()],
                vec!["t1".to_string()],
                vec!["k3".to_string()],
                vec!["t2".to_string()],
            ]
        );

        let missing = DocClusters { clusters: vec![vec!["d1".to_string()]], converged: true };
        assert!(resolve(&corpus, &missing, &oracle, &oracle, &cfg).is_err());
    }

    #[test]
    fn stage1_default_variant_reaches_a_fixpoint() {
        // Deterministic pseudo-random symmetric scores from mention ids.
        struct HashScorer;
        impl PairScorer for HashScorer {
            fn score(&self, a: &str, b: &str, args_a: &ArgSets, args_b: &ArgSets) -> Result<f64> {
                use std::hash::{Hash, Hasher};
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let mut h = std::collections::hash_map::DefaultHasher::new();
                lo.hash(&mut h);
                hi.hash(&mut h);
                // Let propagated arguments nudge scores so the fixpoint check
                // genuinely depends on final args.
                let overlap =
                    args_a.get(Role::Arg0).intersection(args_b.get(Role::Arg0)).count() as f64;
                Ok(((h.finish() % 1000) as f64 / 1000.0 + 0.09 * overlap).min(0.999))
            }
        }

        let mut docs = Vec::new();
        for d in 0..3 {
            let lemmas: Vec<String> = (0..6).map(|k| format!("w{d}{k}")).collect();
            let lemma_refs: Vec<&str> = lemmas.iter().map(|s| s.as_str()).collect();
            let mentions: Vec<serde_json::Value> = (0..6)
                .map(|k| {
                    serde_json::json!({
                        "id": format!("m{d}_{k}"),
                        "head_token": k,
                        "span": [k, k + 1],
                        "arguments": {"Arg0": [format!("x{}", (d + k) % 4)]}
                    })
                })
                .collect();
            docs.push(doc_json(&format!("d{d}"), &lemma_refs, serde_json::json!(mentions)));
        }
        let json = serde_json::json!({
            "documents": docs,
            "gold_chains": [["m0_0", "m1_0"]]
        })
        .to_string();
        let corpus = Corpus::from_json(&json, "test").unwrap();
        let scorer = HashScorer;
        let cfg = MergeConfig::default();
        let mut state = init_state(&corpus, &all_docs(&corpus)).unwrap();
        stage1(&mut state, &corpus, &scorer, &scorer, &cfg).unwrap();
        assert!(!state.sweep_capped);

        // No qualifying pair is left above its threshold under final args.
        let ids: Vec<usize> = state.clusters.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if let Some((_, _, s)) =
                    state.best_pair(&corpus, a, b, &scorer, true, &cfg).unwrap()
                {
                    assert!(s <= cfg.theta_wd, "same-doc pair {a}/{b} still mergeable at {s}");
                }
                if let Some((_, _, s)) =
                    state.best_pair(&corpus, a, b, &scorer, false, &cfg).unwrap()
                {
                    assert!(s <= cfg.theta_cd, "cross-doc pair {a}/{b} still mergeable at {s}");
                }
            }
        }
        // Cluster argument sets contain every member's own arguments.
        for cluster in state.clusters.values() {
            for &rank in &cluster.members {
                assert!(corpus.mentions()[rank].arguments.subset_of(&cluster.args));
            }
        }
    }

    #[test]
    fn clustering_round_trips_through_json() {
        let corpus = lemma_corpus();
        let doc_clusters = DocClusters { clusters: vec![all_docs(&corpus)], converged: true };
        let oracle = GoldScorer::new(&corpus);
        let clustering =
            resolve(&corpus, &doc_clusters, &oracle, &oracle, &MergeConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clustering.json");
        clustering.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"type\": \"WD\""));
        assert!(text.contains("\"witness\""));
        assert_eq!(Clustering::load(&path).unwrap(), clustering);
    }

    #[test]
    fn merge_config_validates_and_loads() {
        assert!(MergeConfig::default().validate().is_ok());
        let bad = MergeConfig { theta_wd: 1.0, ..MergeConfig::default() };
        assert!(bad.validate().is_err());
        let bad = MergeConfig { max_sweeps: 0, ..MergeConfig::default() };
        assert!(bad.validate().is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("merge.json");
        std::fs::write(&path, r#"{"theta_cd": 0.8, "loop_variant": "as_written"}"#).unwrap();
        let cfg = MergeConfig::load(&path).unwrap();
        assert_eq!(cfg.theta_cd, 0.8);
        assert_eq!(cfg.loop_variant, LoopVariant::AsWritten);
        assert_eq!(cfg.theta_wd, 0.6, "unset fields keep defaults");
        assert!(cfg.propagate_args && cfg.enable_second_order);
    }
}
