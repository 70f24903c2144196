//! Topic-based document clustering: tf-idf vectors over proper nouns and
//! non-reporting verbs, then exemplar-based affinity propagation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Exemplar preference for affinity propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DocClusterConfig {
    pub damping: f64,
    pub max_iterations: usize,
    /// Iterations the exemplar set must stay unchanged to declare convergence.
    pub convergence_window: usize,
    pub preference: Preference,
    /// Verb lemmas excluded as reporting verbs.
    pub reporting_verbs: BTreeSet<String>,
    /// Verb lemmas excluded as auxiliaries.
    pub auxiliary_verbs: BTreeSet<String>,
    pub proper_noun_tags: BTreeSet<String>,
    pub verb_tags: BTreeSet<String>,
}

fn string_set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for DocClusterConfig {
    fn default() -> Self {
        DocClusterConfig {
            damping: 0.5,
            max_iterations: 200,
            convergence_window: 15,
            preference: Preference::Median,
            reporting_verbs: string_set(&[
                "say", "tell", "report", "announce", "state", "add", "claim", "accord",
            ]),
            auxiliary_verbs: string_set(&[
                "be", "have", "do", "will", "would", "can", "could", "may", "might", "shall",
                "should", "must",
            ]),
            proper_noun_tags: string_set(&["NNP", "NNPS"]),
            verb_tags: string_set(&["VB", "VBD", "VBG", "VBN", "VBP", "VBZ"]),
        }
    }
}

/// L2-normalized tf-idf weights for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct TermVector {
    pub doc_id: String,
    pub weights: BTreeMap<String, f64>,
}

/// Builds one term vector per document (in corpus order). Terms are lowercased
/// lemmas of proper nouns and verbs, minus reporting and auxiliary verbs;
/// weights are `tf * (ln((1+N)/(1+df)) + 1)`, L2-normalized per document.
pub fn build_term_vectors(corpus: &Corpus, config: &DocClusterConfig) -> Result<Vec<TermVector>> {
    let mut counts: Vec<BTreeMap<String, f64>> = Vec::new();
    for doc in corpus.documents() {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for token in &doc.tokens {
            let lemma = token.lemma.to_lowercase();
            let keep = if config.proper_noun_tags.contains(&token.pos) {
                true
            } else if config.verb_tags.contains(&token.pos) {
                !config.reporting_verbs.contains(&lemma) && !config.auxiliary_verbs.contains(&lemma)
            } else {
                false
            };
            if keep {
                *tf.entry(lemma).or_insert(0.0) += 1.0;
            }
        }
        counts.push(tf);
    }
    let mut df: BTreeMap<&String, f64> = BTreeMap::new();
    for tf in &counts {
        for term in tf.keys() {
            *df.entry(term).or_insert(0.0) += 1.0;
        }
    }
    if df.is_empty() {
        return Err(Error::invalid("no clustering terms survive filtering in any document"));
    }
    let n = corpus.documents().len() as f64;
    let vectors = corpus
        .documents()
        .iter()
        .zip(&counts)
        .map(|(doc, tf)| {
            let mut weights: BTreeMap<String, f64> = tf
                .iter()
                .map(|(term, &count)| {
                    let idf = ((1.0 + n) / (1.0 + df[term])).ln() + 1.0;
                    (term.clone(), count * idf)
                })
                .collect();
            let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for w in weights.values_mut() {
                    *w /= norm;
                }
            }
            TermVector { doc_id: doc.doc_id.clone(), weights }
        })
        .collect();
    Ok(vectors)
}

/// Negative squared Euclidean distance between two sparse vectors.
pub fn neg_sq_distance(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(term, &wa)| b.get(term).map(|&wb| wa * wb))
        .sum();
    let na: f64 = a.values().map(|w| w * w).sum();
    let nb: f64 = b.values().map(|w| w * w).sum();
    -(na + nb - 2.0 * dot)
}

/// Result of affinity propagation over an index set `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApOutcome {
    /// Exemplar index assigned to each point.
    pub exemplar_of: Vec<usize>,
    pub exemplars: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

/// Runs affinity propagation on a square similarity matrix. The diagonal is
/// replaced by the configured preference. Returns clusters even without
/// convergence, with `converged` reporting which case occurred.
pub fn affinity_propagation(
    similarities: &[Vec<f64>],
    config: &DocClusterConfig,
) -> Result<ApOutcome> {
    let n = similarities.len();
    if n == 0 {
        return Err(Error::invalid("affinity propagation needs at least one point"));
    }
    if similarities.iter().any(|row| row.len() != n) {
        return Err(Error::shape(format!("similarity matrix must be {n}x{n}")));
    }
    if !(0.0..1.0).contains(&config.damping) {
        return Err(Error::invalid(format!("damping {} outside [0, 1)", config.damping)));
    }
    if n == 1 {
        return Ok(ApOutcome { exemplar_of: vec![0], exemplars: vec![0], converged: true, iterations: 0 });
    }

    let preference = match config.preference {
        Preference::Value(p) => p,
        Preference::Median => {
            let mut off: Vec<f64> = (0..n)
                .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
                .map(|(i, k)| similarities[i][k])
                .collect();
            off.sort_by(|a, b| a.partial_cmp(b).expect("similarities must not be NaN"));
            let mid = off.len() / 2;
            if off.len() % 2 == 0 {
                (off[mid - 1] + off[mid]) / 2.0
            } else {
                off[mid]
            }
        }
    };

    // Identical similarities leave the message-passing equations with nothing
    // to break ties on, so add a tiny deterministic bias toward low indices.
    let mut s = vec![vec![0.0; n]; n];
    let magnitude = similarities
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(preference.abs(), f64::max)
        .max(1.0);
    let eps = 1e-9 * magnitude;
    for i in 0..n {
        for k in 0..n {
            let base = if i == k { preference } else { similarities[i][k] };
            if !base.is_finite() {
                return Err(Error::Numeric(format!("similarity [{i}][{k}] is not finite")));
            }
            s[i][k] = base + eps * ((2 * n - i - k) as f64) / ((2 * n) as f64);
        }
    }

    let damping = config.damping;
    let mut r = vec![vec![0.0; n]; n];
    let mut a = vec![vec![0.0; n]; n];
    let mut exemplars: BTreeSet<usize> = BTreeSet::new();
    let mut stable_for = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..config.max_iterations {
        iterations += 1;
        // Responsibilities: r(i,k) = s(i,k) - max_{k' != k} (a(i,k') + s(i,k')).
        for i in 0..n {
            let (mut best, mut second, mut best_k) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0);
            for k in 0..n {
                let v = a[i][k] + s[i][k];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let cap = if k == best_k { second } else { best };
                r[i][k] = damping * r[i][k] + (1.0 - damping) * (s[i][k] - cap);
            }
        }
        // Availabilities from column sums of positive responsibilities.
        for k in 0..n {
            let mut pos_sum = 0.0;
            for i in 0..n {
                if i != k {
                    pos_sum += r[i][k].max(0.0);
                }
            }
            for i in 0..n {
                let new = if i == k {
                    pos_sum
                } else {
                    (r[k][k] + pos_sum - r[i][k].max(0.0)).min(0.0)
                };
                a[i][k] = damping * a[i][k] + (1.0 - damping) * new;
            }
        }
        let current: BTreeSet<usize> = (0..n).filter(|&k| a[k][k] + r[k][k] > 0.0).collect();
        if current == exemplars {
            stable_for += 1;
        } else {
            exemplars = current;
            stable_for = 0;
        }
        if !exemplars.is_empty() && stable_for >= config.convergence_window {
            converged = true;
            break;
        }
    }

    if exemplars.is_empty() {
        // Degenerate run: fall back to the single strongest self-exemplar.
        let best = (0..n)
            .max_by(|&x, &y| {
                (a[x][x] + r[x][x]).partial_cmp(&(a[y][y] + r[y][y])).expect("finite evidence")
            })
            .expect("n > 0");
        exemplars.insert(best);
        converged = false;
    }

    let exemplar_of: Vec<usize> = (0..n)
        .map(|i| {
            if exemplars.contains(&i) {
                i
            } else {
                *exemplars
                    .iter()
                    .max_by(|&&x, &&y| s[i][x].partial_cmp(&s[i][y]).expect("finite similarity"))
                    .expect("exemplar set is non-empty")
            }
        })
        .collect();
    Ok(ApOutcome { exemplar_of, exemplars: exemplars.into_iter().collect(), converged, iterations })
}

/// Document clusters in CLI wire form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocClusters {
    /// Each inner list is one cluster of document ids.
    pub clusters: Vec<Vec<String>>,
    pub converged: bool,
}

impl DocClusters {
    pub fn load(path: impl AsRef<Path>) -> Result<DocClusters> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("doc clusters serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Checks that the clusters cover every corpus document exactly once.
    pub fn check_cover(&self, corpus: &Corpus) -> Result<()> {
        let mut seen = BTreeSet::new();
        for doc_id in self.clusters.iter().flatten() {
            if corpus.document(doc_id).is_none() {
                return Err(Error::invalid(format!("document clusters name unknown document {doc_id:?}")));
            }
            if !seen.insert(doc_id) {
                return Err(Error::invalid(format!("document {doc_id:?} appears in two clusters")));
            }
        }
        if seen.len() != corpus.documents().len() {
            let missing: Vec<&str> = corpus
                .documents()
                .iter()
                .map(|d| d.doc_id.as_str())
                .filter(|id| !seen.contains(&id.to_string()))
                .take(3)
                .collect();
            return Err(Error::invalid(format!(
                "document clusters miss {} documents (e.g. {missing:?})",
                corpus.documents().len() - seen.len()
            )));
        }
        Ok(())
    }
}

/// Clusters the corpus documents by tf-idf topic similarity.
pub fn cluster_documents(corpus: &Corpus, config: &DocClusterConfig) -> Result<DocClusters> {
    if corpus.documents().is_empty() {
        return Err(Error::invalid("corpus has no documents to cluster"));
    }
    let vectors = build_term_vectors(corpus, config)?;
    let n = vectors.len();
    let mut sims = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = neg_sq_distance(&vectors[i].weights, &vectors[j].weights);
            sims[i][j] = s;
            sims[j][i] = s;
        }
    }
    let outcome = affinity_propagation(&sims, config)?;
    // Group by exemplar, ordering clusters by their lowest document index.
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, &e) in outcome.exemplar_of.iter().enumerate() {
        groups.entry(e).or_default().push(vectors[i].doc_id.clone());
    }
    let mut clusters: Vec<(usize, Vec<String>)> = groups
        .into_iter()
        .map(|(e, members)| {
            let first = members
                .iter()
                .map(|d| corpus.doc_position(d).expect("clustered doc exists"))
                .min()
                .expect("cluster non-empty");
            let _ = e;
            (first, members)
        })
        .collect();
    clusters.sort_by_key(|(first, _)| *first);
    Ok(DocClusters {
        clusters: clusters.into_iter().map(|(_, members)| members).collect(),
        converged: outcome.converged,
    })
}
