//! Coreference metrics: MUC, B-cubed, entity-based CEAF, and their CoNLL
//! average, plus projection of a clustering onto document boundaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// A partition of mention ids into clusters.
pub type Partition = Vec<BTreeSet<String>>;

/// Recall / precision / F1 triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    /// Builds the triple from ratio counts, mapping 0/0 to 0 and noting the
    /// degenerate case in `warnings`.
    fn from_ratios(
        metric: &str,
        r_num: f64,
        r_den: f64,
        p_num: f64,
        p_den: f64,
        warnings: &mut Vec<String>,
    ) -> Prf {
        let mut ratio = |name: &str, num: f64, den: f64| {
            if den == 0.0 {
                warnings.push(format!("{metric} {name} is 0/0; reporting 0"));
                0.0
            } else {
                num / den
            }
        };
        let recall = ratio("recall", r_num, r_den);
        let precision = ratio("precision", p_num, p_den);
        let f1 = if recall + precision == 0.0 {
            warnings.push(format!("{metric} F1 is 0/0; reporting 0"));
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Prf { recall, precision, f1 }
    }
}

/// All metrics for one gold/system partition pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub conll_f1: f64,
    pub warnings: Vec<String>,
}

/// Mean of the MUC, B-cubed, and CEAF F1 scores.
pub fn conll(muc: &Prf, b_cubed: &Prf, ceaf_e: &Prf) -> f64 {
    (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0
}

/// Checks that `partition` has no empty clusters and no repeated mention, and
/// returns its sorted universe of mention ids.
fn check_partition(name: &str, partition: &[BTreeSet<String>]) -> Result<BTreeSet<String>> {
    let mut universe = BTreeSet::new();
    for (i, cluster) in partition.iter().enumerate() {
        if cluster.is_empty() {
            return Err(Error::invalid(format!("{name} partition has empty cluster {i}")));
        }
        for id in cluster {
            if !universe.insert(id.clone()) {
                return Err(Error::invalid(format!(
                    "{name} partition repeats mention {id:?}; clusters must be disjoint"
                )));
            }
        }
    }
    Ok(universe)
}

fn check_universes(gold: &[BTreeSet<String>], system: &[BTreeSet<String>]) -> Result<BTreeSet<String>> {
    let gu = check_partition("gold", gold)?;
    let su = check_partition("system", system)?;
    if gu != su {
        let missing: Vec<&String> = gu.difference(&su).take(3).collect();
        let extra: Vec<&String> = su.difference(&gu).take(3).collect();
        return Err(Error::invalid(format!(
            "gold and system mention universes differ (e.g. missing from system: {missing:?}, unexpected in system: {extra:?})"
        )));
    }
    if gu.is_empty() {
        return Err(Error::invalid("cannot score empty partitions"));
    }
    Ok(gu)
}

fn cluster_of<'a>(partition: &'a [BTreeSet<String>]) -> HashMap<&'a String, usize> {
    let mut map = HashMap::new();
    for (i, cluster) in partition.iter().enumerate() {
        for id in cluster {
            map.insert(id, i);
        }
    }
    map
}

/// How many distinct clusters of `partition` a mention set touches.
fn partitions_of(chain: &BTreeSet<String>, index: &HashMap<&String, usize>) -> usize {
    chain.iter().filter_map(|id| index.get(id)).collect::<BTreeSet<_>>().len()
}

/// Link-based MUC score.
pub fn muc(gold: &[BTreeSet<String>], system: &[BTreeSet<String>]) -> Result<Prf> {
    let mut warnings = Vec::new();
    let prf = muc_inner(gold, system, &mut warnings)?;
    Ok(prf)
}

fn muc_inner(
    gold: &[BTreeSet<String>],
    system: &[BTreeSet<String>],
    warnings: &mut Vec<String>,
) -> Result<Prf> {
    check_universes(gold, system)?;
    let side = |key: &[BTreeSet<String>], response: &[BTreeSet<String>]| {
        let index = cluster_of(response);
        let mut num = 0.0;
        let mut den = 0.0;
        for chain in key {
            num += (chain.len() - partitions_of(chain, &index)) as f64;
            den += (chain.len() - 1) as f64;
        }
        (num, den)
    };
    let (r_num, r_den) = side(gold, system);
    let (p_num, p_den) = side(system, gold);
    Ok(Prf::from_ratios("MUC", r_num, r_den, p_num, p_den, warnings))
}

/// Mention-based B-cubed score with unweighted per-mention means.
pub fn b_cubed(gold: &[BTreeSet<String>], system: &[BTreeSet<String>]) -> Result<Prf> {
    let mut warnings = Vec::new();
    let prf = b_cubed_inner(gold, system, &mut warnings)?;
    Ok(prf)
}

fn b_cubed_inner(
    gold: &[BTreeSet<String>],
    system: &[BTreeSet<String>],
    warnings: &mut Vec<String>,
) -> Result<Prf> {
    let universe = check_universes(gold, system)?;
    let gold_of = cluster_of(gold);
    let sys_of = cluster_of(system);
    let mut recall_sum = 0.0;
    let mut precision_sum = 0.0;
    for id in &universe {
        let g = &gold[gold_of[id]];
        let s = &system[sys_of[id]];
        let overlap = g.intersection(s).count() as f64;
        recall_sum += overlap / g.len() as f64;
        precision_sum += overlap / s.len() as f64;
    }
    let n = universe.len() as f64;
    Ok(Prf::from_ratios("B-cubed", recall_sum, n, precision_sum, n, warnings))
}

/// Entity-based CEAF with the phi-4 similarity `2|K∩R| / (|K|+|R|)`.
pub fn ceaf_e(gold: &[BTreeSet<String>], system: &[BTreeSet<String>]) -> Result<Prf> {
    let mut warnings = Vec::new();
    let prf = ceaf_e_inner(gold, system, &mut warnings)?;
    Ok(prf)
}

fn ceaf_e_inner(
    gold: &[BTreeSet<String>],
    system: &[BTreeSet<String>],
    warnings: &mut Vec<String>,
) -> Result<Prf> {
    check_universes(gold, system)?;
    let n = gold.len().max(system.len());
    let mut score = vec![vec![0.0; n]; n];
    for (i, k) in gold.iter().enumerate() {
        for (j, r) in system.iter().enumerate() {
            let overlap = k.intersection(r).count() as f64;
            score[i][j] = 2.0 * overlap / (k.len() + r.len()) as f64;
        }
    }
    let (total, _) = max_assignment(&score);
    Ok(Prf::from_ratios("CEAF-e", total, gold.len() as f64, total, system.len() as f64, warnings))
}

/// Scores gold against system with all metrics and their CoNLL average.
pub fn evaluate(gold: &[BTreeSet<String>], system: &[BTreeSet<String>]) -> Result<EvalReport> {
    let mut warnings = Vec::new();
    let muc = muc_inner(gold, system, &mut warnings)?;
    let b_cubed = b_cubed_inner(gold, system, &mut warnings)?;
    let ceaf_e = ceaf_e_inner(gold, system, &mut warnings)?;
    let conll_f1 = conll(&muc, &b_cubed, &ceaf_e);
    Ok(EvalReport { muc, b_cubed, ceaf_e, conll_f1, warnings })
}

/// Splits every cluster along document boundaries, turning a cross-document
/// clustering into its within-document projection.
pub fn project_wd(partition: &[BTreeSet<String>], corpus: &Corpus) -> Result<Partition> {
    let mut out = Vec::new();
    for cluster in partition {
        let mut by_doc: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
        for id in cluster {
            let mention = corpus.mention_or_err(id)?;
            by_doc.entry(&mention.doc_id).or_default().insert(id.clone());
        }
        out.extend(by_doc.into_values());
    }
    Ok(out)
}

/// Maximum-total assignment over a square score matrix: returns the best total
/// and the column chosen for each row. O(n^3) Kuhn-Munkres with potentials.
pub fn max_assignment(score: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = score.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    debug_assert!(score.iter().all(|row| row.len() == n), "assignment matrix must be square");
    // Minimize negated scores; 1-indexed arrays with column 0 as the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -score[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| score[i][assignment[i]]).sum();
    (total, assignment)
}
