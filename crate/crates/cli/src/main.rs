//! `corefmerge`: two-stage iterative event coreference resolution.
//!
//! Subcommands compose through JSON files: `gen-synthetic` emits a corpus and
//! embeddings, `cluster-docs` groups the documents by topic, `train` fits the
//! pairwise classifiers, `resolve` produces a clustering, and `score` compares
//! it to the gold chains. `run-experiment` wires the whole pipeline for one
//! classifier variant. Exit codes: 0 on success, 1 on bad input, 2 on i/o or
//! numeric failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use corefmerge_core::corpus::{Corpus, EmbeddingTable};
use corefmerge_core::docluster::{cluster_documents, DocClusterConfig, DocClusters};
use corefmerge_core::engine::{resolve, Clustering, MergeConfig};
use corefmerge_core::error::{Error, Result};
use corefmerge_core::experiment::{run_experiment, train_model, RunConfig};
use corefmerge_core::metrics::{evaluate, project_wd};
use corefmerge_core::neural::{head_feature_names, ModelKind, PairwiseModel, TrainConfig};
use corefmerge_core::scorers::ModelScorer;
use corefmerge_core::synth::{gen_synthetic, SyntheticSpec};

#[derive(Parser)]
#[command(name = "corefmerge", version, about = "Two-stage iterative event coreference resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wd,
    Cd,
}

impl From<Kind> for ModelKind {
    fn from(kind: Kind) -> ModelKind {
        match kind {
            Kind::Wd => ModelKind::Wd,
            Kind::Cd => ModelKind::Cd,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic corpus with matching embeddings.
    GenSynthetic {
        /// Generator spec (JSON); defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the spec's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the corpus JSON.
        #[arg(long)]
        out_corpus: PathBuf,
        /// Where to write the embedding table (word per line).
        #[arg(long)]
        out_embeddings: PathBuf,
    },
    /// Cluster documents by lexical topic with affinity propagation.
    ClusterDocs {
        #[arg(long)]
        corpus: PathBuf,
        /// Clustering parameters (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a within-document or cross-document pairwise classifier.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Embedding table; the dimension is read off the first row.
        #[arg(long)]
        embeddings: PathBuf,
        /// Overrides the inferred embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Seed for parameter initialization and pair generation.
        #[arg(long)]
        seed: u64,
        /// Training hyperparameters (JSON); defaults apply when omitted.
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Where to write the trained model JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run two-stage coreference resolution with trained classifiers.
    Resolve {
        #[arg(long)]
        corpus: PathBuf,
        /// Document clusters JSON, or "auto" to cluster with defaults.
        #[arg(long)]
        doc_clusters: String,
        #[arg(long)]
        wd_model: PathBuf,
        #[arg(long)]
        cd_model: PathBuf,
        /// Embedding table; the dimension is read off the first row.
        #[arg(long)]
        embeddings: PathBuf,
        /// Overrides the inferred embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Merge thresholds and loop options (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a system clustering against a corpus's gold chains.
    Score {
        /// Corpus JSON carrying the gold chains.
        #[arg(long)]
        gold: PathBuf,
        /// Clustering JSON as written by `resolve`.
        #[arg(long)]
        system: PathBuf,
        /// cd scores the clustering as is; wd projects it per document.
        #[arg(long, value_enum)]
        level: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, resolve and score one classifier variant end to end.
    RunExperiment {
        #[arg(long)]
        corpus: PathBuf,
        /// Embedding table; the dimension is read off the first row.
        #[arg(long)]
        embeddings: PathBuf,
        /// Overrides the inferred embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Variant, training and merge settings (JSON); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the experiment report JSON.
        #[arg(long)]
        out: PathBuf,
        /// Also write the final clustering JSON here.
        #[arg(long)]
        out_clustering: Option<PathBuf>,
    },
    /// Print a trained model's output-head weights as JSON.
    DumpWeights {
        #[arg(long)]
        model: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid(format!("cannot serialize output: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// The embedding dimension: the override if given, else the field count of
/// the file's first non-empty row.
fn embedding_dim(path: &Path, dim: Option<usize>) -> Result<usize> {
    if let Some(dim) = dim {
        return Ok(dim);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(|line| line.split_whitespace().count())
        .find(|&n| n > 0)
        .and_then(|n| n.checked_sub(1).filter(|&d| d > 0))
        .ok_or_else(|| Error::parse(path, "no embedding rows to infer the dimension from"))
}

fn load_embeddings(path: &Path, dim: Option<usize>) -> Result<EmbeddingTable> {
    EmbeddingTable::load(path, embedding_dim(path, dim)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynthetic { spec, seed, out_corpus, out_embeddings } => {
            let mut spec = match spec {
                Some(path) => SyntheticSpec::load(&path)?,
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let (corpus, table) = gen_synthetic(&spec)?;
            corpus.save(&out_corpus)?;
            table.save(&out_embeddings)?;
            println!(
                "{} documents, {} mentions, {} gold chains",
                corpus.documents().len(),
                corpus.mentions().len(),
                corpus.gold_chains.len()
            );
        }
        Command::ClusterDocs { corpus, config, out } => {
            let corpus = Corpus::load(&corpus)?;
            let config = match config {
                Some(path) => read_json(&path)?,
                None => DocClusterConfig::default(),
            };
            let clusters = cluster_documents(&corpus, &config)?;
            if !clusters.converged {
                eprintln!("warning: affinity propagation did not converge");
            }
            write_json(&out, &clusters)?;
            println!("{} document clusters", clusters.clusters.len());
        }
        Command::Train { corpus, embeddings, dim, kind, seed, train_config, out } => {
            let corpus = Corpus::load(&corpus)?;
            let table = load_embeddings(&embeddings, dim)?;
            let config = match train_config {
                Some(path) => read_json(&path)?,
                None => TrainConfig::default(),
            };
            let kind = ModelKind::from(kind);
            let model = train_model(&corpus, &table, kind, &config, seed)?;
            model.save(&out)?;
            println!("saved {kind} model to {}", out.display());
        }
        Command::Resolve { corpus, doc_clusters, wd_model, cd_model, embeddings, dim, config, out } => {
            let corpus = Corpus::load(&corpus)?;
            let table = load_embeddings(&embeddings, dim)?;
            let wd = PairwiseModel::load(&wd_model)?;
            if wd.kind != ModelKind::Wd {
                return Err(Error::invalid(format!("--wd-model holds a {} model", wd.kind)));
            }
            let cd = PairwiseModel::load(&cd_model)?;
            if cd.kind != ModelKind::Cd {
                return Err(Error::invalid(format!("--cd-model holds a {} model", cd.kind)));
            }
            let clusters = if doc_clusters == "auto" {
                cluster_documents(&corpus, &DocClusterConfig::default())?
            } else {
                DocClusters::load(Path::new(&doc_clusters))?
            };
            let config = match config {
                Some(path) => read_json::<MergeConfig>(&path)?,
                None => MergeConfig::default(),
            };
            let wd_scorer = ModelScorer::new(&wd, &corpus, &table)?;
            let cd_scorer = ModelScorer::new(&cd, &corpus, &table)?;
            let clustering = resolve(&corpus, &clusters, &wd_scorer, &cd_scorer, &config)?;
            for warning in &clustering.warnings {
                eprintln!("warning: {warning}");
            }
            write_json(&out, &clustering)?;
            println!(
                "{} clusters over {} mentions",
                clustering.clusters.len(),
                corpus.mentions().len()
            );
        }
        Command::Score { gold, system, level, out } => {
            let corpus = Corpus::load(&gold)?;
            let clustering: Clustering = read_json(&system)?;
            let mut gold_part = corpus.gold_partition();
            let mut sys_part = clustering.partition();
            if matches!(level, Kind::Wd) {
                gold_part = project_wd(&gold_part, &corpus)?;
                sys_part = project_wd(&sys_part, &corpus)?;
            }
            let report = evaluate(&gold_part, &sys_part)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            write_json(&out, &report)?;
            println!(
                "MUC F1 {:.4}  B3 F1 {:.4}  CEAF_e F1 {:.4}  CoNLL F1 {:.4}",
                report.muc.f1, report.b_cubed.f1, report.ceaf_e.f1, report.conll_f1
            );
        }
        Command::RunExperiment { corpus, embeddings, dim, config, out, out_clustering } => {
            let corpus = Corpus::load(&corpus)?;
            let table = load_embeddings(&embeddings, dim)?;
            let config = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let outcome = run_experiment(&corpus, &table, &config)?;
            for warning in &outcome.report.warnings {
                eprintln!("warning: {warning}");
            }
            write_json(&out, &outcome.report)?;
            if let Some(path) = out_clustering {
                write_json(&path, &outcome.clustering)?;
            }
            println!(
                "{}: CD CoNLL F1 {:.4}, WD CoNLL F1 {:.4}",
                outcome.report.variant.label(),
                outcome.report.cd.conll_f1,
                outcome.report.wd.conll_f1
            );
        }
        Command::DumpWeights { model } => {
            let model = PairwiseModel::load(&model)?;
            let head: serde_json::Map<String, serde_json::Value> = head_feature_names(model.kind)
                .iter()
                .zip(&model.head.weights)
                .map(|(name, weight)| (name.to_string(), serde_json::json!(weight)))
                .collect();
            let dump = serde_json::json!({
                "kind": model.kind,
                "head": head,
                "bias": model.head.bias,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&dump)
                    .map_err(|e| Error::invalid(format!("cannot serialize weights: {e}")))?
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version land here too; only real usage errors are failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
