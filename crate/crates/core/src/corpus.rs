//! Corpus model: documents, tokens, event mentions, gold chains, plus the
//! embedding table and POS tagset used for feature extraction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default dimensionality for word embeddings.
pub const DEFAULT_EMBEDDING_DIM: usize = 300;

/// Semantic roles tracked for every event mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "Arg0")]
    Arg0,
    #[serde(rename = "Arg1")]
    Arg1,
    #[serde(rename = "ArgM:LOC")]
    Location,
    #[serde(rename = "ArgM:TMP")]
    Time,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Arg0, Role::Arg1, Role::Location, Role::Time];

    pub fn label(self) -> &'static str {
        match self {
            Role::Arg0 => "Arg0",
            Role::Arg1 => "Arg1",
            Role::Location => "ArgM:LOC",
            Role::Time => "ArgM:TMP",
        }
    }

    pub fn parse(label: &str) -> Option<Role> {
        Role::ALL.into_iter().find(|r| r.label() == label)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-role sets of argument head lemmas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArgSets([BTreeSet<String>; 4]);

impl ArgSets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, role: Role) -> &BTreeSet<String> {
        &self.0[role.index()]
    }

    pub fn insert(&mut self, role: Role, value: impl Into<String>) {
        self.0[role.index()].insert(value.into());
    }

    /// Grows each role set by the other side's entries.
    pub fn union_with(&mut self, other: &ArgSets) {
        for role in Role::ALL {
            let extra: Vec<String> = other.get(role).iter().cloned().collect();
            self.0[role.index()].extend(extra);
        }
    }

    pub fn union(a: &ArgSets, b: &ArgSets) -> ArgSets {
        let mut out = a.clone();
        out.union_with(b);
        out
    }

    /// True when the other side's sets all contain this side's.
    pub fn subset_of(&self, other: &ArgSets) -> bool {
        Role::ALL.into_iter().all(|r| self.get(r).is_subset(other.get(r)))
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|s| s.is_empty())
    }

    fn to_wire(&self) -> BTreeMap<String, Vec<String>> {
        Role::ALL
            .into_iter()
            .map(|r| (r.label().to_owned(), self.get(r).iter().cloned().collect()))
            .collect()
    }

    fn from_wire(wire: &BTreeMap<String, Vec<String>>, context: &str) -> Result<ArgSets> {
        let mut args = ArgSets::new();
        for (label, values) in wire {
            let role = Role::parse(label).ok_or_else(|| {
                Error::invalid(format!("{context}: unknown argument role label {label:?}"))
            })?;
            for v in values {
                args.insert(role, v.clone());
            }
        }
        Ok(args)
    }
}

/// One token of a document, with its sentence index within the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
    pub sentence: usize,
}

/// A dependency link from an event mention to another mention in the same document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DepLink {
    pub rel: String,
    pub target: String,
}

/// An event mention anchored at a head token of one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventMention {
    pub id: String,
    pub doc_id: String,
    pub head_token: usize,
    /// Token span `[start, end)` covering the mention; contains `head_token`.
    pub span: (usize, usize),
    pub arguments: ArgSets,
    pub dep_links: BTreeSet<DepLink>,
}

/// One document: flattened tokens with sentence bounds, and its mention ids in
/// head-token order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub gold_topic: Option<String>,
    pub tokens: Vec<Token>,
    /// `[start, end)` token ranges of each sentence.
    pub sentence_bounds: Vec<(usize, usize)>,
    pub mentions: Vec<String>,
}

impl Document {
    pub fn sentence_count(&self) -> usize {
        self.sentence_bounds.len()
    }

    pub fn sentence_tokens(&self, sentence: usize) -> &[Token] {
        let (start, end) = self.sentence_bounds[sentence];
        &self.tokens[start..end]
    }
}

/// A corpus of documents with event mentions and gold coreference chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    doc_index: HashMap<String, usize>,
    /// All mentions in corpus order: document order, then head-token order.
    mention_list: Vec<EventMention>,
    mention_index: HashMap<String, usize>,
    pub gold_chains: Vec<BTreeSet<String>>,
}

impl Corpus {
    /// Assembles a corpus without validating it; run [`Corpus::validate`] (or use
    /// [`Corpus::load`]) to check the invariants. Each document's mention list is
    /// derived from `mentions` by grouping on `doc_id` and sorting by head token.
    pub fn from_parts(
        mut documents: Vec<Document>,
        mut mentions: Vec<EventMention>,
        gold_chains: Vec<BTreeSet<String>>,
    ) -> Corpus {
        let doc_index: HashMap<String, usize> =
            documents.iter().enumerate().map(|(i, d)| (d.doc_id.clone(), i)).collect();
        mentions.sort_by(|a, b| {
            let da = doc_index.get(&a.doc_id).copied().unwrap_or(usize::MAX);
            let db = doc_index.get(&b.doc_id).copied().unwrap_or(usize::MAX);
            (da, a.head_token, &a.id).cmp(&(db, b.head_token, &b.id))
        });
        for doc in &mut documents {
            doc.mentions.clear();
        }
        for m in &mentions {
            if let Some(&d) = doc_index.get(&m.doc_id) {
                documents[d].mentions.push(m.id.clone());
            }
        }
        let mention_index: HashMap<String, usize> = mentions
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.clone(), i))
            .collect();
        Corpus { documents, doc_index, mention_list: mentions, mention_index, gold_chains }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    /// All mentions in corpus order (document order, then head-token order).
    pub fn mentions(&self) -> &[EventMention] {
        &self.mention_list
    }

    pub fn mention(&self, id: &str) -> Option<&EventMention> {
        self.mention_index.get(id).map(|&i| &self.mention_list[i])
    }

    pub fn mention_or_err(&self, id: &str) -> Result<&EventMention> {
        self.mention(id).ok_or_else(|| Error::invalid(format!("unknown mention id {id:?}")))
    }

    /// Position of a mention in corpus order.
    pub fn mention_rank(&self, id: &str) -> Option<usize> {
        self.mention_index.get(id).copied()
    }

    pub fn head_token(&self, mention: &EventMention) -> &Token {
        &self.document(&mention.doc_id).expect("mention doc exists").tokens[mention.head_token]
    }

    /// Sentence index (within its document) of a mention's head token.
    pub fn sentence_of(&self, mention: &EventMention) -> usize {
        self.head_token(mention).sentence
    }

    /// Gold chains completed with singleton clusters for every unchained mention.
    pub fn gold_partition(&self) -> Vec<BTreeSet<String>> {
        let chained: BTreeSet<&String> = self.gold_chains.iter().flatten().collect();
        let mut partition = self.gold_chains.clone();
        for m in &self.mention_list {
            if !chained.contains(&m.id) {
                partition.push(BTreeSet::from([m.id.clone()]));
            }
        }
        partition
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Corpus::from_json(&text, &path.display().to_string())
    }

    /// Parses and validates corpus JSON; `origin` names the source in errors.
    pub fn from_json(text: &str, origin: &str) -> Result<Corpus> {
        let wire: CorpusFile = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        let corpus = wire.into_corpus()?;
        corpus.validate().into_result()?;
        Ok(corpus)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Deterministic pretty-printed JSON for this corpus.
    pub fn to_json(&self) -> String {
        let wire = CorpusFile::from_corpus(self);
        let mut out = serde_json::to_string_pretty(&wire).expect("corpus serializes");
        out.push('\n');
        out
    }

    /// Checks every structural invariant, returning errors and warnings.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut seen = BTreeSet::new();
        for m in &self.mention_list {
            if !seen.insert(&m.id) {
                report.error(format!("duplicate mention id {:?}", m.id));
                continue;
            }
            let doc = match self.document(&m.doc_id) {
                Some(d) => d,
                None => {
                    report.error(format!(
                        "mention {:?} references missing document {:?}",
                        m.id, m.doc_id
                    ));
                    continue;
                }
            };
            let (start, end) = m.span;
            if start >= end || end > doc.tokens.len() {
                report.error(format!(
                    "mention {:?} span [{start}, {end}) is invalid for document {:?} with {} tokens",
                    m.id,
                    m.doc_id,
                    doc.tokens.len()
                ));
            } else if m.head_token < start || m.head_token >= end {
                report.error(format!(
                    "mention {:?} head token {} lies outside its span [{start}, {end})",
                    m.id, m.head_token
                ));
            }
            if m.arguments.is_empty() {
                report.warn(format!("mention {:?} has no arguments", m.id));
            }
            for link in &m.dep_links {
                match self.mention(&link.target) {
                    None => report.warn(format!(
                        "mention {:?} has dep link {:?} to non-mention target {:?}",
                        m.id, link.rel, link.target
                    )),
                    Some(t) if t.doc_id != m.doc_id => report.error(format!(
                        "mention {:?} has dep link to {:?} in a different document",
                        m.id, link.target
                    )),
                    Some(_) => {}
                }
            }
        }
        for doc in &self.documents {
            let mut expected = 0usize;
            for (i, (start, end)) in doc.sentence_bounds.iter().enumerate() {
                if *start != expected || start >= end {
                    report.error(format!(
                        "document {:?} sentence {i} has invalid bounds [{start}, {end})",
                        doc.doc_id
                    ));
                    break;
                }
                expected = *end;
            }
            if expected != doc.tokens.len() {
                report.error(format!(
                    "document {:?} sentence bounds do not cover its {} tokens",
                    doc.doc_id,
                    doc.tokens.len()
                ));
            }
        }
        let mut chained: BTreeMap<&String, usize> = BTreeMap::new();
        for (c, chain) in self.gold_chains.iter().enumerate() {
            for id in chain {
                if self.mention(id).is_none() {
                    report.error(format!("gold chain {c} references unknown mention id {id:?}"));
                }
                if let Some(prev) = chained.insert(id, c) {
                    report.error(format!(
                        "mention {id:?} appears in gold chains {prev} and {c}; chains must be disjoint"
                    ));
                }
            }
        }
        report
    }
}

/// Outcome of corpus validation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    fn error(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn warn(&mut self, msg: String) {
        self.warnings.push(msg);
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Validation { errors: self.errors })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    documents: Vec<DocumentFile>,
    gold_chains: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct DocumentFile {
    doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold_topic: Option<String>,
    sentences: Vec<Vec<TokenFile>>,
    mentions: Vec<MentionFile>,
}

#[derive(Serialize, Deserialize)]
struct TokenFile {
    surface: String,
    lemma: String,
    pos: String,
}

#[derive(Serialize, Deserialize)]
struct MentionFile {
    id: String,
    head_token: usize,
    span: (usize, usize),
    #[serde(default)]
    arguments: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    dep_links: Vec<DepLink>,
}

impl CorpusFile {
    fn into_corpus(self) -> Result<Corpus> {
        let mut documents = Vec::new();
        let mut mentions = Vec::new();
        for doc in self.documents {
            let mut tokens = Vec::new();
            let mut bounds = Vec::new();
            for sentence in &doc.sentences {
                let start = tokens.len();
                for t in sentence {
                    tokens.push(Token {
                        surface: t.surface.clone(),
                        lemma: t.lemma.clone(),
                        pos: t.pos.clone(),
                        sentence: bounds.len(),
                    });
                }
                bounds.push((start, tokens.len()));
            }
            for m in doc.mentions {
                let context = format!("mention {:?} in document {:?}", m.id, doc.doc_id);
                mentions.push(EventMention {
                    id: m.id,
                    doc_id: doc.doc_id.clone(),
                    head_token: m.head_token,
                    span: m.span,
                    arguments: ArgSets::from_wire(&m.arguments, &context)?,
                    dep_links: m.dep_links.into_iter().collect(),
                });
            }
            documents.push(Document {
                doc_id: doc.doc_id,
                gold_topic: doc.gold_topic,
                tokens,
                sentence_bounds: bounds,
                mentions: Vec::new(),
            });
        }
        let gold_chains = self
            .gold_chains
            .into_iter()
            .map(|chain| chain.into_iter().collect())
            .collect();
        Ok(Corpus::from_parts(documents, mentions, gold_chains))
    }

    fn from_corpus(corpus: &Corpus) -> CorpusFile {
        let documents = corpus
            .documents()
            .iter()
            .map(|doc| DocumentFile {
                doc_id: doc.doc_id.clone(),
                gold_topic: doc.gold_topic.clone(),
                sentences: doc
                    .sentence_bounds
                    .iter()
                    .map(|&(start, end)| {
                        doc.tokens[start..end]
                            .iter()
                            .map(|t| TokenFile {
                                surface: t.surface.clone(),
                                lemma: t.lemma.clone(),
                                pos: t.pos.clone(),
                            })
                            .collect()
                    })
                    .collect(),
                mentions: doc
                    .mentions
                    .iter()
                    .map(|id| {
                        let m = corpus.mention(id).expect("listed mention exists");
                        MentionFile {
                            id: m.id.clone(),
                            head_token: m.head_token,
                            span: m.span,
                            arguments: m.arguments.to_wire(),
                            dep_links: m.dep_links.iter().cloned().collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        CorpusFile {
            documents,
            gold_chains: corpus
                .gold_chains
                .iter()
                .map(|c| c.iter().cloned().collect())
                .collect(),
        }
    }
}

/// Word-embedding lookup table. Keys are case-folded to lowercase; lookups for
/// unknown words return the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    zero: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> EmbeddingTable {
        EmbeddingTable { dim, vectors: HashMap::new(), zero: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Adds a vector under the lowercased word. As in file loading, the first
    /// entry for a word wins.
    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::shape(format!(
                "embedding for {word:?} has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        self.vectors.entry(word.to_lowercase()).or_insert(vector);
        Ok(())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vectors.contains_key(&word.to_lowercase())
    }

    /// The vector for a word, or the zero vector when the word is unknown.
    pub fn get(&self, word: &str) -> &[f64] {
        self.vectors.get(&word.to_lowercase()).map_or(&self.zero, |v| v.as_slice())
    }

    /// Loads a whitespace-separated `word v1 .. vd` text file. Every line must
    /// carry exactly `dim` values; duplicate words keep the first occurrence.
    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table = EmbeddingTable::new(dim);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().expect("non-empty line has a first field");
            let values: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| {
                        Error::parse(path, format!("line {}: bad float {f:?}", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    path,
                    format!(
                        "line {}: expected {dim} values for {word:?}, found {}",
                        lineno + 1,
                        values.len()
                    ),
                ));
            }
            table.insert(word, values)?;
        }
        Ok(table)
    }

    /// Writes the table in load-compatible form, words sorted for determinism.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = String::new();
        for word in words {
            out.push_str(word);
            for v in &self.vectors[word] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// The 36 Penn Treebank part-of-speech tags.
pub const PTB_TAGS: [&str; 36] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNP", "NNPS",
    "NNS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD",
    "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
];

/// A POS tagset with a one-hot encoding; unknown tags map to a trailing
/// padding slot, so the encoding has `tags.len() + 1` dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosTagset {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl PosTagset {
    pub fn new(tags: Vec<String>) -> Result<PosTagset> {
        let index: HashMap<String, usize> =
            tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tags.len() {
            return Err(Error::invalid("POS tagset contains duplicate tags"));
        }
        Ok(PosTagset { tags, index })
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// One-hot dimensionality: one slot per tag plus the padding slot.
    pub fn one_hot_dim(&self) -> usize {
        self.tags.len() + 1
    }

    /// Slot of a tag; unknown tags get the padding slot.
    pub fn slot(&self, tag: &str) -> usize {
        self.index.get(tag).copied().unwrap_or(self.tags.len())
    }

    pub fn one_hot(&self, tag: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.one_hot_dim()];
        v[self.slot(tag)] = 1.0;
        v
    }
}

impl Default for PosTagset {
    fn default() -> Self {
        PosTagset::new(PTB_TAGS.iter().map(|t| t.to_string()).collect())
            .expect("built-in tagset is duplicate-free")
    }
}
