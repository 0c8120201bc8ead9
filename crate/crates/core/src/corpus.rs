//! Corpus loading, cleaning, tokenization, length filtering, vocabulary
//! construction and time-bin segmentation.
//!
//! All products are immutable once built. Tokenization runs in parallel over
//! documents; the vocabulary is a single reduction over the retained set.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// A raw record as read from disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub uid: String,
    pub text: String,
    pub year: i32,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, rejecting empty or duplicate uids.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if doc.uid.is_empty() {
                return Err(Error::Validation("document with empty uid".into()));
            }
            if !seen.insert(doc.uid.as_str()) {
                return Err(Error::DuplicateUid(doc.uid.clone()));
            }
        }
        Ok(Corpus { docs })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn year_histogram(&self) -> BTreeMap<i32, usize> {
        let mut hist = BTreeMap::new();
        for doc in &self.docs {
            *hist.entry(doc.year).or_insert(0) += 1;
        }
        hist
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::Parameter(format!("unknown corpus format {other:?}"))),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let docs = match format {
        CorpusFormat::Jsonl => read_jsonl_records(path)?,
        CorpusFormat::Csv => read_csv_records(path)?,
    };
    Corpus::new(docs)
}

fn read_jsonl_records(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e))?;
        docs.push(doc);
    }
    Ok(docs)
}

fn read_csv_records(path: &Path) -> Result<Vec<Document>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e))?;
    let mut docs = Vec::new();
    for (i, record) in reader.deserialize::<Document>().enumerate() {
        // header occupies line 1
        let doc = record.map_err(|e| Error::parse(path, i + 2, e))?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Removes every character that is not alphanumeric, whitespace or a full
/// stop, then collapses whitespace runs to a single space and trims.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut gap = false;
    for ch in raw.chars() {
        if ch.is_alphanumeric() || ch == '.' {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.push(ch);
        } else {
            gap = true;
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Lowercased tokens split on whitespace and full stops, in order.
fn raw_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || c == '.')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    raw_tokens(text).filter(|t| !stopwords.contains(t)).collect()
}

/// Optional term → lemma substitution table.
#[derive(Debug, Clone, Default)]
pub struct LemmaMap(HashMap<String, String>);

impl LemmaMap {
    /// Two-column TSV, `term<TAB>lemma`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(term), Some(lemma), None) if !term.is_empty() && !lemma.is_empty() => {
                    map.insert(term.trim().to_lowercase(), lemma.trim().to_lowercase());
                }
                _ => return Err(Error::parse(path, i + 1, "expected term<TAB>lemma")),
            }
        }
        Ok(LemmaMap(map))
    }

    pub fn apply<'a>(&'a self, token: &'a str) -> &'a str {
        self.0.get(token).map(String::as_str).unwrap_or(token)
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for LemmaMap {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        LemmaMap(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    pub uid: String,
    pub year: i32,
    pub tokens: Vec<String>,
    /// Token count the length filter compares against `min_tokens`.
    pub counted_len: usize,
    pub retained: bool,
}

impl TokenizedDocument {
    /// A document whose filter length is its own token count.
    pub fn new(uid: impl Into<String>, year: i32, tokens: Vec<String>) -> Self {
        let counted_len = tokens.len();
        TokenizedDocument {
            uid: uid.into(),
            year,
            tokens,
            counted_len,
            retained: true,
        }
    }
}

/// Where the minimum-length filter counts tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    /// After cleaning, before stopword removal.
    #[default]
    BeforeStopwords,
    AfterStopwords,
}

#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stopwords: Stopwords,
    pub lemmas: Option<LemmaMap>,
    pub min_tokens: usize,
    pub filter_stage: FilterStage,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor {
            stopwords: Stopwords::english(),
            lemmas: None,
            min_tokens: 20,
            filter_stage: FilterStage::BeforeStopwords,
        }
    }
}

impl Preprocessor {
    pub fn tokenize_document(&self, doc: &Document) -> TokenizedDocument {
        let cleaned = clean_text(&doc.text);
        let mut before = 0usize;
        let tokens: Vec<String> = raw_tokens(&cleaned)
            .inspect(|_| before += 1)
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| match &self.lemmas {
                Some(l) => l.apply(&t).to_string(),
                None => t,
            })
            .collect();
        let counted_len = match self.filter_stage {
            FilterStage::BeforeStopwords => before,
            FilterStage::AfterStopwords => tokens.len(),
        };
        TokenizedDocument {
            uid: doc.uid.clone(),
            year: doc.year,
            tokens,
            counted_len,
            retained: false,
        }
    }

    /// Tokenizes every document and marks which survive the length filter.
    /// The returned list keeps the corpus order and includes dropped
    /// documents with `retained == false`.
    pub fn run(&self, corpus: &Corpus) -> Result<Vec<TokenizedDocument>> {
        let mut docs: Vec<TokenizedDocument> = corpus
            .docs()
            .par_iter()
            .map(|d| self.tokenize_document(d))
            .collect();
        mark_short(&mut docs, self.min_tokens)?;
        Ok(docs)
    }
}

/// Sets `retained` on every document; fails if nothing survives.
pub fn mark_short(docs: &mut [TokenizedDocument], min_tokens: usize) -> Result<usize> {
    if min_tokens == 0 {
        return Err(Error::Parameter("min_tokens must be at least 1".into()));
    }
    let mut kept = 0;
    for doc in docs.iter_mut() {
        doc.retained = doc.counted_len >= min_tokens;
        kept += doc.retained as usize;
    }
    if kept == 0 {
        return Err(Error::CorpusTooSmall(format!(
            "no document of {} has at least {min_tokens} tokens",
            docs.len()
        )));
    }
    Ok(kept)
}

/// Keeps only documents with at least `min_tokens` counted tokens.
pub fn filter_short(
    mut docs: Vec<TokenizedDocument>,
    min_tokens: usize,
) -> Result<Vec<TokenizedDocument>> {
    mark_short(&mut docs, min_tokens)?;
    docs.retain(|d| d.retained);
    Ok(docs)
}

/// Term axis shared by every document-term matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    corpus_freq: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    corpus_freq: Vec<usize>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms: r.terms,
            doc_freq: r.doc_freq,
            corpus_freq: r.corpus_freq,
            n_docs: r.n_docs,
            index,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            n_docs: v.n_docs,
            terms: v.terms,
            doc_freq: v.doc_freq,
            corpus_freq: v.corpus_freq,
        }
    }
}

impl Vocabulary {
    /// A vocabulary over exactly `terms` (sorted, deduplicated) with
    /// frequencies counted from the retained documents.
    pub fn from_terms<I, S>(terms: I, docs: &[TokenizedDocument]) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut terms: Vec<String> = terms.into_iter().map(Into::into).collect();
        terms.sort();
        terms.dedup();
        let index: HashMap<String, usize> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let mut doc_freq = vec![0; terms.len()];
        let mut corpus_freq = vec![0; terms.len()];
        let mut n_docs = 0;
        for doc in docs.iter().filter(|d| d.retained) {
            n_docs += 1;
            let mut seen = HashSet::new();
            for tok in &doc.tokens {
                if let Some(&id) = index.get(tok) {
                    corpus_freq[id] += 1;
                    if seen.insert(id) {
                        doc_freq[id] += 1;
                    }
                }
            }
        }
        Vocabulary {
            terms,
            doc_freq,
            corpus_freq,
            n_docs,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    pub fn corpus_freq(&self, id: usize) -> usize {
        self.corpus_freq[id]
    }

    /// Number of retained documents the frequencies were counted over.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Vocabulary ids of a token sequence, skipping out-of-vocabulary tokens.
    pub fn encode<'a>(&'a self, tokens: &'a [String]) -> impl Iterator<Item = usize> + 'a {
        tokens.iter().filter_map(|t| self.id(t))
    }
}

/// Counts document frequencies over retained documents and keeps terms with
/// `min_df <= df <= max_df_ratio * N`. Ids follow lexicographic term order.
pub fn build_vocabulary(
    docs: &[TokenizedDocument],
    min_df: usize,
    max_df_ratio: f64,
) -> Result<Vocabulary> {
    let retained: Vec<&TokenizedDocument> = docs.iter().filter(|d| d.retained).collect();
    if retained.is_empty() {
        return Err(Error::CorpusTooSmall("no retained documents".into()));
    }
    if !(0.0..=1.0).contains(&max_df_ratio) {
        return Err(Error::Parameter(format!(
            "max_df_ratio must lie in [0, 1], got {max_df_ratio}"
        )));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in &retained {
        let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let max_df = max_df_ratio * retained.len() as f64;
    let keep = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df && n as f64 <= max_df)
        .map(|(t, _)| t.to_string());
    let vocab = Vocabulary::from_terms(keep, docs);
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_df,
            max_df_ratio,
        });
    }
    Ok(vocab)
}

/// Ordered, non-overlapping, inclusive year intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[i32; 2]>", into = "Vec<[i32; 2]>")]
pub struct TimeBins(Vec<[i32; 2]>);

impl TimeBins {
    /// Sorts the intervals and rejects inverted or overlapping ones.
    pub fn new(mut bins: Vec<[i32; 2]>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Validation("at least one time bin is required".into()));
        }
        if let Some([s, e]) = bins.iter().find(|[s, e]| s > e) {
            return Err(Error::Validation(format!("time bin {s}-{e} is inverted")));
        }
        bins.sort();
        for w in bins.windows(2) {
            if w[1][0] <= w[0][1] {
                return Err(Error::Validation(format!(
                    "time bins {}-{} and {}-{} overlap",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                )));
            }
        }
        Ok(TimeBins(bins))
    }

    /// The four sixteen-year periods 1955-1970 through 2003-2018.
    pub fn default_periods() -> Self {
        TimeBins(vec![
            [1955, 1970],
            [1971, 1986],
            [1987, 2002],
            [2003, 2018],
        ])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bounds(&self) -> &[[i32; 2]] {
        &self.0
    }

    pub fn label(&self, bin: usize) -> String {
        let [s, e] = self.0[bin];
        format!("{s}-{e}")
    }

    pub fn bin_of(&self, year: i32) -> Option<usize> {
        let i = self.0.partition_point(|[_, end]| *end < year);
        (i < self.0.len() && self.0[i][0] <= year).then_some(i)
    }
}

impl TryFrom<Vec<[i32; 2]>> for TimeBins {
    type Error = Error;

    fn try_from(v: Vec<[i32; 2]>) -> Result<Self> {
        TimeBins::new(v)
    }
}

impl From<TimeBins> for Vec<[i32; 2]> {
    fn from(b: TimeBins) -> Self {
        b.0
    }
}

/// Anything with a uid and a publication year.
pub trait Dated {
    fn uid(&self) -> &str;
    fn year(&self) -> i32;
}

impl Dated for Document {
    fn uid(&self) -> &str {
        &self.uid
    }
    fn year(&self) -> i32 {
        self.year
    }
}

impl Dated for TokenizedDocument {
    fn uid(&self) -> &str {
        &self.uid
    }
    fn year(&self) -> i32 {
        self.year
    }
}

pub fn assign_bins<D: Dated>(docs: &[D], bins: &TimeBins) -> Result<BTreeMap<String, usize>> {
    docs.iter()
        .map(|d| {
            bins.bin_of(d.year())
                .map(|b| (d.uid().to_string(), b))
                .ok_or(Error::UncoveredYear(d.year()))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityAnnotations {
    pub entities: BTreeMap<String, Vec<String>>,
    /// Annotated uids that are not part of the corpus.
    pub ignored: usize,
}

impl EntityAnnotations {
    /// Fraction of the given uids that carry at least one entity.
    pub fn coverage<'a>(&self, uids: impl IntoIterator<Item = &'a str>) -> f64 {
        let (mut hit, mut total) = (0usize, 0usize);
        for uid in uids {
            total += 1;
            if self.entities.get(uid).is_some_and(|e| !e.is_empty()) {
                hit += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// Entity-token view of the corpus: each retained document's tokens are
    /// replaced by its (lowercased) entity strings.
    pub fn documents(&self, docs: &[TokenizedDocument]) -> Vec<TokenizedDocument> {
        docs.iter()
            .map(|d| {
                let tokens = self.entities.get(&d.uid).cloned().unwrap_or_default();
                TokenizedDocument {
                    uid: d.uid.clone(),
                    year: d.year,
                    counted_len: tokens.len(),
                    tokens,
                    retained: d.retained,
                }
            })
            .collect()
    }
}

/// Reads entity annotations. Each non-empty line is either
/// `{"uid": ..., "entities": [...]}` or an object mapping uids to entity
/// lists. Entity strings are lowercased. When `known` is given, uids outside
/// it are dropped and counted in `ignored`.
pub fn load_entity_annotations(
    path: &Path,
    known: Option<&HashSet<String>>,
) -> Result<EntityAnnotations> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = EntityAnnotations::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e))?;
        let entries = annotation_entries(&value)
            .ok_or_else(|| Error::parse(path, i + 1, "expected {uid, entities} or {uid: [..]}"))?;
        for (uid, ents) in entries {
            if known.is_some_and(|k| !k.contains(&uid)) {
                out.ignored += 1;
                continue;
            }
            let normalized = ents.into_iter().map(|e| e.trim().to_lowercase());
            out.entities.entry(uid).or_default().extend(normalized);
        }
    }
    log::info!(
        "{} annotated, {} ignored",
        out.entities.len(),
        out.ignored
    );
    if out.ignored > 0 {
        log::warn!("{} annotated uid(s) are not in the corpus", out.ignored);
    }
    Ok(out)
}

fn annotation_entries(value: &serde_json::Value) -> Option<Vec<(String, Vec<String>)>> {
    let obj = value.as_object()?;
    let strings = |v: &serde_json::Value| -> Option<Vec<String>> {
        v.as_array()?
            .iter()
            .map(|e| e.as_str().map(str::to_string))
            .collect()
    };
    if let (Some(uid), Some(ents)) = (obj.get("uid"), obj.get("entities")) {
        return Some(vec![(uid.as_str()?.to_string(), strings(ents)?)]);
    }
    obj.iter()
        .map(|(uid, v)| Some((uid.clone(), strings(v)?)))
        .collect()
}
