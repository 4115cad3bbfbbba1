//! Scoped passage collections and benchmark examples.
//!
//! Each corpus file holds exactly one scope. A passage's scope comes from the
//! file it was loaded from; an optional per-line `"scope"` field must agree.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty corpus")]
    Empty,
    #[error("line {line}: malformed passage: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: passage {id:?} has empty text")]
    EmptyText { line: usize, id: String },
    #[error("line {line}: passage has empty id")]
    EmptyId { line: usize },
    #[error("duplicate passage id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: passage {id:?} declares scope {declared} but the corpus is {expected}")]
    ScopeMismatch {
        line: usize,
        id: String,
        declared: Scope,
        expected: Scope,
    },
    #[error("invalid chunking: {0}")]
    InvalidChunking(String),
    #[error("malformed benchmark: {0}")]
    MalformedBenchmark(String),
    #[error("example {example:?}: missing field {field:?}")]
    MissingField { example: String, field: &'static str },
    #[error("example {example:?}: supporting passage {passage:?} not found in either corpus")]
    DanglingSupport { example: String, passage: String },
}

/// Security level of a passage. `Public < Private`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Public,
    Private,
}

impl Scope {
    pub const ALL: [Scope; 2] = [Scope::Public, Scope::Private];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Public => "public",
            Scope::Private => "private",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "public" => Ok(Scope::Public),
            "private" => Ok(Scope::Private),
            other => Err(format!("unknown scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub title: String,
    pub text: String,
    pub scope: Scope,
    pub sentences: Vec<String>,
}

impl Passage {
    /// Builds a passage, deriving sentences from the text.
    pub fn new(id: impl Into<String>, title: impl Into<String>, text: impl Into<String>, scope: Scope) -> Self {
        let text = text.into();
        let sentences = text::split_sentences(&text);
        Self {
            id: id.into(),
            title: title.into(),
            text,
            scope,
            sentences,
        }
    }

    pub fn word_count(&self) -> usize {
        text::whitespace_token_count(&self.text)
    }
}

/// On-disk line shape of a corpus file.
#[derive(Debug, Serialize, Deserialize)]
struct PassageLine {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scope: Option<Scope>,
}

/// An immutable, non-empty collection of passages sharing one scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    scope: Scope,
    passages: IndexMap<String, Passage>,
    total_words: usize,
}

impl Corpus {
    pub fn new(scope: Scope, passages: impl IntoIterator<Item = Passage>) -> Result<Self, CorpusError> {
        let mut map = IndexMap::new();
        let mut total_words = 0;
        for (i, p) in passages.into_iter().enumerate() {
            let line = i + 1;
            if p.id.is_empty() {
                return Err(CorpusError::EmptyId { line });
            }
            if p.text.trim().is_empty() {
                return Err(CorpusError::EmptyText { line, id: p.id });
            }
            if p.scope != scope {
                return Err(CorpusError::ScopeMismatch {
                    line,
                    id: p.id,
                    declared: p.scope,
                    expected: scope,
                });
            }
            if map.contains_key(&p.id) {
                return Err(CorpusError::DuplicateId(p.id));
            }
            total_words += p.word_count();
            map.insert(p.id.clone(), p);
        }
        if map.is_empty() {
            return Err(CorpusError::Empty);
        }
        Ok(Self {
            scope,
            passages: map,
            total_words,
        })
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn total_words(&self) -> usize {
        self.total_words
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_words as f64 / self.passages.len() as f64
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.passages.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.passages.contains_key(id)
    }

    /// Passages in load order.
    pub fn passages(&self) -> impl ExactSizeIterator<Item = &Passage> {
        self.passages.values()
    }

    pub fn into_passages(self) -> Vec<Passage> {
        self.passages.into_values().collect()
    }
}

pub fn load_corpus(path: &Path, scope: Scope) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file), scope)
}

/// Parses corpus JSONL. Blank lines are skipped but still counted.
pub fn read_corpus(reader: impl BufRead, scope: Scope) -> Result<Corpus, CorpusError> {
    let mut passages = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: PassageLine = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        if raw.text.trim().is_empty() {
            return Err(CorpusError::EmptyText { line: line_no, id: raw.id });
        }
        if let Some(declared) = raw.scope {
            if declared != scope {
                return Err(CorpusError::ScopeMismatch {
                    line: line_no,
                    id: raw.id,
                    declared,
                    expected: scope,
                });
            }
        }
        if !seen.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId(raw.id));
        }
        let sentences = raw.sentences.unwrap_or_else(|| text::split_sentences(&raw.text));
        passages.push(Passage {
            id: raw.id,
            title: raw.title,
            text: raw.text,
            scope,
            sentences,
        });
    }
    Corpus::new(scope, passages)
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    write_corpus_to(corpus, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_corpus_to(corpus: &Corpus, out: &mut impl Write) -> std::io::Result<()> {
    for p in corpus.passages() {
        let line = PassageLine {
            id: p.id.clone(),
            title: p.title.clone(),
            text: p.text.clone(),
            sentences: Some(p.sentences.clone()),
            scope: Some(p.scope),
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Splits `text` into sliding windows of whitespace words.
///
/// Window `i` covers words `[i*stride, i*stride + window)`; generation stops
/// at the first window that reaches the last word.
pub fn chunk_document(text: &str, window: usize, stride: usize) -> Result<Vec<String>, CorpusError> {
    if window == 0 {
        return Err(CorpusError::InvalidChunking("window must be positive".into()));
    }
    if stride == 0 {
        return Err(CorpusError::InvalidChunking("stride must be positive".into()));
    }
    if stride > window {
        return Err(CorpusError::InvalidChunking(format!(
            "stride {stride} exceeds window {window}, words would be skipped"
        )));
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < words.len() {
        let end = (start + window).min(words.len());
        chunks.push(words[start..end].join(" "));
        if end == words.len() {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}

/// Chunks every passage. Multi-chunk passages get ids `<id>_c<n>`.
pub fn chunk_corpus(corpus: &Corpus, window: usize, stride: usize) -> Result<Corpus, CorpusError> {
    let mut out = Vec::new();
    for p in corpus.passages() {
        let chunks = chunk_document(&p.text, window, stride)?;
        if chunks.len() == 1 {
            out.push(p.clone());
            continue;
        }
        for (i, chunk) in chunks.into_iter().enumerate() {
            out.push(Passage::new(format!("{}_c{i}", p.id), p.title.clone(), chunk, p.scope));
        }
    }
    Corpus::new(corpus.scope(), out)
}

fn dedup_key(text: &str) -> String {
    text::collapse_whitespace(&text.to_lowercase())
}

/// Drops passages whose normalized text repeats, keeping the lowest id of
/// each duplicate group. Survivors keep their input order.
pub fn dedup(corpus: &Corpus) -> Corpus {
    let mut keeper: HashMap<String, &str> = HashMap::new();
    for p in corpus.passages() {
        keeper
            .entry(dedup_key(&p.text))
            .and_modify(|id| {
                if p.id.as_str() < *id {
                    *id = &p.id;
                }
            })
            .or_insert(&p.id);
    }
    let kept: HashSet<&str> = keeper.into_values().collect();
    let passages = corpus.passages().filter(|p| kept.contains(p.id.as_str())).cloned();
    Corpus::new(corpus.scope(), passages).expect("subset of a valid corpus is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Bridge,
    Comparison,
}

/// Gold-hop scopes of an example: E is private (email), W is public.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathLabel {
    EE,
    EW,
    WE,
    WW,
    #[serde(rename = "unlabeled")]
    Unlabeled,
}

impl PathLabel {
    pub const LABELED: [PathLabel; 4] = [PathLabel::EE, PathLabel::EW, PathLabel::WE, PathLabel::WW];

    pub fn from_scopes(first: Scope, second: Scope) -> Self {
        match (first, second) {
            (Scope::Private, Scope::Private) => PathLabel::EE,
            (Scope::Private, Scope::Public) => PathLabel::EW,
            (Scope::Public, Scope::Private) => PathLabel::WE,
            (Scope::Public, Scope::Public) => PathLabel::WW,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PathLabel::EE => "EE",
            PathLabel::EW => "EW",
            PathLabel::WE => "WE",
            PathLabel::WW => "WW",
            PathLabel::Unlabeled => "unlabeled",
        }
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkExample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub qtype: QuestionType,
    pub supporting_facts: Vec<(String, usize)>,
    /// Scope of each distinct supporting passage, in hop order.
    pub hop_path: Vec<Scope>,
}

impl BenchmarkExample {
    /// Distinct supporting passage ids in order of first appearance.
    pub fn supporting_passages(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.supporting_facts
            .iter()
            .map(|(id, _)| id.as_str())
            .filter(|id| seen.insert(*id))
            .collect()
    }

    pub fn path_label(&self) -> PathLabel {
        match self.hop_path.as_slice() {
            [a, b] => PathLabel::from_scopes(*a, *b),
            _ => PathLabel::Unlabeled,
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RawExample {
    #[serde(rename = "_id")]
    id: Option<String>,
    question: Option<String>,
    answer: Option<String>,
    #[serde(rename = "type")]
    qtype: Option<QuestionType>,
    #[serde(alias = "supporting_facts")]
    sp: Option<Vec<(String, usize)>>,
}

fn scope_of(id: &str, public: &Corpus, private: &Corpus) -> Option<Scope> {
    if public.contains(id) {
        Some(public.scope())
    } else if private.contains(id) {
        Some(private.scope())
    } else {
        None
    }
}

/// Label of the hop path: one letter per distinct supporting passage.
pub fn hop_path_of(example: &BenchmarkExample, public: &Corpus, private: &Corpus) -> PathLabel {
    let scopes: Option<Vec<Scope>> = example
        .supporting_passages()
        .into_iter()
        .map(|id| scope_of(id, public, private))
        .collect();
    match scopes.as_deref() {
        Some([a, b]) => PathLabel::from_scopes(*a, *b),
        _ => PathLabel::Unlabeled,
    }
}

pub fn load_benchmark(path: &Path, public: &Corpus, private: &Corpus) -> Result<Vec<BenchmarkExample>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_benchmark(BufReader::new(file), public, private)
}

pub fn read_benchmark(
    reader: impl std::io::Read,
    public: &Corpus,
    private: &Corpus,
) -> Result<Vec<BenchmarkExample>, CorpusError> {
    let raw: Vec<RawExample> =
        serde_json::from_reader(reader).map_err(|e| CorpusError::MalformedBenchmark(e.to_string()))?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| resolve_example(r, i, public, private))
        .collect()
}

fn resolve_example(raw: RawExample, index: usize, public: &Corpus, private: &Corpus) -> Result<BenchmarkExample, CorpusError> {
    let id = raw.id.unwrap_or_else(|| format!("#{index}"));
    let missing = |field| CorpusError::MissingField { example: id.clone(), field };
    let question = raw.question.ok_or_else(|| missing("question"))?;
    let answer = raw.answer.ok_or_else(|| missing("answer"))?;
    let supporting_facts = raw.sp.ok_or_else(|| missing("sp"))?;
    let mut example = BenchmarkExample {
        id: id.clone(),
        question,
        answer,
        qtype: raw.qtype.unwrap_or(QuestionType::Bridge),
        supporting_facts,
        hop_path: Vec::new(),
    };
    let mut hop_path = Vec::new();
    for pid in example.supporting_passages() {
        let scope = scope_of(pid, public, private).ok_or_else(|| CorpusError::DanglingSupport {
            example: id.clone(),
            passage: pid.to_string(),
        })?;
        hop_path.push(scope);
    }
    example.hop_path = hop_path;
    Ok(example)
}

pub fn write_benchmark(examples: &[BenchmarkExample], out: impl Write) -> serde_json::Result<()> {
    let raw: Vec<RawExample> = examples
        .iter()
        .map(|e| RawExample {
            id: Some(e.id.clone()),
            question: Some(e.question.clone()),
            answer: Some(e.answer.clone()),
            qtype: Some(e.qtype),
            sp: Some(e.supporting_facts.clone()),
        })
        .collect();
    serde_json::to_writer(out, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read(s: &str, scope: Scope) -> Result<Corpus, CorpusError> {
        read_corpus(s.as_bytes(), scope)
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(read("", Scope::Public), Err(CorpusError::Empty)));
        assert_eq!(read("", Scope::Public).unwrap_err().to_string(), "empty corpus");
    }

    #[test]
    fn two_passages_load_in_order_with_stats() {
        let c = read(
            "{\"id\":\"b\",\"title\":\"B\",\"text\":\"one two three\"}\n{\"id\":\"a\",\"title\":\"A\",\"text\":\"x y\"}\n",
            Scope::Private,
        )
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.passages().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(c.total_words(), 5);
        assert_eq!(c.avg_doc_len(), 2.5);
        assert!(c.passages().all(|p| p.scope == Scope::Private));
    }

    #[test]
    fn duplicate_id_is_named() {
        let err = read(
            "{\"id\":\"e1\",\"text\":\"a\"}\n{\"id\":\"e1\",\"text\":\"b\"}\n",
            Scope::Private,
        )
        .unwrap_err();
        assert!(matches!(&err, CorpusError::DuplicateId(id) if id == "e1"));
    }

    #[test]
    fn empty_text_names_the_line() {
        let err = read("{\"id\":\"a\",\"text\":\"ok\"}\n{\"id\":\"b\",\"text\":\"   \"}\n", Scope::Public).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyText { line: 2, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read("{\"id\":\"a\",\"text\":\"ok\"}\nnot json\n", Scope::Public).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn declared_scope_must_match_file_scope() {
        let err = read("{\"id\":\"a\",\"text\":\"ok\",\"scope\":\"private\"}\n", Scope::Public).unwrap_err();
        assert!(matches!(err, CorpusError::ScopeMismatch { declared: Scope::Private, .. }));
        assert!(read("{\"id\":\"a\",\"text\":\"ok\",\"scope\":\"public\"}\n", Scope::Public).is_ok());
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn chunk_short_text_is_single_chunk() {
        let c = chunk_document(&words(100), 150, 75).unwrap();
        assert_eq!(c, vec![words(100)]);
    }

    #[test]
    fn chunk_overlapping_windows() {
        let c = chunk_document(&words(200), 150, 75).unwrap();
        assert_eq!(c.len(), 2);
        let all: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
        assert_eq!(c[0], all[0..150].join(" "));
        assert_eq!(c[1], all[75..200].join(" "));
    }

    #[test]
    fn chunk_disjoint_windows() {
        let c = chunk_document(&words(300), 150, 150).unwrap();
        let all: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
        assert_eq!(c, vec![all[0..150].join(" "), all[150..300].join(" ")]);
    }

    #[test]
    fn chunk_rejects_bad_parameters() {
        assert!(chunk_document("a b", 0, 0).is_err());
        assert!(chunk_document("a b", 10, 11).is_err());
        assert!(chunk_document("a b", 10, 0).is_err());
    }

    proptest! {
        #[test]
        fn chunks_cover_every_word_within_window(n in 0usize..400, window in 1usize..60, stride_frac in 0.0f64..1.0) {
            let stride = ((window as f64 * stride_frac).floor() as usize).clamp(1, window);
            let text = words(n);
            let chunks = chunk_document(&text, window, stride).unwrap();
            let mut covered = vec![false; n];
            for (i, ch) in chunks.iter().enumerate() {
                let len = ch.split_whitespace().count();
                prop_assert!(len <= window);
                if n >= window && i + 1 < chunks.len() {
                    prop_assert_eq!(len, window);
                }
                for j in 0..len {
                    covered[i * stride + j] = true;
                }
            }
            prop_assert!(covered.iter().all(|c| *c));
        }
    }

    fn corpus<S: AsRef<str>>(texts: &[(S, S)]) -> Corpus {
        Corpus::new(
            Scope::Private,
            texts.iter().map(|(id, t)| Passage::new(id.as_ref(), "", t.as_ref(), Scope::Private)),
        )
        .unwrap()
    }

    #[test]
    fn dedup_keeps_lowest_id_in_input_order() {
        let c = corpus(&[("b", "Hello  World"), ("c", "other"), ("a", "hello world")]);
        let d = dedup(&c);
        assert_eq!(d.passages().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["c", "a"]);
        let same = dedup(&corpus(&[("x1", "same text"), ("x2", "same text")]));
        assert_eq!(same.passages().map(|p| p.id.as_str()).collect::<Vec<_>>(), ["x1"]);
    }

    proptest! {
        #[test]
        fn dedup_is_idempotent_and_shrinking(texts in prop::collection::vec("[ab ]{1,6}[ab]", 1..20)) {
            let named: Vec<(String, String)> = texts.iter().enumerate().map(|(i, t)| (format!("p{i:02}"), t.clone())).collect();
            let c = corpus(&named);
            let once = dedup(&c);
            prop_assert!(once.len() <= c.len());
            prop_assert_eq!(dedup(&once), once);
        }

        #[test]
        fn corpus_jsonl_round_trips(texts in prop::collection::vec("[a-zA-Z\"\\\\. ]{0,12}[a-z]", 1..10)) {
            let c = Corpus::new(
                Scope::Public,
                texts.iter().enumerate().map(|(i, t)| Passage::new(format!("d{i}"), format!("T{i}"), t.clone(), Scope::Public)),
            ).unwrap();
            let mut buf = Vec::new();
            write_corpus_to(&c, &mut buf).unwrap();
            let back = read_corpus(buf.as_slice(), Scope::Public).unwrap();
            prop_assert_eq!(back, c);
        }
    }

    fn pair() -> (Corpus, Corpus) {
        let public = Corpus::new(
            Scope::Public,
            ["d1", "d7"].map(|id| Passage::new(id, id, "public text", Scope::Public)),
        )
        .unwrap();
        let private = Corpus::new(
            Scope::Private,
            ["p1", "p2"].map(|id| Passage::new(id, id, "private text", Scope::Private)),
        )
        .unwrap();
        (public, private)
    }

    fn bench_json(sp: &[(&str, usize)]) -> String {
        let sp: Vec<String> = sp.iter().map(|(p, i)| format!("[\"{p}\",{i}]")).collect();
        format!(
            "[{{\"_id\":\"q\",\"question\":\"?\",\"answer\":\"a\",\"type\":\"bridge\",\"sp\":[{}]}}]",
            sp.join(",")
        )
    }

    #[test]
    fn benchmark_paths_follow_support_scopes() {
        let (public, private) = pair();
        let cases = [
            (vec![("d1", 0), ("d7", 1)], PathLabel::WW),
            (vec![("p1", 0), ("d7", 0)], PathLabel::EW),
            (vec![("d7", 0), ("p1", 2), ("p1", 3)], PathLabel::WE),
            (vec![("p1", 0), ("p2", 0)], PathLabel::EE),
        ];
        for (sp, want) in cases {
            let ex = read_benchmark(bench_json(&sp).as_bytes(), &public, &private).unwrap();
            assert_eq!(ex[0].path_label(), want);
            assert_eq!(hop_path_of(&ex[0], &public, &private), want);
            assert_eq!(ex[0].hop_path.len(), 2);
        }
        let single = read_benchmark(bench_json(&[("p1", 0)]).as_bytes(), &public, &private).unwrap();
        assert_eq!(single[0].path_label(), PathLabel::Unlabeled);
    }

    #[test]
    fn benchmark_rejects_dangling_and_missing_answer() {
        let (public, private) = pair();
        let err = read_benchmark(bench_json(&[("p1", 0), ("x9", 0)]).as_bytes(), &public, &private).unwrap_err();
        assert!(err.to_string().contains("x9"), "{err}");
        let no_answer = "[{\"_id\":\"q1\",\"question\":\"?\",\"type\":\"bridge\",\"sp\":[]}]";
        let err = read_benchmark(no_answer.as_bytes(), &public, &private).unwrap_err();
        assert!(matches!(err, CorpusError::MissingField { field: "answer", .. }));
    }
}
