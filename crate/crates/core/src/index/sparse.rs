use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{sort_hits, IndexError, ScoredHit};
use crate::corpus::{Passage, Scope};
use crate::text::lexical_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

/// Inverted index scored with Robertson BM25:
///
/// `score(d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))`,
/// `idf(t) = ln(1 + (N − df + 0.5)/(df + 0.5))`,
///
/// summed over the distinct terms of the query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseIndex {
    ids: Vec<String>,
    scopes: Vec<Scope>,
    doc_len: Vec<u32>,
    /// term -> (document ordinal, term frequency), ordinals ascending.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    avgdl: f64,
    params: Bm25Params,
}

impl SparseIndex {
    pub fn build<'a>(passages: impl IntoIterator<Item = &'a Passage>, params: Bm25Params) -> Result<Self, IndexError> {
        let mut ids = Vec::new();
        let mut scopes = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (ord, p) in passages.into_iter().enumerate() {
            let tokens = lexical_tokens(&p.text);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens.iter() {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((ord as u32, count));
            }
            ids.push(p.id.clone());
            scopes.push(p.scope);
            doc_len.push(tokens.len() as u32);
        }
        if ids.is_empty() {
            return Err(IndexError::Empty);
        }
        let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
        let avgdl = total as f64 / ids.len() as f64;
        Ok(Self {
            ids,
            scopes,
            doc_len,
            postings,
            avgdl,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_len(&self, id: &str) -> Option<u32> {
        self.ids.iter().position(|x| x == id).map(|i| self.doc_len[i])
    }

    /// Postings for `term` as (passage id, tf).
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|list| list.iter().map(|&(d, tf)| (self.ids[d as usize].as_str(), tf)).collect())
            .unwrap_or_default()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.ids.len() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn accumulate(&self, query: &str) -> HashMap<u32, f64> {
        let Bm25Params { k1, b } = self.params;
        let mut seen = HashSet::new();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in lexical_tokens(query) {
            if !seen.insert(term.clone()) {
                continue;
            }
            let Some(list) = self.postings.get(&term) else { continue };
            let idf = self.idf(&term);
            for &(d, tf) in list {
                let tf = tf as f64;
                let dl = self.doc_len[d as usize] as f64;
                let norm = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / self.avgdl));
                *scores.entry(d).or_default() += idf * norm;
            }
        }
        scores
    }

    /// Top `k` documents with positive score.
    pub fn search(&self, query: &str, k: usize) -> Vec<ScoredHit> {
        let mut hits: Vec<ScoredHit> = self
            .accumulate(query)
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, score)| self.hit(d, score))
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }

    /// Every document's score, including zeros, in hit order.
    pub fn score_all(&self, query: &str) -> Vec<ScoredHit> {
        let scores = self.accumulate(query);
        let mut hits: Vec<ScoredHit> = (0..self.ids.len() as u32)
            .map(|d| self.hit(d, scores.get(&d).copied().unwrap_or(0.0)))
            .collect();
        sort_hits(&mut hits);
        hits
    }

    fn hit(&self, d: u32, score: f64) -> ScoredHit {
        ScoredHit {
            passage_id: self.ids[d as usize].clone(),
            score,
            scope: self.scopes[d as usize],
        }
    }

    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("index serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn passages(texts: &[(&str, &str)]) -> Vec<Passage> {
        texts.iter().map(|(id, t)| Passage::new(*id, "", *t, Scope::Public)).collect()
    }

    #[test]
    fn single_doc_postings_and_avgdl() {
        let ps = passages(&[("d", "a b a")]);
        let idx = SparseIndex::build(&ps, Bm25Params::default()).unwrap();
        assert_eq!(idx.postings("a"), vec![("d", 2)]);
        assert_eq!(idx.postings("b"), vec![("d", 1)]);
        assert_eq!(idx.avgdl(), 3.0);
    }

    #[test]
    fn avgdl_is_mean_length() {
        let ps = passages(&[("x", "one two three"), ("y", "four five")]);
        assert_eq!(SparseIndex::build(&ps, Bm25Params::default()).unwrap().avgdl(), 2.5);
    }

    #[test]
    fn empty_collection_is_rejected() {
        assert!(matches!(SparseIndex::build(&[], Bm25Params::default()), Err(IndexError::Empty)));
    }

    #[test]
    fn rebuild_has_identical_fingerprint() {
        let ps = passages(&[("x", "one two three"), ("y", "four five")]);
        let a = SparseIndex::build(&ps, Bm25Params::default()).unwrap();
        let b = SparseIndex::build(&ps, Bm25Params::default()).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    fn enron() -> SparseIndex {
        let ps = passages(&[("d1", "enron energy california"), ("d2", "enron email")]);
        SparseIndex::build(&ps, Bm25Params { k1: 0.9, b: 0.4 }).unwrap()
    }

    #[test]
    fn worked_example_scores() {
        let idx = enron();
        let hits = idx.search("energy", 10);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].passage_id, "d1");
        // ln 2 * 1.9 / 1.972
        assert!((hits[0].score - 0.6678).abs() < 1e-4, "{}", hits[0].score);
        assert!((hits[0].score - std::f64::consts::LN_2 * 1.9 / 1.972).abs() < 1e-12);

        let hits = idx.search("enron", 10);
        let ids: Vec<_> = hits.iter().map(|h| h.passage_id.as_str()).collect();
        assert_eq!(ids, ["d2", "d1"]);
        assert!(hits[0].score > hits[1].score);
    }

    #[test]
    fn no_overlap_query_is_empty() {
        assert!(enron().search("zebra", 5).is_empty());
        assert!(enron().search("", 5).is_empty());
    }

    #[test]
    fn score_all_includes_zero_scores() {
        let all = enron().score_all("energy");
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].score, 0.0);
    }

    /// Direct evaluation of the scoring formula, from raw token counts.
    fn oracle_score(docs: &[Vec<String>], query: &[String], d: usize, k1: f64, b: f64) -> f64 {
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|t| t.len()).sum::<usize>() as f64 / n;
        let mut terms: Vec<&String> = Vec::new();
        for t in query {
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        terms
            .into_iter()
            .map(|t| {
                let df = docs.iter().filter(|doc| doc.contains(t)).count() as f64;
                let tf = docs[d].iter().filter(|x| *x == t).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let dl = docs[d].len() as f64;
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl))
            })
            .sum()
    }

    proptest! {
        #[test]
        fn scores_match_formula(
            docs in prop::collection::vec(prop::collection::vec(0u8..12, 1..15), 1..30),
            query in prop::collection::vec(0u8..15, 1..6),
        ) {
            let word = |i: u8| format!("t{i}");
            let toks: Vec<Vec<String>> = docs.iter().map(|d| d.iter().map(|&i| word(i)).collect()).collect();
            let q: Vec<String> = query.iter().map(|&i| word(i)).collect();
            let ps: Vec<Passage> = toks.iter().enumerate().map(|(i, t)| Passage::new(format!("d{i:03}"), "", t.join(" "), Scope::Public)).collect();
            let idx = SparseIndex::build(&ps, Bm25Params::default()).unwrap();
            for hit in idx.score_all(&q.join(" ")) {
                let d: usize = hit.passage_id[1..].parse().unwrap();
                prop_assert!((hit.score - oracle_score(&toks, &q, d, 0.9, 0.4)).abs() < 1e-9);
            }
            // Top-k lists nest.
            let full = idx.search(&q.join(" "), ps.len());
            for k in 1..=ps.len() {
                let part = idx.search(&q.join(" "), k);
                prop_assert_eq!(&part[..], &full[..part.len()]);
            }
        }
    }
}
