use serde::{Deserialize, Serialize};

use super::{sort_hits, Embedder, IndexError, ScoredHit};
use crate::corpus::{Passage, Scope};

/// Row-major passage vectors for exhaustive inner-product search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    dim: usize,
    ids: Vec<String>,
    scopes: Vec<Scope>,
    vectors: Vec<f64>,
    embedder_fingerprint: String,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DenseIndex {
    pub fn build<'a>(passages: impl IntoIterator<Item = &'a Passage>, embedder: &dyn Embedder) -> Result<Self, IndexError> {
        let dim = embedder.dim();
        let mut index = Self {
            dim,
            ids: Vec::new(),
            scopes: Vec::new(),
            vectors: Vec::new(),
            embedder_fingerprint: embedder.fingerprint(),
        };
        for p in passages {
            let row = embedder.embed_passage(p)?;
            if row.len() != dim {
                return Err(IndexError::DimensionMismatch { expected: dim, got: row.len() });
            }
            index.ids.push(p.id.clone());
            index.scopes.push(p.scope);
            index.vectors.extend(row);
        }
        Ok(index)
    }

    /// Builds from explicit rows, mostly for tests and fixtures.
    pub fn from_rows(rows: Vec<(String, Scope, Vec<f64>)>, embedder_fingerprint: impl Into<String>) -> Result<Self, IndexError> {
        let dim = rows.first().map(|r| r.2.len()).ok_or(IndexError::Empty)?;
        let mut index = Self {
            dim,
            ids: Vec::new(),
            scopes: Vec::new(),
            vectors: Vec::new(),
            embedder_fingerprint: embedder_fingerprint.into(),
        };
        for (id, scope, row) in rows {
            if row.len() != dim {
                return Err(IndexError::DimensionMismatch { expected: dim, got: row.len() });
            }
            index.ids.push(id);
            index.scopes.push(scope);
            index.vectors.extend(row);
        }
        Ok(index)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn embedder_fingerprint(&self) -> &str {
        &self.embedder_fingerprint
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn check_dim(&self, query: &[f64]) -> Result<(), IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        Ok(())
    }

    /// Inner product with every row, in index order.
    pub fn scores(&self, query: &[f64]) -> Result<Vec<f64>, IndexError> {
        self.check_dim(query)?;
        Ok((0..self.len()).map(|i| dot(self.row(i), query)).collect())
    }

    /// Exact top-`k` by inner product; `k >= len` returns every row.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<ScoredHit>, IndexError> {
        let mut hits: Vec<ScoredHit> = self
            .scores(query)?
            .into_iter()
            .enumerate()
            .map(|(i, score)| ScoredHit {
                passage_id: self.ids[i].clone(),
                score,
                scope: self.scopes[i],
            })
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }
}

/// Max-shifted softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `P(d_i | q) = exp(s_i) / Σ_j exp(s_j)` over every passage, index order.
pub fn retrieval_probabilities(index: &DenseIndex, query: &[f64]) -> Result<Vec<f64>, IndexError> {
    Ok(softmax(&index.scores(query)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis() -> DenseIndex {
        DenseIndex::from_rows(
            vec![
                ("a".into(), Scope::Public, vec![1.0, 0.0, 0.0]),
                ("b".into(), Scope::Public, vec![0.0, 1.0, 0.0]),
                ("c".into(), Scope::Private, vec![0.0, 0.0, 1.0]),
            ],
            "test",
        )
        .unwrap()
    }

    #[test]
    fn basis_query_finds_matching_row() {
        let hits = basis().search(&[0.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].passage_id.as_str(), hits[0].score), ("b", 1.0));
    }

    #[test]
    fn zero_query_orders_by_id() {
        let hits = basis().search(&[0.0, 0.0, 0.0], 10).unwrap();
        let ids: Vec<_> = hits.iter().map(|h| h.passage_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(hits.iter().all(|h| h.score == 0.0));
        // -0.0 products must not reorder ties.
        let neg = basis().search(&[-0.0, -0.0, 0.0], 10).unwrap();
        assert_eq!(neg.iter().map(|h| h.passage_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(basis().search(&[1.0], 1), Err(IndexError::DimensionMismatch { expected: 3, got: 1 })));
        assert!(retrieval_probabilities(&basis(), &[1.0]).is_err());
    }

    #[test]
    fn probabilities_for_equal_scores_are_uniform() {
        let idx = DenseIndex::from_rows(
            vec![("a".into(), Scope::Public, vec![1.0]), ("b".into(), Scope::Public, vec![1.0])],
            "t",
        )
        .unwrap();
        assert_eq!(retrieval_probabilities(&idx, &[3.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn probabilities_worked_example() {
        let p = softmax(&[2.0, 1.0, 0.0]);
        let e = std::f64::consts::E;
        let z = e * e + e + 1.0;
        for (got, want) in p.iter().zip([e * e / z, e / z, 1.0 / z]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in p.iter().zip([0.6652, 0.2447, 0.0900]) {
            assert!((got - want).abs() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn search_matches_brute_force(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..12),
                                      q in prop::collection::vec(-1.0f64..1.0, 4)) {
            let idx = DenseIndex::from_rows(
                rows.iter().enumerate().map(|(i, r)| (format!("p{i:02}"), Scope::Public, r.clone())).collect(),
                "t",
            ).unwrap();
            let mut oracle: Vec<(String, f64)> = rows.iter().enumerate()
                .map(|(i, r)| (format!("p{i:02}"), r[0]*q[0] + r[1]*q[1] + r[2]*q[2] + r[3]*q[3]))
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let hits = idx.search(&q, rows.len()).unwrap();
            prop_assert_eq!(hits.iter().map(|h| h.passage_id.clone()).collect::<Vec<_>>(),
                            oracle.iter().map(|o| o.0.clone()).collect::<Vec<_>>());
            for k in 1..=rows.len() {
                let part = idx.search(&q, k).unwrap();
                prop_assert_eq!(&part[..], &hits[..k]);
            }
        }

        #[test]
        fn softmax_sums_to_one_and_preserves_rank(s in prop::collection::vec(-30.0f64..30.0, 1..20), shift in -50.0f64..50.0) {
            let p = softmax(&s);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..s.len() {
                for j in 0..s.len() {
                    prop_assert_eq!(s[i] > s[j], p[i] > p[j]);
                }
            }
            let shifted: Vec<f64> = s.iter().map(|x| x + shift).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
