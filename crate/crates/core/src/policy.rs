//! Information-flow rules for hop queries.
//!
//! A query's taint is the highest scope of any content composed into it. The
//! user's question counts as public-origin text. Depending on the privacy
//! mode, a tainted query may only be sent to indices of equal or higher scope.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    /// One index over both corpora; no restrictions.
    NoPrivacySingleIndex,
    /// Separate indices, per-index top-k merged globally; no restrictions.
    NoPrivacyMultiIndex,
    /// Private passages never feed a public retrieval.
    DocumentPrivacy,
    /// Nothing, not even the question, is sent to the public side.
    QueryPrivacy,
}

impl PrivacyMode {
    pub const ALL: [PrivacyMode; 4] = [
        PrivacyMode::NoPrivacySingleIndex,
        PrivacyMode::NoPrivacyMultiIndex,
        PrivacyMode::DocumentPrivacy,
        PrivacyMode::QueryPrivacy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyMode::NoPrivacySingleIndex => "no_privacy_single_index",
            PrivacyMode::NoPrivacyMultiIndex => "no_privacy_multi_index",
            PrivacyMode::DocumentPrivacy => "document_privacy",
            PrivacyMode::QueryPrivacy => "query_privacy",
        }
    }

    /// Whether any retrieval in this mode may reach the public side.
    pub fn uses_public(self) -> bool {
        self != PrivacyMode::QueryPrivacy
    }
}

impl fmt::Display for PrivacyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrivacyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        match norm.as_str() {
            "no_privacy_single_index" | "single" | "no_privacy" => Ok(PrivacyMode::NoPrivacySingleIndex),
            "no_privacy_multi_index" | "multi" => Ok(PrivacyMode::NoPrivacyMultiIndex),
            "document_privacy" | "document" => Ok(PrivacyMode::DocumentPrivacy),
            "query_privacy" | "query" => Ok(PrivacyMode::QueryPrivacy),
            _ => Err(format!("unknown privacy mode {s:?}")),
        }
    }
}

/// Maximum scope over the hop passages; the empty chain is public.
pub fn chain_taint(hop_scopes: impl IntoIterator<Item = Scope>) -> Scope {
    hop_scopes.into_iter().max().unwrap_or(Scope::Public)
}

pub fn allowed_targets(mode: PrivacyMode, taint: Scope) -> BTreeSet<Scope> {
    match (mode, taint) {
        (PrivacyMode::NoPrivacySingleIndex | PrivacyMode::NoPrivacyMultiIndex, _) => {
            BTreeSet::from([Scope::Public, Scope::Private])
        }
        (PrivacyMode::DocumentPrivacy, Scope::Public) => BTreeSet::from([Scope::Public, Scope::Private]),
        (PrivacyMode::DocumentPrivacy, Scope::Private) => BTreeSet::from([Scope::Private]),
        (PrivacyMode::QueryPrivacy, _) => BTreeSet::from([Scope::Private]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{mode} forbids sending {taint}-tainted content to the {destination} side")]
pub struct Violation {
    pub mode: PrivacyMode,
    pub taint: Scope,
    pub destination: Scope,
}

/// Gate for every cross-enclave send.
pub fn check_outbound(mode: PrivacyMode, taint: Scope, destination: Scope) -> Result<(), Violation> {
    if allowed_targets(mode, taint).contains(&destination) {
        Ok(())
    } else {
        Err(Violation {
            mode,
            taint,
            destination,
        })
    }
}

/// A payload that repeats a run of private text verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeakageViolation {
    pub payload_index: usize,
    pub passage_id: String,
    /// The first shared n-gram found, space-joined.
    pub shared: String,
}

fn ngram_tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Reports each (payload, private passage) pair sharing any contiguous run
/// of `n` lowercase whitespace tokens.
pub fn leakage_scan(payloads: &[String], private: &Corpus, n: usize) -> Vec<LeakageViolation> {
    assert!(n >= 3, "leakage n-gram length must be at least 3");
    let payload_grams: Vec<std::collections::HashSet<Vec<String>>> = payloads
        .iter()
        .map(|p| ngram_tokens(p).windows(n).map(<[String]>::to_vec).collect())
        .collect();
    let mut out = Vec::new();
    for (pi, grams) in payload_grams.iter().enumerate() {
        if grams.is_empty() {
            continue;
        }
        for passage in private.passages() {
            let toks = ngram_tokens(&passage.text);
            if let Some(w) = toks.windows(n).find(|w| grams.contains(*w)) {
                out.push(LeakageViolation {
                    payload_index: pi,
                    passage_id: passage.id.clone(),
                    shared: w.join(" "),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;
    use proptest::prelude::*;

    use PrivacyMode::*;
    use Scope::*;

    #[test]
    fn taint_is_max_scope() {
        assert_eq!(chain_taint([]), Public);
        assert_eq!(chain_taint([Public, Public]), Public);
        assert_eq!(chain_taint([Public, Private]), Private);
        assert_eq!(chain_taint([Private, Public]), Private);
    }

    #[test]
    fn truth_table() {
        let both = BTreeSet::from([Public, Private]);
        let private = BTreeSet::from([Private]);
        for taint in Scope::ALL {
            assert_eq!(allowed_targets(NoPrivacySingleIndex, taint), both);
            assert_eq!(allowed_targets(NoPrivacyMultiIndex, taint), both);
            assert_eq!(allowed_targets(QueryPrivacy, taint), private);
        }
        assert_eq!(allowed_targets(DocumentPrivacy, Public), both);
        assert_eq!(allowed_targets(DocumentPrivacy, Private), private);
    }

    #[test]
    fn outbound_checks() {
        let v = check_outbound(DocumentPrivacy, Private, Public).unwrap_err();
        assert_eq!((v.mode, v.taint, v.destination), (DocumentPrivacy, Private, Public));
        assert!(check_outbound(DocumentPrivacy, Public, Public).is_ok());
        assert!(check_outbound(QueryPrivacy, Public, Public).is_err());
        assert!(check_outbound(QueryPrivacy, Public, Private).is_ok());
    }

    #[test]
    fn rejection_is_monotone_in_taint() {
        for mode in PrivacyMode::ALL {
            for dest in Scope::ALL {
                for t in Scope::ALL {
                    for t2 in Scope::ALL.into_iter().filter(|t2| *t2 >= t) {
                        if check_outbound(mode, t, dest).is_err() {
                            assert!(check_outbound(mode, t2, dest).is_err());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn modes_parse_from_short_and_long_names() {
        for m in PrivacyMode::ALL {
            assert_eq!(m.as_str().parse::<PrivacyMode>().unwrap(), m);
        }
        assert_eq!("document".parse::<PrivacyMode>().unwrap(), DocumentPrivacy);
        assert!("nope".parse::<PrivacyMode>().is_err());
    }

    fn private_corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            Private,
            texts.iter().enumerate().map(|(i, t)| Passage::new(format!("p{i}"), "", *t, Private)),
        )
        .unwrap()
    }

    #[test]
    fn empty_payloads_have_no_leaks() {
        assert!(leakage_scan(&[], &private_corpus(&["a b c d e f g h i"]), 8).is_empty());
    }

    #[test]
    fn verbatim_private_text_is_flagged() {
        let secret = "the merger closes on friday pending board approval of terms";
        let c = private_corpus(&[secret, "unrelated words only here"]);
        let v = leakage_scan(&[format!("who? [SEP] {}", secret.to_uppercase())], &c, 8);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].passage_id, "p0");
    }

    /// Sliding-window oracle: longest common run of tokens.
    fn longest_shared_run(a: &str, b: &str) -> usize {
        let a = ngram_tokens(a);
        let b = ngram_tokens(b);
        let mut best = 0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                let mut l = 0;
                while i + l < a.len() && j + l < b.len() && a[i + l] == b[j + l] {
                    l += 1;
                }
                best = best.max(l);
            }
        }
        best
    }

    #[test]
    fn seven_shared_tokens_are_not_a_leak() {
        let passage = "x1 x2 alpha beta gamma delta epsilon zeta eta x3 x4";
        let payload = "q1 alpha beta gamma delta epsilon zeta eta q2 q3";
        assert_eq!(longest_shared_run(passage, payload), 7);
        assert!(leakage_scan(&[payload.to_string()], &private_corpus(&[passage]), 8).is_empty());
        assert_eq!(leakage_scan(&[payload.to_string()], &private_corpus(&[passage]), 7).len(), 1);
    }

    proptest! {
        #[test]
        fn scan_agrees_with_sliding_window_oracle(
            a in prop::collection::vec(0u8..4, 0..20),
            b in prop::collection::vec(0u8..4, 1..20),
            n in 3usize..6,
        ) {
            let w = |v: &[u8]| v.iter().map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
            let (payload, passage) = (w(&a), w(&b));
            let flagged = !leakage_scan(std::slice::from_ref(&payload), &private_corpus(&[&passage]), n).is_empty();
            prop_assert_eq!(flagged, longest_shared_run(&payload, &passage) >= n);
        }
    }
}
