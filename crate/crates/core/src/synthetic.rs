//! Deterministic synthetic data: a two-hop benchmark with controlled hop
//! paths, and random split corpora for property tests.
//!
//! Every benchmark example is a bridge question. The question names two
//! entity tokens `a1 a2`; the first gold passage contains `a1 a2` and two
//! bridge tokens `b1 b2`; the second gold passage repeats the bridge tokens
//! and holds the answer but shares no token with the question, so it is
//! reachable only through the first passage. Distractors sharing `a1` compete
//! at hop 1, and every fourth example gets a decoy that beats the first gold
//! passage at hop 1, so a beam of width 1 misses it.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{BenchmarkExample, Corpus, Passage, PathLabel, QuestionType, Scope};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub per_path: usize,
    /// `a1`-sharing distractors per example in each scope.
    pub distractors_per_scope: usize,
    pub filler_pool: usize,
    pub filler_per_passage: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            per_path: 50,
            distractors_per_scope: 2,
            filler_pool: 400,
            filler_per_passage: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub public: Corpus,
    pub private: Corpus,
    pub examples: Vec<BenchmarkExample>,
}

/// Unique pseudo-words of three consonant-vowel syllables.
struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn next(&mut self) -> String {
        loop {
            let mut w = String::with_capacity(6);
            for _ in 0..3 {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap() as char);
                w.push(*VOWELS.choose(&mut self.rng).unwrap() as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn filler(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect()
}

pub fn generate(config: &SyntheticConfig) -> SyntheticBenchmark {
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        used: HashSet::new(),
    };
    let pool: Vec<String> = (0..config.filler_pool).map(|_| words.next()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut public = Vec::new();
    let mut private = Vec::new();
    let mut examples = Vec::new();

    let paths = [
        (Scope::Private, Scope::Private),
        (Scope::Private, Scope::Public),
        (Scope::Public, Scope::Private),
        (Scope::Public, Scope::Public),
    ];
    let mut i = 0;
    for (s1, s2) in paths {
        for _ in 0..config.per_path {
            let [a1, a2, b1, b2, ans] = std::array::from_fn(|_| words.next());
            let id = format!("syn{i:04}");
            let mut push = |scope: Scope, p: Passage| match scope {
                Scope::Public => public.push(p),
                Scope::Private => private.push(p),
            };
            let text = |head: &[&str], mid: &[&str], tail: &[&str], rng: &mut ChaCha8Rng| {
                let f = filler(rng, &pool, config.filler_per_passage);
                let half = f.len() / 2;
                let mut t: Vec<&str> = head.to_vec();
                t.extend(f[..half].iter().map(String::as_str));
                t.extend_from_slice(mid);
                t.extend(f[half..].iter().map(String::as_str));
                t.extend_from_slice(tail);
                t.join(" ")
            };

            let p1 = format!("{id}-1");
            let p2 = format!("{id}-2");
            push(s1, Passage::new(&p1, words.next(), text(&[&a1, &a2], &[&b1, &b2], &[], &mut rng), s1));
            push(s2, Passage::new(&p2, words.next(), text(&[&b1, &b2], &[&ans], &[&b1, &b2], &mut rng), s2));
            for scope in Scope::ALL {
                for j in 0..config.distractors_per_scope {
                    let did = format!("{id}-d{}{j}", scope.as_str().chars().next().unwrap());
                    push(scope, Passage::new(did, words.next(), text(&[&a1], &[], &[], &mut rng), scope));
                }
            }
            if i % 4 == 3 {
                // Short and dense in the question's entities: wins hop 1.
                let decoy = format!("{a1} {a2} {a1} {a2}");
                push(s1, Passage::new(format!("{id}-x"), words.next(), decoy, s1));
            }

            examples.push(BenchmarkExample {
                id: id.clone(),
                question: format!("what connects {a1} and {a2}?"),
                answer: ans,
                qtype: QuestionType::Bridge,
                supporting_facts: vec![(p1, 0), (p2, 0)],
                hop_path: vec![s1, s2],
            });
            i += 1;
        }
    }
    debug_assert!(examples.iter().all(|e| e.path_label() != PathLabel::Unlabeled));
    SyntheticBenchmark {
        public: Corpus::new(Scope::Public, public).expect("generated ids are unique"),
        private: Corpus::new(Scope::Private, private).expect("generated ids are unique"),
        examples,
    }
}

/// A random passage collection split between the two scopes. Words come
/// from a vocabulary of `vocab` tokens, so small vocabularies give heavy
/// term overlap and many score ties.
pub fn random_split(seed: u64, n_passages: usize, vocab: usize) -> (Corpus, Corpus) {
    assert!(n_passages >= 2 && vocab >= 1);
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(seed),
        used: HashSet::new(),
    };
    let vocab: Vec<String> = (0..vocab).map(|_| words.next()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut public = Vec::new();
    let mut private = Vec::new();
    for i in 0..n_passages {
        // Both scopes are always non-empty.
        let scope = match i {
            0 => Scope::Public,
            1 => Scope::Private,
            _ if rng.random_bool(0.5) => Scope::Public,
            _ => Scope::Private,
        };
        let len = rng.random_range(3..=12);
        let text = filler(&mut rng, &vocab, len).join(" ");
        let title = if rng.random_bool(0.3) { String::new() } else { vocab.choose(&mut rng).unwrap().clone() };
        let id = format!("{}{i:03}", &scope.as_str()[..3]);
        let p = Passage::new(id, title, text, scope);
        match scope {
            Scope::Public => public.push(p),
            Scope::Private => private.push(p),
        }
    }
    (
        Corpus::new(Scope::Public, public).expect("unique ids"),
        Corpus::new(Scope::Private, private).expect("unique ids"),
    )
}

/// A random question over the same vocabulary as [`random_split`].
pub fn random_question(seed: u64, vocab: usize, len: usize) -> String {
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(seed),
        used: HashSet::new(),
    };
    let vocab: Vec<String> = (0..vocab).map(|_| words.next()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    filler(&mut rng, &vocab, len.max(1)).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::lexical_tokens;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SyntheticConfig::default());
        let b = generate(&SyntheticConfig::default());
        assert_eq!(a.examples, b.examples);
        assert_eq!(a.public.passages().collect::<Vec<_>>(), b.public.passages().collect::<Vec<_>>());
    }

    #[test]
    fn every_path_is_equally_represented() {
        let s = generate(&SyntheticConfig::default());
        assert_eq!(s.examples.len(), 200);
        for label in PathLabel::LABELED {
            assert_eq!(s.examples.iter().filter(|e| e.path_label() == label).count(), 50);
        }
    }

    #[test]
    fn gold_passages_live_in_their_labelled_scope() {
        let s = generate(&SyntheticConfig::default());
        for e in &s.examples {
            for (id, scope) in e.supporting_passages().into_iter().zip(&e.hop_path) {
                let corpus = if *scope == Scope::Public { &s.public } else { &s.private };
                assert!(corpus.contains(id), "{id}");
            }
        }
    }

    #[test]
    fn second_hop_shares_nothing_with_the_question() {
        let s = generate(&SyntheticConfig::default());
        for e in &s.examples {
            let q: HashSet<String> = lexical_tokens(&e.question).into_iter().collect();
            let id = e.supporting_passages()[1];
            let p = s.public.get(id).or_else(|| s.private.get(id)).unwrap();
            let toks = lexical_tokens(&format!("{} {}", p.title, p.text));
            assert!(toks.iter().all(|t| !q.contains(t)), "{}", e.id);
            assert!(toks.contains(&e.answer));
        }
    }

    #[test]
    fn random_split_has_both_scopes() {
        for seed in 0..20 {
            let (p, q) = random_split(seed, 10, 6);
            assert!(!p.is_empty() && !q.is_empty());
            assert_eq!(p.len() + q.len(), 10);
        }
    }
}
