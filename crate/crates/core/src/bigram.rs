//! Unsmoothed bigram language model that generates under the first-letter
//! constraint. Dead ends emit `<UNK>`, which then becomes the predecessor.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{first_char_matches, fold_char, is_reserved_word, write_text, MnemonicPair, BOS, EOS, UNK};
use crate::error::{Error, Result};

/// Score added for each `<UNK>` emission.
pub const UNK_PENALTY: f64 = -20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BigramModel {
    bigrams: BTreeMap<String, BTreeMap<String, u64>>,
    /// Times each word occurs as a predecessor.
    unigrams: BTreeMap<String, u64>,
    /// predecessor → folded first character → (successor, ln P) by
    /// descending probability, then token.
    index: HashMap<String, HashMap<char, Vec<(String, f64)>>>,
}

impl BigramModel {
    fn from_counts(bigrams: BTreeMap<String, BTreeMap<String, u64>>) -> Self {
        let unigrams = bigrams.iter().map(|(p, s)| (p.clone(), s.values().sum())).collect::<BTreeMap<_, _>>();
        let mut index: HashMap<String, HashMap<char, Vec<(String, f64)>>> = HashMap::new();
        for (pred, succs) in &bigrams {
            let total = unigrams[pred] as f64;
            let by_char = index.entry(pred.clone()).or_default();
            for (succ, &count) in succs {
                if is_reserved_word(succ) {
                    continue;
                }
                if let Some(c) = succ.chars().next() {
                    by_char
                        .entry(fold_char(c))
                        .or_default()
                        .push((succ.clone(), (count as f64 / total).ln()));
                }
            }
            for list in by_char.values_mut() {
                list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            }
        }
        BigramModel { bigrams, unigrams, index }
    }

    pub fn count(&self, pred: &str, succ: &str) -> u64 {
        self.bigrams.get(pred).and_then(|s| s.get(succ)).copied().unwrap_or(0)
    }

    pub fn predecessor_count(&self, pred: &str) -> u64 {
        self.unigrams.get(pred).copied().unwrap_or(0)
    }

    /// Maximum-likelihood `P(succ | pred)`; zero for unseen pairs.
    pub fn probability(&self, pred: &str, succ: &str) -> f64 {
        match self.predecessor_count(pred) {
            0 => 0.0,
            total => self.count(pred, succ) as f64 / total as f64,
        }
    }

    pub fn predecessors(&self) -> impl Iterator<Item = &str> {
        self.bigrams.keys().map(String::as_str)
    }

    pub fn successors(&self, pred: &str) -> impl Iterator<Item = (&str, u64)> {
        self.bigrams.get(pred).into_iter().flatten().map(|(s, &c)| (s.as_str(), c))
    }

    /// Successors of `pred` starting with `c`, most probable first.
    pub fn candidates(&self, pred: &str, c: char) -> &[(String, f64)] {
        self.index
            .get(pred)
            .and_then(|m| m.get(&fold_char(c)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        for (pred, succs) in &self.bigrams {
            for (succ, count) in succs {
                out.push_str(&format!("{pred}\t{succ}\t{count}\n"));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut bigrams: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |detail: String| Error::Parse {
                what: "bigram model",
                line: i + 1,
                detail,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [pred, succ, count] = fields[..] else {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            };
            let count: u64 = count.parse().map_err(|e| bad(format!("{e}")))?;
            *bigrams.entry(pred.to_string()).or_default().entry(succ.to_string()).or_default() += count;
        }
        if bigrams.is_empty() {
            return Err(Error::Empty("bigram model"));
        }
        Ok(Self::from_counts(bigrams))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.format())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Counts adjacent token pairs in bracketed training sentences.
pub fn fit_bigram<S: AsRef<str>>(sentences: &[Vec<S>]) -> Result<BigramModel> {
    let mut bigrams: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for s in sentences {
        for w in s.windows(2) {
            *bigrams
                .entry(w[0].as_ref().to_string())
                .or_default()
                .entry(w[1].as_ref().to_string())
                .or_default() += 1;
        }
    }
    if bigrams.is_empty() {
        return Err(Error::Empty("bigram training corpus"));
    }
    Ok(BigramModel::from_counts(bigrams))
}

/// Fits on mnemonic pairs, adding the boundary symbols.
pub fn fit_bigram_pairs(pairs: &[MnemonicPair]) -> Result<BigramModel> {
    let sentences: Vec<Vec<&str>> = pairs
        .iter()
        .map(|p| {
            let mut s = vec![BOS];
            s.extend(p.tokens.iter().map(String::as_str));
            s.push(EOS);
            s
        })
        .collect();
    fit_bigram(&sentences)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigramHypothesis {
    pub tokens: Vec<String>,
    pub score: f64,
}

fn rank(a: &BigramHypothesis, b: &BigramHypothesis) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Ranked beam of constrained generations, each exactly one token per
/// password character.
pub fn generate_constrained_ranked(password: &str, model: &BigramModel, width: usize) -> Vec<BigramHypothesis> {
    let width = width.max(1);
    let mut beam = vec![BigramHypothesis {
        tokens: Vec::new(),
        score: 0.0,
    }];
    for c in password.chars() {
        let mut next = Vec::new();
        for hyp in &beam {
            let pred = hyp.tokens.last().map(String::as_str).unwrap_or(BOS);
            let cands = model.candidates(pred, c);
            debug_assert!(cands.iter().all(|(w, _)| first_char_matches(w, c)));
            if cands.is_empty() {
                let mut tokens = hyp.tokens.clone();
                tokens.push(UNK.to_string());
                next.push(BigramHypothesis {
                    tokens,
                    score: hyp.score + UNK_PENALTY,
                });
            }
            // candidates are sorted, so only the first `width` can survive
            for (w, lp) in cands.iter().take(width) {
                let mut tokens = hyp.tokens.clone();
                tokens.push(w.clone());
                next.push(BigramHypothesis {
                    tokens,
                    score: hyp.score + lp,
                });
            }
        }
        next.sort_by(rank);
        next.truncate(width);
        beam = next;
    }
    beam
}

pub fn generate_constrained(password: &str, model: &BigramModel, width: usize) -> Vec<String> {
    generate_constrained_ranked(password, model, width)
        .into_iter()
        .next()
        .map(|h| h.tokens)
        .unwrap_or_default()
}
