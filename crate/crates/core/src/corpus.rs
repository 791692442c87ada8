//! Sentence ingestion, password derivation, vocabularies, splits and batches.
//!
//! A ground-truth pair is derived from a sentence by taking the first
//! character of every token, in order, keeping its original case. Targets are
//! the lowercased tokens; the password keeps its casing so generated output
//! can be re-capitalised later.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<UNK>";
pub const PAD: &str = "<pad>";

pub const BOS_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const PAD_ID: usize = 3;

/// Reserved word-vocabulary entries, in index order.
pub const RESERVED_WORDS: [&str; 4] = [BOS, EOS, UNK, PAD];

pub const DEFAULT_MIN_LEN: usize = 8;
pub const DEFAULT_MAX_LEN: usize = 16;

/// Characters split off the edges of a whitespace-delimited chunk.
pub const EDGE_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '*', '/', '-'];

pub fn is_reserved_word(token: &str) -> bool {
    RESERVED_WORDS.contains(&token)
}

pub fn fold_char(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// First character of a token compared against a password character:
/// case-insensitive for letters, exact otherwise.
pub fn first_char_matches(token: &str, password_char: char) -> bool {
    match token.chars().next() {
        Some(first) => fold_char(first) == fold_char(password_char),
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub tokens: Vec<String>,
}

impl TokenizedSentence {
    /// Whether token `i` starts with an uppercase character.
    pub fn is_capitalized(&self, i: usize) -> bool {
        self.tokens[i]
            .chars()
            .next()
            .map(char::is_uppercase)
            .unwrap_or(false)
    }
}

pub fn tokenize(raw_sentence: &str) -> Result<TokenizedSentence> {
    let mut tokens = Vec::new();
    for chunk in raw_sentence.split_whitespace() {
        split_chunk(chunk, &mut tokens);
    }
    if tokens.is_empty() {
        return Err(Error::Empty("sentence has no tokens"));
    }
    Ok(TokenizedSentence { tokens })
}

fn split_chunk(chunk: &str, tokens: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut start = 0;
    while start < chars.len() && EDGE_PUNCTUATION.contains(&chars[start]) {
        tokens.push(chars[start].to_string());
        start += 1;
    }
    let mut end = chars.len();
    let mut trailing = Vec::new();
    while end > start && EDGE_PUNCTUATION.contains(&chars[end - 1]) {
        trailing.push(chars[end - 1].to_string());
        end -= 1;
    }
    // Inner hyphens survive only between two letters.
    let mut piece = String::new();
    for i in start..end {
        let c = chars[i];
        let glued = c != '-'
            || (i > start
                && i + 1 < end
                && chars[i - 1].is_alphabetic()
                && chars[i + 1].is_alphabetic());
        if glued {
            piece.push(c);
        } else {
            if !piece.is_empty() {
                tokens.push(std::mem::take(&mut piece));
            }
            tokens.push("-".to_string());
        }
    }
    if !piece.is_empty() {
        tokens.push(piece);
    }
    tokens.extend(trailing.into_iter().rev());
}

/// Only the first-character rule is implemented; the enum keeps the call
/// sites honest about which rule produced a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivationRule {
    #[default]
    FirstCharacter,
}

pub fn derive_password(sentence: &TokenizedSentence) -> String {
    sentence
        .tokens
        .iter()
        .filter_map(|t| t.chars().next())
        .collect()
}

/// Lowercased tokens bracketed by the boundary symbols.
pub fn preprocess_target(sentence: &TokenizedSentence) -> Vec<String> {
    let mut out = Vec::with_capacity(sentence.tokens.len() + 2);
    out.push(BOS.to_string());
    out.extend(sentence.tokens.iter().map(|t| t.to_lowercase()));
    out.push(EOS.to_string());
    out
}

pub fn filter_pair(password: &str, min_len: usize, max_len: usize) -> Result<bool> {
    if min_len > max_len {
        return Err(Error::Config(format!(
            "min length {min_len} exceeds max length {max_len}"
        )));
    }
    let len = password.chars().count();
    Ok((min_len..=max_len).contains(&len))
}

/// A password with its (lowercased, unbracketed) mnemonic tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnemonicPair {
    pub password: String,
    pub tokens: Vec<String>,
}

impl MnemonicPair {
    pub fn from_sentence(sentence: &TokenizedSentence) -> Self {
        MnemonicPair {
            password: derive_password(sentence),
            tokens: sentence.tokens.iter().map(|t| t.to_lowercase()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub rule: DerivationRule,
    /// When set, sentences containing an alphabetic token outside the
    /// dictionary are dropped.
    pub dictionary: Option<HashSet<String>>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            rule: DerivationRule::FirstCharacter,
            dictionary: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IngestStats {
    pub lines: usize,
    pub empty: usize,
    pub dropped_dictionary: usize,
    pub dropped_length: usize,
    pub kept: usize,
}

pub fn ingest<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    config: &IngestConfig,
) -> Result<(Vec<MnemonicPair>, IngestStats)> {
    filter_pair("", config.min_len, config.max_len)?;
    let mut stats = IngestStats::default();
    let mut pairs = Vec::new();
    for line in lines {
        stats.lines += 1;
        let sentence = match tokenize(line) {
            Ok(s) => s,
            Err(_) => {
                stats.empty += 1;
                continue;
            }
        };
        if let Some(dict) = &config.dictionary {
            let foreign = sentence.tokens.iter().any(|t| {
                t.chars().any(char::is_alphabetic) && !dict.contains(&t.to_lowercase())
            });
            if foreign {
                stats.dropped_dictionary += 1;
                continue;
            }
        }
        let pair = MnemonicPair::from_sentence(&sentence);
        if !filter_pair(&pair.password, config.min_len, config.max_len)? {
            stats.dropped_length += 1;
            continue;
        }
        pairs.push(pair);
    }
    stats.kept = pairs.len();
    Ok((pairs, stats))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn new(chars: Vec<char>) -> Result<Self> {
        let index: HashMap<char, usize> = chars.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        if index.len() != chars.len() {
            return Err(Error::Config("duplicate character in vocabulary".into()));
        }
        Ok(CharVocab { chars, index })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn id(&self, c: char) -> Option<usize> {
        self.index.get(&fold_char(c)).copied()
    }

    pub fn char_at(&self, id: usize) -> Option<char> {
        self.chars.get(id).copied()
    }

    pub fn encode(&self, password: &str) -> Result<Vec<usize>> {
        password
            .chars()
            .map(|c| self.id(c).ok_or(Error::UnknownChar(c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    /// `words` must start with the reserved symbols in their fixed order.
    pub fn new(words: Vec<String>) -> Result<Self> {
        if words.len() < RESERVED_WORDS.len()
            || words.iter().zip(RESERVED_WORDS).any(|(w, r)| w != r)
        {
            return Err(Error::Config(format!(
                "word vocabulary must begin with {RESERVED_WORDS:?}"
            )));
        }
        let index: HashMap<String, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if index.len() != words.len() {
            return Err(Error::Config("duplicate word in vocabulary".into()));
        }
        Ok(WordVocab { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.words[i].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabPair {
    pub chars: CharVocab,
    pub words: WordVocab,
}

/// Password and bracketed target as vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairExample {
    pub password_chars: Vec<usize>,
    pub target_tokens: Vec<usize>,
    pub cased_password: String,
}

impl VocabPair {
    pub fn encode_pair(&self, pair: &MnemonicPair) -> Result<PairExample> {
        let password_chars = self.chars.encode(&pair.password)?;
        let mut target_tokens = Vec::with_capacity(pair.tokens.len() + 2);
        target_tokens.push(BOS_ID);
        target_tokens.extend(pair.tokens.iter().map(|t| self.words.id(t)));
        target_tokens.push(EOS_ID);
        Ok(PairExample {
            password_chars,
            target_tokens,
            cased_password: pair.password.clone(),
        })
    }

    /// Encodes every pair, returning the encodable ones and the count of
    /// pairs rejected for unknown password characters.
    pub fn encode_all(&self, pairs: &[MnemonicPair]) -> (Vec<PairExample>, usize) {
        let mut skipped = 0;
        let examples = pairs
            .iter()
            .filter_map(|p| match self.encode_pair(p) {
                Ok(e) => Some(e),
                Err(_) => {
                    skipped += 1;
                    None
                }
            })
            .collect();
        (examples, skipped)
    }
}

pub fn build_vocabularies(training: &[MnemonicPair]) -> Result<VocabPair> {
    if training.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let chars: BTreeSet<char> = training
        .iter()
        .flat_map(|p| p.password.chars().map(fold_char))
        .collect();
    let words: BTreeSet<&str> = training
        .iter()
        .flat_map(|p| p.tokens.iter().map(String::as_str))
        .filter(|t| !is_reserved_word(t))
        .collect();
    let mut word_list: Vec<String> = RESERVED_WORDS.iter().map(|s| s.to_string()).collect();
    word_list.extend(words.into_iter().map(str::to_string));
    Ok(VocabPair {
        chars: CharVocab::new(chars.into_iter().collect())?,
        words: WordVocab::new(word_list)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit<T = MnemonicPair> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

fn floor_fraction(count: usize, fraction: f64) -> usize {
    ((count as f64) * fraction + 1e-9).floor() as usize
}

/// Shuffles with `seed`, keeps `floor(N * train_fraction)` for training and
/// the rest for test, then moves the part of training beyond
/// `floor(train * (1 - validation_fraction))` into validation.
pub fn make_split<T>(
    mut items: Vec<T>,
    seed: u64,
    train_fraction: f64,
    validation_fraction: f64,
) -> Result<DatasetSplit<T>> {
    for (name, f) in [("train", train_fraction), ("validation", validation_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "{name} fraction must lie in (0, 1), got {f}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let n_train_val = floor_fraction(items.len(), train_fraction);
    let test = items.split_off(n_train_val);
    let n_train = floor_fraction(n_train_val, 1.0 - validation_fraction);
    let validation = items.split_off(n_train);
    Ok(DatasetSplit {
        train: items,
        validation,
        test,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PadPolicy {
    pub char_pad: usize,
    pub word_pad: usize,
}

impl Default for PadPolicy {
    fn default() -> Self {
        PadPolicy {
            char_pad: 0,
            word_pad: PAD_ID,
        }
    }
}

/// Padded batch. Masks are 1 on real positions and 0 on padding; real
/// positions always form a prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub chars: Vec<Vec<usize>>,
    pub char_mask: Vec<Vec<u8>>,
    pub targets: Vec<Vec<usize>>,
    pub target_mask: Vec<Vec<u8>>,
}

impl Batch {
    pub fn from_examples(examples: &[&PairExample], pad: PadPolicy) -> Self {
        let max_chars = examples.iter().map(|e| e.password_chars.len()).max().unwrap_or(0);
        let max_targets = examples.iter().map(|e| e.target_tokens.len()).max().unwrap_or(0);
        let mut batch = Batch {
            chars: Vec::with_capacity(examples.len()),
            char_mask: Vec::with_capacity(examples.len()),
            targets: Vec::with_capacity(examples.len()),
            target_mask: Vec::with_capacity(examples.len()),
        };
        for e in examples {
            let (row, mask) = pad_row(&e.password_chars, max_chars, pad.char_pad);
            batch.chars.push(row);
            batch.char_mask.push(mask);
            let (row, mask) = pad_row(&e.target_tokens, max_targets, pad.word_pad);
            batch.targets.push(row);
            batch.target_mask.push(mask);
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Unpadded password and target of example `i`.
    pub fn example(&self, i: usize) -> Result<(&[usize], &[usize])> {
        let chars = masked_prefix(&self.chars[i], &self.char_mask[i])?;
        let targets = masked_prefix(&self.targets[i], &self.target_mask[i])?;
        Ok((chars, targets))
    }
}

fn pad_row(values: &[usize], width: usize, pad: usize) -> (Vec<usize>, Vec<u8>) {
    let mut row = values.to_vec();
    row.resize(width, pad);
    let mut mask = vec![1u8; values.len()];
    mask.resize(width, 0);
    (row, mask)
}

fn masked_prefix<'a>(row: &'a [usize], mask: &[u8]) -> Result<&'a [usize]> {
    if row.len() != mask.len() {
        return Err(Error::shape("batch mask", row.len(), mask.len()));
    }
    let len = mask.iter().take_while(|&&m| m == 1).count();
    if mask[len..].iter().any(|&m| m != 0) {
        return Err(Error::Config("batch mask is not a contiguous prefix".into()));
    }
    Ok(&row[..len])
}

/// Consecutive padded batches over `examples`, in order.
pub fn batch_iterator<'a>(
    examples: &'a [PairExample],
    batch_size: usize,
    pad: PadPolicy,
) -> impl Iterator<Item = Batch> + 'a {
    assert!(batch_size >= 1, "batch size must be at least 1");
    examples.chunks(batch_size).map(move |chunk| {
        let refs: Vec<&PairExample> = chunk.iter().collect();
        Batch::from_examples(&refs, pad)
    })
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn format_pairs(pairs: &[MnemonicPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.password);
        out.push('\t');
        out.push_str(&p.tokens.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_pairs(text: &str) -> Result<Vec<MnemonicPair>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let (password, tokens) = line.split_once('\t').ok_or_else(|| Error::Parse {
                what: "pairs file",
                line: i + 1,
                detail: "missing TAB separator".into(),
            })?;
            Ok(MnemonicPair {
                password: password.to_string(),
                tokens: tokens.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect(),
            })
        })
        .collect()
}

pub fn write_pairs(path: &Path, pairs: &[MnemonicPair]) -> Result<()> {
    write_text(path, &format_pairs(pairs))
}

pub fn read_pairs(path: &Path) -> Result<Vec<MnemonicPair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text)
}

pub fn write_vocabularies(dir: &Path, vocab: &VocabPair) -> Result<()> {
    let chars: String = vocab.chars.chars().iter().map(|c| format!("{c}\n")).collect();
    write_text(&dir.join(CHAR_VOCAB_FILE), &chars)?;
    let words: String = vocab.words.words().iter().map(|w| format!("{w}\n")).collect();
    write_text(&dir.join(WORD_VOCAB_FILE), &words)
}

pub fn read_vocabularies(dir: &Path) -> Result<VocabPair> {
    let char_path = dir.join(CHAR_VOCAB_FILE);
    let mut chars = Vec::new();
    for (i, line) in read_lines(&char_path)?.iter().enumerate() {
        let mut it = line.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => chars.push(c),
            _ => {
                return Err(Error::Parse {
                    what: "character vocabulary",
                    line: i + 1,
                    detail: format!("expected one character, got {line:?}"),
                })
            }
        }
    }
    let words = read_lines(&dir.join(WORD_VOCAB_FILE))?;
    Ok(VocabPair {
        chars: CharVocab::new(chars)?,
        words: WordVocab::new(words)?,
    })
}

pub const CHAR_VOCAB_FILE: &str = "vocab.chars";
pub const WORD_VOCAB_FILE: &str = "vocab.words";

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &TokenizedSentence) -> Vec<&str> {
        s.tokens.iter().map(String::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        let s = tokenize("Oh, yes, something like that.").unwrap();
        assert_eq!(toks(&s), ["Oh", ",", "yes", ",", "something", "like", "that", "."]);
        assert_eq!(toks(&tokenize("hello").unwrap()), ["hello"]);
        assert_eq!(toks(&tokenize("* giddy *").unwrap()), ["*", "giddy", "*"]);
        assert!(tokenize("   ").is_err());
    }

    #[test]
    fn tokenize_keeps_inner_apostrophes_and_letter_hyphens() {
        let s = tokenize("I can't visit new-delhi (again) 1-2...").unwrap();
        assert_eq!(
            toks(&s),
            ["I", "can't", "visit", "new-delhi", "(", "again", ")", "1", "-", "2", ".", ".", "."]
        );
        assert!(!s.is_capitalized(1));
        assert!(s.is_capitalized(0));
    }

    #[test]
    fn derive_password_examples() {
        let s = tokenize("Oh, yes, something like that.").unwrap();
        assert_eq!(derive_password(&s), "O,y,slt.");
        let s = tokenize("Does this mean the book has sold 7 copies in 24 hours?").unwrap();
        assert_eq!(derive_password(&s), "Dtmtbhs7ci2h?");
        assert_eq!(derive_password(&tokenize("hello.").unwrap()), "h.");
    }

    #[test]
    fn preprocess_target_examples() {
        let s = TokenizedSentence {
            tokens: vec!["Oh".into(), ",".into(), "yes".into()],
        };
        assert_eq!(preprocess_target(&s), ["<s>", "oh", ",", "yes", "</s>"]);
        let s = TokenizedSentence {
            tokens: vec!["THE".into()],
        };
        assert_eq!(preprocess_target(&s), ["<s>", "the", "</s>"]);
    }

    #[test]
    fn filter_pair_bounds() {
        assert!(filter_pair("O,y,slt.", 8, 16).unwrap());
        assert!(!filter_pair("h.", 8, 16).unwrap());
        assert!(filter_pair(&"a".repeat(16), 8, 16).unwrap());
        assert!(!filter_pair(&"a".repeat(17), 8, 16).unwrap());
        assert!(matches!(filter_pair("abc", 9, 8), Err(Error::Config(_))));
    }

    fn pair(line: &str) -> MnemonicPair {
        MnemonicPair::from_sentence(&tokenize(line).unwrap())
    }

    #[test]
    fn vocabulary_enumeration() {
        let v = build_vocabularies(&[pair("a b ."), pair("a c .")]).unwrap();
        assert_eq!(v.words.words(), ["<s>", "</s>", "<UNK>", "<pad>", ".", "a", "b", "c"]);
        let v = build_vocabularies(&[
            MnemonicPair { password: "ab.".into(), tokens: vec![] },
            MnemonicPair { password: "BA.".into(), tokens: vec![] },
        ])
        .unwrap();
        assert_eq!(v.chars.chars(), ['.', 'a', 'b']);
        assert!(matches!(build_vocabularies(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn encode_maps_oov_to_unk_and_rejects_unknown_chars() {
        let v = build_vocabularies(&[pair("a b .")]).unwrap();
        let e = v
            .encode_pair(&MnemonicPair { password: "A.".into(), tokens: vec!["a".into(), "zz".into()] })
            .unwrap();
        assert_eq!(e.target_tokens, vec![BOS_ID, v.words.id("a"), UNK_ID, EOS_ID]);
        assert_eq!(e.password_chars, vec![v.chars.id('a').unwrap(), v.chars.id('.').unwrap()]);
        let err = v.chars.encode("a?").unwrap_err();
        assert!(matches!(err, Error::UnknownChar('?')));
    }

    #[test]
    fn split_arithmetic_and_determinism() {
        let items: Vec<u32> = (0..10).collect();
        let s = make_split(items.clone(), 9, 0.8, 0.2).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
        assert_eq!(s, make_split(items.clone(), 9, 0.8, 0.2).unwrap());
        let mut all: Vec<u32> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, items);
        assert!(make_split(items.clone(), 9, 1.0, 0.2).is_err());
        assert!(make_split(items, 9, 0.8, 0.0).is_err());
    }

    #[test]
    fn half_million_split_sizes() {
        let s = make_split(vec![(); 500_000], 1, 0.9, 0.2).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (360_000, 90_000, 50_000));
    }

    fn example(len: usize) -> PairExample {
        PairExample {
            password_chars: vec![1; len],
            target_tokens: vec![5; len + 2],
            cased_password: "x".repeat(len),
        }
    }

    #[test]
    fn batches_cover_examples_once_with_padding() {
        let ex: Vec<PairExample> = (0..5).map(|i| example(8 + i)).collect();
        let sizes: Vec<usize> = batch_iterator(&ex, 2, PadPolicy::default()).map(|b| b.len()).collect();
        assert_eq!(sizes, [2, 2, 1]);

        let ex = vec![example(8), example(16)];
        let b = batch_iterator(&ex, 2, PadPolicy::default()).next().unwrap();
        assert!(b.chars.iter().all(|r| r.len() == 16));
        assert_eq!(b.char_mask[0].iter().filter(|&&m| m == 1).count(), 8);
        assert_eq!(b.targets[0][10..], [PAD_ID; 8]);
        let (c, t) = b.example(0).unwrap();
        assert_eq!((c.len(), t.len()), (8, 10));
    }

    #[test]
    fn pairs_file_round_trip() {
        let pairs = vec![pair("Oh, yes, something like that."), pair("Is it ok?")];
        assert_eq!(parse_pairs(&format_pairs(&pairs)).unwrap(), pairs);
        assert!(parse_pairs("no tab here").is_err());
    }

    #[test]
    fn ingest_counts_drops() {
        let lines = ["Oh, yes, something like that.", "hi.", "", "Zorblax is here today , my dear old friend ."];
        let (pairs, stats) = ingest(lines, &IngestConfig::default()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!((stats.empty, stats.dropped_length, stats.kept), (1, 1, 2));

        let dict: HashSet<String> = ["oh", "yes", "something", "like", "that"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cfg = IngestConfig { dictionary: Some(dict), ..IngestConfig::default() };
        let (pairs, stats) = ingest(lines, &cfg).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(stats.dropped_dictionary, 2);
    }

    fn sentence_strategy() -> impl Strategy<Value = String> {
        let word = "[A-Za-z]{1,7}|[0-9]{1,4}|[.,!?;:*/]|[a-z]+'[a-z]+";
        prop::collection::vec(word.prop_map(|s| s), 1..20).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn derived_pairs_align(line in sentence_strategy()) {
            let sentence = tokenize(&line).unwrap();
            let p = MnemonicPair::from_sentence(&sentence);
            // retokenising the sentence gives back the same password
            prop_assert_eq!(derive_password(&tokenize(&line).unwrap()), p.password.clone());
            prop_assert_eq!(p.password.chars().count(), p.tokens.len());
            for (c, t) in p.password.chars().zip(&p.tokens) {
                prop_assert!(first_char_matches(t, c));
            }
            let vocab = build_vocabularies(std::slice::from_ref(&p)).unwrap();
            let e = vocab.encode_pair(&p).unwrap();
            let decoded = vocab.words.decode(&e.target_tokens[1..e.target_tokens.len() - 1]);
            prop_assert_eq!(decoded, p.tokens);
        }
    }
}
