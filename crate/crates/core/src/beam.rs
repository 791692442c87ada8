//! Beam-search generation, case restoration and attention export.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::corpus::{fold_char, VocabPair, BOS_ID, EOS_ID, PAD_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::model::{EncodedSource, ModelParams};
use crate::numerics::{Matrix, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    /// Starts with `<s>`; ends with `</s>` once completed.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: Vec<T>,
    pub completed: bool,
}

impl<T> Hypothesis<T> {
    /// Tokens without the boundary symbols.
    pub fn words(&self) -> &[usize] {
        let end = if self.completed { self.tokens.len() - 1 } else { self.tokens.len() };
        &self.tokens[1..end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub width: usize,
    /// Defaults to password length + 2.
    pub max_steps: Option<usize>,
    /// How many ranked results to return.
    pub candidates: usize,
}

impl BeamConfig {
    pub fn new(width: usize) -> Self {
        BeamConfig {
            width,
            max_steps: None,
            candidates: 1,
        }
    }

    pub fn steps_for(&self, password_len: usize) -> usize {
        self.max_steps.unwrap_or(password_len + 2)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.max_steps == Some(0) || self.candidates == 0 {
            return Err(Error::Config(format!(
                "beam width, max steps and candidates must be at least 1: {self:?}"
            )));
        }
        Ok(())
    }
}

fn expandable(word: usize) -> bool {
    word != UNK_ID && word != PAD_ID
}

fn by_score(a: &(f64, usize, usize), b: &(f64, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Beam search over encoded password characters. Results are ranked by
/// cumulative log-probability; when nothing completed the best partial
/// hypotheses are returned instead.
pub fn beam_search_ids<T: Scalar>(
    password: &[usize],
    params: &ModelParams<T>,
    config: &BeamConfig,
) -> Result<Vec<Hypothesis<T>>> {
    config.validate()?;
    let source = EncodedSource::new(params, password)?;
    let max_steps = config.steps_for(password.len());
    let mut live = vec![Hypothesis {
        tokens: vec![BOS_ID],
        log_prob: 0.0,
        state: source.initial_state(),
        completed: false,
    }];
    let mut completed: Vec<Hypothesis<T>> = Vec::new();

    for _ in 0..max_steps {
        let mut expansions = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (parent, hyp) in live.iter().enumerate() {
            let step = source.step(&hyp.state, *hyp.tokens.last().expect("non-empty"));
            for (w, lp) in step.log_probs.iter().enumerate() {
                if expandable(w) {
                    expansions.push((hyp.log_prob + lp.to_f64().unwrap_or(f64::NEG_INFINITY), parent, w));
                }
            }
            next_states.push(step.state);
        }
        if expansions.len() > config.width {
            expansions.select_nth_unstable_by(config.width - 1, by_score);
            expansions.truncate(config.width);
        }
        expansions.sort_by(by_score);

        let mut next = Vec::with_capacity(expansions.len());
        for (score, parent, w) in expansions {
            let mut tokens = live[parent].tokens.clone();
            tokens.push(w);
            let hyp = Hypothesis {
                tokens,
                log_prob: score,
                state: next_states[parent].clone(),
                completed: w == EOS_ID,
            };
            if hyp.completed {
                completed.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
        if completed.len() >= config.width || live.is_empty() {
            break;
        }
    }

    let mut ranked = if completed.is_empty() { live } else { completed };
    ranked.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob));
    ranked.truncate(config.candidates);
    Ok(ranked)
}

/// Beam search from a text password (characters are case-folded).
pub fn beam_search<T: Scalar>(
    password: &str,
    params: &ModelParams<T>,
    vocab: &VocabPair,
    config: &BeamConfig,
) -> Result<Vec<Hypothesis<T>>> {
    let ids = vocab.chars.encode(password)?;
    beam_search_ids(&ids, params, config)
}

/// Picks the most probable allowed word at every step.
pub fn greedy_decode<T: Scalar>(password: &[usize], params: &ModelParams<T>, max_steps: usize) -> Result<Hypothesis<T>> {
    let source = EncodedSource::new(params, password)?;
    let mut hyp = Hypothesis {
        tokens: vec![BOS_ID],
        log_prob: 0.0,
        state: source.initial_state(),
        completed: false,
    };
    for _ in 0..max_steps {
        let step = source.step(&hyp.state, *hyp.tokens.last().expect("non-empty"));
        let mut best: Option<(usize, f64)> = None;
        for (w, lp) in step.log_probs.iter().enumerate() {
            let lp = lp.to_f64().unwrap_or(f64::NEG_INFINITY);
            if expandable(w) && best.is_none_or(|(_, b)| lp > b) {
                best = Some((w, lp));
            }
        }
        let (w, lp) = best.expect("vocabulary has expandable words");
        hyp.tokens.push(w);
        hyp.log_prob += lp;
        hyp.state = step.state;
        if w == EOS_ID {
            hyp.completed = true;
            break;
        }
    }
    Ok(hyp)
}

/// Uppercases a token's first letter where the aligned password character
/// is an uppercase letter of the same (case-folded) value.
pub fn restore_case_tokens(password: &str, tokens: &[String]) -> Vec<String> {
    tokens
        .iter()
        .zip(password.chars().map(Some).chain(std::iter::repeat(None)))
        .map(|(tok, pc)| {
            let mut chars = tok.chars();
            match (pc, chars.next()) {
                (Some(p), Some(first)) if p.is_uppercase() && fold_char(first) == fold_char(p) => {
                    first.to_uppercase().chain(chars).collect()
                }
                _ => tok.clone(),
            }
        })
        .collect()
}

const NO_SPACE_BEFORE: [&str; 6] = [".", ",", "!", "?", ";", ":"];

/// Joins tokens with spaces except before `. , ! ? ; :` and closing quotes
/// and after opening quotes. Quote tokens alternate between opening and
/// closing.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut open_quote = false;
    let mut suppress_next = true;
    for tok in tokens {
        let is_quote = tok == "\"" || tok == "'";
        let attach = NO_SPACE_BEFORE.contains(&tok.as_str()) || (is_quote && open_quote);
        if !(suppress_next || attach) {
            out.push(' ');
        }
        out.push_str(tok);
        suppress_next = false;
        if is_quote {
            open_quote = !open_quote;
            suppress_next = open_quote;
        }
    }
    out
}

pub fn restore_case(password: &str, tokens: &[String]) -> String {
    detokenize(&restore_case_tokens(password, tokens))
}

/// Attention weights: rows are password characters, columns are the tokens
/// emitted while they were computed.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    pub source: Vec<char>,
    pub tokens: Vec<String>,
    pub alpha: Matrix<f64>,
}

impl AttentionMatrix {
    /// Tab-separated grid: a token header line, then one line per
    /// character with six-decimal weights.
    pub fn to_grid_text(&self) -> String {
        let mut out = self.tokens.join("\t");
        out.push('\n');
        for (r, c) in self.source.iter().enumerate() {
            out.push(*c);
            for v in self.alpha.row(r) {
                let _ = write!(out, "\t{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_grid_text(text: &str) -> Result<Self> {
        let bad = |line: usize, detail: String| Error::Parse {
            what: "attention grid",
            line,
            detail,
        };
        let mut lines = text.lines();
        let tokens: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?
            .split('\t')
            .map(str::to_string)
            .collect();
        let mut source = Vec::new();
        let mut data = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut fields = line.split('\t');
            let c = fields.next().and_then(|f| f.chars().next()).ok_or_else(|| bad(i + 2, "empty row".into()))?;
            source.push(c);
            let row: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|e| bad(i + 2, e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != tokens.len() {
                return Err(bad(i + 2, format!("{} values for {} tokens", row.len(), tokens.len())));
            }
            data.extend(row);
        }
        let alpha = Matrix::from_vec(source.len(), tokens.len(), data)?;
        Ok(AttentionMatrix { source, tokens, alpha })
    }

    /// Index of the most attended character for each token (first on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.alpha.cols())
            .map(|c| {
                (0..self.alpha.rows())
                    .rev()
                    .max_by(|&a, &b| self.alpha.get(a, c).total_cmp(&self.alpha.get(b, c)))
                    .unwrap_or(0)
            })
            .collect()
    }
}

/// Force-decodes `tokens` (after `<s>`) and records the attention weights
/// used to predict each of them.
pub fn export_attention_ids<T: Scalar>(password: &[usize], tokens: &[usize], params: &ModelParams<T>) -> Result<Matrix<f64>> {
    let source = EncodedSource::new(params, password)?;
    let mut alpha = Matrix::zeros(password.len(), tokens.len());
    let mut state = source.initial_state();
    let mut prev = BOS_ID;
    for (col, &tok) in tokens.iter().enumerate() {
        let step = source.step(&state, prev);
        for (row, a) in step.alpha.iter().enumerate() {
            alpha.set(row, col, a.to_f64().unwrap_or(f64::NAN));
        }
        state = step.state;
        prev = tok;
    }
    Ok(alpha)
}

pub fn export_attention<T: Scalar>(
    password: &str,
    tokens: &[String],
    params: &ModelParams<T>,
    vocab: &VocabPair,
) -> Result<AttentionMatrix> {
    let ids = vocab.chars.encode(password)?;
    let token_ids: Vec<usize> = tokens.iter().map(|t| vocab.words.id(t)).collect();
    Ok(AttentionMatrix {
        source: password.chars().collect(),
        tokens: tokens.to_vec(),
        alpha: export_attention_ids(&ids, &token_ids, params)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    fn toy(seed: u64, words: usize) -> ModelParams<f64> {
        let dims = Dims {
            chars: 4,
            words,
            embed: 3,
            hidden: 4,
            attn: 3,
            maxout: 3,
        };
        ModelParams::random(dims, 1.5, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Best completed sequence by brute force over every allowed word
    /// sequence of at most `max_steps` tokens.
    fn exhaustive(password: &[usize], params: &ModelParams<f64>, max_steps: usize) -> (Vec<usize>, f64) {
        let source = EncodedSource::new(params, password).unwrap();
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        let mut stack = vec![(vec![BOS_ID], 0.0, source.initial_state())];
        while let Some((tokens, score, state)) = stack.pop() {
            if tokens.len() > max_steps {
                continue;
            }
            let step = source.step(&state, *tokens.last().unwrap());
            for (w, &lp) in step.log_probs.iter().enumerate() {
                if !expandable(w) {
                    continue;
                }
                let mut t = tokens.clone();
                t.push(w);
                if w == EOS_ID {
                    if score + lp > best.1 {
                        best = (t, score + lp);
                    }
                } else {
                    stack.push((t, score + lp, step.state.clone()));
                }
            }
        }
        best
    }

    #[test]
    fn saturated_beam_matches_exhaustive_search() {
        for seed in 0..5 {
            let params = toy(seed, 6);
            let password = [1, 3, 0];
            let cfg = BeamConfig {
                width: 6usize.pow(4),
                max_steps: Some(4),
                candidates: 1,
            };
            let beam = beam_search_ids(&password, &params, &cfg).unwrap();
            let (tokens, score) = exhaustive(&password, &params, 4);
            assert_eq!(beam[0].tokens, tokens);
            assert!((beam[0].log_prob - score).abs() < 1e-9);
        }
    }

    #[test]
    fn width_one_is_greedy() {
        for seed in 0..20 {
            let params = toy(seed, 9);
            let password = [seed as usize % 4, 2, 1, 3];
            let beam = beam_search_ids(&password, &params, &BeamConfig::new(1)).unwrap();
            let greedy = greedy_decode(&password, &params, 6).unwrap();
            assert_eq!(beam[0].tokens, greedy.tokens);
            assert_eq!(beam[0].log_prob, greedy.log_prob);
        }
    }

    #[test]
    fn wider_beams_do_not_lose_on_random_toys() {
        let mut worse = 0;
        for seed in 0..100 {
            let params = toy(1000 + seed, 8);
            let password: Vec<usize> = (0..3 + seed as usize % 3).map(|i| (i * 3 + seed as usize) % 4).collect();
            let mut last = f64::NEG_INFINITY;
            for width in [1, 2, 5, 10] {
                let top = beam_search_ids(&password, &params, &BeamConfig::new(width)).unwrap();
                let score = if top[0].completed { top[0].log_prob } else { f64::NEG_INFINITY };
                if score < last - 1e-12 {
                    worse += 1;
                }
                last = last.max(score);
            }
        }
        assert_eq!(worse, 0);
    }

    #[test]
    fn scores_are_exact_sums_and_never_rise() {
        let params = toy(5, 7);
        let password = [0, 1, 2];
        let results = beam_search_ids(&password, &params, &BeamConfig { candidates: 5, ..BeamConfig::new(5) }).unwrap();
        let source = EncodedSource::new(&params, &password).unwrap();
        for h in &results {
            let exact = source.sequence_log_prob(&h.tokens[1..]);
            assert!((exact - h.log_prob).abs() < 1e-12);
            assert!(!h.tokens.contains(&UNK_ID) && !h.tokens.contains(&PAD_ID));
        }
        assert!(results.windows(2).all(|w| w[0].log_prob >= w[1].log_prob));
    }

    #[test]
    fn unknown_character_is_named() {
        let vocab = VocabPair {
            chars: crate::corpus::CharVocab::new(vec!['a', 'b', 'c', 'd']).unwrap(),
            words: crate::corpus::WordVocab::new(
                ["<s>", "</s>", "<UNK>", "<pad>", "x", "y"].iter().map(|s| s.to_string()).collect(),
            )
            .unwrap(),
        };
        let params = toy(1, 6);
        assert!(matches!(
            beam_search("abz", &params, &vocab, &BeamConfig::new(2)),
            Err(Error::UnknownChar('z'))
        ));
        assert!(beam_search("ABc", &params, &vocab, &BeamConfig::new(2)).is_ok());
    }

    #[test]
    fn restore_case_examples() {
        assert_eq!(
            restore_case("O,y,slt.", &toks("oh , yes , something like that .")),
            "Oh, yes, something like that."
        );
        assert_eq!(restore_case_tokens("abc", &toks("apple bat cat")), toks("apple bat cat"));
        assert_eq!(restore_case_tokens("Xbc", &toks("apple bat cat")), toks("apple bat cat"));
        assert_eq!(restore_case_tokens("ABCD", &toks("apple bat")), toks("Apple Bat"));
    }

    #[test]
    fn detokenize_quotes() {
        assert_eq!(detokenize(&toks("he said \" go away \" : fine !")), "he said \"go away\": fine!");
    }

    #[test]
    fn attention_export_and_grid() {
        let params = toy(3, 6);
        let alpha = export_attention_ids(&[0, 1, 2, 3], &[4, 5, EOS_ID], &params).unwrap();
        for c in 0..3 {
            let s: f64 = (0..4).map(|r| alpha.get(r, c)).sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        let one = export_attention_ids(&[2], &[4, EOS_ID], &params).unwrap();
        assert!(one.as_slice().iter().all(|&v| v == 1.0));

        let m = AttentionMatrix {
            source: vec!['O', ','],
            tokens: toks("oh ,"),
            alpha: Matrix::from_vec(2, 2, vec![0.75, 0.5, 0.25, 0.5]).unwrap(),
        };
        let text = m.to_grid_text();
        assert_eq!(text, "oh\t,\nO\t0.750000\t0.500000\n,\t0.250000\t0.500000\n");
        assert_eq!(AttentionMatrix::parse_grid_text(&text).unwrap(), m);
        assert_eq!(m.argmax_rows(), [0, 0]);
    }

    proptest! {
        #[test]
        fn restore_case_is_idempotent_and_local(
            password in "[A-Za-z0-9.,]{1,10}",
            tokens in proptest::collection::vec("[a-z.,]{1,5}", 1..12),
        ) {
            let once = restore_case_tokens(&password, &tokens);
            prop_assert_eq!(&restore_case_tokens(&password, &once), &once);
            for (a, b) in once.iter().zip(&tokens) {
                prop_assert_eq!(a.to_lowercase(), b.to_lowercase());
                prop_assert_eq!(&a[1..], &b[1..]);
            }
        }
    }
}
