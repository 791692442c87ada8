//! Mnemonic proportion, corpus BLEU and the evaluation report format.
//!
//! Reports are flat `key = value` text; lines starting with `#` are
//! comments. A comparison document uses the same syntax, with each side's
//! keys prefixed by `neural.` / `baseline.` and differences under `delta.`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::Hash;

use crate::corpus::{first_char_matches, is_reserved_word};
use crate::error::{Error, Result};

pub const MAX_BLEU_ORDER: usize = 4;

/// Fraction of password positions whose aligned token starts with the
/// password character. Positions past the end of `tokens` count as misses.
pub fn mnemonic_proportion_single<S: AsRef<str>>(password: &str, tokens: &[S]) -> Result<f64> {
    let len = password.chars().count();
    if len == 0 {
        return Err(Error::Empty("password"));
    }
    let hits = password
        .chars()
        .zip(tokens)
        .filter(|(c, t)| !is_reserved_word(t.as_ref()) && first_char_matches(t.as_ref(), *c))
        .count();
    Ok(hits as f64 / len as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpResult {
    /// Percentage, 0–100.
    pub mp: f64,
    /// Per-example fractions in [0, 1].
    pub per_example: Vec<f64>,
}

pub fn mnemonic_proportion<P, T, S>(pairs: &[(P, T)]) -> Result<MpResult>
where
    P: AsRef<str>,
    T: AsRef<[S]>,
    S: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(Error::Empty("mnemonic proportion input"));
    }
    let per_example = pairs
        .iter()
        .map(|(p, t)| mnemonic_proportion_single(p.as_ref(), t.as_ref()))
        .collect::<Result<Vec<f64>>>()?;
    let mp = per_example.iter().sum::<f64>() / per_example.len() as f64 * 100.0;
    Ok(MpResult { mp, per_example })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    /// BLEU-1..N on a 0–100 scale.
    pub scores: Vec<f64>,
    /// Clipped matches and candidate n-gram totals per order.
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    pub reference_len: usize,
    pub brevity_penalty: f64,
}

impl BleuScore {
    pub fn precision(&self, order: usize) -> f64 {
        match self.totals[order - 1] {
            0 => 0.0,
            t => self.matches[order - 1] as f64 / t as f64,
        }
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU with one reference per candidate. Brevity uses total
/// candidate and reference token counts.
pub fn bleu<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>], max_order: usize) -> Result<BleuScore> {
    if candidates.len() != references.len() {
        return Err(Error::shape("bleu corpora", references.len(), candidates.len()));
    }
    if max_order == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    let mut matches = vec![0usize; max_order];
    let mut totals = vec![0usize; max_order];
    let mut candidate_len = 0;
    let mut reference_len = 0;
    for (cand, reference) in candidates.iter().zip(references) {
        candidate_len += cand.len();
        reference_len += reference.len();
        for n in 1..=max_order {
            let ref_counts = ngram_counts(reference, n);
            for (g, c) in ngram_counts(cand, n) {
                matches[n - 1] += c.min(ref_counts.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    let brevity_penalty = if candidate_len == 0 {
        0.0
    } else if candidate_len > reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    };
    let mut scores = Vec::with_capacity(max_order);
    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let p = if totals[n - 1] == 0 { 0.0 } else { matches[n - 1] as f64 / totals[n - 1] as f64 };
        log_sum += p.ln();
        let s = 100.0 * brevity_penalty * (log_sum / n as f64).exp();
        scores.push(if s.is_finite() { s } else { 0.0 });
    }
    Ok(BleuScore {
        scores,
        matches,
        totals,
        candidate_len,
        reference_len,
        brevity_penalty,
    })
}

/// Scores of one system at one beam width.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamScores {
    pub beam: usize,
    pub mp: f64,
    pub bleu: [f64; MAX_BLEU_ORDER],
    /// Not serialized; empty after parsing.
    pub per_example_mp: Vec<f64>,
}

impl BeamScores {
    pub fn compute<P, S>(beam: usize, passwords: &[P], generated: &[Vec<S>], references: &[Vec<S>]) -> Result<Self>
    where
        P: AsRef<str>,
        S: AsRef<str> + Eq + Hash,
    {
        if passwords.len() != generated.len() {
            return Err(Error::shape("generated sentences", passwords.len(), generated.len()));
        }
        let pairs: Vec<(&str, &[S])> = passwords.iter().map(|p| p.as_ref()).zip(generated.iter().map(Vec::as_slice)).collect();
        let mp = mnemonic_proportion(&pairs)?;
        let b = bleu(generated, references, MAX_BLEU_ORDER)?;
        let mut bleu = [0.0; MAX_BLEU_ORDER];
        bleu.copy_from_slice(&b.scores);
        Ok(BeamScores {
            beam,
            mp: mp.mp,
            bleu,
            per_example_mp: mp.per_example,
        })
    }

    fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![(format!("b{}.MP", self.beam), self.mp)];
        for (i, v) in self.bleu.iter().enumerate() {
            out.push((format!("b{}.BLEU-{}", self.beam, i + 1), *v));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub system: String,
    pub examples: usize,
    /// Test pairs that could not be generated for (scored as empty output).
    pub skipped: usize,
    pub beams: Vec<BeamScores>,
}

/// Ordered `key = value` entries of a report-format document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportDoc {
    pub entries: Vec<(String, String)>,
}

impl ReportDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| Error::Parse {
                what: "report",
                line: i + 1,
                detail: "expected `key = value`".into(),
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(ReportDoc { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Entries under `prefix.`, with the prefix removed.
    pub fn section(&self, prefix: &str) -> ReportDoc {
        let p = format!("{prefix}.");
        ReportDoc {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|k| (k.to_string(), v.clone())))
                .collect(),
        }
    }
}

fn field<T: std::str::FromStr>(doc: &ReportDoc, key: &str) -> Result<T> {
    let raw = doc.get(key).ok_or_else(|| Error::MetricMismatch(format!("missing `{key}`")))?;
    raw.parse().map_err(|_| Error::Parse {
        what: "report",
        line: 0,
        detail: format!("bad value for `{key}`: {raw}"),
    })
}

impl EvalReport {
    fn header(&self) -> Vec<(String, String)> {
        vec![
            ("system".into(), self.system.clone()),
            ("examples".into(), self.examples.to_string()),
            ("skipped".into(), self.skipped.to_string()),
            (
                "beams".into(),
                self.beams.iter().map(|b| b.beam.to_string()).collect::<Vec<_>>().join(","),
            ),
        ]
    }

    fn entries(&self) -> Vec<(String, String)> {
        let mut out = self.header();
        for b in &self.beams {
            out.extend(b.metrics().into_iter().map(|(k, v)| (k, format!("{:.2}", round2(v)))));
        }
        out
    }

    pub fn format(&self) -> String {
        let mut out = String::from("# mnemonic evaluation report\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_doc(doc: &ReportDoc) -> Result<Self> {
        let beams_raw: String = field(doc, "beams")?;
        let mut beams = Vec::new();
        for b in beams_raw.split(',').filter(|s| !s.is_empty()) {
            let beam: usize = b.parse().map_err(|_| Error::MetricMismatch(format!("bad beam list `{beams_raw}`")))?;
            let mut bleu = [0.0; MAX_BLEU_ORDER];
            for (i, v) in bleu.iter_mut().enumerate() {
                *v = field(doc, &format!("b{beam}.BLEU-{}", i + 1))?;
            }
            beams.push(BeamScores {
                beam,
                mp: field(doc, &format!("b{beam}.MP"))?,
                bleu,
                per_example_mp: Vec::new(),
            });
        }
        Ok(EvalReport {
            system: field(doc, "system")?,
            examples: field(doc, "examples")?,
            skipped: field(doc, "skipped")?,
            beams,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_doc(&ReportDoc::parse(text)?)
    }

    pub fn scores(&self, beam: usize) -> Option<&BeamScores> {
        self.beams.iter().find(|b| b.beam == beam)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub neural: EvalReport,
    pub baseline: EvalReport,
    /// (metric key, neural, baseline, neural − baseline).
    pub rows: Vec<(String, f64, f64, f64)>,
}

/// Aligns two reports metric by metric. Both must cover the same beams.
pub fn compare(neural: &EvalReport, baseline: &EvalReport) -> Result<Comparison> {
    let widths = |r: &EvalReport| r.beams.iter().map(|b| b.beam).collect::<Vec<_>>();
    if widths(neural) != widths(baseline) {
        return Err(Error::MetricMismatch(format!(
            "beam widths differ: {:?} vs {:?}",
            widths(neural),
            widths(baseline)
        )));
    }
    let mut rows = Vec::new();
    for (a, b) in neural.beams.iter().zip(&baseline.beams) {
        for ((k, x), (_, y)) in a.metrics().into_iter().zip(b.metrics()) {
            // compare at report precision so parsed and in-memory reports agree
            let (x, y) = (round2(x), round2(y));
            rows.push((k, x, y, round2(x - y)));
        }
    }
    Ok(Comparison {
        neural: neural.clone(),
        baseline: baseline.clone(),
        rows,
    })
}

fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl Comparison {
    pub fn format(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {:<12} {:>10} {:>10} {:>10}", "metric", "neural", "baseline", "delta");
        for (k, x, y, d) in &self.rows {
            let _ = writeln!(out, "# {k:<12} {x:>10.2} {y:>10.2} {d:>+10.2}");
        }
        for (side, r) in [("neural", &self.neural), ("baseline", &self.baseline)] {
            for (k, v) in r.entries() {
                let _ = writeln!(out, "{side}.{k} = {v}");
            }
        }
        for (k, _, _, d) in &self.rows {
            let _ = writeln!(out, "delta.{k} = {d:.2}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = ReportDoc::parse(text)?;
        let neural = EvalReport::from_doc(&doc.section("neural"))?;
        let baseline = EvalReport::from_doc(&doc.section("baseline"))?;
        compare(&neural, &baseline)
    }
}
