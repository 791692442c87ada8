//! End-to-end stages behind the command-line tool.
//!
//! Every stage takes a fully resolved configuration, writes its artifacts,
//! and records a [`RunManifest`] next to them. Feeding a manifest back to
//! [`rerun`] repeats the stage with identical outputs.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beam::{beam_search_ids, export_attention, restore_case, BeamConfig};
use crate::bigram::{fit_bigram_pairs, generate_constrained, BigramModel};
use crate::checkpoint::{load_checkpoint, save_checkpoint, AnyCheckpoint, Checkpoint, CheckpointMeta};
use crate::corpus::{
    build_vocabularies, ingest, make_split, read_lines, read_pairs, read_vocabularies, write_pairs, write_text,
    write_vocabularies, IngestConfig, MnemonicPair, VocabPair, DEFAULT_MAX_LEN, DEFAULT_MIN_LEN,
};
use crate::error::{Error, Result};
use crate::metrics::{compare as compare_reports, BeamScores, Comparison, EvalReport};
use crate::model::{ModelParams, INIT_SCALE};
use crate::numerics::{Precision, Scalar};
use crate::trainer::{gradient_check_dims, gradient_check_model, train_with, TrainConfig, TrainStart};

pub const DEFAULT_TRAIN_FRAC: f64 = 0.9;
pub const DEFAULT_VALID_FRAC: f64 = 0.2;
pub const TRAIN_PAIRS: &str = "train.pairs";
pub const VALIDATION_PAIRS: &str = "validation.pairs";
pub const TEST_PAIRS: &str = "test.pairs";
pub const BIGRAM_FILE: &str = "bigram.tsv";
pub const PREPARE_MANIFEST: &str = "prepare.manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
    pub train_frac: f64,
    pub valid_frac: f64,
    /// Word list (one per line); sentences with other words are dropped.
    pub dictionary: Option<PathBuf>,
}

impl PrepareConfig {
    pub fn new(corpus: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PrepareConfig {
            corpus: corpus.into(),
            out: out.into(),
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            seed: 0,
            train_frac: DEFAULT_TRAIN_FRAC,
            valid_frac: DEFAULT_VALID_FRAC,
            dictionary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStage {
    /// Directory written by `prepare`.
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub precision: Precision,
    pub resume: Option<PathBuf>,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckStage {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub checkpoint: PathBuf,
    pub password: Option<String>,
    /// One password per line.
    pub passwords: Option<PathBuf>,
    pub beam: usize,
    pub restore_case: bool,
    /// Directory receiving one attention grid per password.
    pub attention: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemSpec {
    Neural { checkpoint: PathBuf },
    Bigram { model: PathBuf },
    /// Scores the ground truth against itself.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub test: PathBuf,
    pub system: SystemSpec,
    pub beams: Vec<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub neural: PathBuf,
    pub baseline: PathBuf,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub checkpoint: PathBuf,
    pub password: String,
    /// Space-separated tokens to force-decode; generated when absent.
    pub tokens: Option<String>,
    pub beam: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Stage {
    Prepare(PrepareConfig),
    Train(TrainStage),
    GradCheck(GradCheckStage),
    Generate(GenerateConfig),
    Evaluate(EvaluateConfig),
    Compare(CompareConfig),
    Attention(AttentionConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub stats: BTreeMap<String, String>,
    pub stage: Stage,
}

impl RunManifest {
    fn new(stage: Stage) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            stats: BTreeMap::new(),
            stage,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "manifest",
            line: 0,
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// What a stage did.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub manifest: RunManifest,
    pub manifest_path: Option<PathBuf>,
    /// Text meant for standard output.
    pub stdout: String,
    /// Per-item problems that did not abort the stage.
    pub problems: Vec<String>,
}

impl StageOutcome {
    pub fn succeeded(&self) -> bool {
        self.problems.is_empty()
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn finish(manifest: RunManifest, manifest_path: Option<PathBuf>, stdout: String, problems: Vec<String>) -> Result<StageOutcome> {
    if let Some(p) = &manifest_path {
        write_text(p, &manifest.to_toml()?)?;
    }
    Ok(StageOutcome {
        manifest,
        manifest_path,
        stdout,
        problems,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

macro_rules! with_checkpoint {
    ($ck:expr, |$c:ident| $body:expr) => {
        match $ck {
            AnyCheckpoint::F32($c) => $body,
            AnyCheckpoint::F64($c) => $body,
        }
    };
}

pub fn prepare(cfg: &PrepareConfig) -> Result<StageOutcome> {
    let lines = read_lines(&cfg.corpus)?;
    let dictionary = match &cfg.dictionary {
        Some(p) => Some(
            read_lines(p)?
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect::<HashSet<String>>(),
        ),
        None => None,
    };
    let ingest_cfg = IngestConfig {
        min_len: cfg.min_len,
        max_len: cfg.max_len,
        dictionary,
        ..IngestConfig::default()
    };
    let (pairs, stats) = ingest(lines.iter().map(String::as_str), &ingest_cfg)?;
    if pairs.is_empty() {
        return Err(Error::Empty("surviving pairs after filtering"));
    }
    let split = make_split(pairs, cfg.seed, cfg.train_frac, cfg.valid_frac)?;
    if split.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    let vocab = build_vocabularies(&split.train)?;

    create_dir(&cfg.out)?;
    let mut manifest = RunManifest::new(Stage::Prepare(cfg.clone()));
    for (name, pairs) in [(TRAIN_PAIRS, &split.train), (VALIDATION_PAIRS, &split.validation), (TEST_PAIRS, &split.test)] {
        let p = cfg.out.join(name);
        write_pairs(&p, pairs)?;
        manifest.outputs.push(p);
    }
    write_vocabularies(&cfg.out, &vocab)?;
    manifest.outputs.push(cfg.out.join(crate::corpus::CHAR_VOCAB_FILE));
    manifest.outputs.push(cfg.out.join(crate::corpus::WORD_VOCAB_FILE));
    let bigram_path = cfg.out.join(BIGRAM_FILE);
    fit_bigram_pairs(&split.train)?.save(&bigram_path)?;
    manifest.outputs.push(bigram_path);

    let counts = [
        ("lines", stats.lines),
        ("empty", stats.empty),
        ("dropped_dictionary", stats.dropped_dictionary),
        ("dropped_length", stats.dropped_length),
        ("kept", stats.kept),
        ("train", split.train.len()),
        ("validation", split.validation.len()),
        ("test", split.test.len()),
        ("char_vocab", vocab.chars.len()),
        ("word_vocab", vocab.words.len()),
    ];
    let mut stdout = String::new();
    for (k, v) in counts {
        manifest.stats.insert(k.to_string(), v.to_string());
        let _ = writeln!(stdout, "{k}: {v}");
    }
    finish(manifest, Some(cfg.out.join(PREPARE_MANIFEST)), stdout, Vec::new())
}

/// Held-out pairs may use characters never seen in training; those are
/// dropped with a warning.
fn encode_split(vocab: &VocabPair, pairs: &[MnemonicPair], what: &str) -> Vec<crate::corpus::PairExample> {
    let (examples, skipped) = vocab.encode_all(pairs);
    if skipped > 0 {
        log::warn!("{skipped} {what} pairs use characters outside the vocabulary and were skipped");
    }
    examples
}

fn train_typed<T: Scalar>(stage: &TrainStage, vocab: VocabPair) -> Result<(Checkpoint<T>, String)> {
    let train_pairs = read_pairs(&stage.data.join(TRAIN_PAIRS))?;
    let valid_pairs = read_pairs(&stage.data.join(VALIDATION_PAIRS))?;
    let train_set = encode_split(&vocab, &train_pairs, "training");
    let valid_set = encode_split(&vocab, &valid_pairs, "validation");
    let cfg = &stage.config;
    let dims = cfg.dims(vocab.chars.len(), vocab.words.len());
    dims.validate()?;

    let start = match &stage.resume {
        Some(path) => {
            let (params, meta) = with_checkpoint!(load_checkpoint(path)?, |c| (c.params.convert::<T>(), c.meta));
            if params.dims() != dims {
                return Err(Error::DimMismatch(format!(
                    "checkpoint {} has dims {:?}, flags and vocabulary give {:?}",
                    path.display(),
                    params.dims(),
                    dims
                )));
            }
            TrainStart {
                params,
                epochs_done: meta.epoch,
            }
        }
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::trainer::mix_seed(&[cfg.seed, 0x1a17]));
            TrainStart {
                params: ModelParams::random(dims, cfg.init_scale, &mut rng),
                epochs_done: 0,
            }
        }
    };

    let mut log = String::new();
    let _ = writeln!(log, "# epoch train_loss validation_loss");
    let outcome = train_with(&train_set, &valid_set, start, cfg, |r| {
        log::info!("epoch {} train {:.6} validation {:.6}", r.epoch, r.train_loss, r.validation_loss);
        let _ = writeln!(log, "{} {:.6} {:.6}", r.epoch, r.train_loss, r.validation_loss);
    })?;
    let _ = writeln!(
        log,
        "# best epoch {} validation {:.6} (initial {:.6})",
        outcome.best_epoch, outcome.best_validation_loss, outcome.initial_validation_loss
    );
    let meta = CheckpointMeta {
        epoch: outcome.last_epoch,
        best_epoch: outcome.best_epoch,
        validation_loss: Some(outcome.best_validation_loss),
        optimizer: "adam".into(),
        learning_rate: cfg.learning_rate,
        clip_norm: cfg.clip_norm,
        dropout: cfg.dropout,
        seed: cfg.seed,
    };
    Ok((
        Checkpoint {
            params: outcome.best,
            meta,
            vocab: Some(vocab),
        },
        log,
    ))
}

pub fn train(stage: &TrainStage) -> Result<StageOutcome> {
    let vocab = read_vocabularies(&stage.data)?;
    let log_path = sibling(&stage.checkpoint, ".log");
    let (log, summary) = match stage.precision {
        Precision::F32 => {
            let (ck, log) = train_typed::<f32>(stage, vocab)?;
            save_checkpoint(&stage.checkpoint, &ck)?;
            (log, ck.meta)
        }
        Precision::F64 => {
            let (ck, log) = train_typed::<f64>(stage, vocab)?;
            save_checkpoint(&stage.checkpoint, &ck)?;
            (log, ck.meta)
        }
    };
    write_text(&log_path, &log)?;
    let mut manifest = RunManifest::new(Stage::Train(stage.clone()));
    manifest.outputs = vec![stage.checkpoint.clone(), log_path];
    manifest.stats.insert("epochs".into(), summary.epoch.to_string());
    manifest.stats.insert("best_epoch".into(), summary.best_epoch.to_string());
    if let Some(v) = summary.validation_loss {
        manifest.stats.insert("validation_loss".into(), format!("{v:.6}"));
    }
    let stdout = format!(
        "trained to epoch {} (best {}), validation loss {:.6}\n",
        summary.epoch,
        summary.best_epoch,
        summary.validation_loss.unwrap_or(f64::NAN)
    );
    finish(manifest, Some(sibling(&stage.checkpoint, ".manifest.toml")), stdout, Vec::new())
}

/// Whole-model finite-difference check; each failing tensor is a problem.
pub fn grad_check(stage: &GradCheckStage) -> Result<StageOutcome> {
    let reports = gradient_check_model(gradient_check_dims(), stage.seed)?;
    let mut stdout = String::new();
    let mut problems = Vec::new();
    for r in &reports {
        let status = if r.passed { "ok" } else { "FAIL" };
        let _ = writeln!(stdout, "{status:<4} {:<24} {:.3e} (tolerance {:.0e})", r.name, r.max_relative_error, r.tolerance);
        if !r.passed {
            problems.push(format!("gradient check failed for {}", r.name));
        }
    }
    finish(RunManifest::new(Stage::GradCheck(stage.clone())), None, stdout, problems)
}

fn checkpoint_vocab(path: &Path, vocab: Option<VocabPair>) -> Result<VocabPair> {
    vocab.ok_or_else(|| Error::Config(format!("checkpoint {} carries no vocabulary", path.display())))
}

/// Top beam-search output as words; `None` for unknown characters.
pub fn neural_generate<T: Scalar>(
    password: &str,
    params: &ModelParams<T>,
    vocab: &VocabPair,
    beam: usize,
) -> Result<std::result::Result<Vec<String>, char>> {
    let ids = match vocab.chars.encode(password) {
        Ok(ids) => ids,
        Err(Error::UnknownChar(c)) => return Ok(Err(c)),
        Err(e) => return Err(e),
    };
    let best = beam_search_ids(&ids, params, &BeamConfig::new(beam))?;
    Ok(Ok(best
        .first()
        .map(|h| vocab.words.decode(h.words()))
        .unwrap_or_default()))
}

pub fn generate(cfg: &GenerateConfig) -> Result<StageOutcome> {
    let mut passwords = Vec::new();
    if let Some(p) = &cfg.password {
        passwords.push(p.clone());
    }
    if let Some(path) = &cfg.passwords {
        passwords.extend(read_lines(path)?.into_iter().filter(|l| !l.is_empty()));
    }
    if passwords.is_empty() {
        return Err(Error::Empty("passwords to generate for"));
    }
    if let Some(dir) = &cfg.attention {
        create_dir(dir)?;
    }
    let mut manifest = RunManifest::new(Stage::Generate(cfg.clone()));
    let mut text = String::new();
    let mut problems = Vec::new();
    with_checkpoint!(load_checkpoint(&cfg.checkpoint)?, |ck| {
        let vocab = checkpoint_vocab(&cfg.checkpoint, ck.vocab)?;
        for (line, pw) in passwords.iter().enumerate() {
            match neural_generate(pw, &ck.params, &vocab, cfg.beam)? {
                Ok(tokens) => {
                    let shown = if cfg.restore_case { restore_case(pw, &tokens) } else { tokens.join(" ") };
                    let _ = writeln!(text, "{shown}");
                    if let Some(dir) = &cfg.attention {
                        let mut with_end = tokens.clone();
                        with_end.push(crate::corpus::EOS.to_string());
                        let grid = export_attention(pw, &with_end, &ck.params, &vocab)?;
                        let path = dir.join(format!("{:04}.tsv", line + 1));
                        write_text(&path, &grid.to_grid_text())?;
                        manifest.outputs.push(path);
                    }
                }
                Err(c) => problems.push(format!("password {}: unknown character {c:?}, skipped", line + 1)),
            }
        }
    });
    manifest.stats.insert("generated".into(), (passwords.len() - problems.len()).to_string());
    manifest.stats.insert("skipped".into(), problems.len().to_string());
    match &cfg.out {
        Some(out) => {
            write_text(out, &text)?;
            manifest.outputs.insert(0, out.clone());
            finish(manifest, Some(sibling(out, ".manifest.toml")), String::new(), problems)
        }
        None => finish(manifest, None, text, problems),
    }
}

/// Scores a neural model on `pairs`; passwords with unknown characters are
/// scored as empty generations and counted as skipped.
pub fn evaluate_neural<T: Scalar>(pairs: &[MnemonicPair], params: &ModelParams<T>, vocab: &VocabPair, beams: &[usize]) -> Result<EvalReport> {
    let mut skipped = 0;
    let mut scores = Vec::new();
    for &b in beams {
        let mut outputs = Vec::with_capacity(pairs.len());
        skipped = 0;
        for p in pairs {
            match neural_generate(&p.password, params, vocab, b)? {
                Ok(tokens) => outputs.push(tokens),
                Err(_) => {
                    skipped += 1;
                    outputs.push(Vec::new());
                }
            }
        }
        scores.push(score(b, pairs, &outputs)?);
    }
    Ok(EvalReport {
        system: "neural".into(),
        examples: pairs.len(),
        skipped,
        beams: scores,
    })
}

pub fn evaluate_bigram(pairs: &[MnemonicPair], model: &BigramModel, beams: &[usize]) -> Result<EvalReport> {
    let mut scores = Vec::new();
    for &b in beams {
        let outputs: Vec<Vec<String>> = pairs.iter().map(|p| generate_constrained(&p.password, model, b)).collect();
        scores.push(score(b, pairs, &outputs)?);
    }
    Ok(EvalReport {
        system: "bigram".into(),
        examples: pairs.len(),
        skipped: 0,
        beams: scores,
    })
}

fn score(beam: usize, pairs: &[MnemonicPair], outputs: &[Vec<String>]) -> Result<BeamScores> {
    let passwords: Vec<&str> = pairs.iter().map(|p| p.password.as_str()).collect();
    let references: Vec<Vec<String>> = pairs.iter().map(|p| p.tokens.clone()).collect();
    BeamScores::compute(beam, &passwords, outputs, &references)
}

pub fn evaluate(cfg: &EvaluateConfig) -> Result<StageOutcome> {
    let pairs = read_pairs(&cfg.test)?;
    if pairs.is_empty() {
        return Err(Error::Empty("test pairs"));
    }
    if cfg.beams.is_empty() || cfg.beams.contains(&0) {
        return Err(Error::Config(format!("beam widths must be positive: {:?}", cfg.beams)));
    }
    let report = match &cfg.system {
        SystemSpec::Neural { checkpoint } => with_checkpoint!(load_checkpoint(checkpoint)?, |ck| {
            let vocab = checkpoint_vocab(checkpoint, ck.vocab)?;
            evaluate_neural(&pairs, &ck.params, &vocab, &cfg.beams)?
        }),
        SystemSpec::Bigram { model } => evaluate_bigram(&pairs, &BigramModel::load(model)?, &cfg.beams)?,
        SystemSpec::Reference => {
            let outputs: Vec<Vec<String>> = pairs.iter().map(|p| p.tokens.clone()).collect();
            let beams = cfg.beams.iter().map(|&b| score(b, &pairs, &outputs)).collect::<Result<_>>()?;
            EvalReport {
                system: "reference".into(),
                examples: pairs.len(),
                skipped: 0,
                beams,
            }
        }
    };
    let text = report.format();
    write_text(&cfg.out, &text)?;
    let mut manifest = RunManifest::new(Stage::Evaluate(cfg.clone()));
    manifest.outputs.push(cfg.out.clone());
    let problems = if report.skipped > 0 {
        vec![format!("{} test passwords contain unknown characters", report.skipped)]
    } else {
        Vec::new()
    };
    finish(manifest, Some(sibling(&cfg.out, ".manifest.toml")), text, problems)
}

pub fn compare(cfg: &CompareConfig) -> Result<StageOutcome> {
    let read = |p: &Path| -> Result<EvalReport> { EvalReport::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?) };
    let cmp: Comparison = compare_reports(&read(&cfg.neural)?, &read(&cfg.baseline)?)?;
    let text = cmp.format();
    let mut manifest = RunManifest::new(Stage::Compare(cfg.clone()));
    match &cfg.out {
        Some(out) => {
            write_text(out, &text)?;
            manifest.outputs.push(out.clone());
            finish(manifest, Some(sibling(out, ".manifest.toml")), text, Vec::new())
        }
        None => finish(manifest, None, text, Vec::new()),
    }
}

pub fn attention(cfg: &AttentionConfig) -> Result<StageOutcome> {
    let grid = with_checkpoint!(load_checkpoint(&cfg.checkpoint)?, |ck| {
        let vocab = checkpoint_vocab(&cfg.checkpoint, ck.vocab)?;
        let tokens: Vec<String> = match &cfg.tokens {
            Some(t) => t.split_whitespace().map(str::to_string).collect(),
            None => {
                let mut t = neural_generate(&cfg.password, &ck.params, &vocab, cfg.beam)?.map_err(Error::UnknownChar)?;
                t.push(crate::corpus::EOS.to_string());
                t
            }
        };
        export_attention(&cfg.password, &tokens, &ck.params, &vocab)?
    });
    let text = grid.to_grid_text();
    write_text(&cfg.out, &text)?;
    let mut manifest = RunManifest::new(Stage::Attention(cfg.clone()));
    manifest.outputs.push(cfg.out.clone());
    finish(manifest, Some(sibling(&cfg.out, ".manifest.toml")), text, Vec::new())
}

pub fn run_stage(stage: &Stage) -> Result<StageOutcome> {
    match stage {
        Stage::Prepare(c) => prepare(c),
        Stage::Train(c) => train(c),
        Stage::GradCheck(c) => grad_check(c),
        Stage::Generate(c) => generate(c),
        Stage::Evaluate(c) => evaluate(c),
        Stage::Compare(c) => compare(c),
        Stage::Attention(c) => attention(c),
    }
}

/// Repeats the stage recorded in a manifest file.
pub fn rerun(manifest: &Path) -> Result<StageOutcome> {
    run_stage(&RunManifest::load(manifest)?.stage)
}

/// Training configuration at the command-line defaults.
pub fn default_train_config() -> TrainConfig {
    TrainConfig {
        init_scale: INIT_SCALE,
        ..TrainConfig::default()
    }
}
