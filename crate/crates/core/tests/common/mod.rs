#![allow(dead_code)]

use mnemonic::corpus::{build_vocabularies, ingest, IngestConfig, MnemonicPair, PairExample, VocabPair};
use mnemonic::synthetic::synthetic_corpus;
use mnemonic::trainer::{evaluate_loss, train, TrainConfig};
use mnemonic::ModelParams;

pub struct Memorized {
    pub pairs: Vec<MnemonicPair>,
    pub vocab: VocabPair,
    pub examples: Vec<PairExample>,
    pub params: ModelParams<f32>,
    pub final_loss: f64,
    pub epochs: usize,
}

pub fn memorize_config(dim: usize) -> TrainConfig {
    TrainConfig {
        hidden: dim,
        embed: dim,
        attn: dim,
        maxout: dim,
        dropout: 0.0,
        batch_size: 16,
        learning_rate: 3e-3,
        max_epochs: 200,
        patience: 200,
        stop_below: Some(0.05),
        ..TrainConfig::default()
    }
}

/// Trains on `count` synthetic pairs and validates on the same pairs.
pub fn memorize(count: usize, corpus_seed: u64, cfg: &TrainConfig) -> Memorized {
    let lines = synthetic_corpus(count, corpus_seed);
    let (pairs, _) = ingest(lines.iter().map(String::as_str), &IngestConfig::default()).unwrap();
    let vocab = build_vocabularies(&pairs).unwrap();
    let (examples, _) = vocab.encode_all(&pairs);
    let out = train::<f32>(&examples, &examples, vocab.chars.len(), vocab.words.len(), cfg).unwrap();
    let final_loss = evaluate_loss(&examples, &out.best, cfg.batch_size).unwrap();
    Memorized {
        pairs,
        vocab,
        examples,
        params: out.best,
        final_loss,
        epochs: out.last_epoch,
    }
}

/// `count` synthetic sentences, one per line.
pub fn corpus_text(count: usize, seed: u64) -> String {
    let mut text = synthetic_corpus(count, seed).join("\n");
    text.push('\n');
    text
}
