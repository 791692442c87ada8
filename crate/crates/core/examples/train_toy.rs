//! Trains a small model on synthetic pairs and saves a checkpoint.

use mnemonic::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use mnemonic::corpus::{build_vocabularies, ingest, make_split, IngestConfig};
use mnemonic::synthetic::synthetic_corpus;
use mnemonic::trainer::{train_with, TrainConfig, TrainStart};
use mnemonic::ModelParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let lines = synthetic_corpus(300, 1);
    let (pairs, _) = ingest(lines.iter().map(String::as_str), &IngestConfig::default())?;
    let split = make_split(pairs, 0, 0.9, 0.2)?;
    let vocab = build_vocabularies(&split.train)?;
    let (train, _) = vocab.encode_all(&split.train);
    let (valid, _) = vocab.encode_all(&split.validation);

    let cfg = TrainConfig {
        hidden: 32,
        embed: 32,
        attn: 32,
        maxout: 32,
        batch_size: 16,
        learning_rate: 3e-3,
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let dims = cfg.dims(vocab.chars.len(), vocab.words.len());
    let params = ModelParams::<f32>::random(dims, cfg.init_scale, &mut ChaCha8Rng::seed_from_u64(0));
    println!("{} parameters", params.parameter_count());
    let out = train_with(&train, &valid, TrainStart { params, epochs_done: 0 }, &cfg, |r| {
        println!("epoch {:>2}  train {:.4}  validation {:.4}", r.epoch, r.train_loss, r.validation_loss);
    })?;
    println!("best epoch {}", out.best_epoch);

    let path = std::env::temp_dir().join("mnemonic-train-toy.ckpt");
    let meta = CheckpointMeta {
        epoch: out.last_epoch,
        best_epoch: out.best_epoch,
        validation_loss: Some(out.best_validation_loss),
        optimizer: "adam".into(),
        learning_rate: cfg.learning_rate,
        clip_norm: cfg.clip_norm,
        dropout: cfg.dropout,
        seed: cfg.seed,
    };
    save_checkpoint(&path, &Checkpoint { params: out.best, meta, vocab: Some(vocab) })?;
    let back = load_checkpoint(&path)?;
    println!("saved {} ({:?}, {:?})", path.display(), back.precision(), back.dims());
    Ok(())
}
