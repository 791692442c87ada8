//! Greedy and beam-search generation from a memorized toy model, with case
//! restoration for display.

use mnemonic::beam::{beam_search, restore_case, BeamConfig};
use mnemonic::corpus::{build_vocabularies, ingest, IngestConfig};
use mnemonic::synthetic::synthetic_corpus;
use mnemonic::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let lines = synthetic_corpus(40, 3);
    let (pairs, _) = ingest(lines.iter().map(String::as_str), &IngestConfig::default())?;
    let vocab = build_vocabularies(&pairs)?;
    let (examples, _) = vocab.encode_all(&pairs);
    let cfg = TrainConfig {
        hidden: 32,
        embed: 32,
        attn: 32,
        maxout: 32,
        dropout: 0.0,
        batch_size: 8,
        learning_rate: 3e-3,
        max_epochs: 80,
        patience: 80,
        stop_below: Some(0.05),
        ..TrainConfig::default()
    };
    let out = train::<f32>(&examples, &examples, vocab.chars.len(), vocab.words.len(), &cfg)?;
    println!("trained to validation loss {:.4}\n", out.best_validation_loss);

    for p in pairs.iter().take(3) {
        println!("password {}", p.password);
        for width in [1, 5] {
            let cfg = BeamConfig { candidates: 3, ..BeamConfig::new(width) };
            for (rank, h) in beam_search(&p.password, &out.best, &vocab, &cfg)?.iter().enumerate() {
                let words = vocab.words.decode(h.words());
                println!("  b={width} #{rank} {:>8.3}  {}", h.log_prob, restore_case(&p.password, &words));
            }
        }
    }
    Ok(())
}
