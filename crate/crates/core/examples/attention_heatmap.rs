//! Attention weights as a text heat map and as the tab-separated grid
//! format. Models trained on enough sentences learn to look at the password
//! character that the next word has to start with.

use mnemonic::beam::export_attention;
use mnemonic::corpus::{build_vocabularies, ingest, IngestConfig, EOS};
use mnemonic::synthetic::synthetic_corpus;
use mnemonic::trainer::{train, TrainConfig};

const SHADES: [char; 5] = [' ', '.', ':', '*', '#'];

fn main() -> anyhow::Result<()> {
    let lines = synthetic_corpus(2000, 8);
    let (pairs, _) = ingest(lines.iter().map(String::as_str), &IngestConfig::default())?;
    let vocab = build_vocabularies(&pairs)?;
    let (examples, _) = vocab.encode_all(&pairs[1..]);
    let cfg = TrainConfig {
        hidden: 32,
        embed: 32,
        attn: 32,
        maxout: 32,
        batch_size: 16,
        learning_rate: 5e-3,
        max_epochs: 14,
        ..TrainConfig::default()
    };
    let params = train::<f32>(&examples, &[], vocab.chars.len(), vocab.words.len(), &cfg)?.best;

    // a sentence the model never saw
    let pair = &pairs[0];
    let mut tokens = pair.tokens.clone();
    tokens.push(EOS.to_string());
    let grid = export_attention(&pair.password, &tokens, &params, &vocab)?;

    let header: String = grid.source.iter().collect();
    println!("{:>12} {header}", "");
    for (i, tok) in grid.tokens.iter().enumerate() {
        let row: String = (0..grid.source.len())
            .map(|j| SHADES[((grid.alpha.get(j, i) * SHADES.len() as f64) as usize).min(SHADES.len() - 1)])
            .collect();
        println!("{tok:>12} {row}");
    }
    println!("argmax per token: {:?}\n", grid.argmax_rows());
    print!("{}", grid.to_grid_text());
    Ok(())
}
