//! Sentence corpus to training pairs: tokenize, derive passwords, filter by
//! length, split and build vocabularies.

use mnemonic::corpus::{build_vocabularies, derive_password, ingest, make_split, tokenize, IngestConfig};
use mnemonic::synthetic::synthetic_corpus;

fn main() -> anyhow::Result<()> {
    for sentence in ["Oh, yes, something like that.", "Does this mean the book has sold 7 copies in 24 hours?"] {
        let tokens = tokenize(sentence)?;
        println!("{sentence}\n  tokens   {:?}\n  password {}", tokens.tokens, derive_password(&tokens));
    }

    let mut lines = synthetic_corpus(1000, 42);
    lines.push("Too short.".into());
    lines.push(String::new());
    let (pairs, stats) = ingest(lines.iter().map(String::as_str), &IngestConfig::default())?;
    println!("\n{stats:?}");

    let split = make_split(pairs, 0, 0.9, 0.2)?;
    println!(
        "train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    let vocab = build_vocabularies(&split.train)?;
    println!("{} characters, {} words", vocab.chars.len(), vocab.words.len());
    for p in split.train.iter().take(3) {
        println!("  {:<16} {}", p.password, p.tokens.join(" "));
    }
    Ok(())
}
