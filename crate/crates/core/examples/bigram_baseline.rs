//! The first-letter constrained bigram baseline, including its dead ends.

use mnemonic::bigram::{fit_bigram, fit_bigram_pairs, generate_constrained, generate_constrained_ranked};
use mnemonic::corpus::{ingest, IngestConfig};
use mnemonic::synthetic::synthetic_corpus;

fn main() -> anyhow::Result<()> {
    let toy: Vec<Vec<&str>> = ["<s> the cat sat . </s>", "<s> the dog ran . </s>"]
        .iter()
        .map(|s| s.split(' ').collect())
        .collect();
    let m = fit_bigram(&toy)?;
    println!("P(the|<s>) = {}, P(cat|the) = {}", m.probability("<s>", "the"), m.probability("the", "cat"));
    for pw in ["tcs.", "tdr.", "tx."] {
        println!("{pw:<6} -> {}", generate_constrained(pw, &m, 1).join(" "));
    }

    let lines = synthetic_corpus(2000, 5);
    let (pairs, _) = ingest(lines.iter().map(String::as_str), &IngestConfig::default())?;
    let model = fit_bigram_pairs(&pairs)?;
    println!("\nfitted on {} sentences", pairs.len());
    for pw in ["Tbcsotm.", "Iwtsbtl,akmf.", "Zqxvvq."] {
        for b in [1, 5] {
            let best = &generate_constrained_ranked(pw, &model, b)[0];
            println!("{pw:<14} b={b} {:>8.2}  {}", best.score, best.tokens.join(" "));
        }
    }
    Ok(())
}
