//! Mnemonic proportion and corpus BLEU on hand-made examples.

use mnemonic::metrics::{bleu, mnemonic_proportion_single, BeamScores, EvalReport};

fn words(s: &str) -> Vec<String> {
    s.split(' ').map(str::to_string).collect()
}

fn main() -> anyhow::Result<()> {
    let mp = mnemonic_proportion_single("Yms,bto.", &words("you might say , but the other ."))?;
    println!("MP(Yms,bto.) = {:.0}%", mp * 100.0);
    let mp = mnemonic_proportion_single("Tfi.", &words("the cat is here"))?;
    println!("MP(Tfi.) = {:.0}%", mp * 100.0);

    let b = bleu(&[words("the the the")], &[words("the cat sat")], 1)?;
    println!("BLEU-1(the the the | the cat sat) = {:.2}", b.scores[0]);

    let refs = vec![words("the cat sat on the mat ."), words("a dog ran past the barn .")];
    let cands = vec![words("the cat sat on a mat ."), words("a dog ran .")];
    let b = bleu(&cands, &refs, 4)?;
    println!("BLEU-1..4 {:?}, brevity penalty {:.3}", b.scores, b.brevity_penalty);

    let passwords = ["Tcsotm.", "Adrptb."];
    let report = EvalReport {
        system: "example".into(),
        examples: 2,
        skipped: 0,
        beams: vec![BeamScores::compute(1, &passwords, &cands, &refs)?],
    };
    print!("\n{}", report.format());
    Ok(())
}
