//! Properties of a small model trained to memorize its corpus.

mod common;

use std::fs;
use std::process::Command;

use mnemonic::beam::export_attention;
use mnemonic::bigram::fit_bigram_pairs;
use mnemonic::checkpoint::{save_checkpoint, Checkpoint, CheckpointMeta};
use mnemonic::corpus::{write_pairs, EOS};
use mnemonic::metrics::{compare, EvalReport};
use mnemonic::pipeline::{evaluate_bigram, evaluate_neural};
use mnemonic::trainer::TrainConfig;

#[test]
fn memorized_toy_model() {
    // Below roughly a thousand pairs the model can memorize through its
    // recurrent state alone and attention stays unfocused.
    let cfg = TrainConfig {
        max_epochs: 60,
        stop_below: Some(0.1),
        ..common::memorize_config(64)
    };
    let m = common::memorize(1000, 11, &cfg);
    assert!(m.final_loss < 0.15, "loss {}", m.final_loss);

    // attention follows the password left to right
    let (mut rising, mut total) = (0, 0);
    for p in &m.pairs {
        let mut tokens = p.tokens.clone();
        tokens.push(EOS.to_string());
        let grid = export_attention(&p.password, &tokens, &m.params, &m.vocab).unwrap();
        let argmax = grid.argmax_rows();
        for w in argmax[..p.tokens.len()].windows(2) {
            total += 1;
            rising += usize::from(w[1] >= w[0]);
        }
    }
    assert!(rising * 100 >= total * 80, "{rising}/{total} adjacent argmax pairs non-decreasing");

    // the CLI reproduces a training sentence from its password
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("toy.ckpt");
    let meta = CheckpointMeta {
        optimizer: "adam".into(),
        ..CheckpointMeta::default()
    };
    save_checkpoint(
        &ckpt,
        &Checkpoint {
            params: m.params.clone(),
            meta,
            vocab: Some(m.vocab.clone()),
        },
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mnemonic"))
        .args(["generate", "--checkpoint", ckpt.to_str().unwrap(), "--password", &m.pairs[0].password])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), m.pairs[0].tokens.join(" "));

    // training-set evaluation through the CLI
    let train = dir.path().join("train.pairs");
    write_pairs(&train, &m.pairs).unwrap();
    let report = dir.path().join("train.report");
    let status = Command::new(env!("CARGO_BIN_EXE_mnemonic"))
        .args(["evaluate", "--test", train.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()])
        .args(["--beam", "1", "--out", report.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let r = EvalReport::parse(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.beams[0].mp >= 95.0, "MP {}", r.beams[0].mp);

    // on held-out sentences the bigram model dead-ends while the neural one
    // still spells the password
    let held_out: Vec<_> = {
        let lines = mnemonic::synthetic::synthetic_corpus(400, 99);
        let (pairs, _) = mnemonic::corpus::ingest(lines.iter().map(String::as_str), &Default::default()).unwrap();
        pairs
            .into_iter()
            .filter(|p| m.vocab.chars.encode(&p.password).is_ok())
            .take(40)
            .collect()
    };
    assert!(held_out.len() >= 20);
    let neural = evaluate_neural(&held_out, &m.params, &m.vocab, &[1]).unwrap();
    let bigram = evaluate_bigram(&held_out, &fit_bigram_pairs(&m.pairs).unwrap(), &[1]).unwrap();
    let cmp = compare(&neural, &bigram).unwrap();
    let mp_delta = cmp.rows.iter().find(|r| r.0 == "b1.MP").unwrap().3;
    assert!(mp_delta > 0.0, "{}", cmp.format());
}
