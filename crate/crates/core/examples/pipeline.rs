//! The full command-line pipeline driven from code: prepare, train,
//! generate, evaluate both systems and compare, then rerun from a manifest.

use std::fs;

use mnemonic::numerics::Precision;
use mnemonic::pipeline::{
    self, CompareConfig, EvaluateConfig, GenerateConfig, PrepareConfig, Stage, SystemSpec, TrainStage,
};
use mnemonic::synthetic::synthetic_corpus;
use mnemonic::trainer::TrainConfig;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    fs::write(d.join("corpus.txt"), synthetic_corpus(3000, 2).join("\n"))?;
    let data = d.join("data");
    let ckpt = d.join("model.ckpt");

    let stages = [
        Stage::Prepare(PrepareConfig::new(d.join("corpus.txt"), &data)),
        Stage::Train(TrainStage {
            data: data.clone(),
            checkpoint: ckpt.clone(),
            precision: Precision::F32,
            resume: None,
            config: TrainConfig {
                hidden: 32,
                embed: 32,
                attn: 32,
                maxout: 32,
                batch_size: 16,
                learning_rate: 5e-3,
                max_epochs: 14,
                ..pipeline::default_train_config()
            },
        }),
        Stage::Generate(GenerateConfig {
            checkpoint: ckpt.clone(),
            password: Some("Tbcsotm.".into()),
            passwords: None,
            beam: 5,
            restore_case: true,
            attention: None,
            out: None,
        }),
        Stage::Evaluate(EvaluateConfig {
            test: data.join(pipeline::TEST_PAIRS),
            system: SystemSpec::Neural { checkpoint: ckpt.clone() },
            beams: vec![1, 5],
            out: d.join("neural.report"),
        }),
        Stage::Evaluate(EvaluateConfig {
            test: data.join(pipeline::TEST_PAIRS),
            system: SystemSpec::Bigram { model: data.join(pipeline::BIGRAM_FILE) },
            beams: vec![1, 5],
            out: d.join("bigram.report"),
        }),
        Stage::Compare(CompareConfig {
            neural: d.join("neural.report"),
            baseline: d.join("bigram.report"),
            out: None,
        }),
    ];
    for stage in &stages {
        let out = pipeline::run_stage(stage)?;
        print!("{}", out.stdout);
        for p in &out.problems {
            println!("problem: {p}");
        }
    }

    let manifest = data.join(pipeline::PREPARE_MANIFEST);
    let before = fs::read(data.join(pipeline::TRAIN_PAIRS))?;
    pipeline::rerun(&manifest)?;
    println!(
        "\nrerun from {}: train pairs identical = {}",
        manifest.display(),
        before == fs::read(data.join(pipeline::TRAIN_PAIRS))?
    );
    Ok(())
}
