//! Finite-difference check of every parameter tensor in the model.

use mnemonic::trainer::{gradient_check_dims, gradient_check_model};

fn main() -> anyhow::Result<()> {
    let dims = gradient_check_dims();
    println!("{dims:?}");
    let reports = gradient_check_model(dims, 0)?;
    for r in &reports {
        println!("{:<26} {:.2e} {}", r.name, r.max_relative_error, if r.passed { "ok" } else { "FAIL" });
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} tensors, {failed} failed", reports.len());
    Ok(())
}
