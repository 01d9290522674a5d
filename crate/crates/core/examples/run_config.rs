//! Run an experiment config from code and summarize the final PSNRs.
//!
//! `cargo run --example run_config -- configs/cs_pgd_sweep_r.toml`

use std::collections::BTreeMap;
use std::path::PathBuf;

use bp_invlab::bench::{run_experiment, ExperimentConfig};

fn main() -> bp_invlab::Result<()> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "configs/cs_pgd_sweep_r.toml".into())
        .into();
    let cfg = ExperimentConfig::load(&path)?;
    let report = run_experiment(&cfg)?;
    println!("{} rows, {} failed cells", report.table.len(), report.failures.len());

    let last = report.table.rows.iter().map(|r| r.iteration).max().unwrap_or(0);
    let mut finals: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in report.table.rows.iter().filter(|r| r.iteration == last) {
        if let Some(p) = r.psnr_gt {
            let key = (r.solver.clone(), r.fidelity.to_string(), format!("{}", r.param));
            finals.entry(key).or_default().push(p);
        }
    }
    for ((solver, fidelity, param), v) in finals {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        println!("{solver:>6} {fidelity} param {param:>6}: mean final PSNR {mean:.2} dB");
    }
    Ok(())
}
