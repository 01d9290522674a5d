//! ISTA, l1-IDBP and untrained ALISTA on unit-column Gaussian CS.

use std::sync::Arc;

use bp_invlab::bench::protocols::{cs_operator, observe, synthetic_sparse};
use bp_invlab::solvers::{
    alista_run, alista_weights, proximal_gradient, InitPolicy, IterateTrace, SolverConfig,
    ThetaSchedule,
};
use bp_invlab::transforms::column_normalize;
use bp_invlab::{FidelityKind, FidelityTerm, Prior, SeededRng};

fn psnr_at(trace: &IterateTrace, t: usize) -> f64 {
    trace.records[t].psnr_gt.unwrap_or(f64::NAN)
}

fn main() -> bp_invlab::Result<()> {
    let beta = 4.64;
    let op = Arc::new(column_normalize(&cs_operator(32, 512, 1)?)?);
    let x_gt = synthetic_sparse(1024, 50, 255.0, &mut SeededRng::new(1, 2));
    let y = observe(&op, &x_gt, 20.0, &SeededRng::new(1, 3))?;
    let cfg = SolverConfig::new(300)
        .with_x0(InitPolicy::PinvOfY)
        .with_ground_truth(x_gt);
    let l1 = Prior::soft_threshold(beta)?;
    let ls = FidelityTerm::new(FidelityKind::Ls, Arc::clone(&op), y)?;
    let bp = ls.with_kind(FidelityKind::Bp);
    let (_, ista) = proximal_gradient(&ls, &l1, beta, &cfg)?;
    let (_, idbp) = proximal_gradient(&bp, &l1, beta, &cfg)?;
    let weights = alista_weights(&op)?;
    let (_, alista) = alista_run(&bp, &weights, &ThetaSchedule::Constant(beta), 1.0, &cfg)?;
    println!("iteration      ISTA      IDBP    ALISTA   (PSNR dB)");
    for t in [0, 5, 10, 20, 50, 100, 300] {
        println!(
            "{t:>9} {:>9.2} {:>9.2} {:>9.2}",
            psnr_at(&ista, t),
            psnr_at(&idbp, t),
            psnr_at(&alista, t)
        );
    }
    Ok(())
}
