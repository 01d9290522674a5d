//! PGD with an l1-ball prior: iterations needed by LS and BP on noiseless CS.

use std::sync::Arc;

use bp_invlab::bench::protocols::{iterations_to_relative_error, sparse_cs_problem};
use bp_invlab::rate_lab::empirical_rate;
use bp_invlab::solvers::{pgd, Reference, SolverConfig};
use bp_invlab::vecops::{norm1, norm2};
use bp_invlab::{FidelityKind, FidelityTerm, Prior};

fn main() -> bp_invlab::Result<()> {
    let p = sparse_cs_problem(32, 512, 50, f64::INFINITY, 0)?;
    let prior = Prior::l1_ball(norm1(&p.x_gt))?;
    for kind in FidelityKind::BOTH {
        let f = FidelityTerm::new(kind, Arc::clone(&p.op), p.y.clone())?;
        let cfg = SolverConfig::new(2000).with_ground_truth(p.x_gt.clone());
        let (_, trace) = pgd(&f, &prior, &cfg)?;
        let hit = iterations_to_relative_error(&trace, norm2(&p.x_gt), 1e-6);
        let window = hit.map(|t| (0, t));
        let fit = empirical_rate(&trace, Reference::GroundTruth, window)?;
        println!(
            "{kind}: relative error 1e-6 after {hit:?} iterations, fitted rate {:.4} (r2 {:.4})",
            fit.factor(),
            fit.r2
        );
    }
    Ok(())
}
