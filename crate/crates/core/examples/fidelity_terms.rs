//! Compare the least-squares and back-projection data terms on one problem.

use std::sync::Arc;

use bp_invlab::transforms::gaussian_sensing;
use bp_invlab::vecops::norm2;
use bp_invlab::{FidelityKind, FidelityTerm, SeededRng};

fn main() -> bp_invlab::Result<()> {
    let op = Arc::new(gaussian_sensing(30, 80, &SeededRng::new(3, 1))?);
    let y = SeededRng::new(3, 2).normal_vec(30);
    let x = SeededRng::new(3, 3).normal_vec(80);
    for kind in FidelityKind::BOTH {
        let f = FidelityTerm::new(kind, Arc::clone(&op), y.clone())?;
        println!(
            "{kind}: value {:.4}, ||grad|| {:.4}, default step {:.4}",
            f.value(&x)?,
            norm2(&f.gradient(&x)?),
            f.default_step_size()
        );
    }
    Ok(())
}
