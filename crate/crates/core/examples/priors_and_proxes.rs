//! The priors: l1-ball projection, soft thresholding and the Tikhonov prox.

use std::sync::Arc;

use bp_invlab::priors::{contraction_delta, project_l1_ball, soft_threshold};
use bp_invlab::transforms::gaussian_sensing;
use bp_invlab::vecops::norm1;
use bp_invlab::{Prior, SeededRng};
use faer::Mat;

fn main() -> bp_invlab::Result<()> {
    let v = vec![3.0, -1.0, 0.5, -4.0, 2.0];
    let p = project_l1_ball(&v, 5.0)?;
    println!("project {v:?} onto ||x||_1 <= 5: {p:?} (norm {})", norm1(&p));
    println!("soft threshold at 1: {:?}", soft_threshold(&v, 1.0)?);

    let op = Arc::new(gaussian_sensing(20, 40, &SeededRng::new(1, 1))?);
    for beta in [0.1, 1.0, 10.0] {
        let prior = Prior::tikhonov(beta, Mat::identity(40, 40))?;
        println!("Tikhonov beta = {beta}: delta = {:.4}", contraction_delta(&prior, &op)?);
    }
    Ok(())
}
