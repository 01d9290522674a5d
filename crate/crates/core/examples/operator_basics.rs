//! Build a dense operator and use its pseudoinverse and projectors.

use bp_invlab::linops::ApplyMode;
use bp_invlab::transforms::gaussian_sensing;
use bp_invlab::vecops::{add, dist, norm2};
use bp_invlab::SeededRng;

fn main() -> bp_invlab::Result<()> {
    let op = gaussian_sensing(64, 128, &SeededRng::new(7, 1))?;
    let s = op.spectral_summary();
    println!(
        "64x128 Gaussian: sigma_max(AA^T) = {:.3}, sigma_min = {:.3}, ratio = {:.4}",
        s.sigma_max, s.sigma_min, s.condition_ratio
    );

    let v = SeededRng::new(7, 2).normal_vec(128);
    let p = op.apply(ApplyMode::RowProject, &v)?;
    let q = op.apply(ApplyMode::NullProject, &v)?;
    println!("||P v + Q v - v|| = {:.2e}", dist(&add(&p, &q), &v));
    println!("||A Q v|| / ||v|| = {:.2e}", norm2(&op.forward(&q)?) / norm2(&v));

    let r = SeededRng::new(7, 3).normal_vec(64);
    let back = op.forward(&op.pinv(&r)?)?;
    println!("||A A^+ r - r|| / ||r|| = {:.2e}", dist(&back, &r) / norm2(&r));
    Ok(())
}
