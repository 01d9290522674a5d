//! Haar basis, Gaussian CS in the Haar domain, and the super-resolution operator.

use bp_invlab::transforms::{compose_with_basis, gaussian_sensing, sr_operator, HaarBasis};
use bp_invlab::vecops::norm2;
use bp_invlab::SeededRng;

fn main() -> bp_invlab::Result<()> {
    let basis = HaarBasis::new(32)?;
    let img: Vec<f64> = (0..1024).map(|i| ((i % 32) as f64).sin() * 100.0 + 128.0).collect();
    let c = basis.forward(&img)?;
    println!("Haar: ||x|| = {:.6}, ||Hx|| = {:.6}", norm2(&img), norm2(&c));

    for ratio in [0.1f64, 0.3, 0.5] {
        let m = (ratio * 1024.0) as usize;
        let phi = gaussian_sensing(m, 1024, &SeededRng::new(0, 1))?;
        let a = compose_with_basis(&phi, &basis)?;
        let mp = ((1.0 - ratio.sqrt()) / (1.0 + ratio.sqrt())).powi(2);
        println!(
            "CS m/n = {ratio}: condition ratio {:.4} (Marchenko-Pastur {mp:.4})",
            a.spectral_summary().condition_ratio
        );
    }

    let sr = sr_operator(24, 3, 7, 1.6)?;
    println!(
        "SR 24x24 -> 8x8, 7x7 Gaussian sigma 1.6: condition ratio {:.4}",
        sr.spectral_summary().condition_ratio
    );
    Ok(())
}
