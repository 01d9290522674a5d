//! SNR-calibrated noise, PSNR and best-k sparsification.

use bp_invlab::metrics::{add_noise_for_snr, psnr, sparsify_top_k, NoiseSpec, PEAK_8BIT};
use bp_invlab::transforms::HaarBasis;
use bp_invlab::vecops::{dist, norm2};
use bp_invlab::SeededRng;

fn main() -> bp_invlab::Result<()> {
    let clean: Vec<f64> = (0..256).map(|i| 128.0 + 60.0 * (i as f64 / 9.0).sin()).collect();
    for snr in [10.0, 20.0, 40.0] {
        let noisy = add_noise_for_snr(&clean, &NoiseSpec::new(snr, SeededRng::new(0, 3)))?;
        let got = 20.0 * (norm2(&clean) / dist(&noisy, &clean)).log10();
        println!("target SNR {snr} dB: measured {got:.6} dB, PSNR {:.2} dB", psnr(&noisy, &clean, PEAK_8BIT)?);
    }
    let basis = HaarBasis::new(16)?;
    let c = basis.forward(&clean)?;
    for k in [8, 32, 128] {
        let approx = basis.inverse(&sparsify_top_k(&c, k)?)?;
        println!("best {k:>3}-term Haar approximation: PSNR {:.2} dB", psnr(&approx, &clean, PEAK_8BIT)?);
    }
    Ok(())
}
