//! Image-quality metrics, SNR-calibrated noise and best-k sparsification.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::vecops::norm2;

/// Default peak value for 8-bit images.
pub const PEAK_8BIT: f64 = 255.0;

/// `10 log10(peak^2 / mse)`; `+inf` for an exact match.
pub fn psnr(x_hat: &[f64], x_ref: &[f64], peak: f64) -> Result<f64> {
    if x_hat.len() != x_ref.len() {
        return Err(Error::DimensionMismatch {
            context: "psnr",
            expected: x_ref.len(),
            found: x_hat.len(),
        });
    }
    if x_ref.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "psnr",
            expected: 1,
            found: 0,
        });
    }
    let sse: f64 = x_hat
        .iter()
        .zip(x_ref)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / x_ref.len() as f64;
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Target SNR in dB (`f64::INFINITY` for noiseless) and the noise stream.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub rng: SeededRng,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, rng: SeededRng) -> Self {
        Self { snr_db, rng }
    }
}

/// `clean + e` with white Gaussian `e` rescaled so that
/// `10 log10(||clean||^2 / ||e||^2)` equals `snr_db`.
pub fn add_noise_for_snr(clean: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    if spec.snr_db == f64::INFINITY {
        return Ok(clean.to_vec());
    }
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::NonFinite("snr_db"));
    }
    let signal = norm2(clean);
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut rng = spec.rng.clone();
    let e = rng.normal_vec(clean.len());
    let target = signal / 10f64.powf(spec.snr_db / 20.0);
    let scale = target / norm2(&e);
    Ok(clean.iter().zip(&e).map(|(c, n)| c + scale * n).collect())
}

/// Keep the `k` largest-magnitude entries; ties go to the lower index.
pub fn sparsify_top_k(coeffs: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = coeffs.len();
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for &i in &order[..k] {
        out[i] = coeffs[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::dist;
    use proptest::prelude::*;

    #[test]
    fn psnr_examples() {
        let x = vec![10.0; 16];
        assert_eq!(psnr(&x, &x, PEAK_8BIT).unwrap(), f64::INFINITY);
        let off: Vec<f64> = x.iter().map(|v| v + 255.0).collect();
        assert!(psnr(&off, &x, PEAK_8BIT).unwrap().abs() < 1e-12);
        let off: Vec<f64> = x.iter().map(|v| v - 25.5).collect();
        assert!((psnr(&off, &x, PEAK_8BIT).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&x[..3], &x, PEAK_8BIT).is_err());
    }

    #[test]
    fn noise_examples() {
        let clean: Vec<f64> = (0..50).map(|i| (i as f64).sin() + 2.0).collect();
        let spec = NoiseSpec::new(f64::INFINITY, SeededRng::new(1, 0));
        assert_eq!(add_noise_for_snr(&clean, &spec).unwrap(), clean);

        let spec = NoiseSpec::new(20.0, SeededRng::new(1, 0));
        let y = add_noise_for_snr(&clean, &spec).unwrap();
        let e = dist(&y, &clean);
        let snr = 10.0 * (norm2(&clean).powi(2) / (e * e)).log10();
        assert!((snr - 20.0).abs() <= 0.01);
        assert_eq!(add_noise_for_snr(&clean, &spec).unwrap(), y);

        let zero = vec![0.0; 5];
        assert!(matches!(add_noise_for_snr(&zero, &spec), Err(Error::ZeroSignal)));
    }

    #[test]
    fn sparsify_examples() {
        let c = [3.0, -5.0, 1.0];
        assert_eq!(sparsify_top_k(&c, 3).unwrap(), c.to_vec());
        assert_eq!(sparsify_top_k(&c, 1).unwrap(), vec![0.0, -5.0, 0.0]);
        assert_eq!(sparsify_top_k(&[2.0, -2.0, 2.0], 2).unwrap(), vec![2.0, -2.0, 0.0]);
        assert!(matches!(sparsify_top_k(&c, 0), Err(Error::BadK { .. })));
        assert!(matches!(sparsify_top_k(&c, 4), Err(Error::BadK { .. })));
    }

    fn best_k_error(x: &[f64], k: usize) -> f64 {
        // exhaustive over supports of size k
        let n = x.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let err: f64 = (0..n)
                .filter(|i| mask & (1 << i) == 0)
                .map(|i| x[i] * x[i])
                .sum();
            best = best.min(err);
        }
        best.sqrt()
    }

    proptest! {
        #[test]
        fn psnr_is_symmetric(a in prop::collection::vec(-300.0..300.0f64, 1..20), shift in 0.1..50.0f64) {
            let b: Vec<f64> = a.iter().map(|v| v + shift).collect();
            prop_assert_eq!(psnr(&a, &b, 255.0).unwrap(), psnr(&b, &a, 255.0).unwrap());
            let c: Vec<f64> = a.iter().map(|v| v + 2.0 * shift).collect();
            prop_assert!(psnr(&c, &a, 255.0).unwrap() < psnr(&b, &a, 255.0).unwrap());
        }

        #[test]
        fn sparsify_is_best_k(x in prop::collection::vec(-10.0..10.0f64, 1..=12), kf in 0.0..1.0f64) {
            let k = 1 + (kf * (x.len() - 1) as f64).round() as usize;
            let out = sparsify_top_k(&x, k).unwrap();
            let nnz_in = x.iter().filter(|v| **v != 0.0).count();
            prop_assert_eq!(out.iter().filter(|v| **v != 0.0).count(), k.min(nnz_in));
            prop_assert!((dist(&x, &out) - best_k_error(&x, k)).abs() <= 1e-12);
        }

        #[test]
        fn snr_is_hit(seed in 0u64..1000, snr in -10.0..60.0f64, len in 2usize..64) {
            let clean: Vec<f64> = SeededRng::new(seed, 1).normal_vec(len);
            let y = add_noise_for_snr(&clean, &NoiseSpec::new(snr, SeededRng::new(seed, 2))).unwrap();
            let e = dist(&y, &clean);
            let got = 10.0 * (norm2(&clean).powi(2) / (e * e)).log10();
            prop_assert!((got - snr).abs() <= 0.01);
        }
    }
}
