//! Signal generators and problem builders shared by the runner and the
//! acceptance suite.

use std::sync::Arc;

use crate::error::Result;
use crate::linops::DenseOperator;
use crate::metrics::{add_noise_for_snr, NoiseSpec, PEAK_8BIT};
use crate::rng::SeededRng;
use crate::solvers::IterateTrace;
use crate::transforms::{compose_with_basis, gaussian_sensing, HaarBasis};

/// Stream ids under a run seed.
pub const STREAM_SENSING: u64 = 1;
pub const STREAM_SIGNAL: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_SUPPORTS: u64 = 4;

/// `k` nonzeros on a uniform support with normal amplitudes, scaled so the
/// largest magnitude equals `peak`.
pub fn synthetic_sparse(n: usize, k: usize, peak: f64, rng: &mut SeededRng) -> Vec<f64> {
    let support = rng.subset(n, k);
    let mut x = vec![0.0; n];
    for j in support {
        x[j] = rng.normal();
    }
    scale_to_peak(&mut x, peak);
    x
}

/// A compressible signal: magnitudes `peak * rank^-decay` in a random order
/// with random signs.
pub fn synthetic_power(n: usize, decay: f64, peak: f64, rng: &mut SeededRng) -> Vec<f64> {
    let keys: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut x = vec![0.0; n];
    for (rank, &j) in order.iter().enumerate() {
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        x[j] = sign * peak * ((rank + 1) as f64).powf(-decay);
    }
    x
}

fn scale_to_peak(x: &mut [f64], peak: f64) {
    let top = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if top > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / top);
    }
}

/// Gaussian sensing composed with the Haar synthesis on a `side x side` grid.
pub fn cs_operator(side: usize, m: usize, seed: u64) -> Result<DenseOperator> {
    let basis = HaarBasis::new(side)?;
    let phi = gaussian_sensing(m, side * side, &SeededRng::new(seed, STREAM_SENSING))?;
    compose_with_basis(&phi, &basis)
}

/// `A x_gt`, plus white noise at `snr_db` unless it is infinite.
pub fn observe(op: &DenseOperator, x_gt: &[f64], snr_db: f64, noise: &SeededRng) -> Result<Vec<f64>> {
    let clean = op.forward(x_gt)?;
    add_noise_for_snr(&clean, &NoiseSpec::new(snr_db, noise.clone()))
}

/// One measurement instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub seed: u64,
    pub image: String,
    pub ratio: f64,
    pub op: Arc<DenseOperator>,
    pub x_gt: Vec<f64>,
    pub y: Vec<f64>,
}

/// Gaussian CS instance with a synthetic `k`-sparse Haar signal at peak 255.
pub fn sparse_cs_problem(side: usize, m: usize, k: usize, snr_db: f64, seed: u64) -> Result<Problem> {
    let n = side * side;
    let op = Arc::new(cs_operator(side, m, seed)?);
    let x_gt = synthetic_sparse(n, k, PEAK_8BIT, &mut SeededRng::new(seed, STREAM_SIGNAL));
    let y = observe(&op, &x_gt, snr_db, &SeededRng::new(seed, STREAM_NOISE))?;
    Ok(Problem {
        seed,
        image: "synthetic".into(),
        ratio: m as f64 / n as f64,
        op,
        x_gt,
        y,
    })
}

/// First recorded iteration whose PSNR against `x_gt` reaches `threshold`.
pub fn iterations_to_psnr(trace: &IterateTrace, threshold: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.psnr_gt.is_some_and(|p| p >= threshold))
        .map(|r| r.iteration)
}

/// First recorded iteration with `||x_t - x_gt|| <= tol * ||x_gt||`.
pub fn iterations_to_relative_error(trace: &IterateTrace, x_gt_norm: f64, tol: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.dist_gt.is_some_and(|d| d <= tol * x_gt_norm))
        .map(|r| r.iteration)
}

/// Iterations-to-threshold for a pair of traces.
///
/// The threshold is 1 dB below the lower of the two final PSNRs, so both
/// traces are guaranteed to cross it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdHits {
    pub threshold: f64,
    pub first: usize,
    pub second: usize,
}

impl ThresholdHits {
    pub fn gap(&self) -> i64 {
        self.first as i64 - self.second as i64
    }
}

pub fn threshold_hits(first: &IterateTrace, second: &IterateTrace) -> Option<ThresholdHits> {
    let fin = |t: &IterateTrace| t.last().and_then(|r| r.psnr_gt);
    let threshold = fin(first)?.min(fin(second)?) - 1.0;
    Some(ThresholdHits {
        threshold,
        first: iterations_to_psnr(first, threshold)?,
        second: iterations_to_psnr(second, threshold)?,
    })
}
