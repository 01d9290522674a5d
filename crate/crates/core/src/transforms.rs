//! Constructors for the measurement operators used in the experiments.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linops::{build_operator, DenseOperator};
use crate::rng::SeededRng;

/// Orthonormal multi-level 2-D Haar transform on a `side x side` image.
///
/// Coefficients use the standard Mallat layout: after each level the
/// approximation occupies the top-left quadrant of the active block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarBasis {
    side: usize,
    levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl HaarBasis {
    /// Full-depth decomposition.
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 || !side.is_power_of_two() {
            return Err(Error::NonPowerOfTwo(side));
        }
        Ok(Self {
            side,
            levels: side.trailing_zeros() as usize,
        })
    }

    pub fn with_levels(side: usize, levels: usize) -> Result<Self> {
        let full = Self::new(side)?;
        if levels > full.levels {
            return Err(Error::BadGeometry(format!(
                "{levels} Haar levels exceed the maximum {} for side {side}",
                full.levels
            )));
        }
        Ok(Self { side, levels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        haar_transform(self, Direction::Forward, x)
    }

    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        haar_transform(self, Direction::Inverse, c)
    }
}

pub fn haar_transform(basis: &HaarBasis, direction: Direction, x: &[f64]) -> Result<Vec<f64>> {
    let side = basis.side;
    if x.len() != side * side {
        return Err(Error::BadLength {
            len: x.len(),
            side,
        });
    }
    let mut img = x.to_vec();
    let mut scratch = vec![0.0; side];
    let sizes: Vec<usize> = (0..basis.levels).map(|l| side >> l).collect();
    match direction {
        Direction::Forward => {
            for &s in &sizes {
                for r in 0..s {
                    analyze(&mut img[r * side..r * side + s], &mut scratch);
                }
                for c in 0..s {
                    strided(&mut img, c, side, s, &mut scratch, analyze);
                }
            }
        }
        Direction::Inverse => {
            for &s in sizes.iter().rev() {
                for c in 0..s {
                    strided(&mut img, c, side, s, &mut scratch, synthesize);
                }
                for r in 0..s {
                    synthesize(&mut img[r * side..r * side + s], &mut scratch);
                }
            }
        }
    }
    Ok(img)
}

fn strided(
    img: &mut [f64],
    col: usize,
    stride: usize,
    len: usize,
    scratch: &mut [f64],
    f: fn(&mut [f64], &mut [f64]),
) {
    let mut column: Vec<f64> = (0..len).map(|r| img[r * stride + col]).collect();
    f(&mut column, scratch);
    for (r, v) in column.into_iter().enumerate() {
        img[r * stride + col] = v;
    }
}

fn analyze(x: &mut [f64], scratch: &mut [f64]) {
    let half = x.len() / 2;
    for i in 0..half {
        scratch[i] = (x[2 * i] + x[2 * i + 1]) * FRAC_1_SQRT_2;
        scratch[half + i] = (x[2 * i] - x[2 * i + 1]) * FRAC_1_SQRT_2;
    }
    x.copy_from_slice(&scratch[..x.len()]);
}

fn synthesize(x: &mut [f64], scratch: &mut [f64]) {
    let half = x.len() / 2;
    for i in 0..half {
        scratch[2 * i] = (x[i] + x[half + i]) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (x[i] - x[half + i]) * FRAC_1_SQRT_2;
    }
    x.copy_from_slice(&scratch[..x.len()]);
}

/// Number of fresh streams tried before giving up on a rank-deficient draw.
const SENSING_RETRIES: u64 = 3;

/// `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
///
/// A rank-deficient draw (probability zero) is retried on the next stream.
pub fn gaussian_sensing(m: usize, n: usize, rng: &SeededRng) -> Result<DenseOperator> {
    if m == 0 || m > n {
        return Err(Error::WideShape { rows: m, cols: n });
    }
    let std = 1.0 / (m as f64).sqrt();
    let mut last = None;
    for attempt in 0..=SENSING_RETRIES {
        let mut draw = rng.fork(rng.stream().wrapping_add(attempt));
        let a = Mat::from_fn(m, n, |_, _| std * draw.normal());
        match DenseOperator::new(a) {
            Ok(op) => return Ok(op),
            Err(e @ Error::RankDeficient { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// The operator mapping Haar coefficients to measurements: `sensing * H^T`.
///
/// The thin SVD is carried over exactly: singular values and left vectors
/// are unchanged and the right vectors are rotated by `H`.
pub fn compose_with_basis(sensing: &DenseOperator, basis: &HaarBasis) -> Result<DenseOperator> {
    let n = sensing.cols();
    if n != basis.len() {
        return Err(Error::DimensionMismatch {
            context: "compose_with_basis",
            expected: basis.len(),
            found: n,
        });
    }
    let a = rotate_rows(sensing.matrix().transpose(), basis)?.transpose().to_owned();
    let v = rotate_rows(sensing.right_vectors(), basis)?;
    Ok(DenseOperator::from_factors(
        a,
        sensing.left_vectors().to_owned(),
        sensing.singular_values().to_vec(),
        v,
        sensing.rank_tol(),
    ))
}

/// Apply the forward transform to every column of an `n x k` matrix.
fn rotate_rows(cols: faer::MatRef<'_, f64>, basis: &HaarBasis) -> Result<Mat<f64>> {
    let mut out = Mat::zeros(cols.nrows(), cols.ncols());
    for j in 0..cols.ncols() {
        let col: Vec<f64> = cols.col(j).iter().copied().collect();
        let t = basis.forward(&col)?;
        for (i, v) in t.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Gaussian blur followed by decimation, as a dense operator.
///
/// The `kernel_size x kernel_size` Gaussian is truncated and renormalized to
/// unit sum. Boundaries use half-sample symmetric reflection. Output pixel
/// `(p, q)` samples the blurred image at `(p*scale, q*scale)`.
pub fn sr_operator(
    side: usize,
    scale: usize,
    kernel_size: usize,
    kernel_sigma: f64,
) -> Result<DenseOperator> {
    let kernel = gaussian_kernel(kernel_size, kernel_sigma)?;
    let radius = kernel_size / 2;
    if scale == 0 || side == 0 || side % scale != 0 {
        return Err(Error::BadGeometry(format!(
            "side {side} is not divisible by scale {scale}"
        )));
    }
    if radius > side {
        return Err(Error::BadGeometry(format!(
            "kernel radius {radius} exceeds image side {side}"
        )));
    }
    let low = side / scale;
    let n = side * side;
    let mut a = Mat::zeros(low * low, n);
    for p in 0..low {
        for q in 0..low {
            let row = p * low + q;
            let (ci, cj) = (p * scale, q * scale);
            for (di, wi) in kernel.iter().enumerate() {
                let ii = reflect(ci as isize + di as isize - radius as isize, side);
                for (dj, wj) in kernel.iter().enumerate() {
                    let jj = reflect(cj as isize + dj as isize - radius as isize, side);
                    a[(row, ii * side + jj)] += wi * wj;
                }
            }
        }
    }
    DenseOperator::new(a)
}

/// Normalized 1-D Gaussian taps; the 2-D kernel is their outer product.
fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::BadGeometry(format!(
            "kernel size must be odd, got {size}"
        )));
    }
    if size == 1 {
        return Ok(vec![1.0]);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::BadGeometry(format!(
            "kernel sigma must be positive, got {sigma}"
        )));
    }
    let r = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

fn reflect(i: isize, side: usize) -> usize {
    let s = side as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= s {
            i = 2 * s - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Rescale every column to unit l2 norm and re-factor.
pub fn column_normalize(op: &DenseOperator) -> Result<DenseOperator> {
    let norms = op.column_norms();
    if let Some(j) = norms.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let a = op.matrix();
    let scaled = Mat::from_fn(op.rows(), op.cols(), |i, j| a[(i, j)] / norms[j]);
    build_operator(scaled, op.rank_tol())
}
