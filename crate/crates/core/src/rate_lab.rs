//! Convergence-rate estimators.
//!
//! Restricted rates are estimated over random `k`-column supports `S`:
//!
//! * LS: `1 - min_S sigma_min(A_S^T A_S) / sigma_max(A A^T)`
//! * BP: `1 - min_S sigma_min(A_S^T (A A^T)^{-1} A_S)`
//!
//! With `A = U diag(s) V^T`, `A_S^T (A A^T)^{-1} A_S = V_S V_S^T` where `V_S`
//! holds the rows of `V` indexed by `S`, so the BP term is the squared
//! smallest singular value of a `k x m` block of `V`.

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fidelity::{FidelityKind, FidelityTerm};
use crate::linops::DenseOperator;
use crate::rng::SeededRng;
use crate::solvers::{IterateTrace, Reference};
use crate::vecops::{dot, norm2};

/// Support count used when none is given.
pub const DEFAULT_NUM_SUPPORTS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub p_ls_hat: f64,
    pub p_bp_hat: f64,
    /// `p_bp_hat / p_ls_hat`; 1 when both vanish.
    pub ratio: f64,
    pub k: usize,
    pub num_supports: usize,
    pub seed: u64,
    pub stream: u64,
}

/// Per-support restricted eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSample {
    pub support: Vec<usize>,
    /// `sigma_min(A_S^T A_S) / sigma_max(A A^T)`.
    pub ls_term: f64,
    /// `sigma_min(A_S^T (A A^T)^{-1} A_S)`.
    pub bp_term: f64,
}

impl SupportSample {
    pub fn ls_rate(&self) -> f64 {
        1.0 - self.ls_term
    }

    pub fn bp_rate(&self) -> f64 {
        1.0 - self.bp_term
    }
}

/// Uniform `k`-sparse supports over `n` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparseCone {
    pub k: usize,
}

impl SparseCone {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    /// `count` supports; support `i` is drawn from its own derived stream,
    /// so a longer list always extends a shorter one.
    pub fn supports(&self, n: usize, count: usize, rng: &SeededRng) -> Result<Vec<Vec<usize>>> {
        if self.k == 0 || self.k > n {
            return Err(Error::BadSupportSize { k: self.k, max: n });
        }
        Ok((0..count)
            .map(|i| support_stream(rng, i).subset(n, self.k))
            .collect())
    }
}

fn support_stream(rng: &SeededRng, i: usize) -> SeededRng {
    rng.fork((rng.stream() << 32).wrapping_add(i as u64))
}

/// Convexity of the regularizer, which sets the constant in the PGD bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexityClass {
    Convex,
    NonConvex,
}

impl ConvexityClass {
    pub fn kappa(self) -> f64 {
        match self {
            ConvexityClass::Convex => 1.0,
            ConvexityClass::NonConvex => 2.0,
        }
    }
}

/// `kappa (rho d + mu xi)`: the one-step bound on `||x_{t+1} - x_*||` given
/// `d = ||x_t - x_*||`.
pub fn pgd_step_bound(class: ConvexityClass, rho: f64, xi: f64, mu: f64, d: f64) -> f64 {
    class.kappa() * (rho * d + mu * xi)
}

fn smallest_singular_squared(m: Mat<f64>) -> Result<f64> {
    let s = m
        .singular_values()
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    Ok(s.iter().fold(f64::INFINITY, |a, b| a.min(*b)).powi(2))
}

/// Restricted eigenvalues of one support.
pub fn evaluate_support(op: &DenseOperator, support: &[usize]) -> Result<SupportSample> {
    let (m, n) = (op.rows(), op.cols());
    if support.is_empty() || support.len() > m {
        return Err(Error::BadSupportSize {
            k: support.len(),
            max: m,
        });
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= n) {
        return Err(Error::DimensionMismatch {
            context: "support index",
            expected: n,
            found: bad,
        });
    }
    let a = op.matrix();
    let v = op.right_vectors();
    let sub_a = Mat::from_fn(m, support.len(), |i, j| a[(i, support[j])]);
    let sub_v = Mat::from_fn(support.len(), m, |i, j| v[(support[i], j)]);
    let sigma_max = op.spectral_summary().sigma_max;
    Ok(SupportSample {
        support: support.to_vec(),
        ls_term: smallest_singular_squared(sub_a)? / sigma_max,
        bp_term: smallest_singular_squared(sub_v)?,
    })
}

/// Evaluates every support in parallel; the order of the result matches `supports`.
pub fn evaluate_supports(op: &DenseOperator, supports: &[Vec<usize>]) -> Result<Vec<SupportSample>> {
    supports
        .par_iter()
        .map(|s| evaluate_support(op, s))
        .collect()
}

/// `(p_ls_hat, p_bp_hat)` from already evaluated samples.
pub fn rates_from_samples(samples: &[SupportSample]) -> (f64, f64) {
    let ls = samples.iter().fold(f64::INFINITY, |a, s| a.min(s.ls_term));
    let bp = samples.iter().fold(f64::INFINITY, |a, s| a.min(s.bp_term));
    (
        (1.0 - ls).clamp(0.0, 1.0),
        (1.0 - bp).clamp(0.0, 1.0),
    )
}

/// Monte Carlo estimate of the restricted LS and BP rates.
pub fn estimate_restricted_rates(
    op: &DenseOperator,
    k: usize,
    num_supports: usize,
    rng: &SeededRng,
) -> Result<RateEstimate> {
    Ok(estimate_with_samples(op, k, num_supports, rng)?.0)
}

/// Like [`estimate_restricted_rates`], also returning the per-support samples.
pub fn estimate_with_samples(
    op: &DenseOperator,
    k: usize,
    num_supports: usize,
    rng: &SeededRng,
) -> Result<(RateEstimate, Vec<SupportSample>)> {
    if k == 0 || k > op.rows() {
        return Err(Error::BadSupportSize { k, max: op.rows() });
    }
    if num_supports == 0 {
        return Err(Error::BadConfig("num_supports must be at least 1".into()));
    }
    let supports = SparseCone::new(k).supports(op.cols(), num_supports, rng)?;
    let samples = evaluate_supports(op, &supports)?;
    let (p_ls_hat, p_bp_hat) = rates_from_samples(&samples);
    let ratio = if p_ls_hat == 0.0 { 1.0 } else { p_bp_hat / p_ls_hat };
    Ok((
        RateEstimate {
            p_ls_hat,
            p_bp_hat,
            ratio,
            k,
            num_supports,
            seed: rng.seed(),
            stream: rng.stream(),
        },
        samples,
    ))
}

/// `u^T (I - mu W A) v` with the default step of `kind`.
pub fn pair_value(op: &DenseOperator, kind: FidelityKind, u: &[f64], v: &[f64]) -> Result<f64> {
    let uv = dot(u, v);
    match kind {
        FidelityKind::Ls => {
            let mu = 1.0 / op.spectral_summary().sigma_max;
            Ok(uv - mu * dot(&op.forward(u)?, &op.forward(v)?))
        }
        FidelityKind::Bp => {
            let vt = op.right_vectors().transpose();
            let pu = crate::linops::matvec(vt, u);
            let pv = crate::linops::matvec(vt, v);
            Ok(uv - dot(&pu, &pv))
        }
    }
}

fn unit_on_support(n: usize, support: &[usize], rng: &mut SeededRng) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let vals = rng.normal_vec(support.len());
    let nrm = norm2(&vals);
    for (&j, v) in support.iter().zip(vals) {
        out[j] = v / nrm;
    }
    out
}

/// Sampled maximum of `u^T (I - mu W A) v` over unit pairs sharing a support.
///
/// Pair `i` uses support `i mod len(supports)`; the result is a lower bound on
/// the cone quantity and, support by support, never exceeds the matching
/// restricted rate.
pub fn monte_carlo_rho_on_supports(
    op: &DenseOperator,
    kind: FidelityKind,
    supports: &[Vec<usize>],
    num_pairs: usize,
    rng: &SeededRng,
) -> Result<f64> {
    if supports.is_empty() || num_pairs == 0 {
        return Err(Error::BadConfig("need at least one support and one pair".into()));
    }
    let n = op.cols();
    let values: Result<Vec<f64>> = (0..num_pairs)
        .into_par_iter()
        .map(|i| {
            let support = &supports[i % supports.len()];
            let mut r = support_stream(rng, i);
            let u = unit_on_support(n, support, &mut r);
            let v = unit_on_support(n, support, &mut r);
            pair_value(op, kind, &u, &v)
        })
        .collect();
    Ok(values?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

pub fn monte_carlo_rho(
    op: &DenseOperator,
    kind: FidelityKind,
    cone: &SparseCone,
    num_pairs: usize,
    rng: &SeededRng,
) -> Result<f64> {
    if cone.k == 0 || cone.k > op.rows() {
        return Err(Error::BadSupportSize {
            k: cone.k,
            max: op.rows(),
        });
    }
    let supports = cone.supports(op.cols(), num_pairs, rng)?;
    monte_carlo_rho_on_supports(op, kind, &supports, num_pairs, &rng.fork(rng.stream() + 1))
}

/// Sampled `sup_v v^T W (y - A x_*)` over unit `v` on the sampled supports.
///
/// On a fixed support the supremum is the norm of the restricted vector, so
/// each sample is exact and only the support search is random.
pub fn monte_carlo_xi(
    f: &FidelityTerm,
    x_star: &[f64],
    cone: &SparseCone,
    num_supports: usize,
    rng: &SeededRng,
) -> Result<f64> {
    let g = f.back_project(&f.residual(x_star)?)?;
    let supports = cone.supports(g.len(), num_supports, rng)?;
    Ok(supports
        .iter()
        .map(|s| s.iter().map(|&j| g[j] * g[j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}

/// Per-iteration rates of PGD with the oracle prior: `(1 - sigma_min/sigma_max, 0)`.
pub fn warmup_rates(op: &DenseOperator) -> (f64, f64) {
    (1.0 - op.spectral_summary().condition_ratio, 0.0)
}

/// `max{1 - sigma_min/sigma_max of the Hessian on the row space, 1 - delta}`.
///
/// LS gives `max{1 - sigma_min(A A^T)/sigma_max(A A^T), 1 - delta}`; the BP
/// Hessian is the projector `A^+ A`, so BP gives `1 - delta`.
pub fn prox_gradient_rate_bound(f: &FidelityTerm, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadDelta(delta));
    }
    Ok(match f.kind() {
        FidelityKind::Ls => {
            let cond = f.operator().spectral_summary().condition_ratio;
            (1.0 - cond).max(1.0 - delta)
        }
        FidelityKind::Bp => 1.0 - delta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRate {
    /// Least-squares slope of `ln d_t` against `t`; `-inf` on exact convergence.
    pub slope: f64,
    /// First and last iteration used.
    pub window: (usize, usize),
    pub r2: f64,
    /// A distance in the window was exactly zero.
    pub exact: bool,
}

impl EmpiricalRate {
    /// Fitted per-iteration contraction factor `e^slope`.
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

/// Minimum number of points for a fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Log-linear fit of distances against iteration indices.
pub fn fit_log_linear(iterations: &[usize], distances: &[f64]) -> Result<EmpiricalRate> {
    if iterations.len() != distances.len() {
        return Err(Error::DimensionMismatch {
            context: "rate fit",
            expected: iterations.len(),
            found: distances.len(),
        });
    }
    if iterations.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_POINTS,
            found: iterations.len(),
        });
    }
    let window = (iterations[0], iterations[iterations.len() - 1]);
    if let Some(pos) = distances.iter().position(|d| *d == 0.0) {
        return Ok(EmpiricalRate {
            slope: f64::NEG_INFINITY,
            window: (window.0, iterations[pos]),
            r2: 1.0,
            exact: true,
        });
    }
    if distances.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::NonFinite("trace distances"));
    }
    let xs: Vec<f64> = iterations.iter().map(|&t| t as f64).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(EmpiricalRate {
        slope,
        window,
        r2,
        exact: false,
    })
}

/// Fit over the trace records whose iteration lies in `window` (inclusive).
pub fn empirical_rate(
    trace: &IterateTrace,
    reference: Reference,
    window: Option<(usize, usize)>,
) -> Result<EmpiricalRate> {
    let dists = trace.distances(reference).ok_or_else(|| {
        Error::BadConfig("trace has no distances for the requested reference".into())
    })?;
    let (lo, hi) = window.unwrap_or((0, usize::MAX));
    let (its, ds): (Vec<usize>, Vec<f64>) = trace
        .iterations()
        .into_iter()
        .zip(dists)
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .unzip();
    fit_log_linear(&its, &ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::Prior;
    use crate::solvers::{pgd, InitPolicy, SolverConfig};
    use crate::vecops::add;
    use std::sync::Arc;

    fn gaussian_op(m: usize, n: usize, seed: u64) -> DenseOperator {
        crate::transforms::gaussian_sensing(m, n, &SeededRng::new(seed, 0)).unwrap()
    }

    fn orthonormal_rows(m: usize, n: usize, seed: u64) -> DenseOperator {
        let mut rng = SeededRng::new(seed, 0);
        let svd = Mat::from_fn(n, n, |_, _| rng.normal()).thin_svd().unwrap();
        let u = svd.U();
        DenseOperator::new(Mat::from_fn(m, n, |i, j| u[(j, i)])).unwrap()
    }

    #[test]
    fn orthonormal_rows_give_equal_rates() {
        let op = orthonormal_rows(8, 20, 1);
        let est = estimate_restricted_rates(&op, 3, 50, &SeededRng::new(2, 0)).unwrap();
        assert!((est.p_ls_hat - est.p_bp_hat).abs() < 1e-12);
    }

    #[test]
    fn samplewise_ordering() {
        let op = gaussian_op(16, 40, 3);
        for k in [1, 4, 16] {
            let (est, samples) = estimate_with_samples(&op, k, 100, &SeededRng::new(1, 1)).unwrap();
            for s in &samples {
                assert!(s.bp_rate() <= s.ls_rate() + 1e-10);
            }
            assert!(est.p_bp_hat <= est.p_ls_hat);
            assert!(est.ratio <= 1.0);
            assert_eq!(est.seed, 1);
        }
    }

    #[test]
    fn bad_support_sizes() {
        let op = gaussian_op(4, 10, 3);
        assert!(matches!(
            estimate_restricted_rates(&op, 0, 10, &SeededRng::new(1, 0)),
            Err(Error::BadSupportSize { .. })
        ));
        assert!(matches!(
            estimate_restricted_rates(&op, 5, 10, &SeededRng::new(1, 0)),
            Err(Error::BadSupportSize { .. })
        ));
    }

    #[test]
    fn nested_samples_are_monotone() {
        let op = gaussian_op(12, 30, 4);
        let rng = SeededRng::new(9, 2);
        let cone = SparseCone::new(5);
        let long = cone.supports(30, 80, &rng).unwrap();
        let short = cone.supports(30, 20, &rng).unwrap();
        assert_eq!(&long[..20], &short[..]);
        let a = rates_from_samples(&evaluate_supports(&op, &short).unwrap());
        let b = rates_from_samples(&evaluate_supports(&op, &long).unwrap());
        assert!(b.0 >= a.0 && b.1 >= a.1);
    }

    #[test]
    fn rho_bounded_by_matched_rates() {
        let op = gaussian_op(16, 48, 5);
        let rng = SeededRng::new(3, 0);
        let supports = SparseCone::new(4).supports(48, 60, &rng).unwrap();
        let (p_ls, p_bp) = rates_from_samples(&evaluate_supports(&op, &supports).unwrap());
        for (kind, p) in [(FidelityKind::Ls, p_ls), (FidelityKind::Bp, p_bp)] {
            let rho = monte_carlo_rho_on_supports(&op, kind, &supports, 300, &rng).unwrap();
            assert!(rho <= p + 1e-9, "{kind}: {rho} > {p}");
        }
    }

    #[test]
    fn bp_pair_value_on_diagonal() {
        let op = gaussian_op(8, 20, 6);
        let mut rng = SeededRng::new(1, 3);
        let support = vec![2, 7, 11];
        let u = unit_on_support(20, &support, &mut rng);
        let val = pair_value(&op, FidelityKind::Bp, &u, &u).unwrap();
        let w = op.whiten(&op.forward(&u).unwrap()).unwrap();
        assert!((val - (1.0 - dot(&w, &w))).abs() <= 1e-10);
    }

    #[test]
    fn orthonormal_rows_give_equal_rho() {
        let op = orthonormal_rows(6, 15, 7);
        let cone = SparseCone::new(3);
        let rng = SeededRng::new(4, 0);
        let a = monte_carlo_rho(&op, FidelityKind::Ls, &cone, 100, &rng).unwrap();
        let b = monte_carlo_rho(&op, FidelityKind::Bp, &cone, 100, &rng).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn xi_vanishes_at_data_consistent_points() {
        let op = Arc::new(gaussian_op(6, 14, 8));
        let x = SeededRng::new(2, 2).normal_vec(14);
        let y = op.forward(&x).unwrap();
        let f = FidelityTerm::new(FidelityKind::Bp, op, y).unwrap();
        let xi = monte_carlo_xi(&f, &x, &SparseCone::new(3), 20, &SeededRng::new(1, 0)).unwrap();
        assert!(xi < 1e-10);
        assert_eq!(ConvexityClass::NonConvex.kappa(), 2.0);
        assert_eq!(pgd_step_bound(ConvexityClass::Convex, 0.5, 0.0, 1.0, 2.0), 1.0);
    }

    #[test]
    fn warmup_examples() {
        let op = orthonormal_rows(4, 9, 2);
        let (ls, bp) = warmup_rates(&op);
        assert!(ls.abs() < 1e-12 && bp == 0.0);
        let op = DenseOperator::from_row_major(2, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((warmup_rates(&op).0 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rate_bound_examples() {
        let op = Arc::new(gaussian_op(8, 16, 9));
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), vec![0.0; 8]).unwrap();
        assert!((prox_gradient_rate_bound(&f, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!(matches!(prox_gradient_rate_bound(&f, 0.0), Err(Error::BadDelta(_))));
        assert!(matches!(prox_gradient_rate_bound(&f, 1.5), Err(Error::BadDelta(_))));

        let a = DenseOperator::from_row_major(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.03f64.sqrt(), 0.0]).unwrap();
        let ls = FidelityTerm::new(FidelityKind::Ls, Arc::new(a), vec![0.0; 2]).unwrap();
        assert!((prox_gradient_rate_bound(&ls, 1.0).unwrap() - 0.97).abs() < 1e-12);

        let lsf = f.with_kind(FidelityKind::Ls);
        for delta in [0.05, 0.3, 0.9, 1.0] {
            assert!(
                prox_gradient_rate_bound(&f, delta).unwrap()
                    <= prox_gradient_rate_bound(&lsf, delta).unwrap()
            );
        }
    }

    #[test]
    fn fit_examples() {
        let its: Vec<usize> = (0..20).collect();
        let d: Vec<f64> = its.iter().map(|&t| 0.5f64.powi(t as i32)).collect();
        let fit = fit_log_linear(&its, &d).unwrap();
        assert!((fit.slope - 0.5f64.ln()).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);

        let fit = fit_log_linear(&its, &[3.0; 20]).unwrap();
        assert_eq!(fit.slope, 0.0);

        assert!(matches!(
            fit_log_linear(&its[..4], &d[..4]),
            Err(Error::InsufficientData { .. })
        ));
        let mut z = d.clone();
        z[7] = 0.0;
        let fit = fit_log_linear(&its, &z).unwrap();
        assert!(fit.exact && fit.slope == f64::NEG_INFINITY);
        assert_eq!(fit.window, (0, 7));
    }

    #[test]
    fn oracle_trace_rate_respects_warmup_rate() {
        let op = Arc::new(gaussian_op(32, 64, 10));
        let mut rng = SeededRng::new(5, 5);
        let x_gt = rng.normal_vec(64);
        let y = rng.normal_vec(32);
        let f = FidelityTerm::new(FidelityKind::Ls, op.clone(), y.clone()).unwrap();
        let prior = Prior::oracle(x_gt.clone(), op.clone()).unwrap();
        let x_star = add(&op.pinv(&y).unwrap(), &op.null_project(&x_gt).unwrap());
        let cfg = SolverConfig::new(100)
            .with_x0(InitPolicy::Zeros)
            .with_stationary_point(x_star);
        let (_, trace) = pgd(&f, &prior, &cfg).unwrap();
        let fit = empirical_rate(&trace, Reference::Stationary, None).unwrap();
        assert!(fit.factor() <= warmup_rates(&op).0 + 1e-6);
    }
}
