//! Iterative schemes over an LS or BP data term.
//!
//! Every solver shares one driver loop that applies the scheme-specific step,
//! guards against divergence and records an [`IterateTrace`].

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fidelity::FidelityTerm;
use crate::linops::DenseOperator;
use crate::metrics::{psnr, PEAK_8BIT};
use crate::priors::{soft_threshold, Prior};
use crate::vecops::{dist, norm1, norm2};

/// Iterates whose norm exceeds this abort the run.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    Zeros,
    /// `A^+ y`.
    PinvOfY,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Overrides the fidelity's default step size when set.
    pub step_size: Option<f64>,
    /// Stop once `||x_{t+1} - x_t|| / max(1, ||x_t||) <= stop_tol`; 0 runs the full budget.
    pub stop_tol: f64,
    pub record_every: usize,
    pub x0: InitPolicy,
    pub x_gt: Option<Vec<f64>>,
    /// Stationary point of the scheme, usually from a longer preceding run.
    pub x_star: Option<Vec<f64>>,
    pub peak: f64,
}

impl SolverConfig {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            step_size: None,
            stop_tol: 0.0,
            record_every: 1,
            x0: InitPolicy::Zeros,
            x_gt: None,
            x_star: None,
            peak: PEAK_8BIT,
        }
    }

    pub fn with_step_size(mut self, mu: f64) -> Self {
        self.step_size = Some(mu);
        self
    }

    pub fn with_x0(mut self, x0: InitPolicy) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_ground_truth(mut self, x_gt: Vec<f64>) -> Self {
        self.x_gt = Some(x_gt);
        self
    }

    pub fn with_stationary_point(mut self, x_star: Vec<f64>) -> Self {
        self.x_star = Some(x_star);
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::BadConfig("max_iters must be at least 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::BadConfig("record_every must be at least 1".into()));
        }
        if let Some(mu) = self.step_size {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::BadConfig(format!("step size must be positive, got {mu}")));
            }
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::BadConfig("stop_tol must be non-negative".into()));
        }
        let refs = [
            ("x_gt", self.x_gt.as_ref()),
            ("x_star", self.x_star.as_ref()),
        ];
        for (name, r) in refs {
            if let Some(r) = r {
                if r.len() != n {
                    return Err(Error::BadConfig(format!(
                        "{name} has length {}, expected {n}",
                        r.len()
                    )));
                }
            }
        }
        if let InitPolicy::Explicit(x0) = &self.x0 {
            if x0.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "x0",
                    expected: n,
                    found: x0.len(),
                });
            }
        }
        Ok(())
    }
}

/// Which registered reference a distance or PSNR column refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    GroundTruth,
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Number of steps taken; 0 is the initial point.
    pub iteration: usize,
    pub objective: f64,
    pub dist_gt: Option<f64>,
    pub psnr_gt: Option<f64>,
    pub dist_star: Option<f64>,
    pub psnr_star: Option<f64>,
    pub l1_norm: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub records: Vec<TraceRecord>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.iteration).collect()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn distances(&self, reference: Reference) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| match reference {
                Reference::GroundTruth => r.dist_gt,
                Reference::Stationary => r.dist_star,
            })
            .collect()
    }

    pub fn psnrs(&self, reference: Reference) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| match reference {
                Reference::GroundTruth => r.psnr_gt,
                Reference::Stationary => r.psnr_star,
            })
            .collect()
    }

    /// Same records with wall-clock times ignored.
    pub fn same_values(&self, other: &IterateTrace) -> bool {
        self.len() == other.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                TraceRecord {
                    elapsed_secs: 0.0,
                    ..a.clone()
                } == TraceRecord {
                    elapsed_secs: 0.0,
                    ..b.clone()
                }
            })
    }
}

/// The starting point described by `policy`.
pub fn initial_point(f: &FidelityTerm, policy: &InitPolicy) -> Result<Vec<f64>> {
    let n = f.operator().cols();
    match policy {
        InitPolicy::Zeros => Ok(vec![0.0; n]),
        InitPolicy::PinvOfY => f.operator().pinv(f.observation()),
        InitPolicy::Explicit(x) => {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "x0",
                    expected: n,
                    found: x.len(),
                });
            }
            Ok(x.clone())
        }
    }
}

fn step_size(f: &FidelityTerm, cfg: &SolverConfig) -> f64 {
    cfg.step_size.unwrap_or_else(|| f.default_step_size())
}

fn record(
    cfg: &SolverConfig,
    t: usize,
    x: &[f64],
    objective: f64,
    start: Instant,
) -> Result<TraceRecord> {
    let against = |r: &Option<Vec<f64>>| -> Result<(Option<f64>, Option<f64>)> {
        match r {
            Some(r) => Ok((Some(dist(x, r)), Some(psnr(x, r, cfg.peak)?))),
            None => Ok((None, None)),
        }
    };
    let (dist_gt, psnr_gt) = against(&cfg.x_gt)?;
    let (dist_star, psnr_star) = against(&cfg.x_star)?;
    Ok(TraceRecord {
        iteration: t,
        objective,
        dist_gt,
        psnr_gt,
        dist_star,
        psnr_star,
        l1_norm: norm1(x),
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs `step` from `x0`, recording every `record_every` steps and the last one.
///
/// `step` maps `(x_t, t)` to `x_{t+1}`; `objective` is evaluated only on
/// recorded iterates.
fn drive<S, O>(
    cfg: &SolverConfig,
    x0: Vec<f64>,
    mut step: S,
    objective: O,
) -> Result<(Vec<f64>, IterateTrace)>
where
    S: FnMut(&[f64], usize) -> Result<Vec<f64>>,
    O: Fn(&[f64], usize) -> Result<f64>,
{
    let start = Instant::now();
    let mut trace = IterateTrace::default();
    let mut x = x0;
    trace.records.push(record(cfg, 0, &x, objective(&x, 0)?, start)?);
    for t in 0..cfg.max_iters {
        let next = step(&x, t)?;
        let nrm = norm2(&next);
        if !nrm.is_finite() || nrm > DIVERGENCE_GUARD {
            return Err(Error::NonFiniteIterate { iteration: t + 1 });
        }
        let change = dist(&next, &x) / norm2(&x).max(1.0);
        x = next;
        let done = t + 1 == cfg.max_iters || (cfg.stop_tol > 0.0 && change <= cfg.stop_tol);
        if done || (t + 1) % cfg.record_every == 0 {
            trace
                .records
                .push(record(cfg, t + 1, &x, objective(&x, t + 1)?, start)?);
        }
        if done {
            break;
        }
    }
    Ok((x, trace))
}

/// Projected gradient descent: `x_{t+1} = P(x_t + mu W (y - A x_t))`.
pub fn pgd(
    f: &FidelityTerm,
    projector: &Prior,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, IterateTrace)> {
    if !projector.is_projection() {
        return Err(Error::WrongVariant {
            operation: "pgd projection",
            found: projector.name(),
        });
    }
    let n = f.operator().cols();
    cfg.validate(n)?;
    let mu = step_size(f, cfg);
    let x0 = initial_point(f, &cfg.x0)?;
    drive(
        cfg,
        x0,
        |x, _| {
            let r = f.residual(x)?;
            let w = f.back_project(&r)?;
            let z: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + mu * b).collect();
            projector.apply(&z)
        },
        |x, _| f.value(x),
    )
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::BadConfig(format!("beta must be non-negative, got {beta}")))
    }
}

fn prox_step(
    f: &FidelityTerm,
    prior: &Prior,
    mu: f64,
    beta: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let g = f.gradient(x)?;
    let z: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - mu * b).collect();
    prior.prox_weighted(&z, mu * beta)
}

/// Proximal gradient: `x_{t+1} = prox_{mu beta s}(x_t - mu grad l(x_t))`.
///
/// `prox_prior` selects `s` (l1 or quadratic); its own weight is ignored in
/// favor of `beta`. With BP, soft thresholding and `mu = 1` this is l1-IDBP;
/// with LS it is ISTA.
pub fn proximal_gradient(
    f: &FidelityTerm,
    prox_prior: &Prior,
    beta: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, IterateTrace)> {
    check_beta(beta)?;
    prox_prior.regularizer(&vec![0.0; f.operator().cols()])?;
    cfg.validate(f.operator().cols())?;
    let mu = step_size(f, cfg);
    let x0 = initial_point(f, &cfg.x0)?;
    drive(
        cfg,
        x0,
        |x, _| prox_step(f, prox_prior, mu, beta, x),
        |x, _| Ok(f.value(x)? + beta * prox_prior.regularizer(x)?),
    )
}

/// FISTA with the `t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2` momentum and no restart.
pub fn fista(
    f: &FidelityTerm,
    prox_prior: &Prior,
    beta: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, IterateTrace)> {
    check_beta(beta)?;
    prox_prior.regularizer(&vec![0.0; f.operator().cols()])?;
    cfg.validate(f.operator().cols())?;
    let mu = step_size(f, cfg);
    let x0 = initial_point(f, &cfg.x0)?;
    let mut z = x0.clone();
    let mut t_k = 1.0_f64;
    drive(
        cfg,
        x0,
        |x_prev, _| {
            let x_next = prox_step(f, prox_prior, mu, beta, &z)?;
            let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
            let momentum = (t_k - 1.0) / t_next;
            z = x_next
                .iter()
                .zip(x_prev)
                .map(|(a, b)| a + momentum * (a - b))
                .collect();
            t_k = t_next;
            Ok(x_next)
        },
        |x, _| Ok(f.value(x)? + beta * prox_prior.regularizer(x)?),
    )
}

/// Diagonal weights of untrained ALISTA.
///
/// `lambda_i = 1 / (a_i^T (A A^T)^{-1} a_i)`; the analytic weight matrix is
/// `W = (A^+)^T diag(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlistaWeights {
    lambda: Vec<f64>,
}

impl AlistaWeights {
    /// `Lambda = I`, which turns the ALISTA step into the l1-IDBP step.
    pub fn identity(n: usize) -> Self {
        Self {
            lambda: vec![1.0; n],
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// The `m x n` matrix `(A^+)^T diag(lambda)`.
    pub fn w_tilde(&self, op: &DenseOperator) -> Result<Mat<f64>> {
        if op.cols() != self.lambda.len() {
            return Err(Error::DimensionMismatch {
                context: "alista weights",
                expected: op.cols(),
                found: self.lambda.len(),
            });
        }
        let pinv = op.pinv_matrix();
        Ok(Mat::from_fn(op.rows(), op.cols(), |i, j| {
            pinv[(j, i)] * self.lambda[j]
        }))
    }
}

pub fn alista_weights(op: &DenseOperator) -> Result<AlistaWeights> {
    let norms = op.column_norms();
    if let Some(j) = norms.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    // a_i^T (A A^T)^{-1} a_i = (A^+ A)_{ii} = ||V[i, :]||^2
    let v = op.right_vectors();
    let mut lambda = Vec::with_capacity(op.cols());
    for i in 0..op.cols() {
        let q: f64 = v.row(i).iter().map(|x| x * x).sum();
        if !(q > 0.0) {
            return Err(Error::ZeroColumn(i));
        }
        lambda.push(1.0 / q);
    }
    Ok(AlistaWeights { lambda })
}

/// Per-iteration soft threshold for [`alista_run`].
#[derive(Clone)]
pub enum ThetaSchedule {
    Constant(f64),
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl ThetaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            ThetaSchedule::Constant(theta) => *theta,
            ThetaSchedule::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for ThetaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSchedule::Constant(theta) => write!(f, "Constant({theta})"),
            ThetaSchedule::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// `x_{t+1} = T_{theta_t}(x_t - mu Lambda A^+ (A x_t - y))`.
///
/// Untrained mode is `mu = 1` with a constant threshold. `cfg.step_size` is
/// not used; the recorded objective is `f(x) + theta_t ||x||_1`.
pub fn alista_run(
    f: &FidelityTerm,
    weights: &AlistaWeights,
    theta: &ThetaSchedule,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, IterateTrace)> {
    let op = f.operator();
    if weights.lambda.len() != op.cols() {
        return Err(Error::DimensionMismatch {
            context: "alista weights",
            expected: op.cols(),
            found: weights.lambda.len(),
        });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::BadConfig(format!("step size must be positive, got {mu}")));
    }
    cfg.validate(op.cols())?;
    let x0 = initial_point(f, &cfg.x0)?;
    drive(
        cfg,
        x0,
        |x, t| {
            let r = f.residual(x)?;
            let back = op.pinv(&r)?;
            let z: Vec<f64> = x
                .iter()
                .zip(&back)
                .zip(&weights.lambda)
                .map(|((xi, bi), li)| xi + mu * li * bi)
                .collect();
            soft_threshold(&z, theta.at(t))
        },
        |x, t| Ok(f.value(x)? + theta.at(t) * norm1(x)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::FidelityKind;
    use crate::priors::Quadratic;
    use crate::rng::SeededRng;
    use crate::vecops::{add, sub};

    fn gaussian_op(m: usize, n: usize, seed: u64) -> Arc<DenseOperator> {
        let mut rng = SeededRng::new(seed, 0);
        let s = 1.0 / (m as f64).sqrt();
        Arc::new(DenseOperator::new(Mat::from_fn(m, n, |_, _| s * rng.normal())).unwrap())
    }

    fn problem(m: usize, n: usize, seed: u64) -> (Arc<DenseOperator>, Vec<f64>, Vec<f64>) {
        let op = gaussian_op(m, n, seed);
        let x_gt = SeededRng::new(seed, 5).normal_vec(n);
        let y = op.forward(&x_gt).unwrap();
        (op, x_gt, y)
    }

    #[test]
    fn oracle_bp_fixed_point_after_one_step() {
        let (op, x_gt, y) = problem(16, 32, 1);
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), y.clone()).unwrap();
        let prior = Prior::oracle(x_gt.clone(), op.clone()).unwrap();
        let cfg = SolverConfig::new(2)
            .with_x0(InitPolicy::Explicit(SeededRng::new(2, 2).normal_vec(32)));
        let mut iterates = Vec::new();
        let mut c = cfg.clone();
        for k in 1..=2 {
            c.max_iters = k;
            iterates.push(pgd(&f, &prior, &c).unwrap().0);
        }
        let expect = add(&op.pinv(&y).unwrap(), &op.null_project(&x_gt).unwrap());
        assert!(dist(&iterates[0], &expect) <= 1e-10 * norm2(&expect));
        assert!(dist(&iterates[1], &iterates[0]) <= 1e-10);
    }

    #[test]
    fn oracle_ls_contracts_at_condition_rate() {
        let (op, x_gt, _) = problem(16, 32, 3);
        let y = SeededRng::new(3, 9).normal_vec(16);
        let f = FidelityTerm::new(FidelityKind::Ls, op.clone(), y.clone()).unwrap();
        let prior = Prior::oracle(x_gt.clone(), op.clone()).unwrap();
        let x_star = add(&op.pinv(&y).unwrap(), &op.null_project(&x_gt).unwrap());
        let cfg = SolverConfig::new(60).with_stationary_point(x_star);
        let (_, trace) = pgd(&f, &prior, &cfg).unwrap();
        let d = trace.distances(Reference::Stationary).unwrap();
        let rate = 1.0 - op.spectral_summary().condition_ratio;
        for w in d.windows(2) {
            if w[0] > 1e-12 {
                assert!(w[1] / w[0] <= rate + 1e-8);
            }
        }
    }

    #[test]
    fn inactive_ball_gives_pinv_in_one_bp_step() {
        let (op, _, y) = problem(10, 20, 4);
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), y.clone()).unwrap();
        let r = 2.0 * norm1(&op.pinv(&y).unwrap());
        let (x1, _) = pgd(&f, &Prior::l1_ball(r).unwrap(), &SolverConfig::new(1)).unwrap();
        let ax = op.forward(&x1).unwrap();
        assert!(dist(&ax, &y) <= 1e-10 * norm2(&y));
    }

    #[test]
    fn pgd_iterates_stay_feasible() {
        let (op, x_gt, y) = problem(12, 30, 5);
        let radius = 0.5 * norm1(&x_gt);
        for kind in FidelityKind::BOTH {
            let f = FidelityTerm::new(kind, op.clone(), y.clone()).unwrap();
            let prior = Prior::l1_ball(radius).unwrap();
            let mut c = SolverConfig::new(1);
            for k in 1..30 {
                c.max_iters = k;
                let (x, trace) = pgd(&f, &prior, &c).unwrap();
                assert!(norm1(&x) <= radius * (1.0 + 1e-9));
                assert!(trace.records.iter().all(|r| r.l1_norm <= radius * (1.0 + 1e-9)));
            }
        }
    }

    #[test]
    fn pgd_rejects_proximal_prior() {
        let (op, _, y) = problem(4, 8, 1);
        let f = FidelityTerm::new(FidelityKind::Ls, op, y).unwrap();
        let res = pgd(&f, &Prior::soft_threshold(1.0).unwrap(), &SolverConfig::new(3));
        assert!(matches!(res, Err(Error::WrongVariant { .. })));
    }

    #[test]
    fn zero_beta_reaches_data_consistency() {
        let (op, _, y) = problem(8, 16, 6);
        for kind in FidelityKind::BOTH {
            let f = FidelityTerm::new(kind, op.clone(), y.clone()).unwrap();
            let prior = Prior::soft_threshold(0.0).unwrap();
            let (x, _) = proximal_gradient(&f, &prior, 0.0, &SolverConfig::new(3000)).unwrap();
            let r = f.residual(&x).unwrap();
            assert!(norm2(&r) <= 1e-8 * norm2(&y), "{kind}: {}", norm2(&r));
        }
    }

    #[test]
    fn idbp_matches_hand_rolled_iteration() {
        let (op, _, y) = problem(10, 24, 7);
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), y.clone()).unwrap();
        let beta = 0.05;
        let prior = Prior::soft_threshold(1.0).unwrap();
        let cfg = SolverConfig::new(1);
        let mut x = vec![0.0; 24];
        let mut c = cfg.clone();
        for t in 1..=15 {
            let ax = op.forward(&x).unwrap();
            let back = op.pinv(&sub(&ax, &y)).unwrap();
            let z: Vec<f64> = x.iter().zip(&back).map(|(a, b)| a - b).collect();
            x = z.iter().map(|v| v.signum() * (v.abs() - beta).max(0.0)).collect();
            c.max_iters = t;
            let (got, _) = proximal_gradient(&f, &prior, beta, &c).unwrap();
            for (a, b) in got.iter().zip(&x) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn tikhonov_contraction_within_bound() {
        let (op, _, y) = problem(12, 24, 8);
        let reg = Arc::new(Quadratic::identity(24));
        for kind in FidelityKind::BOTH {
            let f = FidelityTerm::new(kind, op.clone(), y.clone()).unwrap();
            let mu = f.default_step_size();
            let beta = 1.0 / mu;
            let prior = Prior::Tikhonov {
                beta: mu * beta,
                reg: reg.clone(),
            };
            let delta = crate::priors::contraction_delta(&prior, &op).unwrap();
            // closed-form stationary point: (mu W A + mu beta I) x = mu W y
            let (x_star, _) =
                proximal_gradient(&f, &prior, beta, &SolverConfig::new(4000)).unwrap();
            let cfg = SolverConfig::new(40)
                .with_x0(InitPolicy::Explicit(SeededRng::new(1, 1).normal_vec(24)))
                .with_stationary_point(x_star);
            let (_, trace) = proximal_gradient(&f, &prior, beta, &cfg).unwrap();
            let bound = crate::rate_lab::prox_gradient_rate_bound(&f, delta).unwrap();
            let d = trace.distances(Reference::Stationary).unwrap();
            for w in d.windows(2) {
                if w[0] > 1e-10 {
                    assert!(w[1] / w[0] <= bound + 1e-6, "{kind}");
                }
            }
        }
    }

    #[test]
    fn fista_first_step_is_plain() {
        let (op, _, y) = problem(8, 20, 9);
        let f = FidelityTerm::new(FidelityKind::Ls, op, y).unwrap();
        let prior = Prior::soft_threshold(1.0).unwrap();
        let cfg = SolverConfig::new(1);
        let (a, _) = fista(&f, &prior, 0.1, &cfg).unwrap();
        let (b, _) = proximal_gradient(&f, &prior, 0.1, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fista_accelerates_least_squares() {
        let (op, _, y) = problem(20, 40, 10);
        let f = FidelityTerm::new(FidelityKind::Ls, op, y).unwrap();
        let prior = Prior::soft_threshold(0.0).unwrap();
        let cfg = SolverConfig::new(100);
        let (_, tf) = fista(&f, &prior, 0.0, &cfg).unwrap();
        let (_, tp) = proximal_gradient(&f, &prior, 0.0, &cfg).unwrap();
        assert!(tf.last().unwrap().objective <= tp.last().unwrap().objective);
    }

    #[test]
    fn fista_objective_not_worse_than_proximal_gradient() {
        for seed in 0..5 {
            let (op, x_gt, _) = problem(24, 64, 20 + seed);
            let y = op.forward(&crate::metrics::sparsify_top_k(&x_gt, 6).unwrap()).unwrap();
            for kind in FidelityKind::BOTH {
                let f = FidelityTerm::new(kind, op.clone(), y.clone()).unwrap();
                let prior = Prior::soft_threshold(1.0).unwrap();
                let cfg = SolverConfig::new(200);
                let (_, tf) = fista(&f, &prior, 0.01, &cfg).unwrap();
                let (_, tp) = proximal_gradient(&f, &prior, 0.01, &cfg).unwrap();
                let (of, op_) = (tf.last().unwrap().objective, tp.last().unwrap().objective);
                assert!(of <= op_ + 1e-8, "seed {seed} {kind}: {of} > {op_}");
            }
        }
    }

    #[test]
    fn alista_weights_satisfy_constraint() {
        let op = gaussian_op(6, 15, 11);
        let w = alista_weights(&op).unwrap();
        let wt = w.w_tilde(&op).unwrap();
        let a = op.matrix();
        for i in 0..15 {
            let c: f64 = (0..6).map(|r| wt[(r, i)] * a[(r, i)]).sum();
            assert!((c - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn alista_weights_for_orthonormal_rows() {
        let mut rng = SeededRng::new(4, 0);
        let svd = Mat::from_fn(9, 9, |_, _| rng.normal()).thin_svd().unwrap();
        let u = svd.U();
        let a = Mat::from_fn(4, 9, |i, j| u[(j, i)]);
        let op = DenseOperator::new(a).unwrap();
        let w = alista_weights(&op).unwrap();
        for (l, c) in w.lambda().iter().zip(op.column_norms()) {
            assert!((l - 1.0 / (c * c)).abs() <= 1e-10 * l);
        }
    }

    #[test]
    fn alista_zero_column() {
        let op = DenseOperator::from_row_major(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(alista_weights(&op), Err(Error::ZeroColumn(2))));
    }

    #[test]
    fn alista_with_identity_weights_is_idbp() {
        let (op, x_gt, y) = problem(10, 24, 12);
        let f = FidelityTerm::new(FidelityKind::Bp, op, y).unwrap();
        let cfg = SolverConfig::new(30).with_ground_truth(x_gt);
        let beta = 0.02;
        let (xa, ta) = alista_run(
            &f,
            &AlistaWeights::identity(24),
            &ThetaSchedule::Constant(beta),
            1.0,
            &cfg,
        )
        .unwrap();
        let (xp, tp) =
            proximal_gradient(&f, &Prior::soft_threshold(1.0).unwrap(), beta, &cfg).unwrap();
        for (a, b) in xa.iter().zip(&xp) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (ra, rp) in ta.records.iter().zip(&tp.records) {
            assert_eq!(ra.iteration, rp.iteration);
            assert!((ra.dist_gt.unwrap() - rp.dist_gt.unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn custom_schedule_is_used() {
        let (op, _, y) = problem(6, 12, 13);
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), y).unwrap();
        let w = alista_weights(&op).unwrap();
        let huge = ThetaSchedule::Custom(Arc::new(|t| if t == 0 { 1e9 } else { 0.0 }));
        let cfg = SolverConfig::new(1);
        let (x, _) = alista_run(&f, &w, &huge, 1.0, &cfg).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn distance_to_stationary_point_is_monotone() {
        let (op, x_gt, y) = problem(20, 48, 14);
        for kind in FidelityKind::BOTH {
            let f = FidelityTerm::new(kind, op.clone(), y.clone()).unwrap();
            let prior = Prior::l1_ball(0.6 * norm1(&x_gt)).unwrap();
            let (x_star, _) = pgd(&f, &prior, &SolverConfig::new(20000)).unwrap();
            let cfg = SolverConfig::new(200).with_stationary_point(x_star.clone());
            let (_, trace) = pgd(&f, &prior, &cfg).unwrap();
            let d = trace.distances(Reference::Stationary).unwrap();
            for w in d[1..].windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{kind}");
            }
            // fixed-point residual of the converged run
            let step = pgd(
                &f,
                &prior,
                &SolverConfig::new(1).with_x0(InitPolicy::Explicit(x_star.clone())),
            )
            .unwrap()
            .0;
            assert!(dist(&step, &x_star) <= 1e-8 * norm2(&x_star).max(1.0));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let (op, x_gt, y) = problem(10, 20, 15);
        let f = FidelityTerm::new(FidelityKind::Ls, op, y).unwrap();
        let cfg = SolverConfig::new(25)
            .with_ground_truth(x_gt.clone())
            .with_record_every(4);
        let prior = Prior::l1_ball(norm1(&x_gt)).unwrap();
        let (xa, ta) = pgd(&f, &prior, &cfg).unwrap();
        let (xb, tb) = pgd(&f, &prior, &cfg).unwrap();
        assert_eq!(xa, xb);
        assert!(ta.same_values(&tb));
        assert_eq!(ta.iterations(), vec![0, 4, 8, 12, 16, 20, 24, 25]);
    }

    #[test]
    fn early_stop_and_divergence_guard() {
        let (op, _, y) = problem(6, 12, 16);
        let f = FidelityTerm::new(FidelityKind::Bp, op.clone(), y.clone()).unwrap();
        let prior = Prior::soft_threshold(1.0).unwrap();
        let cfg = SolverConfig::new(100).with_stop_tol(1e-14);
        let (_, trace) = proximal_gradient(&f, &prior, 0.0, &cfg).unwrap();
        assert!(trace.last().unwrap().iteration < 100);

        let ls = f.with_kind(FidelityKind::Ls);
        let mu = 10.0 * ls.default_step_size();
        let cfg = SolverConfig::new(5000).with_step_size(mu);
        let res = proximal_gradient(&ls, &prior, 0.0, &cfg);
        assert!(matches!(res, Err(Error::NonFiniteIterate { .. })));
    }

    #[test]
    fn config_validation() {
        let (op, _, y) = problem(4, 8, 17);
        let f = FidelityTerm::new(FidelityKind::Ls, op, y).unwrap();
        let prior = Prior::l1_ball(1.0).unwrap();
        assert!(pgd(&f, &prior, &SolverConfig::new(0)).is_err());
        assert!(pgd(&f, &prior, &SolverConfig::new(3).with_step_size(-1.0)).is_err());
        assert!(pgd(&f, &prior, &SolverConfig::new(3).with_record_every(0)).is_err());
        assert!(pgd(
            &f,
            &prior,
            &SolverConfig::new(3).with_x0(InitPolicy::Explicit(vec![0.0; 3]))
        )
        .is_err());
    }
}
