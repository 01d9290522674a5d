//! Projections and proximal maps for the priors combined with the data terms.

use std::sync::Arc;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::linops::{matmul_owned, matvec, DenseOperator};
use crate::vecops::norm1;

/// A prior acting on the unknown, either as a projection or a proximal map.
#[derive(Debug, Clone)]
pub enum Prior {
    /// Projection onto `{x : ||x||_1 <= radius}`.
    L1Ball { radius: f64 },
    /// Proximal map of `theta ||x||_1`.
    SoftThreshold { theta: f64 },
    /// Keeps the row-space part of `x` and pins the null-space part to `x_gt`.
    Oracle {
        x_gt: Vec<f64>,
        op: Arc<DenseOperator>,
    },
    /// Proximal map of `beta/2 ||D x||^2`.
    Tikhonov { beta: f64, reg: Arc<Quadratic> },
}

impl Prior {
    pub fn l1_ball(radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(Prior::L1Ball { radius })
    }

    pub fn soft_threshold(theta: f64) -> Result<Self> {
        check_threshold(theta)?;
        Ok(Prior::SoftThreshold { theta })
    }

    pub fn oracle(x_gt: Vec<f64>, op: Arc<DenseOperator>) -> Result<Self> {
        if x_gt.len() != op.cols() {
            return Err(Error::DimensionMismatch {
                context: "oracle prior",
                expected: op.cols(),
                found: x_gt.len(),
            });
        }
        Ok(Prior::Oracle { x_gt, op })
    }

    pub fn tikhonov(beta: f64, d: Mat<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::NonpositiveWeight(beta));
        }
        Ok(Prior::Tikhonov {
            beta,
            reg: Arc::new(Quadratic::new(d)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Prior::L1Ball { .. } => "L1Ball",
            Prior::SoftThreshold { .. } => "SoftThreshold",
            Prior::Oracle { .. } => "Oracle",
            Prior::Tikhonov { .. } => "Tikhonov",
        }
    }

    /// True for the variants that are Euclidean projections onto a set.
    pub fn is_projection(&self) -> bool {
        matches!(self, Prior::L1Ball { .. } | Prior::Oracle { .. })
    }

    /// The projection or proximal map with the prior's own parameters.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            Prior::L1Ball { radius } => project_l1_ball(z, *radius),
            Prior::SoftThreshold { theta } => soft_threshold(z, *theta),
            Prior::Oracle { x_gt, op } => oracle_project(z, x_gt, op),
            Prior::Tikhonov { beta, reg } => reg.prox(z, *beta),
        }
    }

    /// `prox_{weight * s}(z)` where `s` is the unweighted regularizer of a
    /// proximal variant: `||x||_1` or `1/2 ||D x||^2`.
    ///
    /// The variant's own `theta`/`beta` is ignored.
    pub fn prox_weighted(&self, z: &[f64], weight: f64) -> Result<Vec<f64>> {
        match self {
            Prior::SoftThreshold { .. } => soft_threshold(z, weight),
            Prior::Tikhonov { reg, .. } => reg.prox(z, weight),
            other => Err(Error::WrongVariant {
                operation: "proximal step",
                found: other.name(),
            }),
        }
    }

    /// The unweighted regularizer `s(x)` of a proximal variant.
    pub fn regularizer(&self, x: &[f64]) -> Result<f64> {
        match self {
            Prior::SoftThreshold { .. } => Ok(norm1(x)),
            Prior::Tikhonov { reg, .. } => reg.value(x),
            other => Err(Error::WrongVariant {
                operation: "regularizer value",
                found: other.name(),
            }),
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveRadius(radius))
    }
}

fn check_threshold(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeThreshold(theta))
    }
}

/// Euclidean projection onto the l1 ball of the given radius.
///
/// Sort-and-threshold: the magnitudes are sorted once and the threshold is
/// the largest breakpoint that keeps the shrunk entries positive.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Result<Vec<f64>> {
    check_radius(radius)?;
    if norm1(v) <= radius {
        return Ok(v.to_vec());
    }
    let theta = l1_threshold(v, radius);
    Ok(shrink(v, theta))
}

fn l1_threshold(v: &[f64], radius: f64) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u > t {
            theta = t;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

fn shrink(z: &[f64], theta: f64) -> Vec<f64> {
    z.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

/// Componentwise `sign(z) max(|z| - theta, 0)`.
pub fn soft_threshold(z: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_threshold(theta)?;
    Ok(shrink(z, theta))
}

/// `P_A x + Q_A x_gt`.
pub fn oracle_project(x: &[f64], x_gt: &[f64], op: &DenseOperator) -> Result<Vec<f64>> {
    if x_gt.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "oracle_project",
            expected: x.len(),
            found: x_gt.len(),
        });
    }
    let diff: Vec<f64> = x.iter().zip(x_gt).map(|(a, b)| a - b).collect();
    let row = op.row_project(&diff)?;
    Ok(x_gt.iter().zip(&row).map(|(g, r)| g + r).collect())
}

/// The quadratic regularizer `1/2 ||D x||^2` with `D^T D` positive definite.
///
/// `D^T D` is eigendecomposed once, so the proximal map for any weight `c`
/// costs two products with the eigenvector matrix.
#[derive(Debug, Clone)]
pub struct Quadratic {
    d: Mat<f64>,
    eigvecs: Mat<f64>,
    eigvals: Vec<f64>,
}

/// Relative eigenvalue floor under which `D^T D` counts as singular.
const GRAM_TOL: f64 = 1e-12;

impl Quadratic {
    pub fn new(d: Mat<f64>) -> Result<Self> {
        let n = d.ncols();
        if n == 0 {
            return Err(Error::SingularSystem);
        }
        for j in 0..n {
            if d.col(j).iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("regularizer matrix"));
            }
        }
        let gram = matmul_owned(d.transpose(), d.as_ref());
        let eig = gram
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let eigvals: Vec<f64> = eig.S().column_vector().iter().copied().collect();
        let largest = eigvals.iter().fold(0.0_f64, |m, v| m.max(*v));
        let smallest = eigvals.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        if !(smallest > GRAM_TOL * largest) {
            return Err(Error::SingularSystem);
        }
        Ok(Self {
            d,
            eigvecs: eig.U().to_owned(),
            eigvals,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Mat::identity(n, n)).expect("identity is positive definite")
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.d.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    /// Smallest eigenvalue of `D^T D`.
    pub fn sigma_min(&self) -> f64 {
        self.eigvals.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let dx = matvec(self.d.as_ref(), x);
        Ok(0.5 * dx.iter().map(|v| v * v).sum::<f64>())
    }

    /// Solves `(I + c D^T D) x = z`.
    pub fn prox(&self, z: &[f64], c: f64) -> Result<Vec<f64>> {
        self.check(z)?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::NonpositiveWeight(c));
        }
        let mut coords = matvec(self.eigvecs.transpose(), z);
        for (ci, l) in coords.iter_mut().zip(&self.eigvals) {
            let denom = 1.0 + c * l;
            if !(denom > 0.0) {
                return Err(Error::SingularSystem);
            }
            *ci /= denom;
        }
        Ok(matvec(self.eigvecs.as_ref(), &coords))
    }

    /// Global Lipschitz constant of `prox(., c)`: `1 / (1 + c sigma_min(D^T D))`.
    pub fn lipschitz(&self, c: f64) -> f64 {
        1.0 / (1.0 + c * self.sigma_min())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "quadratic regularizer",
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

pub fn tikhonov_prox(z: &[f64], beta: f64, reg: &Quadratic) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::NonpositiveWeight(beta));
    }
    reg.prox(z, beta)
}

/// `delta = 1 - k` with `k` the Lipschitz constant of the Tikhonov prox.
///
/// The prox is a `k`-contraction on all of `R^n`, so it contracts by at least
/// `1 - delta` on the null space of any full-row-rank `op`.
pub fn contraction_delta(prior: &Prior, op: &DenseOperator) -> Result<f64> {
    match prior {
        Prior::Tikhonov { beta, reg } => {
            if reg.dim() != op.cols() {
                return Err(Error::DimensionMismatch {
                    context: "contraction_delta",
                    expected: op.cols(),
                    found: reg.dim(),
                });
            }
            Ok(1.0 - reg.lipschitz(*beta))
        }
        other => Err(Error::WrongVariant {
            operation: "contraction_delta",
            found: other.name(),
        }),
    }
}
