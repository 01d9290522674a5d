//! Least-squares and back-projection data terms.
//!
//! Both terms share the gradient shape `W (A x - y)`: `W = A^T` for LS and
//! `W = A^+` for BP. The BP term is `1/2 ||A^+ (y - A x)||^2`, which equals
//! `1/2 ||(A A^T)^{-1/2} (y - A x)||^2`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::DenseOperator;
use crate::vecops::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FidelityKind {
    #[serde(rename = "LS", alias = "ls")]
    Ls,
    #[serde(rename = "BP", alias = "bp")]
    Bp,
}

impl FidelityKind {
    pub const BOTH: [FidelityKind; 2] = [FidelityKind::Ls, FidelityKind::Bp];

    pub fn as_str(self) -> &'static str {
        match self {
            FidelityKind::Ls => "LS",
            FidelityKind::Bp => "BP",
        }
    }
}

impl fmt::Display for FidelityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FidelityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(FidelityKind::Ls),
            "bp" => Ok(FidelityKind::Bp),
            other => Err(Error::Config(format!("unknown fidelity kind {other:?}"))),
        }
    }
}

/// A data term bound to an operator and an observation.
#[derive(Debug, Clone)]
pub struct FidelityTerm {
    kind: FidelityKind,
    op: Arc<DenseOperator>,
    y: Vec<f64>,
}

impl FidelityTerm {
    pub fn new(kind: FidelityKind, op: Arc<DenseOperator>, y: Vec<f64>) -> Result<Self> {
        if y.len() != op.rows() {
            return Err(Error::DimensionMismatch {
                context: "observation",
                expected: op.rows(),
                found: y.len(),
            });
        }
        Ok(Self { kind, op, y })
    }

    pub fn kind(&self) -> FidelityKind {
        self.kind
    }

    pub fn operator(&self) -> &Arc<DenseOperator> {
        &self.op
    }

    pub fn observation(&self) -> &[f64] {
        &self.y
    }

    /// The same operator and observation under the other data term.
    pub fn with_kind(&self, kind: FidelityKind) -> Self {
        Self {
            kind,
            op: Arc::clone(&self.op),
            y: self.y.clone(),
        }
    }

    /// `y - A x`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ax = self.op.forward(x)?;
        Ok(self.y.iter().zip(&ax).map(|(y, a)| y - a).collect())
    }

    /// `W r`, i.e. `A^T r` or `A^+ r`.
    pub fn back_project(&self, r: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            FidelityKind::Ls => self.op.adjoint(r),
            FidelityKind::Bp => self.op.pinv(r),
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        let n = match self.kind {
            FidelityKind::Ls => norm2(&r),
            FidelityKind::Bp => norm2(&self.op.pinv(&r)?),
        };
        Ok(0.5 * n * n)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(x)?;
        let mut g = self.back_project(&r)?;
        g.iter_mut().for_each(|v| *v = -*v);
        Ok(g)
    }

    /// `1 / L`: `1/sigma_max(A A^T)` for LS and exactly 1 for BP.
    pub fn default_step_size(&self) -> f64 {
        match self.kind {
            FidelityKind::Ls => 1.0 / self.op.spectral_summary().sigma_max,
            FidelityKind::Bp => 1.0,
        }
    }
}

pub fn fidelity_value(f: &FidelityTerm, x: &[f64]) -> Result<f64> {
    f.value(x)
}

pub fn fidelity_gradient(f: &FidelityTerm, x: &[f64]) -> Result<Vec<f64>> {
    f.gradient(x)
}

pub fn default_step_size(f: &FidelityTerm) -> f64 {
    f.default_step_size()
}
