//! Validated parameter record for one value of kappa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green;

/// Main-theorem constant: an explicit value below kappa = 4, a critical
/// branch exactly at kappa = 4 (where the subcritical formula diverges and
/// the boundary measure switches to its derivative normalization).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TheoremConstant {
    /// 2 / ((4 - kappa)(1 - kappa/8)) for kappa in (0, 4).
    Subcritical(f64),
    /// kappa = 4: constant 2 paired with the critical boundary measure.
    Critical,
}

impl TheoremConstant {
    /// The multiplicative constant to apply to the boundary measure.
    pub fn value(&self) -> f64 {
        match self {
            TheoremConstant::Subcritical(c) => *c,
            TheoremConstant::Critical => 2.0,
        }
    }

    pub fn is_critical(&self) -> bool {
        matches!(self, TheoremConstant::Critical)
    }
}

/// kappa and every derived scalar used across the crate.
///
/// Construction validates the range and computes the Green's-function
/// normalization by quadrature once, so downstream code never re-derives
/// these quantities inconsistently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaParams {
    /// SLE parameter, in (0, 4] (simple-curve phase).
    pub kappa: f64,
    /// gamma = sqrt(kappa).
    pub gamma: f64,
    /// Curve dimension d = 1 + kappa/8.
    pub d: f64,
    /// Green's-function normalization c*_kappa.
    pub c_star: f64,
    /// Quantum-length constant (subcritical value or critical branch).
    pub theorem_constant: TheoremConstant,
}

impl KappaParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 4.0) || !kappa.is_finite() {
            return Err(Error::Parameter(format!(
                "kappa must lie in (0, 4], got {kappa}"
            )));
        }
        let theorem_constant = if kappa == 4.0 {
            TheoremConstant::Critical
        } else {
            TheoremConstant::Subcritical(2.0 / ((4.0 - kappa) * (1.0 - kappa / 8.0)))
        };
        Ok(Self {
            kappa,
            gamma: kappa.sqrt(),
            d: 1.0 + kappa / 8.0,
            c_star: green::c_star(kappa)?,
            theorem_constant,
        })
    }

    /// Exponent 2 - d appearing in all Minkowski-content rescalings.
    pub fn codim(&self) -> f64 {
        2.0 - self.d
    }
}
