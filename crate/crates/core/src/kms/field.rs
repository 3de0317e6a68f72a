//! Gauge-invariant boson Gaussian field on a finite mode grid.
//!
//! Two-point functions are diagonal in the mode label:
//! `⟨a_k a†_k⟩ = m(k) = n(k) + 1`, `⟨a†_k a_k⟩ = n(k)`. Free evolution is
//! `a_k(s) = e^{-iω_k s} a_k`, `a†_k(s) = e^{iω_k s} a†_k` for complex `s`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{I, ONE, ZERO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("mode {0}: occupation must be positive and finite")]
    InvalidOccupation(usize),
    #[error("mode {0}: frequency must be positive and finite")]
    InvalidFrequency(usize),
    #[error("{omega} frequencies for {n} occupations")]
    LengthMismatch { omega: usize, n: usize },
    #[error("mode label {0} is outside the grid")]
    UnknownMode(usize),
    #[error("creation and annihilation counts differ; both sides vanish")]
    UnbalancedGaugePattern,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldTwoPoint {
    omega: Vec<f64>,
    n: Vec<f64>,
    beta_loc: Vec<f64>,
}

/// One creation (`create = true`) or annihilation operator at complex time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOp {
    pub mode: usize,
    pub create: bool,
    pub time: Complex64,
}

impl FieldOp {
    pub fn new(mode: usize, create: bool, time: Complex64) -> Self {
        Self { mode, create, time }
    }
}

impl FieldTwoPoint {
    pub fn new(omega: Vec<f64>, n: Vec<f64>) -> Result<Self, FieldError> {
        if omega.len() != n.len() {
            return Err(FieldError::LengthMismatch {
                omega: omega.len(),
                n: n.len(),
            });
        }
        if let Some(k) = omega.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(FieldError::InvalidFrequency(k));
        }
        if let Some(k) = n.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(FieldError::InvalidOccupation(k));
        }
        let beta_loc = omega
            .iter()
            .zip(&n)
            .map(|(w, nk)| -(nk / (nk + 1.0)).ln() / w)
            .collect();
        Ok(Self { omega, n, beta_loc })
    }

    /// Planck occupations at inverse temperature `beta`.
    pub fn thermal(omega: Vec<f64>, beta: f64) -> Result<Self, FieldError> {
        let n = omega.iter().map(|w| 1.0 / (beta * w).exp_m1()).collect();
        Self::new(omega, n)
    }

    /// Replaces the local inverse temperature of one mode.
    pub fn with_beta(mut self, k: usize, beta: f64) -> Self {
        self.beta_loc[k] = beta;
        self
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.omega[k]
    }

    pub fn n(&self, k: usize) -> f64 {
        self.n[k]
    }

    pub fn m(&self, k: usize) -> f64 {
        self.n[k] + 1.0
    }

    pub fn beta_loc(&self, k: usize) -> f64 {
        self.beta_loc[k]
    }

    fn phase(&self, op: &FieldOp) -> Complex64 {
        let sign = if op.create { 1.0 } else { -1.0 };
        (I * sign * self.omega[op.mode] * op.time).exp()
    }

    /// `⟨x y⟩` for two single operators.
    pub fn two_point(&self, x: &FieldOp, y: &FieldOp) -> Complex64 {
        if x.mode != y.mode || x.create == y.create {
            return ZERO;
        }
        let weight = if x.create { self.n(x.mode) } else { self.m(x.mode) };
        self.phase(x) * self.phase(y) * weight
    }

    /// Wick expansion over all pair partitions, each with weight one.
    pub fn wick_expectation(&self, ops: &[FieldOp]) -> Complex64 {
        if ops.is_empty() {
            return ONE;
        }
        if ops.len() % 2 == 1 {
            return ZERO;
        }
        let first = &ops[0];
        let mut total = ZERO;
        for j in 1..ops.len() {
            let pair = self.two_point(first, &ops[j]);
            if pair == ZERO {
                continue;
            }
            let rest: Vec<FieldOp> = ops[1..]
                .iter()
                .enumerate()
                .filter(|(i, _)| *i + 1 != j)
                .map(|(_, o)| *o)
                .collect();
            total += pair * self.wick_expectation(&rest);
        }
        total
    }

    fn check_modes(&self, modes: impl IntoIterator<Item = usize>) -> Result<(), FieldError> {
        for k in modes {
            if k >= self.len() {
                return Err(FieldError::UnknownMode(k));
            }
        }
        Ok(())
    }
}

/// Residuals of `⟨a_k a†_{k'}(t+iβ(k'))⟩ = ⟨a†_{k'}(t) a_k⟩` and
/// `⟨a†_k a_{k'}(t+iβ(k'))⟩ = ⟨a_{k'}(t) a†_k⟩`.
pub fn field_local_kms_check(
    field: &FieldTwoPoint,
    k: usize,
    kp: usize,
    t: f64,
) -> Result<(Complex64, Complex64), FieldError> {
    field.check_modes([k, kp])?;
    let zero = Complex64::new(0.0, 0.0);
    let shifted = Complex64::new(t, field.beta_loc(kp));
    let plain = Complex64::new(t, 0.0);
    let aa = field.two_point(&FieldOp::new(k, false, zero), &FieldOp::new(kp, true, shifted))
        - field.two_point(&FieldOp::new(kp, true, plain), &FieldOp::new(k, false, zero));
    let ad = field.two_point(&FieldOp::new(k, true, zero), &FieldOp::new(kp, false, shifted))
        - field.two_point(&FieldOp::new(kp, false, plain), &FieldOp::new(k, true, zero));
    Ok((aa, ad))
}

/// Both sides of the local KMS identity for one operator pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

impl WickCheck {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }
}

/// Compares `⟨k-ops(0) h-ops(t + iβ_h)⟩` with `⟨h-ops(t) k-ops(0)⟩`.
///
/// Patterns are `(mode, create)` pairs in written order; the `h` block is
/// written `h_n … h_1` on both sides.
pub fn gaussian_wick_check(
    field: &FieldTwoPoint,
    k_ops: &[(usize, bool)],
    h_ops: &[(usize, bool)],
    t: f64,
) -> Result<WickCheck, FieldError> {
    field.check_modes(k_ops.iter().chain(h_ops).map(|o| o.0))?;
    let creations = k_ops.iter().chain(h_ops).filter(|o| o.1).count();
    if 2 * creations != k_ops.len() + h_ops.len() {
        return Err(FieldError::UnbalancedGaugePattern);
    }
    let at = |ops: &[(usize, bool)], time: &dyn Fn(usize) -> Complex64| -> Vec<FieldOp> {
        ops.iter().map(|&(k, c)| FieldOp::new(k, c, time(k))).collect()
    };
    let zero = |_| Complex64::new(0.0, 0.0);
    let shifted = |k| Complex64::new(t, field.beta_loc(k));
    let plain = |_| Complex64::new(t, 0.0);

    let mut lhs_ops = at(k_ops, &zero);
    lhs_ops.extend(at(h_ops, &shifted));
    let mut rhs_ops = at(h_ops, &plain);
    rhs_ops.extend(at(k_ops, &zero));
    Ok(WickCheck {
        lhs: field.wick_expectation(&lhs_ops),
        rhs: field.wick_expectation(&rhs_ops),
    })
}
