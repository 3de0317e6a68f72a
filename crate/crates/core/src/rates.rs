//! Susceptivities, damping rates, transition matrix and Lamb-type shifts.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BohrTable, ModelError, ReservoirSpec, SystemSpec};
use crate::quadrature::{principal_value, QuadError};

/// Relative tolerance of the principal-value quadrature.
pub const PV_REL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("principal-value quadrature failed at omega = {omega}: {source}")]
    QuadratureFailure {
        omega: f64,
        #[source]
        source: QuadError,
    },
    #[error("pv_cutoff {cutoff} must exceed the Bohr frequency {omega}")]
    InvalidCutoff { omega: f64, cutoff: f64 },
    #[error("{given} reservoirs supplied for {expected} dipole matrices")]
    ReservoirCount { given: usize, expected: usize },
    #[error("rate from level {from} to level {to} vanishes")]
    ZeroDenominator { from: usize, to: usize },
    #[error("level index out of range or repeated: ({0}, {1})")]
    BadLevelPair(usize, usize),
}

/// Treatment of the imaginary parts of the susceptivities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambShift {
    /// Principal-value quadrature.
    #[default]
    Pv,
    /// All imaginary parts set to zero.
    None,
}

/// Complex rates of one reservoir at one Bohr frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptivity {
    pub gamma_minus: Complex64,
    pub gamma_plus: Complex64,
}

impl Susceptivity {
    const ZERO: Self = Self {
        gamma_minus: Complex64::new(0.0, 0.0),
        gamma_plus: Complex64::new(0.0, 0.0),
    };
}

/// Susceptivities of `reservoir` for a transition of weight `weight` at `omega`.
///
/// Real parts are `pi w J(omega) (N + 1)` and `pi w J(omega) N`; imaginary
/// parts are `w PV ∫ J(nu) (N(nu) + 1 or N(nu)) / (nu - omega) dnu` over
/// the support of the Bose factor up to `pv_cutoff`.
pub fn susceptivity(
    reservoir: &ReservoirSpec,
    weight: f64,
    omega: f64,
    lamb: LambShift,
) -> Result<Susceptivity, RateError> {
    let n = reservoir.occupation(omega)?;
    let coupling = PI * weight * reservoir.spectral_density.eval(omega);
    let mut s = Susceptivity {
        gamma_minus: Complex64::new(coupling * (n + 1.0), 0.0),
        gamma_plus: Complex64::new(coupling * n, 0.0),
    };
    if lamb == LambShift::Pv && weight > 0.0 {
        let (minus, plus) = unit_shifts(reservoir, omega)?;
        s.gamma_minus.im = weight * minus;
        s.gamma_plus.im = weight * plus;
    }
    Ok(s)
}

/// Principal values of `J (N + 1)` and `J N` against `1 / (nu - omega)`.
fn unit_shifts(reservoir: &ReservoirSpec, omega: f64) -> Result<(f64, f64), RateError> {
    let a = reservoir.support_start();
    let b = reservoir.pv_cutoff;
    if b <= omega {
        return Err(RateError::InvalidCutoff { omega, cutoff: b });
    }
    let occ = |nu: f64| reservoir.occupation(nu).unwrap_or(f64::NAN);
    let jd = |nu: f64| reservoir.spectral_density.eval(nu);
    let wrap = |source| RateError::QuadratureFailure { omega, source };
    let plus = principal_value(|nu| jd(nu) * occ(nu), a, b, omega, PV_REL_TOL).map_err(wrap)?;
    let vacuum = principal_value(jd, a, b, omega, PV_REL_TOL).map_err(wrap)?;
    Ok((plus + vacuum, plus))
}

/// All rates of a system coupled to its reservoirs.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSet {
    levels: Vec<f64>,
    bohr: BohrTable,
    lamb: LambShift,
    susceptivities: Vec<Vec<Susceptivity>>,
    couplings: Vec<Vec<f64>>,
    exponents: Vec<Vec<f64>>,
    chemical_potentials: Vec<f64>,
    gamma_minus: Vec<f64>,
    gamma_plus: Vec<f64>,
    theta_minus: Vec<f64>,
    theta_plus: Vec<f64>,
    transition: DMatrix<f64>,
    dephasing: DMatrix<f64>,
    shift: DMatrix<f64>,
    lamb_diag: Vec<f64>,
}

pub fn rate_set(
    system: &SystemSpec,
    reservoirs: &[ReservoirSpec],
    lamb: LambShift,
) -> Result<RateSet, RateError> {
    if reservoirs.len() != system.n_reservoirs() {
        return Err(RateError::ReservoirCount {
            given: reservoirs.len(),
            expected: system.n_reservoirs(),
        });
    }
    let bohr = system.bohr().clone();
    let nb = bohr.len();
    let mut susceptivities = Vec::with_capacity(reservoirs.len());
    let mut couplings = Vec::with_capacity(reservoirs.len());
    let mut exponents = Vec::with_capacity(reservoirs.len());
    for (j, res) in reservoirs.iter().enumerate() {
        res.validate_against(&bohr)?;
        let mut row = Vec::with_capacity(nb);
        let mut crow = Vec::with_capacity(nb);
        let mut xrow = Vec::with_capacity(nb);
        for e in bohr.iter() {
            let w = system.transition_weight(j, e.upper, e.lower);
            crow.push(PI * w * res.spectral_density.eval(e.omega));
            xrow.push(res.exponent(e.omega)?);
            row.push(if w > 0.0 {
                susceptivity(res, w, e.omega, lamb)?
            } else {
                Susceptivity::ZERO
            });
        }
        susceptivities.push(row);
        couplings.push(crow);
        exponents.push(xrow);
    }

    let sum_over = |f: &dyn Fn(&Susceptivity) -> f64| -> Vec<f64> {
        (0..nb)
            .map(|k| susceptivities.iter().map(|row| f(&row[k])).sum())
            .collect()
    };
    let gamma_minus: Vec<f64> = sum_over(&|s| 2.0 * s.gamma_minus.re);
    let gamma_plus: Vec<f64> = sum_over(&|s| 2.0 * s.gamma_plus.re);
    let theta_minus: Vec<f64> = sum_over(&|s| s.gamma_minus.im);
    let theta_plus: Vec<f64> = sum_over(&|s| s.gamma_plus.im);

    let n = system.dim();
    let mut transition = DMatrix::zeros(n, n);
    let mut lamb_diag = vec![0.0; n];
    for (k, e) in bohr.iter().enumerate() {
        transition[(e.upper, e.lower)] = gamma_minus[k];
        transition[(e.lower, e.upper)] = gamma_plus[k];
        lamb_diag[e.upper] -= theta_minus[k];
        lamb_diag[e.lower] += theta_plus[k];
    }
    let out_rate: Vec<f64> = (0..n).map(|m| transition.row(m).sum()).collect();
    let dephasing = DMatrix::from_fn(n, n, |m, l| {
        if m == l {
            0.0
        } else {
            0.5 * (out_rate[m] + out_rate[l])
        }
    });
    let shift = DMatrix::from_fn(n, n, |m, l| lamb_diag[l] - lamb_diag[m]);

    Ok(RateSet {
        levels: system.levels().to_vec(),
        bohr,
        lamb,
        susceptivities,
        couplings,
        exponents,
        chemical_potentials: reservoirs.iter().map(|r| r.chemical_potential()).collect(),
        gamma_minus,
        gamma_plus,
        theta_minus,
        theta_plus,
        transition,
        dephasing,
        shift,
        lamb_diag,
    })
}

impl RateSet {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bohr(&self) -> &BohrTable {
        &self.bohr
    }

    pub fn lamb_mode(&self) -> LambShift {
        self.lamb
    }

    pub fn n_reservoirs(&self) -> usize {
        self.susceptivities.len()
    }

    /// Susceptivity of reservoir `j` at Bohr index `k`.
    pub fn susceptivity(&self, j: usize, k: usize) -> Susceptivity {
        self.susceptivities[j][k]
    }

    /// `pi |d|^2 J(omega)` of reservoir `j` at Bohr index `k`.
    pub fn coupling(&self, j: usize, k: usize) -> f64 {
        self.couplings[j][k]
    }

    /// Boltzmann exponent of reservoir `j` at Bohr index `k`.
    pub fn exponent(&self, j: usize, k: usize) -> f64 {
        self.exponents[j][k]
    }

    pub fn chemical_potentials(&self) -> &[f64] {
        &self.chemical_potentials
    }

    /// Total decay rates `Γ_{-,ω}` per Bohr index.
    pub fn gamma_minus(&self) -> &[f64] {
        &self.gamma_minus
    }

    /// Total excitation rates `Γ_{+,ω}` per Bohr index.
    pub fn gamma_plus(&self) -> &[f64] {
        &self.gamma_plus
    }

    pub fn theta_minus(&self) -> &[f64] {
        &self.theta_minus
    }

    pub fn theta_plus(&self) -> &[f64] {
        &self.theta_plus
    }

    /// `Γ_ml`: rate from level m to level l.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Coherence decay rates `G_mn = (Σ_l Γ_ml + Σ_l Γ_nl) / 2`, zero diagonal.
    pub fn dephasing(&self) -> &DMatrix<f64> {
        &self.dephasing
    }

    /// Frequency shifts `Δ_mn` of the coherences.
    pub fn shift(&self) -> &DMatrix<f64> {
        &self.shift
    }

    /// Diagonal of the Lamb-shift Hamiltonian.
    pub fn lamb_diag(&self) -> &[f64] {
        &self.lamb_diag
    }

    /// Smallest nonzero transition rate.
    pub fn min_rate(&self) -> f64 {
        self.transition
            .iter()
            .copied()
            .filter(|&g| g > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest relative cocycle defect `|q_ml q_lk / q_mk - 1|` over level
    /// triples with all six rates nonzero.
    pub fn max_cocycle_defect(&self) -> f64 {
        let n = self.dim();
        let q = |a: usize, b: usize| -> Option<f64> {
            let den = self.transition[(b, a)];
            let num = self.transition[(a, b)];
            (den > 0.0 && num > 0.0).then(|| num / den)
        };
        let mut worst: f64 = 0.0;
        for m in 0..n {
            for l in 0..n {
                for k in 0..n {
                    if m == l || l == k || m == k {
                        continue;
                    }
                    if let (Some(a), Some(b), Some(c)) = (q(m, l), q(l, k), q(m, k)) {
                        worst = worst.max((a * b / c - 1.0).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `Γ_ml / Γ_lm`.
pub fn rate_quotient(rates: &RateSet, m: usize, l: usize) -> Result<f64, RateError> {
    let n = rates.dim();
    if m >= n || l >= n || m == l {
        return Err(RateError::BadLevelPair(m, l));
    }
    let den = rates.transition[(l, m)];
    if den == 0.0 {
        return Err(RateError::ZeroDenominator { from: l, to: m });
    }
    Ok(rates.transition[(m, l)] / den)
}
