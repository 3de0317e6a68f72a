//! Generalized temperature `β_S(H)`, the local KMS condition, the
//! dynamical-detailed-balance symmetry defect and the operator `L_G⁺`.
//!
//! `y(t + iβ_S(H))` is the similarity transform
//! `e^{-β_S(H)H} y(t) e^{β_S(H)H}` with `y(t) = e^{itH} y e^{-itH}`.

pub mod field;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::currents::CurrentReport;
use crate::dynamics::GeneratorOps;
use crate::linalg::{self, CMatrix};

/// Spread of `β_S` below which a profile counts as equilibrium.
pub const EQUILIBRIUM_SPREAD: f64 = 1e-10;
/// Relative bound on `‖L*(ρ)‖` for a state to count as stationary.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Times used by the basis sweep of the local KMS condition.
pub const KMS_TIMES: [f64; 4] = [0.0, 0.7, -0.7, 3.1];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmsError {
    #[error("population of level {0} is not strictly positive")]
    ZeroPopulation(usize),
    #[error("level {0} sits at zero energy; shift the energy origin")]
    ZeroEnergyLevel(usize),
    #[error("state has {state} levels, generator has {generator}")]
    DimensionMismatch { state: usize, generator: usize },
    #[error("state is not stationary: ‖L*(ρ)‖ = {residual:e}")]
    NotStationary { residual: f64 },
}

/// `β_S(ε_l) = -ln(ρ_ll)/ε_l` on a fixed energy origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureProfile {
    /// Energies the profile refers to (after any origin shift).
    pub levels: Vec<f64>,
    pub beta: Vec<f64>,
    /// `Σ_l e^{-β_S(ε_l) ε_l}`; one by construction up to rounding.
    pub z: f64,
    pub equilibrium: bool,
}

pub fn beta_profile(populations: &[f64], levels: &[f64]) -> Result<TemperatureProfile, KmsError> {
    if populations.len() != levels.len() {
        return Err(KmsError::DimensionMismatch {
            state: populations.len(),
            generator: levels.len(),
        });
    }
    if let Some(l) = populations.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(KmsError::ZeroPopulation(l));
    }
    if let Some(l) = levels.iter().position(|&e| e == 0.0) {
        return Err(KmsError::ZeroEnergyLevel(l));
    }
    let beta: Vec<f64> = populations
        .iter()
        .zip(levels)
        .map(|(p, e)| -p.ln() / e)
        .collect();
    let mut profile = TemperatureProfile {
        levels: levels.to_vec(),
        beta,
        z: 0.0,
        equilibrium: false,
    };
    profile.z = profile.weights().iter().sum();
    profile.equilibrium = profile.spread() < EQUILIBRIUM_SPREAD;
    Ok(profile)
}

impl TemperatureProfile {
    /// `e^{-β_S(ε_l) ε_l}`.
    pub fn weights(&self) -> Vec<f64> {
        self.beta
            .iter()
            .zip(&self.levels)
            .map(|(b, e)| (-b * e).exp())
            .collect()
    }

    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .beta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
        hi - lo
    }

    /// `e^{-β_S(H)H} / Z`.
    pub fn reconstruct(&self) -> CMatrix {
        let w: Vec<f64> = self.weights().iter().map(|w| w / self.z).collect();
        linalg::diag(&w)
    }
}

/// `y(t + iβ_S(H))`.
pub fn shifted_observable(profile: &TemperatureProfile, y: &CMatrix, t: f64) -> CMatrix {
    let w = profile.weights();
    let e = &profile.levels;
    CMatrix::from_fn(y.nrows(), y.ncols(), |a, b| {
        let phase = Complex64::from_polar(1.0, t * (e[a] - e[b]));
        y[(a, b)] * phase * (w[a] / w[b])
    })
}

/// `y(t) = e^{itH} y e^{-itH}`.
pub fn heisenberg(levels: &[f64], y: &CMatrix, t: f64) -> CMatrix {
    CMatrix::from_fn(y.nrows(), y.ncols(), |a, b| {
        y[(a, b)] * Complex64::from_polar(1.0, t * (levels[a] - levels[b]))
    })
}

/// `⟨x y(t + iβ_S(H))⟩ - ⟨y(t) x⟩` in the state `rho`.
pub fn local_kms_residual(
    rho: &CMatrix,
    profile: &TemperatureProfile,
    x: &CMatrix,
    y: &CMatrix,
    t: f64,
) -> Complex64 {
    let lhs = linalg::trace_product(&(rho * x), &shifted_observable(profile, y, t));
    let rhs = linalg::trace_product(&(rho * heisenberg(&profile.levels, y, t)), x);
    lhs - rhs
}

/// Largest local KMS residual over all matrix-unit pairs and `times`.
pub fn max_basis_residual(rho: &CMatrix, profile: &TemperatureProfile, times: &[f64]) -> f64 {
    let n = rho.nrows();
    let units: Vec<CMatrix> = (0..n * n)
        .map(|i| linalg::matrix_unit(n, i / n, i % n))
        .collect();
    let mut worst: f64 = 0.0;
    for x in &units {
        for y in &units {
            for &t in times {
                worst = worst.max(local_kms_residual(rho, profile, x, y, t).norm());
            }
        }
    }
    worst
}

/// Both evaluations of `tr(ρ X L(Y)) - tr(ρ L_B(X) Y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdbDefect {
    /// From the generators.
    pub direct: Complex64,
    /// From the summed micro-currents.
    pub from_currents: Complex64,
}

impl DdbDefect {
    pub fn discrepancy(&self) -> f64 {
        (self.direct - self.from_currents).norm()
    }
}

fn check_stationary(ops: &GeneratorOps, rho: &CMatrix) -> Result<(), KmsError> {
    if rho.nrows() != ops.dim() {
        return Err(KmsError::DimensionMismatch {
            state: rho.nrows(),
            generator: ops.dim(),
        });
    }
    let residual = linalg::frobenius(&ops.apply_state(rho));
    let scale = ops.transition().iter().fold(1.0_f64, |a, r| a.max(r.abs()));
    if residual > STATIONARY_TOL * scale {
        return Err(KmsError::NotStationary { residual });
    }
    Ok(())
}

/// Summed currents `Σ_j J_{j,lm}` indexed by ordered level pair, zero where no
/// channel exists.
fn pair_currents(report: &CurrentReport, n: usize) -> Vec<Vec<f64>> {
    let mut j = vec![vec![0.0; n]; n];
    for d in &report.ddb_defect {
        j[d.upper][d.lower] = d.value;
    }
    j
}

fn ddb_from_currents(j: &[Vec<f64>], levels: &[f64], x: &CMatrix, y: &CMatrix) -> Complex64 {
    let n = levels.len();
    let mut sum = Complex64::new(0.0, 0.0);
    for l in 0..n {
        for m in 0..n {
            let w = if levels[l] > levels[m] {
                j[l][m]
            } else if levels[m] > levels[l] {
                -j[m][l]
            } else {
                0.0
            };
            sum += x[(l, l)] * y[(m, m)] * w;
        }
    }
    sum
}

fn ddb_direct(ops: &GeneratorOps, rho: &CMatrix, x: &CMatrix, y: &CMatrix) -> Complex64 {
    linalg::trace_product(&(rho * x), &ops.apply_forward(y))
        - linalg::trace_product(&(rho * ops.apply_backward(x)), y)
}

/// Symmetry defect of a diagonal state; the current path sees only the
/// diagonal entries of `X` and `Y`.
pub fn ddb_symmetry_defect(
    ops: &GeneratorOps,
    report: &CurrentReport,
    rho: &CMatrix,
    x: &CMatrix,
    y: &CMatrix,
) -> Result<DdbDefect, KmsError> {
    check_stationary(ops, rho)?;
    let j = pair_currents(report, ops.dim());
    Ok(DdbDefect {
        direct: ddb_direct(ops, rho, x, y),
        from_currents: ddb_from_currents(&j, ops.levels(), x, y),
    })
}

/// Per-projector-pair defects and the worst path discrepancy over the full
/// matrix-unit basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdbReport {
    pub pairs: Vec<DdbEntry>,
    pub max_discrepancy: f64,
    pub max_defect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdbEntry {
    pub a: usize,
    pub b: usize,
    pub direct_re: f64,
    pub direct_im: f64,
    pub from_currents: f64,
}

pub fn ddb_report(ops: &GeneratorOps, report: &CurrentReport, rho: &CMatrix) -> Result<DdbReport, KmsError> {
    check_stationary(ops, rho)?;
    let n = ops.dim();
    let j = pair_currents(report, n);
    let units: Vec<CMatrix> = (0..n * n)
        .map(|i| linalg::matrix_unit(n, i / n, i % n))
        .collect();
    let mut max_discrepancy: f64 = 0.0;
    for x in &units {
        for y in &units {
            let d = DdbDefect {
                direct: ddb_direct(ops, rho, x, y),
                from_currents: ddb_from_currents(&j, ops.levels(), x, y),
            };
            max_discrepancy = max_discrepancy.max(d.discrepancy());
        }
    }
    let mut pairs = Vec::with_capacity(n * n);
    let mut max_defect: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (&units[a * n + a], &units[b * n + b]);
            let direct = ddb_direct(ops, rho, x, y);
            max_defect = max_defect.max(direct.norm());
            pairs.push(DdbEntry {
                a,
                b,
                direct_re: direct.re,
                direct_im: direct.im,
                from_currents: ddb_from_currents(&j, ops.levels(), x, y).re,
            });
        }
    }
    Ok(DdbReport {
        pairs,
        max_discrepancy,
        max_defect,
    })
}

/// Coefficients of `Π̂_ω(X) = down · E†XE + up · EXE†` for `E = |n⟩⟨m|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiHat {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    /// `Γ_+ e^{β_S(ε_m)ε_m - β_S(ε_n)ε_n} - Γ_-`.
    pub down: f64,
    /// `Γ_- e^{β_S(ε_n)ε_n - β_S(ε_m)ε_m} - Γ_+`.
    pub up: f64,
}

pub fn pi_hat_coefficients(ops: &GeneratorOps, profile: &TemperatureProfile) -> Vec<PiHat> {
    let w = profile.weights();
    ops.channels()
        .iter()
        .map(|c| {
            let (m, n) = (c.upper, c.lower);
            PiHat {
                upper: m,
                lower: n,
                omega: c.omega,
                down: c.gamma_plus * w[n] / w[m] - c.gamma_minus,
                up: c.gamma_minus * w[m] / w[n] - c.gamma_plus,
            }
        })
        .collect()
}

/// `L_G⁺(X) = L_B(X) + Σ_ω Π̂_ω(X)`.
pub fn lg_plus(ops: &GeneratorOps, profile: &TemperatureProfile, x: &CMatrix) -> CMatrix {
    let mut out = ops.apply_backward(x);
    for p in pi_hat_coefficients(ops, profile) {
        let (m, n) = (p.upper, p.lower);
        out[(m, m)] += x[(n, n)] * p.down;
        out[(n, n)] += x[(m, m)] * p.up;
    }
    out
}

/// `L_G⁺(1) = Σ_ω Π̂_ω(1)`.
///
/// On level m this is `-J_m/ρ_mm` with `J_m` the net outflow, so it vanishes
/// whenever the profile comes from a stationary state, even though the
/// individual `Π̂_ω(1)` do not off equilibrium.
pub fn lg_plus_defect(ops: &GeneratorOps, profile: &TemperatureProfile) -> CMatrix {
    lg_plus(ops, profile, &linalg::identity(ops.dim()))
}

/// `tr(ρ L_G⁺(X) Y) - tr(ρ X L(Y))` with `ρ` reconstructed from `profile`.
pub fn adjoint_defect(
    ops: &GeneratorOps,
    profile: &TemperatureProfile,
    x: &CMatrix,
    y: &CMatrix,
) -> Complex64 {
    let rho = profile.reconstruct();
    let lhs = linalg::trace_product(&(&rho * lg_plus(ops, profile, x)), y);
    let rhs = linalg::trace_product(&(&rho * x), &ops.apply_forward(y));
    lhs - rhs
}

/// Summary for one stationary state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmsReport {
    pub profile: TemperatureProfile,
    pub times: Vec<f64>,
    pub max_kms_residual: f64,
    pub lg_plus_norm: f64,
    pub pi_hat: Vec<PiHat>,
}

pub fn kms_report(
    ops: &GeneratorOps,
    rho: &CMatrix,
    energy_offset: f64,
) -> Result<KmsReport, KmsError> {
    check_stationary(ops, rho)?;
    let levels: Vec<f64> = ops.levels().iter().map(|e| e + energy_offset).collect();
    let populations: Vec<f64> = rho.diagonal().iter().map(|z| z.re).collect();
    let profile = beta_profile(&populations, &levels)?;
    let max_kms_residual = max_basis_residual(rho, &profile, &KMS_TIMES);
    Ok(KmsReport {
        lg_plus_norm: linalg::frobenius(&lg_plus_defect(ops, &profile)),
        pi_hat: pi_hat_coefficients(ops, &profile),
        times: KMS_TIMES.to_vec(),
        max_kms_residual,
        profile,
    })
}
