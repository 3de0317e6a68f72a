//! Micro-currents per reservoir and Bohr frequency, balance identities and
//! (dynamical) detailed-balance diagnostics.
//!
//! `J_{j,mn} = 2 (Re γ_- ρ_mm - Re γ_+ ρ_nn)` for `ε_m > ε_n`: the net rate
//! of `m → n` transitions driven by reservoir `j`, i.e. quanta delivered
//! into that reservoir per unit time.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{DensityMatrix, GeneratorOps};
use crate::linalg;
use crate::model::{ReservoirKind, ReservoirSpec};
use crate::rates::RateSet;

/// Threshold on `|Σ_j J_{j,mn}|` below which detailed balance is declared.
pub const DB_TOL: f64 = 1e-9;
/// Slack applied to the Gibbs domination bounds.
pub const GIBBS_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurrentError {
    #[error("rate Re γ- of reservoir {reservoir} on gap ({level}, 0) vanishes")]
    ZeroDenominator { reservoir: usize, level: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Gibbs domination needs exactly two equilibrium reservoirs")]
    NotTwoEquilibriumBaths,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCurrent {
    pub reservoir: usize,
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    /// Number current `J`.
    pub number: f64,
    /// Energy current `ω J`.
    pub energy: f64,
    /// Heat current `J^E - μ_j J`.
    pub heat: f64,
    /// Both rates vanish for this reservoir and pair.
    pub inactive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairDefect {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    /// `Σ_j J_{j,mn} = Γ_mn ρ_mm - Γ_nm ρ_nn`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentReport {
    /// Reservoir-major, Bohr-table order within each reservoir.
    pub currents: Vec<PairCurrent>,
    /// `J_m`: net quanta emitted from level m per unit time.
    pub level_balance: Vec<f64>,
    /// `Σ_{j, m>n} J^E_{j,mn} = -d/dt tr(H ρ)`.
    pub total_energy_flow: f64,
    pub ddb_defect: Vec<PairDefect>,
    pub db_satisfied: bool,
    pub gibbs_bound: Option<Vec<GibbsVerdict>>,
    #[serde(skip)]
    n_bohr: usize,
}

impl CurrentReport {
    pub fn n_reservoirs(&self) -> usize {
        self.currents.len().checked_div(self.n_bohr).unwrap_or(0)
    }

    /// Current of reservoir `j` at Bohr index `k`.
    pub fn current(&self, j: usize, k: usize) -> &PairCurrent {
        &self.currents[j * self.n_bohr + k]
    }

    pub fn find(&self, j: usize, upper: usize, lower: usize) -> Option<&PairCurrent> {
        self.currents
            .iter()
            .find(|c| c.reservoir == j && c.upper == upper && c.lower == lower)
    }

    /// Total energy current into reservoir `j`.
    pub fn reservoir_energy_current(&self, j: usize) -> f64 {
        self.currents
            .iter()
            .filter(|c| c.reservoir == j)
            .map(|c| c.energy)
            .sum()
    }

    pub fn reservoir_number_current(&self, j: usize) -> f64 {
        self.currents
            .iter()
            .filter(|c| c.reservoir == j)
            .map(|c| c.number)
            .sum()
    }

    pub fn max_abs_number(&self) -> f64 {
        self.currents.iter().fold(0.0, |a, c| a.max(c.number.abs()))
    }

    pub fn max_abs_defect(&self) -> f64 {
        self.ddb_defect.iter().fold(0.0, |a, d| a.max(d.value.abs()))
    }
}

pub fn micro_currents(rates: &RateSet, rho: &DensityMatrix) -> CurrentReport {
    let p = rho.populations();
    let bohr = rates.bohr();
    let nb = bohr.len();
    let mut currents = Vec::with_capacity(rates.n_reservoirs() * nb);
    let mut level_balance = vec![0.0; rates.dim()];
    let mut defects: Vec<PairDefect> = bohr
        .iter()
        .map(|e| PairDefect {
            upper: e.upper,
            lower: e.lower,
            omega: e.omega,
            value: 0.0,
        })
        .collect();
    let mut total_energy_flow = 0.0;
    for j in 0..rates.n_reservoirs() {
        let mu = rates.chemical_potentials()[j];
        for (k, e) in bohr.iter().enumerate() {
            let s = rates.susceptivity(j, k);
            let inactive = s.gamma_minus.re == 0.0 && s.gamma_plus.re == 0.0;
            let number = 2.0 * (s.gamma_minus.re * p[e.upper] - s.gamma_plus.re * p[e.lower]);
            let energy = e.omega * number;
            currents.push(PairCurrent {
                reservoir: j,
                upper: e.upper,
                lower: e.lower,
                omega: e.omega,
                number,
                energy,
                heat: energy - mu * number,
                inactive,
            });
            level_balance[e.upper] += number;
            level_balance[e.lower] -= number;
            defects[k].value += number;
            total_energy_flow += energy;
        }
    }
    let db_satisfied = defects.iter().all(|d| d.value.abs() < DB_TOL);
    CurrentReport {
        currents,
        level_balance,
        total_energy_flow,
        ddb_defect: defects,
        db_satisfied,
        gibbs_bound: None,
        n_bohr: nb,
    }
}

/// Residuals of `J_m = -d/dt ρ_mm` and `Σ J^E = -d/dt tr(H ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceResiduals {
    pub level: Vec<f64>,
    pub energy: f64,
}

impl BalanceResiduals {
    pub fn max_abs(&self) -> f64 {
        self.level
            .iter()
            .fold(self.energy.abs(), |a, r| a.max(r.abs()))
    }
}

pub fn level_balance(
    report: &CurrentReport,
    ops: &GeneratorOps,
    rho: &DensityMatrix,
) -> BalanceResiduals {
    let drho = ops.apply_state(rho.matrix());
    let level = report
        .level_balance
        .iter()
        .enumerate()
        .map(|(m, jm)| jm + drho[(m, m)].re)
        .collect();
    let denergy: f64 = ops
        .levels()
        .iter()
        .enumerate()
        .map(|(m, e)| e * drho[(m, m)].re)
        .sum();
    BalanceResiduals {
        level,
        energy: report.total_energy_flow + denergy,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailedBalance {
    pub satisfied: bool,
    /// `defect[(m, l)] = ρ_mm Γ_ml - ρ_ll Γ_lm`.
    pub defect: DMatrix<f64>,
    pub max_defect: f64,
}

pub fn detailed_balance_test(rates: &RateSet, rho: &DensityMatrix) -> DetailedBalance {
    let p = rho.populations();
    let g = rates.transition();
    let n = rates.dim();
    let defect = DMatrix::from_fn(n, n, |m, l| p[m] * g[(m, l)] - p[l] * g[(l, m)]);
    let max_defect = defect.amax();
    DetailedBalance {
        satisfied: max_defect < DB_TOL,
        defect,
        max_defect,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsStatus {
    Holds,
    Violated,
    /// Currents not of opposite sign.
    SameSignCurrents,
    /// `ρ_mm > ρ_nn`.
    Inverted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsVerdict {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub status: GibbsStatus,
}

/// Checks `e^{-x_a} ≤ ρ_mm/ρ_nn ≤ e^{-x_b}` (`x_j = β_j (ω - μ_j)`, ordered)
/// on pairs whose two micro-currents have opposite signs.
pub fn gibbs_domination(
    rates: &RateSet,
    reservoirs: &[ReservoirSpec],
    rho: &DensityMatrix,
) -> Result<Vec<GibbsVerdict>, CurrentError> {
    let two_eq = reservoirs.len() == 2
        && rates.n_reservoirs() == 2
        && reservoirs
            .iter()
            .all(|r| matches!(r.kind, ReservoirKind::Equilibrium { .. }));
    if !two_eq {
        return Err(CurrentError::NotTwoEquilibriumBaths);
    }
    let report = micro_currents(rates, rho);
    let p = rho.populations();
    let mut out = Vec::with_capacity(rates.bohr().len());
    for (k, e) in rates.bohr().iter().enumerate() {
        let b1 = (-reservoirs[0].exponent(e.omega).map_err(|_| CurrentError::NotTwoEquilibriumBaths)?).exp();
        let b2 = (-reservoirs[1].exponent(e.omega).map_err(|_| CurrentError::NotTwoEquilibriumBaths)?).exp();
        let (lo, hi) = (b1.min(b2), b1.max(b2));
        let ratio = p[e.upper] / p[e.lower];
        let j1 = report.current(0, k).number;
        let j2 = report.current(1, k).number;
        let status = if p[e.upper] > p[e.lower] {
            GibbsStatus::Inverted
        } else if j1 * j2 >= 0.0 {
            GibbsStatus::SameSignCurrents
        } else if ratio >= lo - GIBBS_SLACK && ratio <= hi + GIBBS_SLACK {
            GibbsStatus::Holds
        } else {
            GibbsStatus::Violated
        };
        out.push(GibbsVerdict {
            upper: e.upper,
            lower: e.lower,
            omega: e.omega,
            ratio,
            lower_bound: lo,
            upper_bound: hi,
            status,
        });
    }
    Ok(out)
}

/// Rebuilds every `J_{j,mn}` from `ρ_00` and the ground-state currents
/// `ground[j][m] = J_{j,m0}` (entry 0 unused). Result is `[j][k]` in Bohr order.
pub fn current_recursion(
    rates: &RateSet,
    rho00: f64,
    ground: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, CurrentError> {
    let n = rates.dim();
    if ground.len() != rates.n_reservoirs() || ground.iter().any(|g| g.len() != n) {
        return Err(CurrentError::DimensionMismatch(format!(
            "expected {} rows of length {n}",
            rates.n_reservoirs()
        )));
    }
    let bohr = rates.bohr();
    let mut out = Vec::with_capacity(ground.len());
    for (j, g) in ground.iter().enumerate() {
        let re = |upper: usize, lower: usize| {
            let k = bohr.index_of(upper, lower).expect("pair exists");
            let s = rates.susceptivity(j, k);
            (s.gamma_minus.re, s.gamma_plus.re)
        };
        let mut row = Vec::with_capacity(bohr.len());
        for e in bohr.iter() {
            let (m, l) = (e.upper, e.lower);
            if l == 0 {
                row.push(g[m]);
                continue;
            }
            let (gm, gp) = re(m, l);
            if gm == 0.0 && gp == 0.0 {
                row.push(0.0);
                continue;
            }
            let (am, bm) = re(m, 0);
            let (an, bn) = re(l, 0);
            if am == 0.0 {
                return Err(CurrentError::ZeroDenominator { reservoir: j, level: m });
            }
            if an == 0.0 {
                return Err(CurrentError::ZeroDenominator { reservoir: j, level: l });
            }
            let value = 2.0 * (gm * bm / am - gp * bn / an) * rho00 + gm / am * g[m]
                - gp / an * g[l];
            row.push(value);
        }
        out.push(row);
    }
    Ok(out)
}

/// Ground-state currents `[j][m] = J_{j,m0}` of a report (entry 0 is zero).
pub fn ground_currents(report: &CurrentReport, n_levels: usize) -> Vec<Vec<f64>> {
    (0..report.n_reservoirs())
        .map(|j| {
            (0..n_levels)
                .map(|m| {
                    if m == 0 {
                        0.0
                    } else {
                        report.find(j, m, 0).map_or(0.0, |c| c.number)
                    }
                })
                .collect()
        })
        .collect()
}

/// `Σ_m ε_m (L* ρ)_mm`, the rate of change of the mean energy.
pub fn energy_rate(ops: &GeneratorOps, rho: &DensityMatrix) -> f64 {
    let h = linalg::diag(ops.levels());
    linalg::trace_product(&h, &ops.apply_state(rho.matrix())).re
}
