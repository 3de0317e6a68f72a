//! Linear response of two equilibrium baths with identical couplings around
//! the symmetric point `β1 = β2 = β0`, `μ1 = μ2 = μ0`.
//!
//! Offsets: `δβ = β1 - β2`, `δμ = μ2 - μ1`, `f = δβ/β0`. Fluxes are taken
//! from bath 2 to bath 1: `J_{2→1} = (J_1 - J_2)/2` and
//! `J^Q_{2→1} = J^E_{2→1} - μ0 J_{2→1} = (ω - μ0) J_{2→1}`.
//! Because `β1(ω-μ1) - β2(ω-μ2) = β0 δμ + (ω-μ0) δβ` exactly, the
//! entropy production `σ = β0 (J_{2→1} δμ + J^Q_{2→1} f)` equals
//! `J_{2→1} (x1 - x2)` and is nonnegative whenever `ρ_mm ≤ ρ_nn`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::currents::{micro_currents, CurrentReport};
use crate::dynamics::{build_generators, stationary_state, DensityMatrix, DynamicsError};
use crate::model::{ReservoirKind, ReservoirSpec, SpectralDensity, SystemSpec};
use crate::rates::{rate_set, LambShift, RateError, RateSet};

/// Default finite-difference step in `δμ` and `δβ/β0`.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Steps below this are dominated by solver noise.
pub const MIN_STEP: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermoError {
    #[error("baths must share spectral density, cutoff and dipole weights: {0}")]
    AsymmetricCouplings(String),
    #[error("linear response needs exactly two equilibrium reservoirs")]
    NotTwoEquilibriumBaths,
    #[error("finite-difference step {0} is below the noise floor {MIN_STEP}")]
    StepTooSmall(f64),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Bath parameters in symmetric/offset form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricPoint {
    pub beta0: f64,
    pub dbeta: f64,
    pub mu0: f64,
    pub dmu: f64,
}

pub fn symmetric_split(beta1: f64, beta2: f64, mu1: f64, mu2: f64) -> SymmetricPoint {
    SymmetricPoint {
        beta0: 0.5 * (beta1 + beta2),
        dbeta: beta1 - beta2,
        mu0: 0.5 * (mu1 + mu2),
        dmu: mu2 - mu1,
    }
}

impl SymmetricPoint {
    pub fn centre(beta0: f64, mu0: f64) -> Self {
        Self {
            beta0,
            dbeta: 0.0,
            mu0,
            dmu: 0.0,
        }
    }

    pub fn with_offsets(self, dbeta: f64, dmu: f64) -> Self {
        Self { dbeta, dmu, ..self }
    }

    /// `(β1, β2, μ1, μ2)`.
    pub fn bath_parameters(&self) -> (f64, f64, f64, f64) {
        (
            self.beta0 + 0.5 * self.dbeta,
            self.beta0 - 0.5 * self.dbeta,
            self.mu0 - 0.5 * self.dmu,
            self.mu0 + 0.5 * self.dmu,
        )
    }

    /// Relative temperature force `δβ/β0`.
    pub fn thermal_force(&self) -> f64 {
        self.dbeta / self.beta0
    }
}

/// Two equilibrium baths with identical form factors.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBathModel {
    system: SystemSpec,
    spectral_density: SpectralDensity,
    pv_cutoff: f64,
    lamb: LambShift,
}

/// Stationary solution at one bath configuration.
#[derive(Debug, Clone)]
pub struct TwoBathSolution {
    pub point: SymmetricPoint,
    pub rates: RateSet,
    pub rho: DensityMatrix,
    pub report: CurrentReport,
}

impl TwoBathModel {
    /// Checks the symmetry preconditions and returns the model with the
    /// reservoirs' own bath parameters in symmetric form.
    pub fn new(
        system: SystemSpec,
        reservoirs: &[ReservoirSpec],
        lamb: LambShift,
    ) -> Result<(Self, SymmetricPoint), ThermoError> {
        if reservoirs.len() != 2 || system.n_reservoirs() != 2 {
            return Err(ThermoError::NotTwoEquilibriumBaths);
        }
        let params: Vec<(f64, f64)> = reservoirs
            .iter()
            .map(|r| match r.kind {
                ReservoirKind::Equilibrium { beta, mu } => Ok((beta, mu)),
                ReservoirKind::LocalEquilibrium { .. } => Err(ThermoError::NotTwoEquilibriumBaths),
            })
            .collect::<Result<_, _>>()?;
        if reservoirs[0].spectral_density != reservoirs[1].spectral_density {
            return Err(ThermoError::AsymmetricCouplings(
                "spectral densities differ".into(),
            ));
        }
        if reservoirs[0].pv_cutoff != reservoirs[1].pv_cutoff {
            return Err(ThermoError::AsymmetricCouplings("pv cutoffs differ".into()));
        }
        for e in system.bohr().iter() {
            let w0 = system.transition_weight(0, e.upper, e.lower);
            let w1 = system.transition_weight(1, e.upper, e.lower);
            if (w0 - w1).abs() > 1e-12 * w0.max(w1) {
                return Err(ThermoError::AsymmetricCouplings(format!(
                    "dipole weights differ on pair ({}, {})",
                    e.upper, e.lower
                )));
            }
        }
        let point = symmetric_split(params[0].0, params[1].0, params[0].1, params[1].1);
        Ok((
            Self {
                spectral_density: reservoirs[0].spectral_density.clone(),
                pv_cutoff: reservoirs[0].pv_cutoff,
                system,
                lamb,
            },
            point,
        ))
    }

    /// Builds the model from one dipole matrix shared by both baths.
    pub fn from_parts(
        levels: Vec<f64>,
        dipole: DMatrix<Complex64>,
        spectral_density: SpectralDensity,
        lamb: LambShift,
    ) -> Result<Self, ThermoError> {
        let system = SystemSpec::new(levels, vec![dipole.clone(), dipole])
            .map_err(RateError::from)?;
        Ok(Self {
            system,
            spectral_density,
            pv_cutoff: crate::model::DEFAULT_PV_CUTOFF,
            lamb,
        })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn reservoirs(&self, point: &SymmetricPoint) -> Vec<ReservoirSpec> {
        let (b1, b2, m1, m2) = point.bath_parameters();
        [(b1, m1), (b2, m2)]
            .into_iter()
            .map(|(b, m)| {
                ReservoirSpec::equilibrium(b, m, self.spectral_density.clone())
                    .with_pv_cutoff(self.pv_cutoff)
            })
            .collect()
    }

    pub fn solve(&self, point: &SymmetricPoint) -> Result<TwoBathSolution, ThermoError> {
        let rates = rate_set(&self.system, &self.reservoirs(point), self.lamb)?;
        let (ops, _) = build_generators(&self.system, &rates)?;
        let rho = stationary_state(&ops)?;
        let report = micro_currents(&rates, &rho);
        Ok(TwoBathSolution {
            point: *point,
            rates,
            rho,
            report,
        })
    }
}

/// Skew flux of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairFlux {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    /// `J_{2→1}`.
    pub number: f64,
    /// `J^Q_{2→1}`.
    pub heat: f64,
}

impl TwoBathSolution {
    /// Full nonlinear skew fluxes per Bohr frequency.
    pub fn fluxes(&self) -> Vec<PairFlux> {
        self.rates
            .bohr()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let number =
                    0.5 * (self.report.current(0, k).number - self.report.current(1, k).number);
                PairFlux {
                    upper: e.upper,
                    lower: e.lower,
                    omega: e.omega,
                    number,
                    heat: (e.omega - self.point.mu0) * number,
                }
            })
            .collect()
    }
}

/// First-order skew fluxes from the symmetric-point state.
///
/// `J̃_{2→1} = γ N'(x) [(ω-μ0) δβ + β0 δμ] (ρ̃_mm - ρ̃_nn)` with
/// `x = β0 (ω - μ0)` and `N'(x) = -e^x/(e^x-1)²`.
pub fn linear_currents(
    model: &TwoBathModel,
    point: &SymmetricPoint,
) -> Result<Vec<PairFlux>, ThermoError> {
    let centre = model.solve(&SymmetricPoint::centre(point.beta0, point.mu0))?;
    let p = centre.rho.populations();
    Ok(centre
        .rates
        .bohr()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let a = e.omega - point.mu0;
            let number = centre.rates.coupling(0, k)
                * bose_derivative(point.beta0 * a)
                * (a * point.dbeta + point.beta0 * point.dmu)
                * (p[e.upper] - p[e.lower]);
            PairFlux {
                upper: e.upper,
                lower: e.lower,
                omega: e.omega,
                number,
                heat: a * number,
            }
        })
        .collect())
}

/// `d/dx 1/(e^x - 1)`.
fn bose_derivative(x: f64) -> f64 {
    let em1 = x.exp_m1();
    -(em1 + 1.0) / (em1 * em1)
}

/// `σ = β0 (J_{2→1} δμ + J^Q_{2→1} δβ/β0)`.
pub fn entropy_production(number: f64, heat: f64, beta0: f64, dbeta: f64, dmu: f64) -> f64 {
    beta0 * (number * dmu + heat * dbeta / beta0)
}

/// `δμ` on the zero-production line for a pair of frequency `omega`.
pub fn zero_production_dmu(omega: f64, beta0: f64, mu0: f64, dbeta: f64) -> f64 {
    -(omega - mu0) * dbeta / beta0
}

/// Transport coefficients of one pair.
///
/// `fd` is `∂(J_{2→1}, J^Q_{2→1}) / ∂(δμ, δβ/β0)` by central differences of
/// the full currents with one Richardson step. In the reference convention
/// `Γ = γ β0 e^x/(e^x-1)² (ρ̃_mm - ρ̃_nn)`, the finite-difference matrix is
/// `[[-Γ, L], [L, M]]` with `L = -(ω-μ0) Γ` and `M = -(ω-μ0)² Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsagerCoefficients {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    pub fd: [[f64; 2]; 2],
    /// `-fd[0][0]`, comparable with `gamma_ref`.
    pub gamma_on: f64,
    pub l_fd_12: f64,
    pub l_fd_21: f64,
    pub m_on: f64,
    pub gamma_ref: f64,
    pub l_ref: f64,
    pub m_ref: f64,
    /// `-(ω+μ0)² Γ`; inconsistent with `L² + Γ M = 0` unless `μ0 = 0`.
    pub m_printed: f64,
    pub reciprocity_defect: f64,
}

type Fluxes = Vec<(f64, f64)>;

fn fluxes_at(model: &TwoBathModel, beta0: f64, mu0: f64, dmu: f64, force: f64) -> Result<Fluxes, ThermoError> {
    let point = SymmetricPoint {
        beta0,
        dbeta: force * beta0,
        mu0,
        dmu,
    };
    Ok(model
        .solve(&point)?
        .fluxes()
        .into_iter()
        .map(|f| (f.number, f.heat))
        .collect())
}

fn central_difference(
    model: &TwoBathModel,
    beta0: f64,
    mu0: f64,
    h: f64,
    along_mu: bool,
) -> Result<Fluxes, ThermoError> {
    let at = |s: f64| {
        if along_mu {
            fluxes_at(model, beta0, mu0, s, 0.0)
        } else {
            fluxes_at(model, beta0, mu0, 0.0, s)
        }
    };
    let plus = at(h)?;
    let minus = at(-h)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h)))
        .collect())
}

fn richardson(model: &TwoBathModel, beta0: f64, mu0: f64, h: f64, along_mu: bool) -> Result<Fluxes, ThermoError> {
    let coarse = central_difference(model, beta0, mu0, h, along_mu)?;
    let fine = central_difference(model, beta0, mu0, 0.5 * h, along_mu)?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| ((4.0 * f.0 - c.0) / 3.0, (4.0 * f.1 - c.1) / 3.0))
        .collect())
}

/// Onsager coefficients of every pair at the symmetric point `(β0, μ0)`.
pub fn onsager_matrix(
    model: &TwoBathModel,
    beta0: f64,
    mu0: f64,
    h: f64,
) -> Result<Vec<OnsagerCoefficients>, ThermoError> {
    if !(h.is_finite() && h >= MIN_STEP) {
        return Err(ThermoError::StepTooSmall(h));
    }
    let d_mu = richardson(model, beta0, mu0, h, true)?;
    let d_force = richardson(model, beta0, mu0, h, false)?;
    let centre = model.solve(&SymmetricPoint::centre(beta0, mu0))?;
    let p = centre.rho.populations();
    Ok(centre
        .rates
        .bohr()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let fd = [[d_mu[k].0, d_force[k].0], [d_mu[k].1, d_force[k].1]];
            let a = e.omega - mu0;
            let gamma_ref = -centre.rates.coupling(0, k)
                * beta0
                * bose_derivative(beta0 * a)
                * (p[e.upper] - p[e.lower]);
            let (l12, l21) = (fd[0][1], fd[1][0]);
            let scale = l12.abs().max(l21.abs());
            OnsagerCoefficients {
                upper: e.upper,
                lower: e.lower,
                omega: e.omega,
                fd,
                gamma_on: -fd[0][0],
                l_fd_12: l12,
                l_fd_21: l21,
                m_on: fd[1][1],
                gamma_ref,
                l_ref: -a * gamma_ref,
                m_ref: -a * a * gamma_ref,
                m_printed: -(e.omega + mu0).powi(2) * gamma_ref,
                reciprocity_defect: if scale > 0.0 { (l12 - l21).abs() / scale } else { 0.0 },
            }
        })
        .collect())
}

/// Per-pair linear-response summary at given offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsagerPair {
    pub coefficients: OnsagerCoefficients,
    pub linear: PairFlux,
    pub full: PairFlux,
    /// From the full currents at the offsets.
    pub sigma: f64,
    /// `β0 F^T fd F` with `F = (δμ, δβ/β0)`; diagnostic only.
    pub sigma_quadratic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnsagerReport {
    pub point: SymmetricPoint,
    pub step: f64,
    pub pairs: Vec<OnsagerPair>,
    pub sigma_total: f64,
}

pub fn onsager_report(
    model: &TwoBathModel,
    point: &SymmetricPoint,
    h: f64,
) -> Result<OnsagerReport, ThermoError> {
    let coefficients = onsager_matrix(model, point.beta0, point.mu0, h)?;
    let linear = linear_currents(model, point)?;
    let full = model.solve(point)?.fluxes();
    let f = point.thermal_force();
    let pairs: Vec<OnsagerPair> = coefficients
        .into_iter()
        .zip(linear)
        .zip(full)
        .map(|((c, lin), full)| {
            let fd = c.fd;
            let quad = fd[0][0] * point.dmu * point.dmu
                + (fd[0][1] + fd[1][0]) * point.dmu * f
                + fd[1][1] * f * f;
            OnsagerPair {
                coefficients: c,
                linear: lin,
                full,
                sigma: entropy_production(full.number, full.heat, point.beta0, point.dbeta, point.dmu),
                sigma_quadratic: point.beta0 * quad,
            }
        })
        .collect();
    let sigma_total = pairs.iter().map(|p| p.sigma).sum();
    Ok(OnsagerReport {
        point: *point,
        step: h,
        pairs,
        sigma_total,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    DeltaBeta,
    DeltaMu,
    Beta0,
    Mu0,
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "delta_beta" => Ok(Self::DeltaBeta),
            "delta_mu" => Ok(Self::DeltaMu),
            "beta0" => Ok(Self::Beta0),
            "mu0" => Ok(Self::Mu0),
            _ => Err(format!(
                "unknown sweep parameter {s:?} (delta_beta, delta_mu, beta0, mu0)"
            )),
        }
    }
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::DeltaBeta => "delta_beta",
            Self::DeltaMu => "delta_mu",
            Self::Beta0 => "beta0",
            Self::Mu0 => "mu0",
        }
    }

    pub fn apply(self, base: SymmetricPoint, value: f64) -> SymmetricPoint {
        match self {
            Self::DeltaBeta => SymmetricPoint { dbeta: value, ..base },
            Self::DeltaMu => SymmetricPoint { dmu: value, ..base },
            Self::Beta0 => SymmetricPoint { beta0: value, ..base },
            Self::Mu0 => SymmetricPoint { mu0: value, ..base },
        }
    }
}

/// Summed skew fluxes and entropy production at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub point: SymmetricPoint,
    pub number: f64,
    pub energy: f64,
    pub heat: f64,
    pub sigma: f64,
}

pub fn sweep_point(
    model: &TwoBathModel,
    base: SymmetricPoint,
    parameter: SweepParameter,
    value: f64,
) -> Result<SweepRow, ThermoError> {
    let point = parameter.apply(base, value);
    let fluxes = model.solve(&point)?.fluxes();
    let number = fluxes.iter().map(|f| f.number).sum();
    let heat = fluxes.iter().map(|f| f.heat).sum();
    Ok(SweepRow {
        value,
        point,
        number,
        energy: fluxes.iter().map(|f| f.omega * f.number).sum(),
        heat,
        sigma: entropy_production(number, heat, point.beta0, point.dbeta, point.dmu),
    })
}
