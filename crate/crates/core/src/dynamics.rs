//! Generators of the reduced dynamics, time evolution and stationary states.
//!
//! Vectorization is column-stacking: `vec(rho)[a + b N] = rho[(a, b)]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, CMatrix, I, ZERO};
use crate::model::SystemSpec;
use crate::rates::RateSet;

pub const TRACE_TOL: f64 = 1e-12;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
/// Positivity tolerance applied to evolved states.
pub const EVOLVE_POSITIVITY_TOL: f64 = 1e-9;
/// Largest dimension evolved by the exact superoperator exponential.
pub const EXPM_MAX_DIM: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("rates are for {rates} levels, system has {system}")]
    InconsistentDimensions { system: usize, rates: usize },
    #[error("evolution time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
    #[error("adaptive integrator step fell below {min_step} at t = {t}")]
    StepFailure { t: f64, min_step: f64 },
    #[error("evolved state lost positivity (min eigenvalue {min_eigenvalue})")]
    PositivityViolation { min_eigenvalue: f64 },
    #[error("evolved state drifted: {0}")]
    Drift(String),
    #[error("coherence ({m}, {n}) does not decay (G = 0)")]
    NonDecayingCoherence { m: usize, n: usize },
    #[error("reducible dynamics: kernel of A has dimension {kernel_dim}")]
    ReducibleDynamics { kernel_dim: usize },
    #[error("stationary residual {residual} exceeds tolerance {tolerance}")]
    NoConvergence { residual: f64, tolerance: f64 },
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, DynamicsError> {
        check_state(&m, POSITIVITY_TOL).map_err(DynamicsError::InvalidState)?;
        Ok(Self(m))
    }

    pub fn from_populations(p: &[f64]) -> Result<Self, DynamicsError> {
        Self::new(linalg::diag(p))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.0)[0]
    }
}

fn check_state(m: &CMatrix, positivity_tol: f64) -> Result<(), String> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(format!("shape {}x{}", m.nrows(), m.ncols()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err("non-finite entry".into());
    }
    let h = linalg::hermiticity_defect(m);
    if h > HERMITICITY_TOL {
        return Err(format!("not Hermitian (defect {h:e})"));
    }
    let t = linalg::trace(m);
    if (t.re - 1.0).abs() > TRACE_TOL || t.im.abs() > TRACE_TOL {
        return Err(format!("trace {t} differs from 1"));
    }
    let min = linalg::hermitian_eigenvalues(m)[0];
    if min < -positivity_tol {
        return Err(format!("negative eigenvalue {min:e}"));
    }
    Ok(())
}

/// Classical rate matrix of the population sector, `dp/dt = -A p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathMatrix(DMatrix<f64>);

impl BirthDeathMatrix {
    pub fn from_transition(gamma: &DMatrix<f64>) -> Self {
        let n = gamma.nrows();
        Self(DMatrix::from_fn(n, n, |m, l| {
            if m == l {
                gamma.row(m).sum()
            } else {
                -gamma[(l, m)]
            }
        }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.0.column_iter().map(|c| c.sum()).collect()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self.0.complex_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    /// `e^{-A t} p`.
    pub fn propagate(&self, p: &[f64], t: f64) -> Vec<f64> {
        let e = (-&self.0 * t).exp();
        (e * DVector::from_column_slice(p)).iter().copied().collect()
    }

    /// `-A p`.
    pub fn rate_of_change(&self, p: &[f64]) -> Vec<f64> {
        (-&self.0 * DVector::from_column_slice(p))
            .iter()
            .copied()
            .collect()
    }
}

/// One dissipation channel `E = |lower><upper|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub upper: usize,
    pub lower: usize,
    pub omega: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
}

/// `L*` on states and the forward/backward Heisenberg generators `L`, `L_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOps {
    levels: Vec<f64>,
    channels: Vec<Channel>,
    lamb_diag: Vec<f64>,
    transition: DMatrix<f64>,
    out_rates: Vec<f64>,
    dephasing: DMatrix<f64>,
    birth_death: BirthDeathMatrix,
}

pub fn build_generators(
    system: &SystemSpec,
    rates: &RateSet,
) -> Result<(GeneratorOps, BirthDeathMatrix), DynamicsError> {
    if system.dim() != rates.dim() || system.levels() != rates.levels() {
        return Err(DynamicsError::InconsistentDimensions {
            system: system.dim(),
            rates: rates.dim(),
        });
    }
    let channels = rates
        .bohr()
        .iter()
        .enumerate()
        .map(|(k, e)| Channel {
            upper: e.upper,
            lower: e.lower,
            omega: e.omega,
            gamma_minus: rates.gamma_minus()[k],
            gamma_plus: rates.gamma_plus()[k],
        })
        .collect();
    let transition = rates.transition().clone();
    let birth_death = BirthDeathMatrix::from_transition(&transition);
    let ops = GeneratorOps {
        levels: rates.levels().to_vec(),
        channels,
        lamb_diag: rates.lamb_diag().to_vec(),
        out_rates: (0..rates.dim()).map(|m| transition.row(m).sum()).collect(),
        transition,
        dephasing: rates.dephasing().clone(),
        birth_death: birth_death.clone(),
    };
    Ok((ops, birth_death))
}

impl GeneratorOps {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn dephasing(&self) -> &DMatrix<f64> {
        &self.dephasing
    }

    pub fn birth_death(&self) -> &BirthDeathMatrix {
        &self.birth_death
    }

    /// Lamb-shift Hamiltonian `Δ` (diagonal).
    pub fn lamb_operator(&self) -> CMatrix {
        linalg::diag(&self.lamb_diag)
    }

    /// Dense jump operator of channel `k`.
    pub fn jump_operator(&self, k: usize) -> CMatrix {
        let c = self.channels[k];
        linalg::matrix_unit(self.dim(), c.lower, c.upper)
    }

    fn apply(&self, x: &CMatrix, commutator_sign: f64, heisenberg: bool) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for b in 0..n {
            for a in 0..n {
                let phase = I * commutator_sign * (self.lamb_diag[a] - self.lamb_diag[b]);
                let decay = 0.5 * (self.out_rates[a] + self.out_rates[b]);
                out[(a, b)] = (phase - decay) * x[(a, b)];
            }
        }
        for a in 0..n {
            let mut gain = ZERO;
            for c in 0..n {
                gain += if heisenberg {
                    self.transition[(a, c)] * x[(c, c)]
                } else {
                    self.transition[(c, a)] * x[(c, c)]
                };
            }
            out[(a, a)] += gain;
        }
        out
    }

    /// `L*(rho) = -i[Δ, rho] + dissipator`.
    pub fn apply_state(&self, rho: &CMatrix) -> CMatrix {
        self.apply(rho, -1.0, false)
    }

    /// Forward Heisenberg generator `L(X) = i[Δ, X] + dissipator`.
    pub fn apply_forward(&self, x: &CMatrix) -> CMatrix {
        self.apply(x, 1.0, true)
    }

    /// Backward Heisenberg generator `L_B(X) = -i[Δ, X] + dissipator`.
    pub fn apply_backward(&self, x: &CMatrix) -> CMatrix {
        self.apply(x, -1.0, true)
    }

    /// Matrix of `L*` acting on column-stacked states.
    pub fn superoperator(&self) -> CMatrix {
        let n = self.dim();
        let mut s = CMatrix::zeros(n * n, n * n);
        for b in 0..n {
            for a in 0..n {
                let i = a + b * n;
                s[(i, i)] = -I * (self.lamb_diag[a] - self.lamb_diag[b])
                    - 0.5 * (self.out_rates[a] + self.out_rates[b]);
            }
        }
        for a in 0..n {
            for c in 0..n {
                if a != c {
                    s[(a + a * n, c + c * n)] += self.transition[(c, a)];
                }
            }
        }
        s
    }
}

/// Integration scheme for [`evolve_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveMethod {
    /// Exact exponential for small systems, adaptive stepping otherwise.
    Auto,
    Exponential,
    DormandPrince,
}

pub fn evolve(ops: &GeneratorOps, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix, DynamicsError> {
    evolve_with(ops, rho0, t, EvolveMethod::Auto)
}

pub fn evolve_with(
    ops: &GeneratorOps,
    rho0: &DensityMatrix,
    t: f64,
    method: EvolveMethod,
) -> Result<DensityMatrix, DynamicsError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(DynamicsError::InvalidTime(t));
    }
    if rho0.dim() != ops.dim() {
        return Err(DynamicsError::InconsistentDimensions {
            system: ops.dim(),
            rates: rho0.dim(),
        });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let exact = match method {
        EvolveMethod::Auto => ops.dim() <= EXPM_MAX_DIM,
        EvolveMethod::Exponential => true,
        EvolveMethod::DormandPrince => false,
    };
    let raw = if exact {
        let n = ops.dim();
        let prop = (ops.superoperator() * Complex64::new(t, 0.0)).exp();
        let v = prop * DVector::from_column_slice(rho0.matrix().as_slice());
        CMatrix::from_column_slice(n, n, v.as_slice())
    } else {
        dormand_prince(ops, rho0.matrix(), t)?
    };
    finish_evolved(raw)
}

fn finish_evolved(raw: CMatrix) -> Result<DensityMatrix, DynamicsError> {
    let h = linalg::hermiticity_defect(&raw);
    let tr = linalg::trace(&raw);
    if h > 1e-9 || (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(DynamicsError::Drift(format!(
            "trace {tr}, hermiticity defect {h:e}"
        )));
    }
    // rounding-level cleanup only; positivity is checked, never repaired
    let rho = linalg::hermitize(&raw).unscale(tr.re);
    let min = linalg::hermitian_eigenvalues(&rho)[0];
    if min < -EVOLVE_POSITIVITY_TOL {
        return Err(DynamicsError::PositivityViolation { min_eigenvalue: min });
    }
    Ok(DensityMatrix(rho))
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const RK_RTOL: f64 = 1e-10;
const RK_ATOL: f64 = 1e-13;
const RK_DRIFT_TOL: f64 = 1e-10;

fn dormand_prince(ops: &GeneratorOps, rho0: &CMatrix, t_final: f64) -> Result<CMatrix, DynamicsError> {
    let rate_scale = ops
        .out_rates
        .iter()
        .chain(ops.lamb_diag.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max(1e-300);
    let min_step = 1e-12 * t_final;
    let mut h = (0.01 / rate_scale).min(t_final);
    let mut t = 0.0;
    let mut y = rho0.clone();
    let mut k: Vec<CMatrix> = Vec::with_capacity(7);
    while t < t_final {
        if t + h > t_final {
            h = t_final - t;
        }
        k.clear();
        for row in DP_A.iter() {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = row[j];
                if a != 0.0 {
                    ys += kj * Complex64::new(h * a, 0.0);
                }
            }
            k.push(ops.apply_state(&ys));
        }
        let mut y5 = y.clone();
        let mut err = CMatrix::zeros(y.nrows(), y.ncols());
        for s in 0..7 {
            y5 += &k[s] * Complex64::new(h * DP_B5[s], 0.0);
            err += &k[s] * Complex64::new(h * (DP_B5[s] - DP_B4[s]), 0.0);
        }
        let mut ratio: f64 = 0.0;
        for (e, v) in err.iter().zip(y5.iter()) {
            ratio = ratio.max(e.norm() / (RK_ATOL + RK_RTOL * v.norm()));
        }
        let tr = linalg::trace(&y5);
        let drift = (tr - Complex64::new(1.0, 0.0)).norm().max(linalg::hermiticity_defect(&y5));
        if ratio <= 1.0 && drift <= RK_DRIFT_TOL {
            t += h;
            y = y5;
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = if drift > RK_DRIFT_TOL { 0.5 * h } else { h * factor };
        if t < t_final && h < min_step {
            return Err(DynamicsError::StepFailure { t, min_step });
        }
    }
    Ok(y)
}

/// Unique stationary state from the kernel of the birth-death matrix.
pub fn stationary_state(ops: &GeneratorOps) -> Result<DensityMatrix, DynamicsError> {
    let n = ops.dim();
    for m in 0..n {
        for l in (m + 1)..n {
            if ops.dephasing[(m, l)] <= 0.0 {
                return Err(DynamicsError::NonDecayingCoherence { m, n: l });
            }
        }
    }
    let a = ops.birth_death.matrix();
    let svd = a.clone().svd(false, true);
    let norm = svd.singular_values.max();
    let threshold = 1e-10 * norm;
    let kernel_dim = svd.singular_values.iter().filter(|&&s| s <= threshold).count();
    if kernel_dim > 1 {
        return Err(DynamicsError::ReducibleDynamics { kernel_dim });
    }
    let v_t = svd.v_t.expect("right singular vectors requested");
    let imin = svd.singular_values.imin();
    let v = v_t.row(imin);
    let total: f64 = v.sum();
    let p: Vec<f64> = v.iter().map(|x| x / total).collect();
    let rho = DensityMatrix::from_populations(&p)?;
    let residual = linalg::frobenius(&ops.apply_state(rho.matrix()));
    let tolerance = 1e-11 * norm.max(1.0);
    if residual > tolerance || kernel_dim == 0 {
        return Err(DynamicsError::NoConvergence { residual, tolerance });
    }
    Ok(rho)
}
