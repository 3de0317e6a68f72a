//! Closed forms for a generic three-level system driven by one
//! local-equilibrium bath. Used as an independent oracle for the generic
//! solver.
//!
//! Gap labels follow the 1-based level names: `21`, `32`, `31`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{BetaFunction, DEFAULT_GAP_TOL};
use crate::rates::RateSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("closed forms need exactly three levels, got {0}")]
    NotThreeLevel(usize),
    #[error("denominator of {0} vanishes")]
    DegenerateDenominator(&'static str),
    #[error("gaps must be positive and distinct: w21 = {w21}, w32 = {w32}")]
    DegenerateGap { w21: f64, w32: f64 },
    #[error("transition {0} is uncoupled")]
    ZeroCoupling(&'static str),
    #[error("beta({omega}) = {beta} must be positive")]
    InvalidBeta { omega: f64, beta: f64 },
}

/// The six total rates `Γ_{-,ω}` (`gm`) and `Γ_{+,ω}` (`gp`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeLevelRates {
    pub gm21: f64,
    pub gp21: f64,
    pub gm32: f64,
    pub gp32: f64,
    pub gm31: f64,
    pub gp31: f64,
}

impl ThreeLevelRates {
    /// Reads the rates off a transition matrix `Γ_ml` (0-based levels).
    pub fn from_transition(g: &DMatrix<f64>) -> Result<Self, OracleError> {
        if g.nrows() != 3 || g.ncols() != 3 {
            return Err(OracleError::NotThreeLevel(g.nrows()));
        }
        Ok(Self {
            gm21: g[(1, 0)],
            gp21: g[(0, 1)],
            gm32: g[(2, 1)],
            gp32: g[(1, 2)],
            gm31: g[(2, 0)],
            gp31: g[(0, 2)],
        })
    }

    pub fn from_rate_set(rates: &RateSet) -> Result<Self, OracleError> {
        Self::from_transition(rates.transition())
    }

    /// Birth-death matrix in closed form.
    pub fn birth_death_matrix(&self) -> DMatrix<f64> {
        let r = self;
        DMatrix::from_row_slice(
            3,
            3,
            &[
                r.gp21 + r.gp31,
                -r.gm21,
                -r.gm31,
                -r.gp21,
                r.gm21 + r.gp32,
                -r.gm32,
                -r.gp31,
                -r.gp32,
                r.gm31 + r.gm32,
            ],
        )
    }

    /// Trace of the birth-death matrix.
    pub fn b(&self) -> f64 {
        self.gp21 + self.gp31 + self.gp32 + self.gm21 + self.gm31 + self.gm32
    }

    /// Sum of principal 2x2 minors (nine spanning-tree products).
    pub fn c(&self) -> f64 {
        let r = self;
        r.gp21 * r.gp32
            + r.gp21 * r.gm31
            + r.gp21 * r.gm32
            + r.gp31 * r.gm21
            + r.gp31 * r.gp32
            + r.gp31 * r.gm32
            + r.gm21 * r.gm31
            + r.gm21 * r.gm32
            + r.gp32 * r.gm31
    }

    /// `(b ± sqrt(b² - 4c)) / 2`, larger root first.
    pub fn nonzero_eigenvalues(&self) -> (Complex64, Complex64) {
        let b = self.b();
        let disc = Complex64::new(b * b - 4.0 * self.c(), 0.0).sqrt();
        ((b + disc) / 2.0, (b - disc) / 2.0)
    }
}

/// `X = ρ22/ρ11`, `Y = ρ33/ρ11`, `Z = ρ33/ρ22`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryRatios {
    pub x: f64,
    pub y: f64,
    /// `None` when its own denominator vanishes (then `X = 0`).
    pub z: Option<f64>,
}

pub fn stationary_ratios(r: &ThreeLevelRates) -> Result<StationaryRatios, OracleError> {
    let den = r.gm31 * r.gm21 + r.gm31 * r.gp32 + r.gm32 * r.gm21;
    if den == 0.0 {
        return Err(OracleError::DegenerateDenominator("X and Y"));
    }
    let x_num = r.gm31 * r.gp21 + r.gm32 * r.gp21 + r.gp31 * r.gm32;
    let y_num = r.gp31 * r.gm21 + r.gp32 * r.gp21 + r.gp31 * r.gp32;
    let z = (x_num != 0.0).then(|| {
        (r.gp32 * r.gp21 + r.gp31 * r.gm21 + r.gp32 * r.gp31) / x_num
    });
    Ok(StationaryRatios {
        x: x_num / den,
        y: y_num / den,
        z,
    })
}

/// `(ρ11, ρ22, ρ33) = (1, X, Y) / (1 + X + Y)`.
pub fn closed_form_stationary(r: &ThreeLevelRates) -> Result<[f64; 3], OracleError> {
    let s = stationary_ratios(r)?;
    let norm = 1.0 + s.x + s.y;
    Ok([1.0 / norm, s.x / norm, s.y / norm])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeLevelGaps {
    pub w21: f64,
    pub w32: f64,
}

impl ThreeLevelGaps {
    pub fn new(w21: f64, w32: f64) -> Result<Self, OracleError> {
        let ok = w21 > 0.0 && w32 > 0.0 && (w21 - w32).abs() > DEFAULT_GAP_TOL;
        if !ok || !w21.is_finite() || !w32.is_finite() {
            return Err(OracleError::DegenerateGap { w21, w32 });
        }
        Ok(Self { w21, w32 })
    }

    pub fn from_levels(levels: &[f64]) -> Result<Self, OracleError> {
        if levels.len() != 3 {
            return Err(OracleError::NotThreeLevel(levels.len()));
        }
        Self::new(levels[1] - levels[0], levels[2] - levels[1])
    }

    pub fn w31(&self) -> f64 {
        self.w21 + self.w32
    }

    /// `(ω21, ω32, ω31)`.
    pub fn all(&self) -> [f64; 3] {
        [self.w21, self.w32, self.w31()]
    }
}

fn exponents(beta: &BetaFunction, gaps: &ThreeLevelGaps) -> Result<[f64; 3], OracleError> {
    let mut x = [0.0; 3];
    for (xi, w) in x.iter_mut().zip(gaps.all()) {
        let b = beta.eval(w);
        if !(b > 0.0 && b.is_finite()) {
            return Err(OracleError::InvalidBeta { omega: w, beta: b });
        }
        *xi = b * w;
    }
    Ok(x)
}

/// `δ = β(ω21) ω21 - β(ω31) ω31 + β(ω32) ω32`.
pub fn delta_invariant(beta: &BetaFunction, gaps: &ThreeLevelGaps) -> f64 {
    let [w21, w32, w31] = gaps.all();
    (beta.eval(w21) * w21 + beta.eval(w32) * w32) - beta.eval(w31) * w31
}

/// Rates `Γ_- = 2γ(N+1)`, `Γ_+ = 2γN` from couplings `γ = π|d|²J(ω)`
/// ordered `(γ21, γ32, γ31)`.
pub fn rates_from_couplings(
    beta: &BetaFunction,
    gaps: &ThreeLevelGaps,
    couplings: [f64; 3],
) -> Result<ThreeLevelRates, OracleError> {
    let x = exponents(beta, gaps)?;
    let n = x.map(|xi| 1.0 / xi.exp_m1());
    let [g21, g32, g31] = couplings;
    Ok(ThreeLevelRates {
        gm21: 2.0 * g21 * (n[0] + 1.0),
        gp21: 2.0 * g21 * n[0],
        gm32: 2.0 * g32 * (n[1] + 1.0),
        gp32: 2.0 * g32 * n[1],
        gm31: 2.0 * g31 * (n[2] + 1.0),
        gp31: 2.0 * g31 * n[2],
    })
}

/// Stationary currents ordered `(21, 32, 31)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCurrents {
    pub number: [f64; 3],
    pub energy: [f64; 3],
    pub delta: f64,
    /// `I = γ21 γ32 γ31`.
    pub prefactor: f64,
}

/// `J_mn = (-1)^{m+n+1} 8 I (e^δ - 1) / [(e^{x21}-1)(e^{x32}-1)(1-e^{-x31}) c]`.
pub fn closed_form_currents(
    gaps: &ThreeLevelGaps,
    beta: &BetaFunction,
    couplings: [f64; 3],
) -> Result<ClosedFormCurrents, OracleError> {
    for (g, name) in couplings.iter().zip(["21", "32", "31"]) {
        if g.is_nan() || *g <= 0.0 {
            return Err(OracleError::ZeroCoupling(name));
        }
    }
    let x = exponents(beta, gaps)?;
    let rates = rates_from_couplings(beta, gaps, couplings)?;
    let prefactor = couplings.iter().product::<f64>();
    let delta = x[0] - x[2] + x[1];
    let magnitude = 8.0 * prefactor * delta.exp_m1()
        / (x[0].exp_m1() * x[1].exp_m1() * -(-x[2]).exp_m1() * rates.c());
    let number = [magnitude, magnitude, -magnitude];
    let w = gaps.all();
    Ok(ClosedFormCurrents {
        number,
        energy: [w[0] * number[0], w[1] * number[1], w[2] * number[2]],
        delta,
        prefactor,
    })
}

/// Couplings `(γ21, γ32, γ31)` of one reservoir in a three-level rate set.
pub fn couplings_from_rate_set(rates: &RateSet, reservoir: usize) -> Result<[f64; 3], OracleError> {
    if rates.dim() != 3 {
        return Err(OracleError::NotThreeLevel(rates.dim()));
    }
    let b = rates.bohr();
    let get = |u, l| rates.coupling(reservoir, b.index_of(u, l).expect("pair exists"));
    Ok([get(1, 0), get(2, 1), get(2, 0)])
}

/// Everything the closed forms say about one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeLevelClosedForm {
    pub gaps: ThreeLevelGaps,
    pub rates: ThreeLevelRates,
    pub ratios: StationaryRatios,
    pub populations: [f64; 3],
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub currents: Option<ClosedFormCurrents>,
}

impl ThreeLevelClosedForm {
    pub fn new(
        gaps: ThreeLevelGaps,
        beta: &BetaFunction,
        couplings: [f64; 3],
    ) -> Result<Self, OracleError> {
        let rates = rates_from_couplings(beta, &gaps, couplings)?;
        let ratios = stationary_ratios(&rates)?;
        let currents = match closed_form_currents(&gaps, beta, couplings) {
            Ok(c) => Some(c),
            Err(OracleError::ZeroCoupling(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            gaps,
            rates,
            ratios,
            populations: closed_form_stationary(&rates)?,
            b: rates.b(),
            c: rates.c(),
            delta: delta_invariant(beta, &gaps),
            currents,
        })
    }
}
