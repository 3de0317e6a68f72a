//! System and reservoir declarations.
//!
//! A [`SystemSpec`] holds a non-degenerate spectrum with pairwise distinct
//! gaps together with one dipole matrix per reservoir. Level indices are
//! 0-based in the API; the config format uses 1-based labels.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance for level and gap coincidences.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("at least 2 levels required, got {0}")]
    TooFewLevels(usize),
    #[error("level {index} is not finite")]
    NonFiniteLevel { index: usize },
    #[error("levels must be strictly increasing (level {index} = {value} follows {previous})")]
    LevelsNotIncreasing { index: usize, previous: f64, value: f64 },
    #[error("degenerate spectrum: levels {0} and {1} closer than gap tolerance")]
    DegenerateSpectrum(usize, usize),
    #[error("degenerate gap {omega}: pairs ({}, {}) and ({}, {})", .first.0, .first.1, .second.0, .second.1)]
    DegenerateGap {
        omega: f64,
        first: (usize, usize),
        second: (usize, usize),
    },
    #[error("no reservoir couples any pair of distinct levels")]
    EmptyCoupling,
    #[error("dipole matrix {reservoir} is {rows}x{cols}, expected {expected}x{expected}")]
    DimensionMismatch {
        reservoir: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("non-finite dipole entry in reservoir {reservoir}")]
    NonFiniteDipole { reservoir: usize },
    #[error("occupation undefined at omega = {omega}: {reason}")]
    NonPositiveArgument { omega: f64, reason: String },
    #[error("invalid reservoir: {0}")]
    InvalidReservoir(String),
}

/// One Bohr frequency `omega = levels[upper] - levels[lower]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BohrEntry {
    pub omega: f64,
    pub upper: usize,
    pub lower: usize,
}

/// All positive Bohr frequencies, sorted by `omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrTable {
    entries: Vec<BohrEntry>,
}

impl BohrTable {
    fn from_levels(levels: &[f64]) -> Self {
        let n = levels.len();
        let mut entries = Vec::with_capacity(n * (n - 1) / 2);
        for upper in 1..n {
            for lower in 0..upper {
                entries.push(BohrEntry {
                    omega: levels[upper] - levels[lower],
                    upper,
                    lower,
                });
            }
        }
        entries.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Self { entries }
    }

    pub fn entries(&self) -> &[BohrEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BohrEntry> {
        self.entries.iter()
    }

    /// Position of the pair `(upper, lower)` in the table.
    pub fn index_of(&self, upper: usize, lower: usize) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.upper == upper && e.lower == lower)
    }
}

/// Validated system: spectrum plus per-reservoir dipole matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    levels: Vec<f64>,
    dipoles: Vec<DMatrix<Complex64>>,
    gap_tol: f64,
    bohr: BohrTable,
    inert: Vec<(usize, usize)>,
}

impl SystemSpec {
    pub fn new(levels: Vec<f64>, dipoles: Vec<DMatrix<Complex64>>) -> Result<Self, ModelError> {
        Self::with_gap_tol(levels, dipoles, DEFAULT_GAP_TOL)
    }

    pub fn with_gap_tol(
        levels: Vec<f64>,
        dipoles: Vec<DMatrix<Complex64>>,
        gap_tol: f64,
    ) -> Result<Self, ModelError> {
        let n = levels.len();
        if n < 2 {
            return Err(ModelError::TooFewLevels(n));
        }
        for (index, &e) in levels.iter().enumerate() {
            if !e.is_finite() {
                return Err(ModelError::NonFiniteLevel { index });
            }
        }
        for i in 1..n {
            let d = levels[i] - levels[i - 1];
            if d.abs() <= gap_tol {
                return Err(ModelError::DegenerateSpectrum(i - 1, i));
            }
            if d < 0.0 {
                return Err(ModelError::LevelsNotIncreasing {
                    index: i,
                    previous: levels[i - 1],
                    value: levels[i],
                });
            }
        }
        let bohr = BohrTable::from_levels(&levels);
        for w in bohr.entries.windows(2) {
            if w[1].omega - w[0].omega <= gap_tol {
                return Err(ModelError::DegenerateGap {
                    omega: w[0].omega,
                    first: (w[0].upper, w[0].lower),
                    second: (w[1].upper, w[1].lower),
                });
            }
        }

        let mut inert = Vec::new();
        let mut coupled = false;
        for (j, d) in dipoles.iter().enumerate() {
            if d.nrows() != n || d.ncols() != n {
                return Err(ModelError::DimensionMismatch {
                    reservoir: j,
                    rows: d.nrows(),
                    cols: d.ncols(),
                    expected: n,
                });
            }
            if d.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::NonFiniteDipole { reservoir: j });
            }
            for r in 0..n {
                for c in 0..n {
                    if d[(r, c)] == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    // only <lower|D|upper> enters the rates
                    if r < c {
                        coupled = true;
                    } else {
                        inert.push((j, r * n + c));
                    }
                }
            }
        }
        if !coupled {
            return Err(ModelError::EmptyCoupling);
        }
        if !inert.is_empty() {
            log::info!(
                "{} dipole entries are dynamically inert (diagonal or below the diagonal)",
                inert.len()
            );
        }
        Ok(Self {
            levels,
            dipoles,
            gap_tol,
            bohr,
            inert,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn dipoles(&self) -> &[DMatrix<Complex64>] {
        &self.dipoles
    }

    pub fn n_reservoirs(&self) -> usize {
        self.dipoles.len()
    }

    pub fn gap_tol(&self) -> f64 {
        self.gap_tol
    }

    pub fn bohr(&self) -> &BohrTable {
        &self.bohr
    }

    /// Sorted multiset of positive gaps.
    pub fn gaps(&self) -> Vec<f64> {
        self.bohr.iter().map(|e| e.omega).collect()
    }

    /// `|<lower|D_j|upper>|^2`.
    pub fn transition_weight(&self, reservoir: usize, upper: usize, lower: usize) -> f64 {
        self.dipoles[reservoir][(lower, upper)].norm_sqr()
    }

    /// Dipole entries that never enter the dynamics, as `(reservoir, row * N + col)`.
    pub fn inert_entries(&self) -> &[(usize, usize)] {
        &self.inert
    }

    pub fn hamiltonian(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim(), self.dim(), |r, c| {
            if r == c {
                Complex64::new(self.levels[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Same system with every level shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.levels {
            *e += offset;
        }
        out
    }
}

/// Validates a spectrum and dipole set with the default gap tolerance.
pub fn validate_system(
    levels: &[f64],
    dipoles: Vec<DMatrix<Complex64>>,
) -> Result<SystemSpec, ModelError> {
    SystemSpec::new(levels.to_vec(), dipoles)
}

pub fn bohr_frequencies(system: &SystemSpec) -> BohrTable {
    system.bohr.clone()
}

/// Reduced spectral density `J(omega)`, already integrated over the
/// resonance shell. Zero for negative frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensity {
    Flat { eta: f64 },
    Ohmic { eta: f64, cutoff: f64 },
    /// Linear interpolation between `(omega, value)` knots, zero outside.
    Tabulated { points: Vec<(f64, f64)> },
}

impl SpectralDensity {
    pub fn eval(&self, omega: f64) -> f64 {
        if omega < 0.0 {
            return 0.0;
        }
        match self {
            Self::Flat { eta } => *eta,
            Self::Ohmic { eta, cutoff } => eta * omega * (-omega / cutoff).exp(),
            Self::Tabulated { points } => interpolate(points, omega).unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidReservoir(m.to_string()));
        match self {
            Self::Flat { eta } => {
                if !(eta.is_finite() && *eta >= 0.0) {
                    return bad("flat spectral density needs finite eta >= 0");
                }
            }
            Self::Ohmic { eta, cutoff } => {
                if !(eta.is_finite() && *eta >= 0.0) {
                    return bad("ohmic spectral density needs finite eta >= 0");
                }
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return bad("ohmic spectral density needs cutoff > 0");
                }
            }
            Self::Tabulated { points } => {
                check_table(points, "spectral density")?;
                if points.iter().any(|p| p.1 < 0.0) {
                    return bad("tabulated spectral density must be nonnegative");
                }
            }
        }
        Ok(())
    }

    /// Same shape multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Flat { eta } => Self::Flat { eta: eta * factor },
            Self::Ohmic { eta, cutoff } => Self::Ohmic {
                eta: eta * factor,
                cutoff: *cutoff,
            },
            Self::Tabulated { points } => Self::Tabulated {
                points: points.iter().map(|&(w, v)| (w, v * factor)).collect(),
            },
        }
    }
}

/// Frequency-dependent inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaFunction {
    Constant { beta: f64 },
    /// `intercept + slope * omega`
    Linear { intercept: f64, slope: f64 },
    /// `scale / omega`
    Inverse { scale: f64 },
    /// `coef * omega^exponent`
    Power { coef: f64, exponent: f64 },
    /// Linear interpolation, clamped to the end values outside the knots.
    Tabulated { points: Vec<(f64, f64)> },
}

impl BetaFunction {
    pub fn eval(&self, omega: f64) -> f64 {
        match self {
            Self::Constant { beta } => *beta,
            Self::Linear { intercept, slope } => intercept + slope * omega,
            Self::Inverse { scale } => scale / omega,
            Self::Power { coef, exponent } => coef * omega.powf(*exponent),
            Self::Tabulated { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if omega <= first.0 {
                    first.1
                } else if omega >= last.0 {
                    last.1
                } else {
                    interpolate(points, omega).unwrap_or(f64::NAN)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Self::Tabulated { points } => check_table(points, "beta function"),
            _ => Ok(()),
        }
    }
}

fn check_table(points: &[(f64, f64)], what: &str) -> Result<(), ModelError> {
    if points.len() < 2 {
        return Err(ModelError::InvalidReservoir(format!(
            "tabulated {what} needs at least 2 points"
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(ModelError::InvalidReservoir(format!(
            "tabulated {what} has non-finite entries"
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(ModelError::InvalidReservoir(format!(
            "tabulated {what} knots must be strictly increasing"
        )));
    }
    Ok(())
}

fn interpolate(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let i = points.partition_point(|p| p.0 <= x);
    if i == 0 {
        return Some(first.1);
    }
    if i == points.len() {
        return Some(last.1);
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ReservoirKind {
    Equilibrium { beta: f64, mu: f64 },
    LocalEquilibrium { beta: BetaFunction },
}

/// Bosonic reservoir in reduced form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReservoirSpec {
    pub kind: ReservoirKind,
    pub spectral_density: SpectralDensity,
    /// Upper integration bound for the principal-value shifts.
    pub pv_cutoff: f64,
}

pub const DEFAULT_PV_CUTOFF: f64 = 100.0;

impl ReservoirSpec {
    pub fn equilibrium(beta: f64, mu: f64, spectral_density: SpectralDensity) -> Self {
        Self {
            kind: ReservoirKind::Equilibrium { beta, mu },
            spectral_density,
            pv_cutoff: DEFAULT_PV_CUTOFF,
        }
    }

    pub fn local_equilibrium(beta: BetaFunction, spectral_density: SpectralDensity) -> Self {
        Self {
            kind: ReservoirKind::LocalEquilibrium { beta },
            spectral_density,
            pv_cutoff: DEFAULT_PV_CUTOFF,
        }
    }

    pub fn with_pv_cutoff(mut self, pv_cutoff: f64) -> Self {
        self.pv_cutoff = pv_cutoff;
        self
    }

    /// Chemical potential; zero for local-equilibrium baths.
    pub fn chemical_potential(&self) -> f64 {
        match self.kind {
            ReservoirKind::Equilibrium { mu, .. } => mu,
            ReservoirKind::LocalEquilibrium { .. } => 0.0,
        }
    }

    /// Lower end of the frequency support where the occupation is defined.
    pub fn support_start(&self) -> f64 {
        self.chemical_potential().max(0.0)
    }

    /// Boltzmann exponent `beta (omega - mu)` or `beta(omega) omega`.
    pub fn exponent(&self, omega: f64) -> Result<f64, ModelError> {
        let x = match &self.kind {
            ReservoirKind::Equilibrium { beta, mu } => {
                if *beta <= 0.0 || !beta.is_finite() {
                    return Err(ModelError::NonPositiveArgument {
                        omega,
                        reason: format!("beta = {beta} must be positive"),
                    });
                }
                if omega <= *mu {
                    return Err(ModelError::NonPositiveArgument {
                        omega,
                        reason: format!("omega must exceed mu = {mu}"),
                    });
                }
                beta * (omega - mu)
            }
            ReservoirKind::LocalEquilibrium { beta } => {
                if omega <= 0.0 {
                    return Err(ModelError::NonPositiveArgument {
                        omega,
                        reason: "omega must be positive".into(),
                    });
                }
                let b = beta.eval(omega);
                if !(b > 0.0 && b.is_finite()) {
                    return Err(ModelError::NonPositiveArgument {
                        omega,
                        reason: format!("beta(omega) = {b} must be positive"),
                    });
                }
                b * omega
            }
        };
        Ok(x)
    }

    /// Bose factor `1 / (e^x - 1)`.
    pub fn occupation(&self, omega: f64) -> Result<f64, ModelError> {
        Ok(1.0 / self.exponent(omega)?.exp_m1())
    }

    /// Checks parameters and the positivity conditions on every Bohr frequency.
    pub fn validate_against(&self, bohr: &BohrTable) -> Result<(), ModelError> {
        self.spectral_density.validate()?;
        if let ReservoirKind::LocalEquilibrium { beta } = &self.kind {
            beta.validate()?;
        }
        if let ReservoirKind::Equilibrium { beta, mu } = self.kind {
            if !mu.is_finite() {
                return Err(ModelError::InvalidReservoir("mu must be finite".into()));
            }
            if !(beta.is_finite() && beta > 0.0) {
                return Err(ModelError::InvalidReservoir(format!(
                    "beta = {beta} must be positive"
                )));
            }
        }
        if !(self.pv_cutoff.is_finite() && self.pv_cutoff > 0.0) {
            return Err(ModelError::InvalidReservoir(
                "pv_cutoff must be positive".into(),
            ));
        }
        for e in bohr.iter() {
            self.exponent(e.omega)?;
        }
        Ok(())
    }
}

pub fn occupation(reservoir: &ReservoirSpec, omega: f64) -> Result<f64, ModelError> {
    reservoir.occupation(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn offdiag(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    #[test]
    fn two_level_is_valid() {
        let s = validate_system(&[0.0, 1.0], vec![offdiag(2)]).unwrap();
        let b = bohr_frequencies(&s);
        assert_eq!(b.len(), 1);
        assert_eq!(
            b.entries()[0],
            BohrEntry {
                omega: 1.0,
                upper: 1,
                lower: 0
            }
        );
    }

    #[test]
    fn equal_spacing_is_rejected() {
        let err = validate_system(&[0.0, 1.0, 2.0], vec![offdiag(3)]).unwrap_err();
        assert!(matches!(err, ModelError::DegenerateGap { .. }));
    }

    #[test]
    fn three_level_gaps() {
        let s = validate_system(&[0.0, 1.0, 2.5], vec![offdiag(3)]).unwrap();
        assert_eq!(s.gaps(), vec![1.0, 1.5, 2.5]);
        let pairs: Vec<_> = s.bohr().iter().map(|e| (e.upper, e.lower)).collect();
        assert_eq!(pairs, vec![(1, 0), (2, 1), (2, 0)]);
    }

    #[test]
    fn degenerate_levels_and_empty_coupling() {
        assert!(matches!(
            validate_system(&[0.0, 1e-12], vec![offdiag(2)]),
            Err(ModelError::DegenerateSpectrum(0, 1))
        ));
        assert!(matches!(
            validate_system(&[0.0, 1.0], vec![DMatrix::zeros(2, 2)]),
            Err(ModelError::EmptyCoupling)
        ));
        assert!(matches!(
            validate_system(&[0.0], vec![]),
            Err(ModelError::TooFewLevels(1))
        ));
        assert!(matches!(
            validate_system(&[0.0, 1.0], vec![offdiag(3)]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diagonal_entries_are_flagged_inert() {
        let mut d = offdiag(2);
        d[(0, 0)] = Complex64::new(0.3, 0.0);
        let s = validate_system(&[0.0, 1.0], vec![d]).unwrap();
        // (0,0) and the lower-triangle (1,0)
        assert_eq!(s.inert_entries(), &[(0, 0), (0, 2)]);
    }

    #[test]
    fn occupation_examples() {
        let r = ReservoirSpec::equilibrium(2f64.ln(), 0.0, SpectralDensity::Flat { eta: 1.0 });
        assert_relative_eq!(r.occupation(1.0).unwrap(), 1.0, max_relative = 1e-14);
        let loc = ReservoirSpec::local_equilibrium(
            BetaFunction::Inverse { scale: 1.0 },
            SpectralDensity::Flat { eta: 1.0 },
        );
        assert_relative_eq!(
            loc.occupation(3.0).unwrap(),
            1.0 / (std::f64::consts::E - 1.0),
            max_relative = 1e-14
        );
        assert!(r.occupation(0.0).is_err());
        let shifted = ReservoirSpec::equilibrium(1.0, 0.5, SpectralDensity::Flat { eta: 1.0 });
        assert!(matches!(
            shifted.occupation(0.5),
            Err(ModelError::NonPositiveArgument { .. })
        ));
    }

    #[test]
    fn occupation_vacuum_limit_is_monotone() {
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let beta = 0.5 * 2f64.powi(k);
            let r = ReservoirSpec::equilibrium(beta, 0.0, SpectralDensity::Flat { eta: 1.0 });
            let n = r.occupation(1.0).unwrap();
            assert!(n < prev && n >= 0.0);
            prev = n;
        }
        assert!(prev < 1e-300);
    }

    #[test]
    fn spectral_density_forms() {
        let t = SpectralDensity::Tabulated {
            points: vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)],
        };
        assert_eq!(t.eval(0.5), 1.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(4.0), 0.0);
        let o = SpectralDensity::Ohmic {
            eta: 2.0,
            cutoff: 1.0,
        };
        assert_relative_eq!(o.eval(1.0), 2.0 / std::f64::consts::E, max_relative = 1e-15);
        assert_eq!(o.eval(-1.0), 0.0);
        assert!(SpectralDensity::Flat { eta: -1.0 }.validate().is_err());
    }

    #[test]
    fn tabulated_beta_is_clamped() {
        let b = BetaFunction::Tabulated {
            points: vec![(1.0, 2.0), (2.0, 1.0)],
        };
        assert_eq!(b.eval(0.1), 2.0);
        assert_eq!(b.eval(1.5), 1.5);
        assert_eq!(b.eval(9.0), 1.0);
    }
}
