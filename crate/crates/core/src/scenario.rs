//! TOML scenario files.
//!
//! ```toml
//! [system]
//! levels = [0.0, 1.0, 2.5]
//! # one list per reservoir; entries are [l, m, re, im] with 1-based levels
//! dipoles = [[[1, 2, 1.0, 0.0], [2, 3, 1.0, 0.0]], [[1, 3, 1.0, 0.0]]]
//!
//! [[reservoir]]
//! kind = "equilibrium"
//! beta = 1.0
//! mu = 0.0
//! spectral_density = { form = "ohmic", eta = 0.1, cutoff = 5.0 }
//!
//! [[reservoir]]
//! kind = "local_equilibrium"
//! beta_function = { form = "inverse", scale = 1.0 }
//! spectral_density = { form = "flat", eta = 0.1 }
//! ```
//!
//! Optional tables: `[evolve]` (`t_final`, `n_samples`), `[onsager]`
//! (`dbeta`, `dmu`, `h`) and top-level `lamb_shift = "pv" | "none"`.
//! Without `[onsager]` offsets the two baths' own parameters set them.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

use crate::linear::DEFAULT_STEP;
use crate::model::{
    BetaFunction, ModelError, ReservoirSpec, SpectralDensity, SystemSpec, DEFAULT_GAP_TOL,
    DEFAULT_PV_CUTOFF,
};
use crate::rates::LambShift;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("config: {0}")]
    Syntax(String),
    #[error("config: {field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    system: RawSystem,
    reservoir: Vec<RawReservoir>,
    lamb_shift: Option<LambShift>,
    evolve: Option<EvolveParams>,
    onsager: Option<OnsagerParams>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    levels: Vec<f64>,
    dipoles: Vec<Vec<(usize, usize, f64, f64)>>,
    gap_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawReservoir {
    Equilibrium {
        beta: f64,
        #[serde(default)]
        mu: f64,
        spectral_density: SpectralDensity,
        pv_cutoff: Option<f64>,
    },
    LocalEquilibrium {
        beta_function: BetaFunction,
        spectral_density: SpectralDensity,
        pv_cutoff: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub t_final: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_samples() -> usize {
    11
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            t_final: 10.0,
            n_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsagerParams {
    /// Overrides the offset implied by the reservoirs.
    pub dbeta: Option<f64>,
    /// Overrides the offset implied by the reservoirs.
    pub dmu: Option<f64>,
    #[serde(default = "default_step")]
    pub h: f64,
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

impl Default for OnsagerParams {
    fn default() -> Self {
        Self {
            dbeta: None,
            dmu: None,
            h: DEFAULT_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemSpec,
    pub reservoirs: Vec<ReservoirSpec>,
    pub lamb_shift: Option<LambShift>,
    pub evolve: EvolveParams,
    pub onsager: OnsagerParams,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let n = raw.system.levels.len();
    if raw.system.dipoles.len() != raw.reservoir.len() {
        return Err(invalid(
            "system.dipoles",
            format!(
                "{} dipole lists for {} reservoirs",
                raw.system.dipoles.len(),
                raw.reservoir.len()
            ),
        ));
    }
    let mut dipoles = Vec::with_capacity(raw.system.dipoles.len());
    for (j, entries) in raw.system.dipoles.iter().enumerate() {
        let mut d = DMatrix::<Complex64>::zeros(n, n);
        for (i, &(l, m, re, im)) in entries.iter().enumerate() {
            let field = || format!("system.dipoles[{j}][{i}]");
            if l == 0 || m == 0 || l > n || m > n {
                return Err(invalid(field(), format!("level index outside 1..={n}")));
            }
            let z = Complex64::new(re, im);
            // store on the <lower|D|upper> side
            let (r, c, z) = if l <= m { (l - 1, m - 1, z) } else { (m - 1, l - 1, z.conj()) };
            d[(r, c)] = z;
        }
        dipoles.push(d);
    }
    let gap_tol = raw.system.gap_tol.unwrap_or(DEFAULT_GAP_TOL);
    if !(gap_tol.is_finite() && gap_tol >= 0.0) {
        return Err(invalid("system.gap_tol", "must be a nonnegative number"));
    }
    let system = SystemSpec::with_gap_tol(raw.system.levels, dipoles, gap_tol)?;

    let reservoirs: Vec<ReservoirSpec> = raw
        .reservoir
        .into_iter()
        .map(|r| match r {
            RawReservoir::Equilibrium {
                beta,
                mu,
                spectral_density,
                pv_cutoff,
            } => ReservoirSpec::equilibrium(beta, mu, spectral_density)
                .with_pv_cutoff(pv_cutoff.unwrap_or(DEFAULT_PV_CUTOFF)),
            RawReservoir::LocalEquilibrium {
                beta_function,
                spectral_density,
                pv_cutoff,
            } => ReservoirSpec::local_equilibrium(beta_function, spectral_density)
                .with_pv_cutoff(pv_cutoff.unwrap_or(DEFAULT_PV_CUTOFF)),
        })
        .collect();
    for r in &reservoirs {
        r.validate_against(system.bohr())?;
    }

    let evolve = raw.evolve.unwrap_or_default();
    if !(evolve.t_final.is_finite() && evolve.t_final >= 0.0) {
        return Err(invalid("evolve.t_final", "must be a nonnegative number"));
    }
    if evolve.n_samples < 2 {
        return Err(invalid("evolve.n_samples", "need at least two samples"));
    }
    let onsager = raw.onsager.unwrap_or_default();
    let offsets_finite = [onsager.dbeta, onsager.dmu].iter().flatten().all(|v| v.is_finite());
    if !(offsets_finite && onsager.h.is_finite() && onsager.h > 0.0) {
        return Err(invalid("onsager", "offsets must be finite and h positive"));
    }
    Ok(Scenario {
        system,
        reservoirs,
        lamb_shift: raw.lamb_shift,
        evolve,
        onsager,
    })
}
