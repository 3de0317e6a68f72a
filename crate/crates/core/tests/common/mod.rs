//! Random instances shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use neqsteady_core::currents::{micro_currents, CurrentReport};
use neqsteady_core::dynamics::{build_generators, stationary_state, DensityMatrix, GeneratorOps};
use neqsteady_core::model::{BetaFunction, ReservoirSpec, SpectralDensity, SystemSpec};
use neqsteady_core::rates::{rate_set, LambShift, RateSet};
use neqsteady_core::three_level::ThreeLevelGaps;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Levels starting at 0 with all Bohr frequencies at least 0.02 apart.
pub fn random_levels<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let mut levels = vec![0.0];
        for _ in 1..n {
            let last = *levels.last().unwrap();
            levels.push(last + rng.random_range(0.4..1.6));
        }
        let mut gaps = Vec::new();
        for i in 0..n {
            for j in 0..i {
                gaps.push(levels[i] - levels[j]);
            }
        }
        gaps.sort_by(f64::total_cmp);
        if gaps.windows(2).all(|w| w[1] - w[0] > 0.02) {
            return levels;
        }
    }
}

/// Upper-triangular dipole with every transition coupled.
pub fn random_dipole<R: Rng>(rng: &mut R, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |r, c| {
        if r < c {
            Complex64::from_polar(rng.random_range(0.3..1.2), rng.random_range(0.0..2.0 * PI))
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn random_ohmic<R: Rng>(rng: &mut R) -> SpectralDensity {
    SpectralDensity::Ohmic {
        eta: rng.random_range(0.05..0.3),
        cutoff: rng.random_range(3.0..8.0),
    }
}

pub fn random_flat<R: Rng>(rng: &mut R) -> SpectralDensity {
    SpectralDensity::Flat {
        eta: rng.random_range(0.05..0.3),
    }
}

pub struct Solved {
    pub system: SystemSpec,
    pub reservoirs: Vec<ReservoirSpec>,
    pub rates: RateSet,
    pub ops: GeneratorOps,
    pub rho: DensityMatrix,
    pub report: CurrentReport,
}

pub fn solve(system: SystemSpec, reservoirs: Vec<ReservoirSpec>, lamb: LambShift) -> Solved {
    let rates = rate_set(&system, &reservoirs, lamb).expect("rates");
    let (ops, _) = build_generators(&system, &rates).expect("generators");
    let rho = stationary_state(&ops).expect("stationary state");
    let report = micro_currents(&rates, &rho);
    Solved {
        system,
        reservoirs,
        rates,
        ops,
        rho,
        report,
    }
}

/// Random generic system in equilibrium with one bath at `beta`, `mu = 0`.
pub fn equilibrium_instance<R: Rng>(rng: &mut R, n: usize, beta: f64) -> Solved {
    let levels = random_levels(rng, n);
    let system = SystemSpec::new(levels, vec![random_dipole(rng, n)]).unwrap();
    let bath = ReservoirSpec::equilibrium(beta, 0.0, random_ohmic(rng));
    solve(system, vec![bath], LambShift::Pv)
}

/// Two equilibrium baths at different temperatures with independent dipoles.
pub fn two_bath_instance<R: Rng>(rng: &mut R, n: usize, lamb: LambShift) -> Solved {
    let levels = random_levels(rng, n);
    let system =
        SystemSpec::new(levels, vec![random_dipole(rng, n), random_dipole(rng, n)]).unwrap();
    let baths = vec![
        ReservoirSpec::equilibrium(rng.random_range(0.3..0.8), 0.0, random_ohmic(rng)),
        ReservoirSpec::equilibrium(rng.random_range(1.2..3.0), 0.0, random_ohmic(rng)),
    ];
    solve(system, baths, lamb)
}

pub fn gibbs(levels: &[f64], beta: f64) -> Vec<f64> {
    let w: Vec<f64> = levels.iter().map(|e| (-beta * e).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|x| x / z).collect()
}

/// One local-equilibrium bath on a three-level system.
pub struct ModelB {
    pub gaps: ThreeLevelGaps,
    pub beta: BetaFunction,
    /// `(γ21, γ32, γ31)` computed directly from `π |d|² J(ω)`.
    pub couplings: [f64; 3],
    pub solved: Solved,
}

pub fn model_b(gaps: ThreeLevelGaps, beta: BetaFunction, sd: SpectralDensity, d: [f64; 3]) -> ModelB {
    let levels = vec![0.0, gaps.w21, gaps.w21 + gaps.w32];
    let mut dip = DMatrix::<Complex64>::zeros(3, 3);
    dip[(0, 1)] = Complex64::new(d[0], 0.0);
    dip[(1, 2)] = Complex64::new(d[1], 0.0);
    dip[(0, 2)] = Complex64::new(d[2], 0.0);
    let w = gaps.all();
    let couplings = [
        PI * d[0] * d[0] * sd.eval(w[0]),
        PI * d[1] * d[1] * sd.eval(w[1]),
        PI * d[2] * d[2] * sd.eval(w[2]),
    ];
    let system = SystemSpec::new(levels, vec![dip]).unwrap();
    let bath = ReservoirSpec::local_equilibrium(beta.clone(), sd);
    ModelB {
        gaps,
        beta,
        couplings,
        solved: solve(system, vec![bath], LambShift::None),
    }
}

/// Canonical instance: gaps (1, 1.5), `β(ω) = 1/ω` so that `δ = 1`.
pub fn canonical_model_b() -> ModelB {
    model_b(
        ThreeLevelGaps::new(1.0, 1.5).unwrap(),
        BetaFunction::Inverse { scale: 1.0 },
        SpectralDensity::Flat { eta: 0.1 },
        [1.0, 1.0, 1.0],
    )
}

pub fn random_beta_function<R: Rng>(rng: &mut R) -> BetaFunction {
    match rng.random_range(0..4) {
        0 => BetaFunction::Constant {
            beta: rng.random_range(0.3..3.0),
        },
        1 => BetaFunction::Inverse {
            scale: rng.random_range(0.3..2.0),
        },
        2 => BetaFunction::Linear {
            intercept: rng.random_range(1.0..2.0),
            slope: rng.random_range(-0.3..0.3),
        },
        _ => BetaFunction::Power {
            coef: rng.random_range(0.5..2.0),
            exponent: rng.random_range(-0.8..0.8),
        },
    }
}

pub fn random_model_b<R: Rng>(rng: &mut R) -> ModelB {
    let gaps = loop {
        let (a, b): (f64, f64) = (rng.random_range(0.4..1.6), rng.random_range(0.4..1.6));
        if (a - b).abs() > 0.05 {
            break ThreeLevelGaps::new(a, b).unwrap();
        }
    };
    let sd = if rng.random_bool(0.5) {
        random_flat(rng)
    } else {
        random_ohmic(rng)
    };
    let d = [
        rng.random_range(0.3..1.2),
        rng.random_range(0.3..1.2),
        rng.random_range(0.3..1.2),
    ];
    model_b(gaps, random_beta_function(rng), sd, d)
}
