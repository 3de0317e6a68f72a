//! Adaptive Gauss-Kronrod (7/15) integration and Cauchy principal values.

use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite near {at}")]
    NonFinite { at: f64 },
    #[error("no convergence after {subdivisions} subdivisions (estimate {estimate}, error {error})")]
    SubdivisionLimit {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },
    #[error("principal value did not settle after {iterations} exclusion halvings")]
    ExclusionLimit { iterations: usize },
    #[error("pole {pole} is not inside ({a}, {b})")]
    PoleOutside { pole: f64, a: f64, b: f64 },
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-11,
            abs: 1e-15,
            max_subdivisions: 4000,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, QuadError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    if !fc.is_finite() {
        return Err(QuadError::NonFinite { at: c });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (i, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let (xl, xr) = (c - h * x, c + h * x);
        let (fl, fr) = (f(xl), f(xr));
        if !fl.is_finite() {
            return Err(QuadError::NonFinite { at: xl });
        }
        if !fr.is_finite() {
            return Err(QuadError::NonFinite { at: xr });
        }
        kronrod += w * (fl + fr);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (fl + fr);
        }
    }
    Ok(Segment {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    })
}

/// Adaptive integral of `f` over `[a, b]`; returns `(value, error estimate)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<(f64, f64), QuadError> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    if b < a {
        let (v, e) = integrate(f, b, a, tol)?;
        return Ok((-v, e));
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b)?;
    let mut total = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut subdivisions = 0;
    while error > tol.abs.max(tol.rel * total.abs()) {
        if subdivisions >= tol.max_subdivisions {
            return Err(QuadError::SubdivisionLimit {
                subdivisions,
                estimate: total,
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(QuadError::SubdivisionLimit {
                subdivisions,
                estimate: total,
                error,
            });
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
        if subdivisions % 64 == 0 {
            // resum to shed accumulated cancellation
            total = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
    Ok((total, error))
}

/// `PV ∫_a^b f(x) / (x - pole) dx`.
///
/// The symmetric neighbourhood `pole ± r` is folded into
/// `∫_δ^r (f(pole+u) - f(pole-u)) / u du`; δ is halved with a Richardson
/// step until two successive extrapolants agree to `rel`.
pub fn principal_value<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    pole: f64,
    rel: f64,
) -> Result<f64, QuadError> {
    if !(a < pole && pole < b) {
        return Err(QuadError::PoleOutside { pole, a, b });
    }
    let tol = Tolerance::default();
    let r = (pole - a).min(b - pole);
    let tail_integrand = |x: f64| f(x) / (x - pole);
    let mut tail = 0.0;
    if pole - r > a {
        tail += integrate(tail_integrand, a, pole - r, tol)?.0;
    }
    if pole + r < b {
        tail += integrate(tail_integrand, pole + r, b, tol)?.0;
    }
    let g = |u: f64| (f(pole + u) - f(pole - u)) / u;

    let mut delta = 0.25 * r;
    let mut core = integrate(g, delta, r, tol)?.0;
    let mut previous: Option<f64> = None;
    const MAX_HALVINGS: usize = 40;
    for _ in 0..MAX_HALVINGS {
        let next_delta = 0.5 * delta;
        let next_core = core + integrate(g, next_delta, delta, tol)?.0;
        let extrapolated = 2.0 * next_core - core;
        if let Some(p) = previous {
            let scale = (extrapolated + tail).abs().max(tail.abs()).max(1e-300);
            if (extrapolated - p).abs() <= rel * scale || (extrapolated - p).abs() < 1e-15 {
                return Ok(extrapolated + tail);
            }
        }
        previous = Some(extrapolated);
        core = next_core;
        delta = next_delta;
    }
    Err(QuadError::ExclusionLimit {
        iterations: MAX_HALVINGS,
    })
}
