//! One function per subcommand. Each returns the CSV table and the JSON
//! payload of its report.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Context as _;
use log::{info, warn};
use neqsteady_core::currents::{gibbs_domination, micro_currents, CurrentError};
use neqsteady_core::dynamics::{build_generators, evolve as evolve_state, stationary_state, DensityMatrix, GeneratorOps};
use neqsteady_core::kms::{beta_profile, ddb_report, kms_report};
use neqsteady_core::linalg::{self, CMatrix, ONE};
use neqsteady_core::linear::{onsager_report, sweep_point, SweepParameter, SymmetricPoint, TwoBathModel};
use neqsteady_core::rates::{rate_set, LambShift, RateSet};
use neqsteady_core::report::{read_density_matrix, write_density_matrix, Cell, Table};
use neqsteady_core::scenario::Scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::errors::InvalidInput;

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub lamb: LambShift,
    pub seed: u64,
    pub energy_offset: f64,
}

pub struct Report {
    pub command: &'static str,
    pub table: Table,
    pub data: Value,
}

impl Report {
    /// Versioned JSON document; `data` fields sit at the top level.
    pub fn json(&self) -> Value {
        let mut doc = json!({
            "schema_version": 1,
            "command": self.command,
            "columns": self.table.header,
        });
        if let (Value::Object(doc), Value::Object(data)) = (&mut doc, &self.data) {
            doc.extend(data.clone());
        }
        doc
    }
}

fn generators(ctx: &Context) -> anyhow::Result<(RateSet, GeneratorOps)> {
    let s = ctx.scenario;
    let rates = rate_set(&s.system, &s.reservoirs, ctx.lamb)?;
    let (ops, _) = build_generators(&s.system, &rates)?;
    Ok((rates, ops))
}

fn solve(ctx: &Context) -> anyhow::Result<(RateSet, GeneratorOps, DensityMatrix)> {
    let (rates, ops) = generators(ctx)?;
    let rho = stationary_state(&ops)?;
    info!("stationary state found, min rate {:e}", rates.min_rate());
    Ok((rates, ops, rho))
}

fn shifted_levels(ctx: &Context) -> Vec<f64> {
    ctx.scenario
        .system
        .levels()
        .iter()
        .map(|e| e + ctx.energy_offset)
        .collect()
}

fn write_state(path: &Path, rho: &DensityMatrix) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_density_matrix(rho.matrix(), BufWriter::new(f))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn validate(ctx: &Context) -> anyhow::Result<Report> {
    let system = &ctx.scenario.system;
    for (r, c) in system.inert_entries() {
        warn!("dipole entry ({}, {}) sits below the diagonal and is ignored", r + 1, c + 1);
    }
    let rates = rate_set(system, &ctx.scenario.reservoirs, ctx.lamb)?;
    let mut table = Table::new(&["m", "n", "omega", "reservoir", "re_gm", "re_gp", "im_gm", "im_gp"]);
    for j in 0..rates.n_reservoirs() {
        for (k, e) in rates.bohr().iter().enumerate() {
            let s = rates.susceptivity(j, k);
            table.push(vec![
                (e.upper + 1).into(),
                (e.lower + 1).into(),
                e.omega.into(),
                (j + 1).into(),
                s.gamma_minus.re.into(),
                s.gamma_plus.re.into(),
                s.gamma_minus.im.into(),
                s.gamma_plus.im.into(),
            ]);
        }
    }
    Ok(Report {
        command: "validate",
        data: json!({
            "levels": system.levels(),
            "bohr": rates.bohr().entries(),
            "reservoirs": ctx.scenario.reservoirs,
            "lamb_shift": ctx.lamb,
            "min_rate": rates.min_rate(),
            "max_cocycle_defect": rates.max_cocycle_defect(),
        }),
        table,
    })
}

pub fn steady(ctx: &Context, state_out: Option<&Path>) -> anyhow::Result<Report> {
    let (_, _, rho) = solve(ctx)?;
    let p = rho.populations();
    let levels = shifted_levels(ctx);
    let profile = match beta_profile(&p, &levels) {
        Ok(prof) => Some(prof),
        Err(e) => {
            warn!("no β_S profile: {e}");
            None
        }
    };
    let mut table = Table::new(&["level", "energy", "population", "beta_s"]);
    for (l, (e, pl)) in levels.iter().zip(&p).enumerate() {
        let b = profile.as_ref().map_or(f64::NAN, |prof| prof.beta[l]);
        table.push(vec![(l + 1).into(), (*e).into(), (*pl).into(), b.into()]);
    }
    if let Some(path) = state_out {
        write_state(path, &rho)?;
    }
    Ok(Report {
        command: "steady",
        data: json!({
            "energy_offset": ctx.energy_offset,
            "populations": p,
            "profile": profile,
        }),
        table,
    })
}

fn initial_state(ctx: &Context, spec: &str, n: usize) -> anyhow::Result<DensityMatrix> {
    let m = match spec {
        "ground" => linalg::matrix_unit(n, 0, 0),
        "random" => linalg::random_density_matrix(&mut ChaCha8Rng::seed_from_u64(ctx.seed), n),
        path => {
            let f = File::open(path).with_context(|| format!("cannot open {path}"))?;
            read_density_matrix(f).with_context(|| format!("reading {path}"))?
        }
    };
    if m.nrows() != n {
        return Err(InvalidInput(format!("initial state is {}x{}, system has {n} levels", m.nrows(), m.ncols())).into());
    }
    DensityMatrix::new(m).map_err(|e| InvalidInput(format!("initial state: {e}")).into())
}

fn max_coherence(m: &CMatrix) -> f64 {
    let n = m.nrows();
    (0..n)
        .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
        .fold(0.0, |a, (r, c)| a.max(m[(r, c)].norm()))
}

pub fn evolve(
    ctx: &Context,
    initial: &str,
    t_final: Option<f64>,
    n_samples: Option<usize>,
    state_out: Option<&Path>,
) -> anyhow::Result<Report> {
    let (_, ops) = generators(ctx)?;
    let n = ops.dim();
    let t_final = t_final.unwrap_or(ctx.scenario.evolve.t_final);
    let samples = n_samples.unwrap_or(ctx.scenario.evolve.n_samples);
    if !(t_final.is_finite() && t_final >= 0.0) || samples < 2 {
        return Err(InvalidInput("need t_final >= 0 and at least two samples".into()).into());
    }
    let rho0 = initial_state(ctx, initial, n)?;
    let target = match stationary_state(&ops) {
        Ok(r) => Some(r),
        Err(e) => {
            warn!("no unique stationary state, distance column is nan: {e}");
            None
        }
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|l| format!("p_{l}")));
    header.extend(["coherence".to_string(), "distance".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header);
    let mut last = rho0.clone();
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_final * i as f64 / (samples - 1) as f64;
        let rho = evolve_state(&ops, &rho0, t)?;
        let distance = target
            .as_ref()
            .map_or(f64::NAN, |s| linalg::frobenius(&(rho.matrix() - s.matrix())));
        let p = rho.populations();
        let coherence = max_coherence(rho.matrix());
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(p.iter().map(|&x| Cell::from(x)));
        row.extend([coherence.into(), distance.into()]);
        table.push(row);
        rows.push(json!({"t": t, "populations": p, "coherence": coherence, "distance": distance}));
        last = rho;
    }
    if let Some(path) = state_out {
        write_state(path, &last)?;
    }
    let trace_error = (linalg::trace(last.matrix()) - ONE).norm();
    Ok(Report {
        command: "evolve",
        data: json!({"samples": rows, "final_trace_error": trace_error}),
        table,
    })
}

pub fn currents(ctx: &Context) -> anyhow::Result<Report> {
    let (rates, _, rho) = solve(ctx)?;
    let mut report = micro_currents(&rates, &rho);
    match gibbs_domination(&rates, &ctx.scenario.reservoirs, &rho) {
        Ok(v) => report.gibbs_bound = Some(v),
        Err(CurrentError::NotTwoEquilibriumBaths) => {}
        Err(e) => return Err(e.into()),
    }
    let nb = rates.bohr().len();
    let mut table = Table::new(&["reservoir", "m", "n", "omega", "J", "JE", "JQ", "defect"]);
    for (i, c) in report.currents.iter().enumerate() {
        table.push(vec![
            (c.reservoir + 1).into(),
            (c.upper + 1).into(),
            (c.lower + 1).into(),
            c.omega.into(),
            c.number.into(),
            c.energy.into(),
            c.heat.into(),
            report.ddb_defect[i % nb].value.into(),
        ]);
    }
    Ok(Report {
        command: "currents",
        data: serde_json::to_value(&report)?,
        table,
    })
}

fn two_bath(ctx: &Context) -> anyhow::Result<(TwoBathModel, SymmetricPoint, f64)> {
    let s = ctx.scenario;
    let (model, point) = TwoBathModel::new(s.system.clone(), &s.reservoirs, ctx.lamb)?;
    let point = point.with_offsets(
        s.onsager.dbeta.unwrap_or(point.dbeta),
        s.onsager.dmu.unwrap_or(point.dmu),
    );
    Ok((model, point, s.onsager.h))
}

pub fn onsager(ctx: &Context) -> anyhow::Result<Report> {
    let (model, point, h) = two_bath(ctx)?;
    info!("onsager at {point:?}, step {h:e}");
    let report = onsager_report(&model, &point, h)?;
    let mut table = Table::new(&[
        "m",
        "n",
        "omega",
        "Gamma_on",
        "L_fd_12",
        "L_fd_21",
        "M_on",
        "sigma",
        "reciprocity_defect",
    ]);
    for p in &report.pairs {
        let c = &p.coefficients;
        table.push(vec![
            (c.upper + 1).into(),
            (c.lower + 1).into(),
            c.omega.into(),
            c.gamma_on.into(),
            c.l_fd_12.into(),
            c.l_fd_21.into(),
            c.m_on.into(),
            p.sigma.into(),
            c.reciprocity_defect.into(),
        ]);
    }
    Ok(Report {
        command: "onsager",
        data: serde_json::to_value(&report)?,
        table,
    })
}

pub fn kms(ctx: &Context) -> anyhow::Result<Report> {
    let (rates, ops, rho) = solve(ctx)?;
    let report = kms_report(&ops, rho.matrix(), ctx.energy_offset)
        .context("β_S needs nonzero level energies; see --energy-offset")?;
    let ddb = ddb_report(&ops, &micro_currents(&rates, &rho), rho.matrix())?;
    let max_pi_hat = report
        .pi_hat
        .iter()
        .fold(0.0_f64, |a, p| a.max(p.down.abs()).max(p.up.abs()));
    let mut table = Table::new(&[
        "max_kms_residual",
        "lg_plus_norm",
        "max_pi_hat",
        "ddb_discrepancy",
        "beta_spread",
        "equilibrium",
    ]);
    table.push(vec![
        report.max_kms_residual.into(),
        report.lg_plus_norm.into(),
        max_pi_hat.into(),
        ddb.max_discrepancy.into(),
        report.profile.spread().into(),
        report.profile.equilibrium.into(),
    ]);
    Ok(Report {
        command: "kms",
        data: json!({
            "energy_offset": ctx.energy_offset,
            "kms": report,
            "max_pi_hat": max_pi_hat,
            "ddb_discrepancy": ddb.max_discrepancy,
        }),
        table,
    })
}

pub fn ddb(ctx: &Context) -> anyhow::Result<Report> {
    let (rates, ops, rho) = solve(ctx)?;
    let currents = micro_currents(&rates, &rho);
    let ddb = ddb_report(&ops, &currents, rho.matrix())?;
    let n = ops.dim();
    let mut table = Table::new(&[
        "m",
        "n",
        "omega",
        "defect",
        "symmetry_re",
        "symmetry_im",
        "from_currents",
        "discrepancy",
        "db_satisfied",
    ]);
    for d in &currents.ddb_defect {
        let e = &ddb.pairs[d.upper * n + d.lower];
        let discrepancy = (e.direct_re - e.from_currents).hypot(e.direct_im);
        table.push(vec![
            (d.upper + 1).into(),
            (d.lower + 1).into(),
            d.omega.into(),
            d.value.into(),
            e.direct_re.into(),
            e.direct_im.into(),
            e.from_currents.into(),
            discrepancy.into(),
            currents.db_satisfied.into(),
        ]);
    }
    info!("symmetry defect paths agree to {:e}", ddb.max_discrepancy);
    Ok(Report {
        command: "ddb",
        data: json!({
            "db_satisfied": currents.db_satisfied,
            "pair_defects": currents.ddb_defect,
            "ddb": ddb,
        }),
        table,
    })
}

pub fn sweep(ctx: &Context, param: SweepParameter, values: &[f64]) -> anyhow::Result<Report> {
    let (model, base, _) = two_bath(ctx)?;
    info!("sweeping {} over {} points", param.name(), values.len());
    let rows = values
        .par_iter()
        .map(|&v| sweep_point(&model, base, param, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = Table::new(&[param.name(), "beta0", "dbeta", "mu0", "dmu", "J", "JE", "JQ", "sigma"]);
    for r in &rows {
        table.push(vec![
            r.value.into(),
            r.point.beta0.into(),
            r.point.dbeta.into(),
            r.point.mu0.into(),
            r.point.dmu.into(),
            r.number.into(),
            r.energy.into(),
            r.heat.into(),
            r.sigma.into(),
        ]);
    }
    Ok(Report {
        command: "sweep",
        data: json!({"parameter": param.name(), "rows": rows}),
        table,
    })
}
