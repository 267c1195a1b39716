use std::path::PathBuf;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::output::{emit, num, opt, Table};
use super::Command;
use crate::analytic::{
    cf_outage_lower, cf_outage_upper, cutset_outage_lower, df_outage, direct_outage, OutageEstimate, Protocol,
};
use crate::error::Result;
use crate::exec::{with_threads, Execution};
use crate::montecarlo::{simulate, McReport};
use crate::search::{
    cf_optimized, rate_curve, region_map, sweep_lambda, RateCurve, RegionMap, SweepResult, WcOptimum,
};

/// What a finished command wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: PathBuf,
    pub json: PathBuf,
    /// Failed checks of `validate`; always 0 for the other commands.
    pub failures: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures == 0 {
            0
        } else {
            1
        }
    }
}

#[derive(Serialize)]
struct Meta<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    config: &'a ScenarioConfig,
    results: T,
}

/// Runs one command inside the configured thread pool and writes its files.
pub fn run_command(command: Command, cfg: &ScenarioConfig) -> Result<Outcome> {
    with_threads(cfg.threads, || dispatch(command, cfg))?
}

fn dispatch(command: Command, cfg: &ScenarioConfig) -> Result<Outcome> {
    let exec = Execution::Parallel;
    let name = command.name();
    let mut failures = 0;
    let (csv, json) = match command {
        Command::Outage => {
            let (t, r) = outage(cfg, exec)?;
            write(cfg, name, &t, r)?
        }
        Command::Sweep => {
            let (t, r) = sweep(cfg, exec)?;
            write(cfg, name, &t, r)?
        }
        Command::Rates => {
            let (t, r) = rates(cfg, exec)?;
            write(cfg, name, &t, r)?
        }
        Command::Region => {
            let (t, r) = region(cfg, exec)?;
            write(cfg, name, &t, r)?
        }
        Command::Validate => {
            let (t, r) = validate(cfg, exec)?;
            failures = r.failures;
            write(cfg, name, &t, r)?
        }
    };
    Ok(Outcome { csv, json, failures })
}

fn write<T: Serialize>(
    cfg: &ScenarioConfig,
    name: &'static str,
    table: &Table,
    results: T,
) -> Result<(PathBuf, PathBuf)> {
    let meta = Meta {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        results,
    };
    emit(&cfg.out, name, table, &meta)
}

fn estimate_row(e: &OutageEstimate, w_c: Option<f64>, rho: Option<f64>) -> Vec<String> {
    vec![
        e.protocol().name().into(),
        e.kind.name().into(),
        num(e.value),
        opt(e.stderr),
        opt(w_c),
        opt(rho),
    ]
}

#[derive(Serialize)]
struct OutageResults {
    w_c: f64,
    wc_search: Option<WcOptimum>,
    cutset_rho: Option<f64>,
    monte_carlo: Option<McReport>,
}

fn outage(cfg: &ScenarioConfig, exec: Execution) -> Result<(Table, OutageResults)> {
    let (net, geom, params, quad) = (cfg.network()?, cfg.geometry()?, cfg.params()?, cfg.quadrature());
    let df = df_outage(&net, &geom, &params, &quad)?;
    let (cf_upper, cf_lower, wc_search) = match cfg.w_c {
        Some(_) => (
            cf_outage_upper(&net, &geom, &params, &quad)?,
            cf_outage_lower(&net, &geom, &params, &quad)?,
            None,
        ),
        None => {
            let (u, l, o) = cf_optimized(&net, &geom, &params, &quad)?;
            (u, l, Some(o))
        }
    };
    let w_c = cf_upper.meta.w_c.unwrap_or(params.w_c);
    let direct = direct_outage(&net, geom.distance(), params.threshold)?;
    let cutset = cutset_outage_lower(&net, &geom, &params, &quad)?;

    let mut t = Table::new(&["protocol", "kind", "value", "stderr", "w_c", "rho"]);
    t.push(estimate_row(&df, None, Some(params.rho_mag)));
    t.push(estimate_row(&cf_upper, Some(w_c), None));
    t.push(estimate_row(&cf_lower, Some(w_c), None));
    t.push(estimate_row(&direct, None, None));
    t.push(estimate_row(&cutset, None, cutset.meta.rho_mag));
    let monte_carlo = if cfg.with_mc {
        let mc = simulate(&net, &geom, &params.with_w_c(w_c), &cfg.simulation(), exec)?;
        t.push(estimate_row(&mc.df, None, Some(params.rho_mag)));
        t.push(estimate_row(&mc.cf, Some(w_c), None));
        t.push(estimate_row(&mc.direct, None, None));
        t.push(estimate_row(&mc.cutset, None, mc.cutset.meta.rho_mag));
        Some(mc)
    } else {
        None
    };
    Ok((
        t,
        OutageResults {
            w_c,
            wc_search,
            cutset_rho: cutset.meta.rho_mag,
            monte_carlo,
        },
    ))
}

#[derive(Serialize)]
struct SweepResults {
    sweep: SweepResult,
    monte_carlo: Vec<McReport>,
}

fn sweep(cfg: &ScenarioConfig, exec: Execution) -> Result<(Table, SweepResults)> {
    let (geom, params, quad) = (cfg.geometry()?, cfg.params()?, cfg.quadrature());
    let s = sweep_lambda(
        &Protocol::ALL,
        &cfg.lambdas,
        cfg.alpha,
        &geom,
        &params,
        &quad,
        exec,
    )?;
    let mut t = Table::new(&[
        "lambda",
        "df",
        "cf_upper",
        "cf_lower",
        "direct",
        "cutset",
        "w_c",
        "cutset_rho",
        "mc_df",
        "mc_df_stderr",
        "mc_cf",
        "mc_cf_stderr",
        "mc_direct",
        "mc_direct_stderr",
        "mc_cutset",
        "mc_cutset_stderr",
    ]);
    let mut monte_carlo = Vec::new();
    for p in &s.points {
        let value = |q: Protocol| p.get(q).map(|e| e.value);
        let mut row = vec![
            num(p.lambda),
            opt(value(Protocol::Df)),
            opt(value(Protocol::Cf)),
            opt(p.cf_lower.as_ref().map(|e| e.value)),
            opt(value(Protocol::Direct)),
            opt(value(Protocol::Cutset)),
            opt(p.w_c),
            opt(p.cutset_rho),
        ];
        if cfg.with_mc {
            let net = cfg.network()?.with_lambda(p.lambda)?;
            let w_c = p.w_c.unwrap_or(params.w_c);
            let mc = simulate(&net, &geom, &params.with_w_c(w_c), &cfg.simulation(), exec)?;
            for q in Protocol::ALL {
                let e = mc.get(q);
                row.push(num(e.value));
                row.push(opt(e.stderr));
            }
            monte_carlo.push(mc);
        } else {
            row.extend(std::iter::repeat_n(String::new(), 8));
        }
        t.push(row);
    }
    Ok((
        t,
        SweepResults {
            sweep: s,
            monte_carlo,
        },
    ))
}

fn rates(cfg: &ScenarioConfig, exec: Execution) -> Result<(Table, RateCurve)> {
    let (net, params, quad) = (cfg.network()?, cfg.params()?, cfg.quadrature());
    let curve = rate_curve(
        &Protocol::ALL,
        &cfg.ks,
        cfg.theta,
        cfg.distance,
        cfg.target_outage,
        &net,
        &params,
        &quad,
        exec,
    )?;
    let mut t = Table::new(&[
        "k", "r_df", "r_cf", "r_direct", "r_cutset", "t_df", "t_cf", "t_direct", "t_cutset",
    ]);
    for (k, row) in curve.ks.iter().zip(&curve.rows) {
        let mut cells = vec![num(*k)];
        cells.extend(row.iter().map(|m| num(m.rate)));
        cells.extend(row.iter().map(|m| num(m.threshold)));
        t.push(cells);
    }
    Ok((t, curve))
}

#[derive(Serialize)]
struct RegionResults {
    counts: Vec<(Protocol, usize)>,
    invalid_cells: usize,
    map: RegionMap,
}

fn region(cfg: &ScenarioConfig, exec: Execution) -> Result<(Table, RegionResults)> {
    let (net, params, quad) = (cfg.network()?, cfg.params()?, cfg.quadrature());
    let map = region_map(&net, &cfg.region_grid(), cfg.distance, &params, &quad, exec)?;
    let mut t = Table::new(&["x", "y", "winner", "p_df", "p_cf_upper", "p_direct"]);
    for c in &map.cells {
        t.push(vec![
            num(c.x),
            num(c.y),
            c.winner.map_or("invalid", |w| w.name()).into(),
            num(c.p_df),
            num(c.p_cf_upper),
            num(c.p_direct),
        ]);
    }
    Ok((
        t,
        RegionResults {
            counts: map.precedence.iter().map(|&p| (p, map.count(p))).collect(),
            invalid_cells: map.invalid_cells(),
            map,
        },
    ))
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    check: &'static str,
    lambda: f64,
    expected_lo: f64,
    expected_hi: f64,
    observed: f64,
    stderr: f64,
    pass: bool,
}

/// `observed` within three standard errors of `[lo, hi]`.
fn check(name: &'static str, lambda: f64, lo: f64, hi: f64, mc: &OutageEstimate) -> Check {
    let s = mc.stderr.unwrap_or(0.0);
    Check {
        check: name,
        lambda,
        expected_lo: lo,
        expected_hi: hi,
        observed: mc.value,
        stderr: s,
        pass: mc.value + 3.0 * s >= lo && mc.value - 3.0 * s <= hi,
    }
}

#[derive(Serialize)]
struct ValidateResults {
    failures: usize,
    checks: Vec<Check>,
    monte_carlo: Vec<McReport>,
}

fn validate(cfg: &ScenarioConfig, exec: Execution) -> Result<(Table, ValidateResults)> {
    let (geom, params, quad) = (cfg.geometry()?, cfg.params()?, cfg.quadrature());
    let mut checks = Vec::new();
    let mut monte_carlo = Vec::new();
    for &lambda in &cfg.lambdas {
        let net = cfg.network()?.with_lambda(lambda)?;
        let df = df_outage(&net, &geom, &params, &quad)?.value;
        let direct = direct_outage(&net, geom.distance(), params.threshold)?.value;
        let cutset = cutset_outage_lower(&net, &geom, &params, &quad)?.value;
        let (cf_upper, cf_lower, w_c) = match cfg.w_c {
            Some(w) => (
                cf_outage_upper(&net, &geom, &params, &quad)?.value,
                cf_outage_lower(&net, &geom, &params, &quad)?.value,
                w,
            ),
            None => {
                let (u, l, _) = cf_optimized(&net, &geom, &params, &quad)?;
                (u.value, l.value, u.meta.w_c.unwrap_or(params.w_c))
            }
        };
        let mc = simulate(&net, &geom, &params.with_w_c(w_c), &cfg.simulation(), exec)?;
        checks.push(check("direct", lambda, direct, direct, &mc.direct));
        checks.push(check("df", lambda, df, df, &mc.df));
        checks.push(check("cf", lambda, cf_lower, cf_upper, &mc.cf));
        checks.push(check("cutset", lambda, cutset, 1.0, &mc.cutset));
        monte_carlo.push(mc);
    }
    let mut t = Table::new(&[
        "check",
        "lambda",
        "expected_lo",
        "expected_hi",
        "observed",
        "stderr",
        "pass",
    ]);
    for c in &checks {
        t.push(vec![
            c.check.into(),
            num(c.lambda),
            num(c.expected_lo),
            num(c.expected_hi),
            num(c.observed),
            num(c.stderr),
            c.pass.to_string(),
        ]);
    }
    let failures = checks.iter().filter(|c| !c.pass).count();
    Ok((
        t,
        ValidateResults {
            failures,
            checks,
            monte_carlo,
        },
    ))
}
