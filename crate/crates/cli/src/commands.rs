//! The subcommands. Each one validates its whole input before computing and
//! writes its outputs with fixed formatting, so identical inputs give
//! byte-identical files.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use thiserror::Error;

use zakai_chaos::chaos_propagator::{chaos_error_bound, filter_error_bound, precompute_table};
use zakai_chaos::filter_runtime::{estimate, FilterRun};
use zakai_chaos::galerkin::{assemble, integrate_galerkin_sde};
use zakai_chaos::hermite_space::{default_nodes_per_axis, gauss_hermite_grid, project, test_function_grid};
use zakai_chaos::model_sim::simulate;
use zakai_chaos::reference::{compare_on_path, kalman_bucy, KALMAN_SUBSTEPS};
use zakai_chaos::{
    BuiltinModel, ChaosFilter, ErrorBudget, FilterState, GalerkinSystem, ObservationRecord, PropagatorTable,
    SimulationConfig, SpatialBasis, TemporalBasis,
};

use crate::config::{ConfigError, Discretization, ExperimentConfig, OracleKind};

/// Table or observation file inconsistent with the configuration.
#[derive(Debug, Error)]
#[error("metadata mismatch: {0}")]
pub struct MetadataMismatch(pub String);

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

/// Projections of the initial density, the constant 1 and `f(x) = x`.
struct Projections {
    p_init: Vec<f64>,
    one: Vec<f64>,
    x: Vec<f64>,
}

fn projections(model: &BuiltinModel, basis: &SpatialBasis, quadrature_m: usize) -> Result<Projections> {
    let fm = model.filter_model()?;
    let p0 = fm.initial_density().clone();
    let p_init = project(|x| p0(x), basis, &gauss_hermite_grid(1, quadrature_m))?;
    let tg = test_function_grid(basis);
    Ok(Projections { p_init, one: project(|_| 1.0, basis, &tg)?, x: project(|x| x[0], basis, &tg)? })
}

fn galerkin_system(model: &BuiltinModel, k: usize, quadrature_m: usize) -> Result<GalerkinSystem> {
    let basis = SpatialBasis::new(1, k);
    assemble(&model.filter_model()?, &basis, &gauss_hermite_grid(1, quadrature_m)).map_err(Into::into)
}

fn build_table(model: &BuiltinModel, d: &Discretization) -> Result<PropagatorTable> {
    let system = galerkin_system(model, d.k, d.quadrature_m).context("precompute: assembling the Galerkin system")?;
    let tb = TemporalBasis::new(d.delta, d.n).context("precompute: temporal basis")?;
    precompute_table(&system, &tb, d.big_n, d.substeps).context("precompute: solving the propagator system")
}

pub fn precompute(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let d = config.discretization()?;
    let out = out.unwrap_or_else(|| config.run.out.join("table.txt"));
    let table = build_table(&config.model, &d)?;
    let mut bytes = Vec::new();
    if out.extension().is_some_and(|e| e == "bin") {
        table.write_binary(&mut bytes)
    } else {
        table.write_text(&mut bytes)
    }
    .context("precompute: serializing the table")?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&out, bytes).with_context(|| format!("precompute: writing {}", out.display()))?;
    println!("{} blocks of size {} written to {}", table.indices().len(), table.size(), out.display());
    Ok(())
}

pub fn simulate_paths(config: &ExperimentConfig, out: Option<PathBuf>, seed_override: Option<u64>) -> Result<()> {
    let d = config.discretization()?;
    let out = out.unwrap_or_else(|| config.run.out.clone());
    let model = config.model.filter_model()?;
    let cfg = SimulationConfig {
        horizon: d.horizon,
        dt_sim: d.dt_sim,
        dt_obs: d.dt_obs,
        seed: seed_override.unwrap_or(config.run.seed),
    };
    let paths: Vec<_> = (0..config.run.paths)
        .into_par_iter()
        .map(|p| simulate(&model, &cfg, p as u64).with_context(|| format!("simulate: path {p}")))
        .collect::<Result<_>>()?;
    create_dir(&out)?;
    for (i, path) in paths.iter().enumerate() {
        let mut obs = Vec::new();
        path.observation_record()?.write(&mut obs)?;
        fs::write(out.join(format!("obs_{i}.txt")), obs)?;
        let mut truth = Vec::new();
        path.write_truth(&mut truth)?;
        fs::write(out.join(format!("truth_{i}.txt")), truth)?;
    }
    println!("{} paths written to {}", paths.len(), out.display());
    Ok(())
}

fn read_table(path: &Path) -> Result<PropagatorTable> {
    let file = fs::File::open(path).with_context(|| format!("cannot open table {}", path.display()))?;
    PropagatorTable::read(BufReader::new(file)).with_context(|| format!("cannot read table {}", path.display()))
}

/// `None` when the file holds nothing but comments and blank lines.
fn read_observations(path: &Path) -> Result<Option<ObservationRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read observations {}", path.display()))?;
    if text.lines().all(|l| l.trim().is_empty() || l.trim_start().starts_with('#')) {
        return Ok(None);
    }
    let record = ObservationRecord::read(text.as_bytes())
        .with_context(|| format!("cannot parse observations {}", path.display()))?;
    Ok(Some(record))
}

fn check_table(table: &PropagatorTable, d: &Discretization) -> Result<(), MetadataMismatch> {
    let mismatch = |what: &str, table_v: String, config_v: String| {
        Err(MetadataMismatch(format!("table has {what}={table_v} but the config has {config_v}")))
    };
    if table.size() != d.k {
        return mismatch("K", table.size().to_string(), d.k.to_string());
    }
    if table.max_length() != d.big_n {
        return mismatch("N", table.max_length().to_string(), d.big_n.to_string());
    }
    if table.max_order() != d.n {
        return mismatch("n", table.max_order().to_string(), d.n.to_string());
    }
    if (table.delta() - d.delta).abs() > 1e-12 * d.delta {
        return mismatch("delta", table.delta().to_string(), d.delta.to_string());
    }
    Ok(())
}

fn check_record(record: &ObservationRecord, table: &PropagatorTable) -> Result<(), MetadataMismatch> {
    if record.channels() != table.channels() as usize {
        return Err(MetadataMismatch(format!(
            "observations have r={} channels, the table has r={}",
            record.channels(),
            table.channels()
        )));
    }
    let (delta, dobs) = (table.delta(), record.delta_obs());
    let limit = delta / (8 * table.max_order()) as f64;
    let q = delta / dobs;
    if dobs > limit * (1.0 + 1e-9) || (q - q.round()).abs() > 1e-9 * q {
        return Err(MetadataMismatch(format!(
            "delta_obs={dobs} must divide delta={delta} and be at most delta/(8n)={limit}"
        )));
    }
    Ok(())
}

/// Loads the table (or builds it when `table` is `None`) and the
/// observations, checks that they agree with the configuration and runs the
/// recursion over every complete window.
fn run_filter(
    config: &ExperimentConfig,
    table: Option<&Path>,
    obs: &Path,
) -> Result<(FilterRun<f64>, Option<ObservationRecord>, Projections, f64)> {
    let d = config.discretization()?;
    let table = match table {
        Some(path) => {
            let t = read_table(path)?;
            check_table(&t, &d)?;
            t
        }
        None => build_table(&config.model, &d)?,
    };
    let record = read_observations(obs)?;
    if let Some(r) = &record {
        check_record(r, &table)?;
    }
    let proj = projections(&config.model, table.basis(), d.quadrature_m).context("filter: projecting the prior")?;
    let delta = table.delta();
    let filter = ChaosFilter::new(table, proj.one.clone(), vec![proj.x.clone()])?;
    let run = match &record {
        Some(r) => filter.run(&proj.p_init, r).context("filter: running the recursion")?,
        None => FilterRun { times: Vec::new(), states: Vec::new(), masses: Vec::new(), estimates: Vec::new() },
    };
    Ok((run, record, proj, delta))
}

pub fn filter(config: &ExperimentConfig, table: &Path, obs: &Path, out: Option<PathBuf>) -> Result<()> {
    let (run, _, proj, _) = run_filter(config, Some(table), obs)?;
    let out = out.unwrap_or_else(|| config.run.out.clone());
    create_dir(&out)?;
    let mut states = csv_writer(&out.join("states.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=proj.p_init.len()).map(|k| format!("p_{k}")));
    states.write_record(&header)?;
    for (t, p) in run.times.iter().zip(&run.states) {
        states.write_record(std::iter::once(num(*t)).chain(p.iter().map(|&v| num(v))))?;
    }
    states.flush()?;
    let mut estimates = csv_writer(&out.join("estimates.csv"))?;
    estimates.write_record(["t", "estimate", "mass"])?;
    for ((t, e), m) in run.times.iter().zip(&run.estimates).zip(&run.masses) {
        estimates.write_record([num(*t), num(e[0]), num(*m)])?;
    }
    estimates.flush()?;
    println!("{} windows filtered into {}", run.times.len(), out.display());
    Ok(())
}

/// Conditional means of the oracle at the end of every window.
fn oracle_estimates(
    config: &ExperimentConfig,
    galerkin: Option<&(GalerkinSystem, Projections)>,
    y: &[Vec<f64>],
    dt: f64,
    per_window: usize,
) -> Result<Vec<f64>> {
    match config.run.oracle {
        OracleKind::Kalman => {
            let linear = config.model.linear().expect("kalman oracle is only configured for linear models");
            let y0: Vec<f64> = y.iter().map(|v| v[0]).collect();
            let kb = kalman_bucy(linear, &y0, dt, KALMAN_SUBSTEPS).context("oracle: Kalman-Bucy filter")?;
            Ok(kb.iter().step_by(per_window).skip(1).map(|&(m, _)| m).collect())
        }
        OracleKind::Galerkin => {
            let (system, proj) = galerkin.expect("galerkin oracle prepared");
            let states =
                integrate_galerkin_sde(system, y, dt, &proj.p_init, per_window).context("oracle: Galerkin SDE")?;
            states[1..]
                .iter()
                .map(|p| Ok(estimate(&FilterState::new(0.0, p.clone())?, &proj.x, &proj.one, 0.0)?))
                .collect()
        }
    }
}

fn galerkin_oracle(config: &ExperimentConfig) -> Result<Option<(GalerkinSystem, Projections)>> {
    if config.run.oracle != OracleKind::Galerkin {
        return Ok(None);
    }
    let k = config.oracle_k();
    let m = default_nodes_per_axis(&SpatialBasis::new(1, k)).max(config.discretization()?.quadrature_m);
    let system = galerkin_system(&config.model, k, m).context("oracle: assembling the Galerkin system")?;
    let proj = projections(&config.model, system.basis(), m)?;
    Ok(Some((system, proj)))
}

pub fn compare(config: &ExperimentConfig, table: Option<&Path>, obs: &Path, out: Option<PathBuf>) -> Result<()> {
    let oracle = galerkin_oracle(config)?;
    let (run, record, _, delta) = run_filter(config, table, obs)?;
    let out = out.unwrap_or_else(|| config.run.out.clone());
    create_dir(&out)?;
    let mut writer = csv_writer(&out.join("compare.csv"))?;
    writer.write_record(["t", "estimate", "oracle", "error"])?;
    let Some(record) = record.filter(|_| !run.times.is_empty()) else {
        writer.flush()?;
        println!("no complete windows; nothing to compare");
        return Ok(());
    };
    let dobs = record.delta_obs();
    let per = (delta / dobs).round() as usize;
    let y = &record.values()[..run.times.len() * per + 1];
    let reference = oracle_estimates(config, oracle.as_ref(), y, dobs, per)?;
    let chaos: Vec<(f64, f64)> = run.times.iter().zip(&run.estimates).map(|(&t, e)| (t, e[0])).collect();
    let oracle_series: Vec<(f64, f64)> = run.times.iter().copied().zip(reference).collect();
    let summary = compare_on_path(&chaos, &oracle_series)?;
    for ((t, e), (_, o)) in chaos.iter().zip(&oracle_series) {
        writer.write_record([num(*t), num(*e), num(*o), num(e - o)])?;
    }
    writer.flush()?;
    println!("rmse {}", num(summary.rmse));
    Ok(())
}

/// Error terms of the bounds for one sweep point; `None` where the
/// constants they need were not supplied.
struct BudgetTerms {
    chaos: f64,
    filter_density: Option<f64>,
    filter_functional: Option<f64>,
}

fn budget_terms(config: &ExperimentConfig, d: &Discretization, p_init: &[f64]) -> Result<Option<BudgetTerms>> {
    let Some(b) = config.budget else { return Ok(None) };
    let budget = ErrorBudget {
        delta: d.delta,
        max_length: d.big_n,
        max_order: d.n,
        k: d.k,
        r: 1,
        d: 1,
        nu: b.nu.unwrap_or(0.0),
        w: b.w,
        c_rho: b.c_rho.unwrap_or(0.0),
        c: b.c,
        c_nu_t: b.c_nu_t.unwrap_or(0.0),
        c_nu_t_w: b.c_nu_t_w.unwrap_or(0.0),
        c_f: b.c_f.unwrap_or(0.0),
        horizon: d.horizon,
        eps_b: b.eps_b,
        initial_second_moment: p_init.iter().map(|v| v * v).sum(),
    };
    let chaos = chaos_error_bound(&budget)?.total;
    let (filter_density, filter_functional) = match b.nu {
        None => (None, None),
        Some(_) => {
            let fb = filter_error_bound(&budget)?;
            let functional = fb.functional_total.filter(|_| b.c_nu_t_w.is_some() && b.c_f.is_some());
            (Some(fb.density_total), functional)
        }
    };
    Ok(Some(BudgetTerms { chaos, filter_density, filter_functional }))
}

/// Mean-square errors of one sweep point: the estimate against the
/// configured oracle and the density against the same-size Galerkin system
/// integrated at the simulation step.
fn sweep_point(config: &ExperimentConfig, oracle: Option<&(GalerkinSystem, Projections)>) -> Result<(f64, f64)> {
    let d = config.discretization()?;
    let system = galerkin_system(&config.model, d.k, d.quadrature_m).context("sweep: assembling the Galerkin system")?;
    let tb = TemporalBasis::new(d.delta, d.n)?;
    let table = precompute_table(&system, &tb, d.big_n, d.substeps).context("sweep: solving the propagator system")?;
    let proj = projections(&config.model, system.basis(), d.quadrature_m)?;
    let filter = ChaosFilter::new(table, proj.one.clone(), vec![proj.x.clone()])?;
    let model = config.model.filter_model()?;
    let fine = SimulationConfig { horizon: d.horizon, dt_sim: d.dt_sim, dt_obs: d.dt_sim, seed: config.run.seed };
    let (stride, per) = (d.steps_per_sample(), d.samples_per_window());
    let per_path: Vec<(f64, f64)> = (0..config.run.paths)
        .into_par_iter()
        .map(|p| -> Result<(f64, f64)> {
            let path = simulate(&model, &fine, p as u64).with_context(|| format!("sweep: simulating path {p}"))?;
            let times: Vec<f64> = path.times.iter().step_by(stride).copied().collect();
            let values: Vec<Vec<f64>> = path.y.iter().step_by(stride).cloned().collect();
            let record = ObservationRecord::new(d.dt_obs, 1, times, values)?;
            let run = filter.run(&proj.p_init, &record).with_context(|| format!("sweep: filtering path {p}"))?;
            let windows = run.times.len() as f64;
            let reference = oracle_estimates(config, oracle, &path.y, d.dt_sim, per * stride)?;
            let est_mse =
                run.estimates.iter().zip(&reference).map(|(e, o)| (e[0] - o).powi(2)).sum::<f64>() / windows;
            let densities = integrate_galerkin_sde(&system, &path.y, d.dt_sim, &proj.p_init, per * stride)?;
            let dens_mse = run
                .states
                .iter()
                .zip(&densities[1..])
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
                .sum::<f64>()
                / windows;
            Ok((est_mse, dens_mse))
        })
        .collect::<Result<_>>()?;
    let paths = per_path.len() as f64;
    let est = per_path.iter().map(|e| e.0).sum::<f64>() / paths;
    let dens = per_path.iter().map(|e| e.1).sum::<f64>() / paths;
    Ok((est.sqrt(), dens))
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "axis",
    "value",
    "K",
    "N",
    "n",
    "delta",
    "paths",
    "estimate_rmse",
    "density_mse",
    "chaos_bound",
    "filter_density_bound",
    "filter_functional_bound",
];

pub fn sweep(config: &ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    let (axis, values) = config
        .run
        .sweep
        .clone()
        .ok_or_else(|| ConfigError::new("run.sweep_axis", "required by the sweep command"))?;
    let points: Vec<ExperimentConfig> =
        values.iter().map(|&v| config.with_axis(axis, v)).collect::<Result<_, _>>()?;
    let out = out.unwrap_or_else(|| config.run.out.clone());
    let oracle = galerkin_oracle(config)?;
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .zip(&values)
        .map(|(point, &value)| -> Result<Vec<String>> {
            let d = point.discretization()?;
            let (estimate_rmse, density_mse) =
                sweep_point(point, oracle.as_ref()).with_context(|| format!("sweep point {axis}={value}"))?;
            let basis = SpatialBasis::new(1, d.k);
            let p_init = projections(&point.model, &basis, d.quadrature_m)?.p_init;
            let budget = budget_terms(point, &d, &p_init)?;
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            Ok(vec![
                axis.key().to_string(),
                value.to_string(),
                d.k.to_string(),
                d.big_n.to_string(),
                d.n.to_string(),
                d.delta.to_string(),
                point.run.paths.to_string(),
                num(estimate_rmse),
                num(density_mse),
                opt(budget.as_ref().map(|b| b.chaos)),
                opt(budget.as_ref().and_then(|b| b.filter_density)),
                opt(budget.as_ref().and_then(|b| b.filter_functional)),
            ])
        })
        .collect::<Result<_>>()?;
    create_dir(&out)?;
    let mut writer = csv_writer(&out.join("sweep.csv"))?;
    writer.write_record(SWEEP_COLUMNS)?;
    for row in &rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    println!("{} sweep points written to {}", rows.len(), out.join("sweep.csv").display());
    Ok(())
}
