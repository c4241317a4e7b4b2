//! Execute a [`RunConfig`] and write its artifacts.
//!
//! Outputs go to `<output_dir>.partial` and the directory is renamed into
//! place only after the manifest is written, so a completed run is never
//! overwritten or left half-written. Failures leave an `error.json` record
//! in the partial directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use crate::classical::{
    evolve_ensemble, momentum_histogram, poincare_section, quasilinear_d0, Axis, EnergySeries, EvolveOptions,
    MomentumHistogram,
};
use crate::config::{Mode, ModeSettings, RunConfig};
use crate::entanglement::entanglement_series;
use crate::error::{Error, Result};
use crate::lyapunov::{
    analytic_lyapunov_estimate, jacobian, lyapunov_jacobian_product, lyapunov_tangent, LyapunovOptions,
};
use crate::params::ModelParams;
use crate::phase_space::{rng_from_seed, uniform_angle_ensemble, ScaledState};
use crate::quantum::{evolve_with, initial_state, momentum_marginal, MomentumGrid, QuantumState};
use crate::transport::{fit_beta, sweep_phase_diagram, BETA_DIFFUSIVE, BETA_LOC, BETA_REPORT_RANGE};

pub const THREADS_ENV: &str = "MLKR_THREADS";
pub const MANIFEST: &str = "manifest.json";
pub const ERROR_RECORD: &str = "error.json";

/// Where the config came from, recorded in the manifest.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Provenance {
    pub config_file: Option<PathBuf>,
    /// Keys set or replaced on the command line.
    pub overrides: Vec<String>,
}

/// One post-run consistency check.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub ok: bool,
}

impl InvariantCheck {
    fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        InvariantCheck {
            name,
            value,
            limit,
            ok: value <= limit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
    pub invariants: Vec<InvariantCheck>,
    pub wall_time_s: f64,
}

struct Outcome {
    files: Vec<String>,
    summary: Value,
    invariants: Vec<InvariantCheck>,
}

/// Number of workers from `MLKR_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config {
                path: THREADS_ENV.into(),
                msg: format!("expected a positive integer, got `{s}`"),
            }),
        },
    }
}

fn partial_path(dir: &Path) -> PathBuf {
    let mut name: OsString = dir.file_name().map(OsString::from).unwrap_or_else(|| "run".into());
    name.push(".partial");
    dir.with_file_name(name)
}

/// Run `cfg` on a pool capped by `MLKR_THREADS` and move the results into
/// `cfg.output_dir`.
pub fn run(cfg: &RunConfig, provenance: &Provenance) -> Result<RunReport> {
    let threads = thread_cap()?;
    let final_dir = cfg.output_dir.clone();
    if final_dir.exists() {
        return Err(Error::OutputExists(final_dir));
    }
    let partial = partial_path(&final_dir);
    if partial.exists() {
        warn!("removing stale partial output {}", partial.display());
        fs::remove_dir_all(&partial).map_err(|e| Error::io(format!("removing {}", partial.display()), e))?;
    }
    fs::create_dir_all(&partial).map_err(|e| Error::io(format!("creating {}", partial.display()), e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config {
        path: THREADS_ENV.into(),
        msg: e.to_string(),
    })?;

    let started = SystemTime::now();
    let clock = Instant::now();
    info!("running {} into {}", cfg.mode.name(), partial.display());
    let outcome = pool.install(|| execute(cfg, &partial));
    let wall_time_s = clock.elapsed().as_secs_f64();

    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            let record = error_record(&e);
            if let Err(w) = write_json(&partial.join(ERROR_RECORD), &record) {
                warn!("could not write error record: {w}");
            }
            return Err(e);
        }
    };

    let manifest = json!({
        "mode": cfg.mode.name(),
        "config": cfg.to_json(),
        "config_file": provenance.config_file,
        "overrides": provenance.overrides,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix_s": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_time_s": wall_time_s,
        "threads": pool.current_num_threads(),
        "outputs": outcome.files,
        "summary": outcome.summary,
        "invariants": outcome.invariants,
        "invariants_ok": outcome.invariants.iter().all(|c| c.ok),
    });
    write_json(&partial.join(MANIFEST), &manifest)?;
    if final_dir.exists() {
        return Err(Error::OutputExists(final_dir));
    }
    fs::rename(&partial, &final_dir).map_err(|e| Error::io(format!("renaming {}", partial.display()), e))?;
    for c in outcome.invariants.iter().filter(|c| !c.ok) {
        warn!("invariant {} = {:e} exceeds {:e}", c.name, c.value, c.limit);
    }
    Ok(RunReport {
        output_dir: final_dir,
        files: outcome.files,
        summary: outcome.summary,
        invariants: outcome.invariants,
        wall_time_s,
    })
}

/// Machine-readable description of a failure.
pub fn error_record(e: &Error) -> Value {
    let mut v = json!({"status": "error", "kind": e.kind(), "message": e.to_string()});
    match e {
        Error::Config { path, .. } => v["field"] = json!(path),
        Error::InvalidParam { field, .. } => v["field"] = json!(field),
        Error::UnknownKeys(keys) => v["keys"] = json!(keys),
        _ => {}
    }
    v
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Full round-trip precision: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(dir: &Path, name: &str, header: &str, body: &str, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    let ctx = || format!("writing {}", path.display());
    let file = fs::File::create(&path).map_err(|e| Error::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    w.write_all(header.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.write_all(body.as_bytes()))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(ctx(), e))?;
    files.push(name.to_string());
    Ok(())
}

fn energy_csv(series: &EnergySeries) -> String {
    let mut s = String::new();
    for (t, e) in series.times.iter().zip(&series.values) {
        let _ = writeln!(s, "{t},{}", num(*e));
    }
    s
}

fn histogram_csv(h: &MomentumHistogram) -> String {
    let mut s = String::new();
    for (w, d) in h.bin_edges.windows(2).zip(&h.density) {
        let _ = writeln!(s, "{},{},{}", num(w[0]), num(w[1]), num(*d));
    }
    s
}

fn state_csv(state: &QuantumState) -> String {
    let MomentumGrid { n1, n2 } = state.grid;
    let (h1, h2) = ((n1 / 2) as i64, (n2 / 2) as i64);
    let mut s = String::new();
    for m1 in -h1..h1 {
        for m2 in -h2..h2 {
            let a = state.amp(m1, m2);
            let _ = writeln!(s, "{m1},{m2},{},{}", num(a.re), num(a.im));
        }
    }
    s
}

fn params_of(cfg: &RunConfig) -> ModelParams {
    cfg.params.expect("parameters are present outside sweep mode")
}

fn execute(cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    let mut files = Vec::new();
    let mut invariants = Vec::new();
    let summary = match &cfg.settings {
        ModeSettings::Classical {
            ensemble,
            bins,
            seed,
            record_every,
        } => {
            let params = params_of(cfg);
            let ens = uniform_angle_ensemble(*ensemble, *seed)?;
            let (series, last) = evolve_ensemble(&ens, &params, EvolveOptions::new(cfg.n_kicks, *record_every))?;
            write_csv(dir, "energy.csv", "t,E_mean", &energy_csv(&series), &mut files)?;
            let mut integral_err: f64 = 0.0;
            for (axis, name) in [(Axis::First, "histogram_p1.csv"), (Axis::Second, "histogram_p2.csv")] {
                let h = momentum_histogram(&last, axis, *bins)?;
                integral_err = integral_err.max((h.integral() - 1.0).abs());
                write_csv(dir, name, "p_lo,p_hi,density", &histogram_csv(&h), &mut files)?;
            }
            let off_circle = last
                .members
                .iter()
                .filter(|s| {
                    !(0.0..std::f64::consts::TAU).contains(&s.x1) || !(0.0..std::f64::consts::TAU).contains(&s.x2)
                })
                .count();
            invariants.push(InvariantCheck::at_most("angles_outside_circle", off_circle as f64, 0.0));
            invariants.push(InvariantCheck::at_most("histogram_integral_error", integral_err, 1e-9));
            json!({
                "diffusion_slope": series.diffusion_slope().ok(),
                "quasilinear_d0": quasilinear_d0(&params),
                "final_mean_energy": series.values.last(),
                "Ks": params.ks(),
            })
        }
        ModeSettings::Poincare { trajectories, seed } => {
            let params = params_of(cfg);
            let ens = uniform_angle_ensemble(*trajectories, *seed)?;
            let section = poincare_section(&ens, &params, cfg.n_kicks)?;
            let mut body = String::new();
            for p in &section.points {
                let _ = writeln!(body, "{},{},{},{}", p.traj_id, p.t, num(p.x1), num(p.p1));
            }
            write_csv(dir, "section.csv", "traj_id,t,x1,p1", &body, &mut files)?;
            let off = section
                .points
                .iter()
                .filter(|p| !(0.0..std::f64::consts::TAU).contains(&p.x1))
                .count();
            invariants.push(InvariantCheck::at_most("angles_outside_circle", off as f64, 0.0));
            json!({"points": section.points.len(), "Ks": params.ks()})
        }
        ModeSettings::Lyapunov {
            samples,
            renorm_every,
            seed,
            ks_values,
        } => {
            let base = params_of(cfg);
            let points: Vec<ModelParams> = match ks_values {
                None => vec![base],
                Some(ks) => ks
                    .iter()
                    .map(|&k| {
                        ModelParams::new(
                            k / base.k_p(),
                            base.k_p(),
                            base.alpha1(),
                            base.alpha2(),
                            base.period(),
                            base.hbar(),
                        )
                    })
                    .collect::<Result<_>>()?,
            };
            let mut opts = LyapunovOptions::new(cfg.n_kicks, *samples).seed(*seed);
            opts.renorm_every = *renorm_every;
            let mut body = String::new();
            let mut det_err: f64 = 0.0;
            let mut rows = Vec::new();
            for p in &points {
                let tangent = lyapunov_tangent(p, opts)?;
                let jprod = lyapunov_jacobian_product(p, opts)?;
                let analytic = analytic_lyapunov_estimate(p).unwrap_or(f64::NAN);
                let _ = writeln!(
                    body,
                    "{},{},{},{},{}",
                    num(p.ks()),
                    num(tangent.mean),
                    num(jprod.mean),
                    num(analytic),
                    num(tangent.stderr)
                );
                det_err = det_err.max(max_det_error(p, *seed));
                rows.push(json!({"Ks": p.ks(), "lambda_map": tangent.mean, "lambda_jprod": jprod.mean}));
            }
            write_csv(
                dir,
                "lyapunov.csv",
                "Ks,lambda_map,lambda_jprod,lambda_analytic,stderr",
                &body,
                &mut files,
            )?;
            invariants.push(InvariantCheck::at_most(
                "max_abs_det_jacobian_minus_one",
                det_err,
                1e-10,
            ));
            json!({"rows": rows})
        }
        ModeSettings::Quantum {
            grid,
            record_every,
            edge_limit,
            snapshot,
        } => {
            let params = params_of(cfg);
            let mut series = EnergySeries::default();
            let mut norm_drift: f64 = 0.0;
            let mut max_edge: f64 = 0.0;
            let last = evolve_with(
                &initial_state(*grid),
                &params,
                cfg.n_kicks,
                *record_every,
                *edge_limit,
                |t, s| {
                    series.push(t, s.mean_energy());
                    norm_drift = norm_drift.max((s.norm_sqr() - 1.0).abs());
                    max_edge = max_edge.max(s.edge_mass());
                    Ok(())
                },
            )?;
            write_csv(dir, "energy.csv", "t,E_mean", &energy_csv(&series), &mut files)?;
            for (axis, name) in [(Axis::First, "marginal_p1.csv"), (Axis::Second, "marginal_p2.csv")] {
                let h = momentum_marginal(&last, axis);
                write_csv(dir, name, "p_lo,p_hi,density", &histogram_csv(&h), &mut files)?;
            }
            if *snapshot {
                write_csv(dir, "state.csv", "m1,m2,re,im", &state_csv(&last), &mut files)?;
            }
            invariants.push(InvariantCheck::at_most("norm_drift", norm_drift, 1e-9));
            invariants.push(InvariantCheck::at_most("edge_mass", max_edge, *edge_limit));
            let fit = match fit_beta(&series, None) {
                Ok(f) => json!({
                    "beta": f.beta,
                    "raw_beta": f.raw_beta,
                    "r_squared": f.r_squared,
                    "window": [f.window.t_min, f.window.t_max],
                    "out_of_range": f.out_of_range,
                    "regime": crate::transport::classify_regime(f.beta, &params).to_string(),
                }),
                Err(e) => json!({"error": e.to_string()}),
            };
            json!({"beta_fit": fit, "final_mean_energy": series.values.last(), "Ks": params.ks()})
        }
        ModeSettings::Sweep(sweep) => {
            let diagram = sweep_phase_diagram(sweep)?;
            let mut body = String::new();
            for c in &diagram.cells {
                let beta = c.fit.map_or(f64::NAN, |f| f.beta);
                let regime = c.regime.map(|r| r.to_string()).unwrap_or_default();
                let _ = writeln!(
                    body,
                    "{},{},{},{},{}",
                    num(c.k),
                    num(c.k_p),
                    num(beta),
                    regime,
                    c.valid()
                );
            }
            write_csv(dir, "phase_diagram.csv", "K,k_p,beta,regime,valid", &body, &mut files)?;
            let sidecar = json!({
                "sweep": sweep,
                "thresholds": {
                    "beta_loc": BETA_LOC,
                    "beta_diffusive": BETA_DIFFUSIVE,
                    "ks_chaos": 1.0,
                    "beta_report_range": [BETA_REPORT_RANGE.0, BETA_REPORT_RANGE.1],
                },
                "version": env!("CARGO_PKG_VERSION"),
                "cells": diagram.cells,
            });
            write_json(&dir.join("phase_diagram.json"), &sidecar)?;
            files.push("phase_diagram.json".into());
            let valid = diagram.cells.iter().filter(|c| c.valid()).count();
            json!({"cells": diagram.cells.len(), "valid_cells": valid})
        }
        ModeSettings::Entanglement {
            grid,
            record_every,
            edge_limit,
        } => {
            let params = params_of(cfg);
            let series = entanglement_series(&params, *grid, cfg.n_kicks, *record_every, *edge_limit)?;
            let mut body = String::new();
            for i in 0..series.len() {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{}",
                    series.times[i],
                    num(series.entropy[i]),
                    num(series.entropy_rmt[i]),
                    num(series.n1_eff[i]),
                    num(series.n2_eff[i])
                );
            }
            write_csv(dir, "entanglement.csv", "t,S,S_rmt,N1_eff,N2_eff", &body, &mut files)?;
            let s_max = (grid.n1.min(grid.n2) as f64).ln();
            let excess = series
                .entropy
                .iter()
                .map(|&s| (-s).max(s - s_max).max(0.0))
                .fold(0.0, f64::max);
            invariants.push(InvariantCheck::at_most("entropy_bound_excess", excess, 1e-9));
            json!({"final_entropy": series.entropy.last(), "final_entropy_rmt": series.entropy_rmt.last()})
        }
    };
    debug_assert!(cfg.mode != Mode::Sweep || cfg.params.is_none());
    Ok(Outcome {
        files,
        summary,
        invariants,
    })
}

/// Largest |det J − 1| over 100 random phase points.
fn max_det_error(params: &ModelParams, seed: u64) -> f64 {
    use rand::RngExt;
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    (0..100)
        .map(|_| {
            let mut u = || rng.random::<f64>();
            let s = ScaledState::new(
                std::f64::consts::TAU * u(),
                std::f64::consts::TAU * u(),
                20.0 * (u() - 0.5),
                20.0 * (u() - 0.5),
            );
            (jacobian(&s, params).det() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}
