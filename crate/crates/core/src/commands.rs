//! Command implementations shared by the binary and the tests.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{LoadedConfig, ModelKind, ScanConfig};
use crate::disk::{ControlModel, ControlState, DiskModel, DiskParams, DiskState, PotentialSpec};
use crate::error::{Error, Result};
use crate::magnet::{build_ring, potential_grid, scan_critical_points, GridSpec, RingSpec};
use crate::motor::{run_motor_experiment, MotorMode, MotorParams, MotorRun, MotorRunSpec};
use crate::output::{now_rfc3339, write_manifest, NumberFormat, OutputDir};
use crate::stats::{
    detect_flights, ensemble_variance, histogram, increment_correlation, loglog_exponent, mean,
    msd, run_ensemble, second_moment, stat_report, Ensemble, EnsembleSpec, InitialCondition,
    LogLogFit, ReportOptions, SeriesSet,
};
use crate::top::{run_experiment, TopCase, TopExperiment, TopParams, TopRun};

pub const DISK_HEADER: &str = "t,x,v,theta,omega,E";
pub const CONTROL_HEADER: &str = "t,x,v";
pub const TOP_HEADER: &str = "t,x1,x2,v1,v2,xi3x,xi3y,xi3z,pix,piy,piz,J,E";
pub const MOTOR_HEADER: &str = "t,x1,x2,angle,E_total,E_ring,W_injected,W_dissipated";
pub const LANDSCAPE_HEADER: &str = "x,y,Ve";

pub const FIGURES: [&str; 13] = [
    "meanX",
    "meanX2",
    "loglogX2",
    "diffusionX",
    "corX",
    "histX",
    "conaxi",
    "contilt",
    "axi",
    "tilt",
    "motor_theta_nonuniform",
    "motor_theta_isothermal",
    "potential_surface",
];

/// Run `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::Validation("--workers must be positive".into()));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::Io(e.to_string()))?;
    pool.install(f)
}

fn apply_seed(loaded: &mut LoadedConfig, seed: Option<u64>) -> u64 {
    if let Some(s) = seed {
        loaded.config.ensemble.master_seed = s;
    }
    loaded.config.ensemble.master_seed
}

fn disk_rows(model: &DiskModel, times: &[f64], states: &[DiskState]) -> Vec<[f64; 6]> {
    times
        .iter()
        .zip(states)
        .map(|(t, s)| [*t, s.x, s.v, s.theta, s.omega, model.energy(s)])
        .collect()
}

fn top_rows(run: &TopRun) -> Vec<[f64; 13]> {
    run.times
        .iter()
        .zip(&run.states)
        .zip(run.momentum.iter().zip(&run.energy))
        .map(|((t, s), (j, e))| {
            [
                *t, s.x.x, s.x.y, s.v.x, s.v.y, s.xi3.x, s.xi3.y, s.xi3.z, s.pi.x, s.pi.y, s.pi.z,
                *j, *e,
            ]
        })
        .collect()
}

fn motor_rows(run: &MotorRun) -> Vec<[f64; 8]> {
    let l = &run.ledger;
    (0..run.times.len())
        .map(|k| {
            let s = &run.states[k];
            [
                run.times[k],
                s.x.x,
                s.x.y,
                run.angle[k],
                l.total[k],
                l.ring[k],
                l.injected[k],
                l.dissipated[k],
            ]
        })
        .collect()
}

fn rows<const N: usize>(r: &[[f64; N]]) -> impl Iterator<Item = &[f64]> {
    r.iter().map(|row| &row[..])
}

/// `simulate`: trajectories (and optional reports) for the configured model.
pub fn simulate(
    mut loaded: LoadedConfig,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Vec<String>> {
    let started = now_rfc3339();
    let seed = apply_seed(&mut loaded, seed);
    let cfg = &loaded.config;
    let mut out = OutputDir::create(out_dir.unwrap_or(&cfg.output.dir))?;
    let reports = &cfg.output.reports;
    let want = |k: crate::config::ReportKind| reports.contains(&k);
    use crate::config::ReportKind::*;
    match cfg.model {
        ModelKind::Disk => {
            let model = DiskModel::new(cfg.disk.clone().unwrap_or_default())?;
            let ens = run_ensemble(&cfg.ensemble, &model)?;
            if want(Trajectories) {
                for (i, tr) in ens.trajectories.iter().enumerate() {
                    let r = disk_rows(&model, &tr.times, &tr.states);
                    out.write_csv(
                        &format!("trajectory_{i:04}.csv"),
                        DISK_HEADER,
                        rows(&r),
                        NumberFormat::Sci17,
                    )?;
                }
            }
            if want(Stats) {
                write_disk_stats(&mut out, &ens)?;
            }
            if want(Energy) {
                let r = disk_energy_rows(&model, &ens)?;
                out.write_csv(
                    "energy_balance.csv",
                    "t,mean_residual,stderr",
                    rows(&r),
                    NumberFormat::Shortest,
                )?;
            }
        }
        ModelKind::Control => {
            let model = cfg.control.unwrap_or_default();
            let ens = run_ensemble(&cfg.ensemble, &model)?;
            if want(Trajectories) {
                for (i, tr) in ens.trajectories.iter().enumerate() {
                    let r: Vec<[f64; 3]> = tr
                        .times
                        .iter()
                        .zip(&tr.states)
                        .map(|(t, s)| [*t, s.x, s.v])
                        .collect();
                    out.write_csv(
                        &format!("trajectory_{i:04}.csv"),
                        CONTROL_HEADER,
                        rows(&r),
                        NumberFormat::Shortest,
                    )?;
                }
            }
            if want(Stats) {
                let report = stat_report(
                    &ens.series(|s: &ControlState| s.x),
                    &ReportOptions::default(),
                )?;
                out.write_json("stats_x.json", &report)?;
            }
        }
        ModelKind::Top => {
            let t = cfg.top.clone().unwrap_or_default();
            let cases: Vec<TopCase> = match t.case {
                Some(c) => vec![c],
                None => TopCase::ALL.to_vec(),
            };
            let runs = cases
                .par_iter()
                .map(|&c| run_experiment(c, &t.params, &t.run))
                .collect::<Result<Vec<_>>>()?;
            for run in &runs {
                out.write_csv(
                    &format!("top_{}.csv", run.case.name()),
                    TOP_HEADER,
                    rows(&top_rows(run)),
                    NumberFormat::Shortest,
                )?;
            }
        }
        ModelKind::Motor => {
            let m = cfg.motor.clone().unwrap_or_default();
            let n = cfg.ensemble.n_trajectories;
            let runs = (0..n)
                .into_par_iter()
                .map(|i| run_motor_experiment(m.mode, &m.params, &m.run, seed, i))
                .collect::<Result<Vec<_>>>()?;
            for (i, run) in runs.iter().enumerate() {
                out.write_csv(
                    &format!("motor_{i:04}.csv"),
                    MOTOR_HEADER,
                    rows(&motor_rows(run)),
                    NumberFormat::Shortest,
                )?;
            }
            if want(Energy) {
                let eff: Vec<Option<f64>> = runs.iter().map(|r| r.ledger.efficiency).collect();
                out.write_json("efficiency.json", &eff)?;
            }
        }
    }
    write_manifest(&mut out, "simulate", Some(&loaded), seed, started)?;
    Ok(out.files().to_vec())
}

fn disk_energy_rows(model: &DiskModel, ens: &Ensemble<DiskState>) -> Result<Vec<[f64; 3]>> {
    let inj = model.injection_rate();
    let set = ens.aux_series(0);
    let n = ens.trajectories.len() as f64;
    let mut out = Vec::new();
    for (k, t) in set.times.iter().enumerate() {
        let res: Vec<f64> = ens
            .trajectories
            .iter()
            .map(|tr| {
                model.energy(&tr.states[k]) - model.energy(&tr.states[0]) + tr.aux[k][0] - inj * t
            })
            .collect();
        let (m, se) = crate::stats::mean_and_stderr(&res);
        out.push([*t, m, if n > 1.0 { se } else { 0.0 }]);
    }
    Ok(out)
}

fn write_disk_stats(out: &mut OutputDir, ens: &Ensemble<DiskState>) -> Result<()> {
    let opts = ReportOptions::default();
    out.write_json(
        "stats_x.json",
        &stat_report(&ens.series(|s: &DiskState| s.x), &opts)?,
    )?;
    out.write_json(
        "stats_xplustheta.json",
        &stat_report(&ens.series(|s: &DiskState| s.x + s.theta), &opts)?,
    )?;
    Ok(())
}

fn ensemble_model(loaded: &LoadedConfig) -> Result<()> {
    match loaded.config.model {
        ModelKind::Disk | ModelKind::Control => Ok(()),
        _ => Err(Error::Validation(
            "ensemble statistics need model = \"disk\" or \"control\"".into(),
        )),
    }
}

fn series_of(loaded: &LoadedConfig) -> Result<SeriesSet> {
    let cfg = &loaded.config;
    Ok(match cfg.model {
        ModelKind::Disk => run_ensemble(
            &cfg.ensemble,
            &DiskModel::new(cfg.disk.clone().unwrap_or_default())?,
        )?
        .series(|s| s.x),
        _ => run_ensemble(&cfg.ensemble, &cfg.control.unwrap_or_default())?
            .series(|s: &ControlState| s.x),
    })
}

/// `ensemble`: per-time ensemble summary of `x`.
pub fn ensemble(
    mut loaded: LoadedConfig,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Vec<String>> {
    let started = now_rfc3339();
    ensemble_model(&loaded)?;
    let seed = apply_seed(&mut loaded, seed);
    let mut out = OutputDir::create(out_dir.unwrap_or(&loaded.config.output.dir))?;
    let set = series_of(&loaded)?;
    let (m, v, q) = (
        mean(&set)?,
        msd(&set).or_else(|_| ensemble_variance(&set))?,
        second_moment(&set)?,
    );
    let r: Vec<[f64; 4]> = (0..set.times.len())
        .map(|k| [set.times[k], m[k], v[k], q[k]])
        .collect();
    out.write_csv(
        "ensemble_x.csv",
        "t,mean,msd,second_moment",
        rows(&r),
        NumberFormat::Shortest,
    )?;
    write_manifest(&mut out, "ensemble", Some(&loaded), seed, started)?;
    Ok(out.files().to_vec())
}

/// `stats`: full statistics report on `x`.
pub fn stats(
    mut loaded: LoadedConfig,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<Vec<String>> {
    let started = now_rfc3339();
    ensemble_model(&loaded)?;
    let seed = apply_seed(&mut loaded, seed);
    let mut out = OutputDir::create(out_dir.unwrap_or(&loaded.config.output.dir))?;
    let set = series_of(&loaded)?;
    let n = set.times.len();
    let lags: Vec<usize> = (1..=8)
        .map(|k| k * (n / 4).max(8) / 8)
        .filter(|&s| n / 2 + 2 * s < n)
        .collect();
    let opts = ReportOptions {
        corr_lags: lags,
        ..Default::default()
    };
    out.write_json("stats_x.json", &stat_report(&set, &opts)?)?;
    write_manifest(&mut out, "stats", Some(&loaded), seed, started)?;
    Ok(out.files().to_vec())
}

/// `scan-potential`: landscape grid and classified critical points.
pub fn scan_potential(loaded: Option<LoadedConfig>, out_dir: Option<&Path>) -> Result<Vec<String>> {
    let started = now_rfc3339();
    let scan = loaded
        .as_ref()
        .and_then(|l| l.config.scan.clone())
        .unwrap_or_default();
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| loaded.as_ref().map(|l| l.config.output.dir.clone()));
    let mut out = OutputDir::create(&dir.unwrap_or_else(|| "out".into()))?;
    let (csv, points) = landscape(&scan)?;
    out.write("landscape.csv", &csv)?;
    out.write_json("critical_points.json", &points)?;
    write_manifest(&mut out, "scan-potential", loaded.as_ref(), 0, started)?;
    Ok(out.files().to_vec())
}

fn landscape(scan: &ScanConfig) -> Result<(String, Vec<crate::magnet::CriticalPoint>)> {
    let dipoles = build_ring(&scan.ring);
    let grid = potential_grid(&dipoles, scan.ball_radius, &scan.grid, scan.kappa2)?;
    let (xs, ys) = (scan.grid.xs(), scan.grid.ys());
    let mut r = Vec::with_capacity(xs.len() * ys.len());
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            r.push([*x, *y, grid[j][i]]);
        }
    }
    let csv = crate::output::render_csv(LANDSCAPE_HEADER, rows(&r), NumberFormat::Shortest);
    let points = scan_critical_points(&dipoles, scan.ball_radius, &scan.grid, scan.kappa2)?;
    Ok((csv, points))
}

// ---------------------------------------------------------------------------
// Figures

/// Canonical disk ensemble behind the sliding-disk figures.
#[derive(Debug, Clone, Serialize)]
pub struct DiskFigureSetup {
    pub params: DiskParams,
    pub spec: EnsembleSpec,
}

pub fn disk_figure_setup(seed: u64, horizon: f64) -> DiskFigureSetup {
    DiskFigureSetup {
        params: DiskParams::default(),
        spec: EnsembleSpec {
            n_trajectories: 256,
            horizon,
            h: 0.01,
            record_stride: 100,
            master_seed: seed,
            initial_condition: InitialCondition::Rest,
            replicas_per_initial: 1,
        },
    }
}

const DISK_CASES: [&str; 4] = ["symmetric", "asymmetric", "flat", "control"];

fn disk_case_series(setup: &DiskFigureSetup) -> Result<Vec<SeriesSet>> {
    DISK_CASES
        .iter()
        .map(|case| {
            let potential = match *case {
                "symmetric" => PotentialSpec::Symmetric,
                "asymmetric" => PotentialSpec::Asymmetric,
                _ => PotentialSpec::Flat,
            };
            if *case == "control" {
                let m = ControlModel {
                    c: setup.params.c,
                    alpha: setup.params.alpha,
                };
                Ok(run_ensemble(&setup.spec, &m)?.series(|s: &ControlState| s.x))
            } else {
                let m = DiskModel::new(DiskParams {
                    potential,
                    ..setup.params.clone()
                })?;
                Ok(run_ensemble(&setup.spec, &m)?.series(|s: &DiskState| s.x))
            }
        })
        .collect()
}

fn columns_csv(first: &str, xs: &[f64], cols: &[Vec<f64>]) -> String {
    let header = std::iter::once(first)
        .chain(DISK_CASES.iter().copied())
        .collect::<Vec<_>>()
        .join(",");
    let r: Vec<Vec<f64>> = (0..xs.len())
        .map(|k| {
            std::iter::once(xs[k])
                .chain(cols.iter().map(|c| c[k]))
                .collect()
        })
        .collect();
    crate::output::render_csv(&header, r.iter().map(|v| &v[..]), NumberFormat::Shortest)
}

#[derive(Debug, Serialize)]
struct CaseFit {
    case: &'static str,
    fit: Option<LogLogFit>,
}

fn fits(times: &[f64], cols: &[Vec<f64>]) -> Vec<CaseFit> {
    DISK_CASES
        .iter()
        .zip(cols)
        .map(|(c, v)| CaseFit {
            case: c,
            fit: loglog_exponent(times, v, None).ok(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct TopSummary {
    case: TopCase,
    phi: f64,
    theta: f64,
    friction: f64,
    h: f64,
    n_steps: usize,
    max_momentum_drift: f64,
    terminal_momentum: f64,
    max_abs_momentum: f64,
}

#[derive(Debug, Serialize)]
struct MotorPanel {
    label: String,
    noise: f64,
    sample: usize,
    net_angle: f64,
    largest_flight: f64,
    efficiency: Option<f64>,
}

/// Largest net angular excursion over detected flights.
pub fn largest_flight(times: &[f64], angle: &[f64]) -> Result<f64> {
    let n = angle.len();
    if n < 3 {
        return Ok(0.0);
    }
    let rms = ((1..n)
        .map(|k| ((angle[k] - angle[k - 1]) / (times[k] - times[k - 1])).powi(2))
        .sum::<f64>()
        / (n - 1) as f64)
        .sqrt();
    let flights = detect_flights(times, angle, crate::stats::DEFAULT_FLIGHT_WINDOW, 0.5 * rms)?;
    Ok(flights
        .iter()
        .map(|f| (f.mean_velocity * f.duration).abs())
        .fold(0.0, f64::max))
}

/// Panels of the motor angle figures: (noise, sample).
pub fn motor_panels(mode: MotorMode) -> Vec<(f64, usize)> {
    match mode {
        MotorMode::NonUniform => vec![(2e-4, 0), (2e-4, 1), (2.5e-4, 0)],
        MotorMode::Isothermal => vec![(1e-3, 0), (1e-3, 1), (1e-3, 2), (7.5e-4, 0)],
    }
}

pub fn motor_params_for(mode: MotorMode, noise: f64) -> MotorParams {
    match mode {
        MotorMode::NonUniform => MotorParams {
            ring_noise: noise,
            ..MotorParams::default()
        },
        MotorMode::Isothermal => MotorParams::isothermal(noise),
    }
}

/// Tilt cases of the landscape figure: (phi, theta).
pub const SURFACE_CASES: [(f64, f64); 3] = [
    (0.0, 0.0),
    (std::f64::consts::PI / 16.0, 0.0),
    (std::f64::consts::PI / 16.0, std::f64::consts::PI),
];

/// `reproduce-figure`: writes `figure_<name>.csv` (or lettered panels) and `figure_<name>.json`.
pub fn reproduce_figure(name: &str, seed: u64, out_dir: &Path) -> Result<Vec<String>> {
    if !FIGURES.contains(&name) {
        return Err(Error::UnknownFigure(name.to_string()));
    }
    let started = now_rfc3339();
    let mut out = OutputDir::create(out_dir)?;
    let csv_name = format!("figure_{name}.csv");
    let json_name = format!("figure_{name}.json");
    match name {
        "meanX" | "meanX2" | "loglogX2" | "diffusionX" | "corX" | "histX" => {
            let horizon = if name == "histX" { 50_000.0 } else { 2000.0 };
            let mut setup = disk_figure_setup(seed, horizon);
            if name == "histX" {
                setup.spec.n_trajectories = 128;
                setup.spec.record_stride = 10_000;
            }
            let sets = disk_case_series(&setup)?;
            let times = sets[0].times.clone();
            match name {
                "meanX" => {
                    let cols = sets.iter().map(mean).collect::<Result<Vec<_>>>()?;
                    out.write(&csv_name, &columns_csv("t", &times, &cols))?;
                    let finals: Vec<f64> = cols.iter().map(|c| *c.last().unwrap_or(&0.0)).collect();
                    out.write_json(&json_name, &serde_json::json!({ "setup": setup, "cases": DISK_CASES, "final_mean": finals }))?;
                }
                "meanX2" | "loglogX2" => {
                    let cols = sets.iter().map(second_moment).collect::<Result<Vec<_>>>()?;
                    out.write(&csv_name, &columns_csv("t", &times, &cols))?;
                    out.write_json(
                        &json_name,
                        &serde_json::json!({ "setup": setup, "exponents": fits(&times, &cols) }),
                    )?;
                }
                "diffusionX" => {
                    let cols = sets
                        .iter()
                        .map(ensemble_variance)
                        .collect::<Result<Vec<_>>>()?;
                    out.write(&csv_name, &columns_csv("t", &times, &cols))?;
                    out.write_json(
                        &json_name,
                        &serde_json::json!({ "setup": setup, "exponents": fits(&times, &cols) }),
                    )?;
                }
                "corX" => {
                    let start = times.len() / 2;
                    let lags: Vec<usize> = (1..=(times.len() - 1 - start) / 2).collect();
                    let cols = sets
                        .iter()
                        .map(|s| {
                            lags.iter()
                                .map(|&l| increment_correlation(s, start, l).unwrap_or(f64::NAN))
                                .collect()
                        })
                        .collect::<Vec<Vec<f64>>>();
                    let dt = times[1] - times[0];
                    let lag_t: Vec<f64> = lags.iter().map(|&l| l as f64 * dt).collect();
                    out.write(&csv_name, &columns_csv("s", &lag_t, &cols))?;
                    out.write_json(
                        &json_name,
                        &serde_json::json!({ "setup": setup, "t": times[start] }),
                    )?;
                }
                _ => {
                    let finals: Vec<Vec<f64>> = sets
                        .iter()
                        .map(|s| s.values.iter().map(|v| *v.last().unwrap()).collect())
                        .collect();
                    let lo = finals
                        .iter()
                        .flatten()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    let hi = finals
                        .iter()
                        .flatten()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max);
                    let hi = if hi > lo { hi } else { lo + 1.0 };
                    let hists = finals
                        .iter()
                        .map(|f| histogram(f, lo, hi, 40))
                        .collect::<Result<Vec<_>>>()?;
                    let centers = hists[0].centers();
                    let cols: Vec<Vec<f64>> = hists
                        .iter()
                        .map(|h| h.counts.iter().map(|&c| c as f64).collect())
                        .collect();
                    out.write(&csv_name, &columns_csv("x", &centers, &cols))?;
                    let iqr: Vec<f64> = finals
                        .iter()
                        .map(|f| crate::stats::interquartile_range(f))
                        .collect();
                    out.write_json(&json_name, &serde_json::json!({ "setup": setup, "t": times.last(), "interquartile_range": iqr }))?;
                }
            }
        }
        "conaxi" | "contilt" | "axi" | "tilt" => {
            let case = TopCase::ALL
                .into_iter()
                .find(|c| c.name() == name)
                .expect("listed case");
            let (params, exp) = (TopParams::default(), TopExperiment::default());
            let run = run_experiment(case, &params, &exp)?;
            let r: Vec<[f64; 5]> = (0..run.times.len())
                .map(|k| {
                    [
                        run.times[k],
                        run.momentum[k],
                        run.energy[k],
                        run.states[k].x.x,
                        run.states[k].x.y,
                    ]
                })
                .collect();
            out.write_csv(&csv_name, "t,J,E,x1,x2", rows(&r), NumberFormat::Shortest)?;
            let summary = TopSummary {
                case,
                phi: run.phi,
                theta: run.theta,
                friction: run.friction,
                h: exp.h,
                n_steps: exp.n_steps,
                max_momentum_drift: run.momentum_drift(),
                terminal_momentum: *run.momentum.last().unwrap_or(&0.0),
                max_abs_momentum: run.momentum.iter().fold(0.0, |a, j| a.max(j.abs())),
            };
            out.write_json(&json_name, &summary)?;
        }
        "motor_theta_nonuniform" | "motor_theta_isothermal" => {
            let mode = if name.ends_with("isothermal") {
                MotorMode::Isothermal
            } else {
                MotorMode::NonUniform
            };
            let spec = MotorRunSpec::default();
            let panels = motor_panels(mode);
            let runs = panels
                .par_iter()
                .map(|&(noise, sample)| {
                    run_motor_experiment(mode, &motor_params_for(mode, noise), &spec, seed, sample)
                })
                .collect::<Result<Vec<_>>>()?;
            let letters = ['a', 'b', 'c', 'd'];
            let header = std::iter::once("t".to_string())
                .chain(letters[..runs.len()].iter().map(|l| format!("angle_{l}")))
                .collect::<Vec<_>>()
                .join(",");
            let r: Vec<Vec<f64>> = (0..runs[0].times.len())
                .map(|k| {
                    std::iter::once(runs[0].times[k])
                        .chain(runs.iter().map(|run| run.angle[k]))
                        .collect()
                })
                .collect();
            out.write(
                &csv_name,
                &crate::output::render_csv(
                    &header,
                    r.iter().map(|v| &v[..]),
                    NumberFormat::Shortest,
                ),
            )?;
            let summary = panels
                .iter()
                .zip(&runs)
                .enumerate()
                .map(|(i, (&(noise, sample), run))| {
                    Ok(MotorPanel {
                        label: letters[i].to_string(),
                        noise,
                        sample,
                        net_angle: run.angle.last().unwrap_or(&0.0) - run.angle[0],
                        largest_flight: largest_flight(&run.times, &run.angle)?,
                        efficiency: run.ledger.efficiency,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            out.write_json(
                &json_name,
                &serde_json::json!({ "mode": mode, "run": spec, "panels": summary }),
            )?;
        }
        _ => {
            let mut summary = Vec::new();
            for (k, &(phi, theta)) in SURFACE_CASES.iter().enumerate() {
                let scan = ScanConfig {
                    ring: RingSpec {
                        phi,
                        theta,
                        ..ScanConfig::default().ring
                    },
                    grid: GridSpec::square(6.0, 121),
                    ..ScanConfig::default()
                };
                let (csv, points) = landscape(&scan)?;
                let letter = ['a', 'b', 'c'][k];
                out.write(&format!("figure_{name}_{letter}.csv"), &csv)?;
                summary.push(serde_json::json!({ "panel": letter, "phi": phi, "theta": theta, "critical_points": points }));
            }
            out.write_json(&json_name, &summary)?;
        }
    }
    write_manifest(
        &mut out,
        &format!("reproduce-figure {name}"),
        None,
        seed,
        started,
    )?;
    Ok(out.files().to_vec())
}

/// Rows of the `validate` command: canonical JSON of the resolved config.
pub fn validate(loaded: &LoadedConfig) -> Result<String> {
    crate::config::canonical_json(&loaded.config)
}
