//! Experiment orchestration: replicated simulations of the r-indexed queue
//! sequence, collapse metrics, steady-state goodness of fit, and fluid
//! overlap comparisons, with CSV/JSON reporting.
//!
//! Replications are independent (disjoint RNG substreams keyed by
//! `(seed, r index, replication, role)`) and run across a worker pool when
//! the `parallel` feature is enabled; results are aggregated in replication
//! order, so reports are identical regardless of scheduling.

mod config;
mod io;

pub use config::{ExperimentConfig, FamilyConfig, InitialConfig, Suite};
pub use io::{
    decode_sim_path, encode_sim_path, read_sim_path_binary, write_csv, write_sim_path_binary,
    write_sim_path_csv,
};

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dist::{DistError, HeavyTrafficFamily, ServiceDistribution};
use crate::fluid::{self, FluidError, FluidOptions};
use crate::measure::{
    lift, metric_from_profiles, FiniteMeasure, MeasureError, MeasureProfile, TestFunctionFamily,
};
use crate::rbm::{self, RbmError, RbmParams};
use crate::sim::{run, scaled_view, RunOptions, ScaleMode, SimError, SimPath};
use crate::stats::{self, StatsError};
use crate::streams::{substream, StreamRole};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Rbm(#[from] RbmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("too many failed replications for r = {r}: {failed} of {total}")]
    TooManyFailures { r: f64, failed: usize, total: usize },
}

/// Map `f` over `0..n` on the rayon pool (`workers = 0` uses all cores,
/// `workers = 1` stays sequential). Results come back in index order.
#[cfg(feature = "parallel")]
pub fn map_replications<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    if workers == 1 {
        return map_replications_seq(n, f);
    }
    let job = || (0..n).into_par_iter().map(&f).collect();
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
            .install(job)
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_replications<T, F>(n: usize, _workers: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    map_replications_seq(n, f)
}

/// Sequential fallback, always available (benchmarks compare it against the
/// pooled path).
pub fn map_replications_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicationOutcome {
    pub replication: usize,
    /// `None` marks a failed replication (simulation abort).
    pub sup_d: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollapseRSummary {
    pub r: f64,
    pub outcomes: Vec<ReplicationOutcome>,
    pub failures: usize,
    pub mean_sup_d: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Per-r collapse metrics with bootstrap intervals and the trend verdict.
#[derive(Clone, Debug, Serialize)]
pub struct CollapseReport {
    pub grid_points: usize,
    pub burn_in_time: f64,
    pub per_r: Vec<CollapseRSummary>,
    /// Means strictly decreasing from the smallest to the largest r with
    /// nonoverlapping 95% bootstrap intervals; `None` with fewer than two
    /// r values.
    pub monotone_decreasing: Option<bool>,
}

impl CollapseReport {
    pub fn passed(&self) -> bool {
        self.monotone_decreasing.unwrap_or(true)
    }
}

fn base_excess_profile(
    tf: &TestFunctionFamily,
    nu: &ServiceDistribution,
) -> Result<(MeasureProfile, f64), HarnessError> {
    let em = nu.excess_mean();
    // lift(em) has scale 1: the unit-mass excess measure.
    let unit = lift(em, nu)?;
    let prof = tf.profile(&unit, tf.ramps_needed(&unit))?;
    Ok((prof, em))
}

/// Largest metric distance (over the post-burn-in grid) between the
/// diffusion-scaled state and the lifted diffusion-scaled workload.
fn collapse_sup_for_view(
    view: &SimPath,
    grid: &[f64],
    burn_in_time: f64,
    tf: &TestFunctionFamily,
    base_profile: &MeasureProfile,
    em: f64,
) -> Result<f64, HarnessError> {
    let mut sup = 0.0f64;
    for (i, t) in grid.iter().enumerate() {
        if *t < burn_in_time {
            continue;
        }
        let snapshot = &view.snapshots[i];
        let w_hat = snapshot.workload();
        let atom_profile = tf.profile(snapshot, tf.ramps_needed(snapshot))?;
        let lifted_profile = base_profile.scaled(w_hat / em);
        sup = sup.max(metric_from_profiles(&atom_profile, &lifted_profile));
    }
    Ok(sup)
}

/// Run the state-space-collapse experiment: for each r and replication,
/// simulate to real time `r^2 T`, form the diffusion-scaled view on the
/// grid, and take `sup_t d[mu_hat(t), lift(W_hat(t))]` past the burn-in
/// window.
pub fn run_collapse(
    cfg: &ExperimentConfig,
    archive_dir: Option<&Path>,
) -> Result<CollapseReport, HarnessError> {
    let fam = cfg.build_family()?;
    let nu = fam.service().clone();
    let tf = TestFunctionFamily::standard();
    let (base_profile, em) = base_excess_profile(&tf, &nu)?;
    let grid = linspace(0.0, cfg.horizon, cfg.grid_points);
    let burn_in_time = cfg.burn_in * cfg.horizon;
    let initial = cfg.initial.to_condition();

    let mut per_r = Vec::new();
    for (ri, &r) in cfg.sorted_r().iter().enumerate() {
        let (inter, service) = fam.instantiate_r(r)?;
        let raw_grid: Vec<f64> = grid
            .iter()
            .map(|t| ScaleMode::Diffusion.raw_time(r, *t))
            .collect();
        let horizon = ScaleMode::Diffusion.raw_time(r, cfg.horizon);
        let opts = RunOptions {
            event_cap: cfg.event_cap,
            keep_log: false,
        };
        let results: Vec<Option<f64>> = map_replications(cfg.replications, cfg.workers, |rep| {
            let mut arrivals = substream(cfg.seed, ri as u64, rep as u64, StreamRole::Arrivals);
            let mut services = substream(cfg.seed, ri as u64, rep as u64, StreamRole::Services);
            let mut init_rng = substream(cfg.seed, ri as u64, rep as u64, StreamRole::Initial);
            let initial_jobs = initial.resolve(r, &nu, &mut init_rng);
            let path = match run(
                &inter,
                &service,
                &initial_jobs,
                horizon,
                &raw_grid,
                &mut arrivals,
                &mut services,
                &opts,
            ) {
                Ok(p) => p,
                Err(_) => return None,
            };
            if cfg.keep_paths {
                if let Some(dir) = archive_dir {
                    let file = dir.join(format!("collapse_r{ri}_rep{rep}.bin"));
                    let _ = write_sim_path_binary(&file, &path);
                }
            }
            let view = scaled_view(&path, r, ScaleMode::Diffusion, &grid).ok()?;
            collapse_sup_for_view(&view, &grid, burn_in_time, &tf, &base_profile, em).ok()
        });
        let outcomes: Vec<ReplicationOutcome> = results
            .iter()
            .enumerate()
            .map(|(rep, sup)| ReplicationOutcome {
                replication: rep,
                sup_d: *sup,
            })
            .collect();
        let successes: Vec<f64> = results.iter().flatten().copied().collect();
        let failures = cfg.replications - successes.len();
        if (successes.len() as f64) < 0.8 * cfg.replications as f64 {
            return Err(HarnessError::TooManyFailures {
                r,
                failed: failures,
                total: cfg.replications,
            });
        }
        let mean = stats::mean(&successes);
        let mut boot_rng = substream(cfg.seed, ri as u64, 0, StreamRole::Bootstrap);
        let (ci_lo, ci_hi) = stats::bootstrap_mean_ci(&successes, 1000, 0.95, &mut boot_rng);
        per_r.push(CollapseRSummary {
            r,
            outcomes,
            failures,
            mean_sup_d: mean,
            ci_lo,
            ci_hi,
        });
    }
    let monotone_decreasing = (per_r.len() >= 2).then(|| {
        let first = &per_r[0];
        let last = &per_r[per_r.len() - 1];
        let means_decrease = per_r.windows(2).all(|w| w[1].mean_sup_d < w[0].mean_sup_d);
        means_decrease && last.ci_hi < first.ci_lo
    });
    Ok(CollapseReport {
        grid_points: cfg.grid_points,
        burn_in_time,
        per_r,
        monotone_decreasing,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GofTest {
    pub name: String,
    pub r: f64,
    pub statistic: f64,
    pub sample_size: usize,
    pub critical_value: f64,
    pub reference: String,
    pub passed: bool,
    pub fitted_rate: f64,
    pub predicted_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadySamples {
    pub r: f64,
    pub z_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
}

/// Steady-state goodness-of-fit report.
#[derive(Clone, Debug, Serialize)]
pub struct GofReport {
    pub level: f64,
    pub tests: Vec<GofTest>,
    pub samples: Vec<SteadySamples>,
}

impl GofReport {
    pub fn passed(&self) -> bool {
        self.tests.iter().all(|t| t.passed)
    }
}

/// Sample the diffusion-scaled queue length and workload at diffusion time
/// `steady_horizon` across replications and test them against the predicted
/// limit laws.
pub fn run_steady(cfg: &ExperimentConfig) -> Result<GofReport, HarnessError> {
    let fam = cfg.build_family()?;
    if !(fam.lambda() > 0.0) {
        return Err(HarnessError::Config(
            "steady-state experiment needs lambda > 0".into(),
        ));
    }
    let nu = fam.service().clone();
    let initial = cfg.initial.to_condition();
    let (alpha, a, beta, b) = (fam.alpha(), fam.a(), fam.beta(), fam.b());
    let sigma2 = alpha * a * a + beta * b * b;
    let rbm_params = RbmParams::new(fam.lambda(), sigma2, 0.0)?;

    let mut tests = Vec::new();
    let mut samples = Vec::new();
    for (ri, &r) in cfg.sorted_r().iter().enumerate() {
        let (inter, service) = fam.instantiate_r(r)?;
        let horizon = ScaleMode::Diffusion.raw_time(r, cfg.steady_horizon);
        let raw_grid = vec![horizon];
        let opts = RunOptions {
            event_cap: cfg.event_cap,
            keep_log: false,
        };
        let results: Vec<Option<(f64, f64)>> =
            map_replications(cfg.replications, cfg.workers, |rep| {
                let mut arrivals =
                    substream(cfg.seed, ri as u64, rep as u64, StreamRole::Arrivals);
                let mut services =
                    substream(cfg.seed, ri as u64, rep as u64, StreamRole::Services);
                let mut init_rng =
                    substream(cfg.seed, ri as u64, rep as u64, StreamRole::Initial);
                let initial_jobs = initial.resolve(r, &nu, &mut init_rng);
                let path = run(
                    &inter,
                    &service,
                    &initial_jobs,
                    horizon,
                    &raw_grid,
                    &mut arrivals,
                    &mut services,
                    &opts,
                )
                .ok()?;
                Some((path.z[0] / r, path.w[0] / r))
            });
        let ok: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
        let failed = cfg.replications - ok.len();
        if (ok.len() as f64) < 0.8 * cfg.replications as f64 {
            return Err(HarnessError::TooManyFailures {
                r,
                failed,
                total: cfg.replications,
            });
        }
        let z_hat: Vec<f64> = ok.iter().map(|(z, _)| *z).collect();
        let w_hat: Vec<f64> = ok.iter().map(|(_, w)| *w).collect();

        let z_rate = fam.lambda() * (beta.powi(-2) + b * b) / (a * a + b * b);
        let z_stat = stats::ks_statistic(&z_hat, |x| {
            rbm::zstar_steady_cdf(x, fam.lambda(), beta, a, b).unwrap_or(0.0)
        })?;
        let crit = stats::ks_critical_1pct(z_hat.len());
        tests.push(GofTest {
            name: "queue_length".into(),
            r,
            statistic: z_stat,
            sample_size: z_hat.len(),
            critical_value: crit,
            reference: format!("exponential(rate {z_rate})"),
            passed: z_stat <= crit,
            fitted_rate: 1.0 / stats::mean(&z_hat),
            predicted_rate: z_rate,
        });

        let w_rate = 2.0 * fam.lambda() / sigma2;
        let w_stat =
            stats::ks_statistic(&w_hat, |x| rbm::steady_cdf(&rbm_params, x).unwrap_or(0.0))?;
        tests.push(GofTest {
            name: "workload".into(),
            r,
            statistic: w_stat,
            sample_size: w_hat.len(),
            critical_value: crit,
            reference: format!("exponential(rate {w_rate})"),
            passed: w_stat <= crit,
            fitted_rate: 1.0 / stats::mean(&w_hat),
            predicted_rate: w_rate,
        });
        samples.push(SteadySamples { r, z_hat, w_hat });
    }
    Ok(GofReport {
        level: 0.01,
        tests,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FluidShiftOutcome {
    pub shift: f64,
    /// `sup_t d[shifted fluid-scaled state, fluid solution]` over the
    /// window; `None` if the fluid solve failed for this shift.
    pub sup_d: Option<f64>,
    /// Lifting distance `d[state, lift(workload)]` at the window start.
    pub eq11_at_start: Option<f64>,
    /// Largest lifting distance over the final unit of the window.
    pub eq11_tail: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluidRSummary {
    pub r: f64,
    pub shifts: Vec<FluidShiftOutcome>,
    pub failures: usize,
    pub median_sup_d: f64,
}

/// Shifted fluid-scale comparison report.
#[derive(Clone, Debug, Serialize)]
pub struct FluidComparisonReport {
    pub window: f64,
    pub per_r: Vec<FluidRSummary>,
    /// Median window distance decreasing from the smallest to the largest r
    /// (`None` with fewer than two r values).
    pub median_decreasing: Option<bool>,
}

impl FluidComparisonReport {
    pub fn passed(&self) -> bool {
        self.median_decreasing.unwrap_or(true)
    }
}

/// Compare shifted fluid-scaled sections of simulated paths against fluid
/// model solutions started from the section's initial state, and check the
/// lifting approximation on the tail of each window.
pub fn run_fluid_comparison(cfg: &ExperimentConfig) -> Result<FluidComparisonReport, HarnessError> {
    let fam = cfg.build_family()?;
    let nu = fam.service().clone();
    let tf = TestFunctionFamily::standard();
    let (base_profile, em) = base_excess_profile(&tf, &nu)?;
    let window = cfg.fluid_window;
    let window_grid = linspace(0.0, window, 26);
    let initial = cfg.initial.to_condition();
    let fluid_opts = FluidOptions {
        step: Some(cfg.fluid_step.unwrap_or(1e-3 * window)),
        ..Default::default()
    };

    let mut per_r = Vec::new();
    for (ri, &r) in cfg.sorted_r().iter().enumerate() {
        let (inter, service) = fam.instantiate_r(r)?;
        let m_max = (r * cfg.horizon - window).max(0.0);
        let n_shifts = cfg.fluid_shifts.max(1);
        let shifts: Vec<f64> = if n_shifts == 1 {
            vec![0.0]
        } else {
            (0..n_shifts)
                .map(|i| m_max * i as f64 / (n_shifts - 1) as f64)
                .collect()
        };
        // One trajectory per r covers every shifted window.
        let mut raw_grid: Vec<f64> = shifts
            .iter()
            .flat_map(|m| {
                window_grid
                    .iter()
                    .map(move |t| ScaleMode::Shifted(*m).raw_time(r, *t))
            })
            .collect();
        raw_grid.sort_by(f64::total_cmp);
        raw_grid.dedup();
        let horizon = *raw_grid.last().expect("nonempty");
        let mut arrivals = substream(cfg.seed, ri as u64, 0, StreamRole::Arrivals);
        let mut services = substream(cfg.seed, ri as u64, 0, StreamRole::Services);
        let mut init_rng = substream(cfg.seed, ri as u64, 0, StreamRole::Initial);
        let initial_jobs = initial.resolve(r, &nu, &mut init_rng);
        let path = run(
            &inter,
            &service,
            &initial_jobs,
            horizon,
            &raw_grid,
            &mut arrivals,
            &mut services,
            &RunOptions {
                event_cap: cfg.event_cap,
                keep_log: false,
            },
        )?;

        let outcomes: Vec<FluidShiftOutcome> =
            map_replications(shifts.len(), cfg.workers, |si| {
                let m = shifts[si];
                let run_one = || -> Result<FluidShiftOutcome, HarnessError> {
                    let view = scaled_view(&path, r, ScaleMode::Shifted(m), &window_grid)?;
                    let xi = view.snapshots[0].clone();
                    let fluid_path = if xi.is_zero() {
                        None
                    } else {
                        Some(fluid::solve(&xi, fam.alpha(), &nu, window, &fluid_opts)?)
                    };
                    let mut sup_d = 0.0f64;
                    let mut eq11_at_start = 0.0;
                    let mut eq11_tail = 0.0f64;
                    for (i, t) in window_grid.iter().enumerate() {
                        let state = &view.snapshots[i];
                        let fluid_measure = match &fluid_path {
                            Some(p) => p.measure_at(*t)?,
                            None => FiniteMeasure::zero(),
                        };
                        sup_d = sup_d.max(tf.metric(state, &fluid_measure)?);
                        let needs_lift = *t == 0.0 || *t >= window - 1.0;
                        if needs_lift {
                            let atom_profile = tf.profile(state, tf.ramps_needed(state))?;
                            let lifted = base_profile.scaled(state.workload() / em);
                            let d_lift = metric_from_profiles(&atom_profile, &lifted);
                            if *t == 0.0 {
                                eq11_at_start = d_lift;
                            } else {
                                eq11_tail = eq11_tail.max(d_lift);
                            }
                        }
                    }
                    Ok(FluidShiftOutcome {
                        shift: m,
                        sup_d: Some(sup_d),
                        eq11_at_start: Some(eq11_at_start),
                        eq11_tail: Some(eq11_tail),
                    })
                };
                run_one().unwrap_or(FluidShiftOutcome {
                    shift: m,
                    sup_d: None,
                    eq11_at_start: None,
                    eq11_tail: None,
                })
            });
        let mut sups: Vec<f64> = outcomes.iter().filter_map(|o| o.sup_d).collect();
        let failures = outcomes.len() - sups.len();
        if (sups.len() as f64) < 0.8 * outcomes.len() as f64 {
            return Err(HarnessError::TooManyFailures {
                r,
                failed: failures,
                total: outcomes.len(),
            });
        }
        sups.sort_by(f64::total_cmp);
        let median_sup_d = sups[sups.len() / 2];
        per_r.push(FluidRSummary {
            r,
            shifts: outcomes,
            failures,
            median_sup_d,
        });
    }
    let median_decreasing = (per_r.len() >= 2)
        .then(|| per_r.last().unwrap().median_sup_d < per_r[0].median_sup_d);
    Ok(FluidComparisonReport {
        window,
        per_r,
        median_decreasing,
    })
}

/// Simulate one replication per r on the diffusion grid and export the
/// paths (CSV, atoms CSV, and binary).
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, HarnessError> {
    let fam = cfg.build_family()?;
    let nu = fam.service().clone();
    let initial = cfg.initial.to_condition();
    let grid = linspace(0.0, cfg.horizon, cfg.grid_points);
    let mut files = Vec::new();
    for (ri, &r) in cfg.sorted_r().iter().enumerate() {
        let (inter, service) = fam.instantiate_r(r)?;
        let raw_grid: Vec<f64> = grid
            .iter()
            .map(|t| ScaleMode::Diffusion.raw_time(r, *t))
            .collect();
        let horizon = ScaleMode::Diffusion.raw_time(r, cfg.horizon);
        let mut arrivals = substream(cfg.seed, ri as u64, 0, StreamRole::Arrivals);
        let mut services = substream(cfg.seed, ri as u64, 0, StreamRole::Services);
        let mut init_rng = substream(cfg.seed, ri as u64, 0, StreamRole::Initial);
        let initial_jobs = initial.resolve(r, &nu, &mut init_rng);
        let path = run(
            &inter,
            &service,
            &initial_jobs,
            horizon,
            &raw_grid,
            &mut arrivals,
            &mut services,
            &RunOptions {
                event_cap: cfg.event_cap,
                keep_log: true,
            },
        )?;
        let stem = format!("path_r{ri}");
        write_sim_path_csv(out_dir, &stem, &path)?;
        write_sim_path_binary(&out_dir.join(format!("{stem}.bin")), &path)?;
        files.push(format!("{stem}.csv"));
        files.push(format!("{stem}_atoms.csv"));
        files.push(format!("{stem}.bin"));
    }
    Ok(files)
}

/// Solve the fluid model from the configured initial condition and export
/// the trajectory plus periodic measure dumps.
pub fn run_fluid_solve(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>, HarnessError> {
    let fam = cfg.build_family()?;
    let nu = fam.service().clone();
    let window = cfg.fluid_window;
    let xi = match &cfg.initial {
        InitialConfig::Empty => FiniteMeasure::zero(),
        InitialConfig::Atoms { values } => {
            FiniteMeasure::from_atoms(values.iter().map(|v| (*v, 1.0)))?
        }
        InitialConfig::Manifold { workload } => lift(*workload, &nu)?,
    };
    let opts = FluidOptions {
        step: Some(cfg.fluid_step.unwrap_or(1e-3 * window)),
        ..Default::default()
    };
    let path = fluid::solve(&xi, fam.alpha(), &nu, window, &opts)?;
    let report_grid = linspace(0.0, window, cfg.grid_points);
    let mut rows = Vec::with_capacity(report_grid.len());
    let mut measure_rows = Vec::new();
    for (i, t) in report_grid.iter().enumerate() {
        let zeta = path.measure_at(*t)?;
        rows.push(format!(
            "{},{},{},{}",
            t,
            path.s_at(*t)?,
            zeta.mass(),
            zeta.workload()
        ));
        if i % ((report_grid.len() / 10).max(1)) == 0 {
            for (loc, wt) in zeta.atoms() {
                measure_rows.push(format!("{t},atom,{loc},{wt}"));
            }
            for part in zeta.parts() {
                let kind = if part.is_excess() { "excess_part" } else { "service_part" };
                measure_rows.push(format!("{t},{kind},{},{}", part.shift(), part.scale()));
            }
        }
    }
    write_csv(&out_dir.join("fluid.csv"), "t,S,Z,workload", rows)?;
    write_csv(
        &out_dir.join("fluid_measures.csv"),
        "t,component,location_or_shift,weight_or_scale",
        measure_rows,
    )?;
    Ok(vec!["fluid.csv".into(), "fluid_measures.csv".into()])
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    suite: &'a str,
    seed: u64,
    passed: bool,
    config: &'a ExperimentConfig,
    report: &'a T,
}

fn write_summary<T: Serialize>(
    dir: &Path,
    suite: &str,
    cfg: &ExperimentConfig,
    passed: bool,
    report: &T,
) -> Result<(), HarnessError> {
    let summary = Summary {
        suite,
        seed: cfg.seed,
        passed,
        config: cfg,
        report,
    };
    let text = serde_json::to_string_pretty(&summary).expect("report serializes");
    std::fs::write(dir.join(format!("{suite}_summary.json")), text)?;
    Ok(())
}

/// Write the collapse CSV and JSON summary; returns the suite verdict.
pub fn write_collapse_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &CollapseReport,
) -> Result<bool, HarnessError> {
    let mut rows = Vec::new();
    for per_r in &report.per_r {
        for o in &per_r.outcomes {
            let (status, value) = match o.sup_d {
                Some(v) => ("ok", format!("{v}")),
                None => ("failed", String::new()),
            };
            rows.push(format!("{},{},{},{}", per_r.r, o.replication, value, status));
        }
    }
    write_csv(&dir.join("collapse.csv"), "r,replication,sup_d,status", rows)?;
    let passed = report.passed();
    write_summary(dir, "collapse", cfg, passed, report)?;
    Ok(passed)
}

pub fn write_steady_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &GofReport,
) -> Result<bool, HarnessError> {
    let mut rows = Vec::new();
    for s in &report.samples {
        for (i, (z, w)) in s.z_hat.iter().zip(&s.w_hat).enumerate() {
            rows.push(format!("{},{},{},{}", s.r, i, z, w));
        }
    }
    write_csv(&dir.join("steady.csv"), "r,replication,z_hat,w_hat", rows)?;
    let passed = report.passed();
    write_summary(dir, "steady", cfg, passed, report)?;
    Ok(passed)
}

pub fn write_fluid_comparison_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &FluidComparisonReport,
) -> Result<bool, HarnessError> {
    let mut rows = Vec::new();
    for per_r in &report.per_r {
        for o in &per_r.shifts {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            rows.push(format!(
                "{},{},{},{},{}",
                per_r.r,
                o.shift,
                fmt(o.sup_d),
                fmt(o.eq11_at_start),
                fmt(o.eq11_tail)
            ));
        }
    }
    write_csv(
        &dir.join("fluid_comparison.csv"),
        "r,shift,sup_d,eq11_at_start,eq11_tail",
        rows,
    )?;
    let passed = report.passed();
    write_summary(dir, "fluid_comparison", cfg, passed, report)?;
    Ok(passed)
}

pub fn write_validation_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &crate::dist::AssumptionReport,
) -> Result<bool, HarnessError> {
    let passed = report.all_passed();
    write_summary(dir, "validate", cfg, passed, report)?;
    Ok(passed)
}
