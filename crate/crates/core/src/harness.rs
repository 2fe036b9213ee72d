//! Seeded Monte-Carlo experiment harness: runs full
//! beamform -> transmit -> echo -> estimate trials across parameter sweeps
//! and persists metric tables as CSV with a sidecar manifest.
//!
//! Determinism contract: the metrics CSV is a pure function of the plan and
//! the master seed. Trial randomness fans out as
//! `hash(master, trial index)`, so every strategy and sweep value sees the
//! same channels, scenes, and noise per trial (paired comparisons), and
//! adding trials never perturbs existing ones. Wall-clock timings go to a
//! separate file outside the determinism contract.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SystemConfig, Target, TargetScene};
use crate::error::{Error, Result};
use crate::physics::db_to_linear;
use crate::rng::{derive_seed, rng, trial_seed};
use crate::sensing::{detect_and_invert, dft_pipeline, rmse};
use crate::solver::{solve, SensingContext, StopRule};
use crate::sparse::{cs_pipeline, BpOptions, SelectionMask};
use crate::waveform::{generate_channel, generate_echo, generate_symbols, sum_rate, transmit_grid};

/// Relative peak threshold of the detector used by trials.
pub const DETECTOR_MIN_REL_PEAK: f64 = 0.5;

/// Per-fiber basis-pursuit iteration budget inside trials. Pure-noise fibers
/// have no sparse structure and would otherwise run the solver to its full
/// default budget without affecting peak detection.
pub const TRIAL_BP_MAX_ITER: usize = 600;

/// Beamforming/estimation strategy of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Sparsity-exploiting: sense on `N_sel` random subcarriers, estimate by
    /// per-fiber basis pursuit.
    CsAssisted,
    /// Sense on every subcarrier, estimate by the full DFT chain.
    FullSubcarrier,
    /// No sensing constraint, no estimation.
    CommOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::CsAssisted,
        Strategy::FullSubcarrier,
        Strategy::CommOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::CsAssisted => "cs_assisted",
            Strategy::FullSubcarrier => "full_subcarrier",
            Strategy::CommOnly => "comm_only",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "cs_assisted" => Ok(Strategy::CsAssisted),
            "full_subcarrier" => Ok(Strategy::FullSubcarrier),
            "comm_only" => Ok(Strategy::CommOnly),
            other => Err(Error::Parse(format!(
                "unknown strategy {other:?}; expected cs_assisted, full_subcarrier, or comm_only"
            ))),
        }
    }
}

/// Swept configuration axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Sensing SNR threshold in dB.
    Gamma0Db,
    /// Transmit power budget in watts.
    PowerBudget,
    /// Transmit antenna count.
    TxAntennas,
    /// User count.
    Users,
    /// Selected sensing subcarriers.
    SelectedSubcarriers,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Gamma0Db => "gamma0_db",
            SweepAxis::PowerBudget => "p0",
            SweepAxis::TxAntennas => "n_t",
            SweepAxis::Users => "k",
            SweepAxis::SelectedSubcarriers => "n_sel",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "gamma0_db" => Ok(SweepAxis::Gamma0Db),
            "p0" => Ok(SweepAxis::PowerBudget),
            "n_t" => Ok(SweepAxis::TxAntennas),
            "k" => Ok(SweepAxis::Users),
            "n_sel" => Ok(SweepAxis::SelectedSubcarriers),
            other => Err(Error::Parse(format!(
                "unknown sweep axis {other:?}; expected gamma0_db, p0, n_t, k, or n_sel"
            ))),
        }
    }

    /// Apply one sweep value to a configuration and revalidate.
    pub fn apply(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Gamma0Db => cfg.snr_threshold = db_to_linear(value),
            SweepAxis::PowerBudget => cfg.power_budget_w = value,
            SweepAxis::TxAntennas => cfg.tx_antennas = as_count(value)?,
            SweepAxis::Users => cfg.user_count = as_count(value)?,
            SweepAxis::SelectedSubcarriers => cfg.selected_subcarriers = as_count(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn as_count(value: f64) -> Result<usize> {
    if value.fract() != 0.0 || !(1.0..=1e9).contains(&value) {
        return Err(Error::Config(format!("{value} is not a valid count")));
    }
    Ok(value as usize)
}

/// A full sweep description.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub strategies: Vec<Strategy>,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("sweep needs at least one trial".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("sweep needs at least one strategy".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Metrics of one (strategy, sweep value, trial) run.
#[derive(Debug, Clone)]
pub struct MetricRecord {
    pub strategy: Strategy,
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub trial: usize,
    pub trial_seed: u64,
    pub sum_rate_bits: f64,
    pub rmse_theta_rad: Option<f64>,
    pub rmse_range_m: Option<f64>,
    pub rmse_velocity_mps: Option<f64>,
    /// Truth targets left unmatched by the estimator (miss penalty is
    /// recorded here, never folded into the RMSE columns).
    pub missed_targets: usize,
    /// False when the solver hit its iteration budget or the rounded
    /// iterate came out infeasible.
    pub converged: bool,
    /// Rounded precoders satisfy both constraints.
    pub feasible: bool,
    pub iterations: usize,
    pub runtime_ms: f64,
}

/// Draw the random target scene of one trial.
fn draw_scene(cfg: &SystemConfig, seed: u64) -> TargetScene {
    let mut g = rng(seed);
    let targets = (0..cfg.scene_target_count)
        .map(|_| Target {
            angle_rad: g.random_range(cfg.angle_min_rad..cfg.angle_max_rad),
            range_m: g.random_range(cfg.ref_distance_m..cfg.max_range_m),
            velocity_mps: if cfg.scene_velocity_max_mps > 0.0 {
                g.random_range(-cfg.scene_velocity_max_mps..cfg.scene_velocity_max_mps)
            } else {
                0.0
            },
            reflection: Complex64::from_polar(
                cfg.reflection_power.sqrt(),
                g.random_range(0.0..std::f64::consts::TAU),
            ),
        })
        .collect();
    TargetScene::new(targets)
}

/// Run one full trial: solve the beamformer for the strategy, synthesize the
/// echo of a random scene under the solved precoders, run the strategy's
/// estimator, and score sum-rate and RMSE.
pub fn run_trial(
    cfg: &SystemConfig,
    axis: SweepAxis,
    sweep_value: f64,
    strategy: Strategy,
    trial: usize,
    seed: u64,
) -> Result<MetricRecord> {
    let started = std::time::Instant::now();
    let mut cfg = cfg.clone();
    if strategy == Strategy::FullSubcarrier {
        cfg.selected_subcarriers = cfg.subcarrier_count;
    }

    let h = generate_channel(&cfg, derive_seed(seed, "channel"))?;
    let mask = match strategy {
        Strategy::CsAssisted => Some(SelectionMask::random(&cfg, derive_seed(seed, "mask"))?),
        Strategy::FullSubcarrier => Some(SelectionMask::full(&cfg)),
        Strategy::CommOnly => None,
    };
    let ctx = match &mask {
        Some(m) => Some(SensingContext::new(&cfg, m.clone())?),
        None => None,
    };
    let stop = StopRule::for_config(&cfg, mask.as_ref().map_or(0, |m| m.selected.len()));
    let outcome = solve(&cfg, &h, ctx.as_ref(), &stop, None)?;

    let scene = draw_scene(&cfg, derive_seed(seed, "scene"));
    let symbols = generate_symbols(&cfg, derive_seed(seed, "symbols"))?;

    let (rmse_report, missed) = match &mask {
        None => (None, 0),
        Some(mask) => {
            let echo = generate_echo(
                &scene,
                &outcome.precoders,
                &symbols,
                &cfg,
                derive_seed(seed, "echo"),
                false,
            )?;
            let x = transmit_grid(&outcome.precoders, &symbols)?;
            let cube = match strategy {
                Strategy::CsAssisted => {
                    let opts = BpOptions {
                        max_iter: TRIAL_BP_MAX_ITER,
                        ..BpOptions::default()
                    };
                    cs_pipeline(&echo, &x, mask, &cfg, &opts)?.0
                }
                _ => dft_pipeline(&echo, &x, &cfg)?,
            };
            let detected = detect_and_invert(
                &cube,
                &cfg,
                scene.targets.len(),
                DETECTOR_MIN_REL_PEAK,
            );
            let report = rmse(&detected.peaks, &scene.targets, &cfg);
            let missed = report.missed;
            (
                (report.matched > 0).then_some(report),
                missed,
            )
        }
    };

    Ok(MetricRecord {
        strategy,
        sweep_axis: axis,
        sweep_value,
        trial,
        trial_seed: seed,
        sum_rate_bits: sum_rate(&h, &outcome.precoders, cfg.comm_noise_power_w),
        rmse_theta_rad: rmse_report.as_ref().map(|r| r.theta_rad),
        rmse_range_m: rmse_report.as_ref().map(|r| r.range_m),
        rmse_velocity_mps: rmse_report.as_ref().map(|r| r.velocity_mps),
        missed_targets: missed,
        converged: outcome.converged && outcome.feasible,
        feasible: outcome.feasible,
        iterations: outcome.iterations,
        runtime_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Per-(strategy, value) aggregate appended after the trial rows.
#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub strategy: Strategy,
    pub sweep_value: f64,
    pub trials: usize,
    pub mean_sum_rate_bits: f64,
    pub mean_rmse_theta_rad: Option<f64>,
    pub mean_rmse_range_m: Option<f64>,
    pub mean_rmse_velocity_mps: Option<f64>,
    pub all_converged: bool,
    pub all_feasible: bool,
}

/// Results of one sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<AggregateRecord>,
    /// One line per failed trial.
    pub failures: Vec<String>,
    pub metrics_path: PathBuf,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Aggregate trial rows into per-(strategy, value) means, in row order.
pub fn aggregate(records: &[MetricRecord]) -> Vec<AggregateRecord> {
    let mut keys: Vec<(Strategy, f64)> = Vec::new();
    for r in records {
        if !keys
            .iter()
            .any(|(s, v)| *s == r.strategy && v.to_bits() == r.sweep_value.to_bits())
        {
            keys.push((r.strategy, r.sweep_value));
        }
    }
    keys.iter()
        .map(|&(strategy, value)| {
            let rows: Vec<&MetricRecord> = records
                .iter()
                .filter(|r| r.strategy == strategy && r.sweep_value.to_bits() == value.to_bits())
                .collect();
            AggregateRecord {
                strategy,
                sweep_value: value,
                trials: rows.len(),
                mean_sum_rate_bits: mean(rows.iter().map(|r| r.sum_rate_bits)).unwrap_or(f64::NAN),
                mean_rmse_theta_rad: mean(rows.iter().filter_map(|r| r.rmse_theta_rad)),
                mean_rmse_range_m: mean(rows.iter().filter_map(|r| r.rmse_range_m)),
                mean_rmse_velocity_mps: mean(rows.iter().filter_map(|r| r.rmse_velocity_mps)),
                all_converged: rows.iter().all(|r| r.converged),
                all_feasible: rows.iter().all(|r| r.feasible),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_metrics_csv(axis: SweepAxis, records: &[MetricRecord], aggregates: &[AggregateRecord]) -> String {
    let mut out = String::new();
    out.push_str(
        "strategy,sweep_axis,sweep_value,trial,trial_seed,sum_rate_bits,rmse_theta_rad,\
         rmse_range_m,rmse_velocity_mps,missed_targets,converged,feasible,iterations\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.strategy.name(),
            r.sweep_axis.name(),
            r.sweep_value,
            r.trial,
            r.trial_seed,
            r.sum_rate_bits,
            opt(r.rmse_theta_rad),
            opt(r.rmse_range_m),
            opt(r.rmse_velocity_mps),
            r.missed_targets,
            r.converged,
            r.feasible,
            r.iterations
        );
    }
    for a in aggregates {
        let _ = writeln!(
            out,
            "{},{},{},mean,,{},{},{},{},,{},{},",
            a.strategy.name(),
            axis.name(),
            a.sweep_value,
            a.mean_sum_rate_bits,
            opt(a.mean_rmse_theta_rad),
            opt(a.mean_rmse_range_m),
            opt(a.mean_rmse_velocity_mps),
            a.all_converged,
            a.all_feasible
        );
    }
    out
}

fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    sweep: ManifestSweep,
    config: &'a SystemConfig,
}

#[derive(Serialize)]
struct ManifestSweep {
    axis: String,
    values: Vec<f64>,
    trials: usize,
    strategies: Vec<String>,
    master_seed: u64,
    config_hash: String,
    git_revision: String,
}

fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Run the cross product of strategies x sweep values x trials on a bounded
/// worker pool, then write `metrics.csv` (trial rows in deterministic order
/// plus aggregate rows), `timings.csv`, `failures.log` (when any), and
/// `manifest.toml` into the output directory. All files are written
/// atomically.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    plan.validate()?;
    std::fs::create_dir_all(&plan.output_dir)?;

    let jobs: Vec<(Strategy, usize, usize)> = plan
        .strategies
        .iter()
        .flat_map(|&s| {
            (0..plan.values.len())
                .flat_map(move |vi| (0..plan.trials).map(move |t| (s, vi, t)))
        })
        .collect();

    let results: Vec<std::result::Result<MetricRecord, String>> = jobs
        .par_iter()
        .map(|&(strategy, vi, trial)| {
            let value = plan.values[vi];
            let cfg = plan
                .axis
                .apply(&plan.base, value)
                .map_err(|e| format!("{}/{value}/{trial}: {e}", strategy.name()))?;
            run_trial(
                &cfg,
                plan.axis,
                value,
                strategy,
                trial,
                trial_seed(plan.master_seed, trial as u64),
            )
            .map_err(|e| format!("{}/{value}/{trial}: {e}", strategy.name()))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(line) => failures.push(line),
        }
    }
    let aggregates = aggregate(&records);

    let metrics_path = plan.output_dir.join("metrics.csv");
    atomic_write(
        &metrics_path,
        &render_metrics_csv(plan.axis, &records, &aggregates),
    )?;

    let mut timings = String::from("strategy,sweep_value,trial,runtime_ms\n");
    for r in &records {
        let _ = writeln!(
            timings,
            "{},{},{},{}",
            r.strategy.name(),
            r.sweep_value,
            r.trial,
            r.runtime_ms
        );
    }
    atomic_write(&plan.output_dir.join("timings.csv"), &timings)?;

    if !failures.is_empty() {
        atomic_write(
            &plan.output_dir.join("failures.log"),
            &(failures.join("\n") + "\n"),
        )?;
    }

    let manifest = Manifest {
        sweep: ManifestSweep {
            axis: plan.axis.name().to_string(),
            values: plan.values.clone(),
            trials: plan.trials,
            strategies: plan.strategies.iter().map(|s| s.name().to_string()).collect(),
            master_seed: plan.master_seed,
            config_hash: plan.base.hash(),
            git_revision: git_revision(),
        },
        config: &plan.base,
    };
    let manifest_text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Parse(format!("manifest serialization: {e}")))?;
    atomic_write(&plan.output_dir.join("manifest.toml"), &manifest_text)?;

    Ok(SweepResult {
        records,
        aggregates,
        failures,
        metrics_path,
    })
}
