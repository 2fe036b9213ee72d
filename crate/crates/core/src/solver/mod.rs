//! Transmit beamforming solver.
//!
//! Maximizes the multiuser downlink sum-rate subject to a total power budget
//! and a minimum received sensing SNR over a grid of directions, by
//! alternating three layers in a single loop: a linear minorizing surrogate
//! of the beampattern quadratic, a fractional-programming refresh of the
//! rate objective, and an ADMM sweep over split variables with nonlinear
//! equality couplings, each block solved in closed form.

pub mod cubic;
pub mod steps;

pub use cubic::cubic_real_roots;
pub use steps::{
    assemble_quadratic, drop_to_cap, fp_update, lift_to_floor, mm_surrogate, residual_norms,
    surrogate_value, update_duals, update_gamma, update_p, update_w, update_x, x_objective,
    FpState, MmState, QuadraticBlock,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::physics::{digital_frequencies, linear_to_db, path_loss, steering_vector};
use crate::sparse::SelectionMask;
use crate::waveform::{sum_rate, ChannelSet, PrecoderSet};

/// Sensing requirement: the grid of protected directions, the worst-case
/// range, and the aggregated beampattern threshold they imply.
#[derive(Debug, Clone)]
pub struct SensingSpec {
    pub grid_angles_rad: Vec<f64>,
    pub max_range_m: f64,
    /// Linear received-SNR threshold.
    pub snr_threshold: f64,
    /// Right-hand side of the aggregated beampattern constraint:
    /// `N_sel * sigma_s^2 * threshold / (sigma_beta^2 * PL(2 d_0))`.
    pub threshold_rhs: f64,
}

impl SensingSpec {
    pub fn new(cfg: &SystemConfig, selected_count: usize) -> Result<Self> {
        if cfg.angle_grid_count < 2 {
            return Err(Error::Config("angle grid needs at least two points".into()));
        }
        if selected_count == 0 {
            return Err(Error::Config(
                "sensing requires at least one selected subcarrier".into(),
            ));
        }
        let g = cfg.angle_grid_count;
        let grid_angles_rad = (0..g)
            .map(|j| {
                cfg.angle_min_rad
                    + j as f64 * (cfg.angle_max_rad - cfg.angle_min_rad) / (g as f64 - 1.0)
            })
            .collect();
        let pl = path_loss(2.0 * cfg.max_range_m, cfg)?;
        let threshold_rhs = selected_count as f64 * cfg.sensing_noise_power_w * cfg.snr_threshold
            / (cfg.reflection_power * pl);
        Ok(Self {
            grid_angles_rad,
            max_range_m: cfg.max_range_m,
            snr_threshold: cfg.snr_threshold,
            threshold_rhs,
        })
    }
}

/// Sensing spec bound to a concrete subcarrier selection, with the grid
/// steering vectors precomputed.
#[derive(Debug, Clone)]
pub struct SensingContext {
    pub spec: SensingSpec,
    pub mask: SelectionMask,
    /// Transmit steering vector per grid angle.
    pub steering: Vec<DVector<Complex64>>,
    /// Position of each subcarrier among the selected ones.
    sel_pos: Vec<Option<usize>>,
}

impl SensingContext {
    pub fn new(cfg: &SystemConfig, mask: SelectionMask) -> Result<Self> {
        let spec = SensingSpec::new(cfg, mask.selected.len())?;
        let steering = spec
            .grid_angles_rad
            .iter()
            .map(|&theta| {
                let f = digital_frequencies(theta, cfg.max_range_m, 0.0, cfg);
                steering_vector(f.transmit, cfg.tx_antennas)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sel_pos = vec![None; cfg.subcarrier_count];
        for (pos, &i) in mask.selected.iter().enumerate() {
            sel_pos[i] = Some(pos);
        }
        Ok(Self {
            spec,
            mask,
            steering,
            sel_pos,
        })
    }

    pub fn selected_position(&self, subcarrier: usize) -> Option<usize> {
        self.sel_pos[subcarrier]
    }
}

/// Received sensing SNR of a target at `(theta, range)` aggregated over the
/// selected subcarriers (linear).
pub fn received_snr(
    w: &PrecoderSet,
    theta_rad: f64,
    range_m: f64,
    mask: &SelectionMask,
    cfg: &SystemConfig,
) -> Result<f64> {
    if mask.selected.is_empty() {
        return Err(Error::Config(
            "received SNR undefined without selected subcarriers".into(),
        ));
    }
    if range_m < cfg.ref_distance_m {
        return Err(Error::Domain(
            "range below the path-loss reference distance".into(),
        ));
    }
    let f = digital_frequencies(theta_rad, range_m, 0.0, cfg);
    let a = steering_vector(f.transmit, cfg.tx_antennas)?;
    let mut beam = 0.0;
    for &i in &mask.selected {
        let wi = &w.per_subcarrier[i];
        for k in 0..wi.ncols() {
            beam += a.dotc(&wi.column(k)).norm_sqr();
        }
    }
    let pl = path_loss(2.0 * range_m, cfg)?;
    Ok(cfg.reflection_power * pl * beam
        / (mask.selected.len() as f64 * cfg.sensing_noise_power_w))
}

/// Full iterate of the solver: primal splits, duals, and iteration counter.
/// The beampattern split and its dual are kept as real scalars; their update
/// increments are real by construction, which the solve loop asserts.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Stacked precoder per subcarrier (length `N_t * K`).
    pub w: Vec<DVector<Complex64>>,
    /// Consensus split per subcarrier.
    pub x: Vec<DVector<Complex64>>,
    /// Power split per subcarrier.
    pub power: Vec<f64>,
    /// Beampattern split, indexed `[selected position][grid angle]`.
    pub pattern: Vec<Vec<f64>>,
    /// Dual of the consensus split.
    pub dual_consensus: Vec<DVector<Complex64>>,
    /// Dual of the power split.
    pub dual_power: Vec<f64>,
    /// Dual of the beampattern split.
    pub dual_pattern: Vec<Vec<f64>>,
    pub iteration: usize,
}

impl SolverState {
    /// Reshape the stacked precoders into matrices.
    pub fn precoders(&self, tx_antennas: usize, users: usize) -> PrecoderSet {
        PrecoderSet {
            per_subcarrier: self
                .w
                .iter()
                .map(|wi| DMatrix::from_column_slice(tx_antennas, users, wi.as_slice()))
                .collect(),
        }
    }
}

/// Power-scaled steering initialization: each user column points at one
/// angle of the sensed region (its midpoint for a single user), with the
/// total transmit power meeting the budget exactly. Splits start exactly
/// feasible and duals at zero.
pub fn initialize(cfg: &SystemConfig, ctx: Option<&SensingContext>) -> Result<SolverState> {
    let n_s = cfg.subcarrier_count;
    let k_users = cfg.user_count;
    let n_t = cfg.tx_antennas;
    let coef =
        (cfg.power_budget_w / (n_s as f64 * n_t as f64 * k_users as f64)).sqrt();

    let mut wi = DVector::<Complex64>::zeros(n_t * k_users);
    for k in 0..k_users {
        let theta = if k_users == 1 {
            0.5 * (cfg.angle_min_rad + cfg.angle_max_rad)
        } else {
            cfg.angle_min_rad
                + k as f64 * (cfg.angle_max_rad - cfg.angle_min_rad) / (k_users as f64 - 1.0)
        };
        let f = digital_frequencies(theta, cfg.max_range_m, 0.0, cfg);
        let a = steering_vector(f.transmit, n_t)?;
        for m in 0..n_t {
            wi[k * n_t + m] = a[m] * coef;
        }
    }

    let w: Vec<DVector<Complex64>> = (0..n_s).map(|_| wi.clone()).collect();
    let power: Vec<f64> = w.iter().map(|v| v.norm_squared()).collect();
    let pattern = match ctx {
        Some(ctx) => ctx
            .mask
            .selected
            .iter()
            .map(|&i| {
                ctx.steering
                    .iter()
                    .map(|a| {
                        (0..k_users)
                            .map(|k| a.dotc(&w[i].rows(k * n_t, n_t)).norm_sqr())
                            .sum()
                    })
                    .collect()
            })
            .collect(),
        None => Vec::new(),
    };
    let dual_pattern = pattern.iter().map(|row: &Vec<f64>| vec![0.0; row.len()]).collect();

    Ok(SolverState {
        x: w.clone(),
        dual_consensus: (0..n_s).map(|_| DVector::zeros(n_t * k_users)).collect(),
        dual_power: vec![0.0; n_s],
        dual_pattern,
        pattern,
        power,
        w,
        iteration: 0,
    })
}

/// Stopping rule of the outer loop.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub max_iter: usize,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

impl StopRule {
    /// Default thresholds scaled by the square root of the total split
    /// dimension. The dual residual carries a penalty factor by
    /// construction, so its threshold is scaled by the largest penalty
    /// weight (with equal thresholds the dual rule could never fire at
    /// large penalties) and tightened by an extra decade so the surrogate
    /// and rate layers settle too, not just the split feasibility.
    pub fn for_config(cfg: &SystemConfig, selected_count: usize) -> Self {
        let dim = cfg.subcarrier_count * 2 * cfg.tx_antennas * cfg.user_count
            + cfg.subcarrier_count
            + selected_count * cfg.angle_grid_count;
        let eps = 1e-3 * (dim as f64).sqrt();
        let rho_max = cfg.rho_consensus.max(cfg.rho_power).max(cfg.rho_pattern);
        Self {
            max_iter: 1000,
            eps_primal: eps,
            eps_dual: eps * rho_max * 0.1,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub sum_rate_bits: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Smallest margin over the grid, in dB (absent without sensing).
    pub min_sensing_surplus_db: Option<f64>,
    pub wall_time_ms: f64,
}

/// Everything the solver hands back.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub precoders: PrecoderSet,
    pub trace: Vec<TraceRow>,
    /// Residuals fell below the stopping thresholds.
    pub converged: bool,
    /// The returned (rounded) precoders satisfy both constraints.
    pub feasible: bool,
    pub iterations: usize,
}

/// Per-iteration view for inspection hooks.
pub struct IterationInfo<'a> {
    pub iteration: usize,
    pub state: &'a SolverState,
    pub fp: &'a FpState,
    pub mm: Option<&'a MmState>,
    /// Quadratic blocks of this iteration, in subcarrier order (empty when
    /// no inspector is attached).
    pub blocks: &'a [QuadraticBlock],
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub sum_rate_bits: f64,
}

/// Run the solver loop until the residuals fall below the stopping rule or
/// the iteration budget runs out, then round the iterate onto the power
/// budget and check sensing feasibility.
pub fn solve(
    cfg: &SystemConfig,
    h: &ChannelSet,
    ctx: Option<&SensingContext>,
    stop: &StopRule,
    mut inspector: Option<&mut dyn FnMut(&IterationInfo)>,
) -> Result<SolveOutcome> {
    if h.gains.len() != cfg.subcarrier_count {
        return Err(Error::DimensionMismatch(format!(
            "channel set carries {} subcarriers, config expects {}",
            h.gains.len(),
            cfg.subcarrier_count
        )));
    }
    let n_t = cfg.tx_antennas;
    let k_users = cfg.user_count;
    let mut state = initialize(cfg, ctx)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let started = std::time::Instant::now();

    for t in 1..=stop.max_iter {
        let prev_w = state.w.clone();
        let prev_p = state.power.clone();
        let prev_gamma = state.pattern.clone();

        // Surrogate and fractional-programming refresh at the current point.
        let mm = ctx.map(|c| mm_surrogate(&state.w, c, n_t));
        let w_mats = state.precoders(n_t, k_users).per_subcarrier;
        let fp = fp_update(&w_mats, h, cfg.comm_noise_power_w);

        // Per-subcarrier precoder updates.
        let mut blocks = Vec::new();
        for i in 0..cfg.subcarrier_count {
            let sel = ctx.and_then(|c| c.selected_position(i));
            let block = assemble_quadratic(
                &fp,
                mm.as_ref(),
                &state,
                h,
                ctx,
                i,
                sel,
                cfg.rho_consensus,
                cfg.rho_pattern,
            );
            state.w[i] = update_w(&block)?;
            if inspector.is_some() {
                blocks.push(block);
            }
        }

        // Auxiliary, split, and dual updates.
        for i in 0..cfg.subcarrier_count {
            let (x, _degenerate) = update_x(
                &state.w[i],
                state.power[i],
                &state.dual_consensus[i],
                state.dual_power[i],
                cfg.rho_consensus,
                cfg.rho_power,
            );
            state.x[i] = x;
        }
        if let (Some(mm), Some(ctx)) = (mm.as_ref(), ctx) {
            update_gamma(&mut state, mm, ctx, cfg.rho_pattern);
        }
        update_p(&mut state, cfg.rho_power, cfg.power_budget_w);
        update_duals(
            &mut state,
            mm.as_ref(),
            ctx,
            cfg.rho_consensus,
            cfg.rho_power,
            cfg.rho_pattern,
        );
        state.iteration = t;

        let (r, s) = residual_norms(
            &state,
            &prev_w,
            &prev_p,
            &prev_gamma,
            mm.as_ref(),
            ctx,
            cfg.rho_consensus,
            cfg.rho_power,
            cfg.rho_pattern,
        );

        let precoders = state.precoders(n_t, k_users);
        let rate = sum_rate(h, &precoders, cfg.comm_noise_power_w);
        let surplus = match ctx {
            Some(c) => {
                let mut min_db = f64::INFINITY;
                for &theta in &c.spec.grid_angles_rad {
                    let snr = received_snr(&precoders, theta, c.spec.max_range_m, &c.mask, cfg)?;
                    min_db = min_db.min(linear_to_db(snr / c.spec.snr_threshold));
                }
                Some(min_db)
            }
            None => None,
        };
        trace.push(TraceRow {
            iteration: t,
            sum_rate_bits: rate,
            primal_residual: r,
            dual_residual: s,
            min_sensing_surplus_db: surplus,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(hook) = inspector.as_mut() {
            hook(&IterationInfo {
                iteration: t,
                state: &state,
                fp: &fp,
                mm: mm.as_ref(),
                blocks: &blocks,
                primal_residual: r,
                dual_residual: s,
                sum_rate_bits: rate,
            });
        }
        if r < stop.eps_primal && s < stop.eps_dual {
            converged = true;
            break;
        }
    }

    // Round onto the power budget, then verify sensing feasibility of the
    // rounded point.
    let mut precoders = state.precoders(n_t, k_users);
    let total = precoders.total_power();
    if total > cfg.power_budget_w {
        let scale = Complex64::from((cfg.power_budget_w / total).sqrt());
        for wi in &mut precoders.per_subcarrier {
            *wi *= scale;
        }
    }
    let mut feasible = precoders.within_power_budget(cfg.power_budget_w);
    if let Some(c) = ctx {
        for &theta in &c.spec.grid_angles_rad {
            let snr = received_snr(&precoders, theta, c.spec.max_range_m, &c.mask, cfg)?;
            if snr < c.spec.snr_threshold * (1.0 - 1e-2) {
                feasible = false;
            }
        }
    }

    Ok(SolveOutcome {
        precoders,
        trace,
        converged,
        feasible,
        iterations: state.iteration,
    })
}
