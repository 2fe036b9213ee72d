//! Per-iteration building blocks of the beamforming solver: the fractional
//! programming refresh, the beampattern surrogate, the real-valued quadratic
//! assembly, and the closed-form block updates with their dual ascent and
//! residual norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::ChannelSet;

use super::cubic::cubic_real_roots;
use super::{SensingContext, SolverState};

/// Fractional-programming auxiliaries: per (subcarrier, user) SINR and the
/// complex quadratic-transform scale.
#[derive(Debug, Clone)]
pub struct FpState {
    /// `sinr[(i, k)]` is the user-k SINR on subcarrier i.
    pub sinr: DMatrix<f64>,
    /// `scale[(i, k)]` is the quadratic-transform auxiliary.
    pub scale: DMatrix<Complex64>,
}

/// Closed-form refresh of the fractional-programming auxiliaries at the
/// current precoders.
pub fn fp_update(w: &[DMatrix<Complex64>], h: &ChannelSet, comm_noise_power_w: f64) -> FpState {
    let n_s = w.len();
    let k_users = if n_s > 0 { w[0].ncols() } else { 0 };
    let mut sinr = DMatrix::zeros(n_s, k_users);
    let mut scale = DMatrix::zeros(n_s, k_users);
    for i in 0..n_s {
        let hi = &h.gains[i];
        for k in 0..k_users {
            let hk = hi.column(k);
            let mut total = comm_noise_power_w;
            let mut cross = comm_noise_power_w;
            let mut direct = Complex64::new(0.0, 0.0);
            for j in 0..k_users {
                let inner = hk.dotc(&w[i].column(j));
                total += inner.norm_sqr();
                if j == k {
                    direct = inner;
                } else {
                    cross += inner.norm_sqr();
                }
            }
            let r = direct.norm_sqr() / cross;
            sinr[(i, k)] = r;
            scale[(i, k)] = direct * ((1.0 + r).sqrt() / total);
        }
    }
    FpState { sinr, scale }
}

/// Linear surrogate of the beampattern quadratic at the current precoders:
/// per (selected subcarrier, grid angle) a stacked linear coefficient vector
/// and a real offset. The surrogate is tight at the expansion point and
/// minorizes the quadratic everywhere.
#[derive(Debug, Clone)]
pub struct MmState {
    /// `linear[sel][g]`: coefficient vector of length `N_t * K`.
    pub linear: Vec<Vec<DVector<Complex64>>>,
    /// `offset[sel][g]`: real offset.
    pub offset: Vec<Vec<f64>>,
}

/// Build the beampattern surrogate at the current stacked precoders.
pub fn mm_surrogate(w: &[DVector<Complex64>], ctx: &SensingContext, n_t: usize) -> MmState {
    let mut linear = Vec::with_capacity(ctx.mask.selected.len());
    let mut offset = Vec::with_capacity(ctx.mask.selected.len());
    for &i in &ctx.mask.selected {
        let k_users = w[i].len() / n_t;
        let mut lin_g = Vec::with_capacity(ctx.steering.len());
        let mut off_g = Vec::with_capacity(ctx.steering.len());
        for a in &ctx.steering {
            let mut b = DVector::<Complex64>::zeros(n_t * k_users);
            let mut c = 0.0;
            for k in 0..k_users {
                let wk = w[i].rows(k * n_t, n_t);
                let inner = a.dotc(&wk); // a^H w_k
                for m in 0..n_t {
                    b[k * n_t + m] = a[m] * inner * 2.0;
                }
                c -= inner.norm_sqr();
            }
            lin_g.push(b);
            off_g.push(c);
        }
        linear.push(lin_g);
        offset.push(off_g);
    }
    MmState { linear, offset }
}

/// Surrogate value `Re{b^H w} + c` for one (selected subcarrier, angle).
pub fn surrogate_value(mm: &MmState, sel: usize, g: usize, w: &DVector<Complex64>) -> f64 {
    mm.linear[sel][g].dotc(w).re + mm.offset[sel][g]
}

/// Real-valued quadratic block of one subcarrier's precoder update:
/// minimize `v^T Q v - l^T v` over the stacked real/imaginary vector `v`.
#[derive(Debug, Clone)]
pub struct QuadraticBlock {
    /// Symmetrized quadratic matrix (`2n x 2n`, real symmetric PSD).
    pub quadratic: DMatrix<f64>,
    /// Linear coefficient (`2n`).
    pub linear: DVector<f64>,
    /// Complex quadratic of the rate part (Hermitian PSD, `n x n`).
    pub fp_matrix: DMatrix<Complex64>,
    /// Complex linear coefficient of the rate part (`n`).
    pub fp_linear: DVector<Complex64>,
}

/// Assemble the real-valued quadratic of subcarrier `i` from the current
/// fractional-programming and surrogate states. `sel` is the subcarrier's
/// position among the selected ones, when it is selected.
#[allow(clippy::too_many_arguments)]
pub fn assemble_quadratic(
    fp: &FpState,
    mm: Option<&MmState>,
    state: &SolverState,
    h: &ChannelSet,
    ctx: Option<&SensingContext>,
    i: usize,
    sel: Option<usize>,
    rho_consensus: f64,
    rho_pattern: f64,
) -> QuadraticBlock {
    let n_t = h.gains[i].nrows();
    let k_users = h.gains[i].ncols();
    let n = n_t * k_users;

    // Rate quadratic: block-diagonal Kronecker of the per-user weighted
    // channel outer products.
    let mut block = DMatrix::<Complex64>::zeros(n_t, n_t);
    for j in 0..k_users {
        let hj = h.gains[i].column(j);
        let wgt = fp.scale[(i, j)].norm_sqr();
        for r in 0..n_t {
            for c in 0..n_t {
                block[(r, c)] += hj[r] * hj[c].conj() * wgt;
            }
        }
    }
    let mut fp_matrix = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..k_users {
        fp_matrix
            .view_mut((k * n_t, k * n_t), (n_t, n_t))
            .copy_from(&block);
    }

    let mut fp_linear = DVector::<Complex64>::zeros(n);
    for k in 0..k_users {
        let hk = h.gains[i].column(k);
        let coef = fp.scale[(i, k)] * (1.0 + fp.sinr[(i, k)]).sqrt();
        for m in 0..n_t {
            fp_linear[k * n_t + m] = coef * hk[m];
        }
    }

    // Real embedding of (fp_matrix + rho1/2 I): the symmetrized quadratic is
    // 2 [[Re M, -Im M], [Im M, Re M]].
    let mut quadratic = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let m = fp_matrix[(r, c)] + if r == c { Complex64::from(rho_consensus / 2.0) } else { Complex64::new(0.0, 0.0) };
            quadratic[(r, c)] += 2.0 * m.re;
            quadratic[(n + r, n + c)] += 2.0 * m.re;
            quadratic[(r, n + c)] += -2.0 * m.im;
            quadratic[(n + r, c)] += 2.0 * m.im;
        }
    }

    // Linear part: 2 h_hat + rho1 (x + mu/rho1) and, on selected
    // subcarriers, the surrogate pull toward the current beampattern split.
    let mut q = fp_linear.map(|v| v * 2.0);
    q += &state.x[i] * Complex64::from(rho_consensus) + &state.dual_consensus[i];

    if let (Some(mm), Some(ctx), Some(sel)) = (mm, ctx, sel) {
        let g_count = ctx.steering.len();
        for g in 0..g_count {
            let b = &mm.linear[sel][g];
            let shift = rho_pattern
                * (mm.offset[sel][g] - state.pattern[sel][g]
                    + state.dual_pattern[sel][g] / rho_pattern);
            q -= b * Complex64::from(shift);
            // Rank-one surrogate contribution to the symmetrized quadratic.
            for r in 0..n {
                for c in 0..n {
                    let (br, bc) = (b[r], b[c]);
                    quadratic[(r, c)] += rho_pattern * br.re * bc.re;
                    quadratic[(r, n + c)] += rho_pattern * br.re * bc.im;
                    quadratic[(n + r, c)] += rho_pattern * br.im * bc.re;
                    quadratic[(n + r, n + c)] += rho_pattern * br.im * bc.im;
                }
            }
        }
    }

    let mut linear = DVector::<f64>::zeros(2 * n);
    for r in 0..n {
        linear[r] = q[r].re;
        linear[n + r] = q[r].im;
    }

    QuadraticBlock {
        quadratic,
        linear,
        fp_matrix,
        fp_linear,
    }
}

/// Solve the quadratic block by pseudoinverse of the symmetrized matrix
/// (symmetric eigendecomposition with a relative cutoff), map the stacked
/// real solution back to a complex vector, and verify stationarity.
pub fn update_w(block: &QuadraticBlock) -> Result<DVector<Complex64>> {
    let dim = block.quadratic.nrows();
    let eig = nalgebra::SymmetricEigen::new(block.quadratic.clone());
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-10 * lambda_max;
    let mut coeffs = eig.eigenvectors.transpose() * &block.linear;
    for (j, c) in coeffs.iter_mut().enumerate() {
        let lambda = eig.eigenvalues[j];
        *c = if lambda > cutoff { *c / lambda } else { 0.0 };
    }
    let stacked = eig.eigenvectors * coeffs;

    let residual = (&block.quadratic * &stacked - &block.linear).norm();
    let bound = 1e-8 * (1.0 + block.linear.norm());
    if residual > bound {
        return Err(Error::SolverConsistency(format!(
            "precoder stationarity residual {residual} exceeds {bound}"
        )));
    }
    let n = dim / 2;
    Ok(DVector::from_fn(n, |j, _| {
        Complex64::new(stacked[j], stacked[n + j])
    }))
}

/// Value of the auxiliary-update objective
/// `rho1/2 |x - d|^2 + rho2/2 (|x|^2 - p + nu/rho2)^2` with `d = w - mu/rho1`.
pub fn x_objective(
    x: &DVector<Complex64>,
    d: &DVector<Complex64>,
    power: f64,
    dual_power: f64,
    rho_consensus: f64,
    rho_power: f64,
) -> f64 {
    let gap = x.norm_squared() - power + dual_power / rho_power;
    rho_consensus / 2.0 * (x - d).norm_squared() + rho_power / 2.0 * gap * gap
}

fn x_stationarity_residual(
    x: &DVector<Complex64>,
    d: &DVector<Complex64>,
    power: f64,
    dual_power: f64,
    rho_consensus: f64,
    rho_power: f64,
) -> f64 {
    let gap = x.norm_squared() - power + dual_power / rho_power;
    let grad = x * Complex64::from(rho_consensus / 2.0 + rho_power * gap)
        - d * Complex64::from(rho_consensus / 2.0);
    grad.norm()
}

/// Closed-form update of the auxiliary vector: enumerate the nonnegative
/// real roots of the two norm cubics, form the stationary candidates, and
/// return the objective minimizer. The boolean is true when no stationary
/// candidate survived and the consensus point was returned as a fallback.
pub fn update_x(
    w: &DVector<Complex64>,
    power: f64,
    dual_consensus: &DVector<Complex64>,
    dual_power: f64,
    rho_consensus: f64,
    rho_power: f64,
) -> (DVector<Complex64>, bool) {
    let d = w - dual_consensus / Complex64::from(rho_consensus);
    let k = d.norm();
    let a = 1.0 - (2.0 * rho_power / rho_consensus) * power + 2.0 * dual_power / rho_consensus;
    let b = 2.0 * rho_power / rho_consensus;

    let mut candidates: Vec<DVector<Complex64>> = Vec::new();
    let tiny = f64::EPSILON * (1.0 + w.norm() + dual_consensus.norm() / rho_consensus);
    if k <= tiny {
        // Degenerate direction: the origin is always stationary; a sphere of
        // stationary points exists when the norm bracket can vanish.
        candidates.push(DVector::zeros(d.len()));
        let n_sq = -a / b;
        if n_sq > 0.0 {
            let mut e = DVector::<Complex64>::zeros(d.len());
            e[0] = Complex64::from(n_sq.sqrt());
            candidates.push(e);
        }
    } else {
        for sign in [-1.0, 1.0] {
            for root in cubic_real_roots(b, 0.0, a, sign * k) {
                if root < -1e-12 {
                    continue;
                }
                let n = root.max(0.0);
                let denom = a + b * n * n;
                if denom.abs() <= 1e-14 * (1.0 + a.abs() + b * n * n) {
                    continue;
                }
                candidates.push(&d / Complex64::from(denom));
            }
        }
    }

    let grad_scale = |x: &DVector<Complex64>| {
        1.0 + rho_consensus / 2.0 * (x.norm() + k)
            + rho_power
                * (x.norm_squared() + power.abs() + (dual_power / rho_power).abs())
                * x.norm()
    };
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    for x in candidates {
        let resid = x_stationarity_residual(&x, &d, power, dual_power, rho_consensus, rho_power);
        if resid > 1e-8 * grad_scale(&x) {
            continue;
        }
        let value = x_objective(&x, &d, power, dual_power, rho_consensus, rho_power);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, x));
        }
    }
    match best {
        Some((_, x)) => (x, false),
        None => (d, true),
    }
}

/// Shift every value up uniformly (never down) so the sum reaches `floor`.
pub fn lift_to_floor(values: &mut [f64], floor: f64) {
    if values.is_empty() {
        return;
    }
    let sum: f64 = values.iter().sum();
    let lift = ((floor - sum) / values.len() as f64).max(0.0);
    for v in values.iter_mut() {
        *v += lift;
    }
}

/// Shift every value down uniformly (never up) so the sum drops to `cap`.
pub fn drop_to_cap(values: &mut [f64], cap: f64) {
    if values.is_empty() {
        return;
    }
    let sum: f64 = values.iter().sum();
    let shift = ((sum - cap) / values.len() as f64).max(0.0);
    for v in values.iter_mut() {
        *v -= shift;
    }
}

/// Beampattern-split update: per grid angle, the unconstrained optima are
/// lifted uniformly onto the threshold halfspace.
pub fn update_gamma(state: &mut SolverState, mm: &MmState, ctx: &SensingContext, rho_pattern: f64) {
    let g_count = ctx.steering.len();
    let n_sel = ctx.mask.selected.len();
    for g in 0..g_count {
        let mut values: Vec<f64> = (0..n_sel)
            .map(|sel| {
                let i = ctx.mask.selected[sel];
                surrogate_value(mm, sel, g, &state.w[i]) + state.dual_pattern[sel][g] / rho_pattern
            })
            .collect();
        lift_to_floor(&mut values, ctx.spec.threshold_rhs);
        for sel in 0..n_sel {
            state.pattern[sel][g] = values[sel];
        }
    }
}

/// Power-split update: the unconstrained optima are dropped uniformly onto
/// the budget halfspace.
pub fn update_p(state: &mut SolverState, rho_power: f64, power_budget_w: f64) {
    let mut values: Vec<f64> = state
        .x
        .iter()
        .zip(&state.dual_power)
        .map(|(x, nu)| x.norm_squared() + nu / rho_power)
        .collect();
    drop_to_cap(&mut values, power_budget_w);
    state.power.copy_from_slice(&values);
}

/// Dual ascent on all three splits.
pub fn update_duals(
    state: &mut SolverState,
    mm: Option<&MmState>,
    ctx: Option<&SensingContext>,
    rho_consensus: f64,
    rho_power: f64,
    rho_pattern: f64,
) {
    let n_s = state.w.len();
    for i in 0..n_s {
        let gap = &state.x[i] - &state.w[i];
        state.dual_consensus[i] += gap * Complex64::from(rho_consensus);
        state.dual_power[i] += rho_power * (state.x[i].norm_squared() - state.power[i]);
    }
    if let (Some(mm), Some(ctx)) = (mm, ctx) {
        for (sel, &i) in ctx.mask.selected.iter().enumerate() {
            for g in 0..ctx.steering.len() {
                state.dual_pattern[sel][g] += rho_pattern
                    * (surrogate_value(mm, sel, g, &state.w[i]) - state.pattern[sel][g]);
            }
        }
    }
}

/// Primal and dual residual norms of one iteration. The primal residual
/// gathers all equality gaps of the current state; the dual residual gathers
/// the penalty-scaled successive differences against the previous iterate.
#[allow(clippy::too_many_arguments)]
pub fn residual_norms(
    state: &SolverState,
    prev_w: &[DVector<Complex64>],
    prev_p: &[f64],
    prev_gamma: &[Vec<f64>],
    mm: Option<&MmState>,
    ctx: Option<&SensingContext>,
    rho_consensus: f64,
    rho_power: f64,
    rho_pattern: f64,
) -> (f64, f64) {
    let mut primal_sq = 0.0;
    let mut dual_sq = 0.0;
    for i in 0..state.w.len() {
        primal_sq += (&state.x[i] - &state.w[i]).norm_squared();
        let power_gap = state.x[i].norm_squared() - state.power[i];
        primal_sq += power_gap * power_gap;
        dual_sq += rho_consensus.powi(2) * (&state.w[i] - &prev_w[i]).norm_squared();
        dual_sq += (rho_power * (state.power[i] - prev_p[i])).powi(2);
    }
    if let (Some(mm), Some(ctx)) = (mm, ctx) {
        for (sel, &i) in ctx.mask.selected.iter().enumerate() {
            for g in 0..ctx.steering.len() {
                let gap = surrogate_value(mm, sel, g, &state.w[i]) - state.pattern[sel][g];
                primal_sq += gap * gap;
                let delta = state.pattern[sel][g] - prev_gamma[sel][g];
                dual_sq += (rho_pattern * delta).powi(2) * mm.linear[sel][g].norm_squared();
            }
        }
    }
    (primal_sq.sqrt(), dual_sq.sqrt())
}
