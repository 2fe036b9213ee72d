//! Subcarrier selection and sparse recovery: random selection masks, an
//! equality-constrained complex basis-pursuit solver, a greedy matching
//! pursuit used as an independent cross-check, and the estimator that
//! replaces the delay DFT with per-fiber sparse recovery.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::rng;
use crate::sensing::{DelayDftMatrix, DopplerSpectra, ProcessedCube};

/// Which subcarriers are sampled for sensing, plus the implied row-selection
/// operator over the zero-padded delay-domain vector (selected rows among
/// the first `subcarrier_count`, then every padding row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    /// Selected subcarrier indices, strictly increasing.
    pub selected: Vec<usize>,
    pub subcarrier_count: usize,
    pub delay_dft_size: usize,
}

impl SelectionMask {
    /// Uniform random subset of `selected_subcarriers` subcarriers without
    /// replacement. Deterministic under `seed`.
    pub fn random(cfg: &SystemConfig, seed: u64) -> Result<Self> {
        if cfg.selected_subcarriers == 0 || cfg.selected_subcarriers > cfg.subcarrier_count {
            return Err(Error::Config(format!(
                "cannot select {} of {} subcarriers",
                cfg.selected_subcarriers, cfg.subcarrier_count
            )));
        }
        let mut g = rng(seed);
        let mut indices: Vec<usize> = (0..cfg.subcarrier_count).collect();
        indices.shuffle(&mut g);
        let mut selected: Vec<usize> = indices[..cfg.selected_subcarriers].to_vec();
        selected.sort_unstable();
        Ok(Self {
            selected,
            subcarrier_count: cfg.subcarrier_count,
            delay_dft_size: cfg.delay_dft_size,
        })
    }

    /// Mask selecting every subcarrier.
    pub fn full(cfg: &SystemConfig) -> Self {
        Self {
            selected: (0..cfg.subcarrier_count).collect(),
            subcarrier_count: cfg.subcarrier_count,
            delay_dft_size: cfg.delay_dft_size,
        }
    }

    /// Binary indicator over the subcarriers.
    pub fn flags(&self) -> Vec<bool> {
        let mut phi = vec![false; self.subcarrier_count];
        for &i in &self.selected {
            phi[i] = true;
        }
        phi
    }

    /// Rows kept by the selection operator: selected subcarriers plus all
    /// zero-padding rows.
    pub fn kept_rows(&self) -> Vec<usize> {
        let mut rows = self.selected.clone();
        rows.extend(self.subcarrier_count..self.delay_dft_size);
        rows
    }

    /// Number of kept rows.
    pub fn row_count(&self) -> usize {
        self.selected.len() + (self.delay_dft_size - self.subcarrier_count)
    }

    /// Structured-text rendering: the selected indices alongside the seed
    /// they were drawn from.
    pub fn to_toml(&self, seed: u64) -> String {
        let list = self
            .selected
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "[selection]\nseed = {seed}\nsubcarrier_count = {}\ndelay_dft_size = {}\nselected = [{list}]\n",
            self.subcarrier_count, self.delay_dft_size
        )
    }
}

/// Measurement operator `Phi F^{-1}`: the kept rows of the inverse delay
/// DFT. Rows are mutually orthogonal with squared norm `1/N_d`, which is
/// asserted on construction.
pub fn measurement_operator(
    mask: &SelectionMask,
    delay: &DelayDftMatrix,
) -> Result<DMatrix<Complex64>> {
    if delay.size() != mask.delay_dft_size {
        return Err(Error::DimensionMismatch(
            "selection mask and delay DFT matrix disagree on size".into(),
        ));
    }
    let inv = delay.inverse();
    let rows = mask.kept_rows();
    let a = DMatrix::from_fn(rows.len(), delay.size(), |r, c| inv[(rows[r], c)]);
    let gram = &a * a.adjoint();
    let scale = 1.0 / delay.size() as f64;
    let eye = DMatrix::<Complex64>::identity(rows.len(), rows.len()) * Complex64::from(scale);
    let err = (&gram - &eye).norm();
    if err > 1e-10 {
        return Err(Error::SolverConsistency(format!(
            "measurement rows not orthogonal: deviation {err}"
        )));
    }
    Ok(a)
}

/// Basis-pursuit solver options.
#[derive(Debug, Clone, Copy)]
pub struct BpOptions {
    /// Convergence tolerance on the splitting gap.
    pub tol_eq: f64,
    pub max_iter: usize,
    /// Splitting penalty (soft-threshold level is its reciprocal).
    pub penalty: f64,
    /// Optional residual level accepted when stopping on the sparse
    /// iterate; `None` keeps the strict equality-constrained behaviour of
    /// returning the projected (exactly feasible) iterate.
    pub max_residual: Option<f64>,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self {
            tol_eq: 1e-6,
            max_iter: 2000,
            penalty: 1.0,
            max_residual: None,
        }
    }
}

/// Result of one basis-pursuit solve.
#[derive(Debug, Clone)]
pub struct BpSolution {
    pub y: DVector<Complex64>,
    /// Complex l1 norm (sum of moduli) of the returned iterate.
    pub objective: f64,
    /// Equality-constraint violation of the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn soft_threshold(v: Complex64, level: f64) -> Complex64 {
    let mag = v.norm();
    if mag <= level {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((mag - level) / mag)
    }
}

fn l1_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|c| c.norm()).sum()
}

/// Minimize the complex l1 norm subject to `A y = b` by operator splitting:
/// alternating exact projection onto the equality constraint with
/// complex soft-thresholding. The returned iterate is the projected one, so
/// it satisfies the constraint to machine precision; `converged` reports
/// whether the splitting gap closed below `tol_eq`.
pub fn basis_pursuit(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    opts: &BpOptions,
) -> Result<BpSolution> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} rows but measurement has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let n = a.ncols();
    let gram = a * a.adjoint();
    let chol = gram.clone().cholesky().ok_or_else(|| {
        Error::SolverConsistency("measurement operator is row-rank-deficient".into())
    })?;

    // Exact Euclidean projection onto {y : A y = b}.
    let project = |v: &DVector<Complex64>| -> DVector<Complex64> {
        let mut resid = a * v - b;
        resid = chol.solve(&resid);
        v - a.adjoint() * resid
    };

    let level = 1.0 / opts.penalty;
    let mut sparse = DVector::<Complex64>::zeros(n);
    let mut dual = DVector::<Complex64>::zeros(n);
    let mut feasible = project(&DVector::zeros(n));
    let scale = 1.0 + b.norm();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter {
        iterations = it;
        feasible = project(&(&sparse - &dual));
        let candidate = &feasible + &dual;
        sparse = candidate.map(|v| soft_threshold(v, level));
        dual += &feasible - &sparse;

        let gap = (&feasible - &sparse).norm();
        if gap <= opts.tol_eq * scale {
            converged = true;
            break;
        }
        if let Some(max_residual) = opts.max_residual {
            if (a * &sparse - b).norm() <= max_residual {
                converged = true;
                break;
            }
        }
    }

    let y = match opts.max_residual {
        // Paper-faithful equality mode: return the exactly feasible iterate.
        None => feasible,
        Some(_) => sparse,
    };
    let residual = (a * &y - b).norm();
    Ok(BpSolution {
        objective: l1_norm(&y),
        residual,
        iterations,
        converged,
        y,
    })
}

/// Greedy sparse recovery by orthogonal matching pursuit: pick the atom most
/// correlated with the residual, then least-squares refit on the support.
#[derive(Debug, Clone)]
pub struct OmpSolution {
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub values: DVector<Complex64>,
    pub residual: f64,
    /// True when selection stopped early on a rank-deficient support.
    pub truncated: bool,
}

pub fn orthogonal_matching_pursuit(
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
    sparsity: usize,
) -> Result<OmpSolution> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(
            "operator and measurement sizes differ".into(),
        ));
    }
    if sparsity > a.nrows() {
        return Err(Error::InvalidDimension(format!(
            "sparsity {sparsity} exceeds measurement count {}",
            a.nrows()
        )));
    }
    let mut support: Vec<usize> = Vec::new();
    let mut values = DVector::<Complex64>::zeros(0);
    let mut residual = b.clone();
    let mut truncated = false;

    while support.len() < sparsity {
        let mut best = (0usize, 0.0f64);
        for j in 0..a.ncols() {
            if support.contains(&j) {
                continue;
            }
            let corr = a.column(j).dotc(&residual).norm();
            if corr > best.1 {
                best = (j, corr);
            }
        }
        if best.1 <= 1e-14 * (1.0 + b.norm()) {
            break; // residual orthogonal to all remaining atoms
        }
        support.push(best.0);

        let sub = DMatrix::from_fn(a.nrows(), support.len(), |r, c| a[(r, support[c])]);
        let normal = sub.adjoint() * &sub;
        let Some(chol) = normal.cholesky() else {
            support.pop();
            truncated = true;
            break;
        };
        values = chol.solve(&(sub.adjoint() * b));
        residual = b - &sub * &values;
    }

    Ok(OmpSolution {
        residual: residual.norm(),
        support,
        values,
        truncated,
    })
}

/// Replace the delay DFT with per-fiber basis pursuit from the selected
/// subcarriers. The input spectra must carry exactly the selected
/// subcarriers; the output cube matches [`crate::sensing::delay_dft`]'s
/// scaling. Returns the cube along with the (spatial, Doppler) indices of
/// fibers whose solve did not converge.
pub fn cs_estimate(
    spectra: &DopplerSpectra,
    mask: &SelectionMask,
    cfg: &SystemConfig,
    opts: &BpOptions,
) -> Result<(ProcessedCube, Vec<(usize, usize)>)> {
    if spectra.subcarriers != mask.selected {
        return Err(Error::DimensionMismatch(
            "spectra subcarriers differ from the selection mask".into(),
        ));
    }
    if mask.subcarrier_count != cfg.subcarrier_count
        || mask.delay_dft_size != cfg.delay_dft_size
    {
        return Err(Error::Config(
            "selection mask does not match the configuration".into(),
        ));
    }
    let delay = DelayDftMatrix::new(cfg.delay_dft_size);
    let a = measurement_operator(mask, &delay)?;
    let (spatial_size, n_sel, doppler_size) = spectra.data.dim();
    let rows = mask.row_count();
    let mut data = Array3::zeros((spatial_size, cfg.delay_dft_size, doppler_size));
    let mut flagged = Vec::new();
    let norm = Complex64::from(1.0 / cfg.subcarrier_count as f64);

    for idx in 0..spatial_size {
        for vdx in 0..doppler_size {
            // Measurements: selected entries of the zero-padded vector, so
            // padding rows contribute exact zeros.
            let mut b = DVector::<Complex64>::zeros(rows);
            for pos in 0..n_sel {
                b[pos] = spectra.data[[idx, pos, vdx]];
            }
            let solution = basis_pursuit(&a, &b, opts)?;
            if !solution.converged {
                flagged.push((idx, vdx));
            }
            for ddx in 0..cfg.delay_dft_size {
                data[[idx, ddx, vdx]] = solution.y[ddx] * norm;
            }
        }
    }
    Ok((
        ProcessedCube {
            data,
            spatial_size,
            delay_size: cfg.delay_dft_size,
            doppler_size,
        },
        flagged,
    ))
}

/// Convenience composition of the sparsity-exploiting chain on an echo cube
/// restricted to the selected subcarriers.
pub fn cs_pipeline(
    cube: &crate::waveform::EchoCube,
    x: &crate::waveform::TransmitGrid,
    mask: &SelectionMask,
    cfg: &SystemConfig,
    opts: &BpOptions,
) -> Result<(ProcessedCube, Vec<(usize, usize)>)> {
    let restricted = cube.restrict(&mask.selected)?;
    let spectra = crate::sensing::spatial_dft(&restricted, cfg.spatial_dft_size)?;
    let removed = crate::sensing::remove_coefficients(&spectra, x, cfg)?;
    let doppler = crate::sensing::doppler_dft(&removed.spectra, cfg.doppler_dft_size)?;
    cs_estimate(&doppler, mask, cfg, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::RngExt;

    fn random_complex(g: &mut impl rand::Rng) -> Complex64 {
        Complex64::new(g.random::<f64>() - 0.5, g.random::<f64>() - 0.5)
    }

    #[test]
    fn full_mask_selects_everything() {
        let mut cfg = SystemConfig::desk();
        cfg.selected_subcarriers = cfg.subcarrier_count;
        let m = SelectionMask::random(&cfg, 1).unwrap();
        assert_eq!(m.selected, (0..cfg.subcarrier_count).collect::<Vec<_>>());
        assert_eq!(m.row_count(), cfg.delay_dft_size);
        assert_eq!(m, SelectionMask::full(&cfg));
    }

    #[test]
    fn single_selection_and_determinism() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 4;
        cfg.delay_dft_size = 4;
        cfg.selected_subcarriers = 1;
        let a = SelectionMask::random(&cfg, 5).unwrap();
        assert_eq!(a.selected.len(), 1);
        assert!(a.selected[0] < 4);
        let b = SelectionMask::random(&cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.flags().iter().filter(|&&f| f).count(), 1);

        cfg.selected_subcarriers = 0;
        assert!(SelectionMask::random(&cfg, 5).is_err());
    }

    #[test]
    fn mask_serialization_lists_indices_and_seed() {
        let cfg = SystemConfig::desk();
        let m = SelectionMask::random(&cfg, 9).unwrap();
        let text = m.to_toml(9);
        assert!(text.contains("seed = 9"));
        for i in &m.selected {
            assert!(text.contains(&i.to_string()));
        }
    }

    #[test]
    fn measurement_rows_are_orthogonal_with_padding() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 6;
        cfg.delay_dft_size = 9;
        cfg.selected_subcarriers = 3;
        let mask = SelectionMask::random(&cfg, 2).unwrap();
        assert_eq!(mask.row_count(), 3 + 3);
        let delay = DelayDftMatrix::new(9);
        let a = measurement_operator(&mask, &delay).unwrap();
        assert_eq!(a.nrows(), 6);
        assert_eq!(a.ncols(), 9);
    }

    #[test]
    fn square_system_recovers_exact_transform() {
        // With every subcarrier selected the constraint is fully determined
        // and the solution is the forward transform of the padded vector.
        let n = 8;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n;
        cfg.delay_dft_size = n;
        cfg.selected_subcarriers = n;
        let mask = SelectionMask::full(&cfg);
        let delay = DelayDftMatrix::new(n);
        let a = measurement_operator(&mask, &delay).unwrap();
        let mut g = rng(3);
        let padded = DVector::from_fn(n, |_, _| random_complex(&mut g));
        let sol = basis_pursuit(&a, &padded, &BpOptions::default()).unwrap();
        let expected = delay.matrix() * &padded;
        assert!((&sol.y - &expected).norm() < 1e-9 * expected.norm());
        assert!(sol.residual < 1e-12 * (1.0 + padded.norm()));
    }

    #[test]
    fn zero_measurement_gives_zero_solution() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 8;
        cfg.delay_dft_size = 8;
        cfg.selected_subcarriers = 4;
        let mask = SelectionMask::random(&cfg, 1).unwrap();
        let a = measurement_operator(&mask, &DelayDftMatrix::new(8)).unwrap();
        let sol = basis_pursuit(&a, &DVector::zeros(4), &BpOptions::default()).unwrap();
        assert_eq!(sol.y.norm(), 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn one_sparse_recovery_from_half_measurements() {
        let n_d = 32;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n_d;
        cfg.delay_dft_size = n_d;
        cfg.selected_subcarriers = 16;
        let delay = DelayDftMatrix::new(n_d);
        let mut g = rng(77);
        for trial in 0..20 {
            let mask = SelectionMask::random(&cfg, 1000 + trial).unwrap();
            let a = measurement_operator(&mask, &delay).unwrap();
            let mut truth = DVector::<Complex64>::zeros(n_d);
            truth[g.random_range(0..n_d)] = random_complex(&mut g) + Complex64::new(1.0, 1.0);
            let b = &a * &truth;
            let sol = basis_pursuit(&a, &b, &BpOptions::default()).unwrap();
            assert!(
                (&sol.y - &truth).norm() <= 1e-4,
                "trial {trial}: error {}",
                (&sol.y - &truth).norm()
            );
        }
    }

    #[test]
    fn objective_never_exceeds_full_transform_value() {
        let n_d = 16;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n_d;
        cfg.delay_dft_size = n_d;
        cfg.selected_subcarriers = 8;
        let delay = DelayDftMatrix::new(n_d);
        let mut g = rng(55);
        for trial in 0..10 {
            let mask = SelectionMask::random(&cfg, 2000 + trial).unwrap();
            let a = measurement_operator(&mask, &delay).unwrap();
            let padded = DVector::from_fn(n_d, |_, _| random_complex(&mut g));
            let full = delay.matrix() * &padded;
            // The full transform is feasible for the partial constraints, so
            // the minimizer's objective can only be lower.
            let mut b = DVector::<Complex64>::zeros(a.nrows());
            for (r, &row) in mask.kept_rows().iter().enumerate() {
                b[r] = if row < n_d { padded[row] } else { Complex64::new(0.0, 0.0) };
            }
            let sol = basis_pursuit(&a, &b, &BpOptions::default()).unwrap();
            assert!(sol.objective <= l1_norm(&full) + 1e-8);
        }
    }

    #[test]
    fn sparse_support_recovery_rate_over_seeded_trials() {
        // 1- and 2-sparse fibers, 16 of 32 rows: support recovered in at
        // least 99% of 200 seeded trials.
        let n_d = 32;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n_d;
        cfg.delay_dft_size = n_d;
        cfg.selected_subcarriers = 16;
        let delay = DelayDftMatrix::new(n_d);
        let mut g = rng(1234);
        let mut ok = 0;
        for trial in 0..200u64 {
            let mask = SelectionMask::random(&cfg, 9000 + trial).unwrap();
            let a = measurement_operator(&mask, &delay).unwrap();
            let sparsity = 1 + (trial % 2) as usize;
            let mut support: Vec<usize> = Vec::new();
            let mut truth = DVector::<Complex64>::zeros(n_d);
            while support.len() < sparsity {
                let idx = g.random_range(0..n_d);
                if !support.contains(&idx) {
                    support.push(idx);
                    truth[idx] = Complex64::from_polar(
                        1.0 + g.random::<f64>(),
                        g.random::<f64>() * std::f64::consts::TAU,
                    );
                }
            }
            support.sort_unstable();
            let b = &a * &truth;
            let sol = basis_pursuit(&a, &b, &BpOptions::default()).unwrap();
            let mut recovered: Vec<usize> = (0..n_d)
                .filter(|&j| sol.y[j].norm() > 0.05)
                .collect();
            recovered.sort_unstable();
            if recovered == support {
                ok += 1;
            }
        }
        assert!(ok >= 198, "support recovered in only {ok}/200 trials");
    }

    #[test]
    fn cs_estimate_with_full_selection_equals_delay_dft() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 8;
        cfg.delay_dft_size = 12;
        cfg.doppler_dft_size = 4;
        cfg.selected_subcarriers = 8;
        let mask = SelectionMask::full(&cfg);
        let mut g = rng(321);
        let spectra = DopplerSpectra {
            data: ndarray::Array3::from_shape_fn((3, 8, 4), |_| random_complex(&mut g)),
            subcarriers: (0..8).collect(),
            spatial_size: 3,
            doppler_size: 4,
        };
        let (cube, flags) =
            cs_estimate(&spectra, &mask, &cfg, &BpOptions::default()).unwrap();
        assert!(flags.is_empty());
        let reference =
            crate::sensing::delay_dft(&spectra, cfg.delay_dft_size, cfg.subcarrier_count)
                .unwrap();
        let mut worst = 0.0f64;
        for (a, b) in cube.data.iter().zip(reference.data.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-6, "cubes diverge by {worst}");
    }

    #[test]
    fn cs_estimate_flags_nonconverged_fibers_but_returns() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 8;
        cfg.delay_dft_size = 8;
        cfg.selected_subcarriers = 3;
        cfg.doppler_dft_size = 2;
        let mask = SelectionMask::random(&cfg, 5).unwrap();
        let mut g = rng(654);
        // Dense fibers with a starved iteration budget: every fiber must
        // still produce output, with its non-convergence flagged.
        let spectra = DopplerSpectra {
            data: ndarray::Array3::from_shape_fn((2, 3, 2), |_| random_complex(&mut g)),
            subcarriers: mask.selected.clone(),
            spatial_size: 2,
            doppler_size: 2,
        };
        let opts = BpOptions {
            max_iter: 2,
            ..BpOptions::default()
        };
        let (cube, flags) = cs_estimate(&spectra, &mask, &cfg, &opts).unwrap();
        assert_eq!(cube.data.dim(), (2, 8, 2));
        assert!(!flags.is_empty());
        assert!(cube.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn omp_recovers_exact_support() {
        let n_d = 32;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n_d;
        cfg.delay_dft_size = n_d;
        cfg.selected_subcarriers = 16;
        let delay = DelayDftMatrix::new(n_d);
        let mut g = rng(91);
        for trial in 0..10 {
            let mask = SelectionMask::random(&cfg, 3000 + trial).unwrap();
            let a = measurement_operator(&mask, &delay).unwrap();
            let mut truth = DVector::<Complex64>::zeros(n_d);
            let s1 = g.random_range(0..n_d / 2);
            let s2 = n_d / 2 + g.random_range(0..n_d / 2);
            truth[s1] = Complex64::new(2.0, -1.0);
            truth[s2] = Complex64::new(-1.5, 2.5);
            let b = &a * &truth;
            let sol = orthogonal_matching_pursuit(&a, &b, 2).unwrap();
            let mut support = sol.support.clone();
            support.sort_unstable();
            assert_eq!(support, vec![s1.min(s2), s1.max(s2)], "trial {trial}");
            assert!(sol.residual < 1e-10);
        }
    }

    #[test]
    fn omp_degenerate_inputs() {
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = 8;
        cfg.delay_dft_size = 8;
        cfg.selected_subcarriers = 4;
        let mask = SelectionMask::random(&cfg, 4).unwrap();
        let a = measurement_operator(&mask, &DelayDftMatrix::new(8)).unwrap();
        let zero = DVector::<Complex64>::zeros(4);
        let sol = orthogonal_matching_pursuit(&a, &zero, 0).unwrap();
        assert!(sol.support.is_empty());
        let sol = orthogonal_matching_pursuit(&a, &zero, 3).unwrap();
        assert!(sol.support.is_empty());
        assert!(orthogonal_matching_pursuit(&a, &zero, 5).is_err());
    }

    #[test]
    fn omp_and_bp_agree_on_one_sparse_instances() {
        let n_d = 32;
        let mut cfg = SystemConfig::desk();
        cfg.subcarrier_count = n_d;
        cfg.delay_dft_size = n_d;
        cfg.selected_subcarriers = 16;
        let delay = DelayDftMatrix::new(n_d);
        let mut g = rng(14);
        for trial in 0..10 {
            let mask = SelectionMask::random(&cfg, 4000 + trial).unwrap();
            let a = measurement_operator(&mask, &delay).unwrap();
            let mut truth = DVector::<Complex64>::zeros(n_d);
            let spike = g.random_range(0..n_d);
            truth[spike] = Complex64::new(3.0, 1.0);
            let b = &a * &truth;
            let bp = basis_pursuit(&a, &b, &BpOptions::default()).unwrap();
            let omp = orthogonal_matching_pursuit(&a, &b, 1).unwrap();
            assert_eq!(omp.support, vec![spike]);
            let bp_peak = (0..n_d)
                .max_by(|&p, &q| bp.y[p].norm().partial_cmp(&bp.y[q].norm()).unwrap())
                .unwrap();
            assert_eq!(bp_peak, spike, "trial {trial}");
        }
    }
}
