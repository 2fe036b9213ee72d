//! Three-stage DFT target estimation: spatial DFT, signal-dependent
//! coefficient removal, Doppler DFT, delay DFT, peak detection, bin
//! inversion, and RMSE scoring.
//!
//! Bin index conventions follow the processing chain: spatial bins run over
//! `[-floor(N_a/2), floor(N_a/2)-1]`, Doppler bins over
//! `[-floor(N_v/2), floor(N_v/2)-1]`, and delay bins over `[-N_d+1, 0]`.
//! Tensors are stored zero-based with explicit offset maps between storage
//! indices and bins.

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use num_complex::Complex64;

use crate::config::{SystemConfig, Target};
use crate::error::{Error, Result};
use crate::physics::{steering_vector, SPEED_OF_LIGHT};
use crate::waveform::{EchoCube, TransmitGrid};

const TAU: f64 = std::f64::consts::TAU;

/// Storage index -> centered bin (`[-floor(n/2), floor(n/2)-1]`).
pub fn centered_bin(index: usize, size: usize) -> i64 {
    index as i64 - (size as i64) / 2
}

/// Centered bin -> storage index.
pub fn centered_index(bin: i64, size: usize) -> usize {
    (bin + (size as i64) / 2) as usize
}

/// Storage index -> delay bin (`[-n+1, 0]`).
pub fn delay_bin(index: usize, size: usize) -> i64 {
    index as i64 - (size as i64 - 1)
}

/// Delay bin -> storage index.
pub fn delay_index(bin: i64, size: usize) -> usize {
    (bin + size as i64 - 1) as usize
}

/// Per-(subcarrier, slot) spatial spectra.
#[derive(Debug, Clone)]
pub struct SpatialSpectra {
    /// Shape `(spatial bins, carried subcarriers, slots)`.
    pub data: Array3<Complex64>,
    /// Original subcarrier index of each slice along axis 1.
    pub subcarriers: Vec<usize>,
    pub spatial_size: usize,
}

/// Spatial DFT of the echo cube, normalized by the receive antenna count.
pub fn spatial_dft(cube: &EchoCube, spatial_size: usize) -> Result<SpatialSpectra> {
    let (n_r, n_sub, slots) = cube.data.dim();
    if spatial_size < n_r {
        return Err(Error::Config(format!(
            "spatial DFT size {spatial_size} below receive antenna count {n_r}"
        )));
    }
    let mut data = Array3::zeros((spatial_size, n_sub, slots));
    for idx in 0..spatial_size {
        let bin = centered_bin(idx, spatial_size) as f64;
        let twiddle: Vec<Complex64> = (0..n_r)
            .map(|m| Complex64::from_polar(1.0, -(m as f64) * TAU * bin / spatial_size as f64))
            .collect();
        for i in 0..n_sub {
            for l in 0..slots {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..n_r {
                    acc += cube.data[[m, i, l]] * twiddle[m];
                }
                data[[idx, i, l]] = acc / n_r as f64;
            }
        }
    }
    Ok(SpatialSpectra {
        data,
        subcarriers: cube.subcarriers.clone(),
        spatial_size,
    })
}

/// Output of the signal-dependent coefficient removal.
#[derive(Debug, Clone)]
pub struct CoefficientRemoval {
    pub spectra: SpatialSpectra,
    /// Energy-preserving scale factor per spatial bin.
    pub scale: Vec<f64>,
    /// `(spatial index, subcarrier position, slot)` entries whose divisor
    /// fell below the guard and were zeroed instead of divided.
    pub flagged: Vec<(usize, usize, usize)>,
}

/// Remove the transmit-signal-dependent coefficients by element-wise
/// division, with an energy-preserving per-bin scale. Divisors below
/// `1e-9 x mean divisor magnitude` are flagged and excluded.
pub fn remove_coefficients(
    spectra: &SpatialSpectra,
    x: &TransmitGrid,
    cfg: &SystemConfig,
) -> Result<CoefficientRemoval> {
    let (spatial_size, n_sub, slots) = spectra.data.dim();
    let mut data = Array3::zeros((spatial_size, n_sub, slots));
    let mut scale = vec![1.0; spatial_size];
    let mut flagged = Vec::new();

    for idx in 0..spatial_size {
        let bin = centered_bin(idx, spatial_size) as f64;
        let omega = -cfg.tx_spacing_m * bin * TAU / (cfg.rx_spacing_m * spatial_size as f64);
        let probe = steering_vector(omega, cfg.tx_antennas)?;

        let mut divisors = Array3::zeros((1, n_sub, slots));
        let mut mean_mag = 0.0;
        for (pos, &i) in spectra.subcarriers.iter().enumerate() {
            for l in 0..slots {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..cfg.tx_antennas {
                    acc += probe[m].conj() * x.data[[i, l, m]];
                }
                divisors[[0, pos, l]] = acc;
                mean_mag += acc.norm();
            }
        }
        mean_mag /= (n_sub * slots) as f64;
        let guard = 1e-9 * mean_mag;

        let mut num = 0.0;
        let mut den = 0.0;
        for pos in 0..n_sub {
            for l in 0..slots {
                let d: Complex64 = divisors[[0, pos, l]];
                if d.norm() < guard || d.norm() == 0.0 {
                    flagged.push((idx, pos, l));
                    continue;
                }
                let y = spectra.data[[idx, pos, l]];
                num += (y / d).norm_sqr();
                den += y.norm_sqr();
            }
        }
        // 0/0 for an all-zero bin is defined as 1.
        let alpha = if den > 0.0 { (num / den).sqrt() } else { 1.0 };
        scale[idx] = alpha;

        for pos in 0..n_sub {
            for l in 0..slots {
                let d = divisors[[0, pos, l]];
                if d.norm() < guard || d.norm() == 0.0 {
                    continue; // stays zero, never divide
                }
                data[[idx, pos, l]] = spectra.data[[idx, pos, l]] / (alpha * d);
            }
        }
    }

    Ok(CoefficientRemoval {
        spectra: SpatialSpectra {
            data,
            subcarriers: spectra.subcarriers.clone(),
            spatial_size,
        },
        scale,
        flagged,
    })
}

/// Per-subcarrier (spatial, Doppler) spectra.
#[derive(Debug, Clone)]
pub struct DopplerSpectra {
    /// Shape `(spatial bins, carried subcarriers, Doppler bins)`.
    pub data: Array3<Complex64>,
    pub subcarriers: Vec<usize>,
    pub spatial_size: usize,
    pub doppler_size: usize,
}

/// Doppler DFT along the slot dimension, normalized by the CPI length.
pub fn doppler_dft(spectra: &SpatialSpectra, doppler_size: usize) -> Result<DopplerSpectra> {
    let (spatial_size, n_sub, slots) = spectra.data.dim();
    if doppler_size < slots {
        return Err(Error::Config(format!(
            "Doppler DFT size {doppler_size} below CPI length {slots}"
        )));
    }
    let mut data = Array3::zeros((spatial_size, n_sub, doppler_size));
    for vdx in 0..doppler_size {
        let bin = centered_bin(vdx, doppler_size) as f64;
        let twiddle: Vec<Complex64> = (0..slots)
            .map(|l| Complex64::from_polar(1.0, -(l as f64) * TAU * bin / doppler_size as f64))
            .collect();
        for idx in 0..spatial_size {
            for pos in 0..n_sub {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..slots {
                    acc += spectra.data[[idx, pos, l]] * twiddle[l];
                }
                data[[idx, pos, vdx]] = acc / slots as f64;
            }
        }
    }
    Ok(DopplerSpectra {
        data,
        subcarriers: spectra.subcarriers.clone(),
        spatial_size,
        doppler_size,
    })
}

/// Delay-dimension DFT matrix with rows indexed by delay bin `-N_d+1..0`.
#[derive(Debug, Clone)]
pub struct DelayDftMatrix {
    matrix: DMatrix<Complex64>,
    size: usize,
}

impl DelayDftMatrix {
    /// Build the matrix and assert its rows are orthogonal with squared norm
    /// `N_d` (so the inverse is the scaled conjugate transpose).
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "delay DFT size must be positive");
        let n = size as f64;
        let matrix = DMatrix::from_fn(size, size, |r, c| {
            // 1-based (m, n) element: exp(-j (n-1) (m - N_d) 2 pi / N_d)
            let m = (r + 1) as f64;
            Complex64::from_polar(1.0, -(c as f64) * (m - n) * TAU / n)
        });
        let gram = &matrix * matrix.adjoint();
        let eye = DMatrix::<Complex64>::identity(size, size) * Complex64::from(n);
        let err = (&gram - &eye).norm();
        assert!(
            err <= 1e-10 * n,
            "delay DFT rows lost orthogonality: deviation {err}"
        );
        Self { matrix, size }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Exact inverse `F^H / N_d`.
    pub fn inverse(&self) -> DMatrix<Complex64> {
        self.matrix.adjoint() / Complex64::from(self.size as f64)
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Fully processed (spatial, delay, Doppler) cube.
#[derive(Debug, Clone)]
pub struct ProcessedCube {
    /// Shape `(spatial bins, delay bins, Doppler bins)`.
    pub data: Array3<Complex64>,
    pub spatial_size: usize,
    pub delay_size: usize,
    pub doppler_size: usize,
}

impl ProcessedCube {
    pub fn spatial_bin(&self, index: usize) -> i64 {
        centered_bin(index, self.spatial_size)
    }
    pub fn delay_bin(&self, index: usize) -> i64 {
        delay_bin(index, self.delay_size)
    }
    pub fn doppler_bin(&self, index: usize) -> i64 {
        centered_bin(index, self.doppler_size)
    }
    pub fn spatial_index(&self, bin: i64) -> usize {
        centered_index(bin, self.spatial_size)
    }
    pub fn delay_index(&self, bin: i64) -> usize {
        delay_index(bin, self.delay_size)
    }
    pub fn doppler_index(&self, bin: i64) -> usize {
        centered_index(bin, self.doppler_size)
    }
}

fn delay_stage_guard(spectra: &DopplerSpectra, delay_size: usize, n_s: usize) -> Result<()> {
    if delay_size < n_s {
        return Err(Error::Config(format!(
            "delay DFT size {delay_size} below subcarrier count {n_s}"
        )));
    }
    if spectra.subcarriers.iter().any(|&i| i >= n_s) {
        return Err(Error::DimensionMismatch(
            "carried subcarrier index beyond the configured count".into(),
        ));
    }
    Ok(())
}

/// Delay DFT in compact matrix form: each (spatial, Doppler) fiber is the
/// zero-padded per-subcarrier vector multiplied by the delay DFT matrix,
/// scaled by `1/N_s`.
pub fn delay_dft(spectra: &DopplerSpectra, delay_size: usize, n_s: usize) -> Result<ProcessedCube> {
    delay_stage_guard(spectra, delay_size, n_s)?;
    let f = DelayDftMatrix::new(delay_size);
    let (spatial_size, _n_sub, doppler_size) = spectra.data.dim();
    let mut data = Array3::zeros((spatial_size, delay_size, doppler_size));
    let norm = Complex64::from(1.0 / n_s as f64);
    for idx in 0..spatial_size {
        for vdx in 0..doppler_size {
            let mut padded = DVector::<Complex64>::zeros(delay_size);
            for (pos, &i) in spectra.subcarriers.iter().enumerate() {
                padded[i] = spectra.data[[idx, pos, vdx]];
            }
            let fiber = f.matrix() * padded * norm;
            for ddx in 0..delay_size {
                data[[idx, ddx, vdx]] = fiber[ddx];
            }
        }
    }
    Ok(ProcessedCube {
        data,
        spatial_size,
        delay_size,
        doppler_size,
    })
}

/// Delay DFT by direct summation over subcarriers (the definitional form).
/// Must agree with [`delay_dft`] to 1e-10.
pub fn delay_dft_sum(
    spectra: &DopplerSpectra,
    delay_size: usize,
    n_s: usize,
) -> Result<ProcessedCube> {
    delay_stage_guard(spectra, delay_size, n_s)?;
    let (spatial_size, _n_sub, doppler_size) = spectra.data.dim();
    let mut data = Array3::zeros((spatial_size, delay_size, doppler_size));
    for ddx in 0..delay_size {
        let bin = delay_bin(ddx, delay_size) as f64;
        for idx in 0..spatial_size {
            for vdx in 0..doppler_size {
                let mut acc = Complex64::new(0.0, 0.0);
                for (pos, &i) in spectra.subcarriers.iter().enumerate() {
                    acc += spectra.data[[idx, pos, vdx]]
                        * Complex64::from_polar(1.0, -(i as f64) * TAU * bin / delay_size as f64);
                }
                data[[idx, ddx, vdx]] = acc / n_s as f64;
            }
        }
    }
    Ok(ProcessedCube {
        data,
        spatial_size,
        delay_size,
        doppler_size,
    })
}

/// One detected target hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub angle_rad: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub magnitude: f64,
    /// `(spatial, delay, Doppler)` bins the estimate was inverted from.
    pub bins: (i64, i64, i64),
}

/// Detected peaks, sorted by descending magnitude.
#[derive(Debug, Clone, Default)]
pub struct EstimationResult {
    pub peaks: Vec<PeakEstimate>,
}

impl std::fmt::Display for EstimationResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "angle_rad\trange_m\tvelocity_mps\tmagnitude")?;
        for p in &self.peaks {
            writeln!(
                f,
                "{}\t{}\t{}\t{}",
                p.angle_rad, p.range_m, p.velocity_mps, p.magnitude
            )?;
        }
        Ok(())
    }
}

/// Find local maxima of the cube magnitude (26-neighbor rule), keep those at
/// least `min_rel_peak` of the global maximum, and invert bins to
/// (angle, range, velocity). Bins whose implied `|sin(angle)|` exceeds one
/// are discarded as aliased.
pub fn detect_and_invert(
    cube: &ProcessedCube,
    cfg: &SystemConfig,
    max_targets: usize,
    min_rel_peak: f64,
) -> EstimationResult {
    let (na, nd, nv) = cube.data.dim();
    let mag = |a: usize, d: usize, v: usize| cube.data[[a, d, v]].norm();

    let mut global_max = 0.0f64;
    for v in cube.data.iter() {
        global_max = global_max.max(v.norm());
    }
    if global_max <= 0.0 || max_targets == 0 {
        return EstimationResult::default();
    }
    let floor = min_rel_peak * global_max;

    let mut candidates: Vec<(f64, usize, usize, usize)> = Vec::new();
    for a in 0..na {
        for d in 0..nd {
            for v in 0..nv {
                let val = mag(a, d, v);
                if val < floor {
                    continue;
                }
                let mut is_peak = true;
                'scan: for da in -1i64..=1 {
                    for dd in -1i64..=1 {
                        for dv in -1i64..=1 {
                            if da == 0 && dd == 0 && dv == 0 {
                                continue;
                            }
                            let (aa, dd2, vv) =
                                (a as i64 + da, d as i64 + dd, v as i64 + dv);
                            if aa < 0
                                || dd2 < 0
                                || vv < 0
                                || aa >= na as i64
                                || dd2 >= nd as i64
                                || vv >= nv as i64
                            {
                                continue;
                            }
                            if mag(aa as usize, dd2 as usize, vv as usize) > val {
                                is_peak = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if is_peak {
                    candidates.push((val, a, d, v));
                }
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((x.1, x.2, x.3).cmp(&(y.1, y.2, y.3)))
    });

    let c = SPEED_OF_LIGHT;
    let mut peaks = Vec::new();
    for (val, a, d, v) in candidates {
        if peaks.len() >= max_targets {
            break;
        }
        let (ba, bd, bv) = (
            cube.spatial_bin(a),
            cube.delay_bin(d),
            cube.doppler_bin(v),
        );
        let sin_theta = -(ba as f64) * c
            / (cube.spatial_size as f64 * cfg.rx_spacing_m * cfg.carrier_freq_hz);
        if sin_theta.abs() > 1.0 {
            continue; // aliased spatial bin
        }
        let range = -(bd as f64) / cube.delay_size as f64 * c
            / (2.0 * cfg.subcarrier_spacing_hz);
        let velocity = (bv as f64) / cube.doppler_size as f64 * c
            / (2.0 * cfg.total_symbol_duration_s * cfg.carrier_freq_hz);
        peaks.push(PeakEstimate {
            angle_rad: sin_theta.asin(),
            range_m: range,
            velocity_mps: velocity,
            magnitude: val,
            bins: (ba, bd, bv),
        });
    }
    EstimationResult { peaks }
}

/// Convenience composition of the full DFT chain on an echo cube.
pub fn dft_pipeline(
    cube: &EchoCube,
    x: &TransmitGrid,
    cfg: &SystemConfig,
) -> Result<ProcessedCube> {
    let spectra = spatial_dft(cube, cfg.spatial_dft_size)?;
    let removed = remove_coefficients(&spectra, x, cfg)?;
    let doppler = doppler_dft(&removed.spectra, cfg.doppler_dft_size)?;
    delay_dft(&doppler, cfg.delay_dft_size, cfg.subcarrier_count)
}

/// Per-dimension RMSE of matched estimate/truth pairs, with unmatched truths
/// counted separately as misses (never folded into the error).
#[derive(Debug, Clone, Copy)]
pub struct RmseReport {
    pub theta_rad: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
    pub matched: usize,
    pub missed: usize,
}

/// Nearest-neighbor assignment in a parameter space normalized by the
/// configured scene extents, then per-dimension RMSE over assigned pairs.
pub fn rmse(estimates: &[PeakEstimate], truth: &[Target], cfg: &SystemConfig) -> RmseReport {
    if estimates.is_empty() || truth.is_empty() {
        return RmseReport {
            theta_rad: f64::NAN,
            range_m: f64::NAN,
            velocity_mps: f64::NAN,
            matched: 0,
            missed: truth.len(),
        };
    }
    let s_theta = (cfg.angle_max_rad - cfg.angle_min_rad).max(1e-12);
    let s_range = (cfg.max_range_m - cfg.ref_distance_m).max(1e-12);
    let s_vel = (2.0 * cfg.scene_velocity_max_mps).max(1e-12);

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (e, est) in estimates.iter().enumerate() {
        for (t, tr) in truth.iter().enumerate() {
            let d = ((est.angle_rad - tr.angle_rad) / s_theta).powi(2)
                + ((est.range_m - tr.range_m) / s_range).powi(2)
                + ((est.velocity_mps - tr.velocity_mps) / s_vel).powi(2);
            pairs.push((d, e, t));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((a.1, a.2).cmp(&(b.1, b.2)))
    });

    let mut used_e = vec![false; estimates.len()];
    let mut used_t = vec![false; truth.len()];
    let mut sq = [0.0f64; 3];
    let mut matched = 0usize;
    for (_, e, t) in pairs {
        if used_e[e] || used_t[t] {
            continue;
        }
        used_e[e] = true;
        used_t[t] = true;
        matched += 1;
        sq[0] += (estimates[e].angle_rad - truth[t].angle_rad).powi(2);
        sq[1] += (estimates[e].range_m - truth[t].range_m).powi(2);
        sq[2] += (estimates[e].velocity_mps - truth[t].velocity_mps).powi(2);
        if matched == estimates.len().min(truth.len()) {
            break;
        }
    }
    let n = matched as f64;
    RmseReport {
        theta_rad: (sq[0] / n).sqrt(),
        range_m: (sq[1] / n).sqrt(),
        velocity_mps: (sq[2] / n).sqrt(),
        matched,
        missed: truth.len() - matched,
    }
}
