//! Communication symbols, precoding, multipath channels, echo synthesis,
//! and the sum-rate metric.
//!
//! Everything here is frequency-domain: a symbol vector per (subcarrier,
//! slot), a channel vector per (subcarrier, user), and a complex echo cube
//! indexed by (receive antenna, subcarrier, slot).

use nalgebra::{DMatrix, DVector};
use ndarray::Array3;
use num_complex::Complex64;
use rand::RngExt;
use rand_distr::{Distribution, Normal, Uniform};

use crate::config::{SystemConfig, TargetScene};
use crate::error::{Error, Result};
use crate::physics::{digital_frequencies, path_loss, steering_vector, SPEED_OF_LIGHT};
use crate::rng::{derive_seed, rng};

/// Square QAM constellation normalized to unit average power, in Gray-coded
/// point order.
#[derive(Debug, Clone)]
pub struct QamConstellation {
    points: Vec<Complex64>,
    order: usize,
}

impl QamConstellation {
    pub fn new(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if side * side != order || !order.is_power_of_two() || order < 4 {
            return Err(Error::Config(format!(
                "unsupported QAM order {order}; need a perfect-square power of two"
            )));
        }
        // Unit average power: amplitudes are odd integers scaled by
        // sqrt(3 / (2 (order - 1))).
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let axis = |g: usize| (2.0 * g as f64 - (side as f64 - 1.0)) * scale;
        let gray = |v: usize| v ^ (v >> 1);
        let bits = side.trailing_zeros();
        let mut points = Vec::with_capacity(order);
        for idx in 0..order {
            let (hi, lo) = (idx >> bits, idx & (side - 1));
            points.push(Complex64::new(axis(gray(hi)), axis(gray(lo))));
        }
        Ok(Self { points, order })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Unit-power QAM symbols for every (subcarrier, slot, user).
#[derive(Debug, Clone)]
pub struct SymbolTensor {
    /// Shape `(subcarriers, slots, users)`.
    pub data: Array3<Complex64>,
}

impl SymbolTensor {
    /// Symbol vector of one (subcarrier, slot).
    pub fn slot(&self, subcarrier: usize, slot: usize) -> DVector<Complex64> {
        let users = self.data.dim().2;
        DVector::from_fn(users, |k, _| self.data[[subcarrier, slot, k]])
    }
}

/// Draw i.i.d. QAM symbols for a whole CPI. Deterministic under `seed`.
pub fn generate_symbols(cfg: &SystemConfig, seed: u64) -> Result<SymbolTensor> {
    let constellation = QamConstellation::new(cfg.qam_order)?;
    let mut g = rng(seed);
    let mut data = Array3::zeros((cfg.subcarrier_count, cfg.symbols_per_cpi, cfg.user_count));
    for v in data.iter_mut() {
        *v = constellation.points()[g.random_range(0..cfg.qam_order)];
    }
    Ok(SymbolTensor { data })
}

/// Per-subcarrier precoding matrices (transmit antennas x users).
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub per_subcarrier: Vec<DMatrix<Complex64>>,
}

impl PrecoderSet {
    /// Sum of squared Frobenius norms over all subcarriers.
    pub fn total_power(&self) -> f64 {
        self.per_subcarrier.iter().map(|w| w.norm_squared()).sum()
    }

    /// Power feasibility with the standard relative slack.
    pub fn within_power_budget(&self, budget_w: f64) -> bool {
        self.total_power() <= budget_w * (1.0 + 1e-6)
    }
}

/// Apply one precoder to one symbol vector: `x = W s`.
pub fn precode(w: &DMatrix<Complex64>, s: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if w.ncols() != s.len() {
        return Err(Error::DimensionMismatch(format!(
            "precoder has {} columns but symbol vector has {} entries",
            w.ncols(),
            s.len()
        )));
    }
    Ok(w * s)
}

/// Transmitted antenna-domain symbols for every (subcarrier, slot).
#[derive(Debug, Clone)]
pub struct TransmitGrid {
    /// Shape `(subcarriers, slots, tx antennas)`.
    pub data: Array3<Complex64>,
}

impl TransmitGrid {
    pub fn slot(&self, subcarrier: usize, slot: usize) -> DVector<Complex64> {
        let n_t = self.data.dim().2;
        DVector::from_fn(n_t, |m, _| self.data[[subcarrier, slot, m]])
    }
}

/// Precode every symbol vector of a CPI.
pub fn transmit_grid(w: &PrecoderSet, s: &SymbolTensor) -> Result<TransmitGrid> {
    let (n_s, slots, _users) = s.data.dim();
    if w.per_subcarrier.len() != n_s {
        return Err(Error::DimensionMismatch(format!(
            "{} precoders for {} subcarriers",
            w.per_subcarrier.len(),
            n_s
        )));
    }
    let n_t = w.per_subcarrier[0].nrows();
    let mut data = Array3::zeros((n_s, slots, n_t));
    for i in 0..n_s {
        for l in 0..slots {
            let x = precode(&w.per_subcarrier[i], &s.slot(i, l))?;
            for m in 0..n_t {
                data[[i, l, m]] = x[m];
            }
        }
    }
    Ok(TransmitGrid { data })
}

/// One propagation path from the base station to a user.
#[derive(Debug, Clone, Copy)]
pub struct UserPath {
    pub gain: Complex64,
    pub range_m: f64,
    pub angle_rad: f64,
}

/// Draw metadata for one user's channel.
#[derive(Debug, Clone)]
pub struct UserChannelMeta {
    pub los: UserPath,
    pub scatterers: Vec<UserPath>,
}

/// Frequency-domain downlink channels for every (subcarrier, user).
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Per subcarrier: matrix whose k-th column is the user-k channel.
    pub gains: Vec<DMatrix<Complex64>>,
    pub users: Vec<UserChannelMeta>,
}

impl ChannelSet {
    pub fn user_channel(&self, subcarrier: usize, user: usize) -> DVector<Complex64> {
        self.gains[subcarrier].column(user).into_owned()
    }
}

/// Number of scattering paths per user in the random channel model.
pub const SCATTER_PATHS: usize = 5;
const RANK_RETRIES: usize = 100;

fn build_user_channel(
    meta: &UserChannelMeta,
    cfg: &SystemConfig,
) -> Result<Vec<DVector<Complex64>>> {
    let mut per_subcarrier = Vec::with_capacity(cfg.subcarrier_count);
    for i in 0..cfg.subcarrier_count {
        let freq = cfg.carrier_freq_hz + i as f64 * cfg.subcarrier_spacing_hz;
        let phase =
            |angle: f64| std::f64::consts::TAU * cfg.tx_spacing_m * angle.sin() * freq
                / SPEED_OF_LIGHT;
        let mut h = steering_vector(phase(meta.los.angle_rad), cfg.tx_antennas)?
            * (meta.los.gain * path_loss(meta.los.range_m, cfg)?.sqrt());
        for path in &meta.scatterers {
            h += steering_vector(phase(path.angle_rad), cfg.tx_antennas)?
                * (path.gain * path_loss(path.range_m, cfg)?.sqrt());
        }
        per_subcarrier.push(h);
    }
    Ok(per_subcarrier)
}

fn has_full_column_rank(h: &DMatrix<Complex64>) -> bool {
    let svd = h.clone().svd(false, false);
    let max = svd.singular_values.max();
    if max <= 0.0 {
        return false;
    }
    let min = svd.singular_values.min();
    min > 1e-9 * max
}

/// Draw the multipath downlink channel: one line-of-sight path plus
/// [`SCATTER_PATHS`] scattering paths per user, with the channel matrix of
/// every subcarrier required to have full column rank (scatterers are
/// redrawn on failure).
pub fn generate_channel(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    let mut g = rng(seed);
    let range_law = Uniform::new(50.0f64, 100.0).expect("range law");
    let angle_law = Uniform::new(-90.0f64.to_radians(), 90.0f64.to_radians()).expect("angle law");
    // Scatterer gains: complex normal with mean 0.1 and variance 0.01.
    let component = Normal::new(0.0f64, (0.01f64 / 2.0).sqrt()).expect("gain law");

    let los: Vec<UserPath> = (0..cfg.user_count)
        .map(|_| UserPath {
            gain: Complex64::new(1.0, 0.0),
            range_m: range_law.sample(&mut g),
            angle_rad: angle_law.sample(&mut g),
        })
        .collect();

    for attempt in 0..RANK_RETRIES {
        let users: Vec<UserChannelMeta> = los
            .iter()
            .map(|l| UserChannelMeta {
                los: *l,
                scatterers: (0..SCATTER_PATHS)
                    .map(|_| UserPath {
                        gain: Complex64::new(0.1, 0.0)
                            + Complex64::new(component.sample(&mut g), component.sample(&mut g)),
                        range_m: l.range_m + g.random_range(-15.0..15.0),
                        angle_rad: l.angle_rad
                            + g.random_range(-10.0f64.to_radians()..10.0f64.to_radians()),
                    })
                    .collect(),
            })
            .collect();

        let per_user: Vec<Vec<DVector<Complex64>>> = users
            .iter()
            .map(|u| build_user_channel(u, cfg))
            .collect::<Result<_>>()?;

        let mut gains = Vec::with_capacity(cfg.subcarrier_count);
        let mut ok = true;
        for i in 0..cfg.subcarrier_count {
            let h = DMatrix::from_fn(cfg.tx_antennas, cfg.user_count, |r, k| per_user[k][i][r]);
            if !has_full_column_rank(&h) {
                ok = false;
                break;
            }
            gains.push(h);
        }
        if ok {
            return Ok(ChannelSet { gains, users });
        }
        let _ = attempt;
    }
    Err(Error::Generation(format!(
        "channel rank requirement not met after {RANK_RETRIES} scatterer redraws"
    )))
}

/// Multiuser downlink sum-rate in bits per channel use (base-2 logarithm),
/// totaled over subcarriers and users.
pub fn sum_rate(h: &ChannelSet, w: &PrecoderSet, comm_noise_power_w: f64) -> f64 {
    let mut total = 0.0;
    for (hi, wi) in h.gains.iter().zip(&w.per_subcarrier) {
        let k_users = hi.ncols();
        // gains[k][j] = |h_k^H w_j|^2
        for k in 0..k_users {
            let hk = hi.column(k);
            let mut signal = 0.0;
            let mut interference = 0.0;
            for j in 0..wi.ncols() {
                let g = hk.dotc(&wi.column(j)).norm_sqr();
                if j == k {
                    signal = g;
                } else {
                    interference += g;
                }
            }
            total += (1.0 + signal / (interference + comm_noise_power_w)).log2();
        }
    }
    total
}

/// Received echoes for every (receive antenna, subcarrier, slot).
#[derive(Debug, Clone)]
pub struct EchoCube {
    /// Shape `(rx antennas, carried subcarriers, slots)`.
    pub data: Array3<Complex64>,
    /// Original subcarrier index of each slice along axis 1.
    pub subcarriers: Vec<usize>,
}

impl EchoCube {
    /// Restrict the cube to a subset of its subcarriers (given as original
    /// subcarrier indices, strictly increasing).
    pub fn restrict(&self, keep: &[usize]) -> Result<EchoCube> {
        let (n_r, _, slots) = self.data.dim();
        let mut data = Array3::zeros((n_r, keep.len(), slots));
        for (slot_idx, &i) in keep.iter().enumerate() {
            let pos = self
                .subcarriers
                .iter()
                .position(|&s| s == i)
                .ok_or_else(|| {
                    Error::DimensionMismatch(format!("subcarrier {i} not present in cube"))
                })?;
            for m in 0..n_r {
                for l in 0..slots {
                    data[[m, slot_idx, l]] = self.data[[m, pos, l]];
                }
            }
        }
        Ok(EchoCube {
            data,
            subcarriers: keep.to_vec(),
        })
    }
}

/// Synthesize the frequency-domain echo cube of a target scene under the
/// given precoders and symbols. With `noiseless` false, white complex
/// Gaussian noise of the configured sensing power is added.
pub fn generate_echo(
    scene: &TargetScene,
    w: &PrecoderSet,
    symbols: &SymbolTensor,
    cfg: &SystemConfig,
    seed: u64,
    noiseless: bool,
) -> Result<EchoCube> {
    scene.validate(cfg)?;
    if w.per_subcarrier.is_empty() || symbols.data.is_empty() {
        return Err(Error::DimensionMismatch(
            "echo synthesis needs non-empty precoders and symbols".into(),
        ));
    }
    let x = transmit_grid(w, symbols)?;
    let (n_s, slots, _) = x.data.dim();
    if n_s != cfg.subcarrier_count || slots != cfg.symbols_per_cpi {
        return Err(Error::DimensionMismatch(
            "transmit grid does not match the configuration".into(),
        ));
    }
    let n_r = cfg.rx_antennas;
    let mut data: Array3<Complex64> = Array3::zeros((n_r, n_s, slots));

    for t in &scene.targets {
        let f = digital_frequencies(t.angle_rad, t.range_m, t.velocity_mps, cfg);
        let amp = t.reflection * path_loss(2.0 * t.range_m, cfg)?.sqrt();
        let a_tx = steering_vector(f.transmit, cfg.tx_antennas)?;
        let rx_phase: Vec<Complex64> = (0..n_r)
            .map(|m| Complex64::from_polar(1.0, m as f64 * f.receive))
            .collect();
        let sc_phase: Vec<Complex64> = (0..n_s)
            .map(|i| Complex64::from_polar(1.0, i as f64 * f.range))
            .collect();
        let slot_phase: Vec<Complex64> = (0..slots)
            .map(|l| Complex64::from_polar(1.0, l as f64 * f.velocity))
            .collect();
        for i in 0..n_s {
            for l in 0..slots {
                // a(w_t)^H x_i[l]
                let mut s_factor = Complex64::new(0.0, 0.0);
                for m in 0..cfg.tx_antennas {
                    s_factor += a_tx[m].conj() * x.data[[i, l, m]];
                }
                let base = amp * s_factor * sc_phase[i] * slot_phase[l];
                for m in 0..n_r {
                    data[[m, i, l]] += base * rx_phase[m];
                }
            }
        }
    }

    if !noiseless {
        let mut g = rng(derive_seed(seed, "echo-noise"));
        let sigma = (cfg.sensing_noise_power_w / 2.0).sqrt();
        let law = Normal::new(0.0, sigma).expect("noise law");
        for v in data.iter_mut() {
            *v += Complex64::new(law.sample(&mut g), law.sample(&mut g));
        }
    }

    Ok(EchoCube {
        data,
        subcarriers: (0..n_s).collect(),
    })
}
