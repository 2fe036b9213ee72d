//! Cross-module integration: config files vs built-in profiles, tensor
//! fixtures, and full synthesis -> estimation chains.

use num_complex::Complex64;
use rand::RngExt;

use isac_core::config::{SystemConfig, Target, TargetScene};
use isac_core::physics::SPEED_OF_LIGHT;
use isac_core::rng::{derive_seed, rng};
use isac_core::sensing::{detect_and_invert, dft_pipeline, rmse};
use isac_core::tensorio::TensorFile;
use isac_core::waveform::{
    generate_channel, generate_echo, generate_symbols, transmit_grid, PrecoderSet,
};

fn random_precoders(cfg: &SystemConfig, seed: u64) -> PrecoderSet {
    let mut g = rng(seed);
    PrecoderSet {
        per_subcarrier: (0..cfg.subcarrier_count)
            .map(|_| {
                nalgebra::DMatrix::from_fn(cfg.tx_antennas, cfg.user_count, |_, _| {
                    Complex64::new(g.random::<f64>() - 0.5, g.random::<f64>() - 0.5)
                })
            })
            .collect(),
    }
}

#[test]
fn config_files_match_builtin_profiles() {
    let desk = SystemConfig::from_file(std::path::Path::new("../../configs/desk.toml")).unwrap();
    assert_eq!(desk, SystemConfig::desk());
    let paper = SystemConfig::from_file(std::path::Path::new("../../configs/paper.toml")).unwrap();
    assert_eq!(paper, SystemConfig::paper());
}

#[test]
fn echo_cube_round_trips_through_tensor_container() {
    let cfg = SystemConfig::desk();
    let w = random_precoders(&cfg, 1);
    let s = generate_symbols(&cfg, 2).unwrap();
    let scene = TargetScene::new(vec![Target {
        angle_rad: 0.05,
        range_m: 42.0,
        velocity_mps: -6.0,
        reflection: Complex64::new(0.9, 0.1),
    }]);
    let cube = generate_echo(&scene, &w, &s, &cfg, 3, false).unwrap();
    let t = TensorFile::from_array3(
        &cube.data,
        vec![
            ("seed".into(), "3".into()),
            ("config_hash".into(), cfg.hash()),
        ],
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("echo.tns");
    t.write(&path).unwrap();
    let back = TensorFile::read(&path).unwrap();
    assert_eq!(back.meta("config_hash"), Some(cfg.hash().as_str()));
    let arr = back.to_array3().unwrap();
    assert_eq!(arr, cube.data);

    // Processed cubes travel in the same container.
    let x = transmit_grid(&w, &s).unwrap();
    let processed = dft_pipeline(&cube, &x, &cfg).unwrap();
    let pt = TensorFile::from_array3(&processed.data, vec![("seed".into(), "3".into())]);
    let ppath = dir.path().join("processed.tns");
    pt.write(&ppath).unwrap();
    assert_eq!(
        TensorFile::read(&ppath).unwrap().to_array3().unwrap(),
        processed.data
    );
}

#[test]
fn channel_set_round_trips_through_tensor_container() {
    let cfg = SystemConfig::desk();
    let h = generate_channel(&cfg, 9).unwrap();
    let mut gains = ndarray::Array3::zeros((cfg.subcarrier_count, cfg.user_count, cfg.tx_antennas));
    for i in 0..cfg.subcarrier_count {
        for k in 0..cfg.user_count {
            for m in 0..cfg.tx_antennas {
                gains[[i, k, m]] = h.gains[i][(m, k)];
            }
        }
    }
    let t = TensorFile::from_array3(&gains, vec![("seed".into(), "9".into())]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("channel.tns");
    t.write(&path).unwrap();
    assert_eq!(TensorFile::read(&path).unwrap().to_array3().unwrap(), gains);
}

#[test]
fn noisy_chain_recovers_mid_scene_target_within_a_bin() {
    let cfg = SystemConfig::desk();
    let scene = TargetScene::new(vec![Target {
        angle_rad: 0.1,
        range_m: 35.0,
        velocity_mps: 8.0,
        reflection: Complex64::ONE,
    }]);
    let w = random_precoders(&cfg, 11);
    let s = generate_symbols(&cfg, 12).unwrap();
    let cube = generate_echo(&scene, &w, &s, &cfg, 13, false).unwrap();
    let x = transmit_grid(&w, &s).unwrap();
    let processed = dft_pipeline(&cube, &x, &cfg).unwrap();
    let detected = detect_and_invert(&processed, &cfg, 1, 0.5);
    assert_eq!(detected.peaks.len(), 1);
    let report = rmse(&detected.peaks, &scene.targets, &cfg);
    // Quantization-limited accuracy: within one bin per dimension.
    let theta_bin = (2.0 / cfg.spatial_dft_size as f64).asin();
    let range_bin =
        SPEED_OF_LIGHT / (2.0 * cfg.subcarrier_spacing_hz * cfg.delay_dft_size as f64);
    let velocity_bin = SPEED_OF_LIGHT
        / (2.0
            * cfg.total_symbol_duration_s
            * cfg.carrier_freq_hz
            * cfg.doppler_dft_size as f64);
    assert!(report.theta_rad <= theta_bin, "{}", report.theta_rad);
    assert!(report.range_m <= range_bin, "{}", report.range_m);
    assert!(report.velocity_mps <= velocity_bin, "{}", report.velocity_mps);
    assert_eq!(report.missed, 0);

    let rows = detected.to_string();
    assert!(rows.starts_with("angle_rad\t"));
    assert_eq!(rows.lines().count(), 2);
}

#[test]
fn processed_cube_energy_invariant_to_phase_origins() {
    // Whole-chain energy conservation: rotating the reflection phase or
    // shifting the Doppler frequency by whole bins relocates the peak but
    // never changes the total processed energy.
    let cfg = SystemConfig::desk();
    let w = random_precoders(&cfg, 21);
    let s = generate_symbols(&cfg, 22).unwrap();
    let x = transmit_grid(&w, &s).unwrap();
    let energy = |scene: &TargetScene| {
        let cube = generate_echo(scene, &w, &s, &cfg, 0, true).unwrap();
        let processed = dft_pipeline(&cube, &x, &cfg).unwrap();
        processed.data.iter().map(|v| v.norm_sqr()).sum::<f64>()
    };
    let base = Target {
        angle_rad: 0.04,
        range_m: 51.3,
        velocity_mps: 4.2,
        reflection: Complex64::new(0.8, -0.5),
    };
    let reference = energy(&TargetScene::new(vec![base]));
    assert!(reference > 0.0);

    let mut rotated = base;
    rotated.reflection *= Complex64::from_polar(1.0, 1.234);
    let e = energy(&TargetScene::new(vec![rotated]));
    assert!((e - reference).abs() <= 1e-10 * reference);

    let velocity_bin = SPEED_OF_LIGHT
        / (2.0
            * cfg.total_symbol_duration_s
            * cfg.carrier_freq_hz
            * cfg.doppler_dft_size as f64);
    for shift in [-2i32, 1, 3] {
        let mut moved = base;
        moved.velocity_mps += shift as f64 * velocity_bin;
        let e = energy(&TargetScene::new(vec![moved]));
        assert!(
            (e - reference).abs() <= 1e-9 * reference,
            "shift {shift}: {e} vs {reference}"
        );
    }
}

#[test]
fn trial_substreams_are_independent() {
    // Distinct purpose labels give unrelated streams from the same seed.
    let cfg = SystemConfig::desk();
    let a = generate_symbols(&cfg, derive_seed(5, "symbols")).unwrap();
    let b = generate_symbols(&cfg, derive_seed(5, "other")).unwrap();
    assert_ne!(a.data, b.data);
}
