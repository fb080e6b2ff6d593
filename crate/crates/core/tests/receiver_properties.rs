use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use golay_das::channel::{
    build_impulse_response, propagate, propagate_model, stimulus_phase, ChannelModel, JonesMatrix, LaserConfig,
    SensorArrayConfig, StimulusBinding, StimulusWaveform, Tap,
};
use golay_das::codes::generate_golay_set;
use golay_das::modulation::{build_pdm_qpsk_frame, ProbeFrame};
use golay_das::receiver::{build_phase_map, estimate_jones, estimate_jones_unchecked, extract_phase, JonesEstimateFrame, PhaseMap};

fn stimulated_array(segment: usize, vpp: f64, hz: f64) -> SensorArrayConfig {
    let mut cfg = SensorArrayConfig::with_fbg_count(6).with_random_polarization(21);
    cfg.stimuli.push(StimulusBinding {
        segment,
        waveform: StimulusWaveform::sine(vpp, hz, 1.0),
    });
    cfg
}

fn max_map_diff(a: &PhaseMap, b: &PhaseMap) -> f64 {
    a.phases
        .iter()
        .flatten()
        .zip(b.phases.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn differential_phase_ignores_receiver_side_transforms() {
    let frame = build_pdm_qpsk_frame(&generate_golay_set(256).unwrap(), 160e6).unwrap();
    let cfg = stimulated_array(3, 2.0, 3000.0);
    let laser = LaserConfig {
        noise_sigma: 0.02,
        ..LaserConfig::default()
    };
    let cap = propagate(&frame, &cfg, &laser, 200.0 * frame.duration_s(), 3).unwrap();
    let delays = cfg.tap_delays(160e6).unwrap();
    let map_of = |c: &golay_das::channel::IQCapture| build_phase_map(&estimate_jones(c, &frame, &delays).unwrap(), 0).unwrap();
    let base = map_of(&cap);

    let c = Complex64::from_polar(3.7, -2.1);
    let scaled = cap.map(|x, y| (c * x, c * y));
    let u = JonesMatrix::random_unitary(&mut ChaCha8Rng::seed_from_u64(8));
    let rotated = cap.map(|x, y| u.apply(x, y));
    let offset = Complex64::cis(1.234);
    let laser_offset = cap.map(|x, y| (offset * x, offset * y));

    for other in [scaled, rotated, laser_offset] {
        let d = max_map_diff(&base, &map_of(&other));
        assert!(d < 1e-10, "{d}");
    }
}

proptest! {
    #[test]
    fn extract_phase_tracks_scalar_angle(seed in any::<u64>(), r in 0.01f64..100.0, theta in -3.0f64..3.0) {
        let h = JonesMatrix::random_unitary(&mut ChaCha8Rng::seed_from_u64(seed));
        let c = Complex64::from_polar(r, theta);
        let d = extract_phase(&h.scale(c)).unwrap() - extract_phase(&h).unwrap() - theta;
        let m = d.rem_euclid(std::f64::consts::PI);
        prop_assert!(m.min(std::f64::consts::PI - m) < 1e-10);
    }
}

#[test]
fn stimulus_shifts_downstream_rows_by_twice_the_one_way_phase() {
    let segment = 3;
    let cfg = stimulated_array(segment, 4.0, 700.0);
    let laser = LaserConfig::noiseless();
    let frame_t = 3.2e-6;
    let waveform = cfg.stimuli[0].waveform;

    // channel snapshots at each frame time, estimated perfectly
    let estimates: Vec<JonesEstimateFrame> = (0..2000)
        .map(|f| {
            let t = f as f64 * frame_t;
            let taps = build_impulse_response(&cfg, &laser, 160e6, t).unwrap();
            JonesEstimateFrame {
                taps: taps.iter().map(|t| (t.delay, t.matrix)).collect(),
                frame_index: f,
                timestamp: t,
            }
        })
        .collect();
    let map = build_phase_map(&estimates, 0).unwrap();
    let first = map.phases.iter().map(|r| r[0]).collect::<Vec<_>>();
    for f in 0..map.n_frames() {
        let beta = stimulus_phase(&waveform, f as f64 * frame_t);
        for (k, row) in map.phases.iter().enumerate() {
            let shift = row[f] - first[k];
            let want = if k >= segment { 2.0 * beta } else { 0.0 };
            assert!((shift - want).abs() < 1e-8, "frame {f} row {k}: {shift} vs {want}");
        }
    }
}

#[test]
fn simulated_stimulus_follows_the_frame_average() {
    // end to end the estimate sees the phase move during one code period;
    // the error, including leakage into other taps, is bounded by that move
    let segment = 2;
    let cfg = stimulated_array(segment, 1.0, 200.0);
    let frame = build_pdm_qpsk_frame(&generate_golay_set(512).unwrap(), 160e6).unwrap();
    let cap = propagate(&frame, &cfg, &LaserConfig::noiseless(), 600.0 * frame.duration_s(), 0).unwrap();
    let delays = cfg.tap_delays(160e6).unwrap();
    let map = build_phase_map(&estimate_jones(&cap, &frame, &delays).unwrap(), 0).unwrap();
    let waveform = cfg.stimuli[0].waveform;
    let t = frame.duration_s();
    let first: Vec<f64> = map.phases.iter().map(|r| r[0]).collect();
    let beta0 = stimulus_phase(&waveform, 0.5 * t);
    // one-way amplitude is Vpp/6 rad
    let in_frame = 2.0 * std::f64::consts::TAU * 200.0 * (1.0 / 6.0) * t;
    for f in 0..map.n_frames() {
        let beta = stimulus_phase(&waveform, (f as f64 + 0.5) * t) - beta0;
        for (k, row) in map.phases.iter().enumerate() {
            let want = if k >= segment { 2.0 * beta } else { 0.0 };
            let err = row[f] - first[k] - want;
            assert!(err.abs() < in_frame, "frame {f} row {k}: {err} vs bound {in_frame}");
        }
    }
}

/// Periodic `Σ_m a(m)·conj(b(m-k))` by direct summation.
fn periodic_corr(a: &[Complex64], b: &[Complex64], k: isize) -> Complex64 {
    let n = a.len() as isize;
    (0..n).map(|m| a[m as usize] * b[(m - k).rem_euclid(n) as usize].conj()).sum()
}

/// What the correlator returns at `d` for an arbitrary static channel.
fn leakage_oracle(frame: &ProbeFrame, taps: &[Tap], d: usize) -> JonesMatrix {
    let (tx, ty) = (frame.e_tx(), frame.e_ty());
    let e = frame.code_energy();
    let mut out = [Complex64::default(); 4];
    for t in taps {
        let k = d as isize - t.delay as isize;
        let (r_tt, r_yt, r_ty, r_yy) = (
            periodic_corr(tx, tx, k),
            periodic_corr(ty, tx, k),
            periodic_corr(tx, ty, k),
            periodic_corr(ty, ty, k),
        );
        let [xx, xy, yx, yy] = t.matrix.entries();
        out[0] += xx * r_tt + xy * r_yt;
        out[1] += xx * r_ty + xy * r_yy;
        out[2] += yx * r_tt + yy * r_yt;
        out[3] += yx * r_ty + yy * r_yy;
    }
    JonesMatrix::new(out[0] / e, out[1] / e, out[2] / e, out[3] / e)
}

#[test]
fn misaligned_estimate_equals_predicted_leakage() {
    let frame = build_pdm_qpsk_frame(&generate_golay_set(128).unwrap(), 160e6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let delays = [16, 32, 49, 64, 80];
    let taps: Vec<Tap> = delays
        .iter()
        .map(|&delay| Tap {
            delay,
            matrix: JonesMatrix::random_unitary(&mut rng),
        })
        .collect();
    let model = ChannelModel::from_static_taps(&taps);
    let cap = propagate_model(&frame, &model, &LaserConfig::noiseless(), 2.0 * frame.duration_s(), 0).unwrap();
    let est = estimate_jones_unchecked(&cap, &frame, &delays).unwrap();
    let mut worst_leak: f64 = 0.0;
    for (k, (d, h)) in est[0].taps.iter().enumerate() {
        let predicted = leakage_oracle(&frame, &taps, *d);
        assert!(h.max_abs_diff(&predicted) < 1e-10, "tap {k}");
        worst_leak = worst_leak.max(h.max_abs_diff(&taps[k].matrix));
    }
    assert!(worst_leak > 1e-3, "{worst_leak}");
}
