//! Invariant checks run by the `selftest` command.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambiguity::{
    ambiguity_surface, delay_cut, doppler_autocorrelation, doppler_cut, DopplerGrid, DopplerRoute,
};
use crate::channel::{apply_channel, channel_matrix, draw_channel, ChannelSpec, PowerProfile, Tap};
use crate::grid::{frame_energy, DdFrame, GridParams, TimeSignal};
use crate::modem::{demodulate, modulate_via, pulse_shape, tx_matrix, ModPath, Scheme};
use crate::phase::cyclic_phase_matrix;
use crate::radar::{detect_peaks, pulse_compress};
use crate::receiver::{ber_experiment, qam4_demap, qam4_map, BerConfig, BitBlock, LmmseDetector};
use crate::transforms::{interleaver_matrix, isfft, ofdm_modulate_slots, serialize_columnwise, sfft};

const SEED: u64 = 0x5e1f_7e57;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<CheckOutcome>,
}

type Check = fn() -> std::result::Result<(), String>;

const CHECKS: &[(&str, Check)] = &[
    ("modulator_routes_agree", routes_agree),
    ("tx_matrix_matches_modulator", tx_matrix_matches),
    ("interleaver_is_permutation", interleaver_permutation),
    ("transforms_preserve_energy", energy_preserved),
    ("demodulate_inverts_modulate", round_trip),
    ("phase_mask_structure", phase_mask),
    ("ambiguity_peak_and_symmetry", ambiguity_symmetry),
    ("cuts_match_surface", cuts_match_surface),
    ("doppler_cut_dual_form", doppler_dual_form),
    ("channel_matrix_matches_channel", channel_matrix_agrees),
    ("noiseless_lmmse_is_exact", lmmse_exact),
    ("qam4_round_trip", qam_round_trip),
    ("range_peak_follows_delay", range_shift),
    ("identity_channel_ber_matches", identity_ber_matches),
    ("pulse_shaping_preserves_energy", shaping_preserves_energy),
];

/// Runs every check; a panic inside a check counts as a failure.
pub fn run_selftest() -> SelftestReport {
    let checks: Vec<CheckOutcome> = CHECKS
        .iter()
        .map(|&(name, check)| {
            let result = std::panic::catch_unwind(check)
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            CheckOutcome {
                name,
                passed: result.is_ok(),
                detail: result.err(),
            }
        })
        .collect();
    let passed = checks.iter().filter(|c| c.passed).count();
    SelftestReport {
        passed,
        failed: checks.len() - passed,
        checks,
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grids() -> Vec<GridParams> {
    vec![
        GridParams::normalized(8, 4).unwrap(),
        GridParams::normalized(8, 8).unwrap(),
        GridParams::normalized(4, 8).unwrap(),
    ]
}

fn random_frames(grid: GridParams, count: usize, seed: u64) -> Vec<DdFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| DdFrame::random_gaussian(grid, &mut rng)).collect()
}

fn routes_agree() -> std::result::Result<(), String> {
    for g in grids() {
        for z in random_frames(g, 10, SEED) {
            for scheme in Scheme::ALL {
                let d = modulate_via(&z, scheme, ModPath::Direct)
                    .max_abs_diff(&modulate_via(&z, scheme, ModPath::Ofdm));
                ensure(d < 1e-10, || format!("{scheme} {}x{}: deviation {d:e}", g.m(), g.n()))?;
            }
        }
    }
    Ok(())
}

fn tx_matrix_matches() -> std::result::Result<(), String> {
    for g in grids() {
        for scheme in Scheme::ALL {
            let a = tx_matrix(&g, scheme);
            for z in random_frames(g, 5, SEED + 1) {
                let d = a.apply(&z).max_abs_diff(&modulate_via(&z, scheme, ModPath::Direct));
                ensure(d < 1e-10, || format!("{scheme}: deviation {d:e}"))?;
            }
        }
    }
    Ok(())
}

fn interleaver_permutation() -> std::result::Result<(), String> {
    for g in grids() {
        let t = interleaver_matrix(&g);
        let prod = &t * t.transpose();
        let eye = crate::transforms::ComplexMatrix::identity(g.len(), g.len());
        ensure(prod == eye, || format!("{}x{}: T T^T != I", g.m(), g.n()))?;
    }
    Ok(())
}

fn energy_preserved() -> std::result::Result<(), String> {
    for g in grids() {
        for z in random_frames(g, 5, SEED + 2) {
            let e = frame_energy(&z);
            let tf = isfft(&z);
            let dt = ofdm_modulate_slots(&tf);
            let candidates = [
                ("isfft", frame_energy(&tf)),
                ("sfft", frame_energy(&sfft(&tf))),
                ("ofdm", frame_energy(&dt)),
                ("serialize", frame_energy(serialize_columnwise(&dt).samples())),
                ("otfs", frame_energy(modulate_via(&z, Scheme::Otfs, ModPath::Ofdm).samples())),
                ("ticp4", frame_energy(modulate_via(&z, Scheme::Ticp4Otfs, ModPath::Ofdm).samples())),
            ];
            for (stage, got) in candidates {
                ensure((got - e).abs() < 1e-10 * e.max(1.0), || {
                    format!("{stage}: energy {got} vs {e}")
                })?;
            }
        }
    }
    Ok(())
}

fn round_trip() -> std::result::Result<(), String> {
    for g in grids() {
        for z in random_frames(g, 5, SEED + 3) {
            for scheme in Scheme::ALL {
                let s = modulate_via(&z, scheme, ModPath::Direct);
                let back = demodulate(&s, &g, scheme).map_err(|e| e.to_string())?;
                let d = back.max_abs_diff(&z);
                ensure(d < 1e-10, || format!("{scheme}: deviation {d:e}"))?;
            }
        }
    }
    Ok(())
}

fn phase_mask() -> std::result::Result<(), String> {
    for g in grids() {
        let mask = cyclic_phase_matrix(&g);
        let (m, n) = (g.m(), g.n());
        for k in 0..n {
            for l in 0..m {
                let v = mask.data()[(l, k)];
                ensure((v.norm() - 1.0).abs() < 1e-12, || format!("|mask[{l},{k}]| != 1"))?;
                let shifted = mask.data()[((l + m - k % m) % m, 0)];
                ensure((v - shifted).norm() < 1e-12, || {
                    format!("column {k} is not a cyclic shift of column 0")
                })?;
            }
        }
    }
    Ok(())
}

fn random_signal(len: usize, seed: u64) -> TimeSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = crate::channel::complex_gaussian(&mut rng, len, 1.0);
    TimeSignal::from_samples(samples, 1).unwrap()
}

fn ambiguity_symmetry() -> std::result::Result<(), String> {
    let s = random_signal(32, SEED + 4);
    let surf = ambiguity_surface(&s, 31, DopplerGrid::integer_bins(32)).map_err(|e| e.to_string())?;
    let rows = surf.lags().len();
    let cols = surf.doppler_axis().len();
    let origin = surf.row_of_lag(0).unwrap();
    let zero_col = cols / 2;
    ensure((surf.magnitude(origin, zero_col) - 1.0).abs() < 1e-12, || "origin not 1".into())?;
    for r in 0..rows {
        for c in 0..cols {
            let mag = surf.magnitude(r, c);
            ensure(mag <= 1.0 + 1e-12, || format!("|chi| = {mag} exceeds the origin"))?;
            // Doppler axis is -16..16; the mirror of column c is 32 - c, except bin -16.
            if c == 0 {
                continue;
            }
            let mirror = surf.magnitude(rows - 1 - r, cols - c);
            ensure((mag - mirror).abs() < 1e-9, || format!("asymmetry at ({r},{c})"))?;
        }
    }
    Ok(())
}

fn cuts_match_surface() -> std::result::Result<(), String> {
    let s = random_signal(24, SEED + 5);
    let len = s.len();
    let surf = ambiguity_surface(&s, len - 1, DopplerGrid::integer_bins(len)).map_err(|e| e.to_string())?;
    let dc = delay_cut(&s).map_err(|e| e.to_string())?;
    let zero_col = len / 2;
    for (i, &m) in dc.magnitude().iter().enumerate() {
        let d = (m - surf.magnitude(i, zero_col)).abs();
        ensure(d < 1e-9, || format!("delay cut deviates by {d:e} at {i}"))?;
    }
    let fc = doppler_cut(&s).map_err(|e| e.to_string())?;
    let origin = surf.row_of_lag(0).unwrap();
    for (c, &m) in fc.magnitude().iter().enumerate() {
        let d = (m - surf.magnitude(origin, c)).abs();
        ensure(d < 1e-9, || format!("Doppler cut deviates by {d:e} at {c}"))?;
    }
    Ok(())
}

fn doppler_dual_form() -> std::result::Result<(), String> {
    for len in [7, 32, 128] {
        let s = random_signal(len, SEED + len as u64);
        let a = doppler_autocorrelation(&s, DopplerRoute::Spectral).map_err(|e| e.to_string())?;
        let b = doppler_autocorrelation(&s, DopplerRoute::TimeDual).map_err(|e| e.to_string())?;
        let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            ensure((x - y).norm() < 1e-9 * scale, || format!("length {len}: routes disagree"))?;
        }
    }
    Ok(())
}

fn channel_matrix_agrees() -> std::result::Result<(), String> {
    let profile = ChannelSpec::uniform_random(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
    let ch = draw_channel(&profile, SEED);
    let s = random_signal(32, SEED + 6);
    let h = channel_matrix(&ch, 32).map_err(|e| e.to_string())?;
    let via_matrix = &h * DVector::from_column_slice(s.samples());
    let via_loop = apply_channel(&s, &ch).map_err(|e| e.to_string())?;
    let d = via_loop
        .samples()
        .iter()
        .zip(via_matrix.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure(d < 1e-12, || format!("deviation {d:e}"))
}

fn lmmse_exact() -> std::result::Result<(), String> {
    let g = GridParams::normalized(8, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    let bits = BitBlock::random(g.len(), &mut rng);
    let z = qam4_map(&bits, &g).map_err(|e| e.to_string())?;
    let ch = ChannelSpec::new(
        vec![
            Tap { gain: Complex64::new(1.0, 0.0), delay: 0, doppler: 0 },
            Tap { gain: Complex64::new(0.3, -0.4), delay: 2, doppler: 1 },
        ],
        PowerProfile::FixedGains,
    )
    .unwrap();
    for scheme in Scheme::ALL {
        for channel in [ChannelSpec::identity(), ch.clone()] {
            let a = tx_matrix(&g, scheme);
            let rx = apply_channel(&a.apply(&z), &channel).map_err(|e| e.to_string())?;
            let h = channel_matrix(&channel, g.len()).map_err(|e| e.to_string())?;
            let est = LmmseDetector::new(&h, &a)
                .and_then(|det| det.detect(&rx, 0.0))
                .map_err(|e| e.to_string())?;
            let d = est.max_abs_diff(&z);
            ensure(d < 1e-8, || format!("{scheme}: deviation {d:e}"))?;
        }
    }
    Ok(())
}

fn qam_round_trip() -> std::result::Result<(), String> {
    let g = GridParams::normalized(8, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let bits = BitBlock::random(g.len(), &mut rng);
    let frame = qam4_map(&bits, &g).map_err(|e| e.to_string())?;
    ensure(qam4_demap(&frame) == bits, || "demap(map(b)) != b".into())
}

fn range_shift() -> std::result::Result<(), String> {
    let g = GridParams::normalized(8, 4).unwrap();
    let s = modulate_via(
        &DdFrame::from_fn(g, |_, _| Complex64::new(1.0, 0.0)),
        Scheme::Ticp4Otfs,
        ModPath::Direct,
    );
    for delay in [0, 5, 31] {
        let echo = apply_channel(&s, &ChannelSpec::unit_gains(&[delay], &[0]).unwrap())
            .map_err(|e| e.to_string())?;
        let p = pulse_compress(&echo, &s).map_err(|e| e.to_string())?;
        let peaks = detect_peaks(&p, 1, 1.0).map_err(|e| e.to_string())?;
        ensure(peaks.first().map(|p| p.lag) == Some(delay), || {
            format!("echo at {delay} peaked at {:?}", peaks.first())
        })?;
    }
    Ok(())
}

/// Over the identity channel both schemes see white noise of the same
/// variance after detection, so their error rates agree statistically.
fn identity_ber_matches() -> std::result::Result<(), String> {
    let config = BerConfig {
        grid: GridParams::normalized(4, 4).unwrap(),
        snr_db: vec![0.0, 4.0],
        frames: 300,
        channel: ChannelSpec::identity(),
        seed: SEED,
    };
    let otfs = ber_experiment(&config, Scheme::Otfs).map_err(|e| e.to_string())?;
    let ticp4 = ber_experiment(&config, Scheme::Ticp4Otfs).map_err(|e| e.to_string())?;
    for (a, b) in otfs.iter().zip(&ticp4) {
        let tol = 4.0 * (2.0 * a.ber * (1.0 - a.ber) / a.bits_total as f64).sqrt();
        ensure((a.ber - b.ber).abs() <= tol, || {
            format!("{} dB: BER {} vs {}", a.snr_db, a.ber, b.ber)
        })?;
    }
    Ok(())
}

fn shaping_preserves_energy() -> std::result::Result<(), String> {
    for g in grids() {
        for z in random_frames(g, 3, SEED + 9) {
            let s = modulate_via(&z, Scheme::Ticp4Otfs, ModPath::Direct);
            let shaped = pulse_shape(&s, &g).map_err(|e| e.to_string())?;
            let (a, b) = (frame_energy(shaped.samples()), frame_energy(s.samples()));
            ensure((a - b).abs() < 1e-10 * b, || format!("energy {a} vs {b}"))?;
        }
    }
    Ok(())
}
