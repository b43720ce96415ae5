#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use common::*;
use nalgebra::{DMatrix, DVector};
use otfs_lab::ambiguity::{
    ambiguity_surface, delay_cut, doppler_autocorrelation, doppler_cut, mainlobe_width,
    peak_sidelobe_db, DopplerGrid, DopplerRoute,
};
use otfs_lab::channel::{apply_channel, channel_matrix, draw_channel, ChannelSpec};
use otfs_lab::modem::{demodulate, modulate, modulate_via, pulse_shape, tx_matrix, ModPath};
use otfs_lab::phase::{apply_code, cyclic_phase_matrix, p4_sequence, remove_code};
use otfs_lab::radar::{cyclic_cross_correlation, detect_peaks, probe_frame, pulse_compress, range_scenario};
use otfs_lab::receiver::{lmmse_detect, qam4_demap, qam4_map, BitBlock};
use otfs_lab::transforms::{
    deinterleave_rowcol, deserialize_columnwise, dft_matrix, interleave_rowcol, interleaver_matrix,
    isfft, ofdm_modulate_slots, serialize_columnwise, sfft,
};
use otfs_lab::{DdFrame, GridParams, Scheme, TimeSignal};

fn g(m: usize, n: usize) -> GridParams {
    GridParams::normalized(m, n).unwrap()
}

#[test]
fn dft4_is_unitary() {
    let f = dft_matrix(4).unwrap();
    let prod = &f * f.adjoint();
    let eye = DMatrix::<C>::identity(4, 4);
    assert!((prod - eye).iter().all(|d| d.norm() < 1e-12));
}

#[test]
fn isfft_matches_double_sum() {
    let mut r = rng(1);
    let z = random_frame(g(8, 4), &mut r);
    let tf = isfft(&z);
    let oracle = isfft_sum(&z);
    for m in 0..8 {
        for n in 0..4 {
            assert_abs_diff_eq!((tf.get(m, n) - oracle[m][n]).norm(), 0.0, epsilon = 1e-12);
        }
    }
    assert_abs_diff_eq!(
        energy(tf.as_vec()),
        energy(z.as_vec()),
        epsilon = 1e-10 * energy(z.as_vec())
    );
}

#[test]
fn sfft_inverts_isfft() {
    let mut r = rng(2);
    let z = random_frame(g(8, 4), &mut r);
    assert!(sfft(&isfft(&z)).max_abs_diff(&z) < 1e-10);

    let delta = DdFrame::from_fn(g(8, 4), |l, k| C::new(((l, k) == (3, 2)) as u8 as f64, 0.0));
    assert!(sfft(&isfft(&delta)).max_abs_diff(&delta) < 1e-10);
}

#[test]
fn ofdm_slots_match_direct_sum() {
    let mut r = rng(3);
    let z = random_frame(g(8, 4), &mut r);
    let tf = isfft(&z);
    let x: Vec<Vec<C>> = (0..8).map(|m| (0..4).map(|n| tf.get(m, n)).collect()).collect();
    let oracle = ofdm_sum(&x);
    let dt = ofdm_modulate_slots(&tf);
    for l in 0..8 {
        for n in 0..4 {
            assert!((dt.get(l, n) - oracle[l][n]).norm() < 1e-12);
        }
    }
}

#[test]
fn serialization_round_trip() {
    let mut r = rng(4);
    let z = random_frame(g(8, 4), &mut r);
    let dt = ofdm_modulate_slots(&isfft(&z));
    let s = serialize_columnwise(&dt);
    for l in 0..8 {
        for n in 0..4 {
            assert_eq!(s.samples()[l + 8 * n], dt.get(l, n));
        }
    }
    assert_eq!(deserialize_columnwise(&s, &g(8, 4)).unwrap(), dt);
}

#[test]
fn interleaver_follows_enumerated_map() {
    let grid = g(2, 2);
    let s = TimeSignal::critical(&grid, (0..4).map(|i| C::new(i as f64, 0.0)).collect()).unwrap();
    let out = interleave_rowcol(&s, &grid).unwrap();
    // l + nM -> lN + n for every (l, n)
    let mut expected = vec![C::new(0.0, 0.0); 4];
    for l in 0..2 {
        for n in 0..2 {
            expected[l * 2 + n] = s.samples()[l + n * 2];
        }
    }
    assert_eq!(out.samples(), expected.as_slice());
    assert_eq!(
        out.samples().iter().map(|z| z.re).collect::<Vec<_>>(),
        vec![0.0, 2.0, 1.0, 3.0]
    );
    assert_eq!(deinterleave_rowcol(&out, &grid).unwrap(), s);

    let big = g(8, 4);
    let mut r = rng(5);
    let v = TimeSignal::critical(&big, gaussian_vec(&mut r, 32)).unwrap();
    assert_eq!(deinterleave_rowcol(&interleave_rowcol(&v, &big).unwrap(), &big).unwrap(), v);
}

#[test]
fn interleaver_matrix_agrees_on_basis_vectors() {
    for grid in [g(2, 2), g(8, 4)] {
        let len = grid.len();
        let t = interleaver_matrix(&grid);
        for b in 0..len {
            let e: Vec<C> = (0..len).map(|i| C::new((i == b) as u8 as f64, 0.0)).collect();
            let via_matrix = &t * DVector::from_column_slice(&e);
            let via_map = interleave_rowcol(&TimeSignal::critical(&grid, e).unwrap(), &grid).unwrap();
            assert_eq!(via_matrix.as_slice(), via_map.samples());
        }
        assert_eq!(&t * t.transpose(), DMatrix::<C>::identity(len, len));
        for i in 0..len {
            let row_ones = (0..len).filter(|&j| t[(i, j)] == C::new(1.0, 0.0)).count();
            let col_ones = (0..len).filter(|&j| t[(j, i)] == C::new(1.0, 0.0)).count();
            assert_eq!((row_ones, col_ones), (1, 1));
        }
    }
}

#[test]
fn p4_phases_match_closed_form() {
    assert_eq!(p4_sequence(2).unwrap().phases(), &[0.0, -PI / 2.0]);
    let p4 = p4_sequence(4).unwrap();
    let expected = [0.0, -3.0 * PI / 4.0, -PI, -3.0 * PI / 4.0];
    for (a, b) in p4.phases().iter().zip(expected) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
    for p in [3, 8, 13] {
        for (i, phi) in p4_sequence(p).unwrap().phases().iter().enumerate() {
            assert_abs_diff_eq!(*phi, p4_phase(i, p), epsilon = 1e-12);
        }
    }
}

#[test]
fn mask_entries_follow_cyclic_index() {
    let mask = cyclic_phase_matrix(&g(2, 2));
    let expected = [[cis(0.0), cis(-PI / 2.0)], [cis(-PI / 2.0), cis(0.0)]];
    for l in 0..2 {
        for k in 0..2 {
            assert!((mask.data()[(l, k)] - expected[l][k]).norm() < 1e-15);
        }
    }
    let mask = cyclic_phase_matrix(&g(8, 4));
    for l in 0..8 {
        assert_eq!(mask.data()[((l + 1) % 8, 1)], mask.data()[(l, 0)]);
    }
}

#[test]
fn code_round_trips() {
    let mut r = rng(6);
    let z = random_frame(g(8, 4), &mut r);
    assert!(remove_code(&apply_code(&z)).max_abs_diff(&z) < 1e-12);
}

#[test]
fn otfs_matches_inverse_zak_sum() {
    let ones = DdFrame::from_fn(g(8, 4), |_, _| C::new(1.0, 0.0));
    let s = modulate(&ones, Scheme::Otfs);
    for (q, v) in s.samples().iter().enumerate() {
        let want = if q < 8 { 2.0 } else { 0.0 };
        assert!((v - C::new(want, 0.0)).norm() < 1e-12, "q={q}");
    }
    let delta = DdFrame::from_fn(g(8, 4), |l, k| C::new(((l, k) == (3, 0)) as u8 as f64, 0.0));
    let s = modulate(&delta, Scheme::Otfs);
    for (q, v) in s.samples().iter().enumerate() {
        let want = if q % 8 == 3 { 0.5 } else { 0.0 };
        assert!((v - C::new(want, 0.0)).norm() < 1e-12);
    }
    let mut r = rng(7);
    for grid in [g(8, 4), g(8, 8), g(3, 5)] {
        let z = random_frame(grid, &mut r);
        for path in [ModPath::Direct, ModPath::Ofdm] {
            assert!(max_dev(modulate_via(&z, Scheme::Otfs, path).samples(), &otfs_sum(&z)) < 1e-10);
        }
    }
}

#[test]
fn ticp4_matches_coded_interleaved_sum() {
    let mut r = rng(8);
    for grid in [g(8, 4), g(8, 8), g(5, 3)] {
        let z = random_frame(grid, &mut r);
        for path in [ModPath::Direct, ModPath::Ofdm] {
            assert!(max_dev(modulate_via(&z, Scheme::Ticp4Otfs, path).samples(), &ticp4_sum(&z)) < 1e-10);
        }
    }
    let ones = DdFrame::from_fn(g(8, 4), |_, _| C::new(1.0, 0.0));
    let s = modulate(&ones, Scheme::Ticp4Otfs);
    assert!(s.samples().iter().filter(|v| v.norm() > 1e-6).count() > 8);
}

#[test]
fn tx_matrix_factorization() {
    for grid in [g(8, 4), g(8, 8)] {
        let (m, n) = (grid.m(), grid.n());
        // F_N^H kron I_M, entry ((l + n' M), (l + k M)) = N^{-1/2} e^{j 2 pi k n' / N}
        let mut b = DMatrix::<C>::zeros(m * n, m * n);
        for np in 0..n {
            for k in 0..n {
                for l in 0..m {
                    b[(l + np * m, l + k * m)] = cis(2.0 * PI * (k * np) as f64 / n as f64) / (n as f64).sqrt();
                }
            }
        }
        let mut t = DMatrix::<C>::zeros(m * n, m * n);
        for l in 0..m {
            for np in 0..n {
                t[(l * n + np, l + np * m)] = C::new(1.0, 0.0);
            }
        }
        let mut d = DMatrix::<C>::zeros(m * n, m * n);
        for k in 0..n {
            for l in 0..m {
                d[(l + k * m, l + k * m)] = cis(p4_phase((l + m * n - k) % m, m));
            }
        }
        let otfs = tx_matrix(&grid, Scheme::Otfs);
        assert!((otfs.data() - &b).iter().all(|e| e.norm() < 1e-12));
        let ticp4 = tx_matrix(&grid, Scheme::Ticp4Otfs);
        let expected = &t * &b * &d;
        assert!((ticp4.data() - expected).iter().all(|e| e.norm() < 1e-12));
        let gram = ticp4.data() * ticp4.data().adjoint();
        assert!((gram - DMatrix::<C>::identity(m * n, m * n)).iter().all(|e| e.norm() < 1e-10));
    }
}

#[test]
fn demodulation_round_trips() {
    let mut r = rng(9);
    let z = random_frame(g(8, 4), &mut r);
    let back = demodulate(&modulate(&z, Scheme::Otfs), &g(8, 4), Scheme::Otfs).unwrap();
    assert!(back.max_abs_diff(&z) < 1e-10);
    let z = random_frame(g(8, 8), &mut r);
    let back = demodulate(&modulate(&z, Scheme::Ticp4Otfs), &g(8, 8), Scheme::Ticp4Otfs).unwrap();
    assert!(back.max_abs_diff(&z) < 1e-10);
}

#[test]
fn pulse_shaping_preserves_energy() {
    let grid = GridParams::new(8, 4, 1.0, 4).unwrap();
    let mut r = rng(10);
    let s = modulate(&random_frame(grid, &mut r), Scheme::Ticp4Otfs);
    let shaped = pulse_shape(&s, &grid).unwrap();
    assert_eq!(shaped.len(), 128);
    assert_abs_diff_eq!(energy(shaped.samples()), energy(s.samples()), epsilon = 1e-12);
}

#[test]
fn surface_matches_double_loop() {
    let mut r = rng(11);
    let s = TimeSignal::from_samples(gaussian_vec(&mut r, 32), 1).unwrap();
    let grid = DopplerGrid { points: 24, span_bins: 6.0 };
    let surf = ambiguity_surface(&s, 31, grid).unwrap();
    let e = energy(s.samples());
    assert_abs_diff_eq!(surf.peak(), e, epsilon = 1e-12);
    for (row, &d) in surf.lags().iter().enumerate() {
        for (col, &nu) in surf.doppler_axis().iter().enumerate() {
            let want = chi(s.samples(), d, nu) / e;
            assert!((surf.values()[(row, col)] - want).norm() < 1e-12);
            let mirror = chi(s.samples(), -d, -nu) / e;
            assert_abs_diff_eq!(want.norm(), mirror.norm(), epsilon = 1e-9);
        }
    }
}

#[test]
fn rect_pulse_delay_cut_is_triangle() {
    let len = 10;
    let s = TimeSignal::from_samples(vec![C::new(1.0, 0.0); len], 1).unwrap();
    let cut = delay_cut(&s).unwrap();
    for (i, &m) in cut.magnitude().iter().enumerate() {
        let d = i as f64 - (len - 1) as f64;
        assert_abs_diff_eq!(m, (len as f64 - d.abs()) / len as f64, epsilon = 1e-12);
    }
    // first zero sits at lag L, just past the last computed lag L - 1
    assert!(cut.magnitude()[0] > 0.0);

    // -6 dB is the half-amplitude point at |d| = L / 2
    let w = mainlobe_width(&cut, -6.0206);
    assert_abs_diff_eq!(w.width, len as f64 + 1.0, epsilon = 1e-9);
    let w = mainlobe_width(&cut, -200.0);
    assert_abs_diff_eq!(w.width, (2 * len - 1) as f64, epsilon = 1e-9);
    assert!(w.saturated);
}

#[test]
fn width_bounded_by_nulls() {
    // [1, 1, 0, 0, -1, 1] has exact zeros in its autocorrelation at lags +-1
    let s = TimeSignal::from_samples(
        [1.0, 1.0, 0.0, 0.0, -1.0, 1.0].iter().map(|&v| C::new(v, 0.0)).collect(),
        1,
    )
    .unwrap();
    let cut = delay_cut(&s).unwrap();
    let origin = cut.origin();
    let mut hi = origin;
    while hi + 1 < cut.len() && cut.magnitude()[hi + 1] > 1e-10 {
        hi += 1;
    }
    let mut lo = origin;
    while lo > 0 && cut.magnitude()[lo - 1] > 1e-10 {
        lo -= 1;
    }
    let w = mainlobe_width(&cut, -200.0);
    assert_abs_diff_eq!(w.width, (hi - lo + 1) as f64, epsilon = 1e-12);
    assert!(!w.saturated);
}

#[test]
fn delay_cut_is_even() {
    let mut r = rng(12);
    let s = TimeSignal::from_samples(gaussian_vec(&mut r, 40), 1).unwrap();
    let mag = delay_cut(&s).unwrap().magnitude().to_vec();
    for i in 0..mag.len() {
        assert_abs_diff_eq!(mag[i], mag[mag.len() - 1 - i], epsilon = 1e-9);
    }
}

#[test]
fn doppler_cut_of_burst_is_dirichlet() {
    // constant-modulus burst of L samples inside Q
    let (l_len, q_len) = (8usize, 32usize);
    let samples: Vec<C> = (0..q_len)
        .map(|q| if q < l_len { cis(0.3 * (q * q) as f64) } else { C::new(0.0, 0.0) })
        .collect();
    let s = TimeSignal::from_samples(samples, 1).unwrap();
    let cut = doppler_cut(&s).unwrap();
    for (&nu, &m) in cut.axis().iter().zip(cut.magnitude()) {
        let want = if nu == 0.0 {
            1.0
        } else {
            let x = PI * nu / q_len as f64;
            ((l_len as f64 * x).sin() / x.sin()).abs() / l_len as f64
        };
        assert_abs_diff_eq!(m, want, epsilon = 1e-9);
    }
    // full-length constant modulus: the kernel vanishes at every other integer bin
    let full = TimeSignal::from_samples((0..q_len).map(|q| cis(q as f64)).collect(), 1).unwrap();
    let cut = doppler_cut(&full).unwrap();
    for (&nu, &m) in cut.axis().iter().zip(cut.magnitude()) {
        assert_abs_diff_eq!(m, if nu == 0.0 { 1.0 } else { 0.0 }, epsilon = 1e-9);
    }
}

#[test]
fn doppler_routes_agree_on_random_input() {
    let mut r = rng(13);
    for len in [16, 33, 128] {
        let s = TimeSignal::from_samples(gaussian_vec(&mut r, len), 1).unwrap();
        let a = doppler_autocorrelation(&s, DopplerRoute::Spectral).unwrap();
        let b = doppler_autocorrelation(&s, DopplerRoute::TimeDual).unwrap();
        assert!(max_dev(&a, &b) < 1e-9 * energy(s.samples()));
        // and both agree with the zero-lag line of the ambiguity function
        let cut = doppler_cut(&s).unwrap();
        let e = energy(s.samples());
        for (&nu, &m) in cut.axis().iter().zip(cut.magnitude()) {
            assert_abs_diff_eq!(m, chi(s.samples(), 0, nu).norm() / e, epsilon = 1e-9);
        }
    }
}

#[test]
fn peak_sidelobe_matches_scan() {
    let two = TimeSignal::from_samples(vec![C::new(1.0, 0.0); 2], 1).unwrap();
    assert_abs_diff_eq!(peak_sidelobe_db(&delay_cut(&two).unwrap()).unwrap(), -6.0206, epsilon = 1e-4);

    let mut r = rng(14);
    for trial in 0..50 {
        let s = TimeSignal::from_samples(gaussian_vec(&mut r, 12 + trial % 7), 1).unwrap();
        let cut = delay_cut(&s).unwrap();
        let want = sidelobe_scan(cut.magnitude(), cut.origin()).unwrap();
        assert_abs_diff_eq!(peak_sidelobe_db(&cut).unwrap(), 20.0 * want.log10(), epsilon = 1e-9);
    }
}

#[test]
fn channel_examples() {
    let grid = g(4, 1);
    let ones = TimeSignal::critical(&grid, vec![C::new(1.0, 0.0); 4]).unwrap();
    let out = apply_channel(&ones, &ChannelSpec::unit_gains(&[0], &[1]).unwrap()).unwrap();
    let want = [C::new(1.0, 0.0), C::new(0.0, 1.0), C::new(-1.0, 0.0), C::new(0.0, -1.0)];
    assert!(max_dev(out.samples(), &want) < 1e-12);
}

#[test]
fn channel_matrix_matches_loop() {
    let profile = ChannelSpec::uniform_random(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
    let ch = draw_channel(&profile, 77);
    let h = channel_matrix(&ch, 32).unwrap();
    let mut r = rng(15);
    for _ in 0..20 {
        let s = TimeSignal::from_samples(gaussian_vec(&mut r, 32), 1).unwrap();
        let via_h = &h * DVector::from_column_slice(s.samples());
        // r[q] = sum_i h_i exp(j 2 pi k_i (q - l_i) / Q) s[(q - l_i) mod Q]
        let oracle: Vec<C> = (0..32usize)
            .map(|q| {
                ch.taps()
                    .iter()
                    .map(|t| {
                        let src = (q + 32 - t.delay) % 32;
                        let time = q as f64 - t.delay as f64;
                        t.gain * cis(2.0 * PI * t.doppler as f64 * time / 32.0) * s.samples()[src]
                    })
                    .sum()
            })
            .collect();
        assert!(max_dev(via_h.as_slice(), &oracle) < 1e-12);
        assert!(max_dev(apply_channel(&s, &ch).unwrap().samples(), &oracle) < 1e-12);
    }
}

#[test]
fn lmmse_matches_explicit_inverse() {
    let grid = g(8, 4);
    let profile = ChannelSpec::uniform_random(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
    let mut r = rng(16);
    let mut checked = 0;
    for seed in 0..20 {
        let ch = draw_channel(&profile, seed);
        let h = channel_matrix(&ch, 32).unwrap();
        for scheme in Scheme::ALL {
            let a = tx_matrix(&grid, scheme);
            let gmat = &h * a.data();
            let svd = gmat.clone().svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min();
            if cond > 1e4 {
                continue;
            }
            checked += 1;
            let bits = BitBlock::random(32, &mut r);
            let z = qam4_map(&bits, &grid).unwrap();
            let rx = apply_channel(&a.apply(&z), &ch).unwrap();
            let est = lmmse_detect(&rx, &h, &a, 0.0).unwrap();
            assert!(est.max_abs_diff(&z) < 1e-6, "cond {cond}");

            let noise_var = 0.3;
            let gh = gmat.adjoint();
            let inv = (&gh * &gmat + DMatrix::<C>::identity(32, 32) * C::new(noise_var, 0.0))
                .try_inverse()
                .unwrap();
            let want = inv * gh * DVector::from_column_slice(rx.samples());
            let got = lmmse_detect(&rx, &h, &a, noise_var).unwrap();
            assert!(max_dev(got.as_vec(), want.as_slice()) < 1e-9);
        }
    }
    assert!(checked >= 20, "only {checked} well-conditioned draws");
}

#[test]
fn qam4_round_trip_exhaustive() {
    let grid = g(4, 1);
    let bits = BitBlock::new(vec![0, 0, 0, 1, 1, 0, 1, 1]).unwrap();
    let frame = qam4_map(&bits, &grid).unwrap();
    assert_eq!(qam4_demap(&frame), bits);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let want = [C::new(h, h), C::new(h, -h), C::new(-h, h), C::new(-h, -h)];
    assert!(max_dev(frame.as_vec(), &want) < 1e-15);
}

#[test]
fn three_target_profile_matches_direct_correlation() {
    let grid = g(8, 4);
    let reference = modulate(&probe_frame(&grid), Scheme::Ticp4Otfs);
    let rx: Vec<C> = (0..32)
        .map(|q| [1usize, 4, 7].iter().map(|&d| reference.samples()[(q + 32 - d) % 32]).sum())
        .collect();
    let oracle = circular_xcorr(&rx, reference.samples());
    let rx = TimeSignal::critical(&grid, rx).unwrap();
    assert!(max_dev(&cyclic_cross_correlation(&rx, &reference).unwrap(), &oracle) < 1e-12);

    let mags: Vec<f64> = oracle.iter().map(|v| v.norm()).collect();
    for d in [1usize, 4, 7] {
        assert!(mags[d] > mags[d - 1] && mags[d] > mags[d + 1], "lag {d}");
    }
    let profile = pulse_compress(&rx, &reference).unwrap();
    let mut lags: Vec<usize> = detect_peaks(&profile, 2, 0.3).unwrap().iter().map(|p| p.lag).collect();
    lags.sort();
    assert_eq!(lags, vec![1, 4, 7]);

    let scene = range_scenario(&grid, Scheme::Ticp4Otfs, &[1, 4, 7], &[0, 0, 0]).unwrap();
    assert_eq!(scene, profile);
}
