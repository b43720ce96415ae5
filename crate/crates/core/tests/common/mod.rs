//! Reference implementations evaluated straight from the defining sums.
//! Nothing here calls into the library's transforms.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use otfs_lab::{DdFrame, GridParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C = Complex64;

pub fn cis(theta: f64) -> C {
    C::from_polar(1.0, theta)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<C> {
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

pub fn random_frame(grid: GridParams, rng: &mut ChaCha8Rng) -> DdFrame {
    DdFrame::from_vec(grid, &gaussian_vec(rng, grid.len())).unwrap()
}

pub fn max_dev(a: &[C], b: &[C]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn energy(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `X[m, n] = (MN)^{-1/2} sum_{k, l} Z[l, k] exp(j 2 pi (n k / N - m l / M))`.
pub fn isfft_sum(z: &DdFrame) -> Vec<Vec<C>> {
    let (m_len, n_len) = (z.grid().m(), z.grid().n());
    let scale = 1.0 / ((m_len * n_len) as f64).sqrt();
    (0..m_len)
        .map(|m| {
            (0..n_len)
                .map(|n| {
                    let mut acc = C::new(0.0, 0.0);
                    for k in 0..n_len {
                        for l in 0..m_len {
                            let turns = (n * k) as f64 / n_len as f64 - (m * l) as f64 / m_len as f64;
                            acc += z.get(l, k) * cis(2.0 * PI * turns);
                        }
                    }
                    acc * scale
                })
                .collect()
        })
        .collect()
}

/// `S[l, n] = M^{-1/2} sum_m X[m, n] exp(j 2 pi m l / M)`.
pub fn ofdm_sum(x: &[Vec<C>]) -> Vec<Vec<C>> {
    let m_len = x.len();
    let n_len = x[0].len();
    let scale = 1.0 / (m_len as f64).sqrt();
    (0..m_len)
        .map(|l| {
            (0..n_len)
                .map(|n| {
                    (0..m_len)
                        .map(|m| x[m][n] * cis(2.0 * PI * (m * l) as f64 / m_len as f64))
                        .sum::<C>()
                        * scale
                })
                .collect()
        })
        .collect()
}

/// `s[l + nM] = N^{-1/2} sum_k Z[l, k] exp(j 2 pi k n / N)`.
pub fn otfs_sum(z: &DdFrame) -> Vec<C> {
    let (m_len, n_len) = (z.grid().m(), z.grid().n());
    let mut s = vec![C::new(0.0, 0.0); m_len * n_len];
    for l in 0..m_len {
        for n in 0..n_len {
            let acc: C = (0..n_len)
                .map(|k| z.get(l, k) * cis(2.0 * PI * (k * n) as f64 / n_len as f64))
                .sum();
            s[l + n * m_len] = acc / (n_len as f64).sqrt();
        }
    }
    s
}

/// `phi_i = pi i^2 / P - pi i`.
pub fn p4_phase(i: usize, p: usize) -> f64 {
    PI * (i * i) as f64 / p as f64 - PI * i as f64
}

/// `s'[l N + n] = N^{-1/2} sum_k Z[l, k] exp(j phi_{(l - k) mod M}) exp(j 2 pi k n / N)`.
pub fn ticp4_sum(z: &DdFrame) -> Vec<C> {
    let (m_len, n_len) = (z.grid().m(), z.grid().n());
    let mut s = vec![C::new(0.0, 0.0); m_len * n_len];
    for l in 0..m_len {
        for n in 0..n_len {
            let acc: C = (0..n_len)
                .map(|k| {
                    let code = (l + m_len * n_len - k) % m_len;
                    z.get(l, k)
                        * cis(p4_phase(code, m_len))
                        * cis(2.0 * PI * (k * n) as f64 / n_len as f64)
                })
                .sum();
            s[l * n_len + n] = acc / (n_len as f64).sqrt();
        }
    }
    s
}

/// `chi[d, nu] = sum_q s[q] conj(s[q + d]) exp(j 2 pi nu q / Q)`, zero outside `0..Q`.
pub fn chi(s: &[C], d: isize, nu: f64) -> C {
    let q_len = s.len() as isize;
    let mut acc = C::new(0.0, 0.0);
    for q in 0..q_len {
        let p = q + d;
        if p < 0 || p >= q_len {
            continue;
        }
        acc += s[q as usize] * s[p as usize].conj() * cis(2.0 * PI * nu * q as f64 / q_len as f64);
    }
    acc
}

/// Circular cross-correlation `y[d] = sum_q rx[q] conj(ref[(q - d) mod Q])`.
pub fn circular_xcorr(rx: &[C], reference: &[C]) -> Vec<C> {
    let len = rx.len();
    (0..len)
        .map(|d| (0..len).map(|q| rx[q] * reference[(q + len - d) % len].conj()).sum())
        .collect()
}

/// Naive sidelobe scan: walk down from the peak on each side while strictly
/// decreasing, then take the maximum of everything from the stopping point outward.
pub fn sidelobe_scan(mag: &[f64], origin: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut right = origin;
    while right + 1 < mag.len() && mag[right + 1] < mag[right] {
        right += 1;
    }
    if right > origin {
        for &m in &mag[right..] {
            best = Some(best.map_or(m, |b: f64| b.max(m)));
        }
    }
    let mut left = origin;
    while left > 0 && mag[left - 1] < mag[left] {
        left -= 1;
    }
    if left < origin {
        for &m in &mag[..=left] {
            best = Some(best.map_or(m, |b: f64| b.max(m)));
        }
    }
    best
}
