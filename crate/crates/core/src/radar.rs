//! Pulse-compression range estimation.
//!
//! The echo is correlated cyclically against the transmitted frame, which is
//! consistent with the cyclic channel model, and peaks are picked greedily.

use num_complex::Complex64;

use crate::channel::{apply_channel, ChannelSpec};
use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridParams, TimeSignal};
use crate::modem::{modulate, Scheme};

/// Peak-normalized correlation magnitude per lag.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    lags: Vec<usize>,
    magnitude: Vec<f64>,
    peak: f64,
}

impl RangeProfile {
    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    /// Largest correlation magnitude before normalization.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// Builds a profile from raw magnitudes, normalizing by their maximum.
    pub fn from_magnitudes(raw: &[f64]) -> Result<Self> {
        let peak = raw.iter().copied().fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::Numerical("range profile has no energy".into()));
        }
        Ok(RangeProfile {
            lags: (0..raw.len()).collect(),
            magnitude: raw.iter().map(|m| m / peak).collect(),
            peak,
        })
    }
}

/// A detected target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub lag: usize,
    pub magnitude: f64,
}

/// Detected peaks, strongest first.
pub type PeakList = Vec<Peak>;

/// `y[d] = sum_q rx[q] conj(ref[(q - d) mod Q])` for `d = 0..Q`.
pub fn cyclic_cross_correlation(rx: &TimeSignal, reference: &TimeSignal) -> Result<Vec<Complex64>> {
    if rx.len() != reference.len() {
        return Err(Error::validation(format!(
            "echo has {} samples but the reference has {}",
            rx.len(),
            reference.len()
        )));
    }
    if rx.samples_per_chip() != reference.samples_per_chip() {
        return Err(Error::validation("echo and reference sample rates differ"));
    }
    let (x, r) = (rx.samples(), reference.samples());
    let len = x.len();
    Ok((0..len)
        .map(|d| {
            (0..len)
                .map(|q| x[q] * r[(q + len - d) % len].conj())
                .sum()
        })
        .collect())
}

/// Zero-extended variant for non-negative lags:
/// `y[d] = sum_{q >= d} rx[q] conj(ref[q - d])`, `d = 0..Q`.
pub fn aperiodic_cross_correlation(rx: &TimeSignal, reference: &TimeSignal) -> Result<Vec<Complex64>> {
    if rx.len() != reference.len() || rx.samples_per_chip() != reference.samples_per_chip() {
        return Err(Error::validation("echo and reference must share length and sample rate"));
    }
    let (x, r) = (rx.samples(), reference.samples());
    Ok((0..x.len())
        .map(|d| (d..x.len()).map(|q| x[q] * r[q - d].conj()).sum())
        .collect())
}

/// Matched filter of `rx` against `reference`, peak-normalized.
pub fn pulse_compress(rx: &TimeSignal, reference: &TimeSignal) -> Result<RangeProfile> {
    let y = cyclic_cross_correlation(rx, reference)?;
    let raw: Vec<f64> = y.iter().map(|v| v.norm()).collect();
    RangeProfile::from_magnitudes(&raw)
}

fn cyclic_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

/// Local maxima at or above `threshold`, taken strongest first and skipping
/// any within `min_separation - 1` lags (cyclically) of one already taken.
pub fn detect_peaks(profile: &RangeProfile, min_separation: usize, threshold: f64) -> Result<PeakList> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::validation(format!("threshold {threshold} is outside (0, 1]")));
    }
    if min_separation == 0 {
        return Err(Error::validation("min_separation must be at least 1"));
    }
    let mag = profile.magnitude();
    let len = mag.len();
    let mut candidates: Vec<Peak> = (0..len)
        .filter(|&i| {
            let prev = mag[(i + len - 1) % len];
            let next = mag[(i + 1) % len];
            mag[i] >= threshold && mag[i] >= prev && mag[i] >= next
        })
        .map(|i| Peak {
            lag: profile.lags()[i],
            magnitude: mag[i],
        })
        .collect();
    candidates.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.lag.cmp(&b.lag)));

    let mut picked: PeakList = Vec::new();
    for c in candidates {
        if picked
            .iter()
            .all(|p| cyclic_distance(p.lag, c.lag, len) >= min_separation)
        {
            picked.push(c);
        }
    }
    Ok(picked)
}

/// The unmodulated probe: every delay-Doppler symbol equal to one.
pub fn probe_frame(grid: &GridParams) -> DdFrame {
    DdFrame::from_fn(*grid, |_, _| Complex64::new(1.0, 0.0))
}

/// Transmits the probe through unit-gain taps and pulse-compresses the echo.
pub fn range_scenario(
    grid: &GridParams,
    scheme: Scheme,
    delay_taps: &[usize],
    doppler_taps: &[i64],
) -> Result<RangeProfile> {
    let channel = ChannelSpec::unit_gains(delay_taps, doppler_taps)?;
    let reference = modulate(&probe_frame(grid), scheme);
    let echo = apply_channel(&reference, &channel)?;
    pulse_compress(&echo, &reference)
}
