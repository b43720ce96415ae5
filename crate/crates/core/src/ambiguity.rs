//! Discretized ambiguity function and the sensing metrics derived from it.
//!
//! For a sampled waveform `s[q]`, `q = 0..Q`,
//! `chi[d, nu] = sum_q s[q] conj(s[q + d]) exp(j 2 pi nu q / Q)`
//! with zero extension outside the frame (aperiodic correlation). Lags are
//! reported in units of one delay bin `T/M` and Doppler in units of one
//! Doppler bin `1/(NT)`; since the `Q` samples always span the frame
//! duration, a Doppler bin is one cycle per frame.
//!
//! The zero-Doppler cut is the aperiodic autocorrelation of `s`. The
//! zero-delay cut is the autocorrelation of the spectrum, which by
//! Parseval equals `sum_q |s[q]|^2 exp(j 2 pi nu q / Q)`; both routes are
//! provided.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Energy, TimeSignal};

/// dB value assigned to numerically zero magnitudes (relative amplitude 1e-12).
pub const DB_FLOOR: f64 = -240.0;

/// Amplitude dB, `20 log10(x)`, clamped at [`DB_FLOOR`].
pub fn amplitude_db(x: f64) -> f64 {
    (20.0 * x.log10()).max(DB_FLOOR)
}

/// Uniform Doppler sampling over `[-span/2, span/2)` bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerGrid {
    pub points: usize,
    pub span_bins: f64,
}

impl DopplerGrid {
    /// Integer bins `-n/2 .. n/2`, one point per bin.
    pub fn integer_bins(n: usize) -> Self {
        DopplerGrid {
            points: n,
            span_bins: n as f64,
        }
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = self.span_bins / self.points as f64;
        (0..self.points)
            .map(|i| -self.span_bins / 2.0 + i as f64 * step)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::validation("doppler_points must be at least 1"));
        }
        if !(self.span_bins.is_finite() && self.span_bins > 0.0) {
            return Err(Error::validation("Doppler span must be positive and finite"));
        }
        Ok(())
    }
}

/// Peak-normalized ambiguity surface; rows are lags, columns Doppler shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySurface {
    values: DMatrix<Complex64>,
    lags: Vec<isize>,
    delay_axis: Vec<f64>,
    doppler_axis: Vec<f64>,
    peak: f64,
}

impl AmbiguitySurface {
    /// Complex values normalized by the zero-lag, zero-Doppler value.
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    /// Integer sample lags, one per row.
    pub fn lags(&self) -> &[isize] {
        &self.lags
    }

    /// Row axis in delay bins.
    pub fn delay_axis(&self) -> &[f64] {
        &self.delay_axis
    }

    /// Column axis in Doppler bins.
    pub fn doppler_axis(&self) -> &[f64] {
        &self.doppler_axis
    }

    /// `|chi(0, 0)|` before normalization, the signal energy.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn magnitude(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)].norm()
    }

    /// Row index of lag `d` (in samples), if present.
    pub fn row_of_lag(&self, lag: isize) -> Option<usize> {
        let max_lag = (self.lags.len() / 2) as isize;
        (lag.abs() <= max_lag).then(|| (lag + max_lag) as usize)
    }
}

/// `sum_q a[q] conj(a[q + d]) exp(j 2 pi nu q / Q)` with zero extension.
fn ambiguity_value(s: &[Complex64], lag: isize, nu: f64) -> Complex64 {
    let q_len = s.len() as isize;
    let start = 0.max(-lag);
    let end = q_len.min(q_len - lag);
    let w = 2.0 * PI * nu / q_len as f64;
    (start..end)
        .map(|q| s[q as usize] * s[(q + lag) as usize].conj() * Complex64::from_polar(1.0, w * q as f64))
        .sum()
}

fn nonzero_energy(s: &TimeSignal) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::validation("ambiguity of an empty signal"));
    }
    let energy = s.energy();
    if energy <= 0.0 {
        return Err(Error::validation("ambiguity of a zero-energy signal"));
    }
    Ok(energy)
}

/// Surface over lags `-max_lag..=max_lag` (samples) and the given Doppler grid.
///
/// Doppler columns are evaluated in parallel; each column is an independent
/// sequential sum, so the result does not depend on the worker count.
pub fn ambiguity_surface(
    s: &TimeSignal,
    max_lag: usize,
    doppler: DopplerGrid,
) -> Result<AmbiguitySurface> {
    let energy = nonzero_energy(s)?;
    doppler.validate()?;
    if max_lag >= s.len() {
        return Err(Error::validation(format!(
            "max_lag {max_lag} must be below the signal length {}",
            s.len()
        )));
    }
    let samples = s.samples();
    let lags: Vec<isize> = (-(max_lag as isize)..=max_lag as isize).collect();
    let doppler_axis = doppler.axis();
    let columns: Vec<Vec<Complex64>> = doppler_axis
        .par_iter()
        .map(|&nu| {
            lags.iter()
                .map(|&d| ambiguity_value(samples, d, nu) / energy)
                .collect()
        })
        .collect();
    let values = DMatrix::from_fn(lags.len(), doppler_axis.len(), |r, c| columns[c][r]);
    let spc = s.samples_per_chip() as f64;
    let delay_axis = lags.iter().map(|&d| d as f64 / spc).collect();
    Ok(AmbiguitySurface {
        values,
        lags,
        delay_axis,
        doppler_axis,
        peak: energy,
    })
}

/// One-dimensional, peak-normalized slice of the ambiguity function.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityCut {
    axis: Vec<f64>,
    magnitude: Vec<f64>,
    magnitude_db: Vec<f64>,
    origin: usize,
    spacing: f64,
}

impl AmbiguityCut {
    fn from_values(axis: Vec<f64>, values: &[Complex64], origin: usize, spacing: f64) -> Self {
        let reference = values[origin].norm();
        let magnitude: Vec<f64> = values.iter().map(|v| v.norm() / reference).collect();
        let magnitude_db = magnitude.iter().map(|&m| amplitude_db(m)).collect();
        AmbiguityCut {
            axis,
            magnitude,
            magnitude_db,
            origin,
            spacing,
        }
    }

    /// Builds a cut from linear magnitudes; `origin` indexes the axis zero.
    pub fn from_magnitudes(axis: Vec<f64>, magnitude: Vec<f64>, origin: usize) -> Result<Self> {
        if axis.is_empty() || axis.len() != magnitude.len() || origin >= axis.len() {
            return Err(Error::validation("cut axis and magnitudes must be non-empty and aligned"));
        }
        let values: Vec<Complex64> = magnitude.iter().map(|&m| Complex64::new(m, 0.0)).collect();
        if values[origin].norm() <= 0.0 {
            return Err(Error::validation("cut has zero magnitude at its origin"));
        }
        let spacing = if axis.len() > 1 { axis[1] - axis[0] } else { 1.0 };
        Ok(Self::from_values(axis, &values, origin, spacing))
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Linear magnitude relative to the origin.
    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    /// `20 log10` of [`Self::magnitude`], floored at [`DB_FLOOR`].
    pub fn magnitude_db(&self) -> &[f64] {
        &self.magnitude_db
    }

    /// Index of the axis origin.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Axis step in axis units.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }
}

/// Zero-Doppler cut: aperiodic autocorrelation over lags `-(Q-1)..=(Q-1)`.
pub fn delay_cut(s: &TimeSignal) -> Result<AmbiguityCut> {
    nonzero_energy(s)?;
    let samples = s.samples();
    let q_len = samples.len() as isize;
    let values: Vec<Complex64> = (-(q_len - 1)..q_len)
        .map(|d| ambiguity_value(samples, d, 0.0))
        .collect();
    let spc = s.samples_per_chip() as f64;
    let axis = (-(q_len - 1)..q_len).map(|d| d as f64 / spc).collect();
    Ok(AmbiguityCut::from_values(axis, &values, (q_len - 1) as usize, 1.0 / spc))
}

/// How the zero-delay cut is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DopplerRoute {
    /// Autocorrelation of the unitary length-`Q` DFT of the signal.
    Spectral,
    /// `sum_q |s[q]|^2 exp(j 2 pi nu q / Q)`.
    TimeDual,
}

/// Integer Doppler bins covered by a cut of a length-`q_len` signal.
pub fn doppler_cut_bins(q_len: usize) -> std::ops::Range<isize> {
    let half = (q_len / 2) as isize;
    -half..(q_len as isize - half)
}

/// Complex zero-delay autocorrelation at integer Doppler bins, unnormalized.
pub fn doppler_autocorrelation(s: &TimeSignal, route: DopplerRoute) -> Result<Vec<Complex64>> {
    nonzero_energy(s)?;
    let samples = s.samples();
    let q_len = samples.len();
    let bins = doppler_cut_bins(q_len);
    Ok(match route {
        DopplerRoute::Spectral => {
            let spectrum = unitary_dft(samples);
            // the DFT grid is periodic, so spectral shifts wrap
            bins.map(|nu| {
                let shift = nu.rem_euclid(q_len as isize) as usize;
                (0..q_len)
                    .map(|f| spectrum[f] * spectrum[(f + shift) % q_len].conj())
                    .sum()
            })
            .collect()
        }
        DopplerRoute::TimeDual => bins.map(|nu| ambiguity_value(samples, 0, nu as f64)).collect(),
    })
}

fn unitary_dft(samples: &[Complex64]) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft_forward(samples.len());
    let mut buf = samples.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (samples.len() as f64).sqrt();
    buf.iter_mut().for_each(|x| *x *= scale);
    buf
}

/// Zero-delay cut over integer Doppler bins, via the spectral route.
pub fn doppler_cut(s: &TimeSignal) -> Result<AmbiguityCut> {
    doppler_cut_with(s, DopplerRoute::Spectral)
}

pub fn doppler_cut_with(s: &TimeSignal, route: DopplerRoute) -> Result<AmbiguityCut> {
    let values = doppler_autocorrelation(s, route)?;
    let bins = doppler_cut_bins(s.len());
    let origin = (-bins.start) as usize;
    let axis = bins.map(|nu| nu as f64).collect();
    Ok(AmbiguityCut::from_values(axis, &values, origin, 1.0))
}

/// Result of [`mainlobe_width`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainlobeWidth {
    /// Width in axis units.
    pub width: f64,
    /// The cut never dropped below the threshold; `width` is the full span.
    pub saturated: bool,
}

/// Width of the contiguous region around the origin with
/// `magnitude_db >= threshold_db`, counted in bins times the axis step.
pub fn mainlobe_width(cut: &AmbiguityCut, threshold_db: f64) -> MainlobeWidth {
    let db = cut.magnitude_db();
    let mut hi = cut.origin;
    while hi + 1 < db.len() && db[hi + 1] >= threshold_db {
        hi += 1;
    }
    let mut lo = cut.origin;
    while lo > 0 && db[lo - 1] >= threshold_db {
        lo -= 1;
    }
    let saturated = lo == 0 && hi + 1 == db.len();
    MainlobeWidth {
        width: (hi - lo + 1) as f64 * cut.spacing,
        saturated,
    }
}

/// Indices outside the mainlobe. The mainlobe runs from the origin down to
/// the first local minimum on each side; the minima themselves are counted
/// as outside.
pub fn sidelobe_indices(cut: &AmbiguityCut) -> Vec<usize> {
    let mag = cut.magnitude();
    let mut hi = cut.origin;
    while hi + 1 < mag.len() && mag[hi + 1] < mag[hi] {
        hi += 1;
    }
    let mut lo = cut.origin;
    while lo > 0 && mag[lo - 1] < mag[lo] {
        lo -= 1;
    }
    let mut out = Vec::new();
    if lo < cut.origin {
        out.extend(0..=lo);
    }
    if hi > cut.origin {
        out.extend(hi..mag.len());
    }
    out
}

/// Highest `magnitude_db` outside the mainlobe.
///
/// Fails when the cut has no samples outside the mainlobe or all of them are
/// numerically zero.
pub fn peak_sidelobe_db(cut: &AmbiguityCut) -> Result<f64> {
    let db = cut.magnitude_db();
    let best = sidelobe_indices(cut)
        .into_iter()
        .map(|i| db[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if best <= DB_FLOOR {
        return Err(Error::Numerical("cut has no sidelobes".into()));
    }
    Ok(best)
}
