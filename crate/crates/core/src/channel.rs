//! Cyclic delay-Doppler multipath channel and AWGN.
//!
//! A tap `(h, l, k)` acting on a length-`Q` frame contributes
//! `h exp(j 2 pi k (q - l) / Q) s[(q - l) mod Q]` to output sample `q`. The
//! frame carries no cyclic prefix, so delays wrap around the frame.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeSignal;
use crate::transforms::ComplexMatrix;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub gain: Complex64,
    /// Delay in critical-rate samples.
    pub delay: usize,
    /// Doppler shift in bins of `1/(NT)`.
    pub doppler: i64,
}

/// How tap gains are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerProfile {
    /// Gains are used as given.
    #[default]
    FixedGains,
    /// Gains are redrawn per frame as `CN(0, 1/P)` for `P` taps.
    UniformRandom,
}

/// Time index the Doppler phase is referenced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerReference {
    /// `exp(j 2 pi k (q - l) / Q)`.
    #[default]
    DelayedSample,
    /// `exp(j 2 pi k q / Q)`.
    CurrentSample,
}

/// A multipath channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChannelJson")]
pub struct ChannelSpec {
    taps: Vec<Tap>,
    profile: PowerProfile,
    doppler_reference: DopplerReference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TapJson {
    #[serde(default = "one")]
    gain_re: f64,
    #[serde(default)]
    gain_im: f64,
    delay: usize,
    #[serde(default)]
    doppler: i64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChannelJson {
    taps: Vec<TapJson>,
    #[serde(default)]
    power_profile: PowerProfile,
    #[serde(default)]
    doppler_reference: DopplerReference,
}

impl TryFrom<ChannelJson> for ChannelSpec {
    type Error = Error;

    fn try_from(raw: ChannelJson) -> Result<Self> {
        let taps = raw
            .taps
            .into_iter()
            .map(|t| Tap {
                gain: Complex64::new(t.gain_re, t.gain_im),
                delay: t.delay,
                doppler: t.doppler,
            })
            .collect();
        let mut spec = ChannelSpec::new(taps, raw.power_profile)?;
        spec.doppler_reference = raw.doppler_reference;
        Ok(spec)
    }
}

impl From<ChannelSpec> for ChannelJson {
    fn from(spec: ChannelSpec) -> Self {
        ChannelJson {
            taps: spec
                .taps
                .iter()
                .map(|t| TapJson {
                    gain_re: t.gain.re,
                    gain_im: t.gain.im,
                    delay: t.delay,
                    doppler: t.doppler,
                })
                .collect(),
            power_profile: spec.profile,
            doppler_reference: spec.doppler_reference,
        }
    }
}

impl ChannelSpec {
    pub fn new(taps: Vec<Tap>, profile: PowerProfile) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::validation("a channel needs at least one tap"));
        }
        if taps
            .iter()
            .any(|t| !(t.gain.re.is_finite() && t.gain.im.is_finite()))
        {
            return Err(Error::validation("tap gains must be finite"));
        }
        Ok(ChannelSpec {
            taps,
            profile,
            doppler_reference: DopplerReference::default(),
        })
    }

    /// Unit-gain taps at the given delays and Doppler shifts.
    pub fn unit_gains(delays: &[usize], dopplers: &[i64]) -> Result<Self> {
        Self::from_lists(delays, dopplers, Complex64::new(1.0, 0.0), PowerProfile::FixedGains)
    }

    /// Uniform-power random profile; gains hold their RMS value `1/sqrt(P)`
    /// until realized with [`draw_channel`].
    pub fn uniform_random(delays: &[usize], dopplers: &[i64]) -> Result<Self> {
        let rms = 1.0 / (delays.len().max(1) as f64).sqrt();
        Self::from_lists(delays, dopplers, Complex64::new(rms, 0.0), PowerProfile::UniformRandom)
    }

    fn from_lists(
        delays: &[usize],
        dopplers: &[i64],
        gain: Complex64,
        profile: PowerProfile,
    ) -> Result<Self> {
        if delays.len() != dopplers.len() {
            return Err(Error::validation(format!(
                "{} delay taps but {} Doppler taps",
                delays.len(),
                dopplers.len()
            )));
        }
        let taps = delays
            .iter()
            .zip(dopplers)
            .map(|(&delay, &doppler)| Tap {
                gain,
                delay,
                doppler,
            })
            .collect();
        Self::new(taps, profile)
    }

    /// Identity channel.
    pub fn identity() -> Self {
        Self::unit_gains(&[0], &[0]).expect("one tap")
    }

    pub fn with_doppler_reference(mut self, reference: DopplerReference) -> Self {
        self.doppler_reference = reference;
        self
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn profile(&self) -> PowerProfile {
        self.profile
    }

    pub fn doppler_reference(&self) -> DopplerReference {
        self.doppler_reference
    }

    fn check_length(&self, len: usize) -> Result<()> {
        if let Some(t) = self.taps.iter().find(|t| t.delay >= len) {
            return Err(Error::validation(format!(
                "delay tap {} is not below the frame length {len}",
                t.delay
            )));
        }
        Ok(())
    }

    /// Phase rotation of tap `t` at output sample `q` of a length-`len` frame.
    fn doppler_phase(&self, t: &Tap, q: usize, len: usize) -> Complex64 {
        let time = match self.doppler_reference {
            DopplerReference::DelayedSample => q as i64 - t.delay as i64,
            DopplerReference::CurrentSample => q as i64,
        };
        let turns = (t.doppler * time).rem_euclid(len as i64);
        Complex64::from_polar(1.0, 2.0 * PI * turns as f64 / len as f64)
    }
}

/// Passes `s` through the cyclic multipath channel.
pub fn apply_channel(s: &TimeSignal, ch: &ChannelSpec) -> Result<TimeSignal> {
    let len = s.len();
    ch.check_length(len)?;
    let input = s.samples();
    let out = (0..len)
        .map(|q| {
            ch.taps
                .iter()
                .map(|t| t.gain * ch.doppler_phase(t, q, len) * input[(q + len - t.delay) % len])
                .sum()
        })
        .collect();
    Ok(s.with_samples(out))
}

/// Matrix `H` with `H s == apply_channel(s)` for length-`len` frames.
pub fn channel_matrix(ch: &ChannelSpec, len: usize) -> Result<ComplexMatrix> {
    if len == 0 {
        return Err(Error::validation("channel matrix needs a positive length"));
    }
    ch.check_length(len)?;
    let mut h = DMatrix::zeros(len, len);
    for t in &ch.taps {
        for q in 0..len {
            h[(q, (q + len - t.delay) % len)] += t.gain * ch.doppler_phase(t, q, len);
        }
    }
    Ok(h)
}

/// Sentinel SNR meaning "no noise".
pub const NOISELESS_SNR_DB: f64 = f64::INFINITY;

/// Draws `len` samples of `CN(0, variance)`.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, len: usize, variance: f64) -> Vec<Complex64> {
    let sigma = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * sigma, im * sigma)
        })
        .collect()
}

/// Adds complex white Gaussian noise at `snr_db` relative to the mean
/// per-sample power of `s`. Returns the noisy signal and the noise variance.
pub fn add_awgn(s: &TimeSignal, snr_db: f64, rng_seed: u64) -> (TimeSignal, f64) {
    if snr_db == f64::INFINITY {
        return (s.clone(), 0.0);
    }
    let noise_var = s.mean_power() / 10f64.powf(snr_db / 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = complex_gaussian(&mut rng, s.len(), noise_var);
    let out = s.samples().iter().zip(noise).map(|(x, w)| x + w).collect();
    (s.with_samples(out), noise_var)
}

/// Realizes a uniform-power profile: each of the `P` gains is drawn as
/// `CN(0, 1/P)`. Fixed-gain profiles are returned unchanged.
pub fn draw_channel(profile: &ChannelSpec, rng_seed: u64) -> ChannelSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    draw_channel_with(profile, &mut rng)
}

pub(crate) fn draw_channel_with<R: Rng>(profile: &ChannelSpec, rng: &mut R) -> ChannelSpec {
    if profile.profile == PowerProfile::FixedGains {
        return profile.clone();
    }
    let p = profile.taps.len();
    let gains = complex_gaussian(rng, p, 1.0 / p as f64);
    ChannelSpec {
        taps: profile
            .taps
            .iter()
            .zip(gains)
            .map(|(t, gain)| Tap { gain, ..*t })
            .collect(),
        profile: PowerProfile::FixedGains,
        doppler_reference: profile.doppler_reference,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sig(v: &[Complex64]) -> TimeSignal {
        TimeSignal::from_samples(v.to_vec(), 1).unwrap()
    }

    #[test]
    fn identity_tap() {
        let s = sig(&[c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 3.0)]);
        assert_eq!(apply_channel(&s, &ChannelSpec::identity()).unwrap(), s);
    }

    #[test]
    fn pure_delay_is_cyclic_shift() {
        let (a, b, cc, d) = (c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0));
        let ch = ChannelSpec::unit_gains(&[2], &[0]).unwrap();
        let out = apply_channel(&sig(&[a, b, cc, d]), &ch).unwrap();
        assert_eq!(out.samples(), &[cc, d, a, b]);
    }

    #[test]
    fn pure_doppler_rotates() {
        let ch = ChannelSpec::unit_gains(&[0], &[1]).unwrap();
        let out = apply_channel(&sig(&[c(1.0, 0.0); 4]), &ch).unwrap();
        let want = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for (g, w) in out.samples().iter().zip(want) {
            assert!((g - w).norm() < 1e-15);
        }
    }

    #[test]
    fn doppler_reference_modes_differ_by_tap_phase() {
        let taps = [Tap { gain: c(1.0, 0.0), delay: 1, doppler: 1 }];
        let delayed = ChannelSpec::new(taps.to_vec(), PowerProfile::FixedGains).unwrap();
        let current = delayed.clone().with_doppler_reference(DopplerReference::CurrentSample);
        let s = sig(&[c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0), c(0.5, 0.5)]);
        let a = apply_channel(&s, &delayed).unwrap();
        let b = apply_channel(&s, &current).unwrap();
        // current-sample reference adds a constant exp(j 2 pi k l / Q)
        let rot = Complex64::from_polar(1.0, 2.0 * PI / 4.0);
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x * rot - y).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_delay_beyond_frame() {
        let ch = ChannelSpec::unit_gains(&[4], &[0]).unwrap();
        assert!(apply_channel(&sig(&[c(1.0, 0.0); 4]), &ch).is_err());
        assert!(channel_matrix(&ch, 4).is_err());
        assert!(ChannelSpec::unit_gains(&[1, 2], &[0]).is_err());
        assert!(ChannelSpec::new(vec![], PowerProfile::FixedGains).is_err());
    }

    #[test]
    fn identity_and_delay_matrices() {
        let eye = channel_matrix(&ChannelSpec::identity(), 4).unwrap();
        assert_eq!(eye, DMatrix::identity(4, 4));
        let shift = channel_matrix(&ChannelSpec::unit_gains(&[1], &[0]).unwrap(), 4).unwrap();
        for q in 0..4 {
            for p in 0..4 {
                let want = if p == (q + 3) % 4 { 1.0 } else { 0.0 };
                assert_eq!(shift[(q, p)], c(want, 0.0));
            }
        }
    }

    #[test]
    fn noiseless_sentinel() {
        let s = sig(&[c(1.0, 1.0), c(2.0, 0.0)]);
        let (out, var) = add_awgn(&s, NOISELESS_SNR_DB, 3);
        assert_eq!(out, s);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn awgn_is_deterministic() {
        let s = sig(&[c(1.0, 0.0); 64]);
        let (a, va) = add_awgn(&s, 3.0, 42);
        let (b, vb) = add_awgn(&s, 3.0, 42);
        assert_eq!(a, b);
        assert_eq!(va, vb);
        let (d, _) = add_awgn(&s, 3.0, 43);
        assert_ne!(a, d);
        assert!((va - 10f64.powf(-0.3)).abs() < 1e-15);
    }

    #[test]
    fn draw_is_deterministic_and_fixes_profile() {
        let prof = ChannelSpec::uniform_random(&[0, 1, 2, 3], &[0, 1, 2, 3]).unwrap();
        let a = draw_channel(&prof, 9);
        assert_eq!(a, draw_channel(&prof, 9));
        assert_ne!(a, draw_channel(&prof, 10));
        assert_eq!(a.profile(), PowerProfile::FixedGains);
        assert_eq!(a.taps().iter().map(|t| t.delay).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn json_schema() {
        let json = r#"{"taps":[{"gain_re":0.5,"gain_im":-0.5,"delay":1,"doppler":2},{"gain_re":1.0,"gain_im":0.0,"delay":0,"doppler":0}]}"#;
        let ch: ChannelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(ch.taps()[0].gain, c(0.5, -0.5));
        assert_eq!(ch.taps()[0].doppler, 2);
        assert_eq!(ch.profile(), PowerProfile::FixedGains);
        let back: ChannelSpec = serde_json::from_str(&serde_json::to_string(&ch).unwrap()).unwrap();
        assert_eq!(back, ch);
        assert!(serde_json::from_str::<ChannelSpec>(r#"{"taps":[]}"#).is_err());
    }
}
