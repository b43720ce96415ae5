//! 4-QAM mapping, LMMSE detection through the composite channel-plus-modem
//! matrix, and the Monte-Carlo BER harness.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, apply_channel, channel_matrix, draw_channel_with, ChannelSpec};
use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridParams, TimeSignal};
use crate::modem::{modulate, tx_matrix, Scheme, TxMatrix};
use crate::transforms::ComplexMatrix;

/// Binary payload for one 4-QAM frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    bits: Vec<u8>,
}

impl BitBlock {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if !bits.len().is_multiple_of(2) {
            return Err(Error::validation(format!(
                "4-QAM needs an even number of bits, got {}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::validation("bits must be 0 or 1"));
        }
        Ok(BitBlock { bits })
    }

    /// Uniform random payload for `symbols` 4-QAM symbols.
    pub fn random<R: Rng>(symbols: usize, rng: &mut R) -> Self {
        BitBlock {
            bits: (0..2 * symbols).map(|_| rng.random_range(0..2u8)).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of positions where the two blocks differ.
    pub fn hamming_distance(&self, other: &BitBlock) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Gray-coded, unit-energy 4-QAM: `(b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
/// Symbols fill the frame column-major (delay first).
pub fn qam4_map(bits: &BitBlock, grid: &GridParams) -> Result<DdFrame> {
    if bits.len() != 2 * grid.len() {
        return Err(Error::validation(format!(
            "a {}x{} frame needs {} bits, got {}",
            grid.m(),
            grid.n(),
            2 * grid.len(),
            bits.len()
        )));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let symbols: Vec<Complex64> = bits
        .bits
        .chunks_exact(2)
        .map(|p| Complex64::new(1.0 - 2.0 * p[0] as f64, 1.0 - 2.0 * p[1] as f64) * scale)
        .collect();
    DdFrame::from_vec(*grid, &symbols)
}

/// Hard-decision inverse of [`qam4_map`].
pub fn qam4_demap(frame: &DdFrame) -> BitBlock {
    let bits = frame
        .as_vec()
        .iter()
        .flat_map(|z| [u8::from(z.re < 0.0), u8::from(z.im < 0.0)])
        .collect();
    BitBlock { bits }
}

/// Systems whose squared Cholesky pivot ratio falls below this are treated
/// as singular.
const MIN_RECIPROCAL_CONDITION: f64 = 1e-13;

/// LMMSE estimator for a fixed composite matrix `G = H A`:
/// `z = (G^H G + s2 I)^{-1} G^H r`.
#[derive(Debug, Clone)]
pub struct LmmseDetector {
    grid: GridParams,
    gram: ComplexMatrix,
    g_h: ComplexMatrix,
}

impl LmmseDetector {
    pub fn new(h: &ComplexMatrix, a: &TxMatrix) -> Result<Self> {
        let len = a.grid().len();
        if h.nrows() != len || h.ncols() != len {
            return Err(Error::validation(format!(
                "channel matrix is {}x{}, expected {len}x{len}",
                h.nrows(),
                h.ncols()
            )));
        }
        let g = h * a.data();
        let g_h = g.adjoint();
        let gram = &g_h * &g;
        Ok(LmmseDetector {
            grid: *a.grid(),
            gram,
            g_h,
        })
    }

    pub fn detect(&self, r: &TimeSignal, noise_var: f64) -> Result<DdFrame> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::validation(format!("noise variance {noise_var} is invalid")));
        }
        if r.len() != self.grid.len() {
            return Err(Error::validation(format!(
                "received {} samples, expected {}",
                r.len(),
                self.grid.len()
            )));
        }
        let len = self.grid.len();
        let system = &self.gram + DMatrix::<Complex64>::identity(len, len) * Complex64::new(noise_var, 0.0);
        let rhs = &self.g_h * DVector::from_column_slice(r.samples());
        let singular = || Error::Numerical("LMMSE system matrix is singular".into());
        let z = match system.clone().cholesky() {
            Some(chol) => {
                let pivots = chol.l_dirty().diagonal().map(|d| d.re);
                let (lo, hi) = (pivots.min(), pivots.max());
                if !(lo > 0.0 && (lo / hi).powi(2) > MIN_RECIPROCAL_CONDITION) {
                    return Err(singular());
                }
                chol.solve(&rhs)
            }
            None => system.lu().solve(&rhs).ok_or_else(singular)?,
        };
        if z.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(Error::Numerical("LMMSE solve produced non-finite values".into()));
        }
        DdFrame::from_vec(self.grid, z.as_slice())
    }
}

/// One-shot LMMSE detection of `r` through channel `h` and transmit matrix `a`.
pub fn lmmse_detect(
    r: &TimeSignal,
    h: &ComplexMatrix,
    a: &TxMatrix,
    noise_var: f64,
) -> Result<DdFrame> {
    LmmseDetector::new(h, a)?.detect(r, noise_var)
}

/// Bit-error statistics at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    /// Frames dropped because the detector failed numerically.
    pub discarded_frames: u64,
}

impl BerPoint {
    /// Binomial standard error `sqrt(p (1 - p) / n)`.
    pub fn standard_error(&self) -> f64 {
        if self.bits_total == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.bits_total as f64).sqrt()
    }
}

/// Parameters of a BER sweep.
#[derive(Debug, Clone)]
pub struct BerConfig {
    pub grid: GridParams,
    pub snr_db: Vec<f64>,
    pub frames: usize,
    pub channel: ChannelSpec,
    pub seed: u64,
}

/// Per-trial seed, `base xor trial`.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    base ^ trial
}

#[derive(Clone, Copy, Default)]
struct Tally {
    errors: u64,
    bits: u64,
    discarded: u64,
}

/// Runs the BER sweep for one scheme.
///
/// Frame `f` draws its channel, payload and unit noise from the seed
/// `trial_seed(seed, f)` only, so every scheme and every SNR point sees the
/// same realizations.
pub fn ber_experiment(config: &BerConfig, scheme: Scheme) -> Result<Vec<BerPoint>> {
    if config.frames == 0 {
        return Err(Error::validation("frames must be at least 1"));
    }
    if config.snr_db.iter().any(|s| s.is_nan()) {
        return Err(Error::validation("SNR values must not be NaN"));
    }
    let grid = config.grid;
    let a = tx_matrix(&grid, scheme);
    let points = config.snr_db.len();

    let per_frame: Vec<Result<Vec<Tally>>> = (0..config.frames as u64)
        .into_par_iter()
        .map(|f| run_frame(config, scheme, &a, trial_seed(config.seed, f)))
        .collect();

    let mut totals = vec![Tally::default(); points];
    for frame in per_frame {
        for (t, add) in totals.iter_mut().zip(frame?) {
            t.errors += add.errors;
            t.bits += add.bits;
            t.discarded += add.discarded;
        }
    }
    Ok(config
        .snr_db
        .iter()
        .zip(totals)
        .map(|(&snr_db, t)| BerPoint {
            scheme,
            snr_db,
            bit_errors: t.errors,
            bits_total: t.bits,
            ber: if t.bits == 0 { 0.0 } else { t.errors as f64 / t.bits as f64 },
            discarded_frames: t.discarded,
        })
        .collect())
}

fn run_frame(config: &BerConfig, scheme: Scheme, a: &TxMatrix, seed: u64) -> Result<Vec<Tally>> {
    let grid = config.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channel = draw_channel_with(&config.channel, &mut rng);
    let bits = BitBlock::random(grid.len(), &mut rng);
    let noise_seed: u64 = rng.random();

    let tx = modulate(&qam4_map(&bits, &grid)?, scheme);
    let rx_clean = apply_channel(&tx, &channel)?;
    let detector = LmmseDetector::new(&channel_matrix(&channel, grid.len())?, a)?;

    config
        .snr_db
        .iter()
        .map(|&snr| {
            let (rx, noise_var) = add_awgn(&rx_clean, snr, noise_seed);
            Ok(match detector.detect(&rx, noise_var) {
                Ok(est) => Tally {
                    errors: qam4_demap(&est).hamming_distance(&bits) as u64,
                    bits: bits.len() as u64,
                    discarded: 0,
                },
                Err(Error::Numerical(_)) => Tally {
                    discarded: 1,
                    ..Tally::default()
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}
