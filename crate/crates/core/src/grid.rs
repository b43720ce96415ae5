//! Grid geometry and the frame containers shared by every other module.
//!
//! Index conventions:
//! - `DdFrame[l, k]`: delay bin `l` (row), Doppler bin `k` (column).
//! - `TfFrame[m, n]`: subcarrier `m` (row), time slot `n` (column).
//! - `DtFrame[l, n]`: delay bin `l` (row), time slot `n` (column).
//! - `TimeSignal[q]`: serial sample index.
//!
//! Matrices are stored column-major, so a column is a fixed Doppler bin or a
//! fixed time slot, and `vec()` of a frame is its storage order.
//!
//! The continuous Zak transform of a signal `s(t)` over the fundamental
//! region `tau in [0, T), nu in [0, 1/T)` is
//! `Z(tau, nu) = sqrt(T) * sum_n s(tau + nT) exp(-j 2 pi n T nu)`. Sampling
//! delay at `T/M` and Doppler at `1/(NT)` gives the discrete grid used here;
//! only the discrete form is implemented.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default oversampling used to approximate the analog waveform.
pub const DEFAULT_OVERSAMPLING: usize = 4;

/// Delay-Doppler grid geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct GridParams {
    m: usize,
    n: usize,
    slot_duration: f64,
    subcarrier_spacing: f64,
    oversampling: usize,
}

/// Serialized form of [`GridParams`]; validated on conversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T", default = "default_slot_duration")]
    pub slot_duration: f64,
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
}

fn default_slot_duration() -> f64 {
    1.0
}

fn default_oversampling() -> usize {
    DEFAULT_OVERSAMPLING
}

impl TryFrom<GridSpec> for GridParams {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        GridParams::new(spec.m, spec.n, spec.slot_duration, spec.oversampling)
    }
}

impl From<GridParams> for GridSpec {
    fn from(grid: GridParams) -> Self {
        GridSpec {
            m: grid.m,
            n: grid.n,
            slot_duration: grid.slot_duration,
            oversampling: grid.oversampling,
        }
    }
}

impl GridParams {
    /// Builds a grid with `M` delay bins, `N` Doppler bins and slot duration `t`.
    /// The subcarrier spacing is fixed to `1/t`.
    pub fn new(m: usize, n: usize, t: f64, oversampling: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::validation("M must be at least 1"));
        }
        if n == 0 {
            return Err(Error::validation("N must be at least 1"));
        }
        if oversampling == 0 {
            return Err(Error::validation("oversampling must be at least 1"));
        }
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::validation(format!(
                "slot duration T must be positive and finite, got {t}"
            )));
        }
        Ok(GridParams {
            m,
            n,
            slot_duration: t,
            subcarrier_spacing: 1.0 / t,
            oversampling,
        })
    }

    /// Grid with `T = 1` and the default oversampling factor.
    pub fn normalized(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, 1.0, DEFAULT_OVERSAMPLING)
    }

    /// Number of delay bins (subcarriers).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins (time slots).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Samples per frame at the critical rate, `M*N`.
    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.subcarrier_spacing
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    /// Frame duration `N*T`.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.slot_duration
    }

    /// Occupied bandwidth `M*delta_f`.
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.subcarrier_spacing
    }

    /// Critical sample rate `M/T`.
    pub fn critical_rate(&self) -> f64 {
        self.m as f64 / self.slot_duration
    }

    /// Delay resolution `T/M` (one critical sample).
    pub fn delay_resolution(&self) -> f64 {
        self.slot_duration / self.m as f64
    }

    /// Doppler resolution `1/(NT)`.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    /// Same geometry with a different oversampling factor.
    pub fn with_oversampling(&self, oversampling: usize) -> Result<Self> {
        Self::new(self.m, self.n, self.slot_duration, oversampling)
    }
}

/// Common access to the three `M x N` frame containers.
pub trait Frame: Sized {
    fn grid(&self) -> &GridParams;
    fn data(&self) -> &DMatrix<Complex64>;
    fn from_grid_data(grid: GridParams, data: DMatrix<Complex64>) -> Result<Self>;
}

/// Anything whose total energy `sum |x|^2` can be measured.
pub trait Energy {
    fn energy(&self) -> f64;
}

/// Sum of squared magnitudes of all entries.
pub fn frame_energy<E: Energy + ?Sized>(frame: &E) -> f64 {
    frame.energy()
}

pub(crate) fn energy_of(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm_sqr()).sum()
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(format!("{what} contains non-finite entries")))
    }
}

macro_rules! grid_frame {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            grid: GridParams,
            data: DMatrix<Complex64>,
        }

        impl $name {
            /// Wraps an `M x N` matrix, rejecting wrong shapes and non-finite entries.
            pub fn new(grid: GridParams, data: DMatrix<Complex64>) -> Result<Self> {
                if data.nrows() != grid.m() || data.ncols() != grid.n() {
                    return Err(Error::validation(format!(
                        "{} must be {}x{}, got {}x{}",
                        $what,
                        grid.m(),
                        grid.n(),
                        data.nrows(),
                        data.ncols()
                    )));
                }
                check_finite(data.as_slice(), $what)?;
                Ok(Self { grid, data })
            }

            pub fn zeros(grid: GridParams) -> Self {
                Self {
                    grid,
                    data: DMatrix::zeros(grid.m(), grid.n()),
                }
            }

            pub fn from_fn(grid: GridParams, f: impl FnMut(usize, usize) -> Complex64) -> Self {
                let data = DMatrix::from_fn(grid.m(), grid.n(), f);
                Self { grid, data }
            }

            /// Builds a frame from its column-major vectorization.
            pub fn from_vec(grid: GridParams, values: &[Complex64]) -> Result<Self> {
                if values.len() != grid.len() {
                    return Err(Error::validation(format!(
                        "{} needs {} values, got {}",
                        $what,
                        grid.len(),
                        values.len()
                    )));
                }
                Self::new(grid, DMatrix::from_column_slice(grid.m(), grid.n(), values))
            }

            pub fn grid(&self) -> &GridParams {
                &self.grid
            }

            pub fn data(&self) -> &DMatrix<Complex64> {
                &self.data
            }

            pub fn into_data(self) -> DMatrix<Complex64> {
                self.data
            }

            /// Column-major vectorization.
            pub fn as_vec(&self) -> &[Complex64] {
                self.data.as_slice()
            }

            pub fn get(&self, row: usize, col: usize) -> Complex64 {
                self.data[(row, col)]
            }

            /// Largest entrywise distance to another frame of the same shape.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.data
                    .iter()
                    .zip(other.data.iter())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            }

            /// Entries drawn i.i.d. from `CN(0, 1)`.
            pub fn random_gaussian<R: rand::Rng>(grid: GridParams, rng: &mut R) -> Self {
                let values = crate::channel::complex_gaussian(rng, grid.len(), 1.0);
                Self::from_parts_unchecked(grid, DMatrix::from_column_slice(grid.m(), grid.n(), &values))
            }

            pub(crate) fn from_parts_unchecked(grid: GridParams, data: DMatrix<Complex64>) -> Self {
                debug_assert_eq!((data.nrows(), data.ncols()), (grid.m(), grid.n()));
                Self { grid, data }
            }
        }

        impl Frame for $name {
            fn grid(&self) -> &GridParams {
                &self.grid
            }

            fn data(&self) -> &DMatrix<Complex64> {
                &self.data
            }

            fn from_grid_data(grid: GridParams, data: DMatrix<Complex64>) -> Result<Self> {
                Self::new(grid, data)
            }
        }

        impl Energy for $name {
            fn energy(&self) -> f64 {
                energy_of(self.data.as_slice())
            }
        }
    };
}

grid_frame!(
    /// Delay-Doppler symbols `Z[l, k]`.
    DdFrame,
    "delay-Doppler frame"
);
grid_frame!(
    /// Time-frequency symbols `X[m, n]`.
    TfFrame,
    "time-frequency frame"
);
grid_frame!(
    /// Delay-time samples `S[l, n]`.
    DtFrame,
    "delay-time frame"
);

/// Sampling regime of a [`TimeSignal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalOrigin {
    /// One sample per delay bin, `M*N` samples at rate `M/T`.
    BasebandCritical,
    /// `factor` samples per delay bin.
    Oversampled { factor: usize },
}

impl SignalOrigin {
    /// Samples per critical-rate chip.
    pub fn samples_per_chip(&self) -> usize {
        match *self {
            SignalOrigin::BasebandCritical => 1,
            SignalOrigin::Oversampled { factor } => factor,
        }
    }
}

/// Complex baseband samples with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
    origin: SignalOrigin,
}

impl TimeSignal {
    /// Critical-rate signal for `grid`; length must be `M*N`.
    pub fn critical(grid: &GridParams, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::validation(format!(
                "critical-rate signal needs {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        check_finite(&samples, "time signal")?;
        Ok(TimeSignal {
            samples,
            sample_rate: grid.critical_rate(),
            origin: SignalOrigin::BasebandCritical,
        })
    }

    /// Oversampled signal for `grid`; length must be `oversampling*M*N`.
    pub fn oversampled(grid: &GridParams, samples: Vec<Complex64>) -> Result<Self> {
        let factor = grid.oversampling();
        if samples.len() != factor * grid.len() {
            return Err(Error::validation(format!(
                "oversampled signal needs {} samples, got {}",
                factor * grid.len(),
                samples.len()
            )));
        }
        check_finite(&samples, "time signal")?;
        Ok(TimeSignal {
            samples,
            sample_rate: grid.critical_rate() * factor as f64,
            origin: SignalOrigin::Oversampled { factor },
        })
    }

    /// Free-standing signal in normalized units (one chip per unit time),
    /// with `samples_per_chip` samples per delay bin.
    pub fn from_samples(samples: Vec<Complex64>, samples_per_chip: usize) -> Result<Self> {
        if samples_per_chip == 0 {
            return Err(Error::validation("samples_per_chip must be at least 1"));
        }
        check_finite(&samples, "time signal")?;
        let origin = if samples_per_chip == 1 {
            SignalOrigin::BasebandCritical
        } else {
            SignalOrigin::Oversampled {
                factor: samples_per_chip,
            }
        };
        Ok(TimeSignal {
            samples,
            sample_rate: samples_per_chip as f64,
            origin,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn origin(&self) -> SignalOrigin {
        self.origin
    }

    pub fn samples_per_chip(&self) -> usize {
        self.origin.samples_per_chip()
    }

    pub fn is_critical(&self) -> bool {
        self.origin == SignalOrigin::BasebandCritical
    }

    /// Mean per-sample power.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Largest samplewise distance to another signal of the same length.
    pub fn max_abs_diff(&self, other: &TimeSignal) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Same metadata, new samples. Length is not re-checked.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> TimeSignal {
        TimeSignal {
            samples,
            sample_rate: self.sample_rate,
            origin: self.origin,
        }
    }

    /// Checks that this is a critical-rate frame for `grid`.
    pub(crate) fn expect_critical(&self, grid: &GridParams) -> Result<()> {
        if !self.is_critical() {
            return Err(Error::validation("expected a critical-rate signal"));
        }
        if self.samples.len() != grid.len() {
            return Err(Error::validation(format!(
                "signal length {} does not match M*N = {}",
                self.samples.len(),
                grid.len()
            )));
        }
        Ok(())
    }
}

impl Energy for TimeSignal {
    fn energy(&self) -> f64 {
        energy_of(&self.samples)
    }
}

impl Energy for [Complex64] {
    fn energy(&self) -> f64 {
        energy_of(self)
    }
}
