//! OTFS and TICP4-OTFS modulators and demodulators.
//!
//! Each scheme has two independent transmit routes that must agree:
//!
//! - **direct**: the discrete inverse Zak form, an inverse DFT over Doppler
//!   for each delay bin, evaluated by index arithmetic;
//! - **ofdm**: ISFFT, per-slot OFDM inverse DFT, column-wise serialization
//!   (plus, for TICP4-OTFS, the phase mask up front and the row-column
//!   interleaver at the end).
//!
//! [`TxMatrix`] gives the third, vectorized form `s = A vec(Z)` with
//! `A = F_N^H kron I_M` for OTFS and `A = T (F_N^H kron I_M) diag(vec(mask))`
//! for TICP4-OTFS.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridParams, TimeSignal};
use crate::phase::{apply_code, cyclic_phase_matrix, remove_code};
use crate::transforms::{
    deinterleave_rowcol, deserialize_columnwise, dft_matrix, interleave_rowcol, interleaver_matrix,
    isfft, ofdm_demodulate_slots, ofdm_modulate_slots, serialize_columnwise, sfft, ComplexMatrix,
};

/// Waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "otfs")]
    Otfs,
    /// Time-domain interleaved, cyclic-shifted P4-coded OTFS.
    #[serde(rename = "ticp4", alias = "ticp4-otfs", alias = "ticp4_otfs")]
    Ticp4Otfs,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Otfs, Scheme::Ticp4Otfs];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Otfs => "otfs",
            Scheme::Ticp4Otfs => "ticp4",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "otfs" => Ok(Scheme::Otfs),
            "ticp4" | "ticp4-otfs" | "ticp4_otfs" => Ok(Scheme::Ticp4Otfs),
            other => Err(Error::validation(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Which transmit route to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModPath {
    Direct,
    Ofdm,
}

/// OTFS by the inverse-Zak form: `s[l + nM] = N^{-1/2} sum_k Z[l,k] exp(j 2 pi k n / N)`.
pub fn otfs_modulate_direct(dd: &DdFrame) -> TimeSignal {
    let grid = *dd.grid();
    let (m, n) = (grid.m(), grid.n());
    let twiddle = inverse_twiddles(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![Complex64::default(); grid.len()];
    for l in 0..m {
        for slot in 0..n {
            let acc: Complex64 = (0..n)
                .map(|k| dd.get(l, k) * twiddle[(k * slot) % n])
                .sum();
            out[l + slot * m] = acc * scale;
        }
    }
    TimeSignal::critical(&grid, out).expect("length is M*N")
}

/// OTFS by ISFFT, per-slot OFDM and column-wise serialization.
pub fn otfs_modulate_ofdm(dd: &DdFrame) -> TimeSignal {
    serialize_columnwise(&ofdm_modulate_slots(&isfft(dd)))
}

/// TICP4-OTFS:
/// `s'[l N + n] = N^{-1/2} sum_k Z[l,k] exp(j phi_{(l-k) mod M}) exp(j 2 pi k n / N)`.
pub fn ticp4_modulate(dd: &DdFrame, path: ModPath) -> TimeSignal {
    match path {
        ModPath::Direct => ticp4_modulate_direct(dd),
        ModPath::Ofdm => {
            let grid = *dd.grid();
            let serial = serialize_columnwise(&ofdm_modulate_slots(&isfft(&apply_code(dd))));
            interleave_rowcol(&serial, &grid).expect("serialized frame has length M*N")
        }
    }
}

fn ticp4_modulate_direct(dd: &DdFrame) -> TimeSignal {
    let grid = *dd.grid();
    let (m, n) = (grid.m(), grid.n());
    let mask = cyclic_phase_matrix(&grid);
    let twiddle = inverse_twiddles(n);
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![Complex64::default(); grid.len()];
    for l in 0..m {
        for slot in 0..n {
            let acc: Complex64 = (0..n)
                .map(|k| dd.get(l, k) * mask.data()[(l, k)] * twiddle[(k * slot) % n])
                .sum();
            out[l * n + slot] = acc * scale;
        }
    }
    TimeSignal::critical(&grid, out).expect("length is M*N")
}

/// `exp(j 2 pi i / n)` for `i = 0..n`.
fn inverse_twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64))
        .collect()
}

/// Modulates with the given scheme along the direct route.
pub fn modulate(dd: &DdFrame, scheme: Scheme) -> TimeSignal {
    match scheme {
        Scheme::Otfs => otfs_modulate_direct(dd),
        Scheme::Ticp4Otfs => ticp4_modulate(dd, ModPath::Direct),
    }
}

/// Modulates with the given scheme along the chosen route.
pub fn modulate_via(dd: &DdFrame, scheme: Scheme, path: ModPath) -> TimeSignal {
    match (scheme, path) {
        (Scheme::Otfs, ModPath::Direct) => otfs_modulate_direct(dd),
        (Scheme::Otfs, ModPath::Ofdm) => otfs_modulate_ofdm(dd),
        (Scheme::Ticp4Otfs, path) => ticp4_modulate(dd, path),
    }
}

/// Vectorized transmit operator `s = A vec(Z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxMatrix {
    grid: GridParams,
    scheme: Scheme,
    data: ComplexMatrix,
}

impl TxMatrix {
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn data(&self) -> &ComplexMatrix {
        &self.data
    }

    /// `A vec(Z)` as a critical-rate signal.
    pub fn apply(&self, dd: &DdFrame) -> TimeSignal {
        let z = DVector::from_column_slice(dd.as_vec());
        let s = &self.data * z;
        TimeSignal::critical(&self.grid, s.as_slice().to_vec()).expect("length is M*N")
    }
}

/// Builds the `MN x MN` transmit matrix for `scheme`.
pub fn tx_matrix(grid: &GridParams, scheme: Scheme) -> TxMatrix {
    let f_n_h = dft_matrix(grid.n()).expect("N >= 1").adjoint();
    let identity_m = DMatrix::<Complex64>::identity(grid.m(), grid.m());
    let otfs = f_n_h.kronecker(&identity_m);
    let data = match scheme {
        Scheme::Otfs => otfs,
        Scheme::Ticp4Otfs => {
            let mask = cyclic_phase_matrix(grid);
            let coded = otfs * DMatrix::from_diagonal(&DVector::from_column_slice(mask.as_vec()));
            interleaver_matrix(grid) * coded
        }
    };
    TxMatrix {
        grid: *grid,
        scheme,
        data,
    }
}

/// Receiver inverse chain, equal to `A^H s`.
pub fn demodulate(s: &TimeSignal, grid: &GridParams, scheme: Scheme) -> Result<DdFrame> {
    s.expect_critical(grid)?;
    let serial = match scheme {
        Scheme::Otfs => s.clone(),
        Scheme::Ticp4Otfs => deinterleave_rowcol(s, grid)?,
    };
    let dd = sfft(&ofdm_demodulate_slots(&deserialize_columnwise(&serial, grid)?));
    Ok(match scheme {
        Scheme::Otfs => dd,
        Scheme::Ticp4Otfs => remove_code(&dd),
    })
}

/// Rectangular (zero-order hold) pulse shaping at `grid.oversampling()`
/// samples per chip, scaled by `1/sqrt(os)` so energy is unchanged.
pub fn pulse_shape(s: &TimeSignal, grid: &GridParams) -> Result<TimeSignal> {
    if !s.is_critical() {
        return Err(Error::validation("pulse shaping needs a critical-rate signal"));
    }
    s.expect_critical(grid)?;
    let os = grid.oversampling();
    if os == 1 {
        return Ok(s.clone());
    }
    let amp = 1.0 / (os as f64).sqrt();
    let samples = s
        .samples()
        .iter()
        .flat_map(|&x| std::iter::repeat_n(x * amp, os))
        .collect();
    TimeSignal::oversampled(grid, samples)
}
