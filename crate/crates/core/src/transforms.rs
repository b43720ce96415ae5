//! Unitary building blocks: normalized DFT matrices, ISFFT/SFFT, per-slot
//! OFDM (I)DFT, column-wise serialization and the row-column interleaver.
//!
//! Sign convention: forward DFT uses `exp(-j 2 pi ...)`, inverse uses
//! `exp(+j 2 pi ...)`, all scaled by `1/sqrt(n)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DdFrame, DtFrame, GridParams, TfFrame, TimeSignal};

/// Dense complex matrix used for the explicit (vectorized) operator forms.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Normalized `n`-point DFT matrix, entry `(a, b) = exp(-j 2 pi a b / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::validation("DFT size must be at least 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(DMatrix::from_fn(n, n, |a, b| {
        // reduce a*b mod n first so the phase argument stays small
        let idx = (a * b) % n;
        Complex64::from_polar(scale, -2.0 * PI * idx as f64 / n as f64)
    }))
}

fn dft_pair(n: usize) -> (ComplexMatrix, ComplexMatrix) {
    let f = dft_matrix(n).expect("grid dimensions are positive");
    let fh = f.adjoint();
    (f, fh)
}

/// Delay-Doppler to time-frequency: `X = F_M * Z * F_N^H`.
pub fn isfft(dd: &DdFrame) -> TfFrame {
    let grid = *dd.grid();
    let (f_m, _) = dft_pair(grid.m());
    let (_, f_n_h) = dft_pair(grid.n());
    TfFrame::from_parts_unchecked(grid, &f_m * dd.data() * &f_n_h)
}

/// Time-frequency to delay-Doppler: `Z = F_M^H * X * F_N`.
pub fn sfft(tf: &TfFrame) -> DdFrame {
    let grid = *tf.grid();
    let (_, f_m_h) = dft_pair(grid.m());
    let (f_n, _) = dft_pair(grid.n());
    DdFrame::from_parts_unchecked(grid, &f_m_h * tf.data() * &f_n)
}

/// Per-slot OFDM modulator: a length-`M` inverse DFT down each column.
pub fn ofdm_modulate_slots(tf: &TfFrame) -> DtFrame {
    let grid = *tf.grid();
    let (_, f_m_h) = dft_pair(grid.m());
    DtFrame::from_parts_unchecked(grid, &f_m_h * tf.data())
}

/// Per-slot OFDM demodulator, inverse of [`ofdm_modulate_slots`].
pub fn ofdm_demodulate_slots(dt: &DtFrame) -> TfFrame {
    let grid = *dt.grid();
    let (f_m, _) = dft_pair(grid.m());
    TfFrame::from_parts_unchecked(grid, &f_m * dt.data())
}

/// Column-wise parallel-to-serial conversion: `s[l + n*M] = S[l, n]`.
pub fn serialize_columnwise(dt: &DtFrame) -> TimeSignal {
    TimeSignal::critical(dt.grid(), dt.as_vec().to_vec()).expect("frame has M*N finite entries")
}

/// Inverse of [`serialize_columnwise`].
pub fn deserialize_columnwise(s: &TimeSignal, grid: &GridParams) -> Result<DtFrame> {
    s.expect_critical(grid)?;
    DtFrame::from_vec(*grid, s.samples())
}

/// Position of sample `l + n*M` after row-column interleaving.
#[inline]
pub fn interleaved_index(q: usize, grid: &GridParams) -> usize {
    let (l, n) = (q % grid.m(), q / grid.m());
    l * grid.n() + n
}

/// Row-column interleaver: `out[l*N + n] = in[l + n*M]`.
///
/// Writing the frame column by column and reading it row by row.
pub fn interleave_rowcol(s: &TimeSignal, grid: &GridParams) -> Result<TimeSignal> {
    s.expect_critical(grid)?;
    let mut out = vec![Complex64::default(); grid.len()];
    for (q, &x) in s.samples().iter().enumerate() {
        out[interleaved_index(q, grid)] = x;
    }
    Ok(s.with_samples(out))
}

/// Inverse of [`interleave_rowcol`]: `out[l + n*M] = in[l*N + n]`.
pub fn deinterleave_rowcol(s: &TimeSignal, grid: &GridParams) -> Result<TimeSignal> {
    s.expect_critical(grid)?;
    let input = s.samples();
    let out = (0..grid.len())
        .map(|q| input[interleaved_index(q, grid)])
        .collect();
    Ok(s.with_samples(out))
}

/// Explicit `MN x MN` interleaver permutation `T`, so that
/// `T * s == interleave_rowcol(s)`.
pub fn interleaver_matrix(grid: &GridParams) -> ComplexMatrix {
    let len = grid.len();
    let mut t = DMatrix::zeros(len, len);
    for q in 0..len {
        t[(interleaved_index(q, grid), q)] = Complex64::new(1.0, 0.0);
    }
    t
}
