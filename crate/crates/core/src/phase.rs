//! P4 polyphase code and the Doppler-indexed cyclic-shifted phase mask.
//!
//! The P4 code samples a baseband linear-FM chirp at the Nyquist rate:
//! `phi_i = pi i^2 / P - pi i` for `i = 0..P`. One chip is assigned per delay
//! bin, and Doppler column `k` carries the sequence rotated down by `k`, so
//! the mask entry at `(l, k)` is `exp(j phi_{(l - k) mod M})`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DdFrame, GridParams};

/// Phases of a polyphase sequence, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSequence {
    phases: Vec<f64>,
}

impl PhaseSequence {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Unit-modulus chips `exp(j phi_i)`.
    pub fn chips(&self) -> Vec<Complex64> {
        self.phases
            .iter()
            .map(|&phi| Complex64::from_polar(1.0, phi))
            .collect()
    }
}

/// P4 sequence of length `len`, zero-based: `phi_i = pi i^2 / len - pi i`.
pub fn p4_sequence(len: usize) -> Result<PhaseSequence> {
    if len == 0 {
        return Err(Error::validation("P4 code length must be at least 1"));
    }
    let p = len as f64;
    let phases = (0..len)
        .map(|i| {
            let i = i as f64;
            PI * i * i / p - PI * i
        })
        .collect();
    Ok(PhaseSequence { phases })
}

/// `M x N` mask with entry `(l, k) = exp(j phi_{(l - k) mod M})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    grid: GridParams,
    data: DMatrix<Complex64>,
}

impl PhaseMatrix {
    pub fn grid(&self) -> &GridParams {
        &self.grid
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    /// Column-major vectorization, the diagonal of the coding operator.
    pub fn as_vec(&self) -> &[Complex64] {
        self.data.as_slice()
    }

    /// Code index `(l - k) mod M` used at entry `(l, k)`.
    pub fn code_index(&self, l: usize, k: usize) -> usize {
        let m = self.grid.m();
        (l + m - k % m) % m
    }
}

/// Cyclic-shifted P4 mask for `grid`, using a length-`M` code.
pub fn cyclic_phase_matrix(grid: &GridParams) -> PhaseMatrix {
    let m = grid.m();
    let chips = p4_sequence(m).expect("M >= 1").chips();
    let data = DMatrix::from_fn(m, grid.n(), |l, k| chips[(l + m - k % m) % m]);
    PhaseMatrix { grid: *grid, data }
}

/// `Z' = Z (.) mask`, entrywise.
pub fn apply_code(dd: &DdFrame) -> DdFrame {
    let mask = cyclic_phase_matrix(dd.grid());
    let data = dd.data().component_mul(mask.data());
    DdFrame::from_parts_unchecked(*dd.grid(), data)
}

/// `Z = Z' (.) conj(mask)`, the exact inverse of [`apply_code`].
pub fn remove_code(dd: &DdFrame) -> DdFrame {
    let mask = cyclic_phase_matrix(dd.grid());
    let data = dd.data().zip_map(mask.data(), |z, p| z * p.conj());
    DdFrame::from_parts_unchecked(*dd.grid(), data)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::grid::frame_energy;

    fn assert_phases(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn p4_reference_values() {
        assert_phases(p4_sequence(1).unwrap().phases(), &[0.0]);
        assert_phases(p4_sequence(2).unwrap().phases(), &[0.0, -PI / 2.0]);
        assert_phases(
            p4_sequence(4).unwrap().phases(),
            &[0.0, -3.0 * PI / 4.0, -PI, -3.0 * PI / 4.0],
        );
        assert!(p4_sequence(0).is_err());
    }

    #[test]
    fn mask_single_delay_bin_is_all_ones() {
        let g = GridParams::normalized(1, 5).unwrap();
        let mask = cyclic_phase_matrix(&g);
        assert!(mask.as_vec().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn mask_two_by_two() {
        let g = GridParams::normalized(2, 2).unwrap();
        let mask = cyclic_phase_matrix(&g);
        let one = Complex64::new(1.0, 0.0);
        let minus_j = Complex64::new(0.0, -1.0);
        let want = [[one, minus_j], [minus_j, one]];
        for l in 0..2 {
            for k in 0..2 {
                assert!((mask.data()[(l, k)] - want[l][k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn columns_are_cyclic_shifts() {
        for (m, n) in [(8, 4), (8, 8), (5, 12), (3, 2)] {
            let g = GridParams::normalized(m, n).unwrap();
            let mask = cyclic_phase_matrix(&g);
            for k in 0..n {
                for l in 0..m {
                    let rotated = mask.data()[((l + m - k % m) % m, 0)];
                    assert!((mask.data()[(l, k)] - rotated).norm() < 1e-15);
                    assert!((mask.data()[(l, k)].norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn columns_distinct_iff_n_at_most_m() {
        for (m, n) in [(8, 4), (8, 8), (8, 9), (4, 12), (5, 5)] {
            let g = GridParams::normalized(m, n).unwrap();
            let mask = cyclic_phase_matrix(&g);
            let mut distinct = true;
            for a in 0..n {
                for b in (a + 1)..n {
                    let diff = (mask.data().column(a) - mask.data().column(b)).norm();
                    if diff < 1e-9 {
                        distinct = false;
                    }
                }
            }
            assert_eq!(distinct, n <= m, "M={m} N={n}");
        }
    }

    #[test]
    fn code_preserves_energy_and_inverts() {
        let g = GridParams::normalized(8, 4).unwrap();
        let dd = DdFrame::from_fn(g, |l, k| Complex64::new(l as f64 - 2.5, (k * k) as f64 * 0.3));
        let coded = apply_code(&dd);
        assert!((frame_energy(&coded) - frame_energy(&dd)).abs() < 1e-12);
        assert!(remove_code(&coded).max_abs_diff(&dd) < 1e-12);
        assert_eq!(remove_code(&DdFrame::zeros(g)), DdFrame::zeros(g));
    }

    #[test]
    fn single_delay_bin_code_is_identity() {
        let g = GridParams::normalized(1, 4).unwrap();
        let dd = DdFrame::from_fn(g, |_, k| Complex64::new(1.0, k as f64));
        assert!(apply_code(&dd).max_abs_diff(&dd) < 1e-15);
        assert!(remove_code(&dd).max_abs_diff(&dd) < 1e-15);
    }
}
