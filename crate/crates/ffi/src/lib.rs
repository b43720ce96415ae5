//! C interface to `otfs-lab`.
//!
//! Conventions:
//! - every fallible function returns an [`OtfsStatus`]; on failure the message
//!   is kept per thread and read back with [`otfs_last_error_message`];
//! - array outputs take `(out, out_cap, out_len)`: the required length is
//!   always written to `out_len`, and [`OtfsStatus::BufferTooSmall`] is
//!   returned when `out_cap` is short, so a call with `out_cap = 0` queries
//!   the size;
//! - delay-Doppler frames are `M x N`, column-major (`Z[l, k]` at `l + k M`);
//! - handles are created by `*_new` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use otfs_lab::ambiguity::{delay_cut, doppler_cut, mainlobe_width, peak_sidelobe_db, AmbiguityCut};
use otfs_lab::channel::ChannelSpec;
use otfs_lab::modem::pulse_shape;
use otfs_lab::radar::{detect_peaks, probe_frame, range_scenario, RangeProfile};
use otfs_lab::receiver::{ber_experiment, BerConfig};
use otfs_lab::{demodulate, modulate, DdFrame, Error, GridParams, Scheme, TimeSignal};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfsStatus {
    Ok = 0,
    NullArgument = 1,
    Validation = 2,
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfsScheme {
    Otfs = 0,
    Ticp4Otfs = 1,
}

impl From<OtfsScheme> for Scheme {
    fn from(s: OtfsScheme) -> Self {
        match s {
            OtfsScheme::Otfs => Scheme::Otfs,
            OtfsScheme::Ticp4Otfs => Scheme::Ticp4Otfs,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtfsCutKind {
    /// Zero-Doppler slice over all lags.
    Delay = 0,
    /// Zero-delay slice over integer Doppler bins.
    Doppler = 1,
}

/// Complex sample, laid out as two doubles.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OtfsComplex {
    pub re: f64,
    pub im: f64,
}

impl From<OtfsComplex> for Complex64 {
    fn from(c: OtfsComplex) -> Self {
        Complex64::new(c.re, c.im)
    }
}

impl From<Complex64> for OtfsComplex {
    fn from(c: Complex64) -> Self {
        OtfsComplex { re: c.re, im: c.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OtfsBerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    pub discarded_frames: u64,
}

/// Opaque grid handle.
pub struct OtfsGrid(GridParams);

/// Opaque ambiguity-cut handle.
pub struct OtfsCut(AmbiguityCut);

enum Failure {
    Null(&'static str),
    Short { needed: usize, cap: usize },
    Lab(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lab(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> FfiResult<()>) -> OtfsStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let (status, msg) = match outcome {
        Ok(Ok(())) => return OtfsStatus::Ok,
        Ok(Err(Failure::Null(what))) => (OtfsStatus::NullArgument, format!("{what} is null")),
        Ok(Err(Failure::Short { needed, cap })) => (
            OtfsStatus::BufferTooSmall,
            format!("output needs {needed} elements, capacity is {cap}"),
        ),
        Ok(Err(Failure::Lab(e))) => {
            let status = match e {
                Error::Validation(_) => OtfsStatus::Validation,
                Error::Numerical(_) => OtfsStatus::Numerical,
                Error::Io(_) | Error::Csv(_) | Error::Json(_) => OtfsStatus::Io,
            };
            (status, e.to_string())
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (OtfsStatus::Panic, format!("internal panic: {text}"))
        }
    };
    set_last_error(msg);
    status
}

unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> FfiResult<&'a T> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T: Copy>(values: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> FfiResult<()> {
    if out_len.is_null() {
        return Err(Failure::Null("out_len"));
    }
    *out_len = values.len();
    if values.len() > cap {
        return Err(Failure::Short {
            needed: values.len(),
            cap,
        });
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn write_signal(s: &TimeSignal, out: *mut OtfsComplex, cap: usize, out_len: *mut usize) -> FfiResult<()> {
    let values: Vec<OtfsComplex> = s.samples().iter().map(|&c| c.into()).collect();
    write_out(&values, out, cap, out_len)
}

fn to_complex(values: &[OtfsComplex]) -> Vec<Complex64> {
    values.iter().map(|&c| c.into()).collect()
}

/// Creates a grid of `m` delay bins and `n` Doppler bins with slot duration
/// `slot_duration` and `oversampling` samples per chip.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_grid_new(
    m: usize,
    n: usize,
    slot_duration: f64,
    oversampling: usize,
    out: *mut *mut OtfsGrid,
) -> OtfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let grid = GridParams::new(m, n, slot_duration, oversampling)?;
        *out = Box::into_raw(Box::new(OtfsGrid(grid)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from [`otfs_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_grid_free(grid: *mut OtfsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of symbols `M N` in a frame, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_grid_len(grid: *const OtfsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Modulates an `M N` delay-Doppler frame into `M N` critically sampled samples.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_modulate(
    grid: *const OtfsGrid,
    scheme: OtfsScheme,
    frame: *const OtfsComplex,
    frame_len: usize,
    out: *mut OtfsComplex,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let g = handle(grid, "grid")?.0;
        let values = to_complex(input(frame, frame_len, "frame")?);
        let dd = DdFrame::from_vec(g, &values)?;
        write_signal(&modulate(&dd, scheme.into()), out, out_cap, out_len)
    })
}

/// Recovers the delay-Doppler frame from `M N` critically sampled samples.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_demodulate(
    grid: *const OtfsGrid,
    scheme: OtfsScheme,
    samples: *const OtfsComplex,
    samples_len: usize,
    out: *mut OtfsComplex,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let g = handle(grid, "grid")?.0;
        let s = TimeSignal::critical(&g, to_complex(input(samples, samples_len, "samples")?))?;
        let dd = demodulate(&s, &g, scheme.into())?;
        let values: Vec<OtfsComplex> = dd.as_vec().iter().map(|&c| c.into()).collect();
        write_out(&values, out, out_cap, out_len)
    })
}

/// Rectangular pulse shaping to the grid's oversampled rate, energy preserving.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_pulse_shape(
    grid: *const OtfsGrid,
    samples: *const OtfsComplex,
    samples_len: usize,
    out: *mut OtfsComplex,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let g = handle(grid, "grid")?.0;
        let s = TimeSignal::critical(&g, to_complex(input(samples, samples_len, "samples")?))?;
        write_signal(&pulse_shape(&s, &g)?, out, out_cap, out_len)
    })
}

/// Pulse-shaped transmission of the all-ones probe frame.
///
/// # Safety
/// `grid` must be a live handle; `out` valid for `out_cap`; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_shaped_probe(
    grid: *const OtfsGrid,
    scheme: OtfsScheme,
    out: *mut OtfsComplex,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let g = handle(grid, "grid")?.0;
        let s = pulse_shape(&modulate(&probe_frame(&g), scheme.into()), &g)?;
        write_signal(&s, out, out_cap, out_len)
    })
}

/// Computes an ambiguity cut of `samples` taken at `samples_per_chip`
/// samples per chip.
///
/// # Safety
/// `samples` valid for `samples_len`; `out` writable for one handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_new(
    samples: *const OtfsComplex,
    samples_len: usize,
    samples_per_chip: usize,
    kind: OtfsCutKind,
    out: *mut *mut OtfsCut,
) -> OtfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let s = TimeSignal::from_samples(to_complex(input(samples, samples_len, "samples")?), samples_per_chip)?;
        let cut = match kind {
            OtfsCutKind::Delay => delay_cut(&s)?,
            OtfsCutKind::Doppler => doppler_cut(&s)?,
        };
        *out = Box::into_raw(Box::new(OtfsCut(cut)));
        Ok(())
    })
}

/// # Safety
/// `cut` must be null or a handle from [`otfs_cut_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_free(cut: *mut OtfsCut) {
    if !cut.is_null() {
        drop(Box::from_raw(cut));
    }
}

/// Number of samples in the cut, or 0 for a null handle.
///
/// # Safety
/// `cut` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_len(cut: *const OtfsCut) -> usize {
    cut.as_ref().map_or(0, |c| c.0.len())
}

/// Axis values: delay in chips or Doppler in bins.
///
/// # Safety
/// `cut` live; `out` valid for `out_cap`; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_axis(
    cut: *const OtfsCut,
    out: *mut f64,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| write_out(handle(cut, "cut")?.0.axis(), out, out_cap, out_len))
}

/// Peak-normalized magnitude in dB, floored.
///
/// # Safety
/// `cut` live; `out` valid for `out_cap`; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_magnitude_db(
    cut: *const OtfsCut,
    out: *mut f64,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| write_out(handle(cut, "cut")?.0.magnitude_db(), out, out_cap, out_len))
}

/// Width of the region around the origin at or above `threshold_db`.
///
/// # Safety
/// `cut` live; `width` and `saturated` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_mainlobe_width(
    cut: *const OtfsCut,
    threshold_db: f64,
    width: *mut f64,
    saturated: *mut bool,
) -> OtfsStatus {
    guard(|| {
        let c = handle(cut, "cut")?;
        if width.is_null() || saturated.is_null() {
            return Err(Failure::Null("width or saturated"));
        }
        let w = mainlobe_width(&c.0, threshold_db);
        *width = w.width;
        *saturated = w.saturated;
        Ok(())
    })
}

/// Highest level outside the mainlobe, in dB. Fails with
/// [`OtfsStatus::Numerical`] when there are no sidelobes.
///
/// # Safety
/// `cut` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_cut_peak_sidelobe_db(cut: *const OtfsCut, out: *mut f64) -> OtfsStatus {
    guard(|| {
        let c = handle(cut, "cut")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = peak_sidelobe_db(&c.0)?;
        Ok(())
    })
}

/// Normalized range profile of the probe echoed by unit-gain taps.
///
/// # Safety
/// `delays` and `dopplers` valid for `taps`; `out` valid for `out_cap`;
/// `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_range_scenario(
    grid: *const OtfsGrid,
    scheme: OtfsScheme,
    delays: *const usize,
    dopplers: *const i64,
    taps: usize,
    out: *mut f64,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let g = handle(grid, "grid")?.0;
        let profile = range_scenario(
            &g,
            scheme.into(),
            input(delays, taps, "delays")?,
            input(dopplers, taps, "dopplers")?,
        )?;
        write_out(profile.magnitude(), out, out_cap, out_len)
    })
}

/// Lags of the peaks of `magnitude` at or above `threshold` (relative to the
/// maximum), at least `min_separation` apart cyclically, strongest first.
///
/// # Safety
/// `magnitude` valid for `len`; `out` valid for `out_cap`; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_detect_peaks(
    magnitude: *const f64,
    len: usize,
    min_separation: usize,
    threshold: f64,
    out: *mut usize,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let profile = RangeProfile::from_magnitudes(input(magnitude, len, "magnitude")?)?;
        let lags: Vec<usize> = detect_peaks(&profile, min_separation, threshold)?
            .iter()
            .map(|p| p.lag)
            .collect();
        write_out(&lags, out, out_cap, out_len)
    })
}

/// LMMSE bit-error sweep over a channel whose tap gains are drawn
/// independently per frame with equal expected power.
///
/// # Safety
/// `snr_db` valid for `snr_len`; `delays`, `dopplers` valid for `taps`;
/// `out` valid for `out_cap`; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn otfs_ber_uniform(
    grid: *const OtfsGrid,
    scheme: OtfsScheme,
    snr_db: *const f64,
    snr_len: usize,
    frames: usize,
    delays: *const usize,
    dopplers: *const i64,
    taps: usize,
    seed: u64,
    out: *mut OtfsBerPoint,
    out_cap: usize,
    out_len: *mut usize,
) -> OtfsStatus {
    guard(|| {
        let config = BerConfig {
            grid: handle(grid, "grid")?.0,
            snr_db: input(snr_db, snr_len, "snr_db")?.to_vec(),
            frames,
            channel: ChannelSpec::uniform_random(
                input(delays, taps, "delays")?,
                input(dopplers, taps, "dopplers")?,
            )?,
            seed,
        };
        let points: Vec<OtfsBerPoint> = ber_experiment(&config, scheme.into())?
            .into_iter()
            .map(|p| OtfsBerPoint {
                snr_db: p.snr_db,
                bit_errors: p.bit_errors,
                bits_total: p.bits_total,
                ber: p.ber,
                discarded_frames: p.discarded_frames,
            })
            .collect();
        write_out(&points, out, out_cap, out_len)
    })
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// nul-terminated) and returns the full message length including the nul.
/// Returns 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn otfs_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// Static, nul-terminated name of a status code.
#[no_mangle]
pub extern "C" fn otfs_status_name(status: OtfsStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        OtfsStatus::Ok => b"ok\0",
        OtfsStatus::NullArgument => b"null_argument\0",
        OtfsStatus::Validation => b"validation\0",
        OtfsStatus::Numerical => b"numerical\0",
        OtfsStatus::Io => b"io\0",
        OtfsStatus::BufferTooSmall => b"buffer_too_small\0",
        OtfsStatus::Panic => b"panic\0",
    };
    name.as_ptr().cast()
}

/// Library version, static and nul-terminated.
#[no_mangle]
pub extern "C" fn otfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
