#ifndef OTFS_LAB_H
#define OTFS_LAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum OtfsStatus {
  OTFS_STATUS_OK = 0,
  OTFS_STATUS_NULL_ARGUMENT = 1,
  OTFS_STATUS_VALIDATION = 2,
  OTFS_STATUS_NUMERICAL = 3,
  OTFS_STATUS_IO = 4,
  OTFS_STATUS_BUFFER_TOO_SMALL = 5,
  OTFS_STATUS_PANIC = 6,
} OtfsStatus;

typedef enum OtfsScheme {
  OTFS_SCHEME_OTFS = 0,
  OTFS_SCHEME_TICP4_OTFS = 1,
} OtfsScheme;

typedef enum OtfsCutKind {
  // Zero-Doppler slice over all lags.
  OTFS_CUT_KIND_DELAY = 0,
  // Zero-delay slice over integer Doppler bins.
  OTFS_CUT_KIND_DOPPLER = 1,
} OtfsCutKind;

// Opaque ambiguity-cut handle.
typedef struct OtfsCut OtfsCut;

// Opaque grid handle.
typedef struct OtfsGrid OtfsGrid;

// Complex sample, laid out as two doubles.
typedef struct OtfsComplex {
  double re;
  double im;
} OtfsComplex;

typedef struct OtfsBerPoint {
  double snr_db;
  uint64_t bit_errors;
  uint64_t bits_total;
  double ber;
  uint64_t discarded_frames;
} OtfsBerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a grid of `m` delay bins and `n` Doppler bins with slot duration
// `slot_duration` and `oversampling` samples per chip.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum OtfsStatus otfs_grid_new(size_t m,
                              size_t n,
                              double slot_duration,
                              size_t oversampling,
                              struct OtfsGrid **out);

// # Safety
// `grid` must be null or a handle from [`otfs_grid_new`] not yet freed.
void otfs_grid_free(struct OtfsGrid *grid);

// Number of symbols `M N` in a frame, or 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t otfs_grid_len(const struct OtfsGrid *grid);

// Modulates an `M N` delay-Doppler frame into `M N` critically sampled samples.
//
// # Safety
// Pointers must be valid for the stated lengths; `out_len` must be writable.
enum OtfsStatus otfs_modulate(const struct OtfsGrid *grid,
                              enum OtfsScheme scheme,
                              const struct OtfsComplex *frame,
                              size_t frame_len,
                              struct OtfsComplex *out,
                              size_t out_cap,
                              size_t *out_len);

// Recovers the delay-Doppler frame from `M N` critically sampled samples.
//
// # Safety
// Pointers must be valid for the stated lengths; `out_len` must be writable.
enum OtfsStatus otfs_demodulate(const struct OtfsGrid *grid,
                                enum OtfsScheme scheme,
                                const struct OtfsComplex *samples,
                                size_t samples_len,
                                struct OtfsComplex *out,
                                size_t out_cap,
                                size_t *out_len);

// Rectangular pulse shaping to the grid's oversampled rate, energy preserving.
//
// # Safety
// Pointers must be valid for the stated lengths; `out_len` must be writable.
enum OtfsStatus otfs_pulse_shape(const struct OtfsGrid *grid,
                                 const struct OtfsComplex *samples,
                                 size_t samples_len,
                                 struct OtfsComplex *out,
                                 size_t out_cap,
                                 size_t *out_len);

// Pulse-shaped transmission of the all-ones probe frame.
//
// # Safety
// `grid` must be a live handle; `out` valid for `out_cap`; `out_len` writable.
enum OtfsStatus otfs_shaped_probe(const struct OtfsGrid *grid,
                                  enum OtfsScheme scheme,
                                  struct OtfsComplex *out,
                                  size_t out_cap,
                                  size_t *out_len);

// Computes an ambiguity cut of `samples` taken at `samples_per_chip`
// samples per chip.
//
// # Safety
// `samples` valid for `samples_len`; `out` writable for one handle.
enum OtfsStatus otfs_cut_new(const struct OtfsComplex *samples,
                             size_t samples_len,
                             size_t samples_per_chip,
                             enum OtfsCutKind kind,
                             struct OtfsCut **out);

// # Safety
// `cut` must be null or a handle from [`otfs_cut_new`] not yet freed.
void otfs_cut_free(struct OtfsCut *cut);

// Number of samples in the cut, or 0 for a null handle.
//
// # Safety
// `cut` must be null or a live handle.
size_t otfs_cut_len(const struct OtfsCut *cut);

// Axis values: delay in chips or Doppler in bins.
//
// # Safety
// `cut` live; `out` valid for `out_cap`; `out_len` writable.
enum OtfsStatus otfs_cut_axis(const struct OtfsCut *cut,
                              double *out,
                              size_t out_cap,
                              size_t *out_len);

// Peak-normalized magnitude in dB, floored.
//
// # Safety
// `cut` live; `out` valid for `out_cap`; `out_len` writable.
enum OtfsStatus otfs_cut_magnitude_db(const struct OtfsCut *cut,
                                      double *out,
                                      size_t out_cap,
                                      size_t *out_len);

// Width of the region around the origin at or above `threshold_db`.
//
// # Safety
// `cut` live; `width` and `saturated` writable.
enum OtfsStatus otfs_cut_mainlobe_width(const struct OtfsCut *cut,
                                        double threshold_db,
                                        double *width,
                                        bool *saturated);

// Highest level outside the mainlobe, in dB. Fails with
// [`OtfsStatus::Numerical`] when there are no sidelobes.
//
// # Safety
// `cut` live; `out` writable.
enum OtfsStatus otfs_cut_peak_sidelobe_db(const struct OtfsCut *cut, double *out);

// Normalized range profile of the probe echoed by unit-gain taps.
//
// # Safety
// `delays` and `dopplers` valid for `taps`; `out` valid for `out_cap`;
// `out_len` writable.
enum OtfsStatus otfs_range_scenario(const struct OtfsGrid *grid,
                                    enum OtfsScheme scheme,
                                    const size_t *delays,
                                    const int64_t *dopplers,
                                    size_t taps,
                                    double *out,
                                    size_t out_cap,
                                    size_t *out_len);

// Lags of the peaks of `magnitude` at or above `threshold` (relative to the
// maximum), at least `min_separation` apart cyclically, strongest first.
//
// # Safety
// `magnitude` valid for `len`; `out` valid for `out_cap`; `out_len` writable.
enum OtfsStatus otfs_detect_peaks(const double *magnitude,
                                  size_t len,
                                  size_t min_separation,
                                  double threshold,
                                  size_t *out,
                                  size_t out_cap,
                                  size_t *out_len);

// LMMSE bit-error sweep over a channel whose tap gains are drawn
// independently per frame with equal expected power.
//
// # Safety
// `snr_db` valid for `snr_len`; `delays`, `dopplers` valid for `taps`;
// `out` valid for `out_cap`; `out_len` writable.
enum OtfsStatus otfs_ber_uniform(const struct OtfsGrid *grid,
                                 enum OtfsScheme scheme,
                                 const double *snr_db,
                                 size_t snr_len,
                                 size_t frames,
                                 const size_t *delays,
                                 const int64_t *dopplers,
                                 size_t taps,
                                 uint64_t seed,
                                 struct OtfsBerPoint *out,
                                 size_t out_cap,
                                 size_t *out_len);

// Copies the calling thread's last error message into `buf` (truncated and
// nul-terminated) and returns the full message length including the nul.
// Returns 0 when the last call succeeded.
//
// # Safety
// `buf` must be null or valid for `cap` bytes.
size_t otfs_last_error_message(char *buf, size_t cap);

// Static, nul-terminated name of a status code.
const char *otfs_status_name(enum OtfsStatus status);

// Library version, static and nul-terminated.
const char *otfs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTFS_LAB_H */
