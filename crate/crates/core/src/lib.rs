//! Delay-Doppler waveform laboratory.
//!
//! Conventional OTFS and its cyclic-shifted P4-coded, row-column interleaved
//! variant (`ticp4`): modems, ambiguity-function metrics, a cyclic
//! delay-Doppler channel, an LMMSE BER harness and pulse-compression ranging.

pub mod ambiguity;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod modem;
pub mod phase;
pub mod radar;
pub mod receiver;
pub mod selftest;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{DdFrame, DtFrame, Frame, GridParams, TfFrame, TimeSignal};
pub use modem::{demodulate, modulate, Scheme};
