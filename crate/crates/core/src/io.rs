//! CSV readers and writers for frames, signals and experiment results.
//!
//! Every writer accepts an optional comment that is emitted as a leading
//! `# ...` line; readers skip such lines.
//!
//! Frame layout: a `M,N` header, one line with the two dimensions, then `M`
//! rows of `N` complex entries written as consecutive `re,im` pairs.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ambiguity::{amplitude_db, AmbiguityCut, AmbiguitySurface};
use crate::error::{Error, Result};
use crate::grid::{Frame, GridParams, TimeSignal};
use crate::radar::RangeProfile;
use crate::receiver::BerPoint;

fn writer<W: Write>(mut w: W, comment: Option<&str>) -> Result<csv::Writer<W>> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(w))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn parse_f64(field: Option<&str>, what: &str) -> Result<f64> {
    field
        .ok_or_else(|| Error::validation(format!("missing {what}")))?
        .parse::<f64>()
        .map_err(|e| Error::validation(format!("bad {what}: {e}")))
}

fn parse_usize(field: Option<&str>, what: &str) -> Result<usize> {
    field
        .ok_or_else(|| Error::validation(format!("missing {what}")))?
        .parse::<usize>()
        .map_err(|e| Error::validation(format!("bad {what}: {e}")))
}

pub fn write_frame_csv<W: Write, F: Frame>(w: W, frame: &F, comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    let grid = frame.grid();
    out.write_record(["M", "N"])?;
    out.write_record([grid.m().to_string(), grid.n().to_string()])?;
    let data = frame.data();
    for l in 0..grid.m() {
        let row: Vec<String> = (0..grid.n())
            .flat_map(|k| {
                let z = data[(l, k)];
                [z.re.to_string(), z.im.to_string()]
            })
            .collect();
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a frame; the grid's `T` and oversampling are taken from `template`.
pub fn read_frame_csv<R: Read, F: Frame>(r: R, template: &GridParams) -> Result<F> {
    let mut rdr = reader(r);
    let mut records = rdr.records();
    let dims = records
        .next()
        .ok_or_else(|| Error::validation("frame CSV has no dimension line"))??;
    let m = parse_usize(dims.get(0), "M")?;
    let n = parse_usize(dims.get(1), "N")?;
    let grid = GridParams::new(m, n, template.slot_duration(), template.oversampling())?;
    let mut data = DMatrix::zeros(m, n);
    for l in 0..m {
        let row = records
            .next()
            .ok_or_else(|| Error::validation(format!("frame CSV ends before row {l}")))??;
        if row.len() != 2 * n {
            return Err(Error::validation(format!(
                "row {l} has {} fields, expected {}",
                row.len(),
                2 * n
            )));
        }
        for k in 0..n {
            let re = parse_f64(row.get(2 * k), "real part")?;
            let im = parse_f64(row.get(2 * k + 1), "imaginary part")?;
            data[(l, k)] = Complex64::new(re, im);
        }
    }
    if records.next().is_some() {
        return Err(Error::validation("frame CSV has extra rows"));
    }
    F::from_grid_data(grid, data)
}

/// `index,re,im`.
pub fn write_signal_csv<W: Write>(w: W, s: &TimeSignal, comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    out.write_record(["index", "re", "im"])?;
    for (q, z) in s.samples().iter().enumerate() {
        out.write_record([q.to_string(), z.re.to_string(), z.im.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `index,re,im` rows as a free-standing signal with `samples_per_chip`.
pub fn read_signal_csv<R: Read>(r: R, samples_per_chip: usize) -> Result<TimeSignal> {
    let mut rdr = reader(r);
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let q = parse_usize(rec.get(0), "index")?;
        if q != i {
            return Err(Error::validation(format!("expected index {i}, found {q}")));
        }
        samples.push(Complex64::new(
            parse_f64(rec.get(1), "re")?,
            parse_f64(rec.get(2), "im")?,
        ));
    }
    TimeSignal::from_samples(samples, samples_per_chip)
}

/// `axis,mag_db`.
pub fn write_cut_csv<W: Write>(w: W, cut: &AmbiguityCut, comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    out.write_record(["axis", "mag_db"])?;
    for (x, db) in cut.axis().iter().zip(cut.magnitude_db()) {
        out.write_record([x.to_string(), db.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `axis,mag_db` rows back into `(axis, mag_db)` vectors.
pub fn read_cut_csv<R: Read>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(r);
    let mut axis = Vec::new();
    let mut db = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        axis.push(parse_f64(rec.get(0), "axis")?);
        db.push(parse_f64(rec.get(1), "mag_db")?);
    }
    Ok((axis, db))
}

/// `delay,doppler,mag_db`, Doppler varying fastest.
pub fn write_surface_csv<W: Write>(w: W, surf: &AmbiguitySurface, comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    out.write_record(["delay", "doppler", "mag_db"])?;
    for (r, delay) in surf.delay_axis().iter().enumerate() {
        for (c, nu) in surf.doppler_axis().iter().enumerate() {
            out.write_record([
                delay.to_string(),
                nu.to_string(),
                amplitude_db(surf.magnitude(r, c)).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `lag,magnitude`.
pub fn write_profile_csv<W: Write>(w: W, p: &RangeProfile, comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    out.write_record(["lag", "magnitude"])?;
    for (lag, m) in p.lags().iter().zip(p.magnitude()) {
        out.write_record([lag.to_string(), m.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `scheme,snr_db,bits,errors,ber`.
pub fn write_ber_csv<W: Write>(w: W, points: &[BerPoint], comment: Option<&str>) -> Result<()> {
    let mut out = writer(w, comment)?;
    out.write_record(["scheme", "snr_db", "bits", "errors", "ber"])?;
    for p in points {
        out.write_record([
            p.scheme.name().to_string(),
            p.snr_db.to_string(),
            p.bits_total.to_string(),
            p.bit_errors.to_string(),
            p.ber.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
