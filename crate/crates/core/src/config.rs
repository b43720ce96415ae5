//! JSON experiment configuration and the command runner behind the CLI.
//!
//! Every section is optional; missing fields take the defaults below.
//!
//! ```json
//! {
//!   "command": "cuts",
//!   "grid": {"M": 8, "N": 4, "T": 1.0, "oversampling": 4},
//!   "schemes": ["otfs", "ticp4"],
//!   "seed": 0,
//!   "out_dir": "out",
//!   "ambiguity": {"max_lag": null, "doppler_points": null, "doppler_span": null, "threshold_db": -3.0},
//!   "range": {"delays": [1, 4, 7], "dopplers": [0, 0, 0], "threshold": 0.5, "min_separation": 2},
//!   "ber": {"snr_db": [0, 2, 4], "frames": 10000, "channel": {"taps": [...], "power_profile": "uniform_random"}}
//! }
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::ambiguity::{
    ambiguity_surface, delay_cut, doppler_cut, mainlobe_width, peak_sidelobe_db, AmbiguityCut,
    DopplerGrid,
};
use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::grid::{GridParams, TimeSignal};
use crate::io::{write_ber_csv, write_cut_csv, write_profile_csv, write_surface_csv};
use crate::modem::{modulate, pulse_shape, Scheme};
use crate::radar::{detect_peaks, probe_frame, range_scenario};
use crate::receiver::{ber_experiment, BerConfig};
use crate::selftest::run_selftest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Ambiguity,
    Cuts,
    Range,
    Ber,
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ambiguity => "ambiguity",
            Command::Cuts => "cuts",
            Command::Range => "range",
            Command::Ber => "ber",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbiguitySection {
    /// Largest surface lag in samples; defaults to the full signal length minus one.
    pub max_lag: Option<usize>,
    /// Doppler samples across the span; defaults to four per bin.
    pub doppler_points: Option<usize>,
    /// Doppler span in bins; defaults to `N`.
    pub doppler_span: Option<f64>,
    /// Threshold for the reported cut mainlobe widths.
    pub threshold_db: f64,
}

impl Default for AmbiguitySection {
    fn default() -> Self {
        AmbiguitySection {
            max_lag: None,
            doppler_points: None,
            doppler_span: None,
            threshold_db: -3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSection {
    pub delays: Vec<usize>,
    pub dopplers: Vec<i64>,
    pub threshold: f64,
    pub min_separation: usize,
}

impl Default for RangeSection {
    fn default() -> Self {
        RangeSection {
            delays: vec![1, 4, 7],
            dopplers: vec![0, 0, 0],
            threshold: 0.5,
            min_separation: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerSection {
    pub snr_db: Vec<f64>,
    pub frames: usize,
    pub channel: ChannelSpec,
}

impl Default for BerSection {
    fn default() -> Self {
        BerSection {
            snr_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            frames: 10_000,
            channel: ChannelSpec::uniform_random(&[0, 1, 2, 3], &[0, 1, 2, 3])
                .expect("four matched taps"),
        }
    }
}

fn default_grid() -> GridParams {
    GridParams::normalized(8, 4).expect("8x4 grid")
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_grid")]
    pub grid: GridParams,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub ambiguity: AmbiguitySection,
    #[serde(default)]
    pub range: RangeSection,
    #[serde(default)]
    pub ber: BerSection,
}

impl ExperimentConfig {
    /// Defaults for `command`.
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            grid: default_grid(),
            schemes: default_schemes(),
            seed: 0,
            out_dir: default_out_dir(),
            ambiguity: AmbiguitySection::default(),
            range: RangeSection::default(),
            ber: BerSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("config: {e}")))?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Checks the fields the selected command will use.
    pub fn validate(&self) -> Result<()> {
        if self.command != Command::Selftest {
            if self.schemes.is_empty() {
                return Err(Error::validation("schemes must not be empty"));
            }
            let mut seen = self.schemes.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.schemes.len() {
                return Err(Error::validation("schemes must not repeat"));
            }
        }
        let q = self.grid.len() * self.grid.oversampling();
        match self.command {
            Command::Ambiguity => {
                let a = &self.ambiguity;
                if a.max_lag.is_some_and(|l| l >= q) {
                    return Err(Error::validation(format!(
                        "ambiguity.max_lag must be below the signal length {q}"
                    )));
                }
                if a.doppler_points == Some(0) {
                    return Err(Error::validation("ambiguity.doppler_points must be at least 1"));
                }
                if a.doppler_span.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
                    return Err(Error::validation("ambiguity.doppler_span must be positive"));
                }
            }
            Command::Cuts => {
                if !self.ambiguity.threshold_db.is_finite() || self.ambiguity.threshold_db > 0.0 {
                    return Err(Error::validation("ambiguity.threshold_db must be finite and at most 0"));
                }
            }
            Command::Range => {
                let r = &self.range;
                if r.delays.is_empty() || r.delays.len() != r.dopplers.len() {
                    return Err(Error::validation(
                        "range.delays and range.dopplers must be non-empty and of equal length",
                    ));
                }
                if let Some(d) = r.delays.iter().find(|&&d| d >= self.grid.len()) {
                    return Err(Error::validation(format!(
                        "range delay {d} is not below the frame length {}",
                        self.grid.len()
                    )));
                }
                if !(r.threshold > 0.0 && r.threshold <= 1.0) {
                    return Err(Error::validation("range.threshold must lie in (0, 1]"));
                }
                if r.min_separation == 0 {
                    return Err(Error::validation("range.min_separation must be at least 1"));
                }
            }
            Command::Ber => {
                let b = &self.ber;
                if b.frames == 0 {
                    return Err(Error::validation("ber.frames must be at least 1"));
                }
                if b.snr_db.is_empty() || b.snr_db.iter().any(|s| s.is_nan()) {
                    return Err(Error::validation("ber.snr_db must be a non-empty list of numbers"));
                }
                if let Some(t) = b.channel.taps().iter().find(|t| t.delay >= self.grid.len()) {
                    return Err(Error::validation(format!(
                        "channel delay {} is not below the frame length {}",
                        t.delay,
                        self.grid.len()
                    )));
                }
            }
            Command::Selftest => {}
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the config JSON, excluding
    /// `out_dir` so the hash depends only on what is computed.
    pub fn hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Value::Object(map) = &mut value {
            map.remove("out_dir");
        }
        let digest = Sha256::digest(serde_json::to_string(&value)?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    fn header(&self) -> Result<String> {
        Ok(format!("config_hash={} seed={}", self.hash()?, self.seed))
    }

    fn tag(&self) -> String {
        format!("M{}_N{}", self.grid.m(), self.grid.n())
    }
}

/// Result of [`run`]: files written plus a command-specific JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<PathBuf>,
    pub results: Value,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn shaped_probe(grid: &GridParams, scheme: Scheme) -> Result<TimeSignal> {
    pulse_shape(&modulate(&probe_frame(grid), scheme), grid)
}

fn cut_metrics(cut: &AmbiguityCut, threshold_db: f64) -> Value {
    let width = mainlobe_width(cut, threshold_db);
    json!({
        "mainlobe_width": width.width,
        "mainlobe_saturated": width.saturated,
        "peak_sidelobe_db": peak_sidelobe_db(cut).ok(),
    })
}

/// Executes `config`, writing CSV outputs under `config.out_dir`.
/// `progress` receives one human-readable line per step.
pub fn run(config: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<RunSummary> {
    config.validate()?;
    let header = config.header()?;
    let grid = config.grid;
    let mut files = Vec::new();
    if config.command != Command::Selftest {
        fs::create_dir_all(&config.out_dir)?;
    }

    let results = match config.command {
        Command::Cuts => {
            let mut out = serde_json::Map::new();
            for &scheme in &config.schemes {
                let s = shaped_probe(&grid, scheme)?;
                let mut entry = serde_json::Map::new();
                for (name, cut) in [("delay", delay_cut(&s)?), ("doppler", doppler_cut(&s)?)] {
                    let path = config
                        .out_dir
                        .join(format!("cuts_{scheme}_{}_{name}.csv", config.tag()));
                    write_cut_csv(create(&path)?, &cut, Some(&header))?;
                    progress(&format!("{scheme} {name} cut -> {}", path.display()));
                    entry.insert(name.into(), cut_metrics(&cut, config.ambiguity.threshold_db));
                    files.push(path);
                }
                out.insert(scheme.name().into(), Value::Object(entry));
            }
            Value::Object(out)
        }
        Command::Ambiguity => {
            let a = &config.ambiguity;
            let span = a.doppler_span.unwrap_or(grid.n() as f64);
            let doppler = DopplerGrid {
                points: a.doppler_points.unwrap_or(4 * grid.n()),
                span_bins: span,
            };
            let mut out = serde_json::Map::new();
            for &scheme in &config.schemes {
                let s = shaped_probe(&grid, scheme)?;
                let max_lag = a.max_lag.unwrap_or(s.len() - 1);
                let surf = ambiguity_surface(&s, max_lag, doppler)?;
                let path = config
                    .out_dir
                    .join(format!("surface_{scheme}_{}.csv", config.tag()));
                write_surface_csv(create(&path)?, &surf, Some(&header))?;
                progress(&format!("{scheme} surface -> {}", path.display()));
                out.insert(
                    scheme.name().into(),
                    json!({
                        "energy": surf.peak(),
                        "lags": surf.lags().len(),
                        "doppler_points": surf.doppler_axis().len(),
                    }),
                );
                files.push(path);
            }
            Value::Object(out)
        }
        Command::Range => {
            let r = &config.range;
            let mut out = serde_json::Map::new();
            for &scheme in &config.schemes {
                let profile = range_scenario(&grid, scheme, &r.delays, &r.dopplers)?;
                let peaks = detect_peaks(&profile, r.min_separation, r.threshold)?;
                let path = config
                    .out_dir
                    .join(format!("range_{scheme}_{}.csv", config.tag()));
                write_profile_csv(create(&path)?, &profile, Some(&header))?;
                progress(&format!("{scheme} range profile -> {}", path.display()));
                let peaks: Vec<Value> = peaks
                    .iter()
                    .map(|p| json!({"lag": p.lag, "magnitude": p.magnitude}))
                    .collect();
                out.insert(scheme.name().into(), json!({ "peaks": peaks }));
                files.push(path);
            }
            Value::Object(out)
        }
        Command::Ber => {
            let b = &config.ber;
            let ber_config = BerConfig {
                grid,
                snr_db: b.snr_db.clone(),
                frames: b.frames,
                channel: b.channel.clone(),
                seed: config.seed,
            };
            let mut points = Vec::new();
            for &scheme in &config.schemes {
                progress(&format!("{scheme}: {} frames x {} SNR points", b.frames, b.snr_db.len()));
                points.extend(ber_experiment(&ber_config, scheme)?);
            }
            let path = config.out_dir.join(format!("ber_{}.csv", config.tag()));
            write_ber_csv(create(&path)?, &points, Some(&header))?;
            progress(&format!("BER table -> {}", path.display()));
            files.push(path);
            serde_json::to_value(&points)?
        }
        Command::Selftest => {
            let report = run_selftest();
            for c in &report.checks {
                progress(&format!(
                    "{} {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name
                ));
            }
            let value = serde_json::to_value(&report)?;
            if report.failed > 0 {
                return Err(Error::Numerical(format!(
                    "{} of {} self-test checks failed: {}",
                    report.failed,
                    report.checks.len(),
                    value
                )));
            }
            value
        }
    };

    Ok(RunSummary {
        command: config.command,
        config_hash: config.hash()?,
        seed: config.seed,
        files,
        results,
    })
}
