//! Flat key-value experiment configuration: an INI-style text file (one
//! `key = value` per line, `#` comments) plus command-line overrides, so a
//! run is reproducible from a single diffable file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use besov_mhd_core::initial_data::{InitialDataKind, InitialDataSpec};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub resolution: usize,
    pub dt: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub snapshot_every: usize,
    pub p: f64,
    pub s: f64,
    pub seed: u64,
    pub perturb_seed: u64,
    pub constant_c: f64,
    pub constant_c_small: f64,
    pub epsilon: f64,
    pub output_dir: String,
    pub initial_data: String,
    pub mode_n: u32,
    pub scale: f64,
    pub band_lo: u32,
    pub band_hi: u32,
    pub u_file: String,
    pub b_file: String,
    pub picard_iterates: usize,
    pub stability_delta: f64,
    pub decay_window: (f64, f64),
    pub bootstrap_threshold: f64,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            dt: 1e-3,
            t_max: 1.0,
            record_every: 10,
            snapshot_every: 0,
            p: 2.0,
            s: 4.0,
            seed: 1,
            perturb_seed: 1001,
            constant_c: 10.0,
            constant_c_small: 0.1,
            epsilon: 0.05,
            output_dir: "out".into(),
            initial_data: "remark15".into(),
            mode_n: 4,
            scale: 1.0,
            band_lo: 1,
            band_hi: 6,
            u_file: String::new(),
            b_file: String::new(),
            picard_iterates: 7,
            stability_delta: 1e-2,
            decay_window: (2.0, 10.0),
            bootstrap_threshold: 4.0,
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse::<T>()
        .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
}

impl ExperimentConfig {
    pub fn apply_pair(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "resolution" => self.resolution = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "t_max" => self.t_max = parse(key, value)?,
            "record_every" => self.record_every = parse(key, value)?,
            "snapshot_every" => self.snapshot_every = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "s" => self.s = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "perturb_seed" => self.perturb_seed = parse(key, value)?,
            "constant_C" | "constant_c" => self.constant_c = parse(key, value)?,
            "constant_c_small" => self.constant_c_small = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "output_dir" => self.output_dir = value.trim().to_string(),
            "initial_data" => self.initial_data = value.trim().to_string(),
            "mode_n" => self.mode_n = parse(key, value)?,
            "scale" => self.scale = parse(key, value)?,
            "band_lo" => self.band_lo = parse(key, value)?,
            "band_hi" => self.band_hi = parse(key, value)?,
            "u_file" => self.u_file = value.trim().to_string(),
            "b_file" => self.b_file = value.trim().to_string(),
            "picard_iterates" => self.picard_iterates = parse(key, value)?,
            "stability_delta" => self.stability_delta = parse(key, value)?,
            "decay_window_start" => self.decay_window.0 = parse(key, value)?,
            "decay_window_end" => self.decay_window.1 = parse(key, value)?,
            "bootstrap_threshold" => self.bootstrap_threshold = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            other => return Err(ConfigError(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.apply_pair(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.resolution.is_power_of_two() || self.resolution < 8 {
            return Err(ConfigError(format!(
                "resolution {} must be a power of two >= 8",
                self.resolution
            )));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError(format!("dt = {} must be positive", self.dt)));
        }
        if self.t_max < 0.0 {
            return Err(ConfigError(format!(
                "t_max = {} must be nonnegative",
                self.t_max
            )));
        }
        Ok(())
    }

    pub fn initial_data_spec(&self) -> Result<InitialDataSpec, ConfigError> {
        let kind = match self.initial_data.as_str() {
            "remark15" => InitialDataKind::Remark15 { n: self.mode_n },
            "single-mode" => InitialDataKind::SingleMode { n: self.mode_n },
            "random-solenoidal" => InitialDataKind::RandomSolenoidal {
                band: (self.band_lo, self.band_hi),
                seed: self.seed,
            },
            "file" => InitialDataKind::File {
                u_path: self.u_file.clone(),
                b_path: self.b_file.clone(),
            },
            other => {
                return Err(ConfigError(format!(
                    "unknown initial_data kind `{other}` \
                     (expected remark15|single-mode|random-solenoidal|file)"
                )))
            }
        };
        Ok(InitialDataSpec {
            kind,
            scale: self.scale,
        })
    }

    /// Render back as a config file (used to record the effective settings of
    /// a run next to its outputs).
    pub fn to_text(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("resolution", self.resolution.to_string());
        map.insert("dt", format!("{:e}", self.dt));
        map.insert("t_max", format!("{:e}", self.t_max));
        map.insert("record_every", self.record_every.to_string());
        map.insert("snapshot_every", self.snapshot_every.to_string());
        map.insert("p", format!("{}", self.p));
        map.insert("s", format!("{}", self.s));
        map.insert("seed", self.seed.to_string());
        map.insert("perturb_seed", self.perturb_seed.to_string());
        map.insert("constant_C", format!("{}", self.constant_c));
        map.insert("constant_c_small", format!("{}", self.constant_c_small));
        map.insert("epsilon", format!("{}", self.epsilon));
        map.insert("output_dir", self.output_dir.clone());
        map.insert("initial_data", self.initial_data.clone());
        map.insert("mode_n", self.mode_n.to_string());
        map.insert("scale", format!("{:e}", self.scale));
        map.insert("band_lo", self.band_lo.to_string());
        map.insert("band_hi", self.band_hi.to_string());
        map.insert("picard_iterates", self.picard_iterates.to_string());
        map.insert("stability_delta", format!("{:e}", self.stability_delta));
        map.insert("decay_window_start", format!("{}", self.decay_window.0));
        map.insert("decay_window_end", format!("{}", self.decay_window.1));
        map.insert("bootstrap_threshold", format!("{}", self.bootstrap_threshold));
        map.insert("threads", self.threads.to_string());
        if !self.u_file.is_empty() {
            map.insert("u_file", self.u_file.clone());
        }
        if !self.b_file.is_empty() {
            map.insert("b_file", self.b_file.clone());
        }
        let mut out = String::new();
        for (k, v) in map {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
