//! Line-oriented run configuration.
//!
//! ```text
//! [model]
//! gamma0 = 63 MHz
//! [drive]
//! segment = 0.7 us, 10 MHz, 0 MHz, 0 MHz
//! [experiment]
//! kind = pes
//! ```
//!
//! Sections are `model`, `drive`, `simulation`, `experiment` and `output`;
//! only `experiment` is mandatory. Every quantity has one fixed unit. Units
//! may be omitted, but a unit that is written must be the right one.
//! Comments start with `#`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use clap::ValueEnum;
use nvpes::{DriveSegment, EvolveOptions, InitialState, RateSet, Tolerance};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Pes,
    ChernoffMap,
    Rabi,
    G2,
    Mandel,
    Saturation,
    Odmr,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Pes => "pes",
            Command::ChernoffMap => "chernoff-map",
            Command::Rabi => "rabi",
            Command::G2 => "g2",
            Command::Mandel => "mandel",
            Command::Saturation => "saturation",
            Command::Odmr => "odmr",
            Command::Validate => "validate",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        Command::value_variants().iter().copied().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
    Both,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    None,
    Us,
    MHz,
    UW,
    MT,
    MHzPerUW,
    MHzPerMT,
}

impl Unit {
    fn label(self) -> &'static str {
        match self {
            Unit::None => "",
            Unit::Us => "us",
            Unit::MHz => "MHz",
            Unit::UW => "uW",
            Unit::MT => "mT",
            Unit::MHzPerUW => "MHz/uW",
            Unit::MHzPerMT => "MHz/mT",
        }
    }

    fn parse(s: &str) -> Option<Unit> {
        Some(match s {
            "us" | "µs" | "μs" => Unit::Us,
            "MHz" => Unit::MHz,
            "uW" | "µW" | "μW" => Unit::UW,
            "mT" => Unit::MT,
            "MHz/uW" | "MHz/µW" | "MHz/μW" => Unit::MHzPerUW,
            "MHz/mT" => Unit::MHzPerMT,
            _ => return None,
        })
    }
}

fn number(item: &str, unit: Unit, key: &str, line: usize) -> Result<f64, ConfigError> {
    let mut parts = item.split_whitespace();
    let Some(num) = parts.next() else {
        return err(line, format!("{key}: missing value"));
    };
    let value: f64 = match num.parse() {
        Ok(v) => v,
        Err(_) => return err(line, format!("{key}: '{num}' is not a number")),
    };
    if !value.is_finite() {
        return err(line, format!("{key}: value must be finite"));
    }
    match (parts.next(), parts.next()) {
        (None, _) => {}
        (Some(u), None) => match Unit::parse(u) {
            Some(found) if found == unit => {}
            Some(_) | None if unit == Unit::None => {
                return err(line, format!("{key}: unexpected unit '{u}' on a dimensionless value"))
            }
            _ => {
                return err(
                    line,
                    format!("{key}: unit '{u}' does not match the expected {}", unit.label()),
                )
            }
        },
        (Some(_), Some(_)) => return err(line, format!("{key}: trailing text after the unit")),
    }
    Ok(value)
}

fn list(raw: &str, unit: Unit, key: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    let items: Vec<&str> = raw.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return err(line, format!("{key}: empty list entry"));
    }
    items.iter().map(|s| number(s, unit, key, line)).collect()
}

fn count(raw: &str, key: &str, line: usize) -> Result<usize, ConfigError> {
    match raw.trim().parse::<usize>() {
        Ok(v) => Ok(v),
        Err(_) => err(line, format!("{key}: '{}' is not a non-negative integer", raw.trim())),
    }
}

fn flag(raw: &str, key: &str, line: usize) -> Result<bool, ConfigError> {
    match raw.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => err(line, format!("{key}: expected true or false, got '{other}'")),
    }
}

fn at_least(v: f64, min: f64, key: &str, line: usize) -> Result<f64, ConfigError> {
    if v < min {
        return err(line, format!("{key} must be >= {min}, got {v}"));
    }
    Ok(v)
}

fn positive(v: f64, key: &str, line: usize) -> Result<f64, ConfigError> {
    if !(v > 0.0) {
        return err(line, format!("{key} must be > 0, got {v}"));
    }
    Ok(v)
}

fn fmt_list(v: &[f64], unit: Unit) -> String {
    let body: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    with_unit(&body.join(", "), unit)
}

fn with_unit(s: &str, unit: Unit) -> String {
    if unit == Unit::None {
        s.to_string()
    } else {
        format!("{s} {}", unit.label())
    }
}

/// Rate constants as written in the config: rates in MHz (1/us), the
/// zero-field splitting in MHz and the gyromagnetic ratio in MHz/mT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gamma0: f64,
    pub gamma_f0: f64,
    pub gamma_f1: f64,
    pub gamma_s0: f64,
    pub gamma_s1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c_laser: f64,
    pub zfs: f64,
    pub gyro: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let r = RateSet::default();
        ModelConfig {
            gamma0: r.gamma0,
            gamma_f0: r.gamma_f0,
            gamma_f1: r.gamma_f1,
            gamma_s0: r.gamma_s0,
            gamma_s1: r.gamma_s1,
            gamma1: r.gamma1,
            gamma2: r.gamma2,
            c_laser: r.c_laser,
            zfs: 2870.0,
            gyro: 28.024,
        }
    }
}

impl ModelConfig {
    pub fn rates(&self) -> RateSet {
        RateSet {
            gamma0: self.gamma0,
            gamma_f0: self.gamma_f0,
            gamma_f1: self.gamma_f1,
            gamma_s0: self.gamma_s0,
            gamma_s1: self.gamma_s1,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            c_laser: self.c_laser,
            zfs: 2.0 * PI * self.zfs,
            gyro: 2.0 * PI * self.gyro,
        }
    }

    fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
        let slot = match key {
            "gamma0" => &mut self.gamma0,
            "gamma_f0" => &mut self.gamma_f0,
            "gamma_f1" => &mut self.gamma_f1,
            "gamma_s0" => &mut self.gamma_s0,
            "gamma_s1" => &mut self.gamma_s1,
            "gamma1" => &mut self.gamma1,
            "gamma2" => &mut self.gamma2,
            "c_laser" => {
                self.c_laser = at_least(number(raw, Unit::MHzPerUW, key, line)?, 0.0, key, line)?;
                return Ok(());
            }
            "zfs" => {
                self.zfs = number(raw, Unit::MHz, key, line)?;
                return Ok(());
            }
            "gyro" => {
                self.gyro = number(raw, Unit::MHzPerMT, key, line)?;
                return Ok(());
            }
            _ => return err(line, format!("unknown key '{key}' in [model]")),
        };
        *slot = at_least(number(raw, Unit::MHz, key, line)?, 0.0, key, line)?;
        Ok(())
    }

    fn emit(&self, out: &mut String) {
        out.push_str("[model]\n");
        for (k, v) in [
            ("gamma0", self.gamma0),
            ("gamma_f0", self.gamma_f0),
            ("gamma_f1", self.gamma_f1),
            ("gamma_s0", self.gamma_s0),
            ("gamma_s1", self.gamma_s1),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ] {
            let _ = writeln!(out, "{k} = {v} MHz");
        }
        let _ = writeln!(out, "c_laser = {} MHz/uW", self.c_laser);
        let _ = writeln!(out, "zfs = {} MHz", self.zfs);
        let _ = writeln!(out, "gyro = {} MHz/mT", self.gyro);
    }
}

/// `segment = duration us, pump MHz, rabi MHz, detuning MHz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub duration: f64,
    pub pump: f64,
    pub rabi: f64,
    pub detuning: f64,
}

impl SegmentConfig {
    fn parse(raw: &str, line: usize) -> Result<Self, ConfigError> {
        let items: Vec<&str> = raw.split(',').map(str::trim).collect();
        if items.len() != 4 {
            return err(
                line,
                "segment needs 4 fields: duration us, pump MHz, rabi MHz, detuning MHz",
            );
        }
        Ok(SegmentConfig {
            duration: positive(number(items[0], Unit::Us, "segment duration", line)?, "segment duration", line)?,
            pump: at_least(number(items[1], Unit::MHz, "segment pump", line)?, 0.0, "segment pump", line)?,
            rabi: number(items[2], Unit::MHz, "segment rabi", line)?,
            detuning: number(items[3], Unit::MHz, "segment detuning", line)?,
        })
    }

    pub fn segment(&self) -> nvpes::Result<DriveSegment> {
        DriveSegment::new(self.duration, self.pump, self.rabi, self.detuning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Thermal,
    Ket0,
    Ket1,
    Ketm1,
}

impl InitialKind {
    fn name(self) -> &'static str {
        match self {
            InitialKind::Thermal => "thermal",
            InitialKind::Ket0 => "ket0",
            InitialKind::Ket1 => "ket1",
            InitialKind::Ketm1 => "ketm1",
        }
    }

    pub fn state(self) -> InitialState {
        match self {
            InitialKind::Thermal => InitialState::Thermal,
            InitialKind::Ket0 => InitialState::Ket0,
            InitialKind::Ket1 => InitialState::Ket1,
            InitialKind::Ketm1 => InitialState::KetMinus1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub initial: InitialKind,
    /// Output points over the drive schedule.
    pub points: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub tail_tol: f64,
    /// Starting photon-number cutoff.
    pub n_max: usize,
    pub n_max_cap: usize,
    pub auto_extend: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let o = EvolveOptions::default();
        SimulationConfig {
            initial: InitialKind::Thermal,
            points: 71,
            rel_tol: o.tol.rel,
            abs_tol: o.tol.abs,
            tail_tol: o.tail_tol,
            n_max: 16,
            n_max_cap: o.n_max_cap,
            auto_extend: o.auto_extend,
        }
    }
}

impl SimulationConfig {
    pub fn options(&self) -> EvolveOptions {
        EvolveOptions {
            tol: Tolerance {
                rel: self.rel_tol,
                abs: self.abs_tol,
            },
            tail_tol: self.tail_tol,
            n_max_cap: self.n_max_cap,
            auto_extend: self.auto_extend,
        }
    }

    fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "initial" => {
                self.initial = match raw.trim() {
                    "thermal" => InitialKind::Thermal,
                    "ket0" => InitialKind::Ket0,
                    "ket1" => InitialKind::Ket1,
                    "ketm1" => InitialKind::Ketm1,
                    other => {
                        return err(
                            line,
                            format!("initial: expected thermal, ket0, ket1 or ketm1, got '{other}'"),
                        )
                    }
                }
            }
            "points" => self.points = count(raw, key, line)?,
            "rel_tol" => self.rel_tol = positive(number(raw, Unit::None, key, line)?, key, line)?,
            "abs_tol" => self.abs_tol = positive(number(raw, Unit::None, key, line)?, key, line)?,
            "tail_tol" => self.tail_tol = positive(number(raw, Unit::None, key, line)?, key, line)?,
            "n_max" => self.n_max = count(raw, key, line)?,
            "n_max_cap" => self.n_max_cap = count(raw, key, line)?,
            "auto_extend" => self.auto_extend = flag(raw, key, line)?,
            _ => return err(line, format!("unknown key '{key}' in [simulation]")),
        }
        if (key == "points" && self.points < 2) || (key == "n_max" && self.n_max < 1) {
            return err(line, format!("{key} is too small"));
        }
        Ok(())
    }

    fn emit(&self, out: &mut String) {
        out.push_str("[simulation]\n");
        let _ = writeln!(out, "initial = {}", self.initial.name());
        let _ = writeln!(out, "points = {}", self.points);
        let _ = writeln!(out, "rel_tol = {}", self.rel_tol);
        let _ = writeln!(out, "abs_tol = {}", self.abs_tol);
        let _ = writeln!(out, "tail_tol = {}", self.tail_tol);
        let _ = writeln!(out, "n_max = {}", self.n_max);
        let _ = writeln!(out, "n_max_cap = {}", self.n_max_cap);
        let _ = writeln!(out, "auto_extend = {}", self.auto_extend);
    }
}

/// Parameters of every experiment kind; each command reads the keys it
/// needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Option<Command>,
    /// Pump rates swept by chernoff-map and mandel, MHz.
    pub pumps: Vec<f64>,
    /// Pump rate of single-power runs, MHz.
    pub pump: f64,
    pub rabi: f64,
    pub detuning: f64,
    pub horizon: f64,
    pub points: usize,
    pub tau_max: f64,
    pub tau_points: usize,
    pub polarization: f64,
    pub readout_duration: f64,
    pub shots: usize,
    pub delay_horizon: f64,
    pub delay_steps: usize,
    /// Laser powers for saturation and contrast sweeps, uW.
    pub powers: Vec<f64>,
    pub scale: f64,
    pub background_slope: f64,
    pub detuning_min: f64,
    pub detuning_max: f64,
    pub detuning_points: usize,
    /// Microwave frequency window in MHz; replaces the detuning window.
    pub freq_min: Option<f64>,
    pub freq_max: Option<f64>,
    pub field: f64,
    pub contrast_sweep: bool,
    pub sets: usize,
    pub times: Vec<f64>,
    pub phase_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            pumps: vec![2.0, 5.0, 10.0, 20.0, 40.0],
            pump: 20.0,
            rabi: 10.0,
            detuning: 0.0,
            horizon: 3.0,
            points: 601,
            tau_max: 2.0,
            tau_points: 201,
            polarization: 2.0,
            readout_duration: 2.0,
            shots: 3000,
            delay_horizon: 4.0,
            delay_steps: 20000,
            powers: vec![0.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0],
            scale: 1.0,
            background_slope: 0.0,
            detuning_min: -100.0,
            detuning_max: 100.0,
            detuning_points: 201,
            freq_min: None,
            freq_max: None,
            field: 0.0,
            contrast_sweep: false,
            sets: 5,
            times: vec![0.1, 0.7, 3.0],
            phase_points: 256,
        }
    }
}

impl ExperimentConfig {
    fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "kind" => match Command::parse(raw.trim()) {
                Some(c) => self.kind = Some(c),
                None => return err(line, format!("unknown experiment kind '{}'", raw.trim())),
            },
            "pumps" => {
                self.pumps = list(raw, Unit::MHz, key, line)?;
                if let Some(v) = self.pumps.iter().find(|v| **v < 0.0) {
                    return err(line, format!("pumps must be >= 0, got {v}"));
                }
            }
            "pump" => self.pump = at_least(number(raw, Unit::MHz, key, line)?, 0.0, key, line)?,
            "rabi" => self.rabi = number(raw, Unit::MHz, key, line)?,
            "detuning" => self.detuning = number(raw, Unit::MHz, key, line)?,
            "horizon" => self.horizon = positive(number(raw, Unit::Us, key, line)?, key, line)?,
            "points" => self.points = count(raw, key, line)?,
            "tau_max" => self.tau_max = at_least(number(raw, Unit::Us, key, line)?, 0.0, key, line)?,
            "tau_points" => self.tau_points = count(raw, key, line)?,
            "polarization" => self.polarization = positive(number(raw, Unit::Us, key, line)?, key, line)?,
            "readout_duration" => {
                self.readout_duration = positive(number(raw, Unit::Us, key, line)?, key, line)?
            }
            "shots" => self.shots = count(raw, key, line)?,
            "delay_horizon" => self.delay_horizon = positive(number(raw, Unit::Us, key, line)?, key, line)?,
            "delay_steps" => self.delay_steps = count(raw, key, line)?,
            "powers" => {
                self.powers = list(raw, Unit::UW, key, line)?;
                if let Some(v) = self.powers.iter().find(|v| **v < 0.0) {
                    return err(line, format!("powers must be >= 0, got {v}"));
                }
            }
            "scale" => self.scale = at_least(number(raw, Unit::None, key, line)?, 0.0, key, line)?,
            "background_slope" => {
                self.background_slope = at_least(number(raw, Unit::None, key, line)?, 0.0, key, line)?
            }
            "detuning_min" => self.detuning_min = number(raw, Unit::MHz, key, line)?,
            "detuning_max" => self.detuning_max = number(raw, Unit::MHz, key, line)?,
            "detuning_points" => self.detuning_points = count(raw, key, line)?,
            "freq_min" => self.freq_min = Some(number(raw, Unit::MHz, key, line)?),
            "freq_max" => self.freq_max = Some(number(raw, Unit::MHz, key, line)?),
            "field" => self.field = at_least(number(raw, Unit::MT, key, line)?, 0.0, key, line)?,
            "contrast_sweep" => self.contrast_sweep = flag(raw, key, line)?,
            "sets" => self.sets = count(raw, key, line)?,
            "times" => {
                self.times = list(raw, Unit::Us, key, line)?;
                if let Some(v) = self.times.iter().find(|v| **v <= 0.0) {
                    return err(line, format!("times must be > 0, got {v}"));
                }
            }
            "phase_points" => self.phase_points = count(raw, key, line)?,
            _ => return err(line, format!("unknown key '{key}' in [experiment]")),
        }
        let too_small = match key {
            "points" => self.points < 3,
            "tau_points" => self.tau_points < 1,
            "delay_steps" => self.delay_steps < 10,
            "detuning_points" => self.detuning_points < 5,
            "sets" => self.sets < 1,
            "phase_points" => !self.phase_points.is_power_of_two() || self.phase_points < 2,
            _ => false,
        };
        if too_small {
            return err(line, format!("{key} is out of range"));
        }
        Ok(())
    }

    fn emit(&self, out: &mut String) {
        out.push_str("[experiment]\n");
        if let Some(k) = self.kind {
            let _ = writeln!(out, "kind = {}", k.name());
        }
        let _ = writeln!(out, "pumps = {}", fmt_list(&self.pumps, Unit::MHz));
        let scalars = [
            ("pump", self.pump, Unit::MHz),
            ("rabi", self.rabi, Unit::MHz),
            ("detuning", self.detuning, Unit::MHz),
            ("horizon", self.horizon, Unit::Us),
            ("tau_max", self.tau_max, Unit::Us),
            ("polarization", self.polarization, Unit::Us),
            ("readout_duration", self.readout_duration, Unit::Us),
            ("delay_horizon", self.delay_horizon, Unit::Us),
            ("scale", self.scale, Unit::None),
            ("background_slope", self.background_slope, Unit::None),
            ("detuning_min", self.detuning_min, Unit::MHz),
            ("detuning_max", self.detuning_max, Unit::MHz),
            ("field", self.field, Unit::MT),
        ];
        for (k, v, u) in scalars {
            let _ = writeln!(out, "{k} = {}", with_unit(&v.to_string(), u));
        }
        for (k, v) in [
            ("points", self.points),
            ("tau_points", self.tau_points),
            ("shots", self.shots),
            ("delay_steps", self.delay_steps),
            ("detuning_points", self.detuning_points),
            ("sets", self.sets),
            ("phase_points", self.phase_points),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "powers = {}", fmt_list(&self.powers, Unit::UW));
        if let Some(f) = self.freq_min {
            let _ = writeln!(out, "freq_min = {f} MHz");
        }
        if let Some(f) = self.freq_max {
            let _ = writeln!(out, "freq_max = {f} MHz");
        }
        let _ = writeln!(out, "contrast_sweep = {}", self.contrast_sweep);
        let _ = writeln!(out, "times = {}", fmt_list(&self.times, Unit::Us));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: String,
    pub format: Format,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            format: Format::Csv,
            seed: 0,
        }
    }
}

impl OutputConfig {
    fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
        let raw = raw.trim();
        match key {
            "dir" => {
                if raw.is_empty() {
                    return err(line, "dir must not be empty");
                }
                self.dir = raw.to_string();
            }
            "format" => {
                self.format = match Format::from_str(raw, false) {
                    Ok(f) => f,
                    Err(_) => return err(line, format!("format: expected csv, json or both, got '{raw}'")),
                }
            }
            "seed" => match raw.parse() {
                Ok(s) => self.seed = s,
                Err(_) => return err(line, format!("seed: '{raw}' is not a non-negative integer")),
            },
            _ => return err(line, format!("unknown key '{key}' in [output]")),
        }
        Ok(())
    }

    fn emit(&self, out: &mut String) {
        out.push_str("[output]\n");
        let _ = writeln!(out, "dir = {}", self.dir);
        let _ = writeln!(out, "format = {}", self.format.name());
        let _ = writeln!(out, "seed = {}", self.seed);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub drive: Vec<SegmentConfig>,
    pub simulation: SimulationConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            drive: vec![SegmentConfig {
                duration: 0.7,
                pump: 10.0,
                rabi: 0.0,
                detuning: 0.0,
            }],
            simulation: SimulationConfig::default(),
            experiment: ExperimentConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Model,
    Drive,
    Simulation,
    Experiment,
    Output,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<Section> = None;
    let mut seen: Vec<Section> = Vec::new();
    let mut keys: Vec<(Section, String)> = Vec::new();
    let mut segments: Option<Vec<SegmentConfig>> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return err(line, format!("malformed section header '{content}'"));
            };
            let s = match name.trim() {
                "model" => Section::Model,
                "drive" => Section::Drive,
                "simulation" => Section::Simulation,
                "experiment" => Section::Experiment,
                "output" => Section::Output,
                other => return err(line, format!("unknown section [{other}]")),
            };
            if seen.contains(&s) {
                return err(line, format!("section [{}] appears twice", name.trim()));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(line, format!("expected 'key = value', got '{content}'"));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(s) = section else {
            return err(line, format!("key '{key}' outside any section"));
        };
        if s != Section::Drive || key != "segment" {
            if keys.iter().any(|(ks, k)| *ks == s && k == key) {
                return err(line, format!("duplicate key '{key}'"));
            }
            keys.push((s, key.to_string()));
        }
        match s {
            Section::Model => cfg.model.set(key, value, line)?,
            Section::Drive => {
                if key != "segment" {
                    return err(line, format!("unknown key '{key}' in [drive]"));
                }
                segments
                    .get_or_insert_with(Vec::new)
                    .push(SegmentConfig::parse(value, line)?);
            }
            Section::Simulation => cfg.simulation.set(key, value, line)?,
            Section::Experiment => cfg.experiment.set(key, value, line)?,
            Section::Output => cfg.output.set(key, value, line)?,
        }
    }
    if !seen.contains(&Section::Experiment) {
        return err(0, "missing section [experiment]");
    }
    if let Some(s) = segments {
        cfg.drive = s;
    }
    if cfg.drive.is_empty() {
        return err(0, "[drive] needs at least one segment");
    }
    if let Err(e) = cfg.model.rates().validate() {
        return err(0, e.to_string());
    }
    Ok(cfg)
}

impl RunConfig {
    /// Effective configuration with every default written out.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.model.emit(&mut out);
        out.push_str("\n[drive]\n");
        for s in &self.drive {
            let _ = writeln!(
                out,
                "segment = {} us, {} MHz, {} MHz, {} MHz",
                s.duration, s.pump, s.rabi, s.detuning
            );
        }
        out.push('\n');
        self.simulation.emit(&mut out);
        out.push('\n');
        self.experiment.emit(&mut out);
        out.push('\n');
        self.output.emit(&mut out);
        out
    }
}
