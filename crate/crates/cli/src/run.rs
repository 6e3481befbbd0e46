//! Dispatch of one command and the files it writes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nvpes::correlation::{g2, mandel_q};
use nvpes::evolve::{evolve, uniform_grid};
use nvpes::experiments::{
    chernoff_map, contrast_vs_power, cwodmr_sweep, rabi_experiment, saturation_curve,
    ChernoffMapSpec, ExperimentResult, Invariants, OdmrAxis, OdmrSpec, RabiSpec, SaturationSpec,
    SweepSpec,
};
use nvpes::statistics::pes;
use nvpes::validation::{cross_check, random_cases};
use nvpes::{initial_state, DriveSchedule, DriveSegment};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::config::{Command, ConfigError, Format, RunConfig};

/// Largest `|sum_n P(n) + leakage - 1|` accepted before a run is flagged.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;
/// Largest oracle disagreement accepted by `validate`.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] nvpes::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Simulation(e) => e.kind(),
            RunError::Io { .. } => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let RunError::Config(c) = self {
            v["line"] = json!(c.line);
        }
        v.to_string()
    }
}

/// Command-line overrides of the `[output]` section.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    /// Adds wall time to the metadata, which makes it differ between runs.
    pub record_timing: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub invariants: Invariants,
    /// False when normalization or an oracle check exceeded its tolerance.
    pub checks_passed: bool,
}

struct Produced {
    results: Vec<(String, ExperimentResult)>,
    summary: Map<String, Value>,
    passed: bool,
}

impl Produced {
    fn new() -> Self {
        Produced {
            results: Vec::new(),
            summary: Map::new(),
            passed: true,
        }
    }

    fn add(&mut self, name: &str, r: ExperimentResult) {
        self.results.push((name.to_string(), r));
    }
}

/// Applies the overrides and pins the experiment kind to `command`.
pub fn effective_config(command: Command, cfg: &RunConfig, opts: &RunOptions) -> RunConfig {
    let mut cfg = cfg.clone();
    if let Some(k) = cfg.experiment.kind {
        if k != command {
            log::warn!("config selects '{}' but '{}' was requested", k.name(), command.name());
        }
    }
    cfg.experiment.kind = Some(command);
    if let Some(out) = &opts.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(seed) = opts.seed {
        cfg.output.seed = seed;
    }
    if let Some(f) = opts.format {
        cfg.output.format = f;
    }
    cfg
}

pub fn run(command: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let started = Instant::now();
    let cfg = effective_config(command, cfg, opts);
    let produced = compute(command, &cfg)?;
    let invariants = produced
        .results
        .iter()
        .fold(Invariants::default(), |acc, (_, r)| acc.merge(r.invariants));
    let passed = produced.passed && invariants.max_normalization_error <= NORMALIZATION_TOLERANCE;

    let mut meta = Map::new();
    meta.insert("command".into(), json!(command.name()));
    meta.insert("config".into(), json!(cfg.to_text()));
    meta.insert("seed".into(), json!(cfg.output.seed));
    meta.insert(
        "versions".into(),
        json!({ "nvpes": nvpes::VERSION, "nvpes-cli": env!("CARGO_PKG_VERSION") }),
    );
    meta.insert(
        "invariants".into(),
        json!({
            "max_normalization_error": invariants.max_normalization_error,
            "max_leakage": invariants.max_leakage,
            "normalization_tolerance": NORMALIZATION_TOLERANCE,
            "passed": passed,
        }),
    );
    meta.insert("summary".into(), Value::Object(produced.summary));
    let per_result: Map<String, Value> = produced
        .results
        .iter()
        .map(|(name, r)| (name.clone(), json!(r.metadata)))
        .collect();
    meta.insert("results".into(), Value::Object(per_result));
    if opts.record_timing {
        meta.insert("wall_time_s".into(), json!(started.elapsed().as_secs_f64()));
    }

    let dir = PathBuf::from(&cfg.output.dir);
    let files = write_outputs(&dir, cfg.output.format, &produced.results, &Value::Object(meta))?;
    Ok(Outcome {
        files,
        invariants,
        checks_passed: passed,
    })
}

fn write_outputs(
    dir: &Path,
    format: Format,
    results: &[(String, ExperimentResult)],
    meta: &Value,
) -> Result<Vec<PathBuf>, RunError> {
    let mut planned: Vec<(PathBuf, String)> = Vec::new();
    for (name, r) in results {
        if matches!(format, Format::Csv | Format::Both) {
            planned.push((dir.join(format!("{name}.csv")), r.to_csv()));
        }
        if matches!(format, Format::Json | Format::Both) {
            let body = serde_json::to_string_pretty(r).expect("results serialize") + "\n";
            planned.push((dir.join(format!("{name}.json")), body));
        }
    }
    let sidecar = serde_json::to_string_pretty(meta).expect("metadata serializes") + "\n";
    planned.push((dir.join("metadata.json"), sidecar));

    let created_dir = !dir.exists();
    let io = |path: &Path, source| RunError::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for (path, body) in planned {
        if let Err(e) = fs::write(&path, body) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created_dir {
                let _ = fs::remove_dir(dir);
            }
            return Err(io(&path, e));
        }
        written.push(path);
    }
    Ok(written)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn compute(command: Command, cfg: &RunConfig) -> Result<Produced, RunError> {
    let rates = cfg.model.rates();
    let e = &cfg.experiment;
    let opts = cfg.simulation.options();
    let mut out = Produced::new();
    match command {
        Command::Pes => {
            let segments = cfg
                .drive
                .iter()
                .map(|s| s.segment())
                .collect::<nvpes::Result<Vec<_>>>()?;
            let schedule = DriveSchedule::new(segments)?;
            let init = initial_state(cfg.simulation.initial.state(), cfg.simulation.n_max)?;
            let grid = uniform_grid(schedule.total_duration(), cfg.simulation.points);
            let traj = evolve(&init, &schedule, &rates, &grid, &opts)?;
            let dist = pes(&traj)?;
            let inv = Invariants::of_distribution(&dist);

            let mut table = ExperimentResult::new("t", "us", grid.clone());
            for n in 0..=dist.n_max() {
                table.push(&format!("P({n})"), "1", dist.pmf.iter().map(|c| c[n]).collect())?;
            }
            table.push("leakage", "1", dist.leakage.clone())?;
            table.invariants = inv;
            let mean = dist.moment_curve(1);
            let second = dist.moment_curve(2);
            let mut moments = ExperimentResult::new("t", "us", grid);
            moments.push("mean", "counts", mean.clone())?;
            moments.push(
                "variance",
                "counts^2",
                mean.iter().zip(&second).map(|(m, s)| s - m * m).collect(),
            )?;
            moments.push("excited", "1", dist.excited.clone().unwrap_or_default())?;
            moments.invariants = inv;
            out.add("pes", table);
            out.add("moments", moments);
        }
        Command::ChernoffMap => {
            let map = chernoff_map(&ChernoffMapSpec {
                rates,
                powers: e.pumps.clone(),
                horizon: e.horizon,
                points: e.points,
                rabi: e.rabi,
                detuning: e.detuning,
            })?;
            out.summary.insert("peaks".into(), json!(map.peak_list()));
            out.add("chernoff_curves", map.curves);
            out.add("chernoff_peaks", map.peaks);
        }
        Command::Rabi => {
            let mut spec = RabiSpec::new(
                rates,
                e.rabi,
                e.detuning,
                linspace(0.0, e.tau_max, e.tau_points),
                e.pump,
            );
            spec.polarization = e.polarization;
            spec.readout_duration = e.readout_duration;
            spec.shots = e.shots;
            spec.seed = cfg.output.seed;
            out.add("rabi", rabi_experiment(&spec)?);
        }
        Command::G2 => {
            let curve = g2(&rates, &DriveSegment::laser(1.0, e.pump)?, e.delay_horizon, e.delay_steps)?;
            let mut r = ExperimentResult::new("tau", "us", curve.taus.clone());
            r.push("d1", "1/us", curve.d1.clone())?;
            r.push("d", "1/us", curve.d.clone())?;
            r.push("g2", "1", curve.g2.clone())?;
            let (t_peak, g_peak) = curve.peak();
            r.set_meta("plateau", curve.plateau);
            r.set_meta("dip_width", curve.dip_width());
            r.set_meta("peak", json!({ "tau": t_peak, "g2": g_peak }));
            out.summary.insert("g2_zero".into(), json!(curve.g2[0]));
            out.summary.insert("dip_width".into(), json!(curve.dip_width()));
            out.add("g2", r);
        }
        Command::Mandel => {
            let grid = uniform_grid(e.horizon, e.points);
            let init = initial_state(cfg.simulation.initial.state(), cfg.simulation.n_max)?;
            let sweep = SweepSpec::new("pump", "MHz", e.pumps.clone())?;
            let curves = sweep.run(|p| {
                let schedule = DriveSchedule::single(DriveSegment::laser(e.horizon, p)?)?;
                let dist = pes(&evolve(&init, &schedule, &rates, &grid, &opts)?)?;
                Ok((mandel_q(&dist)?, Invariants::of_distribution(&dist)))
            })?;
            let mut q = ExperimentResult::new("t", "us", grid);
            let mut summary = ExperimentResult::new("pump", "MHz", e.pumps.clone());
            let mut inv = Invariants::default();
            for (p, (c, i)) in e.pumps.iter().zip(&curves) {
                inv = inv.merge(*i);
                q.push(&format!("Q(pump={p})"), "1", c.q.iter().map(|v| v.unwrap_or(f64::NAN)).collect())?;
            }
            summary.push("t_min", "us", curves.iter().map(|c| c.0.t_min).collect())?;
            summary.push("q_min", "1", curves.iter().map(|c| c.0.q_min).collect())?;
            summary.push("t_zero", "us", curves.iter().map(|c| c.0.t_zero.unwrap_or(f64::NAN)).collect())?;
            q.invariants = inv;
            summary.invariants = inv;
            out.add("mandel", q);
            out.add("mandel_summary", summary);
        }
        Command::Saturation => {
            out.add(
                "saturation",
                saturation_curve(&SaturationSpec {
                    rates,
                    powers: e.powers.clone(),
                    collection_scale: e.scale,
                    background_slope: e.background_slope,
                })?,
            );
        }
        Command::Odmr => {
            let detunings = linspace(e.detuning_min, e.detuning_max, e.detuning_points);
            let axis = match (e.freq_min, e.freq_max) {
                (Some(a), Some(b)) => OdmrAxis::Frequency {
                    mhz: linspace(a, b, e.detuning_points),
                    field_mt: e.field,
                },
                (None, None) => OdmrAxis::Detuning(detunings.clone()),
                _ => {
                    return Err(ConfigError {
                        line: 0,
                        message: "freq_min and freq_max must be given together".into(),
                    }
                    .into())
                }
            };
            let spectrum = cwodmr_sweep(&OdmrSpec {
                rates,
                axis,
                rabi: e.rabi,
                pump: e.pump,
            })?;
            out.summary.insert("contrast".into(), json!(spectrum.contrast));
            out.summary.insert("raw_contrast".into(), json!(spectrum.raw_contrast));
            out.summary.insert("fit".into(), json!(spectrum.fit));
            out.add("odmr", spectrum.result);
            if e.contrast_sweep {
                out.add("odmr_contrast", contrast_vs_power(&rates, e.rabi, &e.powers, &detunings)?);
            }
        }
        Command::Validate => {
            let horizon = e.times.iter().cloned().fold(0.0, f64::max);
            let cases = random_cases(cfg.output.seed, e.sets, horizon)?;
            let sweep = SweepSpec::new("case", "1", (0..cases.len()).map(|i| i as f64).collect())?;
            let checks = sweep.run_indexed(|i, _| cross_check(&cases[i], &e.times, e.phase_points))?;
            let rows: Vec<(usize, &nvpes::validation::CrossCheck)> = checks
                .iter()
                .enumerate()
                .flat_map(|(i, c)| c.iter().map(move |r| (i, r)))
                .collect();
            let mut r = ExperimentResult::new("row", "1", (0..rows.len()).map(|i| i as f64).collect());
            r.push("case", "1", rows.iter().map(|(i, _)| *i as f64).collect())?;
            r.push("time", "us", rows.iter().map(|(_, c)| c.time).collect())?;
            r.push("max_abs_diff", "1", rows.iter().map(|(_, c)| c.max_abs_diff).collect())?;
            r.push(
                "hierarchy_normalization",
                "1",
                rows.iter().map(|(_, c)| c.hierarchy_normalization).collect(),
            )?;
            r.push("oracle_imag_residue", "1", rows.iter().map(|(_, c)| c.oracle_imag_residue).collect())?;
            r.invariants.max_normalization_error = rows
                .iter()
                .map(|(_, c)| c.hierarchy_normalization)
                .fold(0.0, f64::max);
            let worst = rows.iter().map(|(_, c)| c.max_abs_diff).fold(0.0, f64::max);
            out.passed = worst < ORACLE_TOLERANCE;
            r.set_meta("cases", &cases);
            out.summary.insert(
                "oracle".into(),
                json!({ "worst_abs_diff": worst, "tolerance": ORACLE_TOLERANCE, "passed": out.passed }),
            );
            out.add("validate", r);
        }
    }
    Ok(out)
}
