//! Figure-level sweeps over the model: Chernoff maps, Rabi readout,
//! saturation and cwODMR.
//!
//! Sweep points run in parallel and are merged in input order, so results
//! depend only on the inputs and the seed.

pub mod lorentzian;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::evolve::{evolve, evolve_to_end, uniform_grid, EvolveOptions};
use crate::model::{
    initial_state, resonance_frequencies, DriveSchedule, DriveSegment, InitialState,
    PhotonResolvedState, RateSet,
};
use crate::statistics::{chernoff_of, pes, sample_counts_with, CountingDistribution};
use crate::validation::steady_flux;

pub use lorentzian::{lorentzian_fit, LorentzianFit};

/// Named values along a sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: &str, unit: &str, values: Vec<f64>) -> Result<Self> {
        let spec = SweepSpec {
            axis: axis.to_string(),
            unit: unit.to_string(),
            values,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter(format!("sweep over {} has no values", self.axis)));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{} = {v} is not finite", self.axis)));
        }
        Ok(())
    }

    /// Evaluates `f` at every value in parallel; the first failure in input
    /// order is returned, annotated with its sweep value.
    pub fn run<T: Send>(&self, f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.run_indexed(|_, v| f(v))
    }

    /// Like [`SweepSpec::run`], also passing the position of each value.
    pub fn run_indexed<T: Send>(&self, f: impl Fn(usize, f64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.validate()?;
        let out: Vec<Result<T>> = self
            .values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| f(i, v))
            .collect();
        out.into_iter()
            .zip(&self.values)
            .map(|(r, &v)| r.map_err(|e| e.at_point(&self.axis, v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

/// Worst normalization error and leakage seen while producing a result.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Invariants {
    pub max_normalization_error: f64,
    pub max_leakage: f64,
}

impl Invariants {
    pub fn of_distribution(dist: &CountingDistribution) -> Self {
        Invariants {
            max_normalization_error: dist.max_normalization_error(),
            max_leakage: dist.max_leakage(),
        }
    }

    pub fn of_state(state: &PhotonResolvedState) -> Self {
        Invariants {
            max_normalization_error: state.normalization_error(),
            max_leakage: state.leakage,
        }
    }

    pub fn merge(self, other: Invariants) -> Self {
        Invariants {
            max_normalization_error: self.max_normalization_error.max(other.max_normalization_error),
            max_leakage: self.max_leakage.max(other.max_leakage),
        }
    }
}

/// One x axis with any number of named y series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub x_name: String,
    pub x_unit: String,
    pub x: Vec<f64>,
    pub series: Vec<Series>,
    pub invariants: Invariants,
    pub metadata: BTreeMap<String, Value>,
}

impl ExperimentResult {
    pub fn new(x_name: &str, x_unit: &str, x: Vec<f64>) -> Self {
        ExperimentResult {
            x_name: x_name.to_string(),
            x_unit: x_unit.to_string(),
            x,
            series: Vec::new(),
            invariants: Invariants::default(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, name: &str, unit: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.x.len() {
            return Err(Error::Shape(format!(
                "series {name} has {} values for {} x points",
                values.len(),
                self.x.len()
            )));
        }
        self.series.push(Series {
            name: name.to_string(),
            unit: unit.to_string(),
            values,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.insert(key.to_string(), v);
    }

    /// Header `name [unit]` per column, then one row per x value. Numbers use
    /// the shortest representation that round-trips exactly.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{} [{}]", self.x_name, self.x_unit);
        for s in &self.series {
            out.push_str(&format!(",{} [{}]", s.name, s.unit));
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            out.push_str(&format_number(*x));
            for s in &self.series {
                out.push(',');
                out.push_str(&format_number(s.values[i]));
            }
            out.push('\n');
        }
        out
    }
}

fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn laser_only(duration: f64, pump: f64) -> Result<DriveSchedule> {
    DriveSchedule::single(DriveSegment::laser(duration, pump)?)
}

/// Counting distribution of a laser readout starting from `state`.
fn readout(
    state: &PhotonResolvedState,
    rates: &RateSet,
    pump: f64,
    grid: &[f64],
) -> Result<CountingDistribution> {
    let horizon = grid.last().copied().unwrap_or(0.0);
    let traj = evolve(state, &laser_only(horizon, pump)?, rates, grid, &EvolveOptions::default())?;
    pes(&traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffMapSpec {
    pub rates: RateSet,
    /// Pump rates, 1/us.
    pub powers: Vec<f64>,
    pub horizon: f64,
    pub points: usize,
    /// Microwave context of the surrounding sequence, recorded only.
    pub rabi: f64,
    pub detuning: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffPeak {
    pub power: f64,
    pub c_max: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffMap {
    /// `C(t)` per power.
    pub curves: ExperimentResult,
    /// Maximum and its time per power.
    pub peaks: ExperimentResult,
}

impl ChernoffMap {
    pub fn peak_list(&self) -> Vec<ChernoffPeak> {
        let c = self.peaks.get("c_max").unwrap_or(&[]);
        let t = self.peaks.get("t_max").unwrap_or(&[]);
        self.peaks
            .x
            .iter()
            .zip(c.iter().zip(t))
            .map(|(&power, (&c_max, &t_max))| ChernoffPeak { power, c_max, t_max })
            .collect()
    }
}

/// Chernoff information between readouts of `|0>` and `|1>` under a laser
/// pulse, at every time of `grid`.
pub fn chernoff_curve(rates: &RateSet, pump: f64, grid: &[f64]) -> Result<(Vec<f64>, Invariants)> {
    let start = |kind| initial_state(kind, 16);
    let d0 = readout(&start(InitialState::Ket0)?, rates, pump, grid)?;
    let d1 = readout(&start(InitialState::Ket1)?, rates, pump, grid)?;
    let c = (0..grid.len())
        .map(|i| chernoff_of(&d0.column_at(i), &d1.column_at(i)).information)
        .collect();
    let inv = Invariants::of_distribution(&d0).merge(Invariants::of_distribution(&d1));
    Ok((c, inv))
}

/// Grid maximum refined by a parabola through its neighbours.
fn refined_peak(t: &[f64], c: &[f64]) -> (f64, f64) {
    let i = c
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > c[best] { i } else { best });
    if i == 0 || i + 1 == c.len() {
        return (t[i], c[i]);
    }
    let (a, b, d) = (c[i - 1], c[i], c[i + 1]);
    let h = t[i + 1] - t[i];
    let curv = a - 2.0 * b + d;
    if curv >= 0.0 {
        return (t[i], b);
    }
    let off = 0.5 * (a - d) / curv;
    (t[i] + off * h, b - 0.25 * (a - d) * off)
}

pub fn chernoff_map(spec: &ChernoffMapSpec) -> Result<ChernoffMap> {
    spec.rates.validate()?;
    if spec.points < 3 || !(spec.horizon > 0.0) {
        return Err(Error::Grid("Chernoff map needs a positive horizon and >= 3 points".into()));
    }
    let grid = uniform_grid(spec.horizon, spec.points);
    let sweep = SweepSpec::new("pump", "MHz", spec.powers.clone())?;
    let curves = sweep.run(|p| chernoff_curve(&spec.rates, p, &grid))?;

    let mut table = ExperimentResult::new("t", "us", grid.clone());
    let mut peaks = ExperimentResult::new("pump", "MHz", spec.powers.clone());
    let (mut c_max, mut t_max) = (Vec::new(), Vec::new());
    for (p, (c, inv)) in spec.powers.iter().zip(curves) {
        let (t, v) = refined_peak(&grid, &c);
        c_max.push(v);
        t_max.push(t);
        table.invariants = table.invariants.merge(inv);
        table.push(&format!("C(pump={p})"), "1", c)?;
    }
    peaks.push("c_max", "1", c_max)?;
    peaks.push("t_max", "us", t_max)?;
    peaks.invariants = table.invariants;
    for r in [&mut table, &mut peaks] {
        r.set_meta("experiment", "chernoff-map");
        r.set_meta("spec", spec);
    }
    Ok(ChernoffMap { curves: table, peaks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiSpec {
    pub rates: RateSet,
    pub rabi: f64,
    pub detuning: f64,
    /// Microwave pulse lengths, us.
    pub taus: Vec<f64>,
    /// Laser polarization before the microwave pulse, us.
    pub polarization: f64,
    pub readout_pump: f64,
    pub readout_duration: f64,
    pub shots: usize,
    pub seed: u64,
}

impl RabiSpec {
    /// Sequence with 2 us initialization and readout pulses.
    pub fn new(rates: RateSet, rabi: f64, detuning: f64, taus: Vec<f64>, pump: f64) -> Self {
        RabiSpec {
            rates,
            rabi,
            detuning,
            taus,
            polarization: 2.0,
            readout_pump: pump,
            readout_duration: 2.0,
            shots: 0,
            seed: 0,
        }
    }
}

/// Mean readout counts after polarization and a microwave pulse of each
/// length, with optional sampled means over `shots` readouts.
pub fn rabi_experiment(spec: &RabiSpec) -> Result<ExperimentResult> {
    spec.rates.validate()?;
    if let Some(t) = spec.taus.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::InvalidParameter(format!("pulse length {t} must be >= 0")));
    }
    let thermal = initial_state(InitialState::Thermal, 16)?;
    let polarized = evolve_to_end(
        &thermal,
        &laser_only(spec.polarization, spec.readout_pump)?,
        &spec.rates,
        &EvolveOptions::default(),
    )?
    .reset_counter();
    let grid = [spec.readout_duration];
    let bright = readout(&polarized, &spec.rates, spec.readout_pump, &grid)?.moment_curve(1)[0];

    let sweep = SweepSpec::new("tau", "us", spec.taus.clone())?;
    let points = sweep.run_indexed(|index, tau| {
        let state = if tau > 0.0 {
            let mw = DriveSchedule::single(DriveSegment::new(tau, 0.0, spec.rabi, spec.detuning)?)?;
            evolve_to_end(&polarized, &mw, &spec.rates, &EvolveOptions::default())?.reset_counter()
        } else {
            polarized.clone()
        };
        let dist = readout(&state, &spec.rates, spec.readout_pump, &grid)?;
        let mean = dist.moment_curve(1)[0];
        let sampled = if spec.shots > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(index as u64);
            let counts = sample_counts_with(&dist, dist.times[0], spec.shots, &mut rng)?;
            let n = counts.len() as f64;
            let m = counts.iter().sum::<usize>() as f64 / n;
            let var = counts.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            Some((m, (var / n).sqrt()))
        } else {
            None
        };
        Ok((mean, sampled, Invariants::of_distribution(&dist)))
    })?;

    let mut res = ExperimentResult::new("tau", "us", spec.taus.clone());
    res.push("mean", "counts", points.iter().map(|p| p.0).collect())?;
    res.push("normalized", "1", points.iter().map(|p| p.0 / bright).collect())?;
    if spec.shots > 0 {
        res.push("sampled_mean", "counts", points.iter().map(|p| p.1.map_or(f64::NAN, |s| s.0)).collect())?;
        res.push("standard_error", "counts", points.iter().map(|p| p.1.map_or(f64::NAN, |s| s.1)).collect())?;
    }
    res.invariants = points
        .iter()
        .fold(Invariants::of_state(&polarized), |acc, p| acc.merge(p.2));
    res.set_meta("experiment", "rabi");
    res.set_meta("spec", spec);
    res.set_meta("bright_level", bright);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationSpec {
    pub rates: RateSet,
    /// Laser powers, uW.
    pub powers: Vec<f64>,
    pub collection_scale: f64,
    /// Background counts per uW.
    pub background_slope: f64,
}

/// Steady fluorescence, background and total against laser power.
pub fn saturation_curve(spec: &SaturationSpec) -> Result<ExperimentResult> {
    spec.rates.validate()?;
    if !(spec.collection_scale >= 0.0) || !(spec.background_slope >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "collection scale {} and background slope {} must be >= 0",
            spec.collection_scale, spec.background_slope
        )));
    }
    let sweep = SweepSpec::new("laser_power", "uW", spec.powers.clone())?;
    let flux = sweep.run(|p| {
        if p < 0.0 {
            return Err(Error::InvalidParameter("laser power must be >= 0".into()));
        }
        steady_flux(&spec.rates, &DriveSegment::laser(1.0, spec.rates.pump_rate(p))?)
    })?;
    let nv: Vec<f64> = flux.iter().map(|f| spec.collection_scale * f).collect();
    let bg: Vec<f64> = spec.powers.iter().map(|p| spec.background_slope * p).collect();
    let total = nv.iter().zip(&bg).map(|(a, b)| a + b).collect();

    let mut res = ExperimentResult::new("laser_power", "uW", spec.powers.clone());
    res.push("pump", "MHz", spec.powers.iter().map(|&p| spec.rates.pump_rate(p)).collect())?;
    res.push("nv", "counts/us", nv)?;
    res.push("background", "counts/us", bg)?;
    res.push("total", "counts/us", total)?;
    res.set_meta("experiment", "saturation");
    res.set_meta("spec", spec);
    Ok(res)
}

/// Microwave axis of a cwODMR sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OdmrAxis {
    /// Detunings from the `|0> <-> |+1>` line, rad/us.
    Detuning(Vec<f64>),
    /// Microwave frequencies in MHz at a bias field in mT.
    Frequency { mhz: Vec<f64>, field_mt: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpec {
    pub rates: RateSet,
    pub axis: OdmrAxis,
    pub rabi: f64,
    pub pump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub result: ExperimentResult,
    pub fit: Option<LorentzianFit>,
    /// `depth / baseline` of the fit; `None` if the fit failed.
    pub contrast: Option<f64>,
    /// `(max - min) / max` of the raw spectrum.
    pub raw_contrast: f64,
}

/// Steady fluorescence under simultaneous laser and microwave drive.
pub fn cwodmr_sweep(spec: &OdmrSpec) -> Result<OdmrSpectrum> {
    spec.rates.validate()?;
    let (x_name, x_unit, x, detunings) = match &spec.axis {
        OdmrAxis::Detuning(d) => ("detuning", "rad/us", d.clone(), d.clone()),
        OdmrAxis::Frequency { mhz, field_mt } => {
            let (plus, _) = resonance_frequencies(*field_mt, &spec.rates)?;
            let d = mhz.iter().map(|nu| 2.0 * PI * nu - plus).collect();
            ("frequency", "MHz", mhz.clone(), d)
        }
    };
    let sweep = SweepSpec::new("detuning", "rad/us", detunings.clone())?;
    let flux = sweep.run(|d| {
        steady_flux(&spec.rates, &DriveSegment::new(1.0, spec.pump, spec.rabi, d)?)
    })?;

    let max = flux.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = flux.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw_contrast = if max > 0.0 { (max - min) / max } else { 0.0 };
    let fit = match lorentzian_fit(&detunings, &flux) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("cwODMR fit unavailable: {e}");
            None
        }
    };

    let mut res = ExperimentResult::new(x_name, x_unit, x);
    if matches!(spec.axis, OdmrAxis::Frequency { .. }) {
        res.push("detuning", "rad/us", detunings.clone())?;
    }
    if let Some(f) = &fit {
        res.push("fit", "counts/us", detunings.iter().map(|&d| f.eval(d)).collect())?;
    }
    res.push("fluorescence", "counts/us", flux)?;
    res.set_meta("experiment", "odmr");
    res.set_meta("spec", spec);
    res.set_meta("fit", fit);
    res.set_meta("contrast", fit.map(|f| f.contrast()));
    res.set_meta("raw_contrast", raw_contrast);
    Ok(OdmrSpectrum {
        result: res,
        fit,
        contrast: fit.map(|f| f.contrast()),
        raw_contrast,
    })
}

/// Fitted cwODMR contrast at each laser power (uW).
pub fn contrast_vs_power(
    rates: &RateSet,
    rabi: f64,
    powers: &[f64],
    detunings: &[f64],
) -> Result<ExperimentResult> {
    let sweep = SweepSpec::new("laser_power", "uW", powers.to_vec())?;
    let spectra = sweep.run(|p| {
        cwodmr_sweep(&OdmrSpec {
            rates: *rates,
            axis: OdmrAxis::Detuning(detunings.to_vec()),
            rabi,
            pump: rates.pump_rate(p),
        })
    })?;
    let mut res = ExperimentResult::new("laser_power", "uW", powers.to_vec());
    res.push("pump", "MHz", powers.iter().map(|&p| rates.pump_rate(p)).collect())?;
    res.push("contrast", "1", spectra.iter().map(|s| s.contrast.unwrap_or(f64::NAN)).collect())?;
    res.push("raw_contrast", "1", spectra.iter().map(|s| s.raw_contrast).collect())?;
    res.push(
        "linewidth",
        "rad/us",
        spectra.iter().map(|s| s.fit.map_or(f64::NAN, |f| f.width)).collect(),
    )?;
    res.set_meta("experiment", "odmr-contrast");
    res.set_meta("rates", rates);
    res.set_meta("rabi", rabi);
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_keeps_order_and_annotates_errors() {
        let s = SweepSpec::new("x", "1", vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.run(|v| Ok(v * 2.0)).unwrap(), vec![6.0, 2.0, 4.0]);
        let err = s
            .run(|v| if v < 2.5 { Err(Error::Fit("boom".into())) } else { Ok(v) })
            .unwrap_err();
        assert!(err.to_string().starts_with("sweep point x = 1:"), "{err}");
        assert_eq!(err.kind(), "fit");
        assert!(SweepSpec::new("x", "1", vec![]).is_err());
        assert!(SweepSpec::new("x", "1", vec![f64::NAN]).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut r = ExperimentResult::new("t", "us", vec![0.0, 0.5]);
        r.push("a", "1", vec![1.0, 0.1]).unwrap();
        assert!(r.push("b", "1", vec![1.0]).is_err());
        assert_eq!(r.to_csv(), "t [us],a [1]\n0e0,1e0\n5e-1,1e-1\n");
    }

    #[test]
    fn no_pump_means_no_information() {
        let (c, _) = chernoff_curve(&RateSet::default(), 0.0, &uniform_grid(1.0, 11)).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn peak_refinement_finds_parabola_vertex() {
        let t: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let c: Vec<f64> = t.iter().map(|x| 2.0 - (x - 0.43f64).powi(2)).collect();
        let (tm, cm) = refined_peak(&t, &c);
        assert!((tm - 0.43).abs() < 1e-12 && (cm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rabi_bright_level_and_half_period_minimum() {
        let omega = 10.0;
        let half = PI / omega;
        let taus = vec![0.0, 0.5 * half, half, 1.5 * half];
        let res = rabi_experiment(&RabiSpec::new(RateSet::default(), omega, 0.0, taus, 20.0)).unwrap();
        let mean = res.get("mean").unwrap();
        let bright = res.metadata["bright_level"].as_f64().unwrap();
        assert!((mean[0] - bright).abs() < 1e-12);
        assert!(mean[2] < mean[1] && mean[2] < mean[3]);
        assert!(res.get("sampled_mean").is_none());
    }

    #[test]
    fn saturation_limits() {
        let spec = SaturationSpec {
            rates: RateSet::default(),
            powers: vec![0.0, 100.0, 1e6],
            collection_scale: 1.0,
            background_slope: 0.0,
        };
        let res = saturation_curve(&spec).unwrap();
        let nv = res.get("nv").unwrap();
        assert!(nv[0].abs() < 1e-12 && res.get("total").unwrap()[0].abs() < 1e-12);
        assert!(nv[1] < nv[2] && nv[2] < spec.rates.gamma0);
        let bad = SaturationSpec {
            collection_scale: -1.0,
            ..spec
        };
        assert_eq!(saturation_curve(&bad).unwrap_err().kind(), "invalid-parameter");
    }

    #[test]
    fn odmr_without_microwave_is_flat() {
        let d: Vec<f64> = (-20..=20).map(|i| i as f64 * 5.0).collect();
        let spec = OdmrSpec {
            rates: RateSet::default(),
            axis: OdmrAxis::Detuning(d),
            rabi: 0.0,
            pump: 20.0,
        };
        let s = cwodmr_sweep(&spec).unwrap();
        assert!(s.raw_contrast < 1e-12);
        assert!(s.contrast.unwrap().abs() < 1e-9);
    }

    #[test]
    fn odmr_frequency_axis_centres_on_upper_line() {
        let rates = RateSet::default();
        let b = 5.0;
        let nu0 = (rates.zfs + rates.gyro * b) / (2.0 * PI);
        let mhz: Vec<f64> = (-30..=30).map(|i| nu0 + i as f64 * 0.5).collect();
        let s = cwodmr_sweep(&OdmrSpec {
            rates,
            axis: OdmrAxis::Frequency { mhz, field_mt: b },
            rabi: 8.0,
            pump: 20.0,
        })
        .unwrap();
        let f = s.fit.unwrap();
        assert!(f.center.abs() < 1e-3, "{f:?}");
        assert!(s.contrast.unwrap() > 0.0);
    }
}
