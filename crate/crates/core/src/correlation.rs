//! Photon delay statistics: waiting-time densities, the renewal equation,
//! g2 and the Mandel Q parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveOptions};
use crate::model::{DriveSchedule, DriveSegment, PhotonResolvedState, RateSet, StateBlock, NUMERICAL_SLACK};
use crate::statistics::CountingDistribution;
use crate::validation::steady_state;

/// Mean count below which Q is left undefined.
pub const Q_FLOOR: f64 = 1e-9;
/// Allowed relative drift of D across the plateau window.
pub const PLATEAU_DRIFT: f64 = 1e-3;
/// Fraction of the horizon averaged for the plateau.
pub const PLATEAU_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayDensity {
    pub taus: Vec<f64>,
    pub d1: Vec<f64>,
}

/// Density of the waiting time to the first emission after `reset`,
/// sampled on `steps + 1` uniform points of `[0, horizon]`.
pub fn delay_density(
    rates: &RateSet,
    drive: &DriveSegment,
    reset: &StateBlock,
    horizon: f64,
    steps: usize,
) -> Result<DelayDensity> {
    if reset.excited() > NUMERICAL_SLACK {
        return Err(Error::InvalidReset(format!(
            "excited population {:e} after an emission",
            reset.excited()
        )));
    }
    if (reset.trace() - 1.0).abs() > 1e-10 || !reset.is_physical() {
        return Err(Error::InvalidReset(format!(
            "reset must be a normalized physical state (trace {})",
            reset.trace()
        )));
    }
    first_emission_density(rates, drive, reset, horizon, steps)
}

/// [`delay_density`] without the post-emission check on the start state.
pub fn first_emission_density(
    rates: &RateSet,
    drive: &DriveSegment,
    start: &StateBlock,
    horizon: f64,
    steps: usize,
) -> Result<DelayDensity> {
    rates.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) || steps < 2 {
        return Err(Error::Grid(format!(
            "need a positive horizon and at least 2 steps (got {horizon}, {steps})"
        )));
    }
    let h = horizon / steps as f64;
    let taus: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let schedule = DriveSchedule::single(DriveSegment {
        duration: horizon,
        ..*drive
    })?;
    let init = PhotonResolvedState {
        blocks: vec![*start, StateBlock::default()],
        time: 0.0,
        leakage: 0.0,
    };
    let opts = EvolveOptions {
        auto_extend: false,
        ..Default::default()
    };
    let traj = evolve(&init, &schedule, rates, &taus, &opts)?;
    let d1 = traj
        .iter()
        .map(|s| rates.gamma0 * s.blocks[0].excited())
        .collect();
    Ok(DelayDensity { taus, d1 })
}

/// Solves `D(t) = D1(t) + int_0^t D(s) D1(t - s) ds` by trapezoidal marching.
pub fn renewal_solve(taus: &[f64], d1: &[f64]) -> Result<Vec<f64>> {
    if taus.len() != d1.len() {
        return Err(Error::Shape(format!(
            "{} grid points but {} density values",
            taus.len(),
            d1.len()
        )));
    }
    if taus.len() < 2 {
        return Err(Error::Grid("need at least two grid points".into()));
    }
    let h = taus[1] - taus[0];
    let span = taus[taus.len() - 1] - taus[0];
    if !(h > 0.0) || taus.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * span) {
        return Err(Error::Grid("renewal equation needs a uniform grid".into()));
    }
    let n = d1.len();
    let mut d = vec![0.0; n];
    d[0] = d1[0];
    let diag = 1.0 - 0.5 * h * d1[0];
    for k in 1..n {
        let inner: f64 = (1..k).map(|j| d[j] * d1[k - j]).sum();
        d[k] = (d1[k] + h * (0.5 * d[0] * d1[k] + inner)) / diag;
    }
    Ok(d)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayCurve {
    pub taus: Vec<f64>,
    pub d1: Vec<f64>,
    pub d: Vec<f64>,
    pub g2: Vec<f64>,
    /// Long-delay limit of `d`, the steady emission rate.
    pub plateau: f64,
}

impl DelayCurve {
    /// First delay at which g2 reaches 1/2, linearly interpolated.
    pub fn dip_width(&self) -> Option<f64> {
        crossing(&self.taus, &self.g2, 0.5)
    }

    /// Largest g2 value, above one when the curve bunches.
    pub fn peak(&self) -> (f64, f64) {
        self.taus
            .iter()
            .zip(&self.g2)
            .fold((0.0, f64::NEG_INFINITY), |acc, (&t, &g)| if g > acc.1 { (t, g) } else { acc })
    }
}

fn crossing(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    (1..y.len()).find_map(|i| {
        let (a, b) = (y[i - 1] - level, y[i] - level);
        (a < 0.0 && b >= 0.0).then(|| x[i - 1] + (x[i] - x[i - 1]) * (-a) / (b - a))
    })
}

/// Post-emission state for a stationary emitter: the steady state after a
/// radiative jump, renormalized.
pub fn post_emission_state(rates: &RateSet, drive: &DriveSegment) -> Result<StateBlock> {
    let ss = steady_state(rates, drive)?;
    let excited = ss.excited();
    if !(excited > 0.0) {
        return Err(Error::InvalidParameter(
            "drive produces no emission; g2 is undefined".into(),
        ));
    }
    Ok(StateBlock {
        p0: ss.pe0 / excited,
        p1: ss.pe1 / excited,
        pm1: ss.pem1 / excited,
        ..Default::default()
    })
}

/// Normalized second-order correlation under a constant drive.
pub fn g2(rates: &RateSet, drive: &DriveSegment, horizon: f64, steps: usize) -> Result<DelayCurve> {
    let reset = post_emission_state(rates, drive)?;
    let DelayDensity { taus, d1 } = delay_density(rates, drive, &reset, horizon, steps)?;
    let d = renewal_solve(&taus, &d1)?;

    let start = ((1.0 - PLATEAU_FRACTION) * steps as f64).floor() as usize;
    let (slope, mean) = linear_fit(&taus[start..], &d[start..]);
    let window = taus[taus.len() - 1] - taus[start];
    let drift = (slope * window / mean).abs();
    if !(mean > 0.0) || !(drift < PLATEAU_DRIFT) {
        return Err(Error::Horizon {
            horizon,
            drift,
            suggested: 2.0 * horizon,
        });
    }
    let g2 = d.iter().map(|v| v / mean).collect();
    Ok(DelayCurve {
        taus,
        d1,
        d,
        g2,
        plateau: mean,
    })
}

/// Least-squares slope and mean of `y` against `x`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (if sxx > 0.0 { sxy / sxx } else { 0.0 }, my)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MandelCurve {
    pub times: Vec<f64>,
    pub q: Vec<Option<f64>>,
    pub t_min: f64,
    pub q_min: f64,
    /// First upward zero crossing after `t_min`.
    pub t_zero: Option<f64>,
}

/// `Q(t) = Var(n) / <n> - 1` on the distribution's time grid.
pub fn mandel_q(dist: &CountingDistribution) -> Result<MandelCurve> {
    let m1 = dist.moment_curve(1);
    let m2 = dist.moment_curve(2);
    let q: Vec<Option<f64>> = m1
        .iter()
        .zip(&m2)
        .map(|(&a, &b)| (a > Q_FLOOR).then(|| (b - a * a) / a - 1.0))
        .collect();
    let (imin, q_min) = q
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |acc: Option<(usize, f64)>, (i, v)| match acc {
            Some((_, best)) if best <= v => acc,
            _ => Some((i, v)),
        })
        .ok_or(Error::EmptyCurve)?;

    let t_zero = (imin + 1..q.len()).find_map(|i| match (q[i - 1], q[i]) {
        (Some(a), Some(b)) if a < 0.0 && b >= 0.0 => {
            let (t0, t1) = (dist.times[i - 1], dist.times[i]);
            Some(t0 + (t1 - t0) * (-a) / (b - a))
        }
        _ => None,
    });
    Ok(MandelCurve {
        times: dist.times.clone(),
        q,
        t_min: dist.times[imin],
        q_min,
        t_zero,
    })
}
