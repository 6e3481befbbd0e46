//! Counting statistics and readout figures of merit.
//!
//! Readout convention: `lambda(n) = ln(P0(n) / P1(n))`. The `|0>` state is
//! the bright one, so large counts give `lambda > 0` and are assigned to
//! `|0>`; counts with `lambda <= 0` are assigned to `|1>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhotonResolvedState;

/// Leakage above which moments are reported as tail-biased.
pub const MOMENT_LEAKAGE_WARN: f64 = 1e-6;
/// Leakage above which sampling is refused.
pub const SAMPLING_LEAKAGE_LIMIT: f64 = 1e-3;
/// Bins where both probabilities fall below this are undefined for lambda.
pub const LLR_FLOOR: f64 = 1e-15;
/// Bracket width at which the Chernoff exponent search stops.
pub const CHERNOFF_S_TOL: f64 = 1e-6;

/// `P(n, t)` over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingDistribution {
    pub times: Vec<f64>,
    /// `pmf[i][n]` is `P(n, times[i])`; all columns have the same length.
    pub pmf: Vec<Vec<f64>>,
    pub leakage: Vec<f64>,
    /// Photon-number-summed excited population at each time, available
    /// when the distribution came from a trajectory.
    pub excited: Option<Vec<f64>>,
}

impl CountingDistribution {
    /// Distribution from explicit columns; shorter columns are zero-padded.
    pub fn from_columns(times: Vec<f64>, mut pmf: Vec<Vec<f64>>, leakage: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != pmf.len() || times.len() != leakage.len() {
            return Err(Error::Shape(format!(
                "{} times, {} columns, {} leakage values",
                times.len(),
                pmf.len(),
                leakage.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("times must be strictly increasing".into()));
        }
        let width = pmf.iter().map(Vec::len).max().unwrap_or(0).max(1);
        for col in &mut pmf {
            col.resize(width, 0.0);
        }
        Ok(CountingDistribution {
            times,
            pmf,
            leakage,
            excited: None,
        })
    }

    /// Single-time distribution, handy for injecting analytic pmfs.
    pub fn at_time(t: f64, pmf: Vec<f64>) -> Self {
        Self::from_columns(vec![t], vec![pmf], vec![0.0]).expect("single column")
    }

    pub fn n_max(&self) -> usize {
        self.pmf[0].len() - 1
    }

    /// Index of `t` on the grid; no interpolation.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times
            .iter()
            .position(|&g| (g - t).abs() <= tol)
            .ok_or_else(|| Error::Grid(format!("t = {t} us is not on the output grid")))
    }

    /// `P(., times[i])` with round-off negatives clamped to zero.
    pub fn column_at(&self, i: usize) -> Vec<f64> {
        self.pmf[i].iter().map(|&p| p.max(0.0)).collect()
    }

    pub fn column(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.column_at(self.index_of(t)?))
    }

    pub fn leakage_at(&self, t: f64) -> Result<f64> {
        Ok(self.leakage[self.index_of(t)?])
    }

    /// Largest `|sum_n P(n, t) + leakage - 1|` over the grid.
    pub fn max_normalization_error(&self) -> f64 {
        self.pmf
            .iter()
            .zip(&self.leakage)
            .map(|(col, leak)| (col.iter().sum::<f64>() + leak - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    /// `<n^m>` at every grid time.
    pub fn moment_curve(&self, m: u32) -> Vec<f64> {
        (0..self.times.len())
            .map(|i| raw_moment(&self.pmf[i], m))
            .collect()
    }

    /// Same distribution with `extra` empty bins appended.
    pub fn padded(&self, extra: usize) -> Self {
        let mut out = self.clone();
        let width = out.pmf[0].len() + extra;
        for col in &mut out.pmf {
            col.resize(width, 0.0);
        }
        out
    }
}

fn raw_moment(col: &[f64], m: u32) -> f64 {
    col.iter()
        .enumerate()
        .map(|(n, &p)| p.max(0.0) * (n as f64).powi(m as i32))
        .sum()
}

/// `P(n, t) = trace(block_n)` along a trajectory.
pub fn pes(traj: &[PhotonResolvedState]) -> Result<CountingDistribution> {
    if traj.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    }
    let times = traj.iter().map(|s| s.time).collect();
    let pmf = traj
        .iter()
        .map(|s| s.blocks.iter().map(|b| b.trace()).collect())
        .collect();
    let leakage = traj.iter().map(|s| s.leakage).collect();
    let mut dist = CountingDistribution::from_columns(times, pmf, leakage)?;
    dist.excited = Some(traj.iter().map(|s| s.summed().excited()).collect());
    Ok(dist)
}

/// `<n^m>(t) = sum_n n^m P(n, t)`.
pub fn moments(dist: &CountingDistribution, m: u32, t: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidParameter("moment order must be >= 1".into()));
    }
    let i = dist.index_of(t)?;
    if dist.leakage[i] > MOMENT_LEAKAGE_WARN {
        log::warn!(
            "moment of order {m} at t = {t} us is tail-biased: leakage {:e}",
            dist.leakage[i]
        );
    }
    Ok(raw_moment(&dist.pmf[i], m))
}

/// Photon emission rate, counts/us.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intensity {
    pub times: Vec<f64>,
    /// `d<n>/dt` by second-order finite differences of the mean.
    pub finite_difference: Vec<f64>,
    /// `Gamma0 * (pe0 + pe1 + pem1)` summed over photon number, when the
    /// excited populations are known.
    pub flux: Option<Vec<f64>>,
}

/// Second-order finite differences on a possibly non-uniform grid.
pub fn derivative_on_grid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let h1 = t[i] - t[i - 1];
        let h2 = t[i + 1] - t[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * f[i - 1]
            + (h2 - h1) / (h1 * h2) * f[i]
            + h1 / (h2 * (h1 + h2)) * f[i + 1];
    }
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1]
        - h1 / (h2 * (h1 + h2)) * f[2];
    let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
    d[n - 1] = (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1] - (h1 + h2) / (h1 * h2) * f[n - 2]
        + h2 / (h1 * (h1 + h2)) * f[n - 3];
    d
}

pub fn intensity(dist: &CountingDistribution, gamma0: f64) -> Result<Intensity> {
    if dist.times.len() < 3 {
        return Err(Error::Grid("intensity needs at least 3 grid points".into()));
    }
    let mean = dist.moment_curve(1);
    Ok(Intensity {
        times: dist.times.clone(),
        finite_difference: derivative_on_grid(&dist.times, &mean),
        flux: dist
            .excited
            .as_ref()
            .map(|e| e.iter().map(|&x| gamma0 * x).collect()),
    })
}

fn paired_columns(
    dist0: &CountingDistribution,
    dist1: &CountingDistribution,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if dist0.times.len() != dist1.times.len()
        || dist0
            .times
            .iter()
            .zip(&dist1.times)
            .any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::Shape("distributions live on different time grids".into()));
    }
    let mut p0 = dist0.column(t)?;
    let mut p1 = dist1.column(t)?;
    // differing cutoffs are legitimate; the shorter one is zero beyond its end
    let width = p0.len().max(p1.len());
    p0.resize(width, 0.0);
    p1.resize(width, 0.0);
    Ok((p0, p1))
}

/// `lambda(n) = ln(P0 / P1)`; `None` where both are below [`LLR_FLOOR`],
/// `+inf` / `-inf` where only one side vanishes.
pub fn log_likelihood_ratio(
    dist0: &CountingDistribution,
    dist1: &CountingDistribution,
    t: f64,
) -> Result<Vec<Option<f64>>> {
    let (p0, p1) = paired_columns(dist0, dist1, t)?;
    Ok(llr(&p0, &p1))
}

fn llr(p0: &[f64], p1: &[f64]) -> Vec<Option<f64>> {
    p0.iter()
        .zip(p1)
        .map(|(&a, &b)| match (a < LLR_FLOOR, b < LLR_FLOOR) {
            (true, true) => None,
            (false, true) => Some(f64::INFINITY),
            (true, false) => Some(f64::NEG_INFINITY),
            (false, false) => Some((a / b).ln()),
        })
        .collect()
}

/// Single-repetition discrimination errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub lambda: Vec<Option<f64>>,
    /// Largest `n` with `lambda(n) <= 0`; counts up to it are assigned `|1>`.
    pub n_crossing: Option<usize>,
    /// `sum_{n <= n_c} P0(n)`: a bright preparation read as dark.
    pub eps0: f64,
    /// `sum_{n > n_c} P1(n)`.
    pub eps1: f64,
    pub eps_mean: f64,
    /// Per-bin Bayes rule, `1/2 sum_n min(P0, P1)`; never above `eps_mean`.
    pub eps_bayes: f64,
}

pub fn error_rates(
    dist0: &CountingDistribution,
    dist1: &CountingDistribution,
    t: f64,
) -> Result<ErrorRates> {
    let (p0, p1) = paired_columns(dist0, dist1, t)?;
    Ok(threshold_errors(&p0, &p1))
}

fn threshold_errors(p0: &[f64], p1: &[f64]) -> ErrorRates {
    let lambda = llr(p0, p1);
    let n_crossing = lambda
        .iter()
        .rposition(|l| matches!(l, Some(v) if *v <= 0.0));
    let (eps0, eps1) = match n_crossing {
        Some(nc) => (p0[..=nc].iter().sum(), p1[nc + 1..].iter().sum()),
        None => (0.0, p1.iter().sum()),
    };
    let eps_bayes = 0.5 * p0.iter().zip(p1).map(|(a, b)| a.min(*b)).sum::<f64>();
    ErrorRates {
        lambda,
        n_crossing,
        eps0,
        eps1,
        eps_mean: 0.5 * (eps0 + eps1),
        eps_bayes,
    }
}

/// Chernoff information and the minimizing exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chernoff {
    /// `+inf` when the supports do not overlap.
    pub information: f64,
    pub s_star: f64,
}

/// `C = -min_{s in [0,1]} ln sum_n P0^s P1^(1-s)` over the common support.
pub fn chernoff(
    dist0: &CountingDistribution,
    dist1: &CountingDistribution,
    t: f64,
) -> Result<Chernoff> {
    let (p0, p1) = paired_columns(dist0, dist1, t)?;
    Ok(chernoff_of(&p0, &p1))
}

pub fn chernoff_of(p0: &[f64], p1: &[f64]) -> Chernoff {
    let logs: Vec<(f64, f64)> = p0
        .iter()
        .zip(p1)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if logs.is_empty() {
        return Chernoff {
            information: f64::INFINITY,
            s_star: 0.5,
        };
    }
    // log-sum-exp of s ln a + (1 - s) ln b, convex in s
    let objective = |s: f64| {
        let top = logs
            .iter()
            .map(|(la, lb)| s * la + (1.0 - s) * lb)
            .fold(f64::NEG_INFINITY, f64::max);
        top + logs
            .iter()
            .map(|(la, lb)| (s * la + (1.0 - s) * lb - top).exp())
            .sum::<f64>()
            .ln()
    };
    let s_star = golden_section_min(objective, 0.0, 1.0, CHERNOFF_S_TOL);
    Chernoff {
        information: (-objective(s_star)).max(0.0),
        s_star,
    }
}

/// Minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Everything needed to judge a readout window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutReport {
    pub errors: ErrorRates,
    pub chernoff: f64,
    pub s_star: f64,
}

pub fn readout_report(
    dist0: &CountingDistribution,
    dist1: &CountingDistribution,
    t: f64,
) -> Result<ReadoutReport> {
    let (p0, p1) = paired_columns(dist0, dist1, t)?;
    let c = chernoff_of(&p0, &p1);
    Ok(ReadoutReport {
        errors: threshold_errors(&p0, &p1),
        chernoff: c.information,
        s_star: c.s_star,
    })
}

/// Draws `shots` photon counts from `P(., t)` by inverse-CDF sampling.
pub fn sample_counts(
    dist: &CountingDistribution,
    t: f64,
    shots: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with(dist, t, shots, &mut rng)
}

pub fn sample_counts_with<R: Rng + ?Sized>(
    dist: &CountingDistribution,
    t: f64,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be >= 1".into()));
    }
    let i = dist.index_of(t)?;
    if dist.leakage[i] > SAMPLING_LEAKAGE_LIMIT {
        return Err(Error::Truncated {
            time: t,
            leakage: dist.leakage[i],
            limit: SAMPLING_LEAKAGE_LIMIT,
        });
    }
    let sampler = InverseCdf::new(&dist.column_at(i))?;
    Ok((0..shots).map(|_| sampler.draw(rng)).collect())
}

/// Inverse-CDF sampler over a finite pmf (renormalized).
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cumulative: Vec<f64>,
    last: usize,
}

impl InverseCdf {
    pub fn new(pmf: &[f64]) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = pmf
            .iter()
            .map(|&p| {
                acc += p.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::InvalidParameter("pmf has no mass".into()));
        }
        let last = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Ok(InverseCdf { cumulative, last })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.last)
    }
}
