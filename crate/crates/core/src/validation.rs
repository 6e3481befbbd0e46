//! Independent cross-checks of the photon-resolved hierarchy.
//!
//! The counting-field oracle works on the photon-summed 9x9 Liouvillian in
//! the complex basis `(p0, p1, pm1, rho01, rho10, pe0, pe1, pem1, ps)`,
//! assembled from a transition table rather than from [`crate::model`].
//! Every radiative transition carries the phase `e^{i chi}`; the count
//! distribution is the inverse discrete Fourier transform over `chi`.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{evolve, EvolveOptions};
use crate::model::{initial_state, DriveSchedule, DriveSegment, InitialState, RateSet, StateBlock};
use crate::statistics::pes;

pub const DEFAULT_PHASE_POINTS: usize = 256;
/// Mass allowed in the last reconstructed bin before aliasing is reported.
pub const ALIASING_LIMIT: f64 = 1e-10;
/// Residual required of the direct steady-state solve.
pub const STEADY_RESIDUAL: f64 = 1e-12;

const DIM: usize = 9;
const G0: usize = 0;
const G1: usize = 1;
const GM1: usize = 2;
const C01: usize = 3;
const C10: usize = 4;
const E0: usize = 5;
const E1: usize = 6;
const EM1: usize = 7;
const S: usize = 8;
const POPULATIONS: [usize; 7] = [G0, G1, GM1, E0, E1, EM1, S];

struct Transition {
    from: usize,
    to: usize,
    rate: f64,
    radiative: bool,
}

fn transitions(r: &RateSet, pump: f64) -> Vec<Transition> {
    let t = |from, to, rate, radiative| Transition {
        from,
        to,
        rate,
        radiative,
    };
    vec![
        t(G0, E0, pump, false),
        t(G1, E1, pump, false),
        t(GM1, EM1, pump, false),
        t(E0, G0, r.gamma0, true),
        t(E1, G1, r.gamma0, true),
        t(EM1, GM1, r.gamma0, true),
        t(E0, S, r.gamma_f0, false),
        t(E1, S, r.gamma_f1, false),
        t(EM1, S, r.gamma_f1, false),
        t(S, G0, r.gamma_s0, false),
        t(S, G1, r.gamma_s1, false),
        t(S, GM1, r.gamma_s1, false),
        t(G0, G1, 0.5 * r.gamma1, false),
        t(G1, G0, 0.5 * r.gamma1, false),
        t(G0, GM1, 0.5 * r.gamma1, false),
        t(GM1, G0, 0.5 * r.gamma1, false),
    ]
}

/// Photon-summed Liouvillian with counting field `chi`.
pub fn tilted_generator(rates: &RateSet, drive: &DriveSegment, chi: f64) -> DMatrix<Complex64> {
    let mut l = DMatrix::<Complex64>::zeros(DIM, DIM);
    let phase = Complex64::from_polar(1.0, chi);
    for tr in transitions(rates, drive.pump_rate) {
        l[(tr.from, tr.from)] -= tr.rate;
        let gain = if tr.radiative { phase * tr.rate } else { tr.rate.into() };
        l[(tr.to, tr.from)] += gain;
    }

    let i = Complex64::i();
    let half_rabi = 0.5 * drive.rabi;
    let damp = 0.5 * rates.gamma1 + 0.5 * rates.gamma2 + drive.pump_rate;
    // H = -Delta |0><0| - Omega/2 (|0><1| + |1><0|) in the rotating frame.
    l[(C01, C01)] = -damp + i * drive.detuning;
    l[(C10, C10)] = -damp - i * drive.detuning;
    l[(C01, G0)] -= i * half_rabi;
    l[(C01, G1)] += i * half_rabi;
    l[(C10, G0)] += i * half_rabi;
    l[(C10, G1)] -= i * half_rabi;
    l[(G0, C01)] -= i * half_rabi;
    l[(G0, C10)] += i * half_rabi;
    l[(G1, C01)] += i * half_rabi;
    l[(G1, C10)] -= i * half_rabi;
    l
}

fn to_vector(b: &StateBlock) -> DVector<Complex64> {
    DVector::from_vec(vec![
        b.p0.into(),
        b.p1.into(),
        b.pm1.into(),
        b.coh01,
        b.coh01.conj(),
        b.pe0.into(),
        b.pe1.into(),
        b.pem1.into(),
        b.ps.into(),
    ])
}

fn from_vector(v: &DVector<Complex64>) -> StateBlock {
    StateBlock {
        p0: v[G0].re,
        p1: v[G1].re,
        pm1: v[GM1].re,
        coh01: 0.5 * (v[C01] + v[C10].conj()),
        pe0: v[E0].re,
        pe1: v[E1].re,
        pem1: v[EM1].re,
        ps: v[S].re,
    }
}

fn trace(v: &DVector<Complex64>) -> Complex64 {
    POPULATIONS.iter().map(|&k| v[k]).sum()
}

/// Propagates `v` through the first `t` microseconds of the schedule.
fn propagate(
    v: DVector<Complex64>,
    schedule: &DriveSchedule,
    rates: &RateSet,
    chi: f64,
    t: f64,
) -> DVector<Complex64> {
    let mut v = v;
    let mut elapsed = 0.0;
    for seg in schedule.segments() {
        let dt = seg.duration.min(t - elapsed);
        if dt <= 0.0 {
            break;
        }
        let l = tilted_generator(rates, seg, chi) * Complex64::from(dt);
        v = l.exp() * v;
        elapsed += seg.duration;
    }
    v
}

/// Characteristic function samples and the reconstructed count distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TiltedEvaluation {
    pub chis: Vec<f64>,
    pub g: Vec<Complex64>,
    pub pmf: Vec<f64>,
    /// Largest imaginary part left by the inverse transform.
    pub imag_residue: f64,
}

/// Count distribution at time `t` (relative to the schedule start) from the
/// characteristic function on `m` equally spaced phases.
pub fn counting_field_pmf(
    initial: &StateBlock,
    schedule: &DriveSchedule,
    rates: &RateSet,
    t: f64,
    m: usize,
) -> Result<TiltedEvaluation> {
    rates.validate()?;
    if !m.is_power_of_two() || m < 2 {
        return Err(Error::InvalidParameter(format!(
            "phase points must be a power of two >= 2, got {m}"
        )));
    }
    let total = schedule.total_duration();
    if !(0.0..=total * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::Grid(format!("time {t} outside schedule [0, {total}]")));
    }
    let v0 = to_vector(initial);
    let chis: Vec<f64> = (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
    let g: Vec<Complex64> = chis
        .par_iter()
        .map(|&chi| trace(&propagate(v0.clone(), schedule, rates, chi, t)))
        .collect();

    let mut buf = g.clone();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let imag_residue = buf.iter().map(|z| (z.im * scale).abs()).fold(0.0, f64::max);
    let pmf: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
    let tail = pmf[m - 1].abs();
    if tail > ALIASING_LIMIT {
        return Err(Error::Aliasing {
            mass: tail,
            index: m - 1,
            points: m,
        });
    }
    Ok(TiltedEvaluation {
        chis,
        g,
        pmf,
        imag_residue,
    })
}

/// Photon-summed steady state under a constant drive.
///
/// Solved directly with the trace condition replacing one balance equation;
/// falls back to a long propagation when that system is singular or the
/// residual is too large.
pub fn steady_state(rates: &RateSet, drive: &DriveSegment) -> Result<StateBlock> {
    rates.validate()?;
    drive.validate()?;
    let l = tilted_generator(rates, drive, 0.0);
    let mut a = l.clone();
    let mut rhs = DVector::<Complex64>::zeros(DIM);
    for c in 0..DIM {
        a[(G0, c)] = Complex64::from(0.0);
    }
    for &k in &POPULATIONS {
        a[(G0, k)] = Complex64::from(1.0);
    }
    rhs[G0] = Complex64::from(1.0);

    if let Some(v) = a.lu().solve(&rhs) {
        let residual = (&l * &v).norm();
        if residual < STEADY_RESIDUAL && v.iter().all(|z| z.is_finite()) {
            return Ok(from_vector(&v));
        }
        warn!("steady-state solve residual {residual:e}; falling back to propagation");
    } else {
        warn!("steady-state system singular; falling back to propagation");
    }

    let thermal = initial_state(InitialState::Thermal, 1)?.blocks[0];
    let slowest = [rates.gamma1, rates.gamma2, drive.pump_rate, rates.gamma_s0]
        .into_iter()
        .filter(|&r| r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let horizon = if slowest.is_finite() { 60.0 / slowest } else { 1.0 };
    let v = (l * Complex64::from(horizon)).exp() * to_vector(&thermal);
    Ok(from_vector(&v))
}

/// Steady-state emission rate `gamma0 * (pe0 + pe1 + pem1)` in 1/us.
pub fn steady_flux(rates: &RateSet, drive: &DriveSegment) -> Result<f64> {
    Ok(rates.gamma0 * steady_state(rates, drive)?.excited())
}

/// One randomized parameter set for cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomCase {
    pub rates: RateSet,
    pub drive: DriveSegment,
}

/// Seeded parameter sets: incoherent rates scaled by 0.5-2x, pump in
/// [1, 50] /us, Rabi frequency in [0, 30] and detuning in [-20, 20] rad/us.
pub fn random_cases(seed: u64, count: usize, duration: f64) -> Result<Vec<RandomCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = RateSet::default();
    let mut cases = Vec::with_capacity(count);
    for _ in 0..count {
        let mut f = [0.0; 7];
        for x in &mut f {
            *x = 2f64.powf(rng.random_range(-1.0..=1.0));
        }
        let rates = RateSet {
            gamma0: base.gamma0 * f[0],
            gamma_f0: base.gamma_f0 * f[1],
            gamma_f1: base.gamma_f1 * f[2],
            gamma_s0: base.gamma_s0 * f[3],
            gamma_s1: base.gamma_s1 * f[4],
            gamma1: base.gamma1 * f[5],
            gamma2: base.gamma2 * f[6],
            ..base
        };
        let drive = DriveSegment::new(
            duration,
            rng.random_range(1.0..=50.0),
            rng.random_range(0.0..=30.0),
            rng.random_range(-20.0..=20.0),
        )?;
        cases.push(RandomCase { rates, drive });
    }
    Ok(cases)
}

/// Worst disagreement between the hierarchy and the counting-field oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCheck {
    pub time: f64,
    pub max_abs_diff: f64,
    pub hierarchy_normalization: f64,
    pub oracle_imag_residue: f64,
}

/// Compares both methods for a thermal start at the given times.
pub fn cross_check(case: &RandomCase, times: &[f64], m: usize) -> Result<Vec<CrossCheck>> {
    let horizon = times.iter().cloned().fold(0.0, f64::max);
    let schedule = DriveSchedule::single(DriveSegment { duration: horizon, ..case.drive })?;
    let init = initial_state(InitialState::Thermal, 16)?;
    let traj = evolve(&init, &schedule, &case.rates, times, &EvolveOptions::default())?;
    let dist = pes(&traj)?;
    times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let oracle = counting_field_pmf(&init.blocks[0], &schedule, &case.rates, t, m)?;
            let hier = dist.column_at(i);
            let len = hier.len().max(oracle.pmf.len());
            let at = |v: &[f64], n: usize| v.get(n).copied().unwrap_or(0.0);
            let max_abs_diff = (0..len)
                .map(|n| (at(&hier, n) - at(&oracle.pmf, n)).abs())
                .fold(0.0, f64::max);
            Ok(CrossCheck {
                time: t,
                max_abs_diff,
                hierarchy_normalization: traj[i].normalization_error(),
                oracle_imag_residue: oracle.imag_residue,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::evolve_to_end;

    fn laser(pump: f64, duration: f64) -> DriveSchedule {
        DriveSchedule::single(DriveSegment::laser(duration, pump).unwrap()).unwrap()
    }

    fn ground() -> StateBlock {
        StateBlock {
            p0: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn no_pump_gives_delta_at_zero() {
        let ev = counting_field_pmf(&ground(), &laser(0.0, 1.0), &RateSet::default(), 1.0, 64)
            .unwrap();
        assert!((ev.pmf[0] - 1.0).abs() < 1e-12);
        assert!(ev.pmf[1..].iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn single_jump_decay_matches_exponential() {
        let rates = RateSet {
            gamma_f0: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            ..RateSet::default()
        };
        let init = StateBlock {
            pe0: 1.0,
            ..Default::default()
        };
        for t in [0.005, 0.02, 0.1] {
            let ev = counting_field_pmf(&init, &laser(0.0, 0.1), &rates, t, 32).unwrap();
            let p0 = (-rates.gamma0 * t).exp();
            assert!((ev.pmf[0] - p0).abs() < 1e-12);
            assert!((ev.pmf[1] - (1.0 - p0)).abs() < 1e-12);
        }
    }

    #[test]
    fn characteristic_function_is_bounded_and_normalized() {
        let sched = DriveSchedule::single(DriveSegment::new(2.0, 20.0, 10.0, 3.0).unwrap()).unwrap();
        let init = initial_state(InitialState::Thermal, 1).unwrap().blocks[0];
        let ev = counting_field_pmf(&init, &sched, &RateSet::default(), 2.0, 128).unwrap();
        assert!((ev.g[0] - Complex64::from(1.0)).norm() < 1e-8);
        assert!(ev.g.iter().all(|z| z.norm() <= 1.0 + 1e-10));
        assert!(ev.imag_residue < 1e-8);
    }

    #[test]
    fn thermal_matches_hierarchy_at_700ns() {
        let case = RandomCase {
            rates: RateSet::default(),
            drive: DriveSegment::laser(0.7, 10.0).unwrap(),
        };
        let res = cross_check(&case, &[0.7], DEFAULT_PHASE_POINTS).unwrap();
        assert!(res[0].max_abs_diff < 1e-6, "{res:?}");
    }

    #[test]
    fn too_few_phase_points_is_aliasing() {
        let init = initial_state(InitialState::Thermal, 1).unwrap().blocks[0];
        let err = counting_field_pmf(&init, &laser(40.0, 3.0), &RateSet::default(), 3.0, 8)
            .unwrap_err();
        assert_eq!(err.kind(), "aliasing");
        let err = counting_field_pmf(&init, &laser(40.0, 3.0), &RateSet::default(), 3.0, 100)
            .unwrap_err();
        assert_eq!(err.kind(), "invalid-parameter");
    }

    #[test]
    fn steady_state_t1_fixed_point() {
        let ss = steady_state(&RateSet::default(), &DriveSegment::laser(1.0, 0.0).unwrap()).unwrap();
        for p in [ss.p0, ss.p1, ss.pm1] {
            assert!((p - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn steady_state_two_level_balance() {
        let rates = RateSet {
            gamma0: 63.0,
            gamma_f0: 0.0,
            gamma_f1: 0.0,
            gamma_s0: 0.0,
            gamma_s1: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            ..RateSet::default()
        };
        let pump = 7.0;
        let ss = steady_state(&rates, &DriveSegment::laser(1.0, pump).unwrap()).unwrap();
        assert!((ss.pe0 / ss.p0 - pump / rates.gamma0).abs() < 1e-10);
    }

    #[test]
    fn steady_state_matches_long_evolution() {
        let rates = RateSet::default();
        let seg = DriveSegment::laser(60.0, 20.0).unwrap();
        let ss = steady_state(&rates, &seg).unwrap();
        let l = tilted_generator(&rates, &seg, 0.0);
        assert!((&l * to_vector(&ss)).norm() < STEADY_RESIDUAL);

        let sched = DriveSchedule::single(DriveSegment::laser(10.0, 20.0).unwrap()).unwrap();
        let mut state = initial_state(InitialState::Thermal, 16).unwrap();
        for _ in 0..6 {
            state = evolve_to_end(&state, &sched, &rates, &EvolveOptions::default())
                .unwrap()
                .reset_counter();
        }
        let long = state.summed();
        let a = ss.to_array();
        let b = long.to_array();
        for k in 0..9 {
            assert!((a[k] - b[k]).abs() < 1e-6, "component {k}: {} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn random_cases_are_seeded_and_in_range() {
        let a = random_cases(7, 5, 1.0).unwrap();
        let b = random_cases(7, 5, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.rates, y.rates);
            assert_eq!(x.drive, y.drive);
            assert!((1.0..=50.0).contains(&x.drive.pump_rate));
            assert!((0.0..=30.0).contains(&x.drive.rabi));
            assert!((-20.0..=20.0).contains(&x.drive.detuning));
            assert!(x.rates.gamma0 >= 31.5 && x.rates.gamma0 <= 126.0);
        }
    }
}
