use nvpes::correlation::{g2, mandel_q};
use nvpes::evolve::{evolve, uniform_grid, EvolveOptions};
use nvpes::experiments::{cwodmr_sweep, saturation_curve, OdmrAxis, OdmrSpec, SaturationSpec};
use nvpes::model::derivative;
use nvpes::statistics::{chernoff_of, pes};
use nvpes::validation::steady_flux;
use nvpes::{initial_state, DriveSchedule, DriveSegment, InitialState, RateSet, StateBlock};
use num_complex::Complex64;
use proptest::prelude::*;

fn rates() -> impl Strategy<Value = RateSet> {
    (0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0, 0.5f64..2.0, 0.1f64..10.0).prop_map(
        |(a, b, c, d, e, f)| {
            let r = RateSet::default();
            RateSet {
                gamma0: r.gamma0 * a,
                gamma_f0: r.gamma_f0 * b,
                gamma_f1: r.gamma_f1 * c,
                gamma_s0: r.gamma_s0 * d,
                gamma_s1: r.gamma_s1 * e,
                gamma2: r.gamma2 * f,
                ..r
            }
        },
    )
}

fn drive(duration: f64) -> impl Strategy<Value = DriveSegment> {
    (0.0f64..50.0, 0.0f64..30.0, -20.0f64..20.0)
        .prop_map(move |(p, o, d)| DriveSegment::new(duration, p, o, d).unwrap())
}

fn block() -> impl Strategy<Value = StateBlock> {
    (prop::array::uniform7(0.0f64..1.0), -1.0f64..1.0, -1.0f64..1.0).prop_map(|(p, re, im)| {
        let c = (p[0] * p[1]).sqrt();
        StateBlock {
            p0: p[0],
            p1: p[1],
            pm1: p[2],
            coh01: Complex64::new(re * c * 0.7, im * c * 0.7),
            pe0: p[3],
            pe1: p[4],
            pem1: p[5],
            ps: p[6],
        }
    })
}

fn trajectory(r: &RateSet, seg: DriveSegment, points: usize) -> nvpes::CountingDistribution {
    let init = initial_state(InitialState::Thermal, 16).unwrap();
    let sched = DriveSchedule::single(seg).unwrap();
    let grid = uniform_grid(seg.duration, points);
    pes(&evolve(&init, &sched, r, &grid, &EvolveOptions::default()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_conserves_trace(r in rates(), seg in drive(1.0), blocks in prop::collection::vec(block(), 1..6)) {
        let state = nvpes::PhotonResolvedState { blocks, time: 0.0, leakage: 0.0 };
        let d = derivative(&state, &seg, &r);
        let total: f64 = d.blocks.iter().map(StateBlock::trace).sum::<f64>() + d.leakage;
        let scale: f64 = state.blocks.iter().map(StateBlock::trace).sum::<f64>() * 200.0;
        prop_assert!(total.abs() < 1e-12 * scale.max(1.0), "{}", total);
    }

    #[test]
    fn chernoff_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 2..20), b in prop::collection::vec(0.0f64..1.0, 2..20)) {
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s.max(1e-300)).collect::<Vec<_>>() };
        let n = a.len().min(b.len());
        let (p, q) = (norm(&a[..n]), norm(&b[..n]));
        prop_assume!(p.iter().sum::<f64>() > 0.5 && q.iter().sum::<f64>() > 0.5);
        let c1 = chernoff_of(&p, &q);
        let c2 = chernoff_of(&q, &p);
        if c1.information.is_finite() {
            prop_assert!((c1.information - c2.information).abs() < 1e-9);
            prop_assert!(c1.information >= 0.0);
        } else {
            prop_assert!(c2.information.is_infinite());
        }
        prop_assert!(chernoff_of(&p, &p).information.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_stays_physical_and_monotone(r in rates(), seg in drive(1.0)) {
        let dist = trajectory(&r, seg, 41);
        prop_assert!(dist.max_normalization_error() < 1e-8);
        for col in &dist.pmf {
            prop_assert!(col.iter().all(|&p| p >= -1e-10));
        }
        let p0: Vec<f64> = dist.pmf.iter().map(|c| c[0]).collect();
        prop_assert!(p0.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let mean = dist.moment_curve(1);
        prop_assert!(mean.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    }

    #[test]
    fn mandel_q_ignores_empty_tail(r in rates(), seg in drive(0.5), extra in 1usize..50) {
        let dist = trajectory(&r, seg, 21);
        let q = mandel_q(&dist).unwrap();
        let padded = mandel_q(&dist.padded(extra)).unwrap();
        prop_assert_eq!(q.q.len(), padded.q.len());
        for (a, b) in q.q.iter().zip(&padded.q) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12 && *a >= -1.0 - 1e-12),
                (None, None) => {}
                _ => prop_assert!(false, "definedness changed"),
            }
        }
    }

    #[test]
    fn odmr_spectrum_is_even(r in rates(), pump in 1.0f64..50.0, rabi in 0.0f64..30.0, d in 0.0f64..60.0) {
        let axis = vec![-d, -0.5 * d, 0.0, 0.5 * d, d];
        let spec = OdmrSpec { rates: r, axis: OdmrAxis::Detuning(axis), rabi, pump };
        let res = cwodmr_sweep(&spec).unwrap().result;
        let f = res.get("fluorescence").unwrap();
        for i in 0..2 {
            prop_assert!((f[i] - f[4 - i]).abs() < 1e-10 * f[i].abs().max(1.0));
        }
    }
}

#[test]
fn steady_flux_is_the_long_time_count_rate() {
    let r = RateSet::default();
    let seg = DriveSegment::new(12.0, 20.0, 5.0, 2.0).unwrap();
    let flux = steady_flux(&r, &seg).unwrap();
    let dist = trajectory(&r, seg, 121);
    let mean = dist.moment_curve(1);
    let n = mean.len();
    let slope = (mean[n - 1] - mean[n - 11]) / (dist.times[n - 1] - dist.times[n - 11]);
    assert!((slope / flux - 1.0).abs() < 1e-4, "slope {slope} flux {flux}");
}

#[test]
fn saturation_is_increasing_concave_and_bounded() {
    let powers: Vec<f64> = (0..=20).map(|i| i as f64 * 50.0).collect();
    let spec = SaturationSpec {
        rates: RateSet::default(),
        powers,
        collection_scale: 1.0,
        background_slope: 0.02,
    };
    let res = saturation_curve(&spec).unwrap();
    let nv = res.get("nv").unwrap();
    assert!(nv.windows(2).all(|w| w[1] > w[0]));
    assert!(nv.windows(3).all(|w| w[2] - w[1] <= w[1] - w[0] + 1e-12));
    assert!(nv.iter().all(|&v| v < spec.rates.gamma0));
    let total = res.get("total").unwrap();
    for i in 0..nv.len() {
        assert!((total[i] - nv[i] - 0.02 * spec.powers[i]).abs() < 1e-12);
    }
}

#[test]
fn saturation_depends_on_power_only_through_pump() {
    let base = RateSet::default();
    let doubled = RateSet {
        c_laser: 2.0 * base.c_laser,
        ..base
    };
    let run = |rates: RateSet, powers: Vec<f64>| {
        saturation_curve(&SaturationSpec {
            rates,
            powers,
            collection_scale: 1.0,
            background_slope: 0.0,
        })
        .unwrap()
    };
    let a = run(base, vec![0.0, 100.0, 400.0]);
    let b = run(doubled, vec![0.0, 50.0, 200.0]);
    assert_eq!(a.get("pump"), b.get("pump"));
    assert_eq!(a.get("nv"), b.get("nv"));
}

#[test]
fn all_emission_density_dominates_first_emission() {
    let curve = g2(&RateSet::default(), &DriveSegment::laser(1.0, 10.0).unwrap(), 4.0, 8000).unwrap();
    assert!(curve.d.iter().zip(&curve.d1).all(|(d, d1)| d >= d1));
    let h = curve.taus[1];
    let mass: f64 = curve.d1.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
    assert!(mass <= 1.0 + 1e-9);
}
