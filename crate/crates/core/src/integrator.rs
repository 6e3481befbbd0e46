//! Dormand-Prince 5(4) with FSAL and the 4th-order continuous extension.
//!
//! [`Dopri5`] is a stepper: [`Dopri5::try_step`] produces a [`DenseStep`]
//! without committing it, so callers may inspect the proposed end state and
//! either [`Dopri5::accept`] it or rebuild the problem and retry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An autonomous linear or nonlinear system `y' = f(y)`.
pub trait OdeSystem {
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> OdeSystem for F {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        self(y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-8,
            abs: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel > 0.0 && self.abs > 0.0 && self.rel.is_finite() && self.abs.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive, got rel = {}, abs = {}",
                self.rel, self.abs
            )));
        }
        Ok(())
    }
}

// Autonomous systems only, so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 10_000_000;

/// An accepted-candidate step carrying its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep {
    t0: f64,
    h: f64,
    /// Hairer's five interpolation vectors; `cont[0] = y0`.
    cont: [Vec<f64>; 5],
    y1: Vec<f64>,
    f1: Vec<f64>,
    h_next: f64,
}

impl DenseStep {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn end_state(&self) -> &[f64] {
        &self.y1
    }

    /// Dense output at `t` in `[t0, t1]`.
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        if theta == 1.0 {
            out.copy_from_slice(&self.y1);
            return;
        }
        let theta1 = 1.0 - theta;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + theta * (c1[i] + theta1 * (c2[i] + theta * (c3[i] + theta1 * c4[i])));
        }
    }

    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.y1.len()];
        self.interpolate_into(t, &mut out);
        out
    }
}

pub struct Dopri5<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerance,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    steps: usize,
    k: [Vec<f64>; 6],
    scratch: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Dopri5<'a, S> {
    /// `h0` seeds the first step; when absent a starting step is estimated.
    pub fn new(sys: &'a S, t0: f64, y0: Vec<f64>, tol: Tolerance, h0: Option<f64>) -> Self {
        let n = y0.len();
        let mut f = vec![0.0; n];
        sys.rhs(&y0, &mut f);
        let mut s = Dopri5 {
            sys,
            tol,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            steps: 0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            scratch: vec![0.0; n],
        };
        s.h = match h0 {
            Some(h) if h > 0.0 => h,
            _ => s.initial_step(),
        };
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Step size that will be tried next.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn into_state(self) -> Vec<f64> {
        self.y
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.tol.abs + self.tol.rel * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len();
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for i in 0..n {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 = d0.max((self.y[i] / sc).abs());
            d1 = d1.max((self.f[i] / sc).abs());
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        for i in 0..n {
            self.scratch[i] = self.y[i] + h0 * self.f[i];
        }
        let mut f1 = vec![0.0; n];
        self.sys.rhs(&self.scratch, &mut f1);
        let mut d2 = 0.0f64;
        for i in 0..n {
            let sc = self.scale(self.y[i], self.y[i]);
            d2 = d2.max(((f1[i] - self.f[i]) / sc).abs());
        }
        d2 /= h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1)
    }

    /// Attempts steps until one passes the error test, never stepping past
    /// `t_end`. The state is not advanced; call [`Dopri5::accept`].
    pub fn try_step(&mut self, t_end: f64) -> Result<DenseStep> {
        let n = self.y.len();
        let mut rejected = false;
        loop {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(Error::Stiffness {
                    time: self.t,
                    step: self.h,
                });
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(remaining);
            // absorb a sliver rather than leave it for a tiny final step
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 16.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(Error::Stiffness {
                    time: self.t,
                    step: h,
                });
            }

            let y = &self.y;
            let f = &self.f;
            let [k2, k3, k4, k5, k6, k7] = &mut self.k;
            let s = &mut self.scratch;

            for i in 0..n {
                s[i] = y[i] + h * A21 * f[i];
            }
            self.sys.rhs(s, k2);
            for i in 0..n {
                s[i] = y[i] + h * (A31 * f[i] + A32 * k2[i]);
            }
            self.sys.rhs(s, k3);
            for i in 0..n {
                s[i] = y[i] + h * (A41 * f[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.sys.rhs(s, k4);
            for i in 0..n {
                s[i] = y[i] + h * (A51 * f[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.sys.rhs(s, k5);
            for i in 0..n {
                s[i] = y[i]
                    + h * (A61 * f[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.sys.rhs(s, k6);
            let mut y1 = vec![0.0; n];
            for i in 0..n {
                y1[i] = y[i]
                    + h * (A71 * f[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            self.sys.rhs(&y1, k7);

            let mut err = 0.0f64;
            for i in 0..n {
                let e = h
                    * (E1 * f[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.tol.abs + self.tol.rel * y[i].abs().max(y1[i].abs());
                err = err.max((e / sc).abs());
            }

            if err <= 1.0 {
                let mut fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
                };
                if rejected {
                    fac = fac.min(1.0);
                }
                let mut c1 = vec![0.0; n];
                let mut c2 = vec![0.0; n];
                let mut c3 = vec![0.0; n];
                let mut c4 = vec![0.0; n];
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * f[i] - ydiff;
                    c1[i] = ydiff;
                    c2[i] = bspl;
                    c3[i] = ydiff - h * k7[i] - bspl;
                    c4[i] = h
                        * (D1 * f[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                // keep the controller's proposal unless the step was clipped by t_end
                let h_next = if last { self.h.max(h * fac) } else { h * fac };
                return Ok(DenseStep {
                    t0: self.t,
                    h,
                    cont: [y.clone(), c1, c2, c3, c4],
                    y1,
                    f1: k7.clone(),
                    h_next,
                });
            }

            rejected = true;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            self.h = h * fac;
        }
    }

    pub fn accept(&mut self, step: DenseStep) {
        self.t = step.t1();
        self.y = step.y1;
        self.f = step.f1;
        self.h = step.h_next;
    }
}

/// Integrates from `t0` and returns the state at each output time
/// (ascending, all `>= t0`).
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: Vec<f64>,
    outputs: &[f64],
    tol: Tolerance,
) -> Result<Vec<Vec<f64>>> {
    tol.validate()?;
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::Grid("output times must be ascending and >= t0".into()));
    }
    let mut out = Vec::with_capacity(outputs.len());
    let mut idx = 0;
    while idx < outputs.len() && outputs[idx] <= t0 {
        out.push(y0.clone());
        idx += 1;
    }
    let Some(&t_end) = outputs.last() else {
        return Ok(out);
    };
    let mut stepper = Dopri5::new(sys, t0, y0, tol, None);
    while stepper.t() < t_end {
        let step = stepper.try_step(t_end)?;
        while idx < outputs.len() && outputs[idx] <= step.t1() {
            out.push(step.interpolate(outputs[idx]));
            idx += 1;
        }
        stepper.accept(step);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = |y: &[f64], dy: &mut [f64]| dy[0] = -3.0 * y[0];
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let tol = Tolerance {
            rel: 1e-10,
            abs: 1e-12,
        };
        let ys = integrate(&sys, 0.0, vec![1.0], &ts, tol).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - (-3.0 * t).exp()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn dense_output_of_oscillator() {
        // y'' = -w^2 y; dense output between steps should stay near tolerance
        let w = 7.0;
        let sys = move |y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -w * w * y[0];
        };
        let ts: Vec<f64> = (0..=997).map(|i| i as f64 * 0.003).collect();
        let tol = Tolerance {
            rel: 1e-9,
            abs: 1e-11,
        };
        let ys = integrate(&sys, 0.0, vec![1.0, 0.0], &ts, tol).unwrap();
        let worst = ts
            .iter()
            .zip(&ys)
            .map(|(t, y)| (y[0] - (w * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-7, "worst dense error {worst}");
    }

    #[test]
    fn linear_invariant_is_preserved() {
        // probability flow a -> b -> c: a + b + c is conserved by every RK stage
        let sys = |y: &[f64], dy: &mut [f64]| {
            dy[0] = -50.0 * y[0];
            dy[1] = 50.0 * y[0] - 0.3 * y[1];
            dy[2] = 0.3 * y[1];
        };
        let ts = [0.5, 1.0, 5.0];
        let ys = integrate(&sys, 0.0, vec![1.0, 0.0, 0.0], &ts, Tolerance::default()).unwrap();
        for y in ys {
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn step_size_underflow_is_reported() {
        // finite-time blow-up forces the step size to collapse near t = 1
        let sys = |y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0];
        let err = integrate(&sys, 0.0, vec![1.0], &[2.0], Tolerance::default()).unwrap_err();
        match err {
            Error::Stiffness { time, .. } => assert!((time - 1.0).abs() < 1e-3, "{time}"),
            other => panic!("unexpected {other}"),
        }
    }
}
