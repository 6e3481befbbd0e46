//! Least-squares fit of a Lorentzian dip on a constant baseline.
//!
//! Baseline and depth enter linearly and are eliminated for every trial
//! (center, width); only those two are searched, first on a coarse grid and
//! then with Nelder-Mead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_POINTS: usize = 5;
const GRID_CENTERS: usize = 101;
const GRID_WIDTHS: usize = 48;
const MAX_ITER: usize = 4000;

/// `y = baseline - depth * width^2 / ((x - center)^2 + width^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub center: f64,
    /// Half width at half minimum.
    pub width: f64,
    pub depth: f64,
    pub baseline: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        let w2 = self.width * self.width;
        self.baseline - self.depth * w2 / ((x - self.center).powi(2) + w2)
    }

    /// Relative dip depth `depth / baseline`.
    pub fn contrast(&self) -> f64 {
        if self.baseline > 0.0 {
            self.depth / self.baseline
        } else {
            0.0
        }
    }
}

/// Baseline, depth and residual sum of squares for a fixed line shape.
fn project(x: &[f64], y: &[f64], center: f64, width: f64) -> (f64, f64, f64) {
    let w2 = width * width;
    let shape: Vec<f64> = x.iter().map(|&xi| w2 / ((xi - center).powi(2) + w2)).collect();
    let n = x.len() as f64;
    let (ss, s2, sy, ssy) = shape.iter().zip(y).fold((0.0, 0.0, 0.0, 0.0), |a, (&s, &yi)| {
        (a.0 + s, a.1 + s * s, a.2 + yi, a.3 + s * yi)
    });
    let det = n * s2 - ss * ss;
    let (baseline, depth) = if det > 1e-12 * n * s2.max(f64::MIN_POSITIVE) {
        // y = b - d s
        ((s2 * sy - ss * ssy) / det, (ss * sy - n * ssy) / det)
    } else {
        (sy / n, 0.0)
    };
    let rss = shape
        .iter()
        .zip(y)
        .map(|(&s, &yi)| (yi - baseline + depth * s).powi(2))
        .sum();
    (baseline, depth, rss)
}

pub fn lorentzian_fit(x: &[f64], y: &[f64]) -> Result<LorentzianFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} x values, {} y values", x.len(), y.len())));
    }
    if x.len() < MIN_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_POINTS} points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Fit("x values do not span an interval".into()));
    }

    let objective = |p: [f64; 2]| project(x, y, p[0], p[1].exp()).2;

    let w_min = span / (4.0 * x.len() as f64);
    let mut best = ([lo, w_min.ln()], f64::INFINITY);
    for i in 0..GRID_CENTERS {
        let c = lo + span * i as f64 / (GRID_CENTERS - 1) as f64;
        for j in 0..GRID_WIDTHS {
            let lw = w_min.ln() + (span / w_min).ln() * j as f64 / (GRID_WIDTHS - 1) as f64;
            let f = objective([c, lw]);
            if f < best.1 {
                best = ([c, lw], f);
            }
        }
    }
    let step = [span / (GRID_CENTERS - 1) as f64, 0.1];
    let p = nelder_mead(objective, best.0, step);
    let width = p[1].exp();
    let (baseline, depth, rss) = project(x, y, p[0], width);
    if ![p[0], width, baseline, depth, rss].iter().all(|v| v.is_finite()) {
        return Err(Error::Fit("refinement diverged".into()));
    }
    Ok(LorentzianFit {
        center: p[0],
        width,
        depth,
        baseline,
        residual: (rss / x.len() as f64).sqrt(),
    })
}

fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2]) -> [f64; 2] {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut values = simplex.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];

    for _ in 0..MAX_ITER {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let size = (0..2)
            .map(|k| {
                let a = (simplex[1][k] - simplex[0][k]).abs();
                let b = (simplex[2][k] - simplex[0][k]).abs();
                a.max(b) / (1.0 + simplex[0][k].abs())
            })
            .fold(0.0, f64::max);
        if size < 1e-13 {
            break;
        }

        let centroid = lerp(simplex[0], simplex[1], 0.5);
        let reflected = lerp(centroid, simplex[2], -1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = lerp(centroid, simplex[2], -2.0);
            let fe = f(expanded);
            (simplex[2], values[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted = if fr < values[2] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, simplex[2], 0.5)
            };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(simplex[0], simplex[k], 0.5);
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    simplex[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth() -> LorentzianFit {
        LorentzianFit {
            center: 3.7,
            width: 6.5,
            depth: 0.15,
            baseline: 1.2,
            residual: 0.0,
        }
    }

    fn axis() -> Vec<f64> {
        (0..121).map(|i| -60.0 + i as f64).collect()
    }

    #[test]
    fn recovers_exact_lorentzian() {
        let t = truth();
        let x = axis();
        let y: Vec<f64> = x.iter().map(|&v| t.eval(v)).collect();
        let fit = lorentzian_fit(&x, &y).unwrap();
        assert!((fit.center - t.center).abs() < 1e-6, "{fit:?}");
        assert!((fit.width - t.width).abs() < 1e-6);
        assert!((fit.depth - t.depth).abs() < 1e-6);
        assert!((fit.baseline - t.baseline).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn flat_data_has_no_dip() {
        let x = axis();
        let fit = lorentzian_fit(&x, &vec![2.0; x.len()]).unwrap();
        assert!(fit.depth.abs() < 1e-12);
        assert!((fit.baseline - 2.0).abs() < 1e-12);
        assert_eq!(fit.contrast(), 0.0);
    }

    #[test]
    fn noisy_center_within_tenth_of_width() {
        let t = truth();
        let x = axis();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let y: Vec<f64> = x
                .iter()
                .map(|&v| t.eval(v) + 0.01 * t.baseline * rng.random_range(-1.0..1.0))
                .collect();
            let fit = lorentzian_fit(&x, &y).unwrap();
            assert!((fit.center - t.center).abs() < t.width / 10.0, "{fit:?}");
        }
    }

    #[test]
    fn too_few_points_is_a_fit_error() {
        let err = lorentzian_fit(&[0.0, 1.0, 2.0], &[1.0, 0.5, 1.0]).unwrap_err();
        assert_eq!(err.kind(), "fit");
    }
}
