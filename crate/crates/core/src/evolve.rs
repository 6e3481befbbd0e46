//! Time evolution of the photon-resolved hierarchy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Dopri5, OdeSystem, Tolerance};
use crate::model::{DriveSchedule, Generator, PhotonResolvedState, RateSet, BLOCK_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub tol: Tolerance,
    /// Trace allowed in the top block before the cutoff is doubled.
    pub tail_tol: f64,
    /// Hard limit on `n_max`.
    pub n_max_cap: usize,
    /// When false the cutoff stays fixed and all flux past it is leakage.
    pub auto_extend: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            tol: Tolerance::default(),
            tail_tol: 1e-10,
            n_max_cap: 4096,
            auto_extend: true,
        }
    }
}

/// Starting cutoff for a run of length `horizon`: `max(16, ceil(3 Gamma0 T))`.
pub fn suggested_cutoff(rates: &RateSet, horizon: f64) -> usize {
    let guess = (3.0 * rates.gamma0 * horizon).ceil();
    if guess.is_finite() && guess > 16.0 {
        guess as usize
    } else {
        16
    }
}

struct Hierarchy(Generator);

impl OdeSystem for Hierarchy {
    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        self.0.apply(y, dy);
    }
}

fn top_block_trace(y: &[f64]) -> f64 {
    let n_blocks = (y.len() - 1) / BLOCK_WIDTH;
    let b = &y[(n_blocks - 1) * BLOCK_WIDTH..n_blocks * BLOCK_WIDTH];
    // populations only; the coherence slots are 3 and 4
    b[0] + b[1] + b[2] + b[5] + b[6] + b[7] + b[8]
}

fn grow(y: &[f64], new_blocks: usize) -> Vec<f64> {
    let old_blocks = (y.len() - 1) / BLOCK_WIDTH;
    let mut out = Vec::with_capacity(new_blocks * BLOCK_WIDTH + 1);
    out.extend_from_slice(&y[..old_blocks * BLOCK_WIDTH]);
    out.resize(new_blocks * BLOCK_WIDTH, 0.0);
    out.push(y[y.len() - 1]);
    out
}

/// Integrates the hierarchy under `schedule` and samples it on `grid`.
///
/// Grid times are measured from the start of the schedule and must lie in
/// `[0, total duration]`; returned states carry `initial.time + t`. Segment
/// boundaries restart the integrator. Output states may have different
/// cutoffs if the cutoff grew during the run.
pub fn evolve(
    initial: &PhotonResolvedState,
    schedule: &DriveSchedule,
    rates: &RateSet,
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<Vec<PhotonResolvedState>> {
    rates.validate()?;
    opts.tol.validate()?;
    if initial.blocks.len() < 2 {
        return Err(Error::InvalidState("state needs n_max >= 1".into()));
    }
    let total = schedule.total_duration();
    let slack = 1e-12 * total.max(1.0);
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("output grid must be strictly increasing".into()));
    }
    if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
        if first < -slack || last > total + slack {
            return Err(Error::Grid(format!(
                "output grid [{first}, {last}] leaves the schedule span [0, {total}]"
            )));
        }
    }

    let t_origin = initial.time;
    let mut out = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= 0.0 {
        let mut s = initial.clone();
        s.time = t_origin + grid[gi];
        out.push(s);
        gi += 1;
    }

    let mut y = initial.to_flat();
    let mut seg_start = 0.0;
    let mut h_hint = None;
    let n_segments = schedule.segments().len();
    for (si, seg) in schedule.segments().iter().enumerate() {
        let seg_end = if si + 1 == n_segments {
            total
        } else {
            seg_start + seg.duration
        };
        let generator = Generator::new(rates, seg);
        'restart: loop {
            let sys = Hierarchy(generator);
            let mut stepper = Dopri5::new(&sys, seg_start, y, opts.tol, h_hint);
            while stepper.t() < seg_end {
                let step = stepper.try_step(seg_end)?;
                if opts.auto_extend && top_block_trace(step.end_state()) > opts.tail_tol {
                    let n_blocks = (stepper.y().len() - 1) / BLOCK_WIDTH;
                    let new_blocks = 2 * n_blocks;
                    if new_blocks - 1 > opts.n_max_cap {
                        return Err(Error::CutoffOverflow {
                            cap: opts.n_max_cap,
                            time: t_origin + stepper.t(),
                        });
                    }
                    log::debug!(
                        "cutoff {} -> {} at t = {}",
                        n_blocks - 1,
                        new_blocks - 1,
                        stepper.t()
                    );
                    seg_start = stepper.t();
                    h_hint = Some(stepper.h());
                    y = grow(stepper.y(), new_blocks);
                    continue 'restart;
                }
                while gi < grid.len() && grid[gi] <= step.t1() + slack {
                    let t = grid[gi].min(step.t1());
                    out.push(PhotonResolvedState::from_flat(
                        &step.interpolate(t),
                        t_origin + grid[gi],
                    ));
                    gi += 1;
                }
                stepper.accept(step);
            }
            h_hint = Some(stepper.h());
            y = stepper.into_state();
            break;
        }
        seg_start = seg_end;
    }
    // grid points inside the final rounding sliver
    while gi < grid.len() {
        out.push(PhotonResolvedState::from_flat(&y, t_origin + grid[gi]));
        gi += 1;
    }
    Ok(out)
}

/// State at the end of `schedule`, without intermediate output.
pub fn evolve_to_end(
    initial: &PhotonResolvedState,
    schedule: &DriveSchedule,
    rates: &RateSet,
    opts: &EvolveOptions,
) -> Result<PhotonResolvedState> {
    let total = schedule.total_duration();
    let mut states = evolve(initial, schedule, rates, &[total], opts)?;
    Ok(states.pop().expect("one grid point"))
}

/// `points` equally spaced times from 0 to `horizon` inclusive.
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![horizon],
        _ => (0..points)
            .map(|i| horizon * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
