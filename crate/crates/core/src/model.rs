//! Physical model: rate constants, drive schedules and photon-resolved states.
//!
//! The ground-state coherence between `|0>` and `|1>` is the only coherence
//! carried; coherences involving `|-1>` or the excited manifold are never
//! driven and stay zero.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real numbers stored per photon-number block.
pub const BLOCK_WIDTH: usize = 9;

/// Slack allowed on populations and the coherence bound.
pub const NUMERICAL_SLACK: f64 = 1e-10;

// Flat layout of one block.
pub(crate) const P0: usize = 0;
pub(crate) const P1: usize = 1;
pub(crate) const PM1: usize = 2;
pub(crate) const COH_RE: usize = 3;
pub(crate) const COH_IM: usize = 4;
pub(crate) const PE0: usize = 5;
pub(crate) const PE1: usize = 6;
pub(crate) const PEM1: usize = 7;
pub(crate) const PS: usize = 8;

/// Incoherent rates (1/us) and spin constants of the NV model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    /// Radiative decay of every excited state.
    pub gamma0: f64,
    /// Intersystem crossing `|e0> -> |s>`.
    pub gamma_f0: f64,
    /// Intersystem crossing `|+-e1> -> |s>`.
    pub gamma_f1: f64,
    /// Singlet decay `|s> -> |0>`.
    pub gamma_s0: f64,
    /// Singlet decay `|s> -> |+1>` and, separately, `|s> -> |-1>`.
    pub gamma_s1: f64,
    /// Longitudinal ground relaxation 1/T1.
    pub gamma1: f64,
    /// Transverse ground dephasing 1/T2.
    pub gamma2: f64,
    /// Pump rate per unit laser power, MHz/uW.
    pub c_laser: f64,
    /// Zero-field splitting D, rad/us.
    pub zfs: f64,
    /// Electron gyromagnetic ratio, rad/us per mT.
    pub gyro: f64,
}

impl Default for RateSet {
    fn default() -> Self {
        RateSet {
            gamma0: 63.0,
            gamma_f0: 12.0,
            gamma_f1: 80.0,
            gamma_s0: 3.3,
            gamma_s1: 2.4,
            // T1 = 1 ms, T2 = 2 us
            gamma1: 1e-3,
            gamma2: 0.5,
            c_laser: 0.1,
            zfs: 2.0 * PI * 2.87e3,
            gyro: 2.0 * PI * 28.024,
        }
    }
}

impl RateSet {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma0", self.gamma0),
            ("gamma_f0", self.gamma_f0),
            ("gamma_f1", self.gamma_f1),
            ("gamma_s0", self.gamma_s0),
            ("gamma_s1", self.gamma_s1),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("zfs", self.zfs),
            ("gyro", self.gyro),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if !(self.c_laser.is_finite() && self.c_laser > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c_laser must be positive, got {}",
                self.c_laser
            )));
        }
        Ok(())
    }

    /// Linear excitation model: pump rate for a laser power in uW.
    pub fn pump_rate(&self, laser_power_uw: f64) -> f64 {
        self.c_laser * laser_power_uw
    }
}

/// A constant-drive interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    /// Length in us.
    pub duration: f64,
    /// Laser pump rate Gamma_P in 1/us.
    pub pump_rate: f64,
    /// Microwave Rabi frequency Omega, rad/us.
    pub rabi: f64,
    /// Microwave detuning Delta, rad/us.
    pub detuning: f64,
}

impl DriveSegment {
    pub fn new(duration: f64, pump_rate: f64, rabi: f64, detuning: f64) -> Result<Self> {
        let seg = DriveSegment {
            duration,
            pump_rate,
            rabi,
            detuning,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Laser only, no microwave.
    pub fn laser(duration: f64, pump_rate: f64) -> Result<Self> {
        Self::new(duration, pump_rate, 0.0, 0.0)
    }

    /// Segment specified by laser power (uW) instead of pump rate.
    pub fn from_laser_power(
        duration: f64,
        laser_power_uw: f64,
        rabi: f64,
        detuning: f64,
        rates: &RateSet,
    ) -> Result<Self> {
        Self::new(duration, rates.pump_rate(laser_power_uw), rabi, detuning)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "segment duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.pump_rate.is_finite() && self.pump_rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pump rate must be non-negative, got {}",
                self.pump_rate
            )));
        }
        if !self.rabi.is_finite() || !self.detuning.is_finite() {
            return Err(Error::InvalidParameter(
                "rabi frequency and detuning must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise-constant drive, segments played back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    segments: Vec<DriveSegment>,
}

impl DriveSchedule {
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("drive schedule is empty".into()));
        }
        for seg in &segments {
            seg.validate()?;
        }
        Ok(DriveSchedule { segments })
    }

    pub fn single(segment: DriveSegment) -> Result<Self> {
        Self::new(vec![segment])
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }
}

/// One photon-number block of the density matrix (unnormalized).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateBlock {
    pub p0: f64,
    pub p1: f64,
    pub pm1: f64,
    /// rho_01; rho_10 is its conjugate.
    pub coh01: Complex64,
    pub pe0: f64,
    pub pe1: f64,
    pub pem1: f64,
    pub ps: f64,
}

impl StateBlock {
    pub fn trace(&self) -> f64 {
        self.p0 + self.p1 + self.pm1 + self.pe0 + self.pe1 + self.pem1 + self.ps
    }

    /// Total excited-triplet population.
    pub fn excited(&self) -> f64 {
        self.pe0 + self.pe1 + self.pem1
    }

    pub fn populations(&self) -> [f64; 7] {
        [
            self.p0, self.p1, self.pm1, self.pe0, self.pe1, self.pem1, self.ps,
        ]
    }

    /// Checks population positivity and the coherence bound within
    /// [`NUMERICAL_SLACK`].
    pub fn is_physical(&self) -> bool {
        self.populations().iter().all(|&p| p >= -NUMERICAL_SLACK)
            && self.coh01.norm_sqr() <= self.p0 * self.p1 + NUMERICAL_SLACK
    }

    pub fn to_array(&self) -> [f64; BLOCK_WIDTH] {
        [
            self.p0,
            self.p1,
            self.pm1,
            self.coh01.re,
            self.coh01.im,
            self.pe0,
            self.pe1,
            self.pem1,
            self.ps,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        StateBlock {
            p0: v[P0],
            p1: v[P1],
            pm1: v[PM1],
            coh01: Complex64::new(v[COH_RE], v[COH_IM]),
            pe0: v[PE0],
            pe1: v[PE1],
            pem1: v[PEM1],
            ps: v[PS],
        }
    }

    fn add(&mut self, other: &StateBlock) {
        self.p0 += other.p0;
        self.p1 += other.p1;
        self.pm1 += other.pm1;
        self.coh01 += other.coh01;
        self.pe0 += other.pe0;
        self.pe1 += other.pe1;
        self.pem1 += other.pem1;
        self.ps += other.ps;
    }
}

/// Density matrix resolved by emitted photon number `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonResolvedState {
    pub blocks: Vec<StateBlock>,
    /// us
    pub time: f64,
    /// Probability that flowed past the last block.
    pub leakage: f64,
}

impl PhotonResolvedState {
    pub fn n_max(&self) -> usize {
        self.blocks.len() - 1
    }

    /// `sum_n trace(block_n) + leakage`, equal to one for a normalized state.
    pub fn total_probability(&self) -> f64 {
        self.blocks.iter().map(StateBlock::trace).sum::<f64>() + self.leakage
    }

    pub fn normalization_error(&self) -> f64 {
        (self.total_probability() - 1.0).abs()
    }

    /// The photon-number-summed density matrix.
    pub fn summed(&self) -> StateBlock {
        let mut acc = StateBlock::default();
        for b in &self.blocks {
            acc.add(b);
        }
        acc
    }

    /// Restart photon counting: every block is folded into block 0 while the
    /// internal state is kept. Leakage is carried over unchanged.
    pub fn reset_counter(&self) -> PhotonResolvedState {
        let mut blocks = vec![StateBlock::default(); self.blocks.len()];
        blocks[0] = self.summed();
        PhotonResolvedState {
            blocks,
            time: self.time,
            leakage: self.leakage,
        }
    }

    /// Same state with at least `n_max` as the cutoff (zero padding).
    pub fn with_cutoff(&self, n_max: usize) -> PhotonResolvedState {
        let mut out = self.clone();
        if out.blocks.len() < n_max + 1 {
            out.blocks.resize(n_max + 1, StateBlock::default());
        }
        out
    }

    /// Flat vector: blocks in order, leakage last.
    pub(crate) fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.blocks.len() * BLOCK_WIDTH + 1);
        for b in &self.blocks {
            y.extend_from_slice(&b.to_array());
        }
        y.push(self.leakage);
        y
    }

    pub(crate) fn from_flat(y: &[f64], time: f64) -> PhotonResolvedState {
        let n_blocks = (y.len() - 1) / BLOCK_WIDTH;
        let blocks = y[..n_blocks * BLOCK_WIDTH]
            .chunks_exact(BLOCK_WIDTH)
            .map(StateBlock::from_slice)
            .collect();
        PhotonResolvedState {
            blocks,
            time,
            leakage: y[y.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// Equal ground populations, no coherence.
    Thermal,
    Ket0,
    Ket1,
    KetMinus1,
    Custom(StateBlock),
}

pub fn initial_state(kind: InitialState, n_max: usize) -> Result<PhotonResolvedState> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let block = match kind {
        InitialState::Thermal => StateBlock {
            p0: 1.0 / 3.0,
            p1: 1.0 / 3.0,
            pm1: 1.0 / 3.0,
            ..Default::default()
        },
        InitialState::Ket0 => StateBlock {
            p0: 1.0,
            ..Default::default()
        },
        InitialState::Ket1 => StateBlock {
            p1: 1.0,
            ..Default::default()
        },
        InitialState::KetMinus1 => StateBlock {
            pm1: 1.0,
            ..Default::default()
        },
        InitialState::Custom(b) => {
            let tr = b.trace();
            if (tr - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidState(format!(
                    "custom block must have unit trace, got {tr}"
                )));
            }
            if !b.is_physical() {
                return Err(Error::InvalidState(
                    "custom block has negative populations or an oversized coherence".into(),
                ));
            }
            b
        }
    };
    let mut blocks = vec![StateBlock::default(); n_max + 1];
    blocks[0] = block;
    Ok(PhotonResolvedState {
        blocks,
        time: 0.0,
        leakage: 0.0,
    })
}

/// Spin transition frequencies `D + gamma_e B` and `D - gamma_e B`, rad/us.
pub fn resonance_frequencies(b_field_mt: f64, rates: &RateSet) -> Result<(f64, f64)> {
    if !(b_field_mt.is_finite() && b_field_mt >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "magnetic field must be non-negative, got {b_field_mt}"
        )));
    }
    let zeeman = rates.gyro * b_field_mt;
    Ok((rates.zfs + zeeman, rates.zfs - zeeman))
}

/// Time derivative of a [`PhotonResolvedState`], same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub blocks: Vec<StateBlock>,
    /// Rate at which probability leaves the top block.
    pub leakage: f64,
}

pub fn derivative(
    state: &PhotonResolvedState,
    segment: &DriveSegment,
    rates: &RateSet,
) -> Derivative {
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    Generator::new(rates, segment).apply(&y, &mut dy);
    let d = PhotonResolvedState::from_flat(&dy, state.time);
    Derivative {
        blocks: d.blocks,
        leakage: d.leakage,
    }
}

/// Photon-resolved generator for one constant drive segment.
///
/// Lower block-bidiagonal: block `n` depends on itself and, through the
/// radiative feed, on the excited populations of block `n - 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Generator {
    r: RateSet,
    pump: f64,
    rabi: f64,
    detuning: f64,
}

impl Generator {
    pub(crate) fn new(rates: &RateSet, segment: &DriveSegment) -> Self {
        Generator {
            r: *rates,
            pump: segment.pump_rate,
            rabi: segment.rabi,
            detuning: segment.detuning,
        }
    }

    /// `dy = L y` on the flat layout (blocks then leakage).
    pub(crate) fn apply(&self, y: &[f64], dy: &mut [f64]) {
        let n_blocks = (y.len() - 1) / BLOCK_WIDTH;
        let mut feed = [0.0; 3];
        for n in 0..n_blocks {
            let b = &y[n * BLOCK_WIDTH..(n + 1) * BLOCK_WIDTH];
            let d = &mut dy[n * BLOCK_WIDTH..(n + 1) * BLOCK_WIDTH];
            self.block(b, feed, d);
            feed = [
                self.r.gamma0 * b[PE0],
                self.r.gamma0 * b[PE1],
                self.r.gamma0 * b[PEM1],
            ];
        }
        dy[n_blocks * BLOCK_WIDTH] = feed[0] + feed[1] + feed[2];
    }

    #[inline]
    fn block(&self, b: &[f64], feed: [f64; 3], d: &mut [f64]) {
        let r = &self.r;
        let half_g1 = 0.5 * r.gamma1;
        let damp = 0.5 * r.gamma1 + 0.5 * r.gamma2 + self.pump;
        let (p0, p1, pm1) = (b[P0], b[P1], b[PM1]);
        let (x, y) = (b[COH_RE], b[COH_IM]);
        let (pe0, pe1, pem1, ps) = (b[PE0], b[PE1], b[PEM1], b[PS]);

        // -i Omega/2 (rho01 - rho10) = Omega Im(rho01)
        let mw = self.rabi * y;
        d[P0] = mw - half_g1 * (p0 - p1) - half_g1 * (p0 - pm1) - self.pump * p0
            + feed[0]
            + r.gamma_s0 * ps;
        d[P1] = -mw + half_g1 * (p0 - p1) - self.pump * p1 + feed[1] + r.gamma_s1 * ps;
        d[PM1] = half_g1 * (p0 - pm1) - self.pump * pm1 + feed[2] + r.gamma_s1 * ps;
        // d rho01 = -(damp - i Delta) rho01 + i Omega/2 (p1 - p0)
        d[COH_RE] = -damp * x - self.detuning * y;
        d[COH_IM] = -damp * y + self.detuning * x + 0.5 * self.rabi * (p1 - p0);
        d[PE0] = self.pump * p0 - (r.gamma0 + r.gamma_f0) * pe0;
        d[PE1] = self.pump * p1 - (r.gamma0 + r.gamma_f1) * pe1;
        d[PEM1] = self.pump * pm1 - (r.gamma0 + r.gamma_f1) * pem1;
        d[PS] = r.gamma_f1 * (pe1 + pem1) + r.gamma_f0 * pe0
            - (r.gamma_s0 + 2.0 * r.gamma_s1) * ps;
    }
}
