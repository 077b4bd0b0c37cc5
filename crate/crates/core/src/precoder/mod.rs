//! Constructive-interference minimum-power precoders.
//!
//! Every solver reduces to the fixed-phase problem: with the phase of each
//! noiseless received point pinned to `∠d_j + u_j`, the received amplitudes
//! `a_j` are the only unknowns and the power `‖x‖²` is a convex quadratic in
//! `a`. [`FixedPhaseProblem`] solves that quadratic program exactly; the
//! relaxed precoders search over the offsets `u_j`.

mod fixed_phase;
pub(crate) mod offsets;
mod relaxed;

pub use fixed_phase::{cipm, solve_fixed_phase, stationarity_residual, AmplitudeSolution, FixedPhaseProblem};
pub use relaxed::{cipmr_equal_margin, cipmr_per_user, DEFAULT_GRID_STEP, MAX_GRID_POINTS};

use nalgebra::DVector;

use crate::constellation::{SymbolFrame, C64};
use crate::error::{Error, Result};

/// Slack allowed when checking that an offset lies inside its margin.
pub const MARGIN_TOL: f64 = 1e-12;

/// Asymmetric phase margin around a symbol: offsets in `[-lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMargin {
    pub lower: f64,
    pub upper: f64,
}

impl PhaseMargin {
    pub fn symmetric(phi: f64) -> Self {
        Self {
            lower: phi,
            upper: phi,
        }
    }

    pub fn contains(&self, offset: f64) -> bool {
        offset >= -self.lower - MARGIN_TOL && offset <= self.upper + MARGIN_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginMode {
    /// Received points exactly on the symbol rays.
    Strict,
    /// Symmetric margin `φ` shared by every user.
    Equal(f64),
    /// Individual margins per user.
    PerUser(Vec<PhaseMargin>),
}

/// SNR targets, noise power and phase margins for a min-power solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    /// Per-user SNR targets `ζ_j`, linear.
    pub targets: Vec<f64>,
    pub noise_power: f64,
    pub margins: MarginMode,
}

impl TargetSpec {
    pub fn strict(targets: Vec<f64>, noise_power: f64) -> Self {
        Self {
            targets,
            noise_power,
            margins: MarginMode::Strict,
        }
    }

    pub fn uniform(users: usize, target: f64, noise_power: f64) -> Self {
        Self::strict(vec![target; users], noise_power)
    }

    pub fn with_margins(mut self, margins: MarginMode) -> Self {
        self.margins = margins;
        self
    }

    pub fn users(&self) -> usize {
        self.targets.len()
    }

    /// Check targets and margins against a frame of `users` symbols drawn from an
    /// `order`-PSK alphabet.
    pub fn validate(&self, users: usize, order: usize) -> Result<()> {
        if self.targets.len() != users {
            return Err(Error::param(format!(
                "{} SNR targets for {users} users",
                self.targets.len()
            )));
        }
        if let Some(z) = self.targets.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::param(format!("SNR target {z} must be positive and finite")));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::param(format!(
                "noise power {} must be positive and finite",
                self.noise_power
            )));
        }
        let limit = std::f64::consts::PI / order as f64 + MARGIN_TOL;
        let check = |m: &PhaseMargin| {
            let ok = |v: f64| v.is_finite() && v >= 0.0 && v <= limit;
            if ok(m.lower) && ok(m.upper) {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "phase margin ({}, {}) outside [0, π/{order}]",
                    m.lower, m.upper
                )))
            }
        };
        match &self.margins {
            MarginMode::Strict => Ok(()),
            MarginMode::Equal(phi) => check(&PhaseMargin::symmetric(*phi)),
            MarginMode::PerUser(list) => {
                if list.len() != users {
                    return Err(Error::param(format!(
                        "{} phase margins for {users} users",
                        list.len()
                    )));
                }
                list.iter().try_for_each(check)
            }
        }
    }

    pub fn margin(&self, user: usize) -> PhaseMargin {
        match &self.margins {
            MarginMode::Strict => PhaseMargin::symmetric(0.0),
            MarginMode::Equal(phi) => PhaseMargin::symmetric(*phi),
            MarginMode::PerUser(list) => list[user],
        }
    }

    /// Minimum received amplitudes `√(σ²ζ_j)`.
    pub fn amplitude_floors(&self) -> Vec<f64> {
        self.targets
            .iter()
            .map(|z| (self.noise_power * z).sqrt())
            .collect()
    }
}

/// Bookkeeping reported alongside a solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Fixed-phase quadratic programs solved.
    pub qp_solves: usize,
    /// Offset candidates on the search grid.
    pub grid_points: usize,
    /// Stationarity residual of the strict solution, when validated.
    pub stationarity_residual: Option<f64>,
}

/// A transmit vector together with what it delivers to each user.
#[derive(Debug, Clone)]
pub struct PrecodeSolution {
    pub x: DVector<C64>,
    /// `‖x‖²`.
    pub power: f64,
    /// Noiseless received points `h_j x`.
    pub received: Vec<C64>,
    /// Received amplitudes `|h_j x|`.
    pub amplitudes: Vec<f64>,
    /// Phase offset of each received point from its symbol.
    pub offsets: Vec<f64>,
    /// Users whose amplitude constraint is tight.
    pub active_set: Vec<usize>,
    /// Coefficients `ν` with `x = H^H ν`.
    pub multipliers: Vec<C64>,
    pub frame: SymbolFrame,
    pub stats: SolveStats,
}

impl PrecodeSolution {
    /// Received SNR `|h_j x|² / σ²` of every user.
    pub fn snr(&self, noise_power: f64) -> Vec<f64> {
        self.amplitudes
            .iter()
            .map(|a| a * a / noise_power)
            .collect()
    }
}
