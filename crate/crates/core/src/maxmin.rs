//! Weighted max-min SNR precoding by bisection over the minimum-power solver.
//!
//! For a trial factor `t` the inner problem is the min-power precoder with
//! targets `ζ_j = r_j t`, solved without the budget. The outer loop moves the
//! bracket on `t` until the required power lands in `[P − δ, P]`.

use crate::channel::ChannelMatrix;
use crate::constellation::SymbolFrame;
use crate::error::{Error, Result};
use crate::precoder::offsets::search_shared_margin;
use crate::precoder::{AmplitudeSolution, FixedPhaseProblem, PrecodeSolution, MAX_GRID_POINTS, MARGIN_TOL};

/// Doublings of the upper bracket end before giving up.
pub const MAX_DOUBLINGS: usize = 60;
const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxMinSpec {
    /// Per-user SNR weights `r_j`, linear.
    pub weights: Vec<f64>,
    /// Power budget `P`.
    pub budget: f64,
    pub noise_power: f64,
    /// Bisection stops once the required power is within `δ` below `P`.
    pub tolerance: f64,
    /// Initial bracket `[m1, m2]` on `t`.
    pub bracket: (f64, f64),
}

impl MaxMinSpec {
    /// Defaults: `δ = 1e-6·P` and bracket `[0, 1]`.
    pub fn new(weights: Vec<f64>, budget: f64, noise_power: f64) -> Self {
        Self {
            weights,
            budget,
            noise_power,
            tolerance: 1e-6 * budget,
            bracket: (0.0, 1.0),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_bracket(mut self, lower: f64, upper: f64) -> Self {
        self.bracket = (lower, upper);
        self
    }

    pub fn validate(&self, users: usize) -> Result<()> {
        if self.weights.len() != users {
            return Err(Error::param(format!(
                "{} weights for {users} users",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::param("SNR weights must be positive and finite"));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::param(format!("budget {} must be positive", self.budget)));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(Error::param("noise power must be positive"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < self.budget) {
            return Err(Error::param(format!(
                "bisection tolerance {} must lie in (0, P)",
                self.tolerance
            )));
        }
        let (m1, m2) = self.bracket;
        if !(m1 >= 0.0 && m2 > m1 && m2.is_finite()) {
            return Err(Error::param(format!("bracket [{m1}, {m2}] must satisfy 0 ≤ m1 < m2")));
        }
        Ok(())
    }
}

/// Result of a max-min solve.
#[derive(Debug, Clone)]
pub struct MaxMinSolution {
    /// Achieved weighted SNR factor: every user gets SNR at least `r_j t`.
    pub t: f64,
    pub solution: PrecodeSolution,
    /// Bisection steps of the final solve.
    pub iterations: usize,
}

struct Bisection {
    t: f64,
    amp: AmplitudeSolution,
    iterations: usize,
}

fn bisect(problem: &FixedPhaseProblem<'_>, spec: &MaxMinSpec, offsets: &[f64]) -> Result<Bisection> {
    let unit: Vec<f64> = spec.weights.iter().map(|r| (spec.noise_power * r).sqrt()).collect();
    let solve = |t: f64| {
        let floors: Vec<f64> = unit.iter().map(|u| u * t.sqrt()).collect();
        problem.solve_amplitudes(&floors, offsets)
    };
    let p = spec.budget;
    let accept = |power: f64| power <= p && power >= p - spec.tolerance;
    let (mut lo, mut hi) = spec.bracket;
    let mut iterations = 0;
    let mut doublings = 0;
    loop {
        let amp = solve(hi)?;
        iterations += 1;
        if accept(amp.power) {
            return Ok(Bisection { t: hi, amp, iterations });
        }
        if amp.power > p {
            break;
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::Numerical(format!(
                "required power stays below the budget after {MAX_DOUBLINGS} bracket doublings"
            )));
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    for _ in 0..MAX_BISECTIONS {
        let t = 0.5 * (lo + hi);
        if !(t > lo && t < hi) {
            break;
        }
        let amp = solve(t)?;
        iterations += 1;
        if accept(amp.power) {
            return Ok(Bisection { t, amp, iterations });
        }
        if amp.power < p {
            lo = t;
        } else {
            hi = t;
        }
    }
    Err(Error::Numerical(format!(
        "bisection on t did not reach the power window [P − {:.3e}, P]",
        spec.tolerance
    )))
}

/// Strict max-min precoder: received points on the symbol rays.
pub fn cimm(channel: &ChannelMatrix, frame: &SymbolFrame, spec: &MaxMinSpec) -> Result<MaxMinSolution> {
    spec.validate(channel.users())?;
    let problem = FixedPhaseProblem::new(channel, frame)?;
    let offsets = vec![0.0; channel.users()];
    let b = bisect(&problem, spec, &offsets)?;
    let mut solution = problem.solution(&b.amp, &offsets);
    solution.stats.qp_solves = b.iterations;
    Ok(MaxMinSolution {
        t: b.t,
        solution,
        iterations: b.iterations,
    })
}

/// Relaxed max-min precoder with a shared margin `φ`.
///
/// Every offset candidate of the equal-margin search runs its own bisection;
/// the candidate with the largest `t` wins, ties going to smaller offsets.
pub fn cimmr(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    spec: &MaxMinSpec,
    phi: f64,
    step: f64,
) -> Result<MaxMinSolution> {
    spec.validate(channel.users())?;
    let limit = std::f64::consts::PI / frame.constellation().order() as f64;
    if !(phi >= 0.0 && phi <= limit + MARGIN_TOL) {
        return Err(Error::param(format!("margin {phi} outside [0, π/{}]", frame.constellation().order())));
    }
    let problem = FixedPhaseProblem::new(channel, frame)?;
    let mut solves = 0;
    let found = search_shared_margin(problem.users(), phi, step, MAX_GRID_POINTS, |u| {
        let b = bisect(&problem, spec, u)?;
        solves += b.iterations;
        Ok(-b.t)
    })?;
    let b = bisect(&problem, spec, &found.offsets)?;
    let mut solution = problem.solution(&b.amp, &found.offsets);
    solution.stats.qp_solves = solves + b.iterations;
    solution.stats.grid_points = found.grid_points;
    Ok(MaxMinSolution {
        t: b.t,
        solution,
        iterations: b.iterations,
    })
}
