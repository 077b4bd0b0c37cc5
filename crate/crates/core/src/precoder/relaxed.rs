use super::offsets::{search_box, search_shared_margin};
use super::{FixedPhaseProblem, MarginMode, PhaseMargin, PrecodeSolution, TargetSpec};
use crate::channel::ChannelMatrix;
use crate::constellation::SymbolFrame;
use crate::error::{Error, Result};

/// One degree.
pub const DEFAULT_GRID_STEP: f64 = std::f64::consts::PI / 180.0;

/// Largest number of offset candidates a grid search may visit.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Relaxed minimum-power precoder with one margin `φ` shared by all users.
///
/// Each received point may sit anywhere in `[∠d_j − φ, ∠d_j + φ]`. Rotating
/// every received point by the same angle leaves `‖x‖²` unchanged, so the
/// search runs over the offsets relative to user 0 (grid of step `step`,
/// then golden-section refinement) and reports the centred offsets.
pub fn cipmr_equal_margin(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    spec: &TargetSpec,
    phi: f64,
    step: f64,
) -> Result<PrecodeSolution> {
    let spec = spec.clone().with_margins(MarginMode::Equal(phi));
    spec.validate(channel.users(), frame.constellation().order())?;
    let problem = FixedPhaseProblem::new(channel, frame)?;
    let floors = spec.amplitude_floors();
    let found = search_shared_margin(problem.users(), phi, step, MAX_GRID_POINTS, |u| {
        Ok(problem.solve_amplitudes(&floors, u)?.power)
    })?;
    let amp = problem.solve_amplitudes(&floors, &found.offsets)?;
    let mut sol = problem.solution(&amp, &found.offsets);
    sol.stats.qp_solves = found.evaluations + 1;
    sol.stats.grid_points = found.grid_points;
    Ok(sol)
}

/// Relaxed minimum-power precoder with individual margins taken from
/// `spec.margins`, searched on the full per-user offset grid.
///
/// When the grid would exceed [`MAX_GRID_POINTS`] and all margins are equal
/// and symmetric, the equal-margin search is used instead.
pub fn cipmr_per_user(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    spec: &TargetSpec,
    step: f64,
) -> Result<PrecodeSolution> {
    spec.validate(channel.users(), frame.constellation().order())?;
    let k = channel.users();
    let margins: Vec<PhaseMargin> = (0..k).map(|j| spec.margin(j)).collect();
    let problem = FixedPhaseProblem::new(channel, frame)?;
    let floors = spec.amplitude_floors();
    let found = match search_box(&margins, step, MAX_GRID_POINTS, |u| {
        Ok(problem.solve_amplitudes(&floors, u)?.power)
    }) {
        Ok(found) => found,
        Err(Error::Capacity(msg)) => {
            let first = margins[0];
            let equal = first.lower == first.upper && margins.iter().all(|m| *m == first);
            return if equal {
                cipmr_equal_margin(channel, frame, spec, first.lower, step)
            } else {
                Err(Error::Capacity(msg))
            };
        }
        Err(e) => return Err(e),
    };
    let amp = problem.solve_amplitudes(&floors, &found.offsets)?;
    let mut sol = problem.solution(&amp, &found.offsets);
    sol.stats.qp_solves = found.evaluations + 1;
    sol.stats.grid_points = found.grid_points;
    Ok(sol)
}
