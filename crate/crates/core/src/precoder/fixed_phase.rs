use nalgebra::{DMatrix, DVector};

use super::{PrecodeSolution, SolveStats, TargetSpec};
use crate::channel::ChannelMatrix;
use crate::constellation::{SymbolFrame, C64};
use crate::coupling::coupling;
use crate::error::{Error, Result};
use crate::linalg;

/// Largest user count accepted by the subset enumeration.
pub const MAX_QP_USERS: usize = 20;

/// Bound on the stationarity residual accepted by [`cipm`].
pub const STATIONARITY_TOL: f64 = 1e-6;

/// Relative slack for calling an amplitude constraint tight.
const TIGHT_TOL: f64 = 1e-9;

/// Optimal received amplitudes for one choice of received phases.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSolution {
    pub amplitudes: Vec<f64>,
    pub power: f64,
    pub tight: Vec<usize>,
}

/// Channel and symbols with the Gram inverse cached, ready for repeated
/// fixed-phase solves at different offsets and targets.
#[derive(Debug, Clone)]
pub struct FixedPhaseProblem<'a> {
    channel: &'a ChannelMatrix,
    frame: &'a SymbolFrame,
    gram_inv: DMatrix<C64>,
}

impl<'a> FixedPhaseProblem<'a> {
    pub fn new(channel: &'a ChannelMatrix, frame: &'a SymbolFrame) -> Result<Self> {
        if frame.len() != channel.users() {
            return Err(Error::param(format!(
                "{} symbols for {} users",
                frame.len(),
                channel.users()
            )));
        }
        if channel.users() > MAX_QP_USERS {
            return Err(Error::Capacity(format!(
                "{} users exceeds the active-set limit of {MAX_QP_USERS}",
                channel.users()
            )));
        }
        let gram_inv = linalg::gram_inverse(channel)?;
        Ok(Self {
            channel,
            frame,
            gram_inv,
        })
    }

    pub fn users(&self) -> usize {
        self.frame.len()
    }

    pub fn channel(&self) -> &ChannelMatrix {
        self.channel
    }

    pub fn frame(&self) -> &SymbolFrame {
        self.frame
    }

    /// Unit phasors `e^{i(∠d_j + u_j)}` of the target received points.
    pub fn directions(&self, offsets: &[f64]) -> Vec<C64> {
        offsets
            .iter()
            .enumerate()
            .map(|(j, u)| C64::from_polar(1.0, self.frame.angle(j) + u))
            .collect()
    }

    /// Real matrix `Q` with `‖x‖² = aᵀ Q a` for received points `a_j e^{iθ_j}`.
    pub fn quadratic_form(&self, offsets: &[f64]) -> DMatrix<f64> {
        let dirs = self.directions(offsets);
        let k = self.users();
        DMatrix::from_fn(k, k, |i, j| {
            (dirs[i].conj() * self.gram_inv[(i, j)] * dirs[j]).re
        })
    }

    /// Minimum-power amplitudes with `a_j ≥ floors[j]` at the given offsets.
    pub fn solve_amplitudes(&self, floors: &[f64], offsets: &[f64]) -> Result<AmplitudeSolution> {
        let k = self.users();
        if floors.len() != k || offsets.len() != k {
            return Err(Error::param("floor and offset vectors must have one entry per user"));
        }
        let q = self.quadratic_form(offsets);
        min_quadratic_above_floors(&q, floors)
    }

    /// Assemble `x` and its diagnostics from optimal amplitudes.
    pub fn solution(&self, amp: &AmplitudeSolution, offsets: &[f64]) -> PrecodeSolution {
        let dirs = self.directions(offsets);
        let y = DVector::from_iterator(
            dirs.len(),
            dirs.iter().zip(&amp.amplitudes).map(|(d, a)| d * *a),
        );
        let nu = &self.gram_inv * &y;
        let x = self.channel.matrix().adjoint() * &nu;
        let received = self.channel.apply(&x);
        PrecodeSolution {
            power: x.norm_squared(),
            amplitudes: received.iter().map(|z| z.norm()).collect(),
            received,
            x,
            offsets: offsets.to_vec(),
            active_set: amp.tight.clone(),
            multipliers: nu.iter().copied().collect(),
            frame: self.frame.clone(),
            stats: SolveStats {
                qp_solves: 1,
                ..SolveStats::default()
            },
        }
    }
}

/// Minimise `aᵀ Q a` subject to `a ≥ s` for positive definite `Q`, by
/// enumerating which constraints are tight.
pub(crate) fn min_quadratic_above_floors(q: &DMatrix<f64>, floors: &[f64]) -> Result<AmplitudeSolution> {
    let k = floors.len();
    if k == 0 || k > MAX_QP_USERS {
        return Err(Error::Capacity(format!("active-set enumeration over {k} users")));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << k) {
        let tight: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let free: Vec<usize> = (0..k).filter(|j| mask & (1 << j) == 0).collect();
        let mut a = floors.to_vec();
        if !free.is_empty() {
            let qff = DMatrix::from_fn(free.len(), free.len(), |r, c| q[(free[r], free[c])]);
            let rhs = DVector::from_iterator(
                free.len(),
                free.iter()
                    .map(|&f| -tight.iter().map(|&t| q[(f, t)] * floors[t]).sum::<f64>()),
            );
            let Some(af) = linalg::solve_spd(qff, &rhs) else {
                continue;
            };
            let mut feasible = true;
            for (idx, &f) in free.iter().enumerate() {
                if af[idx] < floors[f] * (1.0 - 1e-12) {
                    feasible = false;
                    break;
                }
                a[f] = af[idx].max(floors[f]);
            }
            if !feasible {
                continue;
            }
        }
        let power = quadratic(q, &a);
        if best.as_ref().is_none_or(|(p, _)| power < *p) {
            best = Some((power, a));
        }
    }
    let (power, amplitudes) = best.ok_or_else(|| {
        Error::Numerical("no feasible active set in fixed-phase problem".into())
    })?;
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::Numerical(format!("fixed-phase power {power} is not positive")));
    }
    let tight = (0..k)
        .filter(|&j| amplitudes[j] <= floors[j] * (1.0 + TIGHT_TOL))
        .collect();
    Ok(AmplitudeSolution {
        amplitudes,
        power,
        tight,
    })
}

fn quadratic(q: &DMatrix<f64>, a: &[f64]) -> f64 {
    let k = a.len();
    let mut s = 0.0;
    for i in 0..k {
        for j in 0..k {
            s += a[i] * q[(i, j)] * a[j];
        }
    }
    s
}

fn check_offsets(spec: &TargetSpec, offsets: &[f64]) -> Result<()> {
    if offsets.len() != spec.users() {
        return Err(Error::param(format!(
            "{} offsets for {} users",
            offsets.len(),
            spec.users()
        )));
    }
    for (j, &u) in offsets.iter().enumerate() {
        let m = spec.margin(j);
        if !(u.is_finite() && m.contains(u)) {
            return Err(Error::param(format!(
                "offset {u} of user {j} outside margin [-{}, {}]",
                m.lower, m.upper
            )));
        }
    }
    Ok(())
}

/// Minimum-power precoder with every received phase pinned to `∠d_j + u_j`.
pub fn solve_fixed_phase(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    spec: &TargetSpec,
    offsets: &[f64],
) -> Result<PrecodeSolution> {
    spec.validate(channel.users(), frame.constellation().order())?;
    check_offsets(spec, offsets)?;
    let problem = FixedPhaseProblem::new(channel, frame)?;
    let amp = problem.solve_amplitudes(&spec.amplitude_floors(), offsets)?;
    Ok(problem.solution(&amp, offsets))
}

/// Strict constructive-interference power minimisation: received points on
/// the symbol rays, amplitudes at least `√(σ²ζ_j)`.
pub fn cipm(channel: &ChannelMatrix, frame: &SymbolFrame, spec: &TargetSpec) -> Result<PrecodeSolution> {
    let strict = spec.clone().with_margins(super::MarginMode::Strict);
    let offsets = vec![0.0; channel.users()];
    let mut sol = solve_fixed_phase(channel, frame, &strict, &offsets)?;
    let residual = stationarity_residual(channel, &sol)?;
    if !(residual <= STATIONARITY_TOL) {
        return Err(Error::Numerical(format!(
            "stationarity residual {residual:.3e} exceeds {STATIONARITY_TOL:.0e}"
        )));
    }
    sol.stats.stationarity_residual = Some(residual);
    Ok(sol)
}

/// Residual of the real stationarity system linking the multipliers to the
/// received points.
///
/// With `μ_k = -2 Im ν_k` and `α_k = -2 Re ν_k`, each user contributes the
/// two real equations
/// `-½ Σ_k (α_k + iμ_k) ‖h_j‖‖h_k‖ ρ_jk = a_j e^{i(∠d_j + u_j)}`
/// where `ρ_jk` is the normalised coupling of `h_j` with `h_k^H`.
/// Returns the largest absolute equation error relative to the largest
/// amplitude.
pub fn stationarity_residual(channel: &ChannelMatrix, sol: &PrecodeSolution) -> Result<f64> {
    let k = channel.users();
    if sol.multipliers.len() != k || sol.amplitudes.len() != k {
        return Err(Error::param("solution does not match the channel dimensions"));
    }
    let alpha: Vec<f64> = sol.multipliers.iter().map(|n| -2.0 * n.re).collect();
    let mu: Vec<f64> = sol.multipliers.iter().map(|n| -2.0 * n.im).collect();
    let norms: Vec<f64> = (0..k).map(|j| channel.row_norm(j)).collect();
    let mut worst: f64 = 0.0;
    for j in 0..k {
        let hj = channel.row(j);
        let mut z = C64::new(0.0, 0.0);
        for kk in 0..k {
            let w = channel.row(kk).adjoint();
            let rho = coupling(&hj, &w)?.value();
            z += -0.5 * C64::new(alpha[kk], mu[kk]) * norms[j] * norms[kk] * rho;
        }
        let target = C64::from_polar(sol.amplitudes[j], sol.frame.angle(j) + sol.offsets[j]);
        worst = worst.max((z.re - target.re).abs()).max((z.im - target.im).abs());
    }
    let scale = sol.amplitudes.iter().cloned().fold(0.0, f64::max);
    Ok(if scale > 0.0 { worst / scale } else { worst })
}
