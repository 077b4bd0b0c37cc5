//! Effective rate, energy efficiency and the simulation-based margin search.

use rayon::prelude::*;

use crate::channel::{draw_channel, RngStream};
use crate::constellation::{Constellation, SymbolFrame};
use crate::error::{Error, Result};
use crate::precoder::{cipmr_equal_margin, PrecodeSolution, TargetSpec};
use crate::ser::{analytic_user_ser, mc_ser};

/// Stream purposes for per-trial randomness.
pub const STREAM_CHANNEL: u32 = 1;
pub const STREAM_NOISE: u32 = 2;

/// `R (1 − SER)`, clamped to `[0, R]`.
pub fn effective_rate(rate: f64, ser: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ser) {
        return Err(Error::param(format!("SER {ser} outside [0, 1]")));
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::param("rate must be non-negative"));
    }
    Ok((rate * (1.0 - ser)).clamp(0.0, rate))
}

/// Sum of effective rates per unit transmit power.
pub fn energy_efficiency(effective_rates: &[f64], power: f64) -> Result<f64> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::param(format!("power {power} must be positive")));
    }
    Ok(effective_rates.iter().sum::<f64>() / power)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub effective_rates: Vec<f64>,
    pub power: f64,
    pub eta: f64,
    pub phi: f64,
}

/// Energy report of one solution given each user's SER.
pub fn energy_report(sol: &PrecodeSolution, user_ser: &[f64], phi: f64) -> Result<EnergyReport> {
    let rate = sol.frame.constellation().bits_per_symbol();
    let effective_rates = user_ser
        .iter()
        .map(|&s| effective_rate(rate, s))
        .collect::<Result<Vec<_>>>()?;
    let eta = energy_efficiency(&effective_rates, sol.power)?;
    Ok(EnergyReport {
        effective_rates,
        power: sol.power,
        eta,
        phi,
    })
}

/// How per-user SER is obtained for each precoded symbol vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SerMode {
    /// Detect `symbols` noisy copies of the received points.
    MonteCarlo { symbols: u64 },
    /// Exact SER of each user's noiseless received point.
    Analytic,
}

/// Random-channel experiment for the relaxed minimum-power precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaExperiment {
    pub users: usize,
    pub antennas: usize,
    pub constellation: Constellation,
    /// SNR target `ζ`, linear, common to all users.
    pub target: f64,
    pub noise_power: f64,
    pub channel_power: f64,
    pub grid_step: f64,
    pub trials: u64,
    pub seed: u64,
    pub ser_mode: SerMode,
}

/// Trial-averaged quantities at one margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPoint {
    pub phi: f64,
    /// Mean over trials of `Σ_j R̄_j / P`.
    pub eta: f64,
    pub power: f64,
    /// Mean SER over users and trials.
    pub ser: f64,
    /// Mean effective rate per user.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiStarResult {
    pub phi_star: f64,
    pub eta_star: f64,
    pub curve: Vec<EtaPoint>,
}

/// Per-trial `(η, P, mean SER, mean rate)` at every margin of `phis`.
///
/// All margins see the same channel, symbols and noise of a trial.
pub fn eta_trial(exp: &EtaExperiment, phis: &[f64], trial: u64) -> Result<Vec<[f64; 4]>> {
    let mut rng = RngStream::for_trial(exp.seed, STREAM_CHANNEL, trial).rng();
    let channel = draw_channel(exp.users, exp.antennas, exp.channel_power, &mut rng)?;
    let frame = SymbolFrame::random(exp.constellation.clone(), exp.users, &mut rng);
    let spec = TargetSpec::uniform(exp.users, exp.target, exp.noise_power);
    phis.iter()
        .map(|&phi| {
            let sol = cipmr_equal_margin(&channel, &frame, &spec, phi, exp.grid_step)?;
            let user_ser = match exp.ser_mode {
                SerMode::MonteCarlo { symbols } => {
                    let mut noise = RngStream::for_trial(exp.seed, STREAM_NOISE, trial).rng();
                    let rep = mc_ser(&sol, exp.noise_power, symbols, &mut noise)?;
                    (0..exp.users).map(|j| rep.user_ser(j)).collect::<Vec<_>>()
                }
                SerMode::Analytic => analytic_user_ser(&sol, exp.noise_power)?,
            };
            let r = energy_report(&sol, &user_ser, phi)?;
            let k = exp.users as f64;
            Ok([
                r.eta,
                r.power,
                user_ser.iter().sum::<f64>() / k,
                r.effective_rates.iter().sum::<f64>() / k,
            ])
        })
        .collect()
}

/// Energy efficiency against margin, averaged over random trials, and the
/// maximising margin (ties to the smaller margin).
pub fn phi_star_search(exp: &EtaExperiment, phi_grid: &[f64]) -> Result<PhiStarResult> {
    if phi_grid.is_empty() {
        return Err(Error::param("margin grid is empty"));
    }
    if exp.trials == 0 {
        return Err(Error::param("at least one trial is required"));
    }
    let per_trial: Vec<Vec<[f64; 4]>> = (0..exp.trials)
        .into_par_iter()
        .map(|t| eta_trial(exp, phi_grid, t))
        .collect::<Result<Vec<_>>>()?;
    let n = exp.trials as f64;
    let curve: Vec<EtaPoint> = phi_grid
        .iter()
        .enumerate()
        .map(|(i, &phi)| {
            let mut acc = [0.0; 4];
            for row in &per_trial {
                for (a, v) in acc.iter_mut().zip(row[i]) {
                    *a += v;
                }
            }
            EtaPoint {
                phi,
                eta: acc[0] / n,
                power: acc[1] / n,
                ser: acc[2] / n,
                rate: acc[3] / n,
            }
        })
        .collect();
    let best = curve
        .iter()
        .fold(None::<&EtaPoint>, |b, p| match b {
            Some(q) if q.eta >= p.eta => Some(q),
            _ => Some(p),
        })
        .expect("non-empty grid");
    Ok(PhiStarResult {
        phi_star: best.phi,
        eta_star: best.eta,
        curve,
    })
}
