//! Pipelines behind each named scenario.

use rayon::prelude::*;

use super::config::{ScenarioConfig, ScenarioId, SerSetting};
use super::table::{format_number, ResultTable};
use super::units::{db_to_linear, deg_to_rad, rad_to_deg};
use crate::bounds::{genie_bound, matched_filter_precoder, mrt_baseline, multicast_rank1_bound, zf_baseline};
use crate::channel::{draw_channel, ChannelMatrix, RngStream};
use crate::constellation::{Constellation, SymbolFrame, C64};
use crate::energy::{phi_star_search, EtaExperiment, SerMode, STREAM_CHANNEL, STREAM_NOISE};
use crate::error::{Error, Result};
use crate::maxmin::{cimm, cimmr, MaxMinSpec};
use crate::precoder::{cipm, cipmr_equal_margin, cipmr_per_user, MarginMode, PhaseMargin, PrecodeSolution, TargetSpec};
use crate::ser::{analytic_user_ser, mc_ser};

/// Evaluate `f` for every trial in parallel; the first failing trial in
/// index order decides the error.
fn par_trials<T: Send>(trials: u64, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let out: Vec<Result<T>> = (0..trials).into_par_iter().map(|t| f(t)).collect();
    out.into_iter().collect()
}

fn phi_label(deg: f64) -> String {
    format!("phi{}deg", format_number(deg))
}

struct Common {
    order: usize,
    constellation: Constellation,
    noise: f64,
    target: f64,
    step: f64,
}

impl Common {
    fn new(config: &ScenarioConfig, order: usize) -> Result<Self> {
        Ok(Self {
            order,
            constellation: Constellation::psk(order)?,
            noise: db_to_linear(config.noise_power_db),
            target: db_to_linear(config.target_db),
            step: deg_to_rad(config.phi_grid_step_deg),
        })
    }

    fn spec(&self, users: usize) -> TargetSpec {
        TargetSpec::uniform(users, self.target, self.noise)
    }
}

/// Unit-power channel and random symbols for one trial; sweep points scale
/// the same draw.
fn draw_trial(config: &ScenarioConfig, c: &Common, trial: u64) -> Result<(ChannelMatrix, SymbolFrame)> {
    let mut rng = RngStream::for_trial(config.seed, STREAM_CHANNEL, trial).rng();
    let ch = draw_channel(config.users, config.antennas, 1.0, &mut rng)?;
    let frame = SymbolFrame::random(c.constellation.clone(), config.users, &mut rng);
    Ok((ch, frame))
}

fn scaled_channel(base: &ChannelMatrix, power_db: f64) -> ChannelMatrix {
    base.scaled(db_to_linear(power_db).sqrt())
}

fn user_ser(config: &ScenarioConfig, sol: &PrecodeSolution, noise: f64, trial: u64) -> Result<Vec<f64>> {
    match config.ser {
        SerSetting::Analytic => analytic_user_ser(sol, noise),
        SerSetting::MonteCarlo { symbols } => {
            let mut rng = RngStream::for_trial(config.seed, STREAM_NOISE, trial).rng();
            let rep = mc_ser(sol, noise, symbols, &mut rng)?;
            Ok((0..sol.received.len()).map(|j| rep.user_ser(j)).collect())
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Scale the transmit vector of a solution by `factor`.
fn scale_solution(sol: &PrecodeSolution, factor: f64) -> PrecodeSolution {
    let mut s = sol.clone();
    s.x *= C64::new(factor, 0.0);
    s.received.iter_mut().for_each(|z| *z *= factor);
    s.amplitudes.iter_mut().for_each(|a| *a *= factor);
    s.multipliers.iter_mut().for_each(|z| *z *= factor);
    s.power = s.x.norm_squared();
    s
}

/// Column-wise mean over trials of equally shaped rows.
fn column_means(per_trial: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let n = per_trial.len() as f64;
    let mut acc = per_trial[0].iter().map(|r| vec![0.0; r.len()]).collect::<Vec<_>>();
    for trial in per_trial {
        for (a, r) in acc.iter_mut().zip(trial) {
            for (x, v) in a.iter_mut().zip(r) {
                *x += v;
            }
        }
    }
    acc.iter_mut().for_each(|r| r.iter_mut().for_each(|x| *x /= n));
    acc
}

fn fig2(config: &ScenarioConfig) -> Result<ResultTable> {
    let c = Common::new(config, config.psk_orders[0])?;
    let mut columns = vec!["channel_power_db".into(), "p_multicast".into(), "p_genie".into(), "p_cipm".into()];
    columns.extend(config.phi_deg.iter().map(|&p| format!("p_cipmr_{}", phi_label(p))));
    let mut table = ResultTable::new(columns);
    let spec = c.spec(config.users);
    let per_trial = par_trials(config.trials, |t| {
        let (base, frame) = draw_trial(config, &c, t)?;
        config
            .channel_power_db
            .iter()
            .map(|&db| {
                let ch = scaled_channel(&base, db);
                let mut row = vec![
                    multicast_rank1_bound(&ch, &spec.targets, c.noise)?.power,
                    genie_bound(&ch, &spec.targets, c.noise)?.power,
                    cipm(&ch, &frame, &spec)?.power,
                ];
                for &p in &config.phi_deg {
                    row.push(cipmr_equal_margin(&ch, &frame, &spec, deg_to_rad(p), c.step)?.power);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (db, row) in config.channel_power_db.iter().zip(column_means(&per_trial)) {
        table.push_row(std::iter::once(*db).chain(row).collect())?;
    }
    Ok(table)
}

fn fig3(config: &ScenarioConfig) -> Result<ResultTable> {
    let c = Common::new(config, 4)?;
    let phi = deg_to_rad(config.phi_deg[0]);
    // User 1 sends "11" (first quadrant), user 2 sends "00" (third quadrant).
    let frame = SymbolFrame::new(c.constellation.clone(), vec![0, 2])?;
    let strict = c.spec(2);
    let relaxed = strict
        .clone()
        .with_margins(MarginMode::PerUser(vec![PhaseMargin::symmetric(phi); 2]));
    let mut table = ResultTable::new([
        "sample",
        "user",
        "cipm_re",
        "cipm_im",
        "cipmr_re",
        "cipmr_im",
        "target_amplitude",
        "cipm_power",
        "cipmr_power",
    ]);
    let samples = par_trials(config.trials, |t| {
        let mut rng = RngStream::for_trial(config.seed, STREAM_CHANNEL, t).rng();
        let ch = draw_channel(2, config.antennas, db_to_linear(config.channel_power_db[0]), &mut rng)?;
        Ok((cipm(&ch, &frame, &strict)?, cipmr_per_user(&ch, &frame, &relaxed, c.step)?))
    })?;
    let floor = (c.noise * c.target).sqrt();
    for (t, (a, b)) in samples.iter().enumerate() {
        for j in 0..2 {
            table.push_row(vec![
                t as f64,
                j as f64,
                a.received[j].re,
                a.received[j].im,
                b.received[j].re,
                b.received[j].im,
                floor,
                a.power,
                b.power,
            ])?;
        }
    }
    Ok(table)
}

fn fig4(config: &ScenarioConfig) -> Result<ResultTable> {
    let c = Common::new(config, config.psk_orders[0])?;
    let mut columns = vec!["power_db".to_string(), "ser_cimm".into()];
    columns.extend(config.phi_deg.iter().map(|&p| format!("ser_cimmr_{}", phi_label(p))));
    columns.extend(["ser_zf".into(), "ser_mrt".into(), "mrt_fallback_fraction".into()]);
    let mut table = ResultTable::new(columns);
    let per_trial = par_trials(config.trials, |t| {
        let (base, frame) = draw_trial(config, &c, t)?;
        let ch = scaled_channel(&base, config.channel_power_db[0]);
        let zf = zf_baseline(&ch, &frame, &config.weights, c.noise)?;
        let (mrt, fallback) = match mrt_baseline(&ch, &frame, &config.weights, c.noise) {
            Ok(sol) => (sol, 0.0),
            Err(Error::Infeasible(_)) => {
                let q: Vec<f64> = config.weights.iter().map(|r| r.sqrt()).collect();
                (matched_filter_precoder(&ch, &frame, &q, &q)?, 1.0)
            }
            Err(e) => return Err(e),
        };
        config
            .budget_db
            .iter()
            .map(|&db| {
                let p = db_to_linear(db);
                let spec = MaxMinSpec::new(config.weights.clone(), p, c.noise);
                let mut sols = vec![cimm(&ch, &frame, &spec)?.solution];
                for &phi in &config.phi_deg {
                    sols.push(cimmr(&ch, &frame, &spec, deg_to_rad(phi), c.step)?.solution);
                }
                sols.push(scale_solution(&zf, (p / zf.power).sqrt()));
                sols.push(scale_solution(&mrt, (p / mrt.power).sqrt()));
                let mut row = sols
                    .iter()
                    .map(|s| Ok(mean(&user_ser(config, s, c.noise, t)?)))
                    .collect::<Result<Vec<_>>>()?;
                row.push(fallback);
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (db, row) in config.budget_db.iter().zip(column_means(&per_trial)) {
        table.push_row(std::iter::once(*db).chain(row).collect())?;
    }
    Ok(table)
}

/// Shared pipeline of the rate (fig5) and energy-efficiency (fig6) sweeps.
fn rate_or_eta(config: &ScenarioConfig, eta: bool) -> Result<ResultTable> {
    let c = Common::new(config, config.psk_orders[0])?;
    let prefix = if eta { "eta" } else { "rate" };
    let mut columns = vec!["channel_power_db".to_string(), format!("{prefix}_cipm")];
    columns.extend(config.phi_deg.iter().map(|&p| format!("{prefix}_cipmr_{}", phi_label(p))));
    columns.extend([format!("{prefix}_zf"), format!("{prefix}_mrt"), "mrt_feasible_fraction".into()]);
    let mut table = ResultTable::new(columns);
    let spec = c.spec(config.users);
    let bits = c.constellation.bits_per_symbol();
    let metric = |sol: &PrecodeSolution, t: u64| -> Result<f64> {
        let ser = user_ser(config, sol, c.noise, t)?;
        let rates: Vec<f64> = ser.iter().map(|s| bits * (1.0 - s)).collect();
        Ok(if eta {
            rates.iter().sum::<f64>() / sol.power
        } else {
            mean(&rates)
        })
    };
    // Per sweep point: fixed-width values plus the MRT value when feasible.
    let per_trial = par_trials(config.trials, |t| {
        let (base, frame) = draw_trial(config, &c, t)?;
        config
            .channel_power_db
            .iter()
            .map(|&db| {
                let ch = scaled_channel(&base, db);
                let mut row = vec![metric(&cipm(&ch, &frame, &spec)?, t)?];
                for &p in &config.phi_deg {
                    row.push(metric(&cipmr_equal_margin(&ch, &frame, &spec, deg_to_rad(p), c.step)?, t)?);
                }
                row.push(metric(&zf_baseline(&ch, &frame, &spec.targets, c.noise)?, t)?);
                let mrt = match mrt_baseline(&ch, &frame, &spec.targets, c.noise) {
                    Ok(sol) => Some(metric(&sol, t)?),
                    Err(Error::Infeasible(_)) => None,
                    Err(e) => return Err(e),
                };
                Ok((row, mrt))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for (i, db) in config.channel_power_db.iter().enumerate() {
        let n = per_trial.len() as f64;
        let width = per_trial[0][i].0.len();
        let mut row = vec![*db];
        for col in 0..width {
            row.push(per_trial.iter().map(|tr| tr[i].0[col]).sum::<f64>() / n);
        }
        let feasible: Vec<f64> = per_trial.iter().filter_map(|tr| tr[i].1).collect();
        row.push(if feasible.is_empty() { 0.0 } else { mean(&feasible) });
        row.push(feasible.len() as f64 / n);
        table.push_row(row)?;
    }
    Ok(table)
}

fn experiment(config: &ScenarioConfig, c: &Common) -> EtaExperiment {
    EtaExperiment {
        users: config.users,
        antennas: config.antennas,
        constellation: c.constellation.clone(),
        target: c.target,
        noise_power: c.noise,
        channel_power: db_to_linear(config.channel_power_db[0]),
        grid_step: c.step,
        trials: config.trials,
        seed: config.seed,
        ser_mode: match config.ser {
            SerSetting::Analytic => SerMode::Analytic,
            SerSetting::MonteCarlo { symbols } => SerMode::MonteCarlo { symbols },
        },
    }
}

fn margin_sweep(config: &ScenarioConfig) -> Result<ResultTable> {
    let c = Common::new(config, config.psk_orders[0])?;
    let grid: Vec<f64> = config.phi_deg.iter().map(|&d| deg_to_rad(d)).collect();
    let res = phi_star_search(&experiment(config, &c), &grid)?;
    let mut table = ResultTable::new(["phi_deg", "eta", "ser", "power", "rate_per_user"]);
    for (deg, p) in config.phi_deg.iter().zip(&res.curve) {
        table.push_row(vec![*deg, p.eta, p.ser, p.power, p.rate])?;
    }
    table.set_meta("phi_star_deg", format_number(rad_to_deg(res.phi_star)));
    table.set_meta("eta_star", format_number(res.eta_star));
    Ok(table)
}

fn table2(config: &ScenarioConfig) -> Result<ResultTable> {
    let grid: Vec<f64> = config.phi_deg.iter().map(|&d| deg_to_rad(d)).collect();
    let mut columns = vec!["psk_order".to_string()];
    columns.extend(config.phi_deg.iter().map(|&p| format!("eta_{}", phi_label(p))));
    let mut table = ResultTable::new(columns);
    for &order in &config.psk_orders {
        let c = Common::new(config, order)?;
        let res = phi_star_search(&experiment(config, &c), &grid)?;
        let mut row = vec![c.order as f64];
        row.extend(res.curve.iter().map(|p| p.eta));
        table.push_row(row)?;
    }
    Ok(table)
}

pub(super) fn run(config: &ScenarioConfig) -> Result<ResultTable> {
    match config.scenario {
        ScenarioId::Fig2 => fig2(config),
        ScenarioId::Fig3 => fig3(config),
        ScenarioId::Fig4 => fig4(config),
        ScenarioId::Fig5 => rate_or_eta(config, false),
        ScenarioId::Fig6 => rate_or_eta(config, true),
        ScenarioId::Fig8 | ScenarioId::Fig9 => margin_sweep(config),
        ScenarioId::Table2 => table2(config),
    }
}
