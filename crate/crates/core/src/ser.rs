//! Symbol error rate of M-PSK detection in complex AWGN.
//!
//! A point of received SNR `γ = ω/σ²` transmitted at angle 0 lands at angle
//! `θ` with density
//! `p(θ) = e^{-γ}/(2π) + √γ cos θ/(2√π) · e^{-γ sin²θ} erfc(-√γ cos θ)`.
//! Error probabilities integrate this density over the wrong sectors, which
//! keeps small error rates accurate to their own relative precision.

use std::f64::consts::PI;

use libm::erfc;
use rand::Rng;

use crate::channel::add_noise;
use crate::error::{Error, Result};
use crate::precoder::PrecodeSolution;
use crate::quadrature::integrate;

const ABS_TOL: f64 = 1e-14;
const REL_TOL: f64 = 1e-11;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

fn check_common(omega: f64, noise_power: f64, order: usize) -> Result<()> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::param(format!("received power {omega} must be non-negative")));
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::param("noise power must be positive"));
    }
    if order < 2 {
        return Err(Error::param("PSK order must be at least 2"));
    }
    Ok(())
}

/// Angle density of the received point, relative to the transmitted angle.
pub fn angle_density(theta: f64, snr: f64) -> f64 {
    let g = snr.sqrt();
    let c = theta.cos();
    let s = theta.sin();
    (-snr).exp() / (2.0 * PI)
        + g * c / (2.0 * PI.sqrt()) * (-snr * s * s).exp() * erfc(-g * c)
}

/// Angle density restricted to received amplitudes `v ≥ threshold`, for a
/// point of amplitude `amplitude` in noise of power `noise_power`.
pub fn angle_density_above(theta: f64, amplitude: f64, threshold: f64, noise_power: f64) -> f64 {
    let sigma = noise_power.sqrt();
    let c = theta.cos();
    let s = theta.sin();
    let shift = threshold - amplitude * c;
    (-amplitude * amplitude * s * s / noise_power).exp() / (PI * noise_power)
        * (0.5 * noise_power * (-shift * shift / noise_power).exp()
            + amplitude * c * sigma * PI.sqrt() * 0.5 * erfc(shift / sigma))
}

fn mass<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    Ok(integrate(f, a, b, ABS_TOL, REL_TOL)?.value)
}

/// Probability of leaving the sector `[-π/M, π/M]` when the noiseless point
/// sits at angle `offset`, for any offset.
fn wrong_sector_mass<F: Fn(f64) -> f64 + Copy>(density: F, order: usize, offset: f64) -> Result<f64> {
    let half = PI / order as f64;
    let off = offset.abs();
    if off <= half {
        // Density is even in θ; integrate the two tails directly.
        Ok(mass(density, half - off, PI)? + mass(density, half + off, PI)?)
    } else {
        let inside = mass(density, -half - off, half - off)?;
        Ok((1.0 - inside).max(0.0))
    }
}

/// `0.5·erfc(√(ω/σ²))`.
pub fn bpsk_closed_form(omega: f64, noise_power: f64) -> f64 {
    0.5 * erfc((omega / noise_power).sqrt())
}

/// SER for a received point exactly on its symbol ray.
pub fn ser_strict_quadrature(omega: f64, noise_power: f64, order: usize) -> Result<f64> {
    ser_offset_quadrature(omega, noise_power, order, 0.0)
}

/// SER when the noiseless received point is rotated by `offset` from its
/// symbol while detection uses the symbol's strict sector.
pub fn ser_offset_quadrature(omega: f64, noise_power: f64, order: usize, offset: f64) -> Result<f64> {
    check_common(omega, noise_power, order)?;
    if !(offset.abs() <= PI / order as f64 + 1e-12) {
        return Err(Error::param(format!("offset {offset} outside [-π/{order}, π/{order}]")));
    }
    let snr = omega / noise_power;
    wrong_sector_mass(|t| angle_density(t, snr), order, offset)
}

/// SER at an arbitrary offset, including points outside the correct sector.
pub(crate) fn ser_any_offset(omega: f64, noise_power: f64, order: usize, offset: f64) -> Result<f64> {
    check_common(omega, noise_power, order)?;
    let snr = omega / noise_power;
    wrong_sector_mass(|t| angle_density(t, snr), order, offset)
}

/// How the offset within a relaxed margin is distributed.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// Uniform over `[-φ1, φ2]`.
    Uniform,
    /// The empirical distribution of offsets chosen by a precoder.
    Empirical(Vec<f64>),
    /// `1 − ∫_{-φ1}^{φ2} (1 − SER(φ)) dφ`, without normalising by the margin
    /// width. Only a probability when the width is one radian.
    Unnormalized,
}

/// SER averaged over the offset within a relaxed margin.
pub fn ser_relaxed_average(
    omega: f64,
    noise_power: f64,
    order: usize,
    lower: f64,
    upper: f64,
    weighting: &Weighting,
) -> Result<f64> {
    check_common(omega, noise_power, order)?;
    let half = PI / order as f64 + 1e-12;
    if !(lower >= 0.0 && upper >= 0.0 && lower <= half && upper <= half) {
        return Err(Error::param("margins must lie in [0, π/M]"));
    }
    let ser = |phi: f64| ser_offset_quadrature(omega, noise_power, order, phi.clamp(-PI / order as f64, PI / order as f64));
    match weighting {
        Weighting::Empirical(offsets) => {
            if offsets.is_empty() {
                return Err(Error::param("empirical weighting needs at least one offset"));
            }
            let mut sum = 0.0;
            for &u in offsets {
                if !(u >= -lower - 1e-12 && u <= upper + 1e-12) {
                    return Err(Error::param(format!("empirical offset {u} outside the margin")));
                }
                sum += ser(u)?;
            }
            Ok(sum / offsets.len() as f64)
        }
        Weighting::Uniform | Weighting::Unnormalized => {
            let width = lower + upper;
            if width == 0.0 {
                return match weighting {
                    Weighting::Uniform => ser(0.0),
                    _ => Ok(1.0),
                };
            }
            // Integrand errors are propagated through a fallible cell.
            let failure = std::cell::Cell::new(None);
            let integral = integrate(
                |phi| match ser(phi) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.set(Some(e.to_string()));
                        0.0
                    }
                },
                -lower,
                upper,
                1e-13,
                1e-9,
            )?
            .value;
            if let Some(msg) = failure.take() {
                return Err(Error::Numerical(msg));
            }
            Ok(match weighting {
                Weighting::Uniform => integral / width,
                _ => 1.0 - (width - integral),
            })
        }
    }
}

/// Probability of a detection error whose received amplitude still meets
/// the target, for a point received at exactly the target SNR `ζ` with its
/// offset uniform over `[-φ, φ]`.
///
/// The received-amplitude integral runs over `v ≥ √(σ²ζ)`; as `ζ → 0` this
/// reduces to the strict SER.
pub fn ser_above_target(zeta: f64, noise_power: f64, order: usize, phi: f64) -> Result<f64> {
    check_common(zeta, noise_power, order)?;
    if !(zeta > 0.0) {
        return Err(Error::param("SNR target must be positive"));
    }
    if !(phi >= 0.0 && phi <= PI / order as f64 + 1e-12) {
        return Err(Error::param("margin outside [0, π/M]"));
    }
    let amp = (noise_power * zeta).sqrt();
    let at = |u: f64| wrong_sector_mass(|t| angle_density_above(t, amp, amp, noise_power), order, u);
    if phi == 0.0 {
        return at(0.0);
    }
    let failure = std::cell::Cell::new(None);
    let v = integrate(
        |u| match at(u) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e.to_string()));
                0.0
            }
        },
        0.0,
        phi,
        1e-14,
        1e-9,
    )?
    .value;
    if let Some(msg) = failure.take() {
        return Err(Error::Numerical(msg));
    }
    // Even in the offset, so the half-range average suffices.
    Ok(v / phi)
}

/// Wilson score interval `(centre, half-width)` at 95%.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (centre, half)
}

/// Monte-Carlo and analytic SER of one precoded symbol vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SerReport {
    /// Mean analytic SER over users, from each user's received SNR and offset.
    pub ser_analytic: f64,
    /// Aggregate Monte-Carlo SER over users and trials.
    pub ser_mc: f64,
    /// Half-width of the Wilson 95% interval of `ser_mc`.
    pub mc_ci95: f64,
    pub trials: u64,
    pub errors: u64,
    pub per_user_errors: Vec<u64>,
    /// Received power `|h_j x|²` per user.
    pub omega: Vec<f64>,
    /// Largest absolute offset from the symbol rays.
    pub phi: f64,
}

impl SerReport {
    pub fn user_ser(&self, user: usize) -> f64 {
        self.per_user_errors[user] as f64 / self.trials as f64
    }
}

/// Per-user analytic SER of a precoded symbol vector.
pub fn analytic_user_ser(sol: &PrecodeSolution, noise_power: f64) -> Result<Vec<f64>> {
    let order = sol.frame.constellation().order();
    (0..sol.amplitudes.len())
        .map(|j| {
            let offset = crate::constellation::wrap_angle(sol.received[j].arg() - sol.frame.angle(j));
            ser_any_offset(sol.amplitudes[j].powi(2), noise_power, order, offset)
        })
        .collect()
}

/// Add `CN(0, σ²)` to every noiseless received point `trials` times and
/// count detection errors.
pub fn mc_ser<R: Rng + ?Sized>(
    sol: &PrecodeSolution,
    noise_power: f64,
    trials: u64,
    rng: &mut R,
) -> Result<SerReport> {
    if trials == 0 {
        return Err(Error::param("at least one Monte-Carlo trial is required"));
    }
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(Error::param("noise power must be non-negative"));
    }
    let k = sol.received.len();
    let constellation = sol.frame.constellation();
    let mut per_user = vec![0u64; k];
    for _ in 0..trials {
        let y = add_noise(&sol.received, noise_power, rng)?;
        for j in 0..k {
            let wrong = match constellation.detect(y[j]) {
                Ok(m) => m != sol.frame.indices()[j],
                Err(Error::AmbiguousDetection) => true,
                Err(e) => return Err(e),
            };
            per_user[j] += u64::from(wrong);
        }
    }
    let errors: u64 = per_user.iter().sum();
    let n = trials * k as u64;
    let ser_analytic = if noise_power > 0.0 {
        analytic_user_ser(sol, noise_power)?.iter().sum::<f64>() / k as f64
    } else {
        0.0
    };
    let phi = sol.offsets.iter().fold(0.0, |m: f64, u| m.max(u.abs()));
    Ok(SerReport {
        ser_analytic,
        ser_mc: errors as f64 / n as f64,
        mc_ci95: wilson_interval(errors, n).1,
        trials,
        errors,
        per_user_errors: per_user,
        omega: sol.amplitudes.iter().map(|a| a * a).collect(),
        phi,
    })
}
