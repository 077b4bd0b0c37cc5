//! Cross-user coupling coefficients and the constructive-interference test.

use nalgebra::{DVector, RowDVector};

use crate::constellation::{wrap_angle, C64};
use crate::error::{Error, Result};

/// Strict inequalities are evaluated with this slack; boundary cases are
/// classified as not constructive.
pub const CI_TOL: f64 = 1e-12;

/// Normalised coupling `ρ_jk = h_j w_k / (‖h_j‖ ‖w_k‖)`, so `|ρ| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingCoefficient(C64);

impl CouplingCoefficient {
    /// Wrap a raw value; the modulus must not exceed one.
    pub fn new(value: C64) -> Result<Self> {
        if value.norm() > 1.0 + CI_TOL {
            return Err(Error::param(format!(
                "coupling modulus {} exceeds one",
                value.norm()
            )));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> C64 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.conj())
    }
}

pub fn coupling(h: &RowDVector<C64>, w: &DVector<C64>) -> Result<CouplingCoefficient> {
    if h.len() != w.len() {
        return Err(Error::param("channel and precoder lengths differ"));
    }
    let (nh, nw) = (h.norm(), w.norm());
    if nh == 0.0 || nw == 0.0 {
        return Err(Error::param("coupling of a zero vector"));
    }
    let inner = (h * w)[(0, 0)];
    // Cauchy–Schwarz holds exactly; clip rounding overshoot.
    let mut rho = inner / (nh * nw);
    if rho.norm() > 1.0 {
        rho /= rho.norm();
    }
    Ok(CouplingCoefficient(rho))
}

/// Outcome of the constructive-interference test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interference {
    Constructive,
    NotConstructive,
    /// `ρ = 0`: there is no interference to exploit.
    Absent,
}

fn sign_agrees(reference: f64, value: f64) -> bool {
    // A zero component in the reference symbol (e.g. BPSK imaginary part)
    // imposes no sign requirement.
    if reference.abs() <= CI_TOL {
        return true;
    }
    reference * value > CI_TOL
}

/// Classify the interference symbol `d_k` causes at user `j` through `ρ_jk`.
///
/// Requires both the sector condition (`ρ_jk d_k` strictly inside the strict
/// sector of `d_j`, quadrant-aware) and the component sign conditions
/// `R{d_k}·R{ρ_jk d_j} > 0`, `I{d_k}·I{ρ_jk d_j} > 0`.
pub fn classify(d_j: C64, d_k: C64, rho: CouplingCoefficient, order: usize) -> Interference {
    let rho = rho.value();
    if rho.norm() <= CI_TOL {
        return Interference::Absent;
    }
    let half_width = std::f64::consts::PI / order as f64;
    let interferent = rho * d_k;
    let in_sector = wrap_angle(interferent.arg() - d_j.arg()).abs() < half_width - CI_TOL;
    let projected = rho * d_j;
    let signs = sign_agrees(d_k.re, projected.re) && sign_agrees(d_k.im, projected.im);
    if in_sector && signs {
        Interference::Constructive
    } else {
        Interference::NotConstructive
    }
}

pub fn is_constructive(d_j: C64, d_k: C64, rho: CouplingCoefficient, order: usize) -> bool {
    classify(d_j, d_k, rho, order) == Interference::Constructive
}

/// Whether the classification is the same in both directions `j ← k` and `k ← j`.
pub fn mutuality_check(
    d_j: C64,
    d_k: C64,
    rho_jk: CouplingCoefficient,
    rho_kj: CouplingCoefficient,
    order: usize,
) -> bool {
    is_constructive(d_j, d_k, rho_jk, order) == is_constructive(d_k, d_j, rho_kj, order)
}
