//! M-PSK constellations, angular detection regions and minimum-angle detection.
//!
//! All angle arithmetic is carried out modulo 2π with the representative in
//! (−π, π]; sector membership is always tested on wrapped differences.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::Complex;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Slack used when comparing angles against sector edges.
pub const ANGLE_TOL: f64 = 1e-12;

/// Wrap an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Unit-modulus M-PSK alphabet `e^{i(2πm/M + θ0)}`, sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    offset: f64,
    points: Vec<C64>,
}

impl Constellation {
    /// PSK alphabet with the conventional offset: π/4 for QPSK (points
    /// (±1±i)/√2), zero otherwise.
    pub fn psk(order: usize) -> Result<Self> {
        let offset = if order == 4 { FRAC_PI_4 } else { 0.0 };
        Self::with_offset(order, offset)
    }

    pub fn bpsk() -> Self {
        Self::psk(2).expect("order 2 is valid")
    }

    pub fn qpsk() -> Self {
        Self::psk(4).expect("order 4 is valid")
    }

    pub fn with_offset(order: usize, offset: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::param(format!("PSK order must be >= 2, got {order}")));
        }
        if !offset.is_finite() {
            return Err(Error::param("constellation offset must be finite"));
        }
        let step = TAU / order as f64;
        let points = (0..order)
            .map(|m| C64::from_polar(1.0, step * m as f64 + offset))
            .collect();
        Ok(Self {
            order,
            offset,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    /// Angle of point `index`, wrapped.
    pub fn angle(&self, index: usize) -> f64 {
        wrap_angle(TAU * index as f64 / self.order as f64 + self.offset)
    }

    /// Half-width π/M of the strict detection sector.
    pub fn half_width(&self) -> f64 {
        PI / self.order as f64
    }

    /// Nominal rate log2(M) in bits per symbol.
    pub fn bits_per_symbol(&self) -> f64 {
        (self.order as f64).log2()
    }

    /// Index of the point with the smallest angular distance to `y`.
    /// Ties on a sector boundary resolve to the lower index.
    pub fn detect(&self, y: C64) -> Result<usize> {
        if y.re == 0.0 && y.im == 0.0 {
            return Err(Error::AmbiguousDetection);
        }
        if !y.re.is_finite() || !y.im.is_finite() {
            return Err(Error::param("received sample is not finite"));
        }
        let angle = y.arg();
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for m in 0..self.order {
            let dist = wrap_angle(angle - self.angle(m)).abs();
            if dist < best_dist - ANGLE_TOL {
                best = m;
                best_dist = dist;
            }
        }
        Ok(best)
    }

    /// Index of the constellation point equal to `symbol`, if any.
    pub fn index_of(&self, symbol: C64) -> Option<usize> {
        self.points
            .iter()
            .position(|p| (p - symbol).norm() < 1e-9)
    }

    /// Strict sector of point `index`.
    pub fn detection_region(&self, index: usize) -> DetectionRegion {
        DetectionRegion {
            center: self.angle(index),
            half_width: self.half_width(),
        }
    }

    /// Relaxed target region `[∠d − lower, ∠d + upper]` around point `index`.
    /// Both margins must lie in `[0, π/M]`.
    pub fn sector_of(&self, index: usize, lower: f64, upper: f64) -> Result<DetectionRegion> {
        if index >= self.order {
            return Err(Error::param(format!(
                "symbol index {index} out of range for order {}",
                self.order
            )));
        }
        let limit = self.half_width();
        for m in [lower, upper] {
            if !(0.0..=limit + ANGLE_TOL).contains(&m) {
                return Err(Error::param(format!(
                    "phase margin {m} outside [0, π/M = {limit}]"
                )));
            }
        }
        Ok(DetectionRegion {
            center: wrap_angle(self.angle(index) + 0.5 * (upper - lower)),
            half_width: 0.5 * (lower + upper),
        })
    }
}

/// An angular sector `[center − half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRegion {
    pub center: f64,
    pub half_width: f64,
}

impl DetectionRegion {
    pub fn lower(&self) -> f64 {
        wrap_angle(self.center - self.half_width)
    }

    pub fn upper(&self) -> f64 {
        wrap_angle(self.center + self.half_width)
    }

    /// Whether the angle lies in the closed sector, up to `tol`.
    pub fn contains_angle(&self, angle: f64, tol: f64) -> bool {
        wrap_angle(angle - self.center).abs() <= self.half_width + tol
    }

    pub fn contains(&self, z: C64, tol: f64) -> bool {
        z.norm() > 0.0 && self.contains_angle(z.arg(), tol)
    }
}

/// One symbol per user, all from the same constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    constellation: Constellation,
    indices: Vec<usize>,
}

impl SymbolFrame {
    pub fn new(constellation: Constellation, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("symbol frame must contain at least one user"));
        }
        if let Some(&bad) = indices.iter().find(|&&m| m >= constellation.order()) {
            return Err(Error::param(format!(
                "symbol index {bad} out of range for order {}",
                constellation.order()
            )));
        }
        Ok(Self {
            constellation,
            indices,
        })
    }

    /// Uniformly random symbols for `users` users.
    pub fn random<R: Rng + ?Sized>(constellation: Constellation, users: usize, rng: &mut R) -> Self {
        let indices = (0..users)
            .map(|_| rng.random_range(0..constellation.order()))
            .collect();
        Self {
            constellation,
            indices,
        }
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn symbol(&self, user: usize) -> C64 {
        self.constellation.point(self.indices[user])
    }

    pub fn symbols(&self) -> Vec<C64> {
        self.indices
            .iter()
            .map(|&m| self.constellation.point(m))
            .collect()
    }

    pub fn angle(&self, user: usize) -> f64 {
        self.constellation.angle(self.indices[user])
    }

    /// Multiply every symbol by `e^{i·steps·2π/M}`.
    pub fn rotated(&self, steps: usize) -> Self {
        let m = self.constellation.order();
        Self {
            constellation: self.constellation.clone(),
            indices: self.indices.iter().map(|&i| (i + steps) % m).collect(),
        }
    }
}
