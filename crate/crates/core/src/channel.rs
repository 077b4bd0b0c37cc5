//! Rayleigh block-fading channels, complex AWGN and reproducible random streams.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::constellation::C64;
use crate::error::{Error, Result};

/// A `(seed, stream)` pair naming one independent ChaCha8 sequence.
///
/// Monte-Carlo consumers derive one stream per trial, so results do not depend
/// on how trials are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Stream for trial `trial` within the sub-experiment `purpose`.
    pub fn for_trial(seed: u64, purpose: u32, trial: u64) -> Self {
        Self {
            seed,
            stream: (u64::from(purpose) << 40) | (trial & ((1 << 40) - 1)),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draw from CN(0, variance).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(scale * re, scale * im)
}

/// K×M downlink channel; row `j` is the channel `h_j` of user `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    h: DMatrix<C64>,
    channel_power: f64,
}

impl ChannelMatrix {
    pub fn new(h: DMatrix<C64>, channel_power: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::param("channel matrix must be at least 1×1"));
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("channel matrix has non-finite entries"));
        }
        if let Some(j) = (0..h.nrows()).find(|&j| h.row(j).norm() == 0.0) {
            return Err(Error::param(format!("channel row {j} is all zeros")));
        }
        Ok(Self { h, channel_power })
    }

    /// Build from row-major user channels.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let k = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::param("channel rows have unequal lengths"));
        }
        let h = DMatrix::from_fn(k, m, |i, j| rows[i][j]);
        Self::new(h, 1.0)
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn channel_power(&self) -> f64 {
        self.channel_power
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.h
    }

    pub fn row(&self, user: usize) -> RowDVector<C64> {
        self.h.row(user).into_owned()
    }

    pub fn row_norm(&self, user: usize) -> f64 {
        self.h.row(user).norm()
    }

    /// Noiseless received samples `H x`.
    pub fn apply(&self, x: &DVector<C64>) -> Vec<C64> {
        (&self.h * x).iter().copied().collect()
    }

    /// Scale every entry by `factor` (channel power scales by `factor²`).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h: self.h.map(|z| z * factor),
            channel_power: self.channel_power * factor * factor,
        }
    }
}

/// i.i.d. CN(0, channel_power) entries.
pub fn draw_channel<R: Rng + ?Sized>(
    users: usize,
    antennas: usize,
    channel_power: f64,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    if !(channel_power > 0.0) || !channel_power.is_finite() {
        return Err(Error::param(format!(
            "channel power must be positive, got {channel_power}"
        )));
    }
    if users == 0 || antennas == 0 {
        return Err(Error::param("channel needs at least one user and one antenna"));
    }
    // Row-major draw order so that the first user's channel is drawn first.
    let mut entries = vec![C64::new(0.0, 0.0); users * antennas];
    for e in entries.iter_mut() {
        *e = complex_gaussian(rng, channel_power);
    }
    let h = DMatrix::from_row_slice(users, antennas, &entries);
    ChannelMatrix::new(h, channel_power)
}

/// Add independent CN(0, noise_power) samples; zero power is the identity.
pub fn add_noise<R: Rng + ?Sized>(y: &[C64], noise_power: f64, rng: &mut R) -> Result<Vec<C64>> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(Error::param(format!(
            "noise power must be non-negative, got {noise_power}"
        )));
    }
    if noise_power == 0.0 {
        return Ok(y.to_vec());
    }
    Ok(y.iter()
        .map(|&s| s + complex_gaussian(rng, noise_power))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let s = RngStream::new(7, 3);
        let a = draw_channel(2, 3, 1.0, &mut s.rng()).unwrap();
        let b = draw_channel(2, 3, 1.0, &mut s.rng()).unwrap();
        assert_eq!(a.users(), 2);
        assert_eq!(a.antennas(), 3);
        assert_eq!(a, b);
        let c = draw_channel(2, 3, 1.0, &mut RngStream::new(7, 4).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_power() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(draw_channel(2, 2, 0.0, &mut rng).is_err());
        assert!(draw_channel(2, 2, -1.0, &mut rng).is_err());
        assert!(draw_channel(2, 2, f64::NAN, &mut rng).is_err());
        assert!(add_noise(&[C64::new(1.0, 0.0)], -1.0, &mut rng).is_err());
    }

    #[test]
    fn zero_row_rejected() {
        let rows = vec![
            vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)],
            vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        ];
        assert!(ChannelMatrix::from_rows(&rows).is_err());
    }

    #[test]
    fn entry_power_matches_law_of_large_numbers() {
        let mut rng = RngStream::new(11, 0).rng();
        let power = 2.5;
        let mut acc = 0.0;
        let mut n = 0usize;
        while n < 1_000_000 {
            let h = draw_channel(4, 5, power, &mut rng).unwrap();
            acc += h.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += 20;
        }
        let mean = acc / n as f64;
        assert!((mean / power - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_noise_is_identity() {
        let y = vec![C64::new(0.3, -1.2), C64::new(2.0, 0.5)];
        let out = add_noise(&y, 0.0, &mut RngStream::new(1, 1).rng()).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn noise_moments() {
        let mut rng = RngStream::new(5, 9).rng();
        let sigma2 = 0.7;
        let n = 1_000_000;
        let y = vec![C64::new(0.0, 0.0); n];
        let z = add_noise(&y, sigma2, &mut rng).unwrap();
        let var = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((var / sigma2 - 1.0).abs() < 0.01, "var {var}");
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for v in &z {
            sxx += v.re * v.re;
            syy += v.im * v.im;
            sxy += v.re * v.im;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn streams_are_uncorrelated() {
        let mut a = RngStream::new(99, 0).rng();
        let mut b = RngStream::new(99, 1).rng();
        let n = 200_000;
        let xa: Vec<f64> = (0..n).map(|_| a.sample(StandardNormal)).collect();
        let xb: Vec<f64> = (0..n).map(|_| b.sample(StandardNormal)).collect();
        let cross = xa.iter().zip(&xb).map(|(p, q)| p * q).sum::<f64>() / n as f64;
        let lag1 = xa.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        // 5σ for a unit-variance product mean over n samples.
        let bound = 5.0 / (n as f64).sqrt();
        assert!(cross.abs() < bound, "cross {cross}");
        assert!(lag1.abs() < bound, "lag {lag1}");
    }

    #[test]
    fn trial_streams_are_distinct() {
        let a = RngStream::for_trial(1, 0, 5);
        let b = RngStream::for_trial(1, 1, 5);
        let c = RngStream::for_trial(1, 0, 6);
        assert_ne!(a.stream, b.stream);
        assert_ne!(a.stream, c.stream);
    }
}
