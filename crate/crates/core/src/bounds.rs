//! Power lower bounds and conventional baseline precoders.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelMatrix;
use crate::constellation::{wrap_angle, SymbolFrame, C64};
use crate::error::{Error, Result};
use crate::linalg;
use crate::precoder::{PrecodeSolution, SolveStats};
use crate::search::nelder_mead;

/// Largest user count for the genie bound enumeration.
pub const MAX_GENIE_USERS: usize = 10;
/// Largest user count for the rank-one multicast search.
pub const MAX_MULTICAST_USERS: usize = 3;

fn floors(targets: &[f64], noise_power: f64) -> Result<Vec<f64>> {
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::param("noise power must be positive"));
    }
    targets
        .iter()
        .map(|&z| {
            if z.is_finite() && z > 0.0 {
                Ok((noise_power * z).sqrt())
            } else {
                Err(Error::param(format!("SNR target {z} must be positive")))
            }
        })
        .collect()
}

fn check_targets(channel: &ChannelMatrix, targets: &[f64]) -> Result<()> {
    if targets.len() != channel.users() {
        return Err(Error::param(format!(
            "{} targets for {} users",
            targets.len(),
            channel.users()
        )));
    }
    Ok(())
}

/// Normalised couplings `ξ_jk = h_j w_k / ‖h_j‖` between each user channel
/// and the orthonormal beam directions `w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenieCoupling {
    pub g_norms: Vec<f64>,
    pub xi: DMatrix<C64>,
    /// Beam directions as columns.
    pub beams: DMatrix<C64>,
}

impl GenieCoupling {
    /// Beams from the symmetric orthonormalisation of the matched filters
    /// `h_j^H / ‖h_j‖`, the orthonormal basis of the row space closest to them.
    pub fn new(channel: &ChannelMatrix) -> Result<Self> {
        let k = channel.users();
        let h = channel.matrix();
        let mut matched = h.adjoint();
        for j in 0..k {
            let n = channel.row_norm(j);
            matched.column_mut(j).iter_mut().for_each(|z| *z /= n);
        }
        let beams = linalg::orthonormalize_columns(&matched)?;
        let g_norms: Vec<f64> = (0..k).map(|j| channel.row_norm(j)).collect();
        let prod = h * &beams;
        let xi = DMatrix::from_fn(k, k, |j, kk| prod[(j, kk)] / g_norms[j]);
        if xi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1.0 + 1e-12) {
            return Err(Error::Numerical("genie coupling out of range".into()));
        }
        Ok(Self { g_norms, xi, beams })
    }

    /// Amplitude gains `‖g_j‖ |ξ_jk|`.
    pub fn gains(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.xi.nrows(), self.xi.ncols(), |j, k| {
            self.g_norms[j] * self.xi[(j, k)].norm()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenieBound {
    pub power: f64,
    /// Per-beam powers `p_k`.
    pub powers: Vec<f64>,
    /// Users whose amplitude constraint is tight.
    pub tight: Vec<usize>,
    pub coupling: GenieCoupling,
}

/// Genie-aided power lower bound.
///
/// Every transmit vector in the row space is `x = Σ_k c_k w_k` with
/// `‖x‖² = Σ |c_k|²`, and a genie that aligns all contributions in phase
/// gives user `j` amplitude `Σ_k ‖h_j‖|ξ_jk| |c_k|`. Minimising the power of
/// amplitudes `q_k = |c_k|` that meet `√(σ²ζ_j)` under this alignment
/// bounds every precoder whose received amplitudes meet the same floors.
pub fn genie_bound(channel: &ChannelMatrix, targets: &[f64], noise_power: f64) -> Result<GenieBound> {
    check_targets(channel, targets)?;
    let k = channel.users();
    if k > MAX_GENIE_USERS {
        return Err(Error::Capacity(format!(
            "genie bound enumeration supports at most {MAX_GENIE_USERS} users"
        )));
    }
    if k > channel.antennas() {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let s = floors(targets, noise_power)?;
    let coupling = GenieCoupling::new(channel)?;
    let c = coupling.gains();
    let q = min_norm_above(&c, &s)?;
    let amps = &c * DVector::from_vec(q.clone());
    let tight = (0..k).filter(|&j| amps[j] <= s[j] * (1.0 + 1e-9)).collect();
    Ok(GenieBound {
        power: q.iter().map(|v| v * v).sum(),
        powers: q.iter().map(|v| v * v).collect(),
        tight,
        coupling,
    })
}

/// `min ‖q‖²` subject to `C q ≥ s`, `q ≥ 0`, by enumerating the tight rows
/// and the zero variables.
fn min_norm_above(c: &DMatrix<f64>, s: &[f64]) -> Result<Vec<f64>> {
    let k = s.len();
    let n = c.ncols();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for tight_mask in 1u32..(1 << k) {
        let rows: Vec<usize> = (0..k).filter(|j| tight_mask & (1 << j) != 0).collect();
        for zero_mask in 0u32..(1 << n) {
            let cols: Vec<usize> = (0..n).filter(|j| zero_mask & (1 << j) == 0).collect();
            if cols.len() < rows.len() {
                continue;
            }
            let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, cc| c[(rows[r], cols[cc])]);
            let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&r| s[r]));
            let gram = &sub * sub.transpose();
            let Some(lambda) = linalg::solve_spd(gram, &rhs) else {
                continue;
            };
            let qf = sub.transpose() * lambda;
            if qf.iter().any(|v| !v.is_finite() || *v < -1e-12) {
                continue;
            }
            let mut q = vec![0.0; n];
            for (idx, &col) in cols.iter().enumerate() {
                q[col] = qf[idx].max(0.0);
            }
            let amps = c * DVector::from_vec(q.clone());
            if (0..k).any(|j| amps[j] < s[j] * (1.0 - 1e-10)) {
                continue;
            }
            let power: f64 = q.iter().map(|v| v * v).sum();
            if best.as_ref().is_none_or(|(p, _)| power < *p) {
                best = Some((power, q));
            }
        }
    }
    best.map(|(_, q)| q)
        .ok_or_else(|| Error::Infeasible("genie bound has no feasible beam powers".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticastBound {
    pub power: f64,
    /// Unit-norm beamforming direction.
    pub direction: DVector<C64>,
}

/// Unit-norm coefficients in the row-space basis from the angle parameters
/// `(β_1, ψ_1, β_2, ψ_2, …)` of a point on the complex sphere.
fn sphere_point(k: usize, params: &[f64]) -> DVector<C64> {
    let mut c = DVector::from_element(k, C64::new(0.0, 0.0));
    let mut radius = 1.0;
    for j in 0..k - 1 {
        let beta = params[2 * j];
        let phase = if j == 0 { 0.0 } else { params[2 * j - 1] };
        c[j] = C64::from_polar(radius * beta.cos(), phase);
        radius *= beta.sin();
    }
    let last_phase = if k == 1 { 0.0 } else { params[2 * k - 3] };
    c[k - 1] = C64::from_polar(radius, last_phase);
    c
}

/// Rank-one multicast lower bound: the least power of a single beam `√p w`
/// with `p |h_j w|² ≥ σ²ζ_j` for every user.
///
/// Searches unit vectors `w = U c` of the row space (`U` an orthonormal basis)
/// over a grid of the `2K − 2` sphere angles, then refines the best grid
/// points with Nelder–Mead.
pub fn multicast_rank1_bound(channel: &ChannelMatrix, targets: &[f64], noise_power: f64) -> Result<MulticastBound> {
    multicast_with_resolution(channel, targets, noise_power, 1)
}

/// As [`multicast_rank1_bound`], with the angle grid refined by `density`.
pub fn multicast_with_resolution(
    channel: &ChannelMatrix,
    targets: &[f64],
    noise_power: f64,
    density: usize,
) -> Result<MulticastBound> {
    check_targets(channel, targets)?;
    let k = channel.users();
    if k > MAX_MULTICAST_USERS {
        return Err(Error::Capacity(format!(
            "rank-one multicast search supports at most {MAX_MULTICAST_USERS} users"
        )));
    }
    if density == 0 {
        return Err(Error::param("grid density must be positive"));
    }
    let s2: Vec<f64> = floors(targets, noise_power)?.iter().map(|v| v * v).collect();
    let basis = linalg::orthonormalize_columns(&channel.matrix().adjoint())?;
    let g = channel.matrix() * &basis;
    let cost = |params: &[f64]| -> f64 {
        let c = sphere_point(k, params);
        let gc = &g * &c;
        (0..k)
            .map(|j| s2[j] / gc[j].norm_sqr())
            .fold(0.0, f64::max)
    };
    if k == 1 {
        let c = sphere_point(1, &[]);
        return Ok(MulticastBound {
            power: cost(&[]),
            direction: &basis * c,
        });
    }
    let (n_beta, n_psi) = match k {
        2 => (90 * density, 180 * density),
        _ => (18 * density, 36 * density),
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let dims = 2 * k - 2;
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dims);
    for d in 0..dims {
        let (n, span, closed) = if d % 2 == 0 { (n_beta, half_pi, true) } else { (n_psi, two_pi, false) };
        let count = if closed { n + 1 } else { n };
        axes.push((0..count).map(|i| span * i as f64 / n as f64).collect());
    }
    let mut samples: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; dims];
    loop {
        let p: Vec<f64> = (0..dims).map(|d| axes[d][idx[d]]).collect();
        samples.push((cost(&p), p));
        let mut d = dims;
        let done = loop {
            if d == 0 {
                break true;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break false;
            }
            idx[d] = 0;
        };
        if done {
            break;
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = half_pi / n_beta as f64;
    let mut best = samples[0].clone();
    for (_, start) in samples.iter().take(8) {
        let (p, v) = nelder_mead(cost, start, step, 1e-15, 4000);
        if v < best.0 {
            best = (v, p);
        }
    }
    let c = sphere_point(k, &best.1);
    Ok(MulticastBound {
        power: best.0,
        direction: &basis * c,
    })
}

fn baseline_solution(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    x: DVector<C64>,
    nu: Vec<C64>,
    floors: &[f64],
) -> PrecodeSolution {
    let received = channel.apply(&x);
    let amplitudes: Vec<f64> = received.iter().map(|z| z.norm()).collect();
    let offsets = received
        .iter()
        .enumerate()
        .map(|(j, z)| wrap_angle(z.arg() - frame.angle(j)))
        .collect();
    let active_set = (0..amplitudes.len())
        .filter(|&j| amplitudes[j] <= floors[j] * (1.0 + 1e-9))
        .collect();
    PrecodeSolution {
        power: x.norm_squared(),
        x,
        received,
        amplitudes,
        offsets,
        active_set,
        multipliers: nu,
        frame: frame.clone(),
        stats: SolveStats::default(),
    }
}

fn check_frame(channel: &ChannelMatrix, frame: &SymbolFrame) -> Result<()> {
    if frame.len() != channel.users() {
        return Err(Error::param(format!(
            "{} symbols for {} users",
            frame.len(),
            channel.users()
        )));
    }
    Ok(())
}

/// Zero-forcing: `x = H^H (H H^H)^{-1} diag(√(σ²ζ)) d`, so `h_j x = √(σ²ζ_j) d_j`.
pub fn zf_baseline(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    targets: &[f64],
    noise_power: f64,
) -> Result<PrecodeSolution> {
    check_targets(channel, targets)?;
    check_frame(channel, frame)?;
    let s = floors(targets, noise_power)?;
    let gram_inv = linalg::gram_inverse(channel)?;
    let y = DVector::from_iterator(s.len(), (0..s.len()).map(|j| frame.symbol(j) * s[j]));
    let nu = &gram_inv * &y;
    let x = channel.matrix().adjoint() * &nu;
    Ok(baseline_solution(channel, frame, x, nu.iter().copied().collect(), &s))
}

/// Matched-filter precoding `x = Σ_k q_k d_k h_k^H/‖h_k‖` with powers chosen so
/// that the worst case over interference phases still meets every target:
/// `‖h_j‖ q_j − Σ_{k≠j} |h_j h_k^H|/‖h_k‖ q_k = √(σ²ζ_j)`.
pub fn mrt_baseline(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    targets: &[f64],
    noise_power: f64,
) -> Result<PrecodeSolution> {
    check_targets(channel, targets)?;
    check_frame(channel, frame)?;
    let s = floors(targets, noise_power)?;
    let k = channel.users();
    let h = channel.matrix();
    let norms: Vec<f64> = (0..k).map(|j| channel.row_norm(j)).collect();
    let g = linalg::gram(h);
    let a = DMatrix::from_fn(k, k, |j, kk| {
        if j == kk {
            norms[j]
        } else {
            -g[(j, kk)].norm() / norms[kk]
        }
    });
    let q = linalg::solve_real(a, &DVector::from_vec(s.clone()))
        .filter(|q| q.iter().all(|v| *v > 0.0))
        .ok_or_else(|| Error::Infeasible("matched filtering cannot meet the targets under worst-case interference".into()))?;
    matched_filter_precoder(channel, frame, q.as_slice(), &s)
}

/// `x = Σ_k q_k d_k h_k^H/‖h_k‖` for given beam amplitudes `q`; `floors` only
/// decides which users are reported as tight.
pub fn matched_filter_precoder(
    channel: &ChannelMatrix,
    frame: &SymbolFrame,
    q: &[f64],
    floors: &[f64],
) -> Result<PrecodeSolution> {
    check_frame(channel, frame)?;
    let k = channel.users();
    if q.len() != k || floors.len() != k {
        return Err(Error::param("one beam amplitude and floor per user required"));
    }
    let h = channel.matrix();
    let norms: Vec<f64> = (0..k).map(|j| channel.row_norm(j)).collect();
    let mut x = DVector::from_element(channel.antennas(), C64::new(0.0, 0.0));
    for kk in 0..k {
        let w = h.row(kk).adjoint().unscale(norms[kk]);
        x += w * (frame.symbol(kk) * q[kk]);
    }
    let nu: Vec<C64> = (0..k).map(|kk| frame.symbol(kk) * (q[kk] / norms[kk])).collect();
    Ok(baseline_solution(channel, frame, x, nu, floors))
}
