//! Grid-plus-refinement searches over received-phase offsets.
//!
//! Costs are minimised; ties within a relative `1e-12` go to the candidate
//! with the smaller largest offset.

use super::PhaseMargin;
use crate::error::{Error, Result};
use crate::search::golden_section;

/// Angle tolerance of the golden-section refinement.
pub(crate) const REFINE_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 50;
const MAX_BOX_STARTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct OffsetSearch {
    pub offsets: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
    pub grid_points: usize,
}

/// Multiples of `step` inside `[-lower, upper]` plus both endpoints, ascending.
pub(crate) fn offset_grid(lower: f64, upper: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param(format!("grid step {step} must be positive")));
    }
    if !(lower >= 0.0 && upper >= 0.0) {
        return Err(Error::param("empty offset grid"));
    }
    let lo = -(lower / step + 1e-9).floor() as i64;
    let hi = (upper / step + 1e-9).floor() as i64;
    let mut grid: Vec<f64> = Vec::with_capacity((hi - lo + 3) as usize);
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-9 * step;
    if !near(lo as f64 * step, -lower) {
        grid.push(-lower);
    }
    for i in lo..=hi {
        grid.push((i as f64 * step).clamp(-lower, upper));
    }
    if !near(hi as f64 * step, upper) {
        grid.push(upper);
    }
    grid.dedup();
    Ok(grid)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `a` beats `b` given their costs and tie-break keys.
fn better(cost_a: f64, key_a: f64, cost_b: f64, key_b: f64) -> bool {
    let scale = cost_a.abs().max(cost_b.abs());
    if cost_a < cost_b - TIE_TOL * scale {
        true
    } else if cost_a <= cost_b + TIE_TOL * scale {
        key_a < key_b - 1e-15
    } else {
        false
    }
}

fn grid_size(lens: &[usize], limit: usize) -> Result<usize> {
    lens.iter().try_fold(1usize, |acc, &n| {
        acc.checked_mul(n).filter(|&s| s <= limit).ok_or_else(|| {
            Error::Capacity(format!(
                "offset grid with axes {lens:?} exceeds {limit} candidates; use equal-margin mode or a coarser step"
            ))
        })
    })
}

/// Visit every point of the Cartesian product of `axes` in lexicographic order.
fn for_each_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[usize], &[f64]) -> Result<()>) -> Result<()> {
    let dims = axes.len();
    let mut idx = vec![0usize; dims];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        visit(&idx, &point)?;
        let mut d = dims;
        loop {
            if d == 0 {
                return Ok(());
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                point[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            point[d] = axes[d][0];
        }
    }
}

/// Shift the relative offsets `[0, r_1, …]` so their range is centred on zero.
pub(crate) fn centred(relative: &[f64], phi: f64) -> Vec<f64> {
    let full: Vec<f64> = std::iter::once(0.0).chain(relative.iter().copied()).collect();
    let max = full.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = full.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = -0.5 * (max + min);
    full.iter().map(|u| (u + shift).clamp(-phi, phi)).collect()
}

fn spread(relative: &[f64]) -> f64 {
    let max = relative.iter().cloned().fold(0.0, f64::max);
    let min = relative.iter().cloned().fold(0.0, f64::min);
    max - min
}

/// Search offsets `u_j ∈ [-φ, φ]` for `users` users when the cost depends
/// only on the differences `u_j - u_0`.
///
/// The search runs over the relative offsets `r_j = u_j - u_0` with range at
/// most `2φ`, and `cost` is always evaluated at the centred representative.
pub(crate) fn search_shared_margin<F>(
    users: usize,
    phi: f64,
    step: f64,
    limit: usize,
    mut cost: F,
) -> Result<OffsetSearch>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if users == 0 {
        return Err(Error::param("no users"));
    }
    let axis = offset_grid(2.0 * phi, 2.0 * phi, step)?;
    if users == 1 || phi == 0.0 {
        let offsets = vec![0.0; users];
        let c = cost(&offsets)?;
        return Ok(OffsetSearch {
            offsets,
            cost: c,
            evaluations: 1,
            grid_points: 1,
        });
    }
    let dims = users - 1;
    let axes = vec![axis; dims];
    grid_size(&vec![axes[0].len(); dims], limit)?;
    let width = 2.0 * phi * (1.0 + 1e-12);
    let mut evaluations = 0;
    let mut points: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut eval = |r: &[f64], evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        cost(&centred(r, phi))
    };
    for_each_point(&axes, |_, r| {
        if spread(r) > width {
            return Ok(());
        }
        let c = eval(r, &mut evaluations)?;
        if best
            .as_ref()
            .is_none_or(|(br, bc)| better(c, spread(r), *bc, spread(br)))
        {
            best = Some((r.to_vec(), c));
        }
        if dims == 1 {
            points.push((r.to_vec(), c));
        }
        Ok(())
    })?;
    let grid_points = evaluations;
    let (mut best_r, mut best_c) = best.expect("grid contains the origin");

    if dims == 1 {
        // Refine around every local minimum of the sampled curve.
        let n = points.len();
        for i in 0..n {
            let c = points[i].1;
            let left_ok = i == 0 || c <= points[i - 1].1;
            let right_ok = i + 1 == n || c <= points[i + 1].1;
            if !(left_ok && right_ok) {
                continue;
            }
            let a = if i == 0 { points[0].0[0] } else { points[i - 1].0[0] };
            let b = if i + 1 == n { points[n - 1].0[0] } else { points[i + 1].0[0] };
            let mut evals = 0;
            let (r, c, _) = golden_section(|t| eval(&[t], &mut evals), a, b, REFINE_TOL)?;
            evaluations += evals;
            if better(c, r.abs(), best_c, spread(&best_r)) {
                best_r = vec![r];
                best_c = c;
            }
        }
    } else {
        for _ in 0..MAX_SWEEPS {
            let before = best_c;
            for j in 0..dims {
                let others: Vec<f64> = (0..dims).filter(|&i| i != j).map(|i| best_r[i]).collect();
                let hi_o = others.iter().cloned().fold(0.0, f64::max);
                let lo_o = others.iter().cloned().fold(0.0, f64::min);
                let a = (hi_o - 2.0 * phi).max(best_r[j] - step);
                let b = (lo_o + 2.0 * phi).min(best_r[j] + step);
                if !(b > a) {
                    continue;
                }
                let mut trial = best_r.clone();
                let mut evals = 0;
                let (t, c, _) = golden_section(
                    |t| {
                        trial[j] = t;
                        eval(&trial, &mut evals)
                    },
                    a,
                    b,
                    REFINE_TOL,
                )?;
                evaluations += evals;
                let mut cand = best_r.clone();
                cand[j] = t;
                if better(c, spread(&cand), best_c, spread(&best_r)) {
                    best_r = cand;
                    best_c = c;
                }
            }
            if !(best_c < before - 1e-14 * before.abs()) {
                break;
            }
        }
    }
    Ok(OffsetSearch {
        offsets: centred(&best_r, phi),
        cost: best_c,
        evaluations,
        grid_points,
    })
}

/// Search the box `Π_j [-lower_j, upper_j]` on a per-user grid, then refine
/// coordinate-wise from the best grid local minima.
pub(crate) fn search_box<F>(
    margins: &[PhaseMargin],
    step: f64,
    limit: usize,
    mut cost: F,
) -> Result<OffsetSearch>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let axes = margins
        .iter()
        .map(|m| offset_grid(m.lower, m.upper, step))
        .collect::<Result<Vec<_>>>()?;
    let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
    let total = grid_size(&lens, limit)?;
    let mut values = Vec::with_capacity(total);
    for_each_point(&axes, |_, u| {
        values.push(cost(u)?);
        Ok(())
    })?;
    let mut evaluations = total;

    // Strides for flat indexing in lexicographic order.
    let dims = axes.len();
    let mut strides = vec![1usize; dims];
    for d in (0..dims.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * lens[d + 1];
    }
    let point_of = |flat: usize| -> Vec<f64> {
        (0..dims).map(|d| axes[d][(flat / strides[d]) % lens[d]]).collect()
    };

    // Grid local minima over the 3^K neighbourhood.
    let mut starts: Vec<usize> = (0..total)
        .filter(|&flat| {
            let idx: Vec<usize> = (0..dims).map(|d| (flat / strides[d]) % lens[d]).collect();
            let mut ok = true;
            let n_nb = 3usize.pow(dims as u32);
            for code in 0..n_nb {
                let mut off = code;
                let mut nb = 0usize;
                let mut valid = true;
                for d in 0..dims {
                    let delta = (off % 3) as i64 - 1;
                    off /= 3;
                    let i = idx[d] as i64 + delta;
                    if i < 0 || i >= lens[d] as i64 {
                        valid = false;
                        break;
                    }
                    nb += i as usize * strides[d];
                }
                if valid && nb != flat && values[nb] < values[flat] {
                    ok = false;
                    break;
                }
            }
            ok
        })
        .collect();
    starts.sort_by(|&a, &b| {
        values[a]
            .total_cmp(&values[b])
            .then(max_abs(&point_of(a)).total_cmp(&max_abs(&point_of(b))))
            .then(a.cmp(&b))
    });
    starts.truncate(MAX_BOX_STARTS);

    let mut best_u = point_of(starts[0]);
    let mut best_c = values[starts[0]];
    for &start in &starts {
        let mut cur = point_of(start);
        let mut cur_c = values[start];
        for _ in 0..MAX_SWEEPS {
            let before = cur_c;
            for j in 0..dims {
                let a = (cur[j] - step).max(-margins[j].lower);
                let b = (cur[j] + step).min(margins[j].upper);
                if !(b > a) {
                    continue;
                }
                let mut trial = cur.clone();
                let (t, c, evals) = golden_section(
                    |t| {
                        trial[j] = t;
                        cost(&trial)
                    },
                    a,
                    b,
                    REFINE_TOL,
                )?;
                evaluations += evals;
                let mut cand = cur.clone();
                cand[j] = t;
                if better(c, max_abs(&cand), cur_c, max_abs(&cur)) {
                    cur = cand;
                    cur_c = c;
                }
            }
            if !(cur_c < before - 1e-14 * before.abs()) {
                break;
            }
        }
        if better(cur_c, max_abs(&cur), best_c, max_abs(&best_u)) {
            best_u = cur;
            best_c = cur_c;
        }
    }
    Ok(OffsetSearch {
        offsets: best_u,
        cost: best_c,
        evaluations,
        grid_points: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_contains_endpoints_and_zero() {
        let g = offset_grid(0.5, 0.5, 0.2).unwrap();
        assert_eq!(g.first(), Some(&-0.5));
        assert_eq!(g.last(), Some(&0.5));
        assert!(g.contains(&0.0));
        assert_eq!(g.len(), 7);
        let exact = offset_grid(0.4, 0.2, 0.2).unwrap();
        assert_eq!(exact.len(), 4);
        assert!(offset_grid(0.0, 0.0, 0.1).unwrap() == vec![0.0]);
        assert!(offset_grid(0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn centring_minimises_largest_offset() {
        let u = centred(&[0.3], 0.2);
        assert!((u[0] + 0.15).abs() < 1e-15 && (u[1] - 0.15).abs() < 1e-15);
        let u = centred(&[-0.1, 0.2], 0.2);
        assert!((u[0] + 0.05).abs() < 1e-15);
    }

    #[test]
    fn shared_margin_finds_interior_minimum() {
        // Cost depends on the difference only, minimised at u1 - u0 = 0.123.
        let s = search_shared_margin(2, 0.3, 0.01, 1_000_000, |u| Ok((u[1] - u[0] - 0.123).powi(2) + 1.0)).unwrap();
        assert!((s.offsets[1] - s.offsets[0] - 0.123).abs() < 1e-6);
        assert!((s.offsets[0] + s.offsets[1]).abs() < 1e-12);
    }

    #[test]
    fn shared_margin_three_users() {
        let s = search_shared_margin(3, 0.3, 0.02, 1_000_000, |u| {
            Ok((u[1] - u[0] - 0.1).powi(2) + (u[2] - u[0] + 0.2).powi(2))
        })
        .unwrap();
        assert!((s.offsets[1] - s.offsets[0] - 0.1).abs() < 1e-5);
        assert!((s.offsets[2] - s.offsets[0] + 0.2).abs() < 1e-5);
    }

    #[test]
    fn box_search_minimum_and_guard() {
        let m = [PhaseMargin::symmetric(0.4), PhaseMargin { lower: 0.1, upper: 0.3 }];
        let s = search_box(&m, 0.05, 1_000_000, |u| Ok((u[0] - 0.17).powi(2) + (u[1] + 0.5).powi(2))).unwrap();
        assert!((s.offsets[0] - 0.17).abs() < 1e-6);
        assert_eq!(s.offsets[1], -0.1);
        let err = search_box(&m, 1e-4, 1000, |_| Ok(0.0)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn tie_break_prefers_small_offsets() {
        let m = [PhaseMargin::symmetric(0.2), PhaseMargin::symmetric(0.2)];
        let s = search_box(&m, 0.1, 1000, |_| Ok(1.0)).unwrap();
        assert_eq!(s.offsets, vec![0.0, 0.0]);
    }
}
