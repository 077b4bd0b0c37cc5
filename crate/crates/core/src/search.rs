//! One-dimensional bounded minimisation used by the phase searches.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns the best abscissa seen together with its value; `f` is assumed
/// unimodal on the bracket. The endpoints are evaluated as well so that
/// a monotone objective returns the boundary.
pub fn golden_section<F, E>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64, usize), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut evals = 0;
    let mut eval = |x: f64, evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut best_x = lo;
    let mut best_f = eval(lo, &mut evals)?;
    let fhi = eval(hi, &mut evals)?;
    if fhi < best_f {
        best_x = hi;
        best_f = fhi;
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1, &mut evals)?;
    let mut f2 = eval(x2, &mut evals)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1, &mut evals)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2, &mut evals)?;
        }
    }
    for (x, fx) in [(x1, f1), (x2, f2)] {
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
    }
    Ok((best_x, best_f, evals))
}

/// Nelder–Mead simplex minimisation of `f` from `start`.
///
/// `scale` sets the initial simplex edge along each axis. Stops when the
/// spread of simplex values falls below `tol` relative to the best value or
/// after `max_iter` iterations.
pub fn nelder_mead<F>(mut f: F, start: &[f64], scale: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale;
        let v = f(&p);
        simplex.push((p, v));
    }
    let point = |c: &[f64], p: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(p).map(|(ci, pi)| ci + t * (pi - ci)).collect()
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * best.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let reflected = point(&centroid, &simplex[n].0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = point(&centroid, &simplex[n].0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 {
                point(&centroid, &reflected, 0.5)
            } else {
                point(&centroid, &simplex[n].0, 0.5)
            };
            let fc = f(&contracted);
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (contracted, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p = point(&anchor, &entry.0, 0.5);
                    let v = f(&p);
                    *entry = (p, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
