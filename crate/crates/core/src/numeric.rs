//! Scalar root finding and one-dimensional maximization.

use crate::error::{Error, Result};

/// Bisection on a bracket with a sign change, stopping when the bracket
/// width falls below `rel_tol * max(|lo|, |hi|)`.
pub fn bisect<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::RootNotBracketed {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * a.abs().max(b.abs()) || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Scans `n` equal sub-intervals of `[lo, hi]` and returns the first one
/// across which `f` changes sign.
pub fn first_sign_change<F>(f: F, lo: f64, hi: f64, n: usize) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let n = n.max(1);
    let step = (hi - lo) / n as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + step * i as f64 };
        let f1 = f(x1);
        if f0 == 0.0 || f0.signum() != f1.signum() {
            return Some((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

/// Golden-section maximization on `[lo, hi]`. Ties go to the smaller
/// abscissa. Returns `(argmax, max)`.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, abs_tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = (c, fc);
    let consider = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx > best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    consider(d, fd, &mut best);
    for _ in 0..300 {
        if (b - a) <= abs_tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            consider(c, fc, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            consider(d, fd, &mut best);
        }
    }
    best
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Grid search followed by golden-section refinement inside the two cells
/// adjacent to the grid maximizer. The refined value is never worse than the
/// grid value.
pub fn refine_max_on_grid<F>(f: F, grid: &[f64], abs_tol: f64) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let i = argmax(&values)?;
    let grid_best = (grid[i], values[i]);
    if grid.len() < 2 {
        return Some(grid_best);
    }
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let refined = golden_section_max(&f, lo, hi, abs_tol);
    if refined.1 > grid_best.1 {
        Some(refined)
    } else {
        Some(grid_best)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
