//! One-dimensional minimization on a closed interval.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub t: f64,
    pub value: f64,
}

/// Golden-section search for a minimizer of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { Minimum { t: x1, value: f1 } } else { Minimum { t: x2, value: f2 } })
}

/// Scans `points` equally spaced nodes of `[0, 1]`, then refines around the
/// best node with golden-section search. The returned minimum is never worse
/// than the best grid node; ties go to the smaller `t`.
pub fn grid_then_golden<F>(mut f: F, points: usize, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let points = points.max(2);
    let step = 1.0 / (points - 1) as f64;
    let mut best = Minimum { t: 0.0, value: f64::INFINITY };
    let mut best_j = 0;
    for j in 0..points {
        let t = if j == points - 1 { 1.0 } else { j as f64 * step };
        let v = f(t)?;
        if v < best.value {
            best = Minimum { t, value: v };
            best_j = j;
        }
    }
    let lo = best_j.saturating_sub(1) as f64 * step;
    let hi = ((best_j + 1).min(points - 1) as f64 * step).min(1.0);
    let refined = golden_section(&mut f, lo, hi, tol)?;
    Ok(if refined.value < best.value { refined } else { best })
}
