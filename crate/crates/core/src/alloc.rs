//! Allocation feasibility, binarization, the uniform contiguous baseline and
//! MRT beamformers.

use nalgebra::DMatrix;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{AllocMode, Allocation, Beamformers, Granularity};
use crate::C64;

pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;

/// Euclidean projection of `y` onto `{x ∈ [0,1]ⁿ : Σx ≤ 1}`.
///
/// The solution is `clamp(y − τ, 0, 1)` with `τ = 0` when the clamped point
/// already satisfies the sum, otherwise the unique `τ > 0` that makes the
/// sum exactly one. The sum is piecewise linear in τ with breakpoints at
/// `y_i − 1` and `y_i`, so τ is found exactly by scanning breakpoints.
pub fn project_capped_simplex(y: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = y.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    let tau = capped_simplex_shift(y);
    y.iter().map(|v| (v - tau).clamp(0.0, 1.0)).collect()
}

fn capped_simplex_shift(y: &[f64]) -> f64 {
    let total = |tau: f64| y.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let mut breaks: Vec<f64> = y
        .iter()
        .flat_map(|&v| [v - 1.0, v])
        .filter(|&b| b > 0.0)
        .collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite input"));
    breaks.dedup();
    // total() is non-increasing; find the segment where it crosses one.
    for pair in breaks.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let (f_lo, f_hi) = (total(lo), total(hi));
        if f_lo >= 1.0 && f_hi <= 1.0 {
            if f_lo == f_hi {
                return lo;
            }
            return lo + (f_lo - 1.0) * (hi - lo) / (f_lo - f_hi);
        }
    }
    *breaks.last().expect("non-empty")
}

/// Vector-Jacobian product of [`project_capped_simplex`] at `y`: maps
/// `∂L/∂x` to `∂L/∂y`. Entries at a bound have zero derivative; when the sum
/// constraint is active the free entries move by a common shift.
pub fn project_capped_simplex_vjp(y: &[f64], grad_x: &[f64]) -> Vec<f64> {
    let x = project_capped_simplex(y);
    let active = y.iter().map(|v| v.clamp(0.0, 1.0)).sum::<f64>() > 1.0;
    let free: Vec<bool> = x.iter().map(|&v| v > 0.0 && v < 1.0).collect();
    let n_free = free.iter().filter(|&&f| f).count();
    let shift = if active && n_free > 0 {
        free.iter()
            .zip(grad_x)
            .filter(|(f, _)| **f)
            .map(|(_, g)| g)
            .sum::<f64>()
            / n_free as f64
    } else {
        0.0
    };
    free.iter()
        .zip(grad_x)
        .map(|(&f, &g)| if f { g - shift } else { 0.0 })
        .collect()
}

/// Column-wise capped-simplex projection of a raw allocation matrix.
pub fn project_feasible(xi_raw: &DMatrix<f64>, granularity: Granularity) -> Allocation {
    let mut xi = xi_raw.clone();
    for mut col in xi.column_iter_mut() {
        let projected = project_capped_simplex(col.as_slice());
        col.copy_from_slice(&projected);
    }
    Allocation {
        xi,
        mode: AllocMode::Relaxed,
        granularity,
    }
}

/// Backward pass of [`project_feasible`].
pub fn project_feasible_vjp(xi_raw: &DMatrix<f64>, grad: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(xi_raw.nrows(), xi_raw.ncols());
    for c in 0..xi_raw.ncols() {
        let g = project_capped_simplex_vjp(xi_raw.column(c).as_slice(), grad.column(c).as_slice());
        out.column_mut(c).copy_from_slice(&g);
    }
    out
}

/// Assigns each unit to its largest relaxed share if that share reaches
/// `threshold`; ties go to the lowest user index.
pub fn binarize(xi: &Allocation, threshold: f64) -> Allocation {
    let mut out = DMatrix::zeros(xi.users(), xi.units());
    for (c, col) in xi.xi.column_iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in col.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        if let Some((k, v)) = best {
            if v >= threshold {
                out[(k, c)] = 1.0;
            }
        }
    }
    Allocation {
        xi: out,
        mode: AllocMode::Binary,
        granularity: xi.granularity,
    }
}

/// `⌊units/K⌋` consecutive units per user in index order; leftovers unassigned.
pub fn uniform_contiguous(
    users: usize,
    units: usize,
    granularity: Granularity,
) -> Result<Allocation> {
    if users == 0 || users > units {
        return Err(Error::InvalidInput(format!(
            "uniform allocation needs 1 <= K <= units, got K={users}, units={units}"
        )));
    }
    let share = units / users;
    let mut xi = DMatrix::zeros(users, units);
    for k in 0..users {
        for c in k * share..(k + 1) * share {
            xi[(k, c)] = 1.0;
        }
    }
    Ok(Allocation {
        xi,
        mode: AllocMode::Binary,
        granularity,
    })
}

/// Maximum-ratio transmission on the direct link with equal power split:
/// `w_k = √(P_t/K) h_kᴴ / ‖h_k‖`.
pub fn mrt_beamformers(ch: &ChannelSet, pt_linear: f64) -> Result<Beamformers> {
    let k = ch.num_ues();
    let amp = (pt_linear / k as f64).sqrt();
    let mut w = ch.h_direct.map(|c| c.conj());
    for (user, mut row) in w.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroChannel { user });
        }
        row *= C64::from(amp / norm);
    }
    Ok(Beamformers { w })
}
