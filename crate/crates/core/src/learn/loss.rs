use nalgebra::DMatrix;

use crate::alloc::{project_feasible, project_feasible_vjp};
use crate::error::{Error, Result};
use crate::metrics::Objective;

#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Negative mean sum utility over the batch.
    pub loss: f64,
    /// Per-sample sum utility.
    pub utilities: Vec<f64>,
    /// ∂loss/∂θ, Q × L².
    pub d_theta: DMatrix<f64>,
    /// ∂loss/∂ξ̃ with respect to the raw (pre-projection) allocation.
    pub d_xi: DMatrix<f64>,
}

/// Reshapes a user-major row of length K·units into a K × units matrix.
pub fn unpack_allocation(row: &[f64], users: usize, units: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(users, units, row)
}

fn row_vec(m: &DMatrix<f64>, r: usize) -> Vec<f64> {
    m.row(r).iter().copied().collect()
}

/// Unsupervised loss of a batch. Each raw allocation row is projected onto
/// the feasible set before evaluation and gradients flow back through the
/// projection.
pub fn nn_loss(
    theta: &DMatrix<f64>,
    xi_raw: &DMatrix<f64>,
    objectives: &[&Objective],
) -> Result<LossOutput> {
    let q = objectives.len();
    if q == 0 || theta.nrows() != q || xi_raw.nrows() != q {
        return Err(Error::Dimension {
            context: "loss batch size",
            expected: q,
            found: theta.nrows().max(xi_raw.nrows()),
        });
    }
    let mut d_theta = DMatrix::zeros(q, theta.ncols());
    let mut d_xi = DMatrix::zeros(q, xi_raw.ncols());
    let mut utilities = Vec::with_capacity(q);
    for (r, obj) in objectives.iter().enumerate() {
        let (users, units) = (obj.users(), obj.units());
        if theta.ncols() != obj.elements() || xi_raw.ncols() != users * units {
            return Err(Error::Dimension {
                context: "loss sample width",
                expected: obj.elements() + users * units,
                found: theta.ncols() + xi_raw.ncols(),
            });
        }
        let raw = unpack_allocation(&row_vec(xi_raw, r), users, units);
        let alloc = project_feasible(&raw, obj.granularity());
        let ev = obj.evaluate(&row_vec(theta, r), &alloc.xi);
        let d_raw = project_feasible_vjp(&raw, &ev.d_xi);
        for (c, g) in ev.d_theta.iter().enumerate() {
            d_theta[(r, c)] = -g / q as f64;
        }
        for k in 0..users {
            for u in 0..units {
                d_xi[(r, k * units + u)] = -d_raw[(k, u)] / q as f64;
            }
        }
        utilities.push(ev.utility);
    }
    let loss = -utilities.iter().sum::<f64>() / q as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("batch loss {loss}")));
    }
    Ok(LossOutput {
        loss,
        utilities,
        d_theta,
        d_xi,
    })
}
