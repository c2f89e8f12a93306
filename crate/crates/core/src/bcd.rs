//! Relaxed joint optimization of phases and allocation by block coordinate
//! ascent.
//!
//! Each outer iteration runs a few projected-gradient steps on the phase
//! block (box projection onto `[0, π]`), then on the allocation block
//! (column-wise capped-simplex projection). Steps move along the gradient
//! normalized by its largest entry, so `step_size` is the largest coordinate
//! change of the first trial; a halving line search accepts the first trial
//! that does not decrease the objective, which makes the trace monotone.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::project_feasible;
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::metrics::{Allocation, Beamformers, Granularity, Objective, PhaseConfig};
use crate::rng;

const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcdOptions {
    pub max_outer_iters: usize,
    pub inner_steps_per_block: usize,
    pub step_size: f64,
    /// Relative objective change below which the outer loop stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            inner_steps_per_block: 10,
            step_size: 0.1,
            tol: 1e-5,
            seed: 0,
        }
    }
}

impl BcdOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidInput(format!(
                "step_size must be > 0, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Objective after initialization (entry 0) and after every outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BcdTrace {
    pub objective: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl BcdTrace {
    /// `iteration,objective,seconds`; timing is written as 0 when
    /// `with_timing` is false so the file depends only on the inputs.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from("iteration,objective,seconds\n");
        for (i, (f, s)) in self.objective.iter().zip(&self.seconds).enumerate() {
            let s = if with_timing { *s } else { 0.0 };
            writeln!(out, "{i},{f:.17e},{s:.6e}").expect("write to string");
        }
        out
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objective.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

#[derive(Debug, Clone)]
pub struct BcdResult {
    pub phases: PhaseConfig,
    pub allocation: Allocation,
    pub utility: f64,
    pub trace: BcdTrace,
    pub outer_iterations: usize,
}

/// Which blocks the optimizer updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Blocks {
    Both,
    PhasesOnly,
}

/// Analytic `(∂U/∂θ, ∂U/∂ξ)` of the sum utility.
pub fn objective_gradients(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    w: &Beamformers,
    alpha: f64,
    noise_linear: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let obj = Objective::new(ch, w, alpha, noise_linear, xi.granularity)?;
    if theta.len() != obj.elements() {
        return Err(Error::Dimension {
            context: "phase vector",
            expected: obj.elements(),
            found: theta.len(),
        });
    }
    if xi.xi.shape() != (obj.users(), obj.units()) {
        return Err(Error::Dimension {
            context: "allocation",
            expected: obj.users() * obj.units(),
            found: xi.xi.len(),
        });
    }
    let ev = obj.evaluate(&theta.theta, &xi.xi);
    Ok((ev.d_theta, ev.d_xi))
}

/// Seeded start: phases uniform in `[0, π]`, allocation `1/K` everywhere.
pub fn initial_point(obj: &Objective, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let mut rng = rng::stream(seed, rng::STREAM_BCD_INIT);
    let theta = (0..obj.elements())
        .map(|_| rng.random::<f64>() * PI)
        .collect();
    let xi = DMatrix::from_element(obj.users(), obj.units(), 1.0 / obj.users() as f64);
    (theta, xi)
}

/// Full BCD from the seeded initial point.
pub fn bcd_optimize(obj: &Objective, opts: &BcdOptions) -> Result<BcdResult> {
    let (theta, xi) = initial_point(obj, opts.seed);
    bcd_optimize_from(obj, theta, xi, Blocks::Both, opts)
}

/// Phase-only BCD with the allocation held fixed (used for baselines).
pub fn optimize_phases(obj: &Objective, xi: &Allocation, opts: &BcdOptions) -> Result<BcdResult> {
    let (theta, _) = initial_point(obj, opts.seed);
    let mut res = bcd_optimize_from(obj, theta, xi.xi.clone(), Blocks::PhasesOnly, opts)?;
    res.allocation = xi.clone();
    Ok(res)
}

pub fn bcd_optimize_from(
    obj: &Objective,
    mut theta: Vec<f64>,
    xi: DMatrix<f64>,
    blocks: Blocks,
    opts: &BcdOptions,
) -> Result<BcdResult> {
    opts.validate()?;
    let granularity = obj.granularity();
    for t in theta.iter_mut() {
        *t = t.clamp(0.0, PI);
    }
    let mut xi = match blocks {
        Blocks::Both => project_feasible(&xi, granularity).xi,
        Blocks::PhasesOnly => xi,
    };

    let mut f = finite(obj.value(&theta, &xi), 0)?;
    let mut trace = BcdTrace {
        objective: vec![f],
        seconds: vec![0.0],
    };
    let mut outer = 0;
    while outer < opts.max_outer_iters {
        let start = Instant::now();
        outer += 1;
        let f_before = f;

        for _ in 0..opts.inner_steps_per_block {
            if !phase_step(obj, &mut theta, &xi, &mut f, opts.step_size) {
                break;
            }
        }
        if blocks == Blocks::Both {
            for _ in 0..opts.inner_steps_per_block {
                if !allocation_step(obj, &theta, &mut xi, &mut f, opts.step_size, granularity) {
                    break;
                }
            }
        }
        f = finite(f, outer)?;
        trace.objective.push(f);
        trace.seconds.push(start.elapsed().as_secs_f64());

        let rel = (f - f_before).abs() / f_before.abs().max(f64::MIN_POSITIVE);
        if rel < opts.tol {
            break;
        }
    }

    let allocation = match blocks {
        Blocks::Both => Allocation::relaxed(xi, granularity),
        Blocks::PhasesOnly => Allocation {
            xi,
            mode: crate::metrics::AllocMode::Binary,
            granularity,
        },
    };
    Ok(BcdResult {
        phases: PhaseConfig::new(theta),
        allocation,
        utility: f,
        trace,
        outer_iterations: outer,
    })
}

fn finite(f: f64, iteration: usize) -> Result<f64> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite(format!(
            "objective {f} after outer iteration {iteration}"
        )))
    }
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// One projected ascent step on the phases. Returns false when no
/// improving (or non-decreasing) move was found or the gradient vanished.
fn phase_step(
    obj: &Objective,
    theta: &mut Vec<f64>,
    xi: &DMatrix<f64>,
    f: &mut f64,
    step: f64,
) -> bool {
    let grad = obj.evaluate(theta, xi).d_theta;
    let scale = max_abs(grad.iter().copied());
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    let mut t = step / scale;
    for _ in 0..MAX_HALVINGS {
        let trial: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(x, g)| (x + t * g).clamp(0.0, PI))
            .collect();
        let f_trial = obj.value(&trial, xi);
        if f_trial >= *f {
            let moved = trial != *theta;
            *theta = trial;
            *f = f_trial;
            return moved;
        }
        t *= 0.5;
    }
    false
}

fn allocation_step(
    obj: &Objective,
    theta: &[f64],
    xi: &mut DMatrix<f64>,
    f: &mut f64,
    step: f64,
    granularity: Granularity,
) -> bool {
    let grad = obj.evaluate(theta, xi).d_xi;
    let scale = max_abs(grad.iter().copied());
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    let mut t = step / scale;
    for _ in 0..MAX_HALVINGS {
        let trial = project_feasible(&(&*xi + &grad * t), granularity).xi;
        let f_trial = obj.value(theta, &trial);
        if f_trial >= *f {
            let moved = trial != *xi;
            *xi = trial;
            *f = f_trial;
            return moved;
        }
        t *= 0.5;
    }
    false
}

/// Per-iteration cost model `K²L² + KL²`.
pub fn bcd_complexity_estimate(users: u64, side: u64) -> u64 {
    users * users * side * side + users * side * side
}
