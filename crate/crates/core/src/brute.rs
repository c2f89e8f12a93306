//! Exhaustive oracle over discrete phases and column assignments.
//!
//! Every RIS column goes to one of the K users or, with `include_off`, to
//! nobody. Phases come from the grid `{0, π/(ν−1), …, π}`. For surfaces with
//! at most four elements each element gets its own phase; above that all
//! elements of a column share one grid phase.
//!
//! Configurations are numbered `assignment · ν^P + phase`, most significant
//! digit first (column 0 / phase slot 0), with user digits `0..K` and the
//! "off" digit `K`. The maximizer with the smallest number wins ties.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{AllocMode, Allocation, Granularity, Objective, PhaseConfig};

pub const DEFAULT_BUDGET: u64 = 10_000_000;
/// Largest element count for which phases are enumerated per element.
pub const PER_ELEMENT_LIMIT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteOptions {
    /// Phase levels ν ≥ 1.
    pub levels: usize,
    pub include_off: bool,
    pub budget: u64,
}

impl Default for BruteOptions {
    fn default() -> Self {
        Self {
            levels: 4,
            include_off: true,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BruteResult {
    pub phases: PhaseConfig,
    pub allocation: Allocation,
    pub utility: f64,
    pub evaluations: u64,
    /// True when all elements of a column shared one grid phase.
    pub column_shared_phases: bool,
}

/// The enumerated configuration space.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    users: usize,
    side: usize,
    levels: usize,
    choices: usize,
    phase_slots: usize,
    per_element: bool,
    assignments: u64,
    phase_combos: u64,
}

impl SearchSpace {
    pub fn new(obj: &Objective, opts: &BruteOptions) -> Result<Self> {
        if obj.granularity() != Granularity::Column {
            return Err(Error::InvalidInput(
                "brute force enumerates column assignments only".into(),
            ));
        }
        if opts.levels == 0 {
            return Err(Error::InvalidInput("phase levels must be >= 1".into()));
        }
        let users = obj.users();
        let side = obj.ris_side();
        let per_element = obj.elements() <= PER_ELEMENT_LIMIT;
        let phase_slots = if per_element { obj.elements() } else { side };
        let choices = users + usize::from(opts.include_off);

        let assignments = (choices as u128).checked_pow(side as u32);
        let phase_combos = (opts.levels as u128).checked_pow(phase_slots as u32);
        let count = match (assignments, phase_combos) {
            (Some(a), Some(p)) => a.saturating_mul(p),
            _ => u128::MAX,
        };
        if count > opts.budget as u128 {
            return Err(Error::BudgetExceeded {
                count,
                budget: opts.budget,
            });
        }
        Ok(Self {
            users,
            side,
            levels: opts.levels,
            choices,
            phase_slots,
            per_element,
            assignments: assignments.expect("within budget") as u64,
            phase_combos: phase_combos.expect("within budget") as u64,
        })
    }

    pub fn len(&self) -> u64 {
        self.assignments * self.phase_combos
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn per_element(&self) -> bool {
        self.per_element
    }

    fn grid_phase(&self, level: usize) -> f64 {
        if self.levels == 1 {
            0.0
        } else {
            level as f64 * PI / (self.levels - 1) as f64
        }
    }

    fn digits(mut index: u64, base: usize, count: usize) -> Vec<usize> {
        let mut out = vec![0; count];
        for slot in (0..count).rev() {
            out[slot] = (index % base as u64) as usize;
            index /= base as u64;
        }
        out
    }

    fn allocation(&self, assignment: u64) -> DMatrix<f64> {
        let mut xi = DMatrix::zeros(self.users, self.side);
        for (col, d) in Self::digits(assignment, self.choices, self.side)
            .into_iter()
            .enumerate()
        {
            if d < self.users {
                xi[(d, col)] = 1.0;
            }
        }
        xi
    }

    fn phases(&self, combo: u64) -> Vec<f64> {
        let levels = Self::digits(combo, self.levels, self.phase_slots);
        if self.per_element {
            levels.into_iter().map(|v| self.grid_phase(v)).collect()
        } else {
            levels
                .into_iter()
                .flat_map(|v| std::iter::repeat_n(self.grid_phase(v), self.side))
                .collect()
        }
    }

    /// Decodes configuration number `index`.
    pub fn config(&self, index: u64) -> (PhaseConfig, Allocation) {
        let (assignment, combo) = (index / self.phase_combos, index % self.phase_combos);
        (
            PhaseConfig::new(self.phases(combo)),
            Allocation {
                xi: self.allocation(assignment),
                mode: AllocMode::Binary,
                granularity: Granularity::Column,
            },
        )
    }
}

/// Exhaustive maximization of the sum utility. Work is split across
/// threads by assignment; the reduction keeps the smallest index among
/// maximizers, so the result equals a sequential scan.
pub fn brute_force(obj: &Objective, opts: &BruteOptions) -> Result<BruteResult> {
    let space = SearchSpace::new(obj, opts)?;
    let phase_table: Vec<Vec<f64>> = (0..space.phase_combos).map(|c| space.phases(c)).collect();

    let best = (0..space.assignments)
        .into_par_iter()
        .map(|a| {
            let xi = space.allocation(a);
            let mut best = (f64::NEG_INFINITY, u64::MAX);
            for (c, theta) in phase_table.iter().enumerate() {
                let u = obj.value(theta, &xi);
                if u > best.0 {
                    best = (u, a * space.phase_combos + c as u64);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |x, y| {
                if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                    y
                } else {
                    x
                }
            },
        );

    if !best.0.is_finite() {
        return Err(Error::NonFinite(format!("brute-force optimum {}", best.0)));
    }
    let (phases, allocation) = space.config(best.1);
    Ok(BruteResult {
        phases,
        allocation,
        utility: best.0,
        evaluations: space.len(),
        column_shared_phases: !space.per_element(),
    })
}
