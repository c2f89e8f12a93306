//! Objective stack: masked effective channel, SINR, normalized rate,
//! alpha-fair utility and alpha-mean throughput.
//!
//! Interference at user k is measured through k's own effective channel,
//! `I_k = Σ_{i≠k} |e_k w_i|²`, with unit-power symbols. Rates below
//! [`RATE_FLOOR`] are floored before any utility evaluation.
//!
//! [`Objective`] is the precomputed form used by every optimizer. It folds
//! the beamformers into per-element reflection coefficients so an evaluation
//! costs `O(K² L²)` and also yields exact gradients with respect to phases
//! and allocation.

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::{CMat, C64};

/// Rates are clamped to this value before utilities are taken.
pub const RATE_FLOOR: f64 = 1e-12;

/// RIS phases `θ_l ∈ [0, π]`, one per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub theta: Vec<f64>,
}

impl PhaseConfig {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn zeros(elements: usize) -> Self {
        Self {
            theta: vec![0.0; elements],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn in_range(&self) -> bool {
        self.theta
            .iter()
            .all(|t| (0.0..=std::f64::consts::PI).contains(t))
    }
}

/// Allocation unit: whole RIS columns (K×L) or single elements (K×L²).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Column,
    Element,
}

impl Granularity {
    pub fn units(self, ris_side: usize) -> usize {
        match self {
            Granularity::Column => ris_side,
            Granularity::Element => ris_side * ris_side,
        }
    }

    fn unit_of(self, element: usize, ris_side: usize) -> usize {
        match self {
            Granularity::Column => element / ris_side,
            Granularity::Element => element,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocMode {
    Relaxed,
    Binary,
}

/// RIS allocation `Ξ`: one row per user, one column per allocation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub xi: DMatrix<f64>,
    pub mode: AllocMode,
    pub granularity: Granularity,
}

impl Allocation {
    pub fn zeros(users: usize, units: usize, granularity: Granularity) -> Self {
        Self {
            xi: DMatrix::zeros(users, units),
            mode: AllocMode::Binary,
            granularity,
        }
    }

    pub fn relaxed(xi: DMatrix<f64>, granularity: Granularity) -> Self {
        Self {
            xi,
            mode: AllocMode::Relaxed,
            granularity,
        }
    }

    pub fn users(&self) -> usize {
        self.xi.nrows()
    }

    pub fn units(&self) -> usize {
        self.xi.ncols()
    }

    /// Checks the box, per-unit and total constraints (and integrality for
    /// binary allocations) within `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let box_ok = self.xi.iter().all(|&x| x >= -tol && x <= 1.0 + tol);
        let units_ok = self.xi.column_iter().all(|c| c.sum() <= 1.0 + tol);
        let total_ok = self.xi.sum() <= self.units() as f64 + tol;
        let integral = match self.mode {
            AllocMode::Relaxed => true,
            AllocMode::Binary => self.xi.iter().all(|&x| x == 0.0 || x == 1.0),
        };
        box_ok && units_ok && total_ok && integral
    }

    /// Element-level mask `K × L²` used in the effective channel.
    pub fn element_mask(&self, ris_side: usize) -> DMatrix<f64> {
        match self.granularity {
            Granularity::Column => expand_columns(&self.xi, ris_side),
            Granularity::Element => self.xi.clone(),
        }
    }

    /// Unit assigned to each user, `None` for unassigned. Binary allocations only.
    pub fn owners(&self) -> Vec<Option<usize>> {
        self.xi
            .column_iter()
            .map(|c| c.iter().position(|&x| x == 1.0))
            .collect()
    }
}

/// Transmit beamformers, row k holding `w_kᵀ` (K×N).
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w: CMat,
}

/// Replicates each column value over the `ris_side` elements of that RIS column.
pub fn expand_columns(xi: &DMatrix<f64>, ris_side: usize) -> DMatrix<f64> {
    DMatrix::from_fn(xi.nrows(), xi.ncols() * ris_side, |k, l| {
        xi[(k, l / ris_side)]
    })
}

fn check_dims(ch: &ChannelSet, theta: &PhaseConfig, xi: &Allocation) -> Result<usize> {
    let side = ch
        .ris_side()
        .ok_or_else(|| Error::InvalidInput("RIS element count is not a perfect square".into()))?;
    let dim = |context, expected, found| {
        if expected == found {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                found,
            })
        }
    };
    dim("phase vector", ch.ris_elements(), theta.len())?;
    dim("allocation rows", ch.num_ues(), xi.users())?;
    dim("allocation units", xi.granularity.units(side), xi.units())?;
    Ok(side)
}

/// `e_k = g_kᴴ diag(mask_k ⊙ e^{jθ}) H_RB + h_k`, a 1×N row.
pub fn effective_channel(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    k: usize,
) -> Result<RowDVector<C64>> {
    let side = check_dims(ch, theta, xi)?;
    if k >= ch.num_ues() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: ch.num_ues(),
        });
    }
    let mask = xi.element_mask(side);
    let reflect = RowDVector::from_iterator(
        ch.ris_elements(),
        (0..ch.ris_elements())
            .map(|l| ch.g_ris[(k, l)] * C64::from_polar(mask[(k, l)], theta.theta[l])),
    );
    Ok(reflect * &ch.h_rb + ch.h_direct.row(k))
}

fn received(e: &RowDVector<C64>, w: &Beamformers, i: usize) -> C64 {
    e.iter().zip(w.w.row(i).iter()).map(|(a, b)| a * b).sum()
}

/// `|e_k w_k|² / (Σ_{i≠k} |e_k w_i|² + σ²)`.
pub fn sinr(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    w: &Beamformers,
    k: usize,
    noise_linear: f64,
) -> Result<f64> {
    let e = effective_channel(ch, theta, xi, k)?;
    let signal = received(&e, w, k).norm_sqr();
    let interference: f64 = (0..w.w.nrows())
        .filter(|&i| i != k)
        .map(|i| received(&e, w, i).norm_sqr())
        .sum();
    Ok(signal / (interference + noise_linear))
}

/// `(1/K) log2(1 + sinr)`.
pub fn rate_from_sinr(sinr: f64, users: usize) -> f64 {
    (1.0 + sinr).log2() / users as f64
}

pub fn rate(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    w: &Beamformers,
    k: usize,
    noise_linear: f64,
) -> Result<f64> {
    Ok(rate_from_sinr(
        sinr(ch, theta, xi, w, k, noise_linear)?,
        ch.num_ues(),
    ))
}

/// Alpha-fair utility with the rate floor applied.
pub fn alpha_utility(r: f64, alpha: f64) -> f64 {
    let r = r.max(RATE_FLOOR);
    if alpha == 1.0 {
        r.ln()
    } else {
        r.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// `dU/dR`; zero inside the floored region.
pub fn alpha_utility_derivative(r: f64, alpha: f64) -> f64 {
    if r < RATE_FLOOR {
        0.0
    } else {
        r.powf(-alpha)
    }
}

/// Alpha-mean throughput in bps: generalized mean of `B·R_k` with exponent
/// `1 − α` (geometric mean at `α = 1`).
pub fn alpha_mean_throughput(rates: &[f64], alpha: f64, bandwidth: f64) -> f64 {
    let n = rates.len() as f64;
    let tput = rates.iter().map(|&r| bandwidth * r.max(RATE_FLOOR));
    if alpha == 1.0 {
        (tput.map(f64::ln).sum::<f64>() / n).exp()
    } else {
        let p = 1.0 - alpha;
        (tput.map(|x| x.powf(p)).sum::<f64>() / n).powf(1.0 / p)
    }
}

/// `Σ_k U_α(R_k)`, evaluated directly from the channel matrices.
pub fn sum_utility(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    w: &Beamformers,
    alpha: f64,
    noise_linear: f64,
) -> Result<f64> {
    (0..ch.num_ues())
        .map(|k| rate(ch, theta, xi, w, k, noise_linear).map(|r| alpha_utility(r, alpha)))
        .sum()
}

/// Per-user rates evaluated directly from the channel matrices.
pub fn rates(
    ch: &ChannelSet,
    theta: &PhaseConfig,
    xi: &Allocation,
    w: &Beamformers,
    noise_linear: f64,
) -> Result<Vec<f64>> {
    (0..ch.num_ues())
        .map(|k| rate(ch, theta, xi, w, k, noise_linear))
        .collect()
}

/// Sum utility and its gradients.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub utility: f64,
    pub d_theta: Vec<f64>,
    /// Same shape as the allocation (K × units).
    pub d_xi: DMatrix<f64>,
}

/// Precomputed sum-utility objective for one channel realization with fixed
/// beamformers.
///
/// With `d_{k,i} = h_k w_i` and `a_{k,l,i} = g_ris[k,l] (H_RB[l,:] w_i)`,
/// the received amplitude of stream i at user k is
/// `s_{k,i} = d_{k,i} + Σ_l m_{k,l} e^{jθ_l} a_{k,l,i}`.
#[derive(Debug, Clone)]
pub struct Objective {
    users: usize,
    elements: usize,
    ris_side: usize,
    granularity: Granularity,
    alpha: f64,
    noise: f64,
    direct: Vec<C64>,
    reflect: Vec<C64>,
}

impl Objective {
    pub fn new(
        ch: &ChannelSet,
        w: &Beamformers,
        alpha: f64,
        noise_linear: f64,
        granularity: Granularity,
    ) -> Result<Self> {
        ch.validate()?;
        let ris_side = ch.ris_side().ok_or_else(|| {
            Error::InvalidInput("RIS element count is not a perfect square".into())
        })?;
        let (k, n, l2) = (ch.num_ues(), ch.num_antennas(), ch.ris_elements());
        if w.w.shape() != (k, n) {
            return Err(Error::Dimension {
                context: "beamformer matrix",
                expected: k * n,
                found: w.w.nrows() * w.w.ncols(),
            });
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must be > 0, got {alpha}"
            )));
        }
        if !(noise_linear > 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise power must be > 0, got {noise_linear}"
            )));
        }
        // H_RB w_i for every stream: L²×K.
        let feed: CMat = &ch.h_rb * w.w.transpose();
        let direct_m: CMat = &ch.h_direct * w.w.transpose();
        let mut direct = Vec::with_capacity(k * k);
        for user in 0..k {
            for i in 0..k {
                direct.push(direct_m[(user, i)]);
            }
        }
        let mut reflect = Vec::with_capacity(k * l2 * k);
        for user in 0..k {
            for l in 0..l2 {
                let g = ch.g_ris[(user, l)];
                for i in 0..k {
                    reflect.push(g * feed[(l, i)]);
                }
            }
        }
        Ok(Self {
            users: k,
            elements: l2,
            ris_side,
            granularity,
            alpha,
            noise: noise_linear,
            direct,
            reflect,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn ris_side(&self) -> usize {
        self.ris_side
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Number of allocation units (columns or elements).
    pub fn units(&self) -> usize {
        self.granularity.units(self.ris_side)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    fn check(&self, theta: &[f64], xi: &DMatrix<f64>) {
        assert_eq!(theta.len(), self.elements, "phase vector length");
        assert_eq!(xi.shape(), (self.users, self.units()), "allocation shape");
    }

    /// Received amplitudes `s_{k,·}` for user k.
    fn amplitudes(&self, k: usize, phasors: &[C64], xi: &DMatrix<f64>, out: &mut [C64]) {
        let users = self.users;
        out.copy_from_slice(&self.direct[k * users..(k + 1) * users]);
        for (l, ph) in phasors.iter().enumerate() {
            let m = xi[(k, self.granularity.unit_of(l, self.ris_side))];
            if m == 0.0 {
                continue;
            }
            let coef = ph * m;
            let base = (k * self.elements + l) * users;
            for (o, a) in out.iter_mut().zip(&self.reflect[base..base + users]) {
                *o += coef * a;
            }
        }
    }

    fn phasors(theta: &[f64]) -> Vec<C64> {
        theta.iter().map(|&t| C64::from_polar(1.0, t)).collect()
    }

    /// Per-user SINR.
    pub fn sinrs(&self, theta: &[f64], xi: &DMatrix<f64>) -> Vec<f64> {
        self.check(theta, xi);
        let phasors = Self::phasors(theta);
        let mut s = vec![C64::default(); self.users];
        (0..self.users)
            .map(|k| {
                self.amplitudes(k, &phasors, xi, &mut s);
                let (signal, interference) = split_power(&s, k);
                signal / (interference + self.noise)
            })
            .collect()
    }

    pub fn rates(&self, theta: &[f64], xi: &DMatrix<f64>) -> Vec<f64> {
        self.sinrs(theta, xi)
            .into_iter()
            .map(|g| rate_from_sinr(g, self.users))
            .collect()
    }

    pub fn value(&self, theta: &[f64], xi: &DMatrix<f64>) -> f64 {
        self.rates(theta, xi)
            .into_iter()
            .map(|r| alpha_utility(r, self.alpha))
            .sum()
    }

    /// Sum utility with exact gradients. Floored users contribute no gradient.
    pub fn evaluate(&self, theta: &[f64], xi: &DMatrix<f64>) -> Evaluation {
        self.check(theta, xi);
        let users = self.users;
        let phasors = Self::phasors(theta);
        let mut s = vec![C64::default(); users];
        let mut weights = vec![0.0; users];
        let mut d_theta = vec![0.0; self.elements];
        let mut d_xi = DMatrix::zeros(users, self.units());
        let mut utility = 0.0;

        for k in 0..users {
            self.amplitudes(k, &phasors, xi, &mut s);
            let (signal, interference) = split_power(&s, k);
            let den = interference + self.noise;
            let gamma = signal / den;
            let r = rate_from_sinr(gamma, users);
            utility += alpha_utility(r, self.alpha);

            // dU/dγ_k
            let c = alpha_utility_derivative(r, self.alpha)
                / (users as f64 * std::f64::consts::LN_2 * (1.0 + gamma));
            if c == 0.0 {
                continue;
            }
            // dγ/d|s_{k,i}|², pre-multiplied by 2c.
            for (i, wt) in weights.iter_mut().enumerate() {
                *wt = 2.0
                    * c
                    * if i == k {
                        1.0 / den
                    } else {
                        -signal / (den * den)
                    };
            }

            for (l, ph) in phasors.iter().enumerate() {
                let base = (k * self.elements + l) * users;
                let z: C64 = (0..users)
                    .map(|i| s[i].conj() * self.reflect[base + i] * weights[i])
                    .sum::<C64>()
                    * ph;
                let unit = self.granularity.unit_of(l, self.ris_side);
                let m = xi[(k, unit)];
                d_xi[(k, unit)] += z.re;
                d_theta[l] -= m * z.im;
            }
        }

        Evaluation {
            utility,
            d_theta,
            d_xi,
        }
    }
}

fn split_power(s: &[C64], k: usize) -> (f64, f64) {
    let signal = s[k].norm_sqr();
    let interference = s
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    (signal, interference)
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn column_expansion() {
        let xi = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(expand_columns(&xi, 2).as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(
            expand_columns(&DMatrix::zeros(3, 4), 4),
            DMatrix::zeros(3, 16)
        );
        let xi = DMatrix::from_row_slice(2, 3, &[0.2, 0.5, 1.0, 0.3, 0.0, 0.0]);
        let m = expand_columns(&xi, 3);
        assert_relative_eq!(m.sum(), 3.0 * xi.sum(), max_relative = 1e-15);
        for p in 0..3 {
            let col_mask: f64 = (0..2)
                .map(|k| (0..3).map(|q| m[(k, p * 3 + q)]).sum::<f64>())
                .sum();
            assert_relative_eq!(col_mask, 3.0 * xi.column(p).sum(), max_relative = 1e-15);
        }
    }

    #[test]
    fn effective_channel_cases() {
        let (ch, _) = random_instance(3, 2, 3, 2);
        let theta = PhaseConfig::new(vec![0.3, 1.0, 2.0, 0.1]);
        let zero = Allocation::zeros(2, 2, Granularity::Column);
        let e = effective_channel(&ch, &theta, &zero, 1).unwrap();
        assert_eq!(e, ch.h_direct.row(1).into_owned());

        let mut full = Allocation::zeros(2, 2, Granularity::Column);
        full.xi.row_mut(0).fill(1.0);
        let flat = PhaseConfig::zeros(4);
        let e_full = effective_channel(&ch, &flat, &full, 0).unwrap();
        let expected = ch.g_ris.row(0) * &ch.h_rb + ch.h_direct.row(0);
        assert!((e_full.clone() - expected).norm() < 1e-12);

        let mut half = Allocation::zeros(2, 2, Granularity::Column);
        half.xi.fill(0.5);
        half.mode = AllocMode::Relaxed;
        let e_half = effective_channel(&ch, &flat, &half, 0).unwrap();
        let e_zero = effective_channel(&ch, &flat, &zero, 0).unwrap();
        let mid = (e_full + e_zero) * C64::from(0.5);
        assert!((e_half - mid).norm() < 1e-12);

        assert!(matches!(
            effective_channel(&ch, &flat, &zero, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn sinr_edge_cases() {
        let (ch, mut w) = random_instance(4, 1, 2, 2);
        let theta = PhaseConfig::zeros(4);
        let xi = Allocation::zeros(1, 2, Granularity::Column);
        let e = effective_channel(&ch, &theta, &xi, 0).unwrap();
        let s = received(&e, &w, 0).norm_sqr();
        assert_relative_eq!(sinr(&ch, &theta, &xi, &w, 0, 0.5).unwrap(), s / 0.5);
        w.w.fill(C64::default());
        assert_eq!(sinr(&ch, &theta, &xi, &w, 0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn rate_and_utility_values() {
        assert_relative_eq!(rate_from_sinr(1.0, 2), 0.5);
        assert_eq!(rate_from_sinr(0.0, 3), 0.0);
        assert_relative_eq!(rate_from_sinr(3.0, 4), 0.5);
        assert_eq!(alpha_utility(1.0, 1.0), 0.0);
        assert_relative_eq!(alpha_utility(2.0, 2.0), -0.5);
        assert_relative_eq!(alpha_utility(4.0, 0.5), 4.0);
        assert_relative_eq!(alpha_utility(0.0, 1.0), RATE_FLOOR.ln());
    }

    #[test]
    fn throughput_values() {
        assert_relative_eq!(
            alpha_mean_throughput(&[1.0, 4.0], 1.0, 1.0),
            2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            alpha_mean_throughput(&[1.0, 4.0], 2.0, 1.0),
            1.6,
            max_relative = 1e-14
        );
        for alpha in [0.3, 1.0, 2.0, 5.0] {
            assert_relative_eq!(
                alpha_mean_throughput(&[2.5; 4], alpha, 50e6),
                2.5 * 50e6,
                max_relative = 1e-12
            );
        }
        let rates = [0.7, 1.9, 3.3];
        let at_one = alpha_mean_throughput(&rates, 1.0, 1.0);
        for a in [1.0 - 1e-6, 1.0 + 1e-6] {
            assert_relative_eq!(
                alpha_mean_throughput(&rates, a, 1.0),
                at_one,
                max_relative = 1e-4
            );
        }
    }

    #[test]
    fn objective_matches_direct_evaluation() {
        for seed in 0..20 {
            let (ch, w) = random_instance(seed, 3, 2, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            for granularity in [Granularity::Column, Granularity::Element] {
                let units = granularity.units(3);
                let theta = random_theta(&mut rng, 9);
                let xi = random_xi(&mut rng, 3, units);
                let obj = Objective::new(&ch, &w, 1.5, 0.3, granularity).unwrap();
                let alloc = Allocation::relaxed(xi.clone(), granularity);
                let phases = PhaseConfig::new(theta.clone());
                let direct = sum_utility(&ch, &phases, &alloc, &w, 1.5, 0.3).unwrap();
                assert_relative_eq!(obj.value(&theta, &xi), direct, max_relative = 1e-12);
                assert_relative_eq!(
                    obj.evaluate(&theta, &xi).utility,
                    direct,
                    max_relative = 1e-12
                );
                let r = rates(&ch, &phases, &alloc, &w, 0.3).unwrap();
                for (a, b) in obj.rates(&theta, &xi).iter().zip(&r) {
                    assert_relative_eq!(a, b, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn severed_ris_gives_zero_phase_gradient() {
        let (ch, w) = random_instance(11, 2, 2, 2);
        let obj = Objective::new(&ch, &w, 1.0, 0.1, Granularity::Column).unwrap();
        let ev = obj.evaluate(&[0.4, 1.3, 2.2, 3.0], &DMatrix::zeros(2, 2));
        assert!(ev.d_theta.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn bandwidth_does_not_enter_utility() {
        // sum_utility has no bandwidth argument; throughput scales linearly.
        let r = [0.4, 1.1];
        assert_relative_eq!(
            alpha_mean_throughput(&r, 2.0, 2.0),
            2.0 * alpha_mean_throughput(&r, 2.0, 1.0),
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn throughput_non_increasing_in_alpha(
            rates in proptest::collection::vec(0.01..10.0f64, 1..6),
            a in 0.05..4.0f64, da in 0.0..3.0f64,
        ) {
            let lo = alpha_mean_throughput(&rates, a, 1.0);
            let hi = alpha_mean_throughput(&rates, a + da, 1.0);
            prop_assert!(hi <= lo * (1.0 + 1e-12));
        }

        #[test]
        fn user_permutation_invariance(seed in 0u64..1000, shift in 1usize..3) {
            let (ch, w) = random_instance(seed, 3, 2, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = PhaseConfig::new(random_theta(&mut rng, 4));
            let xi = Allocation::relaxed(random_xi(&mut rng, 3, 2), Granularity::Column);
            let perm: Vec<usize> = (0..3).map(|k| (k + shift) % 3).collect();
            let permute = |m: &CMat| CMat::from_fn(m.nrows(), m.ncols(), |r, c| m[(perm[r], c)]);
            let ch_p = ChannelSet {
                h_direct: permute(&ch.h_direct),
                g_ris: permute(&ch.g_ris),
                h_rb: ch.h_rb.clone(),
                direct_links: ch.direct_links.clone(),
                ris_links: ch.ris_links.clone(),
            };
            let w_p = Beamformers { w: permute(&w.w) };
            let xi_p = Allocation::relaxed(
                DMatrix::from_fn(3, 2, |r, c| xi.xi[(perm[r], c)]),
                Granularity::Column,
            );
            let a = sum_utility(&ch, &theta, &xi, &w, 1.0, 0.2).unwrap();
            let b = sum_utility(&ch_p, &theta, &xi_p, &w_p, 1.0, 0.2).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn sinr_nonnegative_and_ris_severed(seed in 0u64..1000) {
            let (ch, w) = random_instance(seed, 2, 3, 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
            let theta = PhaseConfig::new(random_theta(&mut rng, 4));
            let zero = Allocation::zeros(2, 2, Granularity::Column);
            let other = PhaseConfig::new(random_theta(&mut rng, 4));
            for k in 0..2 {
                let g = sinr(&ch, &theta, &zero, &w, k, 0.1).unwrap();
                prop_assert!(g >= 0.0);
                prop_assert_eq!(g, sinr(&ch, &other, &zero, &w, k, 0.1).unwrap());
            }
        }
    }
}
