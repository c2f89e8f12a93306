//! Fully connected network with batch normalization and two sigmoid heads.
//!
//! Each hidden block is affine → ReLU → batch norm → inverted dropout. The
//! phase head is `π·sigmoid(affine)`, the allocation head `sigmoid(affine)`.
//! Activations are batch-major: a batch of Q inputs is a Q × width matrix
//! and weights are stored input × output.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_HIDDEN: [usize; 4] = [500, 450, 400, 300];
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const BN_EPSILON: f64 = 1e-8;
/// Weight of the newest batch in the running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// One phase per RIS element (L²).
    pub phase_dim: usize,
    /// K × allocation units, user-major.
    pub alloc_dim: usize,
    pub dropout: f64,
}

impl MlpArch {
    /// Default hidden widths and dropout.
    pub fn new(input_dim: usize, phase_dim: usize, alloc_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN.to_vec(),
            phase_dim,
            alloc_dim,
            dropout: DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [self.input_dim, self.phase_dim, self.alloc_dim];
        if sizes.iter().chain(&self.hidden).any(|&s| s == 0) {
            return Err(Error::InvalidConfig {
                field: "hidden",
                reason: "all layer sizes must be >= 1".into(),
            });
        }
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig {
                field: "hidden",
                reason: "at least one hidden layer is required".into(),
            });
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig {
                field: "dropout",
                reason: format!("must lie in [0, 1), got {}", self.dropout),
            });
        }
        Ok(())
    }

    fn last_hidden(&self) -> usize {
        *self.hidden.last().expect("validated")
    }

    /// (fan_in, fan_out) of every affine layer, heads last.
    fn affine_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        let mut shapes: Vec<_> = dims.windows(2).map(|w| (w[0], w[1])).collect();
        shapes.push((self.last_hidden(), self.phase_dim));
        shapes.push((self.last_hidden(), self.alloc_dim));
        shapes
    }
}

/// Trainable scalars: every affine layer plus batch-norm scale and shift.
pub fn parameter_count(arch: &MlpArch) -> u64 {
    let affine: usize = arch.affine_shapes().iter().map(|&(i, o)| i * o + o).sum();
    let norm: usize = 2 * arch.hidden.iter().sum::<usize>();
    (affine + norm) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub value: DMatrix<f64>,
}

/// Named tensors in a fixed order. Gradients and optimizer moments use the
/// same layout as the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    value: DMatrix::zeros(t.value.nrows(), t.value.ncols()),
                })
                .collect(),
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.value)
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.value.iter().all(|v| v.is_finite()))
    }
}

// Tensor layout: per hidden layer i the four entries at 4i..4i+4 are
// weight, bias, gamma, beta; the heads follow as weight/bias pairs.
const PER_HIDDEN: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArch,
    pub params: ParamSet,
    pub running_mean: Vec<DVector<f64>>,
    pub running_var: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
struct HiddenCache {
    input: DMatrix<f64>,
    pre: DMatrix<f64>,
    xhat: DMatrix<f64>,
    inv_std: DVector<f64>,
    mask: Option<DMatrix<f64>>,
    batch_mean: DVector<f64>,
    batch_var_unbiased: DVector<f64>,
}

/// Outputs of a forward pass together with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Q × phase_dim, entries in [0, π].
    pub theta: DMatrix<f64>,
    /// Q × alloc_dim, entries in (0, 1).
    pub xi: DMatrix<f64>,
    train: bool,
    hidden: Vec<HiddenCache>,
    last: DMatrix<f64>,
}

impl ForwardOutput {
    pub fn train_mode(&self) -> bool {
        self.train
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn add_row(m: &mut DMatrix<f64>, row: &DMatrix<f64>) {
    for (c, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(row[c]);
    }
}

fn column_sums(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_iterator(1, m.ncols(), m.column_iter().map(|c| c.sum()))
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, unit batch-norm scale, zero shift.
    pub fn init(arch: MlpArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng::stream(seed, rng::STREAM_WEIGHT_INIT);
        let shapes = arch.affine_shapes();
        let mut tensors = Vec::new();
        let mut glorot = |name: String,
                          (fan_in, fan_out): (usize, usize),
                          tensors: &mut Vec<Tensor>| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            tensors.push(Tensor {
                name: format!("{name}.weight"),
                value: DMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-bound..bound)),
            });
            tensors.push(Tensor {
                name: format!("{name}.bias"),
                value: DMatrix::zeros(1, fan_out),
            });
        };
        for (i, &width) in arch.hidden.iter().enumerate() {
            glorot(format!("hidden{i}"), shapes[i], &mut tensors);
            tensors.push(Tensor {
                name: format!("hidden{i}.gamma"),
                value: DMatrix::from_element(1, width, 1.0),
            });
            tensors.push(Tensor {
                name: format!("hidden{i}.beta"),
                value: DMatrix::zeros(1, width),
            });
        }
        let h = arch.hidden.len();
        glorot("phase_head".into(), shapes[h], &mut tensors);
        glorot("alloc_head".into(), shapes[h + 1], &mut tensors);
        Ok(Self {
            running_mean: arch.hidden.iter().map(|&w| DVector::zeros(w)).collect(),
            running_var: arch
                .hidden
                .iter()
                .map(|&w| DVector::from_element(w, 1.0))
                .collect(),
            params: ParamSet { tensors },
            arch,
        })
    }

    fn t(&self, index: usize) -> &DMatrix<f64> {
        &self.params.tensors[index].value
    }

    fn head_index(&self) -> usize {
        PER_HIDDEN * self.arch.hidden.len()
    }

    /// Forward pass. Train mode normalizes with batch statistics (Q ≥ 2)
    /// and applies dropout drawn from `dropout_seed`; eval mode uses the
    /// running statistics and is deterministic.
    pub fn forward(
        &self,
        z: &DMatrix<f64>,
        train: bool,
        dropout_seed: u64,
    ) -> Result<ForwardOutput> {
        let q = z.nrows();
        if z.ncols() != self.arch.input_dim {
            return Err(Error::Dimension {
                context: "network input width",
                expected: self.arch.input_dim,
                found: z.ncols(),
            });
        }
        if q == 0 || (train && q < 2) {
            return Err(Error::InvalidInput(format!(
                "batch of {q} samples is too small for {} mode",
                if train { "train" } else { "eval" }
            )));
        }
        let mut rng = rng::stream(dropout_seed, rng::STREAM_DROPOUT);
        let keep = 1.0 - self.arch.dropout;
        let mut x = z.clone();
        let mut hidden = Vec::with_capacity(self.arch.hidden.len());

        for i in 0..self.arch.hidden.len() {
            let base = PER_HIDDEN * i;
            let mut pre = &x * self.t(base);
            add_row(&mut pre, self.t(base + 1));
            let act = pre.map(|v| v.max(0.0));

            let (mean, var, var_unbiased) = if train {
                let mean = DVector::from_iterator(act.ncols(), act.column_iter().map(|c| c.mean()));
                let ss = DVector::from_iterator(
                    act.ncols(),
                    act.column_iter()
                        .zip(mean.iter())
                        .map(|(c, &m)| c.iter().map(|&v| (v - m) * (v - m)).sum::<f64>()),
                );
                let var = &ss / q as f64;
                let unbiased = &ss / (q - 1) as f64;
                (mean, var, unbiased)
            } else {
                let var = self.running_var[i].clone();
                (self.running_mean[i].clone(), var.clone(), var)
            };
            let inv_std = var.map(|v| 1.0 / (v + BN_EPSILON).sqrt());
            let xhat =
                DMatrix::from_fn(q, act.ncols(), |r, c| (act[(r, c)] - mean[c]) * inv_std[c]);
            let (gamma, beta) = (self.t(base + 2), self.t(base + 3));
            let mut y = DMatrix::from_fn(q, act.ncols(), |r, c| gamma[c] * xhat[(r, c)] + beta[c]);

            let mask = (train && self.arch.dropout > 0.0).then(|| {
                DMatrix::from_fn(q, act.ncols(), |_, _| {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
            });
            if let Some(m) = &mask {
                y.component_mul_assign(m);
            }
            hidden.push(HiddenCache {
                input: std::mem::replace(&mut x, y),
                pre,
                xhat,
                inv_std,
                mask,
                batch_mean: mean,
                batch_var_unbiased: var_unbiased,
            });
        }

        let head = self.head_index();
        let mut phase = &x * self.t(head);
        add_row(&mut phase, self.t(head + 1));
        let mut alloc = &x * self.t(head + 2);
        add_row(&mut alloc, self.t(head + 3));
        Ok(ForwardOutput {
            theta: phase.map(|v| PI * sigmoid(v)),
            xi: alloc.map(sigmoid),
            train,
            hidden,
            last: x,
        })
    }

    /// Exact parameter gradients given the loss gradients with respect to
    /// the two head outputs.
    pub fn backward(
        &self,
        out: &ForwardOutput,
        d_theta: &DMatrix<f64>,
        d_xi: &DMatrix<f64>,
    ) -> Result<ParamSet> {
        if d_theta.shape() != out.theta.shape() || d_xi.shape() != out.xi.shape() {
            return Err(Error::Dimension {
                context: "upstream gradient",
                expected: out.theta.len() + out.xi.len(),
                found: d_theta.len() + d_xi.len(),
            });
        }
        let mut grads = self.params.zeros_like();
        let g = &mut grads.tensors;
        let head = self.head_index();

        // d/dx π·σ(x) = θ(1 − θ/π); d/dx σ(x) = ξ(1 − ξ).
        let dp = d_theta.zip_map(&out.theta, |d, t| d * t * (1.0 - t / PI));
        let da = d_xi.zip_map(&out.xi, |d, s| d * s * (1.0 - s));
        g[head].value = out.last.tr_mul(&dp);
        g[head + 1].value = column_sums(&dp);
        g[head + 2].value = out.last.tr_mul(&da);
        g[head + 3].value = column_sums(&da);
        let mut dx = &dp * self.t(head).transpose() + &da * self.t(head + 2).transpose();

        let q = out.theta.nrows() as f64;
        for i in (0..self.arch.hidden.len()).rev() {
            let base = PER_HIDDEN * i;
            let c = &out.hidden[i];
            let dy = match &c.mask {
                Some(m) => dx.component_mul(m),
                None => dx,
            };
            g[base + 2].value = column_sums(&dy.component_mul(&c.xhat));
            g[base + 3].value = column_sums(&dy);
            let gamma = self.t(base + 2);
            let dxhat =
                DMatrix::from_fn(dy.nrows(), dy.ncols(), |r, col| dy[(r, col)] * gamma[col]);

            let dact = if out.train {
                let s1 = column_sums(&dxhat);
                let s2 = column_sums(&dxhat.component_mul(&c.xhat));
                DMatrix::from_fn(dxhat.nrows(), dxhat.ncols(), |r, col| {
                    c.inv_std[col] / q
                        * (q * dxhat[(r, col)] - s1[col] - c.xhat[(r, col)] * s2[col])
                })
            } else {
                DMatrix::from_fn(dxhat.nrows(), dxhat.ncols(), |r, col| {
                    dxhat[(r, col)] * c.inv_std[col]
                })
            };
            let dpre = dact.zip_map(&c.pre, |d, p| if p > 0.0 { d } else { 0.0 });
            g[base].value = c.input.tr_mul(&dpre);
            g[base + 1].value = column_sums(&dpre);
            dx = &dpre * self.t(base).transpose();
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// estimates (unbiased variance).
    pub fn update_running_stats(&mut self, out: &ForwardOutput) {
        if !out.train {
            return;
        }
        for (i, c) in out.hidden.iter().enumerate() {
            self.running_mean[i] =
                &self.running_mean[i] * (1.0 - BN_MOMENTUM) + &c.batch_mean * BN_MOMENTUM;
            self.running_var[i] =
                &self.running_var[i] * (1.0 - BN_MOMENTUM) + &c.batch_var_unbiased * BN_MOMENTUM;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.is_finite()
            && self
                .running_mean
                .iter()
                .chain(&self.running_var)
                .all(|v| v.iter().all(|x| x.is_finite()))
    }
}
