use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alloc::project_feasible;
use crate::error::{Error, Result};
use crate::learn::adam::{adam_step, AdamState, DEFAULT_LEARNING_RATE};
use crate::learn::loss::{nn_loss, unpack_allocation};
use crate::learn::mlp::{MlpArch, MlpModel, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::learn::pca::FeatureMap;
use crate::metrics::{Allocation, Objective, PhaseConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    /// Epochs without validation improvement before the learning rate decays.
    pub lr_patience: usize,
    /// Epochs without validation improvement before training stops.
    pub stop_patience: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub use_pca: bool,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            batch_size: 20,
            learning_rate: DEFAULT_LEARNING_RATE,
            lr_decay: 0.33,
            lr_patience: 10,
            stop_patience: 40,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dropout: DEFAULT_DROPOUT,
            use_pca: true,
            seed: 0,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.into(),
            })
        };
        if self.max_epochs == 0 {
            return bad("max_epochs", "must be >= 1");
        }
        if self.batch_size < 2 {
            return bad(
                "batch_size",
                "batch norm needs at least 2 samples per batch",
            );
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive and finite");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must lie in (0, 1]");
        }
        if self.lr_patience == 0 || self.stop_patience == 0 {
            return bad("lr_patience", "patience values must be >= 1");
        }
        Ok(())
    }
}

/// One training example: raw features plus the objective they describe.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: Vec<f64>,
    pub objective: Objective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauEvent {
    Improved,
    Waiting,
    /// Learning rate multiplied by the decay factor.
    Decayed,
    Stop,
}

/// Learning-rate decay and early stopping on the validation loss.
///
/// Any strict improvement resets both counters. After `lr_patience`
/// non-improving epochs the rate decays and that counter restarts; after
/// `stop_patience` non-improving epochs training stops (taking precedence
/// over a decay due in the same epoch).
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub best: f64,
    pub learning_rate: f64,
    since_best: usize,
    since_decay: usize,
    decay: f64,
    lr_patience: usize,
    stop_patience: usize,
}

impl PlateauScheduler {
    pub fn new(learning_rate: f64, decay: f64, lr_patience: usize, stop_patience: usize) -> Self {
        Self {
            best: f64::INFINITY,
            learning_rate,
            since_best: 0,
            since_decay: 0,
            decay,
            lr_patience,
            stop_patience,
        }
    }

    pub fn observe(&mut self, loss: f64) -> PlateauEvent {
        if loss < self.best {
            self.best = loss;
            self.since_best = 0;
            self.since_decay = 0;
            return PlateauEvent::Improved;
        }
        self.since_best += 1;
        self.since_decay += 1;
        if self.since_best >= self.stop_patience {
            PlateauEvent::Stop
        } else if self.since_decay >= self.lr_patience {
            self.since_decay = 0;
            self.learning_rate *= self.decay;
            PlateauEvent::Decayed
        } else {
            PlateauEvent::Waiting
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss in train mode.
    pub train_loss: f64,
    /// Eval-mode loss over the validation split.
    pub val_loss: f64,
    pub learning_rate: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_loss,learning_rate";

/// Per-epoch history as CSV with [`HISTORY_HEADER`].
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for r in history {
        writeln!(
            s,
            "{},{:.17e},{:.17e},{:.17e}",
            r.epoch, r.train_loss, r.val_loss, r.learning_rate
        )
        .expect("writing to a String");
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: MlpModel,
    pub features: FeatureMap,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn gather(z: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), z.ncols(), |r, c| z[(rows[r], c)])
}

fn check_shapes(samples: &[TrainSample], first: &Objective, dim: usize) -> Result<()> {
    for s in samples {
        let o = &s.objective;
        if s.features.len() != dim
            || o.elements() != first.elements()
            || o.users() != first.users()
            || o.units() != first.units()
        {
            return Err(Error::InvalidInput(
                "training samples differ in scenario dimensions".into(),
            ));
        }
    }
    Ok(())
}

/// Fits the feature map on the training split, then trains the network with
/// minibatch Adam. Batches are reshuffled every epoch; a trailing batch
/// with a single sample is skipped.
pub fn train(
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    opts.validate()?;
    if train_set.len() < 2 || val_set.is_empty() {
        return Err(Error::InvalidInput(format!(
            "need at least 2 training and 1 validation samples, got {} and {}",
            train_set.len(),
            val_set.len()
        )));
    }
    let first = &train_set[0].objective;
    let dim = train_set[0].features.len();
    check_shapes(train_set, first, dim)?;
    check_shapes(val_set, first, dim)?;

    let raw = DMatrix::from_fn(train_set.len(), dim, |r, c| train_set[r].features[c]);
    let features = FeatureMap::fit(&raw, opts.use_pca)?;
    let z_train = features.apply_batch(train_set.iter().map(|s| s.features.as_slice()))?;
    let z_val = features.apply_batch(val_set.iter().map(|s| s.features.as_slice()))?;
    let val_objs: Vec<&Objective> = val_set.iter().map(|s| &s.objective).collect();

    let arch = MlpArch {
        input_dim: features.output_dim(),
        hidden: opts.hidden.clone(),
        phase_dim: first.elements(),
        alloc_dim: first.users() * first.units(),
        dropout: opts.dropout,
    };
    let mut model = MlpModel::init(arch, opts.seed)?;
    let mut adam = AdamState::new(&model.params, opts.learning_rate);
    let mut plateau = PlateauScheduler::new(
        opts.learning_rate,
        opts.lr_decay,
        opts.lr_patience,
        opts.stop_patience,
    );
    let mut shuffle_rng = rng::stream(opts.seed, rng::STREAM_SHUFFLE);
    let mut dropout_rng = rng::stream(opts.seed, rng::STREAM_DROPOUT);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best = (model.clone(), 0, f64::INFINITY);

    for epoch in 0..opts.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for batch in order.chunks(opts.batch_size).filter(|b| b.len() >= 2) {
            let objs: Vec<&Objective> = batch.iter().map(|&i| &train_set[i].objective).collect();
            let out = model.forward(&gather(&z_train, batch), true, dropout_rng.random())?;
            let loss = nn_loss(&out.theta, &out.xi, &objs)?;
            let grads = model.backward(&out, &loss.d_theta, &loss.d_xi)?;
            model.update_running_stats(&out);
            adam_step(&mut model.params, &grads, &mut adam)?;
            loss_sum += loss.loss * batch.len() as f64;
            seen += batch.len();
        }
        let val = model.forward(&z_val, false, 0)?;
        let val_loss = nn_loss(&val.theta, &val.xi, &val_objs)?.loss;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_loss,
            learning_rate: adam.learning_rate,
        });
        match plateau.observe(val_loss) {
            PlateauEvent::Improved => best = (model.clone(), epoch, val_loss),
            PlateauEvent::Decayed => adam.learning_rate = plateau.learning_rate,
            PlateauEvent::Stop => break,
            PlateauEvent::Waiting => {}
        }
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("network parameters after training".into()));
    }
    let (model, best_epoch, best_val_loss) = best;
    Ok(TrainOutcome {
        model,
        features,
        history,
        best_epoch,
        best_val_loss,
    })
}

/// Eval-mode prediction for one sample: phases and the projected relaxed
/// allocation.
pub fn infer(
    model: &MlpModel,
    features: &FeatureMap,
    raw: &[f64],
    objective: &Objective,
) -> Result<(PhaseConfig, Allocation)> {
    let mut out = infer_batch(model, features, &[raw], &[objective])?;
    Ok(out.pop().expect("one prediction per sample"))
}

/// Eval-mode prediction for a batch in one forward pass.
pub fn infer_batch(
    model: &MlpModel,
    features: &FeatureMap,
    raws: &[&[f64]],
    objectives: &[&Objective],
) -> Result<Vec<(PhaseConfig, Allocation)>> {
    if raws.len() != objectives.len() {
        return Err(Error::Dimension {
            context: "inference batch",
            expected: raws.len(),
            found: objectives.len(),
        });
    }
    if raws.is_empty() {
        return Ok(Vec::new());
    }
    let z = features.apply_batch(raws.iter().copied())?;
    let out = model.forward(&z, false, 0)?;
    objectives
        .iter()
        .enumerate()
        .map(|(q, obj)| {
            if out.theta.ncols() != obj.elements() || out.xi.ncols() != obj.users() * obj.units() {
                return Err(Error::Dimension {
                    context: "model output width",
                    expected: obj.elements() + obj.users() * obj.units(),
                    found: out.theta.ncols() + out.xi.ncols(),
                });
            }
            let xi_raw: Vec<f64> = out.xi.row(q).iter().copied().collect();
            let raw_alloc = unpack_allocation(&xi_raw, obj.users(), obj.units());
            Ok((
                PhaseConfig::new(out.theta.row(q).iter().copied().collect()),
                project_feasible(&raw_alloc, obj.granularity()),
            ))
        })
        .collect()
}
