use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use ris_core::alloc::{binarize, uniform_contiguous};
use ris_core::bcd::{bcd_optimize, optimize_phases, BcdOptions};
use ris_core::brute::brute_force;
use ris_core::dataset::{generate_dataset, load_dataset, Dataset, DatasetManifest, Sample};
use ris_core::learn::{
    feature_dim, flatten_features, history_csv, infer_batch, load_checkpoint, parameter_count,
    save_checkpoint, train, Checkpoint, FeatureMap, MlpArch, TrainSample, TrainingMetadata,
};
use ris_core::metrics::{alpha_mean_throughput, Allocation, Objective, PhaseConfig};

use crate::args::{
    BcdArgs, CompareArgs, ConfigArgs, ConfigSource, GenerateArgs, ParamsArgs, Scheme, TrainArgs,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, ExitKind};

/// Header of the `compare` table. `mode` is `binary` or `relaxed`;
/// `parameters` is empty for schemes without a network; `mean_seconds` is
/// the per-sample solve or inference time (0 under `--no-timing`).
pub const COMPARE_HEADER: &str = "scheme,mode,samples,mean_utility,mean_alpha_throughput_bps,mean_sum_rate_bps,parameters,mean_seconds";

pub const PARAMS_HEADER: &str = "variant,input_dim,parameters";

pub const TRACE_FILE: &str = "trace.csv";
pub const RESULT_FILE: &str = "result.json";

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(anyhow::anyhow!(
            "--alpha must be positive and finite, got {alpha}"
        )))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CliError::from(e).context(format!("writing {}", path.display())))
}

/// Loads a dataset and the run options that apply to it. The scenario always
/// comes from the dataset manifest; a config file whose scenario disagrees
/// is rejected.
fn load_with_config(source: &ConfigSource, data: &Path) -> CliResult<(Dataset, RunConfig)> {
    let ds = load_dataset(data)
        .map_err(|e| CliError::data(e).context(format!("loading dataset {}", data.display())))?;
    let mut cfg = RunConfig::resolve(source.config.as_deref(), source.profile)?;
    if let Some(path) = source
        .config
        .as_ref()
        .filter(|_| cfg.scenario != ds.manifest.config)
    {
        return Err(CliError::config(anyhow::anyhow!(
            "scenario in {} differs from the one recorded in the dataset manifest",
            path.display()
        )));
    }
    cfg.scenario = ds.manifest.config.clone();
    Ok((ds, cfg))
}

fn objective(cfg: &RunConfig, sample: &Sample, alpha: f64) -> CliResult<Objective> {
    Ok(Objective::new(
        &sample.channels,
        &sample.beamformers,
        alpha,
        cfg.scenario.noise_watts(),
        cfg.allocation.granularity,
    )?)
}

fn bcd_options(cfg: &RunConfig, tol: Option<f64>, seed: Option<u64>) -> CliResult<BcdOptions> {
    let mut opts = cfg.bcd.clone();
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    opts.validate().map_err(CliError::config)?;
    Ok(opts)
}

pub fn cmd_config(args: &ConfigArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(args.source.config.as_deref(), args.source.profile)?;
    out.write_all(cfg.to_json().as_bytes())?;
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> CliResult<DatasetManifest> {
    let cfg = RunConfig::resolve(args.source.config.as_deref(), args.source.profile)?;
    let n_train = args.n_train.unwrap_or(cfg.dataset.n_train);
    let n_val = args.n_val.unwrap_or(cfg.dataset.n_val);
    if n_train == 0 || n_val == 0 {
        return Err(CliError::config(anyhow::anyhow!(
            "both splits need at least one sample, got {n_train} train / {n_val} validation"
        )));
    }
    let manifest = generate_dataset(&cfg.scenario, n_train, n_val, args.seed, &args.out)?;
    writeln!(
        out,
        "wrote {} samples ({} train, {} validation) to {}\nmaster seed {}\nrecords sha256 {}",
        manifest.sample_count,
        manifest.n_train,
        manifest.n_val,
        args.out.display(),
        manifest.master_seed,
        manifest.records_sha256
    )?;
    Ok(manifest)
}

/// Default history path: `model.ckpt` becomes `model.history.csv`.
pub fn default_history_path(model: &Path) -> PathBuf {
    model.with_extension("history.csv")
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> CliResult<Checkpoint> {
    check_alpha(args.alpha)?;
    let (ds, cfg) = load_with_config(&args.source, &args.data)?;
    let mut opts = cfg.train.clone();
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    if let Some(e) = args.max_epochs {
        opts.max_epochs = e;
    }
    if args.no_pca {
        opts.use_pca = false;
    }
    opts.validate().map_err(CliError::config)?;

    let to_samples = |split: &[Sample]| -> CliResult<Vec<TrainSample>> {
        split
            .iter()
            .map(|s| {
                Ok(TrainSample {
                    features: flatten_features(&s.channels),
                    objective: objective(&cfg, s, args.alpha)?,
                })
            })
            .collect()
    };
    let train_set = to_samples(ds.train())?;
    let val_set = to_samples(ds.validation())?;
    let outcome = train(&train_set, &val_set, &opts)?;

    let ckpt = Checkpoint {
        metadata: TrainingMetadata {
            seed: opts.seed,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
            val_loss: outcome.best_val_loss,
            alpha: args.alpha,
            granularity: cfg.allocation.granularity,
        },
        model: outcome.model,
        features: outcome.features,
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_checkpoint(&args.out, &ckpt)?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| default_history_path(&args.out));
    write_file(&history_path, history_csv(&outcome.history).as_bytes())?;

    writeln!(
        out,
        "trained {} epochs (best {}, validation loss {:.6}), input dim {} -> {}, {} parameters\ncheckpoint {}\nhistory {}",
        ckpt.metadata.epochs_run,
        ckpt.metadata.best_epoch,
        ckpt.metadata.val_loss,
        ckpt.features.input_dim(),
        ckpt.features.output_dim(),
        parameter_count(&ckpt.model.arch),
        args.out.display(),
        history_path.display()
    )?;
    Ok(ckpt)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcdReport {
    pub sample_index: usize,
    pub sample_seed: u64,
    pub alpha: f64,
    pub outer_iterations: usize,
    pub utility_relaxed: f64,
    pub utility_binary: f64,
    pub theta: Vec<f64>,
    /// K rows of relaxed shares.
    pub xi_relaxed: Vec<Vec<f64>>,
    /// K rows of 0/1 assignments.
    pub xi_binary: Vec<Vec<f64>>,
}

fn rows(a: &Allocation) -> Vec<Vec<f64>> {
    a.xi.row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

pub fn cmd_bcd(args: &BcdArgs, out: &mut dyn Write) -> CliResult<BcdReport> {
    check_alpha(args.alpha)?;
    let (ds, cfg) = load_with_config(&args.source, &args.data)?;
    let opts = bcd_options(&cfg, args.tol, args.seed)?;
    let sample = ds.samples.get(args.index).ok_or_else(|| {
        CliError::data(ris_core::Error::IndexOutOfRange {
            index: args.index,
            len: ds.samples.len(),
        })
    })?;
    let obj = objective(&cfg, sample, args.alpha)?;
    let result = bcd_optimize(&obj, &opts)?;
    let binary = binarize(&result.allocation, cfg.allocation.binarize_threshold);
    let report = BcdReport {
        sample_index: args.index,
        sample_seed: sample.seed,
        alpha: args.alpha,
        outer_iterations: result.outer_iterations,
        utility_relaxed: result.utility,
        utility_binary: obj.value(&result.phases.theta, &binary.xi),
        theta: result.phases.theta.clone(),
        xi_relaxed: rows(&result.allocation),
        xi_binary: rows(&binary),
    };

    std::fs::create_dir_all(&args.out)?;
    write_file(
        &args.out.join(TRACE_FILE),
        result.trace.to_csv(!args.no_timing).as_bytes(),
    )?;
    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::new(ExitKind::Other, e))?;
    json.push('\n');
    write_file(&args.out.join(RESULT_FILE), json.as_bytes())?;
    writeln!(
        out,
        "sample {} (seed {}): {} outer iterations, utility relaxed {:.9}, binary {:.9}",
        report.sample_index,
        report.sample_seed,
        report.outer_iterations,
        report.utility_relaxed,
        report.utility_binary
    )?;
    Ok(report)
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: &'static str,
    pub mode: &'static str,
    pub samples: usize,
    pub mean_utility: f64,
    pub mean_alpha_throughput_bps: f64,
    pub mean_sum_rate_bps: f64,
    pub parameters: Option<u64>,
    pub mean_seconds: f64,
}

#[derive(Default)]
struct Tally {
    utility: f64,
    throughput: f64,
    sum_rate: f64,
    n: usize,
}

impl Tally {
    fn add(&mut self, obj: &Objective, theta: &PhaseConfig, xi: &Allocation, bandwidth: f64) {
        let rates = obj.rates(&theta.theta, &xi.xi);
        self.utility += obj.value(&theta.theta, &xi.xi);
        self.throughput += alpha_mean_throughput(&rates, obj.alpha(), bandwidth);
        self.sum_rate += rates.iter().map(|r| bandwidth * r).sum::<f64>();
        self.n += 1;
    }

    fn row(
        &self,
        scheme: Scheme,
        mode: &'static str,
        parameters: Option<u64>,
        seconds: f64,
    ) -> CompareRow {
        let n = self.n as f64;
        CompareRow {
            scheme: scheme.name(),
            mode,
            samples: self.n,
            mean_utility: self.utility / n,
            mean_alpha_throughput_bps: self.throughput / n,
            mean_sum_rate_bps: self.sum_rate / n,
            parameters,
            mean_seconds: seconds / n,
        }
    }
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = format!("{COMPARE_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:.17e},{:.17e},{:.17e},{},{:.6e}",
            r.scheme,
            r.mode,
            r.samples,
            r.mean_utility,
            r.mean_alpha_throughput_bps,
            r.mean_sum_rate_bps,
            r.parameters.map(|p| p.to_string()).unwrap_or_default(),
            r.mean_seconds
        )
        .expect("writing to a String");
    }
    s
}

fn pick_model(scheme: Scheme, models: &[(PathBuf, Checkpoint)]) -> CliResult<&Checkpoint> {
    let want_pca = scheme == Scheme::NnPca;
    let matching: Vec<_> = models
        .iter()
        .filter(|(_, c)| matches!(c.features, FeatureMap::Pca(_)) == want_pca)
        .collect();
    match matching.as_slice() {
        [(_, c)] => Ok(c),
        [] => Err(CliError::config(anyhow::anyhow!(
            "scheme {} needs a --model trained {}",
            scheme.name(),
            if want_pca {
                "with PCA"
            } else {
                "with --no-pca"
            }
        ))),
        _ => Err(CliError::config(anyhow::anyhow!(
            "scheme {} matches {} models; pass only one",
            scheme.name(),
            matching.len()
        ))),
    }
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> CliResult<Vec<CompareRow>> {
    check_alpha(args.alpha)?;
    let (ds, cfg) = load_with_config(&args.source, &args.data)?;
    let opts = bcd_options(&cfg, args.tol, args.seed)?;
    let mut schemes = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &args.scheme {
        if seen.insert(*s) {
            schemes.push(*s);
        }
    }
    if schemes.is_empty() {
        schemes = vec![Scheme::Uniform, Scheme::Bcd];
    }

    let models = args
        .model
        .iter()
        .map(|p| {
            let c = load_checkpoint(p)
                .map_err(|e| CliError::data(e).context(format!("loading model {}", p.display())))?;
            Ok((p.clone(), c))
        })
        .collect::<CliResult<Vec<_>>>()?;
    for s in &schemes {
        if matches!(s, Scheme::Nn | Scheme::NnPca) {
            pick_model(*s, &models)?;
        }
    }

    let samples = ds.validation();
    let objs = samples
        .iter()
        .map(|s| objective(&cfg, s, args.alpha))
        .collect::<CliResult<Vec<_>>>()?;
    let bandwidth = cfg.scenario.bandwidth;
    let threshold = cfg.allocation.binarize_threshold;
    let elapsed = |t: Instant| {
        if args.no_timing {
            0.0
        } else {
            t.elapsed().as_secs_f64()
        }
    };

    let mut table = Vec::new();
    for &scheme in &schemes {
        match scheme {
            Scheme::Uniform => {
                let (mut bin, mut secs) = (Tally::default(), 0.0);
                for obj in &objs {
                    let t = Instant::now();
                    let alloc = uniform_contiguous(obj.users(), obj.units(), obj.granularity())?;
                    let res = optimize_phases(obj, &alloc, &opts)?;
                    secs += elapsed(t);
                    bin.add(obj, &res.phases, &alloc, bandwidth);
                }
                table.push(bin.row(scheme, "binary", None, secs));
            }
            Scheme::Bcd => {
                let (mut bin, mut rel, mut secs) = (Tally::default(), Tally::default(), 0.0);
                for obj in &objs {
                    let t = Instant::now();
                    let res = bcd_optimize(obj, &opts)?;
                    secs += elapsed(t);
                    bin.add(
                        obj,
                        &res.phases,
                        &binarize(&res.allocation, threshold),
                        bandwidth,
                    );
                    rel.add(obj, &res.phases, &res.allocation, bandwidth);
                }
                table.push(bin.row(scheme, "binary", None, secs));
                table.push(rel.row(scheme, "relaxed", None, secs));
            }
            Scheme::Brute => {
                let (mut bin, mut secs) = (Tally::default(), 0.0);
                for obj in &objs {
                    let t = Instant::now();
                    let res = brute_force(obj, &cfg.brute.options())
                        .map_err(|e| CliError::from(e).context("scheme brute"))?;
                    secs += elapsed(t);
                    bin.add(obj, &res.phases, &res.allocation, bandwidth);
                }
                table.push(bin.row(scheme, "binary", None, secs));
            }
            Scheme::Nn | Scheme::NnPca => {
                let ckpt = pick_model(scheme, &models)?;
                let t = Instant::now();
                let feats: Vec<Vec<f64>> = samples
                    .iter()
                    .map(|s| flatten_features(&s.channels))
                    .collect();
                if let Some(f) = feats
                    .first()
                    .filter(|f| f.len() != ckpt.features.input_dim())
                {
                    return Err(CliError::data(anyhow::anyhow!(
                        "model expects {} input features, dataset provides {}",
                        ckpt.features.input_dim(),
                        f.len()
                    )));
                }
                let raws: Vec<&[f64]> = feats.iter().map(Vec::as_slice).collect();
                let obj_refs: Vec<&Objective> = objs.iter().collect();
                let preds = infer_batch(&ckpt.model, &ckpt.features, &raws, &obj_refs)?;
                let secs = elapsed(t);
                let (mut bin, mut rel) = (Tally::default(), Tally::default());
                for (obj, (theta, alloc)) in objs.iter().zip(&preds) {
                    bin.add(obj, theta, &binarize(alloc, threshold), bandwidth);
                    rel.add(obj, theta, alloc, bandwidth);
                }
                let params = Some(parameter_count(&ckpt.model.arch));
                table.push(bin.row(scheme, "binary", params, secs));
                table.push(rel.row(scheme, "relaxed", params, secs));
            }
        }
    }

    let csv = compare_csv(&table);
    match &args.out {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            for r in &table {
                writeln!(
                    out,
                    "{:<7} {:<7} utility {:.6}  alpha-throughput {:.4e} bps  sum-rate {:.4e} bps",
                    r.scheme,
                    r.mode,
                    r.mean_utility,
                    r.mean_alpha_throughput_bps,
                    r.mean_sum_rate_bps
                )?;
            }
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(table)
}

/// Parameter counts for raw-feature and PCA inputs on the configured scenario.
pub fn params_table(cfg: &RunConfig, pca_dim: usize) -> CliResult<Vec<(&'static str, usize, u64)>> {
    let s = &cfg.scenario;
    let elements = s.ris_elements();
    let units = cfg.allocation.granularity.units(s.ris_side);
    let raw_dim = feature_dim(s.num_ues, s.n_bs_antennas, elements);
    let arch = |input_dim| MlpArch {
        input_dim,
        hidden: cfg.train.hidden.clone(),
        phase_dim: elements,
        alloc_dim: s.num_ues * units,
        dropout: cfg.train.dropout,
    };
    let mut out = Vec::new();
    for (name, dim) in [("raw", raw_dim), ("pca", pca_dim)] {
        let a = arch(dim);
        a.validate().map_err(CliError::config)?;
        out.push((name, dim, parameter_count(&a)));
    }
    Ok(out)
}

pub fn cmd_params(args: &ParamsArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = RunConfig::resolve(args.source.config.as_deref(), args.source.profile)?;
    writeln!(out, "{PARAMS_HEADER}")?;
    for (name, dim, count) in params_table(&cfg, args.pca_dim)? {
        writeln!(out, "{name},{dim},{count}")?;
    }
    Ok(())
}
