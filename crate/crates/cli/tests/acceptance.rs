//! Acceptance checks 1 to 9. Each test prints one `criterion N: PASS|FAIL`
//! line to stderr (outside the test harness capture) and then asserts.
//! Tests take a shared lock so the timing checks do not compete for CPU.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tempfile::TempDir;

use ris_cli::args::{CompareArgs, ConfigSource, GenerateArgs, Scheme, TrainArgs};
use ris_cli::{cmd_compare, cmd_generate, cmd_train, CompareRow, Profile};
use ris_core::alloc::{binarize, mrt_beamformers, DEFAULT_BINARIZE_THRESHOLD};
use ris_core::bcd::{bcd_optimize, objective_gradients, BcdOptions};
use ris_core::brute::{brute_force, BruteOptions};
use ris_core::channel::{
    breakpoint_distance, pathloss_umi_los, pathloss_umi_nlos, ChannelSet, LinkState,
};
use ris_core::learn::{
    adam_step, feature_dim, flatten_features, infer, load_checkpoint, parameter_count, pca_fit,
    train, AdamState, MlpArch, MlpModel, ParamSet, PlateauEvent, PlateauScheduler, Tensor,
    TrainOptions, TrainSample,
};
use ris_core::metrics::{
    alpha_mean_throughput, rate, sinr, sum_utility, Allocation, Beamformers, Granularity,
    Objective, PhaseConfig,
};
use ris_core::C64;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} {detail}\n");
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn cn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<C64> {
    let s = 0.5f64.sqrt();
    DMatrix::from_fn(r, c, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(s * re, s * im)
    })
}

/// Rayleigh channels of unit variance on every link and MRT beamformers.
fn rayleigh(seed: u64, k: usize, n: usize, side: usize) -> (ChannelSet, Beamformers) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l2 = side * side;
    let ch = ChannelSet {
        h_direct: cn(&mut rng, k, n),
        g_ris: cn(&mut rng, k, l2),
        h_rb: cn(&mut rng, l2, n),
        direct_links: vec![LinkState::default(); k],
        ris_links: vec![LinkState::default(); k],
    };
    let w = mrt_beamformers(&ch, k as f64).unwrap();
    (ch, w)
}

fn within(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Criterion 1: closed-form UMi pathloss at 100 m and the breakpoint distance.
#[test]
fn criterion_1_pathloss() {
    let _g = serial();
    let t = Instant::now();
    let los = pathloss_umi_los(100.0, 100.0, 28.0, 10.0, 1.5, 0.0).unwrap();
    let nlos = pathloss_umi_nlos(100.0, 100.0, 28.0, 10.0, 1.5, 0.0).unwrap();
    let bp = breakpoint_distance(10.0, 1.5, 28e9).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = (los - 103.343).abs() <= 1e-3
        && (nlos - 123.824).abs() <= 1e-3
        && within(bp, 1680.0, 1e-6)
        && secs < 1.0;
    report(
        1,
        pass,
        &format!("LOS {los:.4} dB, NLOS {nlos:.4} dB, breakpoint {bp:.6} m, {secs:.3} s"),
    );
}

/// Loop-by-loop SINR for user `k`, written independently of the library.
#[allow(clippy::needless_range_loop)]
fn sinr_reference(
    ch: &ChannelSet,
    w: &Beamformers,
    theta: &[f64],
    xi: &DMatrix<f64>,
    k: usize,
    noise: f64,
) -> f64 {
    let side = (ch.g_ris.ncols() as f64).sqrt() as usize;
    let n = ch.h_direct.ncols();
    let mut e = vec![C64::new(0.0, 0.0); n];
    for (a, slot) in e.iter_mut().enumerate() {
        let mut acc = ch.h_direct[(k, a)];
        for l in 0..ch.g_ris.ncols() {
            let m = xi[(k, l / side)];
            acc += ch.g_ris[(k, l)] * C64::from_polar(m, theta[l]) * ch.h_rb[(l, a)];
        }
        *slot = acc;
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..w.w.nrows() {
        let mut r = C64::new(0.0, 0.0);
        for a in 0..n {
            r += e[a] * w.w[(i, a)];
        }
        if i == k {
            signal = r.norm_sqr();
        } else {
            interference += r.norm_sqr();
        }
    }
    signal / (interference + noise)
}

/// Criterion 2: SINR, rate and sum utility against a straight-line version.
#[test]
fn criterion_2_metrics() {
    let _g = serial();
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let (ch, w) = rayleigh(seed, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..PI)).collect();
        let xi = DMatrix::from_fn(2, 2, |_, _| rng.random_range(0.0..0.5));
        let alpha = [0.5, 1.0, 2.0][seed as usize % 3];
        let noise = 0.1;
        let phases = PhaseConfig::new(theta.clone());
        let alloc = Allocation::relaxed(xi.clone(), Granularity::Column);

        let mut u_ref = 0.0;
        for k in 0..2 {
            let s_ref = sinr_reference(&ch, &w, &theta, &xi, k, noise);
            let r_ref = (1.0 + s_ref).log2() / 2.0;
            u_ref += if alpha == 1.0 {
                r_ref.ln()
            } else {
                r_ref.powf(1.0 - alpha) / (1.0 - alpha)
            };
            let s = sinr(&ch, &phases, &alloc, &w, k, noise).unwrap();
            let r = rate(&ch, &phases, &alloc, &w, k, noise).unwrap();
            worst = worst
                .max(((s - s_ref) / s_ref).abs())
                .max(((r - r_ref) / r_ref).abs());
        }
        let u = sum_utility(&ch, &phases, &alloc, &w, alpha, noise).unwrap();
        let u_obj = Objective::new(&ch, &w, alpha, noise, Granularity::Column)
            .unwrap()
            .value(&theta, &xi);
        worst = worst
            .max(((u - u_ref) / u_ref).abs())
            .max(((u_obj - u_ref) / u_ref).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        2,
        worst <= 1e-10 && secs < 5.0,
        &format!("50 instances, worst relative error {worst:.3e}, {secs:.3} s"),
    );
}

fn fd_close(fd: f64, an: f64) -> bool {
    // Relative 1e-4; the absolute floor only matters for coordinates whose
    // true derivative is zero.
    (fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()) + 1e-8
}

fn objective_fd_failures(seed: u64) -> usize {
    let (ch, w) = rayleigh(seed, 2, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
    let theta: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..PI)).collect();
    let xi = DMatrix::from_fn(2, 3, |_, _| rng.random_range(0.05..0.5));
    let alpha = if seed.is_multiple_of(2) { 1.0 } else { 2.0 };
    let noise = 0.1;
    let alloc = Allocation::relaxed(xi.clone(), Granularity::Column);
    let (d_theta, d_xi) = objective_gradients(
        &ch,
        &PhaseConfig::new(theta.clone()),
        &alloc,
        &w,
        alpha,
        noise,
    )
    .unwrap();
    let f = |t: &[f64], x: &DMatrix<f64>| {
        sum_utility(
            &ch,
            &PhaseConfig::new(t.to_vec()),
            &Allocation::relaxed(x.clone(), Granularity::Column),
            &w,
            alpha,
            noise,
        )
        .unwrap()
    };
    let h = 1e-6;
    let mut failures = 0;
    for l in 0..theta.len() {
        let (mut p, mut m) = (theta.clone(), theta.clone());
        p[l] += h;
        m[l] -= h;
        failures += !fd_close((f(&p, &xi) - f(&m, &xi)) / (2.0 * h), d_theta[l]) as usize;
    }
    for e in 0..xi.len() {
        let (mut p, mut m) = (xi.clone(), xi.clone());
        p[e] += h;
        m[e] -= h;
        failures += !fd_close((f(&theta, &p) - f(&theta, &m)) / (2.0 * h), d_xi[e]) as usize;
    }
    failures
}

fn gaussian(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng))
}

fn mlp_fd_failures(seed: u64) -> usize {
    let arch = MlpArch {
        input_dim: 3,
        hidden: vec![6, 5],
        phase_dim: 4,
        alloc_dim: 4,
        dropout: 0.3,
    };
    let mut model = MlpModel::init(arch, seed).unwrap();
    for (i, t) in model.params.tensors.iter_mut().enumerate() {
        if !t.name.ends_with(".weight") {
            let noise = gaussian(seed * 31 + i as u64, 1, t.value.ncols()) * 0.3;
            t.value += noise;
        }
    }
    let z = gaussian(seed + 100, 6, 3);
    let ct = gaussian(seed + 200, 6, 4);
    let cx = gaussian(seed + 300, 6, 4);
    let probe = |m: &MlpModel| {
        let out = m.forward(&z, true, seed).unwrap();
        out.theta.component_mul(&ct).sum() + out.xi.zip_map(&cx, |x, c| c * x * x).sum()
    };
    let out = model.forward(&z, true, seed).unwrap();
    let grads = model
        .backward(&out, &ct, &cx.zip_map(&out.xi, |c, x| 2.0 * c * x))
        .unwrap();
    let h = 1e-6;
    let mut failures = 0;
    for ti in 0..model.params.tensors.len() {
        for e in 0..model.params.tensors[ti].value.len() {
            let mut plus = model.clone();
            plus.params.tensors[ti].value[e] += h;
            let mut minus = model.clone();
            minus.params.tensors[ti].value[e] -= h;
            let fd = (probe(&plus) - probe(&minus)) / (2.0 * h);
            failures += !fd_close(fd, grads.tensors[ti].value[e]) as usize;
        }
    }
    failures
}

/// Criterion 3: analytic gradients of the objective and of the network
/// against central differences, in training mode with dropout and batch norm.
#[test]
fn criterion_3_gradients() {
    let _g = serial();
    let t = Instant::now();
    let obj_fail: usize = (0..10).map(objective_fd_failures).sum();
    let mlp_fail: usize = (0..10).map(mlp_fd_failures).sum();
    let secs = t.elapsed().as_secs_f64();
    report(
        3,
        obj_fail == 0 && mlp_fail == 0 && secs < 30.0,
        &format!("objective mismatches {obj_fail}, network mismatches {mlp_fail} over 10 seeds each, {secs:.2} s"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Criterion 4: BCD traces never decrease, and binarized BCD reaches 90% of
/// the exhaustive optimum in the median. Utilities at α = 1 are logarithms
/// that can take either sign, so the ratio is taken on the α-mean
/// throughput, which is positive and monotone in the utility.
#[test]
fn criterion_4_bcd_vs_brute() {
    let _g = serial();
    let t = Instant::now();
    let bandwidth = 1.0;
    let (mut ratios, mut monotone, mut shared) = (Vec::new(), true, true);
    let (mut u_bcd, mut u_brute) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let (ch, w) = rayleigh(7000 + seed, 2, 4, 3);
        let obj = Objective::new(&ch, &w, 1.0, 1.0, Granularity::Column).unwrap();
        let bcd = bcd_optimize(&obj, &BcdOptions::default()).unwrap();
        monotone &= bcd.trace.is_monotone(1e-9);
        let bin = binarize(&bcd.allocation, DEFAULT_BINARIZE_THRESHOLD);
        let brute = brute_force(
            &obj,
            &BruteOptions {
                levels: 8,
                ..BruteOptions::default()
            },
        )
        .unwrap();
        shared &= brute.column_shared_phases;
        let tp = |theta: &[f64], xi: &DMatrix<f64>| {
            alpha_mean_throughput(&obj.rates(theta, xi), 1.0, bandwidth)
        };
        ratios.push(tp(&bcd.phases.theta, &bin.xi) / tp(&brute.phases.theta, &brute.allocation.xi));
        u_bcd.push(obj.value(&bcd.phases.theta, &bin.xi));
        u_brute.push(brute.utility);
    }
    let med = median(ratios.clone());
    let secs = t.elapsed().as_secs_f64();
    report(
        4,
        monotone && shared && med >= 0.9 && secs < 120.0,
        &format!(
            "traces monotone {monotone}, median throughput ratio {med:.4} (min {:.4}), median utility BCD {:.4} vs brute {:.4}, {secs:.1} s",
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            median(u_bcd),
            median(u_brute)
        ),
    );
}

fn toy_samples(seeds: std::ops::Range<u64>) -> Vec<TrainSample> {
    seeds
        .map(|s| {
            let (ch, w) = rayleigh(s, 2, 2, 2);
            TrainSample {
                features: flatten_features(&ch),
                objective: Objective::new(&ch, &w, 1.0, 0.1, Granularity::Column).unwrap(),
            }
        })
        .collect()
}

/// Criterion 5: Adam's first step, a toy training run, and the plateau rules.
#[test]
fn criterion_5_adam_and_training() {
    let _g = serial();
    let t = Instant::now();
    let mut params = ParamSet {
        tensors: vec![Tensor {
            name: "x".into(),
            value: DMatrix::from_element(1, 1, 1.0),
        }],
    };
    let grads = ParamSet {
        tensors: vec![Tensor {
            name: "x".into(),
            value: DMatrix::from_element(1, 1, 2.0),
        }],
    };
    let mut adam = AdamState::new(&params, 0.01);
    adam_step(&mut params, &grads, &mut adam).unwrap();
    let step = params.tensors[0].value[0] - 1.0;
    let adam_ok = (step + 0.01).abs() <= 1e-6;

    let data = toy_samples(0..20);
    let opts = TrainOptions {
        max_epochs: 200,
        stop_patience: 200,
        lr_patience: 200,
        ..TrainOptions::default()
    };
    let out = train(&data[..16], &data[16..], &opts).unwrap();
    let (first, last) = (
        out.history[0].train_loss,
        out.history.last().unwrap().train_loss,
    );
    let train_ok = out.history.len() == 200 && last < first;

    use PlateauEvent::*;
    let mut s = PlateauScheduler::new(0.01, 0.5, 2, 5);
    let script = [1.0, 1.0, 1.0, 0.5, 0.6, 0.6, 0.6, 0.6, 0.6];
    let expect = [
        Improved, Waiting, Decayed, Improved, Waiting, Decayed, Waiting, Decayed, Stop,
    ];
    let got: Vec<PlateauEvent> = script.iter().map(|&l| s.observe(l)).collect();
    let mut tie = PlateauScheduler::new(0.01, 0.5, 3, 3);
    let tie_got: Vec<PlateauEvent> = [1.0, 2.0, 2.0, 2.0]
        .iter()
        .map(|&l| tie.observe(l))
        .collect();
    let plateau_ok = got == expect
        && (s.learning_rate - 0.01 * 0.125).abs() < 1e-15
        && tie_got == [Improved, Waiting, Waiting, Stop];

    let secs = t.elapsed().as_secs_f64();
    report(
        5,
        adam_ok && train_ok && plateau_ok && secs < 60.0,
        &format!(
            "first Adam step {step:.9}, toy loss {first:.9} -> {last:.9} over {} epochs, plateau script {}, {secs:.1} s",
            out.history.len(),
            if plateau_ok { "matches" } else { "differs" }
        ),
    );
}

/// Criterion 6: Kaiser retention on a dataset whose sample correlation
/// matrix is known exactly: features 1 and 2 have correlation ρ, the rest
/// are uncorrelated, so the eigenvalues are 1 + ρ, 1 − ρ, 1, 1, 1.
#[test]
fn criterion_6_pca_kaiser() {
    let _g = serial();
    let t = Instant::now();
    let (n, rho) = (400, 0.6);
    let mut raw = gaussian(42, n, 5);
    for mut c in raw.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    // Orthonormal, zero-mean columns: exactly uncorrelated in the sample.
    let q = raw.qr().q();
    let scale = (n as f64 - 1.0).sqrt();
    let mut x = q * scale;
    let (a, b) = (x.column(0).clone_owned(), x.column(1).clone_owned());
    x.set_column(1, &(a * rho + b * (1.0 - rho * rho).sqrt()));

    let model = pca_fit(&x).unwrap();
    let mut expected = [1.0 + rho, 1.0, 1.0, 1.0, 1.0 - rho];
    expected.sort_by(|p, q| q.total_cmp(p));
    let eig_ok = model
        .eigenvalues
        .iter()
        .zip(&expected)
        .all(|(e, x)| (e - x).abs() < 1e-9);

    let z: Vec<f64> = x
        .row_iter()
        .map(|r| {
            model
                .transform(&r.iter().copied().collect::<Vec<_>>())
                .unwrap()[0]
        })
        .collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let var_ok = within(var, 1.0 + rho, 1e-6);

    let secs = t.elapsed().as_secs_f64();
    report(
        6,
        model.retained_dim == 1 && eig_ok && var_ok && secs < 5.0,
        &format!(
            "retained {} of 5 (eigenvalues {:?}), component variance {var:.9} vs {:.1}, {secs:.3} s",
            model.retained_dim,
            model.eigenvalues.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>(),
            1.0 + rho
        ),
    );
}

/// Criterion 7: the PCA input shrinks only the first layer, by D / D_T.
#[test]
fn criterion_7_parameter_counts() {
    let _g = serial();
    let t = Instant::now();
    let (k, n, side) = (3, 4, 8);
    let d = feature_dim(k, n, side * side);
    let arch = |input_dim| MlpArch {
        input_dim,
        ..MlpArch::new(0, side * side, k * side)
    };
    let raw = parameter_count(&arch(d));
    let pca = parameter_count(&arch(6));
    let width = ris_core::learn::mlp::DEFAULT_HIDDEN[0] as u64;
    // Everything except the first weight matrix is shared.
    let rest = raw - d as u64 * width;
    let ratio = (raw - rest) as f64 / (pca - rest) as f64;
    let secs = t.elapsed().as_secs_f64();
    report(
        7,
        pca < raw && rest == pca - 6 * width && ratio == d as f64 / 6.0 && secs < 1.0,
        &format!("network parameters: without PCA (D={d}) {raw}, with PCA (D_T=6) {pca}, first-layer ratio {ratio}"),
    );
}

fn desk_source() -> ConfigSource {
    ConfigSource {
        config: None,
        profile: Profile::Desk,
    }
}

fn row<'a>(rows: &'a [CompareRow], scheme: &str, mode: &str) -> &'a CompareRow {
    rows.iter()
        .find(|r| r.scheme == scheme && r.mode == mode)
        .unwrap_or_else(|| panic!("missing row {scheme}/{mode}"))
}

/// Criterion 8: desk-scale end to end (K=3, N=4, L=8, 200/50 samples, α=1).
/// Mean utilities are negative here, so "≥ 0.8 × BCD" is read on the mean
/// α-mean throughput; "≥ uniform" is read on the utility itself. Network
/// time is batched inference over the validation split per sample.
#[test]
fn criterion_8_desk_end_to_end() {
    let _g = serial();
    let t = Instant::now();
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("model.ckpt");
    let mut sink = Vec::new();
    cmd_generate(
        &GenerateArgs {
            source: desk_source(),
            seed: 1000,
            n_train: None,
            n_val: None,
            out: data.clone(),
        },
        &mut sink,
    )
    .unwrap();
    cmd_train(
        &TrainArgs {
            source: desk_source(),
            data: data.clone(),
            alpha: 1.0,
            no_pca: false,
            seed: None,
            max_epochs: None,
            out: model.clone(),
            history: None,
        },
        &mut sink,
    )
    .unwrap();
    let rows = cmd_compare(
        &CompareArgs {
            source: desk_source(),
            data: data.clone(),
            model: vec![model.clone()],
            scheme: vec![Scheme::Uniform, Scheme::Bcd, Scheme::NnPca],
            alpha: 1.0,
            tol: None,
            seed: None,
            out: Some(dir.path().join("compare.csv")),
            no_timing: false,
        },
        &mut sink,
    )
    .unwrap();
    let single = single_sample_latency(&data, &model);

    let nn = row(&rows, "nn+pca", "binary");
    let nn_rel = row(&rows, "nn+pca", "relaxed");
    let bcd = row(&rows, "bcd", "binary");
    let uniform = row(&rows, "uniform", "binary");
    let ratio = nn.mean_alpha_throughput_bps / bcd.mean_alpha_throughput_bps;
    let vs_bcd = ratio >= 0.8;
    let vs_uniform = nn.mean_utility >= uniform.mean_utility;
    let faster = nn.mean_seconds < bcd.mean_seconds;
    let secs = t.elapsed().as_secs_f64();
    report(
        8,
        vs_bcd && vs_uniform && faster && secs < 1200.0,
        &format!(
            "throughput ratio NN/BCD {ratio:.5} (>= 0.8: {vs_bcd}); utility NN {:.6} (relaxed {:.6}) vs uniform {:.6} (>= uniform: {vs_uniform}), BCD {:.6}; \
             per-sample seconds NN {:.3e} batched / {single:.3e} single vs BCD {:.3e} (faster: {faster}); {secs:.0} s",
            nn.mean_utility,
            nn_rel.mean_utility,
            uniform.mean_utility,
            bcd.mean_utility,
            nn.mean_seconds,
            bcd.mean_seconds
        ),
    );
}

/// Mean latency of one-at-a-time inference over the validation split.
fn single_sample_latency(data: &Path, model: &Path) -> f64 {
    let ds = ris_core::dataset::load_dataset(data).unwrap();
    let ckpt = load_checkpoint(model).unwrap();
    let noise = ds.manifest.config.noise_watts();
    let val = ds.validation();
    let objs: Vec<Objective> = val
        .iter()
        .map(|s| {
            Objective::new(&s.channels, &s.beamformers, 1.0, noise, Granularity::Column).unwrap()
        })
        .collect();
    let t = Instant::now();
    for (s, obj) in val.iter().zip(&objs) {
        infer(
            &ckpt.model,
            &ckpt.features,
            &flatten_features(&s.channels),
            obj,
        )
        .unwrap();
    }
    t.elapsed().as_secs_f64() / val.len() as f64
}

fn ris(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_ris"))
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "ris {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn run_pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let p = |name: &str| root.join(name).to_str().unwrap().to_string();
    let (data, model, bcd, csv) = (p("data"), p("model.ckpt"), p("bcd"), p("compare.csv"));
    ris(&["generate", "--seed", "1000", "--out", &data]);
    ris(&[
        "train",
        "--data",
        &data,
        "--max-epochs",
        "10",
        "--out",
        &model,
    ]);
    ris(&[
        "bcd",
        "--data",
        &data,
        "--index",
        "0",
        "--out",
        &bcd,
        "--no-timing",
    ]);
    ris(&[
        "compare",
        "--data",
        &data,
        "--model",
        &model,
        "--scheme",
        "uniform",
        "--scheme",
        "bcd",
        "--scheme",
        "nn+pca",
        "--out",
        &csv,
        "--no-timing",
    ]);
    [
        "data/manifest.json",
        "data/records.bin",
        "model.ckpt",
        "model.history.csv",
        "bcd/trace.csv",
        "bcd/result.json",
        "compare.csv",
    ]
    .iter()
    .map(|f| (f.to_string(), std::fs::read(root.join(f)).unwrap()))
    .collect()
}

/// Criterion 9: generate, train, bcd and compare are byte-reproducible.
#[test]
fn criterion_9_determinism() {
    let _g = serial();
    let t = Instant::now();
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let secs = t.elapsed().as_secs_f64();
    report(
        9,
        differing.is_empty(),
        &format!(
            "{} output files compared across two desk-scale runs (training capped at 10 epochs), differing: {differing:?}, {secs:.0} s",
            first.len()
        ),
    );
}
