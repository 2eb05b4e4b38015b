//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` are known not to hold with the pinned
//! scenarios and data; they are still run and reported. The process exits
//! non-zero when any outcome differs from what is expected, in either
//! direction, so a silent regression or an unnoticed fix both show up.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rba::experiment::{ExperimentConfig, ExperimentReport};
use rba::rba_core::baselines::{self, importance_weights};
use rba::rba_core::kernels::gram_symmetric;
use rba::rba_core::metrics::logloss;
use rba::rba_core::optim::Objective;
use rba::rba_core::{kernel_rba, rba as linear_rba};
use rba::rba_core::{ClipBounds, Dataset, FeatureMap, KernelSpec, Matrix, Predictor, TrainConfig};

const EXPECTED_FAIL: &[u32] = &[7, 9];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `k` Gaussian blobs in `d` dimensions with random centres.
fn blobs(seed: u64, n: usize, d: usize, k: usize, shift: f64) -> Dataset {
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| r.random_range(-1.5..1.5)).collect()).collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut feats = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        feats.extend((0..d).map(|j| centres[y][j] + shift + normal.sample(&mut r)));
        labels.push(y);
    }
    Dataset::new(Matrix::from_vec(n, d, feats).unwrap(), labels, k).unwrap()
}

fn ratios(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0.3..3.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm-wise relative error of the analytic gradient against central
/// differences, at one parameter point.
fn fd_error(f: &dyn Objective, params: &[f64]) -> f64 {
    let mut g = vec![0.0; f.dim()];
    f.eval(params, &mut g);
    let h = 1e-5;
    let mut p = params.to_vec();
    let fd: Vec<f64> = (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + h;
            let up = f.value(&p);
            p[i] = x - h;
            let down = f.value(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&g).max(norm(&fd)).max(1e-12)
}

fn gradient_check() -> Outcome {
    let started = Instant::now();
    let src = blobs(11, 100, 5, 3, 0.0);
    let r = ratios(12, 100);
    let w = importance_weights(&r, &ClipBounds::default()).unwrap();
    let lambda = 0.01;
    let fm = FeatureMap::for_dataset(&src, true);
    let poly = gram_symmetric(&KernelSpec::polynomial(2), src.features()).unwrap();
    let gauss = gram_symmetric(&KernelSpec::gaussian(1.0), src.features()).unwrap();

    let objectives: Vec<(&str, Box<dyn Objective + '_>)> = vec![
        ("rba", Box::new(linear_rba::potential(fm, &src, &r, lambda).unwrap())),
        ("kernel_rba", Box::new(kernel_rba::potential(&poly, &src, &r, lambda).unwrap())),
        ("lr", Box::new(baselines::linear_potential(fm, &src, None, lambda).unwrap())),
        ("iw", Box::new(baselines::linear_potential(fm, &src, Some(&w), lambda).unwrap())),
        ("klr", Box::new(baselines::kernel_potential(&gauss, &src, None, lambda).unwrap())),
        ("kiw", Box::new(baselines::kernel_potential(&gauss, &src, Some(&w), lambda).unwrap())),
    ];
    let mut worst = (0.0, "");
    for (k, (name, f)) in objectives.iter().enumerate() {
        let mut pr = rng(100 + k as u64);
        for _ in 0..20 {
            let p: Vec<f64> = (0..f.dim()).map(|_| pr.random_range(-0.5..0.5)).collect();
            let e = fd_error(f.as_ref(), &p);
            if e > worst.0 || e.is_nan() {
                worst = (e, name);
            }
        }
    }
    let elapsed = started.elapsed();
    outcome(
        1,
        worst.0 <= 1e-5 && elapsed < Duration::from_secs(60),
        format!("worst relative error {:.2e} ({}), {:.1}s", worst.0, worst.1, elapsed.as_secs_f64()),
    )
}

fn representer_check() -> Outcome {
    let src = blobs(21, 150, 2, 2, 0.0);
    let trg = blobs(21, 150, 2, 2, 0.8);
    let src_r = ratios(22, 150);
    let trg_r = ratios(23, 150);
    let tight = TrainConfig {
        grad_tol: 1e-10,
        max_iters: 50_000,
        ..TrainConfig::default()
    };
    let fm = FeatureMap::new(2, 2, false).unwrap();
    let lin = linear_rba::fit_with_map(fm, &src, &src_r, 0.01, &tight).unwrap();
    let ker = kernel_rba::fit(&src, &src_r, KernelSpec::Linear, 0.01, &tight).unwrap();
    let pl = lin.model.predict_batch(trg.features(), &trg_r).unwrap();
    let pk = ker.model.predict_batch(trg.features(), &trg_r).unwrap();
    let max_diff = pl
        .probs()
        .as_slice()
        .iter()
        .zip(pk.probs().as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ll_diff = (logloss(&pl, trg.labels()).unwrap() - logloss(&pk, trg.labels()).unwrap()).abs();
    let converged = lin.info.converged && ker.info.converged;
    outcome(
        2,
        converged && max_diff <= 1e-4 && ll_diff <= 0.02,
        format!("max entry diff {max_diff:.2e}, logloss diff {ll_diff:.2e} bits, converged {converged}"),
    )
}

fn uniform_limit_check() -> Outcome {
    let src = blobs(31, 200, 5, 3, 0.0);
    let trg = blobs(31, 200, 5, 3, 0.5);
    let r = ratios(32, 200);
    let model = linear_rba::fit(&src, &r, 1.0 / 256.0, &TrainConfig::default()).unwrap().model;
    let tiny = vec![1e-3; trg.len()];
    let p = model.predict_batch(trg.features(), &tiny).unwrap();
    let dev = p.probs().as_slice().iter().map(|v| (v - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    outcome(3, dev < 1e-2, format!("max |p - 1/K| = {dev:.2e}"))
}

fn run(json: &str) -> (ExperimentReport, Duration) {
    let cfg = ExperimentConfig::from_json(json).unwrap();
    let started = Instant::now();
    let report = rba::run_experiment(&cfg).unwrap();
    (report, started.elapsed())
}

fn mean_ll(rep: &ExperimentReport, method: &str, n: usize) -> f64 {
    rep.summary_for(method, n).and_then(|s| s.logloss).unwrap().mean
}

const FIG2: &str = r#"{
  "scenario": {"name": "fig2"},
  "methods": ["rba",
    {"method": "kernel_rba", "kernel": {"kind": "polynomial", "degree": 2}},
    {"method": "kernel_rba", "kernel": {"kind": "polynomial", "degree": 3}}],
  "selection": {"folds": 3, "grid": [0.00390625, 0.0625, 1.0]},
  "repeats": 20, "seed": 0
}"#;

const FIG3: &str = r#"{
  "scenario": {"name": "fig3"},
  "methods": ["rba", {"method": "kernel_rba", "kernel": {"kind": "gaussian", "bandwidth": 0.5}}],
  "selection": {"folds": 3, "grid": [0.00390625, 0.0625, 1.0]},
  "sample_sizes": [100, 200, 400],
  "repeats": 20, "seed": 0
}"#;

const FIG5: &str = r#"{
  "scenario": {"name": "fig5"},
  "methods": [{"method": "kernel_rba", "kernel": {"kind": "gaussian", "bandwidth": 0.5}},
    {"method": "kiw", "kernel": {"kind": "gaussian", "bandwidth": 0.5}}],
  "selection": {"folds": 3, "grid": [0.00390625, 0.0625, 1.0]},
  "repeats": 20, "seed": 0
}"#;

fn digits_config() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/digits.csv");
    format!(
        r#"{{
  "dataset": {{"path": {path:?}, "label_column": "label"}},
  "methods": ["kernel_rba", "klr", "kiw", "rba", "lr", "iw"],
  "kernel": {{"kind": "polynomial", "degree": 2}},
  "selection": {{"folds": 3, "grid": [0.00390625, 0.0625, 1.0]}},
  "bias_plan": {{"kind": "variable_split", "seed": 0}},
  "repeats": 20, "seed": 0
}}"#
    )
}

fn fig2_checks(rep: &ExperimentReport, took: Duration) -> [Outcome; 2] {
    let (lin, poly) = ("rba", "kernel_rba[polynomial-3]");
    let ll = |m| mean_ll(rep, m, 200);
    let ent = |m| rep.summary_for(m, 200).and_then(|s| s.entropy).unwrap().mean;
    let ll_gap = ll(lin) - ll(poly);
    let ent_gap = ent(lin) - ent(poly);
    let bounded = rep
        .metrics_for(poly, 200)
        .iter()
        .filter(|m| m.entropy_bits >= m.logloss_bits)
        .count();
    let runs = rep.metrics_for(poly, 200).len();
    [
        outcome(
            4,
            ll_gap >= 0.15 && ent_gap >= 0.2 && took < Duration::from_secs(300),
            format!(
                "logloss {:.3} -> {:.3} (gap {ll_gap:.3}), entropy {:.3} -> {:.3} (gap {ent_gap:.3}), {:.0}s",
                ll(lin),
                ll(poly),
                ent(lin),
                ent(poly),
                took.as_secs_f64()
            ),
        ),
        outcome(
            5,
            runs == 20 && bounded >= 16,
            format!("entropy >= logloss in {bounded}/{runs} runs"),
        ),
    ]
}

fn fig3_check(rep: &ExperimentReport) -> Outcome {
    let acc = |m: &str, n| rep.summary_for(m, n).and_then(|s| s.accuracy).unwrap().mean;
    let k = "kernel_rba[gaussian-0.5]";
    let (a1, a2, a4) = (acc(k, 100), acc(k, 200), acc(k, 400));
    let base = acc("rba", 100);
    outcome(
        6,
        a1 <= a2 && a2 <= a4 && a4 - a1 >= 0.03 && a4 > base,
        format!("accuracy {a1:.3} -> {a2:.3} -> {a4:.3}, linear rba at n=100 {base:.3}"),
    )
}

fn fig5_check(rep: &ExperimentReport) -> Outcome {
    let s = |m: &str| rep.summary_for(m, 200).and_then(|s| s.logloss).unwrap();
    let (rba, iw) = (s("kernel_rba[gaussian-0.5]"), s("kiw[gaussian-0.5]"));
    outcome(
        7,
        iw.sd >= 1.5 * rba.sd && rba.mean <= iw.mean,
        format!(
            "logloss sd kiw {:.3} vs kernel rba {:.3} ({:.2}x), mean kiw {:.3} vs kernel rba {:.3}",
            iw.sd,
            rba.sd,
            iw.sd / rba.sd,
            iw.mean,
            rba.mean
        ),
    )
}

fn uniform_bound_check(reports: &[(&str, &ExperimentReport, usize)]) -> Outcome {
    let mut worst = (f64::NEG_INFINITY, String::new());
    for (name, rep, classes) in reports {
        let bound = (*classes as f64).log2() + 0.05;
        for s in &rep.summary {
            if !matches!(s.estimator, rba::methods::Method::Rba | rba::methods::Method::KernelRba) {
                continue;
            }
            let excess = s.logloss.unwrap().mean - bound;
            if excess > worst.0 {
                worst = (excess, format!("{name} {} n={}", s.method, s.n_src));
            }
        }
    }
    outcome(
        8,
        worst.0 <= 0.0,
        format!("largest mean logloss minus (log2 K + 0.05): {:.3} bits ({})", worst.0, worst.1),
    )
}

fn ordering_check(rep: &ExperimentReport) -> Outcome {
    let mut means: Vec<(String, f64)> = rep.summary.iter().map(|s| (s.method.clone(), s.logloss.unwrap().mean)).collect();
    means.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best = &means[0].0;
    let krba = mean_ll(rep, "kernel_rba", 200);
    let p = if best == "kernel_rba" {
        1.0
    } else {
        rep.paired_tests
            .iter()
            .find(|t| (t.a == *best && t.b == "kernel_rba") || (t.b == *best && t.a == "kernel_rba"))
            .map(|t| t.test.p_value)
            .unwrap_or(0.0)
    };
    let order: Vec<String> = means.iter().map(|(m, v)| format!("{m} {v:.3}")).collect();
    outcome(
        9,
        p >= 0.05,
        format!("kernel rba {krba:.3}; best {best}, paired p = {p:.2e}; order: {}", order.join(", ")),
    )
}

fn report_bytes(rep: &ExperimentReport) -> String {
    let dir = tempfile::tempdir().unwrap();
    rep.write(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    serde_json::to_string_pretty(&v).unwrap()
}

fn determinism_check() -> Outcome {
    let json = FIG5.replace("\"repeats\": 20", "\"repeats\": 3");
    let a = report_bytes(&run(&json).0);
    let b = report_bytes(&run(&json).0);
    outcome(10, a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let mut results = vec![gradient_check(), representer_check(), uniform_limit_check()];

    let (fig2, fig2_took) = run(FIG2);
    results.extend(fig2_checks(&fig2, fig2_took));
    let (fig3, _) = run(FIG3);
    results.push(fig3_check(&fig3));
    let (fig5, _) = run(FIG5);
    results.push(fig5_check(&fig5));
    let (digits, _) = run(&digits_config());
    results.push(uniform_bound_check(&[
        ("fig2", &fig2, 2),
        ("fig3", &fig3, 2),
        ("fig5", &fig5, 2),
        ("digits", &digits, 10),
    ]));
    results.push(ordering_check(&digits));
    results.push(determinism_check());

    let mut surprises = 0;
    for r in &results {
        let expected = !EXPECTED_FAIL.contains(&r.id);
        let note = match (r.pass, expected) {
            (true, true) | (false, false) => "",
            (false, true) => "  [unexpected failure]",
            (true, false) => "  [expected to fail, passed]",
        };
        if r.pass != expected {
            surprises += 1;
        }
        println!("criterion {:>2}: {}  {}{note}", r.id, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if surprises > 0 {
        eprintln!("{surprises} criteria did not match their expected outcome");
        std::process::exit(1);
    }
}
