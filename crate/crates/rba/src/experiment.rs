//! End-to-end runs: sample → standardize → estimate ratios → select λ → fit
//! → evaluate on the target, repeated over seeds and optionally over source
//! sample sizes.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rba_core::density_ratio::fit_ratio_cv;
use rba_core::kernel_rba::has_duplicate_rows;
use rba_core::model_select::{default_grid, select, LambdaSummary, Scheme, ScoreRow, SelectionPlan};
use rba_core::{ClipBounds, Dataset, KernelSpec, Matrix, MetricReport, Predictor, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::bias::{bias_sample, BiasKind, BiasPlan};
use crate::error::{config, Error, Result};
use crate::io::{read_labelled_csv, write_json, write_records};
use crate::methods::{fit_method, kernel_label, FitSettings, Method};
use crate::scenarios::{scenario, SCENARIO_VERSION};
use crate::stats::{mean, paired_t_test, sd, PairedTTest};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

pub fn default_label_column() -> String {
    "label".into()
}

fn default_count() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRef {
    pub name: String,
    #[serde(default = "default_count")]
    pub n_src: usize,
    #[serde(default = "default_count")]
    pub n_trg: usize,
}

/// A method as listed in the config: either a bare name or an object that
/// overrides the kernel, selection scheme or λ for that entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodSpec {
    Name(Method),
    Detailed(MethodEntry),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// Fixed λ; skips selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Column name in the report; defaults to the method name, with the
    /// kernel appended when it overrides the experiment kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MethodSpec {
    pub fn entry(&self) -> MethodEntry {
        match self {
            MethodSpec::Name(m) => MethodEntry {
                method: *m,
                kernel: None,
                scheme: None,
                lambda: None,
                label: None,
            },
            MethodSpec::Detailed(e) => e.clone(),
        }
    }
}

impl MethodEntry {
    pub fn display_name(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (&self.kernel, self.method.is_kernel()) {
            (Some(k), true) => format!("{}[{}]", self.method, kernel_label(k)),
            _ => self.method.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    /// Forces one scheme for every method; by default LR/KLR use CV and the
    /// ratio-aware methods IWCV.
    #[serde(default)]
    pub scheme: Option<Scheme>,
}

fn default_folds() -> usize {
    5
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            folds: default_folds(),
            grid: default_grid(),
            scheme: None,
        }
    }
}

/// Discriminator settings for the density ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioConfig {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            folds: default_folds(),
            grid: default_grid(),
        }
    }
}

fn default_kernel() -> KernelSpec {
    KernelSpec::polynomial(2)
}
fn default_repeats() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioRef>,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_plan: Option<BiasPlan>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Source sample sizes to sweep; defaults to the single configured size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub clip: ClipBounds,
    #[serde(default)]
    pub ratio: RatioConfig,
    /// Standardize features with source-sample mean and sd.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

enum Source {
    Data(Dataset),
    Synthetic(crate::bias::Synthetic2d),
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let sources = usize::from(self.dataset.is_some())
            + usize::from(self.scenario.is_some())
            + usize::from(matches!(&self.bias_plan, Some(BiasPlan { kind: BiasKind::Synthetic2d(_), .. })));
        if sources != 1 {
            return config("give exactly one of dataset, scenario or a synthetic_2d bias_plan");
        }
        if self.dataset.is_some() && self.bias_plan.is_none() {
            return config("a dataset needs a bias_plan");
        }
        if self.scenario.is_some() && self.bias_plan.is_some() {
            return config("scenario and bias_plan are mutually exclusive");
        }
        if let Some(s) = &self.scenario {
            scenario(&s.name)?;
            if s.n_src == 0 || s.n_trg == 0 {
                return config("scenario sample sizes must be positive");
            }
        }
        if let Some(p) = &self.bias_plan {
            p.validate(None)?;
        }
        if self.methods.is_empty() {
            return config("methods is empty");
        }
        let mut names: Vec<String> = self.methods.iter().map(|m| m.entry().display_name()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return config("method names must be distinct; add a label to repeated methods");
        }
        for m in &self.methods {
            let e = m.entry();
            if let Some(k) = e.kernel {
                k.validate()?;
            }
            if let Some(l) = e.lambda {
                if !(l > 0.0 && l.is_finite()) {
                    return config(format!("fixed lambda for {} must be positive", e.display_name()));
                }
            }
        }
        self.kernel.validate()?;
        if self.repeats == 0 {
            return config("repeats must be at least 1");
        }
        if let Some(sizes) = &self.sample_sizes {
            if sizes.is_empty() || sizes.contains(&0) {
                return config("sample_sizes must be a non-empty list of positive counts");
            }
        }
        self.train.validate()?;
        self.clip.validate()?;
        let plan = SelectionPlan {
            folds: self.selection.folds,
            grid: self.selection.grid.clone(),
            scheme: Scheme::Cv,
            seed: 0,
            clip: self.clip,
        };
        plan.validate(usize::MAX)?;
        if self.ratio.grid.is_empty() || self.ratio.folds < 2 {
            return config("ratio needs a non-empty grid and at least two folds");
        }
        Ok(())
    }

    fn sizes(&self) -> Vec<usize> {
        if let Some(s) = &self.sample_sizes {
            return s.clone();
        }
        match (&self.scenario, &self.bias_plan) {
            (Some(s), _) => vec![s.n_src],
            (None, Some(p)) => vec![p.n_src],
            _ => vec![],
        }
    }
}

/// Per-column affine map fitted on the source sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Columns with zero spread keep scale 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            var.iter_mut().zip(r).zip(&mean).for_each(|((s, v), m)| *s += (v - m).powi(2));
        }
        let denom = (x.rows().max(2) - 1) as f64;
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / denom).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn apply_dataset(&self, d: &Dataset) -> Result<Dataset> {
        Ok(Dataset::new(self.apply(d.features()), d.labels().to_vec(), d.class_count())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: String,
    pub lambda: Option<f64>,
    pub metrics: Option<MetricReport>,
    pub iterations: usize,
    pub converged: bool,
    pub selection: Vec<LambdaSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub index: usize,
    pub seed: u64,
    pub n_src: usize,
    pub n_trg: usize,
    pub ratio_lambda: Option<f64>,
    /// Source sample contains repeated feature rows (singular Gram matrix).
    pub duplicate_source_rows: bool,
    pub error: Option<String>,
    pub runs: Vec<MethodRun>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| MeanSd { mean: mean(xs), sd: sd(xs) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub estimator: Method,
    pub kernel: Option<KernelSpec>,
    pub n_src: usize,
    pub successes: usize,
    pub logloss: Option<MeanSd>,
    pub entropy: Option<MeanSd>,
    pub accuracy: Option<MeanSd>,
}

/// Paired t-test on per-repeat target logloss, `a` minus `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    pub n_src: usize,
    pub test: PairedTTest,
}

/// Everything that varies between otherwise identical runs lives here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStamp {
    pub started_unix_s: u64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub timestamp: RunStamp,
    pub version: u32,
    pub config: ExperimentConfig,
    pub data: String,
    pub preprocessing: String,
    pub clip: ClipBounds,
    pub seeds: Vec<u64>,
    pub repeats: Vec<RepeatRecord>,
    pub summary: Vec<MethodSummary>,
    pub paired_tests: Vec<PairedComparison>,
    /// λ-selection scores of every (repeat, method, λ, fold).
    #[serde(skip)]
    pub score_table: Vec<ScoreLine>,
    /// Source and target ratios of every repeat.
    #[serde(skip)]
    pub ratio_table: Vec<RatioLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreLine {
    pub repeat: usize,
    pub n_src: usize,
    pub method: String,
    pub lambda: f64,
    pub fold: usize,
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioLine {
    pub repeat: usize,
    pub n_src: usize,
    pub set: &'static str,
    pub row: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveLine {
    pub method: String,
    pub n_src: usize,
    pub successes: usize,
    pub logloss_mean: f64,
    pub logloss_sd: f64,
    pub entropy_mean: f64,
    pub entropy_sd: f64,
    pub accuracy_mean: f64,
    pub accuracy_sd: f64,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: &str, n_src: usize) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method && s.n_src == n_src)
    }

    /// Per-repeat metrics of one method at one size, in repeat order.
    pub fn metrics_for(&self, method: &str, n_src: usize) -> Vec<MetricReport> {
        self.repeats
            .iter()
            .filter(|r| r.n_src == n_src)
            .flat_map(|r| r.runs.iter().filter(|m| m.method == method).filter_map(|m| m.metrics))
            .collect()
    }

    pub fn curves(&self) -> Vec<CurveLine> {
        let nan = MeanSd { mean: f64::NAN, sd: f64::NAN };
        self.summary
            .iter()
            .map(|s| CurveLine {
                method: s.method.clone(),
                n_src: s.n_src,
                successes: s.successes,
                logloss_mean: s.logloss.unwrap_or(nan).mean,
                logloss_sd: s.logloss.unwrap_or(nan).sd,
                entropy_mean: s.entropy.unwrap_or(nan).mean,
                entropy_sd: s.entropy.unwrap_or(nan).sd,
                accuracy_mean: s.accuracy.unwrap_or(nan).mean,
                accuracy_sd: s.accuracy.unwrap_or(nan).sd,
            })
            .collect()
    }

    /// Writes `report.json`, `scores.csv`, `ratios.csv` and `curves.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("report.json"), self)?;
        write_records(&dir.join("scores.csv"), &self.score_table)?;
        write_records(&dir.join("ratios.csv"), &self.ratio_table)?;
        write_records(&dir.join("curves.csv"), &self.curves())
    }
}

/// Runs the configured experiment. Relative dataset paths resolve against
/// the current directory. Fails only if the config is invalid or every
/// repeat fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);

    let (source, data_desc) = match (&cfg.dataset, &cfg.scenario, &cfg.bias_plan) {
        (Some(d), _, Some(plan)) => {
            let data = read_labelled_csv(&d.path, &d.label_column, None)?;
            plan.validate(Some(data.dataset.dim()))?;
            let desc = format!(
                "{} ({} rows, {} features, {} classes)",
                d.path.display(),
                data.dataset.len(),
                data.dataset.dim(),
                data.dataset.class_count()
            );
            (Source::Data(data.dataset), desc)
        }
        (None, Some(s), _) => (Source::Synthetic(scenario(&s.name)?), format!("scenario {} v{SCENARIO_VERSION}", s.name)),
        (None, None, Some(BiasPlan { kind: BiasKind::Synthetic2d(p), .. })) => {
            (Source::Synthetic(p.clone()), "synthetic_2d bias plan".to_string())
        }
        _ => return config("no data source"),
    };

    let entries: Vec<MethodEntry> = cfg.methods.iter().map(MethodSpec::entry).collect();
    let mut repeats = Vec::new();
    let mut score_table = Vec::new();
    let mut ratio_table = Vec::new();
    let mut seeds = Vec::new();
    for index in 0..cfg.repeats {
        let seed = cfg.seed.wrapping_add(index as u64);
        seeds.push(seed);
        for &n_src in &cfg.sizes() {
            let rec = run_repeat(cfg, &source, &entries, index, seed, n_src, &mut score_table, &mut ratio_table);
            repeats.push(rec);
        }
    }
    if repeats.iter().all(|r| r.error.is_some()) {
        let first = repeats[0].error.clone().unwrap_or_default();
        return Err(match first.strip_prefix("numerical: ") {
            Some(msg) => rba_core::Error::NumericalFailure {
                iteration: 0,
                message: format!("every repeat failed; first: {msg}"),
            }
            .into(),
            None => Error::Config(format!("every repeat failed; first: {first}")),
        });
    }

    let mut summary = Vec::new();
    let mut paired_tests = Vec::new();
    for &n_src in &cfg.sizes() {
        let at_size: Vec<&RepeatRecord> = repeats.iter().filter(|r| r.n_src == n_src && r.error.is_none()).collect();
        let metric = |name: &str| -> Vec<Option<MetricReport>> {
            at_size
                .iter()
                .map(|r| r.runs.iter().find(|m| m.method == name).and_then(|m| m.metrics))
                .collect()
        };
        for e in &entries {
            let name = e.display_name();
            let ok: Vec<MetricReport> = metric(&name).into_iter().flatten().collect();
            let col = |f: fn(&MetricReport) -> f64| MeanSd::of(&ok.iter().map(f).collect::<Vec<_>>());
            summary.push(MethodSummary {
                method: name,
                estimator: e.method,
                kernel: e.method.is_kernel().then(|| e.kernel.unwrap_or(cfg.kernel)),
                n_src,
                successes: ok.len(),
                logloss: col(|m| m.logloss_bits),
                entropy: col(|m| m.entropy_bits),
                accuracy: col(|m| m.accuracy),
            });
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                let (ma, mb) = (metric(&a.display_name()), metric(&b.display_name()));
                let (xa, xb): (Vec<f64>, Vec<f64>) = ma
                    .iter()
                    .zip(&mb)
                    .filter_map(|(x, y)| Some((x.as_ref()?.logloss_bits, y.as_ref()?.logloss_bits)))
                    .unzip();
                if let Some(test) = paired_t_test(&xa, &xb) {
                    paired_tests.push(PairedComparison {
                        a: a.display_name(),
                        b: b.display_name(),
                        n_src,
                        test,
                    });
                }
            }
        }
    }

    let preprocessing = if cfg.standardize {
        "features standardized to zero mean and unit variance with source-sample statistics (zero-variance columns only centred)"
    } else {
        "none"
    };
    Ok(ExperimentReport {
        timestamp: RunStamp {
            started_unix_s,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
        version: REPORT_VERSION,
        config: cfg.clone(),
        data: data_desc,
        preprocessing: preprocessing.to_string(),
        clip: cfg.clip,
        seeds,
        repeats,
        summary,
        paired_tests,
        score_table,
        ratio_table,
    })
}

fn describe(e: &Error) -> String {
    match e {
        Error::Core(rba_core::Error::NumericalFailure { message, .. }) => format!("numerical: {message}"),
        other => other.to_string(),
    }
}

/// Draws this repeat's source and target samples.
fn draw(cfg: &ExperimentConfig, source: &Source, seed: u64, n_src: usize) -> Result<(Dataset, Dataset)> {
    match source {
        Source::Data(data) => {
            let mut plan = cfg.bias_plan.clone().expect("validated");
            plan.seed = seed;
            plan.n_src = n_src;
            let s = bias_sample(data, &plan)?;
            Ok((s.src, s.trg))
        }
        Source::Synthetic(p) => {
            let n_trg = match (&cfg.scenario, &cfg.bias_plan) {
                (Some(s), _) => s.n_trg,
                (None, Some(b)) => b.n_trg,
                _ => unreachable!("validated"),
            };
            p.sample(n_src, n_trg, seed)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_repeat(
    cfg: &ExperimentConfig,
    source: &Source,
    entries: &[MethodEntry],
    index: usize,
    seed: u64,
    n_src: usize,
    score_table: &mut Vec<ScoreLine>,
    ratio_table: &mut Vec<RatioLine>,
) -> RepeatRecord {
    let mut rec = RepeatRecord {
        index,
        seed,
        n_src,
        n_trg: 0,
        ratio_lambda: None,
        duplicate_source_rows: false,
        error: None,
        runs: Vec::new(),
    };
    let prepared = (|| -> Result<(Dataset, Dataset, Vec<f64>, Vec<f64>, f64)> {
        let (mut src, mut trg) = draw(cfg, source, seed, n_src)?;
        if cfg.standardize {
            let st = Standardizer::fit(src.features());
            src = st.apply_dataset(&src)?;
            trg = st.apply_dataset(&trg)?;
        }
        let sel = fit_ratio_cv(src.features(), trg.features(), &cfg.ratio.grid, cfg.ratio.folds, seed, cfg.clip)?;
        let src_r = sel.model.ratios(src.features())?;
        let trg_r = sel.model.ratios(trg.features())?;
        Ok((src, trg, src_r, trg_r, sel.lambda))
    })();
    let (src, trg, src_r, trg_r, ratio_lambda) = match prepared {
        Ok(p) => p,
        Err(e) => {
            rec.error = Some(describe(&e));
            return rec;
        }
    };
    rec.n_trg = trg.len();
    rec.ratio_lambda = Some(ratio_lambda);
    rec.duplicate_source_rows = has_duplicate_rows(src.features());
    for (set, rs) in [("source", &src_r), ("target", &trg_r)] {
        ratio_table.extend(rs.iter().enumerate().map(|(row, &ratio)| RatioLine {
            repeat: index,
            n_src,
            set,
            row,
            ratio,
        }));
    }

    for e in entries {
        let name = e.display_name();
        let settings = FitSettings {
            kernel: e.kernel.unwrap_or(cfg.kernel),
            clip: cfg.clip,
            train: cfg.train,
        };
        let mut run = MethodRun {
            method: name.clone(),
            lambda: None,
            metrics: None,
            iterations: 0,
            converged: false,
            selection: Vec::new(),
            error: None,
        };
        let outcome = (|| -> Result<()> {
            let lambda = match (e.lambda, e.method.is_regularized()) {
                (Some(l), _) => l,
                (None, false) => cfg.selection.grid[0],
                (None, true) => {
                    let plan = SelectionPlan {
                        folds: cfg.selection.folds,
                        grid: cfg.selection.grid.clone(),
                        scheme: e.scheme.or(cfg.selection.scheme).unwrap_or(e.method.default_scheme()),
                        seed,
                        clip: cfg.clip,
                    };
                    let fit = |l: f64, d: &Dataset, r: &[f64]| fit_method(e.method, d, r, l, &settings).map(|(m, _)| m);
                    let sel = select(&plan, fit, &src, &src_r)?;
                    score_table.extend(sel.table.iter().map(|row: &ScoreRow| ScoreLine {
                        repeat: index,
                        n_src,
                        method: name.clone(),
                        lambda: row.lambda,
                        fold: row.fold,
                        score: row.score,
                    }));
                    run.selection = sel.summary;
                    sel.best_lambda
                }
            };
            run.lambda = Some(lambda);
            let (model, info) = fit_method(e.method, &src, &src_r, lambda, &settings)?;
            run.iterations = info.iterations;
            run.converged = info.converged;
            let preds = model.predict_batch(trg.features(), &trg_r)?;
            run.metrics = Some(MetricReport::evaluate(&preds, trg.labels())?);
            Ok(())
        })();
        if let Err(err) = outcome {
            run.error = Some(describe(&err));
        }
        rec.runs.push(run);
    }
    rec
}
