//! Command-line interface of the `rba` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rba_core::density_ratio::fit_ratio_cv;
use rba_core::model_select::{default_grid, select, Scheme, SelectionPlan};
use rba_core::{ClipBounds, KernelSpec, MetricReport, Predictor, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::experiment::{default_label_column, run_experiment, ExperimentConfig};
use crate::io::{
    read_column_csv, read_features_csv, read_json, read_labelled_csv, read_predictions_csv, write_column_csv,
    write_json, write_labelled_csv, write_predictions_csv, LabelledData,
};
use crate::methods::{fit_method, parse_kernel, FitSettings, Method, ModelFile};
use crate::scenarios::synth_scenario;

#[derive(Debug, Parser)]
#[command(name = "rba", version, about = "Robust bias-aware classification under covariate shift")]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a pinned synthetic scenario as source.csv, target.csv and scenario.json.
    Synth(SynthArgs),
    /// Fit the density ratio and write ratios for both samples.
    Ratio(RatioArgs),
    /// Fit one estimator and write its model JSON.
    Fit(FitArgs),
    /// Write class probabilities for a dataset.
    Predict(PredictArgs),
    /// Score a prediction file against labels.
    Evaluate(EvaluateArgs),
    /// Run a full experiment from a config file.
    Experiment,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// fig1, fig2, fig3 or fig5.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 200)]
    pub n_src: usize,
    #[arg(long, default_value_t = 200)]
    pub n_trg: usize,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub method: Option<Method>,
    /// Labelled training CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Single-column ratio CSV aligned with `--data` (all 1 if omitted).
    #[arg(long)]
    pub ratios: Option<PathBuf>,
    /// `linear`, `polynomial:<d>`, `gaussian:<bandwidth>` or a JSON object.
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Option<KernelSpec>,
    /// Fixed λ; selected by cross-validation when omitted.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub label_column: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Single-column ratio CSV aligned with `--data` (all 1 if omitted).
    #[arg(long)]
    pub ratios: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "label")]
    pub label_column: String,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "cv" => Ok(Scheme::Cv),
        "iwcv" => Ok(Scheme::Iwcv),
        _ => Err(format!("unknown scheme {s:?}; expected cv or iwcv")),
    }
}

/// Optional JSON settings for `fit`; command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: Option<Method>,
    pub kernel: Option<KernelSpec>,
    pub lambda: Option<f64>,
    pub scheme: Option<Scheme>,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    pub folds: Option<usize>,
    #[serde(default)]
    pub clip: ClipBounds,
    #[serde(default)]
    pub train: TrainConfig,
    pub label_column: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let out = cli.out.clone();
    match cli.command {
        Command::Synth(a) => synth(a, seed.unwrap_or(0), out.unwrap_or_else(|| PathBuf::from("."))),
        Command::Ratio(a) => ratio(a, seed.unwrap_or(0), out.unwrap_or_else(|| PathBuf::from("."))),
        Command::Fit(a) => fit(a, cli.config.as_deref(), seed.unwrap_or(0), out.unwrap_or_else(|| PathBuf::from("model.json"))),
        Command::Predict(a) => predict(a, out.unwrap_or_else(|| PathBuf::from("predictions.csv"))),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Experiment => {
            let Some(path) = cli.config else {
                return config("experiment needs --config");
            };
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            } else if cfg.output_dir.is_relative() {
                if let Some(parent) = path.parent() {
                    cfg.output_dir = parent.join(&cfg.output_dir);
                }
            }
            if let Some(d) = cfg.dataset.as_mut() {
                if d.path.is_relative() {
                    if let Some(parent) = path.parent() {
                        d.path = parent.join(&d.path);
                    }
                }
            }
            let report = run_experiment(&cfg)?;
            report.write(&cfg.output_dir)?;
            for s in &report.summary {
                let ll = s.logloss.map_or("-".into(), |m| format!("{:.4} ± {:.4}", m.mean, m.sd));
                let acc = s.accuracy.map_or("-".into(), |m| format!("{:.4}", m.mean));
                println!("{:<28} n_src={:<5} logloss {ll}  accuracy {acc}  ({} ok)", s.method, s.n_src, s.successes);
            }
            println!("wrote {}", cfg.output_dir.join("report.json").display());
            Ok(())
        }
    }
}

fn synth(a: SynthArgs, seed: u64, out: PathBuf) -> Result<()> {
    let s = synth_scenario(&a.scenario, a.n_src, a.n_trg, seed)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let label = default_label_column();
    write_labelled_csv(&out.join("source.csv"), &LabelledData::unnamed(s.src.clone()), &label)?;
    write_labelled_csv(&out.join("target.csv"), &LabelledData::unnamed(s.trg.clone()), &label)?;
    write_json(&out.join("scenario.json"), &s.manifest(seed))?;
    println!("wrote {} source and {} target rows to {}", s.src.len(), s.trg.len(), out.display());
    Ok(())
}

fn ratio(a: RatioArgs, seed: u64, out: PathBuf) -> Result<()> {
    let (src, src_names) = read_features_csv(&a.source, &a.label_column)?;
    let (trg, trg_names) = read_features_csv(&a.target, &a.label_column)?;
    if src_names != trg_names {
        return config("source and target files have different feature columns");
    }
    let sel = fit_ratio_cv(&src, &trg, &default_grid(), a.folds, seed, ClipBounds::default())?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&out.join("ratio_model.json"), &sel)?;
    write_column_csv(&out.join("ratios.csv"), "ratio", &sel.model.ratios(&src)?)?;
    write_column_csv(&out.join("target_ratios.csv"), "ratio", &sel.model.ratios(&trg)?)?;
    println!("discriminator lambda {}; wrote ratios to {}", sel.lambda, out.display());
    Ok(())
}

fn load_ratios(path: Option<&Path>, n: usize) -> Result<Vec<f64>> {
    match path {
        None => Ok(vec![1.0; n]),
        Some(p) => {
            let r = read_column_csv(p)?;
            if r.len() != n {
                return config(format!("{} has {} ratios for {n} rows", p.display(), r.len()));
            }
            Ok(r)
        }
    }
}

fn fit(a: FitArgs, cfg_path: Option<&Path>, seed: u64, out: PathBuf) -> Result<()> {
    let fc: FitConfig = match cfg_path {
        Some(p) => read_json(p).map_err(|e| Error::Config(e.to_string()))?,
        None => FitConfig {
            grid: default_grid(),
            ..FitConfig::default()
        },
    };
    let Some(method) = a.method.or(fc.method) else {
        return config("fit needs a method");
    };
    let label_column = a.label_column.or(fc.label_column).unwrap_or_else(default_label_column);
    let data = read_labelled_csv(&a.data, &label_column, None)?;
    let src = &data.dataset;
    let ratios = load_ratios(a.ratios.as_deref(), src.len())?;
    let settings = FitSettings {
        kernel: a.kernel.or(fc.kernel).unwrap_or(KernelSpec::polynomial(2)),
        clip: fc.clip,
        train: fc.train,
    };
    let lambda = match a.lambda.or(fc.lambda) {
        Some(l) => l,
        None => {
            let plan = SelectionPlan {
                folds: fc.folds.unwrap_or(5),
                grid: fc.grid.clone(),
                scheme: a.scheme.or(fc.scheme).unwrap_or(method.default_scheme()),
                seed,
                clip: fc.clip,
            };
            let f = |l: f64, d: &rba_core::Dataset, r: &[f64]| fit_method(method, d, r, l, &settings).map(|(m, _)| m);
            let sel = select(&plan, f, src, &ratios)?;
            sel.best_lambda
        }
    };
    let (model, info) = fit_method(method, src, &ratios, lambda, &settings)?;
    let file = ModelFile {
        model,
        label_names: data.label_names.clone(),
        feature_names: data.feature_names.clone(),
    };
    write_json(&out, &file)?;
    println!(
        "{method}: lambda {lambda}, {} iterations, converged {}, gradient norm {:.3e}; wrote {}",
        info.iterations,
        info.converged,
        info.grad_norm,
        out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs, out: PathBuf) -> Result<()> {
    let file: ModelFile = read_json(&a.model)?;
    file.model.validate()?;
    let (x, names) = read_features_csv(&a.data, &a.label_column)?;
    if names != file.feature_names {
        return config(format!(
            "{} has feature columns {names:?}, the model expects {:?}",
            a.data.display(),
            file.feature_names
        ));
    }
    let ratios = load_ratios(a.ratios.as_deref(), x.rows())?;
    let preds = file.model.predict_batch(&x, &ratios)?;
    write_predictions_csv(&out, &preds, &file.label_names)?;
    println!("wrote {} predictions to {}", preds.rows(), out.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: Option<PathBuf>) -> Result<()> {
    let (preds, labels) = read_predictions_csv(&a.predictions)?;
    let data = read_labelled_csv(&a.data, &a.label_column, Some(&labels))?;
    if data.dataset.len() != preds.rows() {
        return config(format!("{} predictions for {} labelled rows", preds.rows(), data.dataset.len()));
    }
    let report = MetricReport::evaluate(&preds, data.dataset.labels())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("metrics serialize"));
    if let Some(o) = out {
        write_json(&o, &report)?;
    }
    Ok(())
}
