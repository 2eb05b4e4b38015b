//! The six estimators (plus a uniform reference) behind one interface, and
//! their JSON model files.

use std::fmt;

use rba_core::baselines::{self, BaselineModel};
use rba_core::kernel_rba::{self, KernelRbaModel};
use rba_core::model_select::Scheme;
use rba_core::rba::{self, LinearRbaModel};
use rba_core::{ClipBounds, Dataset, FitInfo, KernelSpec, Predictor, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KernelRba,
    Klr,
    Kiw,
    Rba,
    Lr,
    Iw,
    /// Reference predictor that always outputs `1/K`.
    Uniform,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::KernelRba,
        Method::Klr,
        Method::Kiw,
        Method::Rba,
        Method::Lr,
        Method::Iw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::KernelRba => "kernel_rba",
            Method::Klr => "klr",
            Method::Kiw => "kiw",
            Method::Rba => "rba",
            Method::Lr => "lr",
            Method::Iw => "iw",
            Method::Uniform => "uniform",
        }
    }

    /// Whether the fit depends on λ at all.
    pub fn is_regularized(self) -> bool {
        self != Method::Uniform
    }

    pub fn is_kernel(self) -> bool {
        matches!(self, Method::KernelRba | Method::Klr | Method::Kiw)
    }

    /// Unweighted CV for the logistic baselines, IWCV for everything that
    /// uses the density ratio.
    pub fn default_scheme(self) -> Scheme {
        match self {
            Method::Lr | Method::Klr => Scheme::Cv,
            _ => Scheme::Iwcv,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .chain([Method::Uniform])
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected one of kernel_rba, klr, kiw, rba, lr, iw, uniform"))
    }
}

/// A fitted model of any method, serialized with a `"method"` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SavedModel {
    Rba(LinearRbaModel),
    KernelRba(KernelRbaModel),
    Lr(BaselineModel),
    Iw(BaselineModel),
    Klr(BaselineModel),
    Kiw(BaselineModel),
    Uniform { class_count: usize, input_dim: usize },
}

impl SavedModel {
    pub fn method(&self) -> Method {
        match self {
            SavedModel::Rba(_) => Method::Rba,
            SavedModel::KernelRba(_) => Method::KernelRba,
            SavedModel::Lr(_) => Method::Lr,
            SavedModel::Iw(_) => Method::Iw,
            SavedModel::Klr(_) => Method::Klr,
            SavedModel::Kiw(_) => Method::Kiw,
            SavedModel::Uniform { .. } => Method::Uniform,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            SavedModel::Rba(m) => m.lambda,
            SavedModel::KernelRba(m) => m.lambda,
            SavedModel::Lr(m) | SavedModel::Iw(m) | SavedModel::Klr(m) | SavedModel::Kiw(m) => m.lambda,
            SavedModel::Uniform { .. } => 0.0,
        }
    }

    fn inner(&self) -> Option<&dyn Predictor> {
        match self {
            SavedModel::Rba(m) => Some(m),
            SavedModel::KernelRba(m) => Some(m),
            SavedModel::Lr(m) | SavedModel::Iw(m) | SavedModel::Klr(m) | SavedModel::Kiw(m) => Some(m),
            SavedModel::Uniform { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SavedModel::Rba(m) => m.validate()?,
            SavedModel::KernelRba(m) => m.validate()?,
            SavedModel::Lr(m) | SavedModel::Iw(m) | SavedModel::Klr(m) | SavedModel::Kiw(m) => m.validate()?,
            SavedModel::Uniform { class_count, input_dim } => {
                if *class_count == 0 || *input_dim == 0 {
                    return crate::error::config("uniform model needs positive class count and input dimension");
                }
            }
        }
        Ok(())
    }
}

impl Predictor for SavedModel {
    fn class_count(&self) -> usize {
        match (self, self.inner()) {
            (_, Some(m)) => m.class_count(),
            (SavedModel::Uniform { class_count, .. }, None) => *class_count,
            (_, None) => unreachable!("only the uniform model has no inner predictor"),
        }
    }

    fn input_dim(&self) -> usize {
        match (self, self.inner()) {
            (_, Some(m)) => m.input_dim(),
            (SavedModel::Uniform { input_dim, .. }, None) => *input_dim,
            (_, None) => unreachable!("only the uniform model has no inner predictor"),
        }
    }

    fn predict_proba(&self, x: &[f64], ratio: f64) -> rba_core::Result<Vec<f64>> {
        match self.inner() {
            Some(m) => m.predict_proba(x, ratio),
            None => {
                if x.len() != self.input_dim() {
                    return Err(rba_core::Error::InvalidArgument(format!(
                        "input has {} features, model expects {}",
                        x.len(),
                        self.input_dim()
                    )));
                }
                let k = self.class_count();
                Ok(vec![1.0 / k as f64; k])
            }
        }
    }
}

/// Everything a fit needs besides the data and λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSettings {
    /// Used by the kernel methods only.
    pub kernel: KernelSpec,
    pub clip: ClipBounds,
    pub train: TrainConfig,
}

/// Fits `method` on `src`. Ratios are ignored by LR and kernel LR.
pub fn fit_method(
    method: Method,
    src: &Dataset,
    src_ratios: &[f64],
    lambda: f64,
    s: &FitSettings,
) -> rba_core::Result<(SavedModel, FitInfo)> {
    let cfg = &s.train;
    Ok(match method {
        Method::Rba => {
            let t = rba::fit(src, src_ratios, lambda, cfg)?;
            (SavedModel::Rba(t.model), t.info)
        }
        Method::KernelRba => {
            let t = kernel_rba::fit(src, src_ratios, s.kernel, lambda, cfg)?;
            (SavedModel::KernelRba(t.model), t.info)
        }
        Method::Lr => {
            let t = baselines::lr_fit(src, lambda, cfg)?;
            (SavedModel::Lr(t.model), t.info)
        }
        Method::Iw => {
            let t = baselines::iw_fit(src, src_ratios, &s.clip, lambda, cfg)?;
            (SavedModel::Iw(t.model), t.info)
        }
        Method::Klr => {
            let t = baselines::klr_fit(src, s.kernel, lambda, cfg)?;
            (SavedModel::Klr(t.model), t.info)
        }
        Method::Kiw => {
            let t = baselines::kiw_fit(src, src_ratios, &s.clip, s.kernel, lambda, cfg)?;
            (SavedModel::Kiw(t.model), t.info)
        }
        Method::Uniform => (
            SavedModel::Uniform {
                class_count: src.class_count(),
                input_dim: src.dim(),
            },
            FitInfo {
                converged: true,
                ..FitInfo::default()
            },
        ),
    })
}

/// A model file: the model plus the class names its outputs refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: SavedModel,
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
}

/// Short kernel description, e.g. `polynomial-3`, `gaussian-0.5`.
pub fn kernel_label(k: &KernelSpec) -> String {
    match k {
        KernelSpec::Linear => "linear".into(),
        KernelSpec::Polynomial { degree, .. } => format!("polynomial-{degree}"),
        KernelSpec::Gaussian { bandwidth } => format!("gaussian-{bandwidth}"),
    }
}

/// Parses `linear`, `polynomial:<degree>[:<offset>]`, `gaussian:<bandwidth>`
/// or a JSON kernel object.
pub fn parse_kernel(s: &str) -> std::result::Result<KernelSpec, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> std::result::Result<f64, String> {
        parts
            .get(i)
            .ok_or_else(|| format!("kernel {s:?} is missing a parameter"))?
            .parse::<f64>()
            .map_err(|e| format!("kernel {s:?}: {e}"))
    };
    let spec = match parts[0] {
        "linear" if parts.len() == 1 => KernelSpec::Linear,
        "polynomial" | "poly" if parts.len() <= 3 => {
            let degree = num(1)?;
            if degree.fract() != 0.0 || degree < 1.0 {
                return Err(format!("polynomial degree must be a positive integer, got {degree}"));
            }
            KernelSpec::Polynomial {
                degree: degree as u32,
                offset: if parts.len() == 3 { num(2)? } else { 1.0 },
            }
        }
        "gaussian" | "rbf" if parts.len() == 2 => KernelSpec::Gaussian { bandwidth: num(1)? },
        _ => return Err(format!("cannot parse kernel {s:?}")),
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}
