//! Pinned two-dimensional shift scenarios used by the figure-style studies.
//!
//! The constants below are part of the public contract: acceptance
//! thresholds are calibrated against them, so changing any value is a
//! breaking change and must bump [`SCENARIO_VERSION`].

use serde::{Deserialize, Serialize};

use crate::bias::Synthetic2d;
use crate::error::{config, Result};
use rba_core::Dataset;

pub const SCENARIO_VERSION: u32 = 1;

pub const SCENARIO_NAMES: [&str; 4] = ["fig1", "fig2", "fig3", "fig5"];

/// Partially overlapping clouds: the target sits up and to the right of the
/// source and the true boundary crosses both.
fn partial_overlap() -> Synthetic2d {
    Synthetic2d {
        src_mean: vec![-0.5, -0.5],
        src_cov: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        trg_mean: vec![1.5, 1.5],
        trg_cov: vec![vec![1.0, -0.3], vec![-0.3, 1.0]],
        boundary_weights: vec![1.0, -1.0],
        boundary_offset: 0.0,
        label_noise: 0.0,
    }
}

/// Closely overlapping clouds with label noise.
fn close_overlap(label_noise: f64) -> Synthetic2d {
    Synthetic2d {
        src_mean: vec![0.0, 0.0],
        src_cov: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
        trg_mean: vec![0.5, 0.5],
        trg_cov: vec![vec![1.0, 0.3], vec![0.3, 1.0]],
        boundary_weights: vec![1.0, 1.0],
        boundary_offset: -0.5,
        label_noise,
    }
}

/// The generator behind a named scenario.
pub fn scenario(name: &str) -> Result<Synthetic2d> {
    match name {
        "fig1" | "fig2" => Ok(partial_overlap()),
        "fig3" => Ok(close_overlap(0.2)),
        "fig5" => Ok(close_overlap(0.1)),
        _ => config(format!("unknown scenario {name:?}; expected one of {}", SCENARIO_NAMES.join(", "))),
    }
}

/// A drawn scenario: samples plus the generating constants and true boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSample {
    pub name: String,
    pub params: Synthetic2d,
    pub src: Dataset,
    pub trg: Dataset,
}

/// Manifest written next to exported scenario CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub name: String,
    pub version: u32,
    pub seed: u64,
    pub n_src: usize,
    pub n_trg: usize,
    pub params: Synthetic2d,
}

pub fn synth_scenario(name: &str, n_src: usize, n_trg: usize, seed: u64) -> Result<ScenarioSample> {
    let params = scenario(name)?;
    if n_src == 0 || n_trg == 0 {
        return config("scenario sample sizes must be positive");
    }
    let (src, trg) = params.sample(n_src, n_trg, seed)?;
    Ok(ScenarioSample {
        name: name.to_string(),
        params,
        src,
        trg,
    })
}

impl ScenarioSample {
    pub fn manifest(&self, seed: u64) -> ScenarioManifest {
        ScenarioManifest {
            name: self.name.clone(),
            version: SCENARIO_VERSION,
            seed,
            n_src: self.src.len(),
            n_trg: self.trg.len(),
            params: self.params.clone(),
        }
    }
}
