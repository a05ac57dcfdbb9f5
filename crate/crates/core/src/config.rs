//! JSON run configuration.
//!
//! Every section is optional and unknown keys are rejected. A minimal file
//! only needs `{"model": {"L": 10}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfmc::{GfmcConfig, DEFAULT_CHAIN_LENGTH, DEFAULT_L_REWEIGHT, DEFAULT_WARMUP};
use crate::model::TfiModel;
use crate::scaling::{
    default_grid, AnalysisSpec, ChainTemplate, FitModel, TrialKind, DEFAULT_L_MIN_EXCLUSIVE, DEFAULT_REPLICATES,
    DEFAULT_TARGETS, DEFAULT_WINDOW,
};
use crate::trial::JastrowParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    One(usize),
    Many(Vec<usize>),
}

impl Sizes {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Sizes::One(l) => vec![*l],
            Sizes::Many(ls) => ls.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "L")]
    pub sites: Sizes,
    #[serde(rename = "J", default = "one")]
    pub coupling: f64,
    #[serde(rename = "Gamma", default = "one")]
    pub field: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub kind: TrialKind,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for TrialSection {
    fn default() -> Self {
        let p = JastrowParams::default();
        TrialSection {
            kind: TrialKind::Jastrow,
            lambda1: p.lambda1,
            lambda2: p.lambda2,
        }
    }
}

impl TrialSection {
    pub fn jastrow(&self) -> JastrowParams {
        JastrowParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaShift {
    Fixed(f64),
    Auto(AutoToken),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoToken {
    Auto,
}

impl Default for LambdaShift {
    fn default() -> Self {
        LambdaShift::Auto(AutoToken::Auto)
    }
}

impl LambdaShift {
    pub fn resolve(&self, model: &TfiModel) -> f64 {
        match self {
            LambdaShift::Fixed(v) => *v,
            LambdaShift::Auto(_) => crate::gfmc::default_lambda_shift(model),
        }
    }

    fn fixed(&self) -> Option<f64> {
        match self {
            LambdaShift::Fixed(v) => Some(*v),
            LambdaShift::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GfmcSection {
    pub lambda_shift: LambdaShift,
    pub chain_length: usize,
    pub warmup: usize,
    pub l_reweight: usize,
}

impl Default for GfmcSection {
    fn default() -> Self {
        GfmcSection {
            lambda_shift: LambdaShift::default(),
            chain_length: DEFAULT_CHAIN_LENGTH,
            warmup: DEFAULT_WARMUP,
            l_reweight: DEFAULT_L_REWEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Shots per basis state; `M = M0 * 2^L`.
    #[serde(rename = "M0", skip_serializing_if = "Option::is_none")]
    pub m0: Option<u64>,
    /// Explicit shot counts, used for every size.
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub shots: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub replicates: usize,
    pub targets: Vec<f64>,
    pub base_seed: u64,
    pub fit_window: (f64, f64),
    /// Per-size overrides of `fit_window`, keyed by L.
    pub fit_windows: BTreeMap<usize, (f64, f64)>,
    pub fit_model: FitModel,
    pub l_min_exclusive: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            replicates: DEFAULT_REPLICATES,
            targets: DEFAULT_TARGETS.to_vec(),
            base_seed: 0,
            fit_window: DEFAULT_WINDOW,
            fit_windows: BTreeMap::new(),
            fit_model: FitModel::Affine,
            l_min_exclusive: DEFAULT_L_MIN_EXCLUSIVE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub trial: TrialSection,
    #[serde(default)]
    pub gfmc: GfmcSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Defaults everywhere except the system sizes.
    pub fn with_sizes(sizes: Sizes) -> Self {
        RunConfig {
            model: ModelSection {
                sites: sizes,
                coupling: 1.0,
                field: 1.0,
            },
            trial: TrialSection::default(),
            gfmc: GfmcSection::default(),
            noise: NoiseSection::default(),
            experiment: ExperimentSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(".", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.model.sites.to_vec()
    }

    pub fn model(&self, sites: usize) -> Result<TfiModel> {
        TfiModel::new(sites, self.model.coupling, self.model.field)
    }

    pub fn gfmc_config(&self, model: &TfiModel, seed: u64) -> GfmcConfig {
        GfmcConfig {
            lambda_shift: self.gfmc.lambda_shift.resolve(model),
            chain_length: self.gfmc.chain_length,
            warmup: self.gfmc.warmup,
            l_reweight: self.gfmc.l_reweight,
            seed,
        }
    }

    pub fn chain_template(&self) -> ChainTemplate {
        ChainTemplate {
            lambda_shift: self.gfmc.lambda_shift.fixed(),
            chain_length: self.gfmc.chain_length,
            warmup: self.gfmc.warmup,
            l_reweight: self.gfmc.l_reweight,
        }
    }

    /// Shot grid for one size: explicit `M`, else `M0 * 2^L`, else the
    /// default geometric bracket.
    pub fn shot_grid(&self, sites: usize) -> Vec<u64> {
        if let Some(ms) = &self.noise.shots {
            ms.clone()
        } else if let Some(m0) = self.noise.m0 {
            vec![m0 << sites]
        } else {
            default_grid(sites)
        }
    }

    pub fn analysis(&self) -> AnalysisSpec {
        AnalysisSpec {
            targets: self.experiment.targets.clone(),
            window: self.experiment.fit_window,
            windows: self.experiment.fit_windows.clone(),
            l_min_exclusive: self.experiment.l_min_exclusive,
            fit_model: self.experiment.fit_model,
            ..AnalysisSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = self.sizes();
        if sizes.is_empty() {
            return Err(invalid("model.L", "at least one system size is required"));
        }
        for &l in &sizes {
            let model = self.model(l).map_err(|e| invalid("model", e.to_string()))?;
            if l > crate::model::MAX_TABLE_SITES {
                return Err(invalid(
                    "model.L",
                    format!("L = {l} exceeds the full-basis limit {}", crate::model::MAX_TABLE_SITES),
                ));
            }
            let cfg = self.gfmc_config(&model, 0);
            let bound = l as f64 * model.coupling();
            if !(cfg.lambda_shift.is_finite() && cfg.lambda_shift > bound) {
                return Err(invalid(
                    "gfmc.lambda_shift",
                    format!("{} must exceed L*J = {bound} for L = {l}", cfg.lambda_shift),
                ));
            }
        }
        let g = &self.gfmc;
        if g.chain_length <= g.warmup + g.l_reweight {
            return Err(invalid(
                "gfmc.chain_length",
                format!(
                    "chain_length ({}) must exceed warmup + l_reweight ({} + {})",
                    g.chain_length, g.warmup, g.l_reweight
                ),
            ));
        }
        if !(self.trial.lambda1.is_finite() && self.trial.lambda2.is_finite()) {
            return Err(invalid("trial", "lambda1 and lambda2 must be finite"));
        }
        if self.noise.m0 == Some(0) {
            return Err(invalid("noise.M0", "must be >= 1"));
        }
        if self.noise.m0.is_some() && self.noise.shots.is_some() {
            return Err(invalid("noise", "give either M0 or M, not both"));
        }
        if let Some(ms) = &self.noise.shots {
            if ms.is_empty() || ms.contains(&0) {
                return Err(invalid("noise.M", "must be a nonempty list of positive shot counts"));
            }
        }
        let e = &self.experiment;
        if e.replicates == 0 {
            return Err(invalid("experiment.replicates", "must be >= 1"));
        }
        if e.targets.is_empty() || e.targets.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("experiment.targets", "must be a nonempty list of positive errors"));
        }
        for (path, w) in std::iter::once(("experiment.fit_window".to_string(), e.fit_window)).chain(
            e.fit_windows
                .iter()
                .map(|(l, w)| (format!("experiment.fit_windows.{l}"), *w)),
        ) {
            if !(w.0 >= 0.0 && w.1 > w.0) {
                return Err(invalid(&path, format!("window [{}, {}] is empty", w.0, w.1)));
            }
        }
        Ok(())
    }
}
