//! Config file plus command-line overrides.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use qcqmc_core::config::{AutoToken, LambdaShift, RunConfig, Sizes};
use qcqmc_core::TrialKind;

use crate::cli::{ChainArgs, CommonArgs, ModelArgs};

/// Loads `--config` or starts from defaults, then applies the model and
/// common flags. `default_sizes` is used when neither source names L.
pub fn base_config(common: &CommonArgs, model: &ModelArgs, default_sizes: Option<&[usize]>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let sizes = if !model.sites.is_empty() {
                model.sites.clone()
            } else if let Some(d) = default_sizes {
                d.to_vec()
            } else {
                bail!("no system size: pass --L or a config file with model.L");
            };
            RunConfig::with_sizes(sizes_of(sizes))
        }
    };
    if !model.sites.is_empty() {
        cfg.model.sites = sizes_of(model.sites.clone());
    }
    if let Some(j) = model.coupling {
        cfg.model.coupling = j;
    }
    if let Some(g) = model.field {
        cfg.model.field = g;
    }
    if let Some(seed) = common.seed {
        cfg.experiment.base_seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.output.directory = dir.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn sizes_of(mut sizes: Vec<usize>) -> Sizes {
    if sizes.len() == 1 {
        Sizes::One(sizes.remove(0))
    } else {
        Sizes::Many(sizes)
    }
}

pub fn apply_chain(cfg: &mut RunConfig, chain: &ChainArgs) -> Result<()> {
    if let Some(text) = &chain.lambda_shift {
        cfg.gfmc.lambda_shift = if text == "auto" {
            LambdaShift::Auto(AutoToken::Auto)
        } else {
            LambdaShift::Fixed(
                text.parse()
                    .with_context(|| format!("--lambda-shift `{text}` is neither a number nor `auto`"))?,
            )
        };
    }
    if let Some(n) = chain.chain_length {
        cfg.gfmc.chain_length = n;
    }
    if let Some(n) = chain.warmup {
        cfg.gfmc.warmup = n;
    }
    if let Some(n) = chain.l_reweight {
        cfg.gfmc.l_reweight = n;
    }
    Ok(())
}

pub fn apply_run(cfg: &mut RunConfig, trial: Option<TrialKind>, reps: Option<usize>) {
    if let Some(t) = trial {
        cfg.trial.kind = t;
    }
    if let Some(r) = reps {
        cfg.experiment.replicates = r;
    }
}

/// Validates the merged config and creates the output directory.
pub fn finish(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output.directory);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn single_size(cfg: &RunConfig, command: &str) -> Result<usize> {
    match cfg.sizes().as_slice() {
        [l] => Ok(*l),
        other => bail!("`{command}` takes exactly one system size, got {other:?}"),
    }
}
