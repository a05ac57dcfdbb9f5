//! Emulation of ideal projective measurements of a positive trial state.
//!
//! `M` computational-basis shots are drawn from `|psi(x)|^2` in one pass
//! over the table with the conditional-binomial method, and each amplitude
//! is re-estimated as `sqrt(count / M)`. States that received no shots get
//! amplitude exactly zero.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfmc::local_energy;
use crate::model::{SpinConfig, TfiModel};
use crate::seed::{derive_seed, shots_rng};
use crate::trial::{AmplitudeTable, NoiseProvenance, TableKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub sites: usize,
    pub shots: u64,
    pub counts: Vec<u64>,
}

/// Draws `Multinomial(shots, probs)`. Cost is linear in the table size and
/// independent of `shots`.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<ShotCounts> {
    let dim = probs.len();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "probability table length {dim} is not 2^L"
        )));
    }
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be finite and >= 0".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }

    // tail[x] = sum_{y >= x} p[y], accumulated from the back so the
    // conditional probability of the last occupied state is exactly 1
    let mut tail = vec![0.0; dim];
    let mut acc = 0.0;
    for x in (0..dim).rev() {
        acc += probs[x];
        tail[x] = acc;
    }
    let last = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("probabilities sum to one");

    let mut counts = vec![0u64; dim];
    let mut remaining = shots;
    for x in 0..=last {
        if remaining == 0 {
            break;
        }
        if probs[x] == 0.0 {
            continue;
        }
        let c = if x == last {
            remaining
        } else {
            let p = (probs[x] / tail[x]).min(1.0);
            Binomial::new(remaining, p)
                .map_err(|e| Error::InvalidArgument(format!("binomial({remaining}, {p}): {e}")))?
                .sample(rng)
        };
        counts[x] = c;
        remaining -= c;
    }
    Ok(ShotCounts {
        sites: dim.trailing_zeros() as usize,
        shots,
        counts,
    })
}

/// `amps[x] = sqrt(counts[x] / M)`.
pub fn noisy_amplitudes(counts: &ShotCounts, provenance: NoiseProvenance) -> AmplitudeTable {
    let m = counts.shots as f64;
    let amps = counts.counts.iter().map(|&c| (c as f64 / m).sqrt()).collect();
    AmplitudeTable::from_normalized(counts.sites, amps, TableKind::Noisy(provenance))
}

/// One frozen noisy realization of `exact`, seeded from
/// `derive_seed(base_seed, L, shots, realization)`.
pub fn noisy_table(
    exact: &AmplitudeTable,
    shots: u64,
    base_seed: u64,
    realization: u64,
) -> Result<AmplitudeTable> {
    let seed = derive_seed(base_seed, exact.sites(), shots, realization);
    let mut rng = shots_rng(seed);
    let counts = sample_counts(&exact.probabilities(), shots, &mut rng)?;
    Ok(noisy_amplitudes(
        &counts,
        NoiseProvenance {
            base_seed,
            realization,
            shots,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub rep: u64,
    /// Position when states are sorted by decreasing exact amplitude.
    pub rank: usize,
    pub state: SpinConfig,
    pub exact_amp: f64,
    pub noisy_amp: f64,
    pub exact_eloc: f64,
    /// `None` where the state received no shots.
    pub noisy_eloc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEnergyScan {
    pub sites: usize,
    pub m0: u64,
    pub shots: u64,
    pub seed: u64,
    pub reps: u64,
    pub rows: Vec<ScanRow>,
}

/// Noisy versus exact local energies over the full basis, for `reps`
/// independent shot budgets of `M = m0 * 2^L`.
pub fn local_energy_scan(
    model: &TfiModel,
    trial: &AmplitudeTable,
    m0: u64,
    reps: u64,
    seed: u64,
) -> Result<LocalEnergyScan> {
    trial.matches(model)?;
    if m0 == 0 {
        return Err(Error::InvalidArgument("M0 must be >= 1".into()));
    }
    let dim = model.dim();
    let shots = m0
        .checked_mul(dim as u64)
        .ok_or_else(|| Error::InvalidArgument("M0 * 2^L overflows".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| trial.amps()[b].total_cmp(&trial.amps()[a]).then(a.cmp(&b)));
    let exact_eloc: Vec<f64> = (0..dim as u64)
        .into_par_iter()
        .map(|x| local_energy(SpinConfig(x), trial, model))
        .collect::<Result<_>>()?;

    let per_rep: Vec<Vec<ScanRow>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let noisy = noisy_table(trial, shots, seed, rep)?;
            let rows = order
                .iter()
                .enumerate()
                .map(|(rank, &x)| {
                    let state = SpinConfig(x as u64);
                    ScanRow {
                        rep,
                        rank,
                        state,
                        exact_amp: trial.amps()[x],
                        noisy_amp: noisy.amps()[x],
                        exact_eloc: exact_eloc[x],
                        noisy_eloc: local_energy(state, &noisy, model).ok(),
                    }
                })
                .collect();
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    Ok(LocalEnergyScan {
        sites: model.sites(),
        m0,
        shots,
        seed,
        reps,
        rows: per_rep.into_iter().flatten().collect(),
    })
}

impl LocalEnergyScan {
    /// Columns `rep,rank,state,exact_amp,noisy_amp,exact_eloc,noisy_eloc,L,M0,seed`;
    /// a missing noisy local energy is written as `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema_version=1 local_energy_scan M={}", self.shots)?;
        writeln!(
            out,
            "rep,rank,state,exact_amp,noisy_amp,exact_eloc,noisy_eloc,L,M0,seed"
        )?;
        for r in &self.rows {
            let noisy = match r.noisy_eloc {
                Some(v) => v.to_string(),
                None => "NA".to_string(),
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.rep,
                r.rank,
                r.state.0,
                r.exact_amp,
                r.noisy_amp,
                r.exact_eloc,
                noisy,
                self.sites,
                self.m0,
                self.seed
            )?;
        }
        Ok(())
    }

    /// Per-state root-mean-square deviation of the noisy local energy from
    /// the exact one, over the replicates where it is defined. Indexed by
    /// rank; `None` for states never defined.
    pub fn rms_deviation_by_rank(&self) -> Vec<Option<f64>> {
        let dim = 1usize << self.sites;
        let mut sum = vec![0.0; dim];
        let mut n = vec![0usize; dim];
        for r in &self.rows {
            if let Some(e) = r.noisy_eloc {
                sum[r.rank] += (e - r.exact_eloc).powi(2);
                n[r.rank] += 1;
            }
        }
        sum.iter()
            .zip(&n)
            .map(|(s, &k)| (k > 0).then(|| (s / k as f64).sqrt()))
            .collect()
    }

    /// Exact local energy per rank.
    pub fn exact_by_rank(&self) -> Vec<f64> {
        let dim = 1usize << self.sites;
        self.rows[..dim].iter().map(|r| r.exact_eloc).collect()
    }
}
