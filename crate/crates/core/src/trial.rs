//! Normalized, nonnegative trial amplitude tables over the full basis.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SpinConfig, TfiModel, MAX_TABLE_SITES};

/// Coefficients of the two-body Jastrow ansatz
/// `psi(x) = exp(lambda1 sum_k s_k s_{k+1} + lambda2 sum_k s_k s_{k+2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JastrowParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for JastrowParams {
    fn default() -> Self {
        JastrowParams {
            lambda1: 0.233,
            lambda2: 0.083,
        }
    }
}

impl JastrowParams {
    pub fn log_amplitude(&self, x: SpinConfig, model: &TfiModel) -> f64 {
        self.lambda1 * model.bond_sum(x, 1) as f64 + self.lambda2 * model.bond_sum(x, 2) as f64
    }
}

/// Where a noisy table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseProvenance {
    pub base_seed: u64,
    pub realization: u64,
    pub shots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableKind {
    ExactJastrow,
    ExactGroundState,
    Uniform,
    Noisy(NoiseProvenance),
}

impl TableKind {
    pub fn is_noisy(&self) -> bool {
        matches!(self, TableKind::Noisy(_))
    }
}

/// What to build a table from.
#[derive(Debug, Clone, Copy)]
pub enum TrialSpec<'a> {
    Jastrow(JastrowParams),
    /// A ground-state vector, typically from [`crate::exact::ground_state`].
    GroundState(&'a [f64]),
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTable {
    sites: usize,
    amps: Vec<f64>,
    kind: TableKind,
}

pub(crate) fn check_table_size(sites: usize) -> Result<()> {
    if sites > MAX_TABLE_SITES {
        return Err(Error::TooLarge {
            len: sites,
            max: MAX_TABLE_SITES,
        });
    }
    Ok(())
}

impl AmplitudeTable {
    pub fn build(spec: TrialSpec<'_>, model: &TfiModel) -> Result<Self> {
        check_table_size(model.sites())?;
        match spec {
            TrialSpec::Jastrow(p) => Self::jastrow(p, model),
            TrialSpec::GroundState(v) => {
                Self::from_vector(model.sites(), v.to_vec(), TableKind::ExactGroundState)
            }
            TrialSpec::Uniform => Self::uniform(model),
        }
    }

    pub fn uniform(model: &TfiModel) -> Result<Self> {
        check_table_size(model.sites())?;
        let dim = model.dim();
        let value = 1.0 / (dim as f64).sqrt();
        Ok(AmplitudeTable {
            sites: model.sites(),
            amps: vec![value; dim],
            kind: TableKind::Uniform,
        })
    }

    /// Evaluated in the log domain and shifted by the maximum before
    /// exponentiation.
    pub fn jastrow(params: JastrowParams, model: &TfiModel) -> Result<Self> {
        check_table_size(model.sites())?;
        if !(params.lambda1.is_finite() && params.lambda2.is_finite()) {
            return Err(Error::Overflow(format!(
                "non-finite Jastrow parameters {params:?}"
            )));
        }
        let logs: Vec<f64> = (0..model.dim() as u64)
            .into_par_iter()
            .map(|x| params.log_amplitude(SpinConfig(x), model))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        // exp underflows to zero below about -745; keep well clear of it
        if !max.is_finite() || max - min > 700.0 {
            return Err(Error::Overflow(format!(
                "log-amplitude span {:.1} exceeds the representable range",
                max - min
            )));
        }
        let amps = logs.into_par_iter().map(|v| (v - max).exp()).collect();
        let mut table = AmplitudeTable {
            sites: model.sites(),
            amps,
            kind: TableKind::ExactJastrow,
        };
        table.normalize()?;
        Ok(table)
    }

    /// Takes an arbitrary-scale nonnegative vector and normalizes it.
    pub fn from_vector(sites: usize, amps: Vec<f64>, kind: TableKind) -> Result<Self> {
        check_table_size(sites)?;
        if amps.len() != 1usize << sites {
            return Err(Error::InvalidTable(format!(
                "expected {} amplitudes for L = {sites}, got {}",
                1usize << sites,
                amps.len()
            )));
        }
        if let Some((i, a)) = amps
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a >= 0.0))
        {
            return Err(Error::InvalidTable(format!(
                "amplitude {a} at state {i:#x} is negative or not finite"
            )));
        }
        let mut table = AmplitudeTable { sites, amps, kind };
        table.normalize()?;
        Ok(table)
    }

    /// Wraps amplitudes that are already normalized (shot-noise tables).
    pub(crate) fn from_normalized(sites: usize, amps: Vec<f64>, kind: TableKind) -> Self {
        debug_assert_eq!(amps.len(), 1usize << sites);
        AmplitudeTable { sites, amps, kind }
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidTable(format!("cannot normalize, norm = {norm}")));
        }
        self.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(())
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.sites
    }

    #[inline]
    pub fn kind(&self) -> TableKind {
        self.kind
    }

    #[inline]
    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    #[inline]
    pub fn amp(&self, x: SpinConfig) -> f64 {
        self.amps[x.index()]
    }

    /// Born probabilities `|psi(x)|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a * a).collect()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    pub fn matches(&self, model: &TfiModel) -> Result<()> {
        if self.sites != model.sites() {
            return Err(Error::InvalidTable(format!(
                "table has L = {}, model has L = {}",
                self.sites,
                model.sites()
            )));
        }
        Ok(())
    }

    /// Debug dump with columns `state_index,amplitude`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema_version=1 kind={:?} L={}", self.kind, self.sites)?;
        writeln!(out, "state_index,amplitude")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(out, "{i},{a}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_up_log_amplitude() {
        let m = TfiModel::critical(6).unwrap();
        let p = JastrowParams::default();
        let v = p.log_amplitude(SpinConfig(0), &m);
        assert!((v - 1.896).abs() < 1e-12);
        assert!((v.exp() - 6.659).abs() < 1e-3);
        let zero = JastrowParams {
            lambda1: 0.0,
            lambda2: 0.0,
        };
        assert_eq!(zero.log_amplitude(SpinConfig(0b101101), &m), 0.0);
    }

    #[test]
    fn uniform_three_sites() {
        let m = TfiModel::critical(3).unwrap();
        let t = AmplitudeTable::uniform(&m).unwrap();
        for &a in t.amps() {
            assert!((a - 0.353_553_390_593_273_8).abs() < 1e-12);
        }
    }

    #[test]
    fn jastrow_largest_entries_are_ferromagnetic() {
        let m = TfiModel::critical(6).unwrap();
        let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
        // brute force: the unnormalized table from the closed form
        let raw: Vec<f64> = (0..64u64)
            .map(|x| {
                let s = |k: usize| 1.0 - 2.0 * ((x >> (k % 6)) & 1) as f64;
                let nn: f64 = (0..6).map(|k| s(k) * s(k + 1)).sum();
                let nnn: f64 = (0..6).map(|k| s(k) * s(k + 2)).sum();
                (0.233 * nn + 0.083 * nnn).exp()
            })
            .collect();
        let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
        for (x, r) in raw.iter().enumerate() {
            assert!((t.amps()[x] - r / norm).abs() < 1e-14);
        }
        let mut order: Vec<usize> = (0..64).collect();
        order.sort_by(|&a, &b| t.amps()[b].total_cmp(&t.amps()[a]));
        let top: Vec<usize> = order[..2].to_vec();
        assert!(top.contains(&0) && top.contains(&63));
        assert_eq!(t.amps()[0], t.amps()[63]);
        assert!(t.amps()[0] > t.amps()[order[2]]);
    }

    #[test]
    fn zero_jastrow_is_uniform() {
        let m = TfiModel::critical(7).unwrap();
        let j = AmplitudeTable::jastrow(
            JastrowParams {
                lambda1: 0.0,
                lambda2: 0.0,
            },
            &m,
        )
        .unwrap();
        let u = AmplitudeTable::uniform(&m).unwrap();
        assert_eq!(j.amps(), u.amps());
    }

    #[test]
    fn overflow_guard() {
        let m = TfiModel::critical(12).unwrap();
        let p = JastrowParams {
            lambda1: 40.0,
            lambda2: 0.0,
        };
        assert!(matches!(AmplitudeTable::jastrow(p, &m), Err(Error::Overflow(_))));
    }

    #[test]
    fn rejects_oversized_and_malformed() {
        let m = TfiModel::critical(27).unwrap();
        assert!(matches!(
            AmplitudeTable::uniform(&m),
            Err(Error::TooLarge { len: 27, .. })
        ));
        assert!(AmplitudeTable::from_vector(2, vec![1.0; 3], TableKind::Uniform).is_err());
        assert!(
            AmplitudeTable::from_vector(2, vec![1.0, -0.1, 1.0, 1.0], TableKind::Uniform).is_err()
        );
        assert!(AmplitudeTable::from_vector(2, vec![0.0; 4], TableKind::Uniform).is_err());
    }

    #[test]
    fn csv_dump() {
        let m = TfiModel::critical(2).unwrap();
        let t = AmplitudeTable::uniform(&m).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "state_index,amplitude");
        assert_eq!(lines[2], "0,0.5");
        assert_eq!(lines.len(), 6);
    }

    proptest! {
        #[test]
        fn jastrow_normalized_and_flip_symmetric(
            l in 2usize..=14,
            l1 in -1.0f64..1.0,
            l2 in -1.0f64..1.0,
        ) {
            let m = TfiModel::critical(l).unwrap();
            let t = AmplitudeTable::jastrow(JastrowParams { lambda1: l1, lambda2: l2 }, &m).unwrap();
            prop_assert!((t.norm_squared() - 1.0).abs() < 1e-12);
            for x in 0..m.dim() as u64 {
                let y = !x & m.mask();
                prop_assert_eq!(t.amp(SpinConfig(x)), t.amp(SpinConfig(y)));
                prop_assert!(t.amp(SpinConfig(x)) > 0.0);
            }
        }
    }
}
