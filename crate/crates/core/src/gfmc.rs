//! Single-walker Green's function Monte Carlo with importance sampling.
//!
//! From a walker at `x` the importance-sampled Green's function row is
//!
//! ```text
//! Gbar(x -> x') = psi(x') (Lambda delta(x, x') - H(x', x)) / psi(x)
//! b(x)          = sum_x' Gbar(x -> x') = Lambda - e_L(x)
//! ```
//!
//! and the walker moves to `x'` with probability `Gbar / b`. Walker weights
//! are never stored; only the `b` sequence is kept, and the energy estimate
//! reweights each local energy by the product of the preceding `l` values
//! of `b`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SpinConfig, TfiModel};
use crate::seed::chain_rng;
use crate::trial::{AmplitudeTable, TableKind};

pub const DEFAULT_CHAIN_LENGTH: usize = 50_000;
pub const DEFAULT_WARMUP: usize = 1_000;
pub const DEFAULT_L_REWEIGHT: usize = 100;

/// Steps between exact recomputations of the sliding log-weight window.
const WINDOW_REFRESH: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GfmcConfig {
    /// Diagonal shift `Lambda` of the projector `Lambda - H`.
    pub lambda_shift: f64,
    /// Total transition steps, including warmup.
    pub chain_length: usize,
    pub warmup: usize,
    pub l_reweight: usize,
    pub seed: u64,
}

impl GfmcConfig {
    /// Defaults with `Lambda = L (J + Gamma)`.
    pub fn for_model(model: &TfiModel) -> Self {
        GfmcConfig {
            lambda_shift: default_lambda_shift(model),
            chain_length: DEFAULT_CHAIN_LENGTH,
            warmup: DEFAULT_WARMUP,
            l_reweight: DEFAULT_L_REWEIGHT,
            seed: 0,
        }
    }

    pub fn validate(&self, model: &TfiModel) -> Result<()> {
        let bound = model.sites() as f64 * model.coupling();
        if !(self.lambda_shift.is_finite() && self.lambda_shift > bound) {
            return Err(Error::InvalidGfmc(format!(
                "lambda_shift {} must exceed L*J = {bound}",
                self.lambda_shift
            )));
        }
        if self.chain_length <= self.warmup + self.l_reweight {
            return Err(Error::InvalidGfmc(format!(
                "chain_length ({}) must exceed warmup + l_reweight ({} + {})",
                self.chain_length, self.warmup, self.l_reweight
            )));
        }
        Ok(())
    }
}

pub fn default_lambda_shift(model: &TfiModel) -> f64 {
    model.sites() as f64 * (model.coupling() + model.field())
}

/// `e_L(x) = sum_x' H(x', x) psi(x') / psi(x)`.
pub fn local_energy(x: SpinConfig, table: &AmplitudeTable, model: &TfiModel) -> Result<f64> {
    let here = table.amp(x);
    if here <= 0.0 {
        return Err(Error::ZeroAmplitude { state: x.0 });
    }
    let mut ratio_sum = 0.0;
    for k in 0..model.sites() {
        ratio_sum += table.amp(x.flip(k));
    }
    Ok(model.diagonal_energy(x) + model.flip_element() * ratio_sum / here)
}

/// A row of the importance-sampled Green's function, in connected-set
/// order (diagonal first, then flips by ascending site).
#[derive(Debug, Clone, PartialEq)]
pub struct GreenRow {
    pub weights: Vec<f64>,
    pub b: f64,
}

pub fn green_row(x: SpinConfig, table: &AmplitudeTable, model: &TfiModel, lambda: f64) -> Result<GreenRow> {
    let mut weights = vec![0.0; model.sites() + 1];
    let b = fill_green_row(x, table, model, lambda, &mut weights)?;
    Ok(GreenRow { weights, b })
}

/// Writes the row into `weights` and returns `b`.
#[inline]
fn fill_green_row(
    x: SpinConfig,
    table: &AmplitudeTable,
    model: &TfiModel,
    lambda: f64,
    weights: &mut [f64],
) -> Result<f64> {
    let amps = table.amps();
    let here = amps[x.index()];
    if here <= 0.0 {
        return Err(Error::ZeroAmplitude { state: x.0 });
    }
    let diag = lambda - model.diagonal_energy(x);
    if diag < 0.0 {
        return Err(Error::NegativeWeight {
            state: x.0,
            weight: diag,
        });
    }
    weights[0] = diag;
    let off = -model.flip_element() / here;
    let mut b = diag;
    for k in 0..model.sites() {
        let w = off * amps[x.flip(k).index()];
        weights[k + 1] = w;
        b += w;
    }
    Ok(b)
}

/// Index into the connected set, first entry whose cumulative weight
/// exceeds `u * b`.
#[inline]
fn pick(weights: &[f64], b: f64, u: f64) -> usize {
    let target = u * b;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding left target at or above the last partial sum
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[inline]
fn neighbour(x: SpinConfig, slot: usize) -> SpinConfig {
    if slot == 0 {
        x
    } else {
        x.flip(slot - 1)
    }
}

/// One move of the walker with probability `Gbar(x -> x') / b(x)`.
pub fn transition_step<R: Rng + ?Sized>(
    x: SpinConfig,
    table: &AmplitudeTable,
    model: &TfiModel,
    lambda: f64,
    rng: &mut R,
) -> Result<SpinConfig> {
    let row = green_row(x, table, model, lambda)?;
    let slot = pick(&row.weights, row.b, rng.random::<f64>());
    Ok(neighbour(x, slot))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub states: Vec<SpinConfig>,
    pub b_values: Vec<f64>,
    pub e_values: Vec<f64>,
    pub config: GfmcConfig,
    pub table_kind: TableKind,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Debug dump with columns `n,state,b,e`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema_version=1 chain")?;
        writeln!(out, "n,state,b,e")?;
        for (n, ((x, b), e)) in self
            .states
            .iter()
            .zip(&self.b_values)
            .zip(&self.e_values)
            .enumerate()
        {
            writeln!(out, "{n},{},{b},{e}", x.0)?;
        }
        Ok(())
    }
}

/// Starting state drawn from `|psi|^2`.
fn initial_state<R: Rng + ?Sized>(table: &AmplitudeTable, rng: &mut R) -> Result<SpinConfig> {
    let total = table.norm_squared();
    if !(total > 0.0) {
        return Err(Error::InvalidTable("every amplitude is zero".into()));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, a) in table.amps().iter().enumerate() {
        if *a > 0.0 {
            acc += a * a;
            last_positive = Some(i);
            if target < acc {
                return Ok(SpinConfig(i as u64));
            }
        }
    }
    Ok(SpinConfig(last_positive.expect("positive norm") as u64))
}

/// Runs `chain_length` steps and records the states after warmup together
/// with their `b` and local energies.
pub fn run_chain(cfg: &GfmcConfig, table: &AmplitudeTable, model: &TfiModel) -> Result<ChainRecord> {
    cfg.validate(model)?;
    table.matches(model)?;
    let mut rng = chain_rng(cfg.seed);
    let mut x = initial_state(table, &mut rng)?;

    let kept = cfg.chain_length - cfg.warmup;
    let mut states = Vec::with_capacity(kept);
    let mut b_values = Vec::with_capacity(kept);
    let mut e_values = Vec::with_capacity(kept);
    let mut weights = vec![0.0; model.sites() + 1];

    for step in 0..cfg.chain_length {
        let b = fill_green_row(x, table, model, cfg.lambda_shift, &mut weights)?;
        if step >= cfg.warmup {
            states.push(x);
            b_values.push(b);
            e_values.push(cfg.lambda_shift - b);
        }
        let slot = pick(&weights, b, rng.random::<f64>());
        x = neighbour(x, slot);
    }

    Ok(ChainRecord {
        states,
        b_values,
        e_values,
        config: *cfg,
        table_kind: table.kind(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReweightedEnergy {
    pub estimate: f64,
    /// `sum_n w_n e_n` with `w_n = exp(log G_n - shift)`.
    pub numerator: f64,
    /// `sum_n w_n`.
    pub denominator: f64,
    /// Common log-scale removed from every weight.
    pub log_shift: f64,
}

/// `sum_n G_n e_n / sum_n G_n` with `G_n = prod_{i=1..l} b_{n-i}`, over
/// `n = l .. len-1`.
pub fn reweighted_energy(record: &ChainRecord, l: usize) -> Result<ReweightedEnergy> {
    let len = record.len();
    if len <= l {
        return Err(Error::RecordTooShort { len, needed: l });
    }
    if let Some(b) = record.b_values.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::InvalidArgument(format!("non-positive b value {b}")));
    }
    let logs: Vec<f64> = record.b_values.iter().map(|b| b.ln()).collect();

    let mut log_weights = Vec::with_capacity(len - l);
    let mut window: f64 = logs[..l].iter().sum();
    for n in l..len {
        if n > l {
            if (n - l) % WINDOW_REFRESH == 0 {
                window = logs[n - l..n].iter().sum();
            } else {
                window += logs[n - 1] - logs[n - 1 - l];
            }
        }
        log_weights.push(window);
    }
    let log_shift = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // accumulate deviations from a reference value so that a constant
    // sequence reproduces itself exactly
    let reference = record.e_values[l];
    let mut den = 0.0;
    let mut dev = 0.0;
    for (lw, e) in log_weights.iter().zip(&record.e_values[l..]) {
        let w = (lw - log_shift).exp();
        den += w;
        dev += w * (e - reference);
    }
    let estimate = reference + dev / den;
    Ok(ReweightedEnergy {
        estimate,
        numerator: reference * den + dev,
        denominator: den,
        log_shift,
    })
}

/// Plain mean of the recorded local energies.
pub fn average_local_energy(record: &ChainRecord) -> Result<f64> {
    if record.is_empty() {
        return Err(Error::RecordTooShort { len: 0, needed: 0 });
    }
    let reference = record.e_values[0];
    let dev: f64 = record.e_values.iter().map(|e| e - reference).sum();
    Ok(reference + dev / record.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{ground_state, DEFAULT_TOL};
    use crate::shots::noisy_table;
    use crate::trial::{JastrowParams, NoiseProvenance};
    use proptest::prelude::*;

    fn synthetic(b: Vec<f64>, e: Vec<f64>) -> ChainRecord {
        ChainRecord {
            states: vec![SpinConfig(0); b.len()],
            b_values: b,
            e_values: e,
            config: GfmcConfig {
                lambda_shift: 1.0,
                chain_length: 0,
                warmup: 0,
                l_reweight: 0,
                seed: 0,
            },
            table_kind: TableKind::Uniform,
        }
    }

    #[test]
    fn uniform_local_energy() {
        let m = TfiModel::critical(4).unwrap();
        let t = AmplitudeTable::uniform(&m).unwrap();
        assert!((local_energy(SpinConfig(0), &t, &m).unwrap() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn jastrow_local_energy_brute_force() {
        let m = TfiModel::critical(6).unwrap();
        let p = JastrowParams::default();
        let t = AmplitudeTable::jastrow(p, &m).unwrap();
        // unnormalized closed form over the 7-element connected set
        let psi = |x: u64| {
            let s = |k: usize| 1.0 - 2.0 * ((x >> (k % 6)) & 1) as f64;
            let nn: f64 = (0..6).map(|k| s(k) * s(k + 1)).sum();
            let nnn: f64 = (0..6).map(|k| s(k) * s(k + 2)).sum();
            (0.233 * nn + 0.083 * nnn).exp()
        };
        for x in [0u64, 0b000001, 0b010101, 0b110010] {
            let s = |k: usize| 1.0 - 2.0 * ((x >> (k % 6)) & 1) as f64;
            let diag: f64 = -(0..6).map(|k| s(k) * s(k + 1)).sum::<f64>();
            let off: f64 = (0..6).map(|k| -psi(x ^ (1 << k)) / psi(x)).sum();
            let got = local_energy(SpinConfig(x), &t, &m).unwrap();
            assert!((got - (diag + off)).abs() < 1e-12, "x={x:b}");
        }
    }

    #[test]
    fn zero_variance_with_ground_state() {
        let m = TfiModel::critical(6).unwrap();
        let gs = ground_state(&m, DEFAULT_TOL).unwrap();
        let t = AmplitudeTable::build(crate::trial::TrialSpec::GroundState(&gs.vector), &m).unwrap();
        for x in 0..64 {
            let e = local_energy(SpinConfig(x), &t, &m).unwrap();
            assert!((e - gs.energy).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_green_row() {
        let m = TfiModel::critical(4).unwrap();
        let t = AmplitudeTable::uniform(&m).unwrap();
        let row = green_row(SpinConfig(0), &t, &m, 8.0).unwrap();
        assert_eq!(row.weights, vec![12.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(row.b, 16.0);
        let probs: Vec<f64> = row.weights.iter().map(|w| w / row.b).collect();
        assert_eq!(probs[0], 0.75);
        assert!(probs[1..].iter().all(|&p| p == 1.0 / 16.0));
    }

    #[test]
    fn zero_amplitude_neighbour_gets_zero_weight() {
        let m = TfiModel::critical(3).unwrap();
        let mut amps = vec![1.0; 8];
        amps[0b010] = 0.0;
        let t = AmplitudeTable::from_vector(3, amps, TableKind::Uniform).unwrap();
        let row = green_row(SpinConfig(0), &t, &m, 6.0).unwrap();
        assert_eq!(row.weights[2], 0.0);
        assert!(matches!(
            local_energy(SpinConfig(0b010), &t, &m),
            Err(Error::ZeroAmplitude { state: 2 })
        ));
        assert!(green_row(SpinConfig(0b010), &t, &m, 6.0).is_err());
    }

    #[test]
    fn transition_frequencies_match_row() {
        let m = TfiModel::critical(4).unwrap();
        let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
        let x = SpinConfig(0b0010);
        let row = green_row(x, &t, &m, 8.0).unwrap();
        let mut rng = chain_rng(17);
        let n = 1_000_000;
        let mut hits = [0usize; 5];
        for _ in 0..n {
            let y = transition_step(x, &t, &m, 8.0, &mut rng).unwrap();
            let slot = if y == x { 0 } else { (y.0 ^ x.0).trailing_zeros() as usize + 1 };
            hits[slot] += 1;
        }
        for (h, w) in hits.iter().zip(&row.weights) {
            let p = w / row.b;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*h as f64 - n as f64 * p).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn pick_is_first_index_on_ties() {
        assert_eq!(pick(&[1.0, 1.0], 2.0, 0.0), 0);
        assert_eq!(pick(&[0.0, 1.0, 1.0], 2.0, 0.0), 1);
        assert_eq!(pick(&[1.0, 1.0, 0.0], 2.0, 0.9999999999999999), 1);
    }

    #[test]
    fn chain_is_deterministic_and_consistent() {
        let m = TfiModel::critical(6).unwrap();
        let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
        let cfg = GfmcConfig {
            chain_length: 5_000,
            seed: 5,
            ..GfmcConfig::for_model(&m)
        };
        let a = run_chain(&cfg, &t, &m).unwrap();
        let b = run_chain(&cfg, &t, &m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4_000);
        for (x, e) in a.states.iter().zip(&a.e_values) {
            assert!((local_energy(*x, &t, &m).unwrap() - e).abs() < 1e-10);
        }
        for (b, e) in a.b_values.iter().zip(&a.e_values) {
            assert_eq!(*e, cfg.lambda_shift - b);
        }
    }

    #[test]
    fn noisy_chain_never_leaves_support() {
        let m = TfiModel::critical(8).unwrap();
        let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
        let noisy = noisy_table(&t, 2 * 256, 1, 0).unwrap();
        assert!(noisy.amps().contains(&0.0));
        let cfg = GfmcConfig {
            chain_length: 20_000,
            seed: 9,
            ..GfmcConfig::for_model(&m)
        };
        let rec = run_chain(&cfg, &noisy, &m).unwrap();
        assert!(rec.states.iter().all(|x| noisy.amp(*x) > 0.0));
        assert!(rec.b_values.iter().all(|&b| b > 0.0));
        assert_eq!(
            rec.table_kind,
            TableKind::Noisy(NoiseProvenance {
                base_seed: 1,
                realization: 0,
                shots: 512
            })
        );
    }

    #[test]
    fn config_validation() {
        let m = TfiModel::critical(10).unwrap();
        let cfg = GfmcConfig::for_model(&m);
        assert_eq!(cfg.lambda_shift, 20.0);
        assert!(cfg.validate(&m).is_ok());
        let low = GfmcConfig {
            lambda_shift: 10.0,
            ..cfg
        };
        assert!(low.validate(&m).is_err());
        let short = GfmcConfig {
            chain_length: 1_100,
            ..cfg
        };
        let msg = short.validate(&m).unwrap_err().to_string();
        assert!(msg.contains("warmup + l_reweight"), "{msg}");
    }

    #[test]
    fn reweighting_edge_cases() {
        let rec = synthetic(vec![1.0, 3.0, 0.5, 2.0, 7.0], vec![-1.25; 5]);
        assert_eq!(reweighted_energy(&rec, 2).unwrap().estimate, -1.25);
        assert!(matches!(
            reweighted_energy(&rec, 5),
            Err(Error::RecordTooShort { len: 5, needed: 5 })
        ));
        let rec = synthetic(vec![2.5; 6], vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]);
        let r = reweighted_energy(&rec, 2).unwrap();
        assert!((r.estimate - 21.0 / 4.0).abs() < 1e-12);
        assert!((r.numerator / r.denominator - r.estimate).abs() < 1e-12);
        assert_eq!(average_local_energy(&rec).unwrap(), 4.0);
    }

    #[test]
    fn reweighting_matches_direct_products() {
        let b: Vec<f64> = (0..40).map(|i| 0.5 + ((i * 7) % 5) as f64 * 0.3).collect();
        let e: Vec<f64> = (0..40).map(|i| ((i * 3) % 7) as f64 - 2.0).collect();
        let l = 4;
        let (mut num, mut den) = (0.0, 0.0);
        for n in l..40 {
            let g: f64 = (1..=l).map(|i| b[n - i]).product();
            num += g * e[n];
            den += g;
        }
        let r = reweighted_energy(&synthetic(b, e), l).unwrap();
        assert!((r.estimate - num / den).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn b_is_lambda_minus_local_energy(raw in any::<u64>(), l in 3usize..12, seed in any::<u64>()) {
            let m = TfiModel::critical(l).unwrap();
            let t = AmplitudeTable::jastrow(JastrowParams::default(), &m).unwrap();
            let noisy = noisy_table(&t, 4 << l, seed, 0).unwrap();
            let x = SpinConfig(raw & m.mask());
            let lambda = crate::gfmc::default_lambda_shift(&m);
            for table in [&t, &noisy] {
                if table.amp(x) == 0.0 {
                    continue;
                }
                let row = green_row(x, table, &m, lambda).unwrap();
                let e = local_energy(x, table, &m).unwrap();
                prop_assert!((row.b - (lambda - e)).abs() <= 1e-10 * row.b.abs().max(1.0));
                prop_assert!(row.weights.iter().all(|&w| w >= 0.0));
                let total: f64 = row.weights.iter().map(|w| w / row.b).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
