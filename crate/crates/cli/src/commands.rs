use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use qcqmc_core::config::RunConfig;
use qcqmc_core::scaling::{
    analyze, extrapolate_runtime, run_sweep, runtime_for_shots, target_key, write_sweep_csv, AnalysisSpec, E0Cache,
    Estimator, Provenance, ReplicateStats, RuntimeEstimate, SweepSpec,
};
use qcqmc_core::shots::{local_energy_scan, noisy_table};
use qcqmc_core::{
    average_local_energy, derive_seed, ground_state, reweighted_energy, run_chain, AmplitudeTable, ScalingResult,
    TfiModel, TrialKind, TrialSpec,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{CommonArgs, EdArgs, ExtrapolateArgs, GfmcArgs, ScanArgs, SweepArgs};
use crate::manifest::{config_hash, write_json, Manifest, TOOL_VERSION};
use crate::resolve::{apply_chain, apply_run, base_config, finish, single_size};

const DEFAULT_SWEEP_SIZES: [usize; 4] = [6, 8, 10, 12];

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Exact trial table and ground-state energy for one size.
fn trial_setup(cfg: &RunConfig, model: &TfiModel) -> Result<(AmplitudeTable, f64)> {
    let gs = ground_state(model, qcqmc_core::exact::DEFAULT_TOL)?;
    let table = match cfg.trial.kind {
        TrialKind::Jastrow => AmplitudeTable::build(TrialSpec::Jastrow(cfg.trial.jastrow()), model)?,
        TrialKind::ExactGroundstate => AmplitudeTable::build(TrialSpec::GroundState(&gs.vector), model)?,
    };
    Ok((table, gs.energy))
}

#[derive(Serialize)]
struct EdOutput {
    #[serde(rename = "L")]
    sites: usize,
    #[serde(rename = "J")]
    coupling: f64,
    #[serde(rename = "Gamma")]
    field: f64,
    #[serde(rename = "E0")]
    e0: f64,
    #[serde(rename = "E0_per_site")]
    e0_per_site: f64,
    residual: f64,
    iterations: usize,
}

pub fn ed(common: &CommonArgs, args: &EdArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = base_config(common, &args.model, None)?;
    cfg.validate()?;
    let sites = single_size(&cfg, "ed")?;
    let model = cfg.model(sites)?;
    let gs = ground_state(&model, args.tol)?;
    let out = EdOutput {
        sites,
        coupling: model.coupling(),
        field: model.field(),
        e0: gs.energy,
        e0_per_site: gs.energy / sites as f64,
        residual: gs.residual,
        iterations: gs.iterations,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    if common.out_dir.is_some() {
        let dir = finish(&cfg)?;
        write_json(&dir.join("ed.json"), &out)?;
        Manifest::new("ed", Some(&cfg), vec!["ed.json".into()], start.elapsed())?.write(&dir)?;
    }
    Ok(())
}

pub fn scan(common: &CommonArgs, args: &ScanArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(common, &args.model, None)?;
    apply_run(&mut cfg, args.trial, args.reps);
    if let Some(m0) = args.m0 {
        cfg.noise.m0 = Some(m0);
        cfg.noise.shots = None;
    }
    let sites = single_size(&cfg, "scan")?;
    let Some(m0) = cfg.noise.m0 else {
        bail!("`scan` needs --M0 (or noise.M0 in the config)");
    };
    let dir = finish(&cfg)?;
    let model = cfg.model(sites)?;
    let (table, _) = trial_setup(&cfg, &model)?;
    let result = local_energy_scan(
        &model,
        &table,
        m0,
        cfg.experiment.replicates as u64,
        cfg.experiment.base_seed,
    )?;
    let mut out = create(&dir, "local_energy_scan.csv")?;
    result.write_csv(&mut out)?;
    out.flush()?;
    Manifest::new("scan", Some(&cfg), vec!["local_energy_scan.csv".into()], start.elapsed())?.write(&dir)?;
    Ok(())
}

#[derive(Serialize)]
struct GfmcSizeSummary {
    #[serde(rename = "L")]
    sites: usize,
    /// `None` for noiseless runs.
    #[serde(rename = "M")]
    shots: Option<u64>,
    #[serde(rename = "E0_per_site")]
    e0_per_site: f64,
    mean_energy_per_site: f64,
    reweighted: ReplicateStats,
    average_local_energy: ReplicateStats,
    /// `(mean - E0/L) / std_error` of the reweighted estimator.
    z_score: f64,
}

#[derive(Serialize)]
struct GfmcSummary {
    schema_version: u32,
    trial_kind: TrialKind,
    sizes: Vec<GfmcSizeSummary>,
}

pub fn gfmc(common: &CommonArgs, args: &GfmcArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(common, &args.model, None)?;
    apply_chain(&mut cfg, &args.chain)?;
    apply_run(&mut cfg, args.trial, args.reps);
    if args.noiseless {
        cfg.noise.m0 = None;
        cfg.noise.shots = None;
    } else if let Some(m) = args.shots {
        cfg.noise.shots = Some(vec![m]);
        cfg.noise.m0 = None;
    } else if let Some(m0) = args.m0 {
        cfg.noise.m0 = Some(m0);
        cfg.noise.shots = None;
    }
    let dir = finish(&cfg)?;
    let reps = cfg.experiment.replicates as u64;
    let base = cfg.experiment.base_seed;

    let mut outputs = vec!["gfmc_runs.csv".to_string(), "gfmc_summary.json".to_string()];
    let mut csv = create(&dir, "gfmc_runs.csv")?;
    writeln!(csv, "# schema_version=1 gfmc_runs")?;
    writeln!(
        csv,
        "L,M,trial_kind,rep,seed,energy_per_site,avg_energy_per_site,E0_per_site,signed_error"
    )?;
    let mut sizes = Vec::new();
    for sites in cfg.sizes() {
        let model = cfg.model(sites)?;
        let shots = match (&cfg.noise.shots, cfg.noise.m0) {
            (Some(list), _) if list.len() == 1 => Some(list[0]),
            (Some(list), _) => bail!("`gfmc` takes one shot count, got {} in noise.M", list.len()),
            (None, Some(m0)) => Some(m0 << sites),
            (None, None) => None,
        };
        let (table, e0) = trial_setup(&cfg, &model)?;
        let runs: Vec<(u64, f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<(u64, f64, f64)> {
                let seed = derive_seed(base, sites, shots.unwrap_or(0), rep);
                let table = match shots {
                    Some(m) => noisy_table(&table, m, base, rep)?,
                    None => table.clone(),
                };
                let chain_cfg = cfg.gfmc_config(&model, seed);
                let record = run_chain(&chain_cfg, &table, &model)?;
                if args.dump_chains {
                    let mut out = create(&dir, &format!("chain_L{sites}_rep{rep}.csv"))?;
                    record.write_csv(&mut out)?;
                    out.flush()?;
                }
                let rw = reweighted_energy(&record, chain_cfg.l_reweight)?.estimate;
                Ok((seed, rw / sites as f64, average_local_energy(&record)? / sites as f64))
            })
            .collect::<Result<_>>()?;

        let e0_per_site = e0 / sites as f64;
        let m_text = shots.map_or("NA".to_string(), |m| m.to_string());
        for (rep, (seed, rw, avg)) in runs.iter().enumerate() {
            writeln!(
                csv,
                "{sites},{m_text},{},{rep},{seed},{rw},{avg},{e0_per_site},{}",
                cfg.trial.kind.as_str(),
                rw - e0_per_site
            )?;
            if args.dump_chains {
                outputs.push(format!("chain_L{sites}_rep{rep}.csv"));
            }
        }
        let reweighted = ReplicateStats::new(runs.iter().map(|r| r.1).collect(), e0_per_site);
        let plain = ReplicateStats::new(runs.iter().map(|r| r.2).collect(), e0_per_site);
        let mean = reweighted.estimates.iter().sum::<f64>() / reweighted.estimates.len() as f64;
        sizes.push(GfmcSizeSummary {
            sites,
            shots,
            e0_per_site,
            mean_energy_per_site: mean,
            z_score: (mean - e0_per_site) / reweighted.std_error,
            reweighted,
            average_local_energy: plain,
        });
    }
    csv.flush()?;
    write_json(
        &dir.join("gfmc_summary.json"),
        &GfmcSummary {
            schema_version: 1,
            trial_kind: cfg.trial.kind,
            sizes,
        },
    )?;
    Manifest::new("gfmc", Some(&cfg), outputs, start.elapsed())?.write(&dir)?;
    Ok(())
}

pub fn sweep(common: &CommonArgs, args: &SweepArgs) -> Result<()> {
    let start = Instant::now();
    let mut cfg = base_config(common, &args.model, Some(&DEFAULT_SWEEP_SIZES))?;
    apply_chain(&mut cfg, &args.chain)?;
    apply_run(&mut cfg, args.trial, args.reps);
    if !args.shots.is_empty() {
        cfg.noise.shots = Some(args.shots.clone());
        cfg.noise.m0 = None;
    } else if let Some(m0) = args.m0 {
        cfg.noise.m0 = Some(m0);
        cfg.noise.shots = None;
    }
    let dir = finish(&cfg)?;

    let mut spec = SweepSpec::new(cfg.trial.kind, &cfg.sizes(), cfg.experiment.base_seed);
    spec.coupling = cfg.model.coupling;
    spec.field = cfg.model.field;
    spec.jastrow = cfg.trial.jastrow();
    spec.grids = cfg.sizes().into_iter().map(|l| (l, cfg.shot_grid(l))).collect();
    spec.chain = cfg.chain_template();
    spec.replicates = cfg.experiment.replicates;

    let cache_path = dir.join("e0_cache.json");
    let mut cache = E0Cache::load(&cache_path)?;
    let points = run_sweep(&spec, &mut cache)?;
    cache.save(&cache_path)?;

    let mut csv = create(&dir, "sweep_points.csv")?;
    write_sweep_csv(&points, &mut csv)?;
    csv.flush()?;

    let provenance = Provenance {
        seed: cfg.experiment.base_seed,
        config_hash: config_hash(&cfg)?,
        tool_version: TOOL_VERSION.to_string(),
    };
    let reweighted = analyze(&points, &cfg.analysis(), provenance.clone())?;
    let plain_spec = AnalysisSpec {
        estimator: Estimator::Plain,
        ..cfg.analysis()
    };
    let plain = analyze(&points, &plain_spec, provenance)?;
    write_json(&dir.join("scaling_summary.json"), &reweighted)?;
    write_json(&dir.join("average_energy_summary.json"), &plain)?;

    for (key, fit) in &reweighted.global {
        match fit {
            Some(f) => eprintln!("eps = {key}: a = {:.3}, b = {:.4}, R^2 = {:.4}", f.a, f.b, f.r_squared),
            None => eprintln!("eps = {key}: no exponential fit"),
        }
    }
    Manifest::new(
        "sweep",
        Some(&cfg),
        vec![
            "sweep_points.csv".into(),
            "scaling_summary.json".into(),
            "average_energy_summary.json".into(),
            "e0_cache.json".into(),
        ],
        start.elapsed(),
    )?
    .write(&dir)?;
    Ok(())
}

#[derive(Serialize)]
struct Extrapolation {
    schema_version: u32,
    a: f64,
    b: f64,
    #[serde(rename = "L")]
    sites: usize,
    layers: u32,
    clock_hz: f64,
    /// Shots from `a 2^{b L}`.
    formula: RuntimeEstimate,
    /// The supplied quoted shot count at the same layers and clock.
    quoted: RuntimeEstimate,
    formula_over_quoted: f64,
}

pub fn extrapolate(common: &CommonArgs, args: &ExtrapolateArgs) -> Result<()> {
    let start = Instant::now();
    let (a, b) = match &args.summary {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let summary: ScalingResult =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let key = target_key(args.target);
            match summary.global.get(&key) {
                Some(Some(fit)) => (fit.a, fit.b),
                _ => bail!("{} has no exponential fit for eps = {key}", path.display()),
            }
        }
        None => (args.a, args.b),
    };
    let formula = extrapolate_runtime(a, b, args.sites, args.layers, args.clock)?;
    let quoted = runtime_for_shots(args.quoted_shots, args.layers, args.clock)?;
    let out = Extrapolation {
        schema_version: 1,
        a,
        b,
        sites: args.sites,
        layers: args.layers,
        clock_hz: args.clock,
        formula_over_quoted: formula.shots / quoted.shots,
        formula,
        quoted,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("extrapolation.json"), &out)?;
        Manifest::new("extrapolate", None, vec!["extrapolation.json".into()], start.elapsed())?.write(dir)?;
    }
    Ok(())
}
