//! Multi-run experiments: data, chains, traces, summaries and efficiency tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sv_core::asis::{AcceptanceCounter, AcceptanceStats};
use sv_core::diagnostics::{act_table, weighted_summary, EfficiencyRow, PARAM_NAMES};
use sv_core::model::{simulate_sv, LatentPath};
use sv_core::rng::stream_id;
use sv_core::{par, run_chain, ChainTrace, Dataset, Execution, RandomStream, Scheme, StreamPurpose};

use crate::config::{DataSource, ExperimentConfig};

/// Builds the dataset; simulated data comes from stream `(Simulation, 0)`
/// of `data_seed`.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Option<LatentPath>)> {
    match &cfg.data {
        DataSource::File(p) => {
            let ds = Dataset::load(p).with_context(|| format!("reading data from {}", p.display()))?;
            Ok((ds, None))
        }
        DataSource::Simulate { params, n, seed } => {
            let mut rng = RandomStream::for_purpose(*seed, StreamPurpose::Simulation, 0);
            let (ds, x) = simulate_sv(params, *n, &mut rng)?;
            Ok((ds, Some(x)))
        }
    }
}

fn data_stream(cfg: &ExperimentConfig) -> (u64, u64) {
    match &cfg.data {
        DataSource::Simulate { seed, .. } => (*seed, stream_id(StreamPurpose::Simulation, 0)),
        DataSource::File(_) => (0, 0),
    }
}

/// Writes the simulated (or loaded) series as `y,x_true` rows under a provenance line.
pub fn write_data(cfg: &ExperimentConfig, path: &Path) -> Result<Dataset> {
    let (ds, truth) = load_data(cfg)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let (seed, stream) = data_stream(cfg);
    writeln!(w, "# config_hash={} seed={seed} stream={stream}", cfg.hash())?;
    ds.write_csv(&mut w, truth.as_ref())?;
    w.flush()?;
    Ok(ds)
}

/// `KF`, or `ENS1_lx50_leta10` style for ensemble schemes.
pub fn label(cfg: &ExperimentConfig) -> String {
    let s = &cfg.sampler;
    if s.scheme.uses_ensemble() {
        format!("{}_lx{}_leta{}", s.scheme, s.pool.l_x, s.pool.l_eta)
    } else {
        s.scheme.to_string()
    }
}

/// Stream of run `k`: purpose `Chain`, index `k`, under the master seed.
pub fn run_stream(cfg: &ExperimentConfig, k: usize) -> RandomStream {
    RandomStream::for_purpose(cfg.sampler.seed, StreamPurpose::Chain, k as u32)
}

/// Runs the `n_runs` independent chains, in parallel when available.
pub fn run_chains(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<ChainTrace>> {
    let runs: Vec<usize> = (0..cfg.n_runs).collect();
    let exec = Execution::default();
    par::map(exec, runs, |k| run_chain(&cfg.sampler, dataset, exec, &mut run_stream(cfg, k)))
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(Into::into)
}

pub fn write_trace(cfg: &ExperimentConfig, trace: &ChainTrace, run: usize, path: &Path) -> Result<()> {
    let s = &cfg.sampler;
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let pools = if s.scheme.uses_ensemble() {
        format!(" l_x={} l_eta={}", s.pool.l_x, s.pool.l_eta)
    } else {
        String::new()
    };
    writeln!(
        w,
        "# config_hash={} seed={} stream={} scheme={}{pools} run={run}",
        cfg.hash(),
        trace.master_seed,
        trace.stream_id,
        trace.scheme
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iter", "c", "gamma", "eta", "log_weight", "seconds"])?;
    for i in 0..trace.len() {
        let secs = if cfg.wall_time { trace.seconds[i] } else { 0.0 };
        csv.write_record([
            (i + 1).to_string(),
            trace.c[i].to_string(),
            trace.gamma[i].to_string(),
            trace.eta[i].to_string(),
            trace.log_weight[i].to_string(),
            secs.to_string(),
        ])?;
    }
    csv.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub name: String,
    pub weighted_mean: Option<f64>,
    pub weighted_se: Option<f64>,
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub act: Option<f64>,
    pub act_cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub phi_nc: Option<f64>,
    pub c_eta_nc: Option<f64>,
    pub c_joint: Option<f64>,
    pub ensemble_gamma: Option<f64>,
}

fn rate(c: &AcceptanceCounter) -> Option<f64> {
    finite(c.rate())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<&AcceptanceStats> for AcceptanceRates {
    fn from(s: &AcceptanceStats) -> Self {
        Self {
            phi_nc: rate(&s.phi_nc),
            c_eta_nc: rate(&s.c_eta_nc),
            c_joint: rate(&s.c_joint),
            ensemble_gamma: rate(&s.ensemble_gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub config_hash: String,
    pub config: String,
    pub master_seed: u64,
    pub stream_ids: Vec<u64>,
    pub data_seed: u64,
    pub data_stream: u64,
    pub n_obs: usize,
    pub scheme: Scheme,
    pub l_x: Option<usize>,
    pub l_eta: Option<usize>,
    pub iterations: usize,
    pub burn_in: f64,
    pub n_runs: usize,
    pub params: Vec<ParamRow>,
    pub importance_ess: Option<f64>,
    pub low_ess: bool,
    pub acceptance: AcceptanceRates,
    pub seconds_per_iter: f64,
    pub seconds_per_iter_runs: Vec<f64>,
    pub efficiency: Option<EfficiencyRow>,
}

pub fn summarize(cfg: &ExperimentConfig, n_obs: usize, traces: &[ChainTrace]) -> Result<Summary> {
    let s = &cfg.sampler;
    let pools = s.scheme.uses_ensemble().then_some((s.pool.l_x, s.pool.l_eta));
    let have_draws = traces.iter().all(|t| t.len() > s.burn_in_iterations());
    let weighted = if have_draws { weighted_summary(traces, s.burn_in, true).ok() } else { None };
    let plain = if have_draws { weighted_summary(traces, s.burn_in, false).ok() } else { None };
    let acts = act_table(traces, s.burn_in).ok();
    let params = (0..3)
        .map(|k| ParamRow {
            name: PARAM_NAMES[k].to_string(),
            weighted_mean: weighted.as_ref().and_then(|w| finite(w.params[k].mean)),
            weighted_se: weighted.as_ref().and_then(|w| finite(w.params[k].se)),
            mean: plain.as_ref().and_then(|w| finite(w.params[k].mean)),
            se: plain.as_ref().and_then(|w| finite(w.params[k].se)),
            act: acts.as_ref().map(|a| a[k].act),
            act_cutoff: acts.as_ref().map(|a| a[k].cutoff),
        })
        .collect();
    let mut acc = AcceptanceStats::default();
    for t in traces {
        acc.merge(&t.acceptance);
    }
    let timings: Vec<f64> = traces.iter().map(|t| t.seconds_per_iter).collect();
    let seconds_per_iter = if timings.iter().all(|t| t.is_finite()) && !timings.is_empty() {
        timings.iter().sum::<f64>() / timings.len() as f64
    } else {
        0.0
    };
    let efficiency = acts
        .as_ref()
        .map(|a| EfficiencyRow::new(s.scheme, pools, s.iterations, [a[0].act, a[1].act, a[2].act], seconds_per_iter));
    let (data_seed, data_stream) = data_stream(cfg);
    Ok(Summary {
        label: label(cfg),
        config_hash: cfg.hash(),
        config: cfg.emit(),
        master_seed: s.seed,
        stream_ids: traces.iter().map(|t| t.stream_id).collect(),
        data_seed,
        data_stream,
        n_obs,
        scheme: s.scheme,
        l_x: pools.map(|p| p.0),
        l_eta: pools.map(|p| p.1),
        iterations: s.iterations,
        burn_in: s.burn_in,
        n_runs: cfg.n_runs,
        params,
        importance_ess: weighted.as_ref().map(|w| w.ess),
        low_ess: weighted.as_ref().is_some_and(|w| w.low_ess),
        acceptance: AcceptanceRates::from(&acc),
        seconds_per_iter,
        seconds_per_iter_runs: timings.iter().map(|t| if t.is_finite() { *t } else { 0.0 }).collect(),
        efficiency,
    })
}

pub fn write_efficiency_csv(cfg_hash: &str, rows: &[EfficiencyRow], path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "# config_hash={cfg_hash}")?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub summary: Summary,
    pub traces: Vec<ChainTrace>,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("config.txt");
    fs::write(&path, format!("# config_hash={}\n{}", cfg.hash(), cfg.emit()))
        .with_context(|| format!("writing {}", path.display()))
}

/// Runs one configuration's chains against an already-built dataset and
/// writes its traces and summary.
pub fn run_setting(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentOutput> {
    let traces = run_chains(cfg, dataset)?;
    let name = label(cfg);
    let mut trace_paths = Vec::with_capacity(traces.len());
    for (k, t) in traces.iter().enumerate() {
        let p = cfg.out.join(format!("trace_{name}_run{k}.csv"));
        write_trace(cfg, t, k, &p)?;
        trace_paths.push(p);
    }
    let summary = summarize(cfg, dataset.len(), &traces)?;
    let summary_path = cfg.out.join(format!("summary_{name}.json"));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok(ExperimentOutput {
        summary,
        traces,
        trace_paths,
        summary_path,
    })
}

/// `run` verb: one setting, traces + summary + efficiency CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    prepare_out(cfg)?;
    let (ds, _) = load_data(cfg)?;
    let out = run_setting(cfg, &ds)?;
    let rows: Vec<EfficiencyRow> = out.summary.efficiency.iter().cloned().collect();
    write_efficiency_csv(&cfg.hash(), &rows, &cfg.out.join("efficiency.csv"))?;
    Ok(out)
}

/// `sweep` verb: every `(L_x, L_eta)` in the grid, one efficiency row each.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<Summary>> {
    cfg.validate()?;
    if !cfg.sampler.scheme.uses_ensemble() {
        bail!("sweep needs an ensemble scheme (ENS1 or ENS2), got {}", cfg.sampler.scheme);
    }
    if cfg.sweep_lx.is_empty() || cfg.sweep_leta.is_empty() {
        bail!("sweep grid is empty (set sweep_lx and sweep_leta)");
    }
    prepare_out(cfg)?;
    let (ds, _) = load_data(cfg)?;
    let mut summaries = Vec::new();
    for &lx in &cfg.sweep_lx {
        for &leta in &cfg.sweep_leta {
            let c = cfg.with_pools(lx, leta);
            log::info!("sweep setting {}", label(&c));
            summaries.push(run_setting(&c, &ds)?.summary);
        }
    }
    let rows: Vec<EfficiencyRow> = summaries.iter().filter_map(|s| s.efficiency.clone()).collect();
    write_efficiency_csv(&cfg.hash(), &rows, &cfg.out.join("efficiency.csv"))?;
    Ok(summaries)
}
