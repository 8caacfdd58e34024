//! Text report over the summaries in an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use sv_core::diagnostics::format_efficiency;

use crate::experiment::Summary;

pub fn load_summaries(dir: &Path) -> Result<Vec<Summary>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("summary_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no summary_*.json files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn cell(mean: Option<f64>, se: Option<f64>) -> String {
    match (mean, se) {
        (Some(m), Some(s)) => format!("{m:.4} (± {s:.4})"),
        (Some(m), None) => format!("{m:.4}"),
        _ => "-".into(),
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.3}"))
}

/// Posterior means (importance-weighted for KF), acceptance rates and the
/// efficiency table.
pub fn render(summaries: &[Summary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Posterior means, standard errors over runs in brackets");
    let _ = writeln!(out, "{:<22} {:>24} {:>24} {:>24}", "method", "c", "gamma", "eta");
    for s in summaries {
        let weighted = !s.scheme.uses_ensemble();
        let cells: Vec<String> = s
            .params
            .iter()
            .map(|p| if weighted { cell(p.weighted_mean, p.weighted_se) } else { cell(p.mean, p.se) })
            .collect();
        let _ = writeln!(out, "{:<22} {:>24} {:>24} {:>24}", s.label, cells[0], cells[1], cells[2]);
    }
    let _ = writeln!(out, "\nAcceptance rates");
    let _ = writeln!(out, "{:<22} {:>10} {:>10} {:>10} {:>10}", "method", "gamma NC", "(c,eta) NC", "joint C", "ens gamma");
    for s in summaries {
        let a = &s.acceptance;
        let _ = writeln!(
            out,
            "{:<22} {:>10} {:>10} {:>10} {:>10}",
            s.label,
            pct(a.phi_nc),
            pct(a.c_eta_nc),
            pct(a.c_joint),
            pct(a.ensemble_gamma)
        );
    }
    let rows: Vec<_> = summaries.iter().filter_map(|s| s.efficiency.clone()).collect();
    let _ = writeln!(out, "\nEfficiency (ACT x seconds per iteration)");
    out.push_str(&format_efficiency(&rows));
    for s in summaries.iter().filter(|s| s.low_ess) {
        let _ = writeln!(out, "warning: {} has low importance-weight ESS ({:?})", s.label, s.importance_ess);
    }
    out
}

/// `report` verb: renders and writes `report.txt` into `dir`.
pub fn report(dir: &Path) -> Result<String> {
    let text = render(&load_summaries(dir)?);
    let path = dir.join("report.txt");
    fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    Ok(text)
}
