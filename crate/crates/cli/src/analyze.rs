//! `hopchain analyze` and `hopchain heatmap`: read-only reports over run
//! directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hopchain::analysis::export::{band_csv, curves_csv, matrix_counts_csv, matrix_csv, sizes_csv};
use hopchain::analysis::{
    accumulated_gleu_of, aggregate_curves, fit_ael, pair_matrix, size_trajectory, AccuracyCurve,
    AelFit, PairMatrix, SizeTrajectory,
};
use hopchain::chain::{is_run_dir, load_run, ChainRun, RunStatus, HOPS_FILE, MANIFEST_FILE};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::run::EXPERIMENT_FILE;

pub const REPORT_FILE: &str = "report.json";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const FITS_CSV: &str = "fits.csv";
pub const FITS_JSON: &str = "fits.json";

/// Run directories named directly, or found one level below a named
/// directory. Sorted by run id.
pub fn collect_runs(paths: &[PathBuf]) -> Result<Vec<(PathBuf, ChainRun)>, CliError> {
    let mut dirs = Vec::new();
    for p in paths {
        if is_run_dir(p) {
            dirs.push(p.clone());
            continue;
        }
        let entries =
            fs::read_dir(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| is_run_dir(d))
            .collect();
        found.sort();
        dirs.extend(found);
    }
    if dirs.is_empty() {
        let shown: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
        return Err(CliError::Usage(format!(
            "no runs found in {}",
            shown.join(", ")
        )));
    }
    let mut runs = dirs
        .into_par_iter()
        .map(|d| load_run(&d).map(|r| (d, r)))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|a, b| a.1.run_id().cmp(b.1.run_id()));
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFit {
    pub run: String,
    #[serde(flatten)]
    pub fit: AelFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub name: String,
    pub runs: Vec<String>,
    pub fits: Vec<RunFit>,
    pub mean_fit: AelFit,
    pub mean_curve: AccuracyCurve,
    /// Band around the mean curve: mean plus or minus this value.
    pub band_half_width: f64,
    pub sizes: SizeTrajectory,
    pub matrix: PairMatrix,
    pub matrix_mean: Option<f64>,
    pub curves: Vec<AccuracyCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// RMSE counts measured points only; the fixed `t = 0` point is left out.
    pub rmse_excludes_t0: bool,
    pub groups: Vec<GroupReport>,
    /// Incomplete runs left out of every aggregate.
    pub skipped: Vec<String>,
}

/// Runs matching `name` by chain mode or chain label.
fn select<'a>(runs: &'a [ChainRun], name: &str) -> Vec<&'a ChainRun> {
    runs.iter()
        .filter(|r| r.spec().mode.to_string() == name || r.spec().label == name)
        .collect()
}

pub fn analyze_runs(runs: &[ChainRun], groups: &[String]) -> Result<Report, CliError> {
    let (complete, partial): (Vec<&ChainRun>, Vec<&ChainRun>) =
        runs.iter().partition(|r| r.status == RunStatus::Complete);
    let complete: Vec<ChainRun> = complete.into_iter().cloned().collect();
    if complete.is_empty() {
        return Err(CliError::Usage("no complete runs found".into()));
    }
    let names: Vec<String> = if groups.is_empty() {
        let mut modes: Vec<String> = complete.iter().map(|r| r.spec().mode.to_string()).collect();
        modes.sort();
        modes.dedup();
        modes
    } else {
        groups.to_vec()
    };
    let reports = names
        .iter()
        .map(|name| {
            let members: Vec<ChainRun> = select(&complete, name).into_iter().cloned().collect();
            if members.is_empty() {
                return Err(CliError::Usage(format!(
                    "group `{name}` matches no complete run"
                )));
            }
            group_report(name, &members)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Report {
        rmse_excludes_t0: true,
        groups: reports,
        skipped: partial.iter().map(|r| r.run_id().to_string()).collect(),
    })
}

fn group_report(name: &str, runs: &[ChainRun]) -> Result<GroupReport, CliError> {
    let curves = runs
        .par_iter()
        .map(accumulated_gleu_of)
        .collect::<Result<Vec<_>, _>>()?;
    let fits = curves
        .iter()
        .map(|c| {
            fit_ael(c).map(|fit| RunFit {
                run: c.label.clone(),
                fit,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mean_curve, band, mean_fit) = aggregate_curves(&curves, name)?;
    let sizes = size_trajectory(runs)?;
    let matrix = pair_matrix(runs)?;
    Ok(GroupReport {
        name: name.to_string(),
        runs: runs.iter().map(|r| r.run_id().to_string()).collect(),
        fits,
        mean_fit,
        mean_curve,
        band_half_width: band.half_width,
        sizes,
        matrix_mean: matrix.mean(),
        matrix,
        curves,
    })
}

fn fits_csv(report: &Report) -> String {
    let mut s = String::from("group,curve,alpha,rmse,n\n");
    for g in &report.groups {
        let rows = g
            .fits
            .iter()
            .map(|f| (f.run.as_str(), &f.fit))
            .chain(std::iter::once(("mean", &g.mean_fit)));
        for (curve, fit) in rows {
            s.push_str(&format!(
                "{},{curve},{},{},{}\n",
                g.name, fit.alpha, fit.rmse, fit.n
            ));
        }
    }
    s
}

/// Directory-safe form of a group name.
fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Provenance {
    tool_version: &'static str,
    generated_at: String,
    config_sha256: Vec<String>,
    backends: Vec<String>,
    runs: BTreeMap<String, RunDigest>,
}

#[derive(Serialize)]
struct RunDigest {
    spec_sha256: String,
    hops_sha256: String,
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn provenance(runs: &[(PathBuf, ChainRun)]) -> Result<Provenance, CliError> {
    let mut configs = Vec::new();
    let mut backends = Vec::new();
    let mut digests = BTreeMap::new();
    for (dir, run) in runs {
        if let Some(parent) = dir.parent() {
            if let Ok(text) = fs::read_to_string(parent.join(EXPERIMENT_FILE)) {
                if let Some(d) = serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v["config_sha256"].as_str().map(str::to_string))
                {
                    if !configs.contains(&d) {
                        configs.push(d);
                    }
                }
            }
        }
        if !backends.contains(&run.manifest.backend) {
            backends.push(run.manifest.backend.clone());
        }
        digests.insert(
            run.run_id().to_string(),
            RunDigest {
                spec_sha256: file_digest(&dir.join(MANIFEST_FILE))?,
                hops_sha256: file_digest(&dir.join(HOPS_FILE))?,
            },
        );
    }
    Ok(Provenance {
        tool_version: env!("CARGO_PKG_VERSION"),
        generated_at: chrono::Utc::now().to_rfc3339(),
        config_sha256: configs,
        backends,
        runs: digests,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data") + "\n"
}

/// Analyze runs under `paths` and write the report files into `out`.
pub fn cmd_analyze(paths: &[PathBuf], groups: &[String], out: &Path) -> Result<Report, CliError> {
    let runs = collect_runs(paths)?;
    let bare: Vec<ChainRun> = runs.iter().map(|(_, r)| r.clone()).collect();
    let report = analyze_runs(&bare, groups)?;
    for skipped in &report.skipped {
        eprintln!("warning: {skipped} is incomplete and was left out");
    }

    fs::create_dir_all(out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    for g in &report.groups {
        let dir = out.join(slug(&g.name));
        fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        let mut all = g.curves.clone();
        all.push(g.mean_curve.clone());
        write(&dir.join("accuracy.csv"), &curves_csv(&all))?;
        write(&dir.join("sizes.csv"), &sizes_csv(&g.sizes))?;
        let band = hopchain::analysis::CurveBand {
            mean: g.mean_curve.clone(),
            half_width: g.band_half_width,
        };
        write(&dir.join("band.csv"), &band_csv(&band))?;
        write(&dir.join("matrix.csv"), &matrix_csv(&g.matrix))?;
        write(
            &dir.join("matrix_counts.csv"),
            &matrix_counts_csv(&g.matrix),
        )?;
        println!(
            "{}: {} runs, alpha={:.6} rmse={:.6} n={}, final size ratio {:.3}, matrix mean {}",
            g.name,
            g.runs.len(),
            g.mean_fit.alpha,
            g.mean_fit.rmse,
            g.mean_fit.n,
            g.sizes.final_ratio,
            g.matrix_mean
                .map(|m| format!("{m:.6}"))
                .unwrap_or_else(|| "undefined".into()),
        );
        if g.matrix.low_validity {
            println!(
                "{}: matrix compares texts across languages (direct topology)",
                g.name
            );
        }
    }
    write(&out.join(FITS_CSV), &fits_csv(&report))?;
    let fits: BTreeMap<&str, (&AelFit, &[RunFit])> = report
        .groups
        .iter()
        .map(|g| (g.name.as_str(), (&g.mean_fit, g.fits.as_slice())))
        .collect();
    write(&out.join(FITS_JSON), &to_json(&fits))?;
    write(&out.join(REPORT_FILE), &to_json(&report))?;
    write(&out.join(PROVENANCE_FILE), &to_json(&provenance(&runs)?))?;
    Ok(report)
}

/// Pair matrix over all complete runs under `paths`.
pub fn cmd_heatmap(paths: &[PathBuf]) -> Result<PairMatrix, CliError> {
    let runs: Vec<ChainRun> = collect_runs(paths)?
        .into_iter()
        .map(|(_, r)| r)
        .filter(|r| r.status == RunStatus::Complete)
        .collect();
    if runs.is_empty() {
        return Err(CliError::Usage("no complete runs found".into()));
    }
    Ok(pair_matrix(&runs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("com-Romance"), "com-Romance");
        assert_eq!(slug("a/b c"), "a_b_c");
    }

    #[test]
    fn empty_directory_reports_no_runs() {
        let dir = tempfile::tempdir().unwrap();
        let err = collect_runs(&[dir.path().to_path_buf()]).unwrap_err();
        assert!(err.to_string().contains("no runs found"));
        assert_eq!(err.exit_code(), 1);
    }
}
