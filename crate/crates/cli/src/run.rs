//! `hopchain run`: execute or resume every configured chain.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use hopchain::catalog::Topology;
use hopchain::chain::{run_chain, HopRecord, RunManifest, RunStatus};
use hopchain::translate::{CachedTranslator, CountingTranslator, TranslationCache, Translator};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, RunTask};
use crate::error::CliError;

/// Abort the process after this many hops have been recorded. Test hook
/// for crash/resume checks.
pub const FAULT_ENV: &str = "HOPCHAIN_FAULT_AFTER_HOPS";

/// Written to the output directory so analysis can name the config.
pub const EXPERIMENT_FILE: &str = "experiment.json";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub jobs: usize,
    pub topology: Option<Topology>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub run_id: String,
    pub dir: PathBuf,
    pub status: RunStatus,
    pub hops: usize,
}

#[derive(Debug)]
pub struct RunSummary {
    pub outcomes: Vec<RunOutcome>,
    /// Requests that reached the backend (after the cache).
    pub backend_calls: usize,
}

#[derive(Serialize)]
struct ExperimentRecord<'a> {
    config_sha256: &'a str,
    backend: &'a str,
    topology: Topology,
    runs: Vec<&'a str>,
}

pub fn cmd_run(opts: &RunOptions) -> Result<RunSummary, CliError> {
    let experiment = Experiment::load(&opts.config)?;
    let topology = opts.topology.unwrap_or(experiment.config.topology);
    let tasks = experiment.tasks(topology)?;
    let out = experiment.output_dir(opts.out.as_deref());
    let backend = experiment.backend()?;
    let counted = Arc::new(CountingTranslator::new(backend));
    let translator: Arc<dyn Translator> = match experiment.cache_dir() {
        Some(dir) => Arc::new(CachedTranslator::new(
            counted.clone(),
            Arc::new(TranslationCache::open(dir)?),
        )),
        None => counted.clone(),
    };
    let identity = translator.identity();

    fs::create_dir_all(&out).map_err(|e| CliError::Usage(format!("{}: {e}", out.display())))?;
    let record = ExperimentRecord {
        config_sha256: &experiment.digest,
        backend: &identity,
        topology,
        runs: tasks.iter().map(|t| t.run_id.as_str()).collect(),
    };
    let record_path = out.join(EXPERIMENT_FILE);
    let json = serde_json::to_string_pretty(&record).expect("plain data") + "\n";
    fs::write(&record_path, json)
        .map_err(|e| CliError::Usage(format!("{}: {e}", record_path.display())))?;

    let fault_after = std::env::var(FAULT_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    let recorded = AtomicUsize::new(0);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let results: Vec<Result<RunOutcome, CliError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                run_task(task, &out, &identity, translator.as_ref(), &|_| {
                    let n = recorded.fetch_add(1, Ordering::SeqCst) + 1;
                    if fault_after == Some(n) {
                        std::process::abort();
                    }
                })
            })
            .collect()
    });

    let mut outcomes = Vec::new();
    let mut error: Option<CliError> = None;
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                eprintln!("error: {e}");
                error = Some(match error {
                    Some(prev) => prev.worst(e),
                    None => e,
                });
            }
        }
    }
    let backend_calls = counted.calls();
    println!(
        "{} of {} runs complete; backend calls this invocation: {backend_calls}",
        outcomes
            .iter()
            .filter(|o| o.status == RunStatus::Complete)
            .count(),
        tasks.len()
    );
    match error {
        Some(e) => Err(e),
        None => Ok(RunSummary {
            outcomes,
            backend_calls,
        }),
    }
}

fn run_task(
    task: &RunTask,
    out: &Path,
    identity: &str,
    backend: &dyn Translator,
    on_hop: &(dyn Fn(&HopRecord) + Sync),
) -> Result<RunOutcome, CliError> {
    let dir = out.join(&task.run_id);
    let mut manifest = RunManifest::new(
        task.run_id.clone(),
        task.spec.clone(),
        task.text.clone(),
        identity.to_string(),
    );
    if let Some(r) = &task.reference_text {
        manifest = manifest.with_reference_text(r.clone());
    }
    let total = task.spec.hops;
    let step = (total / 10).max(1);
    let mut observer = |hop: &HopRecord| {
        on_hop(hop);
        if hop.t.is_multiple_of(step) && hop.t < total {
            progress(&task.run_id, &format!("{}/{total} hops", hop.t));
        }
    };
    let run = run_chain(&dir, manifest, backend, Some(&mut observer))?;
    match (&run.status, &run.failure) {
        (RunStatus::Complete, _) => {
            progress(&task.run_id, &format!("complete ({total} hops)"));
            Ok(RunOutcome {
                run_id: task.run_id.clone(),
                dir,
                status: run.status,
                hops: run.hops.len(),
            })
        }
        (_, Some(f)) => {
            let msg = format!(
                "{}: failed at hop {} after {} recorded hops: {}",
                task.run_id,
                f.hop,
                run.hops.len(),
                f.message
            );
            Err(if f.integrity {
                CliError::Integrity(msg)
            } else {
                CliError::Backend(msg)
            })
        }
        (status, None) => Err(CliError::Backend(format!(
            "{}: stopped in state {status:?}",
            task.run_id
        ))),
    }
}

fn progress(run_id: &str, msg: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{run_id}] {msg}");
}
