//! Executing chains and persisting them as resumable run directories.
//!
//! A run directory holds:
//!
//! - `spec.json`: the [`RunManifest`] (chain spec, source text, backend)
//! - `hops.jsonl`: one [`HopRecord`] per line, appended and synced per hop
//! - `timings.jsonl`: wall-clock duration per hop
//! - `status.json`: [`RunStatus`] and failure details
//!
//! Everything except `timings.jsonl` is a pure function of the manifest
//! and the backend's outputs, so re-executing a deterministic backend
//! reproduces the directory byte for byte.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::catalog::{CatalogError, ChainSpec, Topology};
use crate::translate::{translate, TranslateError, TranslationRequest, Translator};

pub const MANIFEST_FILE: &str = "spec.json";
pub const HOPS_FILE: &str = "hops.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const STATUS_FILE: &str = "status.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {reason}")]
    Integrity { path: PathBuf, reason: String },
    #[error("text `{text}` is in `{language}` but the chain starts in `{origin}`")]
    LanguageMismatch {
        text: String,
        language: String,
        origin: String,
    },
    #[error("run was recorded with backend `{recorded}`, refusing to continue with `{given}`")]
    BackendMismatch { recorded: String, given: String },
    #[error("{0} already holds a different run")]
    ManifestMismatch(PathBuf),
    #[error("{0} is locked by another writer")]
    Locked(PathBuf),
    #[error("no run directory at {0}")]
    NotARun(PathBuf),
    #[error(transparent)]
    Spec(#[from] CatalogError),
}

impl RunError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn integrity(path: &Path, reason: impl Into<String>) -> Self {
        RunError::Integrity {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }
}

/// Whitespace-delimited token count after NFC normalization. Punctuation
/// stays attached, unlike [`crate::gleu::tokenize`].
pub fn word_count(text: &str) -> usize {
    text.nfc().collect::<String>().split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceText {
    pub id: String,
    pub language: String,
    pub body: String,
    pub initial_word_count: usize,
}

impl SourceText {
    pub fn new(
        id: impl Into<String>,
        language: impl Into<String>,
        body: impl Into<String>,
    ) -> Self {
        let body = body.into();
        SourceText {
            id: id.into(),
            language: language.into(),
            initial_word_count: word_count(&body),
            body,
        }
    }
}

/// One executed hop. `t` starts at 1; `t = 0` is the source text itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopRecord {
    pub t: usize,
    pub source: String,
    pub target: String,
    pub input_text: String,
    pub output_text: String,
    pub output_word_count: usize,
    /// Reference-language text measured at this step, if any.
    pub measurement_text: Option<String>,
    pub backend: String,
    /// Kept in `timings.jsonl`, not in the hop log.
    #[serde(skip)]
    pub timing: Option<Duration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub hop: usize,
    pub message: String,
    /// The failure came from corrupt stored data rather than the service.
    pub integrity: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct StatusFile {
    status: RunStatus,
    hops_completed: usize,
    failure: Option<RunFailure>,
}

/// Everything needed to (re)start a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub backend: String,
    pub spec: ChainSpec,
    pub text: SourceText,
    /// Reference-language text accumulated accuracy is measured against.
    /// Absent means `text` itself.
    pub reference_text: Option<SourceText>,
}

impl RunManifest {
    pub fn new(
        run_id: impl Into<String>,
        spec: ChainSpec,
        text: SourceText,
        backend: String,
    ) -> Self {
        RunManifest {
            run_id: run_id.into(),
            backend,
            spec,
            text,
            reference_text: None,
        }
    }

    pub fn with_reference_text(mut self, text: SourceText) -> Self {
        self.reference_text = Some(text);
        self
    }

    pub fn measurement_reference(&self) -> &SourceText {
        self.reference_text.as_ref().unwrap_or(&self.text)
    }

    fn validate(&self) -> Result<(), RunError> {
        self.spec.validate()?;
        if self.text.language != self.spec.origin {
            return Err(RunError::LanguageMismatch {
                text: self.text.id.clone(),
                language: self.text.language.clone(),
                origin: self.spec.origin.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainRun {
    pub manifest: RunManifest,
    pub hops: Vec<HopRecord>,
    pub status: RunStatus,
    pub failure: Option<RunFailure>,
}

impl ChainRun {
    pub fn spec(&self) -> &ChainSpec {
        &self.manifest.spec
    }

    pub fn text(&self) -> &SourceText {
        &self.manifest.text
    }

    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    /// Text after hop `t` (`t = 0` is the source text).
    pub fn text_at(&self, t: usize) -> Option<&str> {
        if t == 0 {
            Some(&self.manifest.text.body)
        } else {
            self.hops.get(t - 1).map(|h| h.output_text.as_str())
        }
    }

    /// Serialize the hop log exactly as it is stored on disk.
    pub fn hop_log(&self) -> String {
        self.hops.iter().map(hop_line).collect()
    }

    /// Parse a hop log produced by [`ChainRun::hop_log`].
    pub fn parse_hop_log(log: &str) -> Result<Vec<HopRecord>, serde_json::Error> {
        log.lines()
            .filter(|l| !l.is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

fn hop_line(hop: &HopRecord) -> String {
    let mut line = serde_json::to_string(hop).expect("hop serializes");
    line.push('\n');
    line
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| RunError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let tmp = path.with_extension("json.tmp");
    let mut body = serde_json::to_string_pretty(value).expect("serializable");
    body.push('\n');
    fs::write(&tmp, body).map_err(|e| RunError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| RunError::io(path, e))
}

/// Called after every persisted hop.
pub type HopObserver<'a> = &'a mut dyn FnMut(&HopRecord);

/// Exclusive handle on one run directory.
pub struct RunDir {
    path: PathBuf,
    _lock: File,
}

impl RunDir {
    fn lock(path: &Path) -> Result<RunDir, RunError> {
        let lock_path = path.join(LOCK_FILE);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| RunError::io(&lock_path, e))?;
        match lock.try_lock() {
            Ok(()) => Ok(RunDir {
                path: path.to_path_buf(),
                _lock: lock,
            }),
            Err(fs::TryLockError::WouldBlock) => Err(RunError::Locked(path.to_path_buf())),
            Err(fs::TryLockError::Error(e)) => Err(RunError::io(&lock_path, e)),
        }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

/// Whether `dir` looks like a run directory.
pub fn is_run_dir(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file()
}

/// Read a run without modifying it. A torn final hop line (no trailing
/// newline) is ignored; any other malformed line is an integrity error.
pub fn load_run(dir: &Path) -> Result<ChainRun, RunError> {
    if !is_run_dir(dir) {
        return Err(RunError::NotARun(dir.to_path_buf()));
    }
    let manifest: RunManifest = read_json(&dir.join(MANIFEST_FILE))?;
    let (mut hops, _) = read_hops(&dir.join(HOPS_FILE))?;
    verify_hops(&dir.join(HOPS_FILE), &manifest, &hops)?;
    attach_timings(&dir.join(TIMINGS_FILE), &mut hops);
    let status_path = dir.join(STATUS_FILE);
    let (status, failure) = if status_path.exists() {
        let s: StatusFile = read_json(&status_path)?;
        (s.status, s.failure)
    } else {
        (RunStatus::Partial, None)
    };
    let status = if hops.len() == manifest.spec.hops {
        RunStatus::Complete
    } else if status == RunStatus::Complete {
        return Err(RunError::integrity(
            &status_path,
            format!(
                "marked complete with {} of {} hops",
                hops.len(),
                manifest.spec.hops
            ),
        ));
    } else {
        status
    };
    Ok(ChainRun {
        manifest,
        hops,
        status,
        failure,
    })
}

/// Returns the parsed hops and the byte length of the intact prefix.
fn read_hops(path: &Path) -> Result<(Vec<HopRecord>, u64), RunError> {
    if !path.exists() {
        return Ok((Vec::new(), 0));
    }
    let raw = fs::read(path).map_err(|e| RunError::io(path, e))?;
    let intact = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let text = std::str::from_utf8(&raw[..intact])
        .map_err(|e| RunError::integrity(path, e.to_string()))?;
    let mut hops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let hop: HopRecord = serde_json::from_str(line)
            .map_err(|e| RunError::integrity(path, format!("line {}: {e}", i + 1)))?;
        hops.push(hop);
    }
    Ok((hops, intact as u64))
}

fn verify_hops(path: &Path, manifest: &RunManifest, hops: &[HopRecord]) -> Result<(), RunError> {
    let spec = &manifest.spec;
    if hops.len() > spec.hops {
        return Err(RunError::integrity(
            path,
            format!("{} hops recorded, plan has {}", hops.len(), spec.hops),
        ));
    }
    let mut previous = manifest.text.body.as_str();
    for (i, hop) in hops.iter().enumerate() {
        let planned = &spec.hop_plan[i];
        let fail = |why: &str| Err(RunError::integrity(path, format!("hop {}: {why}", i + 1)));
        if hop.t != i + 1 {
            return fail("index out of sequence");
        }
        if hop.source != planned.source || hop.target != planned.target {
            return fail("language pair differs from the chain plan");
        }
        if hop.input_text != previous {
            return fail("input does not match the previous output");
        }
        if hop.output_word_count != word_count(&hop.output_text) {
            return fail("stored word count is wrong");
        }
        if hop.backend != manifest.backend {
            return fail("backend label differs from the manifest");
        }
        previous = &hop.output_text;
    }
    Ok(())
}

fn attach_timings(path: &Path, hops: &mut [HopRecord]) {
    #[derive(Deserialize)]
    struct Timing {
        t: usize,
        elapsed_ms: f64,
    }
    let Ok(file) = File::open(path) else { return };
    for line in BufReader::new(file).lines().map_while(Result::ok) {
        if let Ok(timing) = serde_json::from_str::<Timing>(&line) {
            if let Some(hop) = hops.get_mut(timing.t.wrapping_sub(1)) {
                hop.timing = Some(Duration::from_secs_f64(timing.elapsed_ms / 1000.0));
            }
        }
    }
}

/// Start a run in `dir`, or continue it if `dir` already holds the same
/// manifest.
pub fn run_chain(
    dir: &Path,
    manifest: RunManifest,
    backend: &dyn Translator,
    observer: Option<HopObserver<'_>>,
) -> Result<ChainRun, RunError> {
    manifest.validate()?;
    if manifest.backend != backend.identity() {
        return Err(RunError::BackendMismatch {
            recorded: manifest.backend.clone(),
            given: backend.identity(),
        });
    }
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let run_dir = RunDir::lock(dir)?;
    let manifest_path = run_dir.file(MANIFEST_FILE);
    if manifest_path.exists() {
        let existing: RunManifest = read_json(&manifest_path)?;
        if existing != manifest {
            return Err(RunError::ManifestMismatch(dir.to_path_buf()));
        }
    } else {
        write_json_atomic(&manifest_path, &manifest)?;
    }
    continue_run(&run_dir, backend, observer)
}

/// Continue a partial or failed run from its first missing hop. Recorded
/// hops are never re-executed or rewritten.
pub fn resume_chain(
    dir: &Path,
    backend: &dyn Translator,
    observer: Option<HopObserver<'_>>,
) -> Result<ChainRun, RunError> {
    if !is_run_dir(dir) {
        return Err(RunError::NotARun(dir.to_path_buf()));
    }
    let run_dir = RunDir::lock(dir)?;
    continue_run(&run_dir, backend, observer)
}

fn continue_run(
    run_dir: &RunDir,
    backend: &dyn Translator,
    mut observer: Option<HopObserver<'_>>,
) -> Result<ChainRun, RunError> {
    let manifest: RunManifest = read_json(&run_dir.file(MANIFEST_FILE))?;
    manifest.validate()?;
    let identity = backend.identity();
    if manifest.backend != identity {
        return Err(RunError::BackendMismatch {
            recorded: manifest.backend.clone(),
            given: identity,
        });
    }
    let hops_path = run_dir.file(HOPS_FILE);
    let (mut hops, intact) = read_hops(&hops_path)?;
    verify_hops(&hops_path, &manifest, &hops)?;
    attach_timings(&run_dir.file(TIMINGS_FILE), &mut hops);

    let status_path = run_dir.file(STATUS_FILE);
    if hops.len() == manifest.spec.hops {
        if !status_path.exists()
            || read_json::<StatusFile>(&status_path)?.status != RunStatus::Complete
        {
            write_status(&status_path, RunStatus::Complete, hops.len(), None)?;
        }
        return Ok(ChainRun {
            manifest,
            hops,
            status: RunStatus::Complete,
            failure: None,
        });
    }

    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&hops_path)
        .map_err(|e| RunError::io(&hops_path, e))?;
    // drop a torn trailing line left by an interrupted append
    if log
        .metadata()
        .map_err(|e| RunError::io(&hops_path, e))?
        .len()
        != intact
    {
        log.set_len(intact)
            .map_err(|e| RunError::io(&hops_path, e))?;
    }
    let timings_path = run_dir.file(TIMINGS_FILE);
    let mut timings = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&timings_path)
        .map_err(|e| RunError::io(&timings_path, e))?;
    write_status(&status_path, RunStatus::Partial, hops.len(), None)?;

    let spec = &manifest.spec;
    for t in hops.len() + 1..=spec.hops {
        let planned = &spec.hop_plan[t - 1];
        let input = match hops.last() {
            Some(h) => h.output_text.clone(),
            None => manifest.text.body.clone(),
        };
        let started = Instant::now();
        let step = translate(
            backend,
            &TranslationRequest::new(input.clone(), &planned.source, &planned.target),
        )
        .and_then(|output| {
            let measurement = measure(backend, spec, &planned.target, &output)?;
            Ok((output, measurement))
        });
        let (output, measurement_text) = match step {
            Ok(v) => v,
            Err(e) => {
                let failure = RunFailure {
                    hop: t,
                    message: e.to_string(),
                    integrity: e.is_integrity(),
                };
                write_status(&status_path, RunStatus::Failed, hops.len(), Some(&failure))?;
                return Ok(ChainRun {
                    manifest,
                    hops,
                    status: RunStatus::Failed,
                    failure: Some(failure),
                });
            }
        };
        let elapsed = started.elapsed();
        let hop = HopRecord {
            t,
            source: planned.source.clone(),
            target: planned.target.clone(),
            input_text: input,
            output_word_count: word_count(&output),
            output_text: output,
            measurement_text,
            backend: identity.clone(),
            timing: Some(elapsed),
        };
        log.write_all(hop_line(&hop).as_bytes())
            .and_then(|_| log.sync_data())
            .map_err(|e| RunError::io(&hops_path, e))?;
        writeln!(
            timings,
            "{{\"t\":{t},\"elapsed_ms\":{:.3}}}",
            elapsed.as_secs_f64() * 1000.0
        )
        .map_err(|e| RunError::io(&timings_path, e))?;
        if let Some(obs) = observer.as_mut() {
            obs(&hop);
        }
        hops.push(hop);
    }
    write_status(&status_path, RunStatus::Complete, hops.len(), None)?;
    Ok(ChainRun {
        manifest,
        hops,
        status: RunStatus::Complete,
        failure: None,
    })
}

fn measure(
    backend: &dyn Translator,
    spec: &ChainSpec,
    target: &str,
    output: &str,
) -> Result<Option<String>, TranslateError> {
    if target == spec.reference {
        return Ok(Some(output.to_string()));
    }
    match spec.topology {
        Topology::Pivot => Ok(None),
        Topology::Direct => translate(
            backend,
            &TranslationRequest::new(output, target, &spec.reference),
        )
        .map(Some),
    }
}

fn write_status(
    path: &Path,
    status: RunStatus,
    hops_completed: usize,
    failure: Option<&RunFailure>,
) -> Result<(), RunError> {
    write_json_atomic(
        path,
        &StatusFile {
            status,
            hops_completed,
            failure: failure.cloned(),
        },
    )
}
