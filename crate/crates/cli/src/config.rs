//! Experiment definition files.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hopchain::catalog::{
    load_catalog, Catalog, ChainBuilder, ChainMode, ChainSpec, Topology, BUNDLED_MIXED_FAMILIES,
    DEFAULT_REFERENCE,
};
use hopchain::chain::SourceText;
use hopchain::corpus::bundled_text;
use hopchain::translate::{BackendConfig, HttpTranslator, Simulator, SimulatorParams, Translator};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog TSV; the bundled catalog when absent.
    pub catalog: Option<PathBuf>,
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Translation cache directory, shared by all runs.
    pub cache: Option<PathBuf>,
    pub backend: BackendChoice,
    #[serde(rename = "chain", default)]
    pub chains: Vec<ChainEntry>,
    #[serde(rename = "text", default)]
    pub texts: Vec<TextEntry>,
}

fn default_reference() -> String {
    DEFAULT_REFERENCE.to_string()
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendChoice {
    Simulator(SimulatorSection),
    Live(BackendConfig),
}

/// Simulator knobs; unset coefficients take the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorSection {
    #[serde(default)]
    pub seed: u64,
    pub deletion_coefficient: Option<f64>,
    pub substitution_coefficient: Option<f64>,
    pub distance_normalizer: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainEntry {
    pub label: String,
    pub mode: ChainMode,
    pub hops: usize,
    pub seed: Option<u64>,
    /// Family of a common chain.
    pub family: Option<String>,
    /// Families of a mixed chain, one language drawn from each.
    pub families: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextEntry {
    pub id: String,
    /// File holding the text; a bundled text when absent.
    pub path: Option<PathBuf>,
    pub language: Option<String>,
    /// Id of a reference-language text accuracy is measured against.
    pub measure_against: Option<String>,
}

/// A loaded config with paths resolved and every reference checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub digest: String,
    pub catalog: Arc<Catalog>,
    pub texts: Vec<(SourceText, Option<SourceText>)>,
}

/// One (chain, text) pair to execute.
#[derive(Debug, Clone)]
pub struct RunTask {
    pub run_id: String,
    pub spec: ChainSpec,
    pub text: SourceText,
    pub reference_text: Option<SourceText>,
}

impl Experiment {
    pub fn load(path: &Path) -> Result<Experiment, CliError> {
        let raw = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&raw)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Experiment::from_config(config, base_dir, &raw)
    }

    pub fn from_config(
        config: ExperimentConfig,
        base_dir: PathBuf,
        raw: &str,
    ) -> Result<Experiment, CliError> {
        let digest = hex::encode(Sha256::digest(raw.as_bytes()));
        let catalog = match &config.catalog {
            Some(p) => load_catalog(base_dir.join(p), &config.reference)?,
            None if config.reference == DEFAULT_REFERENCE => Catalog::bundled(),
            None => Catalog::parse(hopchain::catalog::BUNDLED_CATALOG, &config.reference)?,
        };

        let mut labels = BTreeSet::new();
        for c in &config.chains {
            if !labels.insert(c.label.as_str()) {
                return Err(CliError::Usage(format!(
                    "duplicate chain label `{}`",
                    c.label
                )));
            }
            if c.label.contains(['/', '\\']) || c.label.contains("__") {
                return Err(CliError::Usage(format!(
                    "chain label `{}` may not contain path separators or `__`",
                    c.label
                )));
            }
        }
        if config.chains.is_empty() || config.texts.is_empty() {
            return Err(CliError::Usage(
                "config needs at least one [[chain]] and one [[text]]".into(),
            ));
        }

        let mut loaded: Vec<SourceText> = Vec::new();
        for t in &config.texts {
            if loaded.iter().any(|l| l.id == t.id) {
                return Err(CliError::Usage(format!("duplicate text id `{}`", t.id)));
            }
            loaded.push(resolve_text(t, &base_dir)?);
        }
        let mut texts = Vec::new();
        for (entry, text) in config.texts.iter().zip(&loaded) {
            if !catalog.contains(&text.language) {
                return Err(CliError::Usage(format!(
                    "text `{}` is in `{}`, which the catalog lacks",
                    text.id, text.language
                )));
            }
            let against = match &entry.measure_against {
                None => None,
                Some(id) => {
                    let r = loaded
                        .iter()
                        .find(|l| &l.id == id)
                        .cloned()
                        .or_else(|| bundled_text(id))
                        .ok_or_else(|| {
                            CliError::Usage(format!("measure_against: unknown text `{id}`"))
                        })?;
                    if r.language != config.reference {
                        return Err(CliError::Usage(format!(
                            "measure_against text `{id}` is in `{}`, not the reference `{}`",
                            r.language, config.reference
                        )));
                    }
                    Some(r)
                }
            };
            texts.push((text.clone(), against));
        }
        let experiment = Experiment {
            config,
            base_dir,
            digest,
            catalog: Arc::new(catalog),
            texts,
        };
        // surface chain errors before anything runs
        experiment.tasks(experiment.config.topology)?;
        Ok(experiment)
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(p) => p.to_path_buf(),
            None => self.base_dir.join(&self.config.output),
        }
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.config.cache.as_ref().map(|p| self.base_dir.join(p))
    }

    fn chain_spec(&self, entry: &ChainEntry, topology: Topology) -> Result<ChainSpec, CliError> {
        let builder = ChainBuilder::new(&self.catalog)
            .topology(topology)
            .label(entry.label.clone());
        let need_seed = || {
            entry
                .seed
                .ok_or_else(|| CliError::Usage(format!("chain `{}` needs a seed", entry.label)))
        };
        let spec = match entry.mode {
            ChainMode::Random => builder.random(entry.hops, need_seed()?)?,
            ChainMode::Common => {
                let family = entry.family.as_deref().ok_or_else(|| {
                    CliError::Usage(format!("common chain `{}` needs a family", entry.label))
                })?;
                builder.common(family, entry.hops)?
            }
            ChainMode::Mixed => {
                let families: Vec<&str> = match &entry.families {
                    Some(f) => f.iter().map(String::as_str).collect(),
                    None => BUNDLED_MIXED_FAMILIES.to_vec(),
                };
                builder.mixed(&families, entry.hops, need_seed()?)?
            }
        };
        Ok(spec)
    }

    /// Every (chain, text) run in config order.
    pub fn tasks(&self, topology: Topology) -> Result<Vec<RunTask>, CliError> {
        let mut tasks = Vec::new();
        for entry in &self.config.chains {
            let spec = self.chain_spec(entry, topology)?;
            for (text, against) in &self.texts {
                tasks.push(RunTask {
                    run_id: format!("{}__{}", entry.label, text.id),
                    spec: spec.with_origin(&text.language),
                    text: text.clone(),
                    reference_text: against.clone(),
                });
            }
        }
        Ok(tasks)
    }

    /// Build the configured backend. Credentials are resolved here so a
    /// missing one fails before any hop.
    pub fn backend(&self) -> Result<Arc<dyn Translator>, CliError> {
        match &self.config.backend {
            BackendChoice::Simulator(s) => {
                let mut params = SimulatorParams::defaults_for(&self.catalog, s.seed);
                if let Some(v) = s.deletion_coefficient {
                    params.deletion_coefficient = v;
                }
                if let Some(v) = s.substitution_coefficient {
                    params.substitution_coefficient = v;
                }
                if let Some(v) = s.distance_normalizer {
                    params.distance_normalizer = v;
                }
                Ok(Arc::new(Simulator::new(params, self.catalog.clone())?))
            }
            BackendChoice::Live(cfg) => Ok(Arc::new(HttpTranslator::new(cfg.clone())?)),
        }
    }
}

fn resolve_text(entry: &TextEntry, base_dir: &Path) -> Result<SourceText, CliError> {
    match &entry.path {
        None => {
            let text = bundled_text(&entry.id).ok_or_else(|| {
                CliError::Usage(format!(
                    "text `{}` has no path and is not a bundled text",
                    entry.id
                ))
            })?;
            if let Some(lang) = &entry.language {
                if lang != &text.language {
                    return Err(CliError::Usage(format!(
                        "bundled text `{}` is in `{}`, not `{lang}`",
                        entry.id, text.language
                    )));
                }
            }
            Ok(text)
        }
        Some(path) => {
            let full = base_dir.join(path);
            let body = fs::read_to_string(&full)
                .map_err(|e| CliError::Usage(format!("{}: {e}", full.display())))?;
            let language = entry
                .language
                .clone()
                .ok_or_else(|| CliError::Usage(format!("text `{}` needs a language", entry.id)))?;
            Ok(SourceText::new(entry.id.clone(), language, body.trim_end()))
        }
    }
}
