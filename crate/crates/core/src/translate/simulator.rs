use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TranslateError, TranslationRequest, Translator};
use crate::catalog::{Catalog, CatalogError};

/// Knobs of the offline degradation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorParams {
    pub seed: u64,
    /// Per-word drop probability at maximal distance.
    pub deletion_coefficient: f64,
    /// Per-word substitution probability at maximal distance.
    pub substitution_coefficient: f64,
    /// Tree distance that counts as maximal.
    pub distance_normalizer: f64,
}

impl SimulatorParams {
    pub const DEFAULT_DELETION: f64 = 0.03;
    pub const DEFAULT_SUBSTITUTION: f64 = 0.08;

    /// Default coefficients, normalized by the catalog's largest distance.
    pub fn defaults_for(catalog: &Catalog, seed: u64) -> Self {
        SimulatorParams {
            seed,
            deletion_coefficient: Self::DEFAULT_DELETION,
            substitution_coefficient: Self::DEFAULT_SUBSTITUTION,
            distance_normalizer: f64::from(catalog.max_distance().value()).max(1.0),
        }
    }

    pub fn validate(&self) -> Result<(), TranslateError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.deletion_coefficient) || !unit(self.substitution_coefficient) {
            return Err(TranslateError::Config(
                "simulator coefficients must lie in [0, 1]".into(),
            ));
        }
        if !(self.distance_normalizer.is_finite() && self.distance_normalizer > 0.0) {
            return Err(TranslateError::Config(
                "distance_normalizer must be > 0".into(),
            ));
        }
        Ok(())
    }
}

fn unknown(e: CatalogError) -> TranslateError {
    match e {
        CatalogError::UnknownLanguage(code) => TranslateError::UnknownLanguage(code),
        other => TranslateError::Config(other.to_string()),
    }
}

fn request_rng(seed: u64, request: &TranslationRequest) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [&request.source, &request.target, &request.text] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh",
];
const NUCLEI: [&str; 8] = ["a", "e", "i", "o", "u", "ai", "ei", "ou"];

/// A made-up word standing in for `core` in the target language. Stable
/// for a given (seed, target, word).
fn pseudo_synonym(seed: u64, target: &str, core: &str) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(target.as_bytes());
    h.update([0]);
    h.update(core.to_lowercase().as_bytes());
    let bytes = h.finalize();
    let syllables = 1 + (bytes[0] % 3) as usize;
    let mut word: String = (0..syllables)
        .flat_map(|i| {
            let b = bytes[1 + i];
            [ONSETS[(b >> 4) as usize], NUCLEI[(b & 0x07) as usize]]
        })
        .collect();
    if core.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = word.chars();
        let first = chars.next().expect("non-empty");
        word = first.to_uppercase().chain(chars).collect();
    }
    word
}

/// Split a whitespace token into leading punctuation, word core and
/// trailing punctuation.
fn split_token(token: &str) -> (&str, &str, &str) {
    let start = token
        .find(|c: char| c.is_alphanumeric())
        .unwrap_or(token.len());
    let end = token
        .rfind(|c: char| c.is_alphanumeric())
        .map(|i| i + token[i..].chars().next().map_or(1, char::len_utf8))
        .unwrap_or(start);
    (
        &token[..start],
        &token[start..end.max(start)],
        &token[end.max(start)..],
    )
}

/// Deterministically degrade `request.text` as if translated across the
/// family-tree gap between its languages.
///
/// Every word is dropped with probability `deletion * d` and otherwise
/// replaced by a pseudo-synonym with probability `substitution * d`, where
/// `d` is the tree distance over the normalizer, clamped to `[0, 1]`.
pub fn simulate_translate(
    params: &SimulatorParams,
    catalog: &Catalog,
    request: &TranslationRequest,
) -> Result<String, TranslateError> {
    let distance = catalog
        .tree_distance(&request.source, &request.target)
        .map_err(unknown)?;
    let d = (f64::from(distance.value()) / params.distance_normalizer).clamp(0.0, 1.0);
    if d == 0.0 {
        return Ok(request.text.clone());
    }
    let p_delete = (params.deletion_coefficient * d).clamp(0.0, 1.0);
    let p_substitute = (params.substitution_coefficient * d).clamp(0.0, 1.0);
    let mut rng = request_rng(params.seed, request);
    let mut out: Vec<String> = Vec::new();
    for token in request.text.split_whitespace() {
        // both draws happen for every token so the stream stays aligned
        let drop_roll: f64 = rng.gen();
        let swap_roll: f64 = rng.gen();
        if drop_roll < p_delete {
            continue;
        }
        let (lead, core, trail) = split_token(token);
        if swap_roll < p_substitute && !core.is_empty() {
            out.push(format!(
                "{lead}{}{trail}",
                pseudo_synonym(params.seed, &request.target, core)
            ));
        } else {
            out.push(token.to_string());
        }
    }
    Ok(out.join(" "))
}

/// Offline backend around [`simulate_translate`].
#[derive(Debug, Clone)]
pub struct Simulator {
    params: SimulatorParams,
    catalog: Arc<Catalog>,
}

impl Simulator {
    pub fn new(params: SimulatorParams, catalog: Arc<Catalog>) -> Result<Self, TranslateError> {
        params.validate()?;
        Ok(Simulator { params, catalog })
    }

    pub fn params(&self) -> &SimulatorParams {
        &self.params
    }
}

impl Translator for Simulator {
    fn identity(&self) -> String {
        let p = &self.params;
        format!(
            "simulator(seed={},del={},sub={},norm={})",
            p.seed, p.deletion_coefficient, p.substitution_coefficient, p.distance_normalizer
        )
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        simulate_translate(&self.params, &self.catalog, request)
    }
}
