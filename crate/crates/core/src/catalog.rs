//! Language inventory, family-tree distance and chain construction.
//!
//! Every language is a leaf hanging under its `family_path` in one shared
//! tree with an implicit root above all top-level families. Distances are
//! edge counts through the lowest common ancestor.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source of [`Catalog::bundled`].
pub const BUNDLED_CATALOG: &str = include_str!("../data/languages.tsv");

/// Code of the reference language of the bundled catalog.
pub const DEFAULT_REFERENCE: &str = "en";

/// Families of the bundled mixed chains, one language drawn from each.
pub const BUNDLED_MIXED_FAMILIES: [&str; 6] = [
    "Germanic",
    "Indic",
    "Iranian",
    "Romance",
    "Sino-Tibetan",
    "Slavic",
];

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate language code `{0}`")]
    DuplicateCode(String),
    #[error("reference language `{0}` is not in the catalog")]
    MissingReference(String),
    #[error("catalog needs at least 2 languages, found {0}")]
    TooSmall(usize),
    #[error("unknown language code `{0}`")]
    UnknownLanguage(String),
    #[error("family `{family}` has {found} usable languages, need at least {needed}")]
    FamilyTooSmall {
        family: String,
        found: usize,
        needed: usize,
    },
    #[error("mixed chains need at least 2 distinct families, got {0}")]
    TooFewFamilies(usize),
    #[error("chain needs at least 1 hop")]
    NoHops,
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Language {
    pub code: String,
    pub name: String,
    pub family_path: Vec<String>,
}

impl Language {
    pub fn in_family(&self, family: &str) -> bool {
        self.family_path.iter().any(|f| f == family)
    }
}

/// Path length between two languages in the family tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FamilyDistance(pub u32);

impl FamilyDistance {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for FamilyDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An immutable set of languages with a designated reference language.
#[derive(Debug, Clone)]
pub struct Catalog {
    languages: Vec<Language>,
    index: HashMap<String, usize>,
    reference: String,
}

impl Catalog {
    /// The bundled 71-language catalog with English as reference.
    pub fn bundled() -> Catalog {
        Catalog::parse(BUNDLED_CATALOG, DEFAULT_REFERENCE).expect("bundled catalog is valid")
    }

    /// Parse `code<TAB>name<TAB>family>path` records. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str, reference: &str) -> Result<Catalog, CatalogError> {
        let mut languages = Vec::new();
        let mut index = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(CatalogError::Parse {
                    line: lineno,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let code = fields[0].trim();
            let name = fields[1].trim();
            if code.is_empty() || name.is_empty() {
                return Err(CatalogError::Parse {
                    line: lineno,
                    reason: "empty code or name".into(),
                });
            }
            let family_path: Vec<String> =
                fields[2].split('>').map(|s| s.trim().to_string()).collect();
            if family_path.iter().any(String::is_empty) {
                return Err(CatalogError::Parse {
                    line: lineno,
                    reason: "empty family path segment".into(),
                });
            }
            if index.insert(code.to_string(), languages.len()).is_some() {
                return Err(CatalogError::DuplicateCode(code.to_string()));
            }
            languages.push(Language {
                code: code.to_string(),
                name: name.to_string(),
                family_path,
            });
        }
        if languages.len() < 2 {
            return Err(CatalogError::TooSmall(languages.len()));
        }
        if !index.contains_key(reference) {
            return Err(CatalogError::MissingReference(reference.to_string()));
        }
        Ok(Catalog {
            languages,
            index,
            reference: reference.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn languages(&self) -> &[Language] {
        &self.languages
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    pub fn get(&self, code: &str) -> Option<&Language> {
        self.index.get(code).map(|&i| &self.languages[i])
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    fn lookup(&self, code: &str) -> Result<&Language, CatalogError> {
        self.get(code)
            .ok_or_else(|| CatalogError::UnknownLanguage(code.to_string()))
    }

    /// Non-reference codes, sorted.
    fn candidates<'a>(&'a self, filter: impl Fn(&Language) -> bool + 'a) -> Vec<String> {
        let mut codes: Vec<String> = self
            .languages
            .iter()
            .filter(|l| l.code != self.reference && filter(l))
            .map(|l| l.code.clone())
            .collect();
        codes.sort();
        codes
    }

    /// Non-reference members of `family`, sorted by code.
    pub fn family_members(&self, family: &str) -> Vec<String> {
        self.candidates(move |l| l.in_family(family))
    }

    pub fn tree_distance(&self, a: &str, b: &str) -> Result<FamilyDistance, CatalogError> {
        let la = self.lookup(a)?;
        let lb = self.lookup(b)?;
        if la.code == lb.code {
            return Ok(FamilyDistance(0));
        }
        let shared = la
            .family_path
            .iter()
            .zip(&lb.family_path)
            .take_while(|(x, y)| x == y)
            .count();
        // +1 on each side for the leaf itself
        let up = la.family_path.len() - shared + 1;
        let down = lb.family_path.len() - shared + 1;
        Ok(FamilyDistance((up + down) as u32))
    }

    /// Largest distance between any two catalog languages.
    pub fn max_distance(&self) -> FamilyDistance {
        let mut best = FamilyDistance(0);
        for a in &self.languages {
            for b in &self.languages {
                let d = self.tree_distance(&a.code, &b.code).expect("members");
                best = best.max(d);
            }
        }
        best
    }
}

/// Read a catalog file.
pub fn load_catalog(path: impl AsRef<Path>, reference: &str) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path)?;
    Catalog::parse(&text, reference)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    Random,
    Common,
    Mixed,
}

impl fmt::Display for ChainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainMode::Random => "random",
            ChainMode::Common => "common",
            ChainMode::Mixed => "mixed",
        })
    }
}

/// How hops connect the visited languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every visit goes reference -> L -> reference; even steps are in the
    /// reference language.
    #[default]
    Pivot,
    /// L1 -> L2 -> ... -> Lm -> reference -> L1 ...; each step is measured
    /// through an extra side translation to the reference.
    Direct,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Pivot => "pivot",
            Topology::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub source: String,
    pub target: String,
}

/// The plan of one chain: which language pair each hop translates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub label: String,
    pub mode: ChainMode,
    pub topology: Topology,
    pub reference: String,
    /// Language of the text fed to hop 1.
    pub origin: String,
    pub hops: usize,
    pub seed: Option<u64>,
    /// Visited non-reference languages, in cycle order.
    pub languages: Vec<String>,
    pub hop_plan: Vec<Hop>,
}

impl ChainSpec {
    /// Check length, connectivity and origin.
    pub fn validate(&self) -> Result<(), CatalogError> {
        let bad = |m: String| Err(CatalogError::InvalidSpec(m));
        if self.hop_plan.len() != self.hops {
            return bad(format!(
                "hop plan has {} entries, expected {}",
                self.hop_plan.len(),
                self.hops
            ));
        }
        if let Some(first) = self.hop_plan.first() {
            if first.source != self.origin {
                return bad(format!(
                    "first hop starts at `{}`, origin is `{}`",
                    first.source, self.origin
                ));
            }
        }
        for (i, pair) in self.hop_plan.windows(2).enumerate() {
            if pair[0].target != pair[1].source {
                return bad(format!("hops {} and {} do not connect", i + 1, i + 2));
            }
        }
        Ok(())
    }

    /// Languages touched by the chain, reference first.
    pub fn chain_languages(&self) -> Vec<String> {
        let mut out = vec![self.reference.clone()];
        for code in &self.languages {
            if !out.contains(code) {
                out.push(code.clone());
            }
        }
        out
    }

    /// Re-plan the same visit order starting from another language. Used
    /// when the source text is not in the reference language.
    pub fn with_origin(&self, origin: &str) -> ChainSpec {
        let mut spec = self.clone();
        spec.origin = origin.to_string();
        spec.hop_plan = plan_hops(
            self.topology,
            &self.reference,
            origin,
            &self.languages,
            self.hops,
        );
        spec
    }
}

fn plan_hops(
    topology: Topology,
    reference: &str,
    origin: &str,
    visits: &[String],
    hops: usize,
) -> Vec<Hop> {
    let mut plan = Vec::with_capacity(hops);
    let mut current = origin.to_string();
    match topology {
        Topology::Pivot => {
            for i in 0..hops {
                let target = if i % 2 == 0 {
                    visits[(i / 2) % visits.len()].clone()
                } else {
                    reference.to_string()
                };
                plan.push(Hop {
                    source: std::mem::replace(&mut current, target.clone()),
                    target,
                });
            }
        }
        Topology::Direct => {
            let cycle: Vec<&str> = visits
                .iter()
                .map(String::as_str)
                .chain(std::iter::once(reference))
                .collect();
            for i in 0..hops {
                let target = cycle[i % cycle.len()].to_string();
                plan.push(Hop {
                    source: std::mem::replace(&mut current, target.clone()),
                    target,
                });
            }
        }
    }
    plan
}

/// Builds chain specs against one catalog.
#[derive(Debug, Clone)]
pub struct ChainBuilder<'a> {
    catalog: &'a Catalog,
    topology: Topology,
    origin: Option<String>,
    label: Option<String>,
}

impl<'a> ChainBuilder<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        ChainBuilder {
            catalog,
            topology: Topology::default(),
            origin: None,
            label: None,
        }
    }

    pub fn topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    /// Start the chain in `code` instead of the reference language.
    pub fn origin(mut self, code: impl Into<String>) -> Self {
        self.origin = Some(code.into());
        self
    }

    pub fn label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    fn finish(
        &self,
        mode: ChainMode,
        default_label: String,
        seed: Option<u64>,
        languages: Vec<String>,
        hops: usize,
    ) -> Result<ChainSpec, CatalogError> {
        if hops < 1 {
            return Err(CatalogError::NoHops);
        }
        let reference = self.catalog.reference().to_string();
        let origin = self.origin.clone().unwrap_or_else(|| reference.clone());
        self.catalog.lookup(&origin)?;
        let hop_plan = plan_hops(self.topology, &reference, &origin, &languages, hops);
        let spec = ChainSpec {
            label: self.label.clone().unwrap_or(default_label),
            mode,
            topology: self.topology,
            reference,
            origin,
            hops,
            seed,
            languages,
            hop_plan,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All non-reference languages in a seeded random order.
    pub fn random(&self, hops: usize, seed: u64) -> Result<ChainSpec, CatalogError> {
        let mut languages = self.catalog.candidates(|_| true);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        languages.shuffle(&mut rng);
        self.finish(
            ChainMode::Random,
            format!("rand-{seed}"),
            Some(seed),
            languages,
            hops,
        )
    }

    /// The non-reference members of one family, in code order.
    pub fn common(&self, family: &str, hops: usize) -> Result<ChainSpec, CatalogError> {
        let languages = self.catalog.family_members(family);
        if languages.len() < 2 {
            return Err(CatalogError::FamilyTooSmall {
                family: family.to_string(),
                found: languages.len(),
                needed: 2,
            });
        }
        self.finish(
            ChainMode::Common,
            format!("com-{family}"),
            None,
            languages,
            hops,
        )
    }

    /// One seeded pick per family, visited in the order the families are
    /// given.
    pub fn mixed(
        &self,
        families: &[&str],
        hops: usize,
        seed: u64,
    ) -> Result<ChainSpec, CatalogError> {
        let distinct: BTreeSet<&str> = families.iter().copied().collect();
        if distinct.len() < 2 || distinct.len() != families.len() {
            return Err(CatalogError::TooFewFamilies(distinct.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut languages = Vec::with_capacity(families.len());
        for family in families {
            let members = self.catalog.family_members(family);
            if members.is_empty() {
                return Err(CatalogError::FamilyTooSmall {
                    family: family.to_string(),
                    found: 0,
                    needed: 1,
                });
            }
            languages.push(members[rng.gen_range(0..members.len())].clone());
        }
        self.finish(
            ChainMode::Mixed,
            format!("mix-{seed}"),
            Some(seed),
            languages,
            hops,
        )
    }
}

pub fn build_random_chain(
    catalog: &Catalog,
    hops: usize,
    seed: u64,
) -> Result<ChainSpec, CatalogError> {
    ChainBuilder::new(catalog).random(hops, seed)
}

pub fn build_common_chain(
    catalog: &Catalog,
    family: &str,
    hops: usize,
) -> Result<ChainSpec, CatalogError> {
    ChainBuilder::new(catalog).common(family, hops)
}

pub fn build_mixed_chain(
    catalog: &Catalog,
    families: &[&str],
    hops: usize,
    seed: u64,
) -> Result<ChainSpec, CatalogError> {
    ChainBuilder::new(catalog).mixed(families, hops, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(catalog: &Catalog, codes: &[String]) -> Vec<String> {
        let mut v: Vec<String> = codes
            .iter()
            .map(|c| catalog.get(c).unwrap().name.clone())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn bundled_has_71_languages() {
        let c = Catalog::bundled();
        assert_eq!(c.len(), 71);
        assert_eq!(c.reference(), "en");
    }

    #[test]
    fn duplicate_codes_rejected() {
        let err = Catalog::parse("en\tEnglish\tA>B\nen\tAgain\tA>C\n", "en").unwrap_err();
        assert!(matches!(err, CatalogError::DuplicateCode(c) if c == "en"));
    }

    #[test]
    fn minimal_catalog() {
        let c = Catalog::parse("# two\nen\tEnglish\tX\nfr\tFrench\tY\n", "en").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn malformed_catalogs() {
        assert!(matches!(
            Catalog::parse("en\tEnglish\n", "en"),
            Err(CatalogError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Catalog::parse("en\tEnglish\tA>>B\nfr\tFrench\tA\n", "en"),
            Err(CatalogError::Parse { .. })
        ));
        assert!(matches!(
            Catalog::parse("de\tGerman\tA\nfr\tFrench\tA\n", "en"),
            Err(CatalogError::MissingReference(_))
        ));
        assert!(matches!(
            Catalog::parse("en\tEnglish\tA\n", "en"),
            Err(CatalogError::TooSmall(1))
        ));
    }

    #[test]
    fn distances() {
        let c = Catalog::parse("a\tA\tR>X\nb\tB\tR>Y\nc\tC\tR>X\n", "a").unwrap();
        assert_eq!(c.tree_distance("a", "a").unwrap(), FamilyDistance(0));
        // leaves a and b share only R; two edges down on each side
        assert_eq!(c.tree_distance("a", "b").unwrap(), FamilyDistance(4));
        assert_eq!(c.tree_distance("a", "c").unwrap(), FamilyDistance(2));
        assert!(matches!(
            c.tree_distance("a", "zz"),
            Err(CatalogError::UnknownLanguage(_))
        ));
    }

    #[test]
    fn romance_closer_than_slavic() {
        let c = Catalog::bundled();
        assert!(c.tree_distance("pt", "it").unwrap() < c.tree_distance("pt", "ru").unwrap());
    }

    #[test]
    fn random_chain_is_deterministic_and_sized() {
        let c = Catalog::bundled();
        let a = build_random_chain(&c, 284, 1).unwrap();
        let b = build_random_chain(&c, 284, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hop_plan.len(), 284);
        assert_eq!(a.languages.len(), 70);
        assert_eq!(a.hop_plan[0].source, "en");
        assert!(matches!(
            build_random_chain(&c, 0, 1),
            Err(CatalogError::NoHops)
        ));
    }

    #[test]
    fn random_chains_differ_across_seeds() {
        let c = Catalog::bundled();
        let plans: BTreeSet<Vec<String>> = (0..20)
            .map(|s| build_random_chain(&c, 284, s).unwrap().languages)
            .collect();
        assert_eq!(plans.len(), 20);
    }

    #[test]
    fn common_chains_use_the_named_family() {
        let c = Catalog::bundled();
        let com1 = build_common_chain(&c, "Romance", 284).unwrap();
        assert_eq!(
            names(&c, &com1.languages),
            [
                "Catalan",
                "French",
                "Italian",
                "Portuguese",
                "Romanian",
                "Spanish"
            ]
        );
        let com2 = build_common_chain(&c, "Germanic", 284).unwrap();
        assert_eq!(
            names(&c, &com2.languages),
            [
                "Afrikaans",
                "Danish",
                "Dutch",
                "German",
                "Norwegian",
                "Swedish"
            ]
        );
        assert!(matches!(
            build_common_chain(&c, "Hellenic", 10),
            Err(CatalogError::FamilyTooSmall { found: 1, .. })
        ));
    }

    #[test]
    fn mixed_chain_has_seven_languages() {
        let c = Catalog::bundled();
        let mix = build_mixed_chain(&c, &BUNDLED_MIXED_FAMILIES, 284, 3).unwrap();
        assert_eq!(mix.chain_languages().len(), 7);
        assert_eq!(
            mix,
            build_mixed_chain(&c, &BUNDLED_MIXED_FAMILIES, 284, 3).unwrap()
        );
        assert!(matches!(
            build_mixed_chain(&c, &["Slavic"], 10, 1),
            Err(CatalogError::TooFewFamilies(1))
        ));
    }

    #[test]
    fn pivot_plan_alternates_through_reference() {
        let c = Catalog::bundled();
        let spec = build_common_chain(&c, "Romance", 6).unwrap();
        let pairs: Vec<(&str, &str)> = spec
            .hop_plan
            .iter()
            .map(|h| (h.source.as_str(), h.target.as_str()))
            .collect();
        assert_eq!(
            pairs,
            [
                ("en", "ca"),
                ("ca", "en"),
                ("en", "es"),
                ("es", "en"),
                ("en", "fr"),
                ("fr", "en")
            ]
        );
    }

    #[test]
    fn direct_plan_cycles_through_reference() {
        let c = Catalog::bundled();
        let spec = ChainBuilder::new(&c)
            .topology(Topology::Direct)
            .common("Romance", 8)
            .unwrap();
        let targets: Vec<&str> = spec.hop_plan.iter().map(|h| h.target.as_str()).collect();
        assert_eq!(targets, ["ca", "es", "fr", "it", "pt", "ro", "en", "ca"]);
        spec.validate().unwrap();
    }

    #[test]
    fn origin_shifts_first_hop() {
        let c = Catalog::bundled();
        let spec = ChainBuilder::new(&c).origin("pt").random(10, 4).unwrap();
        assert_eq!(spec.hop_plan[0].source, "pt");
        assert_eq!(spec.hop_plan[1].target, "en");
        spec.validate().unwrap();
        assert_eq!(spec.with_origin("en").hop_plan[0].source, "en");
    }

    #[test]
    fn validate_catches_broken_plans() {
        let c = Catalog::bundled();
        let mut spec = build_random_chain(&c, 4, 1).unwrap();
        spec.hop_plan[2].source = "xx".into();
        assert!(spec.validate().is_err());
        spec.hop_plan.pop();
        assert!(spec.validate().is_err());
    }
}
