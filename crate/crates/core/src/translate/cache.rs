use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use super::{translate, TranslateError, TranslationRequest, Translator};

const LOG_FILE: &str = "translations.jsonl";
const COMPACT_MIN_STALE: usize = 256;

fn sha256_hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0x1f]);
    }
    hex::encode(h.finalize())
}

/// One stored response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub backend: String,
    pub source: String,
    pub target: String,
    /// SHA-256 of the NFC-normalized request text.
    pub digest: String,
    pub created_at: u64,
    pub text: String,
    /// SHA-256 over key and text, checked on load.
    pub check: String,
}

impl CacheRecord {
    fn checksum(key: &str, text: &str) -> String {
        sha256_hex(&[key, text])
    }

    fn verify(&self) -> bool {
        self.check == Self::checksum(&self.key, &self.text)
    }
}

/// Persistent translation memo: a directory holding one append-only
/// JSON-lines log. Readers run concurrently; appends are serialized.
pub struct TranslationCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, CacheRecord>>,
    writer: Mutex<File>,
}

impl TranslationCache {
    pub fn key(backend: &str, request: &TranslationRequest) -> String {
        let normalized: String = request.text.nfc().collect();
        let digest = sha256_hex(&[&normalized]);
        sha256_hex(&[backend, &request.source, &request.target, &digest])
    }

    /// Open (creating if needed) the store in `dir`. Any unparsable or
    /// checksum-failing record is an integrity error.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, TranslateError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut entries = HashMap::new();
        let mut lines = 0usize;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: CacheRecord =
                    serde_json::from_str(&line).map_err(|e| TranslateError::CacheIntegrity {
                        line: i + 1,
                        reason: e.to_string(),
                    })?;
                if !record.verify() {
                    return Err(TranslateError::CacheIntegrity {
                        line: i + 1,
                        reason: "checksum mismatch".into(),
                    });
                }
                lines += 1;
                entries.insert(record.key.clone(), record);
            }
        }
        let stale = lines - entries.len();
        if stale >= COMPACT_MIN_STALE && stale > entries.len() {
            rewrite(&path, &entries)?;
        }
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(TranslationCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(writer),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, backend: &str, request: &TranslationRequest) -> Option<String> {
        let key = Self::key(backend, request);
        self.entries
            .read()
            .unwrap()
            .get(&key)
            .map(|r| r.text.clone())
    }

    pub fn put(
        &self,
        backend: &str,
        request: &TranslationRequest,
        text: &str,
    ) -> Result<(), TranslateError> {
        let key = Self::key(backend, request);
        let normalized: String = request.text.nfc().collect();
        let record = CacheRecord {
            check: CacheRecord::checksum(&key, text),
            key: key.clone(),
            backend: backend.to_string(),
            source: request.source.clone(),
            target: request.target.clone(),
            digest: sha256_hex(&[&normalized]),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            text: text.to_string(),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        {
            let mut w = self.writer.lock().unwrap();
            w.write_all(line.as_bytes())?;
            w.flush()?;
        }
        self.entries.write().unwrap().insert(key, record);
        Ok(())
    }

    /// Rewrite the log keeping one record per key.
    pub fn compact(&self) -> Result<(), TranslateError> {
        let mut w = self.writer.lock().unwrap();
        let entries = self.entries.read().unwrap();
        rewrite(&self.path, &entries)?;
        *w = OpenOptions::new().append(true).open(&self.path)?;
        Ok(())
    }
}

fn rewrite(path: &Path, entries: &HashMap<String, CacheRecord>) -> Result<(), TranslateError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = File::create(&tmp)?;
        let mut records: Vec<&CacheRecord> = entries.values().collect();
        records.sort_by(|a, b| (a.created_at, &a.key).cmp(&(b.created_at, &b.key)));
        for r in records {
            serde_json::to_writer(&mut f, r).expect("record serializes");
            f.write_all(b"\n")?;
        }
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

/// Serve `request` from `cache`, delegating and storing on a miss. Backend
/// errors are never stored.
pub fn cached_translate<T: Translator + ?Sized>(
    cache: &TranslationCache,
    backend: &T,
    request: &TranslationRequest,
) -> Result<String, TranslateError> {
    if request.is_identity() {
        return Ok(request.text.clone());
    }
    let id = backend.identity();
    if let Some(hit) = cache.get(&id, request) {
        return Ok(hit);
    }
    let text = translate(backend, request)?;
    cache.put(&id, request, &text)?;
    Ok(text)
}

/// A backend wrapped with a persistent cache. Reports the inner backend's
/// identity, so cached and uncached runs are interchangeable.
pub struct CachedTranslator<T> {
    inner: T,
    cache: Arc<TranslationCache>,
}

impl<T: Translator> CachedTranslator<T> {
    pub fn new(inner: T, cache: Arc<TranslationCache>) -> Self {
        CachedTranslator { inner, cache }
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }
}

impl<T: Translator> Translator for CachedTranslator<T> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn translate_remote(&self, request: &TranslationRequest) -> Result<String, TranslateError> {
        cached_translate(&self.cache, &self.inner, request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::CountingTranslator;
    use proptest::prelude::*;

    /// Deterministic fake: reverses words and tags the target.
    struct Reverser;

    impl Translator for Reverser {
        fn identity(&self) -> String {
            "reverser".into()
        }

        fn translate_remote(&self, r: &TranslationRequest) -> Result<String, TranslateError> {
            if r.target == "xx" {
                return Err(TranslateError::UnsupportedPair {
                    source_lang: r.source.clone(),
                    target_lang: r.target.clone(),
                });
            }
            let words: Vec<&str> = r.text.split_whitespace().rev().collect();
            Ok(format!("[{}] {}", r.target, words.join(" ")))
        }
    }

    #[test]
    fn second_request_is_served_from_store() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let backend = CountingTranslator::new(Reverser);
        let req = TranslationRequest::new("a b c", "en", "de");
        let first = cached_translate(&cache, &backend, &req).unwrap();
        let second = cached_translate(&cache, &backend, &req).unwrap();
        assert_eq!(first, second);
        assert_eq!(backend.calls(), 1);

        // survives reopening
        drop(cache);
        let cache = TranslationCache::open(dir.path()).unwrap();
        assert_eq!(cached_translate(&cache, &backend, &req).unwrap(), first);
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn distinct_texts_have_distinct_keys() {
        let keys: std::collections::HashSet<String> = (0..500)
            .map(|i| {
                TranslationCache::key("b", &TranslationRequest::new(format!("t{i}"), "en", "de"))
            })
            .collect();
        assert_eq!(keys.len(), 500);
        let a = TranslationCache::key("b", &TranslationRequest::new("x", "en", "de"));
        assert_ne!(
            a,
            TranslationCache::key("c", &TranslationRequest::new("x", "en", "de"))
        );
        assert_ne!(
            a,
            TranslationCache::key("b", &TranslationRequest::new("x", "en", "fr"))
        );
    }

    #[test]
    fn equivalent_unicode_forms_share_a_key() {
        let a = TranslationCache::key("b", &TranslationRequest::new("Heráclito", "pt", "en"));
        let b = TranslationCache::key(
            "b",
            &TranslationRequest::new("Hera\u{301}clito", "pt", "en"),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn errors_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let backend = CountingTranslator::new(Reverser);
        let req = TranslationRequest::new("a", "en", "xx");
        assert!(cached_translate(&cache, &backend, &req).is_err());
        assert!(cached_translate(&cache, &backend, &req).is_err());
        assert_eq!(backend.calls(), 2);
        assert!(cache.is_empty());
    }

    #[test]
    fn corrupted_record_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cache = TranslationCache::open(dir.path()).unwrap();
            cached_translate(
                &cache,
                &Reverser,
                &TranslationRequest::new("a b", "en", "de"),
            )
            .unwrap();
            cached_translate(
                &cache,
                &Reverser,
                &TranslationRequest::new("c d", "en", "de"),
            )
            .unwrap();
        }
        let path = dir.path().join(LOG_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("[de] b a", "[de] tampered", 1)).unwrap();
        match TranslationCache::open(dir.path()) {
            Err(TranslateError::CacheIntegrity { line: 1, .. }) => {}
            other => panic!("expected integrity error, got {:?}", other.map(|_| ())),
        }

        fs::write(&path, "{not json\n").unwrap();
        assert!(matches!(
            TranslationCache::open(dir.path()),
            Err(TranslateError::CacheIntegrity { line: 1, .. })
        ));
    }

    #[test]
    fn compaction_keeps_latest_records() {
        let dir = tempfile::tempdir().unwrap();
        let cache = TranslationCache::open(dir.path()).unwrap();
        let req = TranslationRequest::new("a", "en", "de");
        cache.put("b", &req, "one").unwrap();
        cache.put("b", &req, "two").unwrap();
        cache
            .put("b", &TranslationRequest::new("z", "en", "de"), "zz")
            .unwrap();
        cache.compact().unwrap();
        cache
            .put("b", &TranslationRequest::new("y", "en", "de"), "yy")
            .unwrap();
        let lines = fs::read_to_string(cache.path()).unwrap().lines().count();
        assert_eq!(lines, 3);
        drop(cache);
        let reopened = TranslationCache::open(dir.path()).unwrap();
        assert_eq!(reopened.get("b", &req).as_deref(), Some("two"));
        assert_eq!(reopened.len(), 3);
    }

    #[test]
    fn concurrent_readers_and_writers() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Arc::new(TranslationCache::open(dir.path()).unwrap());
        std::thread::scope(|s| {
            for t in 0..4 {
                let cache = cache.clone();
                s.spawn(move || {
                    for i in 0..50 {
                        let req =
                            TranslationRequest::new(format!("w{}", i % 20), "en", format!("l{t}"));
                        cached_translate(&cache, &Reverser, &req).unwrap();
                    }
                });
            }
        });
        assert_eq!(cache.len(), 80);
        drop(cache);
        assert_eq!(TranslationCache::open(dir.path()).unwrap().len(), 80);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cache_is_transparent(reqs in proptest::collection::vec((0u8..6, 0u8..3), 1..30)) {
            let dir = tempfile::tempdir().unwrap();
            let cached = CachedTranslator::new(
                Reverser,
                Arc::new(TranslationCache::open(dir.path()).unwrap()),
            );
            let mut memo: HashMap<(u8, u8), String> = HashMap::new();
            for (text, lang) in reqs {
                let req = TranslationRequest::new(format!("word {text}"), "en", format!("t{lang}"));
                let via_cache = translate(&cached, &req).unwrap();
                let replay = memo
                    .entry((text, lang))
                    .or_insert_with(|| translate(&Reverser, &req).unwrap())
                    .clone();
                prop_assert_eq!(via_cache, replay);
            }
        }
    }
}
