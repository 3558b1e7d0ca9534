use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::time::{Duration, Instant};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Machine translation between language codes.
///
/// Must never return empty output for nonempty input; failures surface as
/// [`Error::Transport`].
pub trait TranslatorClient: Send + Sync {
    fn translate(&self, text: &str, source_lang: &str, target_lang: &str) -> Result<String>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl TranslatorClient for IdentityTranslator {
    fn translate(&self, text: &str, _source: &str, _target: &str) -> Result<String> {
        Ok(text.to_owned())
    }
}

/// Retry with exponential backoff on transport errors.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(200),
        }
    }
}

/// Wraps a client with a retry policy and a minimum spacing between calls.
pub struct ResilientTranslator<C> {
    inner: C,
    retry: RetryPolicy,
    min_interval: Duration,
    last_call: Mutex<Option<Instant>>,
}

impl<C: TranslatorClient> ResilientTranslator<C> {
    pub fn new(inner: C, retry: RetryPolicy, min_interval: Duration) -> Self {
        ResilientTranslator {
            inner,
            retry,
            min_interval,
            last_call: Mutex::new(None),
        }
    }

    fn pace(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_call.lock().expect("rate limiter lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

impl<C: TranslatorClient> TranslatorClient for ResilientTranslator<C> {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String> {
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            self.pace();
            match self.inner.translate(text, source, target) {
                Ok(out) => return Ok(out),
                Err(Error::Transport(msg)) if attempt < self.retry.max_attempts => {
                    tracing::debug!(attempt, %msg, "translation failed, retrying");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// Content-addressed on-disk cache in front of a client. Keys hash
/// `(source, target, text)`; each entry is one file.
pub struct CachedTranslator<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: TranslatorClient> CachedTranslator<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
        Ok(CachedTranslator { inner, dir })
    }

    fn key(text: &str, source: &str, target: &str) -> String {
        let mut h = Sha256::new();
        for part in [source, target, text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl<C: TranslatorClient> TranslatorClient for CachedTranslator<C> {
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String> {
        let key = Self::key(text, source, target);
        let path = self.dir.join(&key[..2]).join(&key);
        if let Ok(hit) = std::fs::read_to_string(&path) {
            return Ok(hit);
        }
        let out = self.inner.translate(text, source, target)?;
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
        // Write-then-rename keeps concurrent readers from seeing partial files.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, &out).map_err(|e| Error::file(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::file(&path, e))?;
        Ok(out)
    }
}
