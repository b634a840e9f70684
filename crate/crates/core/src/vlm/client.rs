use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::ImageBuffer;
use crate::taxonomy::{Taxonomy, INVALID_LABEL};

use super::backend::{request_body, ChatBackend};
use super::limiter::{Clock, RateLimiter};

/// Environment variable holding the API key unless the config names another.
pub const DEFAULT_CREDENTIAL_ENV: &str = "LAIONC_VLM_API_KEY";

fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    2
}
fn default_rate() -> f64 {
    1.0
}
fn default_workers() -> usize {
    4
}
fn default_credential_env() -> String {
    DEFAULT_CREDENTIAL_ENV.to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlmConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after a transport failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Requests per second across all workers.
    #[serde(default = "default_rate")]
    pub rate_limit: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_credential_env")]
    pub credential_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl VlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        VlmConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            rate_limit: default_rate(),
            workers: default_workers(),
            credential_env: default_credential_env(),
            temperature: None,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return Err(Error::InvalidArgument(format!("rate_limit {} must be positive", self.rate_limit)));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn credential(&self) -> Option<String> {
        std::env::var(&self.credential_env).ok().filter(|v| !v.is_empty())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

/// Outcome of one image: a superclass label or `"invalid"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    /// Every assistant reply received, in order.
    pub raw: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Classification {
    fn invalid(raw: Vec<String>, error: String) -> Self {
        Classification {
            label: INVALID_LABEL.to_string(),
            raw,
            error: Some(error),
        }
    }
}

pub struct VlmClient<B, C: Clock> {
    backend: B,
    cfg: VlmConfig,
    tax: Taxonomy,
    limiter: RateLimiter<C>,
}

impl<B: ChatBackend, C: Clock> VlmClient<B, C> {
    pub fn new(backend: B, cfg: VlmConfig, tax: Taxonomy, clock: C) -> Result<Self> {
        cfg.validate()?;
        let limiter = RateLimiter::new(cfg.rate_limit, clock)?;
        Ok(VlmClient {
            backend,
            cfg,
            tax,
            limiter,
        })
    }

    pub fn config(&self) -> &VlmConfig {
        &self.cfg
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.tax
    }

    pub fn limiter(&self) -> &RateLimiter<C> {
        &self.limiter
    }

    fn send(&self, body: &serde_json::Value) -> Result<String> {
        let mut last = None;
        for _ in 0..=self.cfg.retries {
            self.limiter.acquire();
            match self.backend.complete(body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::debug!("request failed: {e}");
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Sends the image; an unmappable reply is asked once more, then
    /// reported as invalid. Never fails: errors end up in the annotation.
    pub fn classify_png(&self, png: &[u8]) -> Classification {
        let body = request_body(&self.cfg.model, png, self.cfg.temperature, self.cfg.max_tokens);
        let mut raw = Vec::new();
        for _ in 0..2 {
            match self.send(&body) {
                Ok(text) => {
                    let label = self.tax.normalize(&text).map(str::to_string);
                    raw.push(text);
                    if let Some(label) = label {
                        return Classification { label, raw, error: None };
                    }
                }
                Err(e) => return Classification::invalid(raw, e.to_string()),
            }
        }
        Classification::invalid(raw, "unmappable response".into())
    }

    pub fn classify_image(&self, path: impl AsRef<Path>) -> Classification {
        match ImageBuffer::load(path).and_then(|img| img.encode_png()) {
            Ok(png) => self.classify_png(&png),
            Err(e) => Classification::invalid(Vec::new(), e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::vlm::{ManualClock, MockBackend};

    fn client<F>(f: F) -> VlmClient<MockBackend<F>, ManualClock>
    where
        F: Fn(&serde_json::Value) -> Result<String> + Send + Sync,
    {
        let mut cfg = VlmConfig::new("http://mock", "mock");
        cfg.rate_limit = 100.0;
        VlmClient::new(MockBackend::new(f), cfg, Taxonomy::builtin(), ManualClock::default()).unwrap()
    }

    #[test]
    fn normalizes_replies() {
        assert_eq!(client(|_| Ok("Dog.".into())).classify_png(b"x").label, "dog");
        assert_eq!(client(|_| Ok(" timekeeper\n".into())).classify_png(b"x").label, "timekeeping");
        assert_eq!(client(|_| Ok("Vehicle".into())).classify_png(b"x").label, "car & truck");
    }

    #[test]
    fn unmappable_reply_is_retried_once() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let r = client(move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Ok("banana".into())
        })
        .classify_png(b"x");
        assert_eq!(r.label, INVALID_LABEL);
        assert_eq!(r.raw, vec!["banana", "banana"]);
        assert_eq!(calls.load(Ordering::SeqCst), 2);

        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let r = client(move |_| Ok(if c.fetch_add(1, Ordering::SeqCst) == 0 { "banana" } else { "cat" }.into()))
            .classify_png(b"x");
        assert_eq!(r.label, "cat");
        assert_eq!(r.raw, vec!["banana", "cat"]);
    }

    #[test]
    fn transport_failures_are_retried_then_invalid() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let r = client(move |_| {
            c.fetch_add(1, Ordering::SeqCst);
            Err(Error::Vlm("timeout".into()))
        })
        .classify_png(b"x");
        assert_eq!(r.label, INVALID_LABEL);
        assert!(r.error.unwrap().contains("timeout"));
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let r = client(move |_| {
            if c.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(Error::Vlm("reset".into()))
            } else {
                Ok("fish".into())
            }
        })
        .classify_png(b"x");
        assert_eq!(r.label, "fish");
    }

    #[test]
    fn config_validation() {
        let mut cfg = VlmConfig::new("u", "m");
        cfg.rate_limit = 0.0;
        assert!(cfg.validate().is_err());
        let doc = serde_json::json!({"endpoint": "u", "model": "m", "temp": 1});
        assert!(serde_json::from_value::<VlmConfig>(doc).is_err());
    }
}
