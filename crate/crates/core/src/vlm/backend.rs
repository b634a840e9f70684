use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::prompts::build_prompts;

/// Chat-completions request carrying both prompts and one PNG attachment.
pub fn request_body(model: &str, png: &[u8], temperature: Option<f64>, max_tokens: Option<u32>) -> Value {
    let (system, user) = build_prompts();
    let url = format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(png));
    let mut body = json!({
        "model": model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": [
                {"type": "text", "text": user},
                {"type": "image_url", "image_url": {"url": url}}
            ]}
        ]
    });
    if let Some(t) = temperature {
        body["temperature"] = json!(t);
    }
    if let Some(m) = max_tokens {
        body["max_tokens"] = json!(m);
    }
    body
}

/// Something that answers a chat-completions request with the assistant text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, body: &Value) -> Result<String>;
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    credential: Option<String>,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, credential: Option<String>, timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Vlm(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            endpoint: endpoint.into(),
            credential,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, body: &Value) -> Result<String> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.credential {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Vlm(format!("transport: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Vlm(format!("endpoint returned {status}")));
        }
        let v: Value = resp.json().map_err(|e| Error::Vlm(format!("response body: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Vlm("response has no choices[0].message.content".into()))
    }
}

/// In-process backend driven by a closure; shipped for tests and dry runs.
pub struct MockBackend<F> {
    respond: F,
}

impl<F> MockBackend<F>
where
    F: Fn(&Value) -> Result<String> + Send + Sync,
{
    pub fn new(respond: F) -> Self {
        MockBackend { respond }
    }
}

impl<F> ChatBackend for MockBackend<F>
where
    F: Fn(&Value) -> Result<String> + Send + Sync,
{
    fn complete(&self, body: &Value) -> Result<String> {
        (self.respond)(body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_shape() {
        let b = request_body("m", &[1, 2, 3], Some(0.0), None);
        assert_eq!(b["model"], "m");
        assert_eq!(b["messages"][0]["role"], "system");
        assert!(b["messages"][0]["content"].as_str().unwrap().starts_with("You are an image-recognition API."));
        assert_eq!(b["messages"][1]["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(b["temperature"], 0.0);
        assert!(b.get("max_tokens").is_none());
    }
}
