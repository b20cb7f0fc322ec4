use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::prompt::Prompt;
use super::rules::{rule_plan_text, split_block};
use crate::registry::Registry;

/// Env var naming the remote completion endpoint.
pub const BACKEND_URL_ENV: &str = "GIRAF_BACKEND_URL";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("completion backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("no recorded transcript for prompt digest {digest}")]
    TranscriptMiss { digest: String },
    #[error("completion request timed out after {0:?}")]
    Timeout(Duration),
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("transcript store: {0}")]
    Io(#[from] std::io::Error),
}

pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Raw completion text, unmodified.
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError>;
}

/// Completions looked up by prompt digest in a directory.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    dir: PathBuf,
}

impl ReplayBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stores `text` under `digest`, replacing any previous entry.
    pub fn store(dir: &Path, digest: &str, text: &str) -> Result<(), BackendError> {
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{digest}.tmp"));
        fs::write(&tmp, text)?;
        fs::rename(tmp, dir.join(digest))?;
        Ok(())
    }
}

impl CompletionBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        let digest = prompt.digest();
        match fs::read_to_string(self.dir.join(&digest)) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == ErrorKind::NotFound => {
                Err(BackendError::TranscriptMiss { digest })
            }
            Err(e) => Err(e.into()),
        }
    }
}

/// The keyword and gesture table, answering from the instruction block.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl CompletionBackend for RuleBackend {
    fn name(&self) -> &str {
        "rule"
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        Ok(match split_block(&prompt.instruction_block) {
            Some((speech, gesture)) => rule_plan_text(&speech, &gesture),
            None => rule_plan_text("", ""),
        })
    }
}

/// Text completion over HTTP: POST the request body, read `{"text": ...}`.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    url: String,
    timeout: Duration,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::BackendUnreachable(e.to_string()))?;
        Ok(Self {
            url: url.into(),
            timeout,
            client,
        })
    }

    /// Reads the endpoint from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        match std::env::var(BACKEND_URL_ENV) {
            Ok(url) if !url.trim().is_empty() => Self::new(url.trim(), DEFAULT_TIMEOUT),
            _ => Err(BackendError::BackendUnreachable(format!(
                "{BACKEND_URL_ENV} is not set"
            ))),
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl CompletionBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&prompt.request())
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout(self.timeout)
                } else {
                    BackendError::BackendUnreachable(e.to_string())
                }
            })?;
        if !resp.status().is_success() {
            return Err(BackendError::Protocol(format!("status {}", resp.status())));
        }
        let body: CompletionResponse = resp.json().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout)
            } else {
                BackendError::Protocol(e.to_string())
            }
        })?;
        Ok(body.text)
    }
}

/// Forwards to `inner` and saves every completion into a replay store.
pub struct RecordingBackend {
    inner: Arc<dyn CompletionBackend>,
    dir: PathBuf,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn CompletionBackend>, dir: impl Into<PathBuf>) -> Self {
        Self {
            inner,
            dir: dir.into(),
        }
    }
}

impl CompletionBackend for RecordingBackend {
    fn name(&self) -> &str {
        "record"
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        let text = self.inner.complete(prompt)?;
        ReplayBackend::store(&self.dir, &prompt.digest(), &text)?;
        Ok(text)
    }
}

/// "rule" always; "replay" when a store is given; "remote" when a URL is given.
pub fn backend_registry(
    replay_dir: Option<&Path>,
    remote_url: Option<&str>,
) -> Result<Registry<dyn CompletionBackend>, BackendError> {
    let mut r: Registry<dyn CompletionBackend> = Registry::new("backend");
    r.register("rule", Arc::new(RuleBackend));
    if let Some(dir) = replay_dir {
        r.register("replay", Arc::new(ReplayBackend::new(dir)));
    }
    if let Some(url) = remote_url {
        r.register(
            "remote",
            Arc::new(RemoteBackend::new(url, DEFAULT_TIMEOUT)?),
        );
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::prompt::{assemble_prompt, PromptContext};

    fn prompt(lines: &str) -> Prompt {
        assemble_prompt(&PromptContext::standard(), &[], lines)
    }

    #[test]
    fn replay_hit_is_verbatim_and_miss_never_guesses() {
        let dir = tempfile::tempdir().unwrap();
        let p = prompt("# Instruction 0: open that drawer\n# Gesture: pointing");
        let backend = ReplayBackend::new(dir.path());
        match backend.complete(&p) {
            Err(BackendError::TranscriptMiss { digest }) => assert_eq!(digest, p.digest()),
            other => panic!("expected miss, got {other:?}"),
        }
        let stored =
            "drawer_pos = detect_referred_obj_pos('drawer')\n  open_drawer_at_pos(drawer_pos)\n";
        ReplayBackend::store(dir.path(), &p.digest(), stored).unwrap();
        assert_eq!(backend.complete(&p).unwrap(), stored);
        assert_eq!(backend.complete(&p).unwrap(), stored);
    }

    #[test]
    fn rule_backend_reads_the_instruction_block() {
        let text = RuleBackend
            .complete(&prompt(
                "# Instruction 0: give me that tool\n# Gesture: pointing",
            ))
            .unwrap();
        assert!(text.starts_with("tool_pos = detect_referred_obj_pos('tool')"));
    }

    #[test]
    fn recording_fills_the_store() {
        let dir = tempfile::tempdir().unwrap();
        let p = prompt("# Instruction 0: come over here\n# Gesture: fist");
        let rec = RecordingBackend::new(Arc::new(RuleBackend), dir.path());
        let text = rec.complete(&p).unwrap();
        assert_eq!(ReplayBackend::new(dir.path()).complete(&p).unwrap(), text);
    }

    #[test]
    fn unreachable_remote() {
        let remote =
            RemoteBackend::new("http://127.0.0.1:9/v1/complete", Duration::from_secs(2)).unwrap();
        assert!(matches!(
            remote.complete(&prompt("# Instruction 0: x\n# Gesture: none detected")),
            Err(BackendError::BackendUnreachable(_))
        ));
    }

    #[test]
    fn registry_names() {
        let r = backend_registry(None, None).unwrap();
        assert_eq!(r.names(), ["rule"]);
        let err = r.get("replay").err().unwrap();
        assert_eq!(
            err.to_string(),
            "unknown backend 'replay' (available: rule)"
        );
    }
}
