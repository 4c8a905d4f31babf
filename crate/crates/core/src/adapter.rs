//! Client for external formulation generators. A generator is either a local
//! command (prompt on stdin, fragment on stdout) or an HTTP service (prompt
//! as the POST body, fragment as the response body).

use std::collections::BTreeMap;
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::seal;
use crate::model::{FormulationBundle, InstructionTag};
use crate::parallel;
use crate::process;

pub const DESCRIPTION_PLACEHOLDER: &str = "{description}";
pub const SUFFIX_PLACEHOLDER: &str = "{instruction_suffix}";
pub const DEFAULT_TEMPLATE: &str = "{description}{instruction_suffix}";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("invalid adapter config: {0}")]
    InvalidConfig(String),
    #[error("generator unavailable after {attempts} attempt(s): {last_error}")]
    Unavailable { attempts: u32, last_error: String },
    #[error("generator returned an empty fragment")]
    EmptyFragment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterMode {
    Subprocess,
    HttpService,
}

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_string()
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_retries() -> u32 {
    2
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub mode: AdapterMode,
    /// URL for HTTP mode; a command line (shell-style quoting) for subprocess mode.
    pub endpoint_or_command: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_template")]
    pub request_template: String,
    /// Bundles generated at once.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

impl AdapterConfig {
    pub fn new(mode: AdapterMode, endpoint_or_command: impl Into<String>) -> Self {
        AdapterConfig {
            mode,
            endpoint_or_command: endpoint_or_command.into(),
            timeout_ms: default_timeout_ms(),
            max_retries: default_retries(),
            request_template: default_template(),
            concurrency: default_concurrency(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        let bad = |m: &str| Err(AdapterError::InvalidConfig(m.to_string()));
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if !self.request_template.contains(DESCRIPTION_PLACEHOLDER)
            || !self.request_template.contains(SUFFIX_PLACEHOLDER)
        {
            return bad("request template needs both {description} and {instruction_suffix}");
        }
        if self.endpoint_or_command.trim().is_empty() {
            return bad("endpoint or command is empty");
        }
        Ok(())
    }

    pub fn render(&self, description: &str, tag: InstructionTag) -> String {
        self.request_template.replace(DESCRIPTION_PLACEHOLDER, description).replace(SUFFIX_PLACEHOLDER, tag.suffix())
    }

    /// The transport this config describes.
    pub fn source(&self) -> Result<Box<dyn FragmentSource>, AdapterError> {
        self.validate()?;
        Ok(match self.mode {
            AdapterMode::Subprocess => {
                let argv = shlex::split(&self.endpoint_or_command)
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| AdapterError::InvalidConfig("command does not parse".into()))?;
                Box::new(SubprocessSource { argv, timeout: self.timeout() })
            }
            AdapterMode::HttpService => Box::new(HttpSource::new(&self.endpoint_or_command, self.timeout())),
        })
    }
}

/// One attempt at turning a rendered prompt into a fragment. `Err` means the
/// transport failed and the request may be retried.
pub trait FragmentSource: Send + Sync {
    fn fetch(&self, prompt: &str) -> Result<String, String>;
}

pub struct SubprocessSource {
    pub argv: Vec<String>,
    pub timeout: Duration,
}

impl FragmentSource for SubprocessSource {
    fn fetch(&self, prompt: &str) -> Result<String, String> {
        let mut command = Command::new(&self.argv[0]);
        command.args(&self.argv[1..]);
        let out = process::run(command, Some(prompt.as_bytes()), self.timeout).map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("generator exited with {}", out.status));
        }
        String::from_utf8(out.stdout).map_err(|_| "generator output is not UTF-8".to_string())
    }
}

pub struct HttpSource {
    agent: ureq::Agent,
    url: String,
}

impl HttpSource {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpSource { agent, url: url.to_string() }
    }
}

impl FragmentSource for HttpSource {
    fn fetch(&self, prompt: &str) -> Result<String, String> {
        let mut response = self.agent.post(&self.url).send(prompt).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        if status >= 400 {
            return Err(format!("HTTP status {status}"));
        }
        response.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

/// Sends `description` with `tag`'s suffix and returns the fragment. Transport
/// failures are retried up to `max_retries` times; a response is never retried.
/// One trailing newline is stripped from the response.
pub fn request_fragment_via(
    source: &dyn FragmentSource,
    config: &AdapterConfig,
    description: &str,
    tag: InstructionTag,
) -> Result<String, AdapterError> {
    let prompt = config.render(description, tag);
    let mut last_error = String::new();
    for _ in 0..=config.max_retries {
        match source.fetch(&prompt) {
            Ok(mut text) => {
                if text.ends_with('\n') {
                    text.pop();
                    if text.ends_with('\r') {
                        text.pop();
                    }
                }
                if text.trim().is_empty() {
                    return Err(AdapterError::EmptyFragment);
                }
                return Ok(text);
            }
            Err(e) => last_error = e,
        }
    }
    Err(AdapterError::Unavailable { attempts: config.max_retries + 1, last_error })
}

pub fn request_fragment(
    config: &AdapterConfig,
    description: &str,
    tag: InstructionTag,
) -> Result<String, AdapterError> {
    let source = config.source()?;
    request_fragment_via(source.as_ref(), config, description, tag)
}

/// A generated bundle and the error behind each module it lacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedBundle {
    pub bundle: FormulationBundle,
    pub failures: BTreeMap<InstructionTag, String>,
}

impl GeneratedBundle {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Requests all nine modules in canonical order, one at a time. Complete
/// bundles come back sealed.
pub fn generate_bundle_via(source: &dyn FragmentSource, config: &AdapterConfig, description: &str) -> GeneratedBundle {
    let mut bundle = FormulationBundle::new(description);
    let mut failures = BTreeMap::new();
    for tag in InstructionTag::ALL {
        match request_fragment_via(source, config, description, tag) {
            Ok(fragment) => {
                bundle.modules.insert(tag, fragment);
            }
            Err(e) => {
                failures.insert(tag, e.to_string());
            }
        }
    }
    if failures.is_empty() {
        seal(&mut bundle).expect("all modules present");
    }
    GeneratedBundle { bundle, failures }
}

pub fn generate_bundle(config: &AdapterConfig, description: &str) -> Result<GeneratedBundle, AdapterError> {
    let source = config.source()?;
    Ok(generate_bundle_via(source.as_ref(), config, description))
}

/// One bundle per description, at most `config.concurrency` in flight.
pub fn generate_bundles_via(
    source: &dyn FragmentSource,
    config: &AdapterConfig,
    descriptions: &[String],
) -> Vec<GeneratedBundle> {
    parallel::map_limited(descriptions, config.concurrency, |d| generate_bundle_via(source, config, d))
}
