use serde::{Deserialize, Serialize};

use super::{BackendCapabilities, Candidate, GenerationError, GeneratorBackend, SamplingConfig};
use crate::prompt::{serialize_prompt, GenerationPrompt};
use crate::remote::{JsonClient, RemoteError, RetryPolicy};

/// Body of `POST /generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub n: usize,
    pub top_p: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub text: String,
    pub perplexity: Option<f64>,
}

/// Generator served over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    client: JsonClient,
    pub max_concurrency: usize,
    pub supports_perplexity: bool,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>, retry: RetryPolicy, max_concurrency: usize) -> Self {
        RemoteBackend {
            client: JsonClient::new(url, retry),
            max_concurrency: max_concurrency.max(1),
            supports_perplexity: true,
        }
    }
}

impl GeneratorBackend for RemoteBackend {
    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            supports_perplexity: self.supports_perplexity,
            max_concurrency: self.max_concurrency,
            deterministic: false,
        }
    }

    fn generate_raw(
        &self,
        _prompt_id: &str,
        prompt: &GenerationPrompt,
        config: &SamplingConfig,
    ) -> Result<Vec<Candidate>, GenerationError> {
        let request = GenerateRequest {
            prompt: serialize_prompt(prompt),
            n: config.n,
            top_p: config.top_p,
            temperature: config.temperature,
        };
        let response: GenerateResponse = self.client.post("/generate", &request).map_err(|e| match e {
            RemoteError::Unavailable { attempts, message } => GenerationError::BackendUnavailable { attempts, message },
            RemoteError::Protocol(m) => GenerationError::BackendProtocolError(m),
        })?;
        Ok(response
            .candidates
            .into_iter()
            .map(|c| Candidate {
                text: c.text.into(),
                perplexity: c.perplexity,
            })
            .collect())
    }
}
