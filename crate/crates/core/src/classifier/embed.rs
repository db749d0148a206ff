use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EMBEDDING_DIM: usize = 256;
pub const DEFAULT_EMBEDDING_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding backend failed: {0}")]
    Backend(String),
    #[error("embedding has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
}

/// Maps text to a fixed-length real vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
    fn descriptor(&self) -> EmbeddingDescriptor;
}

/// Serializable description of an embedding provider, stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingDescriptor {
    Hashing { dim: usize, seed: u64 },
    Remote { dim: usize, endpoint: String, model: String },
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Signed feature hashing of a bag of words, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_EMBEDDING_DIM, DEFAULT_EMBEDDING_SEED)
    }
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashingEmbedder { dim, seed }
    }

    fn hash(&self, token: &str) -> u64 {
        // FNV-1a over the seed bytes followed by the token bytes.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.seed.to_le_bytes().iter().chain(token.as_bytes()) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut v = vec![0.0; self.dim];
        for token in tokenize(text) {
            let h = self.hash(&token);
            let idx = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }

    fn descriptor(&self) -> EmbeddingDescriptor {
        EmbeddingDescriptor::Hashing {
            dim: self.dim,
            seed: self.seed,
        }
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    client: crate::llm::HttpClient,
    model: String,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(client: crate::llm::HttpClient, model: impl Into<String>, dim: usize) -> Self {
        RemoteEmbedder {
            client,
            model: model.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let v = self
            .client
            .embedding(&self.model, text)
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        if v.len() != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(v)
    }

    fn descriptor(&self) -> EmbeddingDescriptor {
        EmbeddingDescriptor::Remote {
            dim: self.dim,
            endpoint: self.client.endpoint().to_string(),
            model: self.model.clone(),
        }
    }
}
