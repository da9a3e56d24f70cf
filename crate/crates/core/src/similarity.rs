//! Description similarity backends.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::text::tokens;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("similarity backend '{backend}' failed: {message}")]
pub struct SimilarityError {
    pub backend: String,
    pub message: String,
}

/// Which similarity function scores descriptions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityBackend {
    #[default]
    TokenF1,
    External,
}

/// Scores two descriptions in `[0, 1]`. Implementations are shared across
/// concurrent scorers.
pub trait Similarity<T: Real>: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<T, SimilarityError>;

    fn name(&self) -> &str;
}

/// Token-level F1 over normalized whitespace tokens (multiset overlap).
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenF1;

impl<T: Real> Similarity<T> for TokenF1 {
    fn similarity(&self, a: &str, b: &str) -> Result<T, SimilarityError> {
        Ok(token_f1(a, b))
    }

    fn name(&self) -> &str {
        "token_f1"
    }
}

/// `2·|overlap| / (|a| + |b|)`; both empty → 1, exactly one empty → 0.
pub fn token_f1<T: Real>(a: &str, b: &str) -> T {
    let ta = tokens(a);
    let tb = tokens(b);
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return T::one(),
        (true, false) | (false, true) => return T::zero(),
        _ => {}
    }
    let mut counts: HashMap<&str, usize> = HashMap::with_capacity(ta.len());
    for t in &ta {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &tb {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    T::from_count(2 * overlap) / T::from_count(ta.len() + tb.len())
}
