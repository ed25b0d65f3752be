//! The fixed-dimensional vector type shared by every embedding backend.

use alloc::vec::Vec;
use core::fmt;

/// Why a vector was rejected at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingError {
    /// Vectors must have at least one component.
    Empty,
    /// A component was NaN or infinite.
    NotFinite,
}

impl fmt::Display for EmbeddingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingError::Empty => write!(f, "embedding vector is empty"),
            EmbeddingError::NotFinite => write!(f, "embedding vector has non-finite components"),
        }
    }
}

impl core::error::Error for EmbeddingError {}

/// A dense embedding of one serialized instance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Validates that `values` is non-empty and all-finite.
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NotFinite);
        }
        Ok(Self { values })
    }

    /// The components.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dimensionality.
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}
