//! Pluggable text embeddings for literal repair.
//!
//! The default embedder is a deterministic character-trigram counter, so
//! repair behaves identically run to run and expected similarities can be
//! computed by hand. A live deployment can plug in a transformer sentence
//! encoder behind the same trait.

use std::collections::BTreeMap;

/// Sparse embedding: feature name -> weight. Dense providers can key by
/// dimension index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embedding(BTreeMap<String, f64>);

impl Embedding {
    pub fn from_counts(counts: BTreeMap<String, f64>) -> Self {
        Embedding(counts)
    }

    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self
            .0
            .iter()
            .filter_map(|(k, v)| other.0.get(k).map(|w| v * w))
            .sum();
        let norm_a: f64 = self.0.values().map(|v| v * v).sum::<f64>().sqrt();
        let norm_b: f64 = other.0.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm_a == 0.0 || norm_b == 0.0 {
            0.0
        } else {
            dot / (norm_a * norm_b)
        }
    }
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Embedding;
}

/// Character-trigram embedder: the text is lowercased, padded with a single
/// `#` on each side, and every 3-character window becomes a counted feature.
/// Strings shorter than one window contribute the padded string itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl Embedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Embedding {
        let padded: Vec<char> = std::iter::once('#')
            .chain(text.to_lowercase().chars())
            .chain(std::iter::once('#'))
            .collect();
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        if padded.len() < 3 {
            *counts.entry(padded.iter().collect()).or_insert(0.0) += 1.0;
        } else {
            for window in padded.windows(3) {
                *counts.entry(window.iter().collect()).or_insert(0.0) += 1.0;
            }
        }
        Embedding(counts)
    }
}
