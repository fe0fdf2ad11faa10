//! Embedding plumbing shared by the knowledge graph, perception, and the
//! cohort generator: cosine similarity, a deterministic synthetic vector
//! provider, and the sidecar embedding file format.
//!
//! The synthetic provider hashes a string key with SHA-256, expands the
//! digest counter-mode into uniform variates, maps them through Box-Muller,
//! and normalizes. No platform or library RNG is involved, so a key always
//! yields the same unit vector, on any machine, forever.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("zero-magnitude vector where a direction is required")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity. Errors on zero-magnitude input instead of guessing.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Scales a vector to unit length.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>, EmbedError> {
    let n = norm(v);
    if n == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Deterministic unit vector derived from a key. Distinct keys give vectors
/// that are near-orthogonal at the dimensions used here, which is what the
/// synthetic prototype libraries rely on.
pub fn synthetic_unit_vector(key: &str, dim: usize) -> Vec<f64> {
    assert!(dim >= 2, "synthetic vectors need at least two dimensions");
    let mut uniforms = Vec::with_capacity(dim + 1);
    let mut counter: u64 = 0;
    while uniforms.len() <= dim {
        let mut h = Sha256::new();
        h.update(key.as_bytes());
        h.update(counter.to_le_bytes());
        let digest = h.finalize();
        for chunk in digest.chunks_exact(8) {
            let bits = u64::from_le_bytes(chunk.try_into().unwrap());
            // (0, 1]: never exactly zero, so ln() below is finite.
            uniforms.push((bits as f64 + 1.0) / (u64::MAX as f64 + 2.0));
        }
        counter += 1;
    }
    let mut out = Vec::with_capacity(dim);
    let mut i = 0;
    while out.len() < dim {
        let (u1, u2) = (uniforms[i], uniforms[i + 1]);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(r * theta.cos());
        if out.len() < dim {
            out.push(r * theta.sin());
        }
        i += 2;
    }
    normalize(&out).expect("gaussian draw cannot be the zero vector")
}

// ---------------------------------------------------------------------------
// Embedding fixture files
// ---------------------------------------------------------------------------

/// Keyed vectors loaded from or written to the sidecar embedding format:
/// a `dim=<n>` header line, then one `<key> <v1> <v2> ...` line per vector.
/// Lookups are counted so tests can prove the DNA-first precedence rule
/// (the embedding path must never be consulted when a biomarker panel is
/// available).
#[derive(Debug, Default)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
    lookups: std::sync::atomic::AtomicU64,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
            lookups: std::sync::atomic::AtomicU64::new(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, key: &str, v: Vec<f64>) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        self.vectors.insert(key.to_string(), v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Vec<f64>> {
        self.lookups
            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        self.vectors.get(key)
    }

    /// How many lookups have been issued, successful or not.
    pub fn lookup_count(&self) -> u64 {
        self.lookups.load(std::sync::atomic::Ordering::Relaxed)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), EmbedError> {
        writeln!(w, "dim={}", self.dim)?;
        for (key, v) in &self.vectors {
            let vals: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{} {}", key, vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self, EmbedError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| EmbedError::Format {
                line: 1,
                message: "empty file, expected dim=<n> header".to_string(),
            })??;
        let dim: usize = header
            .strip_prefix("dim=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| EmbedError::Format {
                line: 1,
                message: format!("bad header {header:?}, expected dim=<n>"),
            })?;
        let mut store = EmbeddingStore::new(dim);
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().ok_or_else(|| EmbedError::Format {
                line: lineno,
                message: "missing key".to_string(),
            })?;
            let vals: Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
            let vals = vals.map_err(|e| EmbedError::Format {
                line: lineno,
                message: format!("bad value: {e}"),
            })?;
            if vals.len() != dim {
                return Err(EmbedError::Format {
                    line: lineno,
                    message: format!("expected {dim} values, got {}", vals.len()),
                });
            }
            store.vectors.insert(key.to_string(), vals);
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_vectors_are_deterministic_and_unit() {
        let a = synthetic_unit_vector("molecular-centroid:NSMP", 64);
        let b = synthetic_unit_vector("molecular-centroid:NSMP", 64);
        assert_eq!(a, b);
        assert!((norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_keys_are_well_separated() {
        let keys = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let vs: Vec<Vec<f64>> = keys
            .iter()
            .map(|k| synthetic_unit_vector(k, 64))
            .collect();
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let c = cosine(&vs[i], &vs[j]).unwrap();
                assert!(c.abs() < 0.5, "keys {} vs {}: cosine {c}", keys[i], keys[j]);
            }
        }
    }

    #[test]
    fn cosine_rejects_zero_vectors() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbedError::ZeroVector)
        ));
    }

    #[test]
    fn store_roundtrip_preserves_bytes() {
        let mut store = EmbeddingStore::new(4);
        store.insert("case-1", vec![0.5, -0.25, 0.125, 1.0]).unwrap();
        store
            .insert("case-2", vec![0.1234567890123456, 0.0, -1.0, 2.0])
            .unwrap();

        let mut buf = Vec::new();
        store.write_to(&mut buf).unwrap();
        let reread = EmbeddingStore::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(reread.dim(), 4);
        let mut buf2 = Vec::new();
        reread.write_to(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn store_rejects_wrong_dimension() {
        let mut store = EmbeddingStore::new(3);
        assert!(matches!(
            store.insert("x", vec![1.0, 2.0]),
            Err(EmbedError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn store_counts_lookups() {
        let mut store = EmbeddingStore::new(2);
        store.insert("x", vec![1.0, 0.0]).unwrap();
        assert_eq!(store.lookup_count(), 0);
        let _ = store.get("x");
        let _ = store.get("absent");
        assert_eq!(store.lookup_count(), 2);
    }
}
