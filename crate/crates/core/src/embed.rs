//! Deterministic text embeddings and brute-force vector search.
//!
//! The built-in [`HashEmbedder`] hashes lowercase alphanumeric tokens and
//! their character trigrams into `D` buckets with FNV-1a and L2-normalizes
//! the result. Components are non-negative, so cosine similarities between
//! its outputs lie in `[0, 1]`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DIM: usize = 256;
/// Environment variable selecting a remote embedding service.
pub const EMBED_ENDPOINT_ENV: &str = "CSM_EMBED_ENDPOINT";

const TOKEN_WEIGHT: f64 = 1.0;
const TRIGRAM_WEIGHT: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("duplicate memory item id `{0}`")]
    DuplicateItem(String),
    #[error("memory item `{0}` has empty text")]
    EmptyText(String),
    #[error("embedding service: {0}")]
    Remote(String),
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Dense embedding; either all-zero or unit L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// Scales `components` to unit norm; a zero input stays zero.
    pub fn normalized(mut components: Vec<f64>) -> Self {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut components {
                *x /= norm;
            }
        }
        Vector(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine(a: &Vector, b: &Vector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vector, EmbedError>;

    /// Results are returned in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    /// Cosine similarity of two texts.
    fn similarity(&self, a: &str, b: &str) -> Result<f64, EmbedError> {
        cosine(&self.embed(a)?, &self.embed(b)?)
    }
}

/// Feature-hashing embedder over tokens and character trigrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    /// Infallible form of [`Embedder::embed`].
    pub fn vector(&self, text: &str) -> Vector {
        let mut acc = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            acc[self.bucket(token)] += TOKEN_WEIGHT;
            let chars: Vec<char> = token.chars().collect();
            for tri in chars.windows(3) {
                let tri: String = tri.iter().collect();
                acc[self.bucket(&tri)] += TRIGRAM_WEIGHT;
            }
        }
        Vector::normalized(acc)
    }

    fn bucket(&self, feature: &str) -> usize {
        (fnv1a64(feature.as_bytes()) % self.dim as u64) as usize
    }
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vector, EmbedError> {
        Ok(self.vector(text))
    }
}

/// Client for a remote embedding service speaking
/// `{"texts": [...]}` -> `{"vectors": [[...], ...]}`.
///
/// Returned vectors are re-normalized so they satisfy the [`Vector`]
/// invariant.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    dim: usize,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            dim,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop()
            .ok_or_else(|| EmbedError::Remote("empty vector list".into()))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vector>, EmbedError> {
        let reply: EmbedResponse = crate::http::post_json(&self.endpoint, &EmbedRequest { texts })
            .map_err(EmbedError::Remote)?;
        if reply.vectors.len() != texts.len() {
            return Err(EmbedError::Remote(format!(
                "expected {} vectors, got {}",
                texts.len(),
                reply.vectors.len()
            )));
        }
        reply
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        left: self.dim,
                        right: v.len(),
                    });
                }
                Ok(Vector::normalized(v))
            })
            .collect()
    }
}

/// The remote embedder when `CSM_EMBED_ENDPOINT` is set, the built-in one
/// otherwise.
pub fn embedder_from_env(dim: usize) -> Box<dyn Embedder> {
    match std::env::var(EMBED_ENDPOINT_ENV) {
        Ok(url) if !url.trim().is_empty() => Box::new(HttpEmbedder::new(url, dim)),
        _ => Box::new(HashEmbedder::new(dim)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    VectorLog,
    ProfileEntry,
    EventLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryItem {
    pub id: String,
    pub text: String,
    pub kind: MemoryKind,
    pub vector: Vector,
}

/// A retrieval hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit<'a> {
    pub item: &'a MemoryItem,
    pub similarity: f64,
}

/// Exact nearest-neighbour index in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VectorIndex {
    items: Vec<MemoryItem>,
    ids: BTreeSet<String>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Embeds and indexes `(id, text, kind)` triples.
    pub fn build<I>(entries: I, embedder: &dyn Embedder) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (String, String, MemoryKind)>,
    {
        let entries: Vec<_> = entries.into_iter().collect();
        let texts: Vec<&str> = entries.iter().map(|(_, t, _)| t.as_str()).collect();
        for (id, text, _) in &entries {
            if text.trim().is_empty() {
                return Err(EmbedError::EmptyText(id.clone()));
            }
        }
        let vectors = embedder.embed_batch(&texts)?;
        let mut index = VectorIndex::new();
        for ((id, text, kind), vector) in entries.into_iter().zip(vectors) {
            index.push(MemoryItem { id, text, kind, vector })?;
        }
        Ok(index)
    }

    pub fn insert(
        &mut self,
        id: impl Into<String>,
        text: impl Into<String>,
        kind: MemoryKind,
        embedder: &dyn Embedder,
    ) -> Result<(), EmbedError> {
        let (id, text) = (id.into(), text.into());
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText(id));
        }
        let vector = embedder.embed(&text)?;
        self.push(MemoryItem { id, text, kind, vector })
    }

    fn push(&mut self, item: MemoryItem) -> Result<(), EmbedError> {
        if let Some(first) = self.items.first() {
            if first.vector.dim() != item.vector.dim() {
                return Err(EmbedError::DimensionMismatch {
                    left: first.vector.dim(),
                    right: item.vector.dim(),
                });
            }
        }
        if !self.ids.insert(item.id.clone()) {
            return Err(EmbedError::DuplicateItem(item.id));
        }
        self.items.push(item);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[MemoryItem] {
        &self.items
    }

    pub fn get(&self, id: &str) -> Option<&MemoryItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Every item scored against `query`, best first, ties by ascending id.
    pub fn ranked(&self, query: &Vector) -> Result<Vec<Hit<'_>>, EmbedError> {
        let mut hits = self
            .items
            .iter()
            .map(|item| Ok(Hit { item, similarity: cosine(query, &item.vector)? }))
            .collect::<Result<Vec<_>, EmbedError>>()?;
        hits.sort_by(|a, b| {
            b.similarity
                .total_cmp(&a.similarity)
                .then_with(|| a.item.id.cmp(&b.item.id))
        });
        Ok(hits)
    }

    pub fn top_k(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        k: usize,
    ) -> Result<Vec<Hit<'_>>, EmbedError> {
        assert!(k >= 1, "k must be positive");
        let mut hits = self.ranked(&embedder.embed(query)?)?;
        hits.truncate(k);
        Ok(hits)
    }

    /// All items with similarity at least `threshold`, ranked like
    /// [`top_k`](Self::top_k).
    pub fn retrieve_above(
        &self,
        embedder: &dyn Embedder,
        query: &str,
        threshold: f64,
    ) -> Result<Vec<Hit<'_>>, EmbedError> {
        let mut hits = self.ranked(&embedder.embed(query)?)?;
        hits.retain(|h| h.similarity >= threshold);
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_embeds_to_zero() {
        let e = HashEmbedder::default();
        assert!(e.vector("").is_zero());
        assert!(e.vector(" \t-- !").is_zero());
        assert_eq!(e.vector("").dim(), DEFAULT_DIM);
    }

    #[test]
    fn embedding_is_unit_and_self_similar() {
        let e = HashEmbedder::default();
        for text in ["late bedtime", "fatigue next day", "Coffee sometimes helps, but not always."] {
            let v = e.vector(text);
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((cosine(&v, &v).unwrap() - 1.0).abs() < EPS);
            assert!(v.as_slice().iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn embedding_ignores_case_and_punctuation() {
        let e = HashEmbedder::default();
        assert_eq!(e.vector("Late, BEDTIME!"), e.vector("late bedtime"));
    }

    /// Independent re-derivation of the hashing scheme used to pin the golden
    /// similarity between two labels.
    fn reference_embed(text: &str, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0f64; dim];
        let lower = text.to_lowercase();
        let mut token = String::new();
        let flush = |token: &mut String, v: &mut Vec<f64>| {
            if token.is_empty() {
                return;
            }
            let mut h: u64 = 14695981039346656037;
            for b in token.bytes() {
                h = (h ^ b as u64).wrapping_mul(1099511628211);
            }
            v[(h % dim as u64) as usize] += 1.0;
            let cs: Vec<char> = token.chars().collect();
            for i in 0..cs.len().saturating_sub(2) {
                let tri: String = cs[i..i + 3].iter().collect();
                let mut h: u64 = 14695981039346656037;
                for b in tri.bytes() {
                    h = (h ^ b as u64).wrapping_mul(1099511628211);
                }
                v[(h % dim as u64) as usize] += 0.5;
            }
            token.clear();
        };
        for c in lower.chars() {
            if c.is_alphanumeric() {
                token.push(c);
            } else {
                flush(&mut token, &mut v);
            }
        }
        flush(&mut token, &mut v);
        v
    }

    fn reference_cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn matches_reference_embedder() {
        let e = HashEmbedder::default();
        for text in ["late bedtime", "Felt mentally foggy and unfocused at 2 PM", "café crème"] {
            let expected = reference_embed(text, DEFAULT_DIM);
            let got = e.vector(text);
            let got_raw = reference_cosine(&expected, got.as_slice());
            assert!((got_raw - 1.0).abs() < 1e-12, "{text}");
        }
    }

    #[test]
    fn golden_label_similarity() {
        let e = HashEmbedder::default();
        let reference = reference_cosine(
            &reference_embed("late bedtime", DEFAULT_DIM),
            &reference_embed("fatigue next day", DEFAULT_DIM),
        );
        let got = e.similarity("late bedtime", "fatigue next day").unwrap();
        assert!((got - reference).abs() < 1e-12);
        assert!((0.0..1.0).contains(&got));
        assert!((got - GOLDEN_LATE_BEDTIME_FATIGUE).abs() < 1e-12, "{got:.17}");
    }

    const GOLDEN_LATE_BEDTIME_FATIGUE: f64 = 0.0;

    #[test]
    fn cosine_degenerate_and_orthogonal() {
        let mut e1 = vec![0.0; 4];
        e1[0] = 1.0;
        let mut e2 = vec![0.0; 4];
        e2[1] = 1.0;
        let (e1, e2) = (Vector::normalized(e1), Vector::normalized(e2));
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
        assert_eq!(cosine(&e1, &Vector::zeros(4)).unwrap(), 0.0);
        assert_eq!(cosine(&e1, &e1).unwrap(), 1.0);
        assert!(matches!(
            cosine(&e1, &Vector::zeros(3)),
            Err(EmbedError::DimensionMismatch { left: 4, right: 3 })
        ));
    }

    fn index(texts: &[(&str, &str)]) -> VectorIndex {
        let e = HashEmbedder::default();
        VectorIndex::build(
            texts
                .iter()
                .map(|(id, t)| (id.to_string(), t.to_string(), MemoryKind::VectorLog)),
            &e,
        )
        .unwrap()
    }

    #[test]
    fn top_k_exact_match_first() {
        let e = HashEmbedder::default();
        let idx = index(&[
            ("m1", "Coffee sometimes helps, but not always."),
            ("m2", "Energy dips around 2-4 PM even if I sleep decently."),
            ("m3", "Felt tired and unproductive in the afternoon after staying up late."),
        ]);
        let hits = idx.top_k(&e, "Energy dips around 2-4 PM even if I sleep decently.", 2).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].item.id, "m2");
        assert!((hits[0].similarity - 1.0).abs() < EPS);

        // Exhaustive oracle: score every item, sort, take two.
        let q = e.vector("tired in the afternoon");
        let mut all: Vec<(f64, &str)> = idx
            .items()
            .iter()
            .map(|i| (cosine(&q, &i.vector).unwrap(), i.id.as_str()))
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        let got: Vec<_> = idx
            .top_k(&e, "tired in the afternoon", 2)
            .unwrap()
            .iter()
            .map(|h| (h.similarity, h.item.id.as_str()))
            .collect();
        assert_eq!(got, all[..2]);
    }

    #[test]
    fn top_k_on_empty_index_and_small_index() {
        let e = HashEmbedder::default();
        assert!(VectorIndex::new().top_k(&e, "anything", 3).unwrap().is_empty());
        let idx = index(&[("a", "one"), ("b", "two")]);
        assert_eq!(idx.top_k(&e, "one", 10).unwrap().len(), 2);
    }

    #[test]
    fn ties_break_by_id() {
        let e = HashEmbedder::default();
        let idx = index(&[("z", "same text"), ("a", "same text"), ("m", "same text")]);
        let ids: Vec<_> = idx.top_k(&e, "same text", 3).unwrap().iter().map(|h| h.item.id.clone()).collect();
        assert_eq!(ids, ["a", "m", "z"]);
    }

    #[test]
    fn retrieve_above_thresholds() {
        let e = HashEmbedder::default();
        let idx = index(&[("a", "sleep late"), ("b", "coffee at noon"), ("c", "walk outside")]);
        assert_eq!(idx.retrieve_above(&e, "sleep well", 0.0).unwrap().len(), 3);
        // No item equals the query, so nothing reaches similarity 1.
        let all = idx.ranked(&e.vector("sleep well")).unwrap();
        assert!(all.iter().all(|h| h.similarity < 1.0));
        assert!(idx.retrieve_above(&e, "sleep well", 1.0).unwrap().is_empty());
    }

    #[test]
    fn duplicate_and_empty_items_rejected() {
        let e = HashEmbedder::default();
        let mut idx = index(&[("a", "x")]);
        assert!(matches!(
            idx.insert("a", "y", MemoryKind::EventLog, &e),
            Err(EmbedError::DuplicateItem(_))
        ));
        assert!(matches!(
            idx.insert("b", "  ", MemoryKind::EventLog, &e),
            Err(EmbedError::EmptyText(_))
        ));
    }

    #[test]
    fn remote_embedder_normalizes_and_checks_shape() {
        let (url, rx) = crate::http::testing::one_shot_server(200, r#"{"vectors":[[3.0,4.0],[0.0,0.0]]}"#);
        let remote = HttpEmbedder::new(url, 2);
        let out = remote.embed_batch(&["a", "b"]).unwrap();
        assert_eq!(out[0].as_slice(), &[0.6, 0.8]);
        assert!(out[1].is_zero());
        let request: serde_json::Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(request, serde_json::json!({"texts": ["a", "b"]}));

        let (url, _rx) = crate::http::testing::one_shot_server(200, r#"{"vectors":[[1.0,0.0,0.0]]}"#);
        assert!(matches!(
            HttpEmbedder::new(url, 2).embed("a"),
            Err(EmbedError::DimensionMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn remote_embedder_failure_is_reported() {
        let (url, _rx) = crate::http::testing::one_shot_server(500, "{}");
        assert!(matches!(HttpEmbedder::new(url, 2).embed("a"), Err(EmbedError::Remote(_))));
    }
}
