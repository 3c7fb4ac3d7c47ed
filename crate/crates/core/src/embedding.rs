//! Item embeddings and relevant-history selection.
//!
//! Vectors are L2-normalized when they enter the index, so the dot product of
//! two stored vectors is their cosine similarity. Relevant items for a
//! recommendation are the `k` history entries with the highest similarity,
//! ties broken by ascending item id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{Catalog, Item, UserHistory};

/// Embedding backend identifier used when none is configured.
pub const DEFAULT_EMBEDDING_MODEL: &str = "all-MiniLM-L6-v2";
pub const DEFAULT_K: usize = 5;
const INDEX_FORMAT: &str = "explainrec-embedding-index";
const INDEX_VERSION: u32 = 1;
const BATCH: usize = 32;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("embedding backend failed after {attempts} attempt(s): {message}")]
    Transport {
        message: String,
        attempts: u32,
        retryable: bool,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding failed for {} item(s): {}", failed.len(), failed.join(", "))]
    PartialIndex { failed: Vec<String> },
    #[error("item `{0}` is not in the embedding index")]
    UnknownItem(String),
    #[error("index file: {0}")]
    Persist(String),
}

impl From<io::Error> for EmbeddingError {
    fn from(e: io::Error) -> Self {
        Self::Persist(e.to_string())
    }
}

/// A unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Normalizes a raw backend vector. Zero, empty, or non-finite input has
    /// no direction and is rejected.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self, EmbeddingError> {
        if raw.is_empty() {
            return Err(EmbeddingError::Contract("empty embedding".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::Contract("non-finite embedding component".into()));
        }
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::Contract("zero embedding vector".into()));
        }
        Ok(Self {
            values: raw.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product of two stored (unit) vectors, i.e. their cosine similarity.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    // `-0.0` would sort below `0.0` under `total_cmp` and break id tie-breaks
    Ok(dot + 0.0)
}

/// A text embedding backend. Responses are positionally aligned with the
/// request and every vector has the same length.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

pub fn embed_text(
    provider: &dyn EmbeddingProvider,
    text: &str,
) -> Result<EmbeddingVector, EmbeddingError> {
    if text.trim().is_empty() {
        return Err(EmbeddingError::Contract("cannot embed empty text".into()));
    }
    let mut raw = provider.embed_batch(&[text.to_string()])?;
    if raw.len() != 1 {
        return Err(EmbeddingError::Contract(format!(
            "backend returned {} vectors for 1 text",
            raw.len()
        )));
    }
    EmbeddingVector::from_raw(raw.remove(0))
}

/// `title. plot`, or the title alone when the plot is empty.
pub fn embedding_text(item: &Item) -> String {
    let plot = item.plot.trim();
    if plot.is_empty() {
        item.title.clone()
    } else {
        format!("{}. {}", item.title, plot)
    }
}

/// Offline backend: a bag of hashed word vectors. Deterministic for a given
/// seed and dimension, and texts sharing words land close together.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
    model_id: String,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self {
            dimension,
            seed,
            model_id: format!("seeded-hash-v1/d{dimension}/s{seed}"),
        }
    }

    fn token_vector(&self, token: &str, out: &mut [f64]) {
        let mut block = 0u32;
        let mut filled = 0;
        while filled < out.len() {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(token.as_bytes());
            h.update(block.to_le_bytes());
            let digest = h.finalize();
            for pair in digest.chunks_exact(2) {
                if filled == out.len() {
                    break;
                }
                let v = u16::from_le_bytes([pair[0], pair[1]]) as f64 / u16::MAX as f64;
                out[filled] += 2.0 * v - 1.0;
                filled += 1;
            }
            block += 1;
        }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(64, 7)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut acc = vec![0.0; self.dimension];
                let lowered = text.to_lowercase();
                for token in lowered
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|t| !t.is_empty())
                {
                    self.token_vector(token, &mut acc);
                }
                if acc.iter().all(|v| *v == 0.0) {
                    acc[0] = 1.0;
                }
                acc
            })
            .collect())
    }
}

/// Backend answering from a fixed text → vector table. Unknown texts fail.
#[derive(Debug, Clone, Default)]
pub struct StaticEmbedder {
    table: BTreeMap<String, Vec<f64>>,
}

impl StaticEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, text: impl Into<String>, raw: Vec<f64>) -> Self {
        self.table.insert(text.into(), raw);
        self
    }
}

impl EmbeddingProvider for StaticEmbedder {
    fn model_id(&self) -> &str {
        "static"
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        texts
            .iter()
            .map(|t| {
                self.table.get(t).cloned().ok_or_else(|| EmbeddingError::Transport {
                    message: format!("no vector for `{t}`"),
                    attempts: 1,
                    retryable: false,
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model_id: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// HTTP embedding backend: `POST {model_id, texts}` → `{vectors}`.
pub struct HttpEmbedder {
    endpoint: String,
    model_id: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::Contract(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            api_key,
            client,
        })
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut req = self.client.post(&self.endpoint).json(&EmbedRequest {
            model_id: &self.model_id,
            texts,
        });
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let transport = |message: String, retryable: bool| EmbeddingError::Transport {
            message,
            attempts: 1,
            retryable,
        };
        let resp = req.send().map_err(|e| transport(e.to_string(), true))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(transport(format!("HTTP {status}"), status.is_server_error()));
        }
        let body: EmbedResponse = resp.json().map_err(|e| transport(e.to_string(), false))?;
        if body.vectors.len() != texts.len() {
            return Err(EmbeddingError::Contract(format!(
                "backend returned {} vectors for {} texts",
                body.vectors.len(),
                texts.len()
            )));
        }
        Ok(body.vectors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
    model_id: String,
    dimension: usize,
    count: usize,
    source_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexRecord {
    id: String,
    values: Vec<f64>,
}

/// Unit vectors for every catalog item, from a single backend.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    model_id: String,
    dimension: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
    source_digest: String,
}

impl EmbeddingIndex {
    /// Assembles an index from precomputed vectors (all of one dimension).
    pub fn from_vectors(
        model_id: impl Into<String>,
        vectors: impl IntoIterator<Item = (String, EmbeddingVector)>,
    ) -> Result<Self, EmbeddingError> {
        let vectors: BTreeMap<_, _> = vectors.into_iter().collect();
        let dimension = vectors.values().next().map(|v| v.dimension()).unwrap_or(0);
        for v in vectors.values() {
            if v.dimension() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    left: dimension,
                    right: v.dimension(),
                });
            }
        }
        Ok(Self {
            model_id: model_id.into(),
            dimension,
            vectors,
            source_digest: String::new(),
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// True when this index was built from exactly `catalog`'s embedding
    /// texts with a backend of the same id.
    pub fn is_current_for(&self, catalog: &Catalog, model_id: &str) -> bool {
        self.model_id == model_id && self.source_digest == source_digest(catalog, model_id)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), EmbeddingError> {
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            model_id: self.model_id.clone(),
            dimension: self.dimension,
            count: self.vectors.len(),
            source_digest: self.source_digest.clone(),
        };
        let json = |e: serde_json::Error| EmbeddingError::Persist(e.to_string());
        serde_json::to_writer(&mut out, &header).map_err(json)?;
        out.write_all(b"\n")?;
        for (id, v) in &self.vectors {
            serde_json::to_writer(
                &mut out,
                &IndexRecord {
                    id: id.clone(),
                    values: v.values.clone(),
                },
            )
            .map_err(json)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self, EmbeddingError> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| EmbeddingError::Persist("missing header".into()))??;
        let header: IndexHeader = serde_json::from_str(&header_line)
            .map_err(|e| EmbeddingError::Persist(format!("header: {e}")))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(EmbeddingError::Persist(format!(
                "unsupported index format {} v{}",
                header.format, header.version
            )));
        }
        let mut vectors = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: IndexRecord = serde_json::from_str(&line)
                .map_err(|e| EmbeddingError::Persist(format!("record {}: {e}", n + 1)))?;
            if rec.values.len() != header.dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    left: header.dimension,
                    right: rec.values.len(),
                });
            }
            vectors.insert(rec.id, EmbeddingVector { values: rec.values });
        }
        if vectors.len() != header.count {
            return Err(EmbeddingError::Persist(format!(
                "header declares {} vectors, file holds {}",
                header.count,
                vectors.len()
            )));
        }
        Ok(Self {
            model_id: header.model_id,
            dimension: header.dimension,
            vectors,
            source_digest: header.source_digest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        self.write_to(io::BufWriter::new(tmp.as_file_mut()))?;
        tmp.persist(path).map_err(|e| EmbeddingError::Persist(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(file))
    }
}

fn source_digest(catalog: &Catalog, model_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    for item in catalog.iter() {
        h.update([0]);
        h.update(item.id.as_bytes());
        h.update([0]);
        h.update(embedding_text(item).as_bytes());
    }
    hex::encode(h.finalize())
}

/// Embeds every catalog item. Batches are sent concurrently; a failed batch
/// is retried item by item so the error names exactly the ids that failed.
pub fn build_index(
    catalog: &Catalog,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingIndex, EmbeddingError> {
    if catalog.is_empty() {
        return Err(EmbeddingError::Contract("catalog is empty".into()));
    }
    let work: Vec<(String, String)> = catalog
        .iter()
        .map(|item| (item.id.clone(), embedding_text(item)))
        .collect();

    let results: Vec<(String, Result<EmbeddingVector, EmbeddingError>)> = work
        .par_chunks(BATCH)
        .flat_map_iter(|chunk| {
            let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
            let batch = provider.embed_batch(&texts).and_then(|raw| {
                if raw.len() == texts.len() {
                    Ok(raw)
                } else {
                    Err(EmbeddingError::Contract("misaligned batch response".into()))
                }
            });
            let per_item: Vec<_> = match batch {
                Ok(raw) => chunk
                    .iter()
                    .zip(raw)
                    .map(|((id, _), v)| (id.clone(), EmbeddingVector::from_raw(v)))
                    .collect(),
                Err(_) => chunk
                    .iter()
                    .map(|(id, text)| (id.clone(), embed_text(provider, text)))
                    .collect(),
            };
            per_item.into_iter()
        })
        .collect();

    let mut vectors = BTreeMap::new();
    let mut failed = Vec::new();
    for (id, res) in results {
        match res {
            Ok(v) => {
                vectors.insert(id, v);
            }
            Err(_) => failed.push(id),
        }
    }
    if !failed.is_empty() {
        failed.sort();
        return Err(EmbeddingError::PartialIndex { failed });
    }
    let mut index = EmbeddingIndex::from_vectors(provider.model_id(), vectors)?;
    index.source_digest = source_digest(catalog, provider.model_id());
    Ok(index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item_id: String,
    pub score: f64,
}

/// The history items most similar to a recommendation, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevantSelection {
    pub recommended_id: String,
    pub ranked: Vec<ScoredItem>,
    pub k_requested: usize,
}

impl RelevantSelection {
    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|s| s.item_id.as_str())
    }
}

// Heap entry ordered so that the *worst* candidate sits on top of a max-heap:
// lower score is worse; at equal score the larger id is worse.
struct Candidate<'a> {
    score: f64,
    id: &'a str,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.id.cmp(other.id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// Top-`k` history items by similarity to `recommended_id`.
pub fn select_relevant(
    index: &EmbeddingIndex,
    recommended_id: &str,
    history: &UserHistory,
    k: usize,
) -> Result<RelevantSelection, EmbeddingError> {
    if k == 0 {
        return Err(EmbeddingError::Contract("k must be positive".into()));
    }
    let target = index
        .get(recommended_id)
        .ok_or_else(|| EmbeddingError::UnknownItem(recommended_id.to_string()))?;

    let mut seen = HashSet::new();
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for id in history.item_ids() {
        if id == recommended_id || !seen.insert(id) {
            continue;
        }
        let v = index
            .get(id)
            .ok_or_else(|| EmbeddingError::UnknownItem(id.to_string()))?;
        heap.push(Candidate {
            score: cosine_similarity(target, v)?,
            id,
        });
        if heap.len() > k {
            heap.pop();
        }
    }
    let ranked = heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| ScoredItem {
            item_id: c.id.to_string(),
            score: c.score,
        })
        .collect();
    Ok(RelevantSelection {
        recommended_id: recommended_id.to_string(),
        ranked,
        k_requested: k,
    })
}

/// Short human-readable dump, used by the CLI.
pub fn describe_selection(sel: &RelevantSelection) -> String {
    let mut s = String::new();
    for (rank, item) in sel.ranked.iter().enumerate() {
        let _ = writeln!(s, "{:>2}. {} ({:.4})", rank + 1, item.item_id, item.score);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::from_raw(v.to_vec()).unwrap()
    }

    fn index(entries: &[(&str, &[f64])]) -> EmbeddingIndex {
        EmbeddingIndex::from_vectors(
            "test",
            entries.iter().map(|(id, v)| (id.to_string(), unit(v))),
        )
        .unwrap()
    }

    #[test]
    fn normalizes_backend_output() {
        let p = StaticEmbedder::new().with("x", vec![3.0, 4.0]);
        let v = embed_text(&p, "x").unwrap();
        assert_eq!(v.values(), &[0.6, 0.8]);
    }

    #[test]
    fn empty_text_is_contract_error() {
        let p = HashEmbedder::default();
        assert!(matches!(embed_text(&p, "   "), Err(EmbeddingError::Contract(_))));
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(EmbeddingVector::from_raw(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn hash_embedder_is_deterministic_and_unit() {
        let p = HashEmbedder::new(32, 1);
        let a = embed_text(&p, "mafia family saga").unwrap();
        let b = embed_text(&p, "mafia family saga").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_examples() {
        let a = unit(&[0.6, 0.8]);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&unit(&[1.0, 0.0]), &unit(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((cosine_similarity(&a, &unit(&[1.0, 0.0])).unwrap() - 0.6).abs() < 1e-12);
        assert!(matches!(
            cosine_similarity(&a, &unit(&[1.0, 0.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn select_two_of_three() {
        let idx = index(&[
            ("rec", &[1.0, 0.0]),
            ("A", &[1.0, 0.0]),
            ("B", &[0.0, 1.0]),
            ("C", &[0.6, 0.8]),
        ]);
        let hist = UserHistory::from_item_ids("u", ["A", "B", "C"]);
        let sel = select_relevant(&idx, "rec", &hist, 2).unwrap();
        let ids: Vec<_> = sel.item_ids().collect();
        assert_eq!(ids, vec!["A", "C"]);
        assert!((sel.ranked[0].score - 1.0).abs() < 1e-12);
        assert!((sel.ranked[1].score - 0.6).abs() < 1e-12);
    }

    #[test]
    fn short_history_returns_everything_sorted() {
        let idx = index(&[
            ("rec", &[1.0, 0.0]),
            ("A", &[0.0, 1.0]),
            ("B", &[1.0, 1.0]),
            ("C", &[1.0, 0.1]),
        ]);
        let hist = UserHistory::from_item_ids("u", ["A", "B", "C"]);
        let sel = select_relevant(&idx, "rec", &hist, 5).unwrap();
        let ids: Vec<_> = sel.item_ids().collect();
        assert_eq!(ids, vec!["C", "B", "A"]);
        assert_eq!(sel.k_requested, 5);
    }

    #[test]
    fn signed_zero_scores_tie() {
        // [-1,0]·[0,-1] sums to -0.0 while [-1,0]·[0,1] gives 0.0
        let idx = index(&[("r", &[-1.0, 0.0]), ("z", &[0.0, -1.0]), ("a", &[0.0, 1.0])]);
        let sel = select_relevant(&idx, "r", &UserHistory::from_item_ids("u", ["z", "a"]), 2).unwrap();
        assert_eq!(sel.item_ids().collect::<Vec<_>>(), ["a", "z"]);
        assert!(sel.ranked.iter().all(|s| s.score.is_sign_positive()));
    }

    #[test]
    fn excludes_recommendation_and_duplicates_with_id_tiebreak() {
        let idx = index(&[("rec", &[1.0, 0.0]), ("b", &[1.0, 1.0]), ("a", &[1.0, 1.0])]);
        let hist = UserHistory::from_item_ids("u", ["rec", "b", "a", "b"]);
        let sel = select_relevant(&idx, "rec", &hist, 5).unwrap();
        let ids: Vec<_> = sel.item_ids().collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn unknown_recommendation_is_lookup_error() {
        let idx = index(&[("a", &[1.0])]);
        let hist = UserHistory::from_item_ids("u", ["a"]);
        assert!(matches!(
            select_relevant(&idx, "zzz", &hist, 5),
            Err(EmbeddingError::UnknownItem(id)) if id == "zzz"
        ));
    }

    #[test]
    fn embedding_text_rule() {
        let item = Item::new("1", "Heat").with_plot("A heist.");
        assert_eq!(embedding_text(&item), "Heat. A heist.");
        assert_eq!(embedding_text(&Item::new("2", "Casino")), "Casino");
    }
}
