//! Few-shot aspect extraction.
//!
//! An aspect is a fine-grained, multi-word feature of an item ("family
//! drama", "british documentaries"), as opposed to a bare genre label. The
//! extraction prompt is primed with exactly three worked examples; responses
//! are parsed defensively because models drift between list styles and
//! sometimes answer in HTML.

use std::collections::{BTreeMap, HashSet};
use std::io::{self, Write};
use std::path::Path;
use std::sync::{OnceLock, RwLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Item;
use crate::llm::{Gateway, GatewayError, GenerationParams, ASPECT_MAX_TOKENS};
use crate::prompts::{render, TemplateError, TemplateSet};

pub const MAX_ASPECTS: usize = 10;
pub const MAX_ASPECT_WORDS: usize = 8;
pub const PRIMING_EXAMPLE_COUNT: usize = 3;

/// MovieLens genre vocabulary. Any of these on its own is too coarse to be an
/// aspect; inside a longer phrase ("family drama") it is fine.
pub const GENERIC_ASPECTS: &[&str] = &[
    "action",
    "adventure",
    "animation",
    "children's",
    "comedy",
    "crime",
    "documentary",
    "drama",
    "fantasy",
    "film-noir",
    "horror",
    "musical",
    "mystery",
    "romance",
    "sci-fi",
    "thriller",
    "war",
    "western",
];

#[derive(Debug, Error)]
pub enum AspectError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("response contains markup: {raw:?}")]
    Format { raw: String },
    #[error("no usable aspects in response {raw:?} (rejected: {rejected:?})")]
    Parse { raw: String, rejected: Vec<String> },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("aspect extraction for `{item_id}` failed twice: {reason}")]
    Extraction {
        item_id: String,
        reason: String,
        responses: Vec<String>,
    },
    #[error("aspect cache: {0}")]
    Cache(String),
}

pub fn is_generic_aspect(aspect: &str) -> bool {
    let a = aspect.trim().to_lowercase();
    GENERIC_ASPECTS.contains(&a.as_str())
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// A worked example used to prime the extraction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectExample {
    pub item_title: String,
    pub aspects: Vec<String>,
}

impl AspectExample {
    pub fn validate(&self) -> Result<(), AspectError> {
        let bad = |m: String| Err(AspectError::Contract(format!("example `{}`: {m}", self.item_title)));
        if self.item_title.trim().is_empty() {
            return bad("empty title".into());
        }
        if !(2..=6).contains(&self.aspects.len()) {
            return bad(format!("needs 2-6 aspects, has {}", self.aspects.len()));
        }
        for a in &self.aspects {
            if is_generic_aspect(a) {
                return bad(format!("`{a}` is a bare genre, not a fine-grained aspect"));
            }
            if !(2..=6).contains(&word_count(a)) {
                return bad(format!("`{a}` should be 2-6 words"));
            }
            if *a != a.to_lowercase() || a.trim() != a {
                return bad(format!("`{a}` must be trimmed lowercase"));
            }
        }
        Ok(())
    }
}

/// The three bundled priming examples.
pub fn default_examples() -> Vec<AspectExample> {
    serde_json::from_str(include_str!("../fixtures/priming_examples.json"))
        .expect("bundled priming examples are valid JSON")
}

pub fn load_examples(path: impl AsRef<Path>) -> Result<Vec<AspectExample>, AspectError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| AspectError::Contract(format!("{}: {e}", path.as_ref().display())))?;
    serde_json::from_str(&text).map_err(|e| AspectError::Contract(e.to_string()))
}

/// `1. first\n2. second`
pub fn render_aspect_list(aspects: &[String]) -> String {
    aspects
        .iter()
        .enumerate()
        .map(|(i, a)| format!("{}. {a}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_aspect_prompt(
    item: &Item,
    examples: &[AspectExample],
    templates: &TemplateSet,
) -> Result<String, AspectError> {
    if examples.len() != PRIMING_EXAMPLE_COUNT {
        return Err(AspectError::Contract(format!(
            "exactly {PRIMING_EXAMPLE_COUNT} priming examples required, got {}",
            examples.len()
        )));
    }
    for ex in examples {
        ex.validate()?;
    }
    let rendered_examples = examples
        .iter()
        .map(|ex| {
            format!(
                "Movie: {}\nAspects:\n{}",
                ex.item_title,
                render_aspect_list(&ex.aspects)
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n");
    let plot = if item.plot.trim().is_empty() {
        "(not available)"
    } else {
        item.plot.trim()
    };
    let title = item.display_title();
    Ok(render(
        &templates.aspects,
        &[("examples", &rendered_examples), ("title", &title), ("plot", plot)],
    )?)
}

fn html_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[a-zA-Z/][^>]*>").unwrap())
}

fn marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:(\d{1,3})[.)]\s*|[-*•]\s+)(.*)$").unwrap())
}

pub fn contains_markup(text: &str) -> bool {
    html_regex().is_match(text)
}

fn clean_aspect(raw: &str) -> String {
    const QUOTES: &[char] = &['"', '\'', '“', '”', '‘', '’', '`'];
    let trimmed = raw
        .trim_start_matches(|c: char| c.is_whitespace() || QUOTES.contains(&c))
        .trim_end_matches(|c: char| c.is_whitespace() || QUOTES.contains(&c) || ".;:,!".contains(c));
    trimmed
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Parses a model response into a canonical aspect list.
///
/// Numbered (`1.`, `1)`) and bulleted (`-`, `*`) lists are read item by item;
/// anything else is treated as comma-separated text. Output is lowercase,
/// deduplicated in first-seen order, capped at [`MAX_ASPECTS`], with bare
/// genres and overlong phrases dropped.
pub fn parse_aspect_response(raw: &str) -> Result<Vec<String>, AspectError> {
    if contains_markup(raw) {
        return Err(AspectError::Format { raw: raw.to_string() });
    }

    let mut lines: Vec<&str> = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        // a model continuing the few-shot pattern starts inventing the next movie
        if !lines.is_empty() && line.to_lowercase().starts_with("movie:") {
            break;
        }
        lines.push(line);
    }

    let marked: Vec<(usize, Option<u32>, &str)> = lines
        .iter()
        .enumerate()
        .filter_map(|(i, l)| {
            marker_regex().captures(l).map(|c| {
                let number = c.get(1).and_then(|m| m.as_str().parse().ok());
                (i, number, c.get(2).map_or("", |m| m.as_str()))
            })
        })
        .collect();

    let candidates: Vec<String> = if let Some(&(first_idx, first_num, _)) = marked.first() {
        let mut out = Vec::new();
        // the prompt ends with the cue "1.", so the model's first item can
        // arrive unnumbered right before a "2."
        if first_idx > 0 && first_num == Some(2) {
            out.push(lines[first_idx - 1].to_string());
        }
        out.extend(marked.iter().map(|(_, _, text)| text.to_string()));
        out
    } else {
        lines
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                let l = match l.to_lowercase().strip_prefix("aspects:") {
                    Some(_) if i == 0 => &l["aspects:".len()..],
                    _ => l,
                };
                l.split(',').map(str::to_string).collect::<Vec<_>>()
            })
            .collect()
    };

    let mut seen = HashSet::new();
    let mut aspects = Vec::new();
    let mut rejected = Vec::new();
    for candidate in candidates {
        let a = clean_aspect(&candidate);
        if a.is_empty() {
            continue;
        }
        if is_generic_aspect(&a) || word_count(&a) > MAX_ASPECT_WORDS {
            rejected.push(a);
            continue;
        }
        if seen.insert(a.clone()) {
            aspects.push(a);
        }
    }
    aspects.truncate(MAX_ASPECTS);
    if aspects.is_empty() {
        return Err(AspectError::Parse {
            raw: raw.to_string(),
            rejected,
        });
    }
    Ok(aspects)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AspectSource {
    Llm,
    Cache,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectSet {
    pub item_id: String,
    pub aspects: Vec<String>,
    pub source: AspectSource,
    pub raw_response: String,
}

impl AspectSet {
    /// Hand-written aspects; they go through the same canonicalization as
    /// model output.
    pub fn manual(item_id: impl Into<String>, aspects: &[&str]) -> Result<Self, AspectError> {
        let raw = render_aspect_list(&aspects.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        Ok(Self {
            item_id: item_id.into(),
            aspects: parse_aspect_response(&raw)?,
            source: AspectSource::Manual,
            raw_response: raw,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CacheKey {
    pub item_id: String,
    pub template_version: String,
    pub model_id: String,
}

/// One line of the on-disk aspect cache.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub item_id: String,
    pub aspects: Vec<String>,
    pub model_id: String,
    pub template_version: String,
    pub raw_response: String,
}

impl CacheEntry {
    fn key(&self) -> CacheKey {
        CacheKey {
            item_id: self.item_id.clone(),
            template_version: self.template_version.clone(),
            model_id: self.model_id.clone(),
        }
    }
}

/// Aspect sets keyed by (item, template version, model). Shared across
/// threads; a later insert for the same key replaces the earlier one.
#[derive(Debug, Default)]
pub struct AspectCache {
    entries: RwLock<BTreeMap<CacheKey, CacheEntry>>,
}

impl AspectCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads a JSON-lines cache; a missing file yields an empty cache.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AspectError> {
        let path = path.as_ref();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Self::new()),
            Err(e) => return Err(AspectError::Cache(e.to_string())),
        };
        let cache = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(line)
                .map_err(|e| AspectError::Cache(format!("line {}: {e}", i + 1)))?;
            cache.insert(entry);
        }
        Ok(cache)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for entry in self.read().values() {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    /// Writes the whole cache to a temporary file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AspectError> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let err = |e: io::Error| AspectError::Cache(e.to_string());
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
        self.write_to(io::BufWriter::new(tmp.as_file_mut())).map_err(err)?;
        tmp.persist(path).map_err(|e| AspectError::Cache(e.to_string()))?;
        Ok(())
    }

    pub fn get(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.read().get(key).cloned()
    }

    pub fn insert(&self, entry: CacheEntry) {
        self.entries
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(entry.key(), entry);
    }

    pub fn len(&self) -> usize {
        self.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, BTreeMap<CacheKey, CacheEntry>> {
        self.entries.read().unwrap_or_else(|p| p.into_inner())
    }
}

/// Prompt, call, parse, cache.
#[derive(Clone)]
pub struct AspectExtractor {
    gateway: Gateway,
    examples: Vec<AspectExample>,
    templates: TemplateSet,
    params: GenerationParams,
}

impl AspectExtractor {
    pub fn new(gateway: Gateway, examples: Vec<AspectExample>, templates: TemplateSet) -> Self {
        Self {
            gateway,
            examples,
            templates,
            params: GenerationParams::default().with_max_tokens(ASPECT_MAX_TOKENS),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    pub fn cache_key(&self, item_id: &str) -> CacheKey {
        CacheKey {
            item_id: item_id.to_string(),
            template_version: self.templates.version.clone(),
            model_id: self.gateway.model_id().to_string(),
        }
    }

    pub fn extract(&self, item: &Item, cache: &AspectCache) -> Result<AspectSet, AspectError> {
        let key = self.cache_key(&item.id);
        if let Some(hit) = cache.get(&key) {
            return Ok(AspectSet {
                item_id: hit.item_id,
                aspects: hit.aspects,
                source: AspectSource::Cache,
                raw_response: hit.raw_response,
            });
        }

        let prompt = build_aspect_prompt(item, &self.examples, &self.templates)?;
        let mut responses = Vec::with_capacity(2);
        let mut reason = String::new();
        for _ in 0..2 {
            let record = self.gateway.complete(&prompt, &self.params)?;
            match parse_aspect_response(&record.output) {
                Ok(aspects) => {
                    cache.insert(CacheEntry {
                        item_id: item.id.clone(),
                        aspects: aspects.clone(),
                        model_id: key.model_id.clone(),
                        template_version: key.template_version.clone(),
                        raw_response: record.output.clone(),
                    });
                    return Ok(AspectSet {
                        item_id: item.id.clone(),
                        aspects,
                        source: AspectSource::Llm,
                        raw_response: record.output,
                    });
                }
                Err(e) => {
                    tracing::debug!(item = %item.id, error = %e, "unusable aspect response");
                    reason = e.to_string();
                    responses.push(record.output);
                }
            }
        }
        Err(AspectError::Extraction {
            item_id: item.id.clone(),
            reason,
            responses,
        })
    }
}

pub fn extract_aspects(
    item: &Item,
    gateway: &Gateway,
    examples: &[AspectExample],
    cache: &AspectCache,
) -> Result<AspectSet, AspectError> {
    AspectExtractor::new(gateway.clone(), examples.to_vec(), TemplateSet::builtin())
        .extract(item, cache)
}
