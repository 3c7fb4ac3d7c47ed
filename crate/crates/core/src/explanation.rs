//! Explanation generation for both comparison arms, plus text validators.
//!
//! The zero-shot arm sends one prompt containing the recommendation and the
//! user's most relevant history. The logic-scaffolding arm selects relevant
//! history, extracts aspects for every involved item, then walks the model
//! through three reasoning steps as three sequential calls, each seeing the
//! answers to the previous steps. The final step's answer is the explanation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aspects::{AspectCache, AspectError, AspectExtractor};
use crate::catalog::{display_title, Catalog, Item, UserHistory};
use crate::embedding::{select_relevant, EmbeddingError, EmbeddingIndex, RelevantSelection, DEFAULT_K};
use crate::llm::{Gateway, GatewayError, GenerationParams};
use crate::prompts::{render, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ZeroShot,
    LogicScaffolding,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::ZeroShot, Method::LogicScaffolding];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ZeroShot => "zero_shot",
            Method::LogicScaffolding => "logic_scaffolding",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero_shot" | "zero-shot" => Ok(Method::ZeroShot),
            "logic_scaffolding" | "logic-scaffolding" => Ok(Method::LogicScaffolding),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// One reasoning step: what was asked and what came back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotStep {
    pub step_label: String,
    pub prompt: String,
    pub raw_output: String,
}

/// (label, instruction) for the three reasoning steps, in order.
pub const COT_STEPS: [(&str, &str); 3] = [
    (
        "shared_aspects",
        "Identify the aspects that the recommended movie shares with the movies the user has watched.",
    ),
    (
        "preference_linkage",
        "Relate those shared aspects to the preferences the user has demonstrated through their watching history.",
    ),
    (
        "explanation",
        "Compose one short, natural explanation addressed to the user as \"you\" that names at least one of the watched movies. Reply with the explanation only.",
    ),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRequest {
    pub recommended_id: String,
    pub user_history: UserHistory,
    pub method: Method,
    #[serde(default)]
    pub params: GenerationParams,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    DEFAULT_K
}

impl ExplanationRequest {
    pub fn new(recommended_id: impl Into<String>, user_history: UserHistory, method: Method) -> Self {
        Self {
            recommended_id: recommended_id.into(),
            user_history,
            method,
            params: GenerationParams::default(),
            k: DEFAULT_K,
        }
    }
}

/// Heuristic text checks standing in for the qualities a good explanation
/// should have. They annotate; they never block output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Mentions at least one relevant history title.
    pub personalization_hit: bool,
    /// Mentions the recommended title.
    pub subject_hit: bool,
    /// No HTML-like tags.
    pub no_markup: bool,
    /// 1–4 sentences and 10–120 words.
    pub length_ok: bool,
    /// No hedging boilerplate, and no impersonal generic phrasing.
    pub utterance_ok: bool,
    pub details: BTreeMap<String, String>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.personalization_hit && self.subject_hit && self.no_markup && self.length_ok && self.utterance_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub id: String,
    pub request: ExplanationRequest,
    pub text: String,
    pub relevant_items: RelevantSelection,
    pub aspects_used: BTreeMap<String, Vec<String>>,
    pub cot_trace: Vec<CotStep>,
    pub validation: ValidationReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Request,
    Selection,
    Aspects,
    Prompt,
    Generation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Request => "request",
            Stage::Selection => "selection",
            Stage::Aspects => "aspects",
            Stage::Prompt => "prompt",
            Stage::Generation => "generation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    InvalidRequest,
    NotFound,
    Upstream,
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct ExplainError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
    /// Reasoning steps completed before the failure.
    pub partial_trace: Vec<CotStep>,
}

impl ExplainError {
    fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
            partial_trace: Vec::new(),
        }
    }

    fn contract(message: impl Into<String>) -> Self {
        Self::new(Stage::Prompt, FailureKind::InvalidRequest, message)
    }

    fn gateway(e: GatewayError, trace: &[CotStep]) -> Self {
        let kind = match e {
            GatewayError::Contract(_) => FailureKind::InvalidRequest,
            _ => FailureKind::Upstream,
        };
        Self {
            stage: Stage::Generation,
            kind,
            message: e.to_string(),
            partial_trace: trace.to_vec(),
        }
    }
}

impl From<EmbeddingError> for ExplainError {
    fn from(e: EmbeddingError) -> Self {
        let kind = match e {
            EmbeddingError::UnknownItem(_) => FailureKind::NotFound,
            EmbeddingError::Contract(_) => FailureKind::InvalidRequest,
            _ => FailureKind::Upstream,
        };
        Self::new(Stage::Selection, kind, e.to_string())
    }
}

impl From<AspectError> for ExplainError {
    fn from(e: AspectError) -> Self {
        let kind = match e {
            AspectError::Contract(_) => FailureKind::InvalidRequest,
            _ => FailureKind::Upstream,
        };
        Self::new(Stage::Aspects, kind, e.to_string())
    }
}

fn plot_or_placeholder(item: &Item) -> &str {
    let plot = item.plot.trim();
    if plot.is_empty() {
        "(not available)"
    } else {
        plot
    }
}

pub fn build_zero_shot_prompt(
    rec: &Item,
    history_items: &[&Item],
    templates: &TemplateSet,
) -> Result<String, ExplainError> {
    if history_items.is_empty() {
        return Err(ExplainError::contract("zero-shot prompt needs at least one history item"));
    }
    let history = history_items
        .iter()
        .map(|i| format!("- {}", i.display_title()))
        .collect::<Vec<_>>()
        .join("\n");
    render(
        &templates.zero_shot,
        &[
            ("history", &history),
            ("title", &rec.display_title()),
            ("plot", plot_or_placeholder(rec)),
        ],
    )
    .map_err(|e| ExplainError::contract(e.to_string()))
}

/// The shared part of every reasoning-step prompt: the step overview and the
/// item data blocks.
pub fn build_cot_prompt(
    rec: &Item,
    rec_aspects: &[String],
    relevant: &[(&Item, &[String])],
    templates: &TemplateSet,
) -> Result<String, ExplainError> {
    if relevant.is_empty() {
        return Err(ExplainError::contract("chain-of-thought prompt needs relevant items"));
    }
    let mut missing: Vec<&str> = relevant
        .iter()
        .filter(|(_, a)| a.is_empty())
        .map(|(i, _)| i.id.as_str())
        .collect();
    if rec_aspects.is_empty() {
        missing.insert(0, &rec.id);
    }
    if !missing.is_empty() {
        return Err(ExplainError::contract(format!(
            "aspects missing for item(s): {}",
            missing.join(", ")
        )));
    }
    let blocks = relevant
        .iter()
        .map(|(item, aspects)| {
            format!(
                "Watched movie: {}\nPlot: {}\nAspects: {}\n",
                item.display_title(),
                plot_or_placeholder(item),
                aspects.join("; ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    render(
        &templates.cot,
        &[
            ("step1", COT_STEPS[0].1),
            ("step2", COT_STEPS[1].1),
            ("step3", COT_STEPS[2].1),
            ("title", &rec.display_title()),
            ("plot", plot_or_placeholder(rec)),
            ("aspects", &rec_aspects.join("; ")),
            ("relevant", &blocks),
        ],
    )
    .map_err(|e| ExplainError::contract(e.to_string()))
}

/// Prompt for reasoning step `step` (0-based), embedding earlier answers.
pub fn build_cot_step_prompt(
    base: &str,
    step: usize,
    previous: &[CotStep],
    templates: &TemplateSet,
) -> Result<String, ExplainError> {
    let (_, instruction) = COT_STEPS
        .get(step)
        .ok_or_else(|| ExplainError::contract(format!("no reasoning step {step}")))?;
    let prior: String = previous
        .iter()
        .enumerate()
        .map(|(i, s)| format!("\nStep {} answer:\n{}\n", i + 1, s.raw_output.trim()))
        .collect();
    render(
        &templates.cot_step,
        &[
            ("base", base),
            ("previous", &prior),
            ("step", &(step + 1).to_string()),
            ("instruction", instruction),
        ],
    )
    .map_err(|e| ExplainError::contract(e.to_string()))
}

/// Lowercases and replaces every non-alphanumeric run with one space.
pub fn normalize_for_match(s: &str) -> String {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Case- and punctuation-insensitive whole-word title match. Both the
/// spoken form (`The Godfather`) and the catalog form minus year are tried.
pub fn mentions_title(text: &str, title: &str) -> bool {
    let haystack = format!(" {} ", normalize_for_match(text));
    let without_year = display_title(title);
    let raw_without_year = title
        .trim()
        .trim_end_matches(|c: char| c == ')' || c.is_ascii_digit() || c == '(')
        .to_string();
    [without_year, raw_without_year]
        .iter()
        .map(|t| normalize_for_match(t))
        .filter(|t| !t.is_empty())
        .any(|t| haystack.contains(&format!(" {t} ")))
}

const HEDGES: &[&str] = &[
    "as an ai",
    "as a language model",
    "i m sorry",
    "i am sorry",
    "i cannot",
    "i can t",
    "i m not sure",
    "i am not sure",
    "it is difficult to say",
    "may or may not",
    "based on our analysis",
];

const GENERIC_MARKERS: &[&str] = &[
    "the recommendation is based on",
    "similar genres or themes",
    "users who also",
    "other users",
    "this particular film",
    "this particular movie",
    "this particular item",
];

const SECOND_PERSON: &[&str] = &["you", "your", "yours", "yourself"];

fn sentence_count(text: &str) -> usize {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"[.!?]+(?:\s+|$)").unwrap());
    re.split(text)
        .filter(|s| s.chars().any(char::is_alphanumeric))
        .count()
}

pub fn validate_explanation(text: &str, rec: &Item, relevant_items: &[&Item]) -> ValidationReport {
    let mut details = BTreeMap::new();

    let mentioned: Vec<String> = relevant_items
        .iter()
        .filter(|i| mentions_title(text, &i.title))
        .map(|i| i.display_title())
        .collect();
    details.insert(
        "personalization".into(),
        if mentioned.is_empty() {
            "no relevant history title mentioned".into()
        } else {
            format!("mentions {}", mentioned.join(", "))
        },
    );

    let subject_hit = mentions_title(text, &rec.title);
    details.insert(
        "subject".into(),
        format!(
            "{} `{}`",
            if subject_hit { "mentions" } else { "does not mention" },
            rec.display_title()
        ),
    );

    let no_markup = !crate::aspects::contains_markup(text);
    details.insert(
        "markup".into(),
        if no_markup { "plain text".into() } else { "contains HTML-like tags".into() },
    );

    let sentences = sentence_count(text);
    let words = text.split_whitespace().count();
    let length_ok = (1..=4).contains(&sentences) && (10..=120).contains(&words);
    details.insert("length".into(), format!("{sentences} sentence(s), {words} word(s)"));

    let norm = format!(" {} ", normalize_for_match(text));
    let hedges: Vec<&str> = HEDGES.iter().copied().filter(|h| norm.contains(&format!(" {h} "))).collect();
    let generic: Vec<&str> = GENERIC_MARKERS
        .iter()
        .copied()
        .filter(|g| norm.contains(&format!(" {g} ")))
        .collect();
    let second_person = SECOND_PERSON.iter().any(|p| norm.contains(&format!(" {p} ")));
    let utterance_ok = hedges.is_empty() && (generic.is_empty() || second_person);
    details.insert(
        "utterance".into(),
        format!(
            "hedges: [{}]; generic phrasing: [{}]; addresses reader: {}",
            hedges.join(", "),
            generic.join(", "),
            second_person
        ),
    );

    ValidationReport {
        personalization_hit: !mentioned.is_empty(),
        subject_hit,
        no_markup,
        length_ok,
        utterance_ok,
        details,
    }
}

/// Everything needed to turn a request into an [`Explanation`].
#[derive(Clone)]
pub struct Explainer {
    catalog: Arc<Catalog>,
    index: Arc<EmbeddingIndex>,
    gateway: Gateway,
    extractor: AspectExtractor,
    cache: Arc<AspectCache>,
    templates: TemplateSet,
}

impl Explainer {
    pub fn new(
        catalog: Arc<Catalog>,
        index: Arc<EmbeddingIndex>,
        gateway: Gateway,
        extractor: AspectExtractor,
        cache: Arc<AspectCache>,
        templates: TemplateSet,
    ) -> Self {
        Self {
            catalog,
            index,
            gateway,
            extractor,
            cache,
            templates,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn aspect_cache(&self) -> &AspectCache {
        &self.cache
    }

    fn item(&self, id: &str, stage: Stage) -> Result<&Item, ExplainError> {
        self.catalog
            .get(id)
            .ok_or_else(|| ExplainError::new(stage, FailureKind::NotFound, format!("item `{id}` not in catalog")))
    }

    pub fn generate_explanation(&self, request: &ExplanationRequest) -> Result<Explanation, ExplainError> {
        if request.k == 0 {
            return Err(ExplainError::new(Stage::Request, FailureKind::InvalidRequest, "k must be positive"));
        }
        request
            .params
            .validate()
            .map_err(|e| ExplainError::new(Stage::Request, FailureKind::InvalidRequest, e.to_string()))?;
        let rec = self.item(&request.recommended_id, Stage::Request)?;

        let selection = select_relevant(&self.index, &rec.id, &request.user_history, request.k)?;
        if selection.ranked.is_empty() {
            return Err(ExplainError::new(
                Stage::Selection,
                FailureKind::InvalidRequest,
                "user history has no items other than the recommendation",
            ));
        }
        let relevant: Vec<&Item> = selection
            .item_ids()
            .map(|id| self.item(id, Stage::Selection))
            .collect::<Result<_, _>>()?;

        let (raw_text, aspects_used, cot_trace) = match request.method {
            Method::ZeroShot => {
                let prompt = build_zero_shot_prompt(rec, &relevant, &self.templates)?;
                let record = self
                    .gateway
                    .complete(&prompt, &request.params)
                    .map_err(|e| ExplainError::gateway(e, &[]))?;
                (record.output, BTreeMap::new(), Vec::new())
            }
            Method::LogicScaffolding => self.scaffold(rec, &relevant, &request.params)?,
        };

        let text = raw_text.trim().to_string();
        if text.is_empty() {
            return Err(ExplainError {
                stage: Stage::Generation,
                kind: FailureKind::Upstream,
                message: "model returned an empty explanation".into(),
                partial_trace: cot_trace,
            });
        }
        let validation = validate_explanation(&text, rec, &relevant);
        let mut explanation = Explanation {
            id: String::new(),
            request: request.clone(),
            text,
            relevant_items: selection,
            aspects_used,
            cot_trace,
            validation,
        };
        explanation.id = explanation_id(&explanation);
        Ok(explanation)
    }

    #[allow(clippy::type_complexity)]
    fn scaffold(
        &self,
        rec: &Item,
        relevant: &[&Item],
        params: &GenerationParams,
    ) -> Result<(String, BTreeMap<String, Vec<String>>, Vec<CotStep>), ExplainError> {
        let mut aspects_used = BTreeMap::new();
        for item in std::iter::once(rec).chain(relevant.iter().copied()) {
            let set = self.extractor.extract(item, &self.cache)?;
            aspects_used.insert(item.id.clone(), set.aspects);
        }
        let pairs: Vec<(&Item, &[String])> = relevant
            .iter()
            .map(|i| (*i, aspects_used[&i.id].as_slice()))
            .collect();
        let base = build_cot_prompt(rec, &aspects_used[&rec.id], &pairs, &self.templates)?;

        let mut trace: Vec<CotStep> = Vec::with_capacity(COT_STEPS.len());
        for (step, (label, _)) in COT_STEPS.iter().enumerate() {
            let prompt = build_cot_step_prompt(&base, step, &trace, &self.templates).map_err(|mut e| {
                e.partial_trace = trace.clone();
                e
            })?;
            let record = self
                .gateway
                .complete(&prompt, params)
                .map_err(|e| ExplainError::gateway(e, &trace))?;
            trace.push(CotStep {
                step_label: label.to_string(),
                prompt,
                raw_output: record.output,
            });
        }
        let text = trace.last().map(|s| s.raw_output.clone()).unwrap_or_default();
        Ok((text, aspects_used, trace))
    }
}

/// Content hash over everything but the id itself.
fn explanation_id(e: &Explanation) -> String {
    #[derive(Serialize)]
    struct Content<'a> {
        request: &'a ExplanationRequest,
        text: &'a str,
        relevant_items: &'a RelevantSelection,
        aspects_used: &'a BTreeMap<String, Vec<String>>,
        cot_trace: &'a [CotStep],
    }
    let bytes = serde_json::to_vec(&Content {
        request: &e.request,
        text: &e.text,
        relevant_items: &e.relevant_items,
        aspects_used: &e.aspects_used,
        cot_trace: &e.cot_trace,
    })
    .expect("explanation content serializes");
    format!("exp-{}", &hex::encode(Sha256::digest(bytes))[..16])
}

pub fn write_explanations<W: std::io::Write>(
    mut out: W,
    explanations: &[Explanation],
) -> std::io::Result<()> {
    for e in explanations {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
