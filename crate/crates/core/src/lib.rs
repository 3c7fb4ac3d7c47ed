//! Personalized, aspect-instructed recommendation explanations.
//!
//! The pipeline has three steps: pick the user's history items most similar
//! to the recommendation ([`embedding`]), extract fine-grained aspects for
//! each item with a few-shot prompt ([`aspects`]), and walk a language model
//! through a three-step chain of thought that ends in the explanation
//! ([`explanation`]). A one-prompt zero-shot baseline is generated the same
//! way for comparison, and [`evaluation`] computes the statistics used to
//! compare human ratings of the two.
//!
//! Every model call goes through [`llm::Gateway`], which audits each
//! completion; [`llm::ScriptedProvider`] and [`embedding::HashEmbedder`] make
//! the whole pipeline runnable offline and deterministically.

pub mod aspects;
pub mod catalog;
pub mod config;
pub mod embedding;
pub mod evaluation;
pub mod explanation;
pub mod llm;
pub mod prompts;
pub mod service;

pub use aspects::{AspectCache, AspectExtractor, AspectSet};
pub use catalog::{Catalog, Item, UserHistory};
pub use embedding::{EmbeddingIndex, RelevantSelection};
pub use evaluation::{RatingRecord, RatingStore, StatsReport};
pub use explanation::{Explainer, Explanation, ExplanationRequest, Method};
pub use llm::{Gateway, GenerationParams, ScriptedProvider};
