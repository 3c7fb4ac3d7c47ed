//! Both explanation arms for The Godfather, offline.
//!
//! ```text
//! cargo run --example explain_godfather
//! ```

use std::path::Path;
use std::sync::Arc;

use explainrec::aspects::{default_examples, AspectCache, AspectExtractor};
use explainrec::catalog::{ingest_catalog, load_history, load_metadata, merge_metadata, CatalogFormat};
use explainrec::embedding::{build_index, HashEmbedder};
use explainrec::llm::{AuditLog, Gateway, ScriptedProvider};
use explainrec::prompts::TemplateSet;
use explainrec::{Explainer, ExplanationRequest, Method};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let (catalog, _) = ingest_catalog(demo.join("movies.dat"), CatalogFormat::Movielens)?;
    let (catalog, _) = merge_metadata(&catalog, &load_metadata(demo.join("metadata.jsonl"))?);
    let index = build_index(&catalog, &HashEmbedder::default())?;
    let history = load_history(demo.join("history.dat"))?
        .into_iter()
        .find(|h| h.user_id == "1")
        .expect("user 1");

    let provider = Arc::new(ScriptedProvider::from_json(&std::fs::read_to_string(demo.join("script.json"))?)?);
    let audit = Arc::new(AuditLog::in_memory());
    let gateway = Gateway::new(provider, "Falcon-40b").with_audit(audit.clone());
    let templates = TemplateSet::builtin();
    let explainer = Explainer::new(
        Arc::new(catalog),
        Arc::new(index),
        gateway.clone(),
        AspectExtractor::new(gateway, default_examples(), templates.clone()),
        Arc::new(AspectCache::new()),
        templates,
    );

    for method in Method::ALL {
        let before = audit.len();
        let e = explainer.generate_explanation(&ExplanationRequest::new("858", history.clone(), method))?;
        println!("== {method} ({}, {} model calls)", e.id, audit.len() - before);
        for step in &e.cot_trace {
            println!("  [{}] {}", step.step_label, step.raw_output.trim());
        }
        println!("{}", e.text);
        println!("checks passed: {} {:?}\n", e.validation.all_passed(), e.validation);
    }
    Ok(())
}
