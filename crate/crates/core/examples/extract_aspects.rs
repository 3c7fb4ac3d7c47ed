//! Few-shot aspect extraction against a scripted model, with caching.
//!
//! ```text
//! cargo run --example extract_aspects
//! ```

use std::path::Path;
use std::sync::Arc;

use explainrec::aspects::{build_aspect_prompt, default_examples, parse_aspect_response, AspectCache, AspectExtractor};
use explainrec::catalog::{ingest_catalog, load_metadata, merge_metadata, CatalogFormat};
use explainrec::llm::{Gateway, ScriptedProvider};
use explainrec::prompts::TemplateSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let (catalog, _) = ingest_catalog(demo.join("movies.dat"), CatalogFormat::Movielens)?;
    let (catalog, _) = merge_metadata(&catalog, &load_metadata(demo.join("metadata.jsonl"))?);
    let godfather = catalog.get("858").expect("demo catalog has 858");

    let templates = TemplateSet::builtin();
    println!("--- prompt ---\n{}\n", build_aspect_prompt(godfather, &default_examples(), &templates)?);

    let provider = Arc::new(ScriptedProvider::from_json(&std::fs::read_to_string(demo.join("script.json"))?)?);
    let gateway = Gateway::new(provider.clone(), "Falcon-40b");
    let extractor = AspectExtractor::new(gateway, default_examples(), templates);
    let cache = AspectCache::new();

    for round in 1..=2 {
        let set = extractor.extract(godfather, &cache)?;
        println!("round {round}: {:?} via {:?}, model calls so far {}", set.aspects, set.source, provider.calls());
    }

    // the parser on its own
    for raw in ["- Heist Planning\n- Drama\n- heist planning", "family drama, british documentaries", "<li>Romance;</li>"] {
        println!("{raw:?} -> {:?}", parse_aspect_response(raw).map_err(|e| e.to_string()));
    }
    Ok(())
}
