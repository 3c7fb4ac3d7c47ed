//! The HTTP API over the demo fixtures, scripted model included.
//!
//! ```text
//! cargo run --example serve_demo
//! curl -s localhost:8080/users/1/history
//! curl -s -XPOST localhost:8080/explain -H 'content-type: application/json' \
//!      -d '{"recommended_id":"858","user_id":"1","method":"logic_scaffolding"}'
//! ```

use std::path::Path;

use explainrec::catalog::{ingest_catalog, load_metadata, merge_metadata, CatalogFormat};
use explainrec::config::AppConfig;
use explainrec::embedding::{build_index, HashEmbedder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let data = tempfile::tempdir()?;

    let (catalog, _) = ingest_catalog(demo.join("movies.dat"), CatalogFormat::Movielens)?;
    let (catalog, _) = merge_metadata(&catalog, &load_metadata(demo.join("metadata.jsonl"))?);
    std::fs::write(data.path().join("catalog.jsonl"), catalog.to_jsonl_string())?;
    std::fs::copy(demo.join("history.dat"), data.path().join("history.dat"))?;
    build_index(&catalog, &HashEmbedder::default())?.save(data.path().join("index.jsonl"))?;

    let config = AppConfig {
        data_dir: data.path().to_path_buf(),
        llm_script: Some(demo.join("script.json")),
        listen: std::env::var("LISTEN").unwrap_or_else(|_| "127.0.0.1:8080".into()),
        ..AppConfig::default()
    };
    explainrec::service::serve(&config)?;
    Ok(())
}
