//! Load a MovieLens-style `movies.dat`, attach plot summaries, and print
//! what was kept and what was skipped.
//!
//! ```text
//! cargo run --example ingest_catalog
//! ```

use std::path::Path;

use explainrec::catalog::{ingest_catalog, load_history, load_metadata, merge_metadata, CatalogFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");

    let (catalog, report) = ingest_catalog(demo.join("movies.dat"), CatalogFormat::Movielens)?;
    println!("read {} rows, kept {}", report.rows_read, report.rows_accepted);
    for skip in &report.skipped {
        println!("  skipped line {}: {}", skip.line, skip.reason);
    }

    let (catalog, merge) = merge_metadata(&catalog, &load_metadata(demo.join("metadata.jsonl"))?);
    println!("plots attached to {} items", merge.updated.len());

    for item in catalog.iter().take(4) {
        println!("{:>5}  {:<28} {:?} {}", item.id, item.display_title(), item.year, item.genres.join("|"));
    }

    for history in load_history(demo.join("history.dat"))? {
        println!("user {} watched {} movies", history.user_id, history.len());
    }
    Ok(())
}
