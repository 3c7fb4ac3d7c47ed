//! Embed the demo catalog and pick the watched movies closest to a
//! recommendation.
//!
//! ```text
//! cargo run --example select_relevant -- 858 2
//! ```

use std::path::Path;

use explainrec::catalog::{ingest_catalog, load_history, load_metadata, merge_metadata, CatalogFormat};
use explainrec::embedding::{build_index, describe_selection, select_relevant, HashEmbedder, DEFAULT_K};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let rec = args.next().unwrap_or_else(|| "858".into());
    let k = args.next().map(|s| s.parse()).transpose()?.unwrap_or(DEFAULT_K);

    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let (catalog, _) = ingest_catalog(demo.join("movies.dat"), CatalogFormat::Movielens)?;
    let (catalog, _) = merge_metadata(&catalog, &load_metadata(demo.join("metadata.jsonl"))?);

    let index = build_index(&catalog, &HashEmbedder::default())?;
    println!("{} vectors of dimension {} ({})", index.len(), index.dimension(), index.model_id());

    for history in load_history(demo.join("history.dat"))? {
        let sel = select_relevant(&index, &rec, &history, k)?;
        println!("\nuser {}, top {k} for {}:", history.user_id, catalog.get(&rec).map_or(rec.clone(), |i| i.display_title()));
        print!("{}", describe_selection(&sel));
    }
    Ok(())
}
