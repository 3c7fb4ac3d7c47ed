//! Welch t-tests and Cohen's d over a ratings log.
//!
//! ```text
//! cargo run --example stats_report [-- path/to/ratings.jsonl]
//! ```

use std::path::PathBuf;

use explainrec::evaluation::{build_stats_report, read_ratings_log, t_test_two_sample, CriterionSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/ratings.jsonl"));

    let records = read_ratings_log(&path)?;
    let report = build_stats_report(records.iter(), &CriterionSet::default());
    print!("{report}");
    println!("large effects: {:?}", report.large_effects());

    let t = t_test_two_sample(&[2.0, 4.0, 6.0], &[1.0, 3.0, 5.0])?;
    println!("\n[2,4,6] vs [1,3,5]: t = {:.6}, df = {}, p = {:.4}", t.t, t.df, t.p_two_sided);
    Ok(())
}
