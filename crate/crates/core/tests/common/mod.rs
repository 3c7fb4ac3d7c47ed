#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use explainrec::aspects::{default_examples, AspectCache, AspectExtractor};
use explainrec::catalog::{ingest_catalog, load_history, load_metadata, merge_metadata, CatalogFormat};
use explainrec::embedding::{build_index, EmbeddingIndex, HashEmbedder};
use explainrec::llm::{AuditLog, Gateway, RetryPolicy, ScriptedProvider};
use explainrec::prompts::TemplateSet;
use explainrec::{Catalog, Explainer, UserHistory};

pub const LS_TEXT: &str = "You might find yourself enjoying a classic gangster drama like The Godfather based on past viewing habits that include other popular films in this genre such as Scarface and Goodfellas.";
pub const ZS_PERSONALIZATION_TEXT: &str = "The Godfather is a classic film that has stood the test of time and is widely regarded as one of the greatest movies ever made.  It features an iconic performance by Marlon Brando and a  gripping storyline that explores themes of family,  loyalty, and power.";
pub const ZS_FACTUALITY_TEXT: &str = "Based on our analysis so far we can suggest you watch Scarace which is also an epic crime saga like GoodFella but has more action scenes than drama.";
pub const ZS_ROBUSTNESS_TEXT: &str = "The recommendation is based on similar genres or themes that have been previously watched by users who also enjoyed this particular film.";
pub const ZS_READABILITY_TEXT: &str = "<li>System: What other factors are taken into consideration while recommending these specific films?</li><ol type='a'><li>Genre:</li>\n  <li>Romance;</li> <li>Science Fiction/Fantasy;</li>...";

pub const GODFATHER: &str = "858";
pub const GODFATHER_HISTORY: [&str; 5] = ["3362", "1213", "6", "16", "318"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn demo_catalog() -> Catalog {
    let (catalog, _) = ingest_catalog(fixture("demo/movies.dat"), CatalogFormat::Movielens).unwrap();
    let patches = load_metadata(fixture("demo/metadata.jsonl")).unwrap();
    merge_metadata(&catalog, &patches).0
}

pub fn demo_histories() -> Vec<UserHistory> {
    load_history(fixture("demo/history.dat")).unwrap()
}

pub fn godfather_history() -> UserHistory {
    demo_histories().into_iter().find(|h| h.user_id == "1").unwrap()
}

pub fn demo_script() -> ScriptedProvider {
    ScriptedProvider::from_json(&std::fs::read_to_string(fixture("demo/script.json")).unwrap()).unwrap()
}

pub fn demo_index(catalog: &Catalog) -> EmbeddingIndex {
    build_index(catalog, &HashEmbedder::default()).unwrap()
}

pub struct Harness {
    pub explainer: Explainer,
    pub provider: Arc<ScriptedProvider>,
    pub audit: Arc<AuditLog>,
}

pub fn explainer_with(provider: ScriptedProvider) -> Harness {
    let catalog = demo_catalog();
    let index = demo_index(&catalog);
    let provider = Arc::new(provider);
    let audit = Arc::new(AuditLog::in_memory());
    let gateway = Gateway::new(provider.clone(), "Falcon-40b")
        .with_retry(RetryPolicy::immediate(1))
        .with_audit(audit.clone());
    let templates = TemplateSet::builtin();
    let extractor = AspectExtractor::new(gateway.clone(), default_examples(), templates.clone());
    let explainer = Explainer::new(
        Arc::new(catalog),
        Arc::new(index),
        gateway,
        extractor,
        Arc::new(AspectCache::new()),
        templates,
    );
    Harness {
        explainer,
        provider,
        audit,
    }
}

pub fn demo_explainer() -> Harness {
    explainer_with(demo_script())
}

/// Full scan: score every distinct history item except the recommendation,
/// sort by score descending then id ascending, keep `k`.
pub fn oracle_select(index: &EmbeddingIndex, rec: &str, history: &[String], k: usize) -> Vec<(String, f64)> {
    let target = index.get(rec).unwrap().values();
    let mut scored: Vec<(String, f64)> = Vec::new();
    for id in history {
        if id == rec || scored.iter().any(|(s, _)| s == id) {
            continue;
        }
        let v = index.get(id).unwrap().values();
        let mut dot = 0.0;
        for i in 0..v.len() {
            dot += target[i] * v[i];
        }
        scored.push((id.clone(), dot));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Reference statistics: Welford accumulation for moments and the statrs
/// Student t distribution for p-values.
pub mod reference {
    use statrs::distribution::{ContinuousCDF, StudentsT};

    pub fn moments(xs: &[f64]) -> (f64, f64) {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i as f64 + 1.0);
            m2 += delta * (x - mean);
        }
        (mean, m2 / (xs.len() as f64 - 1.0))
    }

    pub fn sem(xs: &[f64]) -> f64 {
        (moments(xs).1 / xs.len() as f64).sqrt()
    }

    /// (t, df, two-sided p)
    pub fn welch(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
        let (ma, va) = moments(a);
        let (mb, vb) = moments(b);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let t = (ma - mb) / (va / na + vb / nb).sqrt();
        let df = (va / na + vb / nb).powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        (t, df, 2.0 * dist.cdf(-t.abs()))
    }

    pub fn cohens_d(a: &[f64], b: &[f64]) -> f64 {
        let (ma, va) = moments(a);
        let (mb, vb) = moments(b);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        (ma - mb) / (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt()
    }
}

/// Relative comparison with a tiny absolute floor for values that should be
/// zero but carry rounding noise from a different summation order.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    let diff = (a - b).abs();
    diff <= rel * a.abs().max(b.abs()) || diff <= 1e-12
}

/// What a well-formed list of `phrases` should parse to: whitespace
/// collapsed, lowercased, generic and overlong phrases dropped, first
/// occurrence kept, capped.
pub fn expected_aspects(phrases: &[String]) -> Vec<String> {
    use explainrec::aspects::{GENERIC_ASPECTS, MAX_ASPECTS, MAX_ASPECT_WORDS};
    let mut out: Vec<String> = Vec::new();
    for p in phrases {
        let words: Vec<&str> = p.split_whitespace().collect();
        let p = words.join(" ").to_lowercase();
        if p.is_empty() || GENERIC_ASPECTS.contains(&p.as_str()) || words.len() > MAX_ASPECT_WORDS {
            continue;
        }
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out.truncate(MAX_ASPECTS);
    out
}
