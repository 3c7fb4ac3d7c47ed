//! Run the quality checks over a few hand-written explanations.
//!
//! ```text
//! cargo run --example validate_explanations
//! ```

use explainrec::explanation::validate_explanation;
use explainrec::Item;

fn main() {
    let rec = Item::new("858", "Godfather, The (1972)");
    let watched: Vec<Item> = [("3362", "Scarface (1983)"), ("1213", "GoodFellas (1990)"), ("6", "Heat (1995)")]
        .into_iter()
        .map(|(id, t)| Item::new(id, t))
        .collect();
    let watched: Vec<&Item> = watched.iter().collect();

    let texts = [
        "You might find yourself enjoying a classic gangster drama like The Godfather based on past viewing habits that include other popular films in this genre such as Scarface and Goodfellas.",
        "The Godfather is a classic film that has stood the test of time and is widely regarded as one of the greatest movies ever made.",
        "The recommendation is based on similar genres or themes that have been previously watched by users who also enjoyed this particular film.",
        "<li>Genre:</li><li>Crime;</li>",
        "Watch The Godfather.",
    ];
    println!("{:<8} {:<8} {:<8} {:<8} {:<8}  text", "person", "subject", "markup", "length", "utter");
    for text in texts {
        let r = validate_explanation(text, &rec, &watched);
        let mark = |b: bool| if b { "ok" } else { "FAIL" };
        let short: String = text.chars().take(50).collect();
        println!(
            "{:<8} {:<8} {:<8} {:<8} {:<8}  {short}",
            mark(r.personalization_hit),
            mark(r.subject_hit),
            mark(r.no_markup),
            mark(r.length_ok),
            mark(r.utterance_ok)
        );
    }
}
