mod common;

use common::*;
use explainrec::explanation::{write_explanations, FailureKind, Stage, COT_STEPS};
use explainrec::llm::ScriptedProvider;
use explainrec::{ExplanationRequest, Method};

fn request(method: Method) -> ExplanationRequest {
    ExplanationRequest::new(GODFATHER, godfather_history(), method)
}

#[test]
fn godfather_logic_scaffolding() {
    let h = demo_explainer();
    let e = h.explainer.generate_explanation(&request(Method::LogicScaffolding)).unwrap();
    assert_eq!(e.text, LS_TEXT);
    assert!(e.validation.all_passed(), "{:?}", e.validation);

    let mut selected: Vec<&str> = e.relevant_items.item_ids().collect();
    selected.sort();
    let mut expected = GODFATHER_HISTORY.to_vec();
    expected.sort();
    assert_eq!(selected, expected);

    let labels: Vec<&str> = e.cot_trace.iter().map(|s| s.step_label.as_str()).collect();
    assert_eq!(labels, COT_STEPS.iter().map(|(l, _)| *l).collect::<Vec<_>>());
    // each step sees the answers before it
    let step1 = e.cot_trace[0].raw_output.trim();
    let step2 = e.cot_trace[1].raw_output.trim();
    assert!(!e.cot_trace[0].prompt.contains(step1));
    assert!(e.cot_trace[1].prompt.contains(step1));
    assert!(e.cot_trace[2].prompt.contains(step1) && e.cot_trace[2].prompt.contains(step2));

    assert_eq!(e.aspects_used.len(), 6);
    assert_eq!(e.aspects_used[GODFATHER][0], "organized crime family saga");
    // five watched + one recommended aspect call, then three reasoning steps
    assert_eq!(h.audit.len(), 9);
}

#[test]
fn zero_shot_is_one_call() {
    let h = demo_explainer();
    let e = h.explainer.generate_explanation(&request(Method::ZeroShot)).unwrap();
    assert_eq!(h.audit.len(), 1);
    assert!(e.cot_trace.is_empty() && e.aspects_used.is_empty());
    assert!(!e.validation.personalization_hit);
    assert!(e.validation.subject_hit);
    let prompt = &h.audit.records()[0].prompt;
    for title in ["Scarface", "GoodFellas", "Heat", "Casino", "The Shawshank Redemption"] {
        assert!(prompt.contains(title), "{title} missing from zero-shot prompt");
    }
}

#[test]
fn second_run_reuses_cached_aspects() {
    let h = demo_explainer();
    h.explainer.generate_explanation(&request(Method::LogicScaffolding)).unwrap();
    let before = h.audit.len();
    h.explainer.generate_explanation(&request(Method::LogicScaffolding)).unwrap();
    assert_eq!(h.audit.len() - before, 3);
}

#[test]
fn runs_are_byte_identical() {
    let run = || {
        let h = demo_explainer();
        let out: Vec<_> = Method::ALL
            .iter()
            .map(|m| h.explainer.generate_explanation(&request(*m)).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_explanations(&mut buf, &out).unwrap();
        buf
    };
    assert_eq!(run(), run());
}

#[test]
fn ids_differ_between_arms() {
    let h = demo_explainer();
    let zs = h.explainer.generate_explanation(&request(Method::ZeroShot)).unwrap();
    let ls = h.explainer.generate_explanation(&request(Method::LogicScaffolding)).unwrap();
    assert_ne!(zs.id, ls.id);
    assert!(zs.id.starts_with("exp-") && zs.id.len() == 20);
}

#[test]
fn unknown_recommendation() {
    let h = demo_explainer();
    let req = ExplanationRequest::new("424242", godfather_history(), Method::ZeroShot);
    let err = h.explainer.generate_explanation(&req).unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Request, FailureKind::NotFound));
    assert_eq!(h.audit.len(), 0);
}

#[test]
fn history_of_only_the_recommendation() {
    let h = demo_explainer();
    let history = explainrec::UserHistory::from_item_ids("u", [GODFATHER]);
    let req = ExplanationRequest::new(GODFATHER, history, Method::ZeroShot);
    let err = h.explainer.generate_explanation(&req).unwrap_err();
    assert_eq!(err.stage, Stage::Selection);
}

#[test]
fn failure_mid_chain_keeps_partial_trace() {
    // demo script minus the step-2 rule
    let script = std::fs::read_to_string(fixture("demo/script.json")).unwrap();
    let mut rules: Vec<serde_json::Value> = serde_json::from_str(&script).unwrap();
    rules.retain(|r| !r.to_string().contains("Now complete Step 2"));
    let h = explainer_with(ScriptedProvider::from_json(&serde_json::to_string(&rules).unwrap()).unwrap());
    let err = h.explainer.generate_explanation(&request(Method::LogicScaffolding)).unwrap_err();
    assert_eq!((err.stage, err.kind), (Stage::Generation, FailureKind::Upstream));
    assert_eq!(err.partial_trace.len(), 1);
    assert_eq!(err.partial_trace[0].step_label, "shared_aspects");
    // the failed call is audited too
    assert!(h.audit.records().last().unwrap().error.is_some());
}

#[test]
fn k_limits_selection() {
    let h = demo_explainer();
    let mut req = request(Method::ZeroShot);
    req.k = 2;
    let e = h.explainer.generate_explanation(&req).unwrap();
    assert_eq!(e.relevant_items.ranked.len(), 2);
    req.k = 0;
    let err = h.explainer.generate_explanation(&req).unwrap_err();
    assert_eq!(err.kind, FailureKind::InvalidRequest);
}
