mod support;

use udparse_core::conllu::parse_conllu;
use udparse_core::eval;

#[test]
fn scores_match_a_token_recount() {
    support::check_metrics(100).unwrap();
}

#[test]
fn hand_scored_fixture() {
    let gold = parse_conllu(include_str!("data/metrics_gold.conllu")).unwrap();
    let pred = parse_conllu(include_str!("data/metrics_pred.conllu")).unwrap();
    let r = eval::score(&gold, &pred).unwrap();
    let ninths = |k: f64| k / 9.0;
    assert_eq!(support::report_values(&r), [ninths(7.0), ninths(6.0), ninths(8.0), ninths(8.0), ninths(8.0), ninths(7.0), 2.0 / 6.0, 2.0 / 6.0]);
    assert_eq!(support::recount(&gold, &pred), support::report_values(&r));
    assert_eq!(eval::content_las(&gold, &pred).unwrap(), 4.0 / 6.0);
    assert_eq!((r.tokens, r.sentences), (9, 3));
    let table = r.to_text();
    assert!(table.contains("UAS            77.78"), "{}", table);
    assert!(table.contains("MLAS-style     33.33"), "{}", table);
}

#[test]
fn identical_treebanks_score_one() {
    let gold = parse_conllu(include_str!("data/metrics_gold.conllu")).unwrap();
    let r = eval::score(&gold, &gold).unwrap();
    assert_eq!(support::report_values(&r), [1.0; 8]);
}

#[test]
fn misaligned_predictions_are_errors() {
    let gold = parse_conllu(include_str!("data/metrics_gold.conllu")).unwrap();
    let mut pred = gold.clone();
    pred.sentences.pop();
    assert!(matches!(eval::score(&gold, &pred), Err(udparse_core::Error::Alignment(_))));
    let mut pred = gold.clone();
    pred.sentences[1].tokens.pop();
    assert!(eval::score(&gold, &pred).is_err());
}

#[test]
fn baseline_attaches_to_previous_word() {
    let gold = parse_conllu(include_str!("data/metrics_gold.conllu")).unwrap();
    assert_eq!(eval::most_frequent_deprel(&gold), "root");
    let base = eval::baseline_prev_word(&gold, "nsubj");
    assert_eq!(base.sentences[0].heads(), Some(vec![0, 1, 2, 3]));
    let (uas, _) = eval::attachment_scores(&gold, &base).unwrap();
    // only "." (→ barks) and "soundly" (→ sleep) follow their predecessor
    assert_eq!(uas, 2.0 / 9.0);
    assert_eq!(uas, support::recount(&gold, &base)[0]);
}
