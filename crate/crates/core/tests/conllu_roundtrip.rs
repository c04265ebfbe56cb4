mod support;

use udparse_core::conllu::{parse_conllu, write_conllu};

const CLEAN: &str = include_str!("data/clean.conllu");
const GOLD: &str = include_str!("data/metrics_gold.conllu");
const PRED: &str = include_str!("data/metrics_pred.conllu");

#[test]
fn random_treebanks_survive_write_then_parse() {
    support::check_roundtrip(100).unwrap();
}

#[test]
fn clean_files_are_a_fixpoint() {
    support::check_fixpoint(&[("clean", CLEAN), ("gold", GOLD), ("pred", PRED)]).unwrap();
}

#[test]
fn multiword_lines_and_comments_are_kept() {
    let tb = parse_conllu(CLEAN).unwrap();
    assert_eq!(tb.len(), 3);
    assert_eq!(tb.word_count(), 11);
    let fr = &tb.sentences[0];
    assert_eq!(fr.comments.len(), 3);
    assert_eq!((fr.mwt_lines[0].first, fr.mwt_lines[0].last), (3, 4));
    assert_eq!(fr.tokens[0].feats.get("PronType"), Some("Prs"));
    assert_eq!(fr.tokens[0].deps, "2:nsubj");
    assert_eq!(tb.sentences[1].tokens[0].head, None);
    assert_eq!(tb.sentences[2].mwt_lines[0].first, 1);
}

#[test]
fn feature_order_is_normalized() {
    let text = "1\tx\tx\tNOUN\t_\tNumber=Sing|case=Nom|Abbr=Yes\t0\troot\t_\t_\n\n";
    let out = write_conllu(&parse_conllu(text).unwrap());
    assert_eq!(out, "1\tx\tx\tNOUN\t_\tAbbr=Yes|case=Nom|Number=Sing\t0\troot\t_\t_\n\n");
    assert_eq!(write_conllu(&parse_conllu(&out).unwrap()), out);
}

#[test]
fn malformed_lines_are_rejected() {
    for bad in [
        "1\tx\tx\tNOUN\t_\t_\t0\troot\t_\n\n",
        "2\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n\n",
        "1\tx\tx\tNOUN\t_\t_\t1\troot\t_\t_\n\n",
        "1\tx\tx\tNOUN\t_\t_\t3\troot\t_\t_\n\n",
        "1\tx\tx\tNOUN\t_\tNumber\t0\troot\t_\t_\n\n",
        "1.1\tx\tx\tNOUN\t_\t_\t_\t_\t_\t_\n\n",
        "1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n# late\n\n",
    ] {
        assert!(parse_conllu(bad).is_err(), "{:?}", bad);
    }
}
