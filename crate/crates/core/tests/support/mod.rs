//! Independent reference implementations and randomized checks shared by the
//! integration tests and the acceptance target.
//!
//! Each `check_*` function runs a fixed number of deterministic proptest cases
//! and returns a failure description (with the shrunk input) on mismatch.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use udparse_core::autodiff::{ParamStore, Regularized, Tape};
use udparse_core::conllu::{
    check_heads, parse_conllu, write_conllu, MorphFeatureSet, MultiwordLine, Sentence, Token, Treebank,
};
use udparse_core::eval;
use udparse_core::parser::{chu_liu_edmonds, max_arborescence, ArcWeights};
use udparse_core::rng::{stream, DEFAULT_SEED};
use udparse_core::Tensor;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 2000,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| match e {
        TestError::Fail(why, input) => format!("{} (minimal input: {:?})", why, input),
        TestError::Abort(why) => format!("aborted: {}", why),
    })
}

// ---------------------------------------------------------------- matrices

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i * n + j] += a[i * n + k] * b[k * n + j];
            }
        }
    }
    c
}

/// Sum of the weights of all closed walks of exactly `k` steps.
pub fn closed_walks(a: &[f64], n: usize, k: usize) -> f64 {
    fn go(a: &[f64], n: usize, start: usize, at: usize, left: usize, w: f64) -> f64 {
        if left == 0 {
            return if at == start { w } else { 0.0 };
        }
        (0..n).map(|next| go(a, n, start, next, left - 1, w * a[at * n + next])).sum()
    }
    (0..n).map(|s| go(a, n, s, s, k, 1.0)).sum()
}

/// `d/dA Σ_{k≤K} tr(Aᵏ) = Σ k (Aᵏ⁻¹)ᵀ`
pub fn trace_gradient(a: &[f64], n: usize, k: usize) -> Vec<f64> {
    let mut power = vec![0.0; n * n];
    for i in 0..n {
        power[i * n + i] = 1.0;
    }
    let mut g = vec![0.0; n * n];
    for step in 1..=k {
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] += step as f64 * power[j * n + i];
            }
        }
        power = matmul(&power, a, n);
    }
    g
}

/// Value and gradient of the tape's `trace_powers` at `a`.
pub fn tape_trace(a: &[f64], n: usize, k: usize) -> (f64, Vec<f64>) {
    let mut params = ParamStore::<f64>::new();
    let id = params.add("a", Tensor::from_vec(&[n, n], a.to_vec()).unwrap(), Regularized::None);
    let mut tape = Tape::new(&params, false, stream(DEFAULT_SEED, "oracle", &[]));
    let av = tape.param(id);
    let t = tape.trace_powers(av, k).unwrap();
    let value = tape.scalar(t);
    tape.backward(t).unwrap();
    (value, tape.grad(av).unwrap().to_vec())
}

/// Random non-negative 6×6 matrices, K = 1..4: value against closed-walk
/// enumeration (abs 1e-9), gradient against the closed form (abs 1e-6).
pub fn check_trace_powers(cases: u32) -> Result<(), String> {
    const N: usize = 6;
    let strategy = (prop::collection::vec(0.0f64..1.0, N * N), 1usize..=4);
    report(runner(cases).run(&strategy, |(a, k)| {
        let (value, grad) = tape_trace(&a, N, k);
        let walks: f64 = (1..=k).map(|j| closed_walks(&a, N, j)).sum();
        prop_assert!((value - walks).abs() <= 1e-9, "K={}: tape {} vs walks {}", k, value, walks);
        let expected = trace_gradient(&a, N, k);
        for (i, (g, e)) in grad.iter().zip(&expected).enumerate() {
            prop_assert!((g - e).abs() <= 1e-6, "K={}: gradient[{}] {} vs {}", k, i, g, e);
        }
        Ok(())
    }))
}

// ------------------------------------------------------------------- trees

/// Follows heads from every token: a tree iff each walk reaches 0 within
/// `n` steps without leaving `0..=n`.
pub fn dfs_is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    (1..=n).all(|start| {
        let mut v = start;
        for _ in 0..=n {
            if v == 0 {
                return true;
            }
            if v > n {
                return false;
            }
            v = heads[v - 1];
        }
        false
    })
}

/// Whether some walk revisits a token before reaching 0 or leaving range.
pub fn dfs_has_cycle(heads: &[usize]) -> bool {
    let n = heads.len();
    (1..=n).any(|start| {
        let mut seen = vec![false; n + 1];
        let mut v = start;
        while v != 0 && v <= n {
            if seen[v] {
                return true;
            }
            seen[v] = true;
            v = heads[v - 1];
        }
        false
    })
}

pub fn root_children(heads: &[usize]) -> usize {
    heads.iter().filter(|&&h| h == 0).count()
}

/// Random head vectors (including self-loops and out-of-range heads) against
/// the walk-based oracle.
pub fn check_tree_validation(cases: u32) -> Result<(), String> {
    let strategy = (1usize..=9).prop_flat_map(|n| prop::collection::vec(0..=n + 1, n));
    report(runner(cases).run(&strategy, |heads| {
        let r = check_heads(&heads);
        let tree = dfs_is_tree(&heads);
        prop_assert_eq!(r.is_tree(), tree);
        prop_assert_eq!(r.single_root(), root_children(&heads) == 1);
        prop_assert_eq!(r.is_valid(), tree && root_children(&heads) == 1);
        prop_assert_eq!(r.cycle.is_empty(), !dfs_has_cycle(&heads));
        // a reported cycle must be closed under the head function
        for &v in &r.cycle {
            prop_assert!(r.cycle.contains(&heads[v - 1]), "{} leaves reported cycle {:?}", v, r.cycle);
        }
        let oob: Vec<usize> = (1..=heads.len()).filter(|&i| heads[i - 1] > heads.len()).collect();
        prop_assert_eq!(r.out_of_range, oob);
        Ok(())
    }))
}

/// Best single-root and unconstrained arborescence weights by enumerating
/// every head vector.
pub fn brute_force(w: &ArcWeights) -> (f64, f64) {
    let n = w.nodes() - 1;
    let mut heads = vec![0usize; n];
    let (mut single, mut free) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    loop {
        if heads.iter().enumerate().all(|(i, &h)| h != i + 1) && dfs_is_tree(&heads) {
            let s = w.tree_weight(&heads);
            free = free.max(s);
            if root_children(&heads) == 1 {
                single = single.max(s);
            }
        }
        // odometer over (0..=n)^n
        let mut i = 0;
        while i < n {
            heads[i] += 1;
            if heads[i] <= n {
                break;
            }
            heads[i] = 0;
            i += 1;
        }
        if i == n {
            return (single, free);
        }
    }
}

fn arc_weights(tokens: usize, ints: &[i32]) -> ArcWeights {
    let n = tokens + 1;
    let mut w = ArcWeights::new(n, ints.iter().map(|&x| x as f64).collect());
    w.mask_structural();
    w
}

fn weights_strategy(tokens: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (usize, Vec<i32>)> {
    tokens.prop_flat_map(|t| (Just(t), prop::collection::vec(-20i32..=20, (t + 1) * (t + 1))))
}

fn cle_case(tokens: usize, ints: &[i32]) -> Result<(), TestCaseError> {
    let w = arc_weights(tokens, ints);
    let (single, free) = brute_force(&w);
    let heads = chu_liu_edmonds(&w).ok_or_else(|| TestCaseError::fail("no tree returned"))?;
    let report = check_heads(&heads);
    prop_assert!(report.is_valid(), "invalid output {:?}: {:?}", heads, report);
    prop_assert_eq!(w.tree_weight(&heads), single, "single-root weight, heads {:?}", heads);
    let unconstrained = max_arborescence(&w).ok_or_else(|| TestCaseError::fail("no arborescence"))?;
    prop_assert!(dfs_is_tree(&unconstrained), "not a tree: {:?}", unconstrained);
    prop_assert_eq!(w.tree_weight(&unconstrained), free, "unconstrained weight");
    Ok(())
}

/// Integer-weighted complete digraphs: 500 draws with 1..=4 tokens and 200
/// each with 5 and 6 tokens, compared with exhaustive search for exact
/// equality of the optimum.
pub fn check_cle(small: u32, large: u32) -> Result<(), String> {
    report(runner(small).run(&weights_strategy(1..=4), |(t, w)| cle_case(t, &w)))?;
    for t in [5, 6] {
        report(runner(large).run(&weights_strategy(t..=t), |(t, w)| cle_case(t, &w)))?;
    }
    Ok(())
}

// ------------------------------------------------------------------ CoNLL-U

fn word() -> impl Strategy<Value = String> {
    "[A-Za-zÀ-ÿ0-9.,'!?-]{1,7}"
}

fn opt_field(s: impl Strategy<Value = String>) -> impl Strategy<Value = String> {
    prop_oneof![1 => Just(String::new()), 3 => s]
}

fn feats() -> impl Strategy<Value = MorphFeatureSet> {
    const ATTRS: [&str; 7] = ["Case", "Number", "Gender", "Person", "Tense", "PronType", "Abbr"];
    prop::sample::subsequence(ATTRS.to_vec(), 0..=4)
        .prop_shuffle()
        .prop_flat_map(|attrs| {
            let n = attrs.len();
            (Just(attrs), prop::collection::vec("[A-Z][a-z]{1,4}", n))
        })
        .prop_map(|(attrs, vals)| MorphFeatureSet::from_pairs(attrs.into_iter().zip(vals)).unwrap())
}

fn token_fields() -> impl Strategy<Value = Token> {
    (
        word(),
        opt_field(word()),
        opt_field("[A-Z]{3,5}"),
        opt_field("[A-Z$]{2,4}"),
        feats(),
        opt_field("[a-z]{2,6}(:[a-z]{2,4})?"),
        opt_field("[0-9]:[a-z]{2,5}"),
        opt_field("(SpaceAfter=No|Gloss=[a-z]{1,5})"),
    )
        .prop_map(|(form, lemma, upos, xpos, feats, deprel, deps, misc)| Token {
            form,
            lemma,
            upos,
            xpos,
            feats,
            deprel,
            deps,
            misc,
            ..Token::default()
        })
}

/// Arbitrary sentences: any heads in range (not necessarily trees), some
/// unset, optional comments and one optional multiword line.
pub fn sentence() -> impl Strategy<Value = Sentence> {
    (1usize..=8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(token_fields(), n),
                prop::collection::vec(prop::option::weighted(0.9, 0..=n), n),
                prop::collection::vec("# [a-z_]{1,8} = [ -~]{0,12}", 0..=3),
                prop::option::of((1..=n, 0..=n, word())),
            )
        })
        .prop_map(|(mut tokens, heads, comments, mwt)| {
            let n = tokens.len();
            for (i, (t, h)) in tokens.iter_mut().zip(heads).enumerate() {
                t.id = i + 1;
                t.head = h.map(|h| if h == i + 1 { 0 } else { h });
            }
            let mwt_lines = mwt
                .filter(|&(first, len, _)| first + len <= n && len > 0)
                .map(|(first, len, form)| {
                    let last = first + len;
                    MultiwordLine {
                        first,
                        last,
                        line: format!("{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t_", first, last, form),
                    }
                })
                .into_iter()
                .collect();
            Sentence {
                comments,
                mwt_lines,
                tokens,
            }
        })
}

pub fn treebank() -> impl Strategy<Value = Treebank> {
    prop::collection::vec(sentence(), 1..=5).prop_map(|sentences| Treebank { sentences })
}

/// `parse(write(tb)) == tb` and `write(parse(write(tb))) == write(tb)` for
/// random treebanks.
pub fn check_roundtrip(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&treebank(), |tb| {
        let text = write_conllu(&tb);
        let back = parse_conllu(&text).map_err(|e| TestCaseError::fail(format!("{}\n{}", e, text)))?;
        prop_assert_eq!(&back, &tb);
        prop_assert_eq!(write_conllu(&back), text);
        Ok(())
    }))
}

/// Clean files (feature attributes already sorted) are a fixpoint of
/// parse-then-write.
pub fn check_fixpoint(texts: &[(&str, &str)]) -> Result<(), String> {
    for (name, text) in texts {
        let tb = parse_conllu(text).map_err(|e| format!("{}: {}", name, e))?;
        let out = write_conllu(&tb);
        if out != *text {
            let line = out.lines().zip(text.lines()).position(|(a, b)| a != b);
            return Err(format!("{}: output differs at line {:?}", name, line.map(|l| l + 1)));
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ metrics

const FUNCTION: [&str; 8] = ["aux", "cop", "mark", "det", "clf", "case", "cc", "punct"];
const DEPRELS: [&str; 12] = [
    "nsubj", "obj", "obl", "amod", "advmod", "root", "det", "case", "punct", "aux:pass", "nmod:poss", "cc",
];
const UPOS: [&str; 6] = ["NOUN", "VERB", "ADJ", "DET", "ADP", "PUNCT"];

/// A gold treebank with valid trees and full annotation, a few heads unset.
pub fn gold_sentence() -> impl Strategy<Value = Sentence> {
    (1usize..=10)
        .prop_flat_map(|n| {
            (
                Just((1..=n).collect::<Vec<usize>>()).prop_shuffle(),
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec(
                    (
                        "[a-z]{1,5}",
                        prop::sample::select(&UPOS[..]),
                        prop::sample::select(&DEPRELS[..]),
                        feats(),
                        prop::bool::weighted(0.05),
                    ),
                    n,
                ),
            )
        })
        .prop_map(|(order, picks, fields)| {
            let n = order.len();
            let mut heads = vec![0; n];
            for (pos, &tok) in order.iter().enumerate().skip(1) {
                heads[tok - 1] = order[picks[pos].index(pos)];
            }
            let tokens = fields
                .into_iter()
                .enumerate()
                .map(|(i, (form, upos, deprel, feats, unset))| Token {
                    id: i + 1,
                    lemma: form.to_uppercase(),
                    form,
                    upos: upos.into(),
                    xpos: upos[..2].into(),
                    feats,
                    head: if unset { None } else { Some(heads[i]) },
                    deprel: deprel.into(),
                    ..Token::default()
                })
                .collect();
            Sentence {
                tokens,
                ..Sentence::default()
            }
        })
}

#[derive(Debug, Clone)]
pub struct Corruption {
    head: Option<usize>,
    deprel: Option<&'static str>,
    upos: Option<&'static str>,
    xpos: bool,
    feats: bool,
    lemma: bool,
}

fn corruption() -> impl Strategy<Value = Corruption> {
    (
        prop::option::weighted(0.25, 0usize..12),
        prop::option::weighted(0.2, prop::sample::select(&DEPRELS[..])),
        prop::option::weighted(0.2, prop::sample::select(&UPOS[..])),
        prop::bool::weighted(0.2),
        prop::bool::weighted(0.2),
        prop::bool::weighted(0.2),
    )
        .prop_map(|(head, deprel, upos, xpos, feats, lemma)| Corruption {
            head,
            deprel,
            upos,
            xpos,
            feats,
            lemma,
        })
}

pub fn corrupt(gold: &Treebank, edits: &[Corruption]) -> Treebank {
    let mut pred = gold.clone();
    let tokens = pred.sentences.iter_mut().flat_map(|s| {
        let n = s.tokens.len();
        s.tokens.iter_mut().map(move |t| (n, t))
    });
    for ((n, t), e) in tokens.zip(edits.iter().cycle()) {
        if let Some(h) = e.head {
            t.head = Some(h % (n + 1));
        }
        if let Some(d) = e.deprel {
            t.deprel = d.into();
        }
        if let Some(u) = e.upos {
            t.upos = u.into();
        }
        if e.xpos {
            t.xpos.push('x');
        }
        if e.feats {
            t.feats = if t.feats.is_empty() {
                MorphFeatureSet::from_pairs([("Foreign", "Yes")]).unwrap()
            } else {
                MorphFeatureSet::new()
            };
        }
        if e.lemma {
            t.lemma = t.form.clone();
        }
    }
    pred
}

/// Metrics recomputed token by token, in the order of `ScoreReport`
/// (uas, las, upos, xpos, feats, lemma, mlas, blex).
pub fn recount(gold: &Treebank, pred: &Treebank) -> [f64; 8] {
    let mut c = [0usize; 8];
    let (mut all, mut with_head, mut content) = (0usize, 0usize, 0usize);
    for (gs, ps) in gold.sentences.iter().zip(&pred.sentences) {
        for (g, p) in gs.tokens.iter().zip(&ps.tokens) {
            all += 1;
            c[2] += (g.upos == p.upos) as usize;
            c[3] += (g.xpos == p.xpos) as usize;
            c[4] += (g.feats.to_string() == p.feats.to_string()) as usize;
            c[5] += (g.lemma == p.lemma) as usize;
            let Some(gh) = g.head else { continue };
            with_head += 1;
            let head = p.head == Some(gh);
            let label = head && g.deprel == p.deprel;
            c[0] += head as usize;
            c[1] += label as usize;
            let base = g.deprel.split(':').next().unwrap();
            if base.is_empty() || FUNCTION.contains(&base) {
                continue;
            }
            content += 1;
            c[6] += (label && g.upos == p.upos && g.feats.to_string() == p.feats.to_string()) as usize;
            c[7] += (label && g.lemma == p.lemma) as usize;
        }
    }
    let frac = |k: usize, d: usize| if d == 0 { 0.0 } else { k as f64 / d as f64 };
    [
        frac(c[0], with_head),
        frac(c[1], with_head),
        frac(c[2], all),
        frac(c[3], all),
        frac(c[4], all),
        frac(c[5], all),
        frac(c[6], content),
        frac(c[7], content),
    ]
}

pub fn report_values(r: &eval::ScoreReport) -> [f64; 8] {
    [r.uas, r.las, r.upos_acc, r.xpos_acc, r.feats_acc, r.lemma_acc, r.mlas_style, r.blex_style]
}

/// Random gold treebanks with random corruptions: every metric equals the
/// recount exactly, and a misaligned prediction is rejected.
pub fn check_metrics(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(gold_sentence(), 1..=6).prop_map(|sentences| Treebank { sentences }),
        prop::collection::vec(corruption(), 1..=30),
    );
    report(runner(cases).run(&strategy, |(gold, edits)| {
        let pred = corrupt(&gold, &edits);
        let r = eval::score(&gold, &pred).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(report_values(&r), recount(&gold, &pred));
        prop_assert_eq!(r.tokens, gold.word_count());
        prop_assert_eq!(r.sentences, gold.len());
        prop_assert!(r.mlas_style <= eval::content_las(&gold, &pred).unwrap());
        prop_assert!(r.blex_style <= eval::content_las(&gold, &pred).unwrap());
        let mut shifted = pred.clone();
        shifted.sentences[0].tokens[0].form.push('#');
        prop_assert!(eval::score(&gold, &shifted).is_err());
        Ok(())
    }))
}
