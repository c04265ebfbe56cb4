//! Finite-difference checks of every tape operation and every composed
//! layer, run on random 64-bit instances.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{grad_check, GradCheckOptions, ParamStore, Regularized, Tape, Var};
use crate::config::{ConvSpec, ModelConfig, RegularizationConfig, RootPlacement};
use crate::conllu::parse_conllu;
use crate::error::Result;
use crate::heads::{feats_loss, lemma_loss, mean_cross_entropy, FeatsHead, LemmatizerHead, TaggerHead};
use crate::layers::{Activation, BiLstm, ConvStack, Dense, LstmCell};
use crate::model::JointModel;
use crate::parser::{arc_loss, cycle_penalty, ArcScorer, Labeler};
use crate::rng::{self, Rng};

/// Maximum relative error accepted by the suite.
pub const TOLERANCE: f64 = 1e-4;

/// Primitive operations followed by composed layers.
pub const CHECKS: &[&str] = &[
    "matmul",
    "matmul_nt",
    "add",
    "add_row",
    "mul",
    "scale",
    "concat_cols",
    "concat_rows",
    "slice_cols",
    "slice_rows",
    "gather_rows",
    "tanh",
    "relu",
    "sigmoid",
    "softmax_rows",
    "cross_entropy_rows",
    "global_max_pool",
    "dilated_conv1d",
    "sum",
    "trace_powers",
    "dropout",
    "gaussian_dropout",
    "gaussian_noise",
    "dense",
    "conv_stack",
    "lstm",
    "bilstm",
    "encoder",
    "tagger",
    "feats",
    "lemmatizer",
    "arc_loss",
    "cycle_penalty",
    "labeler",
    "joint_model",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    pub coords: usize,
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

type Loss = Box<dyn for<'a> Fn(&mut Tape<'a, f64>) -> Result<Var>>;

struct Case {
    params: ParamStore<f64>,
    loss: Loss,
    train: bool,
    max_coords: usize,
}

impl Case {
    fn new(params: ParamStore<f64>, loss: Loss) -> Self {
        Case {
            params,
            loss,
            train: false,
            max_coords: 40,
        }
    }

    fn train(mut self) -> Self {
        self.train = true;
        self
    }

    fn coords(mut self, n: usize) -> Self {
        self.max_coords = n;
        self
    }
}

fn normals(r: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(r)).collect()
}

/// Values bounded away from zero, for kinked functions.
fn off_zero(r: &mut Rng, n: usize) -> Vec<f64> {
    normals(r, n)
        .into_iter()
        .map(|x: f64| if x.abs() < 0.05 { x.signum() * 0.05 + x } else { x })
        .collect()
}

fn dim(r: &mut Rng, lo: usize, hi: usize) -> usize {
    r.random_range(lo..=hi)
}

fn param(p: &mut ParamStore<f64>, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
    let t = crate::Tensor::from_vec(&[rows, cols], data).expect("shape");
    p.add(name, t, Regularized::None);
}

fn randn(p: &mut ParamStore<f64>, r: &mut Rng, name: &str, rows: usize, cols: usize) {
    let d = normals(r, rows * cols);
    param(p, name, rows, cols, d);
}

/// Scalar `Σ out ⊙ W` with a fixed random `W`, so every output coordinate
/// carries a distinct weight.
fn project(tape: &mut Tape<'_, f64>, out: Var, weights: &[f64]) -> Result<Var> {
    let (r, c) = tape.shape(out);
    let w = tape.constant(r, c, weights[..r * c].to_vec());
    let m = tape.mul(out, w)?;
    Ok(tape.sum(m))
}

/// Projection through a matrix product, for checking `mul` itself.
fn project_mm(tape: &mut Tape<'_, f64>, out: Var, weights: &[f64]) -> Result<Var> {
    let c = tape.shape(out).1;
    let w = tape.constant(c, 1, weights[..c].to_vec());
    let m = tape.matmul(out, w)?;
    Ok(tape.sum(m))
}

fn p(tape: &mut Tape<'_, f64>, name: &str) -> Var {
    let id = tape.params().id(name).expect("parameter");
    tape.param(id)
}

fn tiny_config(r: &mut Rng) -> ModelConfig {
    let c = |filters: usize, dilation: usize| ConvSpec {
        filters,
        kernel: 3,
        dilation,
    };
    ModelConfig {
        trainable_word_dim: 3,
        word_dim: 3,
        char_emb_dim: 2,
        char_convs: vec![c(3, 1), c(3, 2), c(2, 4)],
        lstm_hidden: 2,
        lstm_layers: 2,
        upos_hidden: 3,
        xpos_hidden: 2,
        feats_hidden: 2,
        lemma_feature_dim: 2,
        lemma_char_dim: 3,
        lemma_convs: vec![c(3, 1), c(2, 2), c(3, 4)],
        lemma_slack: 2,
        arc_dim: 3,
        label_dim: 2,
        root: if r.random_bool(0.5) {
            RootPlacement::Input
        } else {
            RootPlacement::Feature
        },
        regularization: RegularizationConfig::default(),
    }
}

const TINY_TREEBANK: &str = "\
1\tDogs\tdog\tNOUN\tNNS\tNumber=Plur\t2\tnsubj\t_\t_
2\tbark\tbark\tVERB\tVBP\tTense=Pres\t0\troot\t_\t_

1\tThe\tthe\tDET\tDT\t_\t2\tdet\t_\t_
2\tcat\tcat\tNOUN\tNN\tNumber=Sing\t3\tnsubj\t_\t_
3\tsaw\tsee\tVERB\tVBD\tTense=Past\t0\troot\t_\t_
4\tmice\tmouse\tNOUN\tNNS\tNumber=Plur\t3\tobj\t_\t_

1\tGo\tgo\tVERB\tVB\tMood=Imp\t0\troot\t_\t_
";

fn build(name: &'static str, r: &mut Rng, i: usize) -> Result<Case> {
    let mut ps = ParamStore::<f64>::new();
    let m = dim(r, 1, 4);
    let n = dim(r, 1, 4);
    let k = dim(r, 1, 4);
    let w = normals(r, 64 * 64);
    let case = match name {
        "matmul" | "matmul_nt" | "add" | "mul" => {
            randn(&mut ps, r, "a", m, k);
            let nt = name == "matmul_nt";
            match name {
                "matmul" => randn(&mut ps, r, "b", k, n),
                "matmul_nt" => randn(&mut ps, r, "b", n, k),
                _ => randn(&mut ps, r, "b", m, k),
            }
            let op = name;
            Case::new(
                ps,
                Box::new(move |t| {
                    let (a, b) = (p(t, "a"), p(t, "b"));
                    let out = match op {
                        "matmul" => t.matmul(a, b)?,
                        "add" => t.add(a, b)?,
                        "mul" => {
                            let out = t.mul(a, b)?;
                            return project_mm(t, out, &w);
                        }
                        _ => {
                            debug_assert!(nt);
                            t.matmul_nt(a, b)?
                        }
                    };
                    project(t, out, &w)
                }),
            )
        }
        "add_row" => {
            randn(&mut ps, r, "a", m, n);
            randn(&mut ps, r, "b", 1, n);
            Case::new(
                ps,
                Box::new(move |t| {
                    let (a, b) = (p(t, "a"), p(t, "b"));
                    let out = t.add_row(a, b)?;
                    project(t, out, &w)
                }),
            )
        }
        "scale" | "tanh" | "sigmoid" | "softmax_rows" | "sum" | "relu" => {
            let d = if name == "relu" { off_zero(r, m * n) } else { normals(r, m * n) };
            param(&mut ps, "a", m, n, d);
            let s: f64 = StandardNormal.sample(r);
            let op = name;
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "a");
                    let out = match op {
                        "scale" => t.scale(a, s),
                        "tanh" => t.tanh(a),
                        "sigmoid" => t.sigmoid(a),
                        "softmax_rows" => t.softmax_rows(a),
                        "relu" => t.relu(a),
                        _ => {
                            let s = t.sum(a);
                            return Ok(t.scale(s, w[0]));
                        }
                    };
                    project(t, out, &w)
                }),
            )
        }
        "concat_cols" | "concat_rows" => {
            let cols = name == "concat_cols";
            let parts = dim(r, 1, 3);
            let mut sizes = Vec::new();
            for j in 0..parts {
                let e = dim(r, 1, 3);
                sizes.push(e);
                let (rr, cc) = if cols { (m, e) } else { (e, n) };
                randn(&mut ps, r, &alloc::format!("x{}", j), rr, cc);
            }
            Case::new(
                ps,
                Box::new(move |t| {
                    let vs: Vec<Var> = (0..parts).map(|j| p(t, &alloc::format!("x{}", j))).collect();
                    let out = if cols { t.concat_cols(&vs)? } else { t.concat_rows(&vs)? };
                    project(t, out, &w)
                }),
            )
        }
        "slice_cols" | "slice_rows" => {
            let cols = name == "slice_cols";
            let (rr, cc) = (m + 2, n + 2);
            randn(&mut ps, r, "a", rr, cc);
            let extent = if cols { cc } else { rr };
            let start = dim(r, 0, extent - 1);
            let len = dim(r, 1, extent - start);
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "a");
                    let out = if cols { t.slice_cols(a, start, len)? } else { t.slice_rows(a, start, len)? };
                    project(t, out, &w)
                }),
            )
        }
        "gather_rows" => {
            randn(&mut ps, r, "table", m + 1, n);
            let idx: Vec<usize> = (0..dim(r, 1, 6)).map(|_| dim(r, 0, m)).collect();
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "table");
                    let out = t.gather_rows(a, &idx)?;
                    project(t, out, &w)
                }),
            )
        }
        "cross_entropy_rows" => {
            let probs: Vec<f64> = (0..m * n).map(|_| r.random_range(0.05..1.0)).collect();
            param(&mut ps, "probs", m, n, probs);
            let targets: Vec<usize> = (0..m).map(|_| dim(r, 0, n - 1)).collect();
            let weights: Vec<f64> = (0..m).map(|_| r.random_range(0.0..2.0)).collect();
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "probs");
                    t.cross_entropy_rows(a, &targets, &weights)
                }),
            )
        }
        "global_max_pool" => {
            let l = dim(r, 1, 6);
            // well separated values so the arg max is stable
            let mut d: Vec<f64> = (0..l * n).map(|j| j as f64 * 0.37).collect();
            for j in (1..d.len()).rev() {
                let s = dim(r, 0, j);
                d.swap(j, s);
            }
            param(&mut ps, "a", l, n, d);
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "a");
                    let out = t.global_max_pool(a)?;
                    project(t, out, &w)
                }),
            )
        }
        "dilated_conv1d" => {
            let l = dim(r, 1, 9);
            let taps = [1, 3, 5][dim(r, 0, 2)];
            let dilation = [1, 2, 4][i % 3];
            randn(&mut ps, r, "x", l, k);
            randn(&mut ps, r, "kernel", taps * k, n);
            Case::new(
                ps,
                Box::new(move |t| {
                    let (x, ker) = (p(t, "x"), p(t, "kernel"));
                    let out = t.dilated_conv1d(x, ker, taps, dilation)?;
                    project(t, out, &w)
                }),
            )
        }
        "trace_powers" => {
            let s = dim(r, 1, 6);
            let d: Vec<f64> = (0..s * s).map(|_| r.random_range(0.0..1.0)).collect();
            param(&mut ps, "a", s, s, d);
            let kk = 1 + i % 4;
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "a");
                    t.trace_powers(a, kk)
                }),
            )
        }
        "dropout" | "gaussian_dropout" | "gaussian_noise" => {
            randn(&mut ps, r, "a", m, n);
            let rate = r.random_range(0.1..0.5);
            let op = name;
            Case::new(
                ps,
                Box::new(move |t| {
                    let a = p(t, "a");
                    let x = t.tanh(a);
                    let out = match op {
                        "dropout" => t.dropout(x, rate)?,
                        "gaussian_dropout" => t.gaussian_dropout(x, rate)?,
                        _ => t.gaussian_noise(x, rate)?,
                    };
                    project(t, out, &w)
                }),
            )
            .train()
        }
        "dense" => {
            let act = [Activation::Tanh, Activation::Softmax, Activation::Linear][i % 3];
            randn(&mut ps, r, "x", m, k);
            let d = Dense::new(&mut ps, "dense", k, n, act, 0.25, r);
            Case::new(
                ps,
                Box::new(move |t| {
                    let x = p(t, "x");
                    let out = d.forward(t, x)?;
                    project(t, out, &w)
                }),
            )
            .train()
        }
        "conv_stack" => {
            let l = dim(r, 1, 9);
            randn(&mut ps, r, "x", l, k);
            let specs = [
                ConvSpec {
                    filters: 3,
                    kernel: 3,
                    dilation: 1,
                },
                ConvSpec {
                    filters: 2,
                    kernel: 3,
                    dilation: 2,
                },
                ConvSpec {
                    filters: 3,
                    kernel: 3,
                    dilation: 4,
                },
            ];
            let s = ConvStack::new(&mut ps, "conv", k, &specs, r);
            Case::new(
                ps,
                Box::new(move |t| {
                    let x = p(t, "x");
                    let out = s.forward(t, x)?;
                    let pooled = t.global_max_pool(out)?;
                    let both = t.concat_rows(&[pooled, out])?;
                    project(t, both, &w)
                }),
            )
        }
        "lstm" => {
            let l = dim(r, 1, 5);
            randn(&mut ps, r, "x", l, k);
            let cell = LstmCell::new(&mut ps, "lstm", k, n, r);
            let reverse = i % 2 == 1;
            let mask: Option<Vec<f64>> = (i % 4 >= 2).then(|| (0..n).map(|_| r.random_range(0.0..2.0)).collect());
            Case::new(
                ps,
                Box::new(move |t| {
                    let x = p(t, "x");
                    let out = cell.run(t, x, reverse, mask.clone())?;
                    project(t, out, &w)
                }),
            )
        }
        "bilstm" => {
            let l = dim(r, 1, 5);
            randn(&mut ps, r, "x", l, k);
            let reg = RegularizationConfig::default();
            let b = BiLstm::new(&mut ps, "bilstm", k, n, 2, &reg, r);
            Case::new(
                ps,
                Box::new(move |t| {
                    let x = p(t, "x");
                    let out = b.forward(t, x)?;
                    project(t, out, &w)
                }),
            )
            .train()
            .coords(12)
        }
        "encoder" | "joint_model" => {
            let tb = parse_conllu(TINY_TREEBANK)?;
            let model = JointModel::<f64>::for_treebank(tiny_config(r), &tb, None, rng::derive_seed(1, name, &[i as u64]))?;
            let sent = model.encode(&tb.sentences[i % tb.len()]);
            let shell = JointModel {
                spec: model.spec.clone(),
                net: model.net.clone(),
                params: ParamStore::new(),
            };
            let whole = name == "joint_model";
            Case::new(
                model.params,
                Box::new(move |t| {
                    if whole {
                        let weights = shell.spec.tasks.effective_weights(&Default::default());
                        let (total, _) = shell.sentence_loss(t, &sent, &weights, 3)?;
                        Ok(total.expect("loss"))
                    } else {
                        let out = shell.net.encoder.encode(t, &sent, &shell.spec.embeddings)?;
                        project(t, out, &w)
                    }
                }),
            )
            .train()
            .coords(4)
        }
        "tagger" | "feats" | "lemmatizer" => {
            let tb = parse_conllu(TINY_TREEBANK)?;
            let cfg = tiny_config(r);
            let model = JointModel::<f64>::for_treebank(cfg.clone(), &tb, None, 1)?;
            let sent = model.encode(&tb.sentences[i % tb.len()]);
            let nw = sent.len();
            randn(&mut ps, r, "words", nw, k + 1);
            let upos = TaggerHead::new(&mut ps, "t", k + 1, 3, 4, 0.25, r);
            let feats = FeatsHead::new(&mut ps, k + 1, 2, &[3, 2, 4], 0.25, r);
            let lcfg = ModelConfig {
                lstm_hidden: 1,
                ..cfg
            };
            // feature width 2·lstm_hidden must match the input
            let words_dim = lcfg.feature_dim();
            randn(&mut ps, r, "lemma_words", nw, words_dim);
            let lemma = LemmatizerHead::new(&mut ps, &lcfg, model.spec.lexicon.chars.len(), r);
            let targets = model.lemma_targets(&sent)?;
            let padded: Vec<Vec<usize>> = (0..nw).map(|j| model.padded_chars(&sent, j)).collect();
            let upos_t: Vec<Option<usize>> = (0..nw).map(|j| if j == 0 && nw > 1 { None } else { Some(j % 4) }).collect();
            let feats_t: Vec<Vec<Option<usize>>> = (0..nw).map(|j| vec![Some(j % 3), None, Some((j + 1) % 4)]).collect();
            let op = name;
            Case::new(
                ps,
                Box::new(move |t| match op {
                    "tagger" => {
                        let x = p(t, "words");
                        let probs = upos.forward(t, x)?;
                        Ok(mean_cross_entropy(t, probs, &upos_t)?.expect("targets"))
                    }
                    "feats" => {
                        let x = p(t, "words");
                        let d = feats.forward(t, x)?;
                        Ok(feats_loss(t, &d, &feats_t)?.expect("targets"))
                    }
                    _ => {
                        let x = p(t, "lemma_words");
                        let reduced = lemma.reduce_features(t, x)?;
                        let mut dists = Vec::new();
                        for (j, pad) in padded.iter().enumerate() {
                            dists.push(lemma.forward(t, pad, reduced, j)?);
                        }
                        Ok(lemma_loss(t, &dists, &targets)?.expect("targets"))
                    }
                }),
            )
            .train()
            .coords(10)
        }
        "arc_loss" | "cycle_penalty" | "labeler" => {
            let nw = dim(r, 1, 5);
            randn(&mut ps, r, "features", nw + 1, k + 1);
            let scorer = ArcScorer::new(&mut ps, k + 1, 3, 0.25, r);
            let labeler = Labeler::new(&mut ps, k + 1, 2, 4, 0.25, r);
            let heads: Vec<usize> = (1..=nw).map(|j| if j == 1 { 0 } else { dim(r, 1, j - 1) }).collect();
            let labels: Vec<Option<usize>> = (0..=nw).map(|j| (j > 0).then_some(j % 4)).collect();
            let op = name;
            let kk = 1 + i % 4;
            Case::new(
                ps,
                Box::new(move |t| {
                    let f = p(t, "features");
                    let a = scorer.score_arcs(t, f)?;
                    match op {
                        "arc_loss" => {
                            let l = arc_loss(t, a, &heads, kk)?;
                            t.add(l.cross_entropy, l.cycle.expect("k > 0"))
                        }
                        "cycle_penalty" => cycle_penalty(t, a, kk),
                        _ => {
                            let probs = labeler.label_arcs(t, f, a)?;
                            Ok(mean_cross_entropy(t, probs, &labels)?.expect("targets"))
                        }
                    }
                }),
            )
            .train()
        }
        other => panic!("unknown check {}", other),
    };
    Ok(case)
}

/// Runs one named check on `instances` random instances.
pub fn run_check(name: &'static str, instances: usize, fault: Option<&'static str>) -> Result<CheckOutcome> {
    let mut out = CheckOutcome {
        name,
        instances,
        coords: 0,
        max_rel_error: 0.0,
        worst_param: None,
    };
    for i in 0..instances {
        let mut r = rng::stream(rng::DEFAULT_SEED, name, &[i as u64]);
        let mut case = build(name, &mut r, i)?;
        // Zero-initialized biases put dead ReLU rows exactly on the kink.
        let ids: Vec<_> = case.params.ids().collect();
        for id in ids {
            if case.params.name(id).ends_with(".bias") {
                let len = case.params.get(id).len();
                let noise = normals(&mut r, len);
                for (x, z) in case.params.get_mut(id).data_mut().iter_mut().zip(noise) {
                    *x += 0.1 * z;
                }
            }
        }
        let opts = GradCheckOptions {
            train: case.train,
            max_coords: case.max_coords,
            seed: i as u64,
            fault,
            ..GradCheckOptions::default()
        };
        let rep = grad_check(&case.params, case.loss, &opts)?;
        out.coords += rep.coords_checked;
        if rep.max_rel_error > out.max_rel_error {
            out.max_rel_error = rep.max_rel_error;
            out.worst_param = rep.worst_param;
        }
    }
    Ok(out)
}

/// Every check in [`CHECKS`].
pub fn run_suite(instances: usize, fault: Option<&'static str>) -> Result<Vec<CheckOutcome>> {
    CHECKS.iter().map(|&n| run_check(n, instances, fault)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_builds_and_passes_once() {
        for &n in CHECKS {
            let o = run_check(n, 1, None).unwrap();
            assert!(o.passed(), "{} {:?}", n, o);
            assert!(o.coords > 0, "{}", n);
        }
    }

    #[test]
    fn sign_flip_is_detected() {
        for op in ["tanh", "matmul", "trace_powers", "dilated_conv1d"] {
            let o = run_check(op, 2, Some(op)).unwrap();
            assert!(!o.passed(), "{}", op);
        }
    }
}
