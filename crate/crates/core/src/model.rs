//! The joint tagger, lemmatizer and parser.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Regularized, Tape, Var};
use crate::config::{LossWeights, ModelConfig};
use crate::conllu::{MorphFeatureSet, Sentence, Treebank};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::heads::{
    argmax, decode_feats, decode_lemma, feats_loss, lemma_loss, lemma_target, mean_cross_entropy,
    pad_lemma_input, FeatsHead, LemmatizerHead, TaggerHead,
};
use crate::parser::{arc_loss, decode_tree, greedy_decode, ArcScorer, Labeler};
use crate::rng::{self, Rng};
use crate::tensor::Real;
use crate::vocab::{build_lexicon, encode_sentence, EmbeddingMatrix, EncodedSentence, FeatureSchema, Lexicon};

/// Which outputs the model predicts, fixed by the training annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveTasks {
    pub upos: bool,
    pub xpos: bool,
    pub feats: bool,
    pub lemma: bool,
    pub parse: bool,
}

impl ActiveTasks {
    pub fn all() -> Self {
        ActiveTasks {
            upos: true,
            xpos: true,
            feats: true,
            lemma: true,
            parse: true,
        }
    }

    pub fn from_treebank(tb: &Treebank) -> Self {
        ActiveTasks {
            upos: tb.has_upos(),
            xpos: tb.has_xpos(),
            feats: tb.has_feats(),
            lemma: tb.has_lemmas(),
            parse: tb.has_trees(),
        }
    }

    /// Loss weights with the weight of inactive tasks spread over the active
    /// ones in proportion to their own weights.
    pub fn effective_weights(&self, w: &LossWeights) -> LossWeights {
        let total = w.upos + w.xpos + w.feats + w.lemma + w.arc + w.label;
        let pick = |on: bool, v: f64| if on { v } else { 0.0 };
        let kept = LossWeights {
            upos: pick(self.upos, w.upos),
            xpos: pick(self.xpos, w.xpos),
            feats: pick(self.feats, w.feats),
            lemma: pick(self.lemma, w.lemma),
            arc: pick(self.parse, w.arc),
            label: pick(self.parse, w.label),
        };
        let active = kept.upos + kept.xpos + kept.feats + kept.lemma + kept.arc + kept.label;
        if active <= 0.0 {
            return kept;
        }
        let f = total / active;
        LossWeights {
            upos: kept.upos * f,
            xpos: kept.xpos * f,
            feats: kept.feats * f,
            lemma: kept.lemma * f,
            arc: kept.arc * f,
            label: kept.label * f,
        }
    }
}

/// Layer structure; parameters live in the model's [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub encoder: Encoder,
    pub upos: Option<TaggerHead>,
    pub xpos: Option<TaggerHead>,
    pub feats: Option<FeatsHead>,
    pub lemma: Option<LemmatizerHead>,
    pub arcs: ArcScorer,
    pub labels: Labeler,
}

/// Everything needed to rebuild a model apart from parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub config: ModelConfig,
    pub lexicon: Lexicon,
    pub schema: FeatureSchema,
    pub embeddings: EmbeddingMatrix,
    pub tasks: ActiveTasks,
    pub seed: u64,
}

/// Per-task loss values. `None` for tasks without targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskLosses<V> {
    pub upos: Option<V>,
    pub xpos: Option<V>,
    pub feats: Option<V>,
    pub lemma: Option<V>,
    /// Cross-entropy of gold heads plus the cycle penalty.
    pub arc: Option<V>,
    pub label: Option<V>,
    /// The cycle penalty on its own (already part of `arc`).
    pub cycle: Option<V>,
}

impl<V> Default for TaskLosses<V> {
    fn default() -> Self {
        TaskLosses {
            upos: None,
            xpos: None,
            feats: None,
            lemma: None,
            arc: None,
            label: None,
            cycle: None,
        }
    }
}

impl<V: Copy> TaskLosses<V> {
    pub fn map<U>(&self, f: impl Fn(V) -> U) -> TaskLosses<U> {
        TaskLosses {
            upos: self.upos.map(&f),
            xpos: self.xpos.map(&f),
            feats: self.feats.map(&f),
            lemma: self.lemma.map(&f),
            arc: self.arc.map(&f),
            label: self.label.map(&f),
            cycle: self.cycle.map(&f),
        }
    }

    /// `(weight, value)` pairs of the weighted tasks, in a fixed order.
    pub fn weighted(&self, w: &LossWeights) -> Vec<(f64, V)> {
        [
            (w.upos, self.upos),
            (w.xpos, self.xpos),
            (w.feats, self.feats),
            (w.lemma, self.lemma),
            (w.arc, self.arc),
            (w.label, self.label),
        ]
        .into_iter()
        .filter_map(|(w, v)| v.map(|v| (w, v)))
        .collect()
    }
}

/// Tape handles of every prediction for one sentence.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub features: Var,
    pub upos: Option<Var>,
    pub xpos: Option<Var>,
    pub feats: Vec<Var>,
    /// Per word, padded-length × |chars| distributions.
    pub lemmas: Vec<Var>,
    pub arcs: Option<Var>,
    pub labels: Option<Var>,
}

/// Prediction for one sentence in index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub upos: Option<Vec<usize>>,
    pub xpos: Option<Vec<usize>>,
    pub feats: Option<Vec<Vec<usize>>>,
    pub lemmas: Option<Vec<Vec<usize>>>,
    pub heads: Option<Vec<usize>>,
    pub deprels: Option<Vec<usize>>,
    /// Row-major (n+1)² adjacency matrix.
    pub adjacency: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel<T> {
    pub spec: ModelSpec,
    pub net: Network,
    pub params: ParamStore<T>,
}

impl<T: Real> JointModel<T> {
    /// Fresh model with random weights; deterministic in `spec.seed`.
    pub fn new(spec: ModelSpec) -> Self {
        let mut rng: Rng = rng::stream(spec.seed, "init", &[]);
        let mut params = ParamStore::new();
        let cfg = &spec.config;
        let drop = cfg.regularization.dense_dropout;
        let n_chars = spec.lexicon.chars.len();
        let fdim = cfg.feature_dim();
        let encoder = Encoder::new(&mut params, cfg, &spec.embeddings, n_chars, &mut rng);
        let tasks = spec.tasks;
        let upos = (tasks.upos && !spec.lexicon.upos.is_empty())
            .then(|| TaggerHead::new(&mut params, "upos", fdim, cfg.upos_hidden, spec.lexicon.upos.len(), drop, &mut rng));
        let xpos = (tasks.xpos && !spec.lexicon.xpos.is_empty())
            .then(|| TaggerHead::new(&mut params, "xpos", fdim, cfg.xpos_hidden, spec.lexicon.xpos.len(), drop, &mut rng));
        let feats = (tasks.feats && !spec.schema.is_empty())
            .then(|| FeatsHead::new(&mut params, fdim, cfg.feats_hidden, &spec.schema.sizes(), drop, &mut rng));
        let lemma = tasks
            .lemma
            .then(|| LemmatizerHead::new(&mut params, cfg, n_chars, &mut rng));
        let arcs = ArcScorer::new(&mut params, fdim, cfg.arc_dim, drop, &mut rng);
        let labels = Labeler::new(&mut params, fdim, cfg.label_dim, spec.lexicon.deprel.len().max(1), drop, &mut rng);
        JointModel {
            net: Network {
                encoder,
                upos,
                xpos,
                feats,
                lemma,
                arcs,
                labels,
            },
            params,
            spec,
        }
    }

    /// Builds lexicon, schema and (if `embeddings` is `None`) a trainable word
    /// table from a training treebank.
    pub fn for_treebank(config: ModelConfig, tb: &Treebank, embeddings: Option<EmbeddingMatrix>, seed: u64) -> Result<Self> {
        if tb.is_empty() {
            return Err(Error::InvalidInput("training treebank is empty".into()));
        }
        let (lexicon, schema) = build_lexicon(tb);
        let embeddings = embeddings.unwrap_or_else(|| EmbeddingMatrix::trainable(tb, config.trainable_word_dim));
        Ok(Self::new(ModelSpec {
            tasks: ActiveTasks::from_treebank(tb),
            config,
            lexicon,
            schema,
            embeddings,
            seed,
        }))
    }

    /// Same model with another float type (64-bit gradient checks).
    pub fn cast<U: Real>(&self) -> JointModel<U> {
        JointModel {
            spec: self.spec.clone(),
            net: self.net.clone(),
            params: self.params.cast(),
        }
    }

    pub fn encode(&self, s: &Sentence) -> EncodedSentence {
        encode_sentence(s, &self.spec.lexicon, &self.spec.schema, &self.spec.embeddings)
    }

    /// L2 rate per parameter, aligned with the parameter store.
    pub fn l2_rates(&self) -> Vec<f64> {
        let reg = &self.spec.config.regularization;
        self.params
            .ids()
            .map(|id| match self.params.group(id) {
                Regularized::None => 0.0,
                Regularized::Network => reg.l2_network,
                Regularized::Embedding => reg.l2_embeddings,
            })
            .collect()
    }

    /// `Σ λ·‖w‖²` over regularized parameters.
    pub fn l2_penalty(&self) -> f64 {
        self.params
            .ids()
            .zip(self.l2_rates())
            .map(|(id, lam)| {
                if lam == 0.0 {
                    return 0.0;
                }
                lam * self.params.get(id).data().iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>()
            })
            .sum()
    }

    pub fn padded_chars(&self, s: &EncodedSentence, word: usize) -> Vec<usize> {
        let slack = self.net.lemma.as_ref().map(|l| l.slack).unwrap_or(0);
        pad_lemma_input(&s.chars[word], slack)
    }

    /// Runs every head on one sentence.
    pub fn forward(&self, tape: &mut Tape<'_, T>, s: &EncodedSentence) -> Result<Outputs> {
        let n = s.len();
        let features = self.net.encoder.encode(tape, s, &self.spec.embeddings)?;
        let words = tape.slice_rows(features, 1, n)?;
        let upos = match &self.net.upos {
            Some(h) => Some(h.forward(tape, words)?),
            None => None,
        };
        let xpos = match &self.net.xpos {
            Some(h) => Some(h.forward(tape, words)?),
            None => None,
        };
        let feats = match &self.net.feats {
            Some(h) => h.forward(tape, words)?,
            None => Vec::new(),
        };
        let mut lemmas = Vec::new();
        if let Some(lh) = &self.net.lemma {
            let reduced = lh.reduce_features(tape, words)?;
            for i in 0..n {
                let padded = self.padded_chars(s, i);
                lemmas.push(lh.forward(tape, &padded, reduced, i)?);
            }
        }
        let (arcs, labels) = if self.spec.tasks.parse {
            let a = self.net.arcs.score_arcs(tape, features)?;
            let l = self.net.labels.label_arcs(tape, features, a)?;
            (Some(a), Some(l))
        } else {
            (None, None)
        };
        Ok(Outputs {
            features,
            upos,
            xpos,
            feats,
            lemmas,
            arcs,
            labels,
        })
    }

    /// Lemma targets aligned to the padded inputs.
    pub fn lemma_targets(&self, s: &EncodedSentence) -> Result<Vec<Vec<usize>>> {
        (0..s.len())
            .map(|i| {
                let t = &s.targets.lemmas[i];
                if t.is_empty() {
                    Ok(Vec::new())
                } else {
                    lemma_target(t, self.padded_chars(s, i).len())
                }
            })
            .collect()
    }

    /// Unweighted per-task losses of one sentence. `cycle_k = 0` disables
    /// the cycle penalty.
    pub fn task_losses(&self, tape: &mut Tape<'_, T>, s: &EncodedSentence, out: &Outputs, cycle_k: usize) -> Result<TaskLosses<Var>> {
        let t = &s.targets;
        let mut l = TaskLosses::default();
        if let Some(p) = out.upos {
            l.upos = mean_cross_entropy(tape, p, &t.upos)?;
        }
        if let Some(p) = out.xpos {
            l.xpos = mean_cross_entropy(tape, p, &t.xpos)?;
        }
        if !out.feats.is_empty() {
            l.feats = feats_loss(tape, &out.feats, &t.feats)?;
        }
        if !out.lemmas.is_empty() {
            let targets = self.lemma_targets(s)?;
            l.lemma = lemma_loss(tape, &out.lemmas, &targets)?;
        }
        if let (Some(a), Some(lab), Some(heads)) = (out.arcs, out.labels, t.heads.as_ref()) {
            let al = arc_loss(tape, a, heads, cycle_k)?;
            l.arc = Some(match al.cycle {
                Some(c) => tape.add(al.cross_entropy, c)?,
                None => al.cross_entropy,
            });
            l.cycle = al.cycle;
            let mut deprels = alloc::vec![None];
            deprels.extend_from_slice(&t.deprels);
            l.label = mean_cross_entropy(tape, lab, &deprels)?;
        }
        Ok(l)
    }

    /// Weighted joint loss of one sentence as a tape scalar, with the
    /// unweighted task values.
    pub fn sentence_loss(
        &self,
        tape: &mut Tape<'_, T>,
        s: &EncodedSentence,
        weights: &LossWeights,
        cycle_k: usize,
    ) -> Result<(Option<Var>, TaskLosses<f64>)> {
        let out = self.forward(tape, s)?;
        let losses = self.task_losses(tape, s, &out, cycle_k)?;
        let mut total: Option<Var> = None;
        for (w, v) in losses.weighted(weights) {
            let scaled = tape.scale(v, T::from_f64(w));
            total = Some(match total {
                Some(t) => tape.add(t, scaled)?,
                None => scaled,
            });
        }
        let values = losses.map(|v| tape.scalar(v).as_f64());
        Ok((total, values))
    }

    /// Eval-mode prediction for one sentence.
    pub fn predict_encoded(&self, s: &EncodedSentence) -> Result<Prediction> {
        let mut tape = Tape::new(&self.params, false, rng::stream(self.spec.seed, "predict", &[]));
        let out = self.forward(&mut tape, s)?;
        let n = s.len();
        let rows = |tape: &Tape<'_, T>, v: Var| -> Vec<usize> {
            let (r, c) = tape.shape(v);
            (0..r).map(|i| argmax(&tape.value(v)[i * c..(i + 1) * c])).collect()
        };
        let upos = out.upos.map(|v| rows(&tape, v));
        let xpos = out.xpos.map(|v| rows(&tape, v));
        let feats = (!out.feats.is_empty()).then(|| {
            let per_attr: Vec<Vec<usize>> = out.feats.iter().map(|&v| rows(&tape, v)).collect();
            (0..n).map(|i| per_attr.iter().map(|a| a[i]).collect()).collect()
        });
        let lemmas = (!out.lemmas.is_empty()).then(|| out.lemmas.iter().map(|&v| decode_lemma(&rows(&tape, v))).collect());
        let (heads, deprels, adjacency) = match (out.arcs, out.labels) {
            (Some(a), Some(l)) => {
                let av = tape.value(a);
                let heads = decode_tree(av, n + 1);
                let labels = rows(&tape, l)[1..].to_vec();
                (Some(heads), Some(labels), Some(av.iter().map(|x| x.as_f64()).collect()))
            }
            _ => (None, None, None),
        };
        Ok(Prediction {
            upos,
            xpos,
            feats,
            lemmas,
            heads,
            deprels,
            adjacency,
        })
    }

    /// Copy of `s` with every predicted field filled in. Comments,
    /// multiword lines, forms and MISC are kept.
    pub fn predict_sentence(&self, s: &Sentence) -> Result<(Sentence, Prediction)> {
        let enc = self.encode(s);
        let p = self.predict_encoded(&enc)?;
        let lex = &self.spec.lexicon;
        let mut out = s.clone();
        for (i, tok) in out.tokens.iter_mut().enumerate() {
            if let Some(u) = &p.upos {
                tok.upos = lex.upos.name(u[i]).unwrap_or_default().into();
            }
            if let Some(x) = &p.xpos {
                tok.xpos = lex.xpos.name(x[i]).unwrap_or_default().into();
            }
            if let Some(f) = &p.feats {
                let mut set = MorphFeatureSet::new();
                for (a, v) in decode_feats(&f[i]) {
                    let attr = &self.spec.schema.attributes[a].0;
                    if let Some(val) = self.spec.schema.value_name(a, v) {
                        set.insert(attr.clone(), val.into());
                    }
                }
                tok.feats = set;
            }
            if let Some(l) = &p.lemmas {
                let lemma: String = crate::vocab::decode_chars(lex, &l[i]);
                tok.lemma = if lemma.is_empty() { tok.form.clone() } else { lemma };
            }
            if let (Some(h), Some(d)) = (&p.heads, &p.deprels) {
                tok.head = Some(h[i]);
                tok.deprel = lex.deprel.name(d[i]).unwrap_or("dep").into();
            }
        }
        Ok((out, p))
    }

    pub fn predict(&self, tb: &Treebank) -> Result<Treebank> {
        let sentences = tb
            .sentences
            .iter()
            .map(|s| self.predict_sentence(s).map(|(s, _)| s))
            .collect::<Result<_>>()?;
        Ok(Treebank { sentences })
    }

    /// Fraction of sentences whose greedy (argmax) decoding has a cycle.
    pub fn cycle_rate(&self, tb: &Treebank) -> Result<f64> {
        if tb.is_empty() || !self.spec.tasks.parse {
            return Ok(0.0);
        }
        let mut cyclic = 0;
        for s in &tb.sentences {
            let p = self.predict_encoded(&self.encode(s))?;
            if let Some(a) = p.adjacency {
                if greedy_decode(&a, s.len() + 1).1 {
                    cyclic += 1;
                }
            }
        }
        Ok(cyclic as f64 / tb.len() as f64)
    }
}
