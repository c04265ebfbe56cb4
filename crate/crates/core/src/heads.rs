//! Tagging, morphological feature and lemma heads on top of the sentence
//! features.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Regularized, Tape, Var};
use crate::config::{ConvSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::{Activation, ConvStack, Dense};
use crate::rng::Rng;
use crate::tensor::Real;
use crate::vocab::{BOW, EOW, NA, PAD, UNK};

/// One hidden tanh layer followed by a softmax classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerHead {
    pub hidden: Dense,
    pub output: Dense,
}

impl TaggerHead {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        hidden: usize,
        classes: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        TaggerHead {
            hidden: Dense::new(params, &alloc::format!("{}.hidden", name), d_in, hidden, Activation::Tanh, dropout, rng),
            output: Dense::new(params, &alloc::format!("{}.out", name), hidden, classes, Activation::Softmax, dropout, rng),
        }
    }

    /// Per-word class distributions for the n word rows (ROOT excluded).
    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, words: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, words)?;
        self.output.forward(tape, h)
    }
}

/// One classifier per feature attribute. The hidden layers of all attributes
/// are computed by a single matrix product and then split, which is the same
/// function as independent per-attribute layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatsHead {
    pub hidden: Dense,
    pub hidden_dim: usize,
    pub outputs: Vec<Dense>,
}

impl FeatsHead {
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        d_in: usize,
        hidden: usize,
        sizes: &[usize],
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let hidden_layer = Dense::new(
            params,
            "feats.hidden",
            d_in,
            hidden * sizes.len(),
            Activation::Tanh,
            dropout,
            rng,
        );
        let outputs = sizes
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                Dense::new(params, &alloc::format!("feats.out.{}", i), hidden, k, Activation::Softmax, dropout, rng)
            })
            .collect();
        FeatsHead {
            hidden: hidden_layer,
            hidden_dim: hidden,
            outputs,
        }
    }

    /// One n × |values| distribution per attribute.
    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, words: Var) -> Result<Vec<Var>> {
        let h = self.hidden.forward(tape, words)?;
        let mut out = Vec::with_capacity(self.outputs.len());
        for (i, o) in self.outputs.iter().enumerate() {
            let hi = tape.slice_cols(h, i * self.hidden_dim, self.hidden_dim)?;
            out.push(o.forward(tape, hi)?);
        }
        Ok(out)
    }
}

/// Character CNN that maps a padded word to its lemma position by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmatizerHead {
    pub reduce: Dense,
    pub char_table: ParamId,
    /// Dilated ReLU layers followed by a kernel-1 linear output layer.
    pub convs: ConvStack,
    pub slack: usize,
}

impl LemmatizerHead {
    pub fn new<T: Real>(params: &mut ParamStore<T>, cfg: &ModelConfig, n_chars: usize, rng: &mut Rng) -> Self {
        let reduce = Dense::new(
            params,
            "lemma.reduce",
            cfg.feature_dim(),
            cfg.lemma_feature_dim,
            Activation::Tanh,
            cfg.regularization.dense_dropout,
            rng,
        );
        let char_table = params.add_normal(
            "lemma.char_table",
            &[n_chars, cfg.lemma_char_dim],
            0.1,
            Regularized::Embedding,
            rng,
        );
        let mut convs = ConvStack::new(
            params,
            "lemma.conv",
            cfg.lemma_char_dim + cfg.lemma_feature_dim,
            &cfg.lemma_convs,
            rng,
        );
        let out = ConvSpec {
            filters: n_chars,
            kernel: 1,
            dilation: 1,
        };
        let last = cfg.lemma_convs.len();
        if last == 0 {
            let l = ConvStack::layer(params, "lemma.conv.out", cfg.lemma_char_dim + cfg.lemma_feature_dim, out, false, rng);
            convs.layers.push(l);
        } else {
            convs.push(params, "lemma.conv.out", out, false, rng);
        }
        LemmatizerHead {
            reduce,
            char_table,
            convs,
            slack: cfg.lemma_slack,
        }
    }

    /// n × reduced feature rows, shared by all characters of a word.
    pub fn reduce_features<T: Real>(&self, tape: &mut Tape<'_, T>, words: Var) -> Result<Var> {
        self.reduce.forward(tape, words)
    }

    /// Per-position character distributions for a padded input sequence.
    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, padded: &[usize], reduced: Var, word: usize) -> Result<Var> {
        let table = tape.param(self.char_table);
        let chars = tape.gather_rows(table, padded)?;
        let feat = tape.row(reduced, word)?;
        let rep = tape.gather_rows(feat, &vec![0; padded.len()])?;
        let x = tape.concat_cols(&[chars, rep])?;
        let logits = self.convs.forward(tape, x)?;
        Ok(tape.softmax_rows(logits))
    }
}

/// `[BOW, chars, EOW]` right-padded with `slack` PAD symbols.
pub fn pad_lemma_input(wrapped_form: &[usize], slack: usize) -> Vec<usize> {
    let mut v = wrapped_form.to_vec();
    v.extend(core::iter::repeat_n(PAD, slack));
    v
}

/// Target `[BOW, lemma, EOW, PAD..]` aligned left to `len` positions.
pub fn lemma_target(wrapped_lemma: &[usize], len: usize) -> Result<Vec<usize>> {
    if wrapped_lemma.len() > len {
        return Err(Error::InvalidInput(alloc::format!(
            "lemma needs {} positions but the padded word has {}; increase lemma_slack",
            wrapped_lemma.len(),
            len
        )));
    }
    let mut v = wrapped_lemma.to_vec();
    v.resize(len, PAD);
    Ok(v)
}

/// Greedy decode: reads characters until the first EOW, skipping reserved
/// symbols, and never emits more than `len − 2` characters so that the
/// result always fits its padded input.
pub fn decode_lemma(argmax: &[usize]) -> Vec<usize> {
    let cap = argmax.len().saturating_sub(2);
    let mut out = Vec::new();
    for &c in argmax {
        if c == EOW || out.len() == cap {
            break;
        }
        if c == PAD || c == BOW || c == UNK {
            continue;
        }
        out.push(c);
    }
    out
}

/// Index of the largest entry; ties go to the lower index.
pub fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Drops NA attributes from per-attribute predictions.
pub fn decode_feats(pred: &[usize]) -> Vec<(usize, usize)> {
    pred.iter()
        .enumerate()
        .filter(|(_, &v)| v != NA)
        .map(|(a, &v)| (a, v))
        .collect()
}

/// Mean cross-entropy over the rows that have a target; `None` if none do.
pub fn mean_cross_entropy<T: Real>(tape: &mut Tape<'_, T>, probs: Var, targets: &[Option<usize>]) -> Result<Option<Var>> {
    let count = targets.iter().filter(|t| t.is_some()).count();
    if count == 0 {
        return Ok(None);
    }
    let w = T::one() / T::from_f64(count as f64);
    let idx: Vec<usize> = targets.iter().map(|t| t.unwrap_or(0)).collect();
    let weights: Vec<T> = targets.iter().map(|t| if t.is_some() { w } else { T::zero() }).collect();
    tape.cross_entropy_rows(probs, &idx, &weights).map(Some)
}

/// Mean cross-entropy over all (word, attribute) pairs with a target.
pub fn feats_loss<T: Real>(tape: &mut Tape<'_, T>, dists: &[Var], targets: &[Vec<Option<usize>>]) -> Result<Option<Var>> {
    let count: usize = targets.iter().flatten().filter(|t| t.is_some()).count();
    if count == 0 || dists.is_empty() {
        return Ok(None);
    }
    let w = T::one() / T::from_f64(count as f64);
    let mut parts = Vec::with_capacity(dists.len());
    for (a, &d) in dists.iter().enumerate() {
        let col: Vec<Option<usize>> = targets.iter().map(|t| t[a]).collect();
        let idx: Vec<usize> = col.iter().map(|t| t.unwrap_or(0)).collect();
        let weights: Vec<T> = col.iter().map(|t| if t.is_some() { w } else { T::zero() }).collect();
        parts.push(tape.cross_entropy_rows(d, &idx, &weights)?);
    }
    let cat = tape.concat_rows(&parts)?;
    Ok(Some(tape.sum(cat)))
}

/// Mean cross-entropy over non-PAD target positions of all words.
pub fn lemma_loss<T: Real>(tape: &mut Tape<'_, T>, dists: &[Var], targets: &[Vec<usize>]) -> Result<Option<Var>> {
    let count: usize = targets.iter().flatten().filter(|&&c| c != PAD).count();
    if count == 0 {
        return Ok(None);
    }
    let w = T::one() / T::from_f64(count as f64);
    let mut parts = Vec::with_capacity(dists.len());
    for (&d, t) in dists.iter().zip(targets) {
        if t.is_empty() {
            continue;
        }
        let weights: Vec<T> = t.iter().map(|&c| if c == PAD { T::zero() } else { w }).collect();
        parts.push(tape.cross_entropy_rows(d, t, &weights)?);
    }
    let cat = tape.concat_rows(&parts)?;
    Ok(Some(tape.sum(cat)))
}
