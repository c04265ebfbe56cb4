//! Word representations and sentence-level features.
//!
//! A word is the concatenation of a dense transform of its (fixed or
//! trainable) word vector and a character-level embedding from a dilated
//! CNN with global max pooling. A biLSTM over the sentence, with a trainable
//! ROOT position in front, produces one feature row per position.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Regularized, Tape, Var};
use crate::config::{ModelConfig, RootPlacement};
use crate::error::{Error, Result};
use crate::layers::{Activation, BiLstm, ConvStack, Dense};
use crate::rng::Rng;
use crate::tensor::Real;
use crate::vocab::{EmbeddingMatrix, EncodedSentence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    /// Present when words use a trainable table instead of fixed vectors.
    pub word_table: Option<ParamId>,
    pub word_transform: Dense,
    pub char_table: ParamId,
    pub char_convs: ConvStack,
    pub root: ParamId,
    pub root_placement: RootPlacement,
    pub lstm: BiLstm,
    pub gaussian_dropout: f64,
    pub gaussian_noise: f64,
}

impl Encoder {
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        cfg: &ModelConfig,
        emb: &EmbeddingMatrix,
        n_chars: usize,
        rng: &mut Rng,
    ) -> Self {
        let reg = &cfg.regularization;
        let (word_table, d_ext) = if emb.trainable {
            let id = params.add_normal(
                "encoder.word_table",
                &[emb.len(), cfg.trainable_word_dim],
                1.0,
                Regularized::Embedding,
                rng,
            );
            (Some(id), cfg.trainable_word_dim)
        } else {
            (None, emb.dim)
        };
        let word_transform = Dense::new(
            params,
            "encoder.word_transform",
            d_ext,
            cfg.word_dim,
            Activation::Tanh,
            reg.dense_dropout,
            rng,
        );
        let char_table = params.add_normal(
            "encoder.char_table",
            &[n_chars, cfg.char_emb_dim],
            1.0,
            Regularized::Embedding,
            rng,
        );
        let char_convs = ConvStack::new(params, "encoder.char_conv", cfg.char_emb_dim, &cfg.char_convs, rng);
        let root_dim = match cfg.root {
            RootPlacement::Input => cfg.concat_dim(),
            RootPlacement::Feature => cfg.feature_dim(),
        };
        let root = params.add_normal("encoder.root", &[1, root_dim], 1.0, Regularized::Embedding, rng);
        let lstm = BiLstm::new(
            params,
            "encoder.lstm",
            cfg.concat_dim(),
            cfg.lstm_hidden,
            cfg.lstm_layers,
            reg,
            rng,
        );
        Encoder {
            word_table,
            word_transform,
            char_table,
            char_convs,
            root,
            root_placement: cfg.root,
            lstm,
            gaussian_dropout: reg.gaussian_dropout_rate,
            gaussian_noise: reg.gaussian_noise_std,
        }
    }

    /// n × word_dim. Fixed vectors enter as constants and never get gradients.
    pub fn embed_word_level<T: Real>(
        &self,
        tape: &mut Tape<'_, T>,
        s: &EncodedSentence,
        emb: &EmbeddingMatrix,
    ) -> Result<Var> {
        let x = match self.word_table {
            Some(table) => {
                let t = tape.param(table);
                let rows: Vec<usize> = s.word_rows.iter().map(|r| r.unwrap_or(0)).collect();
                tape.gather_rows(t, &rows)?
            }
            None => {
                let d = emb.dim;
                let mut data = Vec::with_capacity(s.len() * d);
                for r in &s.word_rows {
                    let v = match r {
                        Some(r) => &emb.rows[r * d..(r + 1) * d],
                        None => emb.unknown.as_slice(),
                    };
                    data.extend(v.iter().map(|&x| T::from_f64(x as f64)));
                }
                tape.constant(s.len(), d, data)
            }
        };
        self.word_transform.forward(tape, x)
    }

    /// 1 × char_out for one `[BOW, .., EOW]` sequence.
    pub fn embed_char_level<T: Real>(&self, tape: &mut Tape<'_, T>, chars: &[usize]) -> Result<Var> {
        let table = tape.param(self.char_table);
        let x = tape.gather_rows(table, chars)?;
        let h = self.char_convs.forward(tape, x)?;
        tape.global_max_pool(h)
    }

    /// (n+1) × 2·hidden feature matrix; row 0 is ROOT.
    pub fn encode<T: Real>(&self, tape: &mut Tape<'_, T>, s: &EncodedSentence, emb: &EmbeddingMatrix) -> Result<Var> {
        if s.is_empty() {
            return Err(Error::InvalidInput("cannot encode an empty sentence".into()));
        }
        let words = self.embed_word_level(tape, s, emb)?;
        let mut chars = Vec::with_capacity(s.len());
        for c in &s.chars {
            chars.push(self.embed_char_level(tape, c)?);
        }
        let chars = tape.concat_rows(&chars)?;
        let x = tape.concat_cols(&[words, chars])?;
        let x = tape.gaussian_dropout(x, self.gaussian_dropout)?;
        let x = tape.gaussian_noise(x, self.gaussian_noise)?;
        let root = tape.param(self.root);
        match self.root_placement {
            RootPlacement::Input => {
                let x = tape.concat_rows(&[root, x])?;
                self.lstm.forward(tape, x)
            }
            RootPlacement::Feature => {
                let h = self.lstm.forward(tape, x)?;
                tape.concat_rows(&[root, h])
            }
        }
    }
}
