//! Model and training hyperparameters, with full-size defaults and a
//! reduced desk-scale profile.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// One convolution layer: output channels, kernel taps, dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub dilation: usize,
}

const fn conv(filters: usize, dilation: usize) -> ConvSpec {
    ConvSpec {
        filters,
        kernel: 3,
        dilation,
    }
}

/// Where the ROOT representation enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPlacement {
    /// Trainable vector prepended to the biLSTM input.
    Input,
    /// Trainable vector prepended to the biLSTM output.
    Feature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub gaussian_dropout_rate: f64,
    pub gaussian_noise_std: f64,
    pub dense_dropout: f64,
    pub lstm_dropout: f64,
    pub lstm_recurrent_dropout: f64,
    pub l2_network: f64,
    pub l2_embeddings: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig {
            gaussian_dropout_rate: 0.25,
            gaussian_noise_std: 0.2,
            dense_dropout: 0.25,
            lstm_dropout: 0.25,
            lstm_recurrent_dropout: 0.25,
            l2_network: 1e-6,
            l2_embeddings: 1e-5,
        }
    }
}

/// Network dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Dimension of a trainable word table used when no external embedding is given.
    pub trainable_word_dim: usize,
    /// Output of the dense transform of word vectors.
    pub word_dim: usize,
    pub char_emb_dim: usize,
    pub char_convs: Vec<ConvSpec>,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub upos_hidden: usize,
    pub xpos_hidden: usize,
    pub feats_hidden: usize,
    pub lemma_feature_dim: usize,
    pub lemma_char_dim: usize,
    pub lemma_convs: Vec<ConvSpec>,
    pub lemma_slack: usize,
    pub arc_dim: usize,
    pub label_dim: usize,
    pub root: RootPlacement,
    pub regularization: RegularizationConfig,
}

impl ModelConfig {
    /// Full-size dimensions.
    pub fn paper() -> Self {
        ModelConfig {
            trainable_word_dim: 100,
            word_dim: 100,
            char_emb_dim: 64,
            char_convs: vec![conv(512, 1), conv(128, 2), conv(64, 4)],
            lstm_hidden: 512,
            lstm_layers: 2,
            upos_hidden: 64,
            xpos_hidden: 64,
            feats_hidden: 128,
            lemma_feature_dim: 32,
            lemma_char_dim: 256,
            lemma_convs: vec![conv(256, 1), conv(256, 2), conv(256, 4)],
            lemma_slack: 5,
            arc_dim: 512,
            label_dim: 128,
            root: RootPlacement::Input,
            regularization: RegularizationConfig::default(),
        }
    }

    /// Same architecture with small dimensions for laptop-scale runs.
    pub fn desk() -> Self {
        ModelConfig {
            trainable_word_dim: 100,
            word_dim: 32,
            char_emb_dim: 16,
            char_convs: vec![conv(32, 1), conv(32, 2), conv(32, 4)],
            lstm_hidden: 64,
            lstm_layers: 2,
            upos_hidden: 32,
            xpos_hidden: 32,
            feats_hidden: 32,
            lemma_feature_dim: 16,
            lemma_char_dim: 32,
            lemma_convs: vec![conv(32, 1), conv(32, 2), conv(32, 4)],
            lemma_slack: 5,
            arc_dim: 64,
            label_dim: 32,
            root: RootPlacement::Input,
            regularization: RegularizationConfig::default(),
        }
    }

    pub fn char_out_dim(&self) -> usize {
        self.char_convs.last().map(|c| c.filters).unwrap_or(self.char_emb_dim)
    }

    /// Width of the concatenated word representation.
    pub fn concat_dim(&self) -> usize {
        self.word_dim + self.char_out_dim()
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.lstm_hidden
    }
}

/// Per-task loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub upos: f64,
    pub xpos: f64,
    pub feats: f64,
    pub lemma: f64,
    pub arc: f64,
    pub label: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            upos: 0.05,
            xpos: 0.05,
            feats: 0.2,
            lemma: 0.05,
            arc: 0.2,
            label: 0.8,
        }
    }
}

/// Smaller batches for small treebanks: applies when the training set has
/// fewer than `below_words` words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchFallback {
    pub below_words: usize,
    pub batch_words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_weights: LossWeights,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_words: usize,
    pub batch_fallbacks: Vec<BatchFallback>,
    pub max_epochs: usize,
    /// Highest matrix power in the cycle penalty.
    pub cycle_k: usize,
    pub cycle_loss: bool,
    /// Evaluations without improvement before the learning rate is halved.
    pub plateau_patience: usize,
    pub lr_reductions_max: usize,
    pub lr_factor: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn paper() -> Self {
        TrainConfig {
            loss_weights: LossWeights::default(),
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.9,
            eps: 1e-7,
            batch_words: 2500,
            batch_fallbacks: vec![
                BatchFallback {
                    below_words: 25_000,
                    batch_words: 1000,
                },
                BatchFallback {
                    below_words: 2500,
                    batch_words: 75,
                },
            ],
            max_epochs: 400,
            cycle_k: 3,
            cycle_loss: true,
            plateau_patience: 10,
            lr_reductions_max: 2,
            lr_factor: 2.0,
            seed: crate::rng::DEFAULT_SEED,
        }
    }

    /// Batch size for a training set of `words` words: the smallest size
    /// among `batch_words` and the fallbacks that apply.
    pub fn batch_words_for(&self, words: usize) -> usize {
        self.batch_fallbacks
            .iter()
            .filter(|f| words < f.below_words)
            .map(|f| f.batch_words)
            .fold(self.batch_words, usize::min)
    }

    pub fn desk() -> Self {
        TrainConfig {
            batch_words: 500,
            max_epochs: 50,
            ..TrainConfig::paper()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_dimensions() {
        let c = ModelConfig::paper();
        assert_eq!(c.concat_dim(), 164);
        assert_eq!(c.feature_dim(), 1024);
        let w = LossWeights::default();
        let total = w.upos + w.xpos + w.feats + w.lemma + w.arc + w.label;
        assert!((total - 1.35).abs() < 1e-12);
    }

    #[test]
    fn batch_fallbacks() {
        let p = TrainConfig::paper();
        assert_eq!(p.batch_words_for(100_000), 2500);
        assert_eq!(p.batch_words_for(24_999), 1000);
        assert_eq!(p.batch_words_for(2499), 75);
        let d = TrainConfig::desk();
        assert_eq!(d.batch_words_for(9000), 500);
        assert_eq!(d.batch_words_for(120), 75);
    }
}
