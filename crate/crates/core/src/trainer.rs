//! Joint training: batching, weighting, the plateau schedule, fine-tuning
//! and self-training.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, Gradients, Tape};
use crate::config::{LossWeights, TrainConfig};
use crate::conllu::Treebank;
use crate::error::{Error, Result};
use crate::eval::attachment_scores;
use crate::model::{JointModel, TaskLosses};
use crate::rng::{self, derive_seed};
use crate::tensor::Real;
use crate::vocab::EncodedSentence;

/// Sentences sorted by length and packed into batches of at most
/// `batch_words` tokens; batch order shuffled per `(seed, epoch)`.
/// Returns sentence indices.
pub fn make_batches(lengths: &[usize], batch_words: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    let mut batches = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut words = 0;
    for i in order {
        if !cur.is_empty() && words + lengths[i] > batch_words {
            batches.push(core::mem::take(&mut cur));
            words = 0;
        }
        cur.push(i);
        words += lengths[i];
    }
    if !cur.is_empty() {
        batches.push(cur);
    }
    batches.shuffle(&mut rng::stream(seed, "batches", &[epoch]));
    batches
}

/// `max(ln n, ln 2)`.
pub fn sentence_weight(n: usize) -> f64 {
    num_traits::Float::ln(n.max(2) as f64)
}

/// `Σ weight·loss` over the tasks present, plus an L2 term.
pub fn joint_loss(losses: &TaskLosses<f64>, weights: &LossWeights, l2: f64) -> f64 {
    losses.weighted(weights).iter().map(|(w, v)| w * v).sum::<f64>() + l2
}

/// Progress of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// Phase label: "train", "fine-tune" or "silver".
    pub phase: String,
    /// 1-based.
    pub epoch: usize,
    /// Mean weighted batch loss, without L2.
    pub loss: f64,
    /// Mean unweighted per-task losses over sentences.
    pub tasks: TaskLosses<f64>,
    pub l2: f64,
    pub dev_uas: Option<f64>,
    pub dev_las: Option<f64>,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Eval-mode joint loss on the probe sentences, after this epoch.
    pub probe_loss: Option<f64>,
    /// Eval-mode cycle penalty on the probe sentences, after this epoch.
    pub probe_cycle: Option<f64>,
    pub lr_reduced: bool,
    pub stopped: bool,
}

/// Trained model with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: JointModel<T>,
    pub optimizer: Adam<T>,
    pub epoch: usize,
    pub best_dev_las: Option<f64>,
    pub config: TrainConfig,
}

/// Epochs of probe loss averaged into the plateau score when there is no
/// dev set.
pub const LOSS_SMOOTHING: usize = 10;

/// Number of leading training sentences probed after every epoch.
pub const PROBE_SENTENCES: usize = 16;

fn adam_config(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
    }
}

/// Eval-mode statistics on a fixed set of training sentences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    /// Mean sentence-weighted joint loss without L2.
    pub loss: f64,
    /// Mean cycle penalty `Σ_{k≤K} tr(A′ᵏ)`.
    pub cycle: Option<f64>,
}

/// Runs the sentences with dropout and noise off. `loss_k` is the cycle
/// power used inside the arc loss (0 for none), `cycle_k` the one reported.
pub fn probe<T: Real>(
    model: &JointModel<T>,
    sents: &[EncodedSentence],
    weights: &LossWeights,
    loss_k: usize,
    cycle_k: usize,
) -> Result<Option<Probe>> {
    if sents.is_empty() {
        return Ok(None);
    }
    let parse = model.spec.tasks.parse && cycle_k > 0;
    let (mut loss, mut cycle) = (0.0, 0.0);
    for s in sents {
        let mut tape = Tape::new(&model.params, false, rng::stream(0, "probe", &[]));
        let out = model.forward(&mut tape, s)?;
        let values = model.task_losses(&mut tape, s, &out, loss_k)?.map(|v| tape.scalar(v).as_f64());
        loss += sentence_weight(s.len()) * joint_loss(&values, weights, 0.0);
        if parse {
            let a = out.arcs.expect("parse task active");
            let c = crate::parser::cycle_penalty(&mut tape, a, cycle_k)?;
            cycle += tape.scalar(c).as_f64();
        }
    }
    let n = sents.len() as f64;
    Ok(Some(Probe {
        loss: loss / n,
        cycle: parse.then(|| cycle / n),
    }))
}

struct Plateau {
    best: Option<f64>,
    since: usize,
    reductions: usize,
}

impl Plateau {
    /// Records a score (higher is better); returns `(improved, reduce_lr, stop)`.
    fn observe(&mut self, score: f64, cfg: &TrainConfig) -> (bool, bool, bool) {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.since = 0;
            return (true, false, false);
        }
        self.since += 1;
        if self.since < cfg.plateau_patience {
            return (false, false, false);
        }
        self.since = 0;
        if self.reductions < cfg.lr_reductions_max {
            self.reductions += 1;
            (false, true, false)
        } else {
            (false, false, true)
        }
    }
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    phase: &'static str,
    dev: Option<&'a Treebank>,
}

impl Run<'_> {
    fn train<T: Real>(
        &self,
        mut model: JointModel<T>,
        mut adam: Adam<T>,
        data: &Treebank,
        observer: &mut dyn FnMut(&EpochLog),
    ) -> Result<Checkpoint<T>> {
        let cfg = self.cfg;
        if data.is_empty() {
            return Err(Error::InvalidInput(format!("{}: training treebank is empty", self.phase)));
        }
        let batch_words = cfg.batch_words_for(data.word_count());
        if batch_words == 0 {
            return Err(Error::InvalidInput("batch_words must be at least 1".into()));
        }
        let encoded: Vec<EncodedSentence> = data.sentences.iter().map(|s| model.encode(s)).collect();
        let lengths: Vec<usize> = encoded.iter().map(|s| s.len()).collect();
        let probe_set = &encoded[..encoded.len().min(PROBE_SENTENCES)];
        let weights = model.spec.tasks.effective_weights(&cfg.loss_weights);
        let k = if cfg.cycle_loss { cfg.cycle_k } else { 0 };
        let probe_k = if cfg.cycle_k > 0 { cfg.cycle_k } else { 3 };
        let l2 = model.l2_rates();
        let phase_seed = derive_seed(cfg.seed, self.phase, &[]);
        let mut grads = Gradients::zeros_like(&model.params);
        let mut plateau = Plateau {
            best: None,
            since: 0,
            reductions: 0,
        };
        let mut best: Option<(JointModel<T>, Adam<T>, usize, f64)> = None;
        let mut recent: Vec<f64> = Vec::new();
        let mut epoch = 0;
        while epoch < cfg.max_epochs {
            epoch += 1;
            let lr = adam.lr();
            let batches = make_batches(&lengths, batch_words, phase_seed, epoch as u64);
            let mut loss_sum = 0.0;
            let mut task_sum = TaskSums::default();
            for batch in &batches {
                grads.clear();
                let scale = 1.0 / batch.len() as f64;
                let mut batch_loss = 0.0;
                for &i in batch {
                    let s = &encoded[i];
                    let w = sentence_weight(s.len());
                    let rng = rng::stream(phase_seed, "dropout", &[epoch as u64, i as u64]);
                    let mut tape = Tape::new(&model.params, true, rng);
                    let (total, values) = model.sentence_loss(&mut tape, s, &weights, k)?;
                    task_sum.add(&values);
                    if let Some(total) = total {
                        batch_loss += w * tape.scalar(total).as_f64();
                        tape.backward(total)?;
                        tape.accumulate_param_grads(&mut grads, T::from_f64(w * scale));
                    }
                }
                loss_sum += batch_loss * scale;
                adam.step(&mut model.params, &grads, &l2);
            }
            let loss = loss_sum / batches.len() as f64;
            let (dev_uas, dev_las) = match self.dev {
                Some(dev) if !dev.is_empty() && model.spec.tasks.parse => {
                    let (u, l) = attachment_scores(dev, &model.predict(dev)?)?;
                    (Some(u), Some(l))
                }
                _ => (None, None),
            };
            let probed = probe(&model, probe_set, &weights, k, probe_k)?;
            let score = match dev_las {
                Some(l) => l,
                None => {
                    recent.push(probed.map_or(loss, |p| p.loss));
                    let tail = &recent[recent.len().saturating_sub(LOSS_SMOOTHING)..];
                    -tail.iter().sum::<f64>() / tail.len() as f64
                }
            };
            let (improved, reduce, stop) = plateau.observe(score, cfg);
            if improved && dev_las.is_some() {
                best = Some((model.clone(), adam.clone(), epoch, score));
            }
            if reduce {
                adam.set_lr(adam.lr() / cfg.lr_factor);
            }
            let log = EpochLog {
                phase: self.phase.into(),
                epoch,
                loss,
                tasks: task_sum.mean(),
                l2: model.l2_penalty(),
                dev_uas,
                dev_las,
                lr,
                probe_loss: probed.map(|p| p.loss),
                probe_cycle: probed.and_then(|p| p.cycle),
                lr_reduced: reduce,
                stopped: stop,
            };
            observer(&log);
            if stop {
                break;
            }
        }
        Ok(match best {
            Some((model, optimizer, epoch, las)) => Checkpoint {
                model,
                optimizer,
                epoch,
                best_dev_las: Some(las),
                config: cfg.clone(),
            },
            None => Checkpoint {
                model,
                optimizer: adam,
                epoch,
                best_dev_las: None,
                config: cfg.clone(),
            },
        })
    }
}

#[derive(Default)]
struct TaskSums {
    sums: [f64; 7],
    counts: [usize; 7],
}

impl TaskSums {
    fn fields(l: &TaskLosses<f64>) -> [Option<f64>; 7] {
        [l.upos, l.xpos, l.feats, l.lemma, l.arc, l.label, l.cycle]
    }

    fn add(&mut self, l: &TaskLosses<f64>) {
        for (j, v) in Self::fields(l).into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[j] += v;
                self.counts[j] += 1;
            }
        }
    }

    fn mean(&self) -> TaskLosses<f64> {
        let m = |j: usize| (self.counts[j] > 0).then(|| self.sums[j] / self.counts[j] as f64);
        TaskLosses {
            upos: m(0),
            xpos: m(1),
            feats: m(2),
            lemma: m(3),
            arc: m(4),
            label: m(5),
            cycle: m(6),
        }
    }
}

/// Trains `model` from its current parameters with a fresh optimizer. With
/// a dev set the best-dev-LAS checkpoint is returned, otherwise the last.
pub fn fit<T: Real>(
    model: JointModel<T>,
    train: &Treebank,
    dev: Option<&Treebank>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochLog),
) -> Result<Checkpoint<T>> {
    let adam = Adam::new(adam_config(cfg), &model.params);
    Run {
        cfg,
        phase: "train",
        dev,
    }
    .train(model, adam, train, observer)
}

/// Continues training a checkpoint on `tb` with a fresh optimizer and
/// schedule. Zero epochs return the checkpoint unchanged.
pub fn fine_tune<T: Real>(
    ckpt: &Checkpoint<T>,
    tb: &Treebank,
    dev: Option<&Treebank>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochLog),
) -> Result<Checkpoint<T>> {
    if cfg.max_epochs == 0 {
        return Ok(ckpt.clone());
    }
    let adam = Adam::new(adam_config(cfg), &ckpt.model.params);
    Run {
        cfg,
        phase: "fine-tune",
        dev,
    }
    .train(ckpt.model.clone(), adam, tb, observer)
}

/// Result of the self-training pipeline.
#[derive(Debug, Clone)]
pub struct SelfTrained<T> {
    pub checkpoint: Checkpoint<T>,
    /// Automatically annotated raw corpus.
    pub silver: Treebank,
}

/// Annotates `raw` with `model`, trains a freshly initialized copy of the
/// architecture for one epoch on that silver data, then fine-tunes it on
/// `gold`.
pub fn self_train<T: Real>(
    model: &JointModel<T>,
    gold: &Treebank,
    raw: &Treebank,
    dev: Option<&Treebank>,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochLog),
) -> Result<SelfTrained<T>> {
    if raw.is_empty() {
        return Err(Error::InvalidInput("raw corpus is empty".into()));
    }
    let silver = model.predict(raw)?;
    let fresh = JointModel::new(model.spec.clone());
    let silver_cfg = TrainConfig {
        max_epochs: 1,
        ..cfg.clone()
    };
    let adam = Adam::new(adam_config(cfg), &fresh.params);
    let pre = Run {
        cfg: &silver_cfg,
        phase: "silver",
        dev,
    }
    .train(fresh, adam, &silver, observer)?;
    let checkpoint = fine_tune(&pre, gold, dev, cfg, observer)?;
    Ok(SelfTrained { checkpoint, silver })
}
