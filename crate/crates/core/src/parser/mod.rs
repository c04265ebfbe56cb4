//! Graph-based dependency parsing.
//!
//! Arc scores are dot products of dependent and head projections of the
//! sentence features; a row softmax turns them into the adjacency matrix A,
//! where row i is the head distribution of token i and index 0 is ROOT.
//! Training adds the cycle penalty `Σ_{k=1..K} tr(A′ᵏ)` (A′ = A with the ROOT
//! row zeroed) to the cross-entropy of the gold heads. Labels are predicted
//! from the dependent vector and the A-weighted average of head vectors.

mod cle;

pub use cle::{chu_liu_edmonds, max_arborescence, ArcWeights};

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::conllu::check_heads;
use crate::error::Result;
use crate::layers::{Activation, Dense};
use crate::rng::Rng;
use crate::tensor::Real;

/// Head and dependent projections for arc scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcScorer {
    pub head: Dense,
    pub dep: Dense,
}

impl ArcScorer {
    pub fn new<T: Real>(params: &mut ParamStore<T>, d_in: usize, dim: usize, dropout: f64, rng: &mut Rng) -> Self {
        ArcScorer {
            head: Dense::new(params, "arc.head", d_in, dim, Activation::Tanh, dropout, rng),
            dep: Dense::new(params, "arc.dep", d_in, dim, Activation::Tanh, dropout, rng),
        }
    }

    /// Row-stochastic (n+1)×(n+1) adjacency matrix; the diagonal is not masked.
    pub fn score_arcs<T: Real>(&self, tape: &mut Tape<'_, T>, features: Var) -> Result<Var> {
        let h = self.head.forward(tape, features)?;
        let d = self.dep.forward(tape, features)?;
        let s = tape.matmul_nt(d, h)?;
        Ok(tape.softmax_rows(s))
    }
}

/// The two components of the arc loss.
#[derive(Debug, Clone, Copy)]
pub struct ArcLoss {
    pub cross_entropy: Var,
    pub cycle: Option<Var>,
}

/// Mean cross-entropy of gold heads over rows 1..n, plus the cycle penalty
/// of order `k` when `k > 0`.
pub fn arc_loss<T: Real>(tape: &mut Tape<'_, T>, a: Var, gold_heads: &[usize], k: usize) -> Result<ArcLoss> {
    let n1 = tape.shape(a).0;
    let n = n1 - 1;
    let mut targets = Vec::with_capacity(n1);
    targets.push(0);
    targets.extend_from_slice(gold_heads);
    let w = T::one() / T::from_f64(n as f64);
    let mut weights = vec![w; n1];
    weights[0] = T::zero();
    let ce = tape.cross_entropy_rows(a, &targets, &weights)?;
    let cycle = if k > 0 { Some(cycle_penalty(tape, a, k)?) } else { None };
    Ok(ArcLoss {
        cross_entropy: ce,
        cycle,
    })
}

/// `Σ_{k=1..K} tr(A′ᵏ)` with the ROOT row of A zeroed.
pub fn cycle_penalty<T: Real>(tape: &mut Tape<'_, T>, a: Var, k: usize) -> Result<Var> {
    let n1 = tape.shape(a).0;
    let mut mask = vec![T::one(); n1 * n1];
    mask[..n1].iter_mut().for_each(|x| *x = T::zero());
    let m = tape.constant(n1, n1, mask);
    let masked = tape.mul(a, m)?;
    tape.trace_powers(masked, k)
}

/// Label classifier over `[dependent vector; A-weighted head vector]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeler {
    pub head: Dense,
    pub dep: Dense,
    pub output: Dense,
}

impl Labeler {
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        d_in: usize,
        dim: usize,
        labels: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        Labeler {
            head: Dense::new(params, "label.head", d_in, dim, Activation::Tanh, dropout, rng),
            dep: Dense::new(params, "label.dep", d_in, dim, Activation::Tanh, dropout, rng),
            output: Dense::new(params, "label.out", 2 * dim, labels, Activation::Softmax, dropout, rng),
        }
    }

    /// (n+1) × |labels| distributions. Both training and inference use the
    /// soft head average, so gradients reach the arc scorer through A.
    pub fn label_arcs<T: Real>(&self, tape: &mut Tape<'_, T>, features: Var, a: Var) -> Result<Var> {
        let h = self.head.forward(tape, features)?;
        let d = self.dep.forward(tape, features)?;
        let soft = tape.matmul(a, h)?;
        let x = tape.concat_cols(&[d, soft])?;
        self.output.forward(tape, x)
    }
}

/// Per-row argmax heads for tokens 1..n of an (n+1)² row-major matrix, and
/// whether the resulting graph has a cycle (self-loops included).
pub fn greedy_decode<T: Real>(a: &[T], n1: usize) -> (Vec<usize>, bool) {
    let heads: Vec<usize> = (1..n1)
        .map(|i| crate::heads::argmax(&a[i * n1..(i + 1) * n1]))
        .collect();
    let self_loop = heads.iter().enumerate().any(|(i, &h)| h == i + 1);
    let cyclic = self_loop || !check_heads(&heads).cycle.is_empty();
    (heads, cyclic)
}

/// Log-probability weights with self-loops and arcs into ROOT forbidden.
pub fn log_weights<T: Real>(a: &[T], n1: usize) -> ArcWeights {
    let w = a
        .iter()
        .map(|&p| {
            let p = p.as_f64();
            if p > 0.0 {
                Float::ln(p)
            } else {
                // keep zero-probability arcs usable but worst
                -1e30
            }
        })
        .collect();
    let mut w = ArcWeights::new(n1, w);
    w.mask_structural();
    w
}

/// Single-rooted maximum-likelihood tree from an adjacency matrix.
pub fn decode_tree<T: Real>(a: &[T], n1: usize) -> Vec<usize> {
    let w = log_weights(a, n1);
    chu_liu_edmonds(&w).expect("complete graph always has an arborescence")
}

/// Fraction of matrices whose greedy decoding contains a cycle.
pub fn cycle_rate<T: Real>(matrices: &[(Vec<T>, usize)]) -> f64 {
    if matrices.is_empty() {
        return 0.0;
    }
    let cyclic = matrices.iter().filter(|(a, n1)| greedy_decode(a, *n1).1).count();
    cyclic as f64 / matrices.len() as f64
}
