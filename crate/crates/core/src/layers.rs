//! Dense, dilated convolution and biLSTM layers built from tape primitives.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, Regularized, Tape, Var};
use crate::config::ConvSpec;
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Softmax,
    Linear,
}

/// `activation(dropout(x) · W + b)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub activation: Activation,
    pub dropout: f64,
}

impl Dense {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut Rng,
    ) -> Self {
        let w = params.add_glorot(&alloc::format!("{}.w", name), &[d_in, d_out], d_in, d_out, Regularized::None, rng);
        let b = params.add_filled(&alloc::format!("{}.b", name), &[d_out], T::zero(), Regularized::None);
        Dense {
            w,
            b,
            activation,
            dropout,
        }
    }

    /// Output width.
    pub fn d_out<T: Real>(&self, params: &ParamStore<T>) -> usize {
        params.get(self.b).len()
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let x = tape.dropout(x, self.dropout)?;
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let xw = tape.matmul(x, w)?;
        let z = tape.add_row(xw, b)?;
        Ok(match self.activation {
            Activation::Tanh => tape.tanh(z),
            Activation::Softmax => tape.softmax_rows(z),
            Activation::Linear => z,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub spec: ConvSpec,
    pub relu: bool,
}

/// Stack of same-length dilated convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvStack {
    pub layers: Vec<ConvLayer>,
}

impl ConvStack {
    /// Every layer is followed by ReLU.
    pub fn new<T: Real>(params: &mut ParamStore<T>, name: &str, d_in: usize, specs: &[ConvSpec], rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(specs.len());
        let mut cin = d_in;
        for (i, s) in specs.iter().enumerate() {
            layers.push(Self::layer(params, &alloc::format!("{}.{}", name, i), cin, *s, true, rng));
            cin = s.filters;
        }
        ConvStack { layers }
    }

    pub fn layer<T: Real>(
        params: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        spec: ConvSpec,
        relu: bool,
        rng: &mut Rng,
    ) -> ConvLayer {
        let kernel = params.add_glorot(
            &alloc::format!("{}.kernel", name),
            &[spec.kernel, cin, spec.filters],
            spec.kernel * cin,
            spec.kernel * spec.filters,
            Regularized::Network,
            rng,
        );
        let bias = params.add_filled(&alloc::format!("{}.bias", name), &[spec.filters], T::zero(), Regularized::None);
        ConvLayer {
            kernel,
            bias,
            spec,
            relu,
        }
    }

    pub fn push<T: Real>(&mut self, params: &mut ParamStore<T>, name: &str, spec: ConvSpec, relu: bool, rng: &mut Rng) {
        let cin = self.out_dim(params);
        let l = Self::layer(params, name, cin, spec, relu, rng);
        self.layers.push(l);
    }

    pub fn out_dim<T: Real>(&self, params: &ParamStore<T>) -> usize {
        self.layers.last().map(|l| params.get(l.bias).len()).unwrap_or(0)
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let mut h = x;
        for l in &self.layers {
            let k = tape.param(l.kernel);
            let b = tape.param(l.bias);
            let c = tape.dilated_conv1d(h, k, l.spec.kernel, l.spec.dilation)?;
            let z = tape.add_row(c, b)?;
            h = if l.relu { tape.relu(z) } else { z };
        }
        Ok(h)
    }
}

/// One LSTM direction with gates ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<T: Real>(params: &mut ParamStore<T>, name: &str, d_in: usize, hidden: usize, rng: &mut Rng) -> Self {
        let wx = params.add_glorot(&alloc::format!("{}.wx", name), &[d_in, 4 * hidden], d_in, 4 * hidden, Regularized::Network, rng);
        let wh = params.add_orthogonal(&alloc::format!("{}.wh", name), hidden, 4 * hidden, Regularized::Network, rng);
        let b = params.add_filled(&alloc::format!("{}.b", name), &[4 * hidden], T::zero(), Regularized::None);
        for v in &mut params.get_mut(b).data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        LstmCell { wx, wh, b, hidden }
    }

    /// Runs over the rows of `x` (n × d_in), right to left when `reverse`.
    /// Output row t is the hidden state at position t. `recurrent_mask` is
    /// applied to the previous hidden state at every step.
    pub fn run<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var, reverse: bool, recurrent_mask: Option<Vec<T>>) -> Result<Var> {
        let n = tape.shape(x).0;
        let hd = self.hidden;
        let wx = tape.param(self.wx);
        let wh = tape.param(self.wh);
        let b = tape.param(self.b);
        let xw = tape.matmul(x, wx)?;
        let xw = tape.add_row(xw, b)?;
        let mask = recurrent_mask.map(|m| tape.constant(1, hd, m));
        let mut states: Vec<Var> = Vec::with_capacity(n);
        let mut prev: Option<(Var, Var)> = None;
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            let mut z = tape.row(xw, t)?;
            if let Some((h, _)) = prev {
                let h = match mask {
                    Some(m) => tape.mul(h, m)?,
                    None => h,
                };
                let hw = tape.matmul(h, wh)?;
                z = tape.add(z, hw)?;
            }
            let zi = tape.slice_cols(z, 0, hd)?;
            let zf = tape.slice_cols(z, hd, hd)?;
            let zg = tape.slice_cols(z, 2 * hd, hd)?;
            let zo = tape.slice_cols(z, 3 * hd, hd)?;
            let i = tape.sigmoid(zi);
            let g = tape.tanh(zg);
            let o = tape.sigmoid(zo);
            let mut c = tape.mul(i, g)?;
            if let Some((_, c_prev)) = prev {
                let f = tape.sigmoid(zf);
                let fc = tape.mul(f, c_prev)?;
                c = tape.add(c, fc)?;
            }
            let tc = tape.tanh(c);
            let h = tape.mul(o, tc)?;
            states.push(h);
            prev = Some((h, c));
        }
        if reverse {
            states.reverse();
        }
        tape.concat_rows(&states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmLayer {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

/// Stacked bidirectional LSTM. Each layer's output is the per-position
/// concatenation of both directions; at train time Gaussian dropout and
/// Gaussian noise follow every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub layers: Vec<BiLstmLayer>,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub gaussian_dropout: f64,
    pub gaussian_noise: f64,
}

impl BiLstm {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real>(
        params: &mut ParamStore<T>,
        name: &str,
        d_in: usize,
        hidden: usize,
        layers: usize,
        reg: &crate::config::RegularizationConfig,
        rng: &mut Rng,
    ) -> Self {
        let mut out = Vec::with_capacity(layers);
        let mut d = d_in;
        for l in 0..layers {
            let prefix: String = alloc::format!("{}.{}", name, l);
            out.push(BiLstmLayer {
                forward: LstmCell::new(params, &alloc::format!("{}.fw", prefix), d, hidden, rng),
                backward: LstmCell::new(params, &alloc::format!("{}.bw", prefix), d, hidden, rng),
            });
            d = 2 * hidden;
        }
        BiLstm {
            layers: out,
            dropout: reg.lstm_dropout,
            recurrent_dropout: reg.lstm_recurrent_dropout,
            gaussian_dropout: reg.gaussian_dropout_rate,
            gaussian_noise: reg.gaussian_noise_std,
        }
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let mut h = x;
        for layer in &self.layers {
            let inp = tape.dropout(h, self.dropout)?;
            let mf = tape.row_dropout_mask(layer.forward.hidden, self.recurrent_dropout);
            let mb = tape.row_dropout_mask(layer.backward.hidden, self.recurrent_dropout);
            let f = layer.forward.run(tape, inp, false, mf)?;
            let b = layer.backward.run(tape, inp, true, mb)?;
            let cat = tape.concat_cols(&[f, b])?;
            let d = tape.gaussian_dropout(cat, self.gaussian_dropout)?;
            h = tape.gaussian_noise(d, self.gaussian_noise)?;
        }
        Ok(h)
    }
}
