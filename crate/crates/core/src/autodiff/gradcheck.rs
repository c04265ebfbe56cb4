use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index::sample;

use super::params::{Gradients, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Gradients with magnitude below this are compared in absolute terms
    /// scaled by it.
    pub floor: f64,
    /// Coordinates sampled per parameter tensor (all when smaller).
    pub max_coords: usize,
    /// Seed of the tape stream; every evaluation replays the same noise.
    pub seed: u64,
    pub train: bool,
    /// Operation whose backward rule is sign-flipped in the analytic pass.
    pub fault: Option<&'static str>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            floor: 1e-3,
            max_coords: 40,
            seed: 0,
            train: false,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(|analytic|, |numeric|, floor)
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub coords_checked: usize,
}

fn eval<F>(params: &ParamStore<f64>, f: &F, opts: &GradCheckOptions) -> Result<f64>
where
    F: for<'a> Fn(&mut Tape<'a, f64>) -> Result<Var>,
{
    let mut tape = Tape::new(params, opts.train, rng::stream(opts.seed, "gradcheck", &[]));
    let out = f(&mut tape)?;
    Ok(tape.scalar(out))
}

/// Compares tape gradients of a scalar function of `params` with central
/// finite differences.
pub fn grad_check<F>(params: &ParamStore<f64>, f: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Tape<'a, f64>) -> Result<Var>,
{
    let mut analytic = Gradients::zeros_like(params);
    {
        let mut tape = Tape::new(params, opts.train, rng::stream(opts.seed, "gradcheck", &[]));
        if let Some(op) = opts.fault {
            tape.inject_sign_flip(op);
        }
        let out = f(&mut tape)?;
        tape.backward(out)?;
        tape.accumulate_param_grads(&mut analytic, 1.0);
    }
    let mut work = params.clone();
    let mut pick = rng::stream(opts.seed, "gradcheck-coords", &[]);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        coords_checked: 0,
    };
    for id in params.ids() {
        let len = params.get(id).len();
        let coords: Vec<usize> = if len <= opts.max_coords {
            (0..len).collect()
        } else {
            sample(&mut pick, len, opts.max_coords).into_vec()
        };
        for i in coords {
            let orig = params.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + opts.step;
            let plus = eval(&work, &f, opts)?;
            work.get_mut(id).data_mut()[i] = orig - opts.step;
            let minus = eval(&work, &f, opts)?;
            work.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.get(id)[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.floor);
            report.coords_checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst_param = Some(params.name(id).to_string());
            }
        }
    }
    Ok(report)
}
