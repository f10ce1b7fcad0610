//! Finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::{ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub entries_checked: usize,
}

/// Compare analytic gradients against central differences.
///
/// `build` must construct the same scalar loss every call (it is invoked
/// repeatedly with perturbed weights). When `samples_per_param` is set, only
/// that many randomly chosen entries of each tensor are perturbed; the
/// analytic side is always exact. Relative error for a pair (a, n) is
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check(
    params: &mut ParamSet,
    eps: f64,
    samples_per_param: Option<usize>,
    rng: &mut SeededRng,
    build: impl Fn(&mut Tape, &ParamSet) -> Var,
) -> Result<GradCheckReport> {
    let mut tape = Tape::new();
    let loss = build(&mut tape, params);
    if !tape.scalar(loss).is_finite() {
        return Err(Error::NonFiniteLoss("gradient check forward pass".into()));
    }
    tape.backward(loss);
    params.zero_grads();
    tape.apply_grads(params);
    params.check_finite_grads()?;
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.data.clone()).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        entries_checked: 0,
    };
    for pi in 0..params.len() {
        let id = ParamId(pi);
        let n = params.get(id).value.len();
        let indices: Vec<usize> = match samples_per_param {
            Some(k) if k < n => {
                let mut idx: Vec<usize> = (0..n).collect();
                rng.shuffle(&mut idx);
                idx.truncate(k);
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        };
        for k in indices {
            let orig = params.get(id).value.data[k];
            params.get_mut(id).value.data[k] = orig + eps;
            let mut tp = Tape::new();
            let lp = build(&mut tp, params);
            params.get_mut(id).value.data[k] = orig - eps;
            let mut tm = Tape::new();
            let lm = build(&mut tm, params);
            params.get_mut(id).value.data[k] = orig;
            let numeric = (tp.scalar(lp) - tm.scalar(lm)) / (2.0 * eps);
            let a = analytic[pi][k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.entries_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = params.get(id).name.clone();
                report.worst_index = k;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
