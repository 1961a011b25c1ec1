//! Central finite-difference check of tape gradients.
//!
//! The oracle only evaluates the forward pass: each parameter entry is nudged
//! by `±h` and the loss is rebuilt on a fresh tape, so it shares nothing with
//! the backward rules it checks. Closures must be deterministic (reseed any
//! generator inside the closure).

use alloc::vec::Vec;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::tensor::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub failures: usize,
    /// Largest relative error among entries above the absolute floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub step: f64,
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel: 1e-4,
            abs_floor: 1e-8,
        }
    }
}

fn eval<F>(params: &[DenseMatrix], f: &mut F) -> Result<(Tape, Vec<Var>, Var)>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    Ok((tape, vars, loss))
}

/// Compares tape gradients of `f` against central differences for every
/// entry of every parameter.
pub fn check_gradients<F>(params: &[DenseMatrix], tol: Tolerance, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let (tape, vars, loss) = eval(params, &mut f)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<DenseMatrix> = vars.iter().map(|&v| grads.get(v)).collect();

    let mut report = GradCheckReport {
        checked: 0,
        failures: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: None,
    };
    let mut work: Vec<DenseMatrix> = params.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for k in 0..params[p].data().len() {
            let orig = params[p].data()[k];
            work[p].data_mut()[k] = orig + tol.step;
            let (t, _, l) = eval(&work, &mut f)?;
            let plus = t.scalar(l);
            work[p].data_mut()[k] = orig - tol.step;
            let (t, _, l) = eval(&work, &mut f)?;
            let minus = t.scalar(l);
            work[p].data_mut()[k] = orig;

            let fd = (plus - minus) / (2.0 * tol.step);
            let ad = grad.data()[k];
            let abs_err = (fd - ad).abs();
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs_err);
            if abs_err <= tol.abs_floor {
                continue;
            }
            let rel = abs_err / fd.abs().max(ad.abs());
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((p, k));
            }
            if rel.is_nan() || rel >= tol.rel {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}
