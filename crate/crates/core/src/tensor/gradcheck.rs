use alloc::vec::Vec;

use super::{Matrix, ParamStore, Tape, Var};
use crate::math::abs;
use crate::Result;

/// Outcome of a central-difference gradient comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates skipped because a ReLU/LeakyReLU/clamp switched branch between
    /// the two probes.
    pub skipped: usize,
}

impl GradCheckReport {
    fn record(&mut self, analytic: f64, numeric: f64) {
        let denom = abs(analytic).max(abs(numeric)).max(1e-8);
        let rel = abs(analytic - numeric) / denom;
        if rel > self.max_rel_error || rel.is_nan() {
            self.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
        }
        self.checked += 1;
    }

    fn merge(&mut self, other: GradCheckReport) {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.checked += other.checked;
        self.skipped += other.skipped;
    }
}

fn eval<F>(f: &F, x: &Matrix) -> Result<(f64, Vec<bool>)>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let root = f(&mut tape, xv)?;
    Ok((tape.value(root).item()?, tape.kink_pattern()))
}

/// Compares the tape gradient of a scalar function of `x` with central differences
/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
pub fn grad_check<F>(f: F, x: &Matrix, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let root = f(&mut tape, xv)?;
    let grads = tape.backward(root, &mut ParamStore::new())?;
    let analytic = grads
        .wrt(xv)
        .cloned()
        .unwrap_or_else(|| Matrix::zeros(x.rows(), x.cols()));

    let mut report = GradCheckReport::default();
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + eps;
        let (plus, kp) = eval(&f, &probe)?;
        probe.as_mut_slice()[i] = orig - eps;
        let (minus, km) = eval(&f, &probe)?;
        probe.as_mut_slice()[i] = orig;
        if kp != km {
            report.skipped += 1;
            continue;
        }
        report.record(analytic.as_slice()[i], (plus - minus) / (2.0 * eps));
    }
    Ok(report)
}

/// Finite-difference check over every trainable entry of every parameter in
/// `store`. `f` must build the scalar loss on the given tape from the given store
/// and be deterministic (fix any dropout RNG inside `f`).
pub fn grad_check_params<F>(store: &ParamStore, f: F, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut work = store.clone();
    work.zero_grads();
    let mut tape = Tape::new();
    let root = f(&mut tape, &work)?;
    tape.backward(root, &mut work)?;

    let mut report = GradCheckReport::default();
    let ids: Vec<_> = work.ids().collect();
    for id in ids {
        if !work.get(id).requires_grad {
            continue;
        }
        let analytic = work
            .grad(id)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(work.value(id).rows(), work.value(id).cols()));
        let mut part = GradCheckReport::default();
        for i in 0..analytic.len() {
            let orig = work.value(id).as_slice()[i];
            work.value_mut(id).as_mut_slice()[i] = orig + eps;
            let (plus, kp) = eval_store(&f, &work)?;
            work.value_mut(id).as_mut_slice()[i] = orig - eps;
            let (minus, km) = eval_store(&f, &work)?;
            work.value_mut(id).as_mut_slice()[i] = orig;
            if kp != km {
                part.skipped += 1;
                continue;
            }
            part.record(analytic.as_slice()[i], (plus - minus) / (2.0 * eps));
        }
        report.merge(part);
    }
    Ok(report)
}

fn eval_store<F>(f: &F, store: &ParamStore) -> Result<(f64, Vec<bool>)>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let root = f(&mut tape, store)?;
    Ok((tape.value(root).item()?, tape.kink_pattern()))
}
