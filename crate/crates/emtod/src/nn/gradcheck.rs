//! Finite-difference verification of analytic gradients.

use super::params::{GradBuffer, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::Precision;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub entries_checked: usize,
}

/// Compare analytic gradients of a scalar loss against central differences
/// (f(θ+eps) − f(θ−eps)) / 2eps for every entry of every parameter, except
/// those whose name starts with a prefix in `exclude`.
///
/// Relative error per entry is |a − n| / max(|a|, |n|, 1e-8). The closure
/// must be deterministic; it is evaluated twice at θ to verify that.
pub fn grad_check<F>(
    store: &mut ParamStore,
    exclude: &[&str],
    eps: f64,
    mut build: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore, &mut Tape) -> Result<NodeId>,
{
    if store.precision() != Precision::F64 {
        return Err(Error::Config(
            "grad_check requires a ParamStore in f64 mode".to_string(),
        ));
    }

    let eval = |store: &ParamStore, build: &mut F| -> Result<(f64, Tape, NodeId)> {
        let mut tape = Tape::new();
        let loss = build(store, &mut tape)?;
        let value = tape.value(loss).item();
        Ok((value, tape, loss))
    };

    let (loss_a, tape, loss_node) = eval(store, &mut build)?;
    let (loss_b, _, _) = eval(store, &mut build)?;
    if loss_a.to_bits() != loss_b.to_bits() {
        return Err(Error::NonDeterministic { a: loss_a, b: loss_b });
    }

    let mut analytic = GradBuffer::new();
    tape.backward(loss_node, 1.0, &mut analytic)?;

    let names: Vec<String> = store
        .names()
        .filter(|n| !exclude.iter().any(|p| n.starts_with(p)))
        .map(|n| n.to_string())
        .collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        entries_checked: 0,
    };

    // Central differences of an f64 loss carry roundoff noise of about
    // machine_eps * |f| / eps; disagreements at that scale say nothing
    // about the analytic gradient, so they count as exact.
    let noise_floor = 64.0 * f64::EPSILON * loss_a.abs().max(1.0) / eps;

    for name in &names {
        let len = store.value(name)?.len();
        for idx in 0..len {
            store.nudge(name, idx, eps)?;
            let (plus, _, _) = eval(store, &mut build)?;
            store.nudge(name, idx, -2.0 * eps)?;
            let (minus, _, _) = eval(store, &mut build)?;
            store.nudge(name, idx, eps)?;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(name).map_or(0.0, |g| g.data()[idx]);
            let diff = (a - numeric).abs();
            let rel = if diff <= noise_floor {
                0.0
            } else {
                diff / a.abs().max(numeric.abs()).max(1e-8)
            };
            report.entries_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = format!("{name}[{idx}]");
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
