use serde::Serialize;

use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// Denominator floor for relative errors.
pub const REL_ERR_FLOOR: f64 = 1e-8;

/// Worst mismatch found in one parameter tensor.
#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub numel: usize,
    pub worst_rel_err: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.worst_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn worst_param(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.worst_rel_err.total_cmp(&b.worst_rel_err))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn evaluate<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let mut g = Graph::with_params(store);
    let loss = f(&mut g)?;
    let v = g.value(loss);
    if v.numel() != 1 {
        return Err(Error::Oracle(format!("loss has shape {:?}", v.shape())));
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(Error::Oracle(format!("loss evaluated to {v}")));
    }
    Ok(v)
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences `(f(x+eps) - f(x-eps)) / 2eps`, element by element, for every
/// parameter in `ids`. The store is restored before returning.
pub fn finite_difference_check<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    eps: f64,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::Oracle(format!("eps must be positive, got {eps}")));
    }
    let analytic: Vec<Vec<f64>> = {
        let mut g = Graph::with_params(store);
        let loss = f(&mut g)?;
        if !g.value(loss).item().is_finite() {
            return Err(Error::Oracle("non-finite loss".into()));
        }
        let grads = g.backward(loss)?;
        ids.iter()
            .map(|&id| {
                grads
                    .param(id)
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| vec![0.0; store.value(id).numel()])
            })
            .collect()
    };

    let mut report = GradCheckReport::default();
    for (&id, grad) in ids.iter().zip(&analytic) {
        let numel = store.value(id).numel();
        let mut check = ParamCheck {
            name: store.get(id).name.clone(),
            numel,
            worst_rel_err: 0.0,
            index: 0,
            analytic: grad[0],
            numeric: f64::NAN,
        };
        for i in 0..numel {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + eps;
            let plus = evaluate(store, &f);
            store.value_mut(id).data_mut()[i] = orig - eps;
            let minus = evaluate(store, &f);
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let err = relative_error(grad[i], numeric);
            if err > check.worst_rel_err || i == 0 {
                check.worst_rel_err = err;
                check.index = i;
                check.analytic = grad[i];
                check.numeric = numeric;
            }
        }
        report.params.push(check);
    }
    Ok(report)
}
