use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Parameter tag used for the tensors under test.
const CHECK_SET: u32 = u32::MAX;

/// Compares reverse-mode gradients of a scalar-valued graph function against
/// central finite differences of step `eps`.
///
/// `f` receives the graph and one `Var` per entry of `params` and must return
/// a scalar `Var`. Returns the maximum over all components of
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let analytic = analytic_grads(&f, params)?;
    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor> = params.to_vec();
    for p in 0..params.len() {
        for j in 0..params[p].len() {
            let orig = work[p].data()[j];
            work[p].data_mut()[j] = orig + eps;
            let up = eval(&f, &work)?;
            work[p].data_mut()[j] = orig - eps;
            let down = eval(&f, &work)?;
            work[p].data_mut()[j] = orig;
            let num = (up - down) / (2.0 * eps);
            let a = analytic[p][j];
            let err = (a - num).abs() / f64::max(1e-8, a.abs() + num.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Reverse-mode gradients of `f` at `params`, one buffer per tensor.
pub fn analytic_grads<F>(f: &F, params: &[Tensor]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().enumerate().map(|(i, t)| g.param(CHECK_SET, i, t)).collect();
    let root = f(&mut g, &vars);
    if !g.scalar(root).is_finite() {
        return Err(Error::NonFinite("grad_check function value"));
    }
    let grads = g.backward(root)?;
    Ok(vars
        .iter()
        .zip(params)
        .map(|(v, t)| grads.get(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect())
}

fn eval<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|t| g.constant(t)).collect();
    let root = f(&mut g, &vars);
    let v = g.scalar(root);
    if !v.is_finite() {
        return Err(Error::NonFinite("grad_check function value"));
    }
    Ok(v)
}
