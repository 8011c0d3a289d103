//! Central finite differences against the reverse sweep.

use crate::error::{invalid, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// Denominator floor for the relative error, so gradients that are zero up
/// to round-off do not blow up the ratio.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(param index, element index)` of the worst element.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.constant(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.value(out).item()
}

/// Worst relative error between reverse-mode and central-difference
/// gradients of the scalar `f` over every element of every parameter.
pub fn grad_check<F>(f: F, params: &[Tensor], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return invalid("grad_check", format!("eps {eps} outside (0, 1e-2]"));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut probe: Vec<Tensor> = params.to_vec();
    for (pi, (param, var)) in params.iter().zip(&vars).enumerate() {
        let analytic = grads.get(*var);
        for ei in 0..param.numel() {
            let base = param.data()[ei];
            probe[pi].data_mut()[ei] = base + eps;
            let up = evaluate(&f, &probe)?;
            probe[pi].data_mut()[ei] = base - eps;
            let down = evaluate(&f, &probe)?;
            probe[pi].data_mut()[ei] = base;

            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.map_or(0.0, |t| t.data()[ei]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.checked == 1 {
                report.max_relative_error = err;
                report.worst = (pi, ei);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Tensor::from_vec(vec![1.0, 2.0, 3.0]);
        let mut g = Graph::new();
        let v = g.param(x.clone());
        let sq = g.square(v).unwrap();
        let s = g.sum(sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(v).unwrap().data(), &[2.0, 4.0, 6.0]);

        let r = grad_check(
            |g, p| {
                let sq = g.square(p[0])?;
                g.sum(sq)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(r.max_relative_error < 1e-8, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn rejects_bad_eps() {
        let x = Tensor::from_vec(vec![1.0]);
        assert!(grad_check(|g, p| g.sum(p[0]), &[x.clone()], 0.0).is_err());
        assert!(grad_check(|g, p| g.sum(p[0]), &[x], 0.1).is_err());
    }

    #[test]
    fn non_finite_intermediate_is_error() {
        let x = Tensor::from_vec(vec![0.0]);
        assert!(grad_check(
            |g, p| {
                let l = g.ln(p[0])?;
                g.sum(l)
            },
            &[x],
            1e-5
        )
        .is_err());
    }
}
