use serde::Serialize;

use super::params::ParamSet;
use super::tape::{NodeId, Tape};
use crate::error::{Error, Result};

/// Worst disagreement found for one parameter tensor.
#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Step that produced `numeric`.
    pub step: f64,
    /// `(analytic, numeric)` for every coordinate, in storage order.
    #[serde(skip)]
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub steps: Vec<f64>,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences `(f(θ+eps) - f(θ-eps)) / (2 eps)` for every coordinate of every
/// parameter. `f` records its computation on the provided tape and returns the
/// scalar loss node. Parameter values are restored before returning; the
/// gradient slots are left holding the analytic gradient.
pub fn check_gradient<F>(f: F, params: &mut ParamSet, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamSet) -> Result<NodeId>,
{
    check_gradient_steps(f, params, &[eps])
}

/// Like [`check_gradient`], but tries each step in `steps` (in order) for
/// every coordinate and keeps the one that agrees best with the analytic
/// value. Large steps suffer truncation error and can straddle a ReLU kink;
/// small steps lose tiny gradients to rounding. A short ladder such as
/// `[1e-4, 1e-5, 1e-6]` avoids both.
pub fn check_gradient_steps<F>(f: F, params: &mut ParamSet, steps: &[f64]) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamSet) -> Result<NodeId>,
{
    if steps.is_empty() {
        return Err(Error::Argument("at least one finite-difference step is required".into()));
    }
    if let Some(bad) = steps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Argument(format!("finite-difference step must be positive, got {bad}")));
    }

    params.zero_grad();
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    if !tape.value(loss).is_finite() {
        return Err(Error::Numeric {
            context: "loss at the unperturbed point".into(),
        });
    }
    tape.backward(loss, params)?;

    let eval = |params: &ParamSet, context: &dyn Fn() -> String| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, params)?;
        let v = tape.value(loss).data()[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric { context: context() })
        }
    };

    let ids: Vec<_> = params.ids().collect();
    let mut report = Vec::with_capacity(ids.len());
    for id in ids {
        let n = params.value(id).len();
        let name = params.get(id).name.clone();
        let mut check = ParamCheck {
            name: name.clone(),
            coordinates: n,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
            step: steps[0],
            values: Vec::with_capacity(n),
        };
        for k in 0..n {
            let original = params.value(id).data()[k];
            let analytic = params.gradient(id).data()[k];
            let ctx = || format!("parameter `{name}` coordinate {k}");
            let mut best: Option<(f64, f64, f64)> = None;
            for &eps in steps {
                params.get_mut(id).value.data_mut()[k] = original + eps;
                let plus = eval(params, &ctx);
                params.get_mut(id).value.data_mut()[k] = original - eps;
                let minus = eval(params, &ctx);
                params.get_mut(id).value.data_mut()[k] = original;
                let (plus, minus) = (plus?, minus?);

                let numeric = (plus - minus) / (2.0 * eps);
                let err = relative_error(analytic, numeric);
                if best.map_or(true, |(e, _, _)| err < e) {
                    best = Some((err, numeric, eps));
                }
                if err < 1e-7 {
                    break;
                }
            }
            let (err, numeric, eps) = best.expect("steps is non-empty");
            check.values.push((analytic, numeric));
            if err > check.max_rel_error || k == 0 {
                check.max_rel_error = err;
                check.worst_index = k;
                check.analytic = analytic;
                check.numeric = numeric;
                check.step = eps;
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport {
        steps: steps.to_vec(),
        params: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic_is_exact() {
        // loss = sum((A w)²) + sum(w ⊙ b)
        let mut set = ParamSet::new();
        let w = set
            .add("w", Tensor::from_rows(&[vec![0.3], vec![-1.2], vec![2.0]]).unwrap())
            .unwrap();
        let b = set.add("b", Tensor::from_rows(&[vec![1.0], vec![0.5], vec![-0.25]]).unwrap()).unwrap();
        let a = Tensor::from_rows(&[vec![1.0, 2.0, 0.0], vec![-1.0, 0.5, 3.0]]).unwrap();
        let report = check_gradient(
            |tape, p| {
                let wn = tape.param(p, w);
                let bn = tape.param(p, b);
                let an = tape.constant(a.clone());
                let aw = tape.matmul(an, wn)?;
                let sq = tape.mul(aw, aw)?;
                let lin = tape.mul(wn, bn)?;
                let s1 = tape.sum_all(sq);
                let s2 = tape.sum_all(lin);
                tape.add(s1, s2)
            },
            &mut set,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-9, "{report:?}");
    }

    #[test]
    fn zero_step_is_rejected() {
        let mut set = ParamSet::new();
        set.add_ones("w", &[1]).unwrap();
        let err = check_gradient(|tape, p| Ok(tape.param(p, p.id("w").unwrap())), &mut set, 0.0);
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn non_finite_evaluation_names_coordinate() {
        // finite at w = 1, overflows once w is nudged upwards
        let mut set = ParamSet::new();
        let w = set.add("w", Tensor::row(&[1.0]).unwrap()).unwrap();
        let err = check_gradient(
            |tape, p| {
                let n = tape.param(p, w);
                let big = tape.scale(n, f64::MAX / 1.000001);
                Ok(tape.sum_all(big))
            },
            &mut set,
            1e-5,
        )
        .unwrap_err();
        match err {
            Error::Numeric { context } => assert!(context.contains("`w` coordinate 0"), "{context}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
