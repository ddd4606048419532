//! Central finite differences, used as the independent oracle for every
//! analytic gradient in the crate.

use super::params::{Gradients, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Default step at 64-bit precision.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for [`relative_error`], so that gradients which are
/// both essentially zero compare by absolute difference.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `(f(w+h) − f(w−h)) / 2h` for every scalar of every parameter, returned in
/// store order.
pub fn finite_difference_gradient<F>(
    mut loss_fn: F,
    params: &ParamStore,
    h: f64,
) -> Result<Vec<Tensor>>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    let mut work = params.clone();
    let mut out = Vec::with_capacity(params.len());
    for (id, p) in params.iter() {
        let mut g = Tensor::zeros(p.value.shape());
        for k in 0..p.value.numel() {
            let orig = p.value.data()[k];
            work.value_mut(id).data_mut()[k] = orig + h;
            let plus = loss_fn(&work)?;
            work.value_mut(id).data_mut()[k] = orig - h;
            let minus = loss_fn(&work)?;
            work.value_mut(id).data_mut()[k] = orig;
            g.data_mut()[k] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Largest relative error between analytic gradients and a finite-difference
/// estimate. Parameters absent from `analytic` count as zero gradients.
pub fn max_relative_error(params: &ParamStore, analytic: &Gradients, numeric: &[Tensor]) -> f64 {
    let mut worst = 0.0f64;
    for ((id, p), num) in params.iter().zip(numeric) {
        for k in 0..p.value.numel() {
            let a = analytic.get(id).map_or(0.0, |g| g.data()[k]);
            worst = worst.max(relative_error(a, num.data()[k]));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(w: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(w)).unwrap();
        s
    }

    fn w0(s: &ParamStore) -> f64 {
        s.iter().next().unwrap().1.value.data()[0]
    }

    #[test]
    fn square() {
        let g = finite_difference_gradient(|s| Ok(w0(s).powi(2)), &one(3.0), DEFAULT_STEP).unwrap();
        assert!((g[0].data()[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn constant_function() {
        let g = finite_difference_gradient(|_| Ok(4.0), &one(3.0), DEFAULT_STEP).unwrap();
        assert_eq!(g[0].data()[0], 0.0);
    }

    #[test]
    fn tanh_at_zero() {
        let g = finite_difference_gradient(|s| Ok(w0(s).tanh()), &one(0.0), DEFAULT_STEP).unwrap();
        assert!((g[0].data()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_step() {
        assert!(finite_difference_gradient(|_| Ok(0.0), &one(0.0), 0.0).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 2e-12) < 1e-5);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-12);
    }
}
