//! Central finite-difference check of tape gradients.

use alloc::vec::Vec;

use rand::Rng as _;

use super::{Tape, Tensor, Var};
use crate::rng;
use crate::{Error, Result};

/// Gradients smaller than this in magnitude are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub leaf: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<Worst>,
}

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn eval<F>(leaves: &[Tensor], f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out);
    if !v.is_scalar() {
        return Err(Error::NonScalarLoss { shape: v.shape().to_vec() });
    }
    Ok(v.data()[0])
}

/// Compares the tape gradient of the scalar `f(leaves)` with central
/// differences of step `h`. With `per_leaf = Some(k)` only `k` coordinates
/// of each leaf (drawn with `seed`) are checked.
pub fn check_gradients<F>(leaves: &[Tensor], per_leaf: Option<usize>, h: f64, seed: u64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = leaves.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let grads: Vec<Tensor> = vars.iter().map(|&v| tape.grad_or_zeros(v)).collect();

    let mut r = rng::seeded(seed);
    let mut work = leaves.to_vec();
    let mut report = GradCheck { checked: 0, max_rel_error: 0.0, worst: None };
    for (leaf, g) in grads.iter().enumerate() {
        let n = g.len();
        let coords: Vec<usize> = match per_leaf {
            Some(k) if k < n => (0..k).map(|_| r.random_range(0..n)).collect(),
            _ => (0..n).collect(),
        };
        for index in coords {
            let x0 = work[leaf].data()[index];
            work[leaf].data_mut()[index] = x0 + h;
            let up = eval(&work, &f)?;
            work[leaf].data_mut()[index] = x0 - h;
            let down = eval(&work, &f)?;
            work[leaf].data_mut()[index] = x0;
            let numeric = (up - down) / (2.0 * h);
            let analytic = g.data()[index];
            let e = relative_error(analytic, numeric);
            report.checked += 1;
            if e > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(e);
                report.worst = Some(Worst { leaf, index, analytic, numeric });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn product_gradient_checks() {
        let a = Tensor::new(vec![2], vec![1.5, -2.0]).unwrap();
        let b = Tensor::new(vec![2], vec![0.3, 4.0]).unwrap();
        let rep = check_gradients(&[a, b], None, 1e-5, 0, |t, v| {
            let m = t.mul(v[0], v[1])?;
            Ok(t.sum(m))
        })
        .unwrap();
        assert_eq!(rep.checked, 4);
        assert!(rep.max_rel_error < 1e-8);
    }

    #[test]
    fn floor_applies_to_tiny_gradients() {
        assert_eq!(relative_error(1e-9, 0.0), 1e-3);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
