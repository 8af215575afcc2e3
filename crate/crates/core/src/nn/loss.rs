use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

/// Mean absolute difference.
pub fn l1_loss(a: &Tensor, b: &Tensor) -> Result<f64> {
    l1_loss_with_grad(a, b).map(|(v, _)| v)
}

/// Mean absolute difference and its gradient with respect to `a`.
pub fn l1_loss_with_grad(a: &Tensor, b: &Tensor) -> Result<(f64, Tensor)> {
    b.ensure_shape(a.shape())?;
    if a.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = a.len() as f64;
    let mut sum = 0.0;
    let grad: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x - y;
            sum += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((sum / n, Tensor::from_vec(a.shape().to_vec(), grad)?))
}

/// Mean squared difference over the entries where `mask` is 1.
pub fn mse_loss(a: &Tensor, b: &Tensor, mask: Option<&Tensor>) -> Result<f64> {
    mse_loss_with_grad(a, b, mask).map(|(v, _)| v)
}

/// Masked mean squared difference and its gradient with respect to `a`.
/// Masked-out entries receive zero gradient.
pub fn mse_loss_with_grad(a: &Tensor, b: &Tensor, mask: Option<&Tensor>) -> Result<(f64, Tensor)> {
    b.ensure_shape(a.shape())?;
    if let Some(m) = mask {
        m.ensure_shape(a.shape())?;
        if m.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("mask values must be 0 or 1".into()));
        }
    }
    let weight = |i: usize| mask.map_or(1.0, |m| m.data()[i]);
    let count: f64 = (0..a.len()).map(weight).sum();
    if count == 0.0 {
        return Err(Error::EmptyMask);
    }
    let mut sum = 0.0;
    let grad: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .enumerate()
        .map(|(i, (&x, &y))| {
            if weight(i) == 0.0 {
                return 0.0;
            }
            let d = x - y;
            sum += d * d;
            2.0 * d / count
        })
        .collect();
    Ok((sum / count, Tensor::from_vec(a.shape().to_vec(), grad)?))
}
