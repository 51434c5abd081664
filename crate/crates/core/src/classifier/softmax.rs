use num_traits::Float;

use crate::error::{Error, Result};

/// Numerically stable log-softmax (max-subtracted).
pub fn log_softmax<T: Float>(logits: &[T]) -> Result<Vec<T>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits"));
    }
    let Some(max) = logits.iter().copied().reduce(T::max) else {
        return Ok(Vec::new());
    };
    let sum = logits
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - max).exp());
    let log_norm = max + sum.ln();
    Ok(logits.iter().map(|&v| v - log_norm).collect())
}

/// `-log_probs[label]`, clamped at zero against rounding.
pub fn nll_loss<T: Float>(log_probs: &[T], label: usize) -> Result<T> {
    let lp = log_probs.get(label).ok_or(Error::ClassOutOfRange {
        index: label,
        classes: log_probs.len(),
    })?;
    Ok((-*lp).max(T::zero()))
}

/// Index of the largest entry; ties go to the lowest index.
// `!(v > b)` also keeps the incumbent when `v` is NaN.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
