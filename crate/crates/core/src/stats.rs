//! Small numeric helpers shared across the pipelines.

use crate::error::{Error, Result};

/// Sums with a fixed binary tree (fan-in 2), so the result depends only on
/// the order of `values`, never on how work was split.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(pairwise_sum(values) / values.len() as f64)
    }
}

/// Sample standard deviation (n − 1 denominator). `None` below two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    Some((pairwise_sum(&ss) / (values.len() - 1) as f64).sqrt())
}

/// Population standard deviation (n denominator).
pub fn population_sd(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let ss: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    Some((pairwise_sum(&ss) / values.len() as f64).sqrt())
}

/// Two-pass Pearson correlation, clamped to [-1, 1].
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "pearson: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs at least two values".into(),
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 {
        return Err(Error::ZeroVariance("first series".into()));
    }
    if sbb == 0.0 {
        return Err(Error::ZeroVariance("second series".into()));
    }
    let r = sab / (saa * sbb).sqrt();
    if !r.is_finite() {
        return Err(Error::Numeric("non-finite correlation".into()));
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Percentile of already-sorted data with linear interpolation between
/// order statistics (the "type 7" rule). `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{-x})`, stable on both tails.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
