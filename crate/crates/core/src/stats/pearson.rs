use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::probe::KeyNeuronSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub r: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Deviations from the mean, scaled by the largest one so the sums of
/// squares cannot overflow or underflow.
fn centered(v: &[f64], name: &str) -> Result<Vec<f64>, StatsError> {
    if v.iter().all(|&x| x == v[0]) {
        return Err(StatsError::ConstantSeries(format!("{name} is constant")));
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let d: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(StatsError::ConstantSeries(format!("{name} has no spread")));
    }
    Ok(d.into_iter().map(|x| x / scale).collect())
}

/// Two-pass product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let dx = centered(xs, "xs")?;
    let dy = centered(ys, "ys")?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in dx.iter().zip(&dy) {
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationResult {
        n: xs.len(),
        r,
        xs: xs.to_vec(),
        ys: ys.to_vec(),
    })
}

/// Correlates key-set sizes with scores.
pub fn neuron_count_vs_score(entries: &[(KeyNeuronSet, f64)]) -> Result<CorrelationResult, StatsError> {
    let sizes: Vec<f64> = entries.iter().map(|(s, _)| s.len() as f64).collect();
    let scores: Vec<f64> = entries.iter().map(|(_, v)| *v).collect();
    pearson(&sizes, &scores).map_err(|e| match e {
        StatsError::ConstantSeries(_) if sizes.len() >= 2 && sizes.iter().all(|&s| s == sizes[0]) => {
            StatsError::ConstantSeries(format!(
                "every key-neuron set has {} neurons, so count cannot explain score",
                sizes[0]
            ))
        }
        StatsError::ConstantSeries(_) => {
            StatsError::ConstantSeries("every entry has the same score".into())
        }
        other => other,
    })
}
