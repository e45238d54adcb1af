use crate::error::{Error, Result};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Unnormalized hardness weights `max(dmos) − dmos_i + ε`.
pub fn hardness_raw(dmos: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    if dmos.is_empty() {
        return Err(Error::invalid("hardness weights need at least one value"));
    }
    if dmos.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("non-finite DMOS value"));
    }
    let max = dmos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(dmos.iter().map(|d| max - d + epsilon).collect())
}

/// Selection probabilities that shrink as DMOS grows: clips that the models
/// improve least (or degrade) get the most mass.
pub fn hardness_weights(dmos: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    hardness_raw(dmos, epsilon).map(normalize)
}

/// Population variance.
pub fn population_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Unnormalized variance weights `var_i + ε`, one per row.
pub fn variance_raw<R: AsRef<[f64]>>(rows: &[R], epsilon: f64) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    if rows.is_empty() {
        return Err(Error::invalid("variance weights need at least one clip"));
    }
    rows.iter()
        .map(|r| {
            let r = r.as_ref();
            if r.len() < 2 {
                Err(Error::invalid(format!(
                    "variance across models needs at least 2 models, got {}",
                    r.len()
                )))
            } else if r.iter().any(|d| !d.is_finite()) {
                Err(Error::invalid("non-finite DMOS value"))
            } else {
                Ok(population_variance(r) + epsilon)
            }
        })
        .collect()
}

/// Selection probabilities proportional to each clip's across-model DMOS
/// variance (plus ε).
pub fn variance_weights<R: AsRef<[f64]>>(rows: &[R], epsilon: f64) -> Result<Vec<f64>> {
    variance_raw(rows, epsilon).map(normalize)
}
