//! Rank correlation coefficients for comparing scoring methods: Pearson on
//! raw values, Spearman on average ranks, and Kendall tau-b with tie
//! correction. All three reject mismatched lengths, sequences shorter than
//! two, and inputs with no variation (the coefficient is undefined there,
//! and silently returning 0 would poison downstream aggregates).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrError {
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 paired observations, got {len}")]
    TooShort { len: usize },
    #[error("coefficient undefined: an input has no variation")]
    DegenerateInput,
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<(), CorrError> {
    if x.len() != y.len() {
        return Err(CorrError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(CorrError::TooShort { len: x.len() });
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrError> {
    check_lengths(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrError::DegenerateInput);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Ranks with ties sharing the average of the positions they occupy
/// (1-based, so `[10, 20, 20]` ranks as `[1.0, 2.5, 2.5]`).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, CorrError> {
    check_lengths(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b, the tie-corrected variant. Quadratic pair scan; fine for
/// the batch sizes this toolkit ranks.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, CorrError> {
    check_lengths(x, y)?;
    let n = x.len();
    let mut concordant = 0u64;
    let mut discordant = 0u64;
    let mut ties_x = 0u64;
    let mut ties_y = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]);
            let dy = y[i].total_cmp(&y[j]);
            match (dx.is_eq(), dy.is_eq()) {
                (true, true) => {
                    ties_x += 1;
                    ties_y += 1;
                }
                (true, false) => ties_x += 1,
                (false, true) => ties_y += 1,
                (false, false) => {
                    if dx == dy {
                        concordant += 1;
                    } else {
                        discordant += 1;
                    }
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = (n0 - ties_x as f64) * (n0 - ties_y as f64);
    if denom <= 0.0 {
        return Err(CorrError::DegenerateInput);
    }
    Ok((concordant as f64 - discordant as f64) / denom.sqrt())
}
