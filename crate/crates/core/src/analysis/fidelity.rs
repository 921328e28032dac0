use nalgebra::DMatrix;

use super::{mean, AnalysisError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub autocorr_diff: f64,
    pub crosscorr_diff: f64,
    /// Correlation terms skipped because a channel was constant.
    pub skipped: usize,
}

fn autocorr(x: &[f64], lag: usize) -> Option<f64> {
    let m = mean(x);
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if !(var > 0.0) || lag >= x.len() {
        return None;
    }
    Some(
        x.iter()
            .zip(&x[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / var,
    )
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|x| (x - mb).powi(2)).sum();
    if !(va > 0.0 && vb > 0.0) {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (va * vb).sqrt())
}

/// Autocorrelation and lag-0 cross-correlation differences over lags 1..=100.
pub fn correlation_fidelity(real: &[Vec<f64>], synthetic: &[Vec<f64>]) -> Result<Fidelity, AnalysisError> {
    correlation_fidelity_lags(real, synthetic, 100)
}

/// Channels are given as columns. Sums |ρ_real − ρ_syn| over every channel
/// and lag, and over every channel pair at lag 0.
pub fn correlation_fidelity_lags(
    real: &[Vec<f64>],
    synthetic: &[Vec<f64>],
    max_lag: usize,
) -> Result<Fidelity, AnalysisError> {
    if real.len() != synthetic.len() {
        return Err(AnalysisError::LengthMismatch(real.len(), synthetic.len()));
    }
    if real.is_empty() {
        return Err(AnalysisError::Empty);
    }
    for (a, b) in real.iter().zip(synthetic) {
        if a.len() != b.len() {
            return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
        }
    }
    let mut out = Fidelity {
        autocorr_diff: 0.0,
        crosscorr_diff: 0.0,
        skipped: 0,
    };
    for (a, b) in real.iter().zip(synthetic) {
        for lag in 1..=max_lag.min(a.len().saturating_sub(1)) {
            match (autocorr(a, lag), autocorr(b, lag)) {
                (Some(x), Some(y)) => out.autocorr_diff += (x - y).abs(),
                _ => out.skipped += 1,
            }
        }
    }
    for i in 0..real.len() {
        for j in i + 1..real.len() {
            match (pearson(&real[i], &real[j]), pearson(&synthetic[i], &synthetic[j])) {
                (Some(x), Some(y)) => out.crosscorr_diff += (x - y).abs(),
                _ => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// Share of A's variance along each retained component.
    pub explained: Vec<f64>,
}

/// Fits principal axes on `a` (one flattened sample per row) and projects
/// both sets onto the first `k` of them.
pub fn pca_project(a: &[Vec<f64>], b: &[Vec<f64>], k: usize) -> Result<PcaProjection, AnalysisError> {
    let n = a.len();
    if n < 2 {
        return Err(AnalysisError::TooShort { need: 2, got: n });
    }
    let d = a[0].len();
    if let Some(row) = a.iter().chain(b).find(|r| r.len() != d) {
        return Err(AnalysisError::LengthMismatch(d, row.len()));
    }
    let mu: Vec<f64> = (0..d)
        .map(|j| a.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let x = DMatrix::from_fn(n, d, |i, j| a[i][j] - mu[j]);

    // Eigen-decompose whichever Gram matrix is smaller.
    let (values, axes) = if n < d {
        let eig = (&x * x.transpose()).symmetric_eigen();
        let axes = x.transpose() * &eig.eigenvectors;
        (eig.eigenvalues, axes)
    } else {
        let eig = (x.transpose() * &x).symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let total: f64 = values.iter().filter(|v| **v > 0.0).sum();
    if !(total > 0.0) {
        return Err(AnalysisError::DegenerateCovariance);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let keep: Vec<usize> = order.into_iter().take(k.min(values.len())).collect();
    let basis: Vec<Vec<f64>> = keep
        .iter()
        .map(|&c| {
            let col = axes.column(c);
            let norm = col.norm();
            col.iter()
                .map(|v| if norm > 0.0 { v / norm } else { 0.0 })
                .collect()
        })
        .collect();
    let project = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                basis
                    .iter()
                    .map(|u| {
                        u.iter()
                            .zip(r.iter().zip(&mu))
                            .map(|(u, (x, m))| u * (x - m))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    Ok(PcaProjection {
        a: project(a),
        b: project(b),
        explained: keep.iter().map(|&c| values[c].max(0.0) / total).collect(),
    })
}
