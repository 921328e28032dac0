use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::AnalysisError;

/// One damped oscillatory component `A·e^{−σt}·cos(2πft + φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEstimate {
    /// Hz, non-negative.
    pub frequency: f64,
    /// Decay rate σ in 1/s; positive for decaying modes.
    pub damping: f64,
    pub amplitude: f64,
    /// amplitude² × window length in seconds.
    pub energy: f64,
}

/// Matrix-pencil identification of up to `order` exponential components.
/// Conjugate pairs are merged into one real mode; results are sorted by
/// energy, largest first.
pub fn estimate_modes(
    series: &[f64],
    sample_rate: f64,
    order: usize,
) -> Result<Vec<ModeEstimate>, AnalysisError> {
    let n = series.len();
    if order == 0 || n < 4 * order {
        return Err(AnalysisError::TooShort {
            need: 4 * order.max(1),
            got: n,
        });
    }
    // Pencil parameter n/3 keeps the Hankel matrix tall.
    let l = n / 3;
    let rows = n - l;
    let y = DMatrix::from_fn(rows, l + 1, |i, j| series[i + j]);
    let mut svd = y.svd(false, true);
    svd.sort_by_singular_values();
    let sv = &svd.singular_values;
    let smax = sv.max();
    if !(smax > 0.0) {
        return Err(AnalysisError::RankDeficient("signal is identically zero".into()));
    }
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count().min(order);
    let vt = svd.v_t.unwrap();
    // Right singular vectors as columns, (l + 1) × rank.
    let v = vt.rows(0, rank).transpose();
    let v1 = v.rows(0, l).into_owned();
    let v2 = v.rows(1, l).into_owned();
    let pencil = v1
        .pseudo_inverse(1e-12)
        .map_err(|e| AnalysisError::RankDeficient(e.to_string()))?
        * v2;
    let z: Vec<Complex64> = pencil.complex_eigenvalues().iter().copied().collect();

    // Amplitudes by least squares on the Vandermonde system.
    let vander = DMatrix::from_fn(n, z.len(), |k, i| z[i].powu(k as u32));
    let rhs = DVector::from_iterator(n, series.iter().map(|&x| Complex64::new(x, 0.0)));
    let b = vander
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| AnalysisError::RankDeficient(e.to_string()))?;

    let window = n as f64 / sample_rate;
    let mut modes = Vec::new();
    for (zi, bi) in z.iter().zip(b.iter()) {
        let arg = zi.arg();
        // Keep one member of each conjugate pair, counting both halves.
        let amplitude = if arg.abs() < 1e-9 {
            bi.norm()
        } else if arg > 0.0 {
            2.0 * bi.norm()
        } else {
            continue;
        };
        modes.push(ModeEstimate {
            frequency: arg.abs() * sample_rate / (2.0 * std::f64::consts::PI),
            damping: -zi.norm().ln() * sample_rate,
            amplitude,
            energy: amplitude * amplitude * window,
        });
    }
    modes.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn damped(f: f64, sigma: f64, amp: f64, n: usize, fs: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                amp * (-sigma * t).exp() * (2.0 * PI * f * t).sin()
            })
            .collect()
    }

    #[test]
    fn single_damped_tone() {
        let x = damped(1.2, 0.3, 1.0, 960, 240.0);
        let m = estimate_modes(&x, 240.0, 2).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m[0].frequency - 1.2).abs() < 0.012);
        assert!((m[0].damping - 0.3).abs() < 0.003);
        assert!((m[0].amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_tones_ordered_by_energy() {
        let a = damped(0.8, 0.2, 1.0, 960, 240.0);
        let b = damped(1.6, 0.4, 0.5, 960, 240.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let m = estimate_modes(&x, 240.0, 4).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m[0].frequency - 0.8).abs() < 0.008 && (m[1].frequency - 1.6).abs() < 0.016);
        assert!(m[0].energy > m[1].energy);
    }

    #[test]
    fn two_tones_at_40_db() {
        let a = damped(0.8, 0.2, 1.0, 960, 240.0);
        let b = damped(1.6, 0.4, 0.5, 960, 240.0);
        let clean: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let p_sig = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
        let nd = Normal::new(0.0, (p_sig / 1e4).sqrt()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = clean.iter().map(|v| v + nd.sample(&mut rng)).collect();
        let m = estimate_modes(&x, 240.0, 4).unwrap();
        let near = |f: f64| m.iter().any(|e| (e.frequency - f).abs() < 0.01 * f);
        assert!(near(0.8) && near(1.6), "{m:?}");
    }

    #[test]
    fn constant_is_dc_only() {
        let m = estimate_modes(&[0.7; 100], 240.0, 4).unwrap();
        assert_eq!(m.len(), 1);
        assert!(
            m[0].frequency.abs() < 1e-9 && (m[0].amplitude - 0.7).abs() < 1e-9,
            "{m:?}"
        );
    }

    #[test]
    fn short_or_zero_rejected() {
        assert!(estimate_modes(&[1.0; 7], 1.0, 2).is_err());
        assert!(matches!(
            estimate_modes(&[0.0; 64], 1.0, 2),
            Err(AnalysisError::RankDeficient(_))
        ));
    }
}
