use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{mean, AnalysisError};

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub frequency: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn df(&self) -> f64 {
        self.frequency.get(1).copied().unwrap_or(0.0)
    }

    /// Integral of the density; equals the series variance for a faithful
    /// estimate.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.df()
    }

    /// Indices of local maxima, strongest first.
    pub fn peaks(&self) -> Vec<usize> {
        let d = &self.density;
        let mut idx: Vec<usize> = (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1])
            .collect();
        idx.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
        idx
    }
}

/// Welch estimate with segments of half the series length.
pub fn power_spectral_density(series: &[f64], dt: f64) -> Result<Psd, AnalysisError> {
    welch(series, dt, series.len() / 2)
}

/// Welch-averaged periodogram: periodic Hann window, 50% overlap, mean
/// removed per segment.
pub fn welch(series: &[f64], dt: f64, nperseg: usize) -> Result<Psd, AnalysisError> {
    if nperseg < 2 || series.len() < 2 * nperseg.max(2) - nperseg / 2 {
        return Err(AnalysisError::TooShort {
            need: 2 * nperseg.max(2),
            got: series.len(),
        });
    }
    let step = nperseg / 2;
    let window: Vec<f64> = (0..nperseg)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / nperseg as f64).cos())
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fs = 1.0 / dt;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nperseg);
    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut segments = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    let mut start = 0;
    while start + nperseg <= series.len() {
        let seg = &series[start..start + nperseg];
        let m = mean(seg);
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * segments as f64);
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (nperseg % 2 == 0 && k == n_bins - 1) {
                1.0
            } else {
                2.0
            };
            a * scale * one_sided
        })
        .collect();
    let frequency = (0..n_bins).map(|k| k as f64 * fs / nperseg as f64).collect();
    Ok(Psd { frequency, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn variance(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
    }

    fn tone(n: usize, period: f64, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|k| amp * (2.0 * PI * k as f64 / period).sin())
            .collect()
    }

    #[test]
    fn daily_tone_peaks_at_one_per_day() {
        let n = 4 * 7 * 1440;
        let x = tone(n, 1440.0, 1.0);
        let psd = power_spectral_density(&x, 60.0).unwrap();
        let peak = psd.peaks()[0];
        let target = 1.0 / 86400.0;
        assert!((psd.frequency[peak] - target).abs() <= psd.df());
        assert!((psd.total_power() / variance(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn three_tones_three_peaks() {
        let n = 4 * 7 * 1440;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64;
                (2.0 * PI * t / 720.0).sin() + (2.0 * PI * t / 1440.0).sin() + (2.0 * PI * t / 10080.0).sin()
            })
            .collect();
        let psd = power_spectral_density(&x, 60.0).unwrap();
        let mut f: Vec<f64> = psd.peaks()[..3].iter().map(|&i| psd.frequency[i]).collect();
        f.sort_by(f64::total_cmp);
        let want = [1.0 / (7.0 * 86400.0), 1.0 / 86400.0, 2.0 / 86400.0];
        for (a, b) in f.iter().zip(want) {
            assert!((a - b).abs() <= psd.df(), "{a} vs {b}");
        }
    }

    #[test]
    fn white_noise_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nd = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..65536).map(|_| nd.sample(&mut rng)).collect();
        let psd = welch(&x, 1.0, 256).unwrap();
        let mut d = psd.density[1..psd.density.len() - 1].to_vec();
        d.sort_by(f64::total_cmp);
        let median = d[d.len() / 2];
        assert!(d.iter().all(|&v| v < 5.0 * median));
        assert!((psd.total_power() / variance(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn too_short_rejected() {
        assert!(matches!(
            power_spectral_density(&[1.0, 2.0, 3.0], 1.0),
            Err(AnalysisError::TooShort { .. })
        ));
    }
}
