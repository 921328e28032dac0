use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{normalize_load, solar_power, wind_power, PvParams, Weather, WindCurve, ZoneProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub period_hours: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Offline stand-in for a zone file: periodic load with noise, AR(1) wind
/// and clear-sky irradiance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticZone {
    pub zone: String,
    pub start: NaiveDateTime,
    pub minutes: usize,
    pub tones: Vec<Tone>,
    pub noise_std: f64,
    /// When false, wind and solar output are held at zero.
    pub renewables: bool,
    pub wind_mean: f64,
    pub latitude_deg: f64,
    pub curve: WindCurve,
    pub pv: PvParams,
    pub seed: u64,
}

impl Default for SyntheticZone {
    fn default() -> Self {
        SyntheticZone {
            zone: "1".into(),
            start: NaiveDate::from_ymd_opt(2018, 1, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            minutes: 1440,
            tones: vec![
                Tone {
                    period_hours: 24.0,
                    amplitude: 0.15,
                    phase: -PI / 2.0,
                },
                Tone {
                    period_hours: 12.0,
                    amplitude: 0.05,
                    phase: 0.0,
                },
                Tone {
                    period_hours: 168.0,
                    amplitude: 0.08,
                    phase: 0.0,
                },
            ],
            noise_std: 0.01,
            renewables: true,
            wind_mean: 8.0,
            latitude_deg: 35.0,
            curve: WindCurve::default(),
            pv: PvParams::default(),
            seed: 0,
        }
    }
}

pub fn synth_zone(cfg: &SyntheticZone) -> ZoneProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let n = cfg.minutes;
    let mut p = ZoneProfile {
        zone: cfg.zone.clone(),
        time: Vec::with_capacity(n),
        load_power: Vec::with_capacity(n),
        wind_power: Vec::with_capacity(n),
        solar_power: Vec::with_capacity(n),
        weather: Weather::default(),
    };
    let lat = cfg.latitude_deg.to_radians();
    let mut gust = 0.0;
    for m in 0..n {
        let t = cfg.start + Duration::minutes(m as i64);
        let hours = m as f64 / 60.0;
        let load: f64 = 1.0
            + cfg
                .tones
                .iter()
                .map(|tone| tone.amplitude * (2.0 * PI * hours / tone.period_hours + tone.phase).sin())
                .sum::<f64>()
            + cfg.noise_std * unit.sample(&mut rng);

        let clock = t.hour() as f64 + t.minute() as f64 / 60.0;
        let doy = t.ordinal() as f64;
        let decl = (23.44f64).to_radians() * (2.0 * PI * (284.0 + doy) / 365.0).sin();
        let hour_angle = (15.0 * (clock - 12.0)).to_radians();
        let cos_z = lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos();
        let zenith = cos_z.clamp(-1.0, 1.0).acos().to_degrees();
        let ghi = if cos_z > 0.0 {
            1000.0 * 0.8 * cos_z.powf(1.15)
        } else {
            0.0
        };
        let dhi = 0.15 * ghi;
        let dni = if cos_z > 0.05 { (ghi - dhi) / cos_z } else { 0.0 };
        let temperature = 12.0 + 8.0 * (2.0 * PI * (clock - 9.0) / 24.0).sin();
        let dew_point = temperature - 6.0;
        let magnus = |x: f64| (17.625 * x / (243.04 + x)).exp();
        let rel_humidity = 100.0 * magnus(dew_point) / magnus(temperature);

        gust = 0.999 * gust + 0.09 * unit.sample(&mut rng);
        let wind_speed = (cfg.wind_mean + 1.5 * (2.0 * PI * (clock - 15.0) / 24.0).cos() + gust).max(0.0);

        p.time.push(t);
        p.load_power.push(load);
        if cfg.renewables {
            p.wind_power.push(wind_power(wind_speed, &cfg.curve));
            p.solar_power.push(solar_power(ghi, temperature, &cfg.pv));
        } else {
            p.wind_power.push(0.0);
            p.solar_power.push(0.0);
        }
        let w = &mut p.weather;
        w.dhi.push(dhi);
        w.dni.push(dni);
        w.ghi.push(ghi);
        w.dew_point.push(dew_point);
        w.zenith.push(zenith);
        w.wind_speed.push(wind_speed);
        w.rel_humidity.push(rel_humidity);
        w.temperature.push(temperature);
    }
    if n > 0 {
        p.load_power = normalize_load(&p.load_power).expect("synthetic load is positive");
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SyntheticZone {
            minutes: 500,
            seed: 3,
            ..SyntheticZone::default()
        };
        assert_eq!(synth_zone(&cfg), synth_zone(&cfg));
        let other = synth_zone(&SyntheticZone {
            seed: 4,
            ..cfg.clone()
        });
        assert_ne!(other.load_power, synth_zone(&cfg).load_power);
    }

    #[test]
    fn load_has_unit_mean_and_renewables_in_range() {
        let z = synth_zone(&SyntheticZone {
            minutes: 3 * 1440,
            ..SyntheticZone::default()
        });
        let mean = z.load_power.iter().sum::<f64>() / z.len() as f64;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!(z
            .wind_power
            .iter()
            .chain(&z.solar_power)
            .all(|&x| (0.0..=1.0).contains(&x)));
        // Dark at local midnight, producing at noon.
        assert_eq!(z.solar_power[0], 0.0);
        assert!(z.solar_power[720] > 0.2);
        assert!(z.is_minute_grid());
    }
}
