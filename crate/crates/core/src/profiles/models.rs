use chrono::{Duration, DurationRound, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::ProfileError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindCurve {
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
    pub p_rated: f64,
}

impl Default for WindCurve {
    fn default() -> Self {
        WindCurve {
            cut_in: 3.0,
            rated: 12.0,
            cut_out: 25.0,
            p_rated: 1.0,
        }
    }
}

/// Turbine output for hub-height wind speed `v`: zero outside
/// [cut_in, cut_out), rated power from `rated`, cubic ramp in between.
pub fn wind_power(v: f64, curve: &WindCurve) -> f64 {
    let WindCurve {
        cut_in,
        rated,
        cut_out,
        p_rated,
    } = *curve;
    if v < cut_in || v >= cut_out {
        0.0
    } else if v >= rated {
        p_rated
    } else {
        p_rated * (v.powi(3) - cut_in.powi(3)) / (rated.powi(3) - cut_in.powi(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    pub p_dc0: f64,
    pub gamma: f64,
    pub noct: f64,
}

impl Default for PvParams {
    fn default() -> Self {
        PvParams {
            p_dc0: 1.0,
            gamma: -0.004,
            noct: 45.0,
        }
    }
}

/// PV array output from global horizontal irradiance with a NOCT cell
/// temperature model.
pub fn solar_power(ghi: f64, temp_air: f64, p: &PvParams) -> f64 {
    let cell = temp_air + (p.noct - 20.0) / 800.0 * ghi;
    (p.p_dc0 * (ghi / 1000.0) * (1.0 + p.gamma * (cell - 25.0))).max(0.0)
}

pub fn normalize_load(series: &[f64]) -> Result<Vec<f64>, ProfileError> {
    if series.is_empty() {
        return Err(ProfileError::EmptyInput);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    if !(mean > 0.0) {
        return Err(ProfileError::DegenerateSeries(mean));
    }
    Ok(series.iter().map(|x| x / mean).collect())
}

/// Linear interpolation onto every whole minute between the first and last
/// stamp. Values before and after the input range are not produced.
pub fn to_minute_grid(
    times: &[NaiveDateTime],
    values: &[f64],
) -> Result<(Vec<NaiveDateTime>, Vec<f64>), ProfileError> {
    assert_eq!(times.len(), values.len(), "times and values differ in length");
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(ProfileError::EmptyInput);
    };
    if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ProfileError::NonMonotone(k + 1));
    }
    let trunc = first
        .duration_trunc(Duration::minutes(1))
        .expect("timestamp in range");
    let start = if trunc == first {
        first
    } else {
        trunc + Duration::minutes(1)
    };
    let n = ((last - start).num_seconds().div_euclid(60) + 1).max(0) as usize;

    let mut out_t = Vec::with_capacity(n);
    let mut out_v = Vec::with_capacity(n);
    let mut k = 0;
    for m in 0..n {
        let t = start + Duration::minutes(m as i64);
        while k + 1 < times.len() && times[k + 1] <= t {
            k += 1;
        }
        let v = if k + 1 == times.len() || times[k] == t {
            values[k]
        } else {
            let span = (times[k + 1] - times[k]).num_milliseconds() as f64;
            let w = (t - times[k]).num_milliseconds() as f64 / span;
            values[k] + w * (values[k + 1] - values[k])
        };
        out_t.push(t);
        out_v.push(v);
    }
    Ok((out_t, out_v))
}
