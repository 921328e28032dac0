use super::{same_len, AnalysisError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointErrors {
    pub rmse: f64,
    pub mae: f64,
    /// Mean absolute percentage error as a fraction.
    pub mape: f64,
}

pub fn point_errors(y: &[f64], y_hat: &[f64]) -> Result<PointErrors, AnalysisError> {
    same_len(y.len(), y_hat.len())?;
    if let Some(i) = y.iter().position(|&v| v == 0.0) {
        return Err(AnalysisError::ZeroActual(i));
    }
    let n = y.len() as f64;
    let (mut se, mut ae, mut pe) = (0.0, 0.0, 0.0);
    for (a, f) in y.iter().zip(y_hat) {
        let e = f - a;
        se += e * e;
        ae += e.abs();
        pe += (e / a).abs();
    }
    Ok(PointErrors {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        mape: pe / n,
    })
}

/// Interval forecasts with their actuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastEval {
    pub y: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub y_l: Vec<f64>,
    pub y_u: Vec<f64>,
    /// Significance level, 0.05 for 95% intervals.
    pub a: f64,
    pub horizon: String,
}

impl ForecastEval {
    pub fn new(y: Vec<f64>, y_hat: Vec<f64>, y_l: Vec<f64>, y_u: Vec<f64>) -> Result<Self, AnalysisError> {
        same_len(y.len(), y_hat.len())?;
        same_len(y.len(), y_l.len())?;
        same_len(y.len(), y_u.len())?;
        if let Some(i) = y_l.iter().zip(&y_u).position(|(l, u)| !(l <= u)) {
            return Err(AnalysisError::InvalidInterval(i));
        }
        Ok(ForecastEval {
            y,
            y_hat,
            y_l,
            y_u,
            a: 0.05,
            horizon: String::new(),
        })
    }
}

/// Mean interval score: width plus 2/a times the distance by which the
/// actual falls outside the interval.
pub fn mean_interval_score(ev: &ForecastEval) -> f64 {
    let k = 2.0 / ev.a;
    let total: f64 =
        ev.y.iter()
            .zip(ev.y_l.iter().zip(&ev.y_u))
            .map(|(&y, (&l, &u))| {
                let mut s = u - l;
                if y < l {
                    s += k * (l - y);
                }
                if y > u {
                    s += k * (y - u);
                }
                s
            })
            .sum();
    total / ev.y.len() as f64
}

/// Persistence forecast: the value at each origin t predicts t + `horizon`.
/// Returns forecasts and the matching actuals.
pub fn naive_forecast(history: &[f64], horizon: usize) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    if history.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if horizon >= history.len() {
        return Err(AnalysisError::TooShort {
            need: horizon + 1,
            got: history.len(),
        });
    }
    let n = history.len() - horizon;
    Ok((history[..n].to_vec(), history[horizon..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_error_examples() {
        assert_eq!(
            point_errors(&[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            PointErrors {
                rmse: 0.0,
                mae: 0.0,
                mape: 0.0
            }
        );
        let e = point_errors(&[1.0, 1.0], &[1.1, 0.9]).unwrap();
        assert!((e.rmse - 0.1).abs() < 1e-12 && (e.mae - 0.1).abs() < 1e-12 && (e.mape - 0.1).abs() < 1e-12);
        let e = point_errors(&[2.0], &[1.0]).unwrap();
        assert_eq!((e.rmse, e.mae, e.mape), (1.0, 1.0, 0.5));
        assert_eq!(point_errors(&[0.0], &[1.0]), Err(AnalysisError::ZeroActual(0)));
    }

    fn one(y: f64, l: f64, u: f64) -> ForecastEval {
        ForecastEval::new(vec![y], vec![y], vec![l], vec![u]).unwrap()
    }

    #[test]
    fn mis_examples() {
        assert!((mean_interval_score(&one(1.0, 0.9, 1.1)) - 0.2).abs() < 1e-12);
        assert!((mean_interval_score(&one(1.2, 0.9, 1.1)) - 4.2).abs() < 1e-12);
        assert_eq!(mean_interval_score(&one(1.0, 1.0, 1.0)), 0.0);
        assert!(ForecastEval::new(vec![1.0], vec![1.0], vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn naive_examples() {
        let (f, a) = naive_forecast(&[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!((f.clone(), a.clone()), (vec![1.0, 2.0], vec![2.0, 3.0]));
        assert_eq!(point_errors(&a, &f).unwrap().mae, 1.0);
        let (f, a) = naive_forecast(&[4.0; 50], 7).unwrap();
        assert_eq!(point_errors(&a, &f).unwrap().rmse, 0.0);
    }

    proptest! {
        #[test]
        fn mis_at_least_width(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 1..40)
        ) {
            let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let l: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let u: Vec<f64> = rows.iter().map(|r| r.1 + r.2).collect();
            let width = u.iter().zip(&l).map(|(u, l)| u - l).sum::<f64>() / y.len() as f64;
            let covered = y.iter().zip(l.iter().zip(&u)).all(|(y, (l, u))| l <= y && y <= u);
            let ev = ForecastEval::new(y.clone(), y, l, u).unwrap();
            let mis = mean_interval_score(&ev);
            prop_assert!(mis >= width - 1e-12);
            prop_assert_eq!((mis - width).abs() < 1e-12, covered);
        }
    }
}
