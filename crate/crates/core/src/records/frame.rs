use std::collections::HashSet;

use chrono::NaiveDateTime;

use super::RecordsError;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeAxis {
    Minutes(Vec<NaiveDateTime>),
    Seconds(Vec<f64>),
}

impl TimeAxis {
    pub fn len(&self) -> usize {
        match self {
            TimeAxis::Minutes(t) => t.len(),
            TimeAxis::Seconds(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn first_non_increasing(&self) -> Option<usize> {
        match self {
            TimeAxis::Minutes(t) => t.windows(2).position(|w| w[1] <= w[0]),
            TimeAxis::Seconds(t) => t.windows(2).position(|w| !(w[1] > w[0])),
        }
    }
}

/// Named measurement channels on a shared time axis, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrame {
    time: TimeAxis,
    names: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl ChannelFrame {
    pub fn new(time: TimeAxis) -> Result<Self, RecordsError> {
        if let Some(k) = time.first_non_increasing() {
            return Err(RecordsError::InvalidFrame(format!(
                "time not strictly increasing at row {}",
                k + 1
            )));
        }
        Ok(ChannelFrame {
            time,
            names: Vec::new(),
            data: Vec::new(),
        })
    }

    pub fn from_columns(
        time: TimeAxis,
        names: Vec<String>,
        data: Vec<Vec<f64>>,
    ) -> Result<Self, RecordsError> {
        let mut f = ChannelFrame::new(time)?;
        if names.len() != data.len() {
            return Err(RecordsError::InvalidFrame("name and column counts differ".into()));
        }
        for (n, d) in names.into_iter().zip(data) {
            f.push(n, d)?;
        }
        Ok(f)
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<(), RecordsError> {
        let name = name.into();
        if values.len() != self.time.len() {
            return Err(RecordsError::InvalidFrame(format!(
                "channel {name} has {} values for {} rows",
                values.len(),
                self.time.len()
            )));
        }
        if self.names.contains(&name) {
            return Err(RecordsError::InvalidFrame(format!("duplicate channel {name}")));
        }
        self.names.push(name);
        self.data.push(values);
        Ok(())
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn n_rows(&self) -> usize {
        self.time.len()
    }

    pub fn n_channels(&self) -> usize {
        self.names.len()
    }

    /// Values rounded to 9 significant digits and seconds to microseconds,
    /// i.e. exactly what a write/read cycle reproduces.
    pub fn quantized(&self) -> ChannelFrame {
        let time = match &self.time {
            TimeAxis::Minutes(t) => TimeAxis::Minutes(t.clone()),
            TimeAxis::Seconds(t) => {
                TimeAxis::Seconds(t.iter().map(|x| fmt_seconds(*x).parse().unwrap()).collect())
            }
        };
        ChannelFrame {
            time,
            names: self.names.clone(),
            data: self
                .data
                .iter()
                .map(|c| c.iter().map(|&x| quantize(x)).collect())
                .collect(),
        }
    }

    /// The channels whose names pass `keep`, in their original order.
    pub fn select(&self, keep: impl Fn(&str) -> bool) -> ChannelFrame {
        let (names, data) = self
            .names
            .iter()
            .zip(&self.data)
            .filter(|(n, _)| keep(n))
            .map(|(n, d)| (n.clone(), d.clone()))
            .unzip();
        ChannelFrame {
            time: self.time.clone(),
            names,
            data,
        }
    }

    /// Concatenates channels of frames sharing one time axis.
    pub fn hstack(frames: &[ChannelFrame]) -> Result<ChannelFrame, RecordsError> {
        let Some(first) = frames.first() else {
            return Err(RecordsError::InvalidFrame("no frames to stack".into()));
        };
        let mut out = ChannelFrame::new(first.time.clone())?;
        let mut seen = HashSet::new();
        for f in frames {
            if f.time != first.time {
                return Err(RecordsError::InvalidFrame("time axes differ".into()));
            }
            for (n, d) in f.names.iter().zip(&f.data) {
                if !seen.insert(n.clone()) {
                    return Err(RecordsError::InvalidFrame(format!("duplicate channel {n}")));
                }
                out.push(n.clone(), d.clone())?;
            }
        }
        Ok(out)
    }
}

/// Rounds to 9 significant digits.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap()
}

/// Shortest decimal text that reproduces the 9-digit value.
pub fn fmt_value(x: f64) -> String {
    let q = quantize(x);
    if q == 0.0 {
        "0".into()
    } else {
        q.to_string()
    }
}

pub fn fmt_seconds(t: f64) -> String {
    format!("{t:.6}")
}
