use std::path::Path;

use anyhow::{bail, Context, Result};
use gridtd_core::profiles::parse_time;

/// A CSV of one label column followed by numeric channels.
pub struct Table {
    pub names: Vec<String>,
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            bail!(
                "{}: expected a label column and at least one channel",
                path.display()
            );
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut labels = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            labels.push(rec[0].to_string());
            for (c, col) in columns.iter_mut().enumerate() {
                let v = rec.get(c + 1).unwrap_or("");
                col.push(
                    v.trim()
                        .parse()
                        .with_context(|| format!("{} row {}: bad value {v:?}", path.display(), line + 2))?,
                );
            }
        }
        Ok(Table {
            names,
            labels,
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => Ok(&self.columns[i]),
            None => bail!("no column {name:?}"),
        }
    }

    /// Sample interval in seconds from the label column, which holds either
    /// seconds or timestamps.
    pub fn sample_interval(&self) -> Result<f64> {
        if self.labels.len() < 2 {
            bail!("need at least two rows to infer the sample interval");
        }
        let (a, b) = (&self.labels[0], &self.labels[1]);
        if let (Ok(x), Ok(y)) = (a.parse::<f64>(), b.parse::<f64>()) {
            return Ok(y - x);
        }
        match (parse_time(a), parse_time(b)) {
            (Some(x), Some(y)) => Ok((y - x).num_seconds() as f64),
            _ => bail!("cannot infer sample interval from {a:?}, {b:?}"),
        }
    }
}

/// Reads a CSV of string columns by header name.
pub fn read_string_columns(path: &Path, wanted: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == *w)
                .with_context(|| format!("{}: no column {w:?}", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); wanted.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (o, &i) in out.iter_mut().zip(&idx) {
            o.push(rec[i].trim().to_string());
        }
    }
    Ok(out)
}
