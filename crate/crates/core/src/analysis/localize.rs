use std::collections::BTreeMap;
use std::ops::Range;

use super::{mean, std_dev, AnalysisError};
use crate::grid::BusId;
use crate::records::ChannelFrame;

/// Buses a channel observes: the bus of `VOLT <b>`, both ends of a
/// `POWR`/`VARS` branch channel, the coupling bus of `<b>.<node>.<phase>`.
pub fn channel_buses(name: &str) -> Vec<BusId> {
    if let Some(rest) = name.strip_prefix("VOLT ") {
        return rest.trim().parse().into_iter().collect();
    }
    if let Some(rest) = name.strip_prefix("POWR ").or_else(|| name.strip_prefix("VARS ")) {
        let mut it = rest.split_whitespace();
        let from = it.next().and_then(|s| s.parse().ok());
        let to = it.nth(1).and_then(|s| s.parse().ok());
        return from.into_iter().chain(to).collect();
    }
    name.split('.')
        .next()
        .and_then(|b| b.parse().ok())
        .into_iter()
        .collect()
}

fn entropy16(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
        (l.min(v), h.max(v))
    });
    if !(hi > lo) {
        return 0.0;
    }
    let mut bins = [0usize; 16];
    for &v in x {
        let k = (((v - lo) / (hi - lo)) * 16.0) as usize;
        bins[k.min(15)] += 1;
    }
    let n = x.len() as f64;
    bins.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn signature(pre: &[f64], ev: &[f64]) -> [f64; 5] {
    let (lo, hi) = ev.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
        (l.min(v), h.max(v))
    });
    let rms = (ev.iter().map(|v| v * v).sum::<f64>() / ev.len() as f64).sqrt();
    let peak = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let crest = if rms > 0.0 { peak / rms } else { 0.0 };
    [
        entropy16(ev),
        std_dev(ev),
        hi - lo,
        (mean(ev) - mean(pre)).abs(),
        crest,
    ]
}

/// Ranks buses by how strongly the channels observing them react in the
/// event window: five signature statistics per channel, z-scored across
/// channels and averaged; each bus takes its best channel. Ties go to the
/// lower bus id.
pub fn pmu_signature_localize(
    frame: &ChannelFrame,
    pre: Range<usize>,
    event: Range<usize>,
) -> Result<Vec<BusId>, AnalysisError> {
    let len = frame.n_rows();
    for w in [&pre, &event] {
        if w.start >= w.end || w.end > len {
            return Err(AnalysisError::Window {
                start: w.start,
                end: w.end,
                len,
            });
        }
    }
    let stats: Vec<[f64; 5]> = frame
        .columns()
        .iter()
        .map(|c| signature(&c[pre.clone()], &c[event.clone()]))
        .collect();
    if stats.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut score = vec![0.0; stats.len()];
    for k in 0..5 {
        let col: Vec<f64> = stats.iter().map(|s| s[k]).collect();
        let (m, sd) = (mean(&col), std_dev(&col));
        if sd > 0.0 {
            for (s, v) in score.iter_mut().zip(&col) {
                *s += (v - m) / sd / 5.0;
            }
        }
    }
    let mut best: BTreeMap<BusId, f64> = BTreeMap::new();
    for (name, s) in frame.names().iter().zip(&score) {
        for b in channel_buses(name) {
            let e = best.entry(b).or_insert(f64::NEG_INFINITY);
            *e = e.max(*s);
        }
    }
    let mut ranked: Vec<(BusId, f64)> = best.into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().map(|(b, _)| b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::TimeAxis;

    fn frame(cols: Vec<(&str, Vec<f64>)>) -> ChannelFrame {
        let n = cols[0].1.len();
        let t = TimeAxis::Seconds((0..n).map(|k| k as f64 / 240.0).collect());
        let (names, data): (Vec<String>, Vec<Vec<f64>>) =
            cols.into_iter().map(|(a, b)| (a.to_string(), b)).unzip();
        ChannelFrame::from_columns(t, names, data).unwrap()
    }

    #[test]
    fn parses_channel_buses() {
        assert_eq!(channel_buses("VOLT 154"), vec![154]);
        assert_eq!(channel_buses("POWR 151 TO 152 CKT '1 '"), vec![151, 152]);
        assert_eq!(channel_buses("3005.633.1"), vec![3005]);
    }

    #[test]
    fn step_channel_ranks_first() {
        let flat = vec![1.0; 100];
        let step: Vec<f64> = (0..100).map(|k| if k < 60 { 1.0 } else { 0.7 }).collect();
        let f = frame(vec![
            ("VOLT 101", flat.clone()),
            ("VOLT 205", step),
            ("VOLT 154", flat),
        ]);
        assert_eq!(pmu_signature_localize(&f, 0..40, 40..100).unwrap()[0], 205);
    }

    #[test]
    fn identical_channels_tie_to_lowest_id() {
        let x: Vec<f64> = (0..100).map(|k| (k as f64 * 0.3).sin()).collect();
        let f = frame(vec![
            ("VOLT 300", x.clone()),
            ("VOLT 20", x.clone()),
            ("VOLT 7", x),
        ]);
        assert_eq!(
            pmu_signature_localize(&f, 0..50, 50..100).unwrap(),
            vec![7, 20, 300]
        );
    }

    #[test]
    fn window_outside_frame() {
        let f = frame(vec![("VOLT 1", vec![1.0; 10])]);
        assert!(pmu_signature_localize(&f, 0..5, 5..20).is_err());
    }
}
