use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::frame::{fmt_seconds, fmt_value};
use super::{ChannelFrame, RecordsError, TimeAxis};
use crate::grid::{Branch, BusId, NetworkModel};
use crate::profiles::{format_time, parse_time};

/// The three frame schemas and their time-column headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    PfResult,
    Trans,
    Dist,
}

impl Schema {
    pub fn time_header(self) -> &'static str {
        match self {
            Schema::PfResult => "time",
            Schema::Trans | Schema::Dist => "Time(s)",
        }
    }

    pub fn accepts(self, name: &str) -> bool {
        match self {
            Schema::PfResult => pf_name_ok(name),
            Schema::Trans => trans_name_ok(name),
            Schema::Dist => dist_name_ok(name),
        }
    }
}

fn is_uint(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn pf_name_ok(name: &str) -> bool {
    let parts: Vec<&str> = name.split('_').collect();
    match parts.as_slice() {
        ["Vm" | "Va", bus] => is_uint(bus),
        ["P" | "Q", f, t, c] => is_uint(f) && is_uint(t) && !c.is_empty() && !c.contains(char::is_whitespace),
        _ => false,
    }
}

fn trans_name_ok(name: &str) -> bool {
    if let Some(bus) = name.strip_prefix("VOLT ") {
        return is_uint(bus);
    }
    let Some(rest) = name.strip_prefix("POWR ").or_else(|| name.strip_prefix("VARS ")) else {
        return false;
    };
    let Some((ends, ckt)) = rest.split_once(" CKT '") else {
        return false;
    };
    let Some((f, t)) = ends.split_once(" TO ") else {
        return false;
    };
    is_uint(f) && is_uint(t) && ckt.len() > 1 && ckt.ends_with('\'') && !ckt[..ckt.len() - 1].contains('\'')
}

fn dist_name_ok(name: &str) -> bool {
    let parts: Vec<&str> = name.split('.').collect();
    matches!(parts.as_slice(), [bus, node, "1" | "2" | "3"] if is_uint(bus) && !node.is_empty())
}

/// `Vm_<bus>`, `Va_<bus>` per bus, then `P_`/`Q_<from>_<to>_<ckt>` per branch.
pub fn pf_channel_names(net: &NetworkModel) -> Vec<String> {
    let mut out = Vec::new();
    for b in &net.buses {
        out.push(format!("Vm_{}", b.id));
        out.push(format!("Va_{}", b.id));
    }
    for br in &net.branches {
        let ckt = br.ckt_trimmed();
        out.push(format!("P_{}_{}_{}", br.from, br.to, ckt));
        out.push(format!("Q_{}_{}_{}", br.from, br.to, ckt));
    }
    out
}

pub fn trans_volt_channel(bus: BusId) -> String {
    format!("VOLT {bus}")
}

/// Active and reactive flow channel names with the raw circuit label.
pub fn trans_branch_channels(br: &Branch) -> (String, String) {
    (
        format!("POWR {} TO {} CKT '{}'", br.from, br.to, br.ckt),
        format!("VARS {} TO {} CKT '{}'", br.from, br.to, br.ckt),
    )
}

/// `<bus>.<node>.<phase>` with phase A as 1.
pub fn dist_channel(bus: BusId, node: &str, phase: usize) -> String {
    format!("{bus}.{node}.{}", phase + 1)
}

fn create(path: &Path) -> Result<BufWriter<File>, RecordsError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| RecordsError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn open(path: &Path) -> Result<BufReader<File>, RecordsError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| RecordsError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn csv_io(path: &str) -> impl Fn(csv::Error) -> RecordsError + '_ {
    move |e| RecordsError::Io {
        path: path.to_string(),
        source: e.into(),
    }
}

pub fn write_frame<W: Write>(frame: &ChannelFrame, schema: Schema, writer: W) -> Result<(), RecordsError> {
    if let Some(bad) = frame.names().iter().find(|n| !schema.accepts(n)) {
        return Err(RecordsError::SchemaMismatch(format!(
            "channel {bad:?} does not fit the {schema:?} schema"
        )));
    }
    if schema != Schema::PfResult && matches!(frame.time(), TimeAxis::Minutes(_)) {
        return Err(RecordsError::SchemaMismatch(
            "transient records need a seconds axis".into(),
        ));
    }
    let io = csv_io("<frame>");
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![schema.time_header().to_string()];
    header.extend(frame.names().iter().cloned());
    w.write_record(&header).map_err(&io)?;
    let cols = frame.columns();
    let mut row = Vec::with_capacity(cols.len() + 1);
    for i in 0..frame.n_rows() {
        row.clear();
        row.push(match frame.time() {
            TimeAxis::Minutes(t) => format_time(&t[i]),
            TimeAxis::Seconds(t) => fmt_seconds(t[i]),
        });
        row.extend(cols.iter().map(|c| fmt_value(c[i])));
        w.write_record(&row).map_err(&io)?;
    }
    w.flush().map_err(|source| RecordsError::Io {
        path: "<frame>".into(),
        source,
    })
}

pub fn read_frame<R: Read>(reader: R, schema: Schema) -> Result<ChannelFrame, RecordsError> {
    let parse = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        let msg = match e.kind() {
            csv::ErrorKind::UnequalLengths {
                expected_len, len, ..
            } => {
                format!("row has {len} fields, expected {expected_len}")
            }
            _ => e.to_string(),
        };
        RecordsError::Parse {
            line,
            column: None,
            msg,
        }
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(parse)?.clone();
    if headers.get(0) != Some(schema.time_header()) {
        return Err(RecordsError::SchemaMismatch(format!(
            "first column must be {:?}, found {:?}",
            schema.time_header(),
            headers.get(0)
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if let Some(bad) = names.iter().find(|n| !schema.accepts(n)) {
        return Err(RecordsError::SchemaMismatch(format!(
            "channel {bad:?} does not fit the {schema:?} schema"
        )));
    }

    let mut minutes = Vec::new();
    let mut seconds = Vec::new();
    let mut data = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(parse)?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = &rec[0];
        let as_seconds = schema != Schema::PfResult || (minutes.is_empty() && t.parse::<f64>().is_ok());
        if as_seconds {
            seconds.push(t.trim().parse::<f64>().map_err(|_| RecordsError::Parse {
                line,
                column: Some(1),
                msg: format!("bad time {t:?}"),
            })?);
        } else {
            minutes.push(parse_time(t).ok_or_else(|| RecordsError::Parse {
                line,
                column: Some(1),
                msg: format!("bad timestamp {t:?}"),
            })?);
        }
        for (k, col) in data.iter_mut().enumerate() {
            let field = &rec[k + 1];
            col.push(field.trim().parse::<f64>().map_err(|_| RecordsError::Parse {
                line,
                column: Some(k + 2),
                msg: format!("bad number {field:?}"),
            })?);
        }
    }
    if !minutes.is_empty() && !seconds.is_empty() {
        return Err(RecordsError::SchemaMismatch(
            "mixed timestamp and seconds time column".into(),
        ));
    }
    let time = if minutes.is_empty() {
        TimeAxis::Seconds(seconds)
    } else {
        TimeAxis::Minutes(minutes)
    };
    ChannelFrame::from_columns(time, names, data)
}

pub fn write_pf_result(frame: &ChannelFrame, path: &Path) -> Result<(), RecordsError> {
    write_frame(frame, Schema::PfResult, create(path)?)
}

pub fn read_pf_result(path: &Path) -> Result<ChannelFrame, RecordsError> {
    read_frame(open(path)?, Schema::PfResult)
}

pub fn write_trans(frame: &ChannelFrame, path: &Path) -> Result<(), RecordsError> {
    write_frame(frame, Schema::Trans, create(path)?)
}

pub fn read_trans(path: &Path) -> Result<ChannelFrame, RecordsError> {
    read_frame(open(path)?, Schema::Trans)
}

pub fn write_dist(frame: &ChannelFrame, path: &Path) -> Result<(), RecordsError> {
    write_frame(frame, Schema::Dist, create(path)?)
}

pub fn read_dist(path: &Path) -> Result<ChannelFrame, RecordsError> {
    read_frame(open(path)?, Schema::Dist)
}

/// Writes `trans.csv` and `dist.csv` into `dir`, creating it if needed.
pub fn write_transient(
    trans: &ChannelFrame,
    dist: &ChannelFrame,
    dir: &Path,
) -> Result<Vec<PathBuf>, RecordsError> {
    std::fs::create_dir_all(dir).map_err(|source| RecordsError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let t = dir.join("trans.csv");
    let d = dir.join("dist.csv");
    write_trans(trans, &t)?;
    write_dist(dist, &d)?;
    Ok(vec![t, d])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub row: usize,
    pub kind: String,
    pub target: BusId,
    pub t_on: f64,
    pub t_clear: Option<f64>,
    pub status: String,
}

pub const MANIFEST_HEADERS: [&str; 6] = ["row", "kind", "target", "t_on", "t_clear", "status"];

pub fn write_manifest(rows: &[ManifestRow], path: &Path) -> Result<(), RecordsError> {
    let p = path.display().to_string();
    let io = csv_io(&p);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(MANIFEST_HEADERS).map_err(&io)?;
    for r in rows {
        w.write_record([
            r.row.to_string(),
            r.kind.clone(),
            r.target.to_string(),
            fmt_seconds(r.t_on),
            r.t_clear.map(fmt_seconds).unwrap_or_default(),
            r.status.clone(),
        ])
        .map_err(&io)?;
    }
    w.flush().map_err(|source| RecordsError::Io {
        path: p.clone(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, RecordsError> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| RecordsError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            column: None,
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: usize| RecordsError::Parse {
            line,
            column: Some(column),
            msg: format!("bad value {:?}", &rec[column - 1]),
        };
        out.push(ManifestRow {
            row: rec[0].parse().map_err(|_| bad(1))?,
            kind: rec[1].to_string(),
            target: rec[2].parse().map_err(|_| bad(3))?,
            t_on: rec[3].parse().map_err(|_| bad(4))?,
            t_clear: if rec[4].is_empty() {
                None
            } else {
                Some(rec[4].parse().map_err(|_| bad(5))?)
            },
            status: rec[5].to_string(),
        });
    }
    Ok(out)
}

/// `row,set` assignment of batch rows to train/test.
pub fn write_split(assignment: &[(usize, &str)], path: &Path) -> Result<(), RecordsError> {
    let p = path.display().to_string();
    let io = csv_io(&p);
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["row", "set"]).map_err(&io)?;
    for (row, set) in assignment {
        w.write_record([row.to_string(), set.to_string()]).map_err(&io)?;
    }
    w.flush().map_err(|source| RecordsError::Io {
        path: p.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn minutes(n: usize) -> TimeAxis {
        let t0 = NaiveDate::from_ymd_opt(2018, 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        TimeAxis::Minutes((0..n).map(|k| t0 + chrono::Duration::minutes(k as i64)).collect())
    }

    fn two_bus_frame() -> ChannelFrame {
        let names = ["Vm_1", "Va_1", "Vm_2", "Va_2", "P_1_2_1", "Q_1_2_1"];
        let data = (0..6).map(|k| vec![k as f64 * 0.1 + 1.0 / 3.0, -0.05]).collect();
        ChannelFrame::from_columns(minutes(2), names.iter().map(|s| s.to_string()).collect(), data).unwrap()
    }

    #[test]
    fn pf_header_for_two_buses() {
        let mut buf = Vec::new();
        write_frame(&two_bus_frame(), Schema::PfResult, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "time,Vm_1,Va_1,Vm_2,Va_2,P_1_2_1,Q_1_2_1"
        );
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("2018-01-01T00:00:00,0.333333333,"));
    }

    #[test]
    fn pf_round_trip() {
        let f = two_bus_frame();
        let mut buf = Vec::new();
        write_frame(&f, Schema::PfResult, &mut buf).unwrap();
        assert_eq!(
            read_frame(buf.as_slice(), Schema::PfResult).unwrap(),
            f.quantized()
        );
    }

    #[test]
    fn empty_frame_is_header_only() {
        let f = ChannelFrame::from_columns(minutes(0), vec!["Vm_1".into()], vec![vec![]]).unwrap();
        let mut buf = Vec::new();
        write_frame(&f, Schema::PfResult, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time,Vm_1\n");
    }

    #[test]
    fn bad_pf_name_rejected() {
        let f = ChannelFrame::from_columns(minutes(1), vec!["Vx_1".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(
            write_frame(&f, Schema::PfResult, Vec::new()),
            Err(RecordsError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn transient_names() {
        let br = Branch {
            from: 151,
            to: 152,
            ckt: "1 ".into(),
            r: 0.0,
            x: 0.1,
            b: 0.0,
            status: Default::default(),
        };
        let (p, q) = trans_branch_channels(&br);
        assert_eq!(p, "POWR 151 TO 152 CKT '1 '");
        assert_eq!(q, "VARS 151 TO 152 CKT '1 '");
        assert!(Schema::Trans.accepts(&p) && Schema::Trans.accepts(&trans_volt_channel(3005)));
        assert_eq!(dist_channel(3005, "633", 0), "3005.633.1");
        assert!(Schema::Dist.accepts("3005.633.1"));
        assert!(!Schema::Dist.accepts("3005.633.4"));
    }

    #[test]
    fn trans_round_trip_keeps_trailing_space() {
        let t: Vec<f64> = (0..960).map(|k| k as f64 / 240.0).collect();
        let f = ChannelFrame::from_columns(
            TimeAxis::Seconds(t),
            vec!["VOLT 151".into(), "POWR 151 TO 152 CKT '1 '".into()],
            vec![vec![1.0123456789; 960], vec![0.5; 960]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_frame(&f, Schema::Trans, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "Time(s),VOLT 151,POWR 151 TO 152 CKT '1 '"
        );
        assert_eq!(text.lines().count(), 961);
        assert_eq!(text.lines().nth(2).unwrap(), "0.004167,1.01234568,0.5");
        let back = read_frame(buf.as_slice(), Schema::Trans).unwrap();
        assert_eq!(back, f.quantized());
    }

    #[test]
    fn dist_round_trip() {
        let f = ChannelFrame::from_columns(
            TimeAxis::Seconds(vec![0.0, 1.0 / 240.0]),
            vec!["3005.633.1".into(), "3005.633.2".into()],
            vec![vec![0.99, 0.98], vec![1.0, 0.97]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_frame(&f, Schema::Dist, &mut buf).unwrap();
        assert_eq!(read_frame(buf.as_slice(), Schema::Dist).unwrap(), f.quantized());
    }

    #[test]
    fn truncated_row_names_line() {
        let text = "Time(s),VOLT 1,VOLT 2\n0.000000,1,1\n0.004167,1\n";
        match read_frame(text.as_bytes(), Schema::Trans) {
            Err(RecordsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ManifestRow {
                row: 0,
                kind: "bus_fault".into(),
                target: 154,
                t_on: 1.0,
                t_clear: Some(1.1),
                status: "ok".into(),
            },
            ManifestRow {
                row: 1,
                kind: "gen_trip".into(),
                target: 206,
                t_on: 0.75,
                t_clear: None,
                status: "failed: blowup".into(),
            },
        ];
        let p = dir.path().join("manifest.csv");
        write_manifest(&rows, &p).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), rows);
    }
}
