use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use super::{format_time, normalize_load, parse_time, to_minute_grid, ProfileError};

/// Column headers of a zone file, spelled as in the published dataset.
pub const ZONE_HEADERS: [&str; 12] = [
    "time",
    "load_power",
    "wind_power",
    "solar_power",
    "DHI",
    "DNI",
    "GHI",
    "Dew Point",
    "Solar Zeinth Angle",
    "Wind Speed",
    "Relative Humidity",
    "Temperature",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weather {
    pub dhi: Vec<f64>,
    pub dni: Vec<f64>,
    pub ghi: Vec<f64>,
    pub dew_point: Vec<f64>,
    pub zenith: Vec<f64>,
    pub wind_speed: Vec<f64>,
    pub rel_humidity: Vec<f64>,
    pub temperature: Vec<f64>,
}

impl Weather {
    fn columns(&self) -> [&Vec<f64>; 8] {
        [
            &self.dhi,
            &self.dni,
            &self.ghi,
            &self.dew_point,
            &self.zenith,
            &self.wind_speed,
            &self.rel_humidity,
            &self.temperature,
        ]
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.dhi,
            &mut self.dni,
            &mut self.ghi,
            &mut self.dew_point,
            &mut self.zenith,
            &mut self.wind_speed,
            &mut self.rel_humidity,
            &mut self.temperature,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneProfile {
    pub zone: String,
    pub time: Vec<NaiveDateTime>,
    pub load_power: Vec<f64>,
    pub wind_power: Vec<f64>,
    pub solar_power: Vec<f64>,
    pub weather: Weather,
}

/// Profile values at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub load: f64,
    pub wind: f64,
    pub solar: f64,
}

impl ZoneProfile {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn value_columns(&self) -> Vec<&Vec<f64>> {
        let mut cols = vec![&self.load_power, &self.wind_power, &self.solar_power];
        cols.extend(self.weather.columns());
        cols
    }

    fn value_columns_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut cols = vec![&mut self.load_power, &mut self.wind_power, &mut self.solar_power];
        cols.extend(self.weather.columns_mut());
        cols
    }

    pub fn is_minute_grid(&self) -> bool {
        self.time.windows(2).all(|w| (w[1] - w[0]).num_seconds() == 60)
            && self
                .time
                .first()
                .is_none_or(|t| t.and_utc().timestamp() % 60 == 0)
    }

    /// Interpolates every column onto the minute grid.
    pub fn to_minutes(&self) -> Result<ZoneProfile, ProfileError> {
        if self.is_minute_grid() {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        let mut grid = None;
        for (src, dst) in self.value_columns().into_iter().zip(out.value_columns_mut()) {
            let (t, v) = to_minute_grid(&self.time, src)?;
            *dst = v;
            grid = Some(t);
        }
        out.time = grid.unwrap_or_default();
        Ok(out)
    }

    /// Load divided by its mean; renewables divided by their peak when they
    /// are not already on a 0–1 scale.
    pub fn normalized(&self) -> Result<ZoneProfile, ProfileError> {
        let mut out = self.clone();
        out.load_power = normalize_load(&self.load_power)?;
        for col in [&mut out.wind_power, &mut out.solar_power] {
            let peak = col.iter().cloned().fold(0.0, f64::max);
            if peak > 1.0 {
                col.iter_mut().for_each(|x| *x /= peak);
            }
        }
        Ok(out)
    }

    pub fn index_of(&self, t: NaiveDateTime) -> Option<usize> {
        let first = *self.time.first()?;
        let secs = (t - first).num_seconds();
        if secs < 0 || secs % 60 != 0 {
            return None;
        }
        let i = (secs / 60) as usize;
        (i < self.time.len() && self.time[i] == t).then_some(i)
    }

    pub fn sample(&self, t: NaiveDateTime) -> Result<ProfileSample, ProfileError> {
        let i = self.index_of(t).ok_or(ProfileError::ProfileGap(t))?;
        Ok(ProfileSample {
            load: self.load_power[i],
            wind: self.wind_power[i],
            solar: self.solar_power[i],
        })
    }
}

pub fn parse_zone_csv<R: Read>(reader: R, zone: &str) -> Result<ZoneProfile, ProfileError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(&e))?.clone();
    if headers.len() != ZONE_HEADERS.len() || headers.iter().zip(ZONE_HEADERS).any(|(a, b)| a.trim() != b) {
        return Err(ProfileError::Parse {
            line: 1,
            msg: format!(
                "expected headers {ZONE_HEADERS:?}, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        });
    }
    let mut p = ZoneProfile {
        zone: zone.to_string(),
        time: Vec::new(),
        load_power: Vec::new(),
        wind_power: Vec::new(),
        solar_power: Vec::new(),
        weather: Weather::default(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(&e))?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let t = parse_time(&rec[0]).ok_or_else(|| ProfileError::Parse {
            line,
            msg: format!("bad timestamp {:?}", &rec[0]),
        })?;
        p.time.push(t);
        for (k, col) in p.value_columns_mut().into_iter().enumerate() {
            let field = rec[k + 1].trim();
            let v = field.parse::<f64>().map_err(|_| ProfileError::Parse {
                line,
                msg: format!("column {:?}: bad number {field:?}", ZONE_HEADERS[k + 1]),
            })?;
            col.push(v);
        }
    }
    if let Some(k) = p.time.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ProfileError::NonMonotone(k + 1));
    }
    Ok(p)
}

fn parse_err(e: &csv::Error) -> ProfileError {
    ProfileError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        msg: e.to_string(),
    }
}

pub fn read_zone_csv(path: &Path) -> Result<ZoneProfile, ProfileError> {
    let file = std::fs::File::open(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let zone = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.trim_start_matches("ISO_zone_").to_string())
        .unwrap_or_default();
    parse_zone_csv(std::io::BufReader::new(file), &zone)
}

pub fn write_zone_csv<W: Write>(profile: &ZoneProfile, writer: W) -> Result<(), ProfileError> {
    let io = |e: csv::Error| ProfileError::Io {
        path: "<zone csv>".into(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ZONE_HEADERS).map_err(io)?;
    let cols = profile.value_columns();
    for (i, t) in profile.time.iter().enumerate() {
        let mut row = vec![format_time(t)];
        row.extend(cols.iter().map(|c| c[i].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| ProfileError::Io {
        path: "<zone csv>".into(),
        source,
    })
}

/// All zones of one profile source, on the minute grid and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub zones: Vec<ZoneProfile>,
}

impl ProfileSet {
    pub fn new(zones: Vec<ZoneProfile>) -> Result<Self, ProfileError> {
        if zones.is_empty() {
            return Err(ProfileError::EmptyInput);
        }
        let zones = zones
            .into_iter()
            .map(|z| z.to_minutes()?.normalized())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProfileSet { zones })
    }

    /// First and last minute covered by every zone.
    pub fn span(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        let start = self.zones.iter().filter_map(|z| z.time.first()).max()?;
        let end = self.zones.iter().filter_map(|z| z.time.last()).min()?;
        (start <= end).then_some((*start, *end))
    }

    pub fn sample(&self, zone: usize, t: NaiveDateTime) -> Result<ProfileSample, ProfileError> {
        self.zones.get(zone).ok_or(ProfileError::ProfileGap(t))?.sample(t)
    }
}

/// Reads every `ISO_zone_<k>.csv` in `dir`, ordered by `k`.
pub fn read_profile_dir(dir: &Path) -> Result<ProfileSet, ProfileError> {
    let io = |source| ProfileError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut files: Vec<(u64, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("ISO_zone_")
            .and_then(|r| r.strip_suffix(".csv"))
        {
            if let Ok(k) = k.parse() {
                files.push((k, path));
            }
        }
    }
    if files.is_empty() {
        return Err(io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no ISO_zone_<k>.csv files",
        )));
    }
    files.sort();
    let zones = files
        .iter()
        .map(|(_, p)| read_zone_csv(p))
        .collect::<Result<Vec<_>, _>>()?;
    ProfileSet::new(zones)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{synth_zone, SyntheticZone};

    #[test]
    fn zone_csv_round_trip() {
        let z = synth_zone(&SyntheticZone {
            minutes: 90,
            ..SyntheticZone::default()
        });
        let mut buf = Vec::new();
        write_zone_csv(&z, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .starts_with("time,load_power,wind_power,solar_power,DHI,DNI,GHI,Dew Point,Solar Zeinth Angle,"));
        let back = parse_zone_csv(buf.as_slice(), &z.zone).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn space_separated_timestamps_accepted() {
        let text = format!(
            "{}\n2018-01-01 00:00:00,1,0,0,0,0,0,0,0,0,0,0\n2018-01-01 00:01:00,3,0,0,0,0,0,0,0,0,0,0\n",
            ZONE_HEADERS.join(",")
        );
        let z = parse_zone_csv(text.as_bytes(), "1").unwrap();
        assert!(z.is_minute_grid());
        let set = ProfileSet::new(vec![z]).unwrap();
        assert_eq!(set.zones[0].load_power, vec![0.5, 1.5]);
    }

    #[test]
    fn bad_number_names_line() {
        let text = format!(
            "{}\n2018-01-01 00:00:00,x,0,0,0,0,0,0,0,0,0,0\n",
            ZONE_HEADERS.join(",")
        );
        match parse_zone_csv(text.as_bytes(), "1") {
            Err(ProfileError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sample_outside_grid_is_gap() {
        let z = synth_zone(&SyntheticZone {
            minutes: 10,
            ..SyntheticZone::default()
        });
        let late = z.time[9] + chrono::Duration::minutes(1);
        assert!(matches!(z.sample(late), Err(ProfileError::ProfileGap(_))));
        assert!(z.sample(z.time[3]).is_ok());
    }
}
