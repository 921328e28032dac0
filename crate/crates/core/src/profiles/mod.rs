//! Zone load, renewable and weather profiles on a minute grid.

mod models;
mod synth;
mod zone;

pub use models::{normalize_load, solar_power, to_minute_grid, wind_power, PvParams, WindCurve};
pub use synth::{synth_zone, SyntheticZone, Tone};
pub use zone::{
    parse_zone_csv, read_profile_dir, read_zone_csv, write_zone_csv, ProfileSample, ProfileSet, Weather,
    ZoneProfile, ZONE_HEADERS,
};

use chrono::NaiveDateTime;

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("series mean {0} is not positive")]
    DegenerateSeries(f64),
    #[error("empty input series")]
    EmptyInput,
    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotone(usize),
    #[error("no profile data at {0}")]
    ProfileGap(NaiveDateTime),
}

/// Minute timestamps are written as ISO-8601 and read in either the ISO form
/// or with a space separator as used by the zone files.
pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn parse_time(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M"))
        .ok()
}

pub fn format_time(t: &NaiveDateTime) -> String {
    t.format(TIME_FORMAT).to_string()
}
