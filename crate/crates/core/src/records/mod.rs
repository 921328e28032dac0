//! Channel frames and the CSV record schemas: minute power-flow results,
//! transient `trans.csv`/`dist.csv`, and batch manifests.

mod frame;
mod schema;

pub use frame::{fmt_seconds, fmt_value, quantize, ChannelFrame, TimeAxis};
pub use schema::{
    dist_channel, pf_channel_names, read_dist, read_frame, read_manifest, read_pf_result, read_trans,
    trans_branch_channels, trans_volt_channel, write_dist, write_frame, write_manifest, write_pf_result,
    write_split, write_trans, write_transient, ManifestRow, Schema,
};

#[derive(Debug, thiserror::Error)]
pub enum RecordsError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("line {line}{}: {msg}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: u64,
        column: Option<usize>,
        msg: String,
    },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}
