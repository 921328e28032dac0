use std::path::Path;

use super::{GridError, NetworkModel};

/// Reads and validates a JSON case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkModel, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<NetworkModel, GridError> {
    let mut net: NetworkModel = serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    net.rebuild_index();
    net.validate()?;
    Ok(net)
}

/// Serializes a network to the case format read by [`parse_case`].
pub fn write_case(net: &NetworkModel) -> String {
    serde_json::to_string_pretty(net).expect("network model is always serializable")
}
