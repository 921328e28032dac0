//! Shipped example cases, embedded so that tests and the CLI run without
//! any files on disk.

use crate::grid::{parse_case, FeederModel, GridError, NetworkModel};

pub const T23LIKE_JSON: &str = include_str!("../../../cases/t23like.json");
pub const F13LIKE_JSON: &str = include_str!("../../../cases/f13like.json");

/// 23-bus transmission grid with two 13-node feeders at buses 3005 and 3007.
pub fn t23like() -> NetworkModel {
    parse_case(T23LIKE_JSON).expect("shipped case is valid")
}

/// Standalone copy of the 13-node feeder, coupled at bus 3005.
pub fn f13like() -> FeederModel {
    parse_feeder(F13LIKE_JSON).expect("shipped feeder is valid")
}

pub fn parse_feeder(text: &str) -> Result<FeederModel, GridError> {
    let f: FeederModel = serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
    f.validate().map_err(GridError::Validation)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GeneratorKind;

    #[test]
    fn t23like_topology_statistics() {
        let net = t23like();
        assert_eq!(net.buses.len(), 23);
        assert_eq!(net.generators.len(), 6);
        assert_eq!(
            net.generators
                .iter()
                .filter(|g| g.kind == GeneratorKind::Wind)
                .count(),
            1
        );
        assert_eq!(net.load_bus_count(), 7);
        assert_eq!(net.feeders.len(), 2);
        assert!(net
            .branches
            .iter()
            .any(|b| b.from == 151 && b.to == 152 && b.ckt == "1 "));
    }

    #[test]
    fn f13like_has_thirteen_nodes() {
        let f = f13like();
        assert_eq!(f.nodes.len(), 13);
        assert_eq!(f.sections.len(), 12);
        assert!((f.total_load().re - 0.8665).abs() < 1e-12);
    }
}
