//! Static transmission + distribution network description.
//!
//! A [`NetworkModel`] is built once from a JSON case file, validated, and then
//! shared read-only by every solver and simulation in the crate. All
//! electrical quantities are per-unit on the system `base_mva`.

mod case;
mod feeder;
mod ybus;

pub use case::{load_case, parse_case, write_case};
pub use feeder::{FeederLoad, FeederModel, FeederSection, FeederTopology, PhaseMatrix, PvPlant};
pub(crate) use ybus::stamp_branch;
pub use ybus::{branch_admittance, build_ybus, Ybus};

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dynamics::InverterParams;

/// Integer bus label as used in the case file and in channel names.
pub type BusId = u32;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("failed to read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed case file: {0}")]
    Parse(String),
    #[error("invalid network: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
    Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub base_kv: f64,
    /// Voltage magnitude setpoint, only meaningful for slack and generator buses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    #[default]
    In,
    Out,
}

fn default_ckt() -> String {
    "1 ".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    /// Circuit label, stored verbatim (PSS/E style labels carry a trailing space).
    #[serde(default = "default_ckt")]
    pub ckt: String,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub status: BranchStatus,
}

impl Branch {
    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::In
    }

    /// Circuit label with surrounding whitespace removed, as used in
    /// minute-level channel names (`P_3_4_1`).
    pub fn ckt_trimmed(&self) -> &str {
        self.ckt.trim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    #[default]
    Thermal,
    Wind,
}

/// Generator data: dispatch range plus the classical machine and governor
/// parameters used during transients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub bus: BusId,
    pub p_set: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Inertia constant M in pu·s²/rad (M = 2H/ω₀ on the system base).
    pub inertia: f64,
    /// Damper-winding damping in pu power per rad/s of slip.
    pub damping: f64,
    pub xd_prime: f64,
    /// Governor droop R in pu frequency per pu power.
    pub droop: f64,
    /// Governor time constant T_g in seconds.
    pub t_g: f64,
    #[serde(default)]
    pub kind: GeneratorKind,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub bus: BusId,
    pub p: f64,
    pub q: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_base_mva() -> f64 {
    100.0
}

/// Validated network description. Construct through [`NetworkModel::new`],
/// [`load_case`] or [`parse_case`]; fields are public for read access but the
/// invariants are only guaranteed for models produced by those constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub feeders: Vec<FeederModel>,
    #[serde(default = "default_base_mva")]
    pub base_mva: f64,
    #[serde(skip)]
    index: HashMap<BusId, usize>,
}

impl NetworkModel {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<GeneratorSpec>,
        loads: Vec<LoadSpec>,
        feeders: Vec<FeederModel>,
        base_mva: f64,
    ) -> Result<Self, GridError> {
        let mut net = NetworkModel {
            buses,
            branches,
            generators,
            loads,
            feeders,
            base_mva,
            index: HashMap::new(),
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks every model invariant and rebuilds the bus index. Returns the
    /// first violation found.
    pub fn validate(&mut self) -> Result<(), GridError> {
        let fail = |msg: String| Err(GridError::Validation(msg));

        if !(self.base_mva > 0.0) {
            return fail(format!("base_mva must be positive, got {}", self.base_mva));
        }
        if self.buses.is_empty() {
            return fail("network has no buses".into());
        }

        self.index.clear();
        for (i, bus) in self.buses.iter().enumerate() {
            if self.index.insert(bus.id, i).is_some() {
                return fail(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.base_kv > 0.0) {
                return fail(format!("bus {} has non-positive base_kv", bus.id));
            }
            if matches!(bus.kind, BusKind::Slack | BusKind::Generator) {
                match bus.v_setpoint {
                    Some(v) if v > 0.0 => {}
                    _ => return fail(format!("bus {} needs a positive v_setpoint", bus.id)),
                }
            }
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return fail(format!("expected exactly one slack bus, found {slacks}"));
        }

        let mut circuits = BTreeSet::new();
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !self.index.contains_key(&end) {
                    return fail(format!(
                        "branch {}-{} references unknown bus {end}",
                        br.from, br.to
                    ));
                }
            }
            if br.from == br.to {
                return fail(format!("branch {}-{} connects a bus to itself", br.from, br.to));
            }
            if br.x == 0.0 || !br.x.is_finite() || !br.r.is_finite() || !br.b.is_finite() {
                return fail(format!(
                    "branch {}-{} needs finite impedance with x != 0",
                    br.from, br.to
                ));
            }
            if !circuits.insert((br.from, br.to, br.ckt.clone())) {
                return fail(format!(
                    "duplicate branch {}-{} circuit '{}'",
                    br.from, br.to, br.ckt
                ));
            }
        }

        for g in &self.generators {
            if !self.index.contains_key(&g.bus) {
                return fail(format!("generator references unknown bus {}", g.bus));
            }
            if !(g.p_min <= g.p_set && g.p_set <= g.p_max) {
                return fail(format!(
                    "generator at bus {} violates p_min <= p_set <= p_max",
                    g.bus
                ));
            }
            if !(g.inertia > 0.0 && g.t_g > 0.0 && g.droop > 0.0 && g.xd_prime > 0.0) {
                return fail(format!(
                    "generator at bus {} needs positive inertia, t_g, droop and xd_prime",
                    g.bus
                ));
            }
        }
        if let Some(slack) = self.buses.iter().find(|b| b.kind == BusKind::Slack) {
            let has_thermal = self
                .generators
                .iter()
                .any(|g| g.bus == slack.id && g.kind == GeneratorKind::Thermal);
            if !has_thermal {
                return fail(format!("slack bus {} has no thermal generator", slack.id));
            }
        }

        for l in &self.loads {
            if !self.index.contains_key(&l.bus) {
                return fail(format!("load references unknown bus {}", l.bus));
            }
            if !(l.scale >= 0.0) {
                return fail(format!("load at bus {} has negative scale", l.bus));
            }
        }

        let mut coupling_seen = BTreeSet::new();
        for f in &self.feeders {
            let Some(&bi) = self.index.get(&f.coupling_bus) else {
                return fail(format!("feeder references unknown bus {}", f.coupling_bus));
            };
            if !matches!(self.buses[bi].kind, BusKind::Load | BusKind::Coupling) {
                return fail(format!(
                    "feeder coupling bus {} is not a load bus",
                    f.coupling_bus
                ));
            }
            if !coupling_seen.insert(f.coupling_bus) {
                return fail(format!("bus {} hosts more than one feeder", f.coupling_bus));
            }
            f.validate().map_err(GridError::Validation)?;
        }

        if !self.is_connected(&[], &[]) {
            return fail("network is not connected with all branches in service".into());
        }
        Ok(())
    }

    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    /// Buses that carry a lumped load or host a feeder.
    pub fn load_bus_count(&self) -> usize {
        let mut ids: BTreeSet<BusId> = self.loads.iter().map(|l| l.bus).collect();
        ids.extend(self.feeders.iter().map(|f| f.coupling_bus));
        ids.len()
    }

    pub fn thermal_generators(&self) -> impl Iterator<Item = (usize, &GeneratorSpec)> {
        self.generators
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind == GeneratorKind::Thermal)
    }

    /// Connectivity check over in-service branches, optionally ignoring some
    /// branches (by index) and buses (by index). Ignored buses are treated as
    /// removed from the graph.
    pub fn is_connected(&self, skip_branches: &[usize], skip_buses: &[usize]) -> bool {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for (k, br) in self.branches.iter().enumerate() {
            if !br.in_service() || skip_branches.contains(&k) {
                continue;
            }
            let (Some(i), Some(j)) = (self.bus_index(br.from), self.bus_index(br.to)) else {
                continue;
            };
            adj[i].push(j);
            adj[j].push(i);
        }
        let Some(start) = (0..n).find(|i| !skip_buses.contains(i)) else {
            return true;
        };
        let mut seen = vec![false; n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] && !skip_buses.contains(&v) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (0..n).all(|i| seen[i] || skip_buses.contains(&i))
    }

    /// Index of buses adjacent to `bus` through in-service branches.
    pub fn neighbors(&self, bus: usize) -> Vec<usize> {
        let id = self.buses[bus].id;
        let mut out = BTreeSet::new();
        for br in self.branches.iter().filter(|b| b.in_service()) {
            if br.from == id {
                out.extend(self.bus_index(br.to));
            } else if br.to == id {
                out.extend(self.bus_index(br.from));
            }
        }
        out.into_iter().collect()
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    }
}

/// Default inverter parameters for PV plants that omit them in the case file.
pub(crate) fn default_inverter() -> InverterParams {
    InverterParams::preset()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: BusId, kind: BusKind) -> Bus {
        let v = matches!(kind, BusKind::Slack | BusKind::Generator).then_some(1.0);
        Bus {
            id,
            kind,
            base_kv: 230.0,
            v_setpoint: v,
        }
    }

    fn gen(bus: BusId) -> GeneratorSpec {
        GeneratorSpec {
            bus,
            p_set: 0.0,
            p_min: 0.0,
            p_max: 5.0,
            inertia: 0.1,
            damping: 0.0,
            xd_prime: 0.05,
            droop: 0.05,
            t_g: 0.5,
            kind: GeneratorKind::Thermal,
        }
    }

    fn line(from: BusId, to: BusId) -> Branch {
        Branch {
            from,
            to,
            ckt: "1 ".into(),
            r: 0.0,
            x: 0.1,
            b: 0.0,
            status: BranchStatus::In,
        }
    }

    #[test]
    fn two_slack_buses_rejected() {
        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Slack)],
            vec![line(1, 2)],
            vec![gen(1), gen(2)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one slack"), "{err}");
    }

    #[test]
    fn dangling_bus_reference_rejected() {
        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 3)],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown bus 3"), "{err}");
    }

    #[test]
    fn zero_reactance_and_self_loop_rejected() {
        let mut br = line(1, 2);
        br.x = 0.0;
        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![br],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("x != 0"));

        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 2), line(2, 2)],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("itself"));
    }

    #[test]
    fn duplicate_circuit_rejected_but_parallel_circuits_allowed() {
        let mut second = line(1, 2);
        second.ckt = "2 ".into();
        NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 2), second],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap();

        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 2), line(1, 2)],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate branch"));
    }

    #[test]
    fn disconnected_network_rejected() {
        let err = NetworkModel::new(
            vec![
                bus(1, BusKind::Slack),
                bus(2, BusKind::Load),
                bus(3, BusKind::Load),
            ],
            vec![line(1, 2)],
            vec![gen(1)],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("not connected"));
    }

    #[test]
    fn generator_range_checked() {
        let mut g = gen(1);
        g.p_set = 6.0;
        let err = NetworkModel::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 2)],
            vec![g],
            vec![],
            vec![],
            100.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("p_min <= p_set <= p_max"));
    }
}
