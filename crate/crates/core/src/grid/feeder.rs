use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::BusId;
use crate::dynamics::InverterParams;

/// Symmetric 3×3 phase impedance matrix, per-unit, stored as separate
/// resistance and reactance parts so that case files stay readable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrix {
    pub r: [[f64; 3]; 3],
    pub x: [[f64; 3]; 3],
}

impl PhaseMatrix {
    pub fn diagonal(z: Complex64) -> Self {
        let mut m = PhaseMatrix {
            r: [[0.0; 3]; 3],
            x: [[0.0; 3]; 3],
        };
        for k in 0..3 {
            m.r[k][k] = z.re;
            m.x[k][k] = z.im;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.r[i][j], self.x[i][j])
    }

    pub fn mul_vec(&self, v: &[Complex64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += self.get(i, j) * vj;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| self.r[i][j] == self.r[j][i] && self.x[i][j] == self.x[j][i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSection {
    pub from: String,
    pub to: String,
    pub z: PhaseMatrix,
}

/// Per-phase constant-power load at a feeder node, per-unit on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederLoad {
    pub node: String,
    pub p: [f64; 3],
    pub q: [f64; 3],
}

fn default_x_coupling() -> f64 {
    0.1
}

/// Aggregated rooftop PV plant behind a grid-forming inverter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvPlant {
    pub node: String,
    pub kva: f64,
    #[serde(default = "super::default_inverter")]
    pub params: InverterParams,
    /// Interface reactance between the filter capacitor and the feeder node,
    /// per-unit on the plant rating.
    #[serde(default = "default_x_coupling")]
    pub x_coupling: f64,
}

impl PvPlant {
    /// Plant rating in per-unit of the system base.
    pub fn rating_pu(&self, base_mva: f64) -> f64 {
        self.kva / 1000.0 / base_mva
    }
}

/// Parent/child structure of a radial feeder derived from its sections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeederTopology {
    pub root: usize,
    /// Nodes in breadth-first order from the root.
    pub order: Vec<usize>,
    /// Parent node and section index, `None` for the root.
    pub parent: Vec<Option<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederModel {
    pub coupling_bus: BusId,
    pub nodes: Vec<String>,
    pub sections: Vec<FeederSection>,
    #[serde(default)]
    pub loads: Vec<FeederLoad>,
    #[serde(default)]
    pub pv_plants: Vec<PvPlant>,
}

impl FeederModel {
    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == label)
    }

    /// Derives the tree structure. Fails with "feeder not radial" when the
    /// sections do not form a tree rooted at a single node.
    pub fn topology(&self) -> Result<FeederTopology, String> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(format!("feeder at bus {} has no nodes", self.coupling_bus));
        }
        let idx: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        if idx.len() != n {
            return Err(format!(
                "feeder at bus {} has duplicate node labels",
                self.coupling_bus
            ));
        }

        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for (k, s) in self.sections.iter().enumerate() {
            let (Some(&a), Some(&b)) = (idx.get(s.from.as_str()), idx.get(s.to.as_str())) else {
                return Err(format!(
                    "feeder at bus {}: section {}-{} references unknown node",
                    self.coupling_bus, s.from, s.to
                ));
            };
            if a == b || parent[b].is_some() {
                return Err(format!("feeder at bus {}: feeder not radial", self.coupling_bus));
            }
            parent[b] = Some((a, k));
            children[a].push(b);
        }
        let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 || self.sections.len() != n - 1 {
            return Err(format!("feeder at bus {}: feeder not radial", self.coupling_bus));
        }
        let root = roots[0];
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            queue.extend(children[u].iter().copied());
        }
        if order.len() != n {
            return Err(format!("feeder at bus {}: feeder not radial", self.coupling_bus));
        }
        Ok(FeederTopology { root, order, parent })
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        self.topology()?;
        for s in &self.sections {
            if !s.z.is_symmetric() {
                return Err(format!(
                    "feeder at bus {}: section {}-{} impedance matrix not symmetric",
                    self.coupling_bus, s.from, s.to
                ));
            }
        }
        for l in &self.loads {
            if self.node_index(&l.node).is_none() {
                return Err(format!(
                    "feeder at bus {}: load at unknown node {}",
                    self.coupling_bus, l.node
                ));
            }
        }
        for pv in &self.pv_plants {
            if self.node_index(&pv.node).is_none() {
                return Err(format!(
                    "feeder at bus {}: PV plant at unknown node {}",
                    self.coupling_bus, pv.node
                ));
            }
            if !(pv.kva > 0.0 && pv.x_coupling > 0.0) {
                return Err(format!(
                    "feeder at bus {}: PV plant at {} needs positive kva and x_coupling",
                    self.coupling_bus, pv.node
                ));
            }
            pv.params.validate()?;
        }
        Ok(())
    }

    /// Total three-phase load, ignoring losses.
    pub fn total_load(&self) -> Complex64 {
        self.loads
            .iter()
            .flat_map(|l| (0..3).map(move |k| Complex64::new(l.p[k], l.q[k])))
            .sum()
    }

    pub fn total_pv_rating(&self, base_mva: f64) -> f64 {
        self.pv_plants.iter().map(|p| p.rating_pu(base_mva)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(from: &str, to: &str) -> FeederSection {
        FeederSection {
            from: from.into(),
            to: to.into(),
            z: PhaseMatrix::diagonal(Complex64::new(0.0, 0.05)),
        }
    }

    fn feeder(nodes: &[&str], sections: Vec<FeederSection>) -> FeederModel {
        FeederModel {
            coupling_bus: 1,
            nodes: nodes.iter().map(|s| s.to_string()).collect(),
            sections,
            loads: vec![],
            pv_plants: vec![],
        }
    }

    #[test]
    fn tree_topology_orders_parents_first() {
        let f = feeder(
            &["650", "632", "633", "671"],
            vec![
                section("650", "632"),
                section("632", "633"),
                section("632", "671"),
            ],
        );
        let t = f.topology().unwrap();
        assert_eq!(t.root, 0);
        assert_eq!(t.order, vec![0, 1, 2, 3]);
        assert_eq!(t.parent[2], Some((1, 1)));
    }

    #[test]
    fn section_loop_is_not_radial() {
        let f = feeder(
            &["632", "633", "634"],
            vec![
                section("632", "633"),
                section("633", "634"),
                section("634", "633"),
            ],
        );
        let err = f.validate().unwrap_err();
        assert!(err.contains("feeder not radial"), "{err}");
    }

    #[test]
    fn asymmetric_impedance_rejected() {
        let mut s = section("a", "b");
        s.z.x[0][1] = 0.01;
        let f = feeder(&["a", "b"], vec![s]);
        assert!(f.validate().unwrap_err().contains("not symmetric"));
    }
}
