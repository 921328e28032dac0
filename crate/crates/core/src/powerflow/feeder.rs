use num_complex::Complex64;

use super::{PfError, PfOptions};
use crate::grid::{FeederModel, FeederTopology};

type Phasors = [Complex64; 3];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const COLLAPSE_VM: f64 = 0.2;

/// Unit phasor rotating phase A onto phase C (`a`), and its square onto phase B.
pub fn phase_shift() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// Balanced set with phase A equal to `v`.
pub fn balanced(v: Complex64) -> Phasors {
    let a = phase_shift();
    [v, v * a * a, v * a]
}

/// Positive-sequence component of a phase triple.
pub fn positive_sequence(v: &Phasors) -> Complex64 {
    let a = phase_shift();
    (v[0] + a * v[1] + a * a * v[2]) / 3.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeederSolution {
    pub node_v: Vec<Phasors>,
    pub node_vm: Vec<[f64; 3]>,
    pub total_p: f64,
    pub total_q: f64,
    pub iterations: usize,
}

/// Operating inputs of a feeder at one instant: a multiplier on every node
/// load and the active output of each PV plant (system per-unit, three-phase).
#[derive(Debug, Clone, PartialEq)]
pub struct FeederDispatch {
    pub load_scale: f64,
    pub pv_p: Vec<f64>,
}

impl FeederDispatch {
    pub fn base(feeder: &FeederModel) -> Self {
        FeederDispatch {
            load_scale: 1.0,
            pv_p: vec![0.0; feeder.pv_plants.len()],
        }
    }
}

/// Backward/forward sweep with base loads and dark PV.
pub fn solve_feeder_pf(
    feeder: &FeederModel,
    source_vm: f64,
    source_va: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FeederSolution, PfError> {
    solve_feeder_dispatch(
        feeder,
        &FeederDispatch::base(feeder),
        Complex64::from_polar(source_vm, source_va),
        &PfOptions { tol, max_iter },
        None,
    )
}

/// Sweep with constant-power loads scaled by the dispatch and PV plants
/// injecting balanced positive-sequence current at unity power factor.
pub fn solve_feeder_dispatch(
    feeder: &FeederModel,
    dispatch: &FeederDispatch,
    source: Complex64,
    opts: &PfOptions,
    warm: Option<&FeederSolution>,
) -> Result<FeederSolution, PfError> {
    let sweep = Sweep::new(feeder)?;
    let loads = sweep.node_loads(feeder, dispatch.load_scale);
    let pv: Vec<(usize, f64)> = feeder
        .pv_plants
        .iter()
        .zip(&dispatch.pv_p)
        .map(|(plant, &p)| (feeder.node_index(&plant.node).unwrap(), p))
        .collect();
    let draw = |node: usize, v: &Phasors| -> Phasors {
        let mut i = [ZERO; 3];
        for ph in 0..3 {
            if loads[node][ph] != ZERO {
                i[ph] = (loads[node][ph] / v[ph]).conj();
            }
        }
        for &(n, p) in &pv {
            if n == node && p != 0.0 {
                let inj = balanced((Complex64::new(p, 0.0) / (3.0 * positive_sequence(v))).conj());
                for ph in 0..3 {
                    i[ph] -= inj[ph];
                }
            }
        }
        i
    };
    let init = match warm {
        Some(sol) => rotate_to_source(&sol.node_v, source),
        None => vec![balanced(source); feeder.nodes.len()],
    };
    sweep.solve(feeder, balanced(source), init, opts, draw)
}

// Shift a previous profile so its root lines up with the new source phasor.
fn rotate_to_source(prev: &[Phasors], source: Complex64) -> Vec<Phasors> {
    let reference = prev[0][0];
    let factor = if reference.norm() > 0.0 {
        source / reference
    } else {
        Complex64::new(1.0, 0.0)
    };
    prev.iter()
        .map(|v| [v[0] * factor, v[1] * factor, v[2] * factor])
        .collect()
}

/// Equivalent transmission load of a solved feeder.
pub fn feeder_as_load(sol: &FeederSolution) -> (f64, f64) {
    (sol.total_p, sol.total_q)
}

/// Reusable sweep structure for one feeder.
#[derive(Debug, Clone)]
pub struct Sweep {
    topo: FeederTopology,
    n_sections: usize,
}

impl Sweep {
    pub fn new(feeder: &FeederModel) -> Result<Self, PfError> {
        let topo = feeder.topology().map_err(PfError::InvalidFeeder)?;
        Ok(Sweep {
            topo,
            n_sections: feeder.sections.len(),
        })
    }

    pub fn root(&self) -> usize {
        self.topo.root
    }

    /// Per-node, per-phase complex load scaled by `scale`.
    pub fn node_loads(&self, feeder: &FeederModel, scale: f64) -> Vec<Phasors> {
        let mut out = vec![[ZERO; 3]; feeder.nodes.len()];
        for l in &feeder.loads {
            let n = feeder.node_index(&l.node).unwrap();
            for ph in 0..3 {
                out[n][ph] += Complex64::new(l.p[ph], l.q[ph]) * scale;
            }
        }
        out
    }

    /// One backward/forward pass. `draw` returns the current each node takes
    /// from the feeder (loads positive, sources negative). Updates `v` in
    /// place and returns the largest voltage change and the source current.
    pub fn pass<F>(
        &self,
        feeder: &FeederModel,
        source: &Phasors,
        v: &mut [Phasors],
        draw: &mut F,
    ) -> (f64, Phasors)
    where
        F: FnMut(usize, &Phasors) -> Phasors,
    {
        let n = v.len();
        let mut node_total: Vec<Phasors> = (0..n).map(|k| draw(k, &v[k])).collect();
        let mut section_i = vec![[ZERO; 3]; self.n_sections];
        for &k in self.topo.order.iter().rev() {
            if let Some((parent, sec)) = self.topo.parent[k] {
                let j = node_total[k];
                section_i[sec] = j;
                for ph in 0..3 {
                    node_total[parent][ph] += j[ph];
                }
            }
        }
        let root_current = node_total[self.topo.root];

        let mut change = 0.0f64;
        for &k in &self.topo.order {
            let next = match self.topo.parent[k] {
                None => *source,
                Some((parent, sec)) => {
                    let drop = feeder.sections[sec].z.mul_vec(&section_i[sec]);
                    [
                        v[parent][0] - drop[0],
                        v[parent][1] - drop[1],
                        v[parent][2] - drop[2],
                    ]
                }
            };
            for ph in 0..3 {
                let d = (next[ph] - v[k][ph]).norm();
                change = if d.is_finite() {
                    change.max(d)
                } else {
                    f64::INFINITY
                };
            }
            v[k] = next;
        }
        (change, root_current)
    }

    /// Repeats passes until the voltage change drops below `opts.tol`.
    pub fn solve<F>(
        &self,
        feeder: &FeederModel,
        source: Phasors,
        mut v: Vec<Phasors>,
        opts: &PfOptions,
        mut draw: F,
    ) -> Result<FeederSolution, PfError>
    where
        F: FnMut(usize, &Phasors) -> Phasors,
    {
        let mut iterations = 0;
        loop {
            let (change, _) = self.pass(feeder, &source, &mut v, &mut draw);
            iterations += 1;
            self.check_collapse(feeder, &v)?;
            if change < opts.tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(PfError::NoConvergence {
                    max_mismatch: change,
                    iterations,
                });
            }
        }
        // Source current consistent with the final voltages.
        let mut scratch = v.clone();
        let (_, i_root) = self.pass(feeder, &source, &mut scratch, &mut draw);
        let s: Complex64 = (0..3).map(|ph| source[ph] * i_root[ph].conj()).sum();
        Ok(FeederSolution {
            node_vm: v
                .iter()
                .map(|p| [p[0].norm(), p[1].norm(), p[2].norm()])
                .collect(),
            node_v: v,
            total_p: s.re,
            total_q: s.im,
            iterations,
        })
    }

    pub fn check_collapse(&self, feeder: &FeederModel, v: &[Phasors]) -> Result<(), PfError> {
        for (k, p) in v.iter().enumerate() {
            for z in p {
                let vm = z.norm();
                if !(vm >= COLLAPSE_VM) {
                    return Err(PfError::VoltageCollapse {
                        node: feeder.nodes[k].clone(),
                        vm,
                    });
                }
            }
        }
        Ok(())
    }
}
