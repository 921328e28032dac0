use std::path::{Path, PathBuf};

use chrono::Duration;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scenario::{sample_scenario, EventKind, KindWeights, ScenarioSpec, Target};
use super::steady::{iterate_td_powerflow, TdOptions};
use super::{CosimError, Injections, ProfileBindings};
use crate::dynamics::{
    generator_derivatives_with, inverter_derivatives, inverter_init, GenInputs, GenState, GridInterface,
    InverterParams, InverterState, Rk4, INVERTER_STATE_LEN, OMEGA_0,
};
use crate::grid::{build_ybus, stamp_branch, BusId, GeneratorKind, NetworkModel, Ybus};
use crate::powerflow::{balanced, positive_sequence, PfOptions, Sweep};
use crate::profiles::ProfileSet;
use crate::records::{
    dist_channel, trans_branch_channels, trans_volt_channel, write_manifest, write_split, write_transient,
    ChannelFrame, ManifestRow, TimeAxis,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientOptions {
    /// Internal steps per output sample.
    pub decimation: usize,
    /// Inverter RK4 sub-steps per network step.
    pub inverter_substeps: usize,
    /// Tight coupling options for the initial operating point.
    pub init: TdOptions,
    pub feeder_tol: f64,
    pub feeder_max_iter: usize,
    /// Any bus or node voltage above this magnitude is treated as blow-up.
    pub v_limit: f64,
}

impl Default for TransientOptions {
    fn default() -> Self {
        TransientOptions {
            decimation: 4,
            inverter_substeps: 32,
            init: TdOptions {
                eps: 1e-10,
                max_outer: 60,
                pf: PfOptions {
                    tol: 1e-11,
                    max_iter: 30,
                },
                feeder: PfOptions {
                    tol: 1e-12,
                    max_iter: 200,
                },
            },
            feeder_tol: 1e-11,
            feeder_max_iter: 200,
            v_limit: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientResult {
    pub spec: ScenarioSpec,
    pub label: (EventKind, BusId),
    /// `VOLT <bus>` then `POWR`/`VARS` per branch, per-unit.
    pub trans: ChannelFrame,
    /// Per-phase node voltage magnitudes of every feeder, per-unit.
    pub dist: ChannelFrame,
    /// Inertia-weighted mean rotor speed of the online machines, Hz.
    pub coi_frequency: Vec<f64>,
}

struct Machine {
    gen: usize,
    bus: usize,
    y: Complex64,
    e: f64,
    p_ref: f64,
    online: bool,
}

struct Plant {
    node: usize,
    /// Plant current to per-phase system current.
    scale: f64,
    xc: f64,
    params: InverterParams,
    x: [f64; INVERTER_STATE_LEN],
}

impl Plant {
    fn current(&self, x: &[f64], v1: Complex64) -> Complex64 {
        (InverterState::from_slice(x).terminal_voltage() - v1) / (J * self.xc)
    }
}

struct FeederSim {
    bus: usize,
    bus_id: BusId,
    sweep: Sweep,
    y_load: Vec<[Complex64; 3]>,
    y_eq: Complex64,
    v: Vec<[Complex64; 3]>,
    plants: Vec<Plant>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
struct Topology {
    fault_on: bool,
    branch_out: Option<usize>,
    bus_out: Option<usize>,
    gens_online: u64,
}

struct Sim<'a> {
    net: &'a NetworkModel,
    spec: &'a ScenarioSpec,
    opts: &'a TransientOptions,
    ybus: Ybus,
    y_lumped: Vec<Complex64>,
    machines: Vec<Machine>,
    gen_x: Vec<f64>,
    feeders: Vec<FeederSim>,
    v: Vec<Complex64>,
    topo: Topology,
    lu: Option<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>>,
    lu_topo: Option<Topology>,
    rk_gen: Rk4,
    rk_inv: Rk4,
}

/// Runs one event scenario from the coupled steady state of `inj`.
///
/// The network is solved algebraically each step with machines behind their
/// transient reactances and feeders as Norton equivalents refreshed from a
/// sweep at the previous boundary voltage; machine and inverter states are
/// then advanced by RK4 with the network held.
pub fn run_transient_scenario(
    net: &NetworkModel,
    spec: &ScenarioSpec,
    inj: &Injections,
    opts: &TransientOptions,
) -> Result<TransientResult, CosimError> {
    spec.validate(net)?;
    let mut sim = Sim::init(net, spec, inj, opts)?;
    let dec = opts.decimation.max(1);
    let n_rows = spec.n_rows();
    let dt = 1.0 / (spec.sample_rate * dec as f64);

    let n_branch = net.branches.len();
    let mut volt = vec![Vec::with_capacity(n_rows); net.n_buses()];
    let mut flows = vec![Vec::with_capacity(n_rows); 2 * n_branch];
    let n_dist: usize = net.feeders.iter().map(|f| 3 * f.nodes.len()).sum();
    let mut dist = vec![Vec::with_capacity(n_rows); n_dist];
    let mut coi = Vec::with_capacity(n_rows);
    let mut times = Vec::with_capacity(n_rows);

    for k in 0..n_rows * dec {
        let t = k as f64 * dt;
        sim.apply_events(t);
        sim.solve_network(t)?;
        if k % dec == 0 {
            times.push((k / dec) as f64 / spec.sample_rate);
            for (i, col) in volt.iter_mut().enumerate() {
                col.push(sim.v[i].norm());
            }
            for (b, s) in sim.branch_flows().into_iter().enumerate() {
                flows[2 * b].push(s.re);
                flows[2 * b + 1].push(s.im);
            }
            let mut c = 0;
            for f in &sim.feeders {
                for node in &f.v {
                    for z in node {
                        dist[c].push(z.norm());
                        c += 1;
                    }
                }
            }
            coi.push(sim.coi_speed() / (2.0 * std::f64::consts::PI));
        }
        sim.advance(t, dt)?;
    }

    let mut names: Vec<String> = net.buses.iter().map(|b| trans_volt_channel(b.id)).collect();
    for br in &net.branches {
        let (p, q) = trans_branch_channels(br);
        names.push(p);
        names.push(q);
    }
    let mut data = volt;
    data.extend(flows);
    let trans = ChannelFrame::from_columns(TimeAxis::Seconds(times.clone()), names, data)?;

    let dist_names = net
        .feeders
        .iter()
        .flat_map(|f| {
            f.nodes
                .iter()
                .flat_map(move |n| (0..3).map(move |ph| dist_channel(f.coupling_bus, n, ph)))
        })
        .collect();
    let dist = ChannelFrame::from_columns(TimeAxis::Seconds(times), dist_names, dist)?;

    Ok(TransientResult {
        spec: spec.clone(),
        label: spec.label(net),
        trans,
        dist,
        coi_frequency: coi,
    })
}

impl<'a> Sim<'a> {
    fn init(
        net: &'a NetworkModel,
        spec: &'a ScenarioSpec,
        inj: &Injections,
        opts: &'a TransientOptions,
    ) -> Result<Self, CosimError> {
        let fail = |m: String| CosimError::InitFailure(m);
        let td = iterate_td_powerflow(net, inj, &opts.init).map_err(|e| fail(e.to_string()))?;
        let v0 = td.pf.voltages();
        let n = net.n_buses();

        // Constant-impedance lumped loads, with wind as a negative load.
        let mut s_lumped = vec![ZERO; n];
        for (l, k) in net.loads.iter().zip(&inj.load_scale) {
            s_lumped[net.bus_index(l.bus).unwrap()] += Complex64::new(l.p, l.q) * k;
        }
        for (g, p) in net.generators.iter().zip(&td.gen_p) {
            if g.kind == GeneratorKind::Wind {
                s_lumped[net.bus_index(g.bus).unwrap()] -= Complex64::new(*p, 0.0);
            }
        }
        let y_lumped: Vec<Complex64> = (0..n).map(|i| s_lumped[i].conj() / v0[i].norm_sqr()).collect();

        let mut s_feeder = vec![ZERO; n];
        for (f, &(p, q)) in net.feeders.iter().zip(&td.injected) {
            s_feeder[net.bus_index(f.coupling_bus).unwrap()] += Complex64::new(p, q);
        }

        // Generator output is the bus injection plus whatever the bus consumes,
        // shared between thermal units in proportion to capacity.
        let mut machines = Vec::new();
        let mut gen_x = Vec::new();
        for (gi, g) in net.thermal_generators() {
            let bus = net.bus_index(g.bus).unwrap();
            let cap: f64 = net
                .thermal_generators()
                .filter(|(_, h)| h.bus == g.bus)
                .map(|(_, h)| h.p_max)
                .sum();
            let s_bus = Complex64::new(td.pf.p_injection[bus], td.pf.q_injection[bus])
                + s_lumped[bus]
                + s_feeder[bus];
            let s = s_bus * (g.p_max / cap);
            let i = (s / v0[bus]).conj();
            let e = v0[bus] + J * g.xd_prime * i;
            machines.push(Machine {
                gen: gi,
                bus,
                y: 1.0 / (J * g.xd_prime),
                e: e.norm(),
                p_ref: s.re,
                online: true,
            });
            let st = GenState::at_rest(e.arg(), s.re);
            gen_x.extend([st.delta, st.omega, st.p_m]);
        }
        if machines.is_empty() || machines.len() > 64 {
            return Err(fail(format!("{} thermal machines; need 1 to 64", machines.len())));
        }

        let mut feeders = Vec::new();
        for (k, f) in net.feeders.iter().enumerate() {
            let bus = net.bus_index(f.coupling_bus).unwrap();
            let sol = &td.feeders[k];
            let sweep = Sweep::new(f).map_err(|e| fail(e.to_string()))?;
            let s_nodes = sweep.node_loads(f, inj.feeders[k].load_scale);
            let y_load = s_nodes
                .iter()
                .zip(&sol.node_v)
                .map(|(s, v)| [0, 1, 2].map(|ph| s[ph].conj() / v[ph].norm_sqr()))
                .collect();
            let mut plants = Vec::new();
            for (j, pv) in f.pv_plants.iter().enumerate() {
                let node = f.node_index(&pv.node).unwrap();
                let rating = pv.rating_pu(net.base_mva);
                let p = inj.feeders[k].pv_p[j] / rating;
                let v1 = positive_sequence(&sol.node_v[node]);
                let i = (p / v1).conj();
                let v_o = v1 + J * pv.x_coupling * i;
                let mut params = pv.params;
                params.q_star = pv.x_coupling * i.norm_sqr();
                let eq = inverter_init(&params, v_o, p)
                    .map_err(|e| fail(format!("PV at {} node {}: {e}", f.coupling_bus, pv.node)))?;
                plants.push(Plant {
                    node,
                    scale: rating / 3.0,
                    xc: pv.x_coupling,
                    params: eq.params,
                    x: eq.state.to_array(),
                });
            }
            let s_d = Complex64::new(sol.total_p, sol.total_q);
            feeders.push(FeederSim {
                bus,
                bus_id: f.coupling_bus,
                sweep,
                y_load,
                y_eq: s_d.conj() / v0[bus].norm_sqr(),
                v: sol.node_v.clone(),
                plants,
            });
        }

        let all_online = if machines.len() == 64 {
            u64::MAX
        } else {
            (1u64 << machines.len()) - 1
        };
        let mut sim = Sim {
            net,
            spec,
            opts,
            ybus: build_ybus(net),
            y_lumped,
            machines,
            gen_x,
            feeders,
            v: v0.clone(),
            topo: Topology {
                fault_on: false,
                branch_out: None,
                bus_out: None,
                gens_online: all_online,
            },
            lu: None,
            lu_topo: None,
            rk_gen: Rk4::new(0),
            rk_inv: Rk4::new(INVERTER_STATE_LEN),
        };

        // The first network solve must land back on the power-flow voltages.
        sim.solve_network(0.0)?;
        let drift = sim
            .v
            .iter()
            .zip(&v0)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if !(drift < 1e-6) {
            return Err(fail(format!(
                "network does not reproduce the steady state (drift {drift:.3e})"
            )));
        }
        Ok(sim)
    }

    fn apply_events(&mut self, t: f64) {
        let s = self.spec;
        let on = s.kind != EventKind::Null && t >= s.t_on - 1e-12;
        let cleared = s.t_clear.is_some_and(|tc| t >= tc - 1e-12);
        match (s.kind, s.target) {
            (EventKind::BusFault | EventKind::BranchFault, _) => self.topo.fault_on = on && !cleared,
            (EventKind::BranchTrip, Target::Branch(k)) if on => self.topo.branch_out = Some(k),
            (EventKind::BusTrip, Target::Bus(b)) if on => self.topo.bus_out = self.net.bus_index(b),
            (EventKind::GenTrip, Target::Generator(g)) if on => {
                if let Some(m) = self.machines.iter().position(|m| m.gen == g) {
                    self.machines[m].online = false;
                    self.topo.gens_online &= !(1u64 << m);
                }
            }
            _ => {}
        }
    }

    fn faulted_branch(&self) -> Option<usize> {
        match (self.spec.kind, self.spec.target) {
            (EventKind::BranchFault, Target::Branch(k)) if self.topo.fault_on => Some(k),
            _ => None,
        }
    }

    fn assemble(&self) -> DMatrix<Complex64> {
        let net = self.net;
        let mut y = self.ybus.clone();
        let ends = |k: usize| {
            let br = &net.branches[k];
            (net.bus_index(br.from).unwrap(), net.bus_index(br.to).unwrap())
        };
        if let Some(k) = self.topo.branch_out {
            let (i, j) = ends(k);
            stamp_branch(&mut y, i, j, &net.branches[k], -1.0);
        }
        for i in 0..net.n_buses() {
            y[(i, i)] += self.y_lumped[i];
        }
        for m in self.machines.iter().filter(|m| m.online) {
            y[(m.bus, m.bus)] += m.y;
        }
        for f in &self.feeders {
            y[(f.bus, f.bus)] += f.y_eq;
        }
        if self.topo.fault_on {
            let yf = self.spec.params.fault_admittance;
            match self.spec.target {
                Target::Bus(b) => {
                    let i = net.bus_index(b).unwrap();
                    y[(i, i)] += yf;
                }
                Target::Branch(k) => {
                    // Fault at the midpoint, eliminated by Kron reduction.
                    let br = &net.branches[k];
                    let (i, j) = ends(k);
                    stamp_branch(&mut y, i, j, br, -1.0);
                    let yh = 2.0 / Complex64::new(br.r, br.x);
                    let half_b = Complex64::new(0.0, br.b / 2.0);
                    let denom = 2.0 * yh + yf;
                    y[(i, i)] += yh - yh * yh / denom + half_b;
                    y[(j, j)] += yh - yh * yh / denom + half_b;
                    y[(i, j)] -= yh * yh / denom;
                    y[(j, i)] -= yh * yh / denom;
                }
                _ => {}
            }
        }
        if let Some(b) = self.topo.bus_out {
            for (k, br) in net.branches.iter().enumerate() {
                let (i, j) = ends(k);
                if br.in_service() && (i == b || j == b) && self.topo.branch_out != Some(k) {
                    stamp_branch(&mut y, i, j, br, -1.0);
                }
            }
            for k in 0..net.n_buses() {
                y[(b, k)] = ZERO;
                y[(k, b)] = ZERO;
            }
            y[(b, b)] = Complex64::new(1.0, 0.0);
        }
        y
    }

    fn machine_emf(&self, m: usize) -> Complex64 {
        Complex64::from_polar(self.machines[m].e, self.gen_x[3 * m])
    }

    fn sweep_feeders(&mut self, t: f64) -> Result<(), CosimError> {
        let v_b = &self.v;
        let tol = self.opts.feeder_tol;
        let max_iter = self.opts.feeder_max_iter;
        for (k, f) in self.feeders.iter_mut().enumerate() {
            let feeder = &self.net.feeders[k];
            let source = balanced(v_b[f.bus]);
            let y_load = &f.y_load;
            let plants = &f.plants;
            let mut draw = |n: usize, v: &[Complex64; 3]| {
                let mut i = [0, 1, 2].map(|ph| y_load[n][ph] * v[ph]);
                for p in plants.iter().filter(|p| p.node == n) {
                    let inj = balanced(p.current(&p.x, positive_sequence(v)) * p.scale);
                    for ph in 0..3 {
                        i[ph] -= inj[ph];
                    }
                }
                i
            };
            let mut converged = false;
            for _ in 0..max_iter {
                let (change, _) = f.sweep.pass(feeder, &source, &mut f.v, &mut draw);
                if !change.is_finite() {
                    break;
                }
                if change < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(CosimError::NumericalBlowup {
                    t,
                    what: format!("feeder sweep at bus {}", f.bus_id),
                });
            }
        }
        Ok(())
    }

    fn feeder_power(&self, k: usize) -> Complex64 {
        let f = &self.feeders[k];
        let feeder = &self.net.feeders[k];
        let source = balanced(self.v[f.bus]);
        let mut scratch = f.v.clone();
        let mut draw = |n: usize, v: &[Complex64; 3]| {
            let mut i = [0, 1, 2].map(|ph| f.y_load[n][ph] * v[ph]);
            for p in f.plants.iter().filter(|p| p.node == n) {
                let inj = balanced(p.current(&p.x, positive_sequence(v)) * p.scale);
                for ph in 0..3 {
                    i[ph] -= inj[ph];
                }
            }
            i
        };
        let (_, i_root) = f.sweep.pass(feeder, &source, &mut scratch, &mut draw);
        (0..3).map(|ph| source[ph] * i_root[ph].conj()).sum()
    }

    /// Feeder sweeps at the previous boundary voltage, then one linear solve
    /// of the augmented network.
    fn solve_network(&mut self, t: f64) -> Result<(), CosimError> {
        self.sweep_feeders(t)?;
        let n = self.net.n_buses();
        let mut rhs = DVector::from_element(n, ZERO);
        for m in 0..self.machines.len() {
            if self.machines[m].online {
                rhs[self.machines[m].bus] += self.machine_emf(m) * self.machines[m].y;
            }
        }
        for k in 0..self.feeders.len() {
            let s_d = self.feeder_power(k);
            let f = &self.feeders[k];
            let vb = self.v[f.bus];
            rhs[f.bus] += f.y_eq * vb - (s_d / vb).conj();
        }
        if let Some(b) = self.topo.bus_out {
            rhs[b] = ZERO;
        }
        if self.lu_topo != Some(self.topo) {
            self.lu = Some(self.assemble().lu());
            self.lu_topo = Some(self.topo);
        }
        let v = self
            .lu
            .as_ref()
            .unwrap()
            .solve(&rhs)
            .ok_or_else(|| CosimError::NumericalBlowup {
                t,
                what: "singular network matrix".into(),
            })?;
        if let Some(i) = v.iter().position(|z| !(z.norm() < self.opts.v_limit)) {
            return Err(CosimError::NumericalBlowup {
                t,
                what: format!("voltage at bus {} is {:.3e}", self.net.buses[i].id, v[i].norm()),
            });
        }
        self.v = v.iter().copied().collect();
        Ok(())
    }

    fn branch_flows(&self) -> Vec<Complex64> {
        let net = self.net;
        let faulted = self.faulted_branch();
        net.branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let (i, j) = (net.bus_index(br.from).unwrap(), net.bus_index(br.to).unwrap());
                let out = !br.in_service()
                    || self.topo.branch_out == Some(k)
                    || self.topo.bus_out.is_some_and(|b| b == i || b == j);
                if out {
                    return ZERO;
                }
                let (vi, vj) = (self.v[i], self.v[j]);
                let half_b = Complex64::new(0.0, br.b / 2.0);
                let current = if faulted == Some(k) {
                    let yh = 2.0 / Complex64::new(br.r, br.x);
                    let vm = yh * (vi + vj) / (2.0 * yh + self.spec.params.fault_admittance);
                    (vi - vm) * yh + vi * half_b
                } else {
                    (vi - vj) / Complex64::new(br.r, br.x) + vi * half_b
                };
                vi * current.conj()
            })
            .collect()
    }

    fn coi_speed(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (m, mach) in self.machines.iter().enumerate().filter(|(_, m)| m.online) {
            let h = self.net.generators[mach.gen].inertia;
            num += h * self.gen_x[3 * m + 1];
            den += h;
        }
        num / den
    }

    fn advance(&mut self, t: f64, dt: f64) -> Result<(), CosimError> {
        let net = self.net;
        let spec = self.spec;
        let v = &self.v;
        let machines = &self.machines;
        let forced = match (spec.kind, spec.target) {
            (EventKind::ForcedOscillation, Target::Generator(g)) => Some(g),
            _ => None,
        };
        // RK4 evaluates its stages at t, t + dt/2, t + dt/2, t + dt.
        let offsets = [0.0, 0.5, 0.5, 1.0];
        let mut stage = 0;
        let mut gen_x = std::mem::take(&mut self.gen_x);
        let res = self.rk_gen.step(&mut gen_x, dt, |x, dx| {
            let tau = t + offsets[stage % 4] * dt;
            stage += 1;
            let (mut dw, mut d) = (0.0, 0.0);
            for (m, mach) in machines.iter().enumerate().filter(|(_, m)| m.online) {
                let damping = net.generators[mach.gen].damping;
                dw += damping * x[3 * m + 1];
                d += damping;
            }
            let omega_ref = if d > 0.0 { dw / d } else { OMEGA_0 };
            for (m, mach) in machines.iter().enumerate() {
                if !mach.online {
                    dx[3 * m..3 * m + 3].fill(0.0);
                    continue;
                }
                let g = &net.generators[mach.gen];
                let e = Complex64::from_polar(mach.e, x[3 * m]);
                let p_e = (e * ((e - v[mach.bus]) * mach.y).conj()).re;
                let mut p_ref = mach.p_ref;
                if forced == Some(mach.gen) && tau >= spec.t_on {
                    let w = 2.0 * std::f64::consts::PI * spec.params.frequency;
                    p_ref += spec.params.amplitude * (w * (tau - spec.t_on)).sin();
                }
                let s = GenState {
                    delta: x[3 * m],
                    omega: x[3 * m + 1],
                    p_m: x[3 * m + 2],
                };
                let dd = generator_derivatives_with(
                    &s,
                    &GenInputs {
                        p_e,
                        p_ref,
                        omega_ref,
                    },
                    g,
                );
                dx[3 * m] = dd.delta;
                dx[3 * m + 1] = dd.omega;
                dx[3 * m + 2] = dd.p_m;
            }
        });
        self.gen_x = gen_x;
        res.map_err(|e| CosimError::NumericalBlowup {
            t,
            what: format!("machine states: {e}"),
        })?;
        for (m, mach) in self.machines.iter().enumerate().filter(|(_, m)| m.online) {
            let w = self.gen_x[3 * m + 1];
            if !((w - OMEGA_0).abs() < 0.5 * OMEGA_0) {
                return Err(CosimError::NumericalBlowup {
                    t,
                    what: format!(
                        "generator at bus {} speed {w:.3} rad/s",
                        net.generators[mach.gen].bus
                    ),
                });
            }
        }

        let sub = self.opts.inverter_substeps.max(1);
        let h = dt / sub as f64;
        for f in &mut self.feeders {
            for p in &mut f.plants {
                let v1 = positive_sequence(&f.v[p.node]);
                let (xc, params) = (p.xc, p.params);
                for _ in 0..sub {
                    self.rk_inv
                        .step(&mut p.x, h, |x, dx| {
                            let s = InverterState::from_slice(x);
                            let i = (s.terminal_voltage() - v1) / (J * xc);
                            let g = GridInterface::from_network(i, s.delta);
                            dx.copy_from_slice(&inverter_derivatives(&s, &g, &params).to_array());
                        })
                        .map_err(|e| CosimError::NumericalBlowup {
                            t,
                            what: format!("inverter at bus {} node {}: {e}", f.bus_id, p.node),
                        })?;
                }
                let w = p.x[3];
                if !((w - params.omega_0).abs() < 0.5 * params.omega_0)
                    || !(p.x[11].abs() < self.opts.v_limit)
                {
                    return Err(CosimError::NumericalBlowup {
                        t,
                        what: format!(
                            "inverter at bus {} node {} left its operating range",
                            f.bus_id, p.node
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub count: usize,
    pub seed: u64,
    pub weights: KindWeights,
    pub duration: f64,
    pub sample_rate: f64,
    /// Writes rows under `forced_oscillation/` or `natural_oscillation/`.
    pub route_by_kind: bool,
    /// Train fraction for `split.csv`; no split file when `None`.
    pub train_fraction: Option<f64>,
    pub bindings: ProfileBindings,
    pub transient: TransientOptions,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            count: 1,
            seed: 0,
            weights: KindWeights::uniform(),
            duration: 4.0,
            sample_rate: 240.0,
            route_by_kind: false,
            train_fraction: None,
            bindings: ProfileBindings::default(),
            transient: TransientOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub manifest: Vec<ManifestRow>,
    pub files: Vec<PathBuf>,
    /// Row index and error of every scenario that did not complete.
    pub failures: Vec<(usize, String)>,
}

/// Samples and runs `count` scenarios, writing `row_<i>/{trans,dist}.csv`,
/// `manifest.csv` and optionally `split.csv` under `out_dir`. Row seeds are
/// drawn up front so results do not depend on the worker count. A failing
/// scenario is recorded in the manifest and does not stop the batch.
pub fn run_batch(
    net: &NetworkModel,
    profiles: Option<&ProfileSet>,
    opts: &BatchOptions,
    out_dir: &Path,
) -> Result<BatchOutcome, CosimError> {
    let mut master = ChaCha8Rng::seed_from_u64(opts.seed);
    let seeds: Vec<u64> = (0..opts.count).map(|_| master.next_u64()).collect();
    let mut specs = Vec::with_capacity(opts.count);
    for &s in &seeds {
        let mut spec = sample_scenario(net, s, &opts.weights)?;
        spec.duration = opts.duration;
        spec.sample_rate = opts.sample_rate;
        if let Some(set) = profiles {
            let (start, end) = set
                .span()
                .ok_or_else(|| CosimError::InvalidScenario("profile zones do not overlap".into()))?;
            let minutes = (end - start).num_minutes();
            let pick = ChaCha8Rng::seed_from_u64(s ^ 0x9e37_79b9_7f4a_7c15).random_range(0..=minutes);
            spec.operating_point = Some(start + Duration::minutes(pick));
        }
        specs.push(spec);
    }

    let dir_of = |i: usize, spec: &ScenarioSpec| {
        let base = if opts.route_by_kind {
            out_dir.join(spec.kind.folder())
        } else {
            out_dir.to_path_buf()
        };
        base.join(format!("row_{i}"))
    };
    let results: Vec<Result<Vec<PathBuf>, CosimError>> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let inj = match (profiles, spec.operating_point) {
                (Some(set), Some(t)) => Injections::from_profiles(net, set, &opts.bindings, t)?,
                _ => Injections::base(net),
            };
            let res = run_transient_scenario(net, spec, &inj, &opts.transient)?;
            Ok(write_transient(
                &res.trans.quantized(),
                &res.dist.quantized(),
                &dir_of(i, spec),
            )?)
        })
        .collect();

    let mut outcome = BatchOutcome {
        manifest: Vec::new(),
        files: Vec::new(),
        failures: Vec::new(),
    };
    for (i, (spec, r)) in specs.iter().zip(results).enumerate() {
        let status = match r {
            Ok(files) => {
                outcome.files.extend(files);
                "ok".to_string()
            }
            Err(e) => {
                let _ = std::fs::remove_dir_all(dir_of(i, spec));
                outcome.failures.push((i, e.to_string()));
                format!("failed: {e}")
            }
        };
        outcome.manifest.push(ManifestRow {
            row: i,
            kind: spec.kind.to_string(),
            target: spec.label(net).1,
            t_on: spec.t_on,
            t_clear: spec.t_clear,
            status,
        });
    }
    std::fs::create_dir_all(out_dir).map_err(|source| crate::records::RecordsError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let manifest = out_dir.join("manifest.csv");
    write_manifest(&outcome.manifest, &manifest)?;
    outcome.files.push(manifest);

    if let Some(frac) = opts.train_fraction {
        let mut rows: Vec<usize> = (0..opts.count).collect();
        rows.shuffle(&mut master);
        let n_train = (frac * opts.count as f64).round() as usize;
        let mut assignment: Vec<(usize, &str)> = rows
            .iter()
            .enumerate()
            .map(|(k, &r)| (r, if k < n_train { "train" } else { "test" }))
            .collect();
        assignment.sort_unstable();
        let split = out_dir.join("split.csv");
        write_split(&assignment, &split)?;
        outcome.files.push(split);
    }
    Ok(outcome)
}
