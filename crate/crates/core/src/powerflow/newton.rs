use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{PfError, PfOptions};
use crate::grid::{build_ybus, BusKind, GeneratorKind, NetworkModel, Ybus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

/// Specified net injections (generation minus load) and voltage set points
/// for one power-flow solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PfProblem {
    pub types: Vec<BusType>,
    pub p_spec: Vec<f64>,
    pub q_spec: Vec<f64>,
    pub v_set: Vec<f64>,
}

impl PfProblem {
    /// Base-case injections: generator set points, lumped loads at
    /// `p·scale`. Feeders contribute nothing here; callers add their
    /// equivalent load with [`PfProblem::add_load`].
    pub fn from_network(net: &NetworkModel) -> Self {
        let gen_p: Vec<f64> = net.generators.iter().map(|g| g.p_set).collect();
        let scale: Vec<f64> = net.loads.iter().map(|l| l.scale).collect();
        Self::build(net, &gen_p, &scale)
    }

    /// Injections for an explicit dispatch (`gen_p`, one per generator) and
    /// load multipliers (`load_scale`, one per lumped load). Wind units sit
    /// on PQ buses, so their output enters as negative load.
    pub fn build(net: &NetworkModel, gen_p: &[f64], load_scale: &[f64]) -> Self {
        let n = net.n_buses();
        let mut types = vec![BusType::Pq; n];
        let mut v_set = vec![1.0; n];
        for (i, bus) in net.buses.iter().enumerate() {
            match bus.kind {
                BusKind::Slack => types[i] = BusType::Slack,
                BusKind::Generator => {
                    let thermal = net
                        .generators
                        .iter()
                        .any(|g| g.bus == bus.id && g.kind == GeneratorKind::Thermal);
                    if thermal {
                        types[i] = BusType::Pv;
                    }
                }
                BusKind::Load | BusKind::Coupling => {}
            }
            if types[i] != BusType::Pq {
                v_set[i] = bus.v_setpoint.unwrap_or(1.0);
            }
        }
        let mut prob = PfProblem {
            types,
            p_spec: vec![0.0; n],
            q_spec: vec![0.0; n],
            v_set,
        };
        for (g, &p) in net.generators.iter().zip(gen_p) {
            let i = net.bus_index(g.bus).expect("validated generator bus");
            prob.p_spec[i] += p;
        }
        for (l, &k) in net.loads.iter().zip(load_scale) {
            let i = net.bus_index(l.bus).expect("validated load bus");
            prob.add_load(i, Complex64::new(l.p * k, l.q * k));
        }
        prob
    }

    pub fn add_load(&mut self, bus: usize, s: Complex64) {
        self.p_spec[bus] -= s.re;
        self.q_spec[bus] -= s.im;
    }

    /// Flat start: set-point magnitudes on slack/PV buses, 1.0 pu elsewhere, zero angles.
    pub fn flat_start(&self) -> Vec<Complex64> {
        self.types
            .iter()
            .zip(&self.v_set)
            .map(|(t, &v)| Complex64::new(if *t == BusType::Pq { 1.0 } else { v }, 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    /// Active and reactive flow per branch (model order), at the from end.
    /// Out-of-service branches carry zero.
    pub branch_p: Vec<f64>,
    pub branch_q: Vec<f64>,
    /// Net injection per bus implied by the solved voltages.
    pub p_injection: Vec<f64>,
    pub q_injection: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Largest mismatch before each Newton update and after the last one.
    pub mismatch_history: Vec<f64>,
}

impl PfSolution {
    pub fn voltage(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.vm[bus], self.va[bus])
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.vm.len()).map(|i| self.voltage(i)).collect()
    }

    /// Series I²R losses summed over in-service branches.
    pub fn losses(&self, net: &NetworkModel) -> f64 {
        net.branches
            .iter()
            .filter(|b| b.in_service())
            .map(|br| {
                let i = net.bus_index(br.from).unwrap();
                let j = net.bus_index(br.to).unwrap();
                let current = (self.voltage(i) - self.voltage(j)) / Complex64::new(br.r, br.x);
                br.r * current.norm_sqr()
            })
            .sum()
    }
}

/// Newton-Raphson power flow on the base-case injections from a flat start.
pub fn solve_transmission_pf(net: &NetworkModel, tol: f64, max_iter: usize) -> Result<PfSolution, PfError> {
    let prob = PfProblem::from_network(net);
    let ybus = build_ybus(net);
    solve_problem(net, &ybus, &prob, None, &PfOptions { tol, max_iter })
}

fn power_injection(ybus: &Ybus, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let current: Complex64 = (0..n).map(|k| ybus[(i, k)] * v[k]).sum();
            v[i] * current.conj()
        })
        .collect()
}

/// Full polar Newton-Raphson. `v0` overrides the flat start; its magnitudes on
/// slack and PV buses are reset to the set points.
pub fn solve_problem(
    net: &NetworkModel,
    ybus: &Ybus,
    prob: &PfProblem,
    v0: Option<&[Complex64]>,
    opts: &PfOptions,
) -> Result<PfSolution, PfError> {
    assert!(opts.tol > 0.0, "power-flow tolerance must be positive");
    let n = prob.types.len();
    let mut v: Vec<Complex64> = match v0 {
        Some(v0) => v0
            .iter()
            .zip(prob.types.iter().zip(&prob.v_set))
            .map(|(z, (t, &vs))| match t {
                BusType::Pq => *z,
                _ => Complex64::from_polar(vs, z.arg()),
            })
            .collect(),
        None => prob.flat_start(),
    };
    let slack = prob
        .types
        .iter()
        .position(|t| *t == BusType::Slack)
        .expect("one slack bus");
    v[slack] = Complex64::new(prob.v_set[slack], 0.0);

    let pvpq: Vec<usize> = (0..n).filter(|&i| prob.types[i] != BusType::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| prob.types[i] == BusType::Pq).collect();
    let (n_ang, n_mag) = (pvpq.len(), pq.len());
    let dim = n_ang + n_mag;

    let mismatch = |v: &[Complex64]| -> (DVector<f64>, f64) {
        let s = power_injection(ybus, v);
        let mut f = DVector::zeros(dim);
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - prob.p_spec[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[n_ang + r] = s[i].im - prob.q_spec[i];
        }
        let worst = f.iter().fold(0.0f64, |m, x| {
            if x.is_finite() {
                m.max(x.abs())
            } else {
                f64::INFINITY
            }
        });
        (f, worst)
    };

    let mut history = Vec::new();
    let (mut f, mut worst) = mismatch(&v);
    history.push(worst);
    let mut iterations = 0;
    while worst > opts.tol {
        if iterations >= opts.max_iter || !worst.is_finite() {
            return Err(PfError::NoConvergence {
                max_mismatch: worst,
                iterations,
            });
        }
        let jac = jacobian(ybus, &v, &pvpq, &pq);
        let Some(dx) = jac.lu().solve(&(-&f)) else {
            return Err(PfError::NoConvergence {
                max_mismatch: worst,
                iterations,
            });
        };
        let mut va: Vec<f64> = v.iter().map(|z| z.arg()).collect();
        let mut vm: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] += dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] += dx[n_ang + r];
        }
        for i in 0..n {
            v[i] = Complex64::from_polar(vm[i], va[i]);
        }
        iterations += 1;
        (f, worst) = mismatch(&v);
        history.push(worst);
    }

    Ok(finish(net, ybus, &v, iterations, worst, history))
}

// dS/dθ and dS/d|V| restricted to the unknowns.
fn jacobian(ybus: &Ybus, v: &[Complex64], pvpq: &[usize], pq: &[usize]) -> DMatrix<f64> {
    let n = v.len();
    let ibus: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|k| ybus[(i, k)] * v[k]).sum())
        .collect();
    let vnorm: Vec<Complex64> = v.iter().map(|z| z / z.norm()).collect();
    let j = Complex64::new(0.0, 1.0);

    // dS_i/dθ_k and dS_i/d|V|_k.
    let ds_dva = |i: usize, k: usize| -> Complex64 {
        let mut d = -v[i] * (ybus[(i, k)] * v[k]).conj();
        if i == k {
            d += v[i] * ibus[i].conj();
        }
        j * d
    };
    let ds_dvm = |i: usize, k: usize| -> Complex64 {
        let mut d = v[i] * (ybus[(i, k)] * vnorm[k]).conj();
        if i == k {
            d += ibus[i].conj() * vnorm[i];
        }
        d
    };

    let (na, nm) = (pvpq.len(), pq.len());
    let mut jac = DMatrix::zeros(na + nm, na + nm);
    for (r, &i) in pvpq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(r, c)] = ds_dva(i, k).re;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(r, na + c)] = ds_dvm(i, k).re;
        }
    }
    for (r, &i) in pq.iter().enumerate() {
        for (c, &k) in pvpq.iter().enumerate() {
            jac[(na + r, c)] = ds_dva(i, k).im;
        }
        for (c, &k) in pq.iter().enumerate() {
            jac[(na + r, na + c)] = ds_dvm(i, k).im;
        }
    }
    jac
}

fn finish(
    net: &NetworkModel,
    ybus: &Ybus,
    v: &[Complex64],
    iterations: usize,
    max_mismatch: f64,
    mismatch_history: Vec<f64>,
) -> PfSolution {
    let (branch_p, branch_q): (Vec<f64>, Vec<f64>) =
        branch_flows(net, v).into_iter().map(|s| (s.re, s.im)).unzip();
    let s = power_injection(ybus, v);
    PfSolution {
        vm: v.iter().map(|z| z.norm()).collect(),
        va: v.iter().map(|z| z.arg()).collect(),
        branch_p,
        branch_q,
        p_injection: s.iter().map(|z| z.re).collect(),
        q_injection: s.iter().map(|z| z.im).collect(),
        iterations,
        max_mismatch,
        mismatch_history,
    }
}

/// Complex power entering each branch at its from end (π model).
pub fn branch_flows(net: &NetworkModel, v: &[Complex64]) -> Vec<Complex64> {
    net.branches
        .iter()
        .map(|br| {
            if !br.in_service() {
                return Complex64::new(0.0, 0.0);
            }
            let i = net.bus_index(br.from).unwrap();
            let j = net.bus_index(br.to).unwrap();
            let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
            let current = (v[i] - v[j]) * ys + v[i] * Complex64::new(0.0, br.b / 2.0);
            v[i] * current.conj()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_case;

    pub(crate) fn two_bus(p: f64, q: f64) -> NetworkModel {
        parse_case(&format!(
            r#"{{
            "buses": [
                {{"id": 1, "kind": "slack", "base_kv": 230.0, "v_setpoint": 1.0}},
                {{"id": 2, "kind": "load", "base_kv": 230.0}}
            ],
            "branches": [{{"from": 1, "to": 2, "r": 0.0, "x": 0.1}}],
            "generators": [{{"bus": 1, "p_set": 0.0, "p_min": 0.0, "p_max": 100.0,
                            "inertia": 0.1, "damping": 0.0, "xd_prime": 0.05,
                            "droop": 0.05, "t_g": 0.5}}],
            "loads": [{{"bus": 2, "p": {p}, "q": {q}}}]
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn no_load_flat_solution() {
        let sol = solve_transmission_pf(&two_bus(0.0, 0.0), 1e-8, 20).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!((sol.vm[1] - 1.0).abs() < 1e-12);
        assert!(sol.va[1].abs() < 1e-12);
        assert!(sol.branch_p.iter().chain(&sol.branch_q).all(|f| f.abs() < 1e-12));
    }

    #[test]
    fn lossless_two_bus_closed_form() {
        let sol = solve_transmission_pf(&two_bus(0.5, 0.0), 1e-10, 20).unwrap();
        let theta = -(2.0f64 * 0.1 * 0.5).asin() / 2.0;
        assert!((sol.va[1] - theta).abs() < 1e-9);
        assert!((sol.vm[1] - theta.cos()).abs() < 1e-9);
        assert!((sol.va[1] + 0.0500837).abs() < 1e-6);
        assert!((sol.vm[1] - 0.998746).abs() < 1e-6);
        assert_eq!(sol.va[0], 0.0);
        assert!((sol.branch_p[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn beyond_transfer_limit_does_not_converge() {
        let err = solve_transmission_pf(&two_bus(20.0, 0.0), 1e-8, 20).unwrap_err();
        assert!(matches!(err, PfError::NoConvergence { .. }));
    }

    #[test]
    fn restart_from_solution_is_immediate() {
        let net = two_bus(1.2, 0.4);
        let prob = PfProblem::from_network(&net);
        let y = build_ybus(&net);
        let opts = PfOptions {
            tol: 1e-8,
            max_iter: 20,
        };
        let sol = solve_problem(&net, &y, &prob, None, &opts).unwrap();
        let again = solve_problem(&net, &y, &prob, Some(&sol.voltages()), &opts).unwrap();
        assert!(again.iterations <= 2);
    }

    #[test]
    fn quadratic_tail() {
        let net = two_bus(2.0, 0.8);
        let sol = solve_transmission_pf(&net, 1e-12, 20).unwrap();
        let h = &sol.mismatch_history;
        // Once the mismatch is below 1e-2 each step should shrink it tenfold.
        for w in h.windows(2).filter(|w| w[0] < 1e-2 && w[1] > 1e-14) {
            assert!(w[1] / w[0] <= 0.1, "{h:?}");
        }
    }
}
