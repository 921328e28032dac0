//! Grid-forming PV inverter in its own dq frame: low-pass power calculator,
//! virtual-inertia frequency droop, voltage droop, cascaded PI voltage and
//! current controllers, and the LC output filter.
//!
//! Filter inductance and capacitance are given as per-unit reactance and
//! susceptance at nominal frequency; the ODEs divide them by `omega_0` to get
//! the time constants in seconds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DynError, OMEGA_0};

pub const STATE_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterParams {
    pub omega_c: f64,
    pub omega_0: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub e_star: f64,
    pub m_f: f64,
    pub d_f: f64,
    pub m_v: f64,
    pub d_v: f64,
    pub k_iv: f64,
    pub k_pv: f64,
    pub f: f64,
    pub k_ic: f64,
    pub k_pc: f64,
    pub r_f: f64,
    pub l_f: f64,
    pub c_f: f64,
    /// Filter current rating; equilibria beyond it are rejected.
    #[serde(default = "default_i_max")]
    pub i_max: f64,
}

fn default_i_max() -> f64 {
    1.5
}

impl Default for InverterParams {
    fn default() -> Self {
        Self::preset()
    }
}

impl InverterParams {
    /// Shipped controller preset: 1% frequency droop and 5% voltage droop on
    /// the inverter rating, 30 Hz power measurement filter.
    pub fn preset() -> Self {
        let omega_0 = OMEGA_0;
        let d_f = 1.0 / (0.01 * omega_0);
        InverterParams {
            omega_c: 2.0 * PI * 30.0,
            omega_0,
            p_star: 0.0,
            q_star: 0.0,
            e_star: 1.0,
            m_f: 0.1 * d_f,
            d_f,
            m_v: 0.5,
            d_v: 0.05,
            k_iv: 390.0,
            k_pv: 0.05,
            f: 0.75,
            k_ic: 1.6e4,
            k_pc: 10.0,
            r_f: 0.005,
            l_f: 0.08,
            c_f: 0.07,
            i_max: default_i_max(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("omega_c", self.omega_c),
            ("omega_0", self.omega_0),
            ("m_f", self.m_f),
            ("m_v", self.m_v),
            ("l_f", self.l_f),
            ("c_f", self.c_f),
            ("k_iv", self.k_iv),
            ("k_ic", self.k_ic),
            ("i_max", self.i_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("inverter parameter {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn inductance(&self) -> f64 {
        self.l_f / self.omega_0
    }

    fn capacitance(&self) -> f64 {
        self.c_f / self.omega_0
    }
}

/// The 13 dynamic states of one inverter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InverterState {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub omega: f64,
    pub vod_star: f64,
    pub xi_d: f64,
    pub xi_q: f64,
    pub psi_d: f64,
    pub psi_q: f64,
    pub i_ld: f64,
    pub i_lq: f64,
    pub v_od: f64,
    pub v_oq: f64,
}

impl InverterState {
    pub fn to_array(&self) -> [f64; STATE_LEN] {
        [
            self.p,
            self.q,
            self.delta,
            self.omega,
            self.vod_star,
            self.xi_d,
            self.xi_q,
            self.psi_d,
            self.psi_q,
            self.i_ld,
            self.i_lq,
            self.v_od,
            self.v_oq,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        InverterState {
            p: x[0],
            q: x[1],
            delta: x[2],
            omega: x[3],
            vod_star: x[4],
            xi_d: x[5],
            xi_q: x[6],
            psi_d: x[7],
            psi_q: x[8],
            i_ld: x[9],
            i_lq: x[10],
            v_od: x[11],
            v_oq: x[12],
        }
    }

    /// Filter capacitor voltage rotated into the network frame.
    pub fn terminal_voltage(&self) -> Complex64 {
        Complex64::new(self.v_od, self.v_oq) * Complex64::from_polar(1.0, self.delta)
    }
}

/// Output current at the filter terminal in the inverter's dq frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GridInterface {
    pub i_od: f64,
    pub i_oq: f64,
}

impl GridInterface {
    /// Projects a network-frame current onto the inverter frame at angle `delta`.
    pub fn from_network(current: Complex64, delta: f64) -> Self {
        let local = current * Complex64::from_polar(1.0, -delta);
        GridInterface {
            i_od: local.re,
            i_oq: local.im,
        }
    }
}

// Current and voltage references produced by the cascaded controllers.
struct Setpoints {
    i_ld: f64,
    i_lq: f64,
    v_id: f64,
    v_iq: f64,
}

fn setpoints(s: &InverterState, g: &GridInterface, p: &InverterParams) -> Setpoints {
    let l = p.inductance();
    let c = p.capacitance();
    let w0 = p.omega_0;
    let i_ld = p.k_iv * s.xi_d + p.f * g.i_od + p.k_pv * (s.vod_star - s.v_od) - w0 * c * s.v_oq;
    let i_lq = p.k_iv * s.xi_q + p.f * g.i_oq + p.k_pv * (0.0 - s.v_oq) + w0 * c * s.v_od;
    let v_id = p.k_ic * s.psi_d + p.k_pc * (i_ld - s.i_ld) - w0 * l * s.i_lq;
    let v_iq = p.k_ic * s.psi_q + p.k_pc * (i_lq - s.i_lq) + w0 * l * s.i_ld;
    Setpoints {
        i_ld,
        i_lq,
        v_id,
        v_iq,
    }
}

/// Time derivatives of all 13 inverter states.
pub fn inverter_derivatives(s: &InverterState, g: &GridInterface, p: &InverterParams) -> InverterState {
    let l = p.inductance();
    let c = p.capacitance();
    let sp = setpoints(s, g, p);
    InverterState {
        p: -p.omega_c * s.p + p.omega_c * (s.v_od * g.i_od + s.v_oq * g.i_oq),
        q: -p.omega_c * s.q + p.omega_c * (s.v_oq * g.i_od - s.v_od * g.i_oq),
        delta: s.omega - p.omega_0,
        omega: (-p.d_f * (s.omega - p.omega_0) + p.p_star - s.p) / p.m_f,
        vod_star: (p.d_v * (p.q_star - s.q) - (s.vod_star - p.e_star)) / p.m_v,
        xi_d: s.vod_star - s.v_od,
        xi_q: 0.0 - s.v_oq,
        psi_d: sp.i_ld - s.i_ld,
        psi_q: sp.i_lq - s.i_lq,
        i_ld: (-p.r_f * s.i_ld + s.omega * l * s.i_lq + sp.v_id - s.v_od) / l,
        i_lq: (-p.r_f * s.i_lq - s.omega * l * s.i_ld + sp.v_iq - s.v_oq) / l,
        v_od: (s.omega * c * s.v_oq + s.i_ld - g.i_od) / c,
        v_oq: (-s.omega * c * s.v_od + s.i_lq - g.i_oq) / c,
    }
}

/// Analytic Jacobian of [`inverter_derivatives`] with respect to the state,
/// row-major in the order of [`InverterState::to_array`].
pub fn inverter_jacobian(
    s: &InverterState,
    g: &GridInterface,
    p: &InverterParams,
) -> [[f64; STATE_LEN]; STATE_LEN] {
    const P: usize = 0;
    const Q: usize = 1;
    const DELTA: usize = 2;
    const W: usize = 3;
    const VSTAR: usize = 4;
    const XID: usize = 5;
    const XIQ: usize = 6;
    const PSID: usize = 7;
    const PSIQ: usize = 8;
    const ILD: usize = 9;
    const ILQ: usize = 10;
    const VOD: usize = 11;
    const VOQ: usize = 12;

    let l = p.inductance();
    let c = p.capacitance();
    let w0 = p.omega_0;
    let mut j = [[0.0; STATE_LEN]; STATE_LEN];

    // Gradients of the algebraic setpoints.
    let mut d_ild = [0.0; STATE_LEN];
    d_ild[XID] = p.k_iv;
    d_ild[VSTAR] = p.k_pv;
    d_ild[VOD] = -p.k_pv;
    d_ild[VOQ] = -w0 * c;
    let mut d_ilq = [0.0; STATE_LEN];
    d_ilq[XIQ] = p.k_iv;
    d_ilq[VOQ] = -p.k_pv;
    d_ilq[VOD] = w0 * c;
    let mut d_vid = [0.0; STATE_LEN];
    let mut d_viq = [0.0; STATE_LEN];
    for k in 0..STATE_LEN {
        d_vid[k] = p.k_pc * d_ild[k];
        d_viq[k] = p.k_pc * d_ilq[k];
    }
    d_vid[PSID] += p.k_ic;
    d_vid[ILD] += -p.k_pc;
    d_vid[ILQ] += -w0 * l;
    d_viq[PSIQ] += p.k_ic;
    d_viq[ILQ] += -p.k_pc;
    d_viq[ILD] += w0 * l;

    j[P][P] = -p.omega_c;
    j[P][VOD] = p.omega_c * g.i_od;
    j[P][VOQ] = p.omega_c * g.i_oq;

    j[Q][Q] = -p.omega_c;
    j[Q][VOQ] = p.omega_c * g.i_od;
    j[Q][VOD] = -p.omega_c * g.i_oq;

    j[DELTA][W] = 1.0;

    j[W][W] = -p.d_f / p.m_f;
    j[W][P] = -1.0 / p.m_f;

    j[VSTAR][Q] = -p.d_v / p.m_v;
    j[VSTAR][VSTAR] = -1.0 / p.m_v;

    j[XID][VSTAR] = 1.0;
    j[XID][VOD] = -1.0;
    j[XIQ][VOQ] = -1.0;

    for k in 0..STATE_LEN {
        j[PSID][k] = d_ild[k];
        j[PSIQ][k] = d_ilq[k];
    }
    j[PSID][ILD] -= 1.0;
    j[PSIQ][ILQ] -= 1.0;

    for k in 0..STATE_LEN {
        j[ILD][k] = d_vid[k] / l;
        j[ILQ][k] = d_viq[k] / l;
    }
    j[ILD][ILD] += -p.r_f / l;
    j[ILD][ILQ] += s.omega;
    j[ILD][W] += s.i_lq;
    j[ILD][VOD] += -1.0 / l;
    j[ILQ][ILQ] += -p.r_f / l;
    j[ILQ][ILD] += -s.omega;
    j[ILQ][W] += -s.i_ld;
    j[ILQ][VOQ] += -1.0 / l;

    j[VOD][VOQ] = s.omega;
    j[VOD][W] = s.v_oq;
    j[VOD][ILD] = 1.0 / c;
    j[VOQ][VOD] = -s.omega;
    j[VOQ][W] = -s.v_od;
    j[VOQ][ILQ] = 1.0 / c;

    j
}

/// Steady operating point of one inverter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterEquilibrium {
    pub state: InverterState,
    pub grid: GridInterface,
    /// Input parameters with the dispatched set points `p_star` and `e_star`
    /// filled in.
    pub params: InverterParams,
}

/// Computes the equilibrium delivering `p_target` (per-unit of the inverter
/// rating) and the parameter set point `q_star` at the terminal voltage
/// `v_terminal` (network frame). The frequency set point `p_star` and the
/// potential `e_star` are dispatched so the state is stationary.
pub fn inverter_init(
    params: &InverterParams,
    v_terminal: Complex64,
    p_target: f64,
) -> Result<InverterEquilibrium, DynError> {
    let p = params;
    let v = v_terminal.norm();
    if !(v > 0.0) || !p_target.is_finite() {
        return Err(DynError::NoEquilibrium(format!(
            "terminal voltage {v} cannot deliver {p_target}"
        )));
    }
    let w0 = p.omega_0;
    let l = p.inductance();
    let c = p.capacitance();

    let (v_od, v_oq) = (v, 0.0);
    let i_od = p_target / v;
    let i_oq = -p.q_star / v;
    let i_ld = i_od - w0 * c * v_oq;
    let i_lq = i_oq + w0 * c * v_od;
    if i_ld.hypot(i_lq) > p.i_max {
        return Err(DynError::NoEquilibrium(format!(
            "filter current {:.3} pu exceeds rating {:.3} pu",
            i_ld.hypot(i_lq),
            p.i_max
        )));
    }
    let v_id = p.r_f * i_ld - w0 * l * i_lq + v_od;
    let v_iq = p.r_f * i_lq + w0 * l * i_ld + v_oq;
    let state = InverterState {
        p: v_od * i_od + v_oq * i_oq,
        q: v_oq * i_od - v_od * i_oq,
        delta: v_terminal.arg(),
        omega: w0,
        vod_star: v_od,
        xi_d: (i_ld - p.f * i_od + w0 * c * v_oq) / p.k_iv,
        xi_q: (i_lq - p.f * i_oq - w0 * c * v_od) / p.k_iv,
        psi_d: (v_id + w0 * l * i_lq) / p.k_ic,
        psi_q: (v_iq - w0 * l * i_ld) / p.k_ic,
        i_ld,
        i_lq,
        v_od,
        v_oq,
    };
    let mut params = *p;
    params.p_star = state.p;
    params.e_star = state.vod_star - p.d_v * (p.q_star - state.q);

    let grid = GridInterface { i_od, i_oq };
    let resid = inverter_derivatives(&state, &grid, &params)
        .to_array()
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    if !(resid < 1e-8) {
        return Err(DynError::NoEquilibrium(format!("residual derivative {resid:e}")));
    }
    Ok(InverterEquilibrium { state, grid, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Rk4;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn dark_pv_equilibrium() {
        let eq = inverter_init(&InverterParams::preset(), Complex64::new(1.0, 0.0), 0.0).unwrap();
        assert_eq!(eq.state.p, 0.0);
        assert_eq!(eq.state.q, 0.0);
        assert_eq!(eq.state.omega, OMEGA_0);
        assert_eq!(eq.grid.i_od, 0.0);
        assert_eq!(eq.grid.i_oq, 0.0);
        let d = inverter_derivatives(&eq.state, &eq.grid, &eq.params).to_array();
        assert!(max_abs(&d) < 1e-9);
    }

    #[test]
    fn half_power_equilibrium_found_by_root_finding() {
        let base = InverterParams::preset();
        let v = Complex64::from_polar(1.02, -0.1);
        let eq = inverter_init(&base, v, 0.5).unwrap();
        assert!((eq.state.p - 0.5).abs() < 1e-12);

        // Independent check: Newton iteration on the derivative function with
        // a finite-difference Jacobian (the delta state is pinned since any
        // rotor angle is an equilibrium for a fixed dq current).
        let mut x = eq.state.to_array();
        for (k, v) in x.iter_mut().enumerate() {
            if k != 2 {
                *v *= 1.01;
            }
        }
        for _ in 0..20 {
            let s = InverterState::from_slice(&x);
            let f = inverter_derivatives(&s, &eq.grid, &eq.params).to_array();
            let mut jac = DMatrix::zeros(STATE_LEN, STATE_LEN);
            for k in 0..STATE_LEN {
                let h = 1e-7 * x[k].abs().max(1.0);
                let mut xp = x;
                xp[k] += h;
                let fp =
                    inverter_derivatives(&InverterState::from_slice(&xp), &eq.grid, &eq.params).to_array();
                for r in 0..STATE_LEN {
                    jac[(r, k)] = (fp[r] - f[r]) / h;
                }
            }
            // Replace the angle equation by delta = const.
            for k in 0..STATE_LEN {
                jac[(2, k)] = 0.0;
            }
            jac[(2, 2)] = 1.0;
            let mut rhs = nalgebra::DVector::from_iterator(STATE_LEN, f.iter().map(|v| -v));
            rhs[2] = 0.0;
            let dx = jac.lu().solve(&rhs).unwrap();
            for k in 0..STATE_LEN {
                x[k] += dx[k];
            }
        }
        let s = InverterState::from_slice(&x);
        assert!(max_abs(&inverter_derivatives(&s, &eq.grid, &eq.params).to_array()) < 1e-8);
        for (a, b) in x.iter().zip(eq.state.to_array()) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn overload_has_no_equilibrium() {
        let err = inverter_init(&InverterParams::preset(), Complex64::new(1.0, 0.0), 10.0).unwrap_err();
        assert!(matches!(err, DynError::NoEquilibrium(_)));
    }

    #[test]
    fn power_deficit_accelerates() {
        let eq = inverter_init(&InverterParams::preset(), Complex64::new(1.0, 0.0), 0.5).unwrap();
        let mut s = eq.state;
        s.p = 0.4;
        let d = inverter_derivatives(&s, &eq.grid, &eq.params);
        assert!((d.omega - (eq.params.p_star - 0.4) / eq.params.m_f).abs() < 1e-9);
        assert!(d.omega > 0.0);

        let mut raised = eq.params;
        raised.p_star += 1e-3;
        assert!(inverter_derivatives(&eq.state, &eq.grid, &raised).omega > 0.0);
    }

    #[test]
    fn equilibrium_persists_under_constant_current() {
        let eq = inverter_init(&InverterParams::preset(), Complex64::from_polar(0.98, 0.3), 0.7).unwrap();
        let mut x = eq.state.to_array().to_vec();
        let mut rk = Rk4::new(STATE_LEN);
        let dt = 1e-5;
        for _ in 0..100_000 {
            rk.step(&mut x, dt, |s, ds| {
                let d = inverter_derivatives(&InverterState::from_slice(s), &eq.grid, &eq.params);
                ds.copy_from_slice(&d.to_array());
            })
            .unwrap();
        }
        for (a, b) in x.iter().zip(eq.state.to_array()) {
            assert!((a - b).abs() < 1e-6, "{a} drifted from {b}");
        }
    }

    #[test]
    fn analytic_jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = InverterParams::preset();
        for _ in 0..100 {
            let mut x = [0.0; STATE_LEN];
            for v in x.iter_mut() {
                *v = rng.random_range(-1.5..1.5);
            }
            x[3] = OMEGA_0 + rng.random_range(-5.0..5.0);
            let s = InverterState::from_slice(&x);
            let g = GridInterface {
                i_od: rng.random_range(-1.0..1.0),
                i_oq: rng.random_range(-1.0..1.0),
            };
            let jac = inverter_jacobian(&s, &g, &p);
            let h = 1e-6;
            // Rows of the filter equations reach ~1e8, so errors are measured
            // relative to the largest entry of each row.
            let row_scale: Vec<f64> = jac
                .iter()
                .map(|row| row.iter().fold(1.0f64, |m, v| m.max(v.abs())))
                .collect();
            for k in 0..STATE_LEN {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fp = inverter_derivatives(&InverterState::from_slice(&xp), &g, &p).to_array();
                let fm = inverter_derivatives(&InverterState::from_slice(&xm), &g, &p).to_array();
                for r in 0..STATE_LEN {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    let an = jac[r][k];
                    assert!(
                        (fd - an).abs() / row_scale[r] < 1e-5,
                        "d f{r} / d x{k}: analytic {an}, fd {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn linearization_at_equilibrium_is_stable() {
        // Constant-current boundary: the rotor angle is the only marginal mode.
        let eq = inverter_init(&InverterParams::preset(), Complex64::new(1.0, 0.0), 0.8).unwrap();
        let jac = inverter_jacobian(&eq.state, &eq.grid, &eq.params);
        let m = DMatrix::from_fn(STATE_LEN, STATE_LEN, |r, c| jac[r][c]);
        let eig = m.complex_eigenvalues();
        let marginal = eig.iter().filter(|z| z.re.abs() < 1e-6).count();
        assert_eq!(marginal, 1, "{eig:?}");
        assert!(eig.iter().all(|z| z.re < 1e-6), "{eig:?}");
    }
}
