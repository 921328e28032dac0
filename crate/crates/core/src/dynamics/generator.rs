use serde::{Deserialize, Serialize};

use super::OMEGA_0;
use crate::grid::GeneratorSpec;

/// Classical machine state: rotor angle, speed and governor output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenState {
    pub delta: f64,
    pub omega: f64,
    pub p_m: f64,
}

impl GenState {
    pub fn at_rest(delta: f64, p_m: f64) -> Self {
        GenState {
            delta,
            omega: OMEGA_0,
            p_m,
        }
    }
}

/// Exogenous quantities of one machine for a derivative evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenInputs {
    /// Electrical power delivered to the network.
    pub p_e: f64,
    /// Governor reference.
    pub p_ref: f64,
    /// Speed the damper torque acts against. Nominal speed for an isolated
    /// machine; the damping-weighted system speed inside a network.
    pub omega_ref: f64,
}

/// Swing and governor equations with the governor reference taken from the
/// dispatched set point in `spec` and damping relative to nominal speed.
pub fn generator_derivatives(s: &GenState, p_e: f64, spec: &GeneratorSpec) -> GenState {
    generator_derivatives_with(
        s,
        &GenInputs {
            p_e,
            p_ref: spec.p_set,
            omega_ref: OMEGA_0,
        },
        spec,
    )
}

pub fn generator_derivatives_with(s: &GenState, u: &GenInputs, spec: &GeneratorSpec) -> GenState {
    let slip = s.omega - OMEGA_0;
    GenState {
        delta: slip,
        omega: (s.p_m - u.p_e - spec.damping * (s.omega - u.omega_ref)) / spec.inertia,
        p_m: (-s.p_m + u.p_ref - slip / (OMEGA_0 * spec.droop)) / spec.t_g,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rk4_step;
    use crate::grid::GeneratorKind;

    fn spec(damping: f64) -> GeneratorSpec {
        GeneratorSpec {
            bus: 1,
            p_set: 0.8,
            p_min: 0.0,
            p_max: 2.0,
            inertia: 0.05,
            damping,
            xd_prime: 0.2,
            droop: 0.05,
            t_g: 0.4,
            kind: GeneratorKind::Thermal,
        }
    }

    #[test]
    fn equilibrium_has_zero_derivatives() {
        let g = spec(0.3);
        let d = generator_derivatives(&GenState::at_rest(0.2, 0.8), 0.8, &g);
        assert_eq!(
            d,
            GenState {
                delta: 0.0,
                omega: 0.0,
                p_m: 0.0
            }
        );
    }

    #[test]
    fn load_rejection_accelerates_rotor() {
        let g = spec(0.3);
        let d = generator_derivatives(&GenState::at_rest(0.2, 0.8), 0.7, &g);
        assert!((d.omega - 0.1 / g.inertia).abs() < 1e-12);
        assert_eq!(d.delta, 0.0);
    }

    #[test]
    fn droop_statics_single_machine() {
        // p_e steps from 0.8 to 0.9 with no damping; the governor settles at
        // a per-unit speed deviation of -R * dp.
        let g = spec(0.0);
        let p_e = 0.9;
        let mut x = vec![0.0, OMEGA_0, 0.8];
        let f = |x: &[f64]| {
            let d = generator_derivatives(
                &GenState {
                    delta: x[0],
                    omega: x[1],
                    p_m: x[2],
                },
                p_e,
                &g,
            );
            vec![d.delta, d.omega, d.p_m]
        };
        for _ in 0..60_000 {
            x = rk4_step(&x, f, 1e-3).unwrap();
        }
        let dev_pu = (x[1] - OMEGA_0) / OMEGA_0;
        assert!((dev_pu - (-g.droop * 0.1)).abs() < 1e-6, "{dev_pu}");
        assert!((x[2] - p_e).abs() < 1e-6);
    }
}
