use super::DynError;

/// Classical fourth-order Runge-Kutta stepper with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `state` by `dt` in place. `f(x, dx)` writes the derivative of
    /// `x` into `dx`.
    pub fn step<F>(&mut self, state: &mut [f64], dt: f64, mut f: F) -> Result<(), DynError>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let n = state.len();
        if self.k1.len() != n {
            *self = Rk4::new(n);
        }
        f(state, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = state[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            state[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if let Some(i) = state.iter().position(|x| !x.is_finite()) {
            return Err(DynError::NonFinite { index: i });
        }
        Ok(())
    }
}

/// One RK4 step of `dx/dt = derivs(x)` returning the new state.
pub fn rk4_step<F>(state: &[f64], derivs: F, dt: f64) -> Result<Vec<f64>, DynError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(dt > 0.0, "rk4_step needs a positive step");
    let mut x = state.to_vec();
    Rk4::new(x.len()).step(&mut x, dt, |s, ds| ds.copy_from_slice(&derivs(s)))?;
    Ok(x)
}
