use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Branch, NetworkModel};

/// Dense complex nodal admittance matrix indexed by bus position in the model.
pub type Ybus = DMatrix<Complex64>;

/// Series admittance of a branch.
pub fn branch_admittance(br: &Branch) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x)
}

/// Assembles the π-model admittance matrix over in-service branches.
pub fn build_ybus(net: &NetworkModel) -> Ybus {
    let n = net.n_buses();
    let mut y = Ybus::from_element(n, n, Complex64::new(0.0, 0.0));
    for br in net.branches.iter().filter(|b| b.in_service()) {
        let (Some(i), Some(j)) = (net.bus_index(br.from), net.bus_index(br.to)) else {
            continue;
        };
        stamp_branch(&mut y, i, j, br, 1.0);
    }
    y
}

/// Adds (`sign = 1`) or removes (`sign = -1`) one branch from a matrix.
pub(crate) fn stamp_branch(y: &mut Ybus, i: usize, j: usize, br: &Branch, sign: f64) {
    let ys = branch_admittance(br) * sign;
    let half_b = Complex64::new(0.0, br.b / 2.0) * sign;
    y[(i, i)] += ys + half_b;
    y[(j, j)] += ys + half_b;
    y[(i, j)] -= ys;
    y[(j, i)] -= ys;
}
