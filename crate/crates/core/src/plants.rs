//! Benchmark plants behind a uniform continuous-time ODE interface, a
//! fixed-step RK4 propagator for the zero-order-hold sample intervals,
//! and an exact discretization oracle for the LTI plants.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Mass-spring-damper: `m q'' + c q' + k q = u`, state `[q, q']`.
pub fn mck_rhs(x: &DVector<f64>, u: f64, m: f64, c: f64, k: f64) -> Result<DVector<f64>> {
    if m <= 0.0 {
        return Err(Error::Config(format!("mass must be positive, got {m}")));
    }
    if x.len() != 2 {
        return Err(Error::Dimension("MCK state must have length 2".into()));
    }
    Ok(DVector::from_vec(vec![x[1], (u - c * x[1] - k * x[0]) / m]))
}

/// Three masses in series between two walls, force on mass 1, no damping.
/// State `[q1, q2, q3, q1', q2', q3']`.
pub fn three_mass_rhs(x: &DVector<f64>, u: f64, m: f64, k: f64) -> Result<DVector<f64>> {
    if m <= 0.0 {
        return Err(Error::Config(format!("mass must be positive, got {m}")));
    }
    if x.len() != 6 {
        return Err(Error::Dimension("three-mass state must have length 6".into()));
    }
    let (q1, q2, q3) = (x[0], x[1], x[2]);
    Ok(DVector::from_vec(vec![
        x[3],
        x[4],
        x[5],
        (-k * q1 + k * (q2 - q1) + u) / m,
        (-k * (q2 - q1) + k * (q3 - q2)) / m,
        (-k * (q3 - q2) - k * q3) / m,
    ]))
}

/// Van der Pol oscillator: `q'' - mu (1 - q^2) q' + q = u`, state `[q, q']`.
pub fn vdp_rhs(x: &DVector<f64>, u: f64, mu: f64) -> Result<DVector<f64>> {
    if x.len() != 2 {
        return Err(Error::Dimension("Van der Pol state must have length 2".into()));
    }
    Ok(DVector::from_vec(vec![
        x[1],
        u + mu * (1.0 - x[0] * x[0]) * x[1] - x[0],
    ]))
}

/// Central-difference semi-discretization of the 1-D Burgers equation on
/// `[0, 2*pi]` with periodic wrap `w_0 = w_N`, `w_{N+1} = w_1`, and a
/// point actuator at `actuator_node` (1-based).
pub fn burgers_rhs(
    w: &DVector<f64>,
    u: f64,
    nu: f64,
    actuator_node: usize,
) -> Result<DVector<f64>> {
    let n = w.len();
    if n < 3 {
        return Err(Error::Config(format!("Burgers grid needs N >= 3, got {n}")));
    }
    if actuator_node == 0 || actuator_node > n {
        return Err(Error::Config(format!(
            "actuator node {actuator_node} out of range 1..={n}"
        )));
    }
    let dx = 2.0 * std::f64::consts::PI / (n as f64 - 1.0);
    let mut dw = DVector::zeros(n);
    for i in 0..n {
        let wp = w[(i + 1) % n];
        let wm = w[(i + n - 1) % n];
        dw[i] = -w[i] * (wp - wm) / (2.0 * dx) + nu * (wp - 2.0 * w[i] + wm) / (dx * dx);
    }
    dw[actuator_node - 1] += u;
    Ok(dw)
}

/// Continuous-time dynamics of one benchmark system.
#[derive(Debug, Clone)]
pub enum Dynamics {
    MassSpringDamper { m: f64, c: f64, k: f64 },
    ThreeMass { m: f64, k: f64 },
    VanDerPol { mu: f64 },
    Burgers { nu: f64, grid_size: usize, actuator_node: usize },
}

impl Dynamics {
    pub fn state_dim(&self) -> usize {
        match self {
            Dynamics::MassSpringDamper { .. } | Dynamics::VanDerPol { .. } => 2,
            Dynamics::ThreeMass { .. } => 6,
            Dynamics::Burgers { grid_size, .. } => *grid_size,
        }
    }

    pub fn rhs(&self, x: &DVector<f64>, u: f64) -> Result<DVector<f64>> {
        match self {
            Dynamics::MassSpringDamper { m, c, k } => mck_rhs(x, u, *m, *c, *k),
            Dynamics::ThreeMass { m, k } => three_mass_rhs(x, u, *m, *k),
            Dynamics::VanDerPol { mu } => vdp_rhs(x, u, *mu),
            Dynamics::Burgers { nu, actuator_node, .. } => burgers_rhs(x, u, *nu, *actuator_node),
        }
    }

    /// Continuous `(A_c, B_c)` for the linear plants, used by test oracles.
    pub fn lti_matrices(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        match *self {
            Dynamics::MassSpringDamper { m, c, k } => {
                let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -k / m, -c / m]);
                let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / m]);
                Some((a, b))
            }
            Dynamics::ThreeMass { m, k } => {
                let mut a = DMatrix::zeros(6, 6);
                a[(0, 3)] = 1.0;
                a[(1, 4)] = 1.0;
                a[(2, 5)] = 1.0;
                a[(3, 0)] = -2.0 * k / m;
                a[(3, 1)] = k / m;
                a[(4, 0)] = k / m;
                a[(4, 1)] = -2.0 * k / m;
                a[(4, 2)] = k / m;
                a[(5, 1)] = k / m;
                a[(5, 2)] = -2.0 * k / m;
                let mut b = DMatrix::zeros(6, 1);
                b[(3, 0)] = 1.0 / m;
                Some((a, b))
            }
            _ => None,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match *self {
            Dynamics::MassSpringDamper { m, c, k } => {
                p.insert("m".into(), m);
                p.insert("c".into(), c);
                p.insert("k".into(), k);
            }
            Dynamics::ThreeMass { m, k } => {
                p.insert("m".into(), m);
                p.insert("k".into(), k);
            }
            Dynamics::VanDerPol { mu } => {
                p.insert("mu".into(), mu);
            }
            Dynamics::Burgers { nu, grid_size, actuator_node } => {
                p.insert("nu".into(), nu);
                p.insert("N".into(), grid_size as f64);
                p.insert("actuator_node".into(), actuator_node as f64);
            }
        }
        p
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        match (self, name) {
            (Dynamics::MassSpringDamper { m, .. }, "m") => *m = value,
            (Dynamics::MassSpringDamper { c, .. }, "c") => *c = value,
            (Dynamics::MassSpringDamper { k, .. }, "k") => *k = value,
            (Dynamics::ThreeMass { m, .. }, "m") => *m = value,
            (Dynamics::ThreeMass { k, .. }, "k") => *k = value,
            (Dynamics::VanDerPol { mu }, "mu") => *mu = value,
            (Dynamics::Burgers { nu, .. }, "nu") => *nu = value,
            (d, name) => {
                return Err(Error::Config(format!(
                    "unknown parameter '{name}' for plant {d:?}"
                )))
            }
        }
        Ok(())
    }
}

/// Builds a 0/1 selector matrix picking the given (0-based) rows.
pub fn selector(rows: &[usize], n: usize) -> Result<DMatrix<f64>> {
    let mut s = DMatrix::zeros(rows.len(), n);
    for (i, &r) in rows.iter().enumerate() {
        if r >= n {
            return Err(Error::Dimension(format!("selector index {r} out of range 0..{n}")));
        }
        s[(i, r)] = 1.0;
    }
    Ok(s)
}

/// A benchmark plant: dynamics plus the measured-state selector `S`
/// (full state -> xi) and the output selector `C` (xi -> y).
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub name: String,
    pub dynamics: Dynamics,
    pub measured_selector: DMatrix<f64>,
    pub output_selector: DMatrix<f64>,
    pub input_dim: usize,
}

impl PlantModel {
    pub fn new(
        name: impl Into<String>,
        dynamics: Dynamics,
        measured_rows: &[usize],
        output_rows: &[usize],
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        let s = selector(measured_rows, n)?;
        let c = selector(output_rows, measured_rows.len())?;
        Ok(Self {
            name: name.into(),
            dynamics,
            measured_selector: s,
            output_selector: c,
            input_dim: 1,
        })
    }

    /// Mass-spring-damper with `xi = [q, q']`, `y = q`.
    pub fn mck(m: f64, c: f64, k: f64) -> Result<Self> {
        Self::new("mck", Dynamics::MassSpringDamper { m, c, k }, &[0, 1], &[0])
    }

    /// Three-mass chain with `xi = [q1, q3, q1']`, `y = q3`.
    pub fn three_mass(m: f64, k: f64) -> Result<Self> {
        Self::new("three_mass", Dynamics::ThreeMass { m, k }, &[0, 2, 3], &[1])
    }

    /// Van der Pol oscillator with `xi = [q, q']`, `y = q`.
    pub fn van_der_pol(mu: f64) -> Result<Self> {
        Self::new("vdp", Dynamics::VanDerPol { mu }, &[0, 1], &[0])
    }

    /// Burgers equation sensed at nodes {1,16,31,46,61,76,91} (1-based),
    /// output at node 61, point actuator at node 55.
    pub fn burgers(nu: f64, grid_size: usize) -> Result<Self> {
        let sensors_1based = [1usize, 16, 31, 46, 61, 76, 91];
        for &s in &sensors_1based {
            if s > grid_size {
                return Err(Error::Config(format!(
                    "sensor node {s} exceeds grid size {grid_size}"
                )));
            }
        }
        let sensors: Vec<usize> = sensors_1based.iter().map(|&s| s - 1).collect();
        // y = w_61, the 5th sensor
        Self::new(
            "burgers",
            Dynamics::Burgers { nu, grid_size, actuator_node: 55 },
            &sensors,
            &[4],
        )
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn measured_dim(&self) -> usize {
        self.measured_selector.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.output_selector.nrows()
    }

    pub fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.measured_selector * x
    }

    /// Substep floor keeping explicit diffusion stable for Burgers:
    /// `h <= 0.2 dx^2 / nu` in addition to the configured substeps.
    pub fn min_substeps(&self, t_s: f64) -> usize {
        match self.dynamics {
            Dynamics::Burgers { nu, grid_size, .. } => {
                let dx = 2.0 * std::f64::consts::PI / (grid_size as f64 - 1.0);
                let h_max = 0.2 * dx * dx / nu;
                (t_s / h_max).ceil() as usize
            }
            _ => 1,
        }
    }
}

/// Fixed-step RK4 configuration for the inter-sample propagation.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub substeps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { substeps: 20 }
    }
}

/// Classical RK4 over `[0, t_s]` with `u` held constant (zero-order hold).
pub fn rk4_propagate<F>(
    rhs: F,
    x: &DVector<f64>,
    u_held: f64,
    t_s: f64,
    substeps: usize,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>, f64) -> Result<DVector<f64>>,
{
    if substeps == 0 {
        return Err(Error::Config("substeps must be >= 1".into()));
    }
    if t_s <= 0.0 {
        return Err(Error::Config("sample time must be positive".into()));
    }
    let h = t_s / substeps as f64;
    let mut x = x.clone();
    for step in 0..substeps {
        let k1 = rhs(&x, u_held)?;
        let k2 = rhs(&(&x + &k1 * (h / 2.0)), u_held)?;
        let k3 = rhs(&(&x + &k2 * (h / 2.0)), u_held)?;
        let k4 = rhs(&(&x + &k3 * h), u_held)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
    }
    Ok(x)
}

/// Exact zero-order-hold discretization `A_d = exp(A_c T_s)`,
/// `B_d = int_0^Ts exp(A_c tau) dtau B_c`, via the augmented exponential
/// `exp([[A, B], [0, 0]] T_s)`.
pub fn zoh_discretize_exact(
    a_c: &DMatrix<f64>,
    b_c: &DMatrix<f64>,
    t_s: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a_c.nrows();
    if a_c.ncols() != n {
        return Err(Error::Dimension("A_c must be square".into()));
    }
    if b_c.nrows() != n {
        return Err(Error::Dimension("B_c row count must match A_c".into()));
    }
    let m = b_c.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a_c);
    aug.view_mut((0, n), (n, m)).copy_from(b_c);
    let e = (aug * t_s).exp();
    let a_d = e.view((0, 0), (n, n)).into_owned();
    let b_d = e.view((0, n), (n, m)).into_owned();
    Ok((a_d, b_d))
}
