//! Gain synthesis: augment the identified `(A, B)` with an output
//! integrator and compute stabilizing feedback and integral gains by
//! infinite-horizon discrete LQR.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

/// The identified model stacked with an integrator on the tracking error:
///
/// ```text
/// A_a = [ A    0 ]    B_a = [ B ]    B_r = [ 0 ]    C_a = [ C  0 ]
///       [ -C   I ]          [ 0 ]          [ I ]
/// ```
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    pub a_a: DMatrix<f64>,
    pub b_a: DMatrix<f64>,
    pub b_r: DMatrix<f64>,
    pub c_a: DMatrix<f64>,
    pub state_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

/// Builds the augmented system from an identified pair and output selector.
pub fn build_augmented(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<AugmentedModel> {
    let l_xi = a.nrows();
    if a.ncols() != l_xi {
        return Err(Error::Dimension("A must be square".into()));
    }
    if b.nrows() != l_xi {
        return Err(Error::Dimension("B row count must match A".into()));
    }
    if c.ncols() != l_xi {
        return Err(Error::Dimension("C column count must match A".into()));
    }
    let l_u = b.ncols();
    let l_y = c.nrows();
    let n = l_xi + l_y;

    let mut a_a = DMatrix::zeros(n, n);
    a_a.view_mut((0, 0), (l_xi, l_xi)).copy_from(a);
    a_a.view_mut((l_xi, 0), (l_y, l_xi)).copy_from(&(-c));
    a_a.view_mut((l_xi, l_xi), (l_y, l_y))
        .copy_from(&DMatrix::identity(l_y, l_y));

    let mut b_a = DMatrix::zeros(n, l_u);
    b_a.view_mut((0, 0), (l_xi, l_u)).copy_from(b);

    let mut b_r = DMatrix::zeros(n, l_y);
    b_r.view_mut((l_xi, 0), (l_y, l_y))
        .copy_from(&DMatrix::identity(l_y, l_y));

    let mut c_a = DMatrix::zeros(l_y, n);
    c_a.view_mut((0, 0), (l_y, l_xi)).copy_from(c);

    Ok(AugmentedModel {
        a_a,
        b_a,
        b_r,
        c_a,
        state_dim: l_xi,
        input_dim: l_u,
        output_dim: l_y,
    })
}

/// LQR weights: `R_1` penalizes the augmented state, `R_2` the input.
#[derive(Debug, Clone)]
pub struct LqrWeights {
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
}

impl LqrWeights {
    pub fn validate(&self, aug_dim: usize, input_dim: usize) -> Result<()> {
        if self.r1.nrows() != aug_dim || self.r1.ncols() != aug_dim {
            return Err(Error::Dimension(format!(
                "R_1 must be {aug_dim}x{aug_dim}, got {}x{}",
                self.r1.nrows(),
                self.r1.ncols()
            )));
        }
        if self.r2.nrows() != input_dim || self.r2.ncols() != input_dim {
            return Err(Error::Dimension(format!(
                "R_2 must be {input_dim}x{input_dim}, got {}x{}",
                self.r2.nrows(),
                self.r2.ncols()
            )));
        }
        if Cholesky::new(self.r2.clone()).is_none() {
            return Err(Error::Config("R_2 must be symmetric positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iters: 10_000 }
    }
}

/// Solves `P = R_1 + A'PA - A'PB (R_2 + B'PB)^{-1} B'PA`.
///
/// Uses the structure-preserving doubling algorithm: with
/// `A_0 = A`, `G_0 = B R_2^{-1} B'`, `H_0 = R_1`, the recurrences
///
/// ```text
/// A_{j+1} = A_j (I + G_j H_j)^{-1} A_j
/// G_{j+1} = G_j + A_j (I + G_j H_j)^{-1} G_j A_j'
/// H_{j+1} = H_j + A_j' H_j (I + G_j H_j)^{-1} A_j
/// ```
///
/// make `H_j` the `2^j`-th iterate of the Riccati fixed-point map, so a
/// few dozen doubling steps cover the near-unit-circle closed-loop poles
/// that the plain iteration crawls through. The result is verified by
/// direct substitution into the DARE before being returned.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    weights: &LqrWeights,
    opts: DareOptions,
) -> Result<DMatrix<f64>> {
    weights.validate(a.nrows(), b.ncols())?;
    let n = a.nrows();
    let fail = |residual: f64, iters: usize| Error::SynthesisFailure { residual, iters };

    let r2_chol = Cholesky::new(weights.r2.clone()).ok_or_else(|| fail(f64::NAN, 0))?;
    let mut a_j = a.clone();
    let mut g_j = b * r2_chol.solve(&b.transpose());
    let mut h_j = weights.r1.clone();

    let mut residual = f64::INFINITY;
    for iters in 0..opts.max_iters {
        let w = DMatrix::identity(n, n) + &g_j * &h_j;
        let lu = w.lu();
        let w_inv_a = lu.solve(&a_j).ok_or_else(|| fail(residual, iters))?;
        let w_inv_g = lu.solve(&g_j).ok_or_else(|| fail(residual, iters))?;
        let a_next = &a_j * &w_inv_a;
        let g_next = &g_j + &a_j * w_inv_g * a_j.transpose();
        let h_step = a_j.transpose() * &h_j * &w_inv_a;
        let mut h_next = &h_j + h_step;
        // the exact iterates are symmetric; keep them that way
        let t = h_next.transpose();
        h_next += t;
        h_next /= 2.0;

        residual = (&h_next - &h_j).norm() / h_next.norm().max(1.0);
        if !residual.is_finite() {
            return Err(fail(residual, iters));
        }
        a_j = a_next;
        g_j = symmetric_average(g_next);
        h_j = h_next;
        if residual < opts.tol {
            // Direct residual check against the DARE itself.
            let verify = dare_map(a, b, weights, &h_j)?;
            let direct = (&verify - &h_j).norm() / h_j.norm().max(1.0);
            if direct >= opts.tol * 10.0 {
                return Err(fail(direct, iters));
            }
            // Only the stabilizing solution is acceptable: an
            // unstabilizable mode can stall the iteration on a huge
            // iterate whose relative residual still looks converged.
            let pb = &h_j * b;
            let inner = &weights.r2 + b.transpose() * &pb;
            let chol = Cholesky::new(inner).ok_or_else(|| fail(direct, iters))?;
            let k = -chol.solve(&(b.transpose() * &h_j * a));
            let rho = spectral_radius(&(a + b * k));
            // small margin so a unit-circle mode rounded to 1 - eps does
            // not slip through
            if !(rho < 1.0 - 1e-9) {
                return Err(fail(direct, iters));
            }
            return Ok(h_j);
        }
    }
    Err(Error::SynthesisFailure { residual, iters: opts.max_iters })
}

fn symmetric_average(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    m += t;
    m /= 2.0;
    m
}

fn dare_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    weights: &LqrWeights,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let pa = p * a;
    let pb = p * b;
    let inner = &weights.r2 + b.transpose() * &pb;
    let chol = Cholesky::new(inner).ok_or(Error::SynthesisFailure {
        residual: f64::NAN,
        iters: 0,
    })?;
    let gain_term = chol.solve(&(b.transpose() * &pa));
    let mut next = &weights.r1 + a.transpose() * &pa - (a.transpose() * &pb) * gain_term;
    // keep the iterate symmetric
    let t = next.transpose();
    next += t;
    next /= 2.0;
    Ok(next)
}

/// Feedback and integral gains with the Riccati solution that produced
/// them and the closed-loop spectral radius `max |eig(A_a + B_a K_a)|`.
#[derive(Debug, Clone)]
pub struct GainPair {
    pub k_xi: DMatrix<f64>,
    pub k_q: DMatrix<f64>,
    pub riccati_p: DMatrix<f64>,
    pub spectral_radius: f64,
}

impl GainPair {
    pub fn zero(state_dim: usize, input_dim: usize, output_dim: usize) -> Self {
        Self {
            k_xi: DMatrix::zeros(input_dim, state_dim),
            k_q: DMatrix::zeros(input_dim, output_dim),
            riccati_p: DMatrix::zeros(state_dim + output_dim, state_dim + output_dim),
            spectral_radius: 0.0,
        }
    }

    /// `K_a = [K_xi  K_q]`.
    pub fn k_a(&self) -> DMatrix<f64> {
        let l_u = self.k_xi.nrows();
        let l_xi = self.k_xi.ncols();
        let l_y = self.k_q.ncols();
        let mut k = DMatrix::zeros(l_u, l_xi + l_y);
        k.view_mut((0, 0), (l_u, l_xi)).copy_from(&self.k_xi);
        k.view_mut((0, l_xi), (l_u, l_y)).copy_from(&self.k_q);
        k
    }
}

/// Computes `K_a = -(R_2 + B_a'PB_a)^{-1} B_a'PA_a` so that the closed
/// loop is `A_a + B_a K_a`, and splits it into `(K_xi, K_q)`.
pub fn compute_gains(model: &AugmentedModel, weights: &LqrWeights) -> Result<GainPair> {
    compute_gains_with(model, weights, DareOptions::default())
}

pub fn compute_gains_with(
    model: &AugmentedModel,
    weights: &LqrWeights,
    opts: DareOptions,
) -> Result<GainPair> {
    let p = solve_dare(&model.a_a, &model.b_a, weights, opts)?;
    let pb = &p * &model.b_a;
    let inner = &weights.r2 + model.b_a.transpose() * &pb;
    let chol = Cholesky::new(inner).ok_or(Error::SynthesisFailure {
        residual: f64::NAN,
        iters: 0,
    })?;
    let k_a = -chol.solve(&(model.b_a.transpose() * &p * &model.a_a));
    let k_xi = k_a.columns(0, model.state_dim).into_owned();
    let k_q = k_a.columns(model.state_dim, model.output_dim).into_owned();
    let closed = &model.a_a + &model.b_a * &k_a;
    let rho = spectral_radius(&closed);
    Ok(GainPair { k_xi, k_q, riccati_p: p, spectral_radius: rho })
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}
