//! Online identification of `Theta = [A B]` by matrix recursive least
//! squares with exponential forgetting, plus batch solvers on snapshot
//! matrices used as oracles for the recursion.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Hyperparameters of the matrix RLS estimator.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub state_dim: usize,
    pub input_dim: usize,
    /// Forgetting factor, in (0, 1].
    pub forgetting: f64,
    /// Positive definite regularization matrix of regressor dimension.
    pub regularization: DMatrix<f64>,
}

impl EstimatorConfig {
    /// Convenience constructor with `regularization = scale * I`.
    pub fn scaled_identity(state_dim: usize, input_dim: usize, forgetting: f64, scale: f64) -> Self {
        let d = state_dim + input_dim;
        Self {
            state_dim,
            input_dim,
            forgetting,
            regularization: DMatrix::identity(d, d) * scale,
        }
    }

    pub fn regressor_dim(&self) -> usize {
        self.state_dim + self.input_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::Config("state_dim must be positive".into()));
        }
        let d = self.regressor_dim();
        if self.regularization.nrows() != d || self.regularization.ncols() != d {
            return Err(Error::Dimension(format!(
                "regularization must be {d}x{d}, got {}x{}",
                self.regularization.nrows(),
                self.regularization.ncols()
            )));
        }
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::Config(format!(
                "forgetting factor must lie in (0, 1], got {}",
                self.forgetting
            )));
        }
        if !is_symmetric_positive_definite(&self.regularization) {
            return Err(Error::Config(
                "regularization matrix must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Relative eigenvalue floor for the SPD check.
const SPD_TOL: f64 = 1e-12;

fn is_symmetric_positive_definite(m: &DMatrix<f64>) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-10 * m.norm().max(1.0) {
        return false;
    }
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
    eigs.iter().all(|&e| e > SPD_TOL * max.max(1.0))
}

/// Matrix RLS state: the current estimate `Theta_k` and covariance `P_k`.
#[derive(Debug, Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    theta: DMatrix<f64>,
    covariance: DMatrix<f64>,
    step_count: usize,
}

impl Estimator {
    /// Starts from `Theta_0 = 0`, `P_0 = R_Theta^{-1}`.
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let d = config.regressor_dim();
        let chol = Cholesky::new(config.regularization.clone()).ok_or_else(|| {
            Error::Config("regularization matrix is not positive definite".into())
        })?;
        let mut p0 = chol.inverse();
        symmetrize(&mut p0);
        Ok(Self {
            theta: DMatrix::zeros(config.state_dim, d),
            covariance: p0,
            step_count: 0,
            config,
        })
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Condition number of `P_k`, a diagnostic for fading excitation.
    pub fn covariance_condition(&self) -> f64 {
        let eigs = self.covariance.clone().symmetric_eigen().eigenvalues;
        let max = eigs.iter().cloned().fold(f64::MIN, f64::max);
        let min = eigs.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// One RLS step with the pair `(phi_{k-1}, xi_k)`:
    ///
    /// ```text
    /// gamma_k = lambda + phi' P_{k-1} phi
    /// P_k     = (P_{k-1} - P_{k-1} phi phi' P_{k-1} / gamma_k) / lambda
    /// Theta_k = Theta_{k-1} + (xi_k - Theta_{k-1} phi) phi' P_k
    /// ```
    ///
    /// `P_k` is symmetrized (averaged with its transpose) after the update.
    pub fn update(&mut self, phi_prev: &DVector<f64>, xi_next: &DVector<f64>) -> Result<()> {
        let d = self.config.regressor_dim();
        if phi_prev.len() != d {
            return Err(Error::Dimension(format!(
                "regressor length {} != {}",
                phi_prev.len(),
                d
            )));
        }
        if xi_next.len() != self.config.state_dim {
            return Err(Error::Dimension(format!(
                "state length {} != {}",
                xi_next.len(),
                self.config.state_dim
            )));
        }
        let lambda = self.config.forgetting;
        let p_phi = &self.covariance * phi_prev;
        let gamma = lambda + phi_prev.dot(&p_phi);
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::NumericalBreakdown { gamma });
        }
        self.covariance -= &p_phi * p_phi.transpose() / gamma;
        self.covariance /= lambda;
        symmetrize(&mut self.covariance);
        let innovation = xi_next - &self.theta * phi_prev;
        self.theta += innovation * (phi_prev.transpose() * &self.covariance);
        self.step_count += 1;
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m /= 2.0;
}

/// Stacks state over input into a regressor `phi = [xi; u]`.
pub fn stack_regressor(xi: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut phi = DVector::zeros(xi.len() + u.len());
    phi.rows_mut(0, xi.len()).copy_from(xi);
    phi.rows_mut(xi.len(), u.len()).copy_from(u);
    phi
}

/// Snapshot matrices for batch fitting: columns of `states`/`inputs` are
/// `(xi_i, u_i)` and the matching column of `successors` is `xi_{i+1}`.
#[derive(Debug, Clone)]
pub struct SnapshotBatch {
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub successors: DMatrix<f64>,
}

impl SnapshotBatch {
    pub fn new(states: DMatrix<f64>, inputs: DMatrix<f64>, successors: DMatrix<f64>) -> Result<Self> {
        if states.ncols() != inputs.ncols() || states.ncols() != successors.ncols() {
            return Err(Error::Dimension(format!(
                "snapshot column counts differ: states {}, inputs {}, successors {}",
                states.ncols(),
                inputs.ncols(),
                successors.ncols()
            )));
        }
        if states.nrows() != successors.nrows() {
            return Err(Error::Dimension(
                "states and successors must have equal row counts".into(),
            ));
        }
        Ok(Self { states, inputs, successors })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn phi(&self, i: usize) -> DVector<f64> {
        stack_regressor(
            &self.states.column(i).into_owned(),
            &self.inputs.column(i).into_owned(),
        )
    }
}

/// Direct minimizer of `||X+ - Theta X||_F^2 + tr(Theta' R Theta)`,
/// solved through a Cholesky factorization of `sum(phi phi') + R`.
pub fn batch_fit(batch: &SnapshotBatch, regularization: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    batch_fit_weighted(batch, 1.0, regularization)
}

/// As [`batch_fit`] with residual `i` weighted by `lambda^{k-i}` and the
/// regularizer by `lambda^k`. Matches what the RLS recursion minimizes,
/// which makes this the oracle for [`Estimator::update`].
pub fn batch_fit_weighted(
    batch: &SnapshotBatch,
    lambda: f64,
    regularization: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if !is_symmetric_positive_definite(regularization) {
        return Err(Error::Config(
            "regularization matrix must be symmetric positive definite".into(),
        ));
    }
    let l_xi = batch.states.nrows();
    let l_u = batch.inputs.nrows();
    let d = l_xi + l_u;
    if regularization.nrows() != d {
        return Err(Error::Dimension(format!(
            "regularization must be {d}x{d} for these snapshots"
        )));
    }
    let k = batch.len();
    let mut gram = regularization * lambda.powi(k as i32);
    let mut cross = DMatrix::zeros(d, l_xi);
    for i in 0..k {
        let phi = batch.phi(i);
        let w = lambda.powi((k - 1 - i) as i32);
        gram += &phi * phi.transpose() * w;
        cross += &phi * batch.successors.column(i).transpose() * w;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::Config("weighted Gram matrix is not positive definite".into())
    })?;
    Ok(chol.solve(&cross).transpose())
}

/// Column partition `Theta = [A B]`.
pub fn split_theta(
    theta: &DMatrix<f64>,
    state_dim: usize,
    input_dim: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if theta.nrows() != state_dim || theta.ncols() != state_dim + input_dim {
        return Err(Error::Dimension(format!(
            "theta is {}x{}, expected {}x{}",
            theta.nrows(),
            theta.ncols(),
            state_dim,
            state_dim + input_dim
        )));
    }
    let a = theta.columns(0, state_dim).into_owned();
    let b = theta.columns(state_dim, input_dim).into_owned();
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn new_estimator_inverts_regularizer() {
        // R = 100 I  =>  P_0 = 0.01 I
        let cfg = EstimatorConfig::scaled_identity(2, 1, 0.995, 100.0);
        let est = Estimator::new(cfg).unwrap();
        assert_eq!(est.theta(), &DMatrix::zeros(2, 3));
        assert_relative_eq!(
            est.covariance(),
            &(DMatrix::identity(3, 3) * 0.01),
            epsilon = 1e-14
        );
        assert_eq!(est.step_count(), 0);

        let cfg = EstimatorConfig::scaled_identity(1, 1, 1.0, 1.0);
        let est = Estimator::new(cfg).unwrap();
        assert_relative_eq!(est.covariance(), &DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn new_estimator_rejects_singular_regularizer() {
        let mut cfg = EstimatorConfig::scaled_identity(1, 1, 1.0, 1.0);
        cfg.regularization[(1, 1)] = 0.0;
        assert!(matches!(Estimator::new(cfg), Err(Error::Config(_))));
    }

    #[test]
    fn new_estimator_rejects_zero_dimension() {
        let cfg = EstimatorConfig::scaled_identity(0, 1, 1.0, 1.0);
        assert!(Estimator::new(cfg).is_err());
    }

    #[test]
    fn rls_unit_regressor_update() {
        // lambda = 1, P_0 = I, phi = [1, 0]: gamma = 2, P_1 = diag(0.5, 1)
        let cfg = EstimatorConfig::scaled_identity(1, 1, 1.0, 1.0);
        let mut est = Estimator::new(cfg).unwrap();
        let phi = DVector::from_vec(vec![1.0, 0.0]);
        est.update(&phi, &DVector::from_vec(vec![0.3])).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        assert_relative_eq!(est.covariance(), &expected, epsilon = 1e-14);
        assert_eq!(est.step_count(), 1);
    }

    #[test]
    fn zero_innovation_is_a_fixpoint() {
        let cfg = EstimatorConfig::scaled_identity(2, 1, 0.9, 10.0);
        let mut est = Estimator::new(cfg).unwrap();
        // Seed a nonzero estimate first.
        est.update(
            &DVector::from_vec(vec![1.0, -0.5, 2.0]),
            &DVector::from_vec(vec![0.7, 0.2]),
        )
        .unwrap();
        let theta_before = est.theta().clone();
        let phi = DVector::from_vec(vec![0.4, 1.3, -0.2]);
        let xi = &theta_before * &phi;
        est.update(&phi, &xi).unwrap();
        assert_eq!(est.theta(), &theta_before);
    }

    #[test]
    fn recursive_matches_weighted_batch() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let (l_xi, l_u, n) = (3, 1, 20);
        let lambda = 0.9;
        let reg = DMatrix::identity(l_xi + l_u, l_xi + l_u) * 2.0;
        let cfg = EstimatorConfig {
            state_dim: l_xi,
            input_dim: l_u,
            forgetting: lambda,
            regularization: reg.clone(),
        };
        let mut est = Estimator::new(cfg).unwrap();
        let mut states = DMatrix::zeros(l_xi, n);
        let mut inputs = DMatrix::zeros(l_u, n);
        let mut succ = DMatrix::zeros(l_xi, n);
        for i in 0..n {
            for r in 0..l_xi {
                states[(r, i)] = rng.random_range(-1.0..1.0);
                succ[(r, i)] = rng.random_range(-1.0..1.0);
            }
            inputs[(0, i)] = rng.random_range(-1.0..1.0);
            let phi = stack_regressor(
                &states.column(i).into_owned(),
                &inputs.column(i).into_owned(),
            );
            est.update(&phi, &succ.column(i).into_owned()).unwrap();
        }
        let batch = SnapshotBatch::new(states, inputs, succ).unwrap();
        let direct = batch_fit_weighted(&batch, lambda, &reg).unwrap();
        let denom = direct.norm().max(1e-12);
        assert!((est.theta() - &direct).norm() / denom < 1e-8);
    }

    #[test]
    fn covariance_inverse_identity() {
        // P_k^{-1} = lambda P_{k-1}^{-1} + phi phi'
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let cfg = EstimatorConfig::scaled_identity(2, 1, 0.95, 3.0);
        let mut est = Estimator::new(cfg).unwrap();
        for _ in 0..30 {
            let phi = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let xi = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let p_prev_inv = est.covariance().clone().try_inverse().unwrap();
            est.update(&phi, &xi).unwrap();
            let p_inv = est.covariance().clone().try_inverse().unwrap();
            let expected = p_prev_inv * 0.95 + &phi * phi.transpose();
            assert!((p_inv.clone() - expected).norm() / p_inv.norm() < 1e-8);
        }
    }

    #[test]
    fn batch_fit_recovers_exact_lti_data() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.2, 0.8]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let n = 40;
        let mut states = DMatrix::zeros(2, n);
        let mut inputs = DMatrix::zeros(1, n);
        let mut succ = DMatrix::zeros(2, n);
        let mut x = DVector::from_vec(vec![1.0, -1.0]);
        for i in 0..n {
            let u = DVector::from_vec(vec![rng.random_range(-1.0..1.0f64)]);
            states.set_column(i, &x);
            inputs.set_column(i, &u);
            x = &a * &x + &b * &u;
            succ.set_column(i, &x);
        }
        let batch = SnapshotBatch::new(states, inputs, succ).unwrap();
        let reg = DMatrix::identity(3, 3) * 1e-10;
        let theta = batch_fit(&batch, &reg).unwrap();
        let (ar, br) = split_theta(&theta, 2, 1).unwrap();
        assert!((ar - a).amax() < 1e-6);
        assert!((br - b).amax() < 1e-6);
    }

    #[test]
    fn empty_batch_returns_zero() {
        let batch = SnapshotBatch::new(
            DMatrix::zeros(2, 0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(2, 0),
        )
        .unwrap();
        let theta = batch_fit(&batch, &(DMatrix::identity(3, 3) * 5.0)).unwrap();
        assert_eq!(theta, DMatrix::zeros(2, 3));
    }

    #[test]
    fn single_sample_weighted_fit_matches_hand_solution() {
        // Scalar dims, one sample, lambda = 0.5:
        //   J = 0.5^0 (xi - theta_a x - theta_b u)^2 + 0.5 * r (theta_a^2 + theta_b^2)
        // With phi = [x; u], minimizer theta' = (phi phi' + 0.5 r I)^{-1} phi xi.
        let (x, u, xi, r) = (2.0, 1.0, 3.0, 4.0);
        let batch = SnapshotBatch::new(
            DMatrix::from_vec(1, 1, vec![x]),
            DMatrix::from_vec(1, 1, vec![u]),
            DMatrix::from_vec(1, 1, vec![xi]),
        )
        .unwrap();
        let reg = DMatrix::identity(2, 2) * r;
        let theta = batch_fit_weighted(&batch, 0.5, &reg).unwrap();
        let gram = DMatrix::from_row_slice(2, 2, &[x * x, x * u, x * u, u * u])
            + DMatrix::identity(2, 2) * (0.5 * r);
        let rhs = DVector::from_vec(vec![x * xi, u * xi]);
        let expected = gram.try_inverse().unwrap() * rhs;
        assert_relative_eq!(theta[(0, 0)], expected[0], epsilon = 1e-12);
        assert_relative_eq!(theta[(0, 1)], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn small_lambda_weights_recent_sample() {
        // As lambda -> 0 the fit approaches the single most recent sample.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10;
        let mut states = DMatrix::zeros(1, n);
        let mut inputs = DMatrix::zeros(1, n);
        let mut succ = DMatrix::zeros(1, n);
        for i in 0..n {
            states[(0, i)] = rng.random_range(-1.0..1.0);
            inputs[(0, i)] = rng.random_range(-1.0..1.0);
            succ[(0, i)] = rng.random_range(-1.0..1.0);
        }
        let batch = SnapshotBatch::new(states, inputs, succ).unwrap();
        let reg = DMatrix::identity(2, 2) * 1e-6;
        let phi_last = DVector::from_vec(vec![batch.states[(0, n - 1)], batch.inputs[(0, n - 1)]]);
        let target = batch.successors[(0, n - 1)];
        let mut prev_err = f64::MAX;
        for &lambda in &[0.5, 0.1, 0.01] {
            let theta = batch_fit_weighted(&batch, lambda, &reg).unwrap();
            // the most recent sample dominates, so its residual shrinks
            let err = ((&theta * &phi_last)[0] - target).abs();
            assert!(err < prev_err, "lambda={lambda}: {err} !< {prev_err}");
            prev_err = err;
        }
        assert!(prev_err < 1e-2);
    }

    #[test]
    fn split_theta_partitions_columns() {
        let theta = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (a, b) = split_theta(&theta, 2, 1).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 5.0]));
        assert_eq!(b, DMatrix::from_row_slice(2, 1, &[3.0, 6.0]));
        // round trip
        let mut rebuilt = DMatrix::zeros(2, 3);
        rebuilt.columns_mut(0, 2).copy_from(&a);
        rebuilt.columns_mut(2, 1).copy_from(&b);
        assert_eq!(rebuilt, theta);
        // degenerate input partition
        let (a0, b0) = split_theta(&a, 2, 0).unwrap();
        assert_eq!(a0, a);
        assert_eq!(b0.ncols(), 0);
        // mismatch
        assert!(split_theta(&theta, 3, 1).is_err());
    }
}
