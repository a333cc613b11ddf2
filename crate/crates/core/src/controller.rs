//! The adaptive controller: per-sample estimator update, gain synthesis
//! from the current model estimate, and the control law with integral
//! action and exploration noise.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::{split_theta, stack_regressor, Estimator, EstimatorConfig};
use crate::lqr::{build_augmented, compute_gains_with, DareOptions, GainPair, LqrWeights};

/// What happened to the feedback gains at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisStatus {
    /// Still inside the warmup window; gains are held at zero.
    Warmup,
    /// Gains were recomputed from the current model estimate.
    Updated,
    /// Off-cadence step; the previous gains were reused.
    Reused,
    /// Synthesis was attempted and failed; the previous gains were kept.
    Failed,
}

impl SynthesisStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SynthesisStatus::Warmup => "warmup",
            SynthesisStatus::Updated => "updated",
            SynthesisStatus::Reused => "reused",
            SynthesisStatus::Failed => "failed",
        }
    }
}

/// Configuration of the adaptive control loop.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub estimator: EstimatorConfig,
    /// LQR weights on the augmented state and the input.
    pub weights: LqrWeights,
    /// Output selector `C` mapping the measured state to the tracked output.
    pub output_selector: DMatrix<f64>,
    /// Standard deviation of the exploration noise added to `u`.
    pub exploration_std: f64,
    /// Seed of the exploration-noise stream.
    pub noise_seed: u64,
    /// Steps before the first gain synthesis; gains are zero until then.
    pub warmup_steps: usize,
    /// Recompute gains every this many steps after warmup (1 = every step).
    pub gain_cadence: usize,
    /// Scale on the integrator coupling: `q_{k+1} = q_k + g (r - y)`, and
    /// the same `g` scales the `-C` block of the augmented dynamics.
    pub integrator_gain: f64,
    pub dare: DareOptions,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if self.output_selector.ncols() != self.estimator.state_dim {
            return Err(Error::Dimension(format!(
                "output selector has {} columns, expected {}",
                self.output_selector.ncols(),
                self.estimator.state_dim
            )));
        }
        let aug = self.estimator.state_dim + self.output_selector.nrows();
        self.weights.validate(aug, self.estimator.input_dim)?;
        if !(self.exploration_std >= 0.0) {
            return Err(Error::Config(format!(
                "exploration noise std must be >= 0, got {}",
                self.exploration_std
            )));
        }
        if self.gain_cadence == 0 {
            return Err(Error::Config("gain cadence must be >= 1".into()));
        }
        if !(self.integrator_gain > 0.0) {
            return Err(Error::Config(format!(
                "integrator gain must be positive, got {}",
                self.integrator_gain
            )));
        }
        Ok(())
    }
}

/// Everything the controller produced at one sample instant.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    /// Tracking error `z = y - r`.
    pub z: DVector<f64>,
    pub status: SynthesisStatus,
    /// Spectral radius of the model-predicted closed loop under the
    /// currently applied gains (0 while the gains are still zero).
    pub spectral_radius: f64,
}

/// Advances the integrator state by the current tracking error:
/// `q_{k+1} = q_k + (r_k - y_k)`.
pub fn integrator_advance(
    q: &DVector<f64>,
    r: &DVector<f64>,
    y: &DVector<f64>,
) -> DVector<f64> {
    q + r - y
}

/// The online adaptive controller. Call [`Controller::step`] once per
/// sample with the measured state and the reference.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    estimator: Estimator,
    gains: GainPair,
    q: DVector<f64>,
    prev_phi: Option<DVector<f64>>,
    rng: ChaCha8Rng,
    step_count: usize,
}

impl Controller {
    pub fn new(config: ControllerConfig) -> Result<Self> {
        config.validate()?;
        let estimator = Estimator::new(config.estimator.clone())?;
        let l_xi = config.estimator.state_dim;
        let l_u = config.estimator.input_dim;
        let l_y = config.output_selector.nrows();
        let rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
        Ok(Self {
            gains: GainPair::zero(l_xi, l_u, l_y),
            q: DVector::zeros(l_y),
            prev_phi: None,
            rng,
            step_count: 0,
            estimator,
            config,
        })
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn gains(&self) -> &GainPair {
        &self.gains
    }

    pub fn integrator_state(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    /// One controller sample: update the model with the transition that
    /// just completed, resynthesize gains if due, and compute the input
    /// to hold over the next interval.
    pub fn step(&mut self, xi: &DVector<f64>, r: &DVector<f64>) -> Result<StepOutput> {
        let cfg = &self.config;
        if xi.len() != cfg.estimator.state_dim {
            return Err(Error::Dimension(format!(
                "measured state has length {}, expected {}",
                xi.len(),
                cfg.estimator.state_dim
            )));
        }
        if r.len() != cfg.output_selector.nrows() {
            return Err(Error::Dimension(format!(
                "reference has length {}, expected {}",
                r.len(),
                cfg.output_selector.nrows()
            )));
        }

        // (1) fold in the transition (phi_{k-1} -> xi_k) observed since
        // the previous sample
        if let Some(phi) = self.prev_phi.take() {
            self.estimator.update(&phi, xi)?;
        }

        // (2) gain synthesis from the current estimate, on cadence
        let k = self.step_count;
        let status = if k < cfg.warmup_steps {
            SynthesisStatus::Warmup
        } else if (k - cfg.warmup_steps) % cfg.gain_cadence != 0 {
            SynthesisStatus::Reused
        } else {
            match self.synthesize() {
                Ok(gains) => {
                    self.gains = gains;
                    SynthesisStatus::Updated
                }
                Err(_) => SynthesisStatus::Failed,
            }
        };

        // (3) output and tracking error
        let y = &cfg.output_selector * xi;
        let e = r - &y;

        // (4) control with exploration noise
        let mut u = &self.gains.k_xi * xi + &self.gains.k_q * &self.q;
        for ui in u.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *ui += cfg.exploration_std * n;
        }

        // (5) integrator advance, scaled by the integrator gain
        self.q += cfg.integrator_gain * &e;

        // (6) remember the regressor for the next estimator update
        self.prev_phi = Some(stack_regressor(xi, &u));
        self.step_count += 1;

        Ok(StepOutput {
            z: &y - r,
            u,
            y,
            status,
            spectral_radius: self.gains.spectral_radius,
        })
    }

    fn synthesize(&self) -> Result<GainPair> {
        let cfg = &self.config;
        let (a, b) = split_theta(
            self.estimator.theta(),
            cfg.estimator.state_dim,
            cfg.estimator.input_dim,
        )?;
        let mut model = build_augmented(&a, &b, &cfg.output_selector)?;
        if cfg.integrator_gain != 1.0 {
            // match the scaled integrator update q += g (r - y)
            let (l_xi, l_y) = (model.state_dim, model.output_dim);
            let scaled = model.a_a.view((l_xi, 0), (l_y, l_xi)) * cfg.integrator_gain;
            model.a_a.view_mut((l_xi, 0), (l_y, l_xi)).copy_from(&scaled);
        }
        compute_gains_with(&model, &cfg.weights, cfg.dare)
    }
}
