//! Closed-loop experiment harness: runs a controller against a plant
//! under zero-order hold, logs every sample, summarizes runs, executes
//! parameter sweeps in parallel, and writes CSV/JSON artifacts.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerConfig, SynthesisStatus};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::lqr::{DareOptions, LqrWeights};
use crate::plants::PlantModel;

/// A fully specified closed-loop experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub plant: PlantModel,
    pub sample_time: f64,
    pub duration: f64,
    /// Constant reference for the (scalar) tracked output.
    pub reference: f64,
    pub forgetting: f64,
    /// Scale `s` of the estimator regularizer `R_Theta = s I`.
    pub r_theta_scale: f64,
    /// Scale of the augmented-state weight `R_1 = s I`.
    pub r1_scale: f64,
    /// Input weight `R_2 = s I` (scalar input).
    pub r2: f64,
    /// Exploration noise standard deviation `sigma_v`.
    pub exploration_std: f64,
    pub warmup_steps: usize,
    pub gain_cadence: usize,
    pub integrator_gain: f64,
    /// RK4 substeps per sample interval.
    pub substeps: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn steps(&self) -> usize {
        (self.duration / self.sample_time).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_time > 0.0) {
            return Err(Error::Config("sample_time must be positive".into()));
        }
        if !(self.duration > 0.0) || self.steps() == 0 {
            return Err(Error::Config("duration must cover at least one step".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be >= 1".into()));
        }
        self.controller_config().validate()
    }

    pub fn controller_config(&self) -> ControllerConfig {
        let l_xi = self.plant.measured_dim();
        let l_y = self.plant.output_dim();
        ControllerConfig {
            estimator: EstimatorConfig::scaled_identity(l_xi, 1, self.forgetting, self.r_theta_scale),
            weights: LqrWeights {
                r1: nalgebra::DMatrix::identity(l_xi + l_y, l_xi + l_y) * self.r1_scale,
                r2: nalgebra::DMatrix::identity(1, 1) * self.r2,
            },
            output_selector: self.plant.output_selector.clone(),
            exploration_std: self.exploration_std,
            noise_seed: self.seed ^ 0x9e37_79b9_7f4a_7c15,
            warmup_steps: self.warmup_steps,
            gain_cadence: self.gain_cadence,
            integrator_gain: self.integrator_gain,
            dare: DareOptions::default(),
        }
    }

    /// Applies a `key=value` override. Plant parameters (`m`, `c`, `k`,
    /// `mu`, `nu`) are routed to the plant; everything else targets the
    /// loop configuration.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "lambda" => self.forgetting = value,
            "r_theta_scale" => self.r_theta_scale = value,
            "r1_scale" => self.r1_scale = value,
            "r2" => self.r2 = value,
            "sigma_v" => self.exploration_std = value,
            "reference" => self.reference = value,
            "sample_time" => self.sample_time = value,
            "duration" => self.duration = value,
            "warmup_steps" => self.warmup_steps = value as usize,
            "gain_cadence" => self.gain_cadence = value as usize,
            "integrator_gain" => self.integrator_gain = value,
            "substeps" => self.substeps = value as usize,
            "seed" => self.seed = value as u64,
            other => self.plant.dynamics.set_param(other, value)?,
        }
        Ok(())
    }
}

/// One logged sample of a closed-loop run.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub step: usize,
    pub time: f64,
    pub reference: f64,
    pub output: f64,
    pub tracking_error: f64,
    pub input: f64,
    pub spectral_radius: f64,
    pub status: SynthesisStatus,
    pub xi: DVector<f64>,
    pub theta: Vec<f64>,
}

/// Complete record of one experiment.
#[derive(Debug, Clone)]
pub struct RunLog {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<LogRow>,
    pub diverged: bool,
    /// Largest `max|P - P'|` seen across all estimator updates.
    pub max_covariance_asymmetry: f64,
    pub measured_dim: usize,
}

/// Scalar summary of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub steps: usize,
    pub diverged: bool,
    /// Mean `|z|` over the final 10% of steps.
    pub final_window_mean_abs_z: f64,
    pub max_abs_u: f64,
    /// First step after which `|z|` stays below 5 sigma_v, if any.
    pub settle_step: Option<usize>,
}

/// Runs one closed-loop experiment. A plant divergence terminates the
/// run early and sets the `diverged` flag rather than failing, so sweep
/// cells can record blow-ups.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunLog> {
    spec.validate()?;
    let mut controller = Controller::new(spec.controller_config())?;
    let mut ic_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DVector::from_fn(spec.plant.state_dim(), |_, _| {
        StandardNormal.sample(&mut ic_rng)
    });
    let r = DVector::from_element(spec.plant.output_dim(), spec.reference);
    let substeps = spec.substeps.max(spec.plant.min_substeps(spec.sample_time));
    let theta_len =
        spec.plant.measured_dim() * (spec.plant.measured_dim() + 1);

    let mut log = RunLog {
        name: spec.name.clone(),
        seed: spec.seed,
        rows: Vec::with_capacity(spec.steps()),
        diverged: false,
        max_covariance_asymmetry: 0.0,
        measured_dim: spec.plant.measured_dim(),
    };

    for k in 0..spec.steps() {
        let xi = spec.plant.measure(&x);
        // A state blown up past f64 range poisons the RLS update; treat
        // that as the divergence it is rather than an internal error.
        let out = match controller.step(&xi, &r) {
            Ok(out) => out,
            Err(Error::NumericalBreakdown { .. }) => {
                log.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };

        let p = controller.estimator().covariance();
        let asym = (p - p.transpose()).abs().max();
        log.max_covariance_asymmetry = log.max_covariance_asymmetry.max(asym);

        let mut theta = Vec::with_capacity(theta_len);
        theta.extend(controller.estimator().theta().iter());

        log.rows.push(LogRow {
            step: k,
            time: k as f64 * spec.sample_time,
            reference: spec.reference,
            output: out.y[0],
            tracking_error: out.z[0],
            input: out.u[0],
            spectral_radius: out.spectral_radius,
            status: out.status,
            xi,
            theta,
        });

        match crate::plants::rk4_propagate(
            |s, u| spec.plant.dynamics.rhs(s, u),
            &x,
            out.u[0],
            spec.sample_time,
            substeps,
        ) {
            Ok(next) => x = next,
            Err(Error::Divergence { .. }) => {
                log.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(log)
}

/// Summarizes a completed run.
pub fn summarize(log: &RunLog, sigma_v: f64) -> Result<RunSummary> {
    if log.rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let n = log.rows.len();
    let window = (n / 10).max(1);
    let final_window_mean_abs_z = log.rows[n - window..]
        .iter()
        .map(|row| row.tracking_error.abs())
        .sum::<f64>()
        / window as f64;
    let max_abs_u = log
        .rows
        .iter()
        .map(|row| row.input.abs())
        .fold(0.0_f64, f64::max);
    let threshold = 5.0 * sigma_v;
    let mut settle_step = None;
    for row in log.rows.iter().rev() {
        if row.tracking_error.abs() >= threshold {
            break;
        }
        settle_step = Some(row.step);
    }
    Ok(RunSummary {
        name: log.name.clone(),
        seed: log.seed,
        steps: n,
        diverged: log.diverged,
        final_window_mean_abs_z,
        max_abs_u,
        settle_step,
    })
}

/// One axis of a sweep: a parameter name, the values to try, and an
/// optional duration override for slow-converging settings.
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
    pub duration: Option<f64>,
}

/// A one-factor-at-a-time sweep around a base experiment.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub axes: Vec<SweepAxis>,
}

/// Outcome of a single sweep cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub param: String,
    pub value: f64,
    pub summary: RunSummary,
}

/// Runs every cell of the sweep, in parallel across cells.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for axis in &spec.axes {
        for &value in &axis.values {
            let mut exp = spec.base.clone();
            exp.set(&axis.param, value)?;
            if let Some(d) = axis.duration {
                exp.duration = d;
            }
            exp.name = format!("{}_{}_{}", spec.base.name, axis.param, value);
            cells.push((axis.param.clone(), value, exp));
        }
    }
    cells
        .into_par_iter()
        .map(|(param, value, exp)| {
            let sigma_v = exp.exploration_std;
            let log = run_experiment(&exp)?;
            let summary = summarize(&log, sigma_v)?;
            Ok(SweepCell { param, value, summary })
        })
        .collect()
}

/// Renders the run log as CSV with 17-significant-digit floats, enough
/// for an exact f64 round trip.
pub fn log_to_csv(log: &RunLog) -> String {
    let mut out = String::new();
    out.push_str("step,time,reference,output,tracking_error,input,spectral_radius,status");
    for i in 0..log.measured_dim {
        let _ = write!(out, ",xi_{i}");
    }
    let theta_len = log.rows.first().map_or(0, |r| r.theta.len());
    for i in 0..theta_len {
        let _ = write!(out, ",theta_{i}");
    }
    out.push('\n');
    for row in &log.rows {
        let _ = write!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            row.step,
            row.time,
            row.reference,
            row.output,
            row.tracking_error,
            row.input,
            row.spectral_radius,
            row.status.as_str()
        );
        for v in row.xi.iter() {
            let _ = write!(out, ",{v:.16e}");
        }
        for v in &row.theta {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Parses a CSV produced by [`log_to_csv`] back into rows (the inverse
/// used by the round-trip check).
pub fn csv_to_rows(csv: &str) -> Result<Vec<LogRow>> {
    let mut lines = csv.lines();
    let header = lines.next().ok_or(Error::EmptyLog)?;
    let cols: Vec<&str> = header.split(',').collect();
    let xi_len = cols.iter().filter(|c| c.starts_with("xi_")).count();
    let theta_len = cols.iter().filter(|c| c.starts_with("theta_")).count();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 + xi_len + theta_len {
            return Err(Error::Config(format!(
                "CSV row has {} fields, expected {}",
                f.len(),
                8 + xi_len + theta_len
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad CSV number '{s}': {e}")))
        };
        let status = match f[7] {
            "warmup" => SynthesisStatus::Warmup,
            "updated" => SynthesisStatus::Updated,
            "reused" => SynthesisStatus::Reused,
            "failed" => SynthesisStatus::Failed,
            other => return Err(Error::Config(format!("bad status '{other}'"))),
        };
        let xi = DVector::from_iterator(
            xi_len,
            f[8..8 + xi_len].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?,
        );
        let theta = f[8 + xi_len..]
            .iter()
            .map(|s| num(s))
            .collect::<Result<Vec<_>>>()?;
        rows.push(LogRow {
            step: f[0]
                .parse()
                .map_err(|e| Error::Config(format!("bad step '{}': {e}", f[0])))?,
            time: num(f[1])?,
            reference: num(f[2])?,
            output: num(f[3])?,
            tracking_error: num(f[4])?,
            input: num(f[5])?,
            spectral_radius: num(f[6])?,
            status,
            xi,
            theta,
        });
    }
    Ok(rows)
}

/// Writes the run CSV under `dir` as `<name>_<seed>.csv`, returning the
/// path.
pub fn write_run_csv(log: &RunLog, dir: &Path) -> std::io::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}_{}.csv", log.name, log.seed));
    std::fs::write(&path, log_to_csv(log))?;
    Ok(path)
}

/// Writes sweep summaries under `dir` as `<name>_sweep.json`.
pub fn write_sweep_json(
    name: &str,
    cells: &[SweepCell],
    dir: &Path,
) -> std::io::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}_sweep.json"));
    let json = serde_json::to_string_pretty(cells).expect("serializable");
    std::fs::write(&path, json)?;
    Ok(path)
}
