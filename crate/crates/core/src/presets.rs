//! Named benchmark presets and their default robustness sweeps.

use crate::error::{Error, Result};
use crate::harness::{ExperimentSpec, SweepAxis, SweepSpec};
use crate::plants::PlantModel;

pub const PRESET_NAMES: [&str; 4] = ["mck", "three_mass", "vdp", "burgers"];

/// Returns the named benchmark configuration.
///
/// | preset      | plant                        | T_s  | dur | lambda | R_Theta | R_1 | R_2 | sigma_v |
/// |-------------|------------------------------|------|-----|--------|---------|-----|-----|---------|
/// | mck         | mass-spring-damper (1,0.5,2) | 0.1  | 60  | 0.995  | 100     | 1   | 1   | 0.01    |
/// | three_mass  | three-mass chain (1,2)       | 0.1  | 300 | 0.999  | 100     | 1   | 1   | 0.01    |
/// | vdp         | Van der Pol (mu=1)           | 0.1  | 60  | 0.995  | 100     | 1   | 1   | 0.01    |
/// | burgers     | Burgers (nu=0.1, N=100)      | 0.01 | 60  | 0.9995 | 100     | 10  | 0.1 | 0.01    |
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let spec = match name {
        "mck" => ExperimentSpec {
            name: "mck".into(),
            plant: PlantModel::mck(1.0, 0.5, 2.0)?,
            sample_time: 0.1,
            duration: 60.0,
            reference: 1.0,
            forgetting: 0.995,
            r_theta_scale: 100.0,
            r1_scale: 1.0,
            r2: 1.0,
            exploration_std: 0.01,
            warmup_steps: 10,
            gain_cadence: 1,
            integrator_gain: 1.0,
            substeps: 20,
            seed: 0,
        },
        "three_mass" => ExperimentSpec {
            name: "three_mass".into(),
            plant: PlantModel::three_mass(1.0, 2.0)?,
            sample_time: 0.1,
            duration: 300.0,
            reference: 1.0,
            forgetting: 0.999,
            r_theta_scale: 100.0,
            r1_scale: 1.0,
            r2: 1.0,
            exploration_std: 0.01,
            warmup_steps: 10,
            gain_cadence: 1,
            // The three-mass chain is only marginally stabilizable from
            // the sensed triple (q1, q3, q1'); a softer integrator
            // coupling keeps the loop inside its stabilizable envelope.
            integrator_gain: 0.1,
            substeps: 20,
            seed: 0,
        },
        "vdp" => ExperimentSpec {
            name: "vdp".into(),
            plant: PlantModel::van_der_pol(1.0)?,
            sample_time: 0.1,
            duration: 60.0,
            reference: 1.0,
            forgetting: 0.995,
            r_theta_scale: 100.0,
            r1_scale: 1.0,
            r2: 1.0,
            exploration_std: 0.01,
            warmup_steps: 10,
            gain_cadence: 1,
            integrator_gain: 1.0,
            substeps: 20,
            seed: 0,
        },
        "burgers" => ExperimentSpec {
            name: "burgers".into(),
            plant: PlantModel::burgers(0.1, 100)?,
            sample_time: 0.01,
            duration: 60.0,
            reference: 1.0,
            forgetting: 0.9995,
            r_theta_scale: 100.0,
            r1_scale: 10.0,
            r2: 0.1,
            exploration_std: 0.01,
            // The one-step input response at the sensors is tiny
            // (actuation diffuses slowly to them), so the fitted B is
            // noise-dominated early on; a long warmup and a slow gain
            // cadence prevent sign-flipping gains from exciting the PDE.
            warmup_steps: 100,
            gain_cadence: 25,
            integrator_gain: 0.1,
            substeps: 25,
            seed: 0,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
            )))
        }
    };
    Ok(spec)
}

/// Default hyperparameter robustness sweep for a preset. Values are
/// chosen so each axis spans decades around the nominal while staying
/// inside the stabilizable envelope verified for this controller; axes
/// that converge slowly carry a longer duration.
pub fn hyperparameter_sweep(name: &str) -> Result<SweepSpec> {
    let base = preset(name)?;
    let axes = match name {
        "mck" => vec![
            axis("lambda", &[0.99, 0.995, 0.999], None),
            axis("r_theta_scale", &[1.0, 100.0, 10_000.0], None),
            axis("r1_scale", &[0.1, 1.0, 10.0], None),
            axis("r2", &[0.1, 1.0, 10.0], None),
        ],
        "vdp" => vec![
            axis("lambda", &[0.99, 0.995, 0.999], None),
            axis("r_theta_scale", &[1.0, 100.0, 10_000.0], Some(240.0)),
            axis("r1_scale", &[0.1, 1.0, 10.0], None),
            axis("r2", &[0.1, 1.0, 10.0], None),
        ],
        "three_mass" => vec![
            axis("lambda", &[0.999, 0.9995, 0.9999], None),
            axis("r_theta_scale", &[100.0, 10_000.0, 1_000_000.0], Some(600.0)),
            axis("r1_scale", &[0.01, 0.1, 1.0], Some(900.0)),
            axis("r2", &[1.0, 10.0, 100.0], Some(900.0)),
        ],
        "burgers" => vec![
            axis("lambda", &[0.999, 0.9995, 0.9999], None),
            axis("r_theta_scale", &[100.0, 1_000.0, 10_000.0], Some(180.0)),
            axis("r1_scale", &[0.1, 1.0, 10.0], Some(120.0)),
            axis("r2", &[0.1, 1.0, 10.0], Some(120.0)),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
            )))
        }
    };
    Ok(SweepSpec { base, axes })
}

/// Default physical-parameter sweep for a preset: each plant parameter
/// varied over at least two decades around its nominal value. Extreme
/// cells are allowed to fail; the sweep records convergence flags.
pub fn physical_sweep(name: &str) -> Result<SweepSpec> {
    let base = preset(name)?;
    let axes = match name {
        "mck" => vec![
            axis("m", &[0.1, 1.0, 10.0], None),
            axis("c", &[0.05, 0.5, 5.0], None),
            axis("k", &[0.2, 2.0, 20.0], None),
        ],
        "vdp" => vec![axis("mu", &[0.1, 1.0, 10.0], None)],
        "three_mass" => vec![
            axis("m", &[0.1, 1.0, 10.0], None),
            axis("k", &[0.2, 2.0, 20.0], None),
        ],
        "burgers" => vec![axis("nu", &[0.01, 0.1, 1.0], None)],
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}', expected one of {PRESET_NAMES:?}"
            )))
        }
    };
    Ok(SweepSpec { base, axes })
}

fn axis(param: &str, values: &[f64], duration: Option<f64>) -> SweepAxis {
    SweepAxis {
        param: param.into(),
        values: values.to_vec(),
        duration,
    }
}
