//! Run configuration: a sectioned TOML file, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{FlowParams, ThresholdSet};
use crate::models::{
    dumbbell_shape, snapshot, AnalyticProfile, EndCondition, ModelError, SymmetricAnsatz,
};
use crate::neck::alpha0;
use crate::pinching::SurgeryClassSpec;
use crate::surgery::SurgeryParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?} (known: dumbbell, sphere, periodic-cylinder)")]
    UnknownPreset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Dimension of the evolving submanifold.
    pub n: usize,
    /// Codimension.
    pub m: usize,
    pub seed: u64,
    /// Directory for every output file.
    pub output: PathBuf,
    /// Write a profile snapshot every this many steps (0 disables).
    pub snapshot_every: usize,
    /// Hard cap on flow steps over the whole run.
    pub max_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Dumbbell {
        neck_radius: f64,
        bulb_radius: f64,
        length: f64,
        deflection: f64,
        nodes: usize,
    },
    Sphere {
        radius: f64,
        nodes: usize,
    },
    PeriodicCylinder {
        radius: f64,
        length: f64,
        nodes: usize,
        amplitude: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

/// Thresholds as curvatures (1/length).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    /// Scale `R` (length).
    pub r: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    /// Ratio slack below `1/(n-1)` for the cylindrical-point scan.
    pub eta0: f64,
    /// Smallest `|H|` at which the trigger is evaluated (1/length).
    pub h0: f64,
    /// Pointwise gradient constants used by the scan.
    pub c_sharp: f64,
    pub h_sharp: f64,
    /// Normalized lookback `θ` and window radius `L` of the neighborhoods.
    pub theta: f64,
    pub window: f64,
    /// Cylindricity needed to call a periodic component a loop of necks.
    pub loop_epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSection {
    pub r: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl From<ClassSection> for SurgeryClassSpec {
    fn from(c: ClassSection) -> Self {
        SurgeryClassSpec {
            r: c.r,
            alpha0: c.alpha0,
            alpha1: c.alpha1,
            alpha2: c.alpha2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    /// Sweep the a-priori monitors every this many steps (0 disables).
    pub every: usize,
    /// Exponent of the almost-hypersurface monitor.
    pub sigma: f64,
    /// Stop the run on a violated fatal monitor.
    pub fail_on_violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSpec,
    pub flow: FlowParams,
    pub thresholds: ThresholdSection,
    pub surgery: SurgeryParams,
    pub detection: DetectionSection,
    pub class: ClassSection,
    pub monitors: MonitorSection,
}

/// Parameter cascade: `H₂ = 10γ₀H₁`, `H₃ = 10H₂`, `Θ = 1 + (2+π)(n-1)c#`,
/// `θ₂ = (10⁴ n³ Θ² γ₀²)⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub alpha0: f64,
    pub gamma0: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub big_theta: f64,
    pub theta2: f64,
}

pub fn cascade(n: usize, eta0: f64, c_sharp: f64, h1: f64) -> Cascade {
    let alpha0 = alpha0(eta0);
    let gamma0 = 1.0 + c_sharp * alpha0;
    let h2 = 10.0 * gamma0 * h1;
    let big_theta = 1.0 + (2.0 + std::f64::consts::PI) * (n as f64 - 1.0) * c_sharp;
    let nf = n as f64;
    Cascade {
        alpha0,
        gamma0,
        h1,
        h2,
        h3: 10.0 * h2,
        big_theta,
        theta2: 1.0 / (1e4 * nf.powi(3) * big_theta * big_theta * gamma0 * gamma0),
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
        let run = RunSection {
            n: 5,
            m: 2,
            seed: 1,
            output: PathBuf::from("out"),
            snapshot_every: 200,
            max_steps: 200_000,
        };
        let detection = DetectionSection {
            eta0: 0.02,
            h0: 10.0,
            c_sharp: 1.0,
            h_sharp: 0.5,
            theta: 0.1,
            window: 2.0,
            loop_epsilon: 0.1,
        };
        let class = ClassSection {
            r: 1.0,
            alpha0: 0.05,
            alpha1: 0.5,
            alpha2: 3000.0,
        };
        let surgery = SurgeryParams {
            lambda: 2.0,
            tau: 0.1,
            b: 25.0,
            strict_audit: false,
            ..SurgeryParams::default()
        };
        let thresholds = ThresholdSection {
            r: 1.0,
            omega1: 16.0,
            omega2: 2.0,
            omega3: 5.0,
        };
        let model = match name {
            "dumbbell" => ModelSpec::Dumbbell {
                neck_radius: 0.5,
                bulb_radius: 2.0,
                length: 20.0,
                deflection: 1e-3,
                nodes: 512,
            },
            "sphere" => ModelSpec::Sphere {
                radius: 1.0,
                nodes: 65,
            },
            "periodic-cylinder" => ModelSpec::PeriodicCylinder {
                radius: 1.0,
                length: 4.0 * std::f64::consts::PI,
                nodes: 257,
                amplitude: 0.0,
            },
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        let monitors = MonitorSection {
            every: 25,
            sigma: 0.1,
            fail_on_violation: true,
        };
        Ok(RunConfig {
            run,
            model,
            flow: FlowParams::default(),
            thresholds,
            surgery,
            detection,
            class,
            monitors,
        })
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks shared by every command.
    pub fn validate_basic(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.run.n < 2 {
            return bad(format!("n = {} must be at least 2", self.run.n));
        }
        if self.run.m < 1 {
            return bad("codimension m must be at least 1".into());
        }
        let f = &self.flow;
        for (name, v) in [
            ("c_cfl", f.c_cfl),
            ("c_curv", f.c_curv),
            ("dt_floor", f.dt_floor),
            ("regrid_resolution", f.regrid_resolution),
        ] {
            if !(v > 0.0) {
                return bad(format!("flow.{name} = {v} must be positive"));
            }
        }
        if !(f.regrid_ratio > 1.0) {
            return bad("flow.regrid_ratio must exceed 1".into());
        }
        let d = &self.detection;
        if !(d.eta0 > 0.0
            && d.c_sharp > 0.0
            && d.h_sharp > 0.0
            && d.theta > 0.0
            && d.window > 0.0
            && d.loop_epsilon > 0.0)
        {
            return bad("detection tolerances must be positive".into());
        }
        let c = &self.class;
        if !(c.r > 0.0 && c.alpha0 > 0.0 && c.alpha1 > 0.0 && c.alpha2 > 0.0) {
            return bad("class parameters must be positive".into());
        }
        if !(self.monitors.sigma > 0.0 && self.monitors.sigma < 2.0) {
            return bad("monitors.sigma must lie in (0, 2)".into());
        }
        self.threshold_set()?;
        self.surgery
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Full validation for flow runs: the surgery pipeline needs `n ≥ 5`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_basic()?;
        if self.run.n < 5 {
            return Err(ConfigError::Invalid(format!(
                "flow with surgery needs n >= 5, got {}",
                self.run.n
            )));
        }
        Ok(())
    }

    pub fn threshold_set(&self) -> Result<ThresholdSet, ConfigError> {
        let t = &self.thresholds;
        if !(t.r > 0.0 && t.omega1 > 0.0 && t.omega2 > 1.0 && t.omega3 > 1.0) {
            return Err(ConfigError::Invalid(
                "thresholds need R, omega1 > 0 and omega2, omega3 > 1".into(),
            ));
        }
        ThresholdSet::from_omegas(t.r, t.omega1, t.omega2, t.omega3)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn initial_datum(&self) -> Result<SymmetricAnsatz, ConfigError> {
        let (n, m) = (self.run.n, self.run.m);
        let a = match &self.model {
            ModelSpec::Dumbbell {
                neck_radius,
                bulb_radius,
                length,
                deflection,
                nodes,
            } => {
                let mut shape = dumbbell_shape(*neck_radius, *bulb_radius, *length, *deflection)?;
                shape.nodes = *nodes;
                crate::models::dumbbell_with(n, m, &shape)?
            }
            ModelSpec::Sphere { radius, nodes } => AnalyticProfile::sphere(n, m, *radius).sample(
                0.0,
                std::f64::consts::PI,
                *nodes,
                [EndCondition::Capped; 2],
            )?,
            ModelSpec::PeriodicCylinder {
                radius,
                length,
                nodes,
                amplitude,
            } => {
                let (r, amp, k) = (*radius, *amplitude, 2.0 * std::f64::consts::PI / *length);
                AnalyticProfile::new(n, m, move |u| {
                    let mut p = vec![(u.scale(k).cos().scale(amp * r)).add_scalar(r), u];
                    p.resize(m + 1, crate::taylor::Taylor::constant(0.0));
                    p
                })
                .sample(0.0, *length, *nodes, [EndCondition::Periodic; 2])?
            }
            ModelSpec::Snapshot { path } => snapshot::read(path)?,
        };
        if a.dim_n != n || a.codim_m != m {
            return Err(ConfigError::Invalid(format!(
                "datum has (n, m) = ({}, {}) but the run asks for ({n}, {m})",
                a.dim_n, a.codim_m
            )));
        }
        Ok(a)
    }

    pub fn cascade(&self) -> Result<Cascade, ConfigError> {
        Ok(cascade(
            self.run.n,
            self.detection.eta0,
            self.detection.c_sharp,
            self.threshold_set()?.h1,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in ["dumbbell", "sphere", "periodic-cylinder"] {
            let c = RunConfig::preset(name).unwrap();
            c.validate().unwrap();
            let back = RunConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c);
            let a = c.initial_datum().unwrap();
            assert!(a.validate().is_ok());
        }
        assert!(matches!(
            RunConfig::preset("torus"),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let c = RunConfig::preset("sphere").unwrap();
        let text = c.to_toml().replace("[flow]\n", "[flow]\nbogus = 1\n");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let mut small = c.clone();
        small.run.n = 1;
        assert!(small.validate_basic().is_err());
        small.run.n = 4;
        assert!(small.validate_basic().is_ok() && small.validate().is_err());
        let mut t = c.clone();
        t.thresholds.omega2 = 0.5;
        assert!(t.validate().is_err());
    }

    #[test]
    fn cascade_arithmetic() {
        let c = cascade(5, 0.02, 0.5, 3.0);
        let g = 1.0 + 0.5 * 2f64.sqrt() * std::f64::consts::PI / 0.02f64.sqrt();
        assert!((c.gamma0 - g).abs() < 1e-12);
        assert!((c.h2 - 30.0 * g).abs() < 1e-9 && (c.h3 - 300.0 * g).abs() < 1e-8);
        let theta = 1.0 + (2.0 + std::f64::consts::PI) * 4.0 * 0.5;
        assert!((c.big_theta - theta).abs() < 1e-12);
        assert!((c.theta2 * 1e4 * 125.0 * theta * theta * g * g - 1.0).abs() < 1e-12);
    }
}
