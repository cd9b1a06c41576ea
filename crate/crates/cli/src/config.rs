//! Run configuration. Keys carry their unit in the name: `_rad` for angles,
//! `_rad_per_time` for angular frequencies, `_per_omega` for quantities in
//! units of the model's coupling and `_per_energy` for units of the qubit
//! energy scale. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use stam_core::models::{BosonicModel, CoupledQubitModel, Interpolation, LambdaModel, Model, PauliAxis};
use stam_core::protocol::{make_schedule, Schedule, Spacing};
use stam_core::qla::c;
use stam_core::robustness::{DriftProcess, ErrorChannel};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<RampConfig>,
}

fn one() -> f64 {
    1.0
}

fn quarter_pi() -> f64 {
    PI / 4.0
}

fn default_truncation() -> usize {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// Three-level system; the pulse length follows from the coupling and
    /// the detuning integers.
    Lambda {
        #[serde(default = "one")]
        omega_rad_per_time: f64,
        #[serde(default)]
        k2: u32,
        #[serde(default)]
        k3: u32,
        #[serde(default)]
        phi_rad: f64,
    },
    CoupledQubits {
        #[serde(default = "one")]
        energy_rad_per_time: f64,
        #[serde(default)]
        interpolation: InterpolationConfig,
        #[serde(default = "quarter_pi")]
        beta_mix_rad: f64,
        #[serde(default)]
        xi_mix_rad: f64,
    },
    Bosonic {
        #[serde(default = "default_truncation")]
        truncation: usize,
        #[serde(default = "one")]
        omega_rad_per_time: f64,
        #[serde(default = "one")]
        alpha_re: f64,
        #[serde(default)]
        alpha_im: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationConfig {
    #[default]
    Trig,
    Cot,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingConfig {
    #[default]
    Equal,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Defaults to the model's natural end point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_total_rad: Option<f64>,
    #[serde(default)]
    pub spacing: SpacingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas_rad: Option<Vec<f64>>,
}

fn default_n() -> usize {
    1
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { n: 1, theta_total_rad: None, spacing: SpacingConfig::Equal, lambdas_rad: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisConfig {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    AmplitudeRelative { magnitude: f64 },
    DetuningAdditive { magnitude_rad_per_time: f64 },
    PhaseRelative { magnitude: f64 },
    LocalPauli { site: usize, axis: AxisConfig, strength_rad_per_time: f64 },
    ConstantDrift { level_rad_per_time: f64 },
    OrnsteinUhlenbeckDrift {
        correlation_time: f64,
        variance_rad2_per_time2: f64,
        /// Falls back to the run seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn half() -> f64 {
    0.5
}

/// Excited-state decay and ground-state dephasing for the three-level model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub gamma_e_per_omega: f64,
    #[serde(default)]
    pub gamma_dep_per_omega: f64,
    #[serde(default = "half")]
    pub branching_to_one: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub initial_level: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMerit {
    /// Three-level transfer efficiency over amplitude and detuning errors.
    #[default]
    TransferEfficiency,
    /// Two-qubit Bell-state fidelity over a local `sigma_x` perturbation.
    PsiPlusFidelity,
}

fn default_n_list() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_points() -> usize {
    51
}

fn default_error_range() -> [f64; 2] {
    [-0.5, 0.5]
}

fn default_epsilon_range() -> [f64; 2] {
    [0.0, 0.1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub merit: ScanMerit,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    /// Points per axis before `--grid-scale`.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_error_range")]
    pub amplitude_range: [f64; 2],
    #[serde(default = "default_error_range")]
    pub detuning_range_per_omega: [f64; 2],
    #[serde(default = "default_epsilon_range")]
    pub epsilon_range_per_energy: [f64; 2],
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            merit: ScanMerit::default(),
            n_list: default_n_list(),
            points: default_points(),
            amplitude_range: default_error_range(),
            detuning_range_per_omega: default_error_range(),
            epsilon_range_per_energy: default_epsilon_range(),
        }
    }
}

fn default_lambda_points() -> usize {
    65
}

fn default_max_dim() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Evaluation points along the path before `--grid-scale`.
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    /// Extra randomly generated systems checked against the bound.
    #[serde(default)]
    pub random_trials: usize,
    #[serde(default = "default_max_dim")]
    pub random_max_dim: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { lambda_points: default_lambda_points(), random_trials: 0, random_max_dim: default_max_dim() }
    }
}

fn default_et() -> f64 {
    50.0
}

fn default_steps() -> u32 {
    400
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampConfig {
    /// Ramp length times the qubit energy scale.
    #[serde(default = "default_et")]
    pub e_times_t: f64,
    #[serde(default)]
    pub epsilon_x_per_energy: f64,
    #[serde(default = "default_steps")]
    pub steps_per_unit_time: u32,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig { e_times_t: default_et(), epsilon_x_per_energy: 0.0, steps_per_unit_time: default_steps() }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match &self.model {
            ModelConfig::Lambda { omega_rad_per_time, phi_rad, .. } => {
                positive("model.omega_rad_per_time", *omega_rad_per_time)?;
                if !phi_rad.is_finite() {
                    return Err(bad("model.phi_rad must be finite"));
                }
            }
            ModelConfig::CoupledQubits { energy_rad_per_time, beta_mix_rad, xi_mix_rad, .. } => {
                positive("model.energy_rad_per_time", *energy_rad_per_time)?;
                if !beta_mix_rad.is_finite() || !xi_mix_rad.is_finite() {
                    return Err(bad("model mixing angles must be finite"));
                }
            }
            ModelConfig::Bosonic { truncation, omega_rad_per_time, alpha_re, alpha_im } => {
                positive("model.omega_rad_per_time", *omega_rad_per_time)?;
                if *truncation < 2 {
                    return Err(bad(format!("model.truncation must be at least 2, got {truncation}")));
                }
                if !alpha_re.is_finite() || !alpha_im.is_finite() {
                    return Err(bad("model.alpha must be finite"));
                }
            }
        }
        let s = &self.schedule;
        if s.n == 0 {
            return Err(bad("schedule.n must be at least 1"));
        }
        if let Some(t) = s.theta_total_rad {
            positive("schedule.theta_total_rad", t)?;
        }
        match (s.spacing, &s.lambdas_rad) {
            (SpacingConfig::Custom, None) => return Err(bad("custom spacing needs schedule.lambdas_rad")),
            (SpacingConfig::Equal, Some(_)) => return Err(bad("schedule.lambdas_rad requires spacing = \"custom\"")),
            _ => {}
        }
        if let Some(n) = &self.noise {
            for (name, v) in [("gamma_e_per_omega", n.gamma_e_per_omega), ("gamma_dep_per_omega", n.gamma_dep_per_omega)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(bad(format!("noise.{name} must be non-negative, got {v}")));
                }
            }
            if !(0.0..=1.0).contains(&n.branching_to_one) {
                return Err(bad("noise.branching_to_one must lie in [0, 1]"));
            }
        }
        if let Some(sc) = &self.scan {
            if sc.points < 1 {
                return Err(bad("scan.points must be at least 1"));
            }
            if sc.n_list.is_empty() || sc.n_list.contains(&0) {
                return Err(bad("scan.n_list must hold positive pulse counts"));
            }
        }
        if let Some(b) = &self.bound {
            if b.lambda_points < 2 {
                return Err(bad("bound.lambda_points must be at least 2"));
            }
            if b.random_max_dim < 2 {
                return Err(bad("bound.random_max_dim must be at least 2"));
            }
        }
        if let Some(r) = &self.ramp {
            positive("ramp.e_times_t", r.e_times_t)?;
            if !r.epsilon_x_per_energy.is_finite() {
                return Err(bad("ramp.epsilon_x_per_energy must be finite"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        Ok(match &self.model {
            &ModelConfig::Lambda { omega_rad_per_time, k2, k3, phi_rad } => {
                let t_p = PI * (f64::from(2 * k2 + 1) * f64::from(2 * k3 + 1)).sqrt() / omega_rad_per_time;
                Model::Lambda(LambdaModel::new(k2, k3, t_p, phi_rad).map_err(|e| bad(e.to_string()))?)
            }
            &ModelConfig::CoupledQubits { energy_rad_per_time, interpolation, beta_mix_rad, xi_mix_rad } => {
                let interp = match interpolation {
                    InterpolationConfig::Trig => Interpolation::Trig,
                    InterpolationConfig::Cot => Interpolation::Cot,
                };
                let mut m = CoupledQubitModel::new(energy_rad_per_time, interp);
                m.beta_mix = beta_mix_rad;
                m.xi_mix = xi_mix_rad;
                Model::CoupledQubits(m)
            }
            &ModelConfig::Bosonic { truncation, omega_rad_per_time, alpha_re, alpha_im } => {
                Model::Bosonic(BosonicModel::new(truncation, omega_rad_per_time, c(alpha_re, alpha_im)))
            }
        })
    }

    pub fn theta_total(&self) -> f64 {
        self.schedule.theta_total_rad.unwrap_or(match self.model {
            ModelConfig::Lambda { .. } => PI / 2.0,
            ModelConfig::CoupledQubits { .. } => PI / 4.0,
            ModelConfig::Bosonic { .. } => 1.0,
        })
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let s = &self.schedule;
        let out = match &s.lambdas_rad {
            Some(l) => Schedule::custom(l.clone()),
            None => make_schedule(s.n, self.theta_total(), Spacing::Equal),
        };
        out.map_err(|e| bad(e.to_string()))
    }

    pub fn channels(&self, seed: u64) -> Vec<ErrorChannel> {
        self.channels
            .iter()
            .map(|ch| match *ch {
                ChannelConfig::AmplitudeRelative { magnitude } => ErrorChannel::AmplitudeRelative(magnitude),
                ChannelConfig::DetuningAdditive { magnitude_rad_per_time } => {
                    ErrorChannel::DetuningAdditive(magnitude_rad_per_time)
                }
                ChannelConfig::PhaseRelative { magnitude } => ErrorChannel::PhaseRelative(magnitude),
                ChannelConfig::LocalPauli { site, axis, strength_rad_per_time } => ErrorChannel::LocalPauli {
                    site,
                    axis: match axis {
                        AxisConfig::X => PauliAxis::X,
                        AxisConfig::Y => PauliAxis::Y,
                        AxisConfig::Z => PauliAxis::Z,
                    },
                    strength: strength_rad_per_time,
                },
                ChannelConfig::ConstantDrift { level_rad_per_time } => ErrorChannel::StochasticDrift {
                    process: DriftProcess::Constant(level_rad_per_time),
                    seed,
                },
                ChannelConfig::OrnsteinUhlenbeckDrift { correlation_time, variance_rad2_per_time2, seed: own } => {
                    ErrorChannel::StochasticDrift {
                        process: DriftProcess::OrnsteinUhlenbeck {
                            correlation_time,
                            variance: variance_rad2_per_time2,
                        },
                        seed: own.unwrap_or(seed),
                    }
                }
            })
            .collect()
    }
}
