//! Experiment configuration schemas. One self-contained JSON document per
//! experiment; unknown fields are rejected so typos surface as schema
//! errors (exit code 2), and every report embeds the config it ran with.

use imgap::dynamics::NonlinearityForm;
use imgap::kwak::Polynomial;
use imgap::linop::NormMode;
use imgap::spectra::{EigenvalueLadder, Generator};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 0x5eed_2026;

/// Ladder descriptor: a generator plus the mode count to materialize
/// (optional for explicit lists).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
}

impl LadderConfig {
    pub fn build(&self) -> Result<EigenvalueLadder, String> {
        let n = match (&self.generator, self.n_modes) {
            (_, Some(n)) => n,
            (Generator::Explicit { values }, None) => values.len(),
            (_, None) => return Err("n_modes is required for non-explicit generators".into()),
        };
        EigenvalueLadder::new(self.generator.clone(), n).map_err(|e| e.to_string())
    }
}

/// Solver knobs shared by the Perron experiments; `None` means the library
/// default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("t_horizon", self.t_horizon),
            ("dt", self.dt),
            ("fixed_point_tol", self.fixed_point_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if self.max_iterations == Some(0) {
            return Err("max_iterations must be at least 1".into());
        }
        Ok(())
    }

    pub fn settings(&self) -> imgap::perron::SolverSettings {
        let defaults = imgap::perron::SolverSettings::default();
        imgap::perron::SolverSettings {
            t_horizon: self.t_horizon,
            dt: self.dt,
            fixed_point_tol: self.fixed_point_tol.unwrap_or(defaults.fixed_point_tol),
            max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
            ..defaults
        }
    }
}

/// Synthetic nonlinearity descriptor for the Galerkin experiments: either
/// zero or the seeded orthogonal-mixing saturating map at constant `L`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityConfig {
    Zero,
    MixingTanh {
        #[serde(rename = "L")]
        lipschitz: f64,
        form: FormConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormConfig {
    General,
    LowerTriangular,
}

impl From<FormConfig> for NonlinearityForm {
    fn from(f: FormConfig) -> Self {
        match f {
            FormConfig::General => NonlinearityForm::General,
            FormConfig::LowerTriangular => NonlinearityForm::LowerTriangular,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapCheckConfig {
    pub ladder: LadderConfig,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    /// Smoothness exponent for the `self_adjoint_general` kind, `(-2, 0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorNormConfig {
    pub ladder: LadderConfig,
    /// Gap index (1-based).
    pub n: usize,
    #[serde(default = "default_omega_count")]
    pub omega_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_omega_count() -> usize {
    4001
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub ladder: LadderConfig,
    pub n: usize,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Number of random low-mode samples to push through the graph.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_scale")]
    pub sample_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariance_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    8
}

fn default_scale() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    pub ladder: LadderConfig,
    pub n: usize,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_scale")]
    pub initial_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_horizon() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub lambda_n: f64,
    pub lambda_np1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub mode: NormMode,
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_periods() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KwakDemoConfig {
    #[serde(default = "default_nf")]
    pub n_f: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// Viscosity (Burgers only).
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Nonlinearity descriptor over `{u, ux}`; Burgers restricts to `u`.
    pub f: Polynomial,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_nf() -> usize {
    32
}

fn default_dt() -> f64 {
    2e-3
}

fn default_t_end() -> f64 {
    0.5
}

fn default_amplitude() -> f64 {
    0.5
}

fn default_decay() -> f64 {
    4.0
}

fn default_nu() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyAllConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}
