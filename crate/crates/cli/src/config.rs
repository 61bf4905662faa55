//! Experiment configuration: a versioned JSON document, strictly parsed.

use std::path::PathBuf;

use entwine_core::continuum::{gaussian_wave, GaussianPacket};
use entwine_core::evolve::{FixedVelocityNormalization, Scattering};
use entwine_core::lattice::{
    make_diffusive_spec, make_fixed_velocity_spec, sample_potential, AlphaSite, Boundary, ChargeField,
    EnvelopeDensities, LatticeSpec, Normalization, Potential, PotentialDescriptor, ReversalField, StepProbabilities,
};
use entwine_core::sweep::{DiffusiveCase, Reference};
use entwine_core::walker::{EnsembleConfig, ReturnRule, DEFAULT_MAX_STEPS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::emit::Format;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub scaling: ScalingConfig,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub potential: PotentialDescriptor,
    #[serde(default)]
    pub alpha_site: AlphaSite,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walker: Option<WalkerConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `diffusivity` or (`c`, `a`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    Diffusive { diffusivity: f64 },
    FixedVelocity { c: f64, a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub n_sites: usize,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Unit charge pair at the origin, as launched by a walker.
    #[default]
    PointSource,
    /// ψ = plus + i·minus sampled from a Gaussian packet.
    Gaussian {
        sigma0: f64,
        k0: f64,
        #[serde(default)]
        z0: f64,
    },
    /// Constant left envelope on every site.
    Homogeneous { minus: f64, plus: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerConfig {
    pub master_seed: u64,
    pub n_walkers: u64,
    pub t_return: u64,
    #[serde(default)]
    pub rule: ReturnRule,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Stencil steps ε; under `stroboscope` a multiple of 8.
    #[serde(default)]
    pub n_steps: u64,
    /// Output stride in stencil steps.
    #[serde(default = "one")]
    pub every: u64,
    /// Diffusive runs: apply eight steps then ×16 per output unit.
    #[serde(default)]
    pub stroboscope: bool,
    #[serde(default)]
    pub scattering: Scattering,
    /// Fixed-velocity runs only.
    #[serde(default)]
    pub normalization: FixedVelocityNormalization,
    /// Crank–Nicolson steps per stencil step.
    #[serde(default = "one")]
    pub cn_substeps: u64,
}

fn one() -> u64 {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_steps: 0,
            every: 1,
            stroboscope: false,
            scattering: Scattering::Entwined,
            normalization: FixedVelocityNormalization::ZeroMode,
            cn_substeps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionGrid {
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    #[serde(default = "unit")]
    pub hbar: f64,
    #[serde(default = "unit")]
    pub m: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub deltas: Vec<f64>,
    pub length: f64,
    pub t_final: f64,
    pub reference: Reference,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn config_err(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err("<document>", e))?;
    match value.get("schema") {
        None => return Err(config_err("schema", "missing; expected 1")),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(config_err("schema", format!("unsupported version {v}; this build reads version {SCHEMA_VERSION}")))
        }
        Some(_) => {}
    }
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(value).map_err(|e| config_err(&e.path().to_string(), e.inner()))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let scaling = self.scaling()?;
        let spec = self.spec()?;
        self.reversal_field()?;
        if matches!(scaling, Scaling::FixedVelocity { .. }) {
            if self.potential != PotentialDescriptor::Zero {
                return Err(config_err("potential", "fixed-velocity runs take a uniform reversal rate; use kind \"zero\""));
            }
            if self.solver.stroboscope {
                return Err(config_err("solver.stroboscope", "applies to diffusive scaling only"));
            }
        }
        if self.solver.every == 0 {
            return Err(config_err("solver.every", "must be positive"));
        }
        if self.solver.cn_substeps == 0 {
            return Err(config_err("solver.cn_substeps", "must be positive"));
        }
        if self.solver.stroboscope && (!self.solver.every.is_multiple_of(8) || !self.solver.n_steps.is_multiple_of(8)) {
            return Err(config_err("solver", "with stroboscope, n_steps and every must be multiples of 8"));
        }
        if let Some(w) = &self.walker {
            if w.t_return < 2 {
                return Err(config_err("walker.t_return", "must be at least 2"));
            }
            if w.n_walkers == 0 {
                return Err(config_err("walker.n_walkers", "must be positive"));
            }
        }
        if let Some(g) = &self.dispersion {
            if g.k.is_empty() || g.c.is_empty() {
                return Err(config_err("dispersion", "k and c grids must be non-empty"));
            }
        }
        if let Some(cv) = &self.convergence {
            if !matches!(scaling, Scaling::Diffusive { .. }) {
                return Err(config_err("convergence", "needs diffusive scaling"));
            }
            if !matches!(self.initial, InitialCondition::Gaussian { .. }) {
                return Err(config_err("convergence", "needs a gaussian initial condition"));
            }
            if cv.deltas.len() < 2 {
                return Err(config_err("convergence.deltas", "need at least two spacings"));
            }
        }
        self.initial_field(&spec)?;
        Ok(())
    }

    pub fn scaling(&self) -> Result<Scaling, CliError> {
        let s = self.scaling;
        match (s.diffusivity, s.c, s.a) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(config_err(
                "scaling",
                "diffusivity conflicts with c/a; choose diffusive or fixed-velocity scaling",
            )),
            (Some(d), None, None) => Ok(Scaling::Diffusive { diffusivity: d }),
            (None, Some(c), Some(a)) => Ok(Scaling::FixedVelocity { c, a }),
            (None, Some(_), None) | (None, None, Some(_)) => {
                Err(config_err("scaling", "fixed-velocity scaling needs both c and a"))
            }
            (None, None, None) => Err(config_err("scaling", "give either diffusivity or both c and a")),
        }
    }

    pub fn spec(&self) -> Result<LatticeSpec, CliError> {
        let l = self.lattice;
        let core = |e: entwine_core::Error| config_err("lattice", e);
        let spec = match self.scaling()? {
            Scaling::Diffusive { diffusivity } => {
                let delta = l.delta.ok_or_else(|| config_err("lattice.delta", "required under diffusive scaling"))?;
                let (spec, _) = make_diffusive_spec(delta, diffusivity, l.n_sites).map_err(core)?;
                if let Some(eps) = l.epsilon {
                    if (eps - spec.epsilon).abs() > 1e-12 * spec.epsilon {
                        return Err(config_err(
                            "lattice.epsilon",
                            format!("conflicts with delta²/(2D) = {}", spec.epsilon),
                        ));
                    }
                }
                spec
            }
            Scaling::FixedVelocity { c, a } => {
                let eps = match (l.epsilon, l.delta) {
                    (Some(e), None) => e,
                    (None, Some(d)) => d / c,
                    (Some(e), Some(d)) if (d - c * e).abs() <= 1e-12 * d => e,
                    (Some(_), Some(_)) => return Err(config_err("lattice", "delta must equal c * epsilon")),
                    (None, None) => return Err(config_err("lattice.epsilon", "required under fixed-velocity scaling")),
                };
                make_fixed_velocity_spec(eps, c, a, l.n_sites).map_err(core)?.0
            }
        };
        Ok(spec.with_boundary(l.boundary))
    }

    pub fn potential(&self, spec: &LatticeSpec) -> Result<Potential, CliError> {
        sample_potential(&self.potential, spec).map_err(|e| config_err("potential", e))
    }

    /// Reversal probabilities and the number of saturated sites.
    pub fn reversal_field(&self) -> Result<(ReversalField, usize), CliError> {
        let spec = self.spec()?;
        match self.scaling()? {
            Scaling::Diffusive { .. } => {
                ReversalField::from_potential(&self.potential(&spec)?, spec.epsilon).map_err(|e| config_err("potential", e))
            }
            Scaling::FixedVelocity { a, .. } => {
                let probs = StepProbabilities::new(a * spec.epsilon).map_err(|e| config_err("scaling.a", e))?;
                Ok((ReversalField::Uniform(probs), 0))
            }
        }
    }

    pub fn initial_field(&self, spec: &LatticeSpec) -> Result<ChargeField, CliError> {
        let field = match self.initial {
            InitialCondition::PointSource => ChargeField::point_source(spec),
            InitialCondition::Gaussian { sigma0, k0, z0 } => {
                let packet = GaussianPacket::new(sigma0, k0, z0).map_err(|e| config_err("initial", e))?;
                // D only enters at t > 0
                let psi = gaussian_wave(&packet, 1.0, &spec.positions(), 0.0);
                ChargeField::with_conjugate_right(EnvelopeDensities {
                    minus: psi.values.iter().map(|v| v.im).collect(),
                    plus: psi.values.iter().map(|v| v.re).collect(),
                })
            }
            InitialCondition::Homogeneous { minus, plus } => {
                if !(minus.is_finite() && plus.is_finite()) {
                    return Err(config_err("initial", "values must be finite"));
                }
                ChargeField::with_conjugate_right(EnvelopeDensities {
                    minus: vec![minus; spec.n_sites],
                    plus: vec![plus; spec.n_sites],
                })
            }
        };
        Ok(ChargeField {
            normalization: Normalization::Raw,
            ..field
        })
    }

    pub fn walker(&self, seed_override: Option<u64>) -> Result<EnsembleConfig, CliError> {
        let w = self.walker.ok_or_else(|| config_err("walker", "section required for this subcommand"))?;
        Ok(EnsembleConfig {
            master_seed: seed_override.unwrap_or(w.master_seed),
            n_walkers: w.n_walkers,
            t_return: w.t_return,
            rule: w.rule,
            max_steps: w.max_steps,
            alpha_site: self.alpha_site,
        })
    }

    pub fn diffusive_case(&self) -> Result<(DiffusiveCase, Vec<f64>), CliError> {
        let cv = self.convergence.clone().ok_or_else(|| config_err("convergence", "section required for this subcommand"))?;
        let diffusivity = match self.scaling()? {
            Scaling::Diffusive { diffusivity } => diffusivity,
            Scaling::FixedVelocity { .. } => return Err(config_err("convergence", "needs diffusive scaling")),
        };
        let packet = match self.initial {
            InitialCondition::Gaussian { sigma0, k0, z0 } => {
                GaussianPacket::new(sigma0, k0, z0).map_err(|e| config_err("initial", e))?
            }
            _ => return Err(config_err("convergence", "needs a gaussian initial condition")),
        };
        Ok((
            DiffusiveCase {
                diffusivity,
                t_final: cv.t_final,
                length: cv.length,
                packet,
                potential: self.potential.clone(),
                reference: cv.reference,
                alpha_site: self.alpha_site,
            },
            cv.deltas,
        ))
    }

    /// The config with defaults filled, as stable pretty JSON.
    pub fn echo(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema": 1, "scaling": {"diffusivity": 0.5}, "lattice": {"delta": 0.125, "n_sites": 64}}"#;

    #[test]
    fn minimal_config_fills_defaults_and_echoes_stably() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.initial, InitialCondition::PointSource);
        assert_eq!(c.lattice.boundary, Boundary::Periodic);
        let echoed = c.echo();
        assert_eq!(parse_config(&echoed).unwrap(), c);
        assert_eq!(parse_config(&echoed).unwrap().echo(), echoed);
    }

    #[test]
    fn both_scalings_is_a_named_conflict() {
        let text = r#"{"schema": 1, "scaling": {"diffusivity": 0.5, "c": 1.0, "a": 1.0}, "lattice": {"delta": 0.125, "n_sites": 64}}"#;
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains("diffusivity conflicts with c"), "{e}");
        assert_eq!(parse_config(text).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn unsupported_schema() {
        let e = parse_config(&MINIMAL.replace("\"schema\": 1", "\"schema\": 999")).unwrap_err();
        assert!(e.to_string().contains("unsupported version 999"), "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_their_path() {
        let text = MINIMAL.replace("\"n_sites\": 64", "\"n_sites\": 64, \"spacing\": 2");
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.starts_with("config error: lattice"), "{e}");
        assert!(e.contains("spacing"), "{e}");
    }

    #[test]
    fn fixed_velocity_derives_epsilon_from_delta() {
        let text = r#"{"schema": 1, "scaling": {"c": 2.0, "a": 1.0}, "lattice": {"delta": 0.002, "n_sites": 8}}"#;
        let c = parse_config(text).unwrap();
        assert!((c.spec().unwrap().epsilon - 1e-3).abs() < 1e-15);
        let bad = text.replace("\"delta\": 0.002", "\"delta\": 0.002, \"epsilon\": 0.5");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn stroboscope_needs_whole_cycles() {
        let text = MINIMAL.replace("}}", "}, \"solver\": {\"n_steps\": 12, \"stroboscope\": true}}");
        assert!(parse_config(&text).unwrap_err().to_string().contains("multiples of 8"));
    }
}
