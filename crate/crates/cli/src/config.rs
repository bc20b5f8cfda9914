//! Run configuration: a JSON document whose every field has a default.

use std::path::{Path, PathBuf};

use memwave_core::analysis::{
    fig1_potential, CrossValidationSetup, CLASSICAL_TOL, CROSS_VALIDATION_TOL, ENVELOPE_TOL, MEMORYLESS_MIN_SLOPE,
    SUPPORT_TOL,
};
use memwave_core::freqdomain::{CutoffPair, FrequencyLine};
use memwave_core::krylov::GmresOptions;
use memwave_core::timedomain::{BoundaryPolicy, SimulationConfig};
use memwave_core::{Grid1D, PermittivityModel, StepPotential, TimeAxis, WavePacket};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Nodes `x_min, x_min + dx, ...` up to `x_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            x_min: -pi,
            x_max: pi,
            dx: 0.01,
        }
    }
}

/// Levels `0, dt, ...` up to `t_final`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            t_final: 3.65,
            dt: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSpec {
    pub x0: f64,
    pub sigma_g: f64,
    pub lambda: f64,
}

impl Default for PacketSpec {
    fn default() -> Self {
        Self {
            x0: -2.0,
            sigma_g: 0.05,
            lambda: 10.0,
        }
    }
}

/// Step potential (values as `[re, im]`) with its time profile and memory rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Complex64>,
    pub gamma: f64,
    pub alpha_p: f64,
    pub t0: f64,
    pub r: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let v = fig1_potential();
        Self {
            breakpoints: v.breakpoints().to_vec(),
            values: v.values().to_vec(),
            gamma: 3.0,
            alpha_p: 2.0,
            t0: 2.0,
            r: 0.5,
        }
    }
}

/// Frequency lines `omega + i sigma` shared by `smatrix` and the
/// frequency-domain campaigns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySpec {
    pub sigmas: Vec<f64>,
    pub omega_max: f64,
    pub n_omega: usize,
    /// Outer cutoff radius `R1 > R`; defaults to `2 R`.
    pub r1: Option<f64>,
    pub lattice_dx: f64,
}

impl Default for FrequencySpec {
    fn default() -> Self {
        Self {
            sigmas: vec![0.5, 1.0],
            omega_max: 100.0,
            n_omega: 256,
            r1: None,
            lattice_dx: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Campaign {
    Energy,
    Causality,
    FreeTransport,
    FixedPoint,
    Memoryless,
    FrequencyIdentities,
    Linearity,
    Classical,
    CrossValidation,
}

impl Campaign {
    pub fn name(self) -> &'static str {
        match self {
            Campaign::Energy => "energy",
            Campaign::Causality => "causality",
            Campaign::FreeTransport => "free_transport",
            Campaign::FixedPoint => "fixed_point",
            Campaign::Memoryless => "memoryless",
            Campaign::FrequencyIdentities => "frequency_identities",
            Campaign::Linearity => "linearity",
            Campaign::Classical => "classical",
            Campaign::CrossValidation => "cross_validation",
        }
    }
}

/// Gates for `validate`. Every threshold is recorded in the reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub campaigns: Vec<Campaign>,
    pub envelope_tol: f64,
    pub support_tol: f64,
    pub convergence_levels: usize,
    /// Error bound at the finest level of the free-transport study.
    pub free_transport_tol: f64,
    pub order_tol: f64,
    pub fixed_point_levels: usize,
    pub memoryless_halvings: usize,
    pub memoryless_min_slope: f64,
    pub identity_tol: f64,
    pub residual_tol: f64,
    pub support_reproduction_tol: f64,
    pub cutoff_tol: f64,
    pub linearity_tol: f64,
    pub classical_band: [f64; 2],
    pub classical_samples: usize,
    pub classical_tol: f64,
    pub cross_validation_tol: f64,
    pub refinement_levels: usize,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        use Campaign::*;
        Self {
            campaigns: vec![
                Energy,
                Causality,
                FreeTransport,
                FixedPoint,
                Memoryless,
                FrequencyIdentities,
                Linearity,
            ],
            envelope_tol: ENVELOPE_TOL,
            support_tol: SUPPORT_TOL,
            convergence_levels: 4,
            free_transport_tol: 1e-3,
            order_tol: 0.2,
            fixed_point_levels: 4,
            memoryless_halvings: 3,
            memoryless_min_slope: MEMORYLESS_MIN_SLOPE,
            identity_tol: 1e-8,
            residual_tol: 1e-8,
            support_reproduction_tol: 1e-10,
            cutoff_tol: 1e-6,
            linearity_tol: 1e-10,
            classical_band: [5.0, 15.0],
            classical_samples: 201,
            classical_tol: CLASSICAL_TOL,
            cross_validation_tol: CROSS_VALIDATION_TOL,
            refinement_levels: 2,
        }
    }
}

/// Everything a subcommand needs. `{}` is the figure configuration with
/// `(gamma, alpha_p) = (3, 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub packet: PacketSpec,
    pub model: ModelSpec,
    pub prehistory_horizon: f64,
    /// `[left, right]`; defaults to half a unit outside `[-R, R]`.
    pub probes: Option<[f64; 2]>,
    pub boundary: BoundaryPolicy,
    pub stride: usize,
    pub frequency: FrequencySpec,
    pub solver: GmresOptions,
    pub validation: ValidationSpec,
    /// `(gamma, alpha_p)` pairs rendered by `frames`.
    pub frame_pairs: Vec<[f64; 2]>,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "fig1".into(),
            grid: GridSpec::default(),
            time: TimeSpec::default(),
            packet: PacketSpec::default(),
            model: ModelSpec::default(),
            prehistory_horizon: 10.0,
            probes: None,
            boundary: BoundaryPolicy::Unchecked,
            stride: 4,
            frequency: FrequencySpec::default(),
            solver: GmresOptions::default(),
            validation: ValidationSpec::default(),
            frame_pairs: vec![[0.0, 0.0], [3.0, 2.0], [4.0, 10.0]],
            output: PathBuf::from("runs"),
            seed: 0,
        }
    }
}

fn positive(field: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{field}` must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn packet(&self) -> Result<WavePacket> {
        let p = &self.packet;
        Ok(WavePacket::new(p.x0, p.sigma_g, p.lambda)?)
    }

    pub fn model(&self) -> Result<PermittivityModel> {
        let m = &self.model;
        let v = StepPotential::new(m.breakpoints.clone(), m.values.clone())?;
        Ok(PermittivityModel::new(v, m.alpha_p, m.t0, m.gamma, m.r)?)
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let g = &self.grid;
        let grid = Grid1D::colon(g.x_min, g.dx, g.x_max)?;
        let time = TimeAxis::until(self.time.t_final, self.time.dt)?;
        let mut cfg = SimulationConfig::new(grid, time, self.packet()?, self.model()?);
        cfg.prehistory_horizon = self.prehistory_horizon;
        if let Some([l, r]) = self.probes {
            cfg.probe_left = l;
            cfg.probe_right = r;
        }
        cfg.stride = self.stride;
        cfg.boundary = self.boundary;
        Ok(cfg)
    }

    pub fn r1(&self) -> f64 {
        self.frequency.r1.unwrap_or(2.0 * self.model.r)
    }

    pub fn cutoff(&self) -> Result<CutoffPair> {
        Ok(CutoffPair::new(self.model.r, self.r1())?)
    }

    pub fn lines(&self) -> Result<Vec<FrequencyLine>> {
        let f = &self.frequency;
        if f.sigmas.is_empty() {
            return Err(CliError::Config("`frequency.sigmas` is empty".into()));
        }
        f.sigmas
            .iter()
            .map(|&s| Ok(FrequencyLine::new(s, f.omega_max, f.n_omega)?))
            .collect()
    }

    pub fn lattice(&self) -> Result<Grid1D> {
        let r1 = self.r1();
        Ok(Grid1D::colon(-r1, self.frequency.lattice_dx, r1)?)
    }

    pub fn cross_validation(&self) -> Result<CrossValidationSetup> {
        Ok(CrossValidationSetup {
            sim: self.simulation()?,
            cutoff: self.cutoff()?,
            lattice_dx: self.frequency.lattice_dx,
            omega_max: self.frequency.omega_max,
            n_omega: self.frequency.n_omega,
            sigmas: self.frequency.sigmas.clone(),
            solver: self.solver,
            threshold: self.validation.cross_validation_tol,
        })
    }

    /// Re-checks every invariant of the wrapped types. The light-cone check
    /// only applies under the strict boundary policy and is left to `simulate`
    /// so that a violating run fails with a cone error at run time.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Config(format!(
                "`name` must be a plain directory name, got {:?}",
                self.name
            )));
        }
        let mut sim = self.simulation()?;
        sim.boundary = BoundaryPolicy::Unchecked;
        sim.validate()?;
        self.cutoff()?;
        self.lines()?;
        self.lattice()?;
        positive("solver.tol", self.solver.tol)?;
        if self.solver.restart == 0 || self.solver.max_iter == 0 {
            return Err(CliError::Config(
                "`solver.restart` and `solver.max_iter` must be positive".into(),
            ));
        }
        let v = &self.validation;
        for (field, x) in [
            ("validation.envelope_tol", v.envelope_tol),
            ("validation.support_tol", v.support_tol),
            ("validation.free_transport_tol", v.free_transport_tol),
            ("validation.order_tol", v.order_tol),
            ("validation.identity_tol", v.identity_tol),
            ("validation.residual_tol", v.residual_tol),
            ("validation.support_reproduction_tol", v.support_reproduction_tol),
            ("validation.cutoff_tol", v.cutoff_tol),
            ("validation.linearity_tol", v.linearity_tol),
            ("validation.classical_tol", v.classical_tol),
            ("validation.cross_validation_tol", v.cross_validation_tol),
        ] {
            positive(field, x)?;
        }
        if v.convergence_levels < 3 {
            return Err(CliError::Config(
                "`validation.convergence_levels` must be at least 3".into(),
            ));
        }
        if v.refinement_levels < 2 || v.fixed_point_levels < 2 || v.memoryless_halvings < 1 {
            return Err(CliError::Config(
                "refinement studies need at least two levels or one halving".into(),
            ));
        }
        let [lo, hi] = v.classical_band;
        if !(lo > 0.0 && hi > lo) || v.classical_samples < 2 {
            return Err(CliError::Config(
                "`validation.classical_band` must be 0 < lo < hi with two samples".into(),
            ));
        }
        for [gamma, alpha] in &self.frame_pairs {
            self.model_with(*gamma, *alpha)?;
        }
        Ok(())
    }

    /// The configured model with another `(gamma, alpha_p)`.
    pub fn model_with(&self, gamma: f64, alpha_p: f64) -> Result<PermittivityModel> {
        let mut m = self.model()?;
        m.gamma = gamma;
        m.alpha_p = alpha_p;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads and validates a JSON run configuration. Missing keys take their
/// defaults; unknown keys are rejected with their path.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| CliError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
