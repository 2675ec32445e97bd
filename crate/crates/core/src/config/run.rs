//! TOML run configuration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::Expression;
use crate::diagnostics::FitDegree;
use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::grid_kernel::{
    Grid, GridFunction, KernelSpec, LogModulation, TailModel, DEFAULT_EXTERIOR_RADIUS,
};
use crate::obstacle::ObstacleProblemSpec;
use crate::solver::{InitialGuess, Method, SolverConfig, StepRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TwoMembranes,
    Obstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    /// `c |y|^{-(n+2s)}`.
    Fractional,
    /// The `(-Δ)^s` normalization, times `c`.
    FractionalClassical,
    /// `c m(|y|) |y|^{-(n+2s)}`.
    Perturbed,
    /// `div(A grad u)`.
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub kind: KernelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<LogModulation>,
}

impl KernelSection {
    pub fn build(&self, dim: usize, field: &str) -> Result<KernelSpec> {
        let order = || {
            self.s
                .ok_or_else(|| Error::Config(format!("{field}.s: missing order")))
        };
        let spec = match self.kind {
            KernelName::Fractional => KernelSpec::fractional_scaled(order()?, self.c),
            KernelName::FractionalClassical => {
                let s = order()?;
                KernelSpec::fractional_scaled(
                    s,
                    self.c * crate::grid_kernel::classical_constant(dim, s),
                )
            }
            KernelName::Perturbed => {
                let m = self.modulation.ok_or_else(|| {
                    Error::Config(format!(
                        "{field}.modulation: required for perturbed kernels"
                    ))
                })?;
                KernelSpec::perturbed(order()?, self.c, m)
            }
            KernelName::Local => {
                let a = self.a.clone().unwrap_or_else(|| {
                    if dim == 1 {
                        vec![1.0]
                    } else {
                        vec![1.0, 0.0, 0.0, 1.0]
                    }
                });
                KernelSpec::local(a)
            }
        };
        spec.map_err(|e| Error::Config(format!("{field}: {e}")))
    }

    /// Order `s` of the built kernel (1 for local kernels).
    pub fn order(&self) -> f64 {
        match self.kind {
            KernelName::Local => 1.0,
            _ => self.s.unwrap_or(f64::NAN),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_dim() -> usize {
    1
}

fn default_radius() -> f64 {
    DEFAULT_EXTERIOR_RADIUS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub mode: Mode,
    #[serde(default = "one_dim")]
    pub dim: usize,
    /// Interior nodes per axis; `h = 2/(nodes + 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default = "default_radius")]
    pub exterior_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel1: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel2: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior_tail: Option<TailModel>,
    /// Declared regularity `φ ∈ C^{1+s+δ}` of the obstacle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior1: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior2: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior1_tail: Option<TailModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior2_tail: Option<TailModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    #[serde(default)]
    pub backtracking: bool,
    /// Amplitude of a seeded random initial guess; zero start when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_noise: Option<f64>,
}

fn default_method() -> String {
    "active_set".into()
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    200_000
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            method: default_method(),
            tol: default_tol(),
            max_iters: default_max_iters(),
            seed: 0,
            relaxation: None,
            backtracking: false,
            initial_noise: None,
        }
    }
}

impl SolverSection {
    pub fn build(&self) -> Result<SolverConfig> {
        let method = Method::parse(&self.method).ok_or_else(|| {
            Error::Config(format!("solver.method: unknown method '{}'", self.method))
        })?;
        let config = SolverConfig {
            method,
            max_iters: self.max_iters,
            tol: self.tol,
            step: if self.backtracking {
                StepRule::Backtracking
            } else {
                StepRule::Fixed
            },
            seed: self.seed,
            initial: match self.initial_noise {
                Some(amplitude) => InitialGuess::Random { amplitude },
                None => InitialGuess::Zero,
            },
            relaxation: self.relaxation,
        };
        config
            .validate()
            .map_err(|e| Error::Config(format!("solver: {e}")))?;
        Ok(config)
    }
}

/// `"auto-free-boundary"`, `"none"`, or explicit points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Anchors {
    Keyword(String),
    Points(Vec<Vec<f64>>),
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors::Keyword("auto-free-boundary".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Contact point; the outermost free-boundary node when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(default = "default_radii_count")]
    pub radii: usize,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "one")]
    pub height: f64,
}

fn yes() -> bool {
    true
}

fn default_radii_count() -> usize {
    7
}

fn default_r_min() -> f64 {
    1.0 / 32.0
}

fn default_r_max() -> f64 {
    0.25
}

impl Default for FrequencySection {
    fn default() -> Self {
        Self {
            enabled: true,
            alpha: None,
            epsilon: None,
            c0: None,
            at: None,
            radii: default_radii_count(),
            r_min: default_r_min(),
            r_max: default_r_max(),
            height: 1.0,
        }
    }
}

/// Problem B of a comparison: this problem with raised exterior data and lowered forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    #[serde(default)]
    pub exterior_shift: f64,
    #[serde(default)]
    pub forcing_shift: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSection {
    /// Expected free-boundary points, matched within `free_boundary_tol` grid steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_boundary: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_boundary_tol: Option<f64>,
    /// Band for the exponent of `u - φ` (obstacle) or `u1` (two membranes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_band: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent_band_u2: Option<[f64; 2]>,
    /// Band for `α̂2 - α̂1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_band: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frequency_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_abs_solution: Option<f64>,
    /// Expected max-norm error against a closed form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Expression>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default)]
    pub exponent_anchors: Anchors,
    #[serde(default = "default_degree")]
    pub exponent_degree: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencySection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonSection>,
    #[serde(default, rename = "assert")]
    pub assertions: AssertSection,
}

fn default_degree() -> String {
    "auto".into()
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            exponent_anchors: Anchors::default(),
            exponent_degree: default_degree(),
            frequency: None,
            comparison: Vec::new(),
            assertions: AssertSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: String,
    /// Directory of the assembled-operator cache; no caching when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
}

fn default_out() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out(),
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// What a validated config describes.
pub enum Problem {
    TwoMembranes(ProblemSpec),
    Obstacle(ObstacleProblemSpec),
}

impl RunConfig {
    /// Parses and validates; errors name the line or the field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let config: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn degree(&self) -> Result<FitDegree> {
        FitDegree::parse(&self.analysis.exponent_degree).ok_or_else(|| {
            Error::Config(format!(
                "analysis.exponent_degree: unknown degree '{}'",
                self.analysis.exponent_degree
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let need = |v: bool, field: &str| {
            if v {
                Ok(())
            } else {
                Err(Error::Config(format!("problem.{field}: required")))
            }
        };
        match p.mode {
            Mode::Obstacle => {
                need(p.kernel.is_some(), "kernel")?;
                need(p.obstacle.is_some(), "obstacle")?;
            }
            Mode::TwoMembranes => {
                need(p.kernel1.is_some(), "kernel1")?;
                need(p.kernel2.is_some(), "kernel2")?;
            }
        }
        if p.nodes.is_some() == p.h.is_some() {
            return Err(Error::Config(
                "problem: exactly one of 'nodes' and 'h' must be given".into(),
            ));
        }
        self.solver.build()?;
        self.degree()?;
        if let Anchors::Keyword(k) = &self.analysis.exponent_anchors {
            if k != "auto-free-boundary" && k != "none" {
                return Err(Error::Config(format!(
                    "analysis.exponent_anchors: expected \"auto-free-boundary\", \"none\" or a list of points, got '{k}'"
                )));
            }
        }
        if let Anchors::Points(pts) = &self.analysis.exponent_anchors {
            if pts.iter().any(|q| q.is_empty() || q.len() > p.dim) {
                return Err(Error::Config(
                    "analysis.exponent_anchors: points need 1..=dim coordinates".into(),
                ));
            }
        }
        if let Some(fr) = &self.analysis.frequency {
            if fr.enabled && (p.mode != Mode::Obstacle || p.dim != 1) {
                return Err(Error::Config(
                    "analysis.frequency: only one-dimensional obstacle runs support the frequency"
                        .into(),
                ));
            }
            if fr.radii < 3 || !(fr.r_min > 0.0 && fr.r_min < fr.r_max) {
                return Err(Error::Config(
                    "analysis.frequency: need radii >= 3 and 0 < r_min < r_max".into(),
                ));
            }
        }
        if !self.analysis.comparison.is_empty() && p.mode != Mode::TwoMembranes {
            return Err(Error::Config(
                "analysis.comparison: only available in two_membranes mode".into(),
            ));
        }
        for c in &self.analysis.comparison {
            if c.exterior_shift < 0.0 || c.forcing_shift < 0.0 {
                return Err(Error::Config(
                    "analysis.comparison: shifts must be nonnegative".into(),
                ));
            }
        }
        if let Some(c) = &self.analysis.assertions.classification {
            if !matches!(c.as_str(), "regular" | "singular" | "undetermined") {
                return Err(Error::Config(format!(
                    "analysis.assert.classification: unknown verdict '{c}'"
                )));
            }
        }
        self.grid()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        let p = &self.problem;
        let g = match (p.nodes, p.h) {
            (Some(n), _) => Grid::with_interior_nodes(p.dim, n, p.exterior_radius),
            (_, Some(h)) => Grid::new(p.dim, h, p.exterior_radius),
            _ => unreachable!("validated"),
        };
        Ok(Arc::new(
            g.map_err(|e| Error::Config(format!("problem: {e}")))?,
        ))
    }

    /// Orders `(s1, s2)` in two-membranes mode, `(s, s)` for the obstacle.
    pub fn orders(&self) -> (f64, f64) {
        let p = &self.problem;
        match p.mode {
            Mode::Obstacle => {
                let s = p
                    .kernel
                    .as_ref()
                    .map(KernelSection::order)
                    .unwrap_or(f64::NAN);
                (s, s)
            }
            Mode::TwoMembranes => (
                p.kernel1
                    .as_ref()
                    .map(KernelSection::order)
                    .unwrap_or(f64::NAN),
                p.kernel2
                    .as_ref()
                    .map(KernelSection::order)
                    .unwrap_or(f64::NAN),
            ),
        }
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (s1, s2) = self.orders();
        if self.problem.mode == Mode::TwoMembranes && s1 > s2 {
            out.push(format!(
                "s1 = {s1} exceeds s2 = {s2}; the exponent-gap diagnostics assume s1 < s2"
            ));
        }
        out
    }

    pub fn build(&self) -> Result<Problem> {
        let p = &self.problem;
        let grid = self.grid()?;
        let sample = |e: &Option<Expression>,
                      tail: Option<TailModel>,
                      default: f64|
         -> Result<GridFunction> {
            let tail = match (tail, e) {
                (Some(t), _) => t,
                (None, Some(e)) => TailModel::constant(far_field(e, &grid)),
                (None, None) => TailModel::constant(default),
            };
            GridFunction::from_fn(grid.clone(), tail, |q| {
                e.as_ref().map_or(default, |e| e.eval(q))
            })
        };
        let zero_tail = Some(TailModel::ZERO);
        Ok(match p.mode {
            Mode::Obstacle => {
                let kernel = p
                    .kernel
                    .as_ref()
                    .expect("validated")
                    .build(p.dim, "problem.kernel")?;
                let spec = ObstacleProblemSpec::new(
                    kernel,
                    sample(&p.f, zero_tail, 0.0)?,
                    sample(&p.obstacle, zero_tail, 0.0)?,
                    sample(&p.exterior, p.exterior_tail, 0.0)?,
                )
                .map_err(|e| Error::Config(format!("problem: {e}")))?;
                Problem::Obstacle(spec)
            }
            Mode::TwoMembranes => {
                let k1 = p
                    .kernel1
                    .as_ref()
                    .expect("validated")
                    .build(p.dim, "problem.kernel1")?;
                let k2 = p
                    .kernel2
                    .as_ref()
                    .expect("validated")
                    .build(p.dim, "problem.kernel2")?;
                let spec = ProblemSpec::new(
                    k1,
                    k2,
                    sample(&p.f1, zero_tail, 0.0)?,
                    sample(&p.f2, zero_tail, 0.0)?,
                    sample(&p.exterior1, p.exterior1_tail, 0.0)?,
                    sample(&p.exterior2, p.exterior2_tail, 0.0)?,
                )
                .map_err(|e| Error::Config(format!("problem: {e}")))?;
                Problem::TwoMembranes(spec)
            }
        })
    }
}

/// Constant far field of exterior data: the mean of the expression on the axis points at `±R`.
fn far_field(e: &Expression, grid: &Grid) -> f64 {
    if let Some(c) = e.constant_value() {
        return c;
    }
    let r = grid.exterior_radius();
    let pts: Vec<[f64; 2]> = if grid.dim() == 1 {
        vec![[r, 0.0], [-r, 0.0]]
    } else {
        vec![[r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]]
    };
    pts.iter().map(|&q| e.eval(q)).sum::<f64>() / pts.len() as f64
}
