//! `f_Omega(x) = f(x) - sum_{j,k} lambda_j lambda_k H_Omega(x_j, x_k)` with its
//! gradient and Hessian in the configuration variables.
//!
//! The double sum includes the diagonal `j = k`, i.e. the Robin terms
//! `-lambda_k^2 h(x_k)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainSpec, Point};
use crate::green::{GreenEngine, GreenError, RobinEvaluation};

const MIN_STRENGTH: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KrError {
    #[error("configuration outside D: points {i} and {j} at distance {distance:.3e} (margin {margin:.3e})")]
    OutsideD { i: usize, j: usize, distance: f64, margin: f64 },
    #[error("vortex strengths: {0}")]
    InvalidStrengths(String),
    #[error("configuration has {points} points but {strengths} strengths")]
    SizeMismatch { points: usize, strengths: usize },
    #[error(transparent)]
    Green(#[from] GreenError),
}

/// Nonzero vortex strengths `lambda_1, ..., lambda_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct VortexStrengths(Vec<f64>);

impl VortexStrengths {
    pub fn new(values: Vec<f64>) -> Result<Self, KrError> {
        if values.is_empty() {
            return Err(KrError::InvalidStrengths("need at least one vortex".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() >= MIN_STRENGTH) || !v.is_finite()) {
            return Err(KrError::InvalidStrengths(format!("strength {v} is zero or not finite")));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for VortexStrengths {
    type Error = KrError;
    fn try_from(v: Vec<f64>) -> Result<Self, KrError> {
        Self::new(v)
    }
}

impl From<VortexStrengths> for Vec<f64> {
    fn from(v: VortexStrengths) -> Self {
        v.0
    }
}

/// `N` planar points, flattened as `(x_1, y_1, ..., x_N, y_N)` where vectors
/// are needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration(pub Vec<Point>);

impl Configuration {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.len(), self.0.iter().flat_map(|p| [p.x, p.y]))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self(v.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect())
    }

    pub fn min_pair_distance(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (i, p) in self.0.iter().enumerate() {
            for (j, q) in self.0.iter().enumerate().skip(i + 1) {
                let d = (p - q).norm();
                if best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

/// Value, gradient and Hessian of a function of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl EvaluationResult {
    pub fn zeros(dim: usize) -> Self {
        Self { value: 0.0, gradient: DVector::zeros(dim), hessian: DMatrix::zeros(dim, dim) }
    }
}

/// A caller-supplied `C^2` interaction term on an open set `D`.
pub trait CustomInteraction: Send + Sync {
    fn evaluate(&self, strengths: &VortexStrengths, x: &Configuration) -> Result<EvaluationResult, KrError>;
    /// Minimal pairwise distance required for membership in `D`.
    fn collision_margin(&self) -> f64 {
        0.0
    }
}

/// The interaction term `f`.
#[derive(Clone, Default)]
pub enum InteractionSpec {
    /// `f(x) = -(1/2pi) sum_{j != k} lambda_j lambda_k ln |x_j - x_k|`.
    #[default]
    KirchhoffRouth,
    Zero,
    Custom(Arc<dyn CustomInteraction>),
}

impl fmt::Debug for InteractionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl InteractionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InteractionSpec::KirchhoffRouth => "kirchhoff_routh",
            InteractionSpec::Zero => "zero",
            InteractionSpec::Custom(_) => "custom",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "kirchhoff_routh" => Some(Self::KirchhoffRouth),
            "zero" => Some(Self::Zero),
            _ => None,
        }
    }
}

/// Default boundary and collision margin: `1e-3 x` the domain diameter.
pub fn default_margin(domain: &DomainSpec) -> f64 {
    1e-3 * domain.diameter()
}

/// Value, gradient and Hessian of the interaction term alone.
pub fn interaction(
    spec: &InteractionSpec,
    strengths: &VortexStrengths,
    x: &Configuration,
    collision_margin: f64,
) -> Result<EvaluationResult, KrError> {
    check_sizes(strengths, x)?;
    let dim = 2 * x.len();
    match spec {
        InteractionSpec::Zero => Ok(EvaluationResult::zeros(dim)),
        InteractionSpec::Custom(custom) => {
            check_collisions(x, collision_margin.max(custom.collision_margin()))?;
            custom.evaluate(strengths, x)
        }
        InteractionSpec::KirchhoffRouth => {
            check_collisions(x, collision_margin)?;
            let lam = strengths.as_slice();
            let mut out = EvaluationResult::zeros(dim);
            for j in 0..x.len() {
                for k in j + 1..x.len() {
                    // Both ordered pairs (j,k), (k,j) of the j != k sum.
                    let c = -lam[j] * lam[k] / PI;
                    let r = x.0[j] - x.0[k];
                    let r2 = r.norm_squared();
                    out.value += 0.5 * c * r2.ln();
                    let g = c * r / r2;
                    let h = c * (Matrix2::identity() * r2 - 2.0 * r * r.transpose()) / (r2 * r2);
                    add_block(&mut out.gradient, j, &g);
                    add_block(&mut out.gradient, k, &-g);
                    add_hess(&mut out.hessian, j, j, &h);
                    add_hess(&mut out.hessian, k, k, &h);
                    add_hess(&mut out.hessian, j, k, &-h);
                    add_hess(&mut out.hessian, k, j, &-h);
                }
            }
            Ok(out)
        }
    }
}

/// `f_Omega` with gradient and Hessian.
pub fn f_omega(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &Configuration,
    collision_margin: f64,
) -> Result<EvaluationResult, KrError> {
    let mut out = interaction(spec, strengths, x, collision_margin)?;
    let lam = strengths.as_slice();
    let n = x.len();
    let sources = x.0.iter().map(|p| engine.source(p)).collect::<Result<Vec<_>, _>>()?;
    for k in 0..n {
        for j in 0..=k {
            let e = engine.evaluate(&x.0[j], &sources[k])?;
            if j == k {
                let r = RobinEvaluation::from(&e);
                let c = lam[k] * lam[k];
                out.value -= c * r.value;
                add_block(&mut out.gradient, k, &(-c * r.gradient));
                add_hess(&mut out.hessian, k, k, &(-c * r.hessian));
            } else {
                // H(x_j, x_k) + H(x_k, x_j) = 2 H(x_j, x_k).
                let c = 2.0 * lam[j] * lam[k];
                out.value -= c * e.value;
                add_block(&mut out.gradient, j, &(-c * e.grad_x));
                add_block(&mut out.gradient, k, &(-c * e.grad_y));
                add_hess(&mut out.hessian, j, j, &(-c * e.hess_xx));
                add_hess(&mut out.hessian, k, k, &(-c * e.hess_yy));
                add_hess(&mut out.hessian, j, k, &(-c * e.hess_xy));
                add_hess(&mut out.hessian, k, j, &(-c * e.hess_xy.transpose()));
            }
        }
    }
    Ok(out)
}

/// Value of `f_Omega` only; cheaper than [`f_omega`] for difference checks.
pub fn f_omega_value(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &Configuration,
    collision_margin: f64,
) -> Result<f64, KrError> {
    Ok(f_omega(engine, strengths, spec, x, collision_margin)?.value)
}

/// Reason a configuration fails membership in `D ∩ Omega^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    Boundary { index: usize },
    Collision { i: usize, j: usize, distance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// Membership in `D ∩ Omega^N` with quantified interiority.
pub fn check_admissible(
    domain: &DomainSpec,
    spec: &InteractionSpec,
    x: &Configuration,
    boundary_margin: f64,
    collision_margin: f64,
) -> Admissibility {
    let mut diagnostics = Vec::new();
    for (index, p) in x.0.iter().enumerate() {
        if !domain.contains(p, boundary_margin) {
            diagnostics.push(Diagnostic::Boundary { index });
        }
    }
    let margin = match spec {
        InteractionSpec::Custom(c) => collision_margin.max(c.collision_margin()),
        _ => collision_margin,
    };
    for (i, p) in x.0.iter().enumerate() {
        for (j, q) in x.0.iter().enumerate().skip(i + 1) {
            let distance = (p - q).norm();
            if distance <= margin {
                diagnostics.push(Diagnostic::Collision { i, j, distance });
            }
        }
    }
    Admissibility { admissible: diagnostics.is_empty(), diagnostics }
}

fn check_sizes(strengths: &VortexStrengths, x: &Configuration) -> Result<(), KrError> {
    if strengths.len() != x.len() {
        return Err(KrError::SizeMismatch { points: x.len(), strengths: strengths.len() });
    }
    Ok(())
}

fn check_collisions(x: &Configuration, margin: f64) -> Result<(), KrError> {
    if let Some((i, j, distance)) = x.min_pair_distance() {
        if distance <= margin {
            return Err(KrError::OutsideD { i, j, distance, margin });
        }
    }
    Ok(())
}

fn add_block(v: &mut DVector<f64>, k: usize, g: &Point) {
    v[2 * k] += g.x;
    v[2 * k + 1] += g.y;
}

fn add_hess(m: &mut DMatrix<f64>, j: usize, k: usize, h: &Matrix2<f64>) {
    for a in 0..2 {
        for b in 0..2 {
            m[(2 * j + a, 2 * k + b)] += h[(a, b)];
        }
    }
}
