//! Hadamard shape derivatives of the regular part, the Robin function and
//! `grad f_Omega`, their finite-difference validation, and continuation of
//! critical points along a family of perturbed domains.
//!
//! Conventions. For a boundary normal velocity `g = <psi, nu>`,
//!
//! ```text
//! dH(x,y) = -∮ g d_nu G(x,.) d_nu G(y,.) dsigma + grad_x H . psi(x) + grad_y H . psi(y)
//! ```
//!
//! i.e. evaluation points move with the field (material points). The unit
//! disk dilation `H_R(0,0) = -(1/2pi) ln R` fixes the sign.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::critical::{classify, newton, CriticalError, CriticalPoint, NewtonOptions, DEGENERACY_RATIO};
use crate::geometry::{DomainSpec, GeometryError, PerturbationField, Point};
use crate::green::{BackendChoice, GreenEngine, GreenError};
use crate::kr::{check_admissible, f_omega, Configuration, InteractionSpec, KrError, VortexStrengths};
use crate::report::{csv_float, CsvTable};

/// Corrector iterations above which the continuation step is halved.
pub const MAX_CORRECTOR_ITERATIONS: usize = 10;
/// Smallest continuation step before the trace is truncated.
pub const MIN_EPS_STEP: f64 = 1e-6;
/// Absolute floor of the relative-error denominator.
const ABS_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kr(#[from] KrError),
    #[error(transparent)]
    Critical(#[from] CriticalError),
    #[error("field does not vanish near point {index} (boundary distance {distance:.3e}, cutoff {cutoff:.3e})")]
    UnsupportedField { index: usize, distance: f64, cutoff: f64 },
    #[error("invalid eps ladder: {0}")]
    InvalidLadder(String),
    #[error("configuration is not admissible")]
    Inadmissible,
}

/// `<psi, nu>` at the quadrature nodes of `engine`.
pub fn normal_velocity(engine: &GreenEngine, field: &PerturbationField) -> Vec<f64> {
    let curve = engine.domain().boundary();
    engine.quadrature().params.iter().map(|t| field.normal_component(curve, *t)).collect()
}

fn boundary_product(engine: &GreenEngine, velocity: &[f64], a: &[f64], b: &[f64]) -> f64 {
    engine.quadrature().integrate(velocity.iter().zip(a).zip(b).map(|((g, u), v)| g * u * v))
}

/// Shape derivative of `H(x, y)` including the point-motion terms.
pub fn dh_shape(engine: &GreenEngine, x: &Point, y: &Point, field: &PerturbationField) -> Result<f64, ShapeError> {
    if field.is_zero() {
        return Ok(0.0);
    }
    // Canonical argument order makes the result exactly symmetric.
    let (x, y) = if (y.x, y.y) < (x.x, x.y) { (y, x) } else { (x, y) };
    let velocity = normal_velocity(engine, field);
    let tx = engine.boundary_normal_derivative(x)?;
    let ty = if x == y { tx.clone() } else { engine.boundary_normal_derivative(y)? };
    let mut value = -boundary_product(engine, &velocity, &tx.values, &ty.values);
    let (px, py) = (field.vector_at(engine.domain(), x), field.vector_at(engine.domain(), y));
    if px != Point::zeros() || py != Point::zeros() {
        let e = engine.regular_part(x, y)?;
        value += e.grad_x.dot(&px) + e.grad_y.dot(&py);
    }
    Ok(value)
}

/// Shape derivative of the Robin function `h(x) = H(x, x)`.
pub fn drobin_shape(engine: &GreenEngine, x: &Point, field: &PerturbationField) -> Result<f64, ShapeError> {
    if field.is_zero() {
        return Ok(0.0);
    }
    let velocity = normal_velocity(engine, field);
    let t = engine.boundary_normal_derivative(x)?;
    let mut value = -boundary_product(engine, &velocity, &t.values, &t.values);
    let p = field.vector_at(engine.domain(), x);
    if p != Point::zeros() {
        value += engine.robin(x)?.gradient.dot(&p);
    }
    Ok(value)
}

/// Shape derivative of `grad f_Omega` at a configuration the field leaves fixed.
pub fn dgradf_shape(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &Configuration,
    field: &PerturbationField,
) -> Result<DVector<f64>, ShapeError> {
    let domain = engine.domain();
    for (index, p) in x.points().iter().enumerate() {
        if !field.vanishes_near(domain, p) {
            return Err(ShapeError::UnsupportedField {
                index,
                distance: domain.distance_to_boundary(p),
                cutoff: field.cutoff_width,
            });
        }
    }
    if !check_admissible(domain, spec, x, engine.contract_distance(), 0.0).admissible {
        return Err(ShapeError::Inadmissible);
    }
    if strengths.len() != x.len() {
        return Err(KrError::SizeMismatch { points: x.len(), strengths: strengths.len() }.into());
    }
    if field.is_zero() {
        return Ok(DVector::zeros(2 * x.len()));
    }
    dgradf_with_velocity(engine, strengths, x, &normal_velocity(engine, field))
}

/// `d/d eps grad f` for a given normal velocity at the quadrature nodes.
///
/// Block `m` is `2 lambda_m sum_k lambda_k ∮ g grad_x t_m t_k`, with
/// `t_k = d_nu G(x_k, .)`.
pub(crate) fn dgradf_with_velocity(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    x: &Configuration,
    velocity: &[f64],
) -> Result<DVector<f64>, ShapeError> {
    let lam = strengths.as_slice();
    let traces = x
        .points()
        .iter()
        .map(|p| engine.boundary_normal_derivative_with_gradient(p))
        .collect::<Result<Vec<_>, _>>()?;
    let w = &engine.quadrature().weights;
    let mut out = DVector::zeros(2 * x.len());
    for (m, tm) in traces.iter().enumerate() {
        let grads = tm.gradients.as_ref().expect("gradient trace requested");
        let mut block = Point::zeros();
        for (k, tk) in traces.iter().enumerate() {
            let mut acc = Point::zeros();
            for i in 0..w.len() {
                acc += grads[i] * (w[i] * velocity[i] * tk.values[i]);
            }
            block += lam[k] * acc;
        }
        block *= 2.0 * lam[m];
        out[2 * m] = block.x;
        out[2 * m + 1] = block.y;
    }
    Ok(out)
}

/// Quantity validated by [`fd_check`].
#[derive(Debug, Clone)]
pub enum Quantity {
    RegularPart { x: Point, y: Point },
    Robin { x: Point },
    GradF { strengths: VortexStrengths, spec: InteractionSpec, configuration: Configuration },
}

impl Quantity {
    pub fn label(&self) -> &'static str {
        match self {
            Quantity::RegularPart { .. } => "regular_part",
            Quantity::Robin { .. } => "robin",
            Quantity::GradF { .. } => "grad_f",
        }
    }

    fn evaluate(
        &self,
        base: &DomainSpec,
        engine: &GreenEngine,
        field: &PerturbationField,
        eps: f64,
    ) -> Result<Vec<f64>, ShapeError> {
        let moved = |p: &Point| p + eps * field.vector_at(base, p);
        match self {
            Quantity::RegularPart { x, y } => Ok(vec![engine.regular_part(&moved(x), &moved(y))?.value]),
            Quantity::Robin { x } => Ok(vec![engine.robin(&moved(x))?.value]),
            Quantity::GradF { strengths, spec, configuration } => {
                let margin = crate::kr::default_margin(base);
                Ok(f_omega(engine, strengths, spec, configuration, margin)?.gradient.as_slice().to_vec())
            }
        }
    }

    fn analytic(&self, engine: &GreenEngine, field: &PerturbationField) -> Result<Vec<f64>, ShapeError> {
        match self {
            Quantity::RegularPart { x, y } => Ok(vec![dh_shape(engine, x, y, field)?]),
            Quantity::Robin { x } => Ok(vec![drobin_shape(engine, x, field)?]),
            Quantity::GradF { strengths, spec, configuration } => {
                Ok(dgradf_shape(engine, strengths, spec, configuration, field)?.as_slice().to_vec())
            }
        }
    }
}

/// Engine settings shared by the perturbed-domain rebuilds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineSettings {
    pub nodes: usize,
    pub backend: BackendChoice,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self { nodes: crate::green::DEFAULT_NODES, backend: BackendChoice::Auto }
    }
}

impl EngineSettings {
    pub fn build(&self, domain: &DomainSpec) -> Result<GreenEngine, GreenError> {
        GreenEngine::build(domain, self.nodes, self.backend)
    }
}

/// One central difference `(Q(eps) - Q(-eps)) / 2 eps`, or the failure message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    pub eps: f64,
    pub difference: Option<Vec<f64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeDerivativeReport {
    pub quantity: String,
    pub analytic: Vec<f64>,
    pub rungs: Vec<Rung>,
    /// Richardson extrapolation of the last two rungs.
    pub extrapolated: Option<Vec<f64>>,
    /// Order of the difference error, from the last three rungs.
    pub observed_order: Option<f64>,
    /// `|extrapolated - analytic| / max(|analytic|, 1e-10)` in the Euclidean norm.
    pub relative_error: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Validates the analytic shape derivative against central differences on
/// rebuilt engines over a decreasing `eps` ladder.
pub fn fd_check(
    domain: &DomainSpec,
    quantity: &Quantity,
    field: &PerturbationField,
    ladder: &[f64],
    settings: &EngineSettings,
    tolerance: f64,
) -> Result<ShapeDerivativeReport, ShapeError> {
    if ladder.is_empty() {
        return Err(ShapeError::InvalidLadder("empty".into()));
    }
    if ladder.iter().any(|e| !(*e > 0.0)) || ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(ShapeError::InvalidLadder("must be positive and strictly decreasing".into()));
    }
    let sup = field.sup_displacement(domain.boundary());
    if ladder[0] * sup >= domain.perturbation_margin() {
        return Err(GeometryError::PerturbationTooLarge {
            displacement: ladder[0] * sup,
            margin: domain.perturbation_margin(),
        }
        .into());
    }
    let engine = settings.build(domain)?;
    let analytic = quantity.analytic(&engine, field)?;

    let rungs: Vec<Rung> = ladder
        .par_iter()
        .map(|&eps| {
            let side = |e: f64| -> Result<Vec<f64>, ShapeError> {
                let perturbed = domain.apply_perturbation(field, e)?;
                let eng = settings.build(&perturbed)?;
                quantity.evaluate(domain, &eng, field, e)
            };
            match side(eps).and_then(|p| Ok((p, side(-eps)?))) {
                Ok((p, m)) => Rung {
                    eps,
                    difference: Some(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * eps)).collect()),
                    failure: None,
                },
                Err(e) => Rung { eps, difference: None, failure: Some(e.to_string()) },
            }
        })
        .collect();

    let good: Vec<(f64, &Vec<f64>)> = rungs.iter().filter_map(|r| r.difference.as_ref().map(|d| (r.eps, d))).collect();
    let extrapolated = match good.as_slice() {
        [] => None,
        [(_, d)] => Some((*d).clone()),
        [.., (e1, d1), (e2, d2)] => {
            let q = (e1 / e2).powi(2);
            Some(d1.iter().zip(d2.iter()).map(|(a, b)| (q * b - a) / (q - 1.0)).collect())
        }
    };
    let observed_order = match good.as_slice() {
        [.., (e1, d1), (e2, d2), (_, d3)] if good.len() >= 3 => {
            let a = diff_norm(d1, d2);
            let b = diff_norm(d2, d3);
            (a > 0.0 && b > 0.0).then(|| (a / b).ln() / (e1 / e2).ln())
        }
        _ => None,
    };
    let norm_a = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let relative_error = extrapolated.as_ref().map(|x| diff_norm(x, &analytic) / norm_a.max(ABS_FLOOR));
    let failed_rung = rungs.iter().any(|r| r.failure.is_some());
    let passed = !failed_rung
        && relative_error.is_some_and(|e| e <= tolerance)
        && observed_order.is_none_or(|p| p >= 1.0);
    Ok(ShapeDerivativeReport {
        quantity: quantity.label().into(),
        analytic,
        rungs,
        extrapolated,
        observed_order,
        relative_error,
        tolerance,
        passed,
    })
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Settings for [`continue_critical_point`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContinuationOptions {
    pub engine: EngineSettings,
    pub newton: NewtonOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub eps: f64,
    pub configuration: Configuration,
    pub residual: f64,
    pub min_abs_eigenvalue: f64,
    pub spectrum: Vec<f64>,
    pub morse_index: usize,
    pub predictor_used: bool,
    pub corrector_iterations: usize,
    /// Intermediate steps taken to reach this grid point.
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationTrace {
    pub grid: Vec<f64>,
    pub steps: Vec<ContinuationStep>,
    pub predictor_steps: usize,
    pub corrector_iterations: usize,
    pub step_halvings: usize,
    /// Why the trace stops before the end of the grid.
    pub diagnostic: Option<String>,
}

impl ContinuationTrace {
    pub fn is_complete(&self) -> bool {
        self.diagnostic.is_none() && self.steps.len() == self.grid.len()
    }

    pub fn to_csv(&self) -> String {
        let n = self.steps.first().map_or(0, |s| s.configuration.len());
        let mut header = vec!["eps".to_string()];
        for k in 1..=n {
            header.push(format!("x{k}"));
            header.push(format!("y{k}"));
        }
        header.extend(["residual", "min_abs_eig"].map(String::from));
        let mut table = CsvTable::new(header);
        for s in &self.steps {
            let mut row = vec![csv_float(s.eps)];
            row.extend(s.configuration.points().iter().flat_map(|p| [csv_float(p.x), csv_float(p.y)]));
            row.push(csv_float(s.residual));
            row.push(csv_float(s.min_abs_eigenvalue));
            table.push(row);
        }
        table.render()
    }
}

struct State {
    eps: f64,
    x: DVector<f64>,
    hessian: DMatrix<f64>,
    margin: f64,
    spectral_norm: f64,
    engine: GreenEngine,
}

/// Tracks a critical point along `eps -> Omega_{eps psi}` by predictor-corrector
/// continuation on a monotone `eps` grid.
pub fn continue_critical_point(
    domain: &DomainSpec,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    field: &PerturbationField,
    grid: &[f64],
    start: &CriticalPoint,
    options: &ContinuationOptions,
) -> Result<ContinuationTrace, ShapeError> {
    if grid.is_empty() {
        return Err(ShapeError::InvalidLadder("empty grid".into()));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) || grid.iter().any(|e| !e.is_finite()) {
        return Err(ShapeError::InvalidLadder("grid must be strictly monotone".into()));
    }
    let mut trace = ContinuationTrace {
        grid: grid.to_vec(),
        steps: Vec::new(),
        predictor_steps: 0,
        corrector_iterations: 0,
        step_halvings: 0,
        diagnostic: None,
    };
    // Normals of the unperturbed boundary at the quadrature parameters; the
    // perturbed curves keep the parametrization.
    let base_normals: Vec<Point> = {
        let curve = domain.boundary();
        let params = crate::geometry::BoundaryCurve::parameters(options.engine.nodes);
        params.map(|t| curve.eval(t).map(|b| b.normal)).collect::<Result<_, _>>()?
    };

    let mut state: Option<State> = None;
    let mut current = start.configuration.to_vector();
    let mut current_eps = 0.0;
    for &target in grid {
        let mut substeps = 0;
        let mut step = target - current_eps;
        let outcome = loop {
            let eps = if (current_eps + step - target).abs() <= 1e-15 { target } else { current_eps + step };
            match corrector_step(domain, strengths, spec, field, eps, &current, state.as_ref(), &base_normals, options) {
                Ok((next, iterations, predicted)) if iterations <= MAX_CORRECTOR_ITERATIONS || step == 0.0 => {
                    trace.corrector_iterations += iterations;
                    trace.predictor_steps += usize::from(predicted);
                    current = next.x.clone();
                    current_eps = next.eps;
                    state = Some(next);
                    if eps == target {
                        break Ok((iterations, predicted));
                    }
                    substeps += 1;
                    step = target - current_eps;
                }
                result => {
                    let reason = match result {
                        Err(e) => e.to_string(),
                        Ok((_, iterations, _)) => format!("corrector needed {iterations} iterations"),
                    };
                    step *= 0.5;
                    trace.step_halvings += 1;
                    if step.abs() < MIN_EPS_STEP {
                        break Err(format!("continuation stalled before eps = {target}: {reason}"));
                    }
                }
            }
        };
        match outcome {
            Ok((iterations, predicted)) => {
                let s = state.as_ref().expect("state set on success");
                let class = classify(&s.hessian)?;
                let eval = f_omega(&s.engine, strengths, spec, &Configuration::from_slice(s.x.as_slice()), options.newton.collision_margin)?;
                trace.steps.push(ContinuationStep {
                    eps: target,
                    configuration: Configuration::from_slice(s.x.as_slice()),
                    residual: eval.gradient.norm(),
                    min_abs_eigenvalue: class.margin,
                    spectrum: class.spectrum,
                    morse_index: class.morse_index,
                    predictor_used: predicted,
                    corrector_iterations: iterations,
                    substeps,
                });
            }
            Err(message) => {
                trace.diagnostic = Some(message);
                break;
            }
        }
    }
    Ok(trace)
}

#[allow(clippy::too_many_arguments)]
fn corrector_step(
    domain: &DomainSpec,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    field: &PerturbationField,
    eps: f64,
    current: &DVector<f64>,
    previous: Option<&State>,
    base_normals: &[Point],
    options: &ContinuationOptions,
) -> Result<(State, usize, bool), ShapeError> {
    let perturbed = domain.apply_perturbation(field, eps)?;
    let engine = options.engine.build(&perturbed)?;
    let mut guess = current.clone();
    let mut predicted = false;
    if let Some(prev) = previous {
        if prev.margin > DEGENERACY_RATIO * prev.spectral_norm && !field.is_zero() {
            let x = Configuration::from_slice(prev.x.as_slice());
            let velocity = perturbed_velocity(&prev.engine, field, domain, base_normals);
            let rate = dgradf_with_velocity(&prev.engine, strengths, &x, &velocity)?;
            if let Some(delta) = prev.hessian.clone().lu().solve(&rate) {
                guess = &prev.x - (eps - prev.eps) * delta;
                predicted = true;
            }
        }
    }
    let cfg = Configuration::from_slice(guess.as_slice());
    let outcome = match newton(&engine, strengths, spec, &cfg, &options.newton) {
        Ok(o) => o,
        Err(_) if predicted => {
            newton(&engine, strengths, spec, &Configuration::from_slice(current.as_slice()), &options.newton)
                .map_err(|e| ShapeError::Kr(KrError::InvalidStrengths(format!("corrector failed: {e}"))))?
        }
        Err(e) => return Err(ShapeError::Kr(KrError::InvalidStrengths(format!("corrector failed: {e}")))),
    };
    let class = classify(&outcome.evaluation.hessian)?;
    Ok((
        State {
            eps,
            x: outcome.configuration.to_vector(),
            hessian: outcome.evaluation.hessian,
            margin: class.margin,
            spectral_norm: class.spectral_norm,
            engine,
        },
        outcome.iterations,
        predicted,
    ))
}

/// Normal velocity of `eps -> z(t) + eps g(t) nu_0(t)` on the perturbed curve.
fn perturbed_velocity(
    engine: &GreenEngine,
    field: &PerturbationField,
    base: &DomainSpec,
    base_normals: &[Point],
) -> Vec<f64> {
    let q = engine.quadrature();
    match field.fourier() {
        Some(_) if base_normals.len() == q.len() => q
            .params
            .iter()
            .zip(base_normals)
            .zip(&q.normals)
            .map(|((t, n0), n)| field.normal_component(base.boundary(), *t) * n0.dot(n))
            .collect(),
        _ => normal_velocity(engine, field),
    }
}
