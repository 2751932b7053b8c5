//! Critical points of `f_Omega`: damped multi-start Newton, Morse
//! classification and rotation-orbit detection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{DomainSpec, Point, ShiftedHalton};
use crate::green::GreenEngine;
use crate::kr::{check_admissible, f_omega, Configuration, EvaluationResult, InteractionSpec, KrError, VortexStrengths};
use crate::report::{csv_float, CsvTable};

/// Margin below `DEGENERACY_RATIO x` spectral norm counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-5;
/// Minimal `|<v_min, T>|` for a rotation-orbit tag.
pub const ORBIT_ALIGNMENT: f64 = 0.999;
/// Eigenvalues below this fraction of the largest are dropped from Newton steps.
const PSEUDO_INVERSE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalError {
    #[error("eigensolver failure: {0}")]
    Numeric(String),
    #[error("orbit tangent vanishes (all points at the rotation center)")]
    UndefinedOrbit,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
}

/// Multi-start search settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub starts: usize,
    pub seed: u64,
    pub boundary_margin: f64,
    pub collision_margin: f64,
    /// Gradient-norm tolerance of the Newton iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Backtracking halvings per Newton step.
    pub max_halvings: usize,
    /// Sufficient-decrease constant on the merit `|grad|^2`.
    pub armijo: f64,
    pub dedup_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 200,
            seed: 0,
            boundary_margin: 0.05,
            collision_margin: 0.01,
            tolerance: 1e-10,
            max_iterations: 60,
            max_halvings: 30,
            armijo: 1e-4,
            dedup_radius: 1e-4,
        }
    }
}

impl SearchConfig {
    /// Defaults with the collision margin scaled to the domain.
    pub fn for_domain(domain: &DomainSpec) -> Self {
        Self { collision_margin: crate::kr::default_margin(domain), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), CriticalError> {
        let bad = |m: &str| Err(CriticalError::InvalidConfig(m.into()));
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.dedup_radius > self.tolerance) {
            return bad("dedup radius must exceed the tolerance");
        }
        if !(self.boundary_margin >= 0.0 && self.collision_margin >= 0.0) {
            return bad("margins must be non-negative");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            max_halvings: self.max_halvings,
            armijo: self.armijo,
            boundary_margin: self.boundary_margin,
            collision_margin: self.collision_margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub armijo: f64,
    pub boundary_margin: f64,
    pub collision_margin: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        SearchConfig::default().newton()
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub configuration: Configuration,
    pub evaluation: EvaluationResult,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonFailure {
    #[error("start is not admissible")]
    Inadmissible,
    #[error("evaluation failed: {0}")]
    Evaluation(KrError),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("line search stalled at residual {residual:.3e}")]
    Stalled { residual: f64 },
}

/// Damped Newton iteration for `grad f_Omega = 0`.
///
/// The merit function is `|grad|^2`; steps are halved until they decrease it
/// sufficiently and keep every iterate admissible.
pub fn newton(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    start: &Configuration,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome, NewtonFailure> {
    let boundary_margin = opts.boundary_margin.max(engine.contract_distance());
    let admissible = |x: &Configuration| {
        check_admissible(engine.domain(), spec, x, boundary_margin, opts.collision_margin).admissible
    };
    let evaluate = |x: &Configuration| f_omega(engine, strengths, spec, x, opts.collision_margin);
    if !admissible(start) {
        return Err(NewtonFailure::Inadmissible);
    }
    let mut x = start.to_vector();
    let mut current = evaluate(start).map_err(NewtonFailure::Evaluation)?;
    for iteration in 0..=opts.max_iterations {
        let residual = current.gradient.norm();
        if residual <= opts.tolerance {
            return Ok(NewtonOutcome {
                configuration: Configuration::from_slice(x.as_slice()),
                evaluation: current,
                iterations: iteration,
            });
        }
        if iteration == opts.max_iterations {
            return Err(NewtonFailure::NotConverged { iterations: iteration, residual });
        }
        let step = newton_step(&current.hessian, &current.gradient);
        let merit = residual * residual;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &x + t * &step;
            let cfg = Configuration::from_slice(trial.as_slice());
            if admissible(&cfg) {
                if let Ok(eval) = evaluate(&cfg) {
                    if eval.gradient.norm_squared() <= (1.0 - 2.0 * opts.armijo * t) * merit {
                        accepted = Some((trial, eval));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, eval)) => {
                x = trial;
                current = eval;
            }
            None => return Err(NewtonFailure::Stalled { residual }),
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// `-H^+ g` with a spectral pseudo-inverse.
fn newton_step(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> DVector<f64> {
    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = DVector::zeros(gradient.len());
    for (i, lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > PSEUDO_INVERSE_CUTOFF * scale {
            let v = eig.eigenvectors.column(i);
            step -= v * (v.dot(gradient) / lambda);
        }
    }
    step
}

/// Spectral data of a symmetric Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// Eigenvalues in ascending order.
    pub spectrum: Vec<f64>,
    /// Unit eigenvectors, column `i` belonging to `spectrum[i]`.
    pub eigenvectors: DMatrix<f64>,
    pub morse_index: usize,
    /// Smallest absolute eigenvalue.
    pub margin: f64,
    pub spectral_norm: f64,
}

impl Classification {
    /// Eigenvector of the eigenvalue with smallest magnitude.
    pub fn null_direction(&self) -> DVector<f64> {
        let i = (0..self.spectrum.len())
            .min_by(|&a, &b| self.spectrum[a].abs().total_cmp(&self.spectrum[b].abs()))
            .unwrap_or(0);
        self.eigenvectors.column(i).into_owned()
    }

    /// Whether the margin is below the declared degeneracy threshold.
    pub fn is_degenerate(&self) -> bool {
        self.margin <= DEGENERACY_RATIO * self.spectral_norm
    }
}

/// Morse index and non-degeneracy margin of a (symmetrized) Hessian.
pub fn classify(hessian: &DMatrix<f64>) -> Result<Classification, CriticalError> {
    if !hessian.is_square() {
        return Err(CriticalError::Numeric("Hessian is not square".into()));
    }
    if hessian.iter().any(|v| !v.is_finite()) {
        return Err(CriticalError::Numeric("non-finite Hessian entry".into()));
    }
    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| CriticalError::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let morse_index = spectrum.iter().filter(|v| **v < 0.0).count();
    let margin = spectrum.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let spectral_norm = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Classification {
        spectrum,
        eigenvectors,
        morse_index,
        margin: if margin.is_finite() { margin } else { 0.0 },
        spectral_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitKind {
    Isolated,
    RotationOrbit,
}

impl OrbitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitKind::Isolated => "isolated",
            OrbitKind::RotationOrbit => "rotation_orbit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitTag {
    pub kind: OrbitKind,
    /// `|<v_min, T/|T|>|` for the rotation tangent `T = (J(x_k - c))_k`.
    pub alignment: f64,
}

/// Tags a critical point whose Hessian null direction is the tangent of the
/// rotation orbit about the domain center.
pub fn detect_rotation_orbit(domain: &DomainSpec, point: &CriticalPoint) -> Result<OrbitTag, CriticalError> {
    let center = domain.center();
    let tangent = DVector::from_iterator(
        2 * point.configuration.len(),
        point.configuration.points().iter().flat_map(|p| {
            let r = p - center;
            [-r.y, r.x]
        }),
    );
    let norm = tangent.norm();
    if norm < 1e-14 {
        return Err(CriticalError::UndefinedOrbit);
    }
    let v = DVector::from_vec(point.null_direction.clone());
    let alignment = (v.dot(&tangent) / (norm * v.norm())).abs();
    let degenerate = point.margin <= DEGENERACY_RATIO * point.spectral_norm;
    let kind = if degenerate && alignment >= ORBIT_ALIGNMENT { OrbitKind::RotationOrbit } else { OrbitKind::Isolated };
    Ok(OrbitTag { kind, alignment })
}

/// A located and classified critical configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub configuration: Configuration,
    pub value: f64,
    pub residual: f64,
    pub spectrum: Vec<f64>,
    pub morse_index: usize,
    pub margin: f64,
    pub spectral_norm: f64,
    /// Eigenvector of the smallest-magnitude eigenvalue.
    pub null_direction: Vec<f64>,
    pub orbit: OrbitTag,
    pub iterations: usize,
}

impl CriticalPoint {
    /// Classifies a converged Newton outcome and tags its orbit.
    pub fn from_outcome(domain: &DomainSpec, outcome: NewtonOutcome) -> Result<Self, CriticalError> {
        let class = classify(&outcome.evaluation.hessian)?;
        let mut point = Self {
            configuration: outcome.configuration,
            value: outcome.evaluation.value,
            residual: outcome.evaluation.gradient.norm(),
            null_direction: class.null_direction().as_slice().to_vec(),
            spectrum: class.spectrum,
            morse_index: class.morse_index,
            margin: class.margin,
            spectral_norm: class.spectral_norm,
            orbit: OrbitTag { kind: OrbitKind::Isolated, alignment: 0.0 },
            iterations: outcome.iterations,
        };
        point.orbit = match detect_rotation_orbit(domain, &point) {
            Ok(tag) => tag,
            Err(CriticalError::UndefinedOrbit) => point.orbit,
            Err(e) => return Err(e),
        };
        Ok(point)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub starts: usize,
    pub converged: usize,
    pub deduplicated: usize,
    pub rejected_inadmissible: usize,
    pub not_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport {
    pub points: Vec<CriticalPoint>,
    pub stats: SearchStats,
    pub domain_fingerprint: String,
    pub function_fingerprint: String,
}

impl MorseReport {
    /// One row per critical point.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.configuration.len());
        let mut header: Vec<String> = Vec::new();
        for k in 1..=n {
            header.push(format!("x{k}"));
            header.push(format!("y{k}"));
        }
        header.extend(["value", "residual", "morse_index", "margin", "orbit_tag", "alignment"].map(String::from));
        let mut table = CsvTable::new(header);
        for p in &self.points {
            let mut row: Vec<String> = p.configuration.points().iter().flat_map(|q| [csv_float(q.x), csv_float(q.y)]).collect();
            row.push(csv_float(p.value));
            row.push(csv_float(p.residual));
            row.push(p.morse_index.to_string());
            row.push(csv_float(p.margin));
            row.push(p.orbit.kind.as_str().to_string());
            row.push(csv_float(p.orbit.alignment));
            table.push(row);
        }
        table.render()
    }
}

pub fn domain_fingerprint(domain: &DomainSpec) -> String {
    let c = domain.boundary();
    let text = serde_json::json!({
        "cos_x": c.cos_x(), "sin_x": c.sin_x(), "cos_y": c.cos_y(), "sin_y": c.sin_y(),
        "symmetry": domain.symmetry(),
    });
    hex_digest(text.to_string().as_bytes())
}

pub fn function_fingerprint(strengths: &VortexStrengths, spec: &InteractionSpec) -> String {
    let text = serde_json::json!({ "lambda": strengths.as_slice(), "interaction": spec.name() });
    hex_digest(text.to_string().as_bytes())
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Admissible low-discrepancy starting configurations.
pub fn starting_configurations(
    domain: &DomainSpec,
    spec: &InteractionSpec,
    n: usize,
    config: &SearchConfig,
    boundary_margin: f64,
) -> Vec<Configuration> {
    let pts = domain.boundary().sample(domain.boundary().node_hint());
    let lo = pts.iter().fold(Point::repeat(f64::INFINITY), |a, p| a.inf(p));
    let hi = pts.iter().fold(Point::repeat(f64::NEG_INFINITY), |a, p| a.sup(p));
    let mut seq = ShiftedHalton::new(2 * n, config.seed);
    let mut out = Vec::with_capacity(config.starts);
    let max_tries = 1000 * config.starts + 10_000;
    for _ in 0..max_tries {
        if out.len() == config.starts {
            break;
        }
        let u = seq.next_point();
        let cfg = Configuration(
            u.chunks_exact(2)
                .map(|c| Point::new(lo.x + c[0] * (hi.x - lo.x), lo.y + c[1] * (hi.y - lo.y)))
                .collect(),
        );
        if check_admissible(domain, spec, &cfg, boundary_margin, config.collision_margin).admissible {
            out.push(cfg);
        }
    }
    out
}

/// Multi-start search for critical points of `f_Omega`.
pub fn find_critical_points(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    config: &SearchConfig,
) -> Result<MorseReport, CriticalError> {
    config.validate()?;
    let domain = engine.domain();
    let boundary_margin = config.boundary_margin.max(engine.contract_distance());
    let starts = starting_configurations(domain, spec, strengths.len(), config, boundary_margin);
    let opts = config.newton();
    let outcomes: Vec<_> = starts.par_iter().map(|s| newton(engine, strengths, spec, s, &opts)).collect();

    let mut stats = SearchStats { starts: starts.len(), ..Default::default() };
    let mut points: Vec<CriticalPoint> = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                stats.converged += 1;
                let candidate = o.configuration.to_vector();
                if points.iter().any(|p| (p.configuration.to_vector() - &candidate).norm() <= config.dedup_radius) {
                    stats.deduplicated += 1;
                    continue;
                }
                points.push(CriticalPoint::from_outcome(domain, o)?);
            }
            Err(NewtonFailure::Inadmissible) | Err(NewtonFailure::Evaluation(_)) => stats.rejected_inadmissible += 1,
            Err(_) => stats.not_converged += 1,
        }
    }
    Ok(MorseReport {
        points,
        stats,
        domain_fingerprint: domain_fingerprint(domain),
        function_fingerprint: function_fingerprint(strengths, spec),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn classify_examples() {
        let c = classify(&(-DMatrix::identity(2, 2) / PI)).unwrap();
        assert_eq!(c.morse_index, 2);
        assert!((c.margin - 1.0 / PI).abs() < 1e-15);
        let c = classify(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0]))).unwrap();
        assert_eq!(c.morse_index, 1);
        assert_eq!(c.margin, 0.5);
        assert_eq!(c.spectrum, vec![-1.0, 0.5, 1.0, 2.0]);
        let c = classify(&DMatrix::zeros(4, 4)).unwrap();
        assert_eq!((c.morse_index, c.margin), (0, 0.0));
    }

    #[test]
    fn classify_rejects_non_finite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(classify(&m), Err(CriticalError::Numeric(_))));
    }

    #[test]
    fn newton_step_solves_nondegenerate_system() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, -3.0]);
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let d = newton_step(&h, &g);
        assert!((&h * d + g).norm() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::default().validate().is_ok());
        let bad = SearchConfig { tolerance: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SearchConfig { dedup_radius: 1e-12, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn disk_engine() -> GreenEngine {
        GreenEngine::build(&DomainSpec::unit_disk(), 256, crate::green::BackendChoice::ClosedForm).unwrap()
    }

    #[test]
    fn single_vortex_on_disk() {
        let engine = disk_engine();
        let config = SearchConfig { starts: 50, ..SearchConfig::for_domain(engine.domain()) };
        let lambda = VortexStrengths::new(vec![1.0]).unwrap();
        let report = find_critical_points(&engine, &lambda, &InteractionSpec::Zero, &config).unwrap();
        assert_eq!(report.points.len(), 1);
        let p = &report.points[0];
        assert!(p.configuration.0[0].norm() <= 1e-8);
        assert_eq!(p.morse_index, 2);
        assert!((p.margin - 1.0 / PI).abs() < 1e-8);
        assert_eq!(report.to_csv().lines().count(), 2);
    }

    #[test]
    fn dipole_orbit_and_equal_pair() {
        let engine = disk_engine();
        let config = SearchConfig::for_domain(engine.domain());
        let a = (5f64.sqrt() - 2.0).sqrt();
        let dipole = VortexStrengths::new(vec![1.0, -1.0]).unwrap();
        let report = find_critical_points(&engine, &dipole, &InteractionSpec::KirchhoffRouth, &config).unwrap();
        assert!(report.points.len() > 1);
        for p in &report.points {
            assert!(p.residual <= 1e-8);
            for q in p.configuration.points() {
                assert!((q.norm() - a).abs() < 1e-6);
            }
            assert_eq!(p.orbit.kind, OrbitKind::RotationOrbit);
        }
        let pair = VortexStrengths::new(vec![1.0, 1.0]).unwrap();
        let report = find_critical_points(&engine, &pair, &InteractionSpec::KirchhoffRouth, &config).unwrap();
        assert!(report.points.is_empty());
        assert_eq!(report.stats.starts, 200);
    }

    #[test]
    fn undefined_orbit_at_center() {
        let d = DomainSpec::unit_disk();
        let p = CriticalPoint {
            configuration: Configuration(vec![Point::zeros()]),
            value: 0.0,
            residual: 0.0,
            spectrum: vec![-1.0 / PI, -1.0 / PI],
            morse_index: 2,
            margin: 1.0 / PI,
            spectral_norm: 1.0 / PI,
            null_direction: vec![1.0, 0.0],
            orbit: OrbitTag { kind: OrbitKind::Isolated, alignment: 0.0 },
            iterations: 0,
        };
        assert_eq!(detect_rotation_orbit(&d, &p), Err(CriticalError::UndefinedOrbit));
    }
}
