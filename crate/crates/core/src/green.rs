//! Dirichlet Green function `G = Gamma - H` of a smooth planar domain.
//!
//! Two backends evaluate the regular part `H`:
//!
//! * closed form on disks (image charge): `H(x,y) = -(1/2pi) ln |R^2 - (x-c) conj(y-c)| / R`;
//! * a second-kind double-layer Nystrom discretization on Fourier curves.
//!   The double-layer kernel `k(x,z) = (1/2pi) Re(nu(z) / (x - z))` is smooth
//!   on the curve, so the trapezoidal rule converges spectrally; its diagonal
//!   limit is `-kappa(z) / 4pi`. Derivatives in `x` come from differentiating
//!   the holomorphic kernel, derivatives in `y` from auxiliary solves with
//!   the `y`-derivatives of `Gamma` as boundary data.
//!
//! Boundary traces `d_nu G(x, .)` are minus the harmonic-measure density,
//! obtained from the adjoint (single-layer-normal) equation with right-hand
//! side `k(x, .)`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::{BoundaryCurve, DomainSpec, GeometryError, Point};

pub const DEFAULT_NODES: usize = 256;
pub const MIN_NODES: usize = 64;
/// Integral-backend evaluation points must be this fraction of the domain
/// diameter away from the boundary.
pub const CONTRACT_FRACTION: f64 = 0.05;
const MAX_CONDITION: f64 = 1e12;
const SELF_TEST_TOL: f64 = 1e-8;
const SELF_TEST_DISTANCE: f64 = 0.1;
const COINCIDENCE: f64 = 1e-14;
const INV_2PI: f64 = 1.0 / TAU;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("singular evaluation: points coincide (distance {0:.3e})")]
    Singular(f64),
    #[error("point ({x:.6}, {y:.6}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("point at distance {distance:.3e} from the boundary is inside the accuracy margin {required:.3e} (estimated error {error_bound:.1e})")]
    AccuracyDegraded { distance: f64, required: f64, error_bound: f64 },
    #[error("discretization failure: {0}")]
    Discretization(String),
    #[error("invalid node count {0} (minimum {MIN_NODES})")]
    InvalidNodes(usize),
    #[error("closed-form backend requires a circular boundary")]
    NotADisk,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ClosedForm,
    Integral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    /// Closed form on disks, boundary integrals otherwise.
    #[default]
    Auto,
    ClosedForm,
    Integral,
}

impl std::str::FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "closed_form" | "closed-form" | "disk" => Ok(Self::ClosedForm),
            "integral" => Ok(Self::Integral),
            _ => Err(format!("unknown backend `{s}` (auto, closed-form, integral)")),
        }
    }
}

/// `H(x,y)` with its first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenEvaluation {
    pub value: f64,
    pub grad_x: Point,
    pub grad_y: Point,
    pub hess_xx: Matrix2<f64>,
    pub hess_yy: Matrix2<f64>,
    /// Entry `(i, j)` is `d^2 H / dx_i dy_j`.
    pub hess_xy: Matrix2<f64>,
}

/// Robin function `h(x) = H(x,x)` with gradient and Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobinEvaluation {
    pub value: f64,
    pub gradient: Point,
    pub hessian: Matrix2<f64>,
}

impl From<&GreenEvaluation> for RobinEvaluation {
    fn from(e: &GreenEvaluation) -> Self {
        Self {
            value: e.value,
            gradient: e.grad_x + e.grad_y,
            hessian: e.hess_xx + e.hess_xy + e.hess_xy.transpose() + e.hess_yy,
        }
    }
}

/// Values of `d_{nu_z} G(x, z)` at the quadrature nodes, optionally with their
/// `x`-gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub values: Vec<f64>,
    pub gradients: Option<Vec<Point>>,
}

/// Trapezoidal quadrature on the boundary curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub params: Vec<f64>,
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub weights: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl Quadrature {
    pub fn new(curve: &BoundaryCurve, nodes: usize) -> Result<Self, GeometryError> {
        let dt = TAU / nodes as f64;
        let mut q = Quadrature {
            params: Vec::with_capacity(nodes),
            points: Vec::with_capacity(nodes),
            normals: Vec::with_capacity(nodes),
            weights: Vec::with_capacity(nodes),
            curvature: Vec::with_capacity(nodes),
        };
        for t in BoundaryCurve::parameters(nodes) {
            let b = curve.eval(t)?;
            q.params.push(t);
            q.points.push(b.point);
            q.normals.push(b.normal);
            q.weights.push(b.speed * dt);
            q.curvature.push(b.curvature);
        }
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_i w_i f_i`.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }
}

fn cx(p: &Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

/// Value, gradient and Hessian of `Re F` from the holomorphic derivatives of `F`.
fn harmonic_jet(f: Complex64, f1: Complex64, f2: Complex64) -> (f64, Point, Matrix2<f64>) {
    (f.re, Point::new(f1.re, -f1.im), Matrix2::new(f2.re, -f2.im, -f2.im, -f2.re))
}

/// Free-space fundamental solution `Gamma(x,y) = -(1/2pi) ln |x-y|`.
pub fn gamma(x: &Point, y: &Point) -> Result<f64, GreenError> {
    let r = checked_distance(x, y)?;
    Ok(-INV_2PI * r.ln())
}

/// Gradient of `Gamma` in `x`.
pub fn grad_gamma(x: &Point, y: &Point) -> Result<Point, GreenError> {
    let r = checked_distance(x, y)?;
    Ok(-INV_2PI * (x - y) / (r * r))
}

/// Hessian of `Gamma` in `x`; trace-free.
pub fn hess_gamma(x: &Point, y: &Point) -> Result<Matrix2<f64>, GreenError> {
    let r = checked_distance(x, y)?;
    let d = x - y;
    let r2 = r * r;
    Ok(-INV_2PI * (Matrix2::identity() * r2 - 2.0 * d * d.transpose()) / (r2 * r2))
}

fn checked_distance(x: &Point, y: &Point) -> Result<f64, GreenError> {
    let r = (x - y).norm();
    if r < COINCIDENCE {
        return Err(GreenError::Singular(r));
    }
    Ok(r)
}

#[derive(Debug, Clone)]
enum Backend {
    Disk { center: Point, radius: f64 },
    Integral(IntegralSolver),
}

#[derive(Debug, Clone)]
struct IntegralSolver {
    /// Inverse of `-1/2 I + K` (double layer, Dirichlet data -> density).
    direct_inverse: DMatrix<f64>,
    /// Inverse of `-1/2 I + K'` (kernel `k(x,.)` -> harmonic measure density).
    adjoint_inverse: DMatrix<f64>,
    /// `w_j nu_j / 2pi` as complex numbers.
    layer: Vec<Complex64>,
    condition: f64,
}

/// Precomputed data for a fixed source point `y`.
#[derive(Debug, Clone)]
pub struct Source {
    y: Point,
    /// Densities for the data `Gamma(., y)` and its `y`-derivatives, in the
    /// order value, d1, d2, d11, d12, d22; one column each.
    densities: Option<DMatrix<f64>>,
}

impl Source {
    pub fn point(&self) -> Point {
        self.y
    }
}

/// Evaluator for `H`, `G`, the Robin function and boundary traces on one domain.
#[derive(Debug, Clone)]
pub struct GreenEngine {
    domain: DomainSpec,
    quadrature: Quadrature,
    backend: Backend,
    contract_distance: f64,
    perimeter: f64,
    self_test_error: f64,
}

impl GreenEngine {
    /// Builds an engine with `nodes` boundary nodes and runs the harmonic
    /// self-test.
    pub fn build(domain: &DomainSpec, nodes: usize, choice: BackendChoice) -> Result<Self, GreenError> {
        if nodes < MIN_NODES {
            return Err(GreenError::InvalidNodes(nodes));
        }
        let curve = domain.boundary();
        let quadrature = Quadrature::new(curve, nodes)?;
        let circle = curve.as_circle();
        let use_closed = match choice {
            BackendChoice::Auto => circle.is_some(),
            BackendChoice::ClosedForm => {
                if circle.is_none() {
                    return Err(GreenError::NotADisk);
                }
                true
            }
            BackendChoice::Integral => false,
        };
        let perimeter = quadrature.weights.iter().sum();
        let (backend, contract_distance) = match (use_closed, circle) {
            (true, Some((center, radius))) => (Backend::Disk { center, radius }, 0.0),
            _ => (
                Backend::Integral(IntegralSolver::new(&quadrature)?),
                CONTRACT_FRACTION * domain.diameter(),
            ),
        };
        let mut engine = Self {
            domain: domain.clone(),
            quadrature,
            backend,
            contract_distance,
            perimeter,
            self_test_error: 0.0,
        };
        engine.self_test_error = engine.self_test()?;
        if !(engine.self_test_error <= SELF_TEST_TOL) {
            return Err(GreenError::Discretization(format!(
                "harmonic self-test error {:.3e} exceeds {SELF_TEST_TOL:.0e}",
                engine.self_test_error
            )));
        }
        Ok(engine)
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }
    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }
    pub fn nodes(&self) -> usize {
        self.quadrature.len()
    }
    pub fn backend(&self) -> BackendKind {
        match self.backend {
            Backend::Disk { .. } => BackendKind::ClosedForm,
            Backend::Integral(_) => BackendKind::Integral,
        }
    }
    /// Minimal boundary distance of admissible evaluation points.
    pub fn contract_distance(&self) -> f64 {
        self.contract_distance
    }
    pub fn self_test_error(&self) -> f64 {
        self.self_test_error
    }
    /// 1-norm condition number of the Dirichlet system (1 for the closed form).
    pub fn condition(&self) -> f64 {
        match &self.backend {
            Backend::Disk { .. } => 1.0,
            Backend::Integral(s) => s.condition,
        }
    }

    /// Reproduces the harmonic function `Re z^2` from its boundary values.
    fn self_test(&self) -> Result<f64, GreenError> {
        let Backend::Integral(solver) = &self.backend else {
            return Ok(0.0);
        };
        let data: DVector<f64> =
            DVector::from_iterator(self.nodes(), self.quadrature.points.iter().map(|z| z.x * z.x - z.y * z.y));
        let density = &solver.direct_inverse * data;
        let margin = SELF_TEST_DISTANCE.max(self.contract_distance);
        let mut probes = self.domain.sample_interior(12, margin, 0x5e1f).unwrap_or_default();
        let center = self.domain.boundary().centroid();
        if self.domain.contains(&center, margin) {
            probes.push(center);
        }
        let mut worst: f64 = 0.0;
        for p in &probes {
            let (u, _, _) = solver.potential(&self.quadrature, p, density.as_slice());
            worst = worst.max((u - (p.x * p.x - p.y * p.y)).abs());
        }
        Ok(worst)
    }

    /// Checks interiority and the backend's accuracy contract.
    pub fn check_point(&self, p: &Point) -> Result<(), GreenError> {
        let outside = || GreenError::OutsideDomain { x: p.x, y: p.y };
        if !p.iter().all(|c| c.is_finite()) {
            return Err(outside());
        }
        match &self.backend {
            Backend::Disk { center, radius } => {
                if (p - center).norm() >= *radius {
                    return Err(outside());
                }
            }
            Backend::Integral(_) => {
                if !self.domain.is_inside(p) {
                    return Err(outside());
                }
                let distance = self.domain.distance_to_boundary(p);
                if distance < self.contract_distance {
                    let error_bound = (-(self.nodes() as f64) * TAU * distance / self.perimeter).exp();
                    return Err(GreenError::AccuracyDegraded {
                        distance,
                        required: self.contract_distance,
                        error_bound,
                    });
                }
            }
        }
        Ok(())
    }

    /// Prepares the source point `y` (auxiliary solves for the integral backend).
    pub fn source(&self, y: &Point) -> Result<Source, GreenError> {
        self.check_point(y)?;
        let densities = match &self.backend {
            Backend::Disk { .. } => None,
            Backend::Integral(solver) => Some(solver.densities(&self.quadrature, y)),
        };
        Ok(Source { y: *y, densities })
    }

    /// `H(x, y)` and derivatives for a prepared source.
    pub fn evaluate(&self, x: &Point, source: &Source) -> Result<GreenEvaluation, GreenError> {
        self.check_point(x)?;
        Ok(match (&self.backend, &source.densities) {
            (Backend::Disk { center, radius }, _) => disk_regular_part(x, &source.y, center, *radius),
            (Backend::Integral(solver), Some(d)) => solver.evaluate(&self.quadrature, x, d),
            (Backend::Integral(solver), None) => {
                solver.evaluate(&self.quadrature, x, &solver.densities(&self.quadrature, &source.y))
            }
        })
    }

    /// Regular part `H(x, y)` with all first and second derivatives.
    pub fn regular_part(&self, x: &Point, y: &Point) -> Result<GreenEvaluation, GreenError> {
        let source = self.source(y)?;
        self.evaluate(x, &source)
    }

    /// `G(x,y) = Gamma(x,y) - H(x,y)`.
    pub fn green(&self, x: &Point, y: &Point) -> Result<f64, GreenError> {
        let g = gamma(x, y)?;
        Ok(g - self.regular_part(x, y)?.value)
    }

    /// Robin function `h(x) = H(x,x)` by the chain rule on the diagonal.
    pub fn robin(&self, x: &Point) -> Result<RobinEvaluation, GreenError> {
        Ok(RobinEvaluation::from(&self.regular_part(x, x)?))
    }

    /// `d_{nu_z} G(x, z)` at every quadrature node.
    pub fn boundary_normal_derivative(&self, x: &Point) -> Result<BoundaryTrace, GreenError> {
        self.trace(x, false)
    }

    /// Boundary trace together with its gradient in `x`.
    pub fn boundary_normal_derivative_with_gradient(&self, x: &Point) -> Result<BoundaryTrace, GreenError> {
        self.trace(x, true)
    }

    fn trace(&self, x: &Point, with_gradient: bool) -> Result<BoundaryTrace, GreenError> {
        self.check_point(x)?;
        let q = &self.quadrature;
        match &self.backend {
            Backend::Disk { center, radius } => {
                let (r2, xc) = (radius * radius, x - center);
                let s = r2 - xc.norm_squared();
                let mut values = Vec::with_capacity(q.len());
                let mut grads = Vec::with_capacity(q.len());
                for z in &q.points {
                    let d = x - z;
                    let d2 = d.norm_squared();
                    values.push(-s * INV_2PI / (radius * d2));
                    if with_gradient {
                        let grad_p = (-2.0 * xc * d2 - 2.0 * s * d) * INV_2PI / (radius * d2 * d2);
                        grads.push(-grad_p);
                    }
                }
                Ok(BoundaryTrace { values, gradients: with_gradient.then_some(grads) })
            }
            Backend::Integral(solver) => {
                let n = q.len();
                let cols = if with_gradient { 3 } else { 1 };
                let mut rhs = DMatrix::zeros(n, cols);
                let xc = cx(x);
                for (i, (z, nu)) in q.points.iter().zip(&q.normals).enumerate() {
                    let inv = 1.0 / (xc - cx(z));
                    let nu = cx(nu);
                    rhs[(i, 0)] = INV_2PI * (nu * inv).re;
                    if with_gradient {
                        let f1 = -nu * inv * inv;
                        rhs[(i, 1)] = INV_2PI * f1.re;
                        rhs[(i, 2)] = -INV_2PI * f1.im;
                    }
                }
                let omega = &solver.adjoint_inverse * rhs;
                let values = omega.column(0).iter().map(|v| -v).collect();
                let gradients =
                    with_gradient.then(|| (0..n).map(|i| -Point::new(omega[(i, 1)], omega[(i, 2)])).collect());
                Ok(BoundaryTrace { values, gradients })
            }
        }
    }
}

fn disk_regular_part(x: &Point, y: &Point, center: &Point, radius: f64) -> GreenEvaluation {
    let xs = cx(&((x - center) / radius));
    let ys = cx(&((y - center) / radius));
    let one = Complex64::new(1.0, 0.0);
    // u = Re log(1 - X conj(Y)), holomorphic in X and in conj-free form in Y.
    let wx = one - xs * ys.conj();
    let wy = one - xs.conj() * ys;
    let (u, gx, hx) = harmonic_jet(wx.ln(), -ys.conj() / wx, -ys.conj() * ys.conj() / (wx * wx));
    let (_, gy, hy) = harmonic_jet(wy.ln(), -xs.conj() / wy, -xs.conj() * xs.conj() / (wy * wy));
    let q = -one / (wy * wy);
    let hxy = Matrix2::new(q.re, -q.im, q.im, q.re);
    let s = -INV_2PI;
    GreenEvaluation {
        value: s * (radius.ln() + u),
        grad_x: s * gx / radius,
        grad_y: s * gy / radius,
        hess_xx: s * hx / (radius * radius),
        hess_yy: s * hy / (radius * radius),
        hess_xy: s * hxy / (radius * radius),
    }
}

impl IntegralSolver {
    fn new(q: &Quadrature) -> Result<Self, GreenError> {
        let n = q.len();
        let mut direct = DMatrix::zeros(n, n);
        let mut adjoint = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    let diag = -q.curvature[i] / (4.0 * PI) * q.weights[i];
                    direct[(i, i)] = -0.5 + diag;
                    adjoint[(i, i)] = -0.5 + diag;
                    continue;
                }
                let d = q.points[i] - q.points[j];
                let r2 = d.norm_squared();
                direct[(i, j)] = q.weights[j] * INV_2PI * d.dot(&q.normals[j]) / r2;
                adjoint[(i, j)] = q.weights[j] * INV_2PI * (-d).dot(&q.normals[i]) / r2;
            }
        }
        let invert = |m: &DMatrix<f64>| {
            m.clone().lu().try_inverse().ok_or_else(|| GreenError::Discretization("singular Nystrom matrix".into()))
        };
        let direct_inverse = invert(&direct)?;
        let adjoint_inverse = invert(&adjoint)?;
        let condition = norm1(&direct) * norm1(&direct_inverse);
        if !(condition <= MAX_CONDITION) {
            return Err(GreenError::Discretization(format!("condition estimate {condition:.3e} exceeds 1e12")));
        }
        let layer = q.weights.iter().zip(&q.normals).map(|(w, nu)| cx(nu) * (w * INV_2PI)).collect();
        Ok(Self { direct_inverse, adjoint_inverse, layer, condition })
    }

    fn densities(&self, q: &Quadrature, y: &Point) -> DMatrix<f64> {
        let n = q.len();
        let mut data = DMatrix::zeros(n, 6);
        let yc = cx(y);
        for (i, z) in q.points.iter().enumerate() {
            let w = cx(z) - yc;
            let inv = 1.0 / w;
            let inv2 = inv * inv;
            data[(i, 0)] = -INV_2PI * w.norm().ln();
            data[(i, 1)] = INV_2PI * inv.re;
            data[(i, 2)] = -INV_2PI * inv.im;
            data[(i, 3)] = INV_2PI * inv2.re;
            data[(i, 4)] = -INV_2PI * inv2.im;
            data[(i, 5)] = -INV_2PI * inv2.re;
        }
        &self.direct_inverse * data
    }

    /// Double-layer potential of `density` at interior `x` with derivatives.
    fn potential(&self, q: &Quadrature, x: &Point, density: &[f64]) -> (f64, Point, Matrix2<f64>) {
        let xc = cx(x);
        let (mut f, mut f1, mut f2) = (Complex64::default(), Complex64::default(), Complex64::default());
        for ((z, c), mu) in q.points.iter().zip(&self.layer).zip(density) {
            let inv = 1.0 / (xc - cx(z));
            let term = c * *mu * inv;
            f += term;
            f1 -= term * inv;
            f2 += 2.0 * term * inv * inv;
        }
        harmonic_jet(f, f1, f2)
    }

    fn evaluate(&self, q: &Quadrature, x: &Point, d: &DMatrix<f64>) -> GreenEvaluation {
        let col = |k: usize| d.column(k).into_owned();
        let (value, grad_x, hess_xx) = self.potential(q, x, col(0).as_slice());
        let (d1, g1, _) = self.potential(q, x, col(1).as_slice());
        let (d2, g2, _) = self.potential(q, x, col(2).as_slice());
        let (d11, _, _) = self.potential(q, x, col(3).as_slice());
        let (d12, _, _) = self.potential(q, x, col(4).as_slice());
        let (d22, _, _) = self.potential(q, x, col(5).as_slice());
        GreenEvaluation {
            value,
            grad_x,
            grad_y: Point::new(d1, d2),
            hess_xx,
            hess_yy: Matrix2::new(d11, d12, d12, d22),
            hess_xy: Matrix2::new(g1.x, g2.x, g1.y, g2.y),
        }
    }
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PerturbationField;

    fn disk() -> DomainSpec {
        DomainSpec::unit_disk()
    }

    #[test]
    fn gamma_examples() {
        let o = Point::zeros();
        assert_eq!(gamma(&Point::new(1.0, 0.0), &o).unwrap(), 0.0);
        let e = Point::new((-1.0f64).exp(), 0.0);
        assert!((gamma(&e, &o).unwrap() - INV_2PI).abs() < 1e-15);
        let h = hess_gamma(&Point::new(0.3, -0.7), &Point::new(0.1, 0.2)).unwrap();
        assert!(h.trace().abs() < 1e-14 * h.norm());
        assert!(matches!(gamma(&o, &o), Err(GreenError::Singular(_))));
    }

    #[test]
    fn gamma_derivatives_match_differences() {
        let (x, y) = (Point::new(0.3, -0.7), Point::new(0.1, 0.2));
        let h = 1e-5;
        let g = grad_gamma(&x, &y).unwrap();
        let hess = hess_gamma(&x, &y).unwrap();
        for i in 0..2 {
            let mut e = Point::zeros();
            e[i] = h;
            let fd = (gamma(&(x + e), &y).unwrap() - gamma(&(x - e), &y).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-9);
            let fdg = (grad_gamma(&(x + e), &y).unwrap() - grad_gamma(&(x - e), &y).unwrap()) / (2.0 * h);
            assert!((fdg - hess.column(i)).norm() < 1e-8);
        }
    }

    #[test]
    fn closed_form_disk_values() {
        let e = GreenEngine::build(&disk(), 256, BackendChoice::Auto).unwrap();
        assert_eq!(e.backend(), BackendKind::ClosedForm);
        let o = Point::zeros();
        assert_eq!(e.regular_part(&o, &o).unwrap().value, 0.0);
        let r = (1.0 - (-TAU).exp()).sqrt();
        assert!((e.robin(&Point::new(r, 0.0)).unwrap().value - 1.0).abs() < 1e-12);
        let rob = e.robin(&o).unwrap();
        assert!(rob.gradient.norm() < 1e-15);
        assert!((rob.hessian - Matrix2::identity() / PI).norm() < 1e-14);
        let half = e.robin(&Point::new(0.0, 0.5)).unwrap().value;
        assert!((half + INV_2PI * 0.75f64.ln()).abs() < 1e-15);
        assert!(e.robin(&Point::new(0.99, 0.0)).unwrap().value > e.robin(&Point::new(0.9, 0.0)).unwrap().value);
    }

    #[test]
    fn robin_hessian_at_center_by_differences() {
        // Independent check of (1/pi) I: second differences of -(1/2pi) ln(1 - |x|^2).
        let h = |p: Point| -INV_2PI * (1.0 - p.norm_squared()).ln();
        let s = 1e-4;
        let fxx = (h(Point::new(s, 0.0)) - 2.0 * h(Point::zeros()) + h(Point::new(-s, 0.0))) / (s * s);
        assert!((fxx - 1.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn green_examples() {
        let e = GreenEngine::build(&disk(), 256, BackendChoice::Auto).unwrap();
        let g = e.green(&Point::new(0.5, 0.0), &Point::new(-0.5, 0.0)).unwrap();
        assert!((g - INV_2PI * 1.25f64.ln()).abs() < 1e-15);
        assert!(e.green(&Point::new(0.999, 0.0), &Point::zeros()).unwrap() < 1e-3);
        let pts = disk().sample_interior(12, 0.05, 3).unwrap();
        for (i, x) in pts.iter().enumerate() {
            for y in &pts[i + 1..] {
                assert!(e.green(x, y).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn disk_trace_is_poisson_kernel() {
        let e = GreenEngine::build(&disk(), 256, BackendChoice::Auto).unwrap();
        let t = e.boundary_normal_derivative(&Point::zeros()).unwrap();
        assert!(t.values.iter().all(|v| (v + INV_2PI).abs() < 1e-15));
        let t = e.boundary_normal_derivative(&Point::new(0.3, 0.4)).unwrap();
        let mass = -e.quadrature().integrate(t.values.iter().copied());
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn integral_matches_closed_form_on_disk() {
        let closed = GreenEngine::build(&disk(), 256, BackendChoice::ClosedForm).unwrap();
        let integral = GreenEngine::build(&disk(), 256, BackendChoice::Integral).unwrap();
        assert!(integral.self_test_error() <= 1e-8);
        let (x, y) = (Point::new(0.3, -0.2), Point::new(-0.5, 0.4));
        let a = closed.regular_part(&x, &y).unwrap();
        let b = integral.regular_part(&x, &y).unwrap();
        assert!((a.value - b.value).abs() < 1e-10);
        assert!((a.grad_x - b.grad_x).norm() < 1e-10);
        assert!((a.grad_y - b.grad_y).norm() < 1e-10);
        assert!((a.hess_xx - b.hess_xx).norm() < 1e-9);
        assert!((a.hess_yy - b.hess_yy).norm() < 1e-9);
        assert!((a.hess_xy - b.hess_xy).norm() < 1e-9);
        let ta = closed.boundary_normal_derivative(&Point::new(0.5, 0.0)).unwrap();
        let tb = integral.boundary_normal_derivative(&Point::new(0.5, 0.0)).unwrap();
        let worst = ta.values.iter().zip(&tb.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-7, "{worst}");
    }

    #[test]
    fn lobed_domain_builds_and_is_symmetric() {
        let lobed = disk().apply_perturbation(&PerturbationField::cos_mode(3), 0.05).unwrap();
        let e = GreenEngine::build(&lobed, 256, BackendChoice::Auto).unwrap();
        assert_eq!(e.backend(), BackendKind::Integral);
        assert!(e.self_test_error() <= 1e-8);
        let (x, y) = (Point::new(0.2, 0.1), Point::new(-0.4, 0.3));
        let a = e.regular_part(&x, &y).unwrap();
        let b = e.regular_part(&y, &x).unwrap();
        assert!((a.value - b.value).abs() < 1e-7);
        assert!((a.hess_xy - b.hess_xy.transpose()).norm() < 1e-7);
        assert!(a.hess_xx.trace().abs() <= 1e-6 * a.hess_xx.norm());
    }

    #[test]
    fn contract_and_node_validation() {
        assert!(matches!(GreenEngine::build(&disk(), 16, BackendChoice::Auto), Err(GreenError::InvalidNodes(16))));
        let e = GreenEngine::build(&disk(), 256, BackendChoice::Integral).unwrap();
        assert!(matches!(
            e.regular_part(&Point::new(0.95, 0.0), &Point::zeros()),
            Err(GreenError::AccuracyDegraded { .. })
        ));
        assert!(matches!(e.robin(&Point::new(1.5, 0.0)), Err(GreenError::OutsideDomain { .. })));
        let ellipse = DomainSpec::new(BoundaryCurve::ellipse(2.0, 1.0).unwrap(), None).unwrap();
        assert!(matches!(GreenEngine::build(&ellipse, 128, BackendChoice::ClosedForm), Err(GreenError::NotADisk)));
    }
}
