//! Smooth planar domains bounded by truncated Fourier curves, boundary
//! perturbations `(id + eps psi)(Omega)` and finite symmetry groups.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = Vector2<f64>;

/// Tangent lengths below this are treated as a degenerate parametrization.
const DEGENERATE_TANGENT: f64 = 1e-12;
/// Pointwise tolerance for symmetry-invariance checks.
const SYMMETRY_TOL: f64 = 1e-10;
/// Largest admissible residual when re-fitting a perturbed boundary.
const REFIT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("malformed boundary curve: {0}")]
    MalformedCurve(String),
    #[error("perturbation too large: displacement {displacement:.3e} exceeds margin {margin:.3e}")]
    PerturbationTooLarge { displacement: f64, margin: f64 },
    #[error("re-fit of perturbed boundary failed: residual {residual:.3e}")]
    RefitFailure { residual: f64 },
    #[error("symmetry mismatch: {0}")]
    SymmetryMismatch(String),
    #[error("no admissible interior point found after {tries} candidates")]
    EmptyRegion { tries: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Evaluation of the boundary curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub tangent: Point,
    /// Outward unit normal.
    pub normal: Point,
    /// Signed curvature, positive on convex arcs of a counterclockwise curve.
    pub curvature: f64,
    /// Parametric speed `|z'(t)|`.
    pub speed: f64,
}

/// Closed curve `t -> (x(t), y(t))`, each coordinate a truncated Fourier
/// series `c_0 + sum_k (c_k cos kt + s_k sin kt)`.
///
/// Coefficient vectors are indexed by wave number; `sin_*[0]` is ignored and
/// stored as zero. All four vectors share one length (degree + 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    cos_x: Vec<f64>,
    sin_x: Vec<f64>,
    cos_y: Vec<f64>,
    sin_y: Vec<f64>,
}

impl BoundaryCurve {
    /// Builds a curve and checks that it is regular, simple and
    /// counterclockwise.
    pub fn new(
        cos_x: Vec<f64>,
        sin_x: Vec<f64>,
        cos_y: Vec<f64>,
        sin_y: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let curve = Self::from_coefficients_unchecked(cos_x, sin_x, cos_y, sin_y)?;
        curve.validate()?;
        Ok(curve)
    }

    fn from_coefficients_unchecked(
        mut cos_x: Vec<f64>,
        mut sin_x: Vec<f64>,
        mut cos_y: Vec<f64>,
        mut sin_y: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let len = cos_x.len().max(sin_x.len()).max(cos_y.len()).max(sin_y.len()).max(1);
        for v in [&mut cos_x, &mut sin_x, &mut cos_y, &mut sin_y] {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::MalformedCurve("non-finite coefficient".into()));
            }
            v.resize(len, 0.0);
        }
        sin_x[0] = 0.0;
        sin_y[0] = 0.0;
        Ok(Self { cos_x, sin_x, cos_y, sin_y })
    }

    /// Circle of the given radius, parametrized by polar angle.
    pub fn circle(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::MalformedCurve(format!("circle radius {radius}")));
        }
        Self::new(vec![center.x, radius], vec![0.0, 0.0], vec![center.y, 0.0], vec![0.0, radius])
    }

    pub fn unit_circle() -> Self {
        Self::circle(Point::zeros(), 1.0).expect("unit circle is valid")
    }

    /// Ellipse with semi-axes `a` (along x) and `b` (along y), centered at the origin.
    pub fn ellipse(a: f64, b: f64) -> Result<Self, GeometryError> {
        Self::new(vec![0.0, a], vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, b])
    }

    pub fn degree(&self) -> usize {
        self.cos_x.len() - 1
    }

    pub fn cos_x(&self) -> &[f64] {
        &self.cos_x
    }
    pub fn sin_x(&self) -> &[f64] {
        &self.sin_x
    }
    pub fn cos_y(&self) -> &[f64] {
        &self.cos_y
    }
    pub fn sin_y(&self) -> &[f64] {
        &self.sin_y
    }

    /// Default sampling density used by geometric checks.
    pub fn node_hint(&self) -> usize {
        (32 * self.degree()).max(256)
    }

    /// Position and its first two parameter derivatives.
    pub fn jet(&self, t: f64) -> [Point; 3] {
        let mut z = Point::new(self.cos_x[0], self.cos_y[0]);
        let mut dz = Point::zeros();
        let mut ddz = Point::zeros();
        for k in 1..=self.degree() {
            let kf = k as f64;
            let (s, c) = (kf * t).sin_cos();
            let (cx, sx, cy, sy) = (self.cos_x[k], self.sin_x[k], self.cos_y[k], self.sin_y[k]);
            z += Point::new(cx * c + sx * s, cy * c + sy * s);
            dz += kf * Point::new(-cx * s + sx * c, -cy * s + sy * c);
            ddz -= kf * kf * Point::new(cx * c + sx * s, cy * c + sy * s);
        }
        [z, dz, ddz]
    }

    pub fn position(&self, t: f64) -> Point {
        self.jet(t)[0]
    }

    /// Point, unit tangent, outward normal and curvature at `t`.
    pub fn eval(&self, t: f64) -> Result<BoundaryPoint, GeometryError> {
        let [z, dz, ddz] = self.jet(t);
        let speed = dz.norm();
        if !(speed >= DEGENERATE_TANGENT) {
            return Err(GeometryError::MalformedCurve(format!(
                "degenerate tangent |z'| = {speed:.3e} at t = {t}"
            )));
        }
        let tangent = dz / speed;
        let normal = Point::new(tangent.y, -tangent.x);
        let curvature = (dz.x * ddz.y - dz.y * ddz.x) / speed.powi(3);
        Ok(BoundaryPoint { point: z, tangent, normal, curvature, speed })
    }

    /// `m` equispaced parameter values on `[0, 2 pi)`.
    pub fn parameters(m: usize) -> impl Iterator<Item = f64> {
        (0..m).map(move |j| TAU * j as f64 / m as f64)
    }

    pub fn sample(&self, m: usize) -> Vec<Point> {
        Self::parameters(m).map(|t| self.position(t)).collect()
    }

    /// `(1/2) \oint (x y' - y x') dt`, exact for the trigonometric integrand
    /// with enough nodes.
    pub fn signed_area(&self) -> f64 {
        let m = 4 * self.degree() + 8;
        let sum: f64 = Self::parameters(m)
            .map(|t| {
                let [z, dz, _] = self.jet(t);
                z.x * dz.y - z.y * dz.x
            })
            .sum();
        0.5 * sum * TAU / m as f64
    }

    pub fn centroid(&self) -> Point {
        let m = 6 * self.degree() + 8;
        let mut acc = Point::zeros();
        for t in Self::parameters(m) {
            let [z, dz, _] = self.jet(t);
            let cross = z.x * dz.y - z.y * dz.x;
            acc += z * cross;
        }
        acc * (TAU / m as f64) / (3.0 * self.signed_area())
    }

    pub fn max_abs_curvature(&self) -> f64 {
        Self::parameters(self.node_hint())
            .filter_map(|t| self.eval(t).ok())
            .map(|b| b.curvature.abs())
            .fold(0.0, f64::max)
    }

    pub fn perimeter(&self) -> f64 {
        let m = self.node_hint();
        Self::parameters(m).map(|t| self.jet(t)[1].norm()).sum::<f64>() * TAU / m as f64
    }

    pub fn diameter(&self) -> f64 {
        let pts = self.sample(self.node_hint());
        let mut best: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                best = best.max((p - q).norm());
            }
        }
        best
    }

    /// Center and radius when the curve is an exact circle parametrized by
    /// polar angle.
    pub fn as_circle(&self) -> Option<(Point, f64)> {
        let r = self.cos_x.get(1).copied()?;
        let exact = r > 0.0
            && self.sin_y[1] == r
            && self.sin_x[1] == 0.0
            && self.cos_y[1] == 0.0
            && (2..=self.degree()).all(|k| {
                self.cos_x[k] == 0.0 && self.sin_x[k] == 0.0 && self.cos_y[k] == 0.0 && self.sin_y[k] == 0.0
            });
        exact.then(|| (Point::new(self.cos_x[0], self.cos_y[0]), r))
    }

    /// Parameter of the nearest boundary point and the distance to it.
    pub fn nearest(&self, p: &Point) -> (f64, f64) {
        let m = (16 * self.degree()).max(128);
        let h = TAU / m as f64;
        let (mut best_t, mut best_d2) = (0.0, f64::INFINITY);
        for t in Self::parameters(m) {
            let d2 = (self.position(t) - p).norm_squared();
            if d2 < best_d2 {
                best_t = t;
                best_d2 = d2;
            }
        }
        // Newton on d/dt |z(t) - p|^2 / 2, confined to the bracketing cell pair.
        let (lo, hi) = (best_t - h, best_t + h);
        let mut t = best_t;
        for _ in 0..30 {
            let [z, dz, ddz] = self.jet(t);
            let r = z - p;
            let g = r.dot(&dz);
            let gg = dz.norm_squared() + r.dot(&ddz);
            if gg <= 0.0 {
                break;
            }
            let next = (t - g / gg).clamp(lo, hi);
            let done = (next - t).abs() < 1e-15;
            t = next;
            if done {
                break;
            }
        }
        let d2 = (self.position(t) - p).norm_squared();
        if d2 < best_d2 {
            best_t = t;
            best_d2 = d2;
        }
        (best_t.rem_euclid(TAU), best_d2.sqrt())
    }

    /// Winding number of the densely sampled boundary polygon around `p`.
    pub fn winding_number(&self, p: &Point) -> i32 {
        let pts = self.sample(self.node_hint());
        let mut total = 0.0;
        for (i, a) in pts.iter().enumerate() {
            let b = &pts[(i + 1) % pts.len()];
            let (u, v) = (a - p, b - p);
            total += (u.x * v.y - u.y * v.x).atan2(u.dot(&v));
        }
        (total / TAU).round() as i32
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let m = self.node_hint();
        for t in Self::parameters(m) {
            self.eval(t)?;
        }
        let area = self.signed_area();
        if !(area > 0.0) {
            return Err(GeometryError::MalformedCurve(format!(
                "curve must be counterclockwise with positive area, got {area:.3e}"
            )));
        }
        let pts = self.sample(m);
        for i in 0..m {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                if segments_cross(&pts[i], &pts[(i + 1) % m], &pts[j], &pts[(j + 1) % m]) {
                    return Err(GeometryError::MalformedCurve(format!(
                        "self-intersection between samples {i} and {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Least-squares fit of trigonometric degree `degree` to `m > 2 degree`
    /// equispaced samples (the discrete Fourier projection).
    fn fit(samples: &[Point], degree: usize) -> Result<Self, GeometryError> {
        let m = samples.len();
        debug_assert!(m > 2 * degree);
        let mut cx = vec![0.0; degree + 1];
        let mut sx = vec![0.0; degree + 1];
        let mut cy = vec![0.0; degree + 1];
        let mut sy = vec![0.0; degree + 1];
        for (j, z) in samples.iter().enumerate() {
            let t = TAU * j as f64 / m as f64;
            for k in 0..=degree {
                let (s, c) = (k as f64 * t).sin_cos();
                cx[k] += z.x * c;
                sx[k] += z.x * s;
                cy[k] += z.y * c;
                sy[k] += z.y * s;
            }
        }
        let scale0 = 1.0 / m as f64;
        let scale = 2.0 / m as f64;
        for (k, ((a, b), (c, d))) in
            cx.iter_mut().zip(sx.iter_mut()).zip(cy.iter_mut().zip(sy.iter_mut())).enumerate()
        {
            let s = if k == 0 { scale0 } else { scale };
            *a *= s;
            *b *= s;
            *c *= s;
            *d *= s;
        }
        let curve = Self::from_coefficients_unchecked(trim(cx), trim(sx), trim(cy), trim(sy))?;
        curve.validate()?;
        Ok(curve)
    }

    fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        let s = |v: &[f64]| v.iter().map(|c| c * factor).collect::<Vec<_>>();
        Self::new(s(&self.cos_x), s(&self.sin_x), s(&self.cos_y), s(&self.sin_y))
    }
}

fn trim(mut v: Vec<f64>) -> Vec<f64> {
    for c in &mut v {
        if c.abs() < 1e-15 {
            *c = 0.0;
        }
    }
    v
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let orient = |p: &Point, q: &Point, r: &Point| (q - p).perp(&(r - p));
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetryGroup {
    Cyclic { order: usize },
    /// `order` rotations plus `order` reflections; the reflection axis passes
    /// through the origin at `axis_angle`.
    Dihedral { order: usize, axis_angle: f64 },
}

impl SymmetryGroup {
    pub fn order(&self) -> usize {
        match *self {
            SymmetryGroup::Cyclic { order } => order,
            SymmetryGroup::Dihedral { order, .. } => 2 * order,
        }
    }

    /// All group elements as orthogonal matrices, identity first.
    pub fn elements(&self) -> Vec<Matrix2<f64>> {
        let rotations = |p: usize| {
            (0..p).map(move |m| {
                let (s, c) = (TAU * m as f64 / p as f64).sin_cos();
                Matrix2::new(c, -s, s, c)
            })
        };
        match *self {
            SymmetryGroup::Cyclic { order } => rotations(order).collect(),
            SymmetryGroup::Dihedral { order, axis_angle } => {
                let (s, c) = (2.0 * axis_angle).sin_cos();
                let reflect = Matrix2::new(c, s, s, -c);
                let rots: Vec<_> = rotations(order).collect();
                let refl: Vec<_> = rots.iter().map(|r| r * reflect).collect();
                rots.into_iter().chain(refl).collect()
            }
        }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        let order = match *self {
            SymmetryGroup::Cyclic { order } | SymmetryGroup::Dihedral { order, .. } => order,
        };
        if order == 0 {
            return Err(GeometryError::InvalidArgument("group order must be positive".into()));
        }
        Ok(())
    }

    /// Parses `cyclic:3` or `dihedral:3:0.5` (axis angle in radians).
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let parts: Vec<_> = text.split(':').collect();
        let bad = || GeometryError::InvalidArgument(format!("unrecognized group `{text}`"));
        let order: usize = parts.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let group = match (parts[0], parts.len()) {
            ("cyclic", 2) => SymmetryGroup::Cyclic { order },
            ("dihedral", 2) => SymmetryGroup::Dihedral { order, axis_angle: 0.0 },
            ("dihedral", 3) => SymmetryGroup::Dihedral {
                order,
                axis_angle: parts[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        group.validate()?;
        Ok(group)
    }
}

/// A bounded planar domain with an admissible perturbation size.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    boundary: BoundaryCurve,
    perturbation_margin: f64,
    symmetry: Option<SymmetryGroup>,
}

impl DomainSpec {
    /// Uses the default margin, `0.3 x` the smaller of an injectivity-radius
    /// estimate and the minimal radius of curvature.
    pub fn new(boundary: BoundaryCurve, symmetry: Option<SymmetryGroup>) -> Result<Self, GeometryError> {
        let margin = default_margin(&boundary);
        Self::with_margin(boundary, margin, symmetry)
    }

    pub fn with_margin(
        boundary: BoundaryCurve,
        perturbation_margin: f64,
        symmetry: Option<SymmetryGroup>,
    ) -> Result<Self, GeometryError> {
        if !(perturbation_margin > 0.0) {
            return Err(GeometryError::InvalidArgument(format!(
                "perturbation margin must be positive, got {perturbation_margin}"
            )));
        }
        if let Some(group) = &symmetry {
            group.validate()?;
            check_invariant(&boundary, group)?;
        }
        Ok(Self { boundary, perturbation_margin, symmetry })
    }

    pub fn unit_disk() -> Self {
        Self::new(BoundaryCurve::unit_circle(), None).expect("unit disk is valid")
    }

    pub fn boundary(&self) -> &BoundaryCurve {
        &self.boundary
    }
    pub fn perturbation_margin(&self) -> f64 {
        self.perturbation_margin
    }
    pub fn symmetry(&self) -> Option<&SymmetryGroup> {
        self.symmetry.as_ref()
    }

    pub fn diameter(&self) -> f64 {
        self.boundary.diameter()
    }

    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        if let Some((c, r)) = self.boundary.as_circle() {
            return ((p - c).norm() - r).abs();
        }
        self.boundary.nearest(p).1
    }

    pub fn is_inside(&self, p: &Point) -> bool {
        if let Some((c, r)) = self.boundary.as_circle() {
            return (p - c).norm() < r;
        }
        self.boundary.winding_number(p) != 0
    }

    /// Interior and farther than `margin` from the boundary.
    pub fn contains(&self, p: &Point, margin: f64) -> bool {
        p.iter().all(|c| c.is_finite()) && self.is_inside(p) && self.distance_to_boundary(p) > margin
    }

    /// Rotation center for continuous-symmetry diagnostics.
    pub fn center(&self) -> Point {
        match self.boundary.as_circle() {
            Some((c, _)) => c,
            None => self.boundary.centroid(),
        }
    }

    /// Deterministic low-discrepancy points with `contains(p, margin)`.
    pub fn sample_interior(&self, count: usize, margin: f64, seed: u64) -> Result<Vec<Point>, GeometryError> {
        if count == 0 {
            return Err(GeometryError::InvalidArgument("count must be positive".into()));
        }
        let (lo, hi) = bounding_box(&self.boundary);
        let mut seq = ShiftedHalton::new(2, seed);
        let max_tries = 1000 * count + 10_000;
        let mut out = Vec::with_capacity(count);
        for _ in 0..max_tries {
            let u = seq.next_point();
            let p = Point::new(lo.x + u[0] * (hi.x - lo.x), lo.y + u[1] * (hi.y - lo.y));
            if self.contains(&p, margin) {
                out.push(p);
                if out.len() == count {
                    return Ok(out);
                }
            }
        }
        Err(GeometryError::EmptyRegion { tries: max_tries })
    }

    /// The domain `{z + eps psi(z)}` re-fit as a Fourier curve.
    pub fn apply_perturbation(&self, field: &PerturbationField, eps: f64) -> Result<DomainSpec, GeometryError> {
        if !eps.is_finite() {
            return Err(GeometryError::InvalidArgument("eps must be finite".into()));
        }
        let displacement = eps.abs() * field.sup_displacement(&self.boundary);
        if displacement >= self.perturbation_margin {
            return Err(GeometryError::PerturbationTooLarge { displacement, margin: self.perturbation_margin });
        }
        if eps == 0.0 || field.is_zero() {
            return Ok(self.clone());
        }
        let boundary = match &field.shape {
            FieldShape::IdentityDilation => self.boundary.scaled(1.0 + eps * field.amplitude)?,
            FieldShape::NormalFourier { .. } => {
                let base = self.boundary.degree();
                let degree = (4 * base).max(base + field.degree());
                let displaced = |t: f64| -> Result<Point, GeometryError> {
                    let b = self.boundary.eval(t)?;
                    Ok(b.point + eps * field.normal_component(&self.boundary, t) * b.normal)
                };
                let m = 4 * degree + 16;
                let samples = BoundaryCurve::parameters(m).map(displaced).collect::<Result<Vec<_>, _>>()?;
                let curve = BoundaryCurve::fit(&samples, degree)?;
                let check = 3 * m + 1;
                let mut residual: f64 = 0.0;
                for t in BoundaryCurve::parameters(check) {
                    residual = residual.max((curve.position(t) - displaced(t)?).norm());
                }
                if residual > REFIT_TOL {
                    return Err(GeometryError::RefitFailure { residual });
                }
                curve
            }
        };
        let symmetry = self.symmetry.filter(|g| check_invariant(&boundary, g).is_ok());
        DomainSpec::new(boundary, symmetry)
    }
}

fn bounding_box(curve: &BoundaryCurve) -> (Point, Point) {
    let pts = curve.sample(curve.node_hint());
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn default_margin(curve: &BoundaryCurve) -> f64 {
    let kappa = curve.max_abs_curvature();
    let curvature_radius = if kappa > 0.0 { 1.0 / kappa } else { f64::INFINITY };
    // Half the chord between boundary points that are far apart along the
    // curve, i.e. the narrowest neck of the domain.
    let m = curve.node_hint();
    let pts = curve.sample(m);
    let perimeter = curve.perimeter();
    let ds = perimeter / m as f64;
    let min_sep = 0.9 * PI * curvature_radius.min(perimeter / TAU);
    let mut neck = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let steps = (j - i).min(m - (j - i));
            if steps as f64 * ds >= min_sep {
                neck = neck.min(0.5 * (pts[i] - pts[j]).norm());
            }
        }
    }
    0.3 * curvature_radius.min(neck)
}

/// Checks that every group element maps the boundary onto itself.
fn check_invariant(curve: &BoundaryCurve, group: &SymmetryGroup) -> Result<(), GeometryError> {
    let pts = curve.sample(64.max(8 * curve.degree()));
    for g in group.elements().iter().skip(1) {
        for p in &pts {
            let d = curve.nearest(&(g * p)).1;
            if d > SYMMETRY_TOL {
                return Err(GeometryError::SymmetryMismatch(format!(
                    "boundary not invariant under group element {g:?}: deviation {d:.3e}"
                )));
            }
        }
    }
    Ok(())
}

/// Shape of a domain-variation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldShape {
    /// Normal component `g(t) = sum a_k cos kt + b_k sin kt` in the boundary
    /// parameter; extended inside by a cutoff annulus.
    NormalFourier { cos: Vec<f64>, sin: Vec<f64> },
    /// `psi(x) = x`.
    IdentityDilation,
}

/// A domain-variation field `psi` (or direction `phi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    #[serde(flatten)]
    pub shape: FieldShape,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Width of the boundary annulus outside which a Fourier field vanishes.
    #[serde(default = "default_cutoff")]
    pub cutoff_width: f64,
}

fn one() -> f64 {
    1.0
}
fn default_cutoff() -> f64 {
    0.3
}

impl PerturbationField {
    pub fn normal_fourier(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { shape: FieldShape::NormalFourier { cos, sin }, amplitude: 1.0, cutoff_width: default_cutoff() }
    }

    /// Normal component `cos(k t)`.
    pub fn cos_mode(k: usize) -> Self {
        let mut cos = vec![0.0; k + 1];
        cos[k] = 1.0;
        Self::normal_fourier(cos, vec![])
    }

    pub fn identity_dilation() -> Self {
        Self { shape: FieldShape::IdentityDilation, amplitude: 1.0, cutoff_width: default_cutoff() }
    }

    pub fn zero() -> Self {
        Self::normal_fourier(vec![], vec![])
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_cutoff(mut self, width: f64) -> Self {
        self.cutoff_width = width;
        self
    }

    pub fn degree(&self) -> usize {
        match &self.shape {
            FieldShape::NormalFourier { cos, sin } => cos.len().max(sin.len()).saturating_sub(1),
            FieldShape::IdentityDilation => 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
            || match &self.shape {
                FieldShape::NormalFourier { cos, sin } => cos.iter().chain(sin).all(|c| *c == 0.0),
                FieldShape::IdentityDilation => false,
            }
    }

    /// `<psi, nu>` at boundary parameter `t`.
    pub fn normal_component(&self, curve: &BoundaryCurve, t: f64) -> f64 {
        match &self.shape {
            FieldShape::NormalFourier { cos, sin } => {
                let mut g = 0.0;
                for (k, a) in cos.iter().enumerate() {
                    g += a * (k as f64 * t).cos();
                }
                for (k, b) in sin.iter().enumerate().skip(1) {
                    g += b * (k as f64 * t).sin();
                }
                self.amplitude * g
            }
            FieldShape::IdentityDilation => match curve.eval(t) {
                Ok(b) => self.amplitude * b.point.dot(&b.normal),
                Err(_) => 0.0,
            },
        }
    }

    /// Largest boundary displacement `sup |psi|` over a dense sample.
    pub fn sup_displacement(&self, curve: &BoundaryCurve) -> f64 {
        let m = curve.node_hint().max(16 * self.degree());
        BoundaryCurve::parameters(m)
            .map(|t| match &self.shape {
                FieldShape::NormalFourier { .. } => self.normal_component(curve, t).abs(),
                FieldShape::IdentityDilation => self.amplitude.abs() * curve.position(t).norm(),
            })
            .fold(0.0, f64::max)
    }

    /// The interior extension `psi(x)`.
    pub fn vector_at(&self, domain: &DomainSpec, x: &Point) -> Point {
        match &self.shape {
            FieldShape::IdentityDilation => self.amplitude * x,
            FieldShape::NormalFourier { .. } => {
                if self.is_zero() {
                    return Point::zeros();
                }
                let (t, d) = domain.boundary.nearest(x);
                if d >= self.cutoff_width {
                    return Point::zeros();
                }
                let s = d / self.cutoff_width;
                let blend = 1.0 - s * s * (3.0 - 2.0 * s);
                match domain.boundary.eval(t) {
                    Ok(b) => blend * self.normal_component(&domain.boundary, t) * b.normal,
                    Err(_) => Point::zeros(),
                }
            }
        }
    }

    /// Whether the field vanishes identically on a neighborhood of `x`.
    pub fn vanishes_near(&self, domain: &DomainSpec, x: &Point) -> bool {
        if self.is_zero() {
            return true;
        }
        match &self.shape {
            FieldShape::IdentityDilation => false,
            FieldShape::NormalFourier { .. } => domain.distance_to_boundary(x) > self.cutoff_width,
        }
    }

    /// Group average `(1/|G|) sum_g g^{-1} psi(g .)`.
    ///
    /// Requires every group element to act on the boundary parameter as a
    /// shift or a reflection `t -> c - t`, which holds for the Fourier curves
    /// built from symmetric coefficient patterns.
    pub fn equivariant_project(&self, domain: &DomainSpec, group: &SymmetryGroup) -> Result<Self, GeometryError> {
        group.validate()?;
        check_invariant(&domain.boundary, group)?;
        let (cos, sin) = match &self.shape {
            FieldShape::IdentityDilation => {
                // x -> x commutes with every orthogonal map.
                return Ok(self.clone());
            }
            FieldShape::NormalFourier { cos, sin } => (cos, sin),
        };
        let len = cos.len().max(sin.len());
        let mut acc_c = vec![0.0; len];
        let mut acc_s = vec![0.0; len];
        for g in group.elements() {
            let action = parameter_action(&domain.boundary, &g)?;
            for k in 0..len {
                let a = cos.get(k).copied().unwrap_or(0.0);
                let b = if k == 0 { 0.0 } else { sin.get(k).copied().unwrap_or(0.0) };
                let kf = k as f64;
                // Coefficients of t -> g(tau(t)) for the mode a cos kt + b sin kt.
                let (c2, s2) = match action {
                    ParameterAction::Shift(shift) => {
                        let (s, c) = (kf * shift).sin_cos();
                        (a * c + b * s, -a * s + b * c)
                    }
                    ParameterAction::Reflect(offset) => {
                        let (s, c) = (kf * offset).sin_cos();
                        (a * c + b * s, a * s - b * c)
                    }
                };
                acc_c[k] += c2;
                acc_s[k] += s2;
            }
        }
        let n = group.order() as f64;
        let clean = |v: Vec<f64>| v.into_iter().map(|c| if (c / n).abs() < 1e-15 { 0.0 } else { c / n }).collect();
        Ok(Self {
            shape: FieldShape::NormalFourier { cos: clean(acc_c), sin: clean(acc_s) },
            amplitude: self.amplitude,
            cutoff_width: self.cutoff_width,
        })
    }

    /// Normal-component Fourier coefficients, if any.
    pub fn fourier(&self) -> Option<(&[f64], &[f64])> {
        match &self.shape {
            FieldShape::NormalFourier { cos, sin } => Some((cos, sin)),
            FieldShape::IdentityDilation => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ParameterAction {
    /// `g z(t) = z(t + shift)`.
    Shift(f64),
    /// `g z(t) = z(offset - t)`.
    Reflect(f64),
}

fn parameter_action(curve: &BoundaryCurve, g: &Matrix2<f64>) -> Result<ParameterAction, GeometryError> {
    let m = 32.max(8 * curve.degree());
    let ts: Vec<f64> = BoundaryCurve::parameters(m).collect();
    let images: Vec<f64> = ts.iter().map(|t| curve.nearest(&(g * curve.position(*t))).0).collect();
    let wrap = |a: f64| (a + PI).rem_euclid(TAU) - PI;
    let consistent = |f: &dyn Fn(f64, f64) -> f64| -> Option<f64> {
        let c0 = f(ts[0], images[0]);
        ts.iter()
            .zip(&images)
            .all(|(t, s)| wrap(f(*t, *s) - c0).abs() < 1e-8)
            .then_some(c0)
    };
    if let Some(shift) = consistent(&|t, s| s - t) {
        return Ok(ParameterAction::Shift(shift));
    }
    if let Some(offset) = consistent(&|t, s| s + t) {
        return Ok(ParameterAction::Reflect(offset));
    }
    Err(GeometryError::SymmetryMismatch(
        "group element does not act on the boundary parameter by a shift or reflection".into(),
    ))
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
pub(crate) struct ShiftedHalton {
    shifts: Vec<f64>,
    bases: Vec<u64>,
    index: u64,
}

impl ShiftedHalton {
    pub(crate) fn new(dims: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shifts = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Self { shifts, bases: first_primes(dims), index: 1 }
    }

    pub(crate) fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shifts
            .iter()
            .zip(&self.bases)
            .map(|(shift, base)| (radical_inverse(i, *base) + shift).fract())
            .collect()
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|p| *p * *p <= candidate).all(|p| !candidate.is_multiple_of(*p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}
