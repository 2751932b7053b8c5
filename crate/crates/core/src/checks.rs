//! Oracle and structural diagnostics for Green engines.

use serde::Serialize;

use crate::geometry::{DomainSpec, Point};
use crate::green::{BackendChoice, GreenEngine, GreenError, GreenEvaluation};

/// Boundary distance of the oracle sample points.
pub const ORACLE_DISTANCE: f64 = 0.1;

/// `count` interior pairs at boundary distance `>= ORACLE_DISTANCE`.
pub fn sample_pairs(domain: &DomainSpec, count: usize, seed: u64) -> Result<Vec<(Point, Point)>, GreenError> {
    let pts = domain.sample_interior(2 * count, ORACLE_DISTANCE, seed).map_err(GreenError::Geometry)?;
    Ok(pts.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

/// Norm-wise relative errors of one engine against a reference, per
/// quantity family, over a set of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleErrors {
    pub value: f64,
    pub gradient: f64,
    pub hessian: f64,
}

impl OracleErrors {
    pub fn max(&self) -> f64 {
        self.value.max(self.gradient).max(self.hessian)
    }
}

fn families(e: &GreenEvaluation) -> [Vec<f64>; 3] {
    [
        vec![e.value],
        vec![e.grad_x.x, e.grad_x.y, e.grad_y.x, e.grad_y.y],
        e.hess_xx.iter().chain(e.hess_yy.iter()).chain(e.hess_xy.iter()).copied().collect(),
    ]
}

pub fn compare(
    engine: &GreenEngine,
    reference: &GreenEngine,
    pairs: &[(Point, Point)],
) -> Result<OracleErrors, GreenError> {
    let mut diff = [0.0; 3];
    let mut norm = [0.0; 3];
    for (x, y) in pairs {
        let a = families(&engine.regular_part(x, y)?);
        let b = families(&reference.regular_part(x, y)?);
        for f in 0..3 {
            for (u, v) in a[f].iter().zip(&b[f]) {
                diff[f] += (u - v) * (u - v);
                norm[f] += v * v;
            }
        }
    }
    let rel = |f: usize| if norm[f] > 0.0 { (diff[f] / norm[f]).sqrt() } else { diff[f].sqrt() };
    Ok(OracleErrors { value: rel(0), gradient: rel(1), hessian: rel(2) })
}

/// Integral backend on a disk against its closed form.
pub fn disk_oracle(domain: &DomainSpec, nodes: usize, pairs: &[(Point, Point)]) -> Result<OracleErrors, GreenError> {
    let integral = GreenEngine::build(domain, nodes, BackendChoice::Integral)?;
    let closed = GreenEngine::build(domain, nodes, BackendChoice::ClosedForm)?;
    compare(&integral, &closed, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralErrors {
    /// `max |H(x,y) - H(y,x)|`.
    pub symmetry: f64,
    /// `max |tr hess_x H| / |hess_x H|_F`.
    pub harmonicity: f64,
    /// `max |1 + ∮ d_nu G(x,.)|`.
    pub normalization: f64,
}

pub fn structural(engine: &GreenEngine, pairs: &[(Point, Point)]) -> Result<StructuralErrors, GreenError> {
    let mut out = StructuralErrors { symmetry: 0.0, harmonicity: 0.0, normalization: 0.0 };
    for (x, y) in pairs {
        let a = engine.regular_part(x, y)?;
        let b = engine.regular_part(y, x)?;
        out.symmetry = out.symmetry.max((a.value - b.value).abs());
        for h in [a.hess_xx, b.hess_xx] {
            let f = h.norm();
            if f > 0.0 {
                out.harmonicity = out.harmonicity.max(h.trace().abs() / f);
            }
        }
        for p in [x, y] {
            let t = engine.boundary_normal_derivative(p)?;
            let mass = engine.quadrature().integrate(t.values.iter().copied());
            out.normalization = out.normalization.max((1.0 + mass).abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_oracle_is_accurate() {
        let d = DomainSpec::unit_disk();
        let pairs = sample_pairs(&d, 5, 1).unwrap();
        assert_eq!(pairs.len(), 5);
        assert!(disk_oracle(&d, 256, &pairs).unwrap().max() < 1e-8);
        let e = GreenEngine::build(&d, 256, BackendChoice::ClosedForm).unwrap();
        let s = structural(&e, &pairs).unwrap();
        assert!(s.symmetry < 1e-12 && s.harmonicity < 1e-10 && s.normalization < 1e-10);
    }
}
