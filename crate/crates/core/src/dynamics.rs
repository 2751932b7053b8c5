//! Point-vortex dynamics `lambda_k x_k' = J grad_{x_k} f_Omega`, with `J` the
//! rotation by `+pi/2`.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::green::GreenEngine;
use crate::kr::{check_admissible, f_omega, Configuration, EvaluationResult, InteractionSpec, KrError, VortexStrengths};
use crate::report::{csv_float, CsvTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Kr(#[from] KrError),
    #[error("initial configuration is not admissible")]
    Inadmissible,
    #[error("invalid dynamics configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    ImplicitMidpoint,
}

impl FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "midpoint" | "implicit_midpoint" | "implicit-midpoint" => Ok(Integrator::ImplicitMidpoint),
            other => Err(format!("unknown integrator '{other}' (expected rk4 or midpoint)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsConfig {
    pub integrator: Integrator,
    pub dt: f64,
    pub horizon: f64,
    /// Step-norm tolerance of the implicit Newton solve.
    pub tolerance: f64,
    pub max_newton: usize,
    pub boundary_margin: f64,
    pub collision_margin: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::ImplicitMidpoint,
            dt: 1e-3,
            horizon: 1.0,
            tolerance: 1e-14,
            max_newton: 30,
            boundary_margin: 0.0,
            collision_margin: 1e-6,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidConfig(m.into()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("time step must be positive");
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return bad("horizon must be at least one time step");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }
}

fn rotate_blocks(v: &DVector<f64>, scale: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (k, s) in scale.iter().enumerate() {
        out[2 * k] = -v[2 * k + 1] / s;
        out[2 * k + 1] = v[2 * k] / s;
    }
    out
}

/// `x_k' = (1/lambda_k) J grad_{x_k} f_Omega`.
pub fn velocity(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &Configuration,
) -> Result<DVector<f64>, DynamicsError> {
    let eval = f_omega(engine, strengths, spec, x, 0.0)?;
    Ok(rotate_blocks(&eval.gradient, strengths.as_slice()))
}

fn velocity_jacobian(eval: &EvaluationResult, strengths: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(eval.hessian.nrows(), eval.hessian.ncols());
    for (k, s) in strengths.iter().enumerate() {
        for c in 0..eval.hessian.ncols() {
            out[(2 * k, c)] = -eval.hessian[(2 * k + 1, c)] / s;
            out[(2 * k + 1, c)] = eval.hessian[(2 * k, c)] / s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub configurations: Vec<Configuration>,
    pub hamiltonian: Vec<f64>,
    /// `sum_k lambda_k |x_k - c|^2` about the domain center `c`.
    pub angular_impulse: Vec<f64>,
    pub diagnostic: Option<String>,
}

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let n = self.configurations.first().map_or(0, |c| c.len());
        let mut header = vec!["t".to_string()];
        for k in 1..=n {
            header.push(format!("x{k}"));
            header.push(format!("y{k}"));
        }
        header.extend(["H", "angular_impulse"].map(String::from));
        let mut table = CsvTable::new(header);
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![csv_float(*t)];
            row.extend(self.configurations[i].points().iter().flat_map(|p| [csv_float(p.x), csv_float(p.y)]));
            row.push(csv_float(self.hamiltonian[i]));
            row.push(csv_float(self.angular_impulse[i]));
            table.push(row);
        }
        table.render()
    }
}

/// Integrates the vortex system from `x0`, sampling every step.
pub fn integrate(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x0: &Configuration,
    config: &DynamicsConfig,
) -> Result<Trajectory, DynamicsError> {
    config.validate()?;
    let domain = engine.domain();
    let center = domain.center();
    let lam = strengths.as_slice();
    let boundary_margin = config.boundary_margin.max(engine.contract_distance());
    let admissible =
        |x: &Configuration| check_admissible(domain, spec, x, boundary_margin, config.collision_margin).admissible;
    if !admissible(x0) {
        return Err(DynamicsError::Inadmissible);
    }
    let impulse = |x: &Configuration| -> f64 {
        x.points().iter().zip(lam).map(|(p, l)| l * (p - center).norm_squared()).sum()
    };
    let eval0 = f_omega(engine, strengths, spec, x0, config.collision_margin)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        configurations: vec![x0.clone()],
        hamiltonian: vec![eval0.value],
        angular_impulse: vec![impulse(x0)],
        diagnostic: None,
    };
    let steps = (config.horizon / config.dt - 1e-9).ceil() as usize;
    let mut x = x0.to_vector();
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { config.horizon - t } else { config.dt };
        let next = match config.integrator {
            Integrator::Rk4 => rk4_step(engine, strengths, spec, &x, h),
            Integrator::ImplicitMidpoint => midpoint_step(engine, strengths, spec, &x, h, config),
        };
        let next = match next {
            Ok(v) => v,
            Err(e) => {
                traj.diagnostic = Some(format!("step {step} at t = {t}: {e}"));
                break;
            }
        };
        let cfg = Configuration::from_slice(next.as_slice());
        if !admissible(&cfg) {
            traj.diagnostic = Some(format!("configuration left the admissible set at t = {}", t + h));
            break;
        }
        let value = match f_omega(engine, strengths, spec, &cfg, config.collision_margin) {
            Ok(e) => e.value,
            Err(e) => {
                traj.diagnostic = Some(format!("evaluation failed at t = {}: {e}", t + h));
                break;
            }
        };
        t = if step == steps { config.horizon } else { step as f64 * config.dt };
        x = next;
        traj.times.push(t);
        traj.hamiltonian.push(value);
        traj.angular_impulse.push(impulse(&cfg));
        traj.configurations.push(cfg);
    }
    Ok(traj)
}

fn vel(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    velocity(engine, strengths, spec, &Configuration::from_slice(x.as_slice()))
}

fn rk4_step(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &DVector<f64>,
    h: f64,
) -> Result<DVector<f64>, DynamicsError> {
    let k1 = vel(engine, strengths, spec, x)?;
    let k2 = vel(engine, strengths, spec, &(x + 0.5 * h * &k1))?;
    let k3 = vel(engine, strengths, spec, &(x + 0.5 * h * &k2))?;
    let k4 = vel(engine, strengths, spec, &(x + h * &k3))?;
    Ok(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Solves `y = x + h v((x + y)/2)` by Newton's method.
fn midpoint_step(
    engine: &GreenEngine,
    strengths: &VortexStrengths,
    spec: &InteractionSpec,
    x: &DVector<f64>,
    h: f64,
    config: &DynamicsConfig,
) -> Result<DVector<f64>, DynamicsError> {
    let lam = strengths.as_slice();
    let mut y = x + h * vel(engine, strengths, spec, x)?;
    for _ in 0..config.max_newton {
        let mid = Configuration::from_slice(((x + &y) * 0.5).as_slice());
        let eval = f_omega(engine, strengths, spec, &mid, 0.0)?;
        let v = rotate_blocks(&eval.gradient, lam);
        let residual = &y - x - h * v;
        let jac = DMatrix::identity(y.len(), y.len()) - (0.5 * h) * velocity_jacobian(&eval, lam);
        let delta = jac
            .lu()
            .solve(&residual)
            .ok_or_else(|| DynamicsError::InvalidConfig("singular implicit-midpoint Jacobian".into()))?;
        y -= &delta;
        if delta.norm() <= config.tolerance * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(DynamicsError::InvalidConfig(format!("implicit solve did not converge in {} iterations", config.max_newton)))
}

/// Largest deviations of the conserved quantities from their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    pub hamiltonian_drift: f64,
    /// Present when the domain is a disk.
    pub angular_impulse_drift: Option<f64>,
}

pub fn conservation_report(trajectory: &Trajectory, rotation_symmetric: bool) -> ConservationReport {
    let drift = |v: &[f64]| v.first().map_or(0.0, |v0| v.iter().fold(0.0f64, |m, x| m.max((x - v0).abs())));
    ConservationReport {
        hamiltonian_drift: drift(&trajectory.hamiltonian),
        angular_impulse_drift: rotation_symmetric.then(|| drift(&trajectory.angular_impulse)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, Point};
    use crate::green::BackendChoice;

    fn disk() -> GreenEngine {
        GreenEngine::build(&DomainSpec::unit_disk(), 256, BackendChoice::Auto).unwrap()
    }

    #[test]
    fn single_vortex_moves_tangentially() {
        let e = disk();
        let x = Configuration(vec![Point::new(0.5, 0.0)]);
        let lam = VortexStrengths::new(vec![1.0]).unwrap();
        let v = velocity(&e, &lam, &InteractionSpec::KirchhoffRouth, &x).unwrap();
        assert!(v[0].abs() < 1e-10);
        let lam2 = VortexStrengths::new(vec![2.0]).unwrap();
        let v2 = velocity(&e, &lam2, &InteractionSpec::KirchhoffRouth, &x).unwrap();
        assert!((v2[1] - 2.0 * v[1]).abs() < 1e-14);
    }

    #[test]
    fn velocity_orthogonal_to_gradient() {
        let e = disk();
        let x = Configuration(vec![Point::new(0.3, 0.1), Point::new(-0.2, 0.4)]);
        let lam = VortexStrengths::new(vec![1.0, 0.5]).unwrap();
        let g = f_omega(&e, &lam, &InteractionSpec::KirchhoffRouth, &x, 0.0).unwrap().gradient;
        let v = velocity(&e, &lam, &InteractionSpec::KirchhoffRouth, &x).unwrap();
        assert!(v.dot(&g).abs() < 1e-12);
    }

    #[test]
    fn constant_trajectory_has_no_drift() {
        let t = Trajectory {
            times: vec![0.0, 1.0],
            configurations: vec![Configuration(vec![Point::zeros()]); 2],
            hamiltonian: vec![1.0, 1.0],
            angular_impulse: vec![0.0, 0.0],
            diagnostic: None,
        };
        let r = conservation_report(&t, true);
        assert_eq!((r.hamiltonian_drift, r.angular_impulse_drift), (0.0, Some(0.0)));
    }

    #[test]
    fn config_validation() {
        assert!(DynamicsConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(DynamicsConfig { horizon: 1e-4, ..Default::default() }.validate().is_err());
        assert!(DynamicsConfig::default().validate().is_ok());
    }
}
