//! Command-line harness. Exit codes: 0 success, 1 quantitative failure,
//! 2 input or validation error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checks;
use crate::critical::{find_critical_points, newton, CriticalPoint, SearchConfig};
use crate::dynamics::{conservation_report, integrate, DynamicsConfig, Integrator};
use crate::geometry::{BoundaryCurve, DomainSpec, GeometryError, PerturbationField, Point, SymmetryGroup};
use crate::green::{BackendChoice, GreenEngine, GreenError, MIN_NODES};
use crate::kr::{default_margin, Configuration, InteractionSpec, VortexStrengths};
use crate::report::{svg_polyline, write_json};
use crate::shape::{continue_critical_point, fd_check, ContinuationOptions, EngineSettings, Quantity, ShapeError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

const ORACLE_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-7;
const HARMONICITY_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "kr-morse", version, about = "Green functions, Kirchhoff-Routh critical points and shape derivatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Disk oracle and structural checks of the Green engine.
    GreenCheck(GreenCheckArgs),
    /// Multi-start search for critical points of f_Omega.
    FindCritical(FindCriticalArgs),
    /// Analytic shape derivative against finite differences.
    ShapeVerify(ShapeVerifyArgs),
    /// Continuation of a critical point under a domain perturbation.
    PerturbStudy(PerturbStudyArgs),
    /// Point-vortex trajectory.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Domain JSON file.
    #[arg(long)]
    pub domain: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::green::DEFAULT_NODES)]
    pub nodes: usize,
    /// auto, closed-form or integral.
    #[arg(long, default_value = "auto")]
    pub backend: BackendChoice,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GreenCheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of interior test pairs.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct FindCriticalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Vortex JSON file.
    #[arg(long)]
    pub vortices: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub starts: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0.05)]
    pub boundary_margin: f64,
    /// Defaults to 1e-3 x the domain diameter.
    #[arg(long)]
    pub collision_margin: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub dedup_radius: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FieldArgs {
    /// Field JSON file, or `cos:K`, `sin:K`, `dilation`, `zero`.
    #[arg(long)]
    pub field: String,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ShapeVerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub field: FieldArgs,
    /// regular-part, robin or grad-f.
    #[arg(long, default_value = "regular-part")]
    pub quantity: String,
    /// First point, `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub x: String,
    /// Second point for regular-part; defaults to the first.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Vortex JSON file (grad-f).
    #[arg(long)]
    pub vortices: Option<PathBuf>,
    /// Decreasing eps ladder.
    #[arg(long, default_value = "1e-2,5e-3,2.5e-3")]
    pub eps: String,
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbStudyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(long)]
    pub vortices: PathBuf,
    /// Monotone eps grid.
    #[arg(long, default_value = "0,0.005,0.01,0.015,0.02,0.025,0.03,0.035,0.04,0.045,0.05", allow_hyphen_values = true)]
    pub eps_grid: String,
    /// Project the field onto equivariance first, e.g. `cyclic:3`.
    #[arg(long)]
    pub equivariant: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Skip the SVG plot.
    #[arg(long)]
    pub no_plot: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vortices: PathBuf,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// midpoint or rk4.
    #[arg(long, default_value = "midpoint")]
    pub integrator: String,
    #[arg(long, default_value_t = 1e-14)]
    pub solve_tolerance: f64,
    /// Trajectories stop when a vortex comes closer to the boundary.
    #[arg(long, default_value_t = 0.0)]
    pub boundary_margin: f64,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

/// Domain file layouts.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum DomainFile {
    FourierCurve {
        cos_x: Vec<f64>,
        sin_x: Vec<f64>,
        cos_y: Vec<f64>,
        sin_y: Vec<f64>,
        #[serde(default)]
        symmetry: Option<SymmetryGroup>,
        #[serde(default)]
        perturbation_margin: Option<f64>,
    },
    Disk {
        #[serde(default)]
        center: Option<Point>,
        #[serde(default = "unit")]
        radius: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct VortexFile {
    lambda: Vec<f64>,
    #[serde(default)]
    points: Option<Vec<Point>>,
    #[serde(default)]
    interaction: Option<String>,
}

struct Vortices {
    strengths: VortexStrengths,
    points: Option<Configuration>,
    spec: InteractionSpec,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn domain_from_file(file: DomainFile) -> Result<DomainSpec, GeometryError> {
    match file {
        DomainFile::FourierCurve { cos_x, sin_x, cos_y, sin_y, symmetry, perturbation_margin } => {
            let curve = BoundaryCurve::new(cos_x, sin_x, cos_y, sin_y)?;
            match perturbation_margin {
                Some(m) => DomainSpec::with_margin(curve, m, symmetry),
                None => DomainSpec::new(curve, symmetry),
            }
        }
        DomainFile::Disk { center, radius } => {
            DomainSpec::new(BoundaryCurve::circle(center.unwrap_or_else(Point::zeros), radius)?, None)
        }
    }
}

fn domain(common: &Common) -> Result<DomainSpec, CliError> {
    let file: DomainFile = read_json(&common.domain)?;
    domain_from_file(file).map_err(input)
}

fn vortices(path: &Path) -> Result<Vortices, CliError> {
    let file: VortexFile = read_json(path)?;
    let strengths = VortexStrengths::new(file.lambda).map_err(input)?;
    let spec = match file.interaction.as_deref() {
        None => InteractionSpec::KirchhoffRouth,
        Some(name) => InteractionSpec::parse(name).ok_or_else(|| CliError::Input(format!("unknown interaction `{name}`")))?,
    };
    let points = file.points.map(Configuration);
    if let Some(p) = &points {
        if p.len() != strengths.len() {
            return Err(CliError::Input(format!("{} points for {} strengths", p.len(), strengths.len())));
        }
    }
    Ok(Vortices { strengths, points, spec })
}

fn engine(common: &Common, domain: &DomainSpec) -> Result<GreenEngine, CliError> {
    if common.nodes < MIN_NODES {
        return Err(CliError::Input(format!("--nodes {} is below the minimum {MIN_NODES}", common.nodes)));
    }
    GreenEngine::build(domain, common.nodes, common.backend).map_err(|e| match e {
        GreenError::Discretization(_) => CliError::Failure(e.to_string()),
        other => input(other),
    })
}

fn field(args: &FieldArgs) -> Result<PerturbationField, CliError> {
    let spec = args.field.as_str();
    let mut f = if let Some(k) = spec.strip_prefix("cos:") {
        PerturbationField::cos_mode(k.parse().map_err(|_| CliError::Input(format!("bad field `{spec}`")))?)
    } else if let Some(k) = spec.strip_prefix("sin:") {
        let k: usize = k.parse().map_err(|_| CliError::Input(format!("bad field `{spec}`")))?;
        if k == 0 {
            return Err(CliError::Input("sin:0 is the zero field; use `zero`".into()));
        }
        let mut sin = vec![0.0; k + 1];
        sin[k] = 1.0;
        PerturbationField::normal_fourier(vec![0.0], sin)
    } else if spec == "dilation" {
        PerturbationField::identity_dilation()
    } else if spec == "zero" {
        PerturbationField::zero()
    } else {
        read_json(Path::new(spec))?
    };
    if let Some(a) = args.amplitude {
        f = f.with_amplitude(a);
    }
    if let Some(c) = args.cutoff {
        f = f.with_cutoff(c);
    }
    if !(f.amplitude.is_finite() && f.cutoff_width > 0.0) {
        return Err(CliError::Input("field amplitude must be finite and cutoff positive".into()));
    }
    Ok(f)
}

fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Input(format!("bad number `{s}` in `{text}`"))))
        .collect()
}

fn parse_point(text: &str) -> Result<Point, CliError> {
    match parse_list(text)?.as_slice() {
        [x, y] => Ok(Point::new(*x, *y)),
        _ => Err(CliError::Input(format!("expected `x,y`, got `{text}`"))),
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: serde_json::Value,
    version: &'a str,
    duration_seconds: f64,
    outputs: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), body).map_err(input)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        write_json(&self.dir.join(name), value).map_err(input)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn manifest(self, command: &str, config: serde_json::Value, started: Instant) -> Result<(), CliError> {
        let manifest = RunManifest {
            command,
            config,
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: started.elapsed().as_secs_f64(),
            outputs: self.files,
        };
        write_json(&self.dir.join("manifest.json"), &manifest).map_err(input)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let result = match &cli.command {
        Command::GreenCheck(a) => green_check(a, started),
        Command::FindCritical(a) => find_critical(a, started),
        Command::ShapeVerify(a) => shape_verify(a, started),
        Command::PerturbStudy(a) => perturb_study(a, started),
        Command::Simulate(a) => simulate(a, started),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            match &e {
                CliError::Input(m) => eprintln!("error: {m}"),
                CliError::Failure(m) => eprintln!("failed: {m}"),
            }
            e.code()
        }
    }
}

fn green_check(args: &GreenCheckArgs, started: Instant) -> Result<(), CliError> {
    let domain = domain(&args.common)?;
    let engine = engine(&args.common, &domain)?;
    let pairs = checks::sample_pairs(&domain, args.points, args.common.seed).map_err(input)?;
    let mut failures = Vec::new();
    let mut report = json!({
        "backend": engine.backend(),
        "nodes": engine.nodes(),
        "self_test_error": engine.self_test_error(),
        "condition": engine.condition(),
        "pairs": pairs.len(),
    });
    if domain.boundary().as_circle().is_some() {
        let oracle = checks::disk_oracle(&domain, args.common.nodes, &pairs).map_err(|e| CliError::Failure(e.to_string()))?;
        if oracle.max() > ORACLE_TOL {
            failures.push(format!("disk oracle relative error {:.3e} > {ORACLE_TOL:.0e}", oracle.max()));
        }
        report["disk_oracle"] = json!(oracle);
    }
    let mut structural = serde_json::Map::new();
    for choice in [BackendChoice::ClosedForm, BackendChoice::Integral] {
        let e = match GreenEngine::build(&domain, args.common.nodes, choice) {
            Ok(e) => e,
            Err(GreenError::NotADisk) => continue,
            Err(e) => return Err(CliError::Failure(e.to_string())),
        };
        let s = checks::structural(&e, &pairs).map_err(|e| CliError::Failure(e.to_string()))?;
        for (name, value, tol) in [
            ("symmetry", s.symmetry, SYMMETRY_TOL),
            ("harmonicity", s.harmonicity, HARMONICITY_TOL),
            ("normalization", s.normalization, NORMALIZATION_TOL),
        ] {
            if !(value <= tol) {
                failures.push(format!("{choice:?} {name} {value:.3e} > {tol:.0e}"));
            }
        }
        let key = match e.backend() {
            crate::green::BackendKind::ClosedForm => "closed_form",
            crate::green::BackendKind::Integral => "integral",
        };
        structural.insert(key.to_string(), json!(s));
    }
    report["structural"] = serde_json::Value::Object(structural);
    report["failures"] = json!(failures);
    report["passed"] = json!(failures.is_empty());
    let mut out = Outputs::new(&args.common.out)?;
    out.json("green_check.json", &report)?;
    out.manifest("green-check", json!(args), started)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failure(failures.join("; ")))
    }
}

fn find_critical(args: &FindCriticalArgs, started: Instant) -> Result<(), CliError> {
    let domain = domain(&args.common)?;
    let v = vortices(&args.vortices)?;
    let engine = engine(&args.common, &domain)?;
    let config = SearchConfig {
        starts: args.starts,
        seed: args.common.seed,
        boundary_margin: args.boundary_margin,
        collision_margin: args.collision_margin.unwrap_or_else(|| default_margin(&domain)),
        tolerance: args.tolerance,
        dedup_radius: args.dedup_radius,
        ..SearchConfig::default()
    };
    config.validate().map_err(input)?;
    let report = find_critical_points(&engine, &v.strengths, &v.spec, &config).map_err(|e| CliError::Failure(e.to_string()))?;
    let mut out = Outputs::new(&args.common.out)?;
    out.json("critical_points.json", &report)?;
    out.text("critical_points.csv", &report.to_csv())?;
    out.manifest("find-critical", json!({ "args": args, "search": config }), started)
}

fn shape_verify(args: &ShapeVerifyArgs, started: Instant) -> Result<(), CliError> {
    let domain = domain(&args.common)?;
    if args.common.nodes < MIN_NODES {
        return Err(CliError::Input(format!("--nodes {} is below the minimum {MIN_NODES}", args.common.nodes)));
    }
    let f = field(&args.field)?;
    let ladder = parse_list(&args.eps)?;
    let x = parse_point(&args.x)?;
    let quantity = match args.quantity.as_str() {
        "regular-part" | "regular_part" | "h" => {
            let y = args.y.as_deref().map(parse_point).transpose()?.unwrap_or(x);
            Quantity::RegularPart { x, y }
        }
        "robin" => Quantity::Robin { x },
        "grad-f" | "grad_f" => {
            let path = args.vortices.as_ref().ok_or_else(|| CliError::Input("grad-f needs --vortices".into()))?;
            let v = vortices(path)?;
            let configuration = v.points.ok_or_else(|| CliError::Input("vortex file has no points".into()))?;
            Quantity::GradF { strengths: v.strengths, spec: v.spec, configuration }
        }
        other => return Err(CliError::Input(format!("unknown quantity `{other}`"))),
    };
    let settings = EngineSettings { nodes: args.common.nodes, backend: args.common.backend };
    let report = fd_check(&domain, &quantity, &f, &ladder, &settings, args.tolerance).map_err(|e| match e {
        ShapeError::Green(GreenError::Discretization(_)) | ShapeError::Geometry(GeometryError::RefitFailure { .. }) => {
            CliError::Failure(e.to_string())
        }
        other => input(other),
    })?;
    let mut out = Outputs::new(&args.common.out)?;
    out.json("shape_report.json", &report)?;
    out.manifest("shape-verify", json!({ "args": args, "field": f }), started)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "finite-difference validation failed (relative error {:?}, order {:?})",
            report.relative_error, report.observed_order
        )))
    }
}

fn start_point(
    engine: &GreenEngine,
    v: &Vortices,
    seed: u64,
    tolerance: f64,
) -> Result<CriticalPoint, CliError> {
    let domain = engine.domain();
    let config = SearchConfig { seed, tolerance, ..SearchConfig::for_domain(domain) };
    match &v.points {
        Some(p) => {
            let outcome = newton(engine, &v.strengths, &v.spec, p, &config.newton())
                .map_err(|e| CliError::Failure(format!("start configuration did not converge: {e}")))?;
            CriticalPoint::from_outcome(domain, outcome).map_err(|e| CliError::Failure(e.to_string()))
        }
        None => {
            let report = find_critical_points(engine, &v.strengths, &v.spec, &config)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            report.points.into_iter().next().ok_or_else(|| CliError::Failure("no critical point to continue".into()))
        }
    }
}

fn perturb_study(args: &PerturbStudyArgs, started: Instant) -> Result<(), CliError> {
    let domain = domain(&args.common)?;
    let v = vortices(&args.vortices)?;
    let engine = engine(&args.common, &domain)?;
    let mut f = field(&args.field)?;
    if let Some(g) = &args.equivariant {
        let group = SymmetryGroup::parse(g).map_err(input)?;
        f = f.equivariant_project(&domain, &group).map_err(input)?;
    }
    let grid = parse_list(&args.eps_grid)?;
    let sup = f.sup_displacement(domain.boundary());
    if let Some(e) = grid.iter().find(|e| e.abs() * sup >= domain.perturbation_margin()) {
        return Err(CliError::Input(format!(
            "eps {e} exceeds the perturbation margin {:.3e}",
            domain.perturbation_margin()
        )));
    }
    let start = start_point(&engine, &v, args.common.seed, args.tolerance)?;
    let mut options = ContinuationOptions {
        engine: EngineSettings { nodes: args.common.nodes, backend: args.common.backend },
        ..Default::default()
    };
    options.newton.tolerance = args.tolerance;
    options.newton.collision_margin = default_margin(&domain);
    let trace = continue_critical_point(&domain, &v.strengths, &v.spec, &f, &grid, &start, &options).map_err(input)?;
    let mut out = Outputs::new(&args.common.out)?;
    out.json("continuation.json", &json!({ "field": f, "start": start, "trace": trace }))?;
    out.text("continuation.csv", &trace.to_csv())?;
    if !args.no_plot {
        let xs: Vec<f64> = trace.steps.iter().map(|s| s.eps).collect();
        let ys: Vec<f64> = trace.steps.iter().map(|s| s.min_abs_eigenvalue.max(1e-300).log10()).collect();
        out.text("margin.svg", &svg_polyline(&xs, &ys, "Hessian margin along the continuation", "eps", "log10 min |eig|"))?;
    }
    out.manifest("perturb-study", json!({ "args": args, "field": f, "grid": grid }), started)?;
    match &trace.diagnostic {
        None => Ok(()),
        Some(d) => Err(CliError::Failure(d.clone())),
    }
}

fn simulate(args: &SimulateArgs, started: Instant) -> Result<(), CliError> {
    let integrator: Integrator = args.integrator.parse().map_err(CliError::Input)?;
    let config = DynamicsConfig {
        integrator,
        dt: args.dt,
        horizon: args.horizon,
        tolerance: args.solve_tolerance,
        boundary_margin: args.boundary_margin,
        ..Default::default()
    };
    config.validate().map_err(input)?;
    let domain = domain(&args.common)?;
    let v = vortices(&args.vortices)?;
    let x0 = v.points.clone().ok_or_else(|| CliError::Input("vortex file has no points".into()))?;
    let engine = engine(&args.common, &domain)?;
    let traj = integrate(&engine, &v.strengths, &v.spec, &x0, &config).map_err(input)?;
    let conservation = conservation_report(&traj, domain.boundary().as_circle().is_some());
    let mut out = Outputs::new(&args.common.out)?;
    out.text("trajectory.csv", &traj.to_csv())?;
    out.json("conservation.json", &json!({ "report": conservation, "samples": traj.times.len(), "diagnostic": traj.diagnostic }))?;
    out.manifest("simulate", json!({ "args": args, "dynamics": config }), started)?;
    match &traj.diagnostic {
        None => Ok(()),
        Some(d) => Err(CliError::Failure(d.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_points() {
        assert_eq!(parse_list("1e-2, 5e-3").unwrap(), vec![1e-2, 5e-3]);
        assert!(parse_list("1,x").is_err());
        assert_eq!(parse_point("0.3,0").unwrap(), Point::new(0.3, 0.0));
        assert!(parse_point("1").is_err());
    }

    #[test]
    fn inline_fields() {
        let args = |s: &str| FieldArgs { field: s.into(), amplitude: Some(0.5), cutoff: None };
        let f = field(&args("cos:3")).unwrap();
        assert_eq!(f.amplitude, 0.5);
        assert_eq!(f.fourier().unwrap().0, &[0.0, 0.0, 0.0, 1.0]);
        assert!(field(&args("sin:0")).is_err());
        assert!(field(&args("zero")).unwrap().is_zero());
    }

    #[test]
    fn domain_files() {
        let disk: DomainFile = serde_json::from_str(r#"{"type":"disk","radius":2}"#).unwrap();
        assert_eq!(domain_from_file(disk).unwrap().boundary().as_circle().unwrap().1, 2.0);
        let curve: DomainFile = serde_json::from_str(
            r#"{"type":"fourier_curve","cos_x":[0,1],"sin_x":[0,0],"cos_y":[0,0],"sin_y":[0,1],
                "symmetry":{"kind":"cyclic","order":3}}"#,
        )
        .unwrap();
        assert!(domain_from_file(curve).unwrap().symmetry().is_some());
    }
}
