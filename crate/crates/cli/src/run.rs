//! Experiment dispatch and artifact writing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use elastic_cloak::analysis::{
    self, CloakFamily, ContrastSweepConfig, DefectSweepConfig, LayeredComparisonConfig, NearCloakConfig,
    SweepResult,
};
use elastic_cloak::fem::{self, output, BoundaryCondition, CoefficientField, Space, TensorSource};
use elastic_cloak::layered::{build_layered_cloak_with, symmetrize_cosserat, Realization, REALIZABILITY_TOL};
use elastic_cloak::mesh::{boundary, build_mesh, region, GeometrySpec};
use elastic_cloak::par;
use elastic_cloak::transform::{cosserat_cloak_polar, willis_cloak_polar, PolarProfile};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Profile,
    Layers,
    Solve,
    ContrastSweep,
    DefectSweep,
    Nearcloak,
    LayeredCompare,
    Convergence,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Layers => "layers",
            Command::Solve => "solve",
            Command::ContrastSweep => "contrast-sweep",
            Command::DefectSweep => "defect-sweep",
            Command::Nearcloak => "nearcloak",
            Command::LayeredCompare => "layered-compare",
            Command::Convergence => "convergence",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Model(elastic_cloak::Error),
    Io(std::io::Error),
}

impl RunError {
    /// Process exit code for this failure class. Failed checks exit with 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(_) => 3,
            RunError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e}"),
            RunError::Model(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<elastic_cloak::Error> for RunError {
    fn from(e: elastic_cloak::Error) -> Self {
        RunError::Model(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Io(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub name: String,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub command: String,
    pub config_hash: String,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub outputs: Vec<String>,
    pub steps: Vec<Step>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    config: String,
    versions: Versions,
    passed: bool,
    failed_checks: &'a [String],
    outputs: &'a [String],
    steps: &'a [Step],
}

#[derive(Serialize)]
struct Versions {
    elastic_cloak: &'static str,
    cli: &'static str,
    parallel: bool,
}

/// SHA-256 of the serialized configuration, leaving out `out` and `threads`,
/// which do not change any result.
pub fn config_hash(cfg: &RunConfig) -> String {
    let text: String = cfg
        .serialize()
        .lines()
        .filter(|l| !l.starts_with("out =") && !l.starts_with("threads ="))
        .flat_map(|l| [l, "\n"])
        .collect();
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<String>,
    steps: Vec<Step>,
    failed: Vec<String>,
}

impl Writer {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>, RunError> {
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), RunError> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        Ok(())
    }

    fn step<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.steps.push(Step {
            name: name.into(),
            runtime_s: t.elapsed().as_secs_f64(),
        });
        out
    }

    fn sweep(&mut self, r: &SweepResult, header: &str) -> Result<(), RunError> {
        let mut w = self.file("sweep.csv")?;
        writeln!(w, "{header}")?;
        for p in &r.points {
            let refined = p.refined_distance.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(
                w,
                "{:e},{:e},{:e},{refined},{}",
                p.parameter, p.distance, p.magnitude_integral, p.fitted
            )?;
        }
        drop(w);
        self.json("summary.json", r)?;
        for msg in &r.warnings {
            eprintln!("warning: {msg}");
        }
        self.failed.extend(r.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()));
        Ok(())
    }
}

/// Runs `cmd` and writes every artifact plus `manifest.json` into `cfg.out`.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let dir = Path::new(&cfg.out).to_path_buf();
    fs::create_dir_all(&dir)?;
    let mut w = Writer {
        dir,
        outputs: Vec::new(),
        steps: Vec::new(),
        failed: Vec::new(),
    };
    par::with_threads(cfg.threads, || dispatch(cmd, cfg, &mut w))?;
    let hash = config_hash(cfg);
    let outcome = Outcome {
        command: cmd.name().into(),
        config_hash: hash.clone(),
        passed: w.failed.is_empty(),
        failed_checks: w.failed.clone(),
        outputs: w.outputs.clone(),
        steps: w.steps.clone(),
    };
    let manifest = Manifest {
        command: cmd.name(),
        config_hash: &hash,
        config: cfg.serialize(),
        versions: Versions {
            elastic_cloak: elastic_cloak::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
            parallel: par::is_parallel(),
        },
        passed: outcome.passed,
        failed_checks: &outcome.failed_checks,
        outputs: &outcome.outputs,
        steps: &outcome.steps,
    };
    let mut f = BufWriter::new(File::create(w.dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    Ok(outcome)
}

fn dispatch(cmd: Command, cfg: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    match cmd {
        Command::Profile => profile(cfg, w),
        Command::Layers => layers(cfg, w),
        Command::Solve => solve(cfg, w),
        Command::ContrastSweep => {
            let c = ContrastSweepConfig {
                shape: cfg
                    .inclusion_shape()
                    .ok_or_else(|| ConfigError::from_key("shape", "contrast sweeps need an inclusion"))?,
                direction: cfg.direction,
                etas: cfg.eta_list.clone(),
                background: cfg.background,
                inclusion: cfg.inclusion,
                outer_radius: cfg.outer_radius,
                disc: cfg.discretization(),
                omega: cfg.omega,
                rho_background: cfg.rho_background,
                rho_inclusion: cfg.rho_inclusion,
                refine_factor: (cfg.refine_factor > 1.0).then_some(cfg.refine_factor),
                ..Default::default()
            };
            let r = w.step("contrast sweep", || analysis::run_contrast_sweep(&c))?;
            w.sweep(&r, "eta,distance_l2_m2,magnitude_integral_m3,refined_distance_l2_m2,fitted")
        }
        Command::DefectSweep => {
            let c = DefectSweepConfig {
                radii: cfg.radii.clone(),
                contrast: (cfg.contrast_lambda, cfg.contrast_mu),
                background: cfg.background,
                outer_radius: cfg.outer_radius,
                disc: cfg.discretization(),
            };
            let r = w.step("defect sweep", || analysis::run_defect_size_sweep(&c))?;
            w.sweep(&r, "radius_m,distance_l2_m2,magnitude_integral_m3,refined_distance_l2_m2,fitted")
        }
        Command::Nearcloak => {
            let c = nearcloak_config(cfg);
            let r = w.step("near-cloak sweep", || analysis::run_nearcloak_sweep(&c))?;
            w.sweep(
                &r,
                "epsilon,boundary_distance_l2_m1.5,magnitude_integral_m3,refined_distance_l2_m1.5,fitted",
            )
        }
        Command::LayeredCompare => {
            let c = LayeredComparisonConfig {
                layer_counts: cfg.layers_list.clone(),
                epsilon: cfg.epsilon,
                base: nearcloak_config(cfg),
            };
            let r = w.step("layered comparison", || analysis::run_layered_comparison(&c))?;
            w.sweep(
                &r,
                "layers,boundary_distance_l2_m1.5,magnitude_integral_m3,refined_distance_l2_m1.5,fitted",
            )
        }
        Command::Convergence => {
            let r = w.step("manufactured solution", || {
                analysis::run_convergence(&cfg.background, cfg.order, cfg.h.min(0.25), cfg.convergence_levels)
            })?;
            let mut f = w.file("convergence.csv")?;
            writeln!(f, "h_m,triangles,l2_error_m2,h1_error_m")?;
            for l in &r.levels {
                writeln!(f, "{:e},{},{:e},{:e}", l.h, l.triangles, l.l2_error, l.h1_error)?;
            }
            drop(f);
            w.json("summary.json", &r)?;
            w.failed.extend(r.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()));
            Ok(())
        }
    }
}

impl ConfigError {
    fn from_key(key: &str, message: &str) -> Self {
        ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

fn nearcloak_config(cfg: &RunConfig) -> NearCloakConfig {
    NearCloakConfig {
        epsilons: cfg.epsilon_list.clone(),
        family: cfg.family,
        background: cfg.background,
        inclusion: cfg.inclusion,
        length: cfg.cloak_length,
        outer_radius: cfg.outer_radius,
        traction: cfg.traction,
        disc: cfg.discretization(),
    }
}

fn profile(cfg: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    let mut f = w.file("profile.csv")?;
    writeln!(f, "rprime,component,value,unit")?;
    let n = cfg.profile_samples;
    for k in 0..n {
        let rp = 1.0 + k as f64 / (n - 1) as f64;
        let polar = |f: &mut BufWriter<File>, p: &PolarProfile| -> std::io::Result<()> {
            for (name, v) in PolarProfile::NAMES.iter().zip(p.values()) {
                writeln!(f, "{rp:e},C_{name},{v:e},Pa")?;
            }
            Ok(())
        };
        match cfg.family {
            CloakFamily::Cosserat => polar(&mut f, &cosserat_cloak_polar(cfg.epsilon, rp, &cfg.background)?)?,
            CloakFamily::Symmetrized => polar(&mut f, &symmetrize_cosserat(cfg.epsilon, rp, &cfg.background)?)?,
            CloakFamily::Willis => {
                let p = willis_cloak_polar(cfg.epsilon, rp, &cfg.background)?;
                polar(&mut f, &p.c4)?;
                let axis = ['r', 't'];
                for (label, t) in [("D", &p.d3), ("S", &p.s3)] {
                    for i in 0..2 {
                        for j in 0..2 {
                            for l in 0..2 {
                                let v = t.get(i, j, l);
                                if v != 0.0 {
                                    writeln!(f, "{rp:e},{label}_{}{}{},{v:e},Pa/L", axis[i], axis[j], axis[l])?;
                                }
                            }
                        }
                    }
                }
                for i in 0..2 {
                    for j in 0..2 {
                        writeln!(f, "{rp:e},B_{}{},{:e},Pa/L^2", axis[i], axis[j], p.b2[i][j])?;
                    }
                }
            }
            CloakFamily::Layered(_) => {
                return Err(ConfigError::from_key("family", "layered profiles come from the layers subcommand").into())
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Realizability {
    n: usize,
    epsilon: f64,
    tolerance: f64,
    exact: bool,
    max_residual: f64,
    pair_residuals: Vec<f64>,
}

fn layers(cfg: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    let cloak = w.step("laminate inversion", || {
        build_layered_cloak_with(cfg.layers_n, cfg.epsilon, &cfg.background, Realization::BestFit)
    })?;
    let mut f = w.file("layers.csv")?;
    writeln!(f, "layer,r_inner_m,r_outer_m,lambda_Pa,mu_Pa")?;
    for (k, l) in cloak.layers.iter().enumerate() {
        writeln!(
            f,
            "{k},{:e},{:e},{:e},{:e}",
            l.r_inner * cfg.cloak_length,
            l.r_outer * cfg.cloak_length,
            l.material.lambda,
            l.material.mu
        )?;
    }
    drop(f);
    w.json(
        "realizability.json",
        &Realizability {
            n: cloak.n,
            epsilon: cloak.epsilon,
            tolerance: REALIZABILITY_TOL,
            exact: cloak.max_residual() <= REALIZABILITY_TOL,
            max_residual: cloak.max_residual(),
            pair_residuals: cloak.pair_residuals.clone(),
        },
    )
}

#[derive(Serialize)]
struct SolveSummary {
    triangles: usize,
    dofs: usize,
    order: usize,
    eta: f64,
    omega: f64,
    relative_residual: f64,
    max_displacement_m: f64,
}

fn solve(cfg: &RunConfig, w: &mut Writer) -> Result<(), RunError> {
    let mut spec = GeometrySpec::disk(cfg.outer_radius, cfg.h);
    spec.h_inclusion = cfg.h_inclusion;
    if let Some(s) = cfg.inclusion_shape() {
        spec = spec.with_inclusion(s);
    }
    let mesh = w.step("mesh", || build_mesh(&spec))?;
    let space = Space::new(Arc::new(mesh), cfg.order)?;
    let mut coeff = CoefficientField::uniform(&cfg.background, &[region::BACKGROUND]);
    if cfg.inclusion_shape().is_some() {
        coeff.set(region::INCLUSION, TensorSource::isotropic(&cfg.inclusion.scaled(cfg.eta)));
    }
    let bc = BoundaryCondition::radial_dirichlet();
    let field = w.step("solve", || {
        if cfg.omega > 0.0 {
            let rho = [
                (region::BACKGROUND, cfg.rho_background),
                (region::INCLUSION, cfg.rho_inclusion),
            ]
            .into();
            let BoundaryCondition::Dirichlet(g) = bc.clone() else { unreachable!() };
            fem::solve_elastodynamic(&space, &coeff, &rho, cfg.omega, g)
        } else {
            fem::solve(&space, &coeff, &bc)
        }
    })?;
    space.mesh.write_text(&w.dir.join("mesh.txt"))?;
    w.outputs.push("mesh.txt".into());
    output::write_field_csv(&field, &mut w.file("field.csv")?)?;
    output::write_field_vtk(&field, &mut w.file("field.vtk")?)?;
    output::write_boundary_trace_csv(&field, boundary::OUTER, &mut w.file("trace.csv")?)?;
    let mut f = w.file("strain.csv")?;
    writeln!(f, "triangle,x_m,y_m,dilational_strain_1,shear_strain_1")?;
    for s in fem::strain_outputs(&field) {
        writeln!(f, "{},{:e},{:e},{:e},{:e}", s.triangle, s.x[0], s.x[1], s.dilation, s.shear)?;
    }
    drop(f);
    w.json(
        "summary.json",
        &SolveSummary {
            triangles: space.mesh.num_triangles(),
            dofs: space.num_dofs(),
            order: space.order,
            eta: cfg.eta,
            omega: cfg.omega,
            relative_residual: field.info.relative_residual,
            max_displacement_m: field.max_abs(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_tempdir(dir: &tempfile::TempDir, text: &str) -> RunConfig {
        let mut cfg = RunConfig::parse(text).unwrap();
        cfg.out = dir.path().to_string_lossy().into_owned();
        cfg
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        b.threads = 3;
        assert_eq!(config_hash(&a), config_hash(&b));
        b.h = 0.25;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn profile_run_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = in_tempdir(&dir, "profile_samples = 5\nepsilon = 0.2");
        let o = run(Command::Profile, &cfg).unwrap();
        assert!(o.passed);
        assert_eq!(o.outputs, vec!["profile.csv".to_string()]);
        let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("rprime,component,value,unit"));
        assert_eq!(lines.count(), 5 * PolarProfile::NAMES.len());

        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], "profile");
        assert_eq!(manifest["config_hash"], o.config_hash.as_str());

        // same configuration, same bytes
        let again = tempfile::tempdir().unwrap();
        let o2 = run(Command::Profile, &in_tempdir(&again, "profile_samples = 5\nepsilon = 0.2")).unwrap();
        assert_eq!(o.config_hash, o2.config_hash);
        assert_eq!(csv, fs::read_to_string(again.path().join("profile.csv")).unwrap());
    }

    #[test]
    fn layered_profile_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = in_tempdir(&dir, "family = layered");
        let e = run(Command::Profile, &cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invalid_config_is_rejected_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = in_tempdir(&dir, "");
        cfg.order = 5;
        assert!(matches!(run(Command::Convergence, &cfg), Err(RunError::Config(_))));
        assert!(!dir.path().join("manifest.json").exists());
    }
}
