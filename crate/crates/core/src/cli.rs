//! Batch front end: TOML run configurations, presets, experiment dispatch and
//! output files.
//!
//! ```text
//! robin-fsi <subcommand> --config <file> [--out <dir>] [--alpha <v>] [--dt <v>] [--levels <n>]
//! ```
//!
//! `run` executes the experiment named in the file; the other subcommands
//! override it. A configuration may start from `preset = "example1"`,
//! `"example2"` or `"benchmark"`; keys given explicitly replace preset values.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, MaterialParams, MeshParams, PulseInflow, SchemeConfig};
use crate::experiments::{
    energy_check, run_benchmark, write_energy_csv, write_profile_files, BenchmarkConfig, EnergyCheckConfig,
    SolverKind,
};
use crate::fsi_linear::TimeStepper;
use crate::problem::{Discretization, FsiError};
use crate::verification::{mms_errors, run_convergence_study, run_mms, Domain, MmsProblem, StudySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MmsFixed,
    MmsMoving,
    Convergence,
    CouplingErrors,
    #[default]
    Benchmark,
    MonolithicBenchmark,
    EnergyCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Example1,
    Example2,
    Benchmark,
}

/// Refinement-study parameters (`convergence`, `coupling-errors`, `mms-*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyOptions {
    pub domain: Domain,
    pub alphas: Vec<f64>,
    pub first_level: usize,
    pub levels: usize,
    pub dt0: f64,
    pub h0: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        let s = StudySpec::example1();
        Self {
            domain: s.domain,
            alphas: s.alphas,
            first_level: s.first_level,
            levels: s.levels,
            dt0: s.dt0,
            h0: s.h0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub experiment: Experiment,
    pub material: MaterialParams,
    pub scheme: SchemeConfig,
    pub mesh: MeshParams,
    pub pulse: PulseInflow,
    pub study: StudyOptions,
    /// Benchmark output times (s).
    pub times: Vec<f64>,
    pub stations: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Also write legacy VTK meshes with the final fields.
    pub vtk: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = BenchmarkConfig::default();
        Self {
            preset: None,
            experiment: Experiment::Benchmark,
            material: b.material,
            scheme: b.scheme,
            mesh: b.mesh,
            pulse: b.pulse,
            study: StudyOptions::default(),
            times: b.times,
            stations: b.stations,
            out_dir: PathBuf::from("out"),
            seed: 0,
            vtk: false,
        }
    }
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let base = Self {
            preset: Some(p),
            ..Self::default()
        };
        match p {
            Preset::Benchmark => base,
            Preset::Example1 | Preset::Example2 => {
                let spec = if p == Preset::Example1 {
                    StudySpec::example1()
                } else {
                    StudySpec::example2()
                };
                let mms = spec.problem();
                Self {
                    experiment: Experiment::Convergence,
                    material: spec.material,
                    scheme: mms.scheme(10.0, spec.dt0, spec.t_final, spec.element),
                    mesh: MmsProblem::mesh(spec.h0),
                    study: StudyOptions {
                        domain: spec.domain,
                        ..StudyOptions::default()
                    },
                    ..base
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |e: ConfigError| CliError::Validation(e.to_string());
        self.material.validate().map_err(v)?;
        self.scheme.validate().map_err(v)?;
        self.pulse.validate().map_err(v)?;
        let bad = |m: &str| Err(CliError::Validation(m.to_string()));
        if self.mesh.nx == 0 || self.mesh.ny_fluid == 0 || self.mesh.ny_solid == 0 {
            return bad("mesh: nx, ny_fluid and ny_solid must be positive");
        }
        if !(self.mesh.length > 0.0 && self.mesh.fluid_height > 0.0 && self.mesh.solid_height > 0.0) {
            return bad("mesh: lengths must be positive");
        }
        let s = &self.study;
        if s.alphas.is_empty() || s.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return bad("study.alphas must be positive and non-empty");
        }
        if s.levels < s.first_level + 1 || !(s.dt0 > 0.0 && s.h0 > 0.0 && s.h0 <= 0.5) {
            return bad("study: need levels > first_level, dt0 > 0 and 0 < h0 <= 0.5");
        }
        if self.stations < 2 || self.times.iter().any(|t| !(*t > 0.0)) {
            return bad("benchmark: need at least 2 stations and positive output times");
        }
        Ok(())
    }

    fn study_spec(&self, coupling: bool) -> StudySpec {
        let label = match (coupling, self.study.domain) {
            (true, _) => "coupling errors",
            (false, Domain::Fixed) => "fixed-domain convergence",
            (false, Domain::Moving) => "moving-domain convergence",
        };
        StudySpec {
            label: label.into(),
            domain: self.study.domain,
            alphas: self.study.alphas.clone(),
            first_level: self.study.first_level,
            levels: self.study.levels,
            dt0: self.study.dt0,
            h0: self.study.h0,
            t_final: self.scheme.t_final,
            element: self.scheme.element,
            material: self.material,
            convention: self.scheme.error_convention,
        }
    }

    fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            material: self.material,
            scheme: self.scheme,
            mesh: self.mesh,
            pulse: self.pulse,
            times: self.times.clone(),
            stations: self.stations,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Parse { message: String, line: Option<usize>, key: Option<String> },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] FsiError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "PARSE_ERROR",
            CliError::Validation(_) => "VALIDATION_ERROR",
            CliError::Io(_) => "IO_ERROR",
            CliError::Solver(_) => "SOLVER_ERROR",
        }
    }

    /// One-line JSON error record.
    pub fn record(&self) -> serde_json::Value {
        let mut r = json!({ "error": self.code(), "message": self.to_string() });
        if let CliError::Parse { line, key, .. } = self {
            r["line"] = json!(line);
            r["key"] = json!(key);
        }
        r
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn parse_error(text: &str, err: &toml::de::Error) -> CliError {
    let line = err.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    let msg = err.message().to_string();
    let key = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.starts_with("unknown field"))
        .map(str::to_string);
    CliError::Parse {
        message: match line {
            Some(l) => format!("line {l}: {msg}"),
            None => msg,
        },
        line,
        key,
    }
}

/// Parse configuration text, applying a preset first if one is named.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let user: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    let base = match user.get("preset") {
        None => RunConfig::default(),
        Some(p) => {
            let p = Preset::deserialize(p.clone()).map_err(|e| CliError::Parse {
                message: format!("preset: {e}"),
                line: None,
                key: Some("preset".into()),
            })?;
            RunConfig::preset(p)
        }
    };
    let mut merged = toml::Value::try_from(&base).map_err(|e| CliError::Validation(e.to_string()))?;
    merge(&mut merged, toml::Value::Table(user));
    let merged_text = toml::to_string(&merged).map_err(|e| CliError::Validation(e.to_string()))?;
    // re-parse the user text on failure so positions refer to the input
    let cfg: RunConfig = match toml::from_str(&merged_text) {
        Ok(c) => c,
        Err(e) => {
            return Err(match toml::from_str::<RunConfig>(text) {
                Err(orig) => parse_error(text, &orig),
                Ok(_) => parse_error(&merged_text, &e),
            })
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    parse_config_str(&fs::read_to_string(path)?)
}

#[derive(Debug, Parser)]
#[command(name = "robin-fsi", version, about = "Partitioned Robin-Robin fluid-structure solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Run the experiment named in the configuration.
    Run,
    /// Single manufactured-solution run on the fixed domain.
    MmsFixed,
    /// Single manufactured-solution run on the moving domain.
    MmsMoving,
    /// Space-time refinement study over the configured alphas.
    Convergence,
    /// Interface coupling errors over a refinement study.
    CouplingErrors,
    /// Pressure-pulse benchmark with the partitioned scheme.
    Benchmark,
    /// Pressure-pulse benchmark with the monolithic reference.
    MonolithicBenchmark,
    /// Energy balance check with homogeneous data.
    EnergyCheck,
    /// Parse and validate only; prints the effective configuration.
    Check,
}

impl Cli {
    /// Effective configuration after command-line overrides.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p)?,
            None => RunConfig::default(),
        };
        let exp = match self.command {
            Command::MmsFixed => Some(Experiment::MmsFixed),
            Command::MmsMoving => Some(Experiment::MmsMoving),
            Command::Convergence => Some(Experiment::Convergence),
            Command::CouplingErrors => Some(Experiment::CouplingErrors),
            Command::Benchmark => Some(Experiment::Benchmark),
            Command::MonolithicBenchmark => Some(Experiment::MonolithicBenchmark),
            Command::EnergyCheck => Some(Experiment::EnergyCheck),
            Command::Run | Command::Check => None,
        };
        if let Some(e) = exp {
            cfg.experiment = e;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(a) = self.alpha {
            cfg.scheme.alpha = a;
            cfg.study.alphas = vec![a];
        }
        if let Some(dt) = self.dt {
            cfg.scheme.dt = dt;
            cfg.study.dt0 = dt;
        }
        if let Some(l) = self.levels {
            cfg.study.levels = cfg.study.first_level + l;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(v).map_err(|e| CliError::Validation(e.to_string()))? + "\n")?;
    Ok(())
}

fn write_vtk(dir: &Path, disc: &Discretization, solver: &dyn TimeStepper) -> Result<(), CliError> {
    let st = solver.state();
    let mesh = solver.fluid_mesh();
    let n = mesh.n_nodes();
    let nodal = |space: &crate::fem::FeSpace, u: &[f64]| -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let c1 = if space.components() > 1 { u[space.dof(1, i)] } else { 0.0 };
                [u[space.dof(0, i)], c1]
            })
            .collect()
    };
    let v = nodal(&disc.vspace, &st.v);
    let p: Vec<f64> = (0..n).map(|i| st.p[disc.pspace.dof(0, i)]).collect();
    mesh.write_vtk(fs::File::create(dir.join("fluid.vtk"))?, "fluid", &[("p", &p)], &[("v", &v)])?;
    let sm = &disc.solid_mesh;
    let ns = sm.n_nodes();
    let eta: Vec<[f64; 2]> = (0..ns)
        .map(|i| [st.eta[disc.sspace.dof(0, i)], st.eta[disc.sspace.dof(1, i)]])
        .collect();
    let xi: Vec<[f64; 2]> = (0..ns)
        .map(|i| [st.xi[disc.sspace.dof(0, i)], st.xi[disc.sspace.dof(1, i)]])
        .collect();
    sm.write_vtk(fs::File::create(dir.join("solid.vtk"))?, "solid", &[], &[("eta", &eta), ("xi", &xi)])?;
    Ok(())
}

/// Run `cfg.experiment`, writing outputs under `cfg.out_dir`. Returns the
/// JSON summary that is also written to `summary.json`.
pub fn run(cfg: &RunConfig, mut log: impl FnMut(&str)) -> Result<serde_json::Value, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    let mut summary = match cfg.experiment {
        Experiment::MmsFixed | Experiment::MmsMoving => {
            let material = cfg.material;
            let problem = if cfg.experiment == Experiment::MmsFixed {
                MmsProblem::example1(material)
            } else {
                MmsProblem::example2(material)
            };
            let residual = problem.forcing_residual(50, cfg.seed, 1e-5);
            let disc = Discretization::new(&MmsProblem::mesh(cfg.study.h0), cfg.scheme.element)?;
            let mut scheme = problem.scheme(cfg.scheme.alpha, cfg.scheme.dt, cfg.scheme.t_final, cfg.scheme.element);
            scheme.error_convention = cfg.scheme.error_convention;
            let solver = run_mms(&problem, std::sync::Arc::clone(&disc), scheme)?;
            let e = mms_errors(&problem, &disc, solver.fluid_mesh(), solver.state(), scheme.error_convention)?;
            log(&format!("{e:?}"));
            if cfg.vtk {
                write_vtk(dir, &disc, solver.as_ref())?;
            }
            json!({ "errors": e, "forcing_residual": residual, "energy": solver.energy() })
        }
        Experiment::Convergence | Experiment::CouplingErrors => {
            let coupling = cfg.experiment == Experiment::CouplingErrors;
            let spec = cfg.study_spec(coupling);
            let table = run_convergence_study(&spec, |r| {
                log(&format!(
                    "alpha {} level {}: {}",
                    r.alpha,
                    r.level,
                    r.failure.clone().unwrap_or_else(|| "ok".into())
                ))
            });
            let name = if coupling { "coupling_errors" } else { "convergence" };
            table.write_csv(fs::File::create(dir.join(format!("{name}.csv")))?)?;
            fs::write(dir.join(format!("{name}.txt")), table.to_text())?;
            log(&table.to_text());
            json!({ "table": table })
        }
        Experiment::Benchmark | Experiment::MonolithicBenchmark => {
            let kind = if cfg.experiment == Experiment::Benchmark {
                SolverKind::Partitioned
            } else {
                SolverKind::Monolithic
            };
            let bc = cfg.benchmark();
            let every = (bc.scheme.n_steps() / 20).max(1);
            let mut n = 0;
            let res = run_benchmark(&bc, kind, |e| {
                n += 1;
                if n % every == 0 {
                    log(&format!("t = {:.3e}  G = {:.6e}", e.t, e.g()));
                }
            })?;
            let name = if kind == SolverKind::Partitioned { "partitioned" } else { "monolithic" };
            write_profile_files(dir, name, &res.profiles)?;
            write_energy_csv(fs::File::create(dir.join("energy.csv"))?, &res.energy)?;
            json!({ "solver": kind, "dt": res.dt, "times": cfg.times, "final_energy": res.energy.last() })
        }
        Experiment::EnergyCheck => {
            let ec = EnergyCheckConfig {
                material: cfg.material,
                scheme: cfg.scheme,
                mesh: cfg.mesh,
                ..EnergyCheckConfig::default()
            };
            let r = energy_check(&ec)?;
            write_energy_csv(fs::File::create(dir.join("energy.csv"))?, &r.series)?;
            log(&format!("max relative increase of G: {:.3e}", r.max_increase));
            json!({ "dt": r.dt, "max_relative_increase": r.max_increase, "final_energy": r.series.last() })
        }
    };
    summary["experiment"] = json!(cfg.experiment);
    summary["config"] = json!(cfg);
    summary["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = cli.config().and_then(|cfg| match cli.command {
        Command::Check => {
            println!("{}", toml::to_string(&cfg).unwrap_or_default());
            Ok(())
        }
        _ => run(&cfg, |m| log::info!("{m}")).map(|s| {
            println!("{}", serde_json::to_string(&s["wall_time_s"]).unwrap_or_default());
        }),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.record());
            match e {
                CliError::Parse { .. } | CliError::Validation(_) => 2,
                _ => 1,
            }
        }
    }
}
