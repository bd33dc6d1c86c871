//! Pressure-pulse channel benchmark, energy-decay runs and their output files.

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{
    pulse_pressure, BoundaryVariant, ConvectionForm, ElementChoice, MaterialParams, MeshParams, PulseInflow,
    SchemeConfig, SolidTop, WallCondition,
};
use crate::fem::space::barycentric;
use crate::fem::FeSpace;
use crate::fsi_linear::TimeStepper;
use crate::fsi_moving::MovingFsi;
use crate::mesh::Mesh;
use crate::monolithic::MonolithicFsi;
use crate::problem::{Discretization, EnergyDiagnostics, FsiData, FsiError, FsiState, PressureDriven};
use crate::verification::MmsProblem;

/// Bucketed triangle lookup.
#[derive(Debug, Clone)]
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    origin: [f64; 2],
    cell: [f64; 2],
    n: [usize; 2],
    bins: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.nodes() {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let side = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0);
        let ext = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
        let aspect = (ext[0] / ext[1]).sqrt();
        let n = [
            ((side * aspect).ceil() as usize).max(1),
            ((side / aspect).ceil() as usize).max(1),
        ];
        let cell = [ext[0] / n[0] as f64, ext[1] / n[1] as f64];
        let mut loc = Self {
            mesh,
            origin: lo,
            cell,
            n,
            bins: vec![Vec::new(); n[0] * n[1]],
        };
        for t in 0..mesh.n_triangles() {
            let c = mesh.triangle_coords(t);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in c {
                for k in 0..2 {
                    a[k] = a[k].min(p[k]);
                    b[k] = b[k].max(p[k]);
                }
            }
            let (i0, j0) = loc.bin(a);
            let (i1, j1) = loc.bin(b);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.bins[j * n[0] + i].push(t);
                }
            }
        }
        loc
    }

    fn bin(&self, x: [f64; 2]) -> (usize, usize) {
        let f = |k: usize| (((x[k] - self.origin[k]) / self.cell[k]).floor().max(0.0) as usize).min(self.n[k] - 1);
        (f(0), f(1))
    }

    /// Containing triangle and barycentric coordinates, with a small tolerance
    /// for points on the boundary.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.bin(x);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.bins[j * self.n[0] + i] {
            let lam = barycentric(&self.mesh.triangle_coords(t), x);
            let m = lam[0].min(lam[1]).min(lam[2]);
            if m >= -1e-12 {
                return Some((t, lam));
            }
            if best.is_none_or(|b| m > b.2) {
                best = Some((t, lam, m));
            }
        }
        best.filter(|b| b.2 >= -1e-8).map(|b| (b.0, b.1))
    }

    pub fn evaluate(&self, space: &FeSpace, u: &[f64], x: [f64; 2]) -> Option<[f64; 2]> {
        self.locate(x).map(|(e, lam)| space.value_in_element(u, e, lam))
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Section profiles at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profiles {
    pub t: f64,
    pub x: Vec<f64>,
    /// `int v_x dy` over the current cross-section.
    pub flowrate: Vec<f64>,
    /// Section average of the pressure.
    pub mean_pressure: Vec<f64>,
    /// Vertical displacement of the interface.
    pub displacement: Vec<f64>,
}

/// Profiles on `n_stations` equally spaced stations in `[0, length]`.
pub fn section_profiles(
    disc: &Discretization,
    fluid_mesh: &Mesh,
    state: &FsiState,
    n_stations: usize,
) -> Result<Profiles, FsiError> {
    let fluid = PointLocator::new(fluid_mesh);
    let solid = PointLocator::new(&disc.solid_mesh);
    let (mut x0, mut x1, mut y_ref) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for p in disc.fluid_mesh.nodes() {
        x0 = f64::min(x0, p[0]);
        x1 = f64::max(x1, p[0]);
        y_ref = f64::max(y_ref, p[1]);
    }
    let y_bottom = disc.fluid_mesh.nodes().iter().fold(f64::INFINITY, |a, p| a.min(p[1]));
    // current interface as a polyline
    let mut top: Vec<[f64; 2]> = disc
        .imap
        .fluid_nodes()
        .map(|n| fluid_mesh.nodes()[n])
        .collect();
    top.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let height_at = |x: f64| {
        let k = top.partition_point(|p| p[0] < x).clamp(1, top.len() - 1);
        let (a, b) = (top[k - 1], top[k]);
        let s = ((x - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0);
        a[1] + s * (b[1] - a[1])
    };
    let segments = top.len().max(2) - 1;
    let outside = |x: [f64; 2]| FsiError::Setup(format!("profile point ({}, {}) outside the mesh", x[0], x[1]));
    let mut out = Profiles {
        t: state.t,
        x: Vec::with_capacity(n_stations),
        flowrate: Vec::with_capacity(n_stations),
        mean_pressure: Vec::with_capacity(n_stations),
        displacement: Vec::with_capacity(n_stations),
    };
    for i in 0..n_stations {
        let x = x0 + (x1 - x0) * i as f64 / (n_stations.max(2) - 1) as f64;
        let (ya, yb) = (y_bottom, height_at(x));
        let dy = (yb - ya) / segments as f64;
        let (mut q, mut pint) = (0.0, 0.0);
        for s in 0..segments {
            for (g, w) in GAUSS3 {
                let pt = [x, ya + (s as f64 + g) * dy];
                let (e, lam) = fluid.locate(pt).ok_or_else(|| outside(pt))?;
                q += w * dy * disc.vspace.value_in_element(&state.v, e, lam)[0];
                pint += w * dy * disc.pspace.value_in_element(&state.p, e, lam)[0];
            }
        }
        let eta = solid
            .evaluate(&disc.sspace, &state.eta, [x, y_ref])
            .ok_or_else(|| outside([x, y_ref]))?;
        out.x.push(x);
        out.flowrate.push(q);
        out.mean_pressure.push(pint / (yb - ya));
        out.displacement.push(eta[1]);
    }
    Ok(out)
}

/// `|a - b|_2 / |b|_2` over stations.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Relative differences (flowrate, mean pressure, displacement) of two profiles.
pub fn profile_differences(a: &Profiles, b: &Profiles) -> [f64; 3] {
    [
        relative_l2(&a.flowrate, &b.flowrate),
        relative_l2(&a.mean_pressure, &b.mean_pressure),
        relative_l2(&a.displacement, &b.displacement),
    ]
}

/// Which solver drives the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Partitioned,
    Monolithic,
}

/// Pressure-pulse benchmark in the compliant channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub material: MaterialParams,
    pub scheme: SchemeConfig,
    pub mesh: MeshParams,
    pub pulse: PulseInflow,
    /// Output times in seconds.
    pub times: Vec<f64>,
    pub stations: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::benchmark(),
            scheme: SchemeConfig::default(),
            mesh: MeshParams::default(),
            pulse: PulseInflow::default(),
            times: vec![0.004, 0.008, 0.012],
            stations: 100,
        }
    }
}

/// Profiles at the requested times and the energy log of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub solver: SolverKind,
    pub dt: f64,
    pub profiles: Vec<Profiles>,
    pub energy: Vec<EnergyDiagnostics>,
}

pub fn make_solver(
    kind: SolverKind,
    disc: Arc<Discretization>,
    material: MaterialParams,
    scheme: SchemeConfig,
    data: Arc<dyn FsiData>,
) -> Result<Box<dyn TimeStepper>, FsiError> {
    Ok(match kind {
        SolverKind::Partitioned => Box::new(MovingFsi::new(disc, material, scheme, data)?),
        SolverKind::Monolithic => Box::new(MonolithicFsi::new(disc, material, scheme, data)?),
    })
}

/// Run the benchmark with `kind`; `progress` sees every step.
pub fn run_benchmark(
    cfg: &BenchmarkConfig,
    kind: SolverKind,
    mut progress: impl FnMut(&EnergyDiagnostics),
) -> Result<BenchmarkResult, FsiError> {
    cfg.material.validate()?;
    cfg.scheme.validate()?;
    cfg.pulse.validate()?;
    let disc = Discretization::new(&cfg.mesh, cfg.scheme.element)?;
    let pulse = cfg.pulse;
    let data: Arc<dyn FsiData> = Arc::new(PressureDriven(move |t| pulse_pressure(t, &pulse)));
    let mut solver = make_solver(kind, Arc::clone(&disc), cfg.material, cfg.scheme, data)?;
    let dt = cfg.scheme.dt;
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    let mut profiles = Vec::with_capacity(times.len());
    let mut energy = vec![*solver.energy()];
    for &t in &times {
        let target = (t / dt).round() as usize;
        while solver.state().step < target {
            solver.step()?;
            progress(solver.energy());
            energy.push(*solver.energy());
        }
        profiles.push(section_profiles(&disc, solver.fluid_mesh(), solver.state(), cfg.stations)?);
    }
    Ok(BenchmarkResult {
        solver: kind,
        dt,
        profiles,
        energy,
    })
}

/// Setup of the unforced energy-decay run on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyCheckConfig {
    pub material: MaterialParams,
    pub scheme: SchemeConfig,
    pub mesh: MeshParams,
    /// Amplitude of the smooth initial state.
    pub amplitude: f64,
}

impl Default for EnergyCheckConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::unit(),
            scheme: SchemeConfig {
                alpha: 10.0,
                dt: 1e-3,
                t_final: 0.05,
                element: ElementChoice::Mini,
                inlet_outlet: BoundaryVariant::DynamicPressure,
                wall: WallCondition::Symmetry,
                solid_top: SolidTop::TractionFree,
                convection: ConvectionForm::Skew,
                ..SchemeConfig::default()
            },
            mesh: MeshParams::unit_square(0.05),
            amplitude: 0.05,
        }
    }
}

/// Energy series `G^n = E^n + N1^n` with the largest relative increase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyCheck {
    pub dt: f64,
    pub series: Vec<EnergyDiagnostics>,
    /// `max_n (G^{n+1} - G^n) / G^0`; non-positive when the energy never grows.
    pub max_increase: f64,
}

/// Unforced moving-domain run from a smooth nonzero state.
pub fn energy_check(cfg: &EnergyCheckConfig) -> Result<EnergyCheck, FsiError> {
    cfg.material.validate()?;
    cfg.scheme.validate()?;
    let disc = Discretization::new(&cfg.mesh, cfg.scheme.element)?;
    let mut solver = MovingFsi::new(Arc::clone(&disc), cfg.material, cfg.scheme, Arc::new(crate::problem::Unforced))?;
    let mms = MmsProblem {
        amplitude: cfg.amplitude,
        ..MmsProblem::example1(cfg.material)
    };
    solver.set_state(mms.exact_state(&disc, &disc.fluid_mesh, 0.0))?;
    let mut series = vec![*solver.energy()];
    for _ in 0..cfg.scheme.n_steps() {
        solver.step()?;
        series.push(*solver.energy());
    }
    let g0 = series[0].g();
    let max_increase = series
        .windows(2)
        .map(|w| (w[1].g() - w[0].g()) / g0)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyCheck {
        dt: cfg.scheme.dt,
        series,
        max_increase,
    })
}

/// Profiles as CSV: one row per (time, station).
pub fn write_profiles_csv<W: Write>(w: W, profiles: &[Profiles]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "x", "flowrate", "mean_pressure", "displacement"])?;
    for p in profiles {
        for i in 0..p.x.len() {
            out.write_record([
                format!("{:e}", p.t),
                format!("{:e}", p.x[i]),
                format!("{:e}", p.flowrate[i]),
                format!("{:e}", p.mean_pressure[i]),
                format!("{:e}", p.displacement[i]),
            ])?;
        }
    }
    out.flush()
}

/// Whitespace-separated blocks, one per time, for gnuplot's `index`.
pub fn write_profiles_gnuplot<W: Write>(mut w: W, profiles: &[Profiles]) -> io::Result<()> {
    for (k, p) in profiles.iter().enumerate() {
        if k > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# t = {:e}\n# x flowrate mean_pressure displacement", p.t)?;
        for i in 0..p.x.len() {
            writeln!(
                w,
                "{:e} {:e} {:e} {:e}",
                p.x[i], p.flowrate[i], p.mean_pressure[i], p.displacement[i]
            )?;
        }
    }
    Ok(())
}

pub fn write_energy_csv<W: Write>(w: W, series: &[EnergyDiagnostics]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t", "E", "D", "N1", "N2", "G", "source", "max_interface_displacement", "min_jacobian"])?;
    for e in series {
        out.write_record(
            [e.t, e.e, e.d, e.n1, e.n2, e.g(), e.source, e.max_interface_displacement, e.min_jacobian]
                .map(|v| format!("{v:e}")),
        )?;
    }
    out.flush()
}

/// Write `name.csv` and `name.dat` for the profiles under `dir`.
pub fn write_profile_files(dir: &Path, name: &str, profiles: &[Profiles]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_profiles_csv(fs::File::create(dir.join(format!("{name}.csv")))?, profiles)?;
    write_profiles_gnuplot(fs::File::create(dir.join(format!("{name}.dat")))?, profiles)
}
