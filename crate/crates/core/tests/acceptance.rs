//! Acceptance criteria C1-C8. Prints one PASS/FAIL line per criterion and a
//! summary line. With `ACCEPTANCE_STRICT=1` the process exits non-zero when any
//! criterion fails. Criteria can be selected by name:
//! `cargo test --test acceptance -- C3 C5`.

use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robin_fsi::ale::{gcl_check, AleState};
use robin_fsi::config::{
    BoundaryVariant, ConvectionForm, ElementChoice, MaterialParams, MeshParams, SchemeConfig, SolidTop, WallCondition,
};
use robin_fsi::experiments::{
    energy_check, profile_differences, run_benchmark, BenchmarkConfig, EnergyCheckConfig, SolverKind,
};
use robin_fsi::fem::assembly::{assemble_interface_mass, assemble_laplace};
use robin_fsi::fem::space::barycentric;
use robin_fsi::fem::{assemble_divergence, assemble_elasticity, assemble_mass, ErrorConvention, Family, FeSpace};
use robin_fsi::fsi_linear::{LinearFsi, TimeStepper};
use robin_fsi::fsi_moving::MovingFsi;
use robin_fsi::mesh::{BoundaryTag, Mesh};
use robin_fsi::problem::{Discretization, FsiState, Unforced};
use robin_fsi::verification::{
    run_convergence_study, temporal_order_study, ConvergenceTable, ErrorField, MmsProblem, StudySpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(msg: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{msg}");
    let _ = out.flush();
}

fn fmt_rates(r: &[f64]) -> String {
    r.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

// C1 ---------------------------------------------------------------------------

fn c1_gcl() -> Outcome {
    let (f, _, _) = MeshParams::unit_square(0.05).generate().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = f.n_nodes();
    let interior: Vec<bool> = f
        .nodes()
        .iter()
        .map(|p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 0.5)
        .collect();
    let spaces = [FeSpace::new(&f, Family::P1Bubble, 2), FeSpace::new(&f, Family::P2, 2)];
    let fields: Vec<Vec<f64>> = spaces
        .iter()
        .map(|s| (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut state = AleState::at(&f, vec![0.0; 2 * n]).unwrap();
    let mut worst = 0.0_f64;
    let dt = 1e-3;
    for _ in 0..100 {
        let mut next = state.eta_f.clone();
        for i in 0..n {
            if interior[i] {
                for c in 0..2 {
                    let d = next[c * n + i] + rng.random_range(-2e-3..2e-3);
                    next[c * n + i] = d.clamp(-0.01, 0.01);
                }
            }
        }
        state = match state.advance(&f, next, dt) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("mesh motion failed: {e}")),
        };
        for (s, u) in spaces.iter().zip(&fields) {
            worst = worst.max(gcl_check(s, u, &state.previous, &state.half, &state.current, &state.w, dt));
        }
    }
    outcome(worst <= 1e-12, format!("max residual {worst:.2e} (limit 1e-12)"))
}

// C2 ---------------------------------------------------------------------------

fn c2_energy() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for dt in [1e-2, 1e-3, 1e-4] {
        let mut cfg = EnergyCheckConfig {
            amplitude: 0.5,
            ..EnergyCheckConfig::default()
        };
        cfg.scheme.dt = dt;
        cfg.scheme.t_final = 50.0 * dt;
        match energy_check(&cfg) {
            Ok(r) => {
                let ok = r.max_increase <= 1e-10;
                pass &= ok;
                let g0 = r.series[0].g();
                let g1 = r.series.last().unwrap().g();
                details.push(format!("dt={dt:e}: max dG/G0 {:.1e}, G {g0:.3e}->{g1:.3e}", r.max_increase));
            }
            Err(e) => {
                pass = false;
                details.push(format!("dt={dt:e}: {e}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

// C3 / C4 ----------------------------------------------------------------------

fn check_bands(table: &ConvergenceTable) -> (bool, Vec<String>) {
    let mut pass = true;
    let mut lines = Vec::new();
    for a in table.alphas() {
        if let Some(r) = table.rows_for(a).iter().find(|r| r.failure.is_some()) {
            pass = false;
            lines.push(format!("alpha {a}: level {} failed: {}", r.level, r.failure.as_ref().unwrap()));
            continue;
        }
        let re = table.rates(a, ErrorField::Eta);
        let rx = table.rates(a, ErrorField::Xi);
        let rf = table.rates(a, ErrorField::Fluid);
        let mut ok = re.iter().all(|r| (0.8..=1.3).contains(r));
        let lo = if a <= 10.0 {
            Some(0.8)
        } else if a == 500.0 {
            Some(0.4)
        } else {
            None
        };
        if let Some(lo) = lo {
            ok &= rx.iter().chain(&rf).all(|r| *r >= lo);
        }
        pass &= ok;
        lines.push(format!(
            "alpha {a:>5}: eta [{}] xi [{}] F [{}] {}",
            fmt_rates(&re),
            fmt_rates(&rx),
            fmt_rates(&rf),
            if ok { "ok" } else { "OUT OF BAND" }
        ));
    }
    (pass, lines)
}

fn convergence(spec: StudySpec) -> (ConvergenceTable, bool, Vec<String>) {
    let mut spec = spec;
    // rate bands refer to unsquared norms for all three errors
    spec.convention = ErrorConvention::Unsquared;
    let table = run_convergence_study(&spec, |_| {});
    let (pass, lines) = check_bands(&table);
    (table, pass, lines)
}

fn c3_example1() -> Outcome {
    let (table, pass, lines) = convergence(StudySpec::example1());
    report(&table.to_text());
    for l in &lines {
        report(&format!("    {l}"));
    }
    outcome(pass, format!("{} alphas checked", lines.len()))
}

fn c4_example2() -> Outcome {
    let (table, mut pass, lines) = convergence(StudySpec::example2());
    report(&table.to_text());
    for l in &lines {
        report(&format!("    {l}"));
    }
    let finest: Vec<(f64, f64)> = table
        .alphas()
        .into_iter()
        .map(|a| (a, table.finest(a).map_or(f64::NAN, |r| r.get(ErrorField::Fluid))))
        .collect();
    let best = finest
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
    pass &= best.0 == 10.0;
    outcome(pass, format!("minimal finest e_F at alpha = {} ({:.3e})", best.0, best.1))
}

// C5 ---------------------------------------------------------------------------

fn c5_coupling() -> Outcome {
    let table = run_convergence_study(&StudySpec::coupling(), |_| {});
    let mut rows = Vec::new();
    for a in table.alphas() {
        match table.finest(a) {
            Some(r) if r.failure.is_none() => rows.push((a, r.get(ErrorField::Kinematic), r.get(ErrorField::Stress))),
            Some(r) => return outcome(false, format!("alpha {a}: {}", r.failure.clone().unwrap_or_default())),
            None => return outcome(false, format!("alpha {a}: no result")),
        }
    }
    let ke_mono = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let sg_mono = rows.windows(2).all(|w| w[1].2 >= w[0].2);
    let ke_lt = rows.iter().all(|r| r.1 < r.2);
    let detail = rows
        .iter()
        .map(|r| format!("a={}: ke {:.2e} sigma {:.2e}", r.0, r.1, r.2))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(ke_mono && sg_mono && ke_lt, detail)
}

// C6 ---------------------------------------------------------------------------

fn c6_benchmark() -> Outcome {
    let part = BenchmarkConfig::default();
    let mut mono = part.clone();
    mono.scheme.dt = 1e-4;
    let a = match run_benchmark(&part, SolverKind::Partitioned, |_| {}) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("partitioned: {e}")),
    };
    let b = match run_benchmark(&mono, SolverKind::Monolithic, |_| {}) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("monolithic: {e}")),
    };
    let mut pass = true;
    let mut details = Vec::new();
    for (p, q) in a.profiles.iter().zip(&b.profiles) {
        let d = profile_differences(p, q);
        pass &= d[0] <= 0.05 && d[1] <= 0.05 && d[2] <= 0.10;
        details.push(format!(
            "t={:.0}ms Q {:.3} p {:.3} eta {:.3}",
            p.t * 1e3,
            d[0],
            d[1],
            d[2]
        ));
    }
    outcome(pass && a.profiles.len() == 3, details.join("; "))
}

// C7 ---------------------------------------------------------------------------

fn distorted_mesh() -> Mesh {
    let (f, _, _) = MeshParams::unit_square(0.25).generate().unwrap();
    f.map_nodes(|p| {
        [
            p[0] + 0.05 * (3.0 * p[1]).sin() * p[0] * (1.0 - p[0]),
            p[1] + 0.04 * (5.0 * p[0]).cos() * p[1] * (0.5 - p[1]),
        ]
    })
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Closed-form P1 element matrices summed densely.
fn p1_oracles(mesh: &Mesh, mu: f64, lambda: f64, gamma: f64) -> [Vec<Vec<f64>>; 5] {
    let n = mesh.n_nodes();
    let mut mass = vec![vec![0.0; 2 * n]; 2 * n];
    let mut elast = vec![vec![0.0; 2 * n]; 2 * n];
    let mut div = vec![vec![0.0; 2 * n]; n];
    let mut lap = vec![vec![0.0; n]; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let x = mesh.triangle_coords(t);
        let area = 0.5 * ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]));
        // gradients of barycentric coordinates
        let g: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let (b, c) = (x[(i + 1) % 3], x[(i + 2) % 3]);
                [(b[1] - c[1]) / (2.0 * area), (c[0] - b[0]) / (2.0 * area)]
            })
            .collect();
        for a in 0..3 {
            for b in 0..3 {
                let (i, j) = (tri[a], tri[b]);
                let m = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                lap[i][j] += area * gg;
                for c in 0..2 {
                    mass[c * n + i][c * n + j] += m;
                    div[i][c * n + j] += area / 3.0 * g[b][c];
                    for d in 0..2 {
                        let mut k = area * (mu * g[a][d] * g[b][c] + lambda * g[a][c] * g[b][d]);
                        if c == d {
                            k += area * mu * gg + gamma * m;
                        }
                        elast[c * n + i][d * n + j] += k;
                    }
                }
            }
        }
    }
    let mut imass = vec![vec![0.0; 2 * n]; 2 * n];
    for e in mesh.edges_with_tag(BoundaryTag::Interface) {
        let len = mesh.edge_length(e);
        for a in 0..2 {
            for b in 0..2 {
                let m = len / 6.0 * if a == b { 2.0 } else { 1.0 };
                for c in 0..2 {
                    imass[c * n + e.nodes[a]][c * n + e.nodes[b]] += m;
                }
            }
        }
    }
    [mass, elast, div, lap, imass]
}

fn c7_oracles() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;

    let mesh = distorted_mesh();
    let (mu, lambda, gamma) = (1.3, 2.1, 0.7);
    let vs = FeSpace::new(&mesh, Family::P1, 2);
    let ps = FeSpace::new(&mesh, Family::P1, 1);
    let [mass, elast, div, lap, imass] = p1_oracles(&mesh, mu, lambda, gamma);
    let checks = [
        ("mass", max_diff(&assemble_mass(&vs, 1.0, &mesh).to_dense(), &mass)),
        (
            "elasticity",
            max_diff(&assemble_elasticity(&vs, mu, lambda, gamma, &mesh).to_dense(), &elast),
        ),
        ("divergence", max_diff(&assemble_divergence(&vs, &ps, &mesh).to_dense(), &div)),
        ("laplace", max_diff(&assemble_laplace(&ps, &mesh).to_dense(), &lap)),
        ("interface mass", max_diff(&assemble_interface_mass(&vs, &mesh).to_dense(), &imass)),
    ];
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    pass &= worst <= 1e-10;
    details.push(format!("assembly max diff {worst:.1e}"));
    // barycentric round trip used by every point evaluation
    let x = mesh.triangle_coords(3);
    let lam = barycentric(&x, [0.2 * x[0][0] + 0.3 * x[1][0] + 0.5 * x[2][0], 0.2 * x[0][1] + 0.3 * x[1][1] + 0.5 * x[2][1]]);
    pass &= (lam[0] - 0.2).abs() + (lam[1] - 0.3).abs() + (lam[2] - 0.5).abs() < 1e-12;

    // frozen moving solver against the fixed-domain solver
    let mut frozen = 0.0_f64;
    for el in [ElementChoice::Mini, ElementChoice::TaylorHood] {
        let disc = Discretization::new(&MeshParams::unit_square(0.125), el).unwrap();
        let sc = SchemeConfig {
            alpha: 10.0,
            dt: 0.01,
            t_final: 1.0,
            element: el,
            inlet_outlet: BoundaryVariant::NoSlip,
            wall: WallCondition::NoSlip,
            solid_top: SolidTop::Clamped,
            convection: ConvectionForm::None,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut st = FsiState::zeros(&disc);
        let (fc, scn) = (disc.fluid_constraints(&sc), disc.solid_constraints(&sc));
        for (i, v) in st.v.iter_mut().enumerate() {
            if fc.binary_search(&i).is_err() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        for i in 0..st.xi.len() {
            if scn.binary_search(&i).is_err() {
                st.xi[i] = rng.random_range(-1.0..1.0);
                st.eta[i] = rng.random_range(-0.01..0.01);
            }
        }
        let mat = MaterialParams::unit();
        let mut lin = LinearFsi::new(Arc::clone(&disc), mat, sc, Arc::new(Unforced)).unwrap();
        let mut mov = MovingFsi::new(Arc::clone(&disc), mat, sc, Arc::new(Unforced))
            .unwrap()
            .with_frozen_geometry(true)
            .unwrap();
        lin.set_state(st.clone()).unwrap();
        mov.set_state(st).unwrap();
        lin.run(5).unwrap();
        mov.run(5).unwrap();
        let (a, b) = (lin.state(), mov.state());
        let d = a
            .v
            .iter()
            .zip(&b.v)
            .chain(a.p.iter().zip(&b.p))
            .chain(a.xi.iter().zip(&b.xi))
            .chain(a.eta.iter().zip(&b.eta))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        frozen = frozen.max(d);
    }
    pass &= frozen <= 1e-12;
    details.push(format!("frozen vs linear {frozen:.1e}"));

    let m = MaterialParams::unit();
    let res = MmsProblem::example1(m)
        .forcing_residual(50, 5, 1e-5)
        .max(MmsProblem::example2(m).forcing_residual(50, 6, 1e-5));
    pass &= res <= 1e-8;
    details.push(format!("forcing residual {res:.1e}"));
    outcome(pass, details.join("; "))
}

// C8 ---------------------------------------------------------------------------

fn c8_temporal() -> Outcome {
    match temporal_order_study(MaterialParams::unit(), 10.0, 0.0125, 0.01, 3, 0.3, ElementChoice::Mini) {
        Ok(pts) => {
            let errs: Vec<f64> = pts.iter().map(|p| p.error).collect();
            let rates = robin_fsi::verification::rates(&errs);
            let ok = rates.iter().all(|r| *r >= 0.4);
            outcome(
                ok,
                format!(
                    "errors [{}] rates [{}]",
                    errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
                    fmt_rates(&rates)
                ),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("C1", "GCL exactness", Duration::from_secs(10), c1_gcl),
        ("C2", "energy stability", Duration::from_secs(120), c2_energy),
        ("C3", "fixed-domain convergence", Duration::from_secs(15 * 60), c3_example1),
        ("C4", "moving-domain convergence", Duration::from_secs(25 * 60), c4_example2),
        ("C5", "coupling-error trends", Duration::from_secs(20 * 60), c5_coupling),
        ("C6", "partitioned vs monolithic", Duration::from_secs(60 * 60), c6_benchmark),
        ("C7", "oracle equivalences", Duration::from_secs(120), c7_oracles),
        ("C8", "temporal order", Duration::from_secs(10 * 60), c8_temporal),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let (mut failed, mut run) = (0, 0);
    for (id, name, limit, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|s| s == id) {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = o.pass && in_time;
        failed += usize::from(!pass);
        report(&format!(
            "{id} {:<4} {name}: {} [{:.1} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", TOO SLOW" }
        ));
    }
    report(&format!("acceptance: {} of {run} criteria passed", run - failed));
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
