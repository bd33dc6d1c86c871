use std::sync::Arc;

use robin_fsi::config::{ElementChoice, MaterialParams, MeshParams, SchemeConfig};
use robin_fsi::experiments::{profile_differences, run_benchmark, BenchmarkConfig, SolverKind};
use robin_fsi::fsi_linear::TimeStepper;
use robin_fsi::monolithic::MonolithicFsi;
use robin_fsi::problem::{Discretization, Unforced};

fn coarse_benchmark(dt: f64) -> BenchmarkConfig {
    let mut c = BenchmarkConfig::default();
    c.mesh = MeshParams {
        nx: 30,
        ny_fluid: 5,
        ny_solid: 2,
        ..MeshParams::default()
    };
    c.scheme.dt = dt;
    c.scheme.t_final = 0.004;
    c.times = vec![0.002, 0.004];
    c.stations = 31;
    c
}

#[test]
fn partitioned_approaches_monolithic_as_dt_shrinks() {
    let mono = run_benchmark(&coarse_benchmark(2e-5), SolverKind::Monolithic, |_| {}).unwrap();
    let diff = |dt| {
        let p = run_benchmark(&coarse_benchmark(dt), SolverKind::Partitioned, |_| {}).unwrap();
        profile_differences(&p.profiles[1], &mono.profiles[1])[0]
    };
    let (coarse, fine) = (diff(1e-4), diff(5e-5));
    assert!(fine < coarse, "{fine} !< {coarse}");
    assert!(fine < 0.2, "{fine}");
}

#[test]
fn benchmark_outputs_share_shape() {
    let a = run_benchmark(&coarse_benchmark(1e-4), SolverKind::Partitioned, |_| {}).unwrap();
    let b = run_benchmark(&coarse_benchmark(1e-4), SolverKind::Monolithic, |_| {}).unwrap();
    assert_eq!(a.profiles.len(), b.profiles.len());
    for (p, q) in a.profiles.iter().zip(&b.profiles) {
        assert_eq!(p.x, q.x);
        assert_eq!(p.t, q.t);
    }
    assert!(a.profiles[1].flowrate[0] > 0.0);
}

#[test]
fn monolithic_from_rest_stays_at_rest() {
    let disc = Discretization::new(&MeshParams::unit_square(0.25), ElementChoice::Mini).unwrap();
    let sc = SchemeConfig {
        dt: 0.01,
        t_final: 0.05,
        ..SchemeConfig::default()
    };
    let mut m = MonolithicFsi::new(Arc::clone(&disc), MaterialParams::unit(), sc, Arc::new(Unforced)).unwrap();
    m.run(5).unwrap();
    let st = m.state();
    assert!(st.v.iter().chain(&st.p).chain(&st.eta).all(|x| *x == 0.0));
}
