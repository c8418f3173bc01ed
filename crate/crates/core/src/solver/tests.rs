use super::*;
use crate::manufactured::{make_case, CaseId};
use crate::mesh::{build_unit_square, unit_square_diagonal};

fn square(n: usize) -> Arc<Mesh> {
    Arc::new(unit_square_diagonal(n))
}

fn disc(mesh: Arc<Mesh>, problem: ProblemSpec, variant: Variant, k: usize) -> Discretization {
    let spaces = Arc::new(build_spaces(mesh, k, variant).unwrap());
    Discretization::new(spaces, problem, DEFAULT_ALPHA).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn config_validation() {
    let ok = SolverConfig::new(Variant::FullHdg, 2);
    assert!(ok.validate().is_ok());
    let bad = [
        SolverConfig { tau_factor: 2.0, ..ok.clone() },
        SolverConfig { tau: Some(0.0), ..ok.clone() },
        SolverConfig { order: 4, ..ok.clone() },
        SolverConfig { order: 0, ..ok.clone() },
        SolverConfig { tol_density: -1.0, ..ok.clone() },
        SolverConfig { max_iters: 0, ..ok.clone() },
        SolverConfig { alpha: f64::NAN, ..ok.clone() },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(SolverError::InvalidConfig(_))), "{c:?}");
    }
}

#[test]
fn config_json() {
    let c: SolverConfig = serde_json::from_str(r#"{"variant": "full-hdg", "order": 3, "tau": 0.5}"#).unwrap();
    assert_eq!(c.variant, Variant::FullHdg);
    assert_eq!(c.tau, Some(0.5));
    assert_eq!(c.max_iters, SolverConfig::default().max_iters);
    assert!(serde_json::from_str::<SolverConfig>(r#"{"order": 2, "omega": 1}"#).is_err());
}

#[test]
fn invalid_problem_data() {
    let spaces = Arc::new(build_spaces(square(2), 1, Variant::HdivHdg).unwrap());
    for p in [ProblemSpec::new(0.0, 1.0, 1.0), ProblemSpec::new(1.0, -1.0, 1.0), ProblemSpec::new(1.0, 1.0, f64::INFINITY)] {
        assert!(matches!(Discretization::new(spaces.clone(), p, DEFAULT_ALPHA), Err(SolverError::InvalidConfig(_))));
    }
}

#[test]
fn unforced_problem_is_at_rest() {
    for variant in [Variant::HdivHdg, Variant::FullHdg] {
        let mut d = disc(square(2), ProblemSpec::new(1.0, 1.0, 2.0), variant, 2);
        let (state, report) = iterate(&mut d, &SolverConfig::new(variant, 2)).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations(), 1);
        assert!(norm(&state.velocity) < 1e-13);
        let expected = d.initial_density();
        assert!(state.density.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!((d.spaces().density_mass(&state.density) - 2.0).abs() < 1e-14);
    }
}

#[test]
fn zero_velocity_leaves_density_unchanged() {
    let mut d = disc(square(2), ProblemSpec::new(1.0, 1.0, 1.0), Variant::HdivHdg, 2);
    let rho: Vec<f64> = (0..d.spaces().num_density()).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
    let u = vec![0.0; d.spaces().num_velocity()];
    let c = d.transport(&u);
    let inflow = d.inflow(&u);
    let next = d.density_step(&c, &inflow, &rho, 0.3).unwrap();
    assert!(next.iter().zip(&rho).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn gradient_force_is_balanced_by_density() {
    // a linear potential is represented exactly by a P1 density
    for variant in [Variant::HdivHdg, Variant::FullHdg] {
        let mut p = ProblemSpec::new(1e-3, 1.0, 1.0);
        p.force = Some(Arc::new(|_x: Point| [0.1, -0.05]));
        let mut d = disc(square(2), p, variant, 2);
        let (state, report) = iterate(&mut d, &SolverConfig::new(variant, 2)).unwrap();
        assert!(report.converged);
        let e = d.spaces().l2_project_density(&|x: Point| 1.0 + 0.1 * (x[0] - 0.5) - 0.05 * (x[1] - 0.5));
        let drho = state.density.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(norm(&state.velocity) < 1e-9, "{variant}: {}", norm(&state.velocity));
        assert!(drho < 1e-9, "{variant}: {drho}");
    }
}

#[test]
fn closed_runs_keep_mass_and_positivity() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Vortex, 1.0, 1.0, &mesh);
    for variant in [Variant::HdivHdg, Variant::FullHdg] {
        let (_, report) = solve_fixed_point(&case.problem(), mesh.clone(), &SolverConfig::new(variant, 1)).unwrap();
        assert!(report.converged);
        assert!(report.min_density() > 0.0);
        assert!(report.max_mass_drift(1.0) < 1e-12);
        let (ru, rr) = report.final_residuals().unwrap();
        assert!(ru <= 1e-10 && rr <= 1e-10);
    }
}

#[test]
fn open_run_converges() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Nonhydro, 1.0, 1.0, &mesh);
    let (_, report) = solve_fixed_point(&case.problem(), mesh, &SolverConfig::new(Variant::HdivHdg, 1)).unwrap();
    assert!(report.converged && !report.roundoff_limited);
    assert!(report.min_density() > 0.0);
}

#[test]
fn runs_are_reproducible() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Vortex, 1.0, 1.0, &mesh);
    let cfg = SolverConfig::new(Variant::HdivHdg, 2);
    let (a, ra) = solve_fixed_point(&case.problem(), mesh.clone(), &cfg).unwrap();
    let (b, rb) = solve_fixed_point(&case.problem(), mesh, &cfg).unwrap();
    assert_eq!(a.velocity, b.velocity);
    assert_eq!(a.density, b.density);
    assert_eq!(ra, rb);
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Vortex, 1.0, 1.0, &mesh);
    let cfg = SolverConfig { max_iters: 3, ..SolverConfig::new(Variant::HdivHdg, 1) };
    let (state, report) = solve_fixed_point(&case.problem(), mesh, &cfg).unwrap();
    assert!(!report.converged);
    assert_eq!(state.iterations, 3);
    assert_eq!(state.residual_history.len(), 3);
    assert_eq!(report.to_csv().lines().count(), 4);
}

#[test]
fn fixed_step_is_used() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Vortex, 1.0, 1.0, &mesh);
    let cfg = SolverConfig { tau: Some(0.25), max_iters: 2, ..SolverConfig::new(Variant::HdivHdg, 1) };
    let (_, report) = solve_fixed_point(&case.problem(), mesh, &cfg).unwrap();
    assert_eq!(report.tau, 0.25);
    assert!(report.records.iter().all(|r| r.tau == 0.25));
}

#[test]
fn automatic_step_scaling() {
    let t = auto_tau(1e-2, 4.0, 1.0, 5.0, 2.0);
    assert!((t - 1e-2 / 40.0).abs() < 1e-16);
    assert!((auto_tau(2e-2, 4.0, 1.5, 5.0, 2.0) - 3.0 * t).abs() < 1e-16);
}

#[test]
fn stagnation_detection() {
    let falling: Vec<f64> = (0..60).map(|i| 0.5f64.powi(i)).collect();
    assert!(!stagnated(&falling));
    let mut flat = falling[..30].to_vec();
    flat.extend((0..25).map(|i| falling[29] * (1.0 + 0.1 * (i % 3) as f64)));
    assert!(stagnated(&flat));
    assert!(!stagnated(&[1.0; 10]));
}

#[test]
fn momentum_step_solves_the_balance() {
    let mesh = Arc::new(build_unit_square(0));
    let case = make_case(CaseId::Vortex, 0.1, 2.0, &mesh);
    let d = disc(mesh, case.problem(), Variant::FullHdg, 2);
    let rho = d.spaces().l2_project_density(case.density.as_ref());
    let u = d.momentum_step(&rho);
    let c = d.transport(&u);
    let (ru, _) = d.residuals(&u, &rho, &c, &d.inflow(&u));
    assert!(ru < 1e-10 * d.momentum_scale(&u, &rho), "{ru}");
}
