mod common;

use membranes::energy::{MembranePair, MembraneSystem, ProblemSpec};
use membranes::linalg::cholesky_solve;
use membranes::solver::{
    project_admissible, solve, solve_active_set, solve_projected_gradient, solve_viscosity_sweep,
    InitialGuess, Method, SolverConfig, ACTIVE_SET_CAP,
};
use membranes::Error;

use common::{constant_data_problem, grid1};

const METHODS: [Method; 5] = [
    Method::ProjectedGradient,
    Method::AcceleratedPG,
    Method::ActiveSetQP,
    Method::ViscositySweep,
    Method::AlternatingObstacle,
];

fn crossing(nodes: usize) -> ProblemSpec {
    constant_data_problem(&grid1(nodes), 0.35, 0.65, |x| 2.0 + x, |_| -1.0, 0.2, -0.2)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn pair_diff(p: &MembranePair, q: &MembranePair) -> f64 {
    let ((a1, a2), (b1, b2)) = (p.interior(), q.interior());
    sup_diff(&a1, &b1).max(sup_diff(&a2, &b2))
}

fn unconstrained(problem: &ProblemSpec) -> (Vec<f64>, Vec<f64>) {
    let system = MembraneSystem::new(problem).unwrap();
    (
        cholesky_solve(system.a1.to_dense(), &system.c1).unwrap(),
        cholesky_solve(system.a2.to_dense(), &system.c2).unwrap(),
    )
}

#[test]
fn method_names_round_trip() {
    for m in METHODS {
        assert_eq!(Method::parse(m.name()), Some(m));
    }
    assert_eq!(Method::parse("newton"), None);
}

#[test]
fn projection_keeps_admissible_pairs_and_meets_at_midpoints() {
    let problem = crossing(9);
    let system = MembraneSystem::new(&problem).unwrap();
    let n = system.len();
    let ok = system.pair(&vec![1.0; n], &vec![0.0; n]);
    assert_eq!(project_admissible(&ok), ok);
    let mut u2 = vec![0.0; n];
    u2[3] = 3.0;
    let bad = system.pair(&vec![1.0; n], &u2);
    let fixed = project_admissible(&bad);
    let (a, b) = fixed.interior();
    assert_eq!((a[3], b[3]), (2.0, 2.0));
    assert_eq!((a[2], b[2]), (1.0, 0.0));
    assert_eq!(project_admissible(&fixed), fixed);
}

#[test]
fn zero_problem_is_solved_immediately() {
    let problem = constant_data_problem(&grid1(15), 0.4, 0.6, |_| 0.0, |_| 0.0, 0.0, 0.0);
    for m in [Method::ProjectedGradient, Method::ActiveSetQP] {
        let (pair, report) = solve(&problem, &SolverConfig::with_method(m)).unwrap();
        assert!(report.converged);
        assert!(report.iterations <= 2, "{m:?}: {}", report.iterations);
        let (a, b) = pair.interior();
        assert!(a.iter().chain(&b).all(|&v| v == 0.0));
        assert_eq!(report.final_energy, 0.0);
    }
}

#[test]
fn separated_data_reproduce_the_unconstrained_solves() {
    let problem = constant_data_problem(&grid1(31), 0.4, 0.6, |_| 0.5, |_| -0.5, 1.0, -1.0);
    let (v1, v2) = unconstrained(&problem);
    for m in METHODS {
        let (pair, report) = solve(&problem, &SolverConfig::with_method(m)).unwrap();
        assert!(report.converged, "{m:?}");
        assert_eq!(report.contact_count(), 0);
        let (a, b) = pair.interior();
        assert!(sup_diff(&a, &v1).max(sup_diff(&b, &v2)) <= 1e-7, "{m:?}");
    }
}

#[test]
fn all_methods_agree_on_crossing_data() {
    let problem = crossing(17);
    let (reference, ref_report) = solve_active_set(&problem, &SolverConfig::default()).unwrap();
    assert!(ref_report.converged && ref_report.contact_count() > 0);
    for m in METHODS {
        let (pair, report) = solve(&problem, &SolverConfig::with_method(m)).unwrap();
        assert!(report.converged, "{m:?}");
        assert!(pair_diff(&pair, &reference) <= 1e-7, "{m:?}: {}", pair_diff(&pair, &reference));
        let rel = (report.final_energy - ref_report.final_energy).abs() / ref_report.final_energy.abs();
        assert!(rel <= 1e-8, "{m:?}: energy {rel}");
        assert!(report.residuals.within(1e-8));
    }
}

#[test]
fn iterative_methods_keep_the_order_exactly() {
    let problem = crossing(33);
    for m in [Method::ProjectedGradient, Method::AcceleratedPG, Method::ViscositySweep, Method::ActiveSetQP] {
        let (pair, _) = solve(&problem, &SolverConfig::with_method(m)).unwrap();
        let (a, b) = pair.interior();
        assert!(a.iter().zip(&b).all(|(x, y)| y <= x), "{m:?}");
    }
}

#[test]
fn larger_first_forcing_lowers_both_membranes_and_grows_contact() {
    let grid = grid1(25);
    let mut prev: Option<MembranePair> = None;
    let mut prev_mask: Option<Vec<bool>> = None;
    for f1 in [0.5, 1.0, 2.0, 4.0] {
        let problem = constant_data_problem(&grid, 0.35, 0.65, move |_| f1, |_| -1.0, 0.2, -0.2);
        let (pair, report) = solve_active_set(&problem, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        if let Some(p) = &prev {
            let ((a, b), (pa, pb)) = (pair.interior(), p.interior());
            assert!(a.iter().zip(&pa).all(|(x, y)| *x <= y + 1e-9));
            assert!(b.iter().zip(&pb).all(|(x, y)| *x <= y + 1e-9));
        }
        if let Some(m) = &prev_mask {
            assert!(m.iter().zip(&report.contact).all(|(a, b)| !a || *b), "f1 = {f1}: contact shrank");
        }
        prev = Some(pair);
        prev_mask = Some(report.contact);
    }
}

#[test]
fn solution_is_positively_homogeneous_in_the_data() {
    let grid = grid1(21);
    let base = constant_data_problem(&grid, 0.3, 0.7, |x| 1.5 - x, |_| -0.5, 0.1, -0.1);
    let scaled = constant_data_problem(&grid, 0.3, 0.7, |x| 3.0 * (1.5 - x), |_| -1.5, 0.3, -0.3);
    let (p, _) = solve_active_set(&base, &SolverConfig::default()).unwrap();
    let (q, _) = solve_active_set(&scaled, &SolverConfig::default()).unwrap();
    let ((a, b), (c, d)) = (p.interior(), q.interior());
    let a3: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
    let b3: Vec<f64> = b.iter().map(|v| 3.0 * v).collect();
    assert!(sup_diff(&a3, &c).max(sup_diff(&b3, &d)) <= 1e-10);
}

#[test]
fn size_cap_is_reported_before_assembly_of_the_dense_system() {
    let nodes = ACTIVE_SET_CAP / 2 + 1;
    let nodes = if nodes % 2 == 0 { nodes + 1 } else { nodes };
    let problem = constant_data_problem(&grid1(nodes), 0.4, 0.6, |_| 1.0, |_| -1.0, 0.0, 0.0);
    match solve_active_set(&problem, &SolverConfig::default()) {
        Err(Error::SizeCap { unknowns, cap }) => {
            assert_eq!(cap, ACTIVE_SET_CAP);
            assert!(unknowns > cap);
        }
        other => panic!("expected SizeCap, got {:?}", other.map(|r| r.1.method)),
    }
}

#[test]
fn sweep_limit_does_not_depend_on_the_initial_guess() {
    let problem = crossing(33);
    let (reference, _) = solve_active_set(&problem, &SolverConfig::default()).unwrap();
    for seed in 1..5 {
        let cfg = SolverConfig {
            seed,
            initial: InitialGuess::Random { amplitude: 2.0 },
            ..SolverConfig::with_method(Method::ViscositySweep)
        };
        let (pair, report) = solve_viscosity_sweep(&problem, &cfg).unwrap();
        assert!(report.converged);
        assert!(pair_diff(&pair, &reference) <= 1e-7, "seed {seed}");
    }
}

#[test]
fn sup_norm_bounded_by_the_unconstrained_solutions() {
    // u1 >= v1 and u2 <= v2 by comparison; off contact u1 - v1 is harmonic, on contact
    // u1 = u2 <= v2, so u1 <= v1 + max (v2 - v1)^+.
    for (s1, s2) in [(0.3, 0.7), (0.5, 0.5), (0.6, 0.4)] {
        let problem = constant_data_problem(&grid1(41), s1, s2, |x| 2.0 + x, |x| -1.0 + x * x, 0.25, -0.15);
        let (v1, v2) = unconstrained(&problem);
        let (pair, report) = solve_active_set(&problem, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        let (u1, u2) = pair.interior();
        let lift = v2.iter().zip(&v1).map(|(b, a)| (b - a).max(0.0)).fold(0.0, f64::max);
        let c = v1.iter().chain(&v2).fold(0.0f64, |m, v| m.max(v.abs())) + lift;
        for i in 0..u1.len() {
            assert!(u1[i] >= v1[i] - 1e-9 && u2[i] <= v2[i] + 1e-9);
            assert!(u1[i] <= v1[i] + lift + 1e-9);
        }
        let sup = u1.iter().chain(&u2).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(sup <= c + 1e-9, "({s1}, {s2}): {sup} > C = {c}");
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let problem = crossing(9);
    let bad = [
        SolverConfig { tol: 0.0, ..SolverConfig::default() },
        SolverConfig { max_iters: 0, ..SolverConfig::default() },
        SolverConfig { relaxation: Some(2.5), ..SolverConfig::with_method(Method::ViscositySweep) },
    ];
    for cfg in bad {
        assert!(matches!(solve(&problem, &cfg), Err(Error::Precondition(_))), "{cfg:?}");
    }
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let problem = crossing(33);
    let cfg = SolverConfig { max_iters: 1, ..SolverConfig::with_method(Method::ProjectedGradient) };
    let (_, report) = solve_projected_gradient(&problem, &cfg).unwrap();
    assert!(!report.converged);
    assert_eq!(report.iterations, 1);
}

#[test]
fn order_warning_when_first_membrane_is_more_regular() {
    let problem = constant_data_problem(&grid1(15), 0.7, 0.3, |_| 1.0, |_| -1.0, 0.0, 0.0);
    let (_, report) = solve(&problem, &SolverConfig::default()).unwrap();
    assert!(report.warnings.iter().any(|w| w.contains("s1 > s2")));
}
