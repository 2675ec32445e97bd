mod common;

use membranes::config::Expression;
use membranes::energy::{inner_product, MembraneSystem};
use membranes::grid_kernel::{apply_operator, build_operator, GridFunction, KernelSpec};
use membranes::obstacle::{solve_obstacle, ObstacleProblemSpec};
use membranes::solver::{project_admissible, solve_active_set, SolverConfig};
use proptest::prelude::*;

use common::{constant_data_problem, field, grid1};

const NODES: usize = 21;

fn compact(values: &[f64]) -> GridFunction {
    let grid = grid1(NODES);
    let mut f = GridFunction::zeros(grid.clone());
    for (k, &i) in grid.interior().iter().enumerate() {
        f.values_mut()[i] = values[k];
    }
    f
}

fn interior_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, NODES)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent_and_ordered(a in interior_values(), b in interior_values()) {
        let problem = constant_data_problem(&grid1(NODES), 0.4, 0.6, |_| 0.0, |_| 0.0, 0.0, 0.0);
        let system = MembraneSystem::new(&problem).unwrap();
        let p = project_admissible(&system.pair(&a, &b));
        let (u1, u2) = p.interior();
        prop_assert!(u1.iter().zip(&u2).all(|(x, y)| y <= x));
        prop_assert_eq!(project_admissible(&p), p.clone());
        // the projection only moves nodes that were out of order
        for k in 0..NODES {
            if b[k] <= a[k] {
                prop_assert_eq!((u1[k], u2[k]), (a[k], b[k]));
            }
        }
    }

    #[test]
    fn inner_product_is_symmetric_and_nonnegative(
        s in 0.1f64..0.9,
        a in interior_values(),
        b in interior_values(),
    ) {
        let (u, v) = (compact(&a), compact(&b));
        let k = KernelSpec::fractional(s).unwrap();
        let grid = u.grid().clone();
        let uv = inner_product(&u, &v, &k, &grid).unwrap();
        let vu = inner_product(&v, &u, &k, &grid).unwrap();
        let uu = inner_product(&u, &u, &k, &grid).unwrap();
        let vv = inner_product(&v, &v, &k, &grid).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-12 * (uu + vv));
        prop_assert!(uu >= 0.0 && vv >= 0.0);
        prop_assert!(uv * uv <= uu * vv * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn operator_is_linear(
        s in 0.1f64..0.9,
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        a in interior_values(),
        b in interior_values(),
    ) {
        let (u, v) = (compact(&a), compact(&b));
        let op = build_operator(u.grid(), &KernelSpec::fractional(s).unwrap()).unwrap();
        let combo = u.linear_combination(alpha, &v, beta).unwrap();
        let (lu, lv, lc) = (
            apply_operator(&op, &u).unwrap(),
            apply_operator(&op, &v).unwrap(),
            apply_operator(&op, &combo).unwrap(),
        );
        let scale = op.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for &i in u.grid().interior() {
            let expected = alpha * lu.values()[i] + beta * lv.values()[i];
            prop_assert!((lc.values()[i] - expected).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn active_set_solution_is_ordered_and_stationary(
        s1 in 0.2f64..0.5,
        s2 in 0.5f64..0.9,
        f1 in -1.0f64..3.0,
        f2 in -3.0f64..1.0,
        lift in 0.0f64..0.5,
    ) {
        let problem = constant_data_problem(&grid1(NODES), s1, s2, move |x| f1 + x, move |_| f2, lift, -lift);
        let cfg = SolverConfig::default();
        let (pair, report) = solve_active_set(&problem, &cfg).unwrap();
        prop_assert!(report.converged);
        let (u1, u2) = pair.interior();
        prop_assert!(u1.iter().zip(&u2).all(|(x, y)| y <= x));
        prop_assert!(report.residuals.within(cfg.tol));
    }

    #[test]
    fn obstacle_solution_stays_above_the_obstacle(
        s in 0.2f64..0.8,
        top in -0.5f64..0.8,
        f in -1.0f64..1.0,
    ) {
        let grid = grid1(NODES);
        let spec = ObstacleProblemSpec::new(
            KernelSpec::fractional(s).unwrap(),
            GridFunction::constant(grid.clone(), f),
            field(&grid, move |x| top - 2.0 * x * x),
            GridFunction::constant(grid.clone(), top.max(0.0)),
        )
        .unwrap();
        let (u, report) = solve_obstacle(&spec, &SolverConfig::default()).unwrap();
        prop_assert!(report.converged);
        for (ui, pi) in u.interior_values().iter().zip(spec.obstacle.interior_values()) {
            prop_assert!(*ui >= pi - 1e-12);
        }
    }

    #[test]
    fn affine_expressions_evaluate_exactly(a in -10i32..10, b in -10i32..10, x in -1.0f64..1.0) {
        let e = Expression::parse(&format!("{a} * x + ({b})")).unwrap();
        prop_assert_eq!(e.eval([x, 0.0]), f64::from(a) * x + f64::from(b));
    }
}
