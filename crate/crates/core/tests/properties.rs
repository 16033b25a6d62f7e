use proptest::prelude::*;

use varfd::cell::{solve_cell, BoundaryDatum, CellProblem, CompetitorClass, SolverParams};
use varfd::energy::{const_surface, eval_energy, power, EnergyContext};
use varfd::limits::homogenize_oracle_1d;
use varfd::sbv::{glue_with_cutoff, truncate, EdgeId, SbvGridFunction};
use varfd::varexp::{
    check_norm_modular_inequalities, luxembourg_norm, Ball, ExponentField, Grid, GridFunction,
    Region, VarExponent,
};

const N: usize = 17;

fn grid1() -> Grid {
    Grid::unit_interval(N - 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn luxembourg_norm_is_homogeneous(
        p in prop::collection::vec(1.2f64..4.0, N),
        u in prop::collection::vec(-3.0f64..3.0, N),
        lambda in -5.0f64..5.0,
    ) {
        let g = grid1();
        let p = VarExponent::new(g.clone(), p).unwrap();
        let u = GridFunction::new(g, 1, u).unwrap();
        let a = luxembourg_norm(&u.scaled(lambda), &p).unwrap();
        let b = lambda.abs() * luxembourg_norm(&u, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * b.max(1e-12), "{a} vs {b}");
    }

    #[test]
    fn norm_modular_bounds_hold(
        p in prop::collection::vec(1.1f64..5.0, N),
        u in prop::collection::vec(-10.0f64..10.0, N),
    ) {
        let g = grid1();
        let p = VarExponent::new(g.clone(), p).unwrap();
        let u = GridFunction::new(g, 1, u).unwrap();
        prop_assume!(u.sup_norm() > 0.0);
        let rep = check_norm_modular_inequalities(&u, &p, &[0.3, 3.0]).unwrap();
        prop_assert!(rep.norm_bounds_hold && rep.scaling_holds);
    }

    #[test]
    fn cracks_without_jump_cost_nothing(
        u in prop::collection::vec(-1.0f64..1.0, N),
        edge in 0usize..N - 1,
    ) {
        let g = grid1();
        let mut vals = u;
        vals[edge + 1] = vals[edge];
        let base = GridFunction::new(g.clone(), 1, vals).unwrap();
        let ctx = EnergyContext::new(
            power(ExponentField::constant(2.0)).unwrap(),
            const_surface(1.0).unwrap(),
            g.clone(),
        );
        let all = Region::all(&g);
        let plain = eval_energy(&ctx, &SbvGridFunction::uncracked(base.clone()), &all).unwrap();
        let id = g.edge_from(edge, 0).unwrap().id;
        let cracked = SbvGridFunction::new(base, &[id]).unwrap();
        let e = eval_energy(&ctx, &cracked, &all).unwrap();
        prop_assert_eq!(plain.total, e.total);
    }

    #[test]
    fn truncation_is_idempotent_and_shrinks_jumps(
        u in prop::collection::vec(-2.0f64..2.0, 81),
        cracks in prop::collection::vec(0usize..144, 0..3),
    ) {
        let g = Grid::cube(2, 9, 0.0, 1.0).unwrap();
        let base = GridFunction::new(g.clone(), 1, u).unwrap();
        let ids: Vec<EdgeId> = g.edges().map(|e| e.id).collect();
        let cracks: Vec<EdgeId> = cracks.iter().map(|&i| ids[i % ids.len()]).collect();
        let u = SbvGridFunction::new(base, &cracks).unwrap();
        let ball = Ball::new(&[0.5, 0.5], 0.45);
        if let Ok((t, data)) = truncate(&u, &ball, 2.0) {
            let (tt, _) = truncate(&t, &ball, 2.0).unwrap();
            prop_assert!(tt == t);
            prop_assert!(data.changed_within_bound());
            for e in g.edges() {
                prop_assert!(t.jump(&e)[0].abs() <= u.jump(&e)[0].abs());
            }
        }
    }

    #[test]
    fn glue_respects_certified_bound(
        u in prop::collection::vec(-1.0f64..1.0, 33),
        v in prop::collection::vec(-1.0f64..1.0, 33),
        p in 1.3f64..3.0,
        eta in 0.02f64..0.5,
    ) {
        let g = Grid::unit_interval(32).unwrap();
        let ctx = EnergyContext::new(
            power(ExponentField::constant(p)).unwrap(),
            const_surface(1.0).unwrap(),
            g.clone(),
        );
        let d1 = Region::from_fn(&g, |_, x| x[0] < 0.3);
        let d2 = Region::from_fn(&g, |_, x| x[0] < 0.6);
        let e = Region::from_fn(&g, |_, x| x[0] > 0.4);
        let u = SbvGridFunction::uncracked(GridFunction::new(g.clone(), 1, u).unwrap());
        let v = SbvGridFunction::uncracked(GridFunction::new(g.clone(), 1, v).unwrap());
        let out = glue_with_cutoff(&u, &v, &d1, &d2, &e, eta, &ctx).unwrap();
        let lhs = eval_energy(&ctx, &out.w, &d1.union(&e)).unwrap().total;
        prop_assert!(lhs <= out.certified_bound);
    }

    #[test]
    fn homogenized_coefficient_lies_between_extremes(
        a in prop::collection::vec(0.1f64..10.0, 1..6),
        p in 1.2f64..4.0,
    ) {
        let o = homogenize_oracle_1d(&a, p, 1.0).unwrap();
        let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().copied().fold(0.0, f64::max);
        prop_assert!(o.a_hom >= lo * (1.0 - 1e-12) && o.a_hom <= hi * (1.0 + 1e-12));
        prop_assert!((o.value - o.flux_value).abs() <= 1e-8 * o.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sbv_minimum_is_below_class_minima(
        p in 1.5f64..3.0,
        kappa in 0.2f64..2.0,
        zeta in 0.5f64..3.0,
        jump in any::<bool>(),
    ) {
        let datum = if jump {
            BoundaryDatum::jump_scalar(zeta, 1, 0)
        } else {
            BoundaryDatum::affine_scalar(&[zeta])
        };
        let problem = |class| CellProblem {
            bulk: power(ExponentField::constant(p)).unwrap(),
            surface: const_surface(kappa).unwrap(),
            dim: 1,
            datum: datum.clone(),
            center: vec![0.0],
            radius: 0.5,
            class,
            params: SolverParams { nodes: 12, ..SolverParams::default() },
        };
        let sbv = solve_cell(&problem(CompetitorClass::Sbv)).unwrap().energy;
        let sob = solve_cell(&problem(CompetitorClass::Sobolev)).unwrap().energy;
        prop_assert!(sbv <= sob * (1.0 + 1e-9));
        if jump {
            let pc = solve_cell(&problem(CompetitorClass::Pc)).unwrap().energy;
            prop_assert!(sbv <= pc * (1.0 + 1e-9));
        }
    }
}
