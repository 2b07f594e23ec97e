mod common;

use approx::assert_abs_diff_eq;
use common::*;
use proptest::prelude::*;
use stochdual::convex::fenchel_residual;
use stochdual::solver::{dual_objective, dual_via_orthocomplement, solve_primal};
use stochdual::{Polyhedron, SolverOptions};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adapted_and_orthogonal_processes_are_orthogonal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let tree = random_tree(&mut r, 8, 4);
        let dims = random_dims(&mut r, tree.stage_count(), 4, true);
        let x = random_adapted(&mut r, &tree, &dims, 3.0);
        let v = random_orthogonal(&mut r, &tree, &dims, 3.0);
        assert_abs_diff_eq!(tree.pairing(&x, &v).unwrap(), 0.0, epsilon = 1e-10);
        prop_assert!(tree.in_orthocomplement(&v, 1e-10).holds);
    }

    #[test]
    fn adapted_projection_is_idempotent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let tree = random_tree(&mut r, 8, 4);
        let dims = random_dims(&mut r, tree.stage_count(), 4, true);
        let p = random_adapted(&mut r, &tree, &dims, 2.0);
        prop_assert!(tree.is_adapted(&p));
        let again = tree.adapted_projection(&p).unwrap();
        prop_assert!(again.sub(&p).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn generated_cones_contain_their_generators(
        angles in prop::collection::vec(0.0..std::f64::consts::TAU, 1..5),
        weights in prop::collection::vec(0.0..3.0_f64, 5),
    ) {
        let gens: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
        let cone = Polyhedron::cone_from_generators(&gens).unwrap();
        let mut combo = vec![0.0, 0.0];
        for (g, w) in gens.iter().zip(&weights) {
            prop_assert!(cone.contains(g, 1e-9));
            combo[0] += w * g[0];
            combo[1] += w * g[1];
        }
        prop_assert!(cone.contains(&combo, 1e-9));
        prop_assert!(cone.contains(&[0.0, 0.0], 0.0));
    }

    #[test]
    fn fenchel_young_holds_for_catalog_functions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (nx, nu) = (1 + (seed % 2) as usize, (seed / 2 % 2) as usize);
        let g = random_joint(&mut r, nx, nu);
        let n = nx + nu;
        let dims = vec![n];
        let x = random_process(&mut r, &dims, 1, 2.0).leaf_vector(0);
        let v = random_process(&mut r, &dims, 1, 2.0).leaf_vector(0);
        let residual = fenchel_residual(&g, &x, &v).unwrap();
        prop_assert!(residual >= -1e-9, "g(x) + g*(v) - x.v = {residual}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dual_chain_is_ordered(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = random_generic(&mut r, 4, 2);
        let tree = p.tree().clone();
        let u = random_process(&mut r, p.u_dims(), tree.leaf_count(), 1.0);
        let y = random_process(&mut r, p.u_dims(), tree.leaf_count(), 1.0);
        let d = dual_objective(&p, &y).unwrap().value;
        let bound = dual_via_orthocomplement(&p, &y).unwrap().value;
        prop_assert!(!(d > bound + 1e-6), "{d} > {bound}");
        let primal = solve_primal(&p, &u, &SolverOptions::default()).unwrap();
        let lhs = tree.pairing(&u, &y).unwrap() - d;
        prop_assert!(!(lhs > primal.value + 1e-6), "{lhs} > {}", primal.value);
    }
}
