//! Primal and dual values of a two-stage tracking problem, the duality gap,
//! and the bound through shadow prices of information.

use stochdual::solver::{dual_objective, dual_via_orthocomplement, duality_gap, solve_dual_pair};
use stochdual::{ConvexFunction, Layout, ParametricIntegrand, Problem, ScenarioTree, SolverOptions, StochasticProcess};

fn main() -> stochdual::Result<()> {
    // a decision x_0 made before the scenario is revealed tracks a target
    // u_1 known only at the end: minimize E (x_0 - u_1)^2 / 2
    let tree = ScenarioTree::two_stage(vec![0.5, 0.5])?;
    let tracking = ConvexFunction::compose(ConvexFunction::quadratic(vec![0.5]), vec![vec![1.0, -1.0]], vec![0.0]);
    let layout = Layout::new(vec![1, 0], vec![0, 1])?;
    let p = Problem::new(ParametricIntegrand::generic(tree, layout, vec![tracking; 2])?);
    let u = StochasticProcess::from_nested(vec![vec![vec![], vec![]], vec![vec![1.0], vec![3.0]]])?;

    let opts = SolverOptions::default();
    let gap = duality_gap(&p, &u, &opts)?;
    println!("primal {:.6}  dual {:.6}  gap {:.2e}", gap.primal.value, gap.dual.value, gap.gap);
    println!("optimal x_0 = {:?}", gap.primal.optimizer.get(0, 0));

    let (dual, v) = solve_dual_pair(&p, &u, &opts)?;
    let y = &dual.optimizer;
    println!("dual y_1 = {:?} / {:?}", y.get(1, 0), y.get(1, 1));
    println!("shadow price of information v_0 = {:?} / {:?}", v.get(0, 0), v.get(0, 1));
    let phi = dual_objective(&p, y)?.value;
    let bound = dual_via_orthocomplement(&p, y)?.value;
    println!("phi*(y) = {phi:.6} <= inf over v of E f*(v, y) = {bound:.6}");
    Ok(())
}
