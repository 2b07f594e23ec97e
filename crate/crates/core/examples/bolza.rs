//! A stochastic Bolza problem: the primal-dual solution satisfies both the
//! Euler-Lagrange and the Hamiltonian system, and nonadapted duals are
//! dominated by their adapted projections.

use stochdual::duality::bolza_dual_value;
use stochdual::models::build_bolza;
use stochdual::optimality::{check_euler_lagrange, check_hamiltonian_system, DEFAULT_TOL};
use stochdual::solver::{dual_objective, solve_dual, solve_primal};
use stochdual::{ConvexFunction, ScenarioTree, SolverOptions, StageCost, StochasticProcess};

fn main() -> stochdual::Result<()> {
    let tree = ScenarioTree::binary(2, 0.5)?;
    let leaves = tree.leaf_count();
    let cost = StageCost::Separable {
        state: ConvexFunction::quadratic(vec![0.5]),
        velocity: ConvexFunction::quadratic(vec![0.5]),
    };
    let costs = vec![vec![cost; leaves]; tree.stage_count()];
    let p = build_bolza(tree, costs)?;
    let tree = p.tree().clone();
    let shocks = StochasticProcess::from_fn(p.u_dims(), leaves, |t, l, _| if t == 0 { 1.0 } else { (l as f64) - 1.5 });
    let u = tree.adapted_projection(&shocks)?;

    let opts = SolverOptions::default();
    let x = solve_primal(&p, &u, &opts)?;
    let y = solve_dual(&p, &u, &opts)?;
    println!("primal {:.6}  dual {:.6}", x.value, y.value);
    let el = check_euler_lagrange(&p, &x.optimizer, &u, &y.optimizer, DEFAULT_TOL)?;
    let ham = check_hamiltonian_system(&p, &x.optimizer, &u, &y.optimizer, DEFAULT_TOL)?;
    println!("Euler-Lagrange {:?} (max residual {:.1e})", el.verdict, el.max_residual());
    println!("Hamiltonian    {:?} (max residual {:.1e})", ham.verdict, ham.max_residual());
    println!("dual value through stage conjugates: {:.6}", bolza_dual_value(&p, &u, &y.optimizer, 1e-8)?);

    // a nonadapted dual does no better than its adapted projection
    let noisy = y.optimizer.add(&StochasticProcess::from_fn(p.u_dims(), leaves, |t, l, _| 0.1 * ((t + l) % 3) as f64))?;
    let projected = tree.adapted_projection(&noisy)?;
    println!(
        "phi*(y) = {:.6} >= phi*(projection of y) = {:.6}",
        dual_objective(&p, &noisy)?.value,
        dual_objective(&p, &projected)?.value
    );
    Ok(())
}
