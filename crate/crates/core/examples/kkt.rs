//! Karush-Kuhn-Tucker certificates for a scenario-wise constrained program,
//! with a perturbed multiplier that fails stationarity.

use stochdual::models::build_constrained;
use stochdual::optimality::{check_kkt, DEFAULT_TOL};
use stochdual::solver::{solve_dual_pair, solve_primal};
use stochdual::{ConvexFunction, ScenarioTree, SolverOptions, StochasticProcess};

fn main() -> stochdual::Result<()> {
    // minimize E x^2 subject to 1 - x + u <= 0, with x decided before the
    // scenario-dependent shift u is revealed; the binding scenario sets x = 1.5
    let tree = ScenarioTree::two_stage(vec![0.25, 0.75])?;
    let objective = vec![ConvexFunction::quadratic(vec![1.0]); 2];
    let constraints = vec![vec![ConvexFunction::affine(vec![-1.0], 1.0)]; 2];
    let p = build_constrained(tree, vec![1, 0], objective, constraints)?;
    let u = StochasticProcess::from_nested(vec![vec![vec![], vec![]], vec![vec![0.0], vec![0.5]]])?;

    let opts = SolverOptions::default();
    let x = solve_primal(&p, &u, &opts)?;
    let (y, v) = solve_dual_pair(&p, &u, &opts)?;
    println!("x_0 = {:.6}, value {:.6}", x.optimizer.get(0, 0)[0], x.value);
    println!("multipliers {:?} / {:?}", y.optimizer.get(1, 0), y.optimizer.get(1, 1));

    let cert = check_kkt(&p, &x.optimizer, &u, &y.optimizer, &v, DEFAULT_TOL)?;
    println!("{:?}, max residual {:.1e}", cert.verdict, cert.max_residual());

    let perturbed = y.optimizer.scale(1.25);
    let bad = check_kkt(&p, &x.optimizer, &u, &perturbed, &v, DEFAULT_TOL)?;
    println!("perturbed multiplier: {:?}", bad.verdict);
    for row in bad.rows.iter().filter(|r| r.residual > bad.tol) {
        println!("  {} at node {}: {:.3e}", row.condition, row.node, row.residual);
    }
    Ok(())
}
