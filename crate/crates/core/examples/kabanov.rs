//! A two-currency market with proportional transaction costs: the dual
//! optimizer is a consistent price system, checked through conical
//! complementary slackness.

use stochdual::models::{build_kabanov, kabanov_parameter};
use stochdual::optimality::{check_consistent_price_system, DEFAULT_TOL};
use stochdual::solver::{duality_gap, solve_dual, solve_primal};
use stochdual::{ConvexFunction, Polyhedron, ScenarioTree, SolverOptions, StochasticProcess};

fn main() -> stochdual::Result<()> {
    let tree = ScenarioTree::two_stage(vec![0.5, 0.5])?;
    // solvent exchanges: give up 1 unit of currency 0 for 1/1.1 of currency 1
    // and 1 unit of currency 1 for 0.9 of currency 0, or dispose freely
    let market = |rate: f64| {
        Polyhedron::cone_from_generators(&[
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
            vec![-1.0, 1.0 / (1.1 * rate)],
            vec![0.9 * rate, -1.0],
        ])
    };
    let cones = vec![vec![market(1.0)?], vec![market(1.2)?, market(0.8)?]];
    let disutility = ConvexFunction::quadratic(vec![0.5, 0.5]);
    let disutilities = vec![vec![disutility.clone()], vec![disutility.clone(), disutility]];
    let p = build_kabanov(tree, cones, disutilities)?;
    let tree = p.tree().clone();

    // endowment in both currencies, paid at the end
    let endowment = StochasticProcess::from_nested(vec![
        vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        vec![vec![1.0, -0.5], vec![-0.5, 1.0]],
    ])?;
    let u = kabanov_parameter(&endowment);
    let opts = SolverOptions::default();
    let gap = duality_gap(&p, &u, &opts)?;
    println!("primal {:.6}  dual {:.6}  gap {:.2e}", gap.primal.value, gap.dual.value, gap.gap);

    let x = solve_primal(&p, &u, &opts)?.optimizer;
    let y = solve_dual(&p, &u, &opts)?.optimizer;
    let m = 2;
    let part = |proc: &StochasticProcess, offset: usize| {
        StochasticProcess::from_fn(&[m, m], tree.leaf_count(), |t, l, i| proc.get(t, l)[offset + i])
    };
    let cert = check_consistent_price_system(&p, &part(&x, 0), &part(&x, m), &endowment, &part(&y, 0), DEFAULT_TOL)?;
    println!("consistent price system: {:?} (max residual {:.1e})", cert.verdict, cert.max_residual());
    for c in &cert.conical {
        println!("  stage {} block {}: conical triple holds {}, agrees with support argmax {}", c.stage, c.block, c.holds, c.agrees);
    }
    Ok(())
}
