//! Asset-liability management on a one-period binomial market: the dual
//! optimizer is a martingale density recovering the risk-neutral weights.

use stochdual::duality::{alm_dual_value, check_martingale_density};
use stochdual::models::build_alm;
use stochdual::solver::{duality_gap, solve_dual};
use stochdual::{ConvexFunction, ScenarioTree, SolverOptions, StochasticProcess};

fn main() -> stochdual::Result<()> {
    let tree = ScenarioTree::two_stage(vec![0.5, 0.5])?;
    let prices = StochasticProcess::from_nested(vec![vec![vec![1.0], vec![1.0]], vec![vec![2.0], vec![0.5]]])?;
    let disutility = vec![ConvexFunction::quadratic(vec![0.5]); 2];
    let p = build_alm(tree, disutility, prices.clone())?;
    // liabilities due at the end: one unit in each scenario
    let u = StochasticProcess::from_nested(vec![vec![vec![], vec![]], vec![vec![1.0], vec![1.0]]])?;

    let opts = SolverOptions::default();
    let gap = duality_gap(&p, &u, &opts)?;
    println!("primal {:.6}  dual {:.6}  gap {:.2e}", gap.primal.value, gap.dual.value, gap.gap);

    let y = solve_dual(&p, &u, &opts)?.optimizer;
    let tree = p.tree();
    let report = check_martingale_density(tree, &y, &prices, 1e-8)?;
    println!("martingale density: {} (residual {:.1e})", report.holds, report.residual);
    let mean: f64 = (0..2).map(|l| tree.probability(l) * y.get(1, l)[0]).sum();
    let q_up = tree.probability(0) * y.get(1, 0)[0] / mean;
    println!("risk-neutral up weight {q_up:.6} (closed form (s0 - s_down) / (s_up - s_down) = {:.6})", 0.5 / 1.5);
    println!("dual value over densities: {:.6}", alm_dual_value(&p, &u, &y, 1e-8)?);
    Ok(())
}
