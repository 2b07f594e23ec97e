//! Finite truncations of the classical duality-gap constructions. On a
//! finite tree every random variable is bounded, so the gap closes.

use stochdual::solver::duality_gap;
use stochdual::{ConvexFunction, Layout, ParametricIntegrand, Problem, ScenarioTree, SolverOptions, StochasticProcess};

fn main() -> stochdual::Result<()> {
    for n in [2usize, 4, 8, 12] {
        // probabilities 2^-k and coefficients 2^k: the truncation of an
        // unbounded variable with finite mean
        let mut probs: Vec<f64> = (1..n).map(|k| 0.5f64.powi(k as i32)).collect();
        probs.push(0.5f64.powi(n as i32 - 1));
        let beta: Vec<f64> = (0..n).map(|k| 2f64.powi(k as i32)).collect();
        let tree = ScenarioTree::two_stage(probs)?;
        // delta of the nonpositive half-line at beta x_0 + u
        let functions = beta
            .iter()
            .map(|&b| ConvexFunction::compose(ConvexFunction::Nonpos { dim: 1 }, vec![vec![b, 1.0]], vec![0.0]))
            .collect();
        let p = Problem::new(ParametricIntegrand::generic(tree, Layout::new(vec![1, 0], vec![0, 1])?, functions)?);
        let u = StochasticProcess::from_fn(p.u_dims(), n, |t, l, _| if t == 1 { (-1f64).powi(l as i32) } else { 0.0 });
        let g = duality_gap(&p, &u, &SolverOptions::default())?;
        println!("{n:2} scenarios: primal {:.6}, dual {:.6}, gap {:.2e}", g.primal.value, g.dual.value, g.gap);
    }
    Ok(())
}
