//! Primal value function, dual objective, dual solve and duality gap.
//!
//! Every problem here is a finite convex program over leaf-indexed vectors.
//! The default path compiles it exactly (equality elimination, Lemke pivoting
//! for the polyhedral and quadratic parts, trust-region SQP for smooth terms).
//! A projected subgradient method is available for the primal problem when
//! each leaf integrand is finite everywhere.

pub mod oracle;
mod subgradient;

pub(crate) use subgradient::Coordinates;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::extended::{INF, NEG_INF};
use crate::integrand::ParametricIntegrand;
use crate::program::{self, Builder, LinExpr, ProgramSolution, ProgramStatus};
use crate::tree::{ScenarioTree, StochasticProcess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Polyhedral,
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: Method,
    pub max_iter: usize,
    /// Feasibility tolerance required for an `optimal` status.
    pub tol: f64,
    /// Multiplier of the auto-scaled subgradient step.
    pub step_constant: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Polyhedral,
            max_iter: 100_000,
            tol: 1e-8,
            step_constant: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Unbounded,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub optimizer: StochasticProcess,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub status: SolveStatus,
}

/// Minimize `E f(x, u)` over adapted `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    integrand: ParametricIntegrand,
}

impl Problem {
    pub fn new(integrand: ParametricIntegrand) -> Self {
        Problem { integrand }
    }

    pub fn tree(&self) -> &ScenarioTree {
        self.integrand.tree()
    }

    pub fn integrand(&self) -> &ParametricIntegrand {
        &self.integrand
    }

    pub fn x_dims(&self) -> &[usize] {
        &self.integrand.layout().x
    }

    pub fn u_dims(&self) -> &[usize] {
        &self.integrand.layout().u
    }

    fn check_u(&self, u: &StochasticProcess) -> Result<()> {
        self.tree().check_process(u)?;
        for (t, &d) in self.u_dims().iter().enumerate() {
            check_dim(d, u.dim(t))?;
        }
        Ok(())
    }

    fn check_y(&self, y: &StochasticProcess) -> Result<()> {
        self.check_u(y)
    }

    fn check_x(&self, x: &StochasticProcess) -> Result<()> {
        self.tree().check_process(x)?;
        for (t, &d) in self.x_dims().iter().enumerate() {
            check_dim(d, x.dim(t))?;
        }
        Ok(())
    }
}

/// Program variables for an adapted process: one block of variables per
/// (stage, block).
struct AdaptedVars {
    vars: Vec<Vec<Vec<LinExpr>>>,
}

impl AdaptedVars {
    fn new(b: &mut Builder, tree: &ScenarioTree, dims: &[usize]) -> Self {
        let vars = dims
            .iter()
            .enumerate()
            .map(|(t, &d)| (0..tree.block_count(t)).map(|_| b.vars(d)).collect())
            .collect();
        AdaptedVars { vars }
    }

    fn leaf(&self, tree: &ScenarioTree, leaf: usize) -> Vec<LinExpr> {
        self.vars
            .iter()
            .enumerate()
            .flat_map(|(t, stage)| stage[tree.block_of(t, leaf)].iter().cloned())
            .collect()
    }
}

fn leaf_vars(b: &mut Builder, n: usize, leaves: usize) -> Vec<Vec<LinExpr>> {
    (0..leaves).map(|_| b.vars(n)).collect()
}

fn leaf_process(dims: &[usize], leaves: usize, exprs: impl Fn(usize) -> Vec<LinExpr>, x: &[f64]) -> StochasticProcess {
    let mut p = StochasticProcess::zeros(dims, leaves);
    for leaf in 0..leaves {
        let values: Vec<f64> = exprs(leaf).iter().map(|e| e.eval(x)).collect();
        p.set_leaf_vector(leaf, &values).expect("layout matches");
    }
    p
}

fn status_of(sol: &ProgramSolution, tol: f64) -> SolveStatus {
    match sol.status {
        ProgramStatus::Optimal if sol.residual <= tol => SolveStatus::Optimal,
        ProgramStatus::Optimal | ProgramStatus::IterationLimit => SolveStatus::MaxIter,
        ProgramStatus::Unbounded => SolveStatus::Unbounded,
        ProgramStatus::Infeasible => SolveStatus::Infeasible,
    }
}

/// `phi(u) = inf_{x adapted} E f(x, u)`.
pub fn solve_primal(p: &Problem, u: &StochasticProcess, opts: &SolverOptions) -> Result<SolveResult> {
    p.check_u(u)?;
    if opts.method == Method::Subgradient {
        return subgradient::solve(p, u, opts);
    }
    let tree = p.tree();
    let f = p.integrand();
    let mut b = Builder::new();
    let x = AdaptedVars::new(&mut b, tree, p.x_dims());
    for leaf in 0..tree.leaf_count() {
        let ul = program::constants(&u.leaf_vector(leaf));
        f.compile(&mut b, leaf, &x.leaf(tree, leaf), &ul, tree.probability(leaf))?;
    }
    let sol = b.solve();
    let status = status_of(&sol, opts.tol);
    let value = match status {
        SolveStatus::Infeasible => INF,
        SolveStatus::Unbounded => NEG_INF,
        _ => sol.value,
    };
    Ok(SolveResult {
        optimizer: leaf_process(p.x_dims(), tree.leaf_count(), |l| x.leaf(tree, l), &sol.x),
        value,
        iterations: sol.iterations,
        residual: sol.residual,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualObjective {
    /// `-inf_x E l(x, y)`.
    pub value: f64,
    /// A minimizing adapted `x`, when the infimum is attained.
    pub minimizer: Option<StochasticProcess>,
    /// `-E underline-l(x*, y)` at that minimizer. Since `underline-l <= l`
    /// this never falls below `value`; it coincides with it whenever the
    /// lower Lagrangian integrand is exact at `x*`.
    pub lower_value: f64,
}

/// `phi*(y) = -inf_{x adapted} E l(x, y)`.
pub fn dual_objective(p: &Problem, y: &StochasticProcess) -> Result<DualObjective> {
    p.check_y(y)?;
    let tree = p.tree();
    let f = p.integrand();
    let mut b = Builder::new();
    let x = AdaptedVars::new(&mut b, tree, p.x_dims());
    let nu = f.layout().total_u();
    let u = leaf_vars(&mut b, nu, tree.leaf_count());
    for leaf in 0..tree.leaf_count() {
        let prob = tree.probability(leaf);
        f.compile(&mut b, leaf, &x.leaf(tree, leaf), &u[leaf], prob)?;
        for (ui, yi) in u[leaf].iter().zip(y.leaf_vector(leaf)) {
            b.add_linear(ui, -prob * yi);
        }
    }
    let sol = b.solve();
    match sol.status {
        ProgramStatus::Unbounded => Ok(DualObjective {
            value: INF,
            minimizer: None,
            lower_value: INF,
        }),
        ProgramStatus::Infeasible => Ok(DualObjective {
            value: NEG_INF,
            minimizer: None,
            lower_value: NEG_INF,
        }),
        ProgramStatus::IterationLimit => Err(Error::Unsupported("dual objective program did not converge".into())),
        ProgramStatus::Optimal => {
            let xs = leaf_process(p.x_dims(), tree.leaf_count(), |l| x.leaf(tree, l), &sol.x);
            let mut lower = 0.0;
            for leaf in 0..tree.leaf_count() {
                let ll = f.lower_lagrangian(leaf, &xs.leaf_vector(leaf), &y.leaf_vector(leaf))?;
                lower += tree.probability(leaf) * ll;
            }
            Ok(DualObjective {
                value: -sol.value,
                minimizer: Some(xs),
                lower_value: -lower,
            })
        }
    }
}

/// Adds the nodewise zero-mean constraints defining the orthogonal
/// complement of the adapted processes.
fn constrain_orthocomplement(b: &mut Builder, tree: &ScenarioTree, dims: &[usize], v: &[Vec<LinExpr>]) {
    let mut offset = 0;
    for (t, &d) in dims.iter().enumerate() {
        for block in tree.blocks(t) {
            for i in 0..d {
                let mut e = LinExpr::constant(0.0);
                for &leaf in block {
                    e.add_assign(&v[leaf][offset + i], tree.probability(leaf));
                }
                b.eq(e);
            }
        }
        offset += d;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthocomplementBound {
    /// `inf_{v in N-perp} E f*(v, y)`.
    pub value: f64,
    pub minimizer: Option<StochasticProcess>,
}

/// Upper bound `inf_{v in N-perp} E f*(v, y)` on the dual objective.
pub fn dual_via_orthocomplement(p: &Problem, y: &StochasticProcess) -> Result<OrthocomplementBound> {
    p.check_y(y)?;
    let tree = p.tree();
    let f = p.integrand();
    let nx = f.layout().total_x();
    let mut b = Builder::new();
    let v = leaf_vars(&mut b, nx, tree.leaf_count());
    constrain_orthocomplement(&mut b, tree, p.x_dims(), &v);
    for leaf in 0..tree.leaf_count() {
        let yl = program::constants(&y.leaf_vector(leaf));
        f.compile_conjugate(&mut b, leaf, &v[leaf], &yl, tree.probability(leaf))?;
    }
    let sol = b.solve();
    match sol.status {
        ProgramStatus::Infeasible => Ok(OrthocomplementBound {
            value: INF,
            minimizer: None,
        }),
        ProgramStatus::Unbounded => Ok(OrthocomplementBound {
            value: NEG_INF,
            minimizer: None,
        }),
        ProgramStatus::IterationLimit => Err(Error::Unsupported("orthocomplement program did not converge".into())),
        ProgramStatus::Optimal => Ok(OrthocomplementBound {
            value: sol.value,
            minimizer: Some(leaf_process(p.x_dims(), tree.leaf_count(), |l| v[l].clone(), &sol.x)),
        }),
    }
}

/// Maximizes `<u, y> - phi*(y)`; over adapted `y` for Bolza problems.
///
/// The program minimizes `E [f*(v, y) - u.y]` jointly over `y` and
/// `v in N-perp`. The reported value is `<u, y*> - phi*(y*)` recomputed at
/// the optimal `y*`, which can only improve on the joint bound.
pub fn solve_dual(p: &Problem, u: &StochasticProcess, opts: &SolverOptions) -> Result<SolveResult> {
    solve_dual_pair(p, u, opts).map(|(r, _)| r)
}

/// [`solve_dual`] together with the `v in N-perp` found by the joint program.
pub fn solve_dual_pair(p: &Problem, u: &StochasticProcess, opts: &SolverOptions) -> Result<(SolveResult, StochasticProcess)> {
    p.check_u(u)?;
    let tree = p.tree();
    let f = p.integrand();
    let leaves = tree.leaf_count();
    let mut b = Builder::new();
    let adapted = f.is_bolza().then(|| AdaptedVars::new(&mut b, tree, p.u_dims()));
    let free = if adapted.is_none() {
        leaf_vars(&mut b, f.layout().total_u(), leaves)
    } else {
        Vec::new()
    };
    let y_leaf = |leaf: usize| match &adapted {
        Some(a) => a.leaf(tree, leaf),
        None => free[leaf].clone(),
    };
    let v = leaf_vars(&mut b, f.layout().total_x(), leaves);
    constrain_orthocomplement(&mut b, tree, p.x_dims(), &v);
    for leaf in 0..leaves {
        let prob = tree.probability(leaf);
        let yl = y_leaf(leaf);
        f.compile_conjugate(&mut b, leaf, &v[leaf], &yl, prob)?;
        for (yi, ui) in yl.iter().zip(u.leaf_vector(leaf)) {
            b.add_linear(yi, -prob * ui);
        }
    }
    let sol = b.solve();
    let status = status_of(&sol, opts.tol);
    let y = leaf_process(p.u_dims(), leaves, y_leaf, &sol.x);
    let v = leaf_process(p.x_dims(), leaves, |l| v[l].clone(), &sol.x);
    let value = match status {
        SolveStatus::Unbounded => INF,
        SolveStatus::Infeasible => NEG_INF,
        _ => {
            let joint = -sol.value;
            let recomputed = tree.pairing(u, &y)? - dual_objective(p, &y)?.value;
            if recomputed.is_finite() {
                joint.max(recomputed)
            } else {
                joint
            }
        }
    };
    let result = SolveResult {
        optimizer: y,
        value,
        iterations: sol.iterations,
        residual: sol.residual,
        status,
    };
    Ok((result, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal: SolveResult,
    pub dual: SolveResult,
    /// Primal minus dual value; `+inf` for an infeasible primal. Rounding can
    /// make it marginally negative.
    pub gap: f64,
}

pub fn duality_gap(p: &Problem, u: &StochasticProcess, opts: &SolverOptions) -> Result<GapReport> {
    let primal = solve_primal(p, u, opts)?;
    let dual = solve_dual(p, u, opts)?;
    let gap = if primal.value == INF || dual.value == NEG_INF {
        INF
    } else if primal.value == NEG_INF {
        NEG_INF
    } else {
        primal.value - dual.value
    };
    Ok(GapReport { primal, dual, gap })
}

/// `E f(x, u)` for a given adapted `x`.
pub fn primal_objective(p: &Problem, x: &StochasticProcess, u: &StochasticProcess) -> Result<f64> {
    p.check_x(x)?;
    p.check_u(u)?;
    p.integrand().expectation(x, u)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::convex::{ConvexFunction, Polyhedron};
    use crate::integrand::{assemble_bolza, Layout, StageCost, Structure};

    /// `1/2 (x_0 - u)^2` on two equally likely leaves.
    pub(crate) fn tracking() -> Problem {
        let tree = ScenarioTree::two_stage(vec![0.5, 0.5]).unwrap();
        let g = ConvexFunction::compose(ConvexFunction::quadratic(vec![0.5]), vec![vec![1.0, -1.0]], vec![]);
        let layout = Layout::new(vec![1, 0], vec![0, 1]).unwrap();
        Problem::new(ParametricIntegrand::generic(tree, layout, vec![g.clone(), g]).unwrap())
    }

    fn u_of(values: &[f64]) -> StochasticProcess {
        StochasticProcess::from_nested(vec![
            vec![vec![]; values.len()],
            values.iter().map(|&v| vec![v]).collect(),
        ])
        .unwrap()
    }

    #[test]
    fn tracking_primal_dual() {
        let p = tracking();
        let u = u_of(&[1.0, 3.0]);
        let opts = SolverOptions::default();
        let primal = solve_primal(&p, &u, &opts).unwrap();
        assert_eq!(primal.status, SolveStatus::Optimal);
        assert!((primal.value - 0.5).abs() < 1e-9);
        assert!((primal.optimizer.get(0, 0)[0] - 2.0).abs() < 1e-9);
        let d = dual_objective(&p, &u_of(&[1.0, -1.0])).unwrap();
        assert!((d.value - 0.5).abs() < 1e-9);
        assert!((d.lower_value - 0.5).abs() < 1e-9);
        assert_eq!(dual_objective(&p, &u_of(&[1.0, 1.0])).unwrap().value, INF);
        let dual = solve_dual(&p, &u, &opts).unwrap();
        assert!((dual.value - 0.5).abs() < 1e-9);
        assert!((dual.optimizer.get(1, 0)[0] + 1.0).abs() < 1e-9);
        assert!((dual.optimizer.get(1, 1)[0] - 1.0).abs() < 1e-9);
        let gap = duality_gap(&p, &u, &opts).unwrap();
        assert!(gap.gap.abs() < 1e-9);
    }

    #[test]
    fn subgradient_matches_exact_path() {
        let p = tracking();
        let u = u_of(&[1.0, 3.0]);
        let opts = SolverOptions {
            method: Method::Subgradient,
            ..SolverOptions::default()
        };
        let r = solve_primal(&p, &u, &opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-4, "{}", r.value);
    }

    #[test]
    fn bolza_quadratic_at_zero() {
        let k = StageCost::Separable {
            state: ConvexFunction::quadratic(vec![0.5]),
            velocity: ConvexFunction::quadratic(vec![0.5]),
        };
        let tree = ScenarioTree::two_stage(vec![0.5, 0.5]).unwrap();
        let f = assemble_bolza(tree, vec![vec![k.clone(), k.clone()], vec![k.clone(), k]]).unwrap();
        let p = Problem::new(f);
        let u = StochasticProcess::zeros(&[1, 1], 2);
        let opts = SolverOptions::default();
        let r = solve_primal(&p, &u, &opts).unwrap();
        assert!(r.value.abs() < 1e-12 && r.optimizer.max_abs() < 1e-9);
        let d = solve_dual(&p, &u, &opts).unwrap();
        assert!(d.value.abs() < 1e-9 && d.optimizer.max_abs() < 1e-9);
    }

    #[test]
    fn infeasible_constrained_problem() {
        let tree = ScenarioTree::deterministic(1);
        let f = ParametricIntegrand::new(
            tree,
            Layout::new(vec![1], vec![1]).unwrap(),
            Structure::Constrained {
                objective: vec![ConvexFunction::indicator(Polyhedron::bounds(&[0.0], &[INF]).unwrap())],
                constraints: vec![vec![ConvexFunction::affine(vec![1.0], 0.0)]],
            },
        )
        .unwrap();
        let p = Problem::new(f);
        let u = StochasticProcess::scalar(vec![vec![1.0]]).unwrap();
        let opts = SolverOptions::default();
        let r = solve_primal(&p, &u, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(duality_gap(&p, &u, &opts).unwrap().gap, INF);
    }

    #[test]
    fn orthocomplement_on_deterministic_tree() {
        let tree = ScenarioTree::deterministic(1);
        let g = ConvexFunction::quadratic(vec![0.5, 0.5]);
        let f = ParametricIntegrand::generic(tree, Layout::new(vec![1], vec![1]).unwrap(), vec![g]).unwrap();
        let p = Problem::new(f);
        let y = StochasticProcess::scalar(vec![vec![2.0]]).unwrap();
        let bound = dual_via_orthocomplement(&p, &y).unwrap();
        // N-perp = {0}: value is f*(0, 2) = 2
        assert!((bound.value - 2.0).abs() < 1e-9);
        assert!((dual_objective(&p, &y).unwrap().value - 2.0).abs() < 1e-9);
    }
}
