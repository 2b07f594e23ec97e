//! Model-specific dual representations and the domain side condition.

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexFunction, Polyhedron};
use crate::error::{check_dim, Error, Result};
use crate::extended::{ext_add, INF, NEG_INF};
use crate::integrand::{StageCost, Structure};
use crate::program::{self, add_conjugate, Builder, LinExpr, ProgramStatus};
use crate::solver::{Coordinates, Problem};
use crate::tree::{ScenarioTree, StochasticProcess};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub holds: bool,
    /// Largest `|E_t(y ds_{t+1})|` over nodes and components.
    pub residual: f64,
    /// Largest negative part of `y`.
    pub negativity: f64,
    pub is_zero: bool,
}

/// Positive multiples of densities under which a price process is a
/// martingale.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleDensityCone {
    pub prices: StochasticProcess,
    pub tol: f64,
}

impl MartingaleDensityCone {
    pub fn contains(&self, tree: &ScenarioTree, y: &StochasticProcess) -> Result<MartingaleReport> {
        check_martingale_density(tree, y, &self.prices, self.tol)
    }
}

/// The scalar density carried by `y`: its last-stage component.
fn terminal_density(tree: &ScenarioTree, y: &StochasticProcess) -> Result<Vec<f64>> {
    tree.check_process(y)?;
    let last = y.stage_count() - 1;
    check_dim(1, y.dim(last))?;
    Ok((0..tree.leaf_count()).map(|l| y.get(last, l)[0]).collect())
}

/// Tests `y >= -tol`, `E_t(y (s_{t+1} - s_t)) = 0` blockwise for `t < T`, and
/// `y` not identically zero.
pub fn check_martingale_density(
    tree: &ScenarioTree,
    y: &StochasticProcess,
    prices: &StochasticProcess,
    tol: f64,
) -> Result<MartingaleReport> {
    let density = terminal_density(tree, y)?;
    tree.check_process(prices)?;
    let mut residual: f64 = 0.0;
    for t in 0..prices.stage_count() - 1 {
        for (bi, block) in tree.blocks(t).iter().enumerate() {
            let w = tree.block_weight(t, bi);
            for j in 0..prices.dim(t) {
                let mut e = 0.0;
                for &leaf in block {
                    let ds = prices.get(t + 1, leaf)[j] - prices.get(t, leaf)[j];
                    e += tree.probability(leaf) * density[leaf] * ds;
                }
                residual = residual.max((e / w).abs());
            }
        }
    }
    let negativity = density.iter().fold(0.0_f64, |m, &v| m.max(-v));
    let is_zero = density.iter().all(|&v| v.abs() <= tol);
    Ok(MartingaleReport {
        holds: residual <= tol && negativity <= tol && !is_zero,
        residual,
        negativity,
        is_zero,
    })
}

fn alm_parts(p: &Problem) -> Result<(&[ConvexFunction], &StochasticProcess)> {
    match p.integrand().structure() {
        Structure::Alm { disutility, prices } => Ok((disutility, prices)),
        _ => Err(Error::TagMismatch {
            expected: "alm".into(),
            found: p.integrand().tag().into(),
        }),
    }
}

/// `E[u y - V*(y)]` for `y` in the martingale density cone, `-inf` otherwise.
pub fn alm_dual_value(p: &Problem, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<f64> {
    let (disutility, prices) = alm_parts(p)?;
    let tree = p.tree();
    if !check_martingale_density(tree, y, prices, tol)?.holds {
        return Ok(NEG_INF);
    }
    let density = terminal_density(tree, y)?;
    let payoff = terminal_density(tree, u)?;
    let mut total = 0.0;
    for leaf in 0..tree.leaf_count() {
        let vs = disutility[leaf].conjugate_value(&[density[leaf]])?;
        if vs == INF {
            return Ok(NEG_INF);
        }
        total += tree.probability(leaf) * (payoff[leaf] * density[leaf] - vs);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledDual {
    pub lambda: f64,
    pub value: f64,
}

/// `sup_{lambda >= 0} E[u lambda y - V*(lambda y)]` along the ray through a
/// martingale density `y`; `lambda = 0` gives the limiting value excluded
/// from the cone itself.
pub fn alm_scaled_dual(p: &Problem, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<ScaledDual> {
    let (disutility, prices) = alm_parts(p)?;
    let tree = p.tree();
    let report = check_martingale_density(tree, y, prices, tol)?;
    if report.residual > tol || report.negativity > tol {
        return Ok(ScaledDual {
            lambda: 0.0,
            value: NEG_INF,
        });
    }
    let density = terminal_density(tree, y)?;
    let payoff = terminal_density(tree, u)?;
    let mut b = Builder::new();
    let lambda = LinExpr::var(b.var());
    b.le(lambda.scaled(-1.0));
    for leaf in 0..tree.leaf_count() {
        let prob = tree.probability(leaf);
        add_conjugate(&mut b, &disutility[leaf], &[lambda.scaled(density[leaf])], prob)?;
        b.add_linear(&lambda, -prob * payoff[leaf] * density[leaf]);
    }
    let sol = b.solve();
    match sol.status {
        ProgramStatus::Optimal => Ok(ScaledDual {
            lambda: lambda.eval(&sol.x),
            value: -sol.value,
        }),
        ProgramStatus::Unbounded => Ok(ScaledDual {
            lambda: INF,
            value: INF,
        }),
        ProgramStatus::Infeasible => Ok(ScaledDual {
            lambda: 0.0,
            value: NEG_INF,
        }),
        ProgramStatus::IterationLimit => Err(Error::Unsupported("scaled dual did not converge".into())),
    }
}

/// `E sum_t [u_t.y_t - K_t*(E_t(y_{t+1} - y_t), y_t)]` with `y_{T+1} := 0`.
pub fn bolza_dual_value(p: &Problem, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<f64> {
    let f = p.integrand();
    if !f.is_bolza() {
        return Err(Error::TagMismatch {
            expected: "bolza".into(),
            found: f.tag().into(),
        });
    }
    let tree = p.tree();
    for proc in [u, y] {
        tree.check_process(proc)?;
        for (t, &d) in p.u_dims().iter().enumerate() {
            check_dim(d, proc.dim(t))?;
        }
        if let Some(t) = first_non_adapted(tree, proc, tol) {
            return Err(Error::NotAdapted(t));
        }
    }
    let increment = tree.conditional_increment(y)?;
    let mut conj = 0.0;
    for leaf in 0..tree.leaf_count() {
        for t in 0..tree.stage_count() {
            let k = f.stage_cost(t, leaf)?.conjugate_value(increment.get(t, leaf), y.get(t, leaf))?;
            conj = ext_add(conj, tree.probability(leaf) * k);
        }
    }
    if conj == INF {
        return Ok(NEG_INF);
    }
    Ok(tree.pairing(u, y)? - conj)
}

fn first_non_adapted(tree: &ScenarioTree, proc: &StochasticProcess, tol: f64) -> Option<usize> {
    (0..proc.stage_count()).find(|&t| {
        tree.blocks(t).iter().any(|block| {
            let first = proc.get(t, block[0]);
            block
                .iter()
                .any(|&l| proc.get(t, l).iter().zip(first).any(|(a, b)| (a - b).abs() > tol))
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainVerdict {
    Verified,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub verdict: DomainVerdict,
    /// Leaves where `f*(., y)` is identically `+inf`, so that the lower
    /// Lagrangian integrand is `-inf` on the whole space.
    pub collapsed_leaves: Vec<usize>,
    /// Largest amount by which the Lagrangian domain exceeds a constraint of
    /// the feasible domain (`+inf` if unbounded in that direction).
    pub excess: f64,
    pub note: String,
}

const SURROGATE_NOTE: &str = "surrogate: polyhedral closure with nonempty relative interior in place of the algebraic closure; \
whether the algebraic closure could be replaced by the topological one is an open question this check does not settle";

/// Polyhedral `{x : exists u, f(x, u, leaf) < inf}` in leaf coordinates.
fn feasible_domain(p: &Problem, leaf: usize) -> Result<Option<Polyhedron>> {
    let f = p.integrand();
    let l = f.layout();
    let nx = l.total_x();
    Ok(match f.structure() {
        Structure::Generic { functions } => functions[leaf].domain().and_then(|d| d.project_prefix(nx)),
        Structure::Alm { .. } => Some(Polyhedron::full(nx)),
        Structure::Constrained { objective, constraints } => {
            let mut d = objective[leaf].domain();
            for fj in &constraints[leaf] {
                d = match (d, fj.domain()) {
                    (Some(a), Some(b)) => Some(a.intersect(&b)),
                    _ => None,
                };
            }
            d
        }
        Structure::Bolza { .. } => {
            let mut d = Some(Polyhedron::full(nx));
            for t in 0..l.stages() {
                let stage = stage_state_domain(f.stage_cost(t, leaf)?);
                d = match (d, stage) {
                    (Some(a), Some(s)) => Some(a.intersect(&s.embed(nx, l.x_offset(t)))),
                    _ => None,
                };
            }
            d
        }
    })
}

/// `{x : exists w, K(x, w) < inf}`.
fn stage_state_domain(k: &StageCost) -> Option<Polyhedron> {
    match k {
        StageCost::Separable { state, .. } => state.domain(),
        StageCost::Kabanov {
            disutility, terminal, ..
        } => {
            let m = disutility.dim();
            let neg_k: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut r = vec![0.0; 2 * m];
                    r[m + i] = -1.0;
                    r
                })
                .collect();
            let mut d = disutility.domain()?.preimage(&neg_k, &vec![0.0; m]);
            if *terminal {
                d = d.intersect(&Polyhedron::point(&vec![0.0; m]).embed(2 * m, 0));
            }
            Some(d)
        }
        StageCost::General { function } => function.domain()?.project_prefix(function.dim() / 2),
    }
}

/// Whether `f*(., y, leaf)` is identically `+inf`.
fn conjugate_collapses(p: &Problem, leaf: usize, y: &[f64]) -> Result<bool> {
    let f = p.integrand();
    let mut b = Builder::new();
    let v = b.vars(f.layout().total_x());
    f.compile_conjugate(&mut b, leaf, &v, &program::constants(y), 1.0)?;
    Ok(b.solve().status == ProgramStatus::Infeasible)
}

/// Pulls leaf-coordinate polyhedra back to the adapted coordinates and
/// intersects them.
fn adapted_intersection(p: &Problem, coords: &Coordinates, leaf_sets: &[Polyhedron]) -> Polyhedron {
    let mut out = Polyhedron::full(coords.len);
    for (leaf, set) in leaf_sets.iter().enumerate() {
        let idx = coords.leaf_indices(p, leaf);
        let matrix: Vec<Vec<f64>> = idx
            .iter()
            .map(|&j| {
                let mut r = vec![0.0; coords.len];
                r[j] = 1.0;
                r
            })
            .collect();
        let pulled = if idx.is_empty() {
            Polyhedron::full(coords.len)
        } else {
            set.preimage(&matrix, &vec![0.0; idx.len()])
        };
        out = out.intersect(&pulled);
    }
    out
}

/// Containment of `inner` in `outer` (both closed polyhedra); returns the
/// largest excess over the rows of `outer`.
pub fn polyhedral_containment(inner: &Polyhedron, outer: &Polyhedron) -> Result<(DomainVerdict, f64)> {
    if !inner.is_nonempty() {
        return Ok((DomainVerdict::Verified, 0.0));
    }
    if !outer.is_nonempty() {
        return Ok((DomainVerdict::Violated, INF));
    }
    let mut excess: f64 = 0.0;
    for (a, b) in outer.rows.iter().zip(&outer.offsets) {
        let s = inner.support_function(a)?;
        excess = excess.max(s - b);
    }
    let verdict = if excess <= 1e-9 {
        DomainVerdict::Verified
    } else {
        DomainVerdict::Violated
    };
    Ok((verdict, excess))
}

/// Checks that the adapted part of the domain of the expected lower
/// Lagrangian at `y` lies in the closure of the adapted feasible domain.
pub fn check_domain_condition(p: &Problem, y: &StochasticProcess) -> Result<DomainReport> {
    let tree = p.tree();
    tree.check_process(y)?;
    let nx = p.integrand().layout().total_x();
    let mut feasible = Vec::new();
    let mut lagrangian = Vec::new();
    let mut collapsed_leaves = Vec::new();
    for leaf in 0..tree.leaf_count() {
        let Some(dom1) = feasible_domain(p, leaf)? else {
            return Ok(DomainReport {
                verdict: DomainVerdict::Inconclusive,
                collapsed_leaves,
                excess: 0.0,
                note: format!("leaf {leaf}: feasible domain is not polyhedral in closed form; {SURROGATE_NOTE}"),
            });
        };
        // A proper f*(., y) makes the lower Lagrangian the closed hull of a
        // function finite only on dom1, so its domain sits in cl dom1 = dom1.
        if conjugate_collapses(p, leaf, &y.leaf_vector(leaf))? {
            collapsed_leaves.push(leaf);
            lagrangian.push(Polyhedron::full(nx));
        } else {
            lagrangian.push(dom1.clone());
        }
        feasible.push(dom1);
    }
    let coords = Coordinates::new(p);
    let inner = adapted_intersection(p, &coords, &lagrangian);
    let outer = adapted_intersection(p, &coords, &feasible);
    let (verdict, excess) = polyhedral_containment(&inner, &outer)?;
    Ok(DomainReport {
        verdict,
        collapsed_leaves,
        excess,
        note: SURROGATE_NOTE.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{bolza_from_blocks, Layout, ParametricIntegrand};

    pub(crate) fn binomial() -> (ScenarioTree, StochasticProcess) {
        let tree = ScenarioTree::two_stage(vec![0.5, 0.5]).unwrap();
        let s = StochasticProcess::scalar(vec![vec![1.0, 1.0], vec![2.0, 0.5]]).unwrap();
        (tree, s)
    }

    fn density(values: [f64; 2]) -> StochasticProcess {
        StochasticProcess::from_nested(vec![vec![vec![]; 2], vec![vec![values[0]], vec![values[1]]]]).unwrap()
    }

    fn alm_problem() -> Problem {
        let (tree, s) = binomial();
        let v = ConvexFunction::quadratic(vec![0.5]);
        let f = ParametricIntegrand::new(
            tree,
            Layout::new(vec![1, 0], vec![0, 1]).unwrap(),
            Structure::Alm {
                disutility: vec![v.clone(), v],
                prices: s,
            },
        )
        .unwrap();
        Problem::new(f)
    }

    #[test]
    fn martingale_density_examples() {
        let (tree, s) = binomial();
        let q = check_martingale_density(&tree, &density([2.0 / 3.0, 4.0 / 3.0]), &s, 1e-12).unwrap();
        assert!(q.holds);
        let one = check_martingale_density(&tree, &density([1.0, 1.0]), &s, 1e-12).unwrap();
        assert!(!one.holds && (one.residual - 0.25).abs() < 1e-15);
        assert!(check_martingale_density(&tree, &density([4.0 / 3.0, 8.0 / 3.0]), &s, 1e-12).unwrap().holds);
        assert!(check_martingale_density(&tree, &density([0.0, 0.0]), &s, 1e-12).unwrap().is_zero);
    }

    #[test]
    fn alm_dual_examples() {
        let p = alm_problem();
        let u = density([0.0, 0.0]);
        let v = alm_dual_value(&p, &u, &density([2.0 / 3.0, 4.0 / 3.0]), 1e-12).unwrap();
        assert!((v + 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(alm_dual_value(&p, &u, &density([0.0, 0.0]), 1e-12).unwrap(), NEG_INF);
        assert_eq!(alm_dual_value(&p, &u, &density([1.0, 1.0]), 1e-12).unwrap(), NEG_INF);
        let scaled = alm_scaled_dual(&p, &u, &density([2.0 / 3.0, 4.0 / 3.0]), 1e-12).unwrap();
        assert!(scaled.value.abs() < 1e-12 && scaled.lambda.abs() < 1e-9);
    }

    #[test]
    fn bolza_dual_single_stage() {
        let k = StageCost::Separable {
            state: ConvexFunction::quadratic(vec![0.5]),
            velocity: ConvexFunction::quadratic(vec![0.5]),
        };
        let p = Problem::new(bolza_from_blocks(ScenarioTree::deterministic(1), vec![vec![k]]).unwrap());
        let c = 0.7;
        let u = StochasticProcess::scalar(vec![vec![1.5]]).unwrap();
        let y = StochasticProcess::scalar(vec![vec![c]]).unwrap();
        let v = bolza_dual_value(&p, &u, &y, 1e-12).unwrap();
        assert!((v - (1.5 * c - c * c)).abs() < 1e-12);
        let zero = StochasticProcess::scalar(vec![vec![0.0]]).unwrap();
        assert_eq!(bolza_dual_value(&p, &zero, &zero, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn domain_condition_verdicts() {
        let p = alm_problem();
        let r = check_domain_condition(&p, &density([2.0 / 3.0, 4.0 / 3.0])).unwrap();
        assert_eq!(r.verdict, DomainVerdict::Verified);
        assert!(r.note.contains("open question"));
        // f(x, u) = delta_{0}(x) + u: l(., y) is -inf on {0} unless y = 1
        let g = ConvexFunction::sum(vec![
            ConvexFunction::compose(
                ConvexFunction::Polyhedron(Polyhedron::point(&[0.0])),
                vec![vec![1.0, 0.0]],
                vec![],
            ),
            ConvexFunction::affine(vec![0.0, 1.0], 0.0),
        ]);
        let f = ParametricIntegrand::generic(ScenarioTree::deterministic(1), Layout::new(vec![1], vec![1]).unwrap(), vec![g])
            .unwrap();
        let p = Problem::new(f);
        let y0 = StochasticProcess::scalar(vec![vec![0.0]]).unwrap();
        let r = check_domain_condition(&p, &y0).unwrap();
        assert_eq!(r.verdict, DomainVerdict::Violated);
        assert_eq!(r.collapsed_leaves, vec![0]);
        let y1 = StochasticProcess::scalar(vec![vec![1.0]]).unwrap();
        assert_eq!(check_domain_condition(&p, &y1).unwrap().verdict, DomainVerdict::Verified);
    }
}
