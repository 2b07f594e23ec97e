//! Model families built on a scenario tree: convex programs with
//! constraints, asset-liability management, Bolza problems and currency
//! markets with proportional costs.

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexFunction, Polyhedron};
use crate::error::{check_dim, Error, Result};
use crate::integrand::{assemble_bolza, bolza_from_blocks, Layout, ParametricIntegrand, StageCost, Structure};
use crate::solver::Problem;
use crate::tree::{ScenarioTree, StochasticProcess};

/// One value shared by every leaf (or block), or one value each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLeaf<T> {
    Shared(T),
    Each(Vec<T>),
}

impl<T: Clone> PerLeaf<T> {
    pub fn expand(&self, n: usize, what: &str) -> Result<Vec<T>> {
        match self {
            PerLeaf::Shared(v) => Ok(vec![v.clone(); n]),
            PerLeaf::Each(vs) if vs.len() == n => Ok(vs.clone()),
            PerLeaf::Each(vs) => Err(Error::InvalidModel(format!(
                "{what}: expected {n} entries, got {}",
                vs.len()
            ))),
        }
    }
}

/// A cone or market set, by halfspaces or by planar generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConeSpec {
    Generators { generators: Vec<Vec<f64>> },
    Halfspaces(Polyhedron),
}

impl ConeSpec {
    pub fn polyhedron(&self) -> Result<Polyhedron> {
        match self {
            ConeSpec::Generators { generators } => Polyhedron::cone_from_generators(generators),
            ConeSpec::Halfspaces(p) => Ok(p.clone()),
        }
    }
}

/// Market data for one node of a currency market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketStage {
    pub cone: ConeSpec,
    pub disutility: ConvexFunction,
}

/// Bolza stage costs, shared across the stage or listed per block or leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageCosts {
    PerBlock { blocks: Vec<StageCost> },
    PerLeaf { leaves: Vec<StageCost> },
    Shared(StageCost),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    /// One joint catalog function of `(x, u)` per leaf.
    Generic {
        x_dims: Vec<usize>,
        u_dims: Vec<usize>,
        functions: PerLeaf<ConvexFunction>,
    },
    /// Minimize `f_0(x)` subject to `f_j(x) + u_j <= 0`.
    Constrained {
        x_dims: Vec<usize>,
        objective: PerLeaf<ConvexFunction>,
        constraints: PerLeaf<Vec<ConvexFunction>>,
    },
    /// Hedge a liability `u_T` with price process `s` and disutility `V`.
    Alm {
        disutility: PerLeaf<ConvexFunction>,
        /// `prices[t][leaf]`, scalar or vector valued.
        prices: PriceData,
    },
    Bolza { stages: Vec<StageCosts> },
    /// Currency market in `dim` assets.
    Kabanov { stages: Vec<PerLeaf<MarketStage>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceData {
    Scalar(Vec<Vec<f64>>),
    Vector(Vec<Vec<Vec<f64>>>),
}

impl PriceData {
    pub fn process(&self) -> Result<StochasticProcess> {
        match self {
            PriceData::Scalar(s) => StochasticProcess::scalar(s.clone()),
            PriceData::Vector(s) => StochasticProcess::from_nested(s.clone()),
        }
    }
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Generic { .. } => "generic",
            ModelSpec::Constrained { .. } => "constrained",
            ModelSpec::Alm { .. } => "alm",
            ModelSpec::Bolza { .. } => "bolza",
            ModelSpec::Kabanov { .. } => "kabanov",
        }
    }

    pub fn build(&self, tree: ScenarioTree) -> Result<Problem> {
        let leaves = tree.leaf_count();
        match self {
            ModelSpec::Generic { x_dims, u_dims, functions } => {
                let layout = Layout::new(x_dims.clone(), u_dims.clone())?;
                let functions = functions.expand(leaves, "functions")?;
                Ok(Problem::new(ParametricIntegrand::generic(tree, layout, functions)?))
            }
            ModelSpec::Constrained { x_dims, objective, constraints } => build_constrained(
                tree,
                x_dims.clone(),
                objective.expand(leaves, "objective")?,
                constraints.expand(leaves, "constraints")?,
            ),
            ModelSpec::Alm { disutility, prices } => {
                build_alm(tree, disutility.expand(leaves, "disutility")?, prices.process()?)
            }
            ModelSpec::Bolza { stages } => {
                check_dim(tree.stage_count(), stages.len())?;
                let all_blocks = stages.iter().all(|s| !matches!(s, StageCosts::PerLeaf { .. }));
                if all_blocks {
                    let costs = stages
                        .iter()
                        .enumerate()
                        .map(|(t, s)| match s {
                            StageCosts::Shared(k) => Ok(vec![k.clone(); tree.block_count(t)]),
                            StageCosts::PerBlock { blocks } => {
                                check_dim(tree.block_count(t), blocks.len())?;
                                Ok(blocks.clone())
                            }
                            StageCosts::PerLeaf { .. } => unreachable!(),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    build_bolza_blocks(tree, costs)
                } else {
                    let costs = stages
                        .iter()
                        .enumerate()
                        .map(|(t, s)| match s {
                            StageCosts::Shared(k) => Ok(vec![k.clone(); leaves]),
                            StageCosts::PerLeaf { leaves: ks } => {
                                check_dim(leaves, ks.len())?;
                                Ok(ks.clone())
                            }
                            StageCosts::PerBlock { blocks } => {
                                check_dim(tree.block_count(t), blocks.len())?;
                                Ok((0..leaves).map(|l| blocks[tree.block_of(t, l)].clone()).collect())
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    build_bolza(tree, costs)
                }
            }
            ModelSpec::Kabanov { stages } => {
                check_dim(tree.stage_count(), stages.len())?;
                let mut cones = Vec::new();
                let mut disutilities = Vec::new();
                for (t, s) in stages.iter().enumerate() {
                    let blocks = s.expand(tree.block_count(t), "market stage")?;
                    cones.push(blocks.iter().map(|m| m.cone.polyhedron()).collect::<Result<Vec<_>>>()?);
                    disutilities.push(blocks.into_iter().map(|m| m.disutility).collect());
                }
                build_kabanov(tree, cones, disutilities)
            }
        }
    }
}

/// Convex program with constraint parameters `u` at the last stage.
pub fn build_constrained(
    tree: ScenarioTree,
    x_dims: Vec<usize>,
    objective: Vec<ConvexFunction>,
    constraints: Vec<Vec<ConvexFunction>>,
) -> Result<Problem> {
    let m = constraints.first().map_or(0, Vec::len);
    let stages = x_dims.len();
    let mut u_dims = vec![0; stages];
    if let Some(last) = u_dims.last_mut() {
        *last = m;
    }
    let layout = Layout::new(x_dims, u_dims)?;
    let structure = Structure::Constrained { objective, constraints };
    Ok(Problem::new(ParametricIntegrand::new(tree, layout, structure)?))
}

const MONOTONE_TOL: f64 = 1e-9;

/// Checks `V(0) = 0` and that `V` does not decrease along the nonnegative
/// orthant, on a grid of sample points.
pub fn check_disutility(v: &ConvexFunction) -> Result<()> {
    v.validate()?;
    let d = v.dim();
    let at_zero = v.evaluate(&vec![0.0; d])?;
    if !(at_zero.abs() <= MONOTONE_TOL) {
        return Err(Error::InvalidModel(format!("disutility must vanish at 0, found {at_zero}")));
    }
    let samples: Vec<f64> = if d <= 2 {
        (0..=20).map(|k| k as f64 * 0.5).collect()
    } else {
        vec![0.0, 0.5, 2.0, 8.0]
    };
    let mut idx = vec![0usize; d];
    loop {
        let point: Vec<f64> = idx.iter().map(|&k| samples[k]).collect();
        let base = v.evaluate(&point)?;
        for i in 0..d {
            let mut up = point.clone();
            up[i] += 0.5;
            let next = v.evaluate(&up)?;
            if next < base - MONOTONE_TOL * base.abs().max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "disutility decreases along coordinate {i} near {point:?}"
                )));
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return Ok(());
            }
            idx[i] += 1;
            if idx[i] < samples.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Hedging problem `E V(u_T - sum_t x_t . (s_{t+1} - s_t))`.
pub fn build_alm(tree: ScenarioTree, disutility: Vec<ConvexFunction>, prices: StochasticProcess) -> Result<Problem> {
    for v in &disutility {
        check_disutility(v)?;
    }
    tree.check_process(&prices)?;
    let stages = tree.stage_count();
    let j = prices.dim(0);
    let mut x = vec![j; stages];
    x[stages - 1] = 0;
    let mut u = vec![0; stages];
    u[stages - 1] = 1;
    let layout = Layout::new(x, u)?;
    let structure = Structure::Alm { disutility, prices };
    Ok(Problem::new(ParametricIntegrand::new(tree, layout, structure)?))
}

/// Bolza problem from stage costs given per leaf; each cost must be
/// constant on the blocks of its stage.
pub fn build_bolza(tree: ScenarioTree, costs: Vec<Vec<StageCost>>) -> Result<Problem> {
    Ok(Problem::new(assemble_bolza(tree, costs)?))
}

/// Bolza problem from stage costs given per block.
pub fn build_bolza_blocks(tree: ScenarioTree, costs: Vec<Vec<StageCost>>) -> Result<Problem> {
    Ok(Problem::new(bolza_from_blocks(tree, costs)?))
}

/// Currency market with market sets `cones[t][block]` and disutilities
/// `disutilities[t][block]`.
pub fn build_kabanov(
    tree: ScenarioTree,
    cones: Vec<Vec<Polyhedron>>,
    disutilities: Vec<Vec<ConvexFunction>>,
) -> Result<Problem> {
    check_dim(tree.stage_count(), cones.len())?;
    check_dim(tree.stage_count(), disutilities.len())?;
    let horizon = tree.horizon();
    let mut costs = Vec::with_capacity(cones.len());
    for (t, (cs, vs)) in cones.into_iter().zip(disutilities).enumerate() {
        check_dim(tree.block_count(t), cs.len())?;
        check_dim(tree.block_count(t), vs.len())?;
        let mut stage = Vec::with_capacity(cs.len());
        for (cone, disutility) in cs.into_iter().zip(vs) {
            check_disutility(&disutility)?;
            stage.push(StageCost::Kabanov {
                cone,
                disutility,
                terminal: t == horizon,
            });
        }
        costs.push(stage);
    }
    build_bolza_blocks(tree, costs)
}

/// Embeds an endowment `e` (one `m`-vector per stage) as the Kabanov
/// parameter `(e, 0)`.
pub fn kabanov_parameter(endowment: &StochasticProcess) -> StochasticProcess {
    let dims: Vec<usize> = endowment.dims().iter().map(|d| 2 * d).collect();
    let leaves = endowment.leaf_count();
    StochasticProcess::from_fn(&dims, leaves, |t, leaf, i| {
        let m = endowment.dim(t);
        if i < m {
            endowment.get(t, leaf)[i]
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_primal, SolverOptions};

    fn half_square() -> ConvexFunction {
        ConvexFunction::quadratic(vec![0.5])
    }

    #[test]
    fn constrained_rejects_nonconvex_constraint() {
        let tree = ScenarioTree::deterministic(1);
        let bad = ConvexFunction::quadratic(vec![-1.0]);
        let err = build_constrained(tree.clone(), vec![1], vec![half_square()], vec![vec![bad]]);
        assert!(err.is_err());
        let ok = build_constrained(
            tree,
            vec![1],
            vec![half_square()],
            vec![vec![ConvexFunction::affine(vec![-1.0], 0.0)]],
        )
        .unwrap();
        assert_eq!(ok.integrand().tag(), "constrained");
    }

    #[test]
    fn alm_layout_and_validation() {
        let tree = ScenarioTree::binary(3, 0.5).unwrap();
        let prices = StochasticProcess::from_fn(&[1, 1, 1], tree.leaf_count(), |t, leaf, _| {
            1.0 + t as f64 * if leaf % 2 == 0 { 0.5 } else { -0.25 }
        });
        // not adapted: stage-1 price differs within stage-1 blocks
        assert!(build_alm(tree.clone(), vec![half_square(); 4], prices).is_err());
        let prices = StochasticProcess::from_fn(&[1, 1, 1], tree.leaf_count(), |t, leaf, _| match t {
            0 => 1.0,
            1 => [2.0, 2.0, 0.5, 0.5][leaf],
            _ => [3.0, 1.5, 1.0, 0.25][leaf],
        });
        let p = build_alm(tree.clone(), vec![half_square(); 4], prices.clone()).unwrap();
        assert_eq!(p.x_dims(), &[1, 1, 0]);
        assert_eq!(p.tree().block_count(1), 2);
        let decreasing = ConvexFunction::affine(vec![-1.0], 0.0);
        assert!(build_alm(tree.clone(), vec![decreasing; 4], prices.clone()).is_err());
        let shifted = ConvexFunction::exponential(1.0, 1.0, 0.0);
        assert!(build_alm(tree, vec![shifted; 4], prices).is_err());
    }

    #[test]
    fn primal_value_at_zero_endowment_is_nonpositive() {
        let tree = ScenarioTree::two_stage(vec![0.5, 0.5]).unwrap();
        let prices = StochasticProcess::scalar(vec![vec![1.0, 1.0], vec![2.0, 0.5]]).unwrap();
        let p = build_alm(tree, vec![half_square(); 2], prices).unwrap();
        let u = StochasticProcess::zeros(p.u_dims(), 2);
        let r = solve_primal(&p, &u, &SolverOptions::default()).unwrap();
        assert!(r.value <= 1e-9);
    }

    #[test]
    fn bolza_rejects_non_measurable_costs() {
        let tree = ScenarioTree::two_stage(vec![0.5, 0.5]).unwrap();
        let k = |w: f64| StageCost::Separable {
            state: ConvexFunction::quadratic(vec![w]),
            velocity: half_square(),
        };
        let bad = vec![vec![k(0.5), k(1.0)], vec![k(0.5), k(1.0)]];
        assert!(matches!(build_bolza(tree.clone(), bad), Err(Error::Measurability(_))));
        let good = vec![vec![k(0.5), k(0.5)], vec![k(0.5), k(1.0)]];
        assert!(build_bolza(tree, good).unwrap().integrand().is_bolza());
    }

    #[test]
    fn kabanov_build_checks() {
        let tree = ScenarioTree::deterministic(1);
        let cone = Polyhedron::cone(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let v = ConvexFunction::squared_norm(2, 0.5);
        let p = build_kabanov(tree.clone(), vec![vec![cone.clone()]], vec![vec![v.clone()]]).unwrap();
        assert_eq!(p.x_dims(), &[4]);
        assert_eq!(p.integrand().tag(), "kabanov");
        let u = kabanov_parameter(&StochasticProcess::from_nested(vec![vec![vec![0.0, 0.0]]]).unwrap());
        let r = solve_primal(&p, &u, &SolverOptions::default()).unwrap();
        assert!(r.value <= 1e-9);
        // a shifted set without the origin
        let away = Polyhedron::new(vec![vec![1.0, 0.0]], vec![-1.0]).unwrap();
        assert!(build_kabanov(tree.clone(), vec![vec![away]], vec![vec![v.clone()]]).is_err());
        // non-conical sets are accepted
        let bounded = Polyhedron::bounds(&[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert!(build_kabanov(tree, vec![vec![bounded]], vec![vec![v]]).is_ok());
    }

    #[test]
    fn model_spec_round_trip() {
        let json = r#"{
            "family": "kabanov",
            "stages": [{
                "cone": {"generators": [[1, -2], [-1, 0.5], [-1, 0], [0, -1]]},
                "disutility": {"kind": "quadratic", "weights": [0.5, 0.5]}
            }]
        }"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.family(), "kabanov");
        let p = spec.build(ScenarioTree::deterministic(1)).unwrap();
        assert_eq!(p.x_dims(), &[4]);
        let again: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
    }
}
