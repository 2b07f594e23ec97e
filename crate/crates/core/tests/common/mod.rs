#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stochdual::cli::{parse_problem_file, LoadedProblem};
use stochdual::convex::{ConvexFunction, PiecewiseLinear, Polyhedron};
use stochdual::integrand::StageCost;
use stochdual::models::{build_bolza, build_kabanov};
use stochdual::{Layout, ParametricIntegrand, Problem, ScenarioTree, StochasticProcess};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub const FIXTURES: [&str; 5] = [
    "binomial-alm.json",
    "quadratic-tracking.json",
    "bolza-quadratic.json",
    "kabanov-conical.json",
    "kkt-single.json",
];

pub fn fixture(name: &str) -> LoadedProblem {
    parse_problem_file(&fixture_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Random filtration on at most `max_leaves` leaves with up to `max_stages`
/// stages, refined by contiguous splits of blocks.
pub fn random_tree(r: &mut ChaCha8Rng, max_leaves: usize, max_stages: usize) -> ScenarioTree {
    let leaves = r.gen_range(1..=max_leaves);
    let stages = r.gen_range(1..=max_stages);
    let mut blocks: Vec<Vec<Vec<usize>>> = vec![vec![(0..leaves).collect()]];
    for t in 1..stages {
        let last = t + 1 == stages;
        let mut next = Vec::new();
        for block in &blocks[t - 1] {
            if last && r.gen_bool(0.7) {
                next.extend(block.iter().map(|&l| vec![l]));
                continue;
            }
            let mut cuts: Vec<usize> = (1..block.len()).filter(|_| r.gen_bool(0.5)).collect();
            cuts.push(block.len());
            let mut start = 0;
            for c in cuts {
                next.push(block[start..c].to_vec());
                start = c;
            }
        }
        blocks.push(next);
    }
    let weights: Vec<f64> = (0..leaves).map(|_| r.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    ScenarioTree::new(weights.iter().map(|w| w / total).collect(), blocks).unwrap()
}

/// Random dimensions per stage with total at most `max_total`.
pub fn random_dims(r: &mut ChaCha8Rng, stages: usize, max_total: usize, at_least_one: bool) -> Vec<usize> {
    loop {
        let dims: Vec<usize> = (0..stages).map(|_| r.gen_range(0..=2)).collect();
        let total: usize = dims.iter().sum();
        if total <= max_total && (!at_least_one || total > 0) {
            return dims;
        }
    }
}

fn random_row(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.5..1.5)).collect()
}

fn selector(n: usize, coords: &[usize]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|&c| (0..n).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// A random convex catalog function of `(x, u)`, coercive in `x`.
pub fn random_joint(r: &mut ChaCha8Rng, nx: usize, nu: usize) -> ConvexFunction {
    let n = nx + nu;
    let mut terms = Vec::new();
    let x_coords: Vec<usize> = (0..nx).collect();
    if nx > 0 {
        let weights = (0..nx).map(|_| r.gen_range(0.05..1.0)).collect();
        terms.push(ConvexFunction::compose(
            ConvexFunction::quadratic(weights),
            selector(n, &x_coords),
            vec![0.0; nx],
        ));
    }
    for _ in 0..r.gen_range(1..=3) {
        let term = match r.gen_range(0..5) {
            0 => {
                let k = r.gen_range(1..=2);
                let weights = (0..k).map(|_| r.gen_range(0.0..1.0)).collect();
                let matrix = (0..k).map(|_| random_row(r, n)).collect();
                let offset = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
                ConvexFunction::compose(ConvexFunction::quadratic(weights), matrix, offset)
            }
            1 => ConvexFunction::compose(
                ConvexFunction::Abs { scale: r.gen_range(0.1..2.0) },
                vec![random_row(r, n)],
                vec![r.gen_range(-1.0..1.0)],
            ),
            2 => {
                let slopes = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
                let intercepts = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
                ConvexFunction::compose(
                    ConvexFunction::PiecewiseLinear(PiecewiseLinear::new(slopes, intercepts).unwrap()),
                    vec![random_row(r, n)],
                    vec![0.0],
                )
            }
            3 => ConvexFunction::affine(random_row(r, n), r.gen_range(-1.0..1.0)),
            _ => {
                if nx == 0 {
                    ConvexFunction::constant(n, r.gen_range(-1.0..1.0))
                } else {
                    let lo = vec![-3.0; nx];
                    let hi = vec![3.0; nx];
                    ConvexFunction::compose(
                        ConvexFunction::indicator(Polyhedron::bounds(&lo, &hi).unwrap()),
                        selector(n, &x_coords),
                        vec![0.0; nx],
                    )
                }
            }
        };
        terms.push(term);
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        ConvexFunction::sum(terms)
    }
}

/// A random generic problem with one random joint function per leaf.
pub fn random_generic(r: &mut ChaCha8Rng, max_leaves: usize, max_dim: usize) -> Problem {
    let tree = random_tree(r, max_leaves, 3);
    let stages = tree.stage_count();
    let x = random_dims(r, stages, max_dim, true);
    let u = random_dims(r, stages, max_dim, true);
    let (nx, nu) = (x.iter().sum(), u.iter().sum());
    let functions = (0..tree.leaf_count()).map(|_| random_joint(r, nx, nu)).collect();
    let layout = Layout::new(x, u).unwrap();
    Problem::new(ParametricIntegrand::generic(tree, layout, functions).unwrap())
}

pub fn random_process(r: &mut ChaCha8Rng, dims: &[usize], leaves: usize, scale: f64) -> StochasticProcess {
    StochasticProcess::from_fn(dims, leaves, |_, _, _| r.gen_range(-scale..scale))
}

pub fn random_adapted(r: &mut ChaCha8Rng, tree: &ScenarioTree, dims: &[usize], scale: f64) -> StochasticProcess {
    let raw = random_process(r, dims, tree.leaf_count(), scale);
    tree.adapted_projection(&raw).unwrap()
}

/// A random element of the orthogonal complement of the adapted processes.
pub fn random_orthogonal(r: &mut ChaCha8Rng, tree: &ScenarioTree, dims: &[usize], scale: f64) -> StochasticProcess {
    let raw = random_process(r, dims, tree.leaf_count(), scale);
    let adapted = tree.adapted_projection(&raw).unwrap();
    raw.sub(&adapted).unwrap()
}

/// A random quadratic-plus-kink Bolza stage cost in dimension `d`.
pub fn random_stage_cost(r: &mut ChaCha8Rng, d: usize) -> StageCost {
    let w = |r: &mut ChaCha8Rng| (0..d).map(|_| r.gen_range(0.1..1.0)).collect::<Vec<_>>();
    let state = if r.gen_bool(0.3) && d == 1 {
        ConvexFunction::sum(vec![
            ConvexFunction::quadratic(w(r)),
            ConvexFunction::Abs { scale: r.gen_range(0.1..1.0) },
        ])
    } else {
        ConvexFunction::quadratic(w(r))
    };
    StageCost::Separable {
        state,
        velocity: ConvexFunction::quadratic(w(r)),
    }
}

pub fn random_bolza(r: &mut ChaCha8Rng, max_leaves: usize, d: usize) -> Problem {
    let tree = random_tree(r, max_leaves, 3);
    let costs = (0..tree.stage_count())
        .map(|t| {
            let per_block: Vec<StageCost> = (0..tree.block_count(t)).map(|_| random_stage_cost(r, d)).collect();
            (0..tree.leaf_count()).map(|l| per_block[tree.block_of(t, l)].clone()).collect()
        })
        .collect();
    build_bolza(tree, costs).unwrap()
}

/// Random planar market cones with proportional costs and quadratic
/// disutilities, on a random tree.
pub fn random_kabanov(r: &mut ChaCha8Rng, max_leaves: usize) -> Problem {
    let tree = random_tree(r, max_leaves, 2);
    let mut cones = Vec::new();
    let mut disutilities = Vec::new();
    for t in 0..tree.stage_count() {
        let mut cs = Vec::new();
        let mut vs = Vec::new();
        for _ in 0..tree.block_count(t) {
            // a round trip through both rates loses a factor a * b > 1
            let a = r.gen_range(0.5..2.0);
            let b = r.gen_range(1.05..1.5) / a;
            let mut gens = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, -a], vec![-b, 1.0]];
            gens.shuffle(r);
            cs.push(Polyhedron::cone_from_generators(&gens).unwrap());
            vs.push(ConvexFunction::quadratic(vec![r.gen_range(0.2..1.0), r.gen_range(0.2..1.0)]));
        }
        cones.push(cs);
        disutilities.push(vs);
    }
    build_kabanov(tree, cones, disutilities).unwrap()
}

/// Adapted coordinates of `x` as one flat vector, node by node.
pub fn node_values(tree: &ScenarioTree, x: &StochasticProcess) -> Vec<f64> {
    let mut out = Vec::new();
    for t in 0..tree.stage_count() {
        for block in tree.blocks(t) {
            out.extend_from_slice(x.get(t, block[0]));
        }
    }
    out
}
