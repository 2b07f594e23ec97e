//! Grid-search oracle for the primal value on small trees.
//!
//! The search recurses over the nodes of the tree, so each node's choice is
//! optimized conditionally on its history. When the recursion would exceed
//! [`EXHAUSTIVE_LIMIT`] leaf evaluations, a grid ten times coarser is
//! searched first and the fine grid is then scanned in a window of two
//! coarse steps around the coarse choice at every node.

use std::collections::HashMap;

use super::Problem;
use crate::error::{Error, Result};
use crate::extended::INF;
use crate::tree::StochasticProcess;

pub const EXHAUSTIVE_LIMIT: f64 = 3e7;

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub value: f64,
    pub minimizer: StochasticProcess,
    pub exhaustive: bool,
}

type Node = (usize, usize);

struct Search<'a> {
    p: &'a Problem,
    u: Vec<Vec<f64>>,
    children: Vec<Vec<Vec<usize>>>,
    /// Candidate values of each coordinate at a node.
    axes: Box<dyn Fn(Node, usize) -> Vec<f64> + 'a>,
}

impl Search<'_> {
    /// Minimal weighted cost below `node` given the path prefix, and the
    /// choices achieving it.
    fn node(&self, node: Node, prefix: &mut Vec<f64>) -> Result<(f64, Vec<(Node, Vec<f64>)>)> {
        let (t, block) = node;
        let tree = self.p.tree();
        let d = self.p.x_dims()[t];
        let axes: Vec<Vec<f64>> = (0..d).map(|i| (self.axes)(node, i)).collect();
        let mut idx = vec![0usize; d];
        let mut best = (INF, Vec::new());
        loop {
            let point: Vec<f64> = idx.iter().enumerate().map(|(i, &k)| axes[i][k]).collect();
            let base = prefix.len();
            prefix.extend_from_slice(&point);
            let mut total = 0.0;
            let mut choices = vec![(node, point.clone())];
            if t + 1 == tree.stage_count() {
                for &leaf in &tree.blocks(t)[block] {
                    let v = self.p.integrand().evaluate(leaf, prefix, &self.u[leaf])?;
                    total += tree.probability(leaf) * v;
                }
            } else {
                for &child in &self.children[t][block] {
                    let (v, c) = self.node((t + 1, child), prefix)?;
                    total += v;
                    choices.extend(c);
                }
            }
            prefix.truncate(base);
            if total < best.0 {
                best = (total, choices);
            }
            // advance the multi-index
            let mut i = 0;
            loop {
                if i == d {
                    return Ok(best);
                }
                idx[i] += 1;
                if idx[i] < axes[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    }

    fn run(&self) -> Result<(f64, Vec<(Node, Vec<f64>)>)> {
        self.node((0, 0), &mut Vec::new())
    }
}

fn uniform_axis(radius: f64, step: f64) -> Vec<f64> {
    let n = (2.0 * radius / step).round() as usize;
    (0..=n).map(|k| -radius + k as f64 * step).collect()
}

/// `min E f(x, u)` over adapted `x` with coordinates on the grid
/// `[-radius, radius]` of spacing `step`.
pub fn grid_primal_value(p: &Problem, u: &StochasticProcess, radius: f64, step: f64) -> Result<GridOutcome> {
    let tree = p.tree();
    if tree.block_count(0) != 1 {
        return Err(Error::InvalidTree("stage 0 must be a single node".into()));
    }
    if !(step > 0.0 && radius > 0.0) {
        return Err(Error::InvalidModel("grid needs positive radius and step".into()));
    }
    let children: Vec<Vec<Vec<usize>>> = (0..tree.stage_count() - 1)
        .map(|t| {
            tree.blocks(t)
                .iter()
                .map(|block| {
                    let mut c: Vec<usize> = block.iter().map(|&l| tree.block_of(t + 1, l)).collect();
                    c.dedup();
                    c
                })
                .collect()
        })
        .collect();
    let u_leaves: Vec<Vec<f64>> = (0..tree.leaf_count()).map(|l| u.leaf_vector(l)).collect();
    let points = uniform_axis(radius, step).len() as f64;
    // leaf evaluations of the node recursion: each node scans its own grid
    // once per history and its children are searched independently
    let mut below: Vec<f64> = tree.blocks(tree.stage_count() - 1).iter().map(|b| b.len() as f64).collect();
    for t in (0..tree.stage_count()).rev() {
        let scan = points.powi(p.x_dims()[t] as i32);
        below = if t + 1 == tree.stage_count() {
            below.iter().map(|w| scan * w).collect()
        } else {
            children[t]
                .iter()
                .map(|c| scan * c.iter().map(|&k| below[k]).sum::<f64>())
                .collect()
        };
    }
    let work = below[0];
    let exhaustive = work <= EXHAUSTIVE_LIMIT;

    let choices = if exhaustive {
        let axis = uniform_axis(radius, step);
        let search = Search {
            p,
            u: u_leaves,
            children,
            axes: Box::new(move |_, _| axis.clone()),
        };
        search.run()?
    } else {
        let coarse_step = 10.0 * step;
        let coarse_axis = uniform_axis(radius, coarse_step);
        let coarse = Search {
            p,
            u: u_leaves.clone(),
            children: children.clone(),
            axes: Box::new(move |_, _| coarse_axis.clone()),
        }
        .run()?;
        let centers: HashMap<Node, Vec<f64>> = coarse.1.into_iter().collect();
        let window = (2.0 * coarse_step / step).round() as i64;
        Search {
            p,
            u: u_leaves,
            children,
            axes: Box::new(move |node, i| {
                let c = centers.get(&node).map(|v| v[i]).unwrap_or(0.0);
                (-window..=window)
                    .map(|k| c + k as f64 * step)
                    .filter(|v| v.abs() <= radius + 1e-12)
                    .collect()
            }),
        }
        .run()?
    };

    let mut minimizer = StochasticProcess::zeros(p.x_dims(), tree.leaf_count());
    for ((t, block), value) in &choices.1 {
        for &leaf in &tree.blocks(*t)[*block] {
            minimizer.get_mut(*t, leaf).copy_from_slice(value);
        }
    }
    Ok(GridOutcome {
        value: choices.0,
        minimizer,
        exhaustive,
    })
}
