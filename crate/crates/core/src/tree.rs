//! Finite filtered probability spaces.
//!
//! A [`ScenarioTree`] stores its filtration as one partition of the leaves
//! per stage. Nodes at stage `t` are the blocks of the stage-`t` partition,
//! so conditional expectations and adaptedness are block operations.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Leaf partitions per stage plus strictly positive leaf probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    probabilities: Vec<f64>,
    blocks: Vec<Vec<Vec<usize>>>,
    block_of: Vec<Vec<usize>>,
    block_weights: Vec<Vec<f64>>,
}

/// Unvalidated description of a tree, as found in problem files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub probabilities: Vec<f64>,
    /// `blocks[t]` lists the stage-`t` blocks as leaf-index lists.
    pub blocks: Vec<Vec<Vec<usize>>>,
}

fn pretty(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

impl ScenarioTree {
    pub fn new(probabilities: Vec<f64>, blocks: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let leaves = probabilities.len();
        if leaves == 0 {
            return Err(Error::InvalidTree("tree needs at least one leaf".into()));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidTree("tree needs at least one stage".into()));
        }
        for (i, &p) in probabilities.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidTree(format!(
                    "probability of leaf {i} is {p}; must lie in (0, 1]"
                )));
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidTree(format!(
                "probabilities sum to {}",
                pretty(total)
            )));
        }

        let mut block_of = Vec::with_capacity(blocks.len());
        for (t, stage) in blocks.iter().enumerate() {
            let mut owner = vec![usize::MAX; leaves];
            for (b, block) in stage.iter().enumerate() {
                if block.is_empty() {
                    return Err(Error::InvalidTree(format!("empty block {b} at stage {t}")));
                }
                for &leaf in block {
                    if leaf >= leaves {
                        return Err(Error::InvalidTree(format!(
                            "stage {t} block {b} names leaf {leaf}, tree has {leaves} leaves"
                        )));
                    }
                    if owner[leaf] != usize::MAX {
                        return Err(Error::InvalidTree(format!(
                            "leaf {leaf} appears in more than one block at stage {t}"
                        )));
                    }
                    owner[leaf] = b;
                }
            }
            if let Some(leaf) = owner.iter().position(|&o| o == usize::MAX) {
                return Err(Error::InvalidTree(format!(
                    "leaf {leaf} belongs to no block at stage {t}"
                )));
            }
            block_of.push(owner);
        }

        for t in 1..blocks.len() {
            for (b, block) in blocks[t].iter().enumerate() {
                let parent = block_of[t - 1][block[0]];
                if block.iter().any(|&leaf| block_of[t - 1][leaf] != parent) {
                    return Err(Error::InvalidTree(format!(
                        "partitions are not nested: stage {t} block {b} straddles stage {} blocks",
                        t - 1
                    )));
                }
            }
        }

        let block_weights = blocks
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|block| block.iter().map(|&l| probabilities[l]).sum())
                    .collect()
            })
            .collect();

        Ok(ScenarioTree {
            probabilities,
            blocks,
            block_of,
            block_weights,
        })
    }

    pub fn from_spec(spec: &TreeSpec) -> Result<Self> {
        Self::new(spec.probabilities.clone(), spec.blocks.clone())
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            probabilities: self.probabilities.clone(),
            blocks: self.blocks.clone(),
        }
    }

    /// Tree with a single leaf observed over `stages` stages.
    pub fn deterministic(stages: usize) -> Self {
        Self::new(vec![1.0], vec![vec![vec![0]]; stages.max(1)]).expect("valid tree")
    }

    /// Two stages: trivial stage-0 information, every leaf revealed at stage 1.
    pub fn two_stage(probabilities: Vec<f64>) -> Result<Self> {
        let leaves = probabilities.len();
        Self::new(
            probabilities,
            vec![vec![(0..leaves).collect()], (0..leaves).map(|l| vec![l]).collect()],
        )
    }

    /// Binary tree with `stages` stages and `2^(stages-1)` leaves.
    ///
    /// `up` is the conditional probability of the first child at every node.
    pub fn binary(stages: usize, up: f64) -> Result<Self> {
        let stages = stages.max(1);
        let depth = stages - 1;
        let leaves = 1usize << depth;
        let mut probabilities = Vec::with_capacity(leaves);
        for leaf in 0..leaves {
            let mut p = 1.0;
            for level in 0..depth {
                let bit = (leaf >> (depth - 1 - level)) & 1;
                p *= if bit == 0 { up } else { 1.0 - up };
            }
            probabilities.push(p);
        }
        let blocks = (0..stages)
            .map(|t| {
                let size = 1usize << (depth - t);
                (0..leaves / size)
                    .map(|b| (b * size..(b + 1) * size).collect())
                    .collect()
            })
            .collect();
        Self::new(probabilities, blocks)
    }

    pub fn stage_count(&self) -> usize {
        self.blocks.len()
    }

    /// Index of the last stage, `T`.
    pub fn horizon(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn leaf_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, leaf: usize) -> f64 {
        self.probabilities[leaf]
    }

    pub fn blocks(&self, t: usize) -> &[Vec<usize>] {
        &self.blocks[t]
    }

    pub fn block_count(&self, t: usize) -> usize {
        self.blocks[t].len()
    }

    pub fn block_of(&self, t: usize, leaf: usize) -> usize {
        self.block_of[t][leaf]
    }

    pub fn block_weight(&self, t: usize, block: usize) -> f64 {
        self.block_weights[t][block]
    }

    fn check_stage(&self, t: usize) -> Result<()> {
        if t < self.stage_count() {
            Ok(())
        } else {
            Err(Error::StageOutOfRange {
                stage: t,
                stages: self.stage_count(),
            })
        }
    }

    pub(crate) fn check_process(&self, proc: &StochasticProcess) -> Result<()> {
        check_dim(self.stage_count(), proc.stage_count())?;
        check_dim(self.leaf_count(), proc.leaf_count())
    }

    /// Probability-weighted average over `block` of the stage-`s` component.
    fn block_average(&self, proc: &StochasticProcess, s: usize, block: &[usize], weight: f64) -> Vec<f64> {
        let dim = proc.dim(s);
        let mut avg = vec![0.0; dim];
        for &leaf in block {
            let p = self.probabilities[leaf];
            for (a, x) in avg.iter_mut().zip(proc.get(s, leaf)) {
                *a += p * x;
            }
        }
        avg.iter_mut().for_each(|a| *a /= weight);
        avg
    }

    /// `E[proc | F_t]`, applied to every stage component.
    pub fn conditional_expectation(&self, proc: &StochasticProcess, t: usize) -> Result<StochasticProcess> {
        self.check_stage(t)?;
        self.check_process(proc)?;
        let mut out = proc.clone();
        for s in 0..proc.stage_count() {
            for (b, block) in self.blocks[t].iter().enumerate() {
                let avg = self.block_average(proc, s, block, self.block_weights[t][b]);
                for &leaf in block {
                    out.get_mut(s, leaf).copy_from_slice(&avg);
                }
            }
        }
        Ok(out)
    }

    /// Replaces every stage-`t` component by its `F_t` conditional expectation.
    pub fn adapted_projection(&self, proc: &StochasticProcess) -> Result<StochasticProcess> {
        self.check_process(proc)?;
        let mut out = proc.clone();
        for t in 0..proc.stage_count() {
            for (b, block) in self.blocks[t].iter().enumerate() {
                let avg = self.block_average(proc, t, block, self.block_weights[t][b]);
                for &leaf in block {
                    out.get_mut(t, leaf).copy_from_slice(&avg);
                }
            }
        }
        Ok(out)
    }

    /// `E(u . y)` summed over stages.
    pub fn pairing(&self, u: &StochasticProcess, y: &StochasticProcess) -> Result<f64> {
        self.check_process(u)?;
        self.check_process(y)?;
        for t in 0..u.stage_count() {
            check_dim(u.dim(t), y.dim(t))?;
        }
        let mut total = 0.0;
        for leaf in 0..self.leaf_count() {
            let mut inner = 0.0;
            for t in 0..u.stage_count() {
                inner += crate::extended::dot(u.get(t, leaf), y.get(t, leaf));
            }
            total += self.probabilities[leaf] * inner;
        }
        Ok(total)
    }

    /// Exact test that every stage-`t` component is constant on stage-`t` blocks.
    pub fn is_adapted(&self, proc: &StochasticProcess) -> bool {
        self.check_process(proc).is_ok() && self.adaptedness_residual(proc) == 0.0
    }

    /// Largest within-block deviation from the first leaf of the block.
    pub fn adaptedness_residual(&self, proc: &StochasticProcess) -> f64 {
        let mut worst = 0.0_f64;
        for t in 0..proc.stage_count() {
            for block in &self.blocks[t] {
                let first = proc.get(t, block[0]);
                for &leaf in &block[1..] {
                    for (a, b) in proc.get(t, leaf).iter().zip(first) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        worst
    }

    /// Nodewise zero-conditional-mean test for membership in the annihilator
    /// of adapted processes.
    pub fn in_orthocomplement(&self, v: &StochasticProcess, tol: f64) -> OrthocomplementReport {
        if self.check_process(v).is_err() {
            return OrthocomplementReport {
                holds: false,
                residual: f64::INFINITY,
                worst: None,
            };
        }
        let mut residual = 0.0_f64;
        let mut worst = None;
        for t in 0..v.stage_count() {
            for (b, block) in self.blocks[t].iter().enumerate() {
                let avg = self.block_average(v, t, block, self.block_weights[t][b]);
                for (i, a) in avg.iter().enumerate() {
                    if a.abs() > residual {
                        residual = a.abs();
                        worst = Some(NodeComponent {
                            stage: t,
                            block: b,
                            component: i,
                        });
                    }
                }
            }
        }
        OrthocomplementReport {
            holds: residual <= tol,
            residual,
            worst,
        }
    }

    /// Forward differences `y_{t+1} - y_t` stored at stage `t`, with `y_{T+1} := 0`.
    pub fn forward_difference(&self, y: &StochasticProcess) -> Result<StochasticProcess> {
        self.check_process(y)?;
        let horizon = y.stage_count() - 1;
        let mut out = y.clone();
        for t in 0..=horizon {
            for leaf in 0..self.leaf_count() {
                let next: Vec<f64> = if t < horizon {
                    check_dim(y.dim(t), y.dim(t + 1))?;
                    y.get(t + 1, leaf).to_vec()
                } else {
                    vec![0.0; y.dim(t)]
                };
                for (o, (n, c)) in out.get_mut(t, leaf).iter_mut().zip(next.iter().zip(y.get(t, leaf))) {
                    *o = n - c;
                }
            }
        }
        Ok(out)
    }

    /// `E_t[y_{t+1} - y_t]` at stage `t`, with `y_{T+1} := 0`.
    pub fn conditional_increment(&self, y: &StochasticProcess) -> Result<StochasticProcess> {
        let diff = self.forward_difference(y)?;
        self.adapted_projection(&diff)
    }

    /// The process that is 1 in component `component` on the given stage-`stage`
    /// block and 0 elsewhere; these span the adapted processes.
    pub fn indicator_process(&self, dims: &[usize], stage: usize, block: usize, component: usize) -> StochasticProcess {
        let mut out = StochasticProcess::zeros(dims, self.leaf_count());
        for &leaf in &self.blocks[stage][block] {
            out.get_mut(stage, leaf)[component] = 1.0;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeComponent {
    pub stage: usize,
    pub block: usize,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthocomplementReport {
    pub holds: bool,
    /// Largest absolute conditional block mean.
    pub residual: f64,
    pub worst: Option<NodeComponent>,
}

/// Stage-indexed, leaf-indexed real vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticProcess {
    dims: Vec<usize>,
    leaves: usize,
    /// `values[t][leaf * dims[t] + i]`
    values: Vec<Vec<f64>>,
}

impl StochasticProcess {
    pub fn zeros(dims: &[usize], leaves: usize) -> Self {
        StochasticProcess {
            dims: dims.to_vec(),
            leaves,
            values: dims.iter().map(|&d| vec![0.0; d * leaves]).collect(),
        }
    }

    pub fn from_fn(dims: &[usize], leaves: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(dims, leaves);
        for (t, &d) in dims.iter().enumerate() {
            for leaf in 0..leaves {
                for i in 0..d {
                    out.values[t][leaf * d + i] = f(t, leaf, i);
                }
            }
        }
        out
    }

    /// Builds from `data[t][leaf]` vectors.
    pub fn from_nested(data: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let leaves = data.first().map_or(0, |s| s.len());
        let mut dims = Vec::with_capacity(data.len());
        let mut values = Vec::with_capacity(data.len());
        for stage in data {
            check_dim(leaves, stage.len())?;
            let d = stage.first().map_or(0, |v| v.len());
            let mut flat = Vec::with_capacity(d * leaves);
            for v in stage {
                check_dim(d, v.len())?;
                flat.extend(v);
            }
            dims.push(d);
            values.push(flat);
        }
        Ok(StochasticProcess { dims, leaves, values })
    }

    /// Scalar process from `data[t][leaf]`.
    pub fn scalar(data: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_nested(data.into_iter().map(|s| s.into_iter().map(|x| vec![x]).collect()).collect())
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.stage_count())
            .map(|t| (0..self.leaves).map(|l| self.get(t, l).to_vec()).collect())
            .collect()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, t: usize) -> usize {
        self.dims[t]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn stage_count(&self) -> usize {
        self.dims.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    pub fn get(&self, t: usize, leaf: usize) -> &[f64] {
        let d = self.dims[t];
        &self.values[t][leaf * d..(leaf + 1) * d]
    }

    pub fn get_mut(&mut self, t: usize, leaf: usize) -> &mut [f64] {
        let d = self.dims[t];
        &mut self.values[t][leaf * d..(leaf + 1) * d]
    }

    /// Concatenation of all stage components seen by one leaf.
    pub fn leaf_vector(&self, leaf: usize) -> Vec<f64> {
        (0..self.stage_count()).flat_map(|t| self.get(t, leaf).to_vec()).collect()
    }

    pub fn set_leaf_vector(&mut self, leaf: usize, data: &[f64]) -> Result<()> {
        check_dim(self.total_dim(), data.len())?;
        let mut offset = 0;
        for t in 0..self.stage_count() {
            let d = self.dims[t];
            self.get_mut(t, leaf).copy_from_slice(&data[offset..offset + d]);
            offset += d;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().flatten().for_each(|x| *x = f(*x));
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_dim(self.stage_count(), other.stage_count())?;
        check_dim(self.leaves, other.leaves)?;
        for t in 0..self.stage_count() {
            check_dim(self.dims[t], other.dims[t])?;
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().flatten().zip(other.values.iter().flatten()) {
            *a = f(*a, *b);
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn iter_values(&self) -> impl Iterator<Item = &f64> {
        self.values.iter().flatten()
    }
}
