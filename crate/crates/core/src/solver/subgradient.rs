//! Subgradient descent in the adapted coordinates with steps `c / sqrt(k)`.

use super::{Problem, SolveResult, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::tree::StochasticProcess;

const WINDOW: usize = 1000;
const STAGNATION: f64 = 1e-7;

pub(crate) struct Coordinates {
    /// `offsets[t][block]` into the adapted coordinate vector.
    offsets: Vec<Vec<usize>>,
    pub(crate) len: usize,
}

impl Coordinates {
    pub(crate) fn new(p: &Problem) -> Self {
        let tree = p.tree();
        let mut len = 0;
        let offsets = p
            .x_dims()
            .iter()
            .enumerate()
            .map(|(t, &d)| {
                (0..tree.block_count(t))
                    .map(|_| {
                        len += d;
                        len - d
                    })
                    .collect()
            })
            .collect();
        Coordinates { offsets, len }
    }

    /// Index of every leaf-vector entry in the coordinate vector.
    pub(crate) fn leaf_indices(&self, p: &Problem, leaf: usize) -> Vec<usize> {
        let tree = p.tree();
        p.x_dims()
            .iter()
            .enumerate()
            .flat_map(|(t, &d)| {
                let o = self.offsets[t][tree.block_of(t, leaf)];
                o..o + d
            })
            .collect()
    }
}

pub(super) fn solve(p: &Problem, u: &StochasticProcess, opts: &SolverOptions) -> Result<SolveResult> {
    let tree = p.tree();
    let f = p.integrand();
    let leaves = tree.leaf_count();
    let joints = (0..leaves).map(|l| f.joint_function(l)).collect::<Result<Vec<_>>>()?;
    if !joints.iter().all(|g| g.is_finite_everywhere()) {
        return Err(Error::Unsupported(
            "the subgradient method needs integrands that are finite everywhere".into(),
        ));
    }
    let coords = Coordinates::new(p);
    let indices: Vec<Vec<usize>> = (0..leaves).map(|l| coords.leaf_indices(p, l)).collect();
    let us: Vec<Vec<f64>> = (0..leaves).map(|l| u.leaf_vector(l)).collect();
    let joint_point = |z: &[f64], leaf: usize| -> Vec<f64> {
        indices[leaf].iter().map(|&i| z[i]).chain(us[leaf].iter().copied()).collect()
    };
    let objective = |z: &[f64]| -> Result<f64> {
        let mut total = 0.0;
        for (leaf, g) in joints.iter().enumerate() {
            total += tree.probability(leaf) * g.evaluate(&joint_point(z, leaf))?;
        }
        Ok(total)
    };
    let gradient = |z: &[f64]| -> Vec<f64> {
        let mut grad = vec![0.0; coords.len];
        for (leaf, g) in joints.iter().enumerate() {
            let s = g.subgradient(&joint_point(z, leaf)).expect("finite everywhere");
            for (k, &i) in indices[leaf].iter().enumerate() {
                grad[i] += tree.probability(leaf) * s[k];
            }
        }
        grad
    };

    let mut z = vec![0.0; coords.len];
    let mut best_z = z.clone();
    let mut best = objective(&z)?;
    let scale = opts.step_constant * best.abs().max(1.0);
    let mut window_start = best;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    for k in 1..=opts.max_iter {
        iterations = k;
        let g = gradient(&z);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            status = SolveStatus::Optimal;
            break;
        }
        let step = scale / (k as f64).sqrt() / norm;
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi -= step * gi;
        }
        let value = objective(&z)?;
        if value < best {
            best = value;
            best_z.clone_from(&z);
        }
        if best < -1e12 {
            status = SolveStatus::Unbounded;
            break;
        }
        if k % WINDOW == 0 {
            if window_start - best < STAGNATION * best.abs().max(1.0) {
                status = SolveStatus::Optimal;
                break;
            }
            window_start = best;
        }
    }
    let mut optimizer = StochasticProcess::zeros(p.x_dims(), leaves);
    for leaf in 0..leaves {
        let xl: Vec<f64> = indices[leaf].iter().map(|&i| best_z[i]).collect();
        optimizer.set_leaf_vector(leaf, &xl)?;
    }
    Ok(SolveResult {
        optimizer,
        value: if status == SolveStatus::Unbounded { f64::NEG_INFINITY } else { best },
        iterations,
        residual: 0.0,
        status,
    })
}
