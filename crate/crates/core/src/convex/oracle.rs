//! Brute-force grid evaluation of conjugates, used as an independent check.

use super::ConvexFunction;
use crate::error::{Error, Result};
use crate::extended::{dot, INF};

#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimate {
    /// `max_x { x.v - g(x) }` over the grid points; `-inf` if `g` is `+inf`
    /// on the whole grid.
    pub value: f64,
    pub argmax: Vec<f64>,
    /// The maximizer sits on the boundary of the box, so the true supremum
    /// may be larger (possibly infinite).
    pub boundary_active: bool,
}

/// Grid estimate of `g*(v)` over `[-radius, radius]^d` with spacing `step`,
/// for `d <= 2`.
pub fn grid_conjugate_oracle(g: &ConvexFunction, v: &[f64], radius: f64, step: f64) -> Result<GridEstimate> {
    let d = g.dim();
    crate::error::check_dim(d, v.len())?;
    if d == 0 || d > 2 {
        return Err(Error::Unsupported(format!("grid oracle handles dimensions 1 and 2, got {d}")));
    }
    if !(step > 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidFunction("grid needs positive radius and step".into()));
    }
    let n = (radius / step).round() as i64;
    let coord = |k: i64| k as f64 * step;
    let mut best = f64::NEG_INFINITY;
    let mut arg = vec![0.0; d];
    let mut arg_idx = vec![0i64; d];
    let mut visit = |idx: &[i64]| -> Result<()> {
        let x: Vec<f64> = idx.iter().map(|&k| coord(k)).collect();
        let gx = g.evaluate(&x)?;
        if gx < INF {
            let val = dot(&x, v) - gx;
            if val > best {
                best = val;
                arg = x;
                arg_idx = idx.to_vec();
            }
        }
        Ok(())
    };
    if d == 1 {
        for i in -n..=n {
            visit(&[i])?;
        }
    } else {
        for i in -n..=n {
            for j in -n..=n {
                visit(&[i, j])?;
            }
        }
    }
    let boundary_active = best > f64::NEG_INFINITY && arg_idx.iter().any(|k| k.abs() == n);
    Ok(GridEstimate {
        value: best,
        argmax: arg,
        boundary_active,
    })
}
