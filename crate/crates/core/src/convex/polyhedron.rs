use serde::{Deserialize, Serialize};

use super::lp::{self, LpOutcome};
use crate::error::{check_dim, Error, Result};
use crate::extended::{dot, INF};

/// Membership tolerance for `A z <= b`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `{z : A z <= b}`; with `cone = true` the offsets are all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedronSpec")]
pub struct Polyhedron {
    #[serde(rename = "A")]
    pub rows: Vec<Vec<f64>>,
    #[serde(rename = "b", default)]
    pub offsets: Vec<f64>,
    #[serde(default)]
    pub cone: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Deserialize)]
struct PolyhedronSpec {
    #[serde(rename = "A")]
    rows: Vec<Vec<f64>>,
    #[serde(rename = "b", default)]
    offsets: Vec<f64>,
    #[serde(default)]
    cone: bool,
    #[serde(default)]
    dim: Option<usize>,
}

impl TryFrom<PolyhedronSpec> for Polyhedron {
    type Error = Error;

    fn try_from(s: PolyhedronSpec) -> Result<Self> {
        Polyhedron {
            rows: s.rows,
            offsets: s.offsets,
            cone: s.cone,
            dim: s.dim,
        }
        .normalized()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SupportArgmax {
    Point(Vec<f64>),
    Unbounded { direction: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportMembership {
    pub feasible: bool,
    /// `sigma_C(y) - z.y`, +inf when the support function is infinite.
    pub residual: f64,
    pub attains: bool,
}

impl Polyhedron {
    pub fn new(rows: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let p = Polyhedron {
            rows,
            offsets,
            cone: false,
            dim: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `{z : A z <= 0}`.
    pub fn cone(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        let p = Polyhedron {
            rows,
            offsets: vec![0.0; m],
            cone: true,
            dim: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Box `{z : lo <= z <= hi}`; infinite bounds are dropped.
    pub fn bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let n = lo.len();
        let mut rows = Vec::new();
        let mut offsets = Vec::new();
        for i in 0..n {
            if hi[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                rows.push(r);
                offsets.push(hi[i]);
            }
            if lo[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = -1.0;
                rows.push(r);
                offsets.push(-lo[i]);
            }
        }
        Ok(Polyhedron {
            rows,
            offsets,
            cone: false,
            dim: Some(n),
        })
    }

    /// Single point `{c}`.
    pub fn point(c: &[f64]) -> Self {
        Self::bounds(c, c).expect("matching lengths")
    }

    /// Completes deserialized data (cone offsets) and validates.
    pub(crate) fn normalized(mut self) -> Result<Self> {
        if self.cone && self.offsets.is_empty() {
            self.offsets = vec![0.0; self.rows.len()];
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != self.offsets.len() {
            return Err(Error::InvalidFunction(format!(
                "polyhedron has {} rows but {} offsets",
                self.rows.len(),
                self.offsets.len()
            )));
        }
        let n = self.dim();
        if n == 0 {
            return Err(Error::InvalidFunction("polyhedron needs dimension".into()));
        }
        for row in &self.rows {
            check_dim(n, row.len())?;
        }
        if self.cone && self.offsets.iter().any(|&b| b != 0.0) {
            return Err(Error::InvalidFunction("cone flag requires b = 0".into()));
        }
        if self.rows.iter().flatten().chain(&self.offsets).any(|x| !x.is_finite()) {
            return Err(Error::InvalidFunction("polyhedron data must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim.or_else(|| self.rows.first().map(|r| r.len())).unwrap_or(0)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.violation(z) <= tol
    }

    /// Largest constraint violation `max_i (a_i.z - b_i)^+`.
    pub fn violation(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(r, b)| (dot(r, z) - b).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_nonempty(&self) -> bool {
        self.cone || lp::feasible_point(self.dim(), &self.rows, &self.offsets).is_some()
    }

    /// `sup { z.y : z in C }`, solved by the simplex method.
    pub fn support_function(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        match lp::maximize(y, &self.rows, &self.offsets) {
            LpOutcome::Optimal { value, .. } => Ok(value),
            LpOutcome::Unbounded { .. } => Ok(INF),
            LpOutcome::Infeasible => Err(Error::InvalidFunction("polyhedron is empty".into())),
        }
    }

    /// A maximizer of `z.y` over the polyhedron.
    pub fn argmax_support(&self, y: &[f64]) -> Result<SupportArgmax> {
        check_dim(self.dim(), y.len())?;
        match lp::maximize(y, &self.rows, &self.offsets) {
            LpOutcome::Optimal { point, .. } => Ok(SupportArgmax::Point(point)),
            LpOutcome::Unbounded { direction, .. } => Ok(SupportArgmax::Unbounded { direction }),
            LpOutcome::Infeasible => Err(Error::InvalidFunction("polyhedron is empty".into())),
        }
    }

    /// Whether `z` lies in the maximizing face for `y`, i.e. `z` belongs to
    /// the subdifferential of the support function at `y`.
    pub fn attains_support(&self, z: &[f64], y: &[f64], tol: f64) -> Result<SupportMembership> {
        check_dim(self.dim(), z.len())?;
        let sigma = self.support_function(y)?;
        let feasible = self.contains(z, tol);
        let residual = if sigma == INF { INF } else { sigma - dot(z, y) };
        Ok(SupportMembership {
            feasible,
            residual,
            attains: feasible && residual <= tol,
        })
    }
}
