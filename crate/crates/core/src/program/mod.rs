//! Finite convex programs over scenario-tree variables.
//!
//! A [`Builder`] collects a convex objective made of linear terms, weighted
//! squares of affine expressions and smooth exponential/entropy terms,
//! together with linear inequality and equality constraints. Catalog
//! functions are lowered into this form by the routines in `compile`.
//! Linear equalities are eliminated through an SVD null-space basis,
//! feasibility is settled by the simplex method, quadratic programs are
//! solved exactly by Lemke's method, and smooth terms are handled by a
//! trust-region sequence of such quadratic programs.

mod compile;
pub mod lemke;
mod solve;

pub use compile::{add_conjugate, add_epigraph, add_function, add_perspective_conjugate};

use crate::convex::ConvexFunction;
use crate::error::{check_dim, Error, Result};
use crate::extended::INF;

/// `sum_i c_i x_{var_i} + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        LinExpr {
            terms: vec![(i, 1.0)],
            constant: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn plus(&self, other: &LinExpr) -> Self {
        let mut out = self.clone();
        out.add_assign(other, 1.0);
        out
    }

    pub fn minus(&self, other: &LinExpr) -> Self {
        let mut out = self.clone();
        out.add_assign(other, -1.0);
        out
    }

    /// `self += s * other`
    pub fn add_assign(&mut self, other: &LinExpr, s: f64) {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * s)));
        self.constant += s * other.constant;
    }

    pub fn add_term(&mut self, var: usize, c: f64) {
        self.terms.push((var, c));
    }

    /// `sum_j coeffs_j * exprs_j + constant`
    pub fn combination(coeffs: &[f64], exprs: &[LinExpr], constant: f64) -> Self {
        let mut out = LinExpr::constant(constant);
        for (c, e) in coeffs.iter().zip(exprs) {
            if *c != 0.0 {
                out.add_assign(e, *c);
            }
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    pub(crate) fn dense(&self, n: usize) -> Vec<f64> {
        let mut row = vec![0.0; n];
        for &(i, c) in &self.terms {
            row[i] += c;
        }
        row
    }
}

pub fn constants(values: &[f64]) -> Vec<LinExpr> {
    values.iter().map(|&v| LinExpr::constant(v)).collect()
}

const DOMAIN_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothKind {
    /// `scale * exp(rate * s) + constant`
    Exponential { scale: f64, rate: f64, constant: f64 },
    /// `(s/rate) ln((s/rate)/scale) - s/rate - constant`, for `s/rate >= 0`
    Entropy { scale: f64, rate: f64, constant: f64 },
}

impl SmoothKind {
    /// Value, first and second derivative at `s`. The entropy is
    /// evaluated at a tiny positive argument at the boundary of its domain.
    fn taylor(&self, s: f64) -> (f64, f64, f64) {
        match *self {
            SmoothKind::Exponential { scale, rate, constant } => {
                let e = scale * (rate * s).exp();
                (e + constant, rate * e, rate * rate * e)
            }
            SmoothKind::Entropy { scale, rate, constant } => {
                let r = (s / rate).max(1e-14);
                let value = r * (r / scale).ln() - r - constant;
                (value, (r / scale).ln() / rate, 1.0 / (rate * rate * r))
            }
        }
    }

    fn value(&self, s: f64) -> f64 {
        match *self {
            SmoothKind::Exponential { scale, rate, constant } => scale * (rate * s).exp() + constant,
            SmoothKind::Entropy { scale, rate, constant } => {
                let r = s / rate;
                // roundoff from the linear solver may leave the argument a hair below 0
                if r < -DOMAIN_SLACK {
                    INF
                } else if r <= 0.0 {
                    -constant
                } else {
                    r * (r / scale).ln() - r - constant
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTerm {
    pub kind: SmoothKind,
    pub expr: LinExpr,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSolution {
    pub status: ProgramStatus,
    pub x: Vec<f64>,
    /// Objective value; `-inf` when unbounded, `+inf` when infeasible.
    pub value: f64,
    pub iterations: usize,
    /// Largest constraint violation at `x`.
    pub residual: f64,
}

/// Objective `linear.x + constant + sum w e^2 + sum smooth`, constraints
/// `e <= 0` and `e = 0`.
#[derive(Debug, Clone, Default)]
pub struct Builder {
    n: usize,
    linear: Vec<f64>,
    constant: f64,
    squares: Vec<(LinExpr, f64)>,
    smooth: Vec<SmoothTerm>,
    inequalities: Vec<LinExpr>,
    equalities: Vec<LinExpr>,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var_count(&self) -> usize {
        self.n
    }

    pub fn var(&mut self) -> usize {
        self.n += 1;
        self.linear.push(0.0);
        self.n - 1
    }

    pub fn vars(&mut self, k: usize) -> Vec<LinExpr> {
        (0..k).map(|_| LinExpr::var(self.var())).collect()
    }

    /// objective `+= weight * e`
    pub fn add_linear(&mut self, e: &LinExpr, weight: f64) {
        for &(i, c) in &e.terms {
            self.linear[i] += weight * c;
        }
        self.constant += weight * e.constant;
    }

    /// objective `+= weight * e^2`, `weight >= 0`
    pub fn add_square(&mut self, e: &LinExpr, weight: f64) {
        if weight != 0.0 {
            self.squares.push((e.clone(), weight));
        }
    }

    pub fn add_smooth(&mut self, kind: SmoothKind, e: &LinExpr, weight: f64) {
        self.smooth.push(SmoothTerm {
            kind,
            expr: e.clone(),
            weight,
        });
    }

    /// `e <= 0`
    pub fn le(&mut self, e: LinExpr) {
        self.inequalities.push(e);
    }

    /// `e = 0`
    pub fn eq(&mut self, e: LinExpr) {
        self.equalities.push(e);
    }

    pub fn has_curvature(&self) -> bool {
        !self.squares.is_empty() || !self.smooth.is_empty()
    }

    /// Objective value at `x`, `+inf` outside the domain of a smooth term.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut v = self.constant + self.linear.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>();
        for (e, w) in &self.squares {
            let s = e.eval(x);
            v += w * s * s;
        }
        for t in &self.smooth {
            let s = t.kind.value(t.expr.eval(x));
            if s == INF {
                return INF;
            }
            v += t.weight * s;
        }
        v
    }

    /// Largest violation of the linear constraints at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let ineq = self.inequalities.iter().map(|e| e.eval(x).max(0.0));
        let eq = self.equalities.iter().map(|e| e.eval(x).abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> ProgramSolution {
        solve::solve(self)
    }
}

/// `g*(v)` by minimizing `g(x) - x.v`.
pub fn conjugate_value(g: &ConvexFunction, v: &[f64]) -> Result<f64> {
    check_dim(g.dim(), v.len())?;
    let mut b = Builder::new();
    let x = b.vars(g.dim());
    add_function(&mut b, g, &x, 1.0)?;
    for (xi, vi) in x.iter().zip(v) {
        b.add_linear(xi, -vi);
    }
    let sol = b.solve();
    match sol.status {
        ProgramStatus::Optimal => Ok(-sol.value),
        ProgramStatus::Unbounded => Ok(INF),
        ProgramStatus::Infeasible => Err(Error::InvalidFunction("function has empty domain".into())),
        ProgramStatus::IterationLimit => Err(Error::Unsupported(
            "conjugate program did not converge".into(),
        )),
    }
}
