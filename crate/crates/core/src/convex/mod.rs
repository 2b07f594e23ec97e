//! Closed convex functions from a fixed catalog.
//!
//! Every [`ConvexFunction`] evaluates exactly (with `+inf` outside its
//! domain) and, for the kinds listed in [`ConvexFunction::conjugate`],
//! conjugates in closed form. Subdifferential membership is tested through
//! the Fenchel–Young residual `g(x) + g*(v) - x.v`, which is zero exactly
//! when `v` is a subgradient of `g` at `x`.

mod domain;
pub mod lp;
pub mod oracle;
mod piecewise;
mod polyhedron;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use piecewise::PiecewiseLinear;
pub use polyhedron::{Polyhedron, SupportArgmax, SupportMembership, FEASIBILITY_TOL};

use crate::error::{check_dim, Error, Result};
use crate::extended::{dot, ext_add, ext_sum, INF};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexFunction {
    /// `a.x + c`
    Affine {
        coefficients: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    /// `sum_i w_i x_i^2 + l.x + c` with `w >= 0`.
    Quadratic {
        weights: Vec<f64>,
        #[serde(default)]
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    PiecewiseLinear(PiecewiseLinear),
    /// `scale * |x|` on the real line.
    Abs {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Indicator of a polyhedron.
    Polyhedron(Polyhedron),
    /// Support function of a nonempty polyhedron.
    Support(Polyhedron),
    /// Indicator of the nonnegative orthant.
    Nonneg { dim: usize },
    /// Indicator of the nonpositive orthant.
    Nonpos { dim: usize },
    /// `scale * exp(rate * x) + constant`, `scale > 0`, `rate != 0`.
    Exponential {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        constant: f64,
    },
    /// Conjugate of the exponential with the same parameters:
    /// `s ln(s / scale) - s - constant` with `s = v / rate >= 0`.
    Entropy {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        constant: f64,
    },
    /// Block-separable sum over consecutive coordinate blocks.
    Separable { blocks: Vec<ConvexFunction> },
    /// `inner(M x + offset)`.
    Compose {
        inner: Box<ConvexFunction>,
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Vec<f64>,
    },
    /// Sum of functions on the same space.
    Sum { terms: Vec<ConvexFunction> },
}

impl ConvexFunction {
    pub fn affine(coefficients: Vec<f64>, constant: f64) -> Self {
        ConvexFunction::Affine { coefficients, constant }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::affine(vec![0.0; dim], c)
    }

    /// `sum_i w_i x_i^2`
    pub fn quadratic(weights: Vec<f64>) -> Self {
        ConvexFunction::Quadratic {
            weights,
            linear: Vec::new(),
            constant: 0.0,
        }
    }

    /// `w * |x|^2` on `R^dim`.
    pub fn squared_norm(dim: usize, w: f64) -> Self {
        Self::quadratic(vec![w; dim])
    }

    pub fn abs() -> Self {
        ConvexFunction::Abs { scale: 1.0 }
    }

    pub fn exponential(scale: f64, rate: f64, constant: f64) -> Self {
        ConvexFunction::Exponential { scale, rate, constant }
    }

    pub fn indicator(p: Polyhedron) -> Self {
        ConvexFunction::Polyhedron(p)
    }

    pub fn compose(inner: ConvexFunction, matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        ConvexFunction::Compose {
            inner: Box::new(inner),
            matrix,
            offset,
        }
    }

    pub fn sum(terms: Vec<ConvexFunction>) -> Self {
        ConvexFunction::Sum { terms }
    }

    pub fn separable(blocks: Vec<ConvexFunction>) -> Self {
        ConvexFunction::Separable { blocks }
    }

    /// Catalog kind name as used in problem files.
    pub fn kind(&self) -> &'static str {
        match self {
            ConvexFunction::Affine { .. } => "affine",
            ConvexFunction::Quadratic { .. } => "quadratic",
            ConvexFunction::PiecewiseLinear(_) => "piecewise_linear",
            ConvexFunction::Abs { .. } => "abs",
            ConvexFunction::Polyhedron(_) => "polyhedron",
            ConvexFunction::Support(_) => "support",
            ConvexFunction::Nonneg { .. } => "nonneg",
            ConvexFunction::Nonpos { .. } => "nonpos",
            ConvexFunction::Exponential { .. } => "exponential",
            ConvexFunction::Entropy { .. } => "entropy",
            ConvexFunction::Separable { .. } => "separable",
            ConvexFunction::Compose { .. } => "compose",
            ConvexFunction::Sum { .. } => "sum",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexFunction::Affine { coefficients, .. } => coefficients.len(),
            ConvexFunction::Quadratic { weights, .. } => weights.len(),
            ConvexFunction::PiecewiseLinear(_)
            | ConvexFunction::Abs { .. }
            | ConvexFunction::Exponential { .. }
            | ConvexFunction::Entropy { .. } => 1,
            ConvexFunction::Polyhedron(p) | ConvexFunction::Support(p) => p.dim(),
            ConvexFunction::Nonneg { dim } | ConvexFunction::Nonpos { dim } => *dim,
            ConvexFunction::Separable { blocks } => blocks.iter().map(|b| b.dim()).sum(),
            ConvexFunction::Compose { matrix, .. } => matrix.first().map_or(0, |r| r.len()),
            ConvexFunction::Sum { terms } => terms.first().map_or(0, |t| t.dim()),
        }
    }

    /// Checks that the function is closed, proper and convex as declared.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFunction(m));
        match self {
            ConvexFunction::Affine { coefficients, constant } => {
                if coefficients.iter().chain(std::iter::once(constant)).any(|x| !x.is_finite()) {
                    return bad("affine data must be finite".into());
                }
            }
            ConvexFunction::Quadratic { weights, linear, constant } => {
                if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                    return bad("quadratic weights must be finite and nonnegative".into());
                }
                if !linear.is_empty() {
                    check_dim(weights.len(), linear.len())?;
                }
                if linear.iter().chain(std::iter::once(constant)).any(|x| !x.is_finite()) {
                    return bad("quadratic data must be finite".into());
                }
            }
            ConvexFunction::PiecewiseLinear(pl) => pl.validate()?,
            ConvexFunction::Abs { scale } => {
                if !(*scale >= 0.0) || !scale.is_finite() {
                    return bad(format!("abs scale must be finite and nonnegative, got {scale}"));
                }
            }
            ConvexFunction::Polyhedron(p) => {
                p.validate()?;
                if !p.is_nonempty() {
                    return bad("polyhedral indicator of an empty set is not proper".into());
                }
            }
            ConvexFunction::Support(p) => {
                p.validate()?;
                if !p.is_nonempty() {
                    return bad("support function of an empty set is not proper".into());
                }
            }
            ConvexFunction::Nonneg { dim } | ConvexFunction::Nonpos { dim } => {
                if *dim == 0 {
                    return bad("orthant indicator needs a positive dimension".into());
                }
            }
            ConvexFunction::Exponential { scale, rate, constant }
            | ConvexFunction::Entropy { scale, rate, constant } => {
                if !(*scale > 0.0) || *rate == 0.0 || ![scale, rate, constant].iter().all(|x| x.is_finite()) {
                    return bad("exponential/entropy need scale > 0 and rate != 0".into());
                }
            }
            ConvexFunction::Separable { blocks } => {
                if blocks.is_empty() {
                    return bad("separable sum needs at least one block".into());
                }
                blocks.iter().try_for_each(|b| b.validate())?;
            }
            ConvexFunction::Compose { inner, matrix, offset } => {
                inner.validate()?;
                check_dim(inner.dim(), matrix.len())?;
                let cols = matrix.first().map_or(0, |r| r.len());
                if cols == 0 {
                    return bad("composition matrix needs at least one column".into());
                }
                for row in matrix {
                    check_dim(cols, row.len())?;
                }
                if !offset.is_empty() {
                    check_dim(matrix.len(), offset.len())?;
                }
                if matrix.iter().flatten().chain(offset).any(|x| !x.is_finite()) {
                    return bad("composition data must be finite".into());
                }
            }
            ConvexFunction::Sum { terms } => {
                if terms.is_empty() {
                    return bad("sum needs at least one term".into());
                }
                let d = terms[0].dim();
                for t in terms {
                    t.validate()?;
                    check_dim(d, t.dim())?;
                }
            }
        }
        Ok(())
    }

    /// Exact value, `+inf` outside the domain.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ConvexFunction::Affine { coefficients, constant } => dot(coefficients, x) + constant,
            ConvexFunction::Quadratic { weights, linear, constant } => {
                let quad: f64 = weights.iter().zip(x).map(|(w, xi)| w * xi * xi).sum();
                let lin = if linear.is_empty() { 0.0 } else { dot(linear, x) };
                quad + lin + constant
            }
            ConvexFunction::PiecewiseLinear(pl) => pl.evaluate(x[0]),
            ConvexFunction::Abs { scale } => scale * x[0].abs(),
            ConvexFunction::Polyhedron(p) => {
                if p.contains(x, FEASIBILITY_TOL) {
                    0.0
                } else {
                    INF
                }
            }
            ConvexFunction::Support(p) => p.support_function(x).unwrap_or(INF),
            ConvexFunction::Nonneg { .. } => {
                if x.iter().all(|&v| v >= 0.0) {
                    0.0
                } else {
                    INF
                }
            }
            ConvexFunction::Nonpos { .. } => {
                if x.iter().all(|&v| v <= 0.0) {
                    0.0
                } else {
                    INF
                }
            }
            ConvexFunction::Exponential { scale, rate, constant } => scale * (rate * x[0]).exp() + constant,
            ConvexFunction::Entropy { scale, rate, constant } => {
                let s = x[0] / rate;
                if s < 0.0 {
                    INF
                } else if s == 0.0 {
                    -constant
                } else {
                    s * (s / scale).ln() - s - constant
                }
            }
            ConvexFunction::Separable { blocks } => {
                let mut offset = 0;
                let mut total = 0.0;
                for b in blocks {
                    let d = b.dim();
                    total = ext_add(total, b.eval_unchecked(&x[offset..offset + d]));
                    offset += d;
                }
                total
            }
            ConvexFunction::Compose { inner, matrix, offset } => {
                let z = apply_affine(matrix, offset, x);
                inner.eval_unchecked(&z)
            }
            ConvexFunction::Sum { terms } => ext_sum(terms.iter().map(|t| t.eval_unchecked(x))),
        }
    }

    /// Whether every kind inside is polyhedral (piecewise linear with a
    /// polyhedral domain).
    pub fn is_polyhedral(&self) -> bool {
        match self {
            ConvexFunction::Affine { .. }
            | ConvexFunction::PiecewiseLinear(_)
            | ConvexFunction::Abs { .. }
            | ConvexFunction::Polyhedron(_)
            | ConvexFunction::Support(_)
            | ConvexFunction::Nonneg { .. }
            | ConvexFunction::Nonpos { .. } => true,
            ConvexFunction::Quadratic { weights, .. } => weights.iter().all(|&w| w == 0.0),
            ConvexFunction::Exponential { .. } | ConvexFunction::Entropy { .. } => false,
            ConvexFunction::Separable { blocks } => blocks.iter().all(|b| b.is_polyhedral()),
            ConvexFunction::Compose { inner, .. } => inner.is_polyhedral(),
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_polyhedral()),
        }
    }

    /// Conservative test for `dom g = R^n`.
    pub fn is_finite_everywhere(&self) -> bool {
        match self {
            ConvexFunction::Affine { .. }
            | ConvexFunction::Quadratic { .. }
            | ConvexFunction::Abs { .. }
            | ConvexFunction::Exponential { .. } => true,
            ConvexFunction::PiecewiseLinear(pl) => pl.lo.is_none() && pl.hi.is_none(),
            ConvexFunction::Polyhedron(p) => p.rows.is_empty(),
            ConvexFunction::Support(_)
            | ConvexFunction::Nonneg { .. }
            | ConvexFunction::Nonpos { .. }
            | ConvexFunction::Entropy { .. } => false,
            ConvexFunction::Separable { blocks } => blocks.iter().all(|b| b.is_finite_everywhere()),
            ConvexFunction::Compose { inner, .. } => inner.is_finite_everywhere(),
            ConvexFunction::Sum { terms } => terms.iter().all(|t| t.is_finite_everywhere()),
        }
    }

    /// The conjugate as a catalog item.
    ///
    /// Closed-form pairs: quadratic/quadratic, abs/box indicator, orthant
    /// indicators, piecewise linear/piecewise linear, polyhedral
    /// indicator/support function, exponential/entropy. Separable sums
    /// conjugate blockwise, invertible compositions by the change of
    /// variables rule, and sums with at most one non-affine term by
    /// translation. Other sums report [`Error::NoClosedForm`].
    pub fn conjugate(&self) -> Result<ConvexFunction> {
        let n = self.dim();
        Ok(match self {
            ConvexFunction::Affine { coefficients, constant } => {
                with_constant(ConvexFunction::Polyhedron(Polyhedron::point(coefficients)), -constant)
            }
            ConvexFunction::Quadratic { weights, linear, constant } => {
                let lin = |i: usize| linear.get(i).copied().unwrap_or(0.0);
                if weights.iter().all(|&w| w > 0.0) {
                    let w2: Vec<f64> = weights.iter().map(|w| 1.0 / (4.0 * w)).collect();
                    let l2: Vec<f64> = (0..n).map(|i| -lin(i) / (2.0 * weights[i])).collect();
                    let c2: f64 = (0..n).map(|i| lin(i) * lin(i) / (4.0 * weights[i])).sum::<f64>() - constant;
                    ConvexFunction::Quadratic {
                        weights: w2,
                        linear: l2,
                        constant: c2,
                    }
                } else {
                    let blocks = (0..n)
                        .map(|i| {
                            let w = weights[i];
                            if w > 0.0 {
                                ConvexFunction::Quadratic {
                                    weights: vec![1.0 / (4.0 * w)],
                                    linear: vec![-lin(i) / (2.0 * w)],
                                    constant: lin(i) * lin(i) / (4.0 * w),
                                }
                            } else {
                                ConvexFunction::Polyhedron(Polyhedron::point(&[lin(i)]))
                            }
                        })
                        .collect();
                    with_constant(ConvexFunction::Separable { blocks }, -constant)
                }
            }
            ConvexFunction::PiecewiseLinear(pl) => ConvexFunction::PiecewiseLinear(pl.conjugate()),
            ConvexFunction::Abs { scale } => {
                ConvexFunction::Polyhedron(Polyhedron::bounds(&[-scale], &[*scale])?)
            }
            ConvexFunction::Polyhedron(p) => ConvexFunction::Support(p.clone()),
            ConvexFunction::Support(p) => ConvexFunction::Polyhedron(p.clone()),
            ConvexFunction::Nonneg { dim } => ConvexFunction::Nonpos { dim: *dim },
            ConvexFunction::Nonpos { dim } => ConvexFunction::Nonneg { dim: *dim },
            ConvexFunction::Exponential { scale, rate, constant } => ConvexFunction::Entropy {
                scale: *scale,
                rate: *rate,
                constant: *constant,
            },
            ConvexFunction::Entropy { scale, rate, constant } => ConvexFunction::Exponential {
                scale: *scale,
                rate: *rate,
                constant: *constant,
            },
            ConvexFunction::Separable { blocks } => ConvexFunction::Separable {
                blocks: blocks.iter().map(|b| b.conjugate()).collect::<Result<_>>()?,
            },
            ConvexFunction::Compose { inner, matrix, offset } => {
                let m = matrix.len();
                if m != n {
                    return Err(Error::NoClosedForm(format!(
                        "composition with a non-square {m}x{n} matrix"
                    )));
                }
                let mat = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                let inv = mat
                    .try_inverse()
                    .ok_or_else(|| Error::NoClosedForm("composition with a singular matrix".into()))?;
                let inv_t: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| inv[(j, i)]).collect()).collect();
                let inner_conj = ConvexFunction::Compose {
                    inner: Box::new(inner.conjugate()?),
                    matrix: inv_t,
                    offset: Vec::new(),
                };
                if offset.iter().all(|&b| b == 0.0) {
                    inner_conj
                } else {
                    // -v . M^{-1} b
                    let shift: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| inv[(i, j)] * offset[j]).sum::<f64>()).collect();
                    ConvexFunction::Sum {
                        terms: vec![inner_conj, ConvexFunction::affine(shift, 0.0)],
                    }
                }
            }
            ConvexFunction::Sum { terms } => {
                let mut a = vec![0.0; n];
                let mut k = 0.0;
                let mut rest = Vec::new();
                for t in terms {
                    match t {
                        ConvexFunction::Affine { coefficients, constant } => {
                            a.iter_mut().zip(coefficients).for_each(|(x, c)| *x += c);
                            k += constant;
                        }
                        other => rest.push(other),
                    }
                }
                match rest.len() {
                    0 => ConvexFunction::affine(a, k).conjugate()?,
                    1 => {
                        // (h + a.x + k)^*(v) = h^*(v - a) - k
                        let identity = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
                        let shifted = ConvexFunction::Compose {
                            inner: Box::new(rest[0].conjugate()?),
                            matrix: identity,
                            offset: a.iter().map(|x| -x).collect(),
                        };
                        with_constant(shifted, -k)
                    }
                    _ => {
                        return Err(Error::NoClosedForm(
                            "sum of several non-affine functions".into(),
                        ))
                    }
                }
            }
        })
    }

    /// `g*(v)`: closed form where the catalog has one, otherwise an exact
    /// convex program `-inf_x { g(x) - x.v }`.
    pub fn conjugate_value(&self, v: &[f64]) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        match self.conjugate() {
            Ok(conj) => conj.evaluate(v),
            Err(Error::NoClosedForm(_)) => crate::program::conjugate_value(self, v),
            Err(e) => Err(e),
        }
    }

    /// Some subgradient at `x`; `None` outside the domain or where the
    /// subdifferential is empty.
    pub fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.len() != self.dim() || self.eval_unchecked(x) == INF {
            return None;
        }
        match self {
            ConvexFunction::Affine { coefficients, .. } => Some(coefficients.clone()),
            ConvexFunction::Quadratic { weights, linear, .. } => Some(
                (0..x.len())
                    .map(|i| 2.0 * weights[i] * x[i] + linear.get(i).copied().unwrap_or(0.0))
                    .collect(),
            ),
            ConvexFunction::PiecewiseLinear(pl) => pl.subgradient(x[0]).map(|s| vec![s]),
            ConvexFunction::Abs { scale } => Some(vec![if x[0] > 0.0 {
                *scale
            } else if x[0] < 0.0 {
                -scale
            } else {
                0.0
            }]),
            ConvexFunction::Polyhedron(_) | ConvexFunction::Nonneg { .. } | ConvexFunction::Nonpos { .. } => {
                Some(vec![0.0; x.len()])
            }
            ConvexFunction::Support(p) => match p.argmax_support(x).ok()? {
                SupportArgmax::Point(z) => Some(z),
                SupportArgmax::Unbounded { .. } => None,
            },
            ConvexFunction::Exponential { scale, rate, .. } => Some(vec![scale * rate * (rate * x[0]).exp()]),
            ConvexFunction::Entropy { scale, rate, .. } => {
                let s = x[0] / rate;
                if s > 0.0 {
                    Some(vec![(s / scale).ln() / rate])
                } else {
                    None
                }
            }
            ConvexFunction::Separable { blocks } => {
                let mut out = Vec::with_capacity(x.len());
                let mut offset = 0;
                for b in blocks {
                    let d = b.dim();
                    out.extend(b.subgradient(&x[offset..offset + d])?);
                    offset += d;
                }
                Some(out)
            }
            ConvexFunction::Compose { inner, matrix, offset } => {
                let z = apply_affine(matrix, offset, x);
                let g = inner.subgradient(&z)?;
                Some(
                    (0..x.len())
                        .map(|j| matrix.iter().zip(&g).map(|(row, gi)| row[j] * gi).sum())
                        .collect(),
                )
            }
            ConvexFunction::Sum { terms } => {
                let mut out = vec![0.0; x.len()];
                for t in terms {
                    let g = t.subgradient(x)?;
                    out.iter_mut().zip(g).for_each(|(o, gi)| *o += gi);
                }
                Some(out)
            }
        }
    }
}

fn with_constant(g: ConvexFunction, c: f64) -> ConvexFunction {
    if c == 0.0 {
        g
    } else {
        let n = g.dim();
        ConvexFunction::Sum {
            terms: vec![g, ConvexFunction::constant(n, c)],
        }
    }
}

pub(crate) fn apply_affine(matrix: &[Vec<f64>], offset: &[f64], x: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| dot(row, x) + offset.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// `g(x) + g*(v) - x.v`, which is nonnegative and vanishes exactly when
/// `v` is a subgradient of `g` at `x`. Any `+inf` term makes it `+inf`.
pub fn fenchel_residual(g: &ConvexFunction, x: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(g.dim(), x.len())?;
    check_dim(g.dim(), v.len())?;
    let gx = g.evaluate(x)?;
    if gx == INF {
        return Ok(INF);
    }
    let gv = g.conjugate_value(v)?;
    Ok(ext_add(gx, gv) - dot(x, v))
}

/// `sup { z.y : z in C }`.
pub fn support_function(c: &Polyhedron, y: &[f64]) -> Result<f64> {
    c.support_function(y)
}

/// A maximizer of `z.y` over `C`, or the unbounded direction.
pub fn argmax_support(c: &Polyhedron, y: &[f64]) -> Result<SupportArgmax> {
    c.argmax_support(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a == b) || (a - b).abs() <= tol
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(ConvexFunction::abs().evaluate(&[3.0]).unwrap(), 3.0);
        let nonpos = ConvexFunction::Polyhedron(Polyhedron::new(vec![vec![1.0]], vec![0.0]).unwrap());
        assert_eq!(nonpos.evaluate(&[1.0]).unwrap(), INF);
        assert_eq!(ConvexFunction::quadratic(vec![0.5]).evaluate(&[2.0]).unwrap(), 2.0);
        assert!(ConvexFunction::abs().evaluate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let half_square = ConvexFunction::quadratic(vec![0.5]);
        let conj = half_square.conjugate().unwrap();
        for y in [-2.0, 0.0, 1.5] {
            assert!(near(conj.evaluate(&[y]).unwrap(), 0.5 * y * y, 1e-15));
        }
        let nonpos = ConvexFunction::Nonpos { dim: 1 };
        assert_eq!(nonpos.conjugate().unwrap(), ConvexFunction::Nonneg { dim: 1 });
        let abs_conj = ConvexFunction::abs().conjugate().unwrap();
        assert_eq!(abs_conj.evaluate(&[0.3]).unwrap(), 0.0);
        assert_eq!(abs_conj.evaluate(&[-1.0]).unwrap(), 0.0);
        assert_eq!(abs_conj.evaluate(&[1.2]).unwrap(), INF);
    }

    #[test]
    fn non_separable_sum_has_no_closed_form() {
        let g = ConvexFunction::sum(vec![ConvexFunction::abs(), ConvexFunction::quadratic(vec![1.0])]);
        assert!(matches!(g.conjugate(), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn fenchel_residual_examples() {
        let q = ConvexFunction::quadratic(vec![0.5]);
        assert!(near(fenchel_residual(&q, &[2.0], &[2.0]).unwrap(), 0.0, 1e-15));
        assert!(near(fenchel_residual(&q, &[2.0], &[0.0]).unwrap(), 2.0, 1e-15));
        let abs = ConvexFunction::abs();
        assert_eq!(fenchel_residual(&abs, &[0.0], &[0.5]).unwrap(), 0.0);
        assert_eq!(fenchel_residual(&abs, &[0.0], &[1.5]).unwrap(), INF);
    }

    #[test]
    fn translated_and_composed_conjugates() {
        // g(x) = (x - 1)^2 written as compose, and as sum with an affine term
        let shifted = ConvexFunction::compose(ConvexFunction::quadratic(vec![1.0]), vec![vec![1.0]], vec![-1.0]);
        let tilted = ConvexFunction::sum(vec![ConvexFunction::quadratic(vec![1.0]), ConvexFunction::affine(vec![3.0], 2.0)]);
        for v in [-3.0, -0.5, 0.0, 2.0] {
            // (x-1)^2 conj: v^2/4 + v ; (x^2 + 3x + 2) conj: (v-3)^2/4 - 2
            assert!(near(shifted.conjugate().unwrap().evaluate(&[v]).unwrap(), v * v / 4.0 + v, 1e-12));
            assert!(near(tilted.conjugate().unwrap().evaluate(&[v]).unwrap(), (v - 3.0).powi(2) / 4.0 - 2.0, 1e-12));
        }
    }

    #[test]
    fn exponential_entropy_pair() {
        let e = ConvexFunction::exponential(2.0, -0.5, 1.0);
        let h = e.conjugate().unwrap();
        // conjugate at v: x* solves a r e^{r x} = v
        for v in [-3.0, -1.0, -0.1] {
            let x = (v / (2.0 * -0.5_f64)).ln() / -0.5;
            let direct = v * x - e.evaluate(&[x]).unwrap();
            assert!(near(h.evaluate(&[v]).unwrap(), direct, 1e-12));
        }
        assert_eq!(h.evaluate(&[0.5]).unwrap(), INF);
        assert_eq!(h.evaluate(&[0.0]).unwrap(), -1.0);
    }

    #[test]
    fn subgradient_of_composition() {
        let g = ConvexFunction::compose(ConvexFunction::quadratic(vec![0.5]), vec![vec![1.0, -1.0]], vec![]);
        assert_eq!(g.subgradient(&[2.0, 1.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn validation_rejects_non_convex_data() {
        assert!(ConvexFunction::quadratic(vec![-1.0]).validate().is_err());
        assert!(ConvexFunction::Abs { scale: -1.0 }.validate().is_err());
        let empty = Polyhedron::new(vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0]).unwrap();
        assert!(ConvexFunction::Polyhedron(empty).validate().is_err());
    }

    #[test]
    fn parses_problem_file_grammar() {
        let q: ConvexFunction = serde_json::from_str(r#"{"kind":"quadratic","weights":[0.5]}"#).unwrap();
        assert_eq!(q, ConvexFunction::quadratic(vec![0.5]));
        let p: ConvexFunction = serde_json::from_str(r#"{"kind":"polyhedron","A":[[1,0]],"b":[0],"cone":true}"#).unwrap();
        assert!(matches!(p, ConvexFunction::Polyhedron(ref c) if c.cone));
        let pl: ConvexFunction =
            serde_json::from_str(r#"{"kind":"piecewise_linear","breakpoints":[0],"slopes":[-1,1]}"#).unwrap();
        assert_eq!(pl.evaluate(&[-2.0]).unwrap(), 2.0);
    }
}
