//! Lowering catalog functions into [`Builder`] programs.

use super::{Builder, LinExpr, SmoothKind};
use crate::convex::{ConvexFunction, Polyhedron};
use crate::error::{check_dim, Error, Result};

fn split<'a>(args: &'a [LinExpr], blocks: &[ConvexFunction]) -> Vec<&'a [LinExpr]> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    for b in blocks {
        let d = b.dim();
        out.push(&args[offset..offset + d]);
        offset += d;
    }
    out
}

fn affine_image(matrix: &[Vec<f64>], offset: &[f64], args: &[LinExpr]) -> Vec<LinExpr> {
    matrix
        .iter()
        .enumerate()
        .map(|(i, row)| LinExpr::combination(row, args, offset.get(i).copied().unwrap_or(0.0)))
        .collect()
}

/// `A E <= b`
fn polyhedron_rows(b: &mut Builder, p: &Polyhedron, args: &[LinExpr]) {
    for (row, off) in p.rows.iter().zip(&p.offsets) {
        b.le(LinExpr::combination(row, args, -off));
    }
}

/// `sigma_P(E) = min { b.lambda : A' lambda = E, lambda >= 0 }`; returns
/// `b.lambda`.
fn support_dual(b: &mut Builder, p: &Polyhedron, args: &[LinExpr]) -> LinExpr {
    let lambda = b.vars(p.rows.len());
    for l in &lambda {
        b.le(l.scaled(-1.0));
    }
    for (j, a) in args.iter().enumerate() {
        let col: Vec<f64> = p.rows.iter().map(|r| r[j]).collect();
        b.eq(LinExpr::combination(&col, &lambda, 0.0).minus(a));
    }
    LinExpr::combination(&p.offsets, &lambda, 0.0)
}

/// Adds `weight * g(args)` to the objective, `weight > 0`.
pub fn add_function(b: &mut Builder, g: &ConvexFunction, args: &[LinExpr], weight: f64) -> Result<()> {
    check_dim(g.dim(), args.len())?;
    match g {
        ConvexFunction::Affine { coefficients, constant } => {
            b.add_linear(&LinExpr::combination(coefficients, args, *constant), weight);
        }
        ConvexFunction::Quadratic { weights, linear, constant } => {
            for (i, a) in args.iter().enumerate() {
                b.add_square(a, weight * weights[i]);
            }
            b.add_linear(&LinExpr::combination(linear, args, *constant), weight);
        }
        ConvexFunction::PiecewiseLinear(pl) => {
            let e = &args[0];
            if pl.slopes.len() == 1 {
                b.add_linear(&e.scaled(pl.slopes[0]).plus(&LinExpr::constant(pl.intercepts[0])), weight);
            } else {
                let t = LinExpr::var(b.var());
                for (s, c) in pl.slopes.iter().zip(&pl.intercepts) {
                    b.le(e.scaled(*s).plus(&LinExpr::constant(*c)).minus(&t));
                }
                b.add_linear(&t, weight);
            }
            pl_domain(b, pl.lo, pl.hi, e);
        }
        ConvexFunction::Abs { scale } => {
            if *scale != 0.0 {
                let t = LinExpr::var(b.var());
                b.le(args[0].scaled(*scale).minus(&t));
                b.le(args[0].scaled(-scale).minus(&t));
                b.add_linear(&t, weight);
            }
        }
        ConvexFunction::Polyhedron(p) => polyhedron_rows(b, p, args),
        ConvexFunction::Support(p) => {
            let value = support_dual(b, p, args);
            b.add_linear(&value, weight);
        }
        ConvexFunction::Nonneg { .. } => args.iter().for_each(|a| b.le(a.scaled(-1.0))),
        ConvexFunction::Nonpos { .. } => args.iter().for_each(|a| b.le(a.clone())),
        ConvexFunction::Exponential { scale, rate, constant } => {
            b.add_smooth(
                SmoothKind::Exponential {
                    scale: *scale,
                    rate: *rate,
                    constant: *constant,
                },
                &args[0],
                weight,
            );
        }
        ConvexFunction::Entropy { scale, rate, constant } => {
            b.le(args[0].scaled(-rate.signum()));
            b.add_smooth(
                SmoothKind::Entropy {
                    scale: *scale,
                    rate: *rate,
                    constant: *constant,
                },
                &args[0],
                weight,
            );
        }
        ConvexFunction::Separable { blocks } => {
            for (blk, a) in blocks.iter().zip(split(args, blocks)) {
                add_function(b, blk, a, weight)?;
            }
        }
        ConvexFunction::Compose { inner, matrix, offset } => {
            add_function(b, inner, &affine_image(matrix, offset, args), weight)?;
        }
        ConvexFunction::Sum { terms } => {
            for t in terms {
                add_function(b, t, args, weight)?;
            }
        }
    }
    Ok(())
}

fn pl_domain(b: &mut Builder, lo: Option<f64>, hi: Option<f64>, e: &LinExpr) {
    if let Some(lo) = lo {
        b.le(LinExpr::constant(lo).minus(e));
    }
    if let Some(hi) = hi {
        b.le(e.minus(&LinExpr::constant(hi)));
    }
}

/// Adds constraints expressing `g(args) <= t`. Only piecewise-linear kinds
/// can appear here; curvature inside a constraint is reported as
/// [`Error::Unsupported`].
pub fn add_epigraph(b: &mut Builder, g: &ConvexFunction, args: &[LinExpr], t: &LinExpr) -> Result<()> {
    check_dim(g.dim(), args.len())?;
    match g {
        ConvexFunction::Affine { coefficients, constant } => {
            b.le(LinExpr::combination(coefficients, args, *constant).minus(t));
        }
        ConvexFunction::Quadratic { weights, linear, constant } if weights.iter().all(|&w| w == 0.0) => {
            b.le(LinExpr::combination(linear, args, *constant).minus(t));
        }
        ConvexFunction::PiecewiseLinear(pl) => {
            for (s, c) in pl.slopes.iter().zip(&pl.intercepts) {
                b.le(args[0].scaled(*s).plus(&LinExpr::constant(*c)).minus(t));
            }
            pl_domain(b, pl.lo, pl.hi, &args[0]);
        }
        ConvexFunction::Abs { scale } => {
            b.le(args[0].scaled(*scale).minus(t));
            b.le(args[0].scaled(-scale).minus(t));
        }
        ConvexFunction::Polyhedron(_) | ConvexFunction::Nonneg { .. } | ConvexFunction::Nonpos { .. } => {
            add_function(b, g, args, 1.0)?;
            b.le(t.scaled(-1.0));
        }
        ConvexFunction::Support(p) => {
            let value = support_dual(b, p, args);
            b.le(value.minus(t));
        }
        ConvexFunction::Separable { blocks } => {
            let mut total = LinExpr::constant(0.0);
            for (blk, a) in blocks.iter().zip(split(args, blocks)) {
                let ti = LinExpr::var(b.var());
                add_epigraph(b, blk, a, &ti)?;
                total.add_assign(&ti, 1.0);
            }
            b.le(total.minus(t));
        }
        ConvexFunction::Compose { inner, matrix, offset } => {
            add_epigraph(b, inner, &affine_image(matrix, offset, args), t)?;
        }
        ConvexFunction::Sum { terms } => {
            let mut total = LinExpr::constant(0.0);
            for term in terms {
                let ti = LinExpr::var(b.var());
                add_epigraph(b, term, args, &ti)?;
                total.add_assign(&ti, 1.0);
            }
            b.le(total.minus(t));
        }
        other => {
            return Err(Error::Unsupported(format!(
                "{} function inside a constraint",
                other.kind()
            )))
        }
    }
    Ok(())
}

/// Adds `weight * g*(args)` to the objective. Closed-form conjugates are
/// used where the catalog has them; otherwise the conjugate is written as
/// an infimal convolution (sums) or an infimum over preimages
/// (compositions) with auxiliary variables.
pub fn add_conjugate(b: &mut Builder, g: &ConvexFunction, args: &[LinExpr], weight: f64) -> Result<()> {
    check_dim(g.dim(), args.len())?;
    match g.conjugate() {
        Ok(conj) => return add_function(b, &conj, args, weight),
        Err(Error::NoClosedForm(_)) => {}
        Err(e) => return Err(e),
    }
    match g {
        ConvexFunction::Compose { inner, matrix, offset } => {
            // (h(M . + c))^*(v) = inf { h^*(w) - c.w : M'w = v }
            let w = b.vars(matrix.len());
            for (j, a) in args.iter().enumerate() {
                let col: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
                b.eq(LinExpr::combination(&col, &w, 0.0).minus(a));
            }
            add_conjugate(b, inner, &w, weight)?;
            if !offset.is_empty() {
                b.add_linear(&LinExpr::combination(offset, &w, 0.0), -weight);
            }
        }
        ConvexFunction::Sum { terms } => {
            let mut rest: Vec<LinExpr> = args.to_vec();
            for (k, t) in terms.iter().enumerate() {
                if k + 1 == terms.len() {
                    add_conjugate(b, t, &rest, weight)?;
                } else {
                    let w = b.vars(args.len());
                    for (r, wi) in rest.iter_mut().zip(&w) {
                        r.add_assign(wi, -1.0);
                    }
                    add_conjugate(b, t, &w, weight)?;
                }
            }
        }
        ConvexFunction::Separable { blocks } => {
            for (blk, a) in blocks.iter().zip(split(args, blocks)) {
                add_conjugate(b, blk, a, weight)?;
            }
        }
        other => {
            return Err(Error::NoClosedForm(format!("{} conjugate", other.kind())));
        }
    }
    Ok(())
}

/// Linear-programming form of a polyhedral function:
/// `g(x) = min { c.(x,z) + k : F x + G z <= h, F_e x + G_e z = h_e }`.
struct LpForm {
    n: usize,
    total: usize,
    cost: Vec<f64>,
    constant: f64,
    ineq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
}

fn lp_form(g: &ConvexFunction) -> Result<LpForm> {
    if !g.is_polyhedral() {
        return Err(Error::Unsupported(format!(
            "perspective of a non-polyhedral {} function",
            g.kind()
        )));
    }
    let mut sub = Builder::new();
    let x = sub.vars(g.dim());
    add_function(&mut sub, g, &x, 1.0)?;
    if sub.has_curvature() {
        return Err(Error::Unsupported("perspective of a curved function".into()));
    }
    let total = sub.var_count();
    Ok(LpForm {
        n: g.dim(),
        total,
        cost: sub.linear.clone(),
        constant: sub.constant,
        ineq: sub.inequalities.iter().map(|e| (e.dense(total), -e.constant)).collect(),
        eq: sub.equalities.iter().map(|e| (e.dense(total), -e.constant)).collect(),
    })
}

/// Adds `weight * (y g)^*(args)` where `(y g)^*(w) = y g^*(w / y)` for
/// `y > 0` and the support function of `dom g` at `y = 0`. `y` must be
/// nonnegative; the caller adds that constraint. A variable `y` requires a
/// polyhedral `g`.
pub fn add_perspective_conjugate(
    b: &mut Builder,
    g: &ConvexFunction,
    args: &[LinExpr],
    y: &LinExpr,
    weight: f64,
) -> Result<()> {
    check_dim(g.dim(), args.len())?;
    if y.is_constant() && y.constant > 0.0 {
        let scaled: Vec<LinExpr> = args.iter().map(|a| a.scaled(1.0 / y.constant)).collect();
        return add_conjugate(b, g, &scaled, weight * y.constant);
    }
    if y.is_constant() && y.constant == 0.0 && g.is_finite_everywhere() {
        args.iter().for_each(|a| b.eq(a.clone()));
        return Ok(());
    }
    // y g^*(w/y) = min { h.lam + h_e.mu - k y : F'lam + F_e'mu = w - c_x y,
    //                    G'lam + G_e'mu = -c_z y, lam >= 0 }
    let form = lp_form(g)?;
    let lam = b.vars(form.ineq.len());
    let mu = b.vars(form.eq.len());
    for l in &lam {
        b.le(l.scaled(-1.0));
    }
    for j in 0..form.total {
        let mut e = LinExpr::constant(0.0);
        for (l, (row, _)) in lam.iter().zip(&form.ineq) {
            e.add_assign(l, row[j]);
        }
        for (m, (row, _)) in mu.iter().zip(&form.eq) {
            e.add_assign(m, row[j]);
        }
        e.add_assign(y, form.cost[j]);
        if j < form.n {
            e.add_assign(&args[j], -1.0);
        }
        b.eq(e);
    }
    let mut value = y.scaled(-form.constant);
    for (l, (_, h)) in lam.iter().zip(&form.ineq) {
        value.add_assign(l, *h);
    }
    for (m, (_, h)) in mu.iter().zip(&form.eq) {
        value.add_assign(m, *h);
    }
    b.add_linear(&value, weight);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{ProgramStatus, Builder, LinExpr};
    use super::*;
    use crate::program::constants;

    fn min_value(b: &Builder) -> f64 {
        let s = b.solve();
        assert_eq!(s.status, ProgramStatus::Optimal);
        s.value
    }

    #[test]
    fn compiled_functions_match_evaluation() {
        let pl = crate::convex::PiecewiseLinear::from_breakpoints(&[0.0, 1.0], &[-1.0, 1.0, 2.0], 0.0).unwrap();
        let g = ConvexFunction::sum(vec![
            ConvexFunction::PiecewiseLinear(pl),
            ConvexFunction::quadratic(vec![0.5]),
        ]);
        for x in [-1.5, 0.3, 2.0] {
            let mut b = Builder::new();
            add_function(&mut b, &g, &constants(&[x]), 1.0).unwrap();
            assert!((min_value(&b) - g.evaluate(&[x]).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn structural_conjugate_of_composition() {
        // g(x1, x2) = 1/2 (x1 + x2 - 1)^2, conjugate finite only on v1 = v2
        let g = ConvexFunction::compose(ConvexFunction::quadratic(vec![0.5]), vec![vec![1.0, 1.0]], vec![-1.0]);
        let mut b = Builder::new();
        add_conjugate(&mut b, &g, &constants(&[2.0, 2.0]), 1.0).unwrap();
        // h^*(w) + w = 1/2 w^2 + w at w = 2
        assert!((min_value(&b) - 4.0).abs() < 1e-9);
        let mut b = Builder::new();
        add_conjugate(&mut b, &g, &constants(&[1.0, 2.0]), 1.0).unwrap();
        assert_eq!(b.solve().status, ProgramStatus::Infeasible);
    }

    #[test]
    fn inf_convolution_matches_closed_form_program() {
        let g = ConvexFunction::sum(vec![ConvexFunction::abs(), ConvexFunction::quadratic(vec![1.0])]);
        for v in [-3.0, 0.4, 2.5] {
            let mut b = Builder::new();
            add_conjugate(&mut b, &g, &constants(&[v]), 1.0).unwrap();
            let expected = crate::program::conjugate_value(&g, &[v]).unwrap();
            assert!((min_value(&b) - expected).abs() < 1e-9, "v = {v}");
        }
    }

    #[test]
    fn perspective_of_affine_constraint() {
        // g(x) = 1 - x: (y g)^*(w) = -y when w = -y, else +inf
        let g = ConvexFunction::affine(vec![-1.0], 1.0);
        let mut b = Builder::new();
        let y = LinExpr::var(b.var());
        b.eq(y.minus(&LinExpr::constant(2.0)));
        add_perspective_conjugate(&mut b, &g, &constants(&[-2.0]), &y, 1.0).unwrap();
        assert!((min_value(&b) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn epigraph_rejects_curvature() {
        let mut b = Builder::new();
        let x = b.vars(1);
        let t = LinExpr::constant(0.0);
        assert!(matches!(
            add_epigraph(&mut b, &ConvexFunction::quadratic(vec![1.0]), &x, &t),
            Err(Error::Unsupported(_))
        ));
    }
}
