use nalgebra::{DMatrix, DVector};

use super::lemke::{self, LcpOutcome};
use super::{Builder, ProgramSolution, ProgramStatus, SmoothTerm};
use crate::convex::lp::{self, LpOutcome};
use crate::extended::INF;

const UNBOUNDED_BELOW: f64 = -1e12;
const FEASIBILITY_TOL: f64 = 1e-7;
const SQP_MAX_ITER: usize = 500;
const VANISHED: f64 = 1e-12;

enum QpOutcome {
    Solved(Vec<f64>),
    Unbounded,
    Failed,
}

/// `min 1/2 z'Hz + g'z s.t. A z <= b`, `z` free.
fn qp(h: &DMatrix<f64>, g: &[f64], a: &[Vec<f64>], b: &[f64]) -> QpOutcome {
    let r = g.len();
    let m = a.len();
    let size = 2 * r + m;
    let mut mat = vec![vec![0.0; size]; size];
    let mut q = vec![0.0; size];
    for i in 0..r {
        for j in 0..r {
            let v = h[(i, j)];
            mat[i][j] = v;
            mat[i][r + j] = -v;
            mat[r + i][j] = -v;
            mat[r + i][r + j] = v;
        }
        for (k, row) in a.iter().enumerate() {
            mat[i][2 * r + k] = row[i];
            mat[r + i][2 * r + k] = -row[i];
            mat[2 * r + k][i] = -row[i];
            mat[2 * r + k][r + i] = row[i];
        }
        q[i] = g[i];
        q[r + i] = -g[i];
    }
    q[2 * r..].copy_from_slice(b);
    match lemke::solve(&mat, &q) {
        LcpOutcome::Solved(z) => QpOutcome::Solved((0..r).map(|i| z[i] - z[r + i]).collect()),
        LcpOutcome::Ray => QpOutcome::Unbounded,
        LcpOutcome::IterationLimit => QpOutcome::Failed,
    }
}

/// Particular solution and null-space basis of `E x = d`; `None` when the
/// system is inconsistent.
fn eliminate(e: &[Vec<f64>], d: &[f64], n: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    if e.is_empty() {
        return Some((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    let rows = e.len().max(n);
    let mut mat = DMatrix::zeros(rows, n);
    let mut rhs = DVector::zeros(rows);
    for (i, row) in e.iter().enumerate() {
        for j in 0..n {
            mat[(i, j)] = row[j];
        }
        rhs[i] = d[i];
    }
    let svd = mat.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(1.0);
    let mut x0 = DVector::zeros(n);
    let mut null = Vec::new();
    for k in 0..sigma.len() {
        let vk = v_t.row(k).transpose();
        if sigma[k] > tol {
            let coef = u.column(k).dot(&rhs) / sigma[k];
            x0 += vk * coef;
        } else {
            null.push(vk);
        }
    }
    let resid = (&mat * &x0 - &rhs).amax();
    if resid > 1e-8 * (1.0 + rhs.amax()) {
        return None;
    }
    let basis = if null.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    Some((x0, basis))
}

/// Moves pairs `a.x <= b`, `-a.x <= -b` into the equalities; a flat
/// feasible set left as two inequalities makes the pivoting degenerate.
/// `None` when a pair is inconsistent.
fn split_opposed(
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    eq_a: &mut Vec<Vec<f64>>,
    eq_b: &mut Vec<f64>,
) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let size = |row: &[f64]| row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut used = vec![false; a.len()];
    for i in 0..a.len() {
        if used[i] {
            continue;
        }
        let si = size(&a[i]);
        if si == 0.0 {
            continue;
        }
        for j in i + 1..a.len() {
            if used[j] || a[i].iter().zip(&a[j]).any(|(p, q)| (p + q).abs() > 1e-12 * si) {
                continue;
            }
            let width = b[i] + b[j];
            let tol = 1e-12 * (1.0 + b[i].abs());
            if width < -FEASIBILITY_TOL * (1.0 + b[i].abs()) {
                return None;
            }
            if width.abs() <= tol {
                used[i] = true;
                used[j] = true;
                eq_a.push(a[i].clone());
                eq_b.push(0.5 * (b[i] - b[j]));
                break;
            }
        }
    }
    let keep = |k: &usize| !used[*k];
    let rows = (0..a.len()).filter(keep).map(|k| a[k].clone()).collect();
    let rhs = (0..b.len()).filter(keep).map(|k| b[k]).collect();
    Some((rows, rhs))
}

struct Reduced<'a> {
    builder: &'a Builder,
    x0: DVector<f64>,
    basis: DMatrix<f64>,
    h: DMatrix<f64>,
    g: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    smooth: Vec<(Vec<f64>, f64, &'a SmoothTerm)>,
}

impl Reduced<'_> {
    fn lift(&self, z: &[f64]) -> Vec<f64> {
        let x = &self.x0 + &self.basis * DVector::from_column_slice(z);
        x.iter().copied().collect()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.builder.objective(&self.lift(z))
    }
}

/// Relative size below which solution entries are returned as exact zeros.
const SNAP: f64 = 1e-13;

pub(super) fn solve(builder: &Builder) -> ProgramSolution {
    let n = builder.n;
    let mut h = DMatrix::zeros(n, n);
    let mut c = DVector::from_column_slice(&builder.linear);
    for (e, w) in &builder.squares {
        let a = e.dense(n);
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            c[i] += 2.0 * w * e.constant * a[i];
            for j in 0..n {
                h[(i, j)] += 2.0 * w * a[i] * a[j];
            }
        }
    }
    let ineq_a: Vec<Vec<f64>> = builder.inequalities.iter().map(|e| e.dense(n)).collect();
    let ineq_b: Vec<f64> = builder.inequalities.iter().map(|e| -e.constant).collect();
    let mut eq_a: Vec<Vec<f64>> = builder.equalities.iter().map(|e| e.dense(n)).collect();
    let mut eq_b: Vec<f64> = builder.equalities.iter().map(|e| -e.constant).collect();
    let Some((ineq_a, ineq_b)) = split_opposed(ineq_a, ineq_b, &mut eq_a, &mut eq_b) else {
        return ProgramSolution {
            status: ProgramStatus::Infeasible,
            x: vec![0.0; n],
            value: INF,
            iterations: 0,
            residual: INF,
        };
    };

    let infeasible = || ProgramSolution {
        status: ProgramStatus::Infeasible,
        x: vec![0.0; n],
        value: INF,
        iterations: 0,
        residual: INF,
    };

    let Some((x0, basis)) = eliminate(&eq_a, &eq_b, n) else {
        return infeasible();
    };
    let r = basis.ncols();
    let to_reduced = |row: &[f64]| -> (Vec<f64>, f64) {
        let rv = DVector::from_column_slice(row);
        let coef = basis.transpose() * &rv;
        (coef.iter().copied().collect(), rv.dot(&x0))
    };
    let mut a = Vec::with_capacity(ineq_a.len());
    let mut b = Vec::with_capacity(ineq_a.len());
    for (row, bi) in ineq_a.iter().zip(&ineq_b) {
        let (coef, shift) = to_reduced(row);
        let size = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let rhs = bi - shift;
        // rows the equalities make constant are checked here, since a
        // round-off negative right-hand side would read as infeasible
        if coef.iter().all(|c| c.abs() <= VANISHED * (1.0 + size)) {
            if rhs < -FEASIBILITY_TOL * (1.0 + bi.abs() + shift.abs()) {
                return infeasible();
            }
            continue;
        }
        a.push(coef);
        b.push(rhs);
    }
    let hr = basis.transpose() * &h * &basis;
    let gr: Vec<f64> = (basis.transpose() * (&c + &h * &x0)).iter().copied().collect();
    let smooth = builder
        .smooth
        .iter()
        .map(|t| {
            let (coef, shift) = to_reduced(&t.expr.dense(n));
            (coef, shift + t.expr.constant, t)
        })
        .collect();
    let red = Reduced {
        builder,
        x0,
        basis,
        h: hr,
        g: gr,
        a,
        b,
        smooth,
    };

    let Some(start) = lp::feasible_point(r, &red.a, &red.b) else {
        return infeasible();
    };

    let (z, status, iterations) = if r == 0 {
        (Vec::new(), ProgramStatus::Optimal, 0)
    } else if red.smooth.is_empty() {
        match qp(&red.h, &red.g, &red.a, &red.b) {
            QpOutcome::Solved(z) => (z, ProgramStatus::Optimal, 1),
            QpOutcome::Unbounded if descent_ray(&red.h, &red.g, &red.a) => (start, ProgramStatus::Unbounded, 1),
            QpOutcome::Unbounded => boxed_qp(&red, start),
            QpOutcome::Failed => (start, ProgramStatus::IterationLimit, 1),
        }
    } else {
        sqp(&red, start)
    };

    let mut x = red.lift(&z);
    // round-off at this level would otherwise leave entries that should
    // vanish exactly (and are tested for exact zero downstream) nonzero
    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    for v in x.iter_mut() {
        if v.abs() <= SNAP * scale {
            *v = 0.0;
        }
    }
    let residual = builder.violation(&x);
    let mut value = builder.objective(&x);
    let mut status = status;
    if status == ProgramStatus::Optimal && residual > FEASIBILITY_TOL {
        status = ProgramStatus::IterationLimit;
    }
    if status == ProgramStatus::Unbounded || value < UNBOUNDED_BELOW {
        status = ProgramStatus::Unbounded;
        value = f64::NEG_INFINITY;
    }
    ProgramSolution {
        status,
        x,
        value,
        iterations,
        residual,
    }
}

/// Whether some `d` with `A d <= 0` and `H d = 0` strictly decreases `g.d`.
///
/// Lemke's secondary ray also fires on nearly degenerate programs that are
/// bounded below, so a ray is only trusted once this direction exists.
fn descent_ray(h: &DMatrix<f64>, g: &[f64], a: &[Vec<f64>]) -> bool {
    let r = g.len();
    let hmax = h.amax().max(1.0);
    let mut rows: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = vec![0.0; a.len()];
    for i in 0..r {
        let hi: Vec<f64> = (0..r).map(|j| h[(i, j)]).collect();
        rows.push(hi.iter().map(|v| -v).collect());
        rows.push(hi);
        rhs.extend([1e-9 * hmax, 1e-9 * hmax]);
        let mut e = vec![0.0; r];
        e[i] = 1.0;
        rows.push(e.clone());
        rows.push(e.iter().map(|v| -v).collect());
        rhs.extend([1.0, 1.0]);
    }
    let c: Vec<f64> = g.iter().map(|v| -v).collect();
    let gmax = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    match lp::maximize(&c, &rows, &rhs) {
        LpOutcome::Optimal { value, .. } => value > 1e-7 * (1.0 + gmax),
        LpOutcome::Unbounded { .. } => true,
        LpOutcome::Infeasible => false,
    }
}

/// The quadratic program restricted to a large box around `start`, used when
/// a reported ray has no descent direction behind it.
fn boxed_qp(red: &Reduced, start: Vec<f64>) -> (Vec<f64>, ProgramStatus, usize) {
    let r = start.len();
    // the slope along free directions is below tolerance; left in place the
    // box would turn it into a value error of order radius * slope
    let mut g = DVector::from_column_slice(&red.g);
    let mut rows: Vec<Vec<f64>> = red.a.clone();
    rows.extend((0..r).map(|i| (0..r).map(|j| red.h[(i, j)]).collect()));
    if let Some((_, free)) = eliminate(&rows, &vec![0.0; rows.len()], r) {
        if free.ncols() > 0 {
            g -= &free * (free.transpose() * &g);
        }
    }
    let g: Vec<f64> = g.iter().copied().collect();
    let radius = 1e6 * (1.0 + start.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    let mut a = red.a.clone();
    let mut b = red.b.clone();
    for i in 0..r {
        let mut e = vec![0.0; r];
        e[i] = 1.0;
        a.push(e.clone());
        b.push(start[i] + radius);
        e[i] = -1.0;
        a.push(e);
        b.push(radius - start[i]);
    }
    match qp(&red.h, &g, &a, &b) {
        QpOutcome::Solved(z) => (z, ProgramStatus::Optimal, 2),
        _ => (start, ProgramStatus::IterationLimit, 2),
    }
}

/// Trust-region sequential quadratic programming on the reduced problem.
fn sqp(red: &Reduced, start: Vec<f64>) -> (Vec<f64>, ProgramStatus, usize) {
    let r = start.len();
    let mut z = start;
    let mut f = red.objective(&z);
    let mut radius = 1.0_f64.max(z.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    for it in 1..=SQP_MAX_ITER {
        let mut h = red.h.clone();
        let mut g: Vec<f64> = (&red.h * DVector::from_column_slice(&z) + DVector::from_column_slice(&red.g))
            .iter()
            .copied()
            .collect();
        for (coef, shift, term) in &red.smooth {
            let s = coef.iter().zip(&z).map(|(a, zi)| a * zi).sum::<f64>() + shift;
            let (_, d1, d2) = term.kind.taylor(s);
            for i in 0..r {
                g[i] += term.weight * d1 * coef[i];
                for j in 0..r {
                    h[(i, j)] += term.weight * d2 * coef[i] * coef[j];
                }
            }
        }
        let mut a = red.a.clone();
        let mut b: Vec<f64> = red
            .a
            .iter()
            .zip(&red.b)
            .map(|(row, bi)| bi - row.iter().zip(&z).map(|(a, zi)| a * zi).sum::<f64>())
            .collect();
        for i in 0..r {
            let mut up = vec![0.0; r];
            up[i] = 1.0;
            a.push(up);
            b.push(radius);
            let mut down = vec![0.0; r];
            down[i] = -1.0;
            a.push(down);
            b.push(radius);
        }
        let d = match qp(&h, &g, &a, &b) {
            QpOutcome::Solved(d) => d,
            _ => return (z, ProgramStatus::IterationLimit, it),
        };
        let dv = DVector::from_column_slice(&d);
        let predicted = -(0.5 * dv.dot(&(&h * &dv)) + g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>());
        let step = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if predicted <= 1e-14 * (1.0 + f.abs()) || step <= 1e-13 {
            return (z, ProgramStatus::Optimal, it);
        }
        let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + b).collect();
        let f_trial = red.objective(&trial);
        let rho = if f == INF { 1.0 } else { (f - f_trial) / predicted };
        if f_trial < INF && rho > 0.1 {
            z = trial;
            f = f_trial;
            if f < UNBOUNDED_BELOW {
                return (z, ProgramStatus::Unbounded, it);
            }
        }
        if !(rho > 0.25) || f_trial == INF {
            radius = 0.25 * step;
        } else if rho > 0.75 && step >= 0.99 * radius {
            radius = (2.0 * radius).min(1e13);
        }
        if radius <= 1e-15 * (1.0 + z.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            return (z, ProgramStatus::Optimal, it);
        }
    }
    (z, ProgramStatus::IterationLimit, SQP_MAX_ITER)
}
