//! Lemke's complementary pivoting for `w = M z + q, w, z >= 0, w.z = 0`.
//!
//! Ties in the ratio test are broken lexicographically on the rows of the
//! basis inverse, which rules out cycling on degenerate problems.

const PIVOT_TOL: f64 = 1e-11;
const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LcpOutcome {
    Solved(Vec<f64>),
    /// Secondary ray: for a positive semidefinite `M` the LCP has no solution.
    Ray,
    IterationLimit,
}

/// Solves the LCP with covering vector of ones.
pub fn solve(m: &[Vec<f64>], q: &[f64]) -> LcpOutcome {
    let n = q.len();
    if q.iter().all(|&qi| qi >= 0.0) {
        return LcpOutcome::Solved(vec![0.0; n]);
    }
    // columns: w (n), z (n), z0, rhs
    let z0 = 2 * n;
    let rhs = 2 * n + 1;
    let mut t = vec![vec![0.0; 2 * n + 2]; n];
    for i in 0..n {
        t[i][i] = 1.0;
        for j in 0..n {
            t[i][n + j] = -m[i][j];
        }
        t[i][z0] = -1.0;
        t[i][rhs] = q[i];
    }
    let mut basis: Vec<usize> = (0..n).collect();

    let pivot = |t: &mut Vec<Vec<f64>>, r: usize, c: usize| {
        let p = t[r][c];
        for v in t[r].iter_mut() {
            *v /= p;
        }
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r {
                let f = ti[c];
                if f != 0.0 {
                    for (v, rv) in ti.iter_mut().zip(&row) {
                        *v -= f * rv;
                    }
                }
            }
        }
    };

    // z0 enters; the most negative q leaves
    let mut r = 0;
    for i in 1..n {
        if q[i] < q[r] {
            r = i;
        }
    }
    pivot(&mut t, r, z0);
    let mut leaving = basis[r];
    basis[r] = z0;

    let max_iter = 200 * n + 1000;
    for _ in 0..max_iter {
        let entering = if leaving < n { leaving + n } else { leaving - n };
        let candidates: Vec<usize> = (0..n).filter(|&i| t[i][entering] > PIVOT_TOL).collect();
        if candidates.is_empty() {
            return LcpOutcome::Ray;
        }
        let row = lexicographic_min(&t, &candidates, entering, rhs, n, &basis, z0);
        pivot(&mut t, row, entering);
        leaving = basis[row];
        basis[row] = entering;
        if leaving == z0 {
            let mut z = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if (n..2 * n).contains(&b) {
                    z[b - n] = t[i][rhs].max(0.0);
                }
            }
            return LcpOutcome::Solved(z);
        }
    }
    LcpOutcome::IterationLimit
}

fn lexicographic_min(
    t: &[Vec<f64>],
    candidates: &[usize],
    col: usize,
    rhs: usize,
    n: usize,
    basis: &[usize],
    z0: usize,
) -> usize {
    let ratio = |i: usize, k: usize| t[i][k] / t[i][col];
    let mut set: Vec<usize> = candidates.to_vec();
    // first key: the right-hand side
    let best = set.iter().map(|&i| ratio(i, rhs)).fold(f64::INFINITY, f64::min);
    let scale = 1.0 + best.abs();
    set.retain(|&i| ratio(i, rhs) <= best + TIE_TOL * scale);
    if let Some(&i) = set.iter().find(|&&i| basis[i] == z0) {
        return i;
    }
    for k in 0..n {
        if set.len() == 1 {
            break;
        }
        let best = set.iter().map(|&i| ratio(i, k)).fold(f64::INFINITY, f64::min);
        let scale = 1.0 + best.abs();
        set.retain(|&i| ratio(i, k) <= best + TIE_TOL * scale);
    }
    set[0]
}
