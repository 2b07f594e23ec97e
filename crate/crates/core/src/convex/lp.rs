//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `maximize c.z subject to A z <= b` over free `z`. Sized for
//! desk-scale polyhedra; determinism matters more than speed here.

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { point: Vec<f64>, value: f64 },
    /// Objective unbounded above along `direction` from the feasible `point`.
    Unbounded { point: Vec<f64>, direction: Vec<f64> },
    Infeasible,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r = cost.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (rj, t) in r.iter_mut().zip(&self.rows[i]) {
                    *rj -= cb * t;
                }
            }
        }
        r
    }

    /// Bland's rule iterations. `Err(col)` reports an unbounded entering column.
    fn run(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), usize> {
        let max_iter = 50 * (self.cols + self.rows.len() + 10);
        for _ in 0..max_iter {
            let reduced = self.reduced_costs(cost);
            let entering = (0..self.cols).find(|&j| allowed[j] && reduced[j] > PIVOT_TOL);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r]) {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Err(c),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        // Bland's rule cannot cycle; the cap only guards against numerical drift.
        Ok(())
    }
}

/// `maximize c.z subject to A z <= b`.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = negative.len();
    // columns: z+ (n), z- (n), slack (m), artificial (n_art)
    let cols = 2 * n + m + n_art;
    let mut rows = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut art_index = 0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            rows[i][j] = sign * a[i][j];
            rows[i][n + j] = -sign * a[i][j];
        }
        rows[i][2 * n + i] = sign;
        rows[i][cols] = sign * b[i];
        if b[i] < 0.0 {
            let col = 2 * n + m + art_index;
            rows[i][col] = 1.0;
            basis[i] = col;
            art_index += 1;
        } else {
            basis[i] = 2 * n + i;
        }
    }
    let mut tab = Tableau { rows, basis, cols };
    let is_art = |j: usize| j >= 2 * n + m;

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for j in 2 * n + m..cols {
            phase1[j] = -1.0;
        }
        let all = vec![true; cols];
        // phase 1 is bounded by 0, so Err cannot happen
        let _ = tab.run(&phase1, &all);
        let infeas: f64 = (0..m).filter(|&i| is_art(tab.basis[i])).map(|i| tab.rhs(i)).sum();
        let scale = 1.0 + b.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
        if infeas > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        for i in 0..m {
            if is_art(tab.basis[i]) {
                if let Some(j) = (0..2 * n + m).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    for j in 0..n {
        cost[j] = c[j];
        cost[n + j] = -c[j];
    }
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    let outcome = tab.run(&cost, &allowed);

    let mut values = vec![0.0; cols];
    for (i, &bi) in tab.basis.iter().enumerate() {
        values[bi] = tab.rhs(i);
    }
    let point: Vec<f64> = (0..n).map(|j| values[j] - values[n + j]).collect();
    match outcome {
        Ok(()) => {
            let value = crate::extended::dot(c, &point);
            LpOutcome::Optimal { point, value }
        }
        Err(col) => {
            let mut dir_full = vec![0.0; cols];
            dir_full[col] = 1.0;
            for (i, &bi) in tab.basis.iter().enumerate() {
                dir_full[bi] -= tab.rows[i][col];
            }
            let direction = (0..n).map(|j| dir_full[j] - dir_full[n + j]).collect();
            LpOutcome::Unbounded { point, direction }
        }
    }
}

/// Some point of `{z : A z <= b}`, if any.
pub fn feasible_point(n: usize, a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    match maximize(&vec![0.0; n], a, b) {
        LpOutcome::Optimal { point, .. } | LpOutcome::Unbounded { point, .. } => Some(point),
        LpOutcome::Infeasible => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_vertex() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        match maximize(&[1.0, 2.0], &a, &[1.0, 1.0]) {
            LpOutcome::Optimal { point, value } => {
                assert_eq!(point, vec![1.0, 1.0]);
                assert_eq!(value, 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // x >= 1, y >= 2, x + y <= 10, maximize -x - y
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        match maximize(&[-1.0, -1.0], &a, &[-1.0, -2.0, 10.0]) {
            LpOutcome::Optimal { value, .. } => assert!((value + 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let a = vec![vec![1.0], vec![-1.0]];
        assert_eq!(maximize(&[1.0], &a, &[-1.0, -1.0]), LpOutcome::Infeasible);
        match maximize(&[1.0], &[vec![-1.0]], &[0.0]) {
            LpOutcome::Unbounded { direction, .. } => assert!(direction[0] > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // several constraints active at the origin
        let a = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![2.0, 1.0],
            vec![1.0, 2.0],
        ];
        match maximize(&[1.0, 1.0], &a, &[0.0, 0.0, 0.0, 0.0, 0.0]) {
            LpOutcome::Optimal { value, .. } => assert!(value.abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
