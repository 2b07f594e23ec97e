//! Effective domains of catalog functions as polyhedra, where exact.

use super::{ConvexFunction, Polyhedron};
use crate::extended::INF;

impl Polyhedron {
    /// The whole space `R^n`.
    pub fn full(n: usize) -> Self {
        Polyhedron {
            rows: Vec::new(),
            offsets: Vec::new(),
            cone: false,
            dim: Some(n),
        }
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        let mut p = self.clone();
        p.rows.extend(other.rows.iter().cloned());
        p.offsets.extend(other.offsets.iter().copied());
        p.cone = self.cone && other.cone;
        p.dim = Some(self.dim());
        p
    }

    /// `{x : M x + c in self}`.
    pub fn preimage(&self, matrix: &[Vec<f64>], offset: &[f64]) -> Polyhedron {
        let n = matrix.first().map_or(0, |r| r.len());
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|a| (0..n).map(|j| a.iter().zip(matrix).map(|(ai, m)| ai * m[j]).sum()).collect())
            .collect();
        let offsets = self
            .rows
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| b - a.iter().zip(offset).map(|(ai, ci)| ai * ci).sum::<f64>())
            .collect();
        Polyhedron {
            rows,
            offsets,
            cone: false,
            dim: Some(n),
        }
    }

    /// Embeds `self` as the coordinates `start..start + dim` of `R^n`.
    pub fn embed(&self, n: usize, start: usize) -> Polyhedron {
        let rows = self
            .rows
            .iter()
            .map(|a| {
                let mut r = vec![0.0; n];
                r[start..start + a.len()].copy_from_slice(a);
                r
            })
            .collect();
        Polyhedron {
            rows,
            offsets: self.offsets.clone(),
            cone: false,
            dim: Some(n),
        }
    }

    /// Whether the polyhedron is bounded.
    pub fn is_bounded(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            [1.0, -1.0].iter().all(|&s| {
                let mut e = vec![0.0; n];
                e[i] = s;
                self.support_function(&e).is_ok_and(|v| v < INF)
            })
        })
    }

    /// `{x_keep : exists x_drop with (x_keep, x_drop) in self}` when no row
    /// involves the dropped trailing coordinates; `None` otherwise.
    pub fn project_prefix(&self, keep: usize) -> Option<Polyhedron> {
        let mut rows = Vec::new();
        for a in &self.rows {
            if a[keep..].iter().any(|&v| v != 0.0) {
                return None;
            }
            rows.push(a[..keep].to_vec());
        }
        Some(Polyhedron {
            rows,
            offsets: self.offsets.clone(),
            cone: false,
            dim: Some(keep),
        })
    }
}

impl ConvexFunction {
    /// `dom g` as a polyhedron, or `None` when it is not representable
    /// exactly (support functions of unbounded sets).
    pub fn domain(&self) -> Option<Polyhedron> {
        let n = self.dim();
        match self {
            ConvexFunction::Affine { .. }
            | ConvexFunction::Quadratic { .. }
            | ConvexFunction::Abs { .. }
            | ConvexFunction::Exponential { .. } => Some(Polyhedron::full(n)),
            ConvexFunction::PiecewiseLinear(pl) => Some(Polyhedron::bounds(&[pl.lower()], &[pl.upper()]).ok()?),
            ConvexFunction::Polyhedron(p) => Some(p.clone()),
            ConvexFunction::Support(p) => p.is_bounded().then(|| Polyhedron::full(n)),
            ConvexFunction::Nonneg { dim } => Polyhedron::bounds(&vec![0.0; *dim], &vec![INF; *dim]).ok(),
            ConvexFunction::Nonpos { dim } => Polyhedron::bounds(&vec![-INF; *dim], &vec![0.0; *dim]).ok(),
            ConvexFunction::Entropy { rate, .. } => {
                if *rate > 0.0 {
                    Polyhedron::bounds(&[0.0], &[INF]).ok()
                } else {
                    Polyhedron::bounds(&[-INF], &[0.0]).ok()
                }
            }
            ConvexFunction::Separable { blocks } => {
                let mut p = Polyhedron::full(n);
                let mut start = 0;
                for g in blocks {
                    p = p.intersect(&g.domain()?.embed(n, start));
                    start += g.dim();
                }
                Some(p)
            }
            ConvexFunction::Compose { inner, matrix, offset } => {
                let off = if offset.is_empty() { vec![0.0; matrix.len()] } else { offset.clone() };
                Some(inner.domain()?.preimage(matrix, &off))
            }
            ConvexFunction::Sum { terms } => {
                let mut p = Polyhedron::full(n);
                for g in terms {
                    p = p.intersect(&g.domain()?);
                }
                Some(p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::PiecewiseLinear;

    #[test]
    fn domains_of_catalog_functions() {
        assert!(ConvexFunction::quadratic(vec![1.0]).domain().unwrap().rows.is_empty());
        let pl = PiecewiseLinear::new(vec![1.0], vec![0.0]).unwrap().with_domain(Some(-1.0), Some(2.0)).unwrap();
        let d = ConvexFunction::PiecewiseLinear(pl).domain().unwrap();
        assert!(d.contains(&[2.0], 1e-12) && !d.contains(&[2.1], 1e-12));
        let g = ConvexFunction::compose(ConvexFunction::Nonneg { dim: 1 }, vec![vec![1.0, -1.0]], vec![]);
        let d = g.domain().unwrap();
        assert!(d.contains(&[3.0, 1.0], 1e-12) && !d.contains(&[1.0, 3.0], 1e-12));
        let unbounded = ConvexFunction::Support(Polyhedron::cone(vec![vec![-1.0]]).unwrap());
        assert!(unbounded.domain().is_none());
        assert!(d.project_prefix(1).is_none());
        assert_eq!(Polyhedron::point(&[0.0, 0.0]).embed(3, 0).project_prefix(2).unwrap().rows.len(), 4);
    }
}

impl Polyhedron {
    /// Halfspace form of the cone generated by planar vectors.
    pub fn cone_from_generators(generators: &[Vec<f64>]) -> crate::error::Result<Polyhedron> {
        use crate::error::Error;
        if generators.iter().any(|g| g.len() != 2) {
            return Err(Error::Unsupported("cone generators are supported in the plane only".into()));
        }
        let mut angles: Vec<(f64, &Vec<f64>)> = generators
            .iter()
            .filter(|g| g[0] != 0.0 || g[1] != 0.0)
            .map(|g| (g[1].atan2(g[0]).rem_euclid(std::f64::consts::TAU), g))
            .collect();
        if angles.is_empty() {
            return Polyhedron::bounds(&[0.0, 0.0], &[0.0, 0.0]);
        }
        angles.sort_by(|a, b| a.0.total_cmp(&b.0));
        // the widest angular gap between consecutive generators
        let n = angles.len();
        let (mut gap, mut end) = (0.0, 0);
        for i in 0..n {
            let next = (i + 1) % n;
            let mut g = angles[next].0 - angles[i].0;
            if next == 0 {
                g += std::f64::consts::TAU;
            }
            if g > gap {
                gap = g;
                end = i;
            }
        }
        if gap < std::f64::consts::PI - 1e-12 {
            return Ok(Polyhedron::full(2));
        }
        let last = angles[end].1;
        let first = angles[(end + 1) % n].1;
        let mut rows = vec![vec![first[1], -first[0]], vec![-last[1], last[0]]];
        if (gap - std::f64::consts::TAU).abs() < 1e-12 {
            rows.push(vec![-first[0], -first[1]]);
        }
        Polyhedron::cone(rows)
    }
}
