use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::INF;

const ACTIVE_TOL: f64 = 1e-12;

/// Scalar `x -> max_i (slopes[i] x + intercepts[i])` restricted to `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseLinearSpec")]
pub struct PiecewiseLinear {
    pub slopes: Vec<f64>,
    pub intercepts: Vec<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

/// Accepted input forms: explicit pieces, or breakpoints with one more slope
/// than breakpoints and the value at the first breakpoint (at 0 if none).
#[derive(Debug, Clone, Deserialize)]
struct PiecewiseLinearSpec {
    slopes: Vec<f64>,
    #[serde(default)]
    intercepts: Option<Vec<f64>>,
    #[serde(default)]
    breakpoints: Option<Vec<f64>>,
    #[serde(default)]
    value: Option<f64>,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
}

impl TryFrom<PiecewiseLinearSpec> for PiecewiseLinear {
    type Error = Error;

    fn try_from(spec: PiecewiseLinearSpec) -> Result<Self> {
        let mut pl = match (spec.intercepts, spec.breakpoints) {
            (Some(c), None) => PiecewiseLinear::new(spec.slopes, c)?,
            (None, Some(b)) => PiecewiseLinear::from_breakpoints(&b, &spec.slopes, spec.value.unwrap_or(0.0))?,
            (None, None) => {
                return Err(Error::InvalidFunction(
                    "piecewise_linear needs intercepts or breakpoints".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidFunction(
                    "piecewise_linear takes intercepts or breakpoints, not both".into(),
                ))
            }
        };
        pl.lo = spec.lo;
        pl.hi = spec.hi;
        pl.validate()?;
        Ok(pl)
    }
}

impl PiecewiseLinear {
    pub fn new(slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        let pl = PiecewiseLinear {
            slopes,
            intercepts,
            lo: None,
            hi: None,
        };
        pl.validate()?;
        Ok(pl)
    }

    pub fn with_domain(mut self, lo: Option<f64>, hi: Option<f64>) -> Result<Self> {
        self.lo = lo;
        self.hi = hi;
        self.validate()?;
        Ok(self)
    }

    /// Continuous function with the given breakpoints and slopes, anchored
    /// by its value at the first breakpoint (at 0 when there are none).
    pub fn from_breakpoints(breakpoints: &[f64], slopes: &[f64], value: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidFunction(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction("breakpoints must increase strictly".into()));
        }
        if slopes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidFunction(
                "piecewise-linear slopes must be nondecreasing".into(),
            ));
        }
        let anchor = breakpoints.first().copied().unwrap_or(0.0);
        let mut intercepts = Vec::with_capacity(slopes.len());
        intercepts.push(value - slopes[0] * anchor);
        let mut at_breakpoint = value;
        for (i, &s) in slopes.iter().enumerate().skip(1) {
            let b = breakpoints[i - 1];
            if i > 1 {
                at_breakpoint += slopes[i - 1] * (b - breakpoints[i - 2]);
            }
            intercepts.push(at_breakpoint - s * b);
        }
        Self::new(slopes.to_vec(), intercepts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slopes.is_empty() || self.slopes.len() != self.intercepts.len() {
            return Err(Error::InvalidFunction(
                "piecewise_linear needs matching, nonempty slopes and intercepts".into(),
            ));
        }
        if self.slopes.iter().chain(&self.intercepts).any(|x| !x.is_finite()) {
            return Err(Error::InvalidFunction("piecewise_linear data must be finite".into()));
        }
        if let (Some(lo), Some(hi)) = (self.lo, self.hi) {
            if lo > hi {
                return Err(Error::InvalidFunction(format!("empty domain [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.lo.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper(&self) -> f64 {
        self.hi.unwrap_or(INF)
    }

    fn envelope(&self, x: f64) -> f64 {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(s, c)| s * x + c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            INF
        } else {
            self.envelope(x)
        }
    }

    pub fn in_domain(&self, x: f64) -> bool {
        x >= self.lower() && x <= self.upper()
    }

    /// Active slopes at `x` (nonempty inside the domain).
    fn active_slopes(&self, x: f64) -> (f64, f64) {
        let g = self.envelope(x);
        let tol = ACTIVE_TOL * (1.0 + g.abs());
        let mut lo = INF;
        let mut hi = f64::NEG_INFINITY;
        for (s, c) in self.slopes.iter().zip(&self.intercepts) {
            if s * x + c >= g - tol {
                lo = lo.min(*s);
                hi = hi.max(*s);
            }
        }
        (lo, hi)
    }

    pub fn subgradient(&self, x: f64) -> Option<f64> {
        if !self.in_domain(x) {
            return None;
        }
        Some(self.active_slopes(x).1)
    }

    /// Breakpoints of the envelope inside the domain plus finite endpoints.
    pub fn vertices(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(lo) = self.lo {
            out.push(lo);
        }
        if let Some(hi) = self.hi {
            out.push(hi);
        }
        let k = self.slopes.len();
        for i in 0..k {
            for j in i + 1..k {
                let ds = self.slopes[i] - self.slopes[j];
                if ds == 0.0 {
                    continue;
                }
                let x = (self.intercepts[j] - self.intercepts[i]) / ds;
                if x > self.lower() && x < self.upper() {
                    let (a, b) = self.active_slopes(x);
                    if a < b {
                        out.push(x);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
        out
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(INF, f64::min)
    }

    pub fn max_slope(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The conjugate, again piecewise linear.
    pub fn conjugate(&self) -> PiecewiseLinear {
        let verts = self.vertices();
        if verts.is_empty() {
            // unbounded domain and a single effective line s x + c
            let s = self.max_slope();
            let c = self.envelope(0.0);
            return PiecewiseLinear {
                slopes: vec![0.0],
                intercepts: vec![-c],
                lo: Some(s),
                hi: Some(s),
            };
        }
        let slopes = verts.clone();
        let intercepts = verts.iter().map(|&x| -self.envelope(x)).collect();
        PiecewiseLinear {
            slopes,
            intercepts,
            lo: if self.lo.is_some() { None } else { Some(self.min_slope()) },
            hi: if self.hi.is_some() { None } else { Some(self.max_slope()) },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakpoint_form_matches_pieces() {
        // |x| + max(0, x - 1)
        let pl = PiecewiseLinear::from_breakpoints(&[0.0, 1.0], &[-1.0, 1.0, 2.0], 0.0).unwrap();
        for (x, expected) in [(-2.0, 2.0), (0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (3.0, 5.0)] {
            assert!((pl.evaluate(x) - expected).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(pl.vertices(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_decreasing_slopes() {
        assert!(PiecewiseLinear::from_breakpoints(&[0.0], &[1.0, -1.0], 0.0).is_err());
    }

    #[test]
    fn conjugate_of_abs_is_box_indicator() {
        let abs = PiecewiseLinear::new(vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        let conj = abs.conjugate();
        assert_eq!(conj.evaluate(0.5), 0.0);
        assert_eq!(conj.evaluate(1.0), 0.0);
        assert_eq!(conj.evaluate(1.5), INF);
        let back = conj.conjugate();
        for x in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            assert!((back.evaluate(x) - abs.evaluate(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_of_affine_is_point_indicator() {
        let aff = PiecewiseLinear::new(vec![2.0], vec![1.0]).unwrap();
        let conj = aff.conjugate();
        assert_eq!(conj.evaluate(2.0), -1.0);
        assert_eq!(conj.evaluate(2.5), INF);
    }
}
