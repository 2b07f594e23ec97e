//! Extended-real helpers.
//!
//! Values are plain `f64` with `INFINITY` / `NEG_INFINITY`. Sums follow the
//! convention that any `+inf` term makes the sum `+inf`, so `inf - inf`
//! never produces `NaN`.

pub const INF: f64 = f64::INFINITY;
pub const NEG_INF: f64 = f64::NEG_INFINITY;

/// Sum where `+inf` dominates.
pub fn ext_add(a: f64, b: f64) -> f64 {
    if a == INF || b == INF {
        INF
    } else {
        a + b
    }
}

pub fn ext_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    items.into_iter().fold(0.0, ext_add)
}

/// `p * a` for a nonnegative weight `p`, with `0 * inf = 0` avoided: the
/// weight is always strictly positive in the callers, so an infinite value
/// stays infinite.
pub fn ext_scale(p: f64, a: f64) -> f64 {
    if a.is_infinite() {
        a
    } else {
        p * a
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_infinity_dominates() {
        assert_eq!(ext_add(INF, NEG_INF), INF);
        assert_eq!(ext_add(NEG_INF, INF), INF);
        assert_eq!(ext_add(1.0, NEG_INF), NEG_INF);
        assert_eq!(ext_sum([1.0, 2.0, INF, NEG_INF]), INF);
    }
}
