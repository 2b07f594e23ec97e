//! Optimality certificates: given `(x, u)` and candidate duals, decide
//! optimality with per-condition residuals.
//!
//! Every subdifferential inclusion is tested through a Fenchel residual
//! `g(x) + g*(v) - x.v >= 0`, which vanishes exactly when `v` is a
//! subgradient of `g` at `x`.

use serde::{Deserialize, Serialize};

use crate::convex::{fenchel_residual, ConvexFunction, Polyhedron};
use crate::duality::check_martingale_density;
use crate::error::{check_dim, Error, Result};
use crate::extended::{dot, ext_add, INF, NEG_INF};
use crate::integrand::{StageCost, Structure};
use crate::solver::Problem;
use crate::tree::{ScenarioTree, StochasticProcess};

pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The dual candidate is identically zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub condition: String,
    pub stage: Option<usize>,
    /// Leaf index for leafwise conditions, block index for blockwise ones.
    pub node: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianForm {
    /// `f(x, u) - u.y - l(x, y)`, zero when `u` attains the inner infimum.
    pub u_residual: f64,
    /// `l(x, y) - x.v + f*(v, y)`, zero when `v` is an `x`-subgradient.
    pub v_residual: f64,
    pub verdict: Verdict,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicalTriple {
    pub stage: usize,
    pub block: usize,
    pub feasibility: f64,
    /// `sigma_C(y)`: zero iff `y` lies in the polar cone.
    pub polar: f64,
    pub complementarity: f64,
    pub holds: bool,
    /// Whether the triple agrees with the support-argmax verdict.
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub checker: String,
    pub y: StochasticProcess,
    pub v: StochasticProcess,
    pub rows: Vec<ResidualRow>,
    pub verdict: Verdict,
    pub tol: f64,
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianForm>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub conical: Vec<ConicalTriple>,
}

impl Certificate {
    fn new(checker: &str, y: StochasticProcess, v: StochasticProcess, tol: f64) -> Self {
        Certificate {
            checker: checker.into(),
            y,
            v,
            rows: Vec::new(),
            verdict: Verdict::Pass,
            tol,
            reason: None,
            lagrangian: None,
            conical: Vec::new(),
        }
    }

    fn push(&mut self, condition: &str, stage: Option<usize>, node: usize, residual: f64) {
        self.rows.push(ResidualRow {
            condition: condition.into(),
            stage,
            node,
            residual,
        });
    }

    pub fn max_residual(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    /// Sets the verdict from the rows unless a reason was already recorded.
    fn finish(mut self) -> Self {
        if self.reason.is_none() {
            if let Some(row) = self.rows.iter().find(|r| !(r.residual <= self.tol)) {
                self.verdict = Verdict::Fail;
                self.reason = Some(format!("{} residual {:e} exceeds tolerance", row.condition, row.residual));
            }
        }
        self
    }

    fn fail(mut self, reason: String) -> Self {
        self.verdict = Verdict::Fail;
        self.reason = Some(reason);
        self
    }

    fn degenerate(mut self) -> Self {
        self.verdict = Verdict::Degenerate;
        self.reason = Some("degenerate: zero dual".into());
        self
    }
}

fn check_layout(tree: &ScenarioTree, proc: &StochasticProcess, dims: &[usize]) -> Result<()> {
    tree.check_process(proc)?;
    for (t, &d) in dims.iter().enumerate() {
        check_dim(d, proc.dim(t))?;
    }
    Ok(())
}

fn require_adapted(tree: &ScenarioTree, proc: &StochasticProcess, tol: f64) -> Result<()> {
    for t in 0..proc.stage_count() {
        for block in tree.blocks(t) {
            let first = proc.get(t, block[0]);
            if block
                .iter()
                .any(|&l| proc.get(t, l).iter().zip(first).any(|(a, b)| (a - b).abs() > tol))
            {
                return Err(Error::NotAdapted(t));
            }
        }
    }
    Ok(())
}

fn orthocomplement_row(cert: &mut Certificate, tree: &ScenarioTree) {
    let report = tree.in_orthocomplement(&cert.v, cert.tol);
    cert.push("orthocomplement", None, 0, report.residual);
}

/// `(v, y) in subdifferential of f(., ., leaf) at (x, u)` leafwise, with
/// `v` orthogonal to the adapted processes.
pub fn check_saddle(
    p: &Problem,
    x: &StochasticProcess,
    u: &StochasticProcess,
    y: &StochasticProcess,
    v: &StochasticProcess,
    tol: f64,
) -> Result<Certificate> {
    let tree = p.tree();
    let f = p.integrand();
    check_layout(tree, x, p.x_dims())?;
    check_layout(tree, v, p.x_dims())?;
    check_layout(tree, u, p.u_dims())?;
    check_layout(tree, y, p.u_dims())?;
    require_adapted(tree, x, tol)?;
    let mut cert = Certificate::new("saddle", y.clone(), v.clone(), tol);
    let mut worst_u: f64 = 0.0;
    let mut worst_v: f64 = 0.0;
    for leaf in 0..tree.leaf_count() {
        let (xl, ul, yl, vl) = (x.leaf_vector(leaf), u.leaf_vector(leaf), y.leaf_vector(leaf), v.leaf_vector(leaf));
        let fx = f.evaluate(leaf, &xl, &ul)?;
        if fx == INF {
            return Ok(cert.fail(format!("infeasible: f(x, u) = +inf at leaf {leaf}")));
        }
        let fs = f.pointwise_conjugate(leaf, &vl, &yl)?;
        let pair = dot(&xl, &vl) + dot(&ul, &yl);
        let residual = if fs == INF { INF } else { fx + fs - pair };
        cert.push("fenchel", None, leaf, residual);
        let l = f.lagrangian_integrand(leaf, &xl, &yl)?;
        let (ru, rv) = if l == NEG_INF {
            (INF, INF)
        } else {
            let ru = fx - dot(&ul, &yl) - l;
            let rv = if fs == INF { INF } else { l - dot(&xl, &vl) + fs };
            (ru, rv)
        };
        worst_u = worst_u.max(ru);
        worst_v = worst_v.max(rv);
    }
    orthocomplement_row(&mut cert, tree);
    let cert = cert.finish();
    let ortho = cert.rows.last().map_or(0.0, |r| r.residual);
    let verdict = if worst_u <= tol && worst_v <= tol && ortho <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let agrees = verdict == cert.verdict;
    Ok(Certificate {
        lagrangian: Some(LagrangianForm {
            u_residual: worst_u,
            v_residual: worst_v,
            verdict,
            agrees,
        }),
        ..cert
    })
}

/// Karush-Kuhn-Tucker conditions for the constrained family.
pub fn check_kkt(
    p: &Problem,
    x: &StochasticProcess,
    u: &StochasticProcess,
    y: &StochasticProcess,
    v: &StochasticProcess,
    tol: f64,
) -> Result<Certificate> {
    let f = p.integrand();
    let Structure::Constrained { objective, constraints } = f.structure() else {
        return Err(Error::TagMismatch {
            expected: "constrained".into(),
            found: f.tag().into(),
        });
    };
    let tree = p.tree();
    check_layout(tree, x, p.x_dims())?;
    check_layout(tree, v, p.x_dims())?;
    check_layout(tree, u, p.u_dims())?;
    check_layout(tree, y, p.u_dims())?;
    require_adapted(tree, x, tol)?;
    let mut cert = Certificate::new("kkt", y.clone(), v.clone(), tol);
    for leaf in 0..tree.leaf_count() {
        let (xl, ul, yl, vl) = (x.leaf_vector(leaf), u.leaf_vector(leaf), y.leaf_vector(leaf), v.leaf_vector(leaf));
        let mut feasibility: f64 = 0.0;
        let mut slackness: f64 = 0.0;
        let mut lagrangian = objective[leaf].evaluate(&xl)?;
        for (j, fj) in constraints[leaf].iter().enumerate() {
            let g = fj.evaluate(&xl)? + ul[j];
            feasibility = feasibility.max(g);
            slackness = slackness.max((yl[j] * g).abs());
            lagrangian = ext_add(lagrangian, yl[j].max(0.0) * fj.evaluate(&xl)?);
        }
        let sign = yl.iter().fold(0.0_f64, |m, &yj| m.max(-yj));
        cert.push("feasibility", None, leaf, feasibility);
        cert.push("sign", None, leaf, sign);
        cert.push("slackness", None, leaf, slackness);
        // stationarity: x minimizes f_0 + sum y_j f_j - z.v
        let conj = f.pointwise_conjugate(leaf, &vl, &yl)?;
        let stationarity = if lagrangian == INF || conj == INF {
            INF
        } else {
            lagrangian + conj - dot(&xl, &vl)
        };
        cert.push("stationarity", None, leaf, stationarity);
    }
    orthocomplement_row(&mut cert, tree);
    Ok(cert.finish())
}

/// Optimality for the asset-liability model: `y` a martingale density
/// multiple and `y in dV(u - sum_t x_t.ds_{t+1})` leafwise.
pub fn check_alm(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<Certificate> {
    let f = p.integrand();
    let Structure::Alm { disutility, prices } = f.structure() else {
        return Err(Error::TagMismatch {
            expected: "alm".into(),
            found: f.tag().into(),
        });
    };
    let tree = p.tree();
    check_layout(tree, x, p.x_dims())?;
    check_layout(tree, u, p.u_dims())?;
    check_layout(tree, y, p.u_dims())?;
    require_adapted(tree, x, tol)?;
    let last = tree.stage_count() - 1;
    let mut v = StochasticProcess::zeros(p.x_dims(), tree.leaf_count());
    for leaf in 0..tree.leaf_count() {
        let yl = y.get(last, leaf)[0];
        for t in 0..last {
            for (j, vj) in v.get_mut(t, leaf).iter_mut().enumerate() {
                *vj = -yl * (prices.get(t + 1, leaf)[j] - prices.get(t, leaf)[j]);
            }
        }
    }
    let mut cert = Certificate::new("alm", y.clone(), v, tol);
    let report = check_martingale_density(tree, y, prices, tol)?;
    cert.push("martingale", None, 0, report.residual);
    cert.push("nonnegativity", None, 0, report.negativity);
    for leaf in 0..tree.leaf_count() {
        let hedge: f64 = (0..last)
            .map(|t| {
                x.get(t, leaf)
                    .iter()
                    .enumerate()
                    .map(|(j, xj)| xj * (prices.get(t + 1, leaf)[j] - prices.get(t, leaf)[j]))
                    .sum::<f64>()
            })
            .sum();
        let c = u.get(last, leaf)[0] - hedge;
        let r = fenchel_residual(&disutility[leaf], &[c], &[y.get(last, leaf)[0]])?;
        cert.push("subdifferential", None, leaf, r);
    }
    orthocomplement_row(&mut cert, tree);
    if report.is_zero {
        return Ok(cert.degenerate());
    }
    Ok(cert.finish())
}

/// `v_t = E_t(y_{t+1} - y_t) - (y_{t+1} - y_t)` with `y_{T+1} := 0`.
fn bolza_v(tree: &ScenarioTree, y: &StochasticProcess) -> Result<(StochasticProcess, StochasticProcess)> {
    let increment = tree.conditional_increment(y)?;
    let diff = tree.forward_difference(y)?;
    Ok((increment.clone(), increment.sub(&diff)?))
}

struct StagePoint {
    t: usize,
    block: usize,
    leaf: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    a: Vec<f64>,
    y: Vec<f64>,
}

/// Stage data `(x_t, dx_t + u_t, E_t dy_{t+1}, y_t)` at each block's first leaf.
fn stage_points(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, a: &StochasticProcess, y: &StochasticProcess) -> Vec<StagePoint> {
    let tree = p.tree();
    let mut out = Vec::new();
    for t in 0..tree.stage_count() {
        for (block, leaves) in tree.blocks(t).iter().enumerate() {
            let leaf = leaves[0];
            let xt = x.get(t, leaf).to_vec();
            let w = (0..xt.len())
                .map(|i| {
                    let prev = if t == 0 { 0.0 } else { x.get(t - 1, leaf)[i] };
                    xt[i] - prev + u.get(t, leaf)[i]
                })
                .collect();
            out.push(StagePoint {
                t,
                block,
                leaf,
                x: xt,
                w,
                a: a.get(t, leaf).to_vec(),
                y: y.get(t, leaf).to_vec(),
            });
        }
    }
    out
}

fn bolza_inputs(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<()> {
    let f = p.integrand();
    if !f.is_bolza() {
        return Err(Error::TagMismatch {
            expected: "bolza".into(),
            found: f.tag().into(),
        });
    }
    let tree = p.tree();
    check_layout(tree, x, p.x_dims())?;
    check_layout(tree, u, p.u_dims())?;
    check_layout(tree, y, p.u_dims())?;
    require_adapted(tree, x, tol)?;
    require_adapted(tree, u, tol)?;
    require_adapted(tree, y, tol)
}

/// `(E_t dy_{t+1}, y_t) in dK_t(x_t, dx_t + u_t)` blockwise.
pub fn check_euler_lagrange(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<Certificate> {
    bolza_inputs(p, x, u, y, tol)?;
    let tree = p.tree();
    let (a, v) = bolza_v(tree, y)?;
    let mut cert = Certificate::new("euler-lagrange", y.clone(), v, tol);
    for s in stage_points(p, x, u, &a, y) {
        let k = p.integrand().stage_cost(s.t, s.leaf)?;
        let kx = k.evaluate(&s.x, &s.w)?;
        if kx == INF {
            return Ok(cert.fail(format!("infeasible: K_{} = +inf on block {}", s.t, s.block)));
        }
        let ks = k.conjugate_value(&s.a, &s.y)?;
        let r = if ks == INF { INF } else { kx + ks - dot(&s.x, &s.a) - dot(&s.w, &s.y) };
        cert.push("euler-lagrange", Some(s.t), s.block, r);
    }
    Ok(cert.finish())
}

/// Partial Fenchel residuals of `H = H_t(., y)` at `(x, a)` and of
/// `-H_t(x, .)` at `(y, w)`.
fn hamiltonian_residuals(k: &StageCost, s: &StagePoint) -> Result<(f64, f64)> {
    match k {
        StageCost::Separable { state, velocity } => Ok((fenchel_residual(state, &s.x, &s.a)?, fenchel_residual(velocity, &s.w, &s.y)?)),
        StageCost::Kabanov {
            cone,
            disutility,
            terminal,
        } => {
            let m = cone.dim();
            let (z, kk) = s.x.split_at(m);
            let (az, ak) = s.a.split_at(m);
            let (wz, _) = s.w.split_at(m);
            let (yz, yk) = s.y.split_at(m);
            if yk.iter().any(|&v| v != 0.0) || (*terminal && z.iter().any(|&v| v.abs() > crate::convex::FEASIBILITY_TOL)) {
                return Ok((INF, INF));
            }
            let neg_k: Vec<f64> = kk.iter().map(|v| -v).collect();
            let slope: Vec<f64> = yz.iter().zip(ak).map(|(p, q)| p - q).collect();
            let mut rx = fenchel_residual(disutility, &neg_k, &slope)?;
            if !terminal && az.iter().any(|&v| v != 0.0) {
                rx = INF;
            }
            let trade: Vec<f64> = wz.iter().zip(kk).map(|(p, q)| p + q).collect();
            let membership = cone.attains_support(&trade, yz, crate::convex::FEASIBILITY_TOL)?;
            let ry = if membership.feasible { membership.residual } else { INF };
            Ok((rx, ry))
        }
        StageCost::General { .. } => {
            let h = k.hamiltonian(&s.x, &s.y)?;
            if !h.is_finite() {
                return Ok((INF, INF));
            }
            let ks = k.conjugate_value(&s.a, &s.y)?;
            let kx = k.evaluate(&s.x, &s.w)?;
            let rx = if ks == INF { INF } else { h + ks - dot(&s.x, &s.a) };
            let ry = if kx == INF { INF } else { kx - dot(&s.w, &s.y) - h };
            Ok((rx, ry))
        }
    }
}

/// `E_t dy_{t+1} in d_x H_t(x_t, y_t)` and `dx_t + u_t in d_y[-H_t](x_t, y_t)`.
///
/// The verdict compares the sum of the two partial residuals with `tol`;
/// that sum is the Euler-Lagrange residual, so both checkers agree.
pub fn check_hamiltonian_system(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, y: &StochasticProcess, tol: f64) -> Result<Certificate> {
    bolza_inputs(p, x, u, y, tol)?;
    let tree = p.tree();
    let (a, v) = bolza_v(tree, y)?;
    let mut cert = Certificate::new("hamiltonian", y.clone(), v, tol);
    let mut combined = Vec::new();
    for s in stage_points(p, x, u, &a, y) {
        let k = p.integrand().stage_cost(s.t, s.leaf)?;
        if k.hamiltonian(&s.x, &s.y)? == INF {
            return Ok(cert.fail(format!("infeasible: H_{} = +inf on block {}", s.t, s.block)));
        }
        let (rx, ry) = hamiltonian_residuals(k, &s)?;
        cert.push("state", Some(s.t), s.block, rx);
        cert.push("velocity", Some(s.t), s.block, ry);
        combined.push((s.t, s.block, rx + ry));
    }
    if let Some((t, block, r)) = combined.into_iter().find(|c| !(c.2 <= tol)) {
        return Ok(cert.fail(format!("stage {t} block {block}: combined residual {r:e} exceeds tolerance")));
    }
    cert.verdict = Verdict::Pass;
    Ok(cert)
}

fn kabanov_stage(p: &Problem, t: usize, leaf: usize) -> Result<(&Polyhedron, &ConvexFunction, bool)> {
    match p.integrand().stage_cost(t, leaf)? {
        StageCost::Kabanov {
            cone,
            disutility,
            terminal,
        } => Ok((cone, disutility, *terminal)),
        _ => Err(Error::TagMismatch {
            expected: "kabanov".into(),
            found: p.integrand().tag().into(),
        }),
    }
}

/// Consistent price system conditions for the currency market: `y` a
/// martingale over stages `0..T`, `-k_t in dV_t*(y_t)` and
/// `dz_t + u_t + k_t in d sigma_{C_t}(y_t)` blockwise.
pub fn check_consistent_price_system(
    p: &Problem,
    z: &StochasticProcess,
    k: &StochasticProcess,
    u: &StochasticProcess,
    y: &StochasticProcess,
    tol: f64,
) -> Result<Certificate> {
    let f = p.integrand();
    if f.tag() != "kabanov" {
        return Err(Error::TagMismatch {
            expected: "kabanov".into(),
            found: f.tag().into(),
        });
    }
    let tree = p.tree();
    let stages = tree.stage_count();
    let m = p.x_dims()[0] / 2;
    let dims = vec![m; stages];
    for proc in [z, k, u, y] {
        check_layout(tree, proc, &dims)?;
    }
    for proc in [z, k, y] {
        require_adapted(tree, proc, tol)?;
    }
    // v from the full dual (y^z, y^k = 0) with y_{T+1} := 0
    let full_y = StochasticProcess::from_fn(&vec![2 * m; stages], tree.leaf_count(), |t, leaf, i| {
        if i < m {
            y.get(t, leaf)[i]
        } else {
            0.0
        }
    });
    let (_, v) = bolza_v(tree, &full_y)?;
    let mut cert = Certificate::new("cps", y.clone(), v, tol);

    for t in 0..stages.saturating_sub(1) {
        let next = tree.conditional_expectation(&y_shift(y, t + 1, stages), t)?;
        for (block, leaves) in tree.blocks(t).iter().enumerate() {
            let leaf = leaves[0];
            let r = (0..m).fold(0.0_f64, |acc, i| acc.max((next.get(t, leaf)[i] - y.get(t, leaf)[i]).abs()));
            cert.push("martingale", Some(t), block, r);
        }
    }
    for t in 0..stages {
        for (block, leaves) in tree.blocks(t).iter().enumerate() {
            let leaf = leaves[0];
            let (cone, disutility, terminal) = kabanov_stage(p, t, leaf)?;
            let zt = z.get(t, leaf);
            let kt = k.get(t, leaf);
            let yt = y.get(t, leaf);
            let trade: Vec<f64> = (0..m)
                .map(|i| {
                    let prev = if t == 0 { 0.0 } else { z.get(t - 1, leaf)[i] };
                    zt[i] - prev + u.get(t, leaf)[i] + kt[i]
                })
                .collect();
            let infeasible = !cone.contains(&trade, tol) || (terminal && zt.iter().any(|v| v.abs() > tol));
            if infeasible {
                return Ok(cert.fail(format!("infeasible: trade outside C_{t} or nonzero terminal position on block {block}")));
            }
            let neg_k: Vec<f64> = kt.iter().map(|v| -v).collect();
            let rv = fenchel_residual(disutility, &neg_k, yt)?;
            cert.push("disutility", Some(t), block, rv);
            let membership = cone.attains_support(&trade, yt, tol)?;
            cert.push("support", Some(t), block, membership.residual);
            if cone.cone {
                let polar = cone.support_function(yt)?;
                let comp = dot(&trade, yt).abs();
                let feasibility = cone.violation(&trade);
                let holds = feasibility <= tol && polar <= tol && comp <= tol;
                cert.conical.push(ConicalTriple {
                    stage: t,
                    block,
                    feasibility,
                    polar,
                    complementarity: comp,
                    holds,
                    agrees: holds == (membership.residual <= tol),
                });
            }
        }
    }
    if y.is_zero() {
        return Ok(cert.degenerate());
    }
    Ok(cert.finish())
}

/// The stage-`s` slice of `y` seen as a process with only that stage populated
/// at every position, so conditional expectations at earlier stages apply.
fn y_shift(y: &StochasticProcess, s: usize, stages: usize) -> StochasticProcess {
    let dims: Vec<usize> = (0..stages).map(|_| y.dim(s)).collect();
    StochasticProcess::from_fn(&dims, y.leaf_count(), |_, leaf, i| y.get(s, leaf)[i])
}

/// `|E f(x, u) - (<u, y> - E f*(v, y))|`, the duality gap implied by a
/// certificate.
pub fn certificate_gap(p: &Problem, x: &StochasticProcess, u: &StochasticProcess, cert: &Certificate) -> Result<f64> {
    let f = p.integrand();
    let ef = f.expectation(x, u)?;
    let efs = f.conjugate_expectation(&cert.v, &cert.y)?;
    if !ef.is_finite() || !efs.is_finite() {
        return Ok(INF);
    }
    Ok((ef - (p.tree().pairing(u, &cert.y)? - efs)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{bolza_from_blocks, Layout, ParametricIntegrand};

    fn stage_one(values: &[f64]) -> StochasticProcess {
        StochasticProcess::from_nested(vec![vec![vec![]; values.len()], values.iter().map(|&v| vec![v]).collect()]).unwrap()
    }

    #[test]
    fn tracking_saddle() {
        let p = crate::solver::tests::tracking();
        let x = StochasticProcess::from_nested(vec![vec![vec![2.0], vec![2.0]], vec![vec![], vec![]]]).unwrap();
        let v = StochasticProcess::from_nested(vec![vec![vec![1.0], vec![-1.0]], vec![vec![], vec![]]]).unwrap();
        let u = stage_one(&[1.0, 3.0]);
        let y = stage_one(&[-1.0, 1.0]);
        let c = check_saddle(&p, &x, &u, &y, &v, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        assert!(c.lagrangian.as_ref().unwrap().agrees);
        assert!(certificate_gap(&p, &x, &u, &c).unwrap() < 3.0 * DEFAULT_TOL);
        let zero_v = v.scale(0.0);
        let c = check_saddle(&p, &x, &u, &y.scale(0.0), &zero_v, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        assert!((c.rows[0].residual - 0.5).abs() < 1e-12);
        let bumped = stage_one(&[-1.1, 1.0]);
        assert_eq!(check_saddle(&p, &x, &u, &bumped, &v, DEFAULT_TOL).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn kkt_examples() {
        let tree = ScenarioTree::deterministic(1);
        let f = ParametricIntegrand::new(
            tree,
            Layout::new(vec![1], vec![1]).unwrap(),
            Structure::Constrained {
                objective: vec![ConvexFunction::quadratic(vec![1.0])],
                constraints: vec![vec![ConvexFunction::affine(vec![-1.0], 1.0)]],
            },
        )
        .unwrap();
        let p = Problem::new(f);
        let s = |v: f64| StochasticProcess::scalar(vec![vec![v]]).unwrap();
        let c = check_kkt(&p, &s(1.0), &s(0.0), &s(2.0), &s(0.0), DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        let c = check_kkt(&p, &s(1.0), &s(0.0), &s(0.0), &s(0.0), DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        let st = c.rows.iter().find(|r| r.condition == "stationarity").unwrap();
        assert!((st.residual - 1.0).abs() < 1e-9);
        let c = check_kkt(&p, &s(1.0), &s(0.0), &s(-1.0), &s(0.0), DEFAULT_TOL).unwrap();
        assert!(c.reason.unwrap().starts_with("sign"));
    }

    #[test]
    fn euler_lagrange_and_hamiltonian_agree() {
        let quad = StageCost::Separable {
            state: ConvexFunction::quadratic(vec![0.5]),
            velocity: ConvexFunction::quadratic(vec![0.5]),
        };
        let kink = StageCost::Separable {
            state: ConvexFunction::abs(),
            velocity: ConvexFunction::quadratic(vec![0.5]),
        };
        let s = |v: f64| StochasticProcess::scalar(vec![vec![v]]).unwrap();
        for (k, x, u, y) in [(quad, -0.5, 1.0, 0.5), (kink, 0.0, 0.5, 0.5)] {
            let p = Problem::new(bolza_from_blocks(ScenarioTree::deterministic(1), vec![vec![k]]).unwrap());
            let el = check_euler_lagrange(&p, &s(x), &s(u), &s(y), DEFAULT_TOL).unwrap();
            let hs = check_hamiltonian_system(&p, &s(x), &s(u), &s(y), DEFAULT_TOL).unwrap();
            assert_eq!(el.verdict, Verdict::Pass, "{el:?}");
            assert_eq!(hs.verdict, Verdict::Pass, "{hs:?}");
            let el = check_euler_lagrange(&p, &s(x), &s(u), &s(y + 0.1), DEFAULT_TOL).unwrap();
            let hs = check_hamiltonian_system(&p, &s(x), &s(u), &s(y + 0.1), DEFAULT_TOL).unwrap();
            assert_eq!(el.verdict, Verdict::Fail);
            assert_eq!(hs.verdict, Verdict::Fail);
        }
    }

    fn kabanov_single() -> Problem {
        let cone = Polyhedron::cone(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let k = StageCost::Kabanov {
            cone,
            disutility: ConvexFunction::squared_norm(2, 0.5),
            terminal: true,
        };
        Problem::new(bolza_from_blocks(ScenarioTree::deterministic(1), vec![vec![k]]).unwrap())
    }

    #[test]
    fn consistent_price_system_examples() {
        let p = kabanov_single();
        let v2 = |a: f64, b: f64| StochasticProcess::from_nested(vec![vec![vec![a, b]]]).unwrap();
        let zero = v2(0.0, 0.0);
        let c = check_consistent_price_system(&p, &zero, &zero, &zero, &v2(1.0, 1.0), DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        let d = c.rows.iter().find(|r| r.condition == "disutility").unwrap();
        assert!((d.residual - 1.0).abs() < 1e-12);
        let c = check_consistent_price_system(&p, &zero, &zero, &zero, &zero, DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Degenerate);
        let c = check_consistent_price_system(&p, &zero, &v2(-0.8, -0.4), &v2(1.0, 0.0), &v2(0.8, 0.4), DEFAULT_TOL).unwrap();
        assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
        assert!(c.conical.iter().all(|t| t.holds && t.agrees));
    }
}
