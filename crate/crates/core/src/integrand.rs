//! Parametric integrands `f(x, u, omega)` on a scenario tree.
//!
//! Each leaf carries a convex function of the joint variable `(x, u)`, where
//! `x` and `u` are the concatenations of their stage components. Four
//! structures are supported: a generic joint function, inequality
//! constraints `f_j(x) + u_j <= 0`, the asset-liability model
//! `V(u - sum_t x_t . ds_{t+1})`, and Bolza costs `sum_t K_t(x_t, dx_t + u_t)`
//! (which also hosts the currency market with transaction costs).

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexFunction, Polyhedron, FEASIBILITY_TOL};
use crate::error::{check_dim, Error, Result};
use crate::extended::{dot, ext_add, INF, NEG_INF};
use crate::program::{self, add_conjugate, add_epigraph, add_function, add_perspective_conjugate, Builder, LinExpr, ProgramStatus};
use crate::tree::{ScenarioTree, StochasticProcess};

/// Components of a dual pair below this size count as zero where the
/// currency-market conjugate requires an exact zero.
const ZERO_TOL: f64 = 1e-9;

/// Stage dimensions of `x` and `u`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub x: Vec<usize>,
    pub u: Vec<usize>,
}

impl Layout {
    pub fn new(x: Vec<usize>, u: Vec<usize>) -> Result<Self> {
        check_dim(x.len(), u.len())?;
        Ok(Layout { x, u })
    }

    pub fn stages(&self) -> usize {
        self.x.len()
    }

    pub fn total_x(&self) -> usize {
        self.x.iter().sum()
    }

    pub fn total_u(&self) -> usize {
        self.u.iter().sum()
    }

    pub fn x_offset(&self, t: usize) -> usize {
        self.x[..t].iter().sum()
    }

    pub fn u_offset(&self, t: usize) -> usize {
        self.u[..t].iter().sum()
    }
}

/// One Bolza stage cost `K_t(x, w)` on `R^d x R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StageCost {
    /// `state(x) + velocity(w)`
    Separable { state: ConvexFunction, velocity: ConvexFunction },
    /// Currency market stage with `x = (z, k)`, `w = (w^z, w^k)`:
    /// `V(-k) + delta_C(w^z + k)`, plus `delta_{0}(z)` at the terminal stage.
    Kabanov {
        cone: Polyhedron,
        disutility: ConvexFunction,
        #[serde(default)]
        terminal: bool,
    },
    /// Any catalog function of `(x, w)`.
    General { function: ConvexFunction },
}

fn selector(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; cols]; rows];
    for &(i, j, v) in entries {
        m[i][j] = v;
    }
    m
}

impl StageCost {
    /// State dimension `d`.
    pub fn dim(&self) -> usize {
        match self {
            StageCost::Separable { state, .. } => state.dim(),
            StageCost::Kabanov { cone, .. } => 2 * cone.dim(),
            StageCost::General { function } => function.dim() / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StageCost::Separable { state, velocity } => {
                state.validate()?;
                velocity.validate()?;
                check_dim(state.dim(), velocity.dim())
            }
            StageCost::Kabanov { cone, disutility, .. } => {
                cone.validate()?;
                disutility.validate()?;
                check_dim(cone.dim(), disutility.dim())?;
                if !cone.contains(&vec![0.0; cone.dim()], FEASIBILITY_TOL) {
                    return Err(Error::InvalidModel("market set must contain the origin".into()));
                }
                Ok(())
            }
            StageCost::General { function } => {
                function.validate()?;
                if function.dim() % 2 != 0 {
                    return Err(Error::InvalidFunction(format!(
                        "stage cost needs an even dimension, got {}",
                        function.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    /// The cost as one catalog function of `(x, w)`.
    pub fn joint(&self) -> ConvexFunction {
        match self {
            StageCost::Separable { state, velocity } => ConvexFunction::separable(vec![state.clone(), velocity.clone()]),
            StageCost::Kabanov {
                cone,
                disutility,
                terminal,
            } => {
                let m = cone.dim();
                let n = 4 * m;
                let neg_k: Vec<_> = (0..m).map(|i| (i, m + i, -1.0)).collect();
                let trade: Vec<_> = (0..m).flat_map(|i| [(i, m + i, 1.0), (i, 2 * m + i, 1.0)]).collect();
                let mut terms = vec![
                    ConvexFunction::compose(disutility.clone(), selector(m, n, &neg_k), vec![]),
                    ConvexFunction::compose(ConvexFunction::Polyhedron(cone.clone()), selector(m, n, &trade), vec![]),
                ];
                if *terminal {
                    let z: Vec<_> = (0..m).map(|i| (i, i, 1.0)).collect();
                    terms.push(ConvexFunction::compose(
                        ConvexFunction::Polyhedron(Polyhedron::point(&vec![0.0; m])),
                        selector(m, n, &z),
                        vec![],
                    ));
                }
                ConvexFunction::sum(terms)
            }
            StageCost::General { function } => function.clone(),
        }
    }

    pub fn evaluate(&self, x: &[f64], w: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_dim(d, w.len())?;
        match self {
            StageCost::Separable { state, velocity } => Ok(ext_add(state.evaluate(x)?, velocity.evaluate(w)?)),
            StageCost::Kabanov {
                cone,
                disutility,
                terminal,
            } => {
                let m = d / 2;
                let (z, k) = x.split_at(m);
                if *terminal && z.iter().any(|&v| v.abs() > FEASIBILITY_TOL) {
                    return Ok(INF);
                }
                let trade: Vec<f64> = (0..m).map(|i| w[i] + k[i]).collect();
                if !cone.contains(&trade, FEASIBILITY_TOL) {
                    return Ok(INF);
                }
                let neg_k: Vec<f64> = k.iter().map(|v| -v).collect();
                disutility.evaluate(&neg_k)
            }
            StageCost::General { function } => {
                let xw: Vec<f64> = x.iter().chain(w).copied().collect();
                function.evaluate(&xw)
            }
        }
    }

    /// `K*(a, y)`.
    pub fn conjugate_value(&self, a: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, a.len())?;
        check_dim(d, y.len())?;
        match self {
            StageCost::Separable { state, velocity } => {
                Ok(ext_add(state.conjugate_value(a)?, velocity.conjugate_value(y)?))
            }
            StageCost::Kabanov {
                cone,
                disutility,
                terminal,
            } => {
                let m = d / 2;
                let (az, ak) = a.split_at(m);
                let (yz, yk) = y.split_at(m);
                let nonzero = |v: &f64| v.abs() > ZERO_TOL;
                if (!terminal && az.iter().any(nonzero)) || yk.iter().any(nonzero) {
                    return Ok(INF);
                }
                let sigma = cone.support_function(yz)?;
                let arg: Vec<f64> = yz.iter().zip(ak).map(|(p, q)| p - q).collect();
                Ok(ext_add(sigma, disutility.conjugate_value(&arg)?))
            }
            StageCost::General { function } => {
                let ay: Vec<f64> = a.iter().chain(y).copied().collect();
                function.conjugate_value(&ay)
            }
        }
    }

    /// `H(x, y) = inf_w { K(x, w) - w.y }`; `+inf` when `K(x, .)` is
    /// identically `+inf`.
    pub fn hamiltonian(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.dim();
        check_dim(d, x.len())?;
        check_dim(d, y.len())?;
        match self {
            StageCost::Separable { state, velocity } => {
                let sx = state.evaluate(x)?;
                if sx == INF {
                    return Ok(INF);
                }
                let vy = velocity.conjugate_value(y)?;
                Ok(if vy == INF { NEG_INF } else { sx - vy })
            }
            StageCost::Kabanov {
                cone,
                disutility,
                terminal,
            } => {
                let m = d / 2;
                let (z, k) = x.split_at(m);
                let (yz, yk) = y.split_at(m);
                let neg_k: Vec<f64> = k.iter().map(|v| -v).collect();
                let vk = disutility.evaluate(&neg_k)?;
                if vk == INF || (*terminal && z.iter().any(|&v| v.abs() > FEASIBILITY_TOL)) {
                    return Ok(INF);
                }
                if yk.iter().any(|&v| v != 0.0) {
                    return Ok(NEG_INF);
                }
                let sigma = cone.support_function(yz)?;
                Ok(if sigma == INF { NEG_INF } else { dot(k, yz) + vk - sigma })
            }
            StageCost::General { function } => {
                let mut b = Builder::new();
                let w = b.vars(d);
                let args: Vec<LinExpr> = program::constants(x).into_iter().chain(w.iter().cloned()).collect();
                add_function(&mut b, function, &args, 1.0)?;
                for (wi, yi) in w.iter().zip(y) {
                    b.add_linear(wi, -yi);
                }
                let sol = b.solve();
                partial_infimum(sol.status, sol.value)
            }
        }
    }

    /// Adds `weight * K*(a, y)` to a program.
    pub(crate) fn compile_conjugate(&self, b: &mut Builder, a: &[LinExpr], y: &[LinExpr], weight: f64) -> Result<()> {
        match self {
            StageCost::Separable { state, velocity } => {
                add_conjugate(b, state, a, weight)?;
                add_conjugate(b, velocity, y, weight)
            }
            StageCost::Kabanov {
                cone,
                disutility,
                terminal,
            } => {
                let m = a.len() / 2;
                if !terminal {
                    a[..m].iter().for_each(|e| b.eq(e.clone()));
                }
                y[m..].iter().for_each(|e| b.eq(e.clone()));
                add_function(b, &ConvexFunction::Support(cone.clone()), &y[..m], weight)?;
                let arg: Vec<LinExpr> = (0..m).map(|i| y[i].minus(&a[m + i])).collect();
                add_conjugate(b, disutility, &arg, weight)
            }
            StageCost::General { function } => {
                let ay: Vec<LinExpr> = a.iter().chain(y).cloned().collect();
                add_conjugate(b, function, &ay, weight)
            }
        }
    }
}

fn partial_infimum(status: ProgramStatus, value: f64) -> Result<f64> {
    match status {
        ProgramStatus::Optimal => Ok(value),
        ProgramStatus::Unbounded => Ok(NEG_INF),
        ProgramStatus::Infeasible => Ok(INF),
        ProgramStatus::IterationLimit => Err(Error::Unsupported("partial minimization did not converge".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// One joint function of `(x, u)` per leaf.
    Generic { functions: Vec<ConvexFunction> },
    /// `f_0(x)` subject to `f_j(x) + u_j <= 0`, per leaf; `u` lives at the
    /// last stage.
    Constrained {
        objective: Vec<ConvexFunction>,
        constraints: Vec<Vec<ConvexFunction>>,
    },
    /// `V(u_T - sum_{t<T} x_t . (s_{t+1} - s_t))` per leaf.
    Alm {
        disutility: Vec<ConvexFunction>,
        prices: StochasticProcess,
    },
    /// `sum_t K_t(x_t, x_t - x_{t-1} + u_t)` with `K_t` indexed by stage-t block.
    Bolza { costs: Vec<Vec<StageCost>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricIntegrand {
    tree: ScenarioTree,
    layout: Layout,
    structure: Structure,
}

impl ParametricIntegrand {
    pub fn new(tree: ScenarioTree, layout: Layout, structure: Structure) -> Result<Self> {
        let f = ParametricIntegrand { tree, layout, structure };
        f.validate()?;
        Ok(f)
    }

    pub fn generic(tree: ScenarioTree, layout: Layout, functions: Vec<ConvexFunction>) -> Result<Self> {
        Self::new(tree, layout, Structure::Generic { functions })
    }

    fn validate(&self) -> Result<()> {
        let tree = &self.tree;
        let leaves = tree.leaf_count();
        let l = &self.layout;
        check_dim(tree.stage_count(), l.stages())?;
        let per_leaf = |n: usize| -> Result<()> {
            if n != leaves {
                return Err(Error::InvalidModel(format!("expected {leaves} leaf functions, got {n}")));
            }
            Ok(())
        };
        let last_only = |dims: &[usize]| dims[..dims.len() - 1].iter().all(|&d| d == 0);
        match &self.structure {
            Structure::Generic { functions } => {
                per_leaf(functions.len())?;
                for g in functions {
                    g.validate()?;
                    check_dim(l.total_x() + l.total_u(), g.dim())?;
                }
            }
            Structure::Constrained { objective, constraints } => {
                per_leaf(objective.len())?;
                per_leaf(constraints.len())?;
                if !last_only(&l.u) {
                    return Err(Error::InvalidModel("constraint parameters live at the last stage".into()));
                }
                for (f0, fs) in objective.iter().zip(constraints) {
                    f0.validate()?;
                    check_dim(l.total_x(), f0.dim())?;
                    check_dim(l.total_u(), fs.len())?;
                    for fj in fs {
                        fj.validate()?;
                        check_dim(l.total_x(), fj.dim())?;
                    }
                }
            }
            Structure::Alm { disutility, prices } => {
                per_leaf(disutility.len())?;
                tree.check_process(prices)?;
                if !tree.is_adapted(prices) {
                    return Err(Error::InvalidModel("price process must be adapted".into()));
                }
                let j = prices.dim(0);
                let t_last = l.stages() - 1;
                for t in 0..l.stages() {
                    check_dim(j, prices.dim(t))?;
                    check_dim(if t < t_last { j } else { 0 }, l.x[t])?;
                    check_dim(if t < t_last { 0 } else { 1 }, l.u[t])?;
                }
                for v in disutility {
                    v.validate()?;
                    check_dim(1, v.dim())?;
                }
            }
            Structure::Bolza { costs } => {
                check_dim(tree.stage_count(), costs.len())?;
                let d = l.x[0];
                for (t, stage) in costs.iter().enumerate() {
                    check_dim(d, l.x[t])?;
                    check_dim(d, l.u[t])?;
                    check_dim(tree.block_count(t), stage.len())?;
                    for k in stage {
                        k.validate()?;
                        check_dim(d, k.dim())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    /// Structural tag: `generic`, `constrained`, `alm`, `bolza` or `kabanov`.
    pub fn tag(&self) -> &'static str {
        match &self.structure {
            Structure::Generic { .. } => "generic",
            Structure::Constrained { .. } => "constrained",
            Structure::Alm { .. } => "alm",
            Structure::Bolza { costs } => {
                if costs.iter().flatten().all(|k| matches!(k, StageCost::Kabanov { .. })) {
                    "kabanov"
                } else {
                    "bolza"
                }
            }
        }
    }

    pub fn is_bolza(&self) -> bool {
        matches!(self.structure, Structure::Bolza { .. })
    }

    /// The stage cost `K_t` seen by `leaf`.
    pub fn stage_cost(&self, t: usize, leaf: usize) -> Result<&StageCost> {
        match &self.structure {
            Structure::Bolza { costs } => Ok(&costs[t][self.tree.block_of(t, leaf)]),
            _ => Err(Error::TagMismatch {
                expected: "bolza".into(),
                found: self.tag().into(),
            }),
        }
    }

    /// Price increments `s_{t+1} - s_t` at `leaf`, for `t < T`.
    fn price_increments(prices: &StochasticProcess, leaf: usize) -> Vec<Vec<f64>> {
        (0..prices.stage_count() - 1)
            .map(|t| {
                prices
                    .get(t + 1, leaf)
                    .iter()
                    .zip(prices.get(t, leaf))
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect()
    }

    fn check_leaf(&self, leaf: usize) -> Result<()> {
        if leaf >= self.tree.leaf_count() {
            return Err(Error::InvalidModel(format!("leaf {leaf} out of range")));
        }
        Ok(())
    }

    fn stage_slice<'a, T>(v: &'a [T], dims: &[usize], t: usize) -> &'a [T] {
        let off: usize = dims[..t].iter().sum();
        &v[off..off + dims[t]]
    }

    /// `x_t - x_{t-1} + u_t` at every stage, with `x_{-1} := 0`.
    fn velocities(&self, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
        let l = &self.layout;
        (0..l.stages())
            .map(|t| {
                let xt = Self::stage_slice(x, &l.x, t);
                let ut = Self::stage_slice(u, &l.u, t);
                (0..xt.len())
                    .map(|i| {
                        let prev = if t == 0 { 0.0 } else { Self::stage_slice(x, &l.x, t - 1)[i] };
                        xt[i] - prev + ut[i]
                    })
                    .collect()
            })
            .collect()
    }

    /// `f(x, u, leaf)` for leaf vectors `x`, `u`.
    pub fn evaluate(&self, leaf: usize, x: &[f64], u: &[f64]) -> Result<f64> {
        self.check_leaf(leaf)?;
        let l = &self.layout;
        check_dim(l.total_x(), x.len())?;
        check_dim(l.total_u(), u.len())?;
        match &self.structure {
            Structure::Generic { functions } => {
                let xu: Vec<f64> = x.iter().chain(u).copied().collect();
                functions[leaf].evaluate(&xu)
            }
            Structure::Constrained { objective, constraints } => {
                for (fj, uj) in constraints[leaf].iter().zip(u) {
                    if fj.evaluate(x)? + uj > FEASIBILITY_TOL {
                        return Ok(INF);
                    }
                }
                objective[leaf].evaluate(x)
            }
            Structure::Alm { disutility, prices } => {
                let c = u[0] - self.hedge(prices, leaf, x);
                disutility[leaf].evaluate(&[c])
            }
            Structure::Bolza { .. } => {
                let w = self.velocities(x, u);
                let mut total = 0.0;
                for (t, wt) in w.iter().enumerate() {
                    let xt = Self::stage_slice(x, &l.x, t);
                    total = ext_add(total, self.stage_cost(t, leaf)?.evaluate(xt, wt)?);
                }
                Ok(total)
            }
        }
    }

    /// `sum_{t<T} x_t . (s_{t+1} - s_t)` at `leaf`.
    fn hedge(&self, prices: &StochasticProcess, leaf: usize, x: &[f64]) -> f64 {
        Self::price_increments(prices, leaf)
            .iter()
            .enumerate()
            .map(|(t, ds)| dot(Self::stage_slice(x, &self.layout.x, t), ds))
            .sum()
    }

    /// `f(., ., leaf)` as one catalog function of `(x, u)`, when the
    /// structure admits one.
    pub fn joint_function(&self, leaf: usize) -> Result<ConvexFunction> {
        self.check_leaf(leaf)?;
        let l = &self.layout;
        let nx = l.total_x();
        let n = nx + l.total_u();
        match &self.structure {
            Structure::Generic { functions } => Ok(functions[leaf].clone()),
            Structure::Constrained { .. } => Err(Error::Unsupported(
                "constrained integrands have no joint catalog form".into(),
            )),
            Structure::Alm { disutility, prices } => {
                let mut row = vec![0.0; n];
                for (t, ds) in Self::price_increments(prices, leaf).iter().enumerate() {
                    let off = l.x_offset(t);
                    for (i, d) in ds.iter().enumerate() {
                        row[off + i] = -d;
                    }
                }
                row[nx] = 1.0;
                Ok(ConvexFunction::compose(disutility[leaf].clone(), vec![row], vec![]))
            }
            Structure::Bolza { .. } => {
                let mut terms = Vec::new();
                for t in 0..l.stages() {
                    let d = l.x[t];
                    let xo = l.x_offset(t);
                    let uo = nx + l.u_offset(t);
                    let mut m = vec![vec![0.0; n]; 2 * d];
                    for i in 0..d {
                        m[i][xo + i] = 1.0;
                        m[d + i][xo + i] = 1.0;
                        m[d + i][uo + i] = 1.0;
                        if t > 0 {
                            m[d + i][l.x_offset(t - 1) + i] = -1.0;
                        }
                    }
                    terms.push(ConvexFunction::compose(self.stage_cost(t, leaf)?.joint(), m, vec![]));
                }
                Ok(if terms.len() == 1 {
                    terms.pop().expect("one term")
                } else {
                    ConvexFunction::sum(terms)
                })
            }
        }
    }

    /// Adds `weight * f(x, u, leaf)` to a program.
    pub(crate) fn compile(&self, b: &mut Builder, leaf: usize, x: &[LinExpr], u: &[LinExpr], weight: f64) -> Result<()> {
        let l = &self.layout;
        match &self.structure {
            Structure::Generic { functions } => {
                let xu: Vec<LinExpr> = x.iter().chain(u).cloned().collect();
                add_function(b, &functions[leaf], &xu, weight)
            }
            Structure::Constrained { objective, constraints } => {
                add_function(b, &objective[leaf], x, weight)?;
                for (fj, uj) in constraints[leaf].iter().zip(u) {
                    add_epigraph(b, fj, x, &uj.scaled(-1.0))?;
                }
                Ok(())
            }
            Structure::Alm { disutility, prices } => {
                let mut c = u[0].clone();
                for (t, ds) in Self::price_increments(prices, leaf).iter().enumerate() {
                    let xt = Self::stage_slice(x, &l.x, t);
                    for (xi, d) in xt.iter().zip(ds) {
                        c.add_assign(xi, -d);
                    }
                }
                add_function(b, &disutility[leaf], &[c], weight)
            }
            Structure::Bolza { .. } => {
                for t in 0..l.stages() {
                    let xt = Self::stage_slice(x, &l.x, t);
                    let ut = Self::stage_slice(u, &l.u, t);
                    let mut args: Vec<LinExpr> = xt.to_vec();
                    for i in 0..xt.len() {
                        let mut w = xt[i].plus(&ut[i]);
                        if t > 0 {
                            w.add_assign(&Self::stage_slice(x, &l.x, t - 1)[i], -1.0);
                        }
                        args.push(w);
                    }
                    add_function(b, &self.stage_cost(t, leaf)?.joint(), &args, weight)?;
                }
                Ok(())
            }
        }
    }

    /// Adds `weight * f*(v, y, leaf)` to a program.
    pub(crate) fn compile_conjugate(&self, b: &mut Builder, leaf: usize, v: &[LinExpr], y: &[LinExpr], weight: f64) -> Result<()> {
        let l = &self.layout;
        match &self.structure {
            Structure::Generic { functions } => {
                let vy: Vec<LinExpr> = v.iter().chain(y).cloned().collect();
                add_conjugate(b, &functions[leaf], &vy, weight)
            }
            Structure::Constrained { objective, constraints } => {
                // (f_0 + sum y_j f_j)^* as an infimal convolution
                let mut rest: Vec<LinExpr> = v.to_vec();
                for (fj, yj) in constraints[leaf].iter().zip(y) {
                    b.le(yj.scaled(-1.0));
                    let w = b.vars(v.len());
                    for (r, wi) in rest.iter_mut().zip(&w) {
                        r.add_assign(wi, -1.0);
                    }
                    add_perspective_conjugate(b, fj, &w, yj, weight)?;
                }
                add_conjugate(b, &objective[leaf], &rest, weight)
            }
            Structure::Alm { disutility, prices } => {
                for (t, ds) in Self::price_increments(prices, leaf).iter().enumerate() {
                    let vt = Self::stage_slice(v, &l.x, t);
                    for (vi, d) in vt.iter().zip(ds) {
                        b.eq(vi.plus(&y[0].scaled(*d)));
                    }
                }
                add_conjugate(b, &disutility[leaf], &y[..1], weight)
            }
            Structure::Bolza { .. } => {
                for t in 0..l.stages() {
                    let vt = Self::stage_slice(v, &l.x, t);
                    let yt = Self::stage_slice(y, &l.u, t);
                    let a: Vec<LinExpr> = (0..vt.len())
                        .map(|i| {
                            let mut e = vt[i].minus(&yt[i]);
                            if t + 1 < l.stages() {
                                e.add_assign(&Self::stage_slice(y, &l.u, t + 1)[i], 1.0);
                            }
                            e
                        })
                        .collect();
                    self.stage_cost(t, leaf)?.compile_conjugate(b, &a, yt, weight)?;
                }
                Ok(())
            }
        }
    }

    /// `l(x, y, leaf) = inf_u { f(x, u) - u.y }`, with `l = +inf` when
    /// `f(x, .)` is identically `+inf`.
    pub fn lagrangian_integrand(&self, leaf: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_leaf(leaf)?;
        let l = &self.layout;
        check_dim(l.total_x(), x.len())?;
        check_dim(l.total_u(), y.len())?;
        match &self.structure {
            Structure::Generic { .. } => {
                let mut b = Builder::new();
                let u = b.vars(l.total_u());
                self.compile(&mut b, leaf, &program::constants(x), &u, 1.0)?;
                for (ui, yi) in u.iter().zip(y) {
                    b.add_linear(ui, -yi);
                }
                let sol = b.solve();
                partial_infimum(sol.status, sol.value)
            }
            Structure::Constrained { objective, constraints } => {
                let f0 = objective[leaf].evaluate(x)?;
                let mut total = f0;
                let mut finite = f0 < INF;
                let mut values = Vec::new();
                for fj in &constraints[leaf] {
                    let v = fj.evaluate(x)?;
                    finite &= v < INF;
                    values.push(v);
                }
                if !finite {
                    return Ok(INF);
                }
                if y.iter().any(|&yj| yj < 0.0) {
                    return Ok(NEG_INF);
                }
                for (v, yj) in values.iter().zip(y) {
                    if *yj != 0.0 {
                        total += yj * v;
                    }
                }
                Ok(total)
            }
            Structure::Alm { disutility, prices } => {
                let vs = disutility[leaf].conjugate_value(&y[..1])?;
                if vs == INF {
                    return Ok(NEG_INF);
                }
                Ok(-vs - y[0] * self.hedge(prices, leaf, x))
            }
            Structure::Bolza { .. } => {
                let mut total = 0.0;
                let mut minus_inf = false;
                for t in 0..l.stages() {
                    let xt = Self::stage_slice(x, &l.x, t);
                    let yt = Self::stage_slice(y, &l.u, t);
                    let h = self.stage_cost(t, leaf)?.hamiltonian(xt, yt)?;
                    if h == INF {
                        return Ok(INF);
                    }
                    if h == NEG_INF {
                        minus_inf = true;
                        continue;
                    }
                    let dx: f64 = (0..xt.len())
                        .map(|i| {
                            let prev = if t == 0 { 0.0 } else { Self::stage_slice(x, &l.x, t - 1)[i] };
                            (xt[i] - prev) * yt[i]
                        })
                        .sum();
                    total += h + dx;
                }
                Ok(if minus_inf { NEG_INF } else { total })
            }
        }
    }

    /// `sum_t [ -x_t . (y_{t+1} - y_t) + H_t(x_t, y_t) ]` with `y_{T+1} := 0`,
    /// the summation-by-parts form of the Bolza Lagrangian integrand.
    pub fn bolza_lagrangian_by_parts(&self, leaf: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        let l = &self.layout;
        let mut total = 0.0;
        let mut minus_inf = false;
        for t in 0..l.stages() {
            let xt = Self::stage_slice(x, &l.x, t);
            let yt = Self::stage_slice(y, &l.u, t);
            let h = self.stage_cost(t, leaf)?.hamiltonian(xt, yt)?;
            if h == INF {
                return Ok(INF);
            }
            if h == NEG_INF {
                minus_inf = true;
                continue;
            }
            let dy: f64 = (0..xt.len())
                .map(|i| {
                    let next = if t + 1 < l.stages() { Self::stage_slice(y, &l.u, t + 1)[i] } else { 0.0 };
                    -xt[i] * (next - yt[i])
                })
                .sum();
            total += h + dy;
        }
        Ok(if minus_inf { NEG_INF } else { total })
    }

    /// `underline-l(x, y, leaf) = sup_v { x.v - f*(v, y) }`.
    pub fn lower_lagrangian(&self, leaf: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_leaf(leaf)?;
        let l = &self.layout;
        check_dim(l.total_x(), x.len())?;
        check_dim(l.total_u(), y.len())?;
        let mut b = Builder::new();
        let v = b.vars(l.total_x());
        self.compile_conjugate(&mut b, leaf, &v, &program::constants(y), 1.0)?;
        for (vi, xi) in v.iter().zip(x) {
            b.add_linear(vi, -xi);
        }
        let sol = b.solve();
        Ok(-partial_infimum(sol.status, sol.value)?)
    }

    /// `f*(v, y, leaf) = sup_{x,u} { x.v + u.y - f(x, u) }`.
    pub fn pointwise_conjugate(&self, leaf: usize, v: &[f64], y: &[f64]) -> Result<f64> {
        self.check_leaf(leaf)?;
        let l = &self.layout;
        check_dim(l.total_x(), v.len())?;
        check_dim(l.total_u(), y.len())?;
        match &self.structure {
            Structure::Generic { functions } => {
                let vy: Vec<f64> = v.iter().chain(y).copied().collect();
                functions[leaf].conjugate_value(&vy)
            }
            Structure::Constrained { objective, constraints } => {
                if y.iter().any(|&yj| yj < 0.0) {
                    return Ok(INF);
                }
                let mut b = Builder::new();
                let x = b.vars(l.total_x());
                add_function(&mut b, &objective[leaf], &x, 1.0)?;
                for (fj, &yj) in constraints[leaf].iter().zip(y) {
                    if yj > 0.0 {
                        add_function(&mut b, fj, &x, yj)?;
                    } else if !fj.is_finite_everywhere() {
                        let t = LinExpr::var(b.var());
                        add_epigraph(&mut b, fj, &x, &t)?;
                    }
                }
                for (xi, vi) in x.iter().zip(v) {
                    b.add_linear(xi, -vi);
                }
                let sol = b.solve();
                match sol.status {
                    ProgramStatus::Infeasible => Err(Error::InvalidModel("constraints are never satisfiable".into())),
                    status => Ok(-partial_infimum(status, sol.value)?),
                }
            }
            Structure::Alm { disutility, prices } => {
                for (t, ds) in Self::price_increments(prices, leaf).iter().enumerate() {
                    let vt = Self::stage_slice(v, &l.x, t);
                    if vt.iter().zip(ds).any(|(vi, d)| (vi + y[0] * d).abs() > 1e-12 * (1.0 + vi.abs())) {
                        return Ok(INF);
                    }
                }
                disutility[leaf].conjugate_value(&y[..1])
            }
            Structure::Bolza { .. } => {
                let mut total = 0.0;
                for t in 0..l.stages() {
                    let vt = Self::stage_slice(v, &l.x, t);
                    let yt = Self::stage_slice(y, &l.u, t);
                    let a: Vec<f64> = (0..vt.len())
                        .map(|i| {
                            let next = if t + 1 < l.stages() { Self::stage_slice(y, &l.u, t + 1)[i] } else { 0.0 };
                            vt[i] + next - yt[i]
                        })
                        .collect();
                    total = ext_add(total, self.stage_cost(t, leaf)?.conjugate_value(&a, yt)?);
                }
                Ok(total)
            }
        }
    }

    /// `H_t(x_t, y_t)` for the stage cost seen by `leaf`.
    pub fn hamiltonian(&self, t: usize, leaf: usize, xt: &[f64], yt: &[f64]) -> Result<f64> {
        self.check_leaf(leaf)?;
        if t >= self.layout.stages() {
            return Err(Error::StageOutOfRange {
                stage: t,
                stages: self.layout.stages(),
            });
        }
        self.stage_cost(t, leaf)?.hamiltonian(xt, yt)
    }

    /// `E f(x, u)` with `+inf` dominating.
    pub fn expectation(&self, x: &StochasticProcess, u: &StochasticProcess) -> Result<f64> {
        let mut total = 0.0;
        for leaf in 0..self.tree.leaf_count() {
            let v = self.evaluate(leaf, &x.leaf_vector(leaf), &u.leaf_vector(leaf))?;
            total = ext_add(total, self.tree.probability(leaf) * v);
        }
        Ok(total)
    }

    /// `E f*(v, y)` with `+inf` dominating.
    pub fn conjugate_expectation(&self, v: &StochasticProcess, y: &StochasticProcess) -> Result<f64> {
        let mut total = 0.0;
        for leaf in 0..self.tree.leaf_count() {
            let c = self.pointwise_conjugate(leaf, &v.leaf_vector(leaf), &y.leaf_vector(leaf))?;
            total = ext_add(total, self.tree.probability(leaf) * c);
        }
        Ok(total)
    }
}

/// Builds a Bolza integrand from stage costs given per leaf (`costs[t][leaf]`),
/// checking that each `K_t` is constant on stage-t blocks.
pub fn assemble_bolza(tree: ScenarioTree, costs: Vec<Vec<StageCost>>) -> Result<ParametricIntegrand> {
    check_dim(tree.stage_count(), costs.len())?;
    let mut per_block = Vec::with_capacity(costs.len());
    for (t, stage) in costs.into_iter().enumerate() {
        check_dim(tree.leaf_count(), stage.len())?;
        let mut blocks = Vec::with_capacity(tree.block_count(t));
        for (bi, block) in tree.blocks(t).iter().enumerate() {
            let first = &stage[block[0]];
            if block.iter().any(|&leaf| &stage[leaf] != first) {
                return Err(Error::Measurability(format!(
                    "stage-{t} cost varies within block {bi}"
                )));
            }
            blocks.push(first.clone());
        }
        per_block.push(blocks);
    }
    bolza_from_blocks(tree, per_block)
}

/// Builds a Bolza integrand from stage costs given per block (`costs[t][block]`).
pub fn bolza_from_blocks(tree: ScenarioTree, costs: Vec<Vec<StageCost>>) -> Result<ParametricIntegrand> {
    let d = costs
        .first()
        .and_then(|s| s.first())
        .map(|k| k.dim())
        .ok_or_else(|| Error::InvalidModel("Bolza problem needs stage costs".into()))?;
    let stages = tree.stage_count();
    let layout = Layout::new(vec![d; stages], vec![d; stages])?;
    ParametricIntegrand::new(tree, layout, Structure::Bolza { costs })
}
