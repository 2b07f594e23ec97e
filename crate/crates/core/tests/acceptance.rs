//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use stochdual::convex::oracle::grid_conjugate_oracle;
use stochdual::convex::{ConvexFunction, PiecewiseLinear, Polyhedron};
use stochdual::duality::check_martingale_density;
use stochdual::optimality::{
    certificate_gap, check_alm, check_consistent_price_system, check_euler_lagrange, check_hamiltonian_system,
    check_kkt, check_saddle, Certificate, Verdict, DEFAULT_TOL,
};
use stochdual::solver::oracle::grid_primal_value;
use stochdual::solver::{dual_objective, dual_via_orthocomplement, duality_gap, solve_dual, solve_dual_pair, solve_primal};
use stochdual::{Layout, ParametricIntegrand, Problem, ScenarioTree, SolveStatus, SolverOptions, StochasticProcess, Structure};

type Outcome = Result<String, String>;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn adapted_dim(p: &Problem) -> usize {
    let tree = p.tree();
    p.x_dims().iter().enumerate().map(|(t, d)| d * tree.block_count(t)).sum()
}

/// Weak duality and the orthocomplement bound on random catalog problems.
fn weak_duality() -> Outcome {
    let mut r = rng(1);
    let (mut instances, mut pairs) = (0, 0);
    let mut slack = f64::INFINITY;
    while instances < 100 {
        let p = random_generic(&mut r, 8, 3);
        let tree = p.tree().clone();
        let u = random_process(&mut r, p.u_dims(), tree.leaf_count(), 2.0);
        let primal = solve_primal(&p, &u, &opts()).map_err(e2s)?;
        if primal.status != SolveStatus::Optimal {
            continue;
        }
        let dual = solve_dual(&p, &u, &opts()).map_err(e2s)?;
        instances += 1;
        for k in 0..10 {
            let noise = random_process(&mut r, p.u_dims(), tree.leaf_count(), 1.5);
            // half near the dual optimum, where the conjugate tends to be finite
            let y = if k % 2 == 0 && dual.status == SolveStatus::Optimal {
                dual.optimizer.add(&noise.scale(0.1 * k as f64)).map_err(e2s)?
            } else {
                noise
            };
            let d = dual_objective(&p, &y).map_err(e2s)?.value;
            let bound = dual_via_orthocomplement(&p, &y).map_err(e2s)?.value;
            let lhs = tree.pairing(&u, &y).map_err(e2s)? - d;
            ensure(lhs <= primal.value + 1e-6, || {
                format!("weak duality violated: {lhs} > {} on instance {instances}", primal.value)
            })?;
            ensure(!(d > bound + 1e-6), || format!("phi*(y) = {d} above the bound {bound}"))?;
            if lhs.is_finite() {
                slack = slack.min(primal.value - lhs);
            }
            pairs += 1;
        }
    }
    Ok(format!("{instances} instances, {pairs} dual points, min finite slack {slack:.3e}"))
}

fn fixture_gaps() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in FIXTURES {
        let l = fixture(name);
        let g = duality_gap(&l.problem, &l.u, &opts()).map_err(e2s)?;
        ensure(g.primal.status == SolveStatus::Optimal && g.dual.status == SolveStatus::Optimal, || {
            format!("{name}: solver status {:?}/{:?}", g.primal.status, g.dual.status)
        })?;
        ensure(g.gap.abs() <= 1e-5, || format!("{name}: gap {}", g.gap))?;
        worst = worst.max(g.gap.abs());
    }
    Ok(format!("{} fixtures, max |gap| {worst:.3e}", FIXTURES.len()))
}

fn grid_equivalence() -> Outcome {
    let mut checked = Vec::new();
    for name in FIXTURES {
        let l = fixture(name);
        if adapted_dim(&l.problem) > 3 {
            continue;
        }
        let exact = solve_primal(&l.problem, &l.u, &opts()).map_err(e2s)?;
        let grid = grid_primal_value(&l.problem, &l.u, 10.0, 0.01).map_err(e2s)?;
        ensure(grid.exhaustive, || format!("{name}: grid search was not exhaustive"))?;
        let diff = (exact.value - grid.value).abs();
        ensure(diff <= 2e-2, || format!("{name}: solver {} vs grid {}", exact.value, grid.value))?;
        checked.push(format!("{name} {diff:.1e}"));
    }
    ensure(checked.len() >= 4, || format!("only {} fixtures small enough", checked.len()))?;
    Ok(checked.join(", "))
}

fn conjugate_catalog() -> Vec<(ConvexFunction, Vec<Vec<f64>>)> {
    let pl = PiecewiseLinear::new(vec![-1.0, 0.5, 2.0], vec![0.0, 0.25, -1.0]).unwrap();
    let bounded = PiecewiseLinear::new(vec![-1.0, 1.0], vec![0.0, 0.0])
        .unwrap()
        .with_domain(Some(-2.0), Some(3.0))
        .unwrap();
    let boxed = Polyhedron::bounds(&[-1.0, -2.0], &[2.0, 1.0]).unwrap();
    vec![
        (ConvexFunction::quadratic(vec![0.5]), vec![vec![-2.0], vec![0.3], vec![4.0]]),
        (
            ConvexFunction::Quadratic {
                weights: vec![1.0, 0.25],
                linear: vec![0.5, -1.0],
                constant: 2.0,
            },
            vec![vec![1.0, 0.5], vec![-3.0, 1.0]],
        ),
        (ConvexFunction::Abs { scale: 2.0 }, vec![vec![-1.5], vec![0.0], vec![1.9]]),
        (ConvexFunction::PiecewiseLinear(pl), vec![vec![-0.5], vec![0.0], vec![1.0]]),
        (ConvexFunction::PiecewiseLinear(bounded), vec![vec![-3.0], vec![0.5], vec![2.5]]),
        (ConvexFunction::exponential(1.0, 1.0, 0.0), vec![vec![0.5], vec![2.0], vec![7.0]]),
        (ConvexFunction::exponential(2.0, -0.5, 1.0), vec![vec![-0.3], vec![-2.0]]),
        (ConvexFunction::indicator(boxed.clone()), vec![vec![1.0, -1.0], vec![-0.5, 3.0]]),
        (ConvexFunction::Support(boxed), vec![vec![0.5, -1.0], vec![1.5, 0.0]]),
        (ConvexFunction::Nonneg { dim: 1 }, vec![vec![-1.0], vec![-0.2]]),
        (
            ConvexFunction::separable(vec![ConvexFunction::quadratic(vec![1.0]), ConvexFunction::Abs { scale: 1.0 }]),
            vec![vec![1.0, 0.5], vec![-2.0, -0.5]],
        ),
    ]
}

fn conjugate_oracle() -> Outcome {
    let mut points = 0;
    let mut worst: f64 = 0.0;
    let mut r = rng(4);
    for (g, vs) in conjugate_catalog() {
        let gs = g.conjugate().map_err(e2s)?;
        let step = if g.dim() == 1 { 0.001 } else { 0.01 };
        for v in &vs {
            let closed = gs.evaluate(v).map_err(e2s)?;
            let grid = grid_conjugate_oracle(&g, v, 10.0, step).map_err(e2s)?;
            ensure(!grid.boundary_active, || format!("{} at {v:?}: test point not interior", g.kind()))?;
            let diff = (closed - grid.value).abs();
            ensure(diff <= 1e-2, || format!("{}: g*({v:?}) = {closed}, grid {}", g.kind(), grid.value))?;
            worst = worst.max(diff);
            points += 1;
        }
        let gss = gs.conjugate().map_err(e2s)?;
        for _ in 0..20 {
            let x: Vec<f64> = (0..g.dim()).map(|_| r.gen_range(-3.0..3.0)).collect();
            let (a, b) = (g.evaluate(&x).map_err(e2s)?, gss.evaluate(&x).map_err(e2s)?);
            let same = if a.is_finite() { (a - b).abs() <= 1e-9 * a.abs().max(1.0) } else { a == b };
            ensure(same, || format!("{}: g({x:?}) = {a} but g**(x) = {b}", g.kind()))?;
        }
    }
    Ok(format!("{points} points, max grid deviation {worst:.2e}"))
}

fn orthogonality() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let tree = random_tree(&mut r, 8, 4);
        for _ in 0..100 {
            let dims = random_dims(&mut r, tree.stage_count(), 6, true);
            let x = random_adapted(&mut r, &tree, &dims, 5.0);
            let v = random_orthogonal(&mut r, &tree, &dims, 5.0);
            let e = tree.pairing(&x, &v).map_err(e2s)?;
            ensure(e.abs() <= 1e-10, || format!("E x.v = {e}"))?;
            worst = worst.max(e.abs());
        }
    }
    Ok(format!("1000 pairs on 10 trees, max |E x.v| {worst:.2e}"))
}

/// Certificate for a fixture with the family checker at solved or stored
/// candidates.
fn fixture_certificate(name: &str) -> Result<(Problem, StochasticProcess, StochasticProcess, Certificate), String> {
    let l = fixture(name);
    let p = l.problem.clone();
    let x = match l.x {
        Some(x) => x,
        None => solve_primal(&p, &l.u, &opts()).map_err(e2s)?.optimizer,
    };
    let (dual, solved_v) = solve_dual_pair(&p, &l.u, &opts()).map_err(e2s)?;
    let y = l.y.unwrap_or(dual.optimizer);
    let v = l.v.unwrap_or(solved_v);
    let cert = match l.family.as_str() {
        "alm" => check_alm(&p, &x, &l.u, &y, DEFAULT_TOL),
        "bolza" => check_euler_lagrange(&p, &x, &l.u, &y, DEFAULT_TOL),
        "constrained" => check_kkt(&p, &x, &l.u, &y, &v, DEFAULT_TOL),
        _ => check_saddle(&p, &x, &l.u, &y, &v, DEFAULT_TOL),
    }
    .map_err(e2s)?;
    Ok((p, x, l.u, cert))
}

fn certificate_soundness() -> Outcome {
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    let mut worst_x: f64 = 0.0;
    for name in FIXTURES.iter().filter(|n| !n.starts_with("kabanov")) {
        let (p, x, u, cert) = fixture_certificate(name)?;
        ensure(cert.verdict == Verdict::Pass, || format!("{name}: {:?}", cert.reason))?;
        let gap = certificate_gap(&p, &x, &u, &cert).map_err(e2s)?;
        ensure(gap.abs() <= 3e-6, || format!("{name}: certificate value gap {gap}"))?;
        worst = worst.max(gap.abs());
        passes += 1;
        if adapted_dim(&p) <= 3 {
            let grid = grid_primal_value(&p, &u, 10.0, 0.01).map_err(e2s)?;
            let (a, b) = (node_values(p.tree(), &x), node_values(p.tree(), &grid.minimizer));
            let dx = a.iter().zip(&b).fold(0.0_f64, |m, (s, t)| m.max((s - t).abs()));
            ensure(dx <= 2e-2, || format!("{name}: certified x {a:?} vs grid {b:?}"))?;
            worst_x = worst_x.max(dx);
        }
    }
    let mut r = rng(6);
    let mut random_passes = 0;
    for k in 0..60 {
        let p = if k % 2 == 0 { random_generic(&mut r, 6, 3) } else { random_bolza(&mut r, 6, 1) };
        let tree = p.tree().clone();
        let u = if p.integrand().is_bolza() {
            random_adapted(&mut r, &tree, p.u_dims(), 2.0)
        } else {
            random_process(&mut r, p.u_dims(), tree.leaf_count(), 2.0)
        };
        let primal = solve_primal(&p, &u, &opts()).map_err(e2s)?;
        let (dual, v) = solve_dual_pair(&p, &u, &opts()).map_err(e2s)?;
        if primal.status != SolveStatus::Optimal || dual.status != SolveStatus::Optimal {
            continue;
        }
        let cert = if p.integrand().is_bolza() {
            check_euler_lagrange(&p, &primal.optimizer, &u, &dual.optimizer, DEFAULT_TOL)
        } else {
            check_saddle(&p, &primal.optimizer, &u, &dual.optimizer, &v, DEFAULT_TOL)
        }
        .map_err(e2s)?;
        if cert.verdict == Verdict::Pass {
            let gap = certificate_gap(&p, &primal.optimizer, &u, &cert).map_err(e2s)?;
            ensure(gap.abs() <= 3e-6, || format!("random instance {k}: certificate value gap {gap}"))?;
            worst = worst.max(gap.abs());
            random_passes += 1;
        }
    }
    ensure(random_passes >= 20, || format!("only {random_passes} random pass certificates"))?;
    Ok(format!(
        "{} pass certificates, max value gap {worst:.2e}, max x deviation {worst_x:.2e}",
        passes + random_passes
    ))
}

fn perturb(r: &mut impl Rng, tree: &ScenarioTree, proc: &StochasticProcess) -> StochasticProcess {
    let noise = StochasticProcess::from_fn(proc.dims(), proc.leaf_count(), |_, _, _| r.gen_range(-0.3..0.3));
    proc.add(&tree.adapted_projection(&noise).unwrap()).unwrap()
}

fn checker_agreement() -> Outcome {
    let mut r = rng(7);
    let (mut certs, mut passes) = (0, 0);
    while certs < 200 {
        let d = r.gen_range(1..=2);
        let p = random_bolza(&mut r, 6, d);
        let tree = p.tree().clone();
        let u = random_adapted(&mut r, &tree, p.u_dims(), 2.0);
        let primal = solve_primal(&p, &u, &opts()).map_err(e2s)?;
        let dual = solve_dual(&p, &u, &opts()).map_err(e2s)?;
        if primal.status != SolveStatus::Optimal || dual.status != SolveStatus::Optimal {
            continue;
        }
        for variant in 0..4 {
            let x = if variant & 1 == 1 { perturb(&mut r, &tree, &primal.optimizer) } else { primal.optimizer.clone() };
            let y = if variant & 2 == 2 { perturb(&mut r, &tree, &dual.optimizer) } else { dual.optimizer.clone() };
            let el = check_euler_lagrange(&p, &x, &u, &y, DEFAULT_TOL).map_err(e2s)?;
            let h = check_hamiltonian_system(&p, &x, &u, &y, DEFAULT_TOL).map_err(e2s)?;
            ensure(el.verdict == h.verdict, || {
                format!("Euler-Lagrange {:?} vs Hamiltonian {:?}", el.verdict, h.verdict)
            })?;
            passes += usize::from(el.verdict == Verdict::Pass);
            certs += 1;
        }
    }
    let mut triples = 0;
    let mut holding = 0;
    for _ in 0..40 {
        let p = random_kabanov(&mut r, 4);
        let tree = p.tree().clone();
        let leaves = tree.leaf_count();
        let endowment = random_adapted(&mut r, &tree, &vec![2; tree.stage_count()], 2.0);
        let u = stochdual::models::kabanov_parameter(&endowment);
        let primal = solve_primal(&p, &u, &opts()).map_err(e2s)?;
        let dual = solve_dual(&p, &u, &opts()).map_err(e2s)?;
        if primal.status != SolveStatus::Optimal || dual.status != SolveStatus::Optimal {
            continue;
        }
        let half = |proc: &StochasticProcess, skip: usize| {
            StochasticProcess::from_fn(&vec![2; tree.stage_count()], leaves, |t, l, i| proc.get(t, l)[2 * skip + i])
        };
        for variant in 0..2 {
            let y = half(&dual.optimizer, 0);
            let y = if variant == 1 { perturb(&mut r, &tree, &y) } else { y };
            let cert = check_consistent_price_system(&p, &half(&primal.optimizer, 0), &half(&primal.optimizer, 1), &endowment, &y, DEFAULT_TOL)
                .map_err(e2s)?;
            for c in &cert.conical {
                ensure(c.agrees, || format!("conical triple disagrees at stage {} block {}", c.stage, c.block))?;
                triples += 1;
                holding += usize::from(c.holds);
            }
        }
    }
    ensure(triples > 0, || "no conical triples evaluated".into())?;
    Ok(format!(
        "{certs} Bolza certificates ({passes} pass) agree; {triples} conical triples ({holding} hold) agree"
    ))
}

fn martingale_recovery() -> Outcome {
    let l = fixture("binomial-alm.json");
    let p = &l.problem;
    let tree = p.tree();
    let Structure::Alm { prices, .. } = p.integrand().structure() else {
        return Err("binomial fixture is not an ALM model".into());
    };
    let dual = solve_dual(p, &l.u, &opts()).map_err(e2s)?;
    let y = &dual.optimizer;
    let report = check_martingale_density(tree, y, prices, 1e-6).map_err(e2s)?;
    ensure(!report.is_zero, || "dual optimizer is degenerate".into())?;
    ensure(report.holds && report.residual <= 1e-6, || format!("martingale residual {}", report.residual))?;
    // risk-neutral weights solve q_up + q_down = 1, q_up s_up + q_down s_down = s_0
    let (s0, up, down) = (prices.get(0, 0)[0], prices.get(1, 0)[0], prices.get(1, 1)[0]);
    let det = down - up;
    let q_oracle = (down - s0) / det;
    let mean: f64 = (0..tree.leaf_count()).map(|k| tree.probability(k) * y.get(1, k)[0]).sum();
    let q = tree.probability(0) * y.get(1, 0)[0] / mean;
    ensure((q - q_oracle).abs() <= 1e-4, || format!("recovered q = {q}, oracle {q_oracle}"))?;
    Ok(format!("residual {:.2e}, q = {q:.6} vs {q_oracle:.6}", report.residual))
}

fn bolza_jensen() -> Outcome {
    let mut r = rng(9);
    let l = fixture("bolza-quadratic.json");
    let mut problems = vec![l.problem];
    for _ in 0..4 {
        problems.push(random_bolza(&mut r, 6, 1));
    }
    let mut count = 0;
    let mut finite = 0;
    for (k, p) in problems.iter().enumerate() {
        let tree = p.tree();
        let n = if k == 0 { 50 } else { 10 };
        for _ in 0..n {
            let y = random_process(&mut r, p.u_dims(), tree.leaf_count(), 2.0);
            ensure(!tree.is_adapted(&y) || tree.leaf_count() == 1, || "sampled y is adapted".into())?;
            let ay = tree.adapted_projection(&y).map_err(e2s)?;
            let (a, b) = (
                dual_objective(p, &ay).map_err(e2s)?.value,
                dual_objective(p, &y).map_err(e2s)?.value,
            );
            ensure(!(a > b + 1e-6), || format!("phi*(ay) = {a} > phi*(y) = {b}"))?;
            finite += usize::from(b.is_finite());
            count += 1;
        }
    }
    Ok(format!("{count} nonadapted duals ({finite} with finite phi*)"))
}

/// `delta_{R-}(beta x_0 + u)` with a bounded positive `beta`.
fn truncated_halfline(beta: &[f64], probs: Vec<f64>) -> Problem {
    let tree = ScenarioTree::two_stage(probs).unwrap();
    let functions = beta
        .iter()
        .map(|&b| ConvexFunction::compose(ConvexFunction::Nonpos { dim: 1 }, vec![vec![b, 1.0]], vec![0.0]))
        .collect();
    let layout = Layout::new(vec![1, 0], vec![0, 1]).unwrap();
    Problem::new(ParametricIntegrand::generic(tree, layout, functions).unwrap())
}

/// `|x_0 - 1| + delta{alpha |x_0| <= x_1} + u^2 / 2` with a bounded `alpha >= 0`.
fn truncated_cone(alpha: &[f64], probs: Vec<f64>) -> Problem {
    let tree = ScenarioTree::two_stage(probs).unwrap();
    let functions = alpha
        .iter()
        .map(|&a| {
            let set = Polyhedron::new(vec![vec![a, -1.0], vec![-a, -1.0]], vec![0.0, 0.0]).unwrap();
            ConvexFunction::sum(vec![
                ConvexFunction::compose(ConvexFunction::Abs { scale: 1.0 }, vec![vec![1.0, 0.0, 0.0]], vec![-1.0]),
                ConvexFunction::compose(
                    ConvexFunction::indicator(set),
                    vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                    vec![0.0, 0.0],
                ),
                ConvexFunction::compose(ConvexFunction::quadratic(vec![0.5]), vec![vec![0.0, 0.0, 1.0]], vec![0.0]),
            ])
        })
        .collect();
    let layout = Layout::new(vec![1, 1], vec![0, 1]).unwrap();
    Problem::new(ParametricIntegrand::generic(tree, layout, functions).unwrap())
}

fn truncated_counterexamples() -> Outcome {
    let mut r = rng(10);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let n = r.gen_range(2..=8);
        let w: Vec<f64> = (0..n).map(|_| r.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|v| v / total).collect();
        // truncations of an unbounded variable: values up to 2^k
        let coeffs: Vec<f64> = (0..n).map(|i| (1u64 << (i % 12)) as f64 * r.gen_range(0.5..1.0)).collect();
        let p = if k % 2 == 0 { truncated_halfline(&coeffs, probs) } else { truncated_cone(&coeffs, probs) };
        let u = random_process(&mut r, p.u_dims(), n, 3.0);
        let g = duality_gap(&p, &u, &opts()).map_err(e2s)?;
        ensure(g.gap.abs() <= 1e-5, || format!("instance {k}: gap {}", g.gap))?;
        if k % 2 == 1 {
            // the value is E u^2 / 2 exactly
            let expected: f64 = (0..n).map(|l| 0.5 * p.tree().probability(l) * u.get(1, l)[0].powi(2)).sum();
            ensure((g.primal.value - expected).abs() <= 1e-6, || {
                format!("instance {k}: value {} vs {expected}", g.primal.value)
            })?;
        } else {
            ensure(g.primal.value.abs() <= 1e-9, || format!("instance {k}: value {}", g.primal.value))?;
        }
        worst = worst.max(g.gap.abs());
    }
    Ok(format!("20 truncated instances, max |gap| {worst:.2e}"))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { id: 1, name: "weak duality on random catalog problems", budget: secs(60), run: weak_duality },
        Criterion { id: 2, name: "zero duality gap on the fixture suite", budget: secs(30), run: fixture_gaps },
        Criterion { id: 3, name: "solver matches exhaustive grid search", budget: secs(120), run: grid_equivalence },
        Criterion { id: 4, name: "conjugates match the grid oracle", budget: secs(10), run: conjugate_oracle },
        Criterion { id: 5, name: "orthocomplement pairs vanish", budget: None, run: orthogonality },
        Criterion { id: 6, name: "pass certificates are sound", budget: None, run: certificate_soundness },
        Criterion { id: 7, name: "Bolza and conical checkers agree", budget: None, run: checker_agreement },
        Criterion { id: 8, name: "ALM martingale density recovery", budget: None, run: martingale_recovery },
        Criterion { id: 9, name: "Bolza dual prefers adapted duals", budget: None, run: bolza_jensen },
        Criterion { id: 10, name: "truncated counterexamples have no gap", budget: None, run: truncated_counterexamples },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || *f == c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {:.1}s, budget {}s", elapsed.as_secs_f64(), b.as_secs())),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => ("FAIL", d.clone()),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {:>2} {tag}  {} ({:.2}s): {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
