//! Closed-form conjugates of catalog functions, checked against a grid
//! supremum and the Fenchel-Young inequality.

use stochdual::convex::oracle::grid_conjugate_oracle;
use stochdual::{fenchel_residual, ConvexFunction, PiecewiseLinear, Polyhedron};

fn main() -> stochdual::Result<()> {
    let catalog = vec![
        ("x^2", ConvexFunction::quadratic(vec![1.0])),
        ("|x|", ConvexFunction::Abs { scale: 1.0 }),
        (
            "max(-x, 0, 2x - 1)",
            ConvexFunction::PiecewiseLinear(PiecewiseLinear::new(vec![-1.0, 0.0, 2.0], vec![0.0, 0.0, -1.0])?),
        ),
        ("indicator of [-1, 2]", ConvexFunction::indicator(Polyhedron::bounds(&[-1.0], &[2.0])?)),
    ];
    for (name, g) in &catalog {
        let conj = g.conjugate()?;
        println!("{name}");
        for v in [-0.5, 0.25, 1.5] {
            let exact = conj.evaluate(&[v])?;
            let grid = grid_conjugate_oracle(g, &[v], 10.0, 0.001)?;
            let note = if grid.boundary_active { "  (grid maximizer on the box edge)" } else { "" };
            println!("  g*({v:5}) = {exact:9.5}   grid {:9.5}{note}", grid.value);
        }
        // equality in Fenchel-Young exactly when v is a subgradient at x
        println!("  g(1) + g*(0.3) - 0.3: {:.5}", fenchel_residual(g, &[1.0], &[0.3])?);
    }
    Ok(())
}
