//! Conjugate duality for convex stochastic optimization on finite scenario
//! trees.

pub mod cli;
pub mod convex;
pub mod duality;
pub mod error;
pub mod extended;
pub mod integrand;
pub mod models;
pub mod optimality;
pub mod program;
pub mod solver;
pub mod tree;

pub use convex::{fenchel_residual, ConvexFunction, PiecewiseLinear, Polyhedron};
pub use error::{Error, Result};
pub use tree::{ScenarioTree, StochasticProcess};
pub use integrand::{assemble_bolza, Layout, ParametricIntegrand, StageCost, Structure};
pub use solver::{Problem, SolveResult, SolveStatus, SolverOptions};
pub use models::ModelSpec;
