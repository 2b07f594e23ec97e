//! Problem files: a JSON document with `tree`, `model`, `parameters` and
//! an optional `solver` section.

use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::models::{kabanov_parameter, ModelSpec};
use crate::solver::{Method, Problem, SolverOptions};
use crate::tree::{ScenarioTree, StochasticProcess};

/// A number written as a JSON number, a decimal string or a rational `"p/q"`.
///
/// Rationals are converted by dividing the integer numerator by the integer
/// denominator in `f64`, which is correctly rounded while both fit in 53 bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Num(x)),
            Raw::Text(s) => parse_number(&s).map(Num).map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if s.contains('/') {
        let r: Ratio<i64> = s.parse().map_err(|e| format!("invalid rational {s:?}: {e}"))?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    } else {
        s.parse::<f64>().map_err(|e| format!("invalid number {s:?}: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSection {
    Binary { binary: BinaryTree },
    TwoStage { two_stage: Vec<Num> },
    Explicit {
        #[serde(default)]
        stages: Option<usize>,
        probabilities: Vec<Num>,
        blocks: Vec<Vec<Vec<usize>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTree {
    pub stages: usize,
    pub up: Num,
}

impl TreeSection {
    pub fn build(&self) -> Result<ScenarioTree> {
        let field = |path: &str, e: Error| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        };
        match self {
            TreeSection::Binary { binary } => {
                ScenarioTree::binary(binary.stages, binary.up.0).map_err(|e| field("tree.binary", e))
            }
            TreeSection::TwoStage { two_stage } => ScenarioTree::two_stage(two_stage.iter().map(|n| n.0).collect())
                .map_err(|e| field("tree.probabilities", e)),
            TreeSection::Explicit {
                stages,
                probabilities,
                blocks,
            } => {
                if let Some(s) = stages {
                    if *s != blocks.len() {
                        return Err(Error::Parse {
                            path: "tree.stages".into(),
                            message: format!("{s} stages declared but {} block lists given", blocks.len()),
                        });
                    }
                }
                let probs: Vec<f64> = probabilities.iter().map(|n| n.0).collect();
                let sum: f64 = probs.iter().sum();
                if probs.iter().any(|&p| !(p > 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Parse {
                        path: "tree.probabilities".into(),
                        message: format!("probabilities must be positive and sum to 1, found sum {sum}"),
                    });
                }
                ScenarioTree::new(probs, blocks.clone()).map_err(|e| field("tree.blocks", e))
            }
        }
    }
}

/// Per-stage process values: each stage is a list of leaf vectors, a list
/// of scalars (one per leaf), or empty for a zero-dimensional stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessData(pub Vec<StageData>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageData {
    Vectors(Vec<Vec<Num>>),
    Scalars(Vec<Num>),
}

impl ProcessData {
    pub fn process(&self, leaves: usize) -> Result<StochasticProcess> {
        let nested = self
            .0
            .iter()
            .map(|stage| match stage {
                StageData::Vectors(v) if v.is_empty() => vec![Vec::new(); leaves],
                StageData::Vectors(v) => v.iter().map(|x| x.iter().map(|n| n.0).collect()).collect(),
                StageData::Scalars(v) => v.iter().map(|n| vec![n.0]).collect(),
            })
            .collect();
        StochasticProcess::from_nested(nested)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub u: ProcessData,
    #[serde(default)]
    pub x: Option<ProcessData>,
    #[serde(default)]
    pub y: Option<ProcessData>,
    #[serde(default)]
    pub v: Option<ProcessData>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolverSection {
    pub method: Option<Method>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub step_constant: Option<f64>,
}

impl SolverSection {
    pub fn apply(&self, opts: &mut SolverOptions) {
        if let Some(m) = self.method {
            opts.method = m;
        }
        if let Some(n) = self.max_iter {
            opts.max_iter = n;
        }
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        if let Some(c) = self.step_constant {
            opts.step_constant = c;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub tree: TreeSection,
    pub model: ModelSpec,
    pub parameters: Parameters,
    #[serde(default)]
    pub solver: SolverSection,
}

/// A problem file after validation.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub family: String,
    pub u: StochasticProcess,
    pub x: Option<StochasticProcess>,
    pub y: Option<StochasticProcess>,
    pub v: Option<StochasticProcess>,
    pub solver: SolverSection,
}

pub fn parse_problem_str(text: &str) -> Result<LoadedProblem> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: match e.path().to_string() {
            p if p == "." => "<root>".into(),
            p => p,
        },
        message: e.inner().to_string(),
    })?;
    load(&file)
}

pub fn parse_problem_file(path: &Path) -> Result<LoadedProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem_str(&text)
}

fn at(path: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Parse { .. } => e,
        other => Error::Parse {
            path: path.into(),
            message: other.to_string(),
        },
    }
}

/// Kabanov parameters and dual candidates may be given in the asset
/// dimension `m`; they embed as `(w, 0)` in the `2m`-dimensional space.
fn fit(proc: StochasticProcess, dims: &[usize], kabanov: bool) -> StochasticProcess {
    if kabanov && proc.dims().iter().zip(dims).all(|(&d, &full)| 2 * d == full) && proc.dims() != dims {
        kabanov_parameter(&proc)
    } else {
        proc
    }
}

pub fn load(file: &ProblemFile) -> Result<LoadedProblem> {
    let tree = file.tree.build()?;
    let leaves = tree.leaf_count();
    let family = file.model.family().to_string();
    let problem = file.model.build(tree).map_err(at("model"))?;
    let kabanov = family == "kabanov";
    let read = |data: &ProcessData, dims: &[usize], path: &'static str| -> Result<StochasticProcess> {
        let proc = fit(data.process(leaves).map_err(at(path))?, dims, kabanov);
        if proc.leaf_count() != leaves || proc.dims() != dims {
            return Err(Error::Parse {
                path: path.into(),
                message: format!("expected stage dimensions {dims:?}, found {:?}", proc.dims()),
            });
        }
        Ok(proc)
    };
    let u = read(&file.parameters.u, problem.u_dims(), "parameters.u")?;
    let x = file
        .parameters
        .x
        .as_ref()
        .map(|d| read(d, problem.x_dims(), "parameters.x"))
        .transpose()?;
    let y = file
        .parameters
        .y
        .as_ref()
        .map(|d| read(d, problem.u_dims(), "parameters.y"))
        .transpose()?;
    let v = file
        .parameters
        .v
        .as_ref()
        .map(|d| read(d, problem.x_dims(), "parameters.v"))
        .transpose()?;
    Ok(LoadedProblem {
        problem,
        family,
        u,
        x,
        y,
        v,
        solver: file.solver.clone(),
    })
}
