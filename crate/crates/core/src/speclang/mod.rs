//! Property specification language.
//!
//! ```text
//! param epsilon = 0.18823529
//! param delta = 0.1
//! input x0 = "data/image_0.pgm"
//! network N
//! forall x in ball(x0, epsilon) .
//!   abs(N(x)[0] - N(x0)[0]) <= delta and abs(N(x)[1] - N(x0)[1]) <= delta
//! ```
//!
//! The ball is an L-infinity ball in normalized [0, 1] pixel space. Output
//! indices refer to the two network outputs.

mod lexer;
mod parser;
mod printer;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::{load_image, DataError};
use crate::logic::{eval_expr, BinOp, Bindings, CmpOp, Env, Expr, Formula, LogicError};
use crate::netcore::Network;
use crate::tensor::Tensor;

pub use parser::parse_property;
pub use printer::{format_expr, format_formula, format_number, pretty_print};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Undeclared,
    Duplicate,
    /// Well-formed but meaningless, e.g. an output index out of range.
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Param { name: String, value: f64 },
    Input { name: String, path: String },
    Network { name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    pub decls: Vec<Decl>,
    /// The quantified variable.
    pub var: String,
    /// Centre of the ball; a declared input.
    pub anchor: String,
    pub radius: Expr,
    pub body: Formula,
}

impl PropertySpec {
    pub fn params(&self) -> HashMap<String, f64> {
        self.decls
            .iter()
            .filter_map(|d| match d {
                Decl::Param { name, value } => Some((name.clone(), *value)),
                _ => None,
            })
            .collect()
    }

    pub fn input_path(&self, name: &str) -> Option<&str> {
        self.decls.iter().find_map(|d| match d {
            Decl::Input { name: n, path } if n == name => Some(path.as_str()),
            _ => None,
        })
    }

    /// Radius with parameters substituted.
    pub fn epsilon(&self) -> Result<f64, LogicError> {
        let b = Bindings {
            params: self.params(),
            ..Bindings::default()
        };
        eval_expr(&self.radius, &b)
    }

    /// Recognizes a body made only of conjoined
    /// `abs(N(var)[i] - N(anchor)[i]) <= d` atoms (either operand order)
    /// sharing one `d`. Returns `d` and the constrained output indices.
    pub fn robustness(&self) -> Option<(f64, Vec<usize>)> {
        let mut atoms = Vec::new();
        collect_conjuncts(&self.body, &mut atoms);
        let params = Bindings {
            params: self.params(),
            ..Bindings::default()
        };
        let mut delta: Option<f64> = None;
        let mut indices = Vec::new();
        for f in atoms {
            let Formula::Cmp(CmpOp::Le, Expr::Abs(inner), bound) = f else {
                return None;
            };
            let Expr::Bin(BinOp::Sub, a, b) = inner.as_ref() else {
                return None;
            };
            let (
                Expr::Output {
                    network: na,
                    input: ia,
                    index: ka,
                },
                Expr::Output {
                    network: nb,
                    input: ib,
                    index: kb,
                },
            ) = (a.as_ref(), b.as_ref())
            else {
                return None;
            };
            let pair_ok =
                (ia == &self.var && ib == &self.anchor) || (ia == &self.anchor && ib == &self.var);
            if na != nb || ka != kb || !pair_ok || has_outputs(bound) {
                return None;
            }
            let d = eval_expr(bound, &params).ok()?;
            match delta {
                Some(prev) if prev != d => return None,
                _ => delta = Some(d),
            }
            if !indices.contains(ka) {
                indices.push(*ka);
            }
        }
        indices.sort_unstable();
        delta.map(|d| (d, indices))
    }
}

fn collect_conjuncts<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::And(a, b) => {
            collect_conjuncts(a, out);
            collect_conjuncts(b, out);
        }
        other => out.push(other),
    }
}

fn has_outputs(e: &Expr) -> bool {
    match e {
        Expr::Output { .. } => true,
        Expr::Num(_) | Expr::Var(_) => false,
        Expr::Neg(a) | Expr::Abs(a) => has_outputs(a),
        Expr::Bin(_, a, b) => has_outputs(a) || has_outputs(b),
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("input `{name}`: {source}")]
    Image { name: String, source: DataError },
    #[error("input `{name}` has shape {found:?} but the network expects {expected:?}")]
    Shape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("ball radius: {0}")]
    Radius(LogicError),
    #[error("ball radius {0} is negative")]
    NegativeRadius(f64),
    #[error("network expects input shape {0:?}, which is not a square image")]
    NetworkInput(Vec<usize>),
}

/// A property bound to concrete images and a network.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: PropertySpec,
    /// Name of the quantified variable in `body`.
    pub var: String,
    pub anchor: Tensor,
    pub epsilon: f64,
    pub body: Formula,
    /// Parameters and every declared input; the quantified variable is
    /// left unbound.
    pub env: Env,
    /// Present when the body has the local-robustness shape.
    pub delta: Option<f64>,
    /// Outputs constrained by the robustness body.
    pub robust_outputs: Vec<usize>,
}

impl Problem {
    /// `env` with the quantified variable bound to `x`.
    pub fn env_at(&self, x: &Tensor) -> Env {
        let mut env = self.env.clone();
        env.inputs.insert(self.var.clone(), x.clone());
        env
    }
}

/// Loads and preprocesses every declared input (paths resolve against
/// `base_dir` unless absolute), evaluates the radius and recognizes the
/// robustness shape.
pub fn instantiate(
    spec: &PropertySpec,
    net: &Network,
    base_dir: &Path,
) -> Result<Problem, SpecError> {
    let expected = net.input_shape();
    let side = match expected.as_slice() {
        [h, w] if h == w => *h,
        _ => return Err(SpecError::NetworkInput(expected)),
    };
    let epsilon = spec.epsilon().map_err(SpecError::Radius)?;
    if epsilon < 0.0 {
        return Err(SpecError::NegativeRadius(epsilon));
    }
    let mut env = Env {
        params: spec.params(),
        inputs: HashMap::new(),
    };
    for d in &spec.decls {
        if let Decl::Input { name, path } = d {
            let img = load_image(&resolve(base_dir, path), side).map_err(|e| match e {
                DataError::UnsupportedExtent { shape, .. } => SpecError::Shape {
                    name: name.clone(),
                    found: shape,
                    expected: expected.clone(),
                },
                source => SpecError::Image {
                    name: name.clone(),
                    source,
                },
            })?;
            env.inputs.insert(name.clone(), img);
        }
    }
    let anchor = env.inputs[&spec.anchor].clone();
    let robust = spec.robustness();
    Ok(Problem {
        spec: spec.clone(),
        var: spec.var.clone(),
        anchor,
        epsilon,
        body: spec.body.clone(),
        env,
        delta: robust.as_ref().map(|r| r.0),
        robust_outputs: robust.map(|r| r.1).unwrap_or_default(),
    })
}

fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}
