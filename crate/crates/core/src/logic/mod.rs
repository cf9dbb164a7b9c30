//! Constraint formulas and their fuzzy and classical semantics.
//!
//! Connectives follow Gödel logic: `and` is `min`, `or` is `max`, and
//! implication is `1` when the antecedent is strictly below the consequent and
//! the consequent otherwise. Negation is `1 - x`. An atom `a <= b` has truth
//! `clamp(1 - max(0, a - b) / sharpness, 0, 1)`; strict comparisons are
//! fuzzified like their non-strict forms.

mod ast;
mod eval;

use std::collections::HashMap;

use thiserror::Error;

pub use ast::{BinOp, CmpOp, Expr, Formula};
pub use eval::{
    eval_expr, exact, godel_and, godel_implies, godel_or, truth, truth_with_grad, AtomMode,
    Bindings, OutputGrads,
};

use crate::netcore::{NetError, Network};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum LogicError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("no input bound for `{0}`")]
    UnboundInput(String),
    #[error("output index {index} out of range for `{input}` ({len} outputs)")]
    OutputIndex {
        input: String,
        index: usize,
        len: usize,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Parameters plus input tensors, from which network outputs are computed.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub params: HashMap<String, f64>,
    pub inputs: HashMap<String, Tensor>,
}

/// Runs `net` on every input the formula references.
pub fn bind_outputs(f: &Formula, env: &Env, net: &Network) -> Result<Bindings, LogicError> {
    let mut bindings = Bindings {
        params: env.params.clone(),
        ..Bindings::default()
    };
    for name in f.referenced_inputs() {
        let x = env
            .inputs
            .get(&name)
            .ok_or_else(|| LogicError::UnboundInput(name.clone()))?;
        let out = net.forward(x)?;
        bindings
            .outputs
            .insert(name, out.data().iter().map(|&v| v as f64).collect());
    }
    Ok(bindings)
}

pub fn eval_truth(
    f: &Formula,
    env: &Env,
    net: &Network,
    sharpness: f64,
) -> Result<f64, LogicError> {
    truth(f, &bind_outputs(f, env, net)?, sharpness)
}

/// `1 - eval_truth`, in [0, 1].
pub fn constraint_loss(
    f: &Formula,
    env: &Env,
    net: &Network,
    sharpness: f64,
) -> Result<f64, LogicError> {
    Ok(1.0 - eval_truth(f, env, net, sharpness)?)
}

pub fn eval_exact(f: &Formula, env: &Env, net: &Network) -> Result<bool, LogicError> {
    exact(f, &bind_outputs(f, env, net)?)
}

#[cfg(test)]
mod tests;
