//! Fuzzy (Gödel) and classical semantics over bound network outputs.

use std::collections::{BTreeMap, HashMap};

use super::ast::{BinOp, CmpOp, Expr, Formula};
use super::LogicError;

/// Values available to a formula: parameters by name, and the network output
/// vector for each input name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    pub params: HashMap<String, f64>,
    pub outputs: BTreeMap<String, Vec<f64>>,
}

/// d(truth) / d(output) for each bound input, congruent with
/// [`Bindings::outputs`].
pub type OutputGrads = BTreeMap<String, Vec<f64>>;

/// How atomic comparisons are fuzzified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomMode {
    /// `clamp(1 - max(0, a - b) / sharpness, 0, 1)`; zero gradient wherever
    /// the comparison is satisfied or saturated.
    Clamped,
    /// `1 - (a - b) / sharpness` without clamping. Order-compatible with the
    /// clamped value and never flat, so it gives an ascent direction inside
    /// the satisfied region.
    Surrogate,
}

/// Value with a dense gradient over the output slots.
#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    d: Vec<f64>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Self { v, d: vec![0.0; n] }
    }

    fn scaled(mut self, k: f64) -> Self {
        self.v *= k;
        self.d.iter_mut().for_each(|x| *x *= k);
        self
    }

    fn combine(a: Dual, b: &Dual, v: f64, ka: f64, kb: f64) -> Dual {
        let mut d = a.d;
        for (x, y) in d.iter_mut().zip(&b.d) {
            *x = ka * *x + kb * y;
        }
        Dual { v, d }
    }
}

struct Layout<'a> {
    bindings: &'a Bindings,
    offsets: BTreeMap<&'a str, usize>,
    slots: usize,
}

impl<'a> Layout<'a> {
    fn new(bindings: &'a Bindings) -> Self {
        let mut offsets = BTreeMap::new();
        let mut slots = 0;
        for (name, out) in &bindings.outputs {
            offsets.insert(name.as_str(), slots);
            slots += out.len();
        }
        Self {
            bindings,
            offsets,
            slots,
        }
    }

    fn expr(&self, e: &Expr) -> Result<Dual, LogicError> {
        let n = self.slots;
        Ok(match e {
            Expr::Num(v) => Dual::constant(*v, n),
            Expr::Var(name) => Dual::constant(
                *self
                    .bindings
                    .params
                    .get(name)
                    .ok_or_else(|| LogicError::UnboundVariable(name.clone()))?,
                n,
            ),
            Expr::Output { input, index, .. } => {
                let out = self
                    .bindings
                    .outputs
                    .get(input)
                    .ok_or_else(|| LogicError::UnboundInput(input.clone()))?;
                let v = *out.get(*index).ok_or_else(|| LogicError::OutputIndex {
                    input: input.clone(),
                    index: *index,
                    len: out.len(),
                })?;
                let mut d = Dual::constant(v, n);
                d.d[self.offsets[input.as_str()] + index] = 1.0;
                d
            }
            Expr::Neg(a) => self.expr(a)?.scaled(-1.0),
            Expr::Abs(a) => {
                let a = self.expr(a)?;
                // subgradient +1 at zero
                if a.v >= 0.0 {
                    a
                } else {
                    a.scaled(-1.0)
                }
            }
            Expr::Bin(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                match op {
                    BinOp::Add => {
                        let v = a.v + b.v;
                        Dual::combine(a, &b, v, 1.0, 1.0)
                    }
                    BinOp::Sub => {
                        let v = a.v - b.v;
                        Dual::combine(a, &b, v, 1.0, -1.0)
                    }
                    BinOp::Mul => {
                        let (av, bv) = (a.v, b.v);
                        Dual::combine(a, &b, av * bv, bv, av)
                    }
                    BinOp::Div => {
                        if b.v == 0.0 {
                            return Err(LogicError::DivisionByZero);
                        }
                        let (av, bv) = (a.v, b.v);
                        Dual::combine(a, &b, av / bv, 1.0 / bv, -av / (bv * bv))
                    }
                }
            }
        })
    }

    /// Signed violation `a - b` for `a <= b` style atoms (`b - a` for `>=`).
    fn violation(&self, op: CmpOp, a: &Expr, b: &Expr) -> Result<Dual, LogicError> {
        let (lhs, rhs) = match op {
            CmpOp::Le | CmpOp::Lt => (a, b),
            CmpOp::Ge | CmpOp::Gt => (b, a),
        };
        let l = self.expr(lhs)?;
        let r = self.expr(rhs)?;
        let v = l.v - r.v;
        Ok(Dual::combine(l, &r, v, 1.0, -1.0))
    }

    fn fuzzy(&self, f: &Formula, sharpness: f64, mode: AtomMode) -> Result<Dual, LogicError> {
        let n = self.slots;
        Ok(match f {
            Formula::Cmp(op, a, b) => {
                let m = self.violation(*op, a, b)?;
                match mode {
                    AtomMode::Clamped if sharpness <= 0.0 => {
                        Dual::constant(if m.v <= 0.0 { 1.0 } else { 0.0 }, n)
                    }
                    AtomMode::Clamped => {
                        if m.v <= 0.0 {
                            Dual::constant(1.0, n)
                        } else if m.v >= sharpness {
                            Dual::constant(0.0, n)
                        } else {
                            let mut t = m.scaled(-1.0 / sharpness);
                            t.v += 1.0;
                            t
                        }
                    }
                    AtomMode::Surrogate => {
                        let g = if sharpness > 0.0 { sharpness } else { 1.0 };
                        let mut t = m.scaled(-1.0 / g);
                        t.v += 1.0;
                        t
                    }
                }
            }
            Formula::And(a, b) => {
                let x = self.fuzzy(a, sharpness, mode)?;
                let y = self.fuzzy(b, sharpness, mode)?;
                if x.v <= y.v {
                    x
                } else {
                    y
                }
            }
            Formula::Or(a, b) => {
                let x = self.fuzzy(a, sharpness, mode)?;
                let y = self.fuzzy(b, sharpness, mode)?;
                if x.v >= y.v {
                    x
                } else {
                    y
                }
            }
            Formula::Implies(a, b) => {
                let x = self.fuzzy(a, sharpness, mode)?;
                let y = self.fuzzy(b, sharpness, mode)?;
                if x.v < y.v {
                    Dual::constant(1.0, n)
                } else {
                    y
                }
            }
            Formula::Not(a) => {
                let mut x = self.fuzzy(a, sharpness, mode)?.scaled(-1.0);
                x.v += 1.0;
                x
            }
        })
    }

    fn split(&self, d: &[f64]) -> OutputGrads {
        self.bindings
            .outputs
            .iter()
            .map(|(name, out)| {
                let o = self.offsets[name.as_str()];
                (name.clone(), d[o..o + out.len()].to_vec())
            })
            .collect()
    }
}

/// Gödel conjunction.
pub fn godel_and(x: f64, y: f64) -> f64 {
    x.min(y)
}

/// Gödel disjunction.
pub fn godel_or(x: f64, y: f64) -> f64 {
    x.max(y)
}

/// Gödel implication (residuum of `min`).
pub fn godel_implies(x: f64, y: f64) -> f64 {
    if x < y {
        1.0
    } else {
        y
    }
}

pub fn eval_expr(e: &Expr, bindings: &Bindings) -> Result<f64, LogicError> {
    let v = Layout::new(bindings).expr(e)?.v;
    if !v.is_finite() {
        return Err(LogicError::NonFinite);
    }
    Ok(v)
}

/// Fuzzy truth value in [0, 1] with clamped atoms.
pub fn truth(f: &Formula, bindings: &Bindings, sharpness: f64) -> Result<f64, LogicError> {
    Ok(truth_with_grad(f, bindings, sharpness, AtomMode::Clamped)?.0)
}

/// Fuzzy truth and its gradient with respect to every bound output.
/// Ties in `min`/`max` route the gradient to the first argument.
pub fn truth_with_grad(
    f: &Formula,
    bindings: &Bindings,
    sharpness: f64,
    mode: AtomMode,
) -> Result<(f64, OutputGrads), LogicError> {
    let layout = Layout::new(bindings);
    let d = layout.fuzzy(f, sharpness, mode)?;
    if !d.v.is_finite() || d.d.iter().any(|x| !x.is_finite()) {
        return Err(LogicError::NonFinite);
    }
    Ok((d.v, layout.split(&d.d)))
}

/// Classical two-valued semantics with exact strict/non-strict comparisons.
pub fn exact(f: &Formula, bindings: &Bindings) -> Result<bool, LogicError> {
    Ok(match f {
        Formula::Cmp(op, a, b) => {
            let (x, y) = (eval_expr(a, bindings)?, eval_expr(b, bindings)?);
            match op {
                CmpOp::Le => x <= y,
                CmpOp::Lt => x < y,
                CmpOp::Ge => x >= y,
                CmpOp::Gt => x > y,
            }
        }
        Formula::And(a, b) => exact(a, bindings)? && exact(b, bindings)?,
        Formula::Or(a, b) => exact(a, bindings)? || exact(b, bindings)?,
        Formula::Implies(a, b) => !exact(a, bindings)? || exact(b, bindings)?,
        Formula::Not(a) => !exact(a, bindings)?,
    })
}
