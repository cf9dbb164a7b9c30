//! Three-valued evaluation of a formula over interval-valued outputs.
//!
//! Every operation rounds its endpoints with the same f64 operation the
//! point semantics uses, so a `True` (`False`) result means the formula is
//! classically true (false) for every output vector inside the bounds.

use std::collections::{BTreeMap, HashMap};

use crate::logic::{BinOp, CmpOp, Expr, Formula, LogicError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

impl Tri {
    fn not(self) -> Tri {
        match self {
            Tri::True => Tri::False,
            Tri::False => Tri::True,
            Tri::Unknown => Tri::Unknown,
        }
    }

    fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::False, _) | (_, Tri::False) => Tri::False,
            (Tri::True, Tri::True) => Tri::True,
            _ => Tri::Unknown,
        }
    }

    fn or(self, other: Tri) -> Tri {
        self.not().and(other.not()).not()
    }
}

/// Closed real interval; `None` in results stands for "any real".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }
}

/// Interval outputs per input name, plus parameters.
#[derive(Debug, Clone, Default)]
pub struct RangeBindings {
    pub params: HashMap<String, f64>,
    pub outputs: BTreeMap<String, Vec<Range>>,
}

pub fn range_of(e: &Expr, b: &RangeBindings) -> Result<Option<Range>, LogicError> {
    Ok(match e {
        Expr::Num(v) => Some(Range::point(*v)),
        Expr::Var(name) => Some(Range::point(
            *b.params
                .get(name)
                .ok_or_else(|| LogicError::UnboundVariable(name.clone()))?,
        )),
        Expr::Output { input, index, .. } => {
            let outs = b
                .outputs
                .get(input)
                .ok_or_else(|| LogicError::UnboundInput(input.clone()))?;
            Some(*outs.get(*index).ok_or_else(|| LogicError::OutputIndex {
                input: input.clone(),
                index: *index,
                len: outs.len(),
            })?)
        }
        Expr::Neg(a) => range_of(a, b)?.map(|r| Range {
            lo: -r.hi,
            hi: -r.lo,
        }),
        Expr::Abs(a) => range_of(a, b)?.map(|r| {
            if r.lo >= 0.0 {
                r
            } else if r.hi <= 0.0 {
                Range {
                    lo: -r.hi,
                    hi: -r.lo,
                }
            } else {
                Range {
                    lo: 0.0,
                    hi: (-r.lo).max(r.hi),
                }
            }
        }),
        Expr::Bin(op, x, y) => {
            let (Some(p), Some(q)) = (range_of(x, b)?, range_of(y, b)?) else {
                return Ok(None);
            };
            let r = match op {
                BinOp::Add => Range {
                    lo: p.lo + q.lo,
                    hi: p.hi + q.hi,
                },
                BinOp::Sub => Range {
                    lo: p.lo - q.hi,
                    hi: p.hi - q.lo,
                },
                BinOp::Mul => corners([p.lo * q.lo, p.lo * q.hi, p.hi * q.lo, p.hi * q.hi]),
                BinOp::Div => {
                    if q.lo <= 0.0 && q.hi >= 0.0 {
                        return Ok(None);
                    }
                    corners([p.lo / q.lo, p.lo / q.hi, p.hi / q.lo, p.hi / q.hi])
                }
            };
            (r.lo.is_finite() && r.hi.is_finite()).then_some(r)
        }
    })
}

fn corners(c: [f64; 4]) -> Range {
    Range {
        lo: c.iter().copied().fold(f64::INFINITY, f64::min),
        hi: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

pub fn kleene(f: &Formula, b: &RangeBindings) -> Result<Tri, LogicError> {
    Ok(match f {
        Formula::Cmp(op, x, y) => {
            let (Some(p), Some(q)) = (range_of(x, b)?, range_of(y, b)?) else {
                return Ok(Tri::Unknown);
            };
            let (definitely, never) = match op {
                CmpOp::Le => (p.hi <= q.lo, p.lo > q.hi),
                CmpOp::Lt => (p.hi < q.lo, p.lo >= q.hi),
                CmpOp::Ge => (p.lo >= q.hi, p.hi < q.lo),
                CmpOp::Gt => (p.lo > q.hi, p.hi <= q.lo),
            };
            if definitely {
                Tri::True
            } else if never {
                Tri::False
            } else {
                Tri::Unknown
            }
        }
        Formula::And(x, y) => kleene(x, b)?.and(kleene(y, b)?),
        Formula::Or(x, y) => kleene(x, b)?.or(kleene(y, b)?),
        Formula::Implies(x, y) => kleene(x, b)?.not().or(kleene(y, b)?),
        Formula::Not(x) => kleene(x, b)?.not(),
    })
}
