//! Canonical formatting with minimal parentheses.

use std::fmt::Write;

use super::{Decl, PropertySpec};
use crate::logic::{BinOp, Expr, Formula};

// formula levels
const IMPLIES: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const ATOMF: u8 = 3;

// expression levels
const SUM: u8 = 0;
const PRODUCT: u8 = 1;
const UNARY: u8 = 2;

/// Shortest text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    let sci = format!("{v:?}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

pub fn pretty_print(spec: &PropertySpec) -> String {
    let mut out = String::new();
    for d in &spec.decls {
        match d {
            Decl::Param { name, value } => {
                writeln!(out, "param {name} = {}", format_number(*value))
            }
            Decl::Input { name, path } => {
                let escaped = path.replace('\\', "\\\\").replace('"', "\\\"");
                writeln!(out, "input {name} = \"{escaped}\"")
            }
            Decl::Network { name } => writeln!(out, "network {name}"),
        }
        .expect("writing to a String");
    }
    let _ = writeln!(
        out,
        "forall {} in ball({}, {}) .\n  {}",
        spec.var,
        spec.anchor,
        format_expr(&spec.radius),
        format_formula(&spec.body)
    );
    out
}

pub fn format_formula(f: &Formula) -> String {
    let mut s = String::new();
    formula(f, IMPLIES, &mut s);
    s
}

pub fn format_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(e, SUM, &mut s);
    s
}

fn formula(f: &Formula, ctx: u8, s: &mut String) {
    let (level, lhs, rhs, op) = match f {
        Formula::Implies(a, b) => (IMPLIES, (a, OR), (b, IMPLIES), " => "),
        Formula::Or(a, b) => (OR, (a, OR), (b, AND), " or "),
        Formula::And(a, b) => (AND, (a, AND), (b, ATOMF), " and "),
        Formula::Not(a) => {
            s.push_str("not ");
            formula(a, ATOMF, s);
            return;
        }
        Formula::Cmp(op, a, b) => {
            expr(a, SUM, s);
            let _ = write!(s, " {} ", op.symbol());
            expr(b, SUM, s);
            return;
        }
    };
    let paren = level < ctx;
    if paren {
        s.push('(');
    }
    formula(lhs.0, lhs.1, s);
    s.push_str(op);
    formula(rhs.0, rhs.1, s);
    if paren {
        s.push(')');
    }
}

fn expr(e: &Expr, ctx: u8, s: &mut String) {
    match e {
        Expr::Num(v) => s.push_str(&format_number(*v)),
        Expr::Var(name) => s.push_str(name),
        Expr::Output {
            network,
            input,
            index,
        } => {
            let _ = write!(s, "{network}({input})[{index}]");
        }
        Expr::Abs(a) => {
            s.push_str("abs(");
            expr(a, SUM, s);
            s.push(')');
        }
        Expr::Neg(a) => {
            s.push('-');
            // `-3` would re-parse as a literal
            if matches!(a.as_ref(), Expr::Num(v) if *v >= 0.0 && v.is_sign_positive()) {
                s.push('(');
                expr(a, SUM, s);
                s.push(')');
            } else {
                expr(a, UNARY, s);
            }
        }
        Expr::Bin(op, a, b) => {
            let level = match op {
                BinOp::Add | BinOp::Sub => SUM,
                BinOp::Mul | BinOp::Div => PRODUCT,
            };
            let paren = level < ctx;
            if paren {
                s.push('(');
            }
            expr(a, level, s);
            let _ = write!(s, " {} ", op.symbol());
            expr(b, level + 1, s);
            if paren {
                s.push(')');
            }
        }
    }
}
