//! Recursive-descent parser.
//!
//! Precedence, loosest first: `=>` (right-assoc), `or`, `and`, `not`,
//! comparisons, `+ -`, `* /`, unary `-`.

use std::collections::HashMap;

use super::lexer::{tokenize, Tok, Token};
use super::{Decl, ParseError, ParseErrorKind, Pos, PropertySpec};
use crate::logic::{BinOp, CmpOp, Expr, Formula};

const KEYWORDS: &[&str] = &[
    "param", "input", "network", "forall", "in", "ball", "and", "or", "not", "abs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    Param,
    Input,
    Network,
    Bound,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    symbols: HashMap<String, Sym>,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_property(src: &str) -> PResult<PropertySpec> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
        symbols: HashMap::new(),
    };
    p.property()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn syntax<T>(&self, expected: &str) -> PResult<T> {
        Err(ParseError {
            kind: ParseErrorKind::Syntax,
            message: format!("expected {expected}, found {}", self.peek().describe()),
            pos: self.pos(),
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.syntax(&format!("`{kw}`"))
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(what)
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let pos = self.pos();
                self.bump();
                Ok((s, pos))
            }
            _ => self.syntax("identifier"),
        }
    }

    fn declare(&mut self, name: &str, pos: Pos, sym: Sym) -> PResult<()> {
        if self.symbols.contains_key(name) {
            return Err(ParseError {
                kind: ParseErrorKind::Duplicate,
                message: format!("`{name}` is already declared"),
                pos,
            });
        }
        self.symbols.insert(name.to_string(), sym);
        Ok(())
    }

    fn lookup(&self, name: &str, pos: Pos, want: &[Sym], role: &str) -> PResult<Sym> {
        match self.symbols.get(name) {
            None => Err(ParseError {
                kind: ParseErrorKind::Undeclared,
                message: format!("`{name}` is not declared"),
                pos,
            }),
            Some(s) if want.contains(s) => Ok(*s),
            Some(_) => Err(ParseError {
                kind: ParseErrorKind::Semantic,
                message: format!("`{name}` cannot be used as {role}"),
                pos,
            }),
        }
    }

    fn property(&mut self) -> PResult<PropertySpec> {
        let mut decls = Vec::new();
        loop {
            if self.is_kw("param") {
                self.bump();
                let (name, pos) = self.ident()?;
                self.expect(Tok::Assign, "`=`")?;
                let negative = if *self.peek() == Tok::Minus {
                    self.bump();
                    true
                } else {
                    false
                };
                let v = match *self.peek() {
                    Tok::Number(v) => v,
                    _ => return self.syntax("number"),
                };
                self.bump();
                self.declare(&name, pos, Sym::Param)?;
                decls.push(Decl::Param {
                    name,
                    value: if negative { -v } else { v },
                });
            } else if self.is_kw("input") {
                self.bump();
                let (name, pos) = self.ident()?;
                self.expect(Tok::Assign, "`=`")?;
                let path = match self.peek().clone() {
                    Tok::Str(s) => s,
                    _ => return self.syntax("string literal"),
                };
                self.bump();
                self.declare(&name, pos, Sym::Input)?;
                decls.push(Decl::Input { name, path });
            } else if self.is_kw("network") {
                self.bump();
                let (name, pos) = self.ident()?;
                self.declare(&name, pos, Sym::Network)?;
                decls.push(Decl::Network { name });
            } else {
                break;
            }
        }
        self.expect_kw("forall")?;
        let (var, var_pos) = self.ident()?;
        self.expect_kw("in")?;
        self.expect_kw("ball")?;
        self.expect(Tok::LParen, "`(`")?;
        let (anchor, anchor_pos) = self.ident()?;
        self.lookup(
            &anchor,
            anchor_pos,
            &[Sym::Input],
            "a ball centre (declare it with `input`)",
        )?;
        self.expect(Tok::Comma, "`,`")?;
        let radius = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Dot, "`.`")?;
        self.declare(&var, var_pos, Sym::Bound)?;
        let body = self.formula()?;
        if *self.peek() != Tok::Eof {
            return self.syntax("end of input");
        }
        Ok(PropertySpec {
            decls,
            var,
            anchor,
            radius,
            body,
        })
    }

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.clause()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn clause(&mut self) -> PResult<Formula> {
        let mut lhs = self.term()?;
        while self.is_kw("or") {
            self.bump();
            let rhs = self.term()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Formula> {
        let mut lhs = self.atomf()?;
        while self.is_kw("and") {
            self.bump();
            let rhs = self.atomf()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn atomf(&mut self) -> PResult<Formula> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Formula::not(self.atomf()?));
        }
        if *self.peek() == Tok::LParen {
            // `(` opens either a sub-formula or a parenthesized expression
            let save = self.i;
            self.bump();
            let grouped = self.formula().and_then(|f| {
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            });
            match grouped {
                Ok(f) if !self.continues_expr() => return Ok(f),
                Ok(_) => {
                    self.i = save;
                    return self.atom();
                }
                Err(formula_err) => {
                    let formula_i = self.i;
                    self.i = save;
                    return match self.atom() {
                        Ok(a) => Ok(a),
                        Err(atom_err) => Err(if formula_i > self.i {
                            formula_err
                        } else {
                            atom_err
                        }),
                    };
                }
            }
        }
        self.atom()
    }

    fn continues_expr(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Le | Tok::Lt | Tok::Ge | Tok::Gt | Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash
        )
    }

    fn atom(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            _ => return self.syntax("comparison operator"),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Formula::cmp(op, lhs, rhs))
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            // `-` directly before a literal is part of the literal
            if let Tok::Number(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Num(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "abs" => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `abs`")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::abs(e))
            }
            Tok::Ident(_) => {
                let (name, pos) = self.ident()?;
                if *self.peek() == Tok::LParen && matches!(self.peek_at(1), Tok::Ident(_)) {
                    self.lookup(&name, pos, &[Sym::Network], "a network")?;
                    self.bump();
                    let (input, ipos) = self.ident()?;
                    self.lookup(&input, ipos, &[Sym::Input, Sym::Bound], "a network input")?;
                    self.expect(Tok::RParen, "`)`")?;
                    self.expect(Tok::LBracket, "`[`")?;
                    let idx_pos = self.pos();
                    let tok = self.bump();
                    let index = match tok.tok {
                        Tok::Number(_) if tok.text.bytes().all(|b| b.is_ascii_digit()) => {
                            tok.text.parse::<usize>().ok()
                        }
                        _ => None,
                    };
                    let index = match index {
                        Some(i) => i,
                        None => {
                            self.i -= 1;
                            return self.syntax("integer output index");
                        }
                    };
                    if index > 1 {
                        return Err(ParseError {
                            kind: ParseErrorKind::Semantic,
                            message: format!(
                                "output index {index} out of range (outputs are 0 and 1)"
                            ),
                            pos: idx_pos,
                        });
                    }
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Expr::Output {
                        network: name,
                        input,
                        index,
                    })
                } else {
                    self.lookup(
                        &name,
                        pos,
                        &[Sym::Param],
                        "a number (declare it with `param`)",
                    )?;
                    Ok(Expr::Var(name))
                }
            }
            _ => self.syntax("expression"),
        }
    }
}
