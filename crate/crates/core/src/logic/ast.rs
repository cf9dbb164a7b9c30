use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Real-valued expression over parameters and network outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// A declared parameter.
    Var(String),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// `network(input)[index]`
    Output {
        network: String,
        input: String,
        index: usize,
    },
}

/// Constraint formula.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Cmp(CmpOp, Expr, Expr),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn abs(e: Expr) -> Self {
        Expr::Abs(Box::new(e))
    }

    pub fn output(network: &str, input: &str, index: usize) -> Self {
        Expr::Output {
            network: network.into(),
            input: input.into(),
            index,
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Neg(e) | Expr::Abs(e) => e.visit(f),
            Expr::Bin(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Num(_) | Expr::Var(_) | Expr::Output { .. } => {}
        }
    }
}

impl Formula {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        Formula::Cmp(op, a, b)
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }

    /// The local-robustness body
    /// `abs(net(var)[i] - net(anchor)[i]) <= delta` for every `i < outputs`,
    /// joined by `and`.
    pub fn robustness(network: &str, var: &str, anchor: &str, delta: Expr, outputs: usize) -> Self {
        assert!(outputs >= 1);
        let atom = |i: usize| {
            Formula::cmp(
                CmpOp::Le,
                Expr::abs(Expr::bin(
                    BinOp::Sub,
                    Expr::output(network, var, i),
                    Expr::output(network, anchor, i),
                )),
                delta.clone(),
            )
        };
        (1..outputs).fold(atom(0), |acc, i| Formula::and(acc, atom(i)))
    }

    pub fn atoms(&self) -> Vec<(CmpOp, &Expr, &Expr)> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(CmpOp, &'a Expr, &'a Expr)>) {
        match self {
            Formula::Cmp(op, a, b) => out.push((*op, a, b)),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::Not(a) => a.collect_atoms(out),
        }
    }

    fn visit_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        for (_, a, b) in self.atoms() {
            a.visit(f);
            b.visit(f);
        }
    }

    /// Inputs passed to a network anywhere in the formula.
    pub fn referenced_inputs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| {
            if let Expr::Output { input, .. } = e {
                out.insert(input.clone());
            }
        });
        out
    }

    pub fn referenced_networks(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| {
            if let Expr::Output { network, .. } = e {
                out.insert(network.clone());
            }
        });
        out
    }

    pub fn referenced_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_exprs(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn max_output_index(&self) -> Option<usize> {
        let mut m = None;
        self.visit_exprs(&mut |e| {
            if let Expr::Output { index, .. } = e {
                m = Some(m.map_or(*index, |c: usize| c.max(*index)));
            }
        });
        m
    }
}
