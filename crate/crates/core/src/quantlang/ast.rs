use std::fmt;

use super::lexer::Pos;
use crate::decvalue::{render_rational, DecValue, Rational};
use crate::dimension::Dimension;
use crate::measure::CompareOp;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub pos: Pos,
}

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

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    /// A number, optionally followed by a unit name.
    Literal {
        value: DecValue,
        unit: Option<Ident>,
    },
    Name(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Pow {
        base: Box<Expr>,
        exponent: i32,
    },
    Compare {
        op: CompareOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

/// Expression node. `pos` points at the operator for binary nodes and at
/// the first token otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Self { kind, pos }
    }

    /// Copy with every position reset, for structural comparison.
    pub fn without_positions(&self) -> Expr {
        let b = |e: &Expr| Box::new(e.without_positions());
        let kind = match &self.kind {
            ExprKind::Literal { value, unit } => ExprKind::Literal {
                value: value.clone(),
                unit: unit.as_ref().map(|u| Ident {
                    name: u.name.clone(),
                    pos: Pos::default(),
                }),
            },
            ExprKind::Name(n) => ExprKind::Name(n.clone()),
            ExprKind::Neg(e) => ExprKind::Neg(b(e)),
            ExprKind::Binary { op, lhs, rhs } => ExprKind::Binary {
                op: *op,
                lhs: b(lhs),
                rhs: b(rhs),
            },
            ExprKind::Pow { base, exponent } => ExprKind::Pow {
                base: b(base),
                exponent: *exponent,
            },
            ExprKind::Compare { op, lhs, rhs } => ExprKind::Compare {
                op: *op,
                lhs: b(lhs),
                rhs: b(rhs),
            },
        };
        Expr::new(kind, Pos::default())
    }

    /// Names referenced by the expression, in order of appearance.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.kind {
            ExprKind::Literal { .. } => {}
            ExprKind::Name(n) => out.push(n),
            ExprKind::Neg(e) | ExprKind::Pow { base: e, .. } => e.collect_names(out),
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Compare { lhs, rhs, .. } => {
                lhs.collect_names(out);
                rhs.collect_names(out);
            }
        }
    }

    fn is_atom(&self) -> bool {
        matches!(self.kind, ExprKind::Literal { .. } | ExprKind::Name(_))
    }

    fn fmt_atom(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_atom() || matches!(self.kind, ExprKind::Neg(_)) {
            write!(f, "{self}")
        } else {
            write!(f, "({self})")
        }
    }
}

/// Minimal parenthesization that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Literal { value, unit } => {
                write!(f, "{value}")?;
                if let Some(u) = unit {
                    write!(f, " {}", u.name)?;
                }
                Ok(())
            }
            ExprKind::Name(n) => f.write_str(n),
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                e.fmt_atom(f)
            }
            ExprKind::Pow { base, exponent } => {
                base.fmt_atom(f)?;
                write!(f, "^{exponent}")
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let wrap = |e: &Expr, strict: bool| match &e.kind {
                    ExprKind::Binary { op: inner, .. } => {
                        if strict {
                            inner.precedence() <= op.precedence()
                        } else {
                            inner.precedence() < op.precedence()
                        }
                    }
                    ExprKind::Compare { .. } => true,
                    _ => false,
                };
                let side = |f: &mut fmt::Formatter<'_>, e: &Expr, strict: bool| {
                    if wrap(e, strict) {
                        write!(f, "({e})")
                    } else {
                        write!(f, "{e}")
                    }
                };
                side(f, lhs, false)?;
                write!(f, " {} ", op.symbol())?;
                side(f, rhs, true)
            }
            ExprKind::Compare { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StmtKind {
    Check,
    Eval,
    Assert,
}

impl StmtKind {
    pub fn keyword(self) -> &'static str {
        match self {
            StmtKind::Check => "check",
            StmtKind::Eval => "eval",
            StmtKind::Assert => "assert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub expr: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Unit {
        name: Ident,
        dimension: Dimension,
        scale: Rational,
        offset: Option<Rational>,
    },
    Derive {
        name: Ident,
        numerator: Vec<Ident>,
        denominator: Vec<Ident>,
        /// Operand order as written, `true` for a divided unit.
        order: Vec<bool>,
    },
    Const {
        name: Ident,
        unit: Ident,
        value: DecValue,
    },
    Var {
        name: Ident,
        unit: Ident,
    },
}

impl Decl {
    pub fn name(&self) -> &Ident {
        match self {
            Decl::Unit { name, .. } | Decl::Derive { name, .. } | Decl::Const { name, .. } | Decl::Var { name, .. } => {
                name
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Decl(Decl, Pos),
    Stmt(Stmt),
}

impl Item {
    pub fn pos(&self) -> Pos {
        match self {
            Item::Decl(_, p) => *p,
            Item::Stmt(s) => s.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    /// Copy with every position reset, for structural comparison.
    pub fn without_positions(&self) -> Program {
        let id = |i: &Ident| Ident {
            name: i.name.clone(),
            pos: Pos::default(),
        };
        let items = self
            .items
            .iter()
            .map(|item| match item {
                Item::Stmt(s) => Item::Stmt(Stmt {
                    kind: s.kind,
                    expr: s.expr.without_positions(),
                    pos: Pos::default(),
                }),
                Item::Decl(d, _) => {
                    let d = match d {
                        Decl::Unit {
                            name,
                            dimension,
                            scale,
                            offset,
                        } => Decl::Unit {
                            name: id(name),
                            dimension: *dimension,
                            scale: scale.clone(),
                            offset: offset.clone(),
                        },
                        Decl::Derive {
                            name,
                            numerator,
                            denominator,
                            order,
                        } => Decl::Derive {
                            name: id(name),
                            numerator: numerator.iter().map(id).collect(),
                            denominator: denominator.iter().map(id).collect(),
                            order: order.clone(),
                        },
                        Decl::Const { name, unit, value } => Decl::Const {
                            name: id(name),
                            unit: id(unit),
                            value: value.clone(),
                        },
                        Decl::Var { name, unit } => Decl::Var {
                            name: id(name),
                            unit: id(unit),
                        },
                    };
                    Item::Decl(d, Pos::default())
                }
            })
            .collect();
        Program { items }
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decl::Unit {
                name,
                dimension,
                scale,
                offset,
            } => {
                write!(
                    f,
                    "unit {} : {} scale {}",
                    name.name,
                    dimension.to_syntax(),
                    render_rational(scale)
                )?;
                if let Some(o) = offset {
                    write!(f, " offset {}", render_rational(o))?;
                }
                Ok(())
            }
            Decl::Derive {
                name,
                numerator,
                denominator,
                order,
            } => {
                write!(f, "derive {} =", name.name)?;
                let (mut n, mut d) = (numerator.iter(), denominator.iter());
                for (i, divided) in order.iter().enumerate() {
                    let unit = if *divided { d.next() } else { n.next() };
                    let unit = &unit.expect("order matches operand lists").name;
                    match (i, divided) {
                        (0, _) => write!(f, " {unit}")?,
                        (_, true) => write!(f, " / {unit}")?,
                        (_, false) => write!(f, " * {unit}")?,
                    }
                }
                Ok(())
            }
            Decl::Const { name, unit, value } => {
                write!(f, "const {} : {} = {value}", name.name, unit.name)
            }
            Decl::Var { name, unit } => write!(f, "var {} : {}", name.name, unit.name),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            match item {
                Item::Decl(d, _) => writeln!(f, "{d}")?,
                Item::Stmt(s) => writeln!(f, "{} {}", s.kind.keyword(), s.expr)?,
            }
        }
        Ok(())
    }
}
