//! Static dimension checking.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use num_traits::Zero;

use super::ast::{BinOp, Decl, Expr, ExprKind, Ident, Item, Program, StmtKind};
use super::eval::{evaluate, EvalError, Value};
use super::lexer::{tokenize, Pos};
use super::parser::parse;
use crate::decvalue::{DecValue, PrecisionContext};
use crate::dimension::Dimension;
use crate::measure::{MeasureError, Measurement, Unit, UnitRegistry};

/// Static type of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Quantity(Dimension),
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Quantity(d) => write!(f, "{d}"),
            Ty::Bool => f.write_str("Bool"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    DimensionMismatch,
    UnknownName,
    UnknownUnit,
    ParseError,
    LexError,
    DuplicateName,
    InvalidName,
    AssertionFailed,
    DivisionByZero,
    NotAComparison,
    UnboundVariable,
    ExponentOverflow,
    AffineCompositeRejected,
    InvalidScale,
    ArithmeticError,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::DimensionMismatch => "DimensionMismatch",
            ErrorKind::UnknownName => "UnknownName",
            ErrorKind::UnknownUnit => "UnknownUnit",
            ErrorKind::ParseError => "ParseError",
            ErrorKind::LexError => "LexError",
            ErrorKind::DuplicateName => "DuplicateName",
            ErrorKind::InvalidName => "InvalidName",
            ErrorKind::AssertionFailed => "AssertionFailed",
            ErrorKind::DivisionByZero => "DivisionByZero",
            ErrorKind::NotAComparison => "NotAComparison",
            ErrorKind::UnboundVariable => "UnboundVariable",
            ErrorKind::ExponentOverflow => "ExponentOverflow",
            ErrorKind::AffineCompositeRejected => "AffineCompositeRejected",
            ErrorKind::InvalidScale => "InvalidScale",
            ErrorKind::ArithmeticError => "ArithmeticError",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: ErrorKind,
    pub pos: Pos,
    pub message: String,
    pub expected: Option<Dimension>,
    pub actual: Option<Dimension>,
}

impl Diagnostic {
    pub fn new(kind: ErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        Self {
            kind,
            pos,
            message: message.into(),
            expected: None,
            actual: None,
        }
    }

    fn mismatch(pos: Pos, expected: Dimension, actual: Dimension) -> Self {
        Self {
            kind: ErrorKind::DimensionMismatch,
            pos,
            message: format!("dimension mismatch: {expected} vs {actual}"),
            expected: Some(expected),
            actual: Some(actual),
        }
    }

    pub(crate) fn from_measure(e: MeasureError, pos: Pos) -> Self {
        let kind = match &e {
            MeasureError::DimensionMismatch { left, right } => {
                return Self::mismatch(pos, *left, *right);
            }
            MeasureError::UnknownUnit(_) => ErrorKind::UnknownUnit,
            MeasureError::InvalidName(_) => ErrorKind::InvalidName,
            MeasureError::DuplicateName(_) => ErrorKind::DuplicateName,
            MeasureError::InvalidScale(_) => ErrorKind::InvalidScale,
            MeasureError::AffineCompositeRejected(_) => ErrorKind::AffineCompositeRejected,
            MeasureError::DivisionByZero => ErrorKind::DivisionByZero,
            MeasureError::Decimal(crate::DecError::ExponentOverflow) => ErrorKind::ExponentOverflow,
            MeasureError::Decimal(_) => ErrorKind::ArithmeticError,
        };
        Self::new(kind, pos, e.to_string())
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.pos, self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok { ty: Ty, value: Option<Value> },
    Error(Diagnostic),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok { .. })
    }

    pub fn error(&self) -> Option<&Diagnostic> {
        match self {
            Verdict::Error(d) => Some(d),
            Verdict::Ok { .. } => None,
        }
    }
}

/// One verdict, tied to the item it judges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub pos: Pos,
    /// `check`, `eval`, `assert`, a declaration keyword, or `source` for
    /// lexing and parsing failures.
    pub label: &'static str,
    pub verdict: Verdict,
}

impl Entry {
    /// `file:line:col: label: ok: Dim [= value]` or
    /// `file:line:col: Kind: message`.
    pub fn plain(&self, file: &str) -> String {
        match &self.verdict {
            Verdict::Ok { ty, value } => {
                let mut s = format!("{file}:{}: {}: ok: {ty}", self.pos, self.label);
                if let Some(v) = value {
                    s.push_str(&format!(" = {v}"));
                }
                s
            }
            Verdict::Error(d) => format!("{file}:{}: {}: {}", d.pos, d.kind, d.message),
        }
    }

    /// Tab-separated: `line col label OK ty value` or
    /// `line col label ERROR kind expected actual message`.
    pub fn machine(&self) -> String {
        let dim = |d: &Option<Dimension>| d.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        match &self.verdict {
            Verdict::Ok { ty, value } => format!(
                "{}\t{}\t{}\tOK\t{ty}\t{}",
                self.pos.line,
                self.pos.col,
                self.label,
                value.as_ref().map(|v| v.to_string()).unwrap_or_else(|| "-".into())
            ),
            Verdict::Error(d) => format!(
                "{}\t{}\t{}\tERROR\t{}\t{}\t{}\t{}",
                d.pos.line,
                d.pos.col,
                self.label,
                d.kind,
                dim(&d.expected),
                dim(&d.actual),
                d.message
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CheckReport {
    pub entries: Vec<Entry>,
}

impl CheckReport {
    pub fn is_ok(&self) -> bool {
        self.entries.iter().all(|e| e.verdict.is_ok())
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.entries.iter().filter_map(|e| e.verdict.error())
    }

    pub fn count(&self, kind: ErrorKind) -> usize {
        self.errors().filter(|d| d.kind == kind).count()
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Const(Measurement),
    Var(Arc<Unit>),
}

/// Declarations in force at some point of a program: the registry extended
/// with declared units, plus constants and variables.
#[derive(Debug, Clone)]
pub struct Scope {
    registry: UnitRegistry,
    names: IndexMap<String, Binding>,
}

impl Scope {
    pub fn new(registry: UnitRegistry) -> Self {
        Self {
            registry,
            names: IndexMap::new(),
        }
    }

    pub fn registry(&self) -> &UnitRegistry {
        &self.registry
    }

    /// Declared variables and their units, in declaration order.
    pub fn variables(&self) -> impl Iterator<Item = (&str, &Arc<Unit>)> {
        self.names.iter().filter_map(|(n, b)| match b {
            Binding::Var(u) => Some((n.as_str(), u)),
            Binding::Const(_) => None,
        })
    }

    /// Constants with their values.
    pub fn constants(&self) -> impl Iterator<Item = (&str, &Measurement)> {
        self.names.iter().filter_map(|(n, b)| match b {
            Binding::Const(m) => Some((n.as_str(), m)),
            Binding::Var(_) => None,
        })
    }

    fn unit(&self, id: &Ident) -> Result<Arc<Unit>, Diagnostic> {
        self.registry
            .unit(&id.name)
            .map_err(|e| Diagnostic::from_measure(e, id.pos))
    }

    fn bind(&mut self, id: &Ident, b: Binding) -> Result<(), Diagnostic> {
        if self.names.contains_key(&id.name) {
            return Err(Diagnostic::new(
                ErrorKind::DuplicateName,
                id.pos,
                format!("`{}` is already declared", id.name),
            ));
        }
        self.names.insert(id.name.clone(), b);
        Ok(())
    }

    /// Adds a declaration to the scope.
    pub fn declare(&mut self, decl: &Decl) -> Result<(), Diagnostic> {
        match decl {
            Decl::Unit {
                name,
                dimension,
                scale,
                offset,
            } => {
                let offset = offset.clone().unwrap_or_else(Zero::zero);
                self.registry
                    .register_unit(&name.name, *dimension, scale.clone(), offset)
                    .map_err(|e| Diagnostic::from_measure(e, name.pos))?;
            }
            Decl::Derive {
                name,
                numerator,
                denominator,
                ..
            } => {
                let num = numerator.iter().map(|u| self.unit(u)).collect::<Result<Vec<_>, _>>()?;
                let den = denominator
                    .iter()
                    .map(|u| self.unit(u))
                    .collect::<Result<Vec<_>, _>>()?;
                self.registry
                    .derive_unit(&name.name, &num, &den)
                    .map_err(|e| Diagnostic::from_measure(e, name.pos))?;
            }
            Decl::Const { name, unit, value } => {
                let u = self.unit(unit)?;
                self.bind(name, Binding::Const(Measurement::new(value.clone(), u)))?;
            }
            Decl::Var { name, unit } => {
                let u = self.unit(unit)?;
                self.bind(name, Binding::Var(u))?;
            }
        }
        Ok(())
    }

    /// Infers the static type of `e`.
    pub fn infer(&self, e: &Expr) -> Result<Ty, Diagnostic> {
        let quantity = |ty: Ty, at: &Expr| match ty {
            Ty::Quantity(d) => Ok(d),
            Ty::Bool => Err(Diagnostic::new(
                ErrorKind::NotAComparison,
                at.pos,
                "a comparison cannot be used as a quantity",
            )),
        };
        match &e.kind {
            ExprKind::Literal { unit: None, .. } => Ok(Ty::Quantity(Dimension::one())),
            ExprKind::Literal { unit: Some(u), .. } => Ok(Ty::Quantity(self.unit(u)?.dimension())),
            ExprKind::Name(n) => match self.names.get(n) {
                Some(Binding::Const(m)) => Ok(Ty::Quantity(m.dimension())),
                Some(Binding::Var(u)) => Ok(Ty::Quantity(u.dimension())),
                None => Err(Diagnostic::new(
                    ErrorKind::UnknownName,
                    e.pos,
                    format!("unknown name `{n}`"),
                )),
            },
            ExprKind::Neg(inner) => Ok(Ty::Quantity(quantity(self.infer(inner)?, inner)?)),
            ExprKind::Pow { base, exponent } => {
                let d = quantity(self.infer(base)?, base)?;
                d.checked_pow(*exponent as i64)
                    .map(Ty::Quantity)
                    .ok_or_else(|| Diagnostic::new(ErrorKind::ExponentOverflow, e.pos, "dimension exponent overflow"))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let l = quantity(self.infer(lhs)?, lhs)?;
                let r = quantity(self.infer(rhs)?, rhs)?;
                match op {
                    BinOp::Add | BinOp::Sub if l != r => Err(Diagnostic::mismatch(e.pos, l, r)),
                    BinOp::Add | BinOp::Sub => Ok(Ty::Quantity(l)),
                    BinOp::Mul => Ok(Ty::Quantity(l * r)),
                    BinOp::Div => Ok(Ty::Quantity(l / r)),
                }
            }
            ExprKind::Compare { lhs, rhs, .. } => {
                let l = quantity(self.infer(lhs)?, lhs)?;
                let r = quantity(self.infer(rhs)?, rhs)?;
                if l != r {
                    return Err(Diagnostic::mismatch(e.pos, l, r));
                }
                Ok(Ty::Bool)
            }
        }
    }
}

/// Infers the type of `e` in `scope`.
pub fn infer_dimension(e: &Expr, scope: &Scope) -> Result<Ty, Diagnostic> {
    scope.infer(e)
}

fn decl_label(d: &Decl) -> &'static str {
    match d {
        Decl::Unit { .. } => "unit",
        Decl::Derive { .. } => "derive",
        Decl::Const { .. } => "const",
        Decl::Var { .. } => "var",
    }
}

/// Statically checks every statement. Declarations that fail also get a
/// verdict; the rest are silent.
pub fn check_program(program: &Program, reg: &UnitRegistry) -> CheckReport {
    walk(program, reg, None).0
}

/// Like [`check_program`], returning the final scope as well.
pub fn check_with_scope(program: &Program, reg: &UnitRegistry) -> (CheckReport, Scope) {
    walk(program, reg, None)
}

/// Inputs for [`run_program`].
struct RunInputs<'a> {
    /// Values of declared variables, in each variable's declared unit.
    bindings: &'a HashMap<String, DecValue>,
    ctx: &'a PrecisionContext,
}

/// Checks, then evaluates each statement whose names are all bound.
/// Unbound `check` and `assert` statements keep their static verdict; an
/// unbound `eval` is an error.
pub fn run_program(
    program: &Program,
    reg: &UnitRegistry,
    bindings: &HashMap<String, DecValue>,
    ctx: &PrecisionContext,
) -> CheckReport {
    walk(program, reg, Some(RunInputs { bindings, ctx })).0
}

fn walk(program: &Program, reg: &UnitRegistry, run: Option<RunInputs<'_>>) -> (CheckReport, Scope) {
    let mut scope = Scope::new(reg.clone());
    let mut report = CheckReport::default();
    let mut env: HashMap<String, Measurement> = HashMap::new();
    for item in &program.items {
        match item {
            Item::Decl(d, pos) => {
                if let Err(diag) = scope.declare(d) {
                    report.entries.push(Entry {
                        pos: *pos,
                        label: decl_label(d),
                        verdict: Verdict::Error(diag),
                    });
                    continue;
                }
                if let Some(run) = &run {
                    match d {
                        Decl::Const { name, .. } => {
                            if let Some(Binding::Const(m)) = scope.names.get(&name.name) {
                                env.insert(name.name.clone(), m.clone());
                            }
                        }
                        Decl::Var { name, .. } => {
                            if let (Some(v), Some(Binding::Var(u))) =
                                (run.bindings.get(&name.name), scope.names.get(&name.name))
                            {
                                env.insert(name.name.clone(), Measurement::new(v.clone(), u.clone()));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Item::Stmt(s) => {
                let verdict = match scope.infer(&s.expr) {
                    Err(d) => Verdict::Error(d),
                    Ok(Ty::Quantity(_)) if s.kind == StmtKind::Assert => Verdict::Error(Diagnostic::new(
                        ErrorKind::NotAComparison,
                        s.expr.pos,
                        "assert needs a comparison",
                    )),
                    Ok(ty) => match &run {
                        None => Verdict::Ok { ty, value: None },
                        Some(run) => run_stmt(s.kind, &s.expr, ty, &env, &scope, run.ctx),
                    },
                };
                report.entries.push(Entry {
                    pos: s.pos,
                    label: s.kind.keyword(),
                    verdict,
                });
            }
        }
    }
    (report, scope)
}

fn run_stmt(
    kind: StmtKind,
    expr: &Expr,
    ty: Ty,
    env: &HashMap<String, Measurement>,
    scope: &Scope,
    ctx: &PrecisionContext,
) -> Verdict {
    if let Some(missing) = expr.names().into_iter().find(|n| !env.contains_key(*n)) {
        return if kind == StmtKind::Eval {
            Verdict::Error(Diagnostic::new(
                ErrorKind::UnboundVariable,
                expr.pos,
                format!("no value bound for `{missing}`"),
            ))
        } else {
            Verdict::Ok { ty, value: None }
        };
    }
    match evaluate(expr, env, &scope.registry, ctx) {
        Ok(Value::Bool(false)) if kind == StmtKind::Assert => Verdict::Error(Diagnostic::new(
            ErrorKind::AssertionFailed,
            expr.pos,
            format!("assertion `{expr}` is false"),
        )),
        Ok(v) => Verdict::Ok { ty, value: Some(v) },
        Err(EvalError::Measure { error, pos }) => Verdict::Error(Diagnostic::from_measure(error, pos)),
        Err(EvalError::Unbound { name, pos }) => Verdict::Error(Diagnostic::new(
            ErrorKind::UnboundVariable,
            pos,
            format!("no value bound for `{name}`"),
        )),
        Err(EvalError::NotAQuantity { pos }) => Verdict::Error(Diagnostic::new(
            ErrorKind::NotAComparison,
            pos,
            "a comparison cannot be used as a quantity",
        )),
    }
}

/// Lexes, parses and checks `source`. Lexing failures yield a single
/// verdict; parse errors are interleaved with statement verdicts in
/// source order.
pub fn check_source(source: &str, reg: &UnitRegistry) -> CheckReport {
    source_report(source, |p| check_program(p, reg))
}

/// Lexes, parses and runs `source` with the given variable values.
pub fn run_source(
    source: &str,
    reg: &UnitRegistry,
    bindings: &HashMap<String, DecValue>,
    ctx: &PrecisionContext,
) -> CheckReport {
    source_report(source, |p| run_program(p, reg, bindings, ctx))
}

fn source_report(source: &str, f: impl FnOnce(&Program) -> CheckReport) -> CheckReport {
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(e) => {
            return CheckReport {
                entries: vec![Entry {
                    pos: e.pos,
                    label: "source",
                    verdict: Verdict::Error(Diagnostic::new(ErrorKind::LexError, e.pos, e.message)),
                }],
            }
        }
    };
    let parsed = parse(&tokens);
    let mut entries: Vec<Entry> = parsed
        .errors
        .into_iter()
        .map(|e| Entry {
            pos: e.pos,
            label: "source",
            verdict: Verdict::Error(Diagnostic::new(ErrorKind::ParseError, e.pos, e.to_string())),
        })
        .collect();
    entries.extend(f(&parsed.program).entries);
    // stable sort: a parse error precedes a statement starting at its position
    entries.sort_by_key(|e| e.pos);
    CheckReport { entries }
}
