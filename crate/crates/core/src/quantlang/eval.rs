//! Expression evaluation over measurements.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Expr, ExprKind};
use super::lexer::Pos;
use crate::decvalue::PrecisionContext;
use crate::dimension::Dimension;
use crate::measure::{add_absolute, compare_measurements, subtract_absolute, MeasureError, Measurement, UnitRegistry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Quantity(Measurement),
    Bool(bool),
}

impl Value {
    pub fn as_quantity(&self) -> Option<&Measurement> {
        match self {
            Value::Quantity(m) => Some(m),
            Value::Bool(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Quantity(m) => write!(f, "{m}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{pos}: {error}")]
    Measure { error: MeasureError, pos: Pos },
    #[error("{pos}: no value bound for `{name}`")]
    Unbound { name: String, pos: Pos },
    #[error("{pos}: a comparison cannot be used as a quantity")]
    NotAQuantity { pos: Pos },
}

/// Evaluates `e`. Literals are built in their unit, additive operators work
/// on absolute (canonical) values and report in the left operand's unit,
/// products and powers delegate to the registry.
pub fn evaluate(
    e: &Expr,
    env: &HashMap<String, Measurement>,
    reg: &UnitRegistry,
    ctx: &PrecisionContext,
) -> Result<Value, EvalError> {
    let at = |pos: Pos| move |error: MeasureError| EvalError::Measure { error, pos };
    let quantity = |e: &Expr| match evaluate(e, env, reg, ctx)? {
        Value::Quantity(m) => Ok(m),
        Value::Bool(_) => Err(EvalError::NotAQuantity { pos: e.pos }),
    };
    let m = match &e.kind {
        ExprKind::Literal { value, unit } => {
            let value = value.round(ctx).map_err(|d| at(e.pos)(d.into()))?;
            match unit {
                Some(u) => reg.make(value, &u.name).map_err(at(u.pos))?,
                None => Measurement::new(value, reg.canonical_unit(Dimension::one())),
            }
        }
        ExprKind::Name(n) => env.get(n).cloned().ok_or_else(|| EvalError::Unbound {
            name: n.clone(),
            pos: e.pos,
        })?,
        ExprKind::Neg(inner) => {
            let m = quantity(inner)?;
            Measurement::new(-m.value().clone(), m.unit().clone())
        }
        ExprKind::Pow { base, exponent } => reg.power(&quantity(base)?, *exponent, ctx).map_err(at(e.pos))?,
        ExprKind::Binary { op, lhs, rhs } => {
            let (l, r) = (quantity(lhs)?, quantity(rhs)?);
            match op {
                BinOp::Add => add_absolute(&l, &r, ctx),
                BinOp::Sub => subtract_absolute(&l, &r, ctx),
                BinOp::Mul => reg.multiply(&l, &r, ctx),
                BinOp::Div => reg.divide(&l, &r, ctx),
            }
            .map_err(at(e.pos))?
        }
        ExprKind::Compare { op, lhs, rhs } => {
            let (l, r) = (quantity(lhs)?, quantity(rhs)?);
            return compare_measurements(*op, &l, &r).map(Value::Bool).map_err(at(e.pos));
        }
    };
    Ok(Value::Quantity(m))
}
