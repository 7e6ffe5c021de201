//! Units and dimension-checked measurements.
//!
//! Every [`Unit`] carries an affine map `v ↦ scale·v + offset` onto the
//! canonical unit of its dimension. Conversions always go through that
//! canonical form, never pairwise, and are computed exactly before a single
//! final rounding.
//!
//! Additive operations and comparisons are partial: they are defined only
//! when both operands share a [`Dimension`], and fail with
//! [`MeasureError::DimensionMismatch`] otherwise. Additive results are
//! expressed in the unit of the first operand.

mod registry;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::decvalue::{DecError, DecValue, PrecisionContext, Rational};
use crate::dimension::Dimension;

pub use registry::{RegistryError, UnitRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: Dimension, right: Dimension },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("`{0}` is not a valid unit name")]
    InvalidName(String),
    #[error("unit name `{0}` is already registered")]
    DuplicateName(String),
    #[error("unit `{0}` needs a strictly positive scale")]
    InvalidScale(String),
    #[error("affine unit `{0}` cannot take part in a composite unit")]
    AffineCompositeRejected(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error(transparent)]
    Decimal(DecError),
}

impl From<DecError> for MeasureError {
    fn from(e: DecError) -> Self {
        match e {
            DecError::DivisionByZero => MeasureError::DivisionByZero,
            other => MeasureError::Decimal(other),
        }
    }
}

pub type Result<T, E = MeasureError> = std::result::Result<T, E>;

/// A named unit with its normalization onto the canonical unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Unit {
    name: String,
    dimension: Dimension,
    scale: Rational,
    offset: Rational,
    canonical: bool,
}

impl Unit {
    pub(crate) fn new_unchecked(
        name: impl Into<String>,
        dimension: Dimension,
        scale: Rational,
        offset: Rational,
        canonical: bool,
    ) -> Self {
        Self {
            name: name.into(),
            dimension,
            scale,
            offset,
            canonical,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn offset(&self) -> &Rational {
        &self.offset
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn is_affine(&self) -> bool {
        !self.offset.is_zero()
    }

    /// Exact canonical value of `v` in this unit.
    pub fn to_canonical_exact(&self, v: &Rational) -> Rational {
        v * &self.scale + &self.offset
    }

    /// Exact value in this unit of a canonical value.
    pub fn from_canonical_exact(&self, c: &Rational) -> Rational {
        (c - &self.offset) / &self.scale
    }

    /// Whether the unit's name is an auto-generated composite that needs
    /// parentheses when composed further.
    fn is_compound_name(&self) -> bool {
        self.name.contains(['·', '/', '^'])
    }

    fn name_as_factor(&self) -> String {
        if self.is_compound_name() {
            format!("({})", self.name)
        } else {
            self.name.clone()
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A value together with the unit it is expressed in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measurement {
    value: DecValue,
    unit: Arc<Unit>,
}

impl Measurement {
    /// Builds a measurement from a unit handle. Use [`UnitRegistry::make`] to
    /// construct from a unit name with membership checking.
    pub fn new(value: DecValue, unit: Arc<Unit>) -> Self {
        Self { value, unit }
    }

    pub fn value(&self) -> &DecValue {
        &self.value
    }

    pub fn unit(&self) -> &Arc<Unit> {
        &self.unit
    }

    pub fn dimension(&self) -> Dimension {
        self.unit.dimension
    }

    /// Exact canonical value.
    pub fn canonical_exact(&self) -> Rational {
        self.unit.to_canonical_exact(&self.value.to_rational())
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unit.dimension.is_one() && self.unit.canonical {
            write!(f, "{}", self.value)
        } else {
            write!(f, "{} {}", self.value, self.unit.name)
        }
    }
}

fn same_dimension(a: &Measurement, b: &Measurement) -> Result<()> {
    if a.dimension() == b.dimension() {
        Ok(())
    } else {
        Err(MeasureError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        })
    }
}

/// Re-expresses a value from one unit in another of the same dimension,
/// exactly, then rounds once.
fn rebase(value: &DecValue, from: &Unit, to: &Unit, ctx: &PrecisionContext) -> Result<DecValue> {
    if from == to {
        return Ok(value.round(ctx)?);
    }
    if !from.is_affine() && !to.is_affine() {
        return Ok(value.mul_rational(&(&from.scale / &to.scale), ctx)?);
    }
    let canonical = from.to_canonical_exact(&value.to_rational());
    Ok(DecValue::from_rational(&to.from_canonical_exact(&canonical), ctx)?)
}

/// Converts `m` into `target`, routed through the canonical unit.
pub fn convert(m: &Measurement, target: &Arc<Unit>, ctx: &PrecisionContext) -> Result<Measurement> {
    if m.dimension() != target.dimension {
        return Err(MeasureError::DimensionMismatch {
            left: m.dimension(),
            right: target.dimension,
        });
    }
    Ok(Measurement {
        value: rebase(&m.value, &m.unit, target, ctx)?,
        unit: target.clone(),
    })
}

/// `a + b`, in the unit of `a`.
pub fn add_measurements(a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
    additive(a, b, false, ctx)
}

/// `a - b`, in the unit of `a`.
pub fn subtract_measurement(a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
    additive(a, b, true, ctx)
}

fn additive(a: &Measurement, b: &Measurement, negate: bool, ctx: &PrecisionContext) -> Result<Measurement> {
    same_dimension(a, b)?;
    let value = if a.unit == b.unit {
        if negate {
            a.value.sub(&b.value, ctx)?
        } else {
            a.value.add(&b.value, ctx)?
        }
    } else {
        // b expressed exactly in a's unit, then a single rounding of the sum
        let b_in_a = a
            .unit
            .from_canonical_exact(&b.unit.to_canonical_exact(&b.value.to_rational()));
        let b_in_a = if negate { -b_in_a } else { b_in_a };
        DecValue::from_rational(&(a.value.to_rational() + b_in_a), ctx)?
    };
    Ok(Measurement {
        value,
        unit: a.unit.clone(),
    })
}

/// Sum of the canonical values of `a` and `b`, reported in `a`'s unit through
/// its inverse map. For linear units this equals [`add_measurements`]; for
/// affine units each operand is treated as an absolute point.
pub fn add_absolute(a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
    absolute(a, b, false, ctx)
}

/// Difference of canonical values, reported in `a`'s unit.
pub fn subtract_absolute(a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
    absolute(a, b, true, ctx)
}

fn absolute(a: &Measurement, b: &Measurement, negate: bool, ctx: &PrecisionContext) -> Result<Measurement> {
    if !a.unit.is_affine() && !b.unit.is_affine() {
        return additive(a, b, negate, ctx);
    }
    same_dimension(a, b)?;
    let cb = b.canonical_exact();
    let sum = if negate {
        a.canonical_exact() - cb
    } else {
        a.canonical_exact() + cb
    };
    Ok(Measurement {
        value: DecValue::from_rational(&a.unit.from_canonical_exact(&sum), ctx)?,
        unit: a.unit.clone(),
    })
}

/// `k · m`, keeping the unit of `m`.
pub fn scale_measurement(k: &DecValue, m: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
    Ok(Measurement {
        value: k.mul(&m.value, ctx)?,
        unit: m.unit.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] = [
        CompareOp::Eq,
        CompareOp::Neq,
        CompareOp::Lt,
        CompareOp::Le,
        CompareOp::Gt,
        CompareOp::Ge,
    ];

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Neq => ord != Ordering::Equal,
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Neq => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

/// Orders two same-dimension measurements by their exact canonical values.
pub fn order_measurements(a: &Measurement, b: &Measurement) -> Result<Ordering> {
    same_dimension(a, b)?;
    if a.unit == b.unit {
        return Ok(a.value.cmp(&b.value));
    }
    if !a.unit.is_affine() && !b.unit.is_affine() {
        let lhs = a.value.to_rational() * &a.unit.scale;
        let rhs = b.value.to_rational() * &b.unit.scale;
        return Ok(lhs.cmp(&rhs));
    }
    Ok(a.canonical_exact().cmp(&b.canonical_exact()))
}

/// Compares canonical values; defined only for equal dimensions.
pub fn compare_measurements(op: CompareOp, a: &Measurement, b: &Measurement) -> Result<bool> {
    Ok(op.holds(order_measurements(a, b)?))
}

/// Draws a value with at most twelve significant digits and a leading
/// exponent in `[-12, 12]`.
pub fn random_value<R: Rng + ?Sized>(rng: &mut R) -> DecValue {
    let significand: i64 = rng.gen_range(1..1_000_000_000_000i64);
    let significand = if rng.gen_bool(0.5) { -significand } else { significand };
    let exponent = rng.gen_range(-12..=12);
    DecValue::make_float(significand, exponent).expect("exponent within range")
}

/// Deterministic pseudo-random measurement in `unit` for `seed`.
pub fn random_measurement(unit: &Arc<Unit>, seed: u64) -> Measurement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Measurement::new(random_value(&mut rng), unit.clone())
}

/// Scale of the dimensionless canonical unit, used by composition shortcuts.
fn is_dimensionless_identity(u: &Unit) -> bool {
    u.dimension.is_one() && u.scale.is_one() && u.offset.is_zero()
}
