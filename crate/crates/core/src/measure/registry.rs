use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use indexmap::IndexMap;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::{is_dimensionless_identity, MeasureError, Measurement, Result, Unit};
use crate::decvalue::{parse_rational, render_rational, DecError, DecValue, PrecisionContext, Rational};
use crate::dimension::{BaseDimension, Dimension};

const BUILTIN: &str = include_str!("../../data/default.units");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Unit { line: usize, source: MeasureError },
    #[error("no base unit declared for {0}")]
    MissingBase(BaseDimension),
}

/// Named units keyed case-insensitively, with one canonical unit per
/// dimension that has any unit registered.
#[derive(Debug, Clone, Default)]
pub struct UnitRegistry {
    units: IndexMap<String, Arc<Unit>>,
    canonical: HashMap<Dimension, Arc<Unit>>,
    by_scale: HashMap<(Dimension, Rational), Arc<Unit>>,
}

fn key(name: &str) -> String {
    name.to_lowercase()
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && chars.all(|c| c.is_alphanumeric() || c == '_')
}

impl UnitRegistry {
    /// The seven SI base units with identity normalization.
    pub fn standard() -> Self {
        let mut reg = Self::default();
        for (name, base) in [
            ("Kilogram", BaseDimension::Mass),
            ("Metre", BaseDimension::Length),
            ("Second", BaseDimension::Time),
            ("Kelvin", BaseDimension::Temperature),
            ("Ampere", BaseDimension::Current),
            ("Candela", BaseDimension::Light),
            ("Mole", BaseDimension::Matter),
        ] {
            reg.declare_base(name, base).expect("fresh registry");
        }
        reg
    }

    /// SI base units plus the bundled non-standard units (gram, pound,
    /// decisecond, kph, celsius, ...).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled registry is valid")
    }

    /// Text of the bundled registry file.
    pub fn builtin_source() -> &'static str {
        BUILTIN
    }

    /// Declares the canonical unit of a base dimension.
    pub fn declare_base(&mut self, name: &str, base: BaseDimension) -> Result<Arc<Unit>> {
        let dim = Dimension::base(base);
        if self.canonical.contains_key(&dim) {
            return Err(MeasureError::DuplicateName(format!("{name} (canonical {base})")));
        }
        self.insert(Unit::new_unchecked(name, dim, Rational::one(), Rational::zero(), true))
    }

    /// Registers a unit given by its normalization `v ↦ scale·v + offset`.
    /// A linear scale-1 unit becomes canonical if its dimension has none yet.
    pub fn register_unit(
        &mut self,
        name: &str,
        dimension: Dimension,
        scale: Rational,
        offset: Rational,
    ) -> Result<Arc<Unit>> {
        if !scale.is_positive() {
            return Err(MeasureError::InvalidScale(name.to_string()));
        }
        if !offset.is_zero() && dimension.as_base().is_none() {
            return Err(MeasureError::AffineCompositeRejected(name.to_string()));
        }
        let canonical = scale.is_one() && offset.is_zero() && !self.canonical.contains_key(&dimension);
        self.insert(Unit::new_unchecked(name, dimension, scale, offset, canonical))
    }

    /// Registers `name` as the product of `numerator` over the product of
    /// `denominator`. Every constituent must be linear.
    pub fn derive_unit(&mut self, name: &str, numerator: &[Arc<Unit>], denominator: &[Arc<Unit>]) -> Result<Arc<Unit>> {
        let mut dimension = Dimension::one();
        let mut scale = Rational::one();
        for (u, inverse) in numerator
            .iter()
            .map(|u| (u, false))
            .chain(denominator.iter().map(|u| (u, true)))
        {
            if u.is_affine() {
                return Err(MeasureError::AffineCompositeRejected(u.name().to_string()));
            }
            if inverse {
                dimension = dimension / u.dimension();
                scale /= u.scale();
            } else {
                dimension = dimension * u.dimension();
                scale *= u.scale();
            }
        }
        self.register_unit(name, dimension, scale, Rational::zero())
    }

    fn insert(&mut self, unit: Unit) -> Result<Arc<Unit>> {
        if !valid_name(unit.name()) {
            return Err(MeasureError::InvalidName(unit.name().to_string()));
        }
        let k = key(unit.name());
        if self.units.contains_key(&k) {
            return Err(MeasureError::DuplicateName(unit.name().to_string()));
        }
        let unit = Arc::new(unit);
        if unit.is_canonical() {
            self.canonical.insert(unit.dimension(), unit.clone());
        }
        if !unit.is_affine() {
            self.by_scale
                .entry((unit.dimension(), unit.scale().clone()))
                .or_insert_with(|| unit.clone());
        }
        self.units.insert(k, unit.clone());
        Ok(unit)
    }

    pub fn get(&self, name: &str) -> Option<&Arc<Unit>> {
        self.units.get(&key(name))
    }

    pub fn unit(&self, name: &str) -> Result<Arc<Unit>> {
        self.get(name)
            .cloned()
            .ok_or_else(|| MeasureError::UnknownUnit(name.to_string()))
    }

    pub fn contains(&self, unit: &Unit) -> bool {
        self.get(unit.name()).is_some_and(|u| **u == *unit)
    }

    /// Registered units in registration order.
    pub fn units(&self) -> impl Iterator<Item = &Arc<Unit>> {
        self.units.values()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// The canonical unit of `dim`: the registered one, or a composite of
    /// the base units synthesized on demand.
    pub fn canonical_unit(&self, dim: Dimension) -> Arc<Unit> {
        if let Some(u) = self.canonical.get(&dim) {
            return u.clone();
        }
        let base_name = |b: BaseDimension| {
            self.canonical
                .get(&Dimension::base(b))
                .map_or_else(|| b.name().to_string(), |u| u.name().to_string())
        };
        let term = |b: BaseDimension, e: i64| {
            if e == 1 {
                base_name(b)
            } else {
                format!("{}^{e}", base_name(b))
            }
        };
        let num: Vec<String> = BaseDimension::ALL
            .into_iter()
            .filter(|&b| dim.exponent(b) > 0)
            .map(|b| term(b, dim.exponent(b)))
            .collect();
        let den: Vec<String> = BaseDimension::ALL
            .into_iter()
            .filter(|&b| dim.exponent(b) < 0)
            .map(|b| term(b, -dim.exponent(b)))
            .collect();
        let mut name = if num.is_empty() {
            "1".to_string()
        } else {
            num.join("·")
        };
        for d in den {
            name.push('/');
            name.push_str(&d);
        }
        Arc::new(Unit::new_unchecked(name, dim, Rational::one(), Rational::zero(), true))
    }

    fn linear_match(&self, dim: Dimension, scale: &Rational) -> Option<Arc<Unit>> {
        if scale.is_one() {
            if let Some(u) = self.canonical.get(&dim) {
                return Some(u.clone());
            }
        }
        self.by_scale.get(&(dim, scale.clone())).cloned()
    }

    /// Measurement of `value` in the registered unit `name`.
    pub fn make(&self, value: DecValue, name: &str) -> Result<Measurement> {
        Ok(Measurement::new(value, self.unit(name)?))
    }

    /// Measurement in `unit`, which must belong to this registry.
    pub fn make_in(&self, value: DecValue, unit: &Arc<Unit>) -> Result<Measurement> {
        if !self.contains(unit) {
            return Err(MeasureError::UnknownUnit(unit.name().to_string()));
        }
        Ok(Measurement::new(value, unit.clone()))
    }

    pub fn to_canonical(&self, m: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
        super::convert(m, &self.canonical_unit(m.dimension()), ctx)
    }

    pub fn multiply(&self, a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
        self.compose(a, b, false, ctx)
    }

    pub fn divide(&self, a: &Measurement, b: &Measurement, ctx: &PrecisionContext) -> Result<Measurement> {
        self.compose(a, b, true, ctx)
    }

    fn compose(&self, a: &Measurement, b: &Measurement, divide: bool, ctx: &PrecisionContext) -> Result<Measurement> {
        let dim = if divide {
            a.dimension() / b.dimension()
        } else {
            a.dimension() * b.dimension()
        };
        if a.unit().is_affine() || b.unit().is_affine() {
            let (ca, cb) = (a.canonical_exact(), b.canonical_exact());
            let exact = if divide {
                if cb.is_zero() {
                    return Err(MeasureError::DivisionByZero);
                }
                ca / cb
            } else {
                ca * cb
            };
            return Ok(Measurement::new(
                DecValue::from_rational(&exact, ctx)?,
                self.canonical_unit(dim),
            ));
        }
        let (value, scale) = if divide {
            (a.value().div(b.value(), ctx)?, a.unit().scale() / b.unit().scale())
        } else {
            (a.value().mul(b.value(), ctx)?, a.unit().scale() * b.unit().scale())
        };
        let unit = self.composed_unit(a.unit(), b.unit(), divide, dim, scale);
        Ok(Measurement::new(value, unit))
    }

    fn composed_unit(&self, a: &Arc<Unit>, b: &Arc<Unit>, divide: bool, dim: Dimension, scale: Rational) -> Arc<Unit> {
        if let Some(u) = self.linear_match(dim, &scale) {
            return u;
        }
        if scale.is_one() {
            return self.canonical_unit(dim);
        }
        if is_dimensionless_identity(b) {
            return a.clone();
        }
        let name = match (divide, is_dimensionless_identity(a)) {
            (false, true) => return b.clone(),
            (true, true) => format!("1/{}", b.name_as_factor()),
            (true, false) => format!("{}/{}", a.name_as_factor(), b.name_as_factor()),
            (false, false) => format!("{}·{}", a.name_as_factor(), b.name_as_factor()),
        };
        Arc::new(Unit::new_unchecked(name, dim, scale, Rational::zero(), false))
    }

    /// `m^n`. Affine operands are canonicalized first.
    pub fn power(&self, m: &Measurement, n: i32, ctx: &PrecisionContext) -> Result<Measurement> {
        let dim = m
            .dimension()
            .checked_pow(n as i64)
            .ok_or(MeasureError::Decimal(DecError::ExponentOverflow))?;
        if m.unit().is_affine() {
            let c = DecValue::from_rational(&m.canonical_exact(), ctx)?;
            return Ok(Measurement::new(c.powi(n, ctx)?, self.canonical_unit(dim)));
        }
        let value = m.value().powi(n, ctx)?;
        if n == 1 {
            return Ok(Measurement::new(value, m.unit().clone()));
        }
        let scale = num_traits::pow::pow(m.unit().scale().clone(), n.unsigned_abs() as usize);
        let scale = if n < 0 { scale.recip() } else { scale };
        let unit = match self.linear_match(dim, &scale) {
            Some(u) => u,
            None if scale.is_one() => self.canonical_unit(dim),
            None => Arc::new(Unit::new_unchecked(
                format!("{}^{n}", m.unit().name_as_factor()),
                dim,
                scale,
                Rational::zero(),
                false,
            )),
        };
        Ok(Measurement::new(value, unit))
    }

    /// Loads a registry from its line-oriented text form:
    ///
    /// ```text
    /// base <Name> <BaseDimension>
    /// unit <name> : <dimension-expr> scale <rational> [offset <rational>]
    /// derive <name> = <unit> {('*'|'/') <unit>}
    /// ```
    ///
    /// `#` starts a comment. All seven base dimensions must be declared.
    pub fn parse(text: &str) -> std::result::Result<Self, RegistryError> {
        let mut reg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |message: String| RegistryError::Syntax { line, message };
            let unit_err = |source: MeasureError| RegistryError::Unit { line, source };
            let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            let rest = rest.trim();
            match keyword {
                "base" => {
                    let words: Vec<&str> = rest.split_whitespace().collect();
                    let [name, base] = words[..] else {
                        return Err(syntax("expected `base <Name> <BaseDimension>`".into()));
                    };
                    let base: BaseDimension = base
                        .parse()
                        .map_err(|e: crate::dimension::DimensionParseError| syntax(e.message))?;
                    reg.declare_base(name, base).map_err(unit_err)?;
                }
                "unit" => {
                    let (name, tail) = rest
                        .split_once(':')
                        .ok_or_else(|| syntax("expected `:` after the unit name".into()))?;
                    let words: Vec<&str> = tail.split_whitespace().collect();
                    let scale_at = words
                        .iter()
                        .position(|w| *w == "scale")
                        .ok_or_else(|| syntax("expected `scale <rational>`".into()))?;
                    let dimension: Dimension = words[..scale_at]
                        .join(" ")
                        .parse()
                        .map_err(|e: crate::dimension::DimensionParseError| syntax(e.message))?;
                    let after = &words[scale_at + 1..];
                    let rational = |text: Option<&&str>, what: &str| {
                        let text = text.ok_or_else(|| syntax(format!("missing {what} value")))?;
                        parse_rational(text).map_err(|e| syntax(format!("bad {what} `{text}`: {e}")))
                    };
                    let scale = rational(after.first(), "scale")?;
                    let offset = match after.get(1) {
                        None => Rational::zero(),
                        Some(&"offset") if after.len() == 3 => rational(after.get(2), "offset")?,
                        Some(_) => return Err(syntax("expected `offset <rational>` or end of line".into())),
                    };
                    reg.register_unit(name.trim(), dimension, scale, offset)
                        .map_err(unit_err)?;
                }
                "derive" => {
                    let (name, expr) = rest
                        .split_once('=')
                        .ok_or_else(|| syntax("expected `=` after the unit name".into()))?;
                    let (num, den) = split_product(expr).map_err(syntax)?;
                    let lookup = |names: Vec<String>| -> std::result::Result<Vec<Arc<Unit>>, RegistryError> {
                        names.iter().map(|n| reg.unit(n).map_err(unit_err)).collect()
                    };
                    let (num, den) = (lookup(num)?, lookup(den)?);
                    reg.derive_unit(name.trim(), &num, &den).map_err(unit_err)?;
                }
                other => return Err(syntax(format!("unknown directive `{other}`"))),
            }
        }
        for base in BaseDimension::ALL {
            if !reg.canonical.contains_key(&Dimension::base(base)) {
                return Err(RegistryError::MissingBase(base));
            }
        }
        Ok(reg)
    }

    /// Registry file text that [`UnitRegistry::parse`] loads back into an
    /// equivalent registry. Derived units are written as plain `unit` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut bases: Vec<(BaseDimension, &Arc<Unit>)> = self
            .units
            .values()
            .filter(|u| u.is_canonical())
            .filter_map(|u| u.dimension().as_base().map(|b| (b, u)))
            .collect();
        bases.sort_by_key(|(b, _)| *b);
        for (b, u) in &bases {
            writeln!(out, "base {} {}", u.name(), b).unwrap();
        }
        for u in self.units.values() {
            if u.is_canonical() && u.dimension().as_base().is_some() {
                continue;
            }
            write!(
                out,
                "unit {} : {} scale {}",
                u.name(),
                u.dimension().to_syntax(),
                render_rational(u.scale())
            )
            .unwrap();
            if u.is_affine() {
                write!(out, " offset {}", render_rational(u.offset())).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Splits `a * b / c` into numerator and denominator names, left to right.
fn split_product(expr: &str) -> std::result::Result<(Vec<String>, Vec<String>), String> {
    let mut num = Vec::new();
    let mut den = Vec::new();
    let mut into_den = false;
    for piece in expr.split_inclusive(['*', '/']) {
        let (name, op) = match piece.chars().last() {
            Some(c @ ('*' | '/')) => (&piece[..piece.len() - 1], Some(c)),
            _ => (piece, None),
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(format!("missing unit name in `{}`", expr.trim()));
        }
        if into_den {
            den.push(name.to_string());
        } else {
            num.push(name.to_string());
        }
        into_den = op == Some('/');
        if op.is_none() {
            return Ok((num, den));
        }
    }
    Err(format!("missing unit name in `{}`", expr.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_product_is_left_to_right() {
        let (n, d) = split_product(" kilometre / hour ").unwrap();
        assert_eq!((n, d), (vec!["kilometre".to_string()], vec!["hour".to_string()]));
        let (n, d) = split_product("Kilogram*Metre/Second/Second").unwrap();
        assert_eq!(n, vec!["Kilogram", "Metre"]);
        assert_eq!(d, vec!["Second", "Second"]);
        let (n, d) = split_product("a / b * c").unwrap();
        assert_eq!(n, vec!["a", "c"]);
        assert_eq!(d, vec!["b"]);
        assert!(split_product("a * ").is_err());
        assert!(split_product("").is_err());
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let text = "base Kilogram Mass\nunit gram Mass scale 1/1000\n";
        match UnitRegistry::parse(text) {
            Err(RegistryError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "frobnicate x\n";
        assert!(matches!(
            UnitRegistry::parse(text),
            Err(RegistryError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn missing_base_is_reported() {
        let text = "base Kilogram Mass\n";
        assert_eq!(
            UnitRegistry::parse(text).unwrap_err(),
            RegistryError::MissingBase(BaseDimension::Length)
        );
    }
}
