//! SI dimension vectors.
//!
//! A [`Dimension`] assigns an integer exponent to each of the seven SI base
//! dimensions. Multiplication adds exponents, division subtracts them, so the
//! set of dimensions forms an abelian group with [`Dimension::one`] as identity.

use std::fmt;
use std::ops::{Div, Mul};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseDimension {
    Mass,
    Length,
    Time,
    Temperature,
    Light,
    Current,
    Matter,
}

impl BaseDimension {
    /// All base dimensions in rendering order.
    pub const ALL: [BaseDimension; 7] = [
        BaseDimension::Mass,
        BaseDimension::Length,
        BaseDimension::Time,
        BaseDimension::Temperature,
        BaseDimension::Light,
        BaseDimension::Current,
        BaseDimension::Matter,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BaseDimension::Mass => "M",
            BaseDimension::Length => "L",
            BaseDimension::Time => "T",
            BaseDimension::Temperature => "Θ",
            BaseDimension::Light => "J",
            BaseDimension::Current => "I",
            BaseDimension::Matter => "N",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaseDimension::Mass => "Mass",
            BaseDimension::Length => "Length",
            BaseDimension::Time => "Time",
            BaseDimension::Temperature => "Temperature",
            BaseDimension::Light => "Light",
            BaseDimension::Current => "Current",
            BaseDimension::Matter => "Matter",
        }
    }
}

impl fmt::Display for BaseDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseDimension {
    type Err = DimensionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaseDimension::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| DimensionParseError {
                position: 0,
                message: format!("unknown base dimension `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid dimension at position {position}: {message}")]
pub struct DimensionParseError {
    pub position: usize,
    pub message: String,
}

/// Exponent vector over the seven SI base dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Dimension {
    exponents: [i64; 7],
}

impl Dimension {
    /// The dimensionless identity.
    pub const fn one() -> Self {
        Self { exponents: [0; 7] }
    }

    pub fn base(b: BaseDimension) -> Self {
        let mut d = Self::one();
        d.exponents[b.index()] = 1;
        d
    }

    pub fn from_exponents(exponents: [i64; 7]) -> Self {
        Self { exponents }
    }

    pub fn exponents(&self) -> [i64; 7] {
        self.exponents
    }

    pub fn exponent(&self, b: BaseDimension) -> i64 {
        self.exponents[b.index()]
    }

    pub fn is_one(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// The base dimension this is, if it is exactly one base to the first power.
    pub fn as_base(&self) -> Option<BaseDimension> {
        BaseDimension::ALL.into_iter().find(|&b| *self == Self::base(b))
    }

    pub fn reciprocal(&self) -> Self {
        Self {
            exponents: self.exponents.map(|e| -e),
        }
    }

    /// Panics if an exponent overflows; see [`Dimension::checked_pow`].
    pub fn pow(&self, n: i64) -> Self {
        self.checked_pow(n).expect("dimension exponent overflow")
    }

    pub fn checked_pow(&self, n: i64) -> Option<Self> {
        let mut exponents = [0; 7];
        for (out, e) in exponents.iter_mut().zip(self.exponents) {
            *out = e.checked_mul(n)?;
        }
        Some(Self { exponents })
    }

    /// Renders in the textual syntax accepted by [`FromStr`], e.g.
    /// `Length/Time^2`, or `1` when dimensionless.
    pub fn to_syntax(&self) -> String {
        let term = |b: BaseDimension, e: i64| {
            if e == 1 {
                b.name().to_string()
            } else {
                format!("{}^{e}", b.name())
            }
        };
        let num: Vec<String> = BaseDimension::ALL
            .into_iter()
            .filter(|&b| self.exponent(b) > 0)
            .map(|b| term(b, self.exponent(b)))
            .collect();
        let den: Vec<String> = BaseDimension::ALL
            .into_iter()
            .filter(|&b| self.exponent(b) < 0)
            .map(|b| term(b, -self.exponent(b)))
            .collect();
        let mut out = if num.is_empty() { "1".to_string() } else { num.join("*") };
        for d in den {
            out.push('/');
            out.push_str(&d);
        }
        out
    }
}

// multiplying quantities adds exponents
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for Dimension {
    type Output = Dimension;

    fn mul(self, rhs: Dimension) -> Dimension {
        let mut exponents = self.exponents;
        for (e, r) in exponents.iter_mut().zip(rhs.exponents) {
            *e += r;
        }
        Dimension { exponents }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for Dimension {
    type Output = Dimension;

    fn div(self, rhs: Dimension) -> Dimension {
        self * rhs.reciprocal()
    }
}

/// `L^1·T^-2` style, fixed base order, zero exponents omitted, `1` if dimensionless.
impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return f.write_str("1");
        }
        let mut first = true;
        for b in BaseDimension::ALL {
            let e = self.exponent(b);
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            write!(f, "{}^{e}", b.symbol())?;
        }
        Ok(())
    }
}

/// Parses `Base ('^' int)?` terms joined by `*` and `/`, left to right.
/// A bare `1` denotes the dimensionless identity.
impl FromStr for Dimension {
    type Err = DimensionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |position: usize, message: String| DimensionParseError { position, message };
        let chars: Vec<(usize, char)> = s.char_indices().collect();
        let mut i = 0;
        let skip_ws = |i: &mut usize| {
            while *i < chars.len() && chars[*i].1.is_whitespace() {
                *i += 1;
            }
        };
        let pos = |i: usize| chars.get(i).map_or(s.len(), |c| c.0);

        let mut result = Dimension::one();
        let mut divide = false;
        loop {
            skip_ws(&mut i);
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            if start == i {
                return Err(err(pos(i), "expected a base dimension".into()));
            }
            let word: String = chars[start..i].iter().map(|c| c.1).collect();
            let mut term = if word == "1" {
                Dimension::one()
            } else {
                let b: BaseDimension = word
                    .parse()
                    .map_err(|e: DimensionParseError| err(pos(start), e.message))?;
                Dimension::base(b)
            };
            skip_ws(&mut i);
            if i < chars.len() && chars[i].1 == '^' {
                i += 1;
                skip_ws(&mut i);
                let num_start = i;
                if i < chars.len() && chars[i].1 == '-' {
                    i += 1;
                }
                while i < chars.len() && chars[i].1.is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[num_start..i].iter().map(|c| c.1).collect();
                let n: i64 = text
                    .parse()
                    .map_err(|_| err(pos(num_start), "expected an integer exponent".into()))?;
                term = term
                    .checked_pow(n)
                    .ok_or_else(|| err(pos(num_start), "exponent overflow".into()))?;
            }
            result = if divide { result / term } else { result * term };
            skip_ws(&mut i);
            match chars.get(i).map(|c| c.1) {
                None => return Ok(result),
                Some('*') => divide = false,
                Some('/') => divide = true,
                Some(c) => return Err(err(pos(i), format!("unexpected `{c}`"))),
            }
            i += 1;
        }
    }
}
