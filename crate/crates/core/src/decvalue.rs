//! Exact decimal values.
//!
//! A [`DecValue`] is a signed significand paired with a power of ten. The
//! value reads with the decimal point after the first significand digit, so
//! `(314159, 0)` denotes `3.14159` and `(1, 1)` denotes `10`. Trailing zeros
//! of the significand are always stripped and zero is stored as `(0, 0)`,
//! which makes the representation unique: two values are numerically equal
//! exactly when their fields are equal.
//!
//! Arithmetic is exact up to a final rounding step controlled by a
//! [`PrecisionContext`] (round-half-even to a number of significant digits).
//! Division goes through an exact ratio so that only one rounding ever
//! happens per operation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number used for unit scales, offsets and exchange rates.
pub type Rational = BigRational;

/// Smallest representable (lead-digit) exponent.
pub const EXPONENT_MIN: i64 = i32::MIN as i64;
/// Largest representable (lead-digit) exponent.
pub const EXPONENT_MAX: i64 = i32::MAX as i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecError {
    #[error("exponent outside the representable range [{EXPONENT_MIN}, {EXPONENT_MAX}]")]
    ExponentOverflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid number at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("precision must be at least one significant digit")]
    InvalidPrecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Rounding {
    #[default]
    HalfEven,
}

/// Number of significant digits kept after each operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrecisionContext {
    significant_digits: u32,
    rounding: Rounding,
}

impl PrecisionContext {
    pub const DEFAULT_DIGITS: u32 = 34;

    pub fn new(significant_digits: u32) -> Result<Self, DecError> {
        if significant_digits == 0 {
            return Err(DecError::InvalidPrecision);
        }
        Ok(Self {
            significant_digits,
            rounding: Rounding::HalfEven,
        })
    }

    pub fn significant_digits(&self) -> u32 {
        self.significant_digits
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            significant_digits: Self::DEFAULT_DIGITS,
            rounding: Rounding::HalfEven,
        }
    }
}

/// An exact decimal number in normal form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DecValue {
    significand: BigInt,
    exponent: i32,
}

fn pow10(k: u64) -> BigInt {
    static CACHE: OnceLock<Vec<BigInt>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let mut v = Vec::with_capacity(160);
        let mut p = BigInt::one();
        for _ in 0..160 {
            v.push(p.clone());
            p *= 10u32;
        }
        v
    });
    match cache.get(k as usize) {
        Some(p) => p.clone(),
        None => num_traits::pow(BigInt::from(10u32), k as usize),
    }
}

/// Number of decimal digits of `|n|`; zero has one digit.
fn digit_count(n: &BigInt) -> u64 {
    let bits = n.bits();
    if bits <= 1 {
        return 1;
    }
    // 2^(bits-1) <= |n| < 2^bits, so the count is one of two candidates.
    let low = ((bits - 1) as f64 * std::f64::consts::LOG10_2).floor() as u64 + 1;
    if n.magnitude() >= pow10(low).magnitude() {
        low + 1
    } else {
        low
    }
}

fn strip_trailing_zeros(mut coeff: BigInt) -> (BigInt, i64) {
    let mut stripped = 0i64;
    let ten_eight = BigInt::from(100_000_000u32);
    loop {
        let (q, r) = coeff.div_rem(&ten_eight);
        if !r.is_zero() || q.is_zero() {
            break;
        }
        coeff = q;
        stripped += 8;
    }
    let ten = BigInt::from(10u32);
    loop {
        let (q, r) = coeff.div_rem(&ten);
        if !r.is_zero() || q.is_zero() {
            break;
        }
        coeff = q;
        stripped += 1;
    }
    (coeff, stripped)
}

/// Rounds `q + r/d` (with `0 <= |r| < d`, `r` carrying the sign of the
/// quotient) to an integer, half to even.
fn round_half_even(q: BigInt, r: &BigInt, d: &BigInt) -> BigInt {
    if r.is_zero() {
        return q;
    }
    let twice = r.magnitude() * 2u32;
    let cmp = twice.cmp(d.magnitude());
    let up = match cmp {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => q.is_odd(),
    };
    if !up {
        return q;
    }
    if r.is_negative() {
        q - 1
    } else {
        q + 1
    }
}

impl DecValue {
    pub fn zero() -> Self {
        Self {
            significand: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            significand: BigInt::one(),
            exponent: 0,
        }
    }

    /// Builds the value `significand × 10^exponent` where the significand is
    /// read with the decimal point after its first digit.
    pub fn make_float(significand: impl Into<BigInt>, exponent: i64) -> Result<Self, DecError> {
        let significand = significand.into();
        if significand.is_zero() {
            return Ok(Self::zero());
        }
        let scale = exponent - digit_count(&significand) as i64 + 1;
        Self::from_scaled(significand, scale)
    }

    /// Exact value `coeff × 10^scale`.
    pub(crate) fn from_scaled(coeff: BigInt, scale: i64) -> Result<Self, DecError> {
        if coeff.is_zero() {
            return Ok(Self::zero());
        }
        let (coeff, stripped) = strip_trailing_zeros(coeff);
        let lead = scale
            .checked_add(stripped)
            .and_then(|s| s.checked_add(digit_count(&coeff) as i64 - 1))
            .ok_or(DecError::ExponentOverflow)?;
        if !(EXPONENT_MIN..=EXPONENT_MAX).contains(&lead) {
            return Err(DecError::ExponentOverflow);
        }
        Ok(Self {
            significand: coeff,
            exponent: lead as i32,
        })
    }

    /// `coeff × 10^scale` rounded to the context precision.
    fn rounded_scaled(coeff: BigInt, scale: i64, ctx: &PrecisionContext) -> Result<Self, DecError> {
        let digits = digit_count(&coeff);
        let p = ctx.significant_digits as u64;
        if digits <= p {
            return Self::from_scaled(coeff, scale);
        }
        let drop = digits - p;
        let divisor = pow10(drop);
        let (q, r) = coeff.div_rem(&divisor);
        let q = round_half_even(q, &r, &divisor);
        Self::from_scaled(q, scale + drop as i64)
    }

    /// `num / den × 10^scale` rounded to the context precision.
    fn rounded_ratio(num: BigInt, den: BigInt, scale: i64, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if den.is_zero() {
            return Err(DecError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        let (num, den) = if den.is_negative() { (-num, -den) } else { (num, den) };
        let p = ctx.significant_digits as i64;
        let e = digit_count(&num) as i64 - digit_count(&den) as i64;
        let limit = pow10(p as u64);
        let divide = |k: i64| -> (BigInt, BigInt, BigInt) {
            if k >= 0 {
                let (q, r) = (&num * pow10(k as u64)).div_rem(&den);
                (q, r, den.clone())
            } else {
                let d = &den * pow10((-k) as u64);
                let (q, r) = num.div_rem(&d);
                (q, r, d)
            }
        };
        // num/den lies in (10^(e-1), 10^(e+1)); scaling by 10^(p-e) leaves a
        // quotient of p or p+1 digits.
        let mut k = p - e;
        let (mut q, mut r, mut d) = divide(k);
        if q.magnitude() >= limit.magnitude() {
            k -= 1;
            (q, r, d) = divide(k);
        }
        let q = round_half_even(q, &r, &d);
        Self::from_scaled(q, scale - k)
    }

    /// The significand as stored (no trailing zeros).
    pub fn significand(&self) -> &BigInt {
        &self.significand
    }

    /// Power of ten of the leading digit.
    pub fn exponent(&self) -> i64 {
        self.exponent as i64
    }

    /// Power of ten of the last significand digit.
    pub(crate) fn scale(&self) -> i64 {
        self.exponent as i64 - digit_count(&self.significand) as i64 + 1
    }

    /// Number of significant digits in the stored significand.
    pub fn digits(&self) -> u64 {
        digit_count(&self.significand)
    }

    pub fn is_zero(&self) -> bool {
        self.significand.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.significand.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.significand.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            significand: self.significand.abs(),
            exponent: self.exponent,
        }
    }

    /// Rounds to the context precision.
    pub fn round(&self, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if self.digits() <= ctx.significant_digits as u64 {
            return Ok(self.clone());
        }
        Self::rounded_scaled(self.significand.clone(), self.scale(), ctx)
    }

    pub fn add(&self, other: &Self, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if other.is_zero() {
            return self.round(ctx);
        }
        if self.is_zero() {
            return other.round(ctx);
        }
        let (big, small) = if self.exponent >= other.exponent {
            (self, other)
        } else {
            (other, self)
        };
        let p = ctx.significant_digits as i64;
        // Every rounding boundary of the result and every digit of `big`
        // sits on the 10^guard grid. An addend smaller than 10^guard can only
        // push the sum strictly inside one grid cell, so a single sticky
        // digit below the grid rounds identically and keeps the shift small.
        let guard = big.scale().min(big.exponent() - p - 1);
        let (small_coeff, small_scale) = if small.exponent() < guard {
            (BigInt::from(small.signum()), guard - 1)
        } else {
            (small.significand.clone(), small.scale())
        };
        let big_scale = big.scale();
        let base = big_scale.min(small_scale);
        let sum =
            &big.significand * pow10((big_scale - base) as u64) + small_coeff * pow10((small_scale - base) as u64);
        Self::rounded_scaled(sum, base, ctx)
    }

    pub fn sub(&self, other: &Self, ctx: &PrecisionContext) -> Result<Self, DecError> {
        self.add(&-other, ctx)
    }

    pub fn mul(&self, other: &Self, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let coeff = &self.significand * &other.significand;
        let scale = self
            .scale()
            .checked_add(other.scale())
            .ok_or(DecError::ExponentOverflow)?;
        Self::rounded_scaled(coeff, scale, ctx)
    }

    pub fn div(&self, other: &Self, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if other.is_zero() {
            return Err(DecError::DivisionByZero);
        }
        let scale = self
            .scale()
            .checked_sub(other.scale())
            .ok_or(DecError::ExponentOverflow)?;
        Self::rounded_ratio(self.significand.clone(), other.significand.clone(), scale, ctx)
    }

    /// Integer power with a single final rounding. The exact intermediate
    /// grows linearly with `n`, so callers should keep `n` small.
    pub fn powi(&self, n: i32, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if n == 0 {
            return Ok(Self::one());
        }
        if self.is_zero() {
            return if n < 0 {
                Err(DecError::DivisionByZero)
            } else {
                Ok(Self::zero())
            };
        }
        let m = n.unsigned_abs();
        let coeff = num_traits::pow(self.significand.clone(), m as usize);
        let scale = self.scale().checked_mul(m as i64).ok_or(DecError::ExponentOverflow)?;
        if n > 0 {
            Self::rounded_scaled(coeff, scale, ctx)
        } else {
            Self::rounded_ratio(BigInt::one(), coeff, -scale, ctx)
        }
    }

    /// Multiplies by an exact rational with one rounding.
    pub fn mul_rational(&self, factor: &Rational, ctx: &PrecisionContext) -> Result<Self, DecError> {
        if self.is_zero() || factor.is_zero() {
            return Ok(Self::zero());
        }
        Self::rounded_ratio(
            &self.significand * factor.numer(),
            factor.denom().clone(),
            self.scale(),
            ctx,
        )
    }

    pub fn to_rational(&self) -> Rational {
        let scale = self.scale();
        if scale >= 0 {
            Rational::from_integer(&self.significand * pow10(scale as u64))
        } else {
            Rational::new(self.significand.clone(), pow10((-scale) as u64))
        }
    }

    pub fn from_rational(r: &Rational, ctx: &PrecisionContext) -> Result<Self, DecError> {
        Self::rounded_ratio(r.numer().clone(), r.denom().clone(), 0, ctx)
    }

    /// The exact value if `r` has a terminating decimal expansion.
    pub fn from_rational_exact(r: &Rational) -> Option<Self> {
        let mut den = r.denom().clone();
        let mut twos = 0i64;
        let mut fives = 0i64;
        let two = BigInt::from(2u32);
        let five = BigInt::from(5u32);
        while den.is_even() {
            den /= &two;
            twos += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            fives += 1;
        }
        if !den.is_one() {
            return None;
        }
        let k = twos.max(fives);
        // num/den = num * 2^(k-twos) * 5^(k-fives) / 10^k
        let num = r.numer() * num_traits::pow(two, (k - twos) as usize) * num_traits::pow(five, (k - fives) as usize);
        Self::from_scaled(num, -k).ok()
    }

    /// One unit in the last place of this value at the context precision.
    /// Zero has no last place and yields zero.
    pub fn ulp(&self, ctx: &PrecisionContext) -> Rational {
        if self.is_zero() {
            return Rational::zero();
        }
        let k = self.exponent() - ctx.significant_digits as i64 + 1;
        if k >= 0 {
            Rational::from_integer(pow10(k as u64))
        } else {
            Rational::new(BigInt::one(), pow10((-k) as u64))
        }
    }

    /// Parses the literal grammar `['-'] digits ['.' digits] [('e'|'E') ['-'] digits]`.
    pub fn parse(text: &str) -> Result<Self, DecError> {
        let bytes = text.as_bytes();
        let err = |position: usize, message: &str| DecError::Parse {
            position,
            message: message.to_string(),
        };
        let mut i = 0;
        let negative = bytes.first() == Some(&b'-');
        if negative {
            i += 1;
        }
        let int_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == int_start {
            return Err(err(i, "expected a digit"));
        }
        let mut digits = text[int_start..i].to_string();
        let mut frac_len = 0i64;
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            let frac_start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i == frac_start {
                return Err(err(i, "expected a digit after the decimal point"));
            }
            digits.push_str(&text[frac_start..i]);
            frac_len = (i - frac_start) as i64;
        }
        let mut exp = 0i64;
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            i += 1;
            let exp_negative = i < bytes.len() && bytes[i] == b'-';
            if exp_negative {
                i += 1;
            }
            let exp_start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i == exp_start {
                return Err(err(i, "expected exponent digits"));
            }
            exp = text[exp_start..i]
                .parse::<i64>()
                .map_err(|_| DecError::ExponentOverflow)?;
            if exp_negative {
                exp = -exp;
            }
        }
        if i != bytes.len() {
            return Err(err(i, "unexpected character"));
        }
        let mut coeff: BigInt = digits.parse().expect("ascii digits");
        if negative {
            coeff = -coeff;
        }
        let scale = exp.checked_sub(frac_len).ok_or(DecError::ExponentOverflow)?;
        Self::from_scaled(coeff, scale)
    }
}

impl std::ops::Neg for &DecValue {
    type Output = DecValue;

    fn neg(self) -> DecValue {
        DecValue {
            significand: -&self.significand,
            exponent: self.exponent,
        }
    }
}

impl std::ops::Neg for DecValue {
    type Output = DecValue;

    fn neg(self) -> DecValue {
        -&self
    }
}

impl Ord for DecValue {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let magnitude = match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => {
                let (a, b) = (self.scale(), other.scale());
                let base = a.min(b);
                let lhs = self.significand.magnitude() * pow10((a - base) as u64).magnitude();
                let rhs = other.significand.magnitude() * pow10((b - base) as u64).magnitude();
                lhs.cmp(&rhs)
            }
            ord => ord,
        };
        if sa < 0 {
            magnitude.reverse()
        } else {
            magnitude
        }
    }
}

impl PartialOrd for DecValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<i64> for DecValue {
    fn from(v: i64) -> Self {
        Self::from_scaled(BigInt::from(v), 0).expect("small integers are representable")
    }
}

impl FromStr for DecValue {
    type Err = DecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Shortest form that parses back to the same value: positional notation for
/// leading exponents in `[-7, 20]`, scientific otherwise.
impl fmt::Display for DecValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let sign = if self.is_negative() { "-" } else { "" };
        let digits = self.significand.magnitude().to_string();
        let n = digits.len() as i64;
        let e = self.exponent();
        if (-7..=20).contains(&e) {
            if e < 0 {
                let zeros = "0".repeat((-e - 1) as usize);
                write!(f, "{sign}0.{zeros}{digits}")
            } else if e + 1 >= n {
                let zeros = "0".repeat((e + 1 - n) as usize);
                write!(f, "{sign}{digits}{zeros}")
            } else {
                let (int, frac) = digits.split_at((e + 1) as usize);
                write!(f, "{sign}{int}.{frac}")
            }
        } else {
            let (lead, rest) = digits.split_at(1);
            if rest.is_empty() {
                write!(f, "{sign}{lead}e{e}")
            } else {
                write!(f, "{sign}{lead}.{rest}e{e}")
            }
        }
    }
}

impl fmt::Debug for DecValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DecValue({self})")
    }
}

/// Parses an exact rational written as `p/q`, an integer, or a decimal literal.
pub fn parse_rational(text: &str) -> Result<Rational, DecError> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let parse_int = |s: &str, offset: usize| -> Result<BigInt, DecError> {
            let s = s.trim();
            let body = s.strip_prefix('-').unwrap_or(s);
            if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
                return Err(DecError::Parse {
                    position: offset,
                    message: format!("expected an integer, found `{s}`"),
                });
            }
            Ok(s.parse().expect("validated integer"))
        };
        let n = parse_int(num, 0)?;
        let d = parse_int(den, num.len() + 1)?;
        if d.is_zero() {
            return Err(DecError::DivisionByZero);
        }
        return Ok(Rational::new(n, d));
    }
    let v = DecValue::parse(text)?;
    let scale = v.scale();
    // Refuse to materialise astronomically large powers of ten.
    if scale.abs() > 100_000 {
        return Err(DecError::ExponentOverflow);
    }
    Ok(v.to_rational())
}

/// Renders a rational as `p/q`, or just `p` for integers.
pub fn render_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
