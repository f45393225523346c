//! Multiprecision real and complex kernel.
//!
//! Values are backed by MPFR floats through `rug`. Every value carries its own
//! precision; binary operations produce a result at the larger of the two
//! operand precisions. Error control is done with guard bits (see
//! [`working_precision`]) rather than interval arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

pub const MIN_PRECISION: u32 = 64;
pub const DEFAULT_PRECISION: u32 = 256;
/// Extra bits added on top of `log2(N)` when evaluating an N-factor product.
pub const GUARD_BITS: u32 = 32;

pub type BigInt = Integer;
pub type BigRational = Rational;

/// A validated precision in bits (at least [`MIN_PRECISION`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Precision(u32);

impl Precision {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_PRECISION {
            return Err(Error::Precision(bits));
        }
        Ok(Precision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Adds guard bits for an `n`-factor product: `ceil(log2 n) + 32`.
    pub fn with_guard(self, factors: u64) -> Precision {
        Precision(working_precision(self.0, factors))
    }

    pub fn plus(self, bits: u32) -> Precision {
        Precision(self.0 + bits)
    }

    /// Number of significant decimal digits carried at this precision.
    pub fn decimal_digits(self) -> usize {
        (f64::from(self.0) * std::f64::consts::LOG10_2).ceil() as usize + 1
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(DEFAULT_PRECISION)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

/// Working precision for a product of `factors` terms at target precision `target`.
pub fn working_precision(target: u32, factors: u64) -> u32 {
    let log = if factors <= 1 { 0 } else { 64 - (factors - 1).leading_zeros() };
    target + log + GUARD_BITS
}

/// Arbitrary-precision real number.
#[derive(Clone, Debug, PartialEq, PartialOrd)]
pub struct HPReal(Float);

impl HPReal {
    pub fn from_float(f: Float) -> Self {
        HPReal(f)
    }

    pub fn with_val<T>(prec: Precision, value: T) -> Self
    where
        Float: rug::Assign<T>,
    {
        HPReal(Float::with_val(prec.0, value))
    }

    pub fn zero(prec: Precision) -> Self {
        HPReal(Float::new(prec.0))
    }

    pub fn one(prec: Precision) -> Self {
        Self::with_val(prec, 1)
    }

    pub fn pi(prec: Precision) -> Self {
        HPReal(Float::with_val(prec.0, Constant::Pi))
    }

    pub fn from_f64(prec: Precision, v: f64) -> Self {
        Self::with_val(prec, v)
    }

    /// Parses a decimal string such as `"0.4643"` or `"4.643e-1"`.
    pub fn parse_decimal(s: &str, prec: Precision) -> Result<Self> {
        let parsed = Float::parse(s.trim()).map_err(|e| Error::Parse {
            position: 0,
            message: format!("bad decimal {s:?}: {e}"),
        })?;
        Ok(HPReal(Float::with_val(prec.0, parsed)))
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    pub fn precision(&self) -> Precision {
        Precision(self.0.prec().max(MIN_PRECISION))
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    pub fn abs(&self) -> HPReal {
        HPReal(self.0.clone().abs())
    }

    pub fn sqr(&self) -> HPReal {
        HPReal(self.0.clone().square())
    }

    pub fn round_to(&self, prec: Precision) -> HPReal {
        HPReal(Float::with_val(prec.0, &self.0))
    }

    pub fn mul_int(&self, k: &Integer) -> HPReal {
        HPReal(Float::with_val(self.prec(), &self.0 * k))
    }

    pub fn mul_rational(&self, r: &Rational) -> HPReal {
        HPReal(Float::with_val(self.prec(), &self.0 * r))
    }

    pub fn add_rational(&self, r: &Rational) -> HPReal {
        HPReal(Float::with_val(self.prec(), &self.0 + r))
    }

    /// `|self - other| / |other|`, or the absolute difference when `other` is zero.
    pub fn rel_diff(&self, other: &HPReal) -> HPReal {
        let p = self.prec().max(other.prec());
        let diff = Float::with_val(p, &self.0 - &other.0).abs();
        if other.0.is_zero() {
            HPReal(diff)
        } else {
            HPReal(diff / other.0.clone().abs())
        }
    }

    /// Natural log of `|self|` as an `f64`; `-inf` for zero.
    pub fn ln_abs_f64(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        Float::with_val(64.max(self.prec()), self.0.abs_ref()).ln().to_f64()
    }

    /// Decimal rendering with `digits` significant digits, in the exponent
    /// notation MPFR produces (parseable by [`HPReal::parse_decimal`]).
    pub fn to_decimal(&self, digits: usize) -> String {
        self.0.to_string_radix(10, Some(digits.max(1)))
    }

    /// Decimal rendering with all digits carried by the precision.
    pub fn to_decimal_full(&self) -> String {
        self.to_decimal(self.precision().decimal_digits())
    }

    pub fn max(&self, other: &HPReal) -> HPReal {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }
}

impl fmt::Display for HPReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(20);
        write!(f, "{}", self.to_decimal(digits))
    }
}

macro_rules! real_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a> $trait<&'a HPReal> for &'a HPReal {
            type Output = HPReal;
            fn $method(self, rhs: &'a HPReal) -> HPReal {
                let p = self.prec().max(rhs.prec());
                HPReal(Float::with_val(p, &self.0 $op &rhs.0))
            }
        }
        impl $trait<HPReal> for HPReal {
            type Output = HPReal;
            fn $method(self, rhs: HPReal) -> HPReal {
                (&self).$method(&rhs)
            }
        }
        impl $trait<i32> for &HPReal {
            type Output = HPReal;
            fn $method(self, rhs: i32) -> HPReal {
                HPReal(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
    };
}

real_binop!(Add, add, +);
real_binop!(Sub, sub, -);
real_binop!(Mul, mul, *);
real_binop!(Div, div, /);

impl Neg for &HPReal {
    type Output = HPReal;
    fn neg(self) -> HPReal {
        HPReal(Float::with_val(self.prec(), -&self.0))
    }
}

impl Neg for HPReal {
    type Output = HPReal;
    fn neg(self) -> HPReal {
        HPReal(-self.0)
    }
}

impl PartialEq<f64> for HPReal {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for HPReal {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

/// The elementary functions exposed by [`eval_elementary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Elementary {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Atan2,
    Pi,
}

impl Elementary {
    pub fn arity(self) -> usize {
        match self {
            Elementary::Pi => 0,
            Elementary::Atan2 => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Elementary::Exp => "exp",
            Elementary::Log => "log",
            Elementary::Sqrt => "sqrt",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Sinh => "sinh",
            Elementary::Cosh => "cosh",
            Elementary::Atan2 => "atan2",
            Elementary::Pi => "pi",
        }
    }
}

/// Evaluates an elementary function at the requested precision.
///
/// MPFR rounds these correctly, which is stronger than the faithful
/// `2^(2-precision)` relative bound the callers rely on.
pub fn eval_elementary(f: Elementary, args: &[HPReal], prec: u32) -> Result<HPReal> {
    let prec = Precision::new(prec)?;
    if args.len() != f.arity() {
        return Err(Error::InvalidArgument(format!(
            "{} takes {} argument(s), got {}",
            f.name(),
            f.arity(),
            args.len()
        )));
    }
    let p = prec.0;
    let arg = |i: usize| Float::with_val(p, &args[i].0);
    if let Some(bad) = args.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain {
            function: f.name(),
            detail: format!("non-finite argument {}", bad.0),
        });
    }
    let out = match f {
        Elementary::Pi => Float::with_val(p, Constant::Pi),
        Elementary::Exp => arg(0).exp(),
        Elementary::Log => {
            let x = arg(0);
            if x <= 0 {
                return Err(Error::Domain { function: "log", detail: format!("{x} <= 0") });
            }
            x.ln()
        }
        Elementary::Sqrt => {
            let x = arg(0);
            if x < 0 {
                return Err(Error::Domain { function: "sqrt", detail: format!("{x} < 0") });
            }
            x.sqrt()
        }
        Elementary::Sin => arg(0).sin(),
        Elementary::Cos => arg(0).cos(),
        Elementary::Sinh => arg(0).sinh(),
        Elementary::Cosh => arg(0).cosh(),
        Elementary::Atan2 => {
            let (y, x) = (arg(0), arg(1));
            if y.is_zero() && x.is_zero() {
                return Err(Error::Domain { function: "atan2", detail: "atan2(0, 0)".into() });
            }
            y.atan2(&x)
        }
    };
    if !out.is_finite() {
        return Err(Error::Domain { function: f.name(), detail: "result overflows".into() });
    }
    Ok(HPReal(out))
}

/// Correctly rounded conversion of an exact rational.
pub fn rational_to_hp(x: &Rational, prec: Precision) -> HPReal {
    HPReal(Float::with_val(prec.0, x))
}

/// Arbitrary-precision complex number; both parts share one precision.
#[derive(Clone, Debug, PartialEq)]
pub struct HPComplex {
    pub re: HPReal,
    pub im: HPReal,
}

impl HPComplex {
    pub fn new(re: HPReal, im: HPReal) -> Self {
        let p = re.prec().max(im.prec());
        HPComplex { re: HPReal(Float::with_val(p, re.0)), im: HPReal(Float::with_val(p, im.0)) }
    }

    pub fn from_floats(re: Float, im: Float) -> Self {
        Self::new(HPReal(re), HPReal(im))
    }

    pub fn from_real(re: HPReal) -> Self {
        let im = HPReal::zero(re.precision());
        HPComplex { re, im }
    }

    pub fn zero(prec: Precision) -> Self {
        HPComplex { re: HPReal::zero(prec), im: HPReal::zero(prec) }
    }

    pub fn one(prec: Precision) -> Self {
        HPComplex { re: HPReal::one(prec), im: HPReal::zero(prec) }
    }

    pub fn i(prec: Precision) -> Self {
        HPComplex { re: HPReal::zero(prec), im: HPReal::one(prec) }
    }

    pub fn from_f64(prec: Precision, re: f64, im: f64) -> Self {
        HPComplex { re: HPReal::from_f64(prec, re), im: HPReal::from_f64(prec, im) }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn precision(&self) -> Precision {
        self.re.precision()
    }

    pub fn round_to(&self, prec: Precision) -> HPComplex {
        HPComplex { re: self.re.round_to(prec), im: self.im.round_to(prec) }
    }

    pub fn conj(&self) -> HPComplex {
        HPComplex { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> HPReal {
        let p = self.prec();
        let (a, b) = (&self.re.0, &self.im.0);
        HPReal(Float::with_val(p, a * a + b * b))
    }

    pub fn abs(&self) -> HPReal {
        HPReal(Float::with_val(self.prec(), self.re.0.hypot_ref(&self.im.0)))
    }

    pub fn arg(&self) -> HPReal {
        HPReal(Float::with_val(self.prec(), self.im.0.atan2_ref(&self.re.0)))
    }

    pub fn scale(&self, s: &HPReal) -> HPComplex {
        HPComplex { re: &self.re * s, im: &self.im * s }
    }

    pub fn recip(&self) -> Result<HPComplex> {
        let n = self.norm_sqr();
        if n.is_zero() {
            return Err(Error::Domain { function: "recip", detail: "division by zero".into() });
        }
        Ok(HPComplex { re: &self.re / &n, im: -(&self.im / &n) })
    }

    pub fn checked_div(&self, rhs: &HPComplex) -> Result<HPComplex> {
        Ok(self * &rhs.recip()?)
    }

    pub fn sqr(&self) -> HPComplex {
        self * self
    }

    /// `e^self`.
    pub fn exp(&self) -> HPComplex {
        let p = self.prec();
        let modulus = Float::with_val(p, self.re.0.exp_ref());
        let (s, c) = Float::with_val(p, &self.im.0).sin_cos(Float::new(p));
        HPComplex::from_floats(c * &modulus, s * &modulus)
    }

    pub fn to_decimal(&self, digits: usize) -> String {
        let sign = if self.im.0.is_sign_negative() { '-' } else { '+' };
        format!("{} {} {}i", self.re.to_decimal(digits), sign, self.im.abs().to_decimal(digits))
    }
}

impl fmt::Display for HPComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(f.precision().unwrap_or(20)))
    }
}

impl<'a> Add<&'a HPComplex> for &'a HPComplex {
    type Output = HPComplex;
    fn add(self, rhs: &'a HPComplex) -> HPComplex {
        HPComplex { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl<'a> Sub<&'a HPComplex> for &'a HPComplex {
    type Output = HPComplex;
    fn sub(self, rhs: &'a HPComplex) -> HPComplex {
        HPComplex { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl<'a> Mul<&'a HPComplex> for &'a HPComplex {
    type Output = HPComplex;
    fn mul(self, rhs: &'a HPComplex) -> HPComplex {
        let p = self.prec().max(rhs.prec());
        let (a, b, c, d) = (&self.re.0, &self.im.0, &rhs.re.0, &rhs.im.0);
        HPComplex {
            re: HPReal(Float::with_val(p, a * c - b * d)),
            im: HPReal(Float::with_val(p, a * d + b * c)),
        }
    }
}

impl Neg for &HPComplex {
    type Output = HPComplex;
    fn neg(self) -> HPComplex {
        HPComplex { re: -&self.re, im: -&self.im }
    }
}

/// `e^{2 pi i t}`; the real part of `t` is reduced modulo 1 exactly before
/// the trigonometric evaluation.
pub fn complex_exp_2pi_i(t: &HPComplex, prec: u32) -> Result<HPComplex> {
    let prec = Precision::new(prec)?;
    let p = prec.0;
    let two_pi = Float::with_val(p, Constant::Pi) * 2u32;
    let mut phase = Float::with_val(p + 8, &t.re.0);
    phase -= Float::with_val(p + 8, phase.floor_ref());
    let angle = Float::with_val(p, &phase * &two_pi);
    let modulus = Float::with_val(p, -Float::with_val(p, &t.im.0 * &two_pi)).exp();
    let (s, c) = angle.sin_cos(Float::new(p));
    Ok(HPComplex::from_floats(c * &modulus, s * &modulus))
}

/// `e^{2 pi i (phase + i decay)}` with an exact rational phase, i.e.
/// `e^{-2 pi decay} e^{2 pi i phase}`.
pub fn exp_2pi_i_rational(phase: &Rational, decay: &HPReal, prec: Precision) -> HPComplex {
    let p = prec.0;
    let reduced = frac_part(phase);
    let two_pi = Float::with_val(p, Constant::Pi) * 2u32;
    let angle = Float::with_val(p, &two_pi * &reduced);
    let modulus = Float::with_val(p, -Float::with_val(p, &decay.0 * &two_pi)).exp();
    let (s, c) = angle.sin_cos(Float::new(p));
    HPComplex::from_floats(c * &modulus, s * &modulus)
}

/// `{r}`: the representative of `r` modulo 1 in `[0, 1)`.
pub fn frac_part(r: &Rational) -> Rational {
    let floor = Integer::from(r.floor_ref());
    Rational::from(r - floor)
}

/// `sqrt(n)` for a non-negative integer at the given precision.
pub fn sqrt_int(n: &Integer, prec: Precision) -> HPReal {
    HPReal(Float::with_val(prec.0, n).sqrt())
}
