//! Exact arithmetic in `K = Q(sqrt d)` for `d = a^2 - 4`, where the totally
//! positive fundamental unit `eps = (a + sqrt d)/2` has a purely periodic minus
//! continued fraction of length one.
//!
//! Residues modulo a principal ideal `(nu)` are represented in the integral
//! basis `(1, omega)`, `omega = (1 + sqrt d)/2`, reduced against the Hermite
//! normal form of the ideal lattice.

use std::fmt;

use rug::ops::RemRounding;
use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::ideal_expr::parse_ideal_expr;
use crate::numerics::{HPReal, Precision};

/// Default bound for the search in [`unit_order`].
pub const DEFAULT_ORDER_BOUND: u64 = 1_000_000;

/// `p + q sqrt(d)` with exact rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    d: i64,
    pub p: Rational,
    pub q: Rational,
}

impl FieldElement {
    pub fn new(d: i64, p: impl Into<Rational>, q: impl Into<Rational>) -> Self {
        FieldElement { d, p: p.into(), q: q.into() }
    }

    pub fn rational(d: i64, p: impl Into<Rational>) -> Self {
        Self::new(d, p, 0)
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    pub fn is_rational(&self) -> bool {
        self.q == 0
    }

    /// Galois conjugate `p - q sqrt(d)`.
    pub fn conjugate(&self) -> FieldElement {
        FieldElement { d: self.d, p: self.p.clone(), q: Rational::from(-&self.q) }
    }

    pub fn norm(&self) -> Rational {
        let pp = self.p.clone().square();
        let qq = self.q.clone().square() * self.d;
        pp - qq
    }

    pub fn trace(&self) -> Rational {
        Rational::from(&self.p * 2u32)
    }

    pub fn norm_trace(&self) -> (Rational, Rational) {
        (self.norm(), self.trace())
    }

    fn check_same_field(&self, other: &FieldElement) {
        assert_eq!(self.d, other.d, "elements of different fields");
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        self.check_same_field(other);
        FieldElement {
            d: self.d,
            p: (&self.p + &other.p).complete(),
            q: (&self.q + &other.q).complete(),
        }
    }

    pub fn sub(&self, other: &FieldElement) -> FieldElement {
        self.check_same_field(other);
        FieldElement {
            d: self.d,
            p: (&self.p - &other.p).complete(),
            q: (&self.q - &other.q).complete(),
        }
    }

    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        self.check_same_field(other);
        let p = (&self.p * &other.p).complete() + (&self.q * &other.q).complete() * self.d;
        let q = (&self.p * &other.q).complete() + (&self.q * &other.p).complete();
        FieldElement { d: self.d, p, q }
    }

    pub fn scale(&self, r: &Rational) -> FieldElement {
        FieldElement { d: self.d, p: (&self.p * r).complete(), q: (&self.q * r).complete() }
    }

    pub fn inverse(&self) -> Result<FieldElement> {
        let n = self.norm();
        if n == 0 {
            return Err(Error::Domain { function: "inverse", detail: "zero element".into() });
        }
        Ok(self.conjugate().scale(&n.recip()))
    }

    pub fn pow(&self, e: i64) -> Result<FieldElement> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut acc = FieldElement::rational(self.d, 1);
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    /// Coordinates `(A, B)` with `self = A + B omega`, when integral.
    ///
    /// `p + q sqrt(d) = (p - q) + 2q omega`, so the element is integral iff
    /// `2q` and `p - q` are integers (equivalently `2p, 2q` integers of equal parity).
    pub fn omega_coordinates(&self) -> Option<(Integer, Integer)> {
        let b = Rational::from(&self.q * 2u32);
        let a = (&self.p - &self.q).complete();
        if b.denom() == &1 && a.denom() == &1 {
            Some((a.numer().clone(), b.numer().clone()))
        } else {
            None
        }
    }

    pub fn is_integral(&self) -> bool {
        self.omega_coordinates().is_some()
    }

    pub fn to_hp(&self, prec: Precision) -> HPReal {
        let root = crate::numerics::sqrt_int(&Integer::from(self.d), prec.plus(8));
        root.mul_rational(&self.q).add_rational(&self.p).round_to(prec)
    }

    /// Ideal-expression rendering, e.g. `4-1*sqrt(5)` or `(3+1*sqrt(5))/2`.
    pub fn to_expr(&self) -> String {
        if self.q == 0 {
            return self.p.to_string();
        }
        let half = self.p.denom() == &2 || self.q.denom() == &2;
        let (p, q) = if half {
            (Rational::from(&self.p * 2u32), Rational::from(&self.q * 2u32))
        } else {
            (self.p.clone(), self.q.clone())
        };
        let sign = if q < 0 { '-' } else { '+' };
        let body = format!("{}{}{}*sqrt({})", p, sign, q.abs(), self.d);
        if half {
            format!("({body})/2")
        } else {
            body
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_expr())
    }
}

fn is_square_free(n: i64) -> bool {
    let mut k: i64 = 2;
    while k * k <= n {
        if n % (k * k) == 0 {
            return false;
        }
        k += 1;
    }
    true
}

/// `K = Q(sqrt d)` with `d = a^2 - 4` square-free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LengthOneField {
    a: i64,
    d: i64,
}

/// Builds the field with minus continued fraction digit `a`.
pub fn make_field(a: i64) -> Result<LengthOneField> {
    if a < 3 {
        return Err(Error::DigitTooSmall(a));
    }
    if a % 2 == 0 {
        return Err(Error::EvenDigit(a));
    }
    let d = a
        .checked_mul(a)
        .and_then(|s| s.checked_sub(4))
        .ok_or_else(|| Error::InvalidArgument(format!("a = {a} is too large")))?;
    if !is_square_free(d) {
        return Err(Error::NotSquareFree { a, value: d });
    }
    Ok(LengthOneField { a, d })
}

impl LengthOneField {
    /// Recovers the field from `d`, which must be of the form `a^2 - 4`.
    pub fn from_d(d: i64) -> Result<LengthOneField> {
        let target = Integer::from(d) + 4i32;
        if target <= 0 {
            return Err(Error::InvalidArgument(format!("d = {d} must be positive")));
        }
        let (root, rem) = target.clone().sqrt_rem(Integer::new());
        if rem != 0 {
            return Err(Error::InvalidArgument(format!(
                "d = {d} is not of the form a^2 - 4 (minus continued fraction of length one)"
            )));
        }
        make_field(root.to_i64().expect("root fits"))
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    /// `eps = (a + sqrt d)/2`.
    pub fn epsilon(&self) -> FieldElement {
        FieldElement::new(self.d, Rational::from((self.a, 2)), Rational::from((1, 2)))
    }

    pub fn epsilon_conjugate(&self) -> FieldElement {
        self.epsilon().conjugate()
    }

    /// `omega = (1 + sqrt d)/2`.
    pub fn omega(&self) -> FieldElement {
        FieldElement::new(self.d, Rational::from((1, 2)), Rational::from((1, 2)))
    }

    pub fn element(&self, p: impl Into<Rational>, q: impl Into<Rational>) -> FieldElement {
        FieldElement::new(self.d, p, q)
    }

    pub fn from_omega(&self, a: &Integer, b: &Integer) -> FieldElement {
        // a + b (1 + sqrt d)/2
        let p = Rational::from(a) + Rational::from((b.clone(), 2));
        FieldElement::new(self.d, p, Rational::from((b.clone(), 2)))
    }

    pub fn sqrt_d(&self, prec: Precision) -> HPReal {
        crate::numerics::sqrt_int(&Integer::from(self.d), prec)
    }

    pub fn epsilon_hp(&self, prec: Precision) -> HPReal {
        let s = self.sqrt_d(prec.plus(2));
        (&(&s + self.a as i32) / 2).round_to(prec)
    }

    /// Parses an ideal expression and checks its radicand against `d`.
    pub fn parse_element(&self, src: &str) -> Result<FieldElement> {
        let e = parse_ideal_expr(src)?;
        if let Some(r) = &e.radicand {
            if *r != self.d {
                return Err(Error::Parse {
                    position: src.find("sqrt").map(|i| i + 6).unwrap_or(1),
                    message: format!("sqrt argument {r} does not match the field discriminant d = {}", self.d),
                });
            }
        }
        Ok(FieldElement::new(self.d, e.p, e.q))
    }

    /// `(d / p)` via the Kronecker symbol, which extends the Jacobi symbol to `p = 2`.
    pub fn kronecker(&self, p: u64) -> i32 {
        Integer::from(self.d).kronecker(&Integer::from(p))
    }
}

pub fn conjugate(x: &FieldElement) -> FieldElement {
    x.conjugate()
}

pub fn norm_trace(x: &FieldElement) -> (Rational, Rational) {
    x.norm_trace()
}

/// Integral principal ideal `(nu)` that is neither zero nor the unit ideal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrincipalConductor {
    nu: FieldElement,
    norm_abs: Integer,
}

impl PrincipalConductor {
    pub fn new(nu: FieldElement) -> Result<Self> {
        if nu.is_zero() {
            return Err(Error::ZeroConductor);
        }
        if !nu.is_integral() {
            return Err(Error::NonIntegral(nu.to_expr()));
        }
        let n = nu.norm();
        let norm_abs = n.numer().clone().abs();
        if norm_abs == 1 {
            return Err(Error::UnitConductor(nu.to_expr()));
        }
        Ok(PrincipalConductor { nu, norm_abs })
    }

    pub fn rational(field: &LengthOneField, m: i64) -> Result<Self> {
        Self::new(FieldElement::rational(field.d, m))
    }

    pub fn parse(field: &LengthOneField, src: &str) -> Result<Self> {
        Self::new(field.parse_element(src)?)
    }

    pub fn nu(&self) -> &FieldElement {
        &self.nu
    }

    /// `|N(nu)|`, the index of `(nu)` in `O_K`.
    pub fn norm_abs(&self) -> &Integer {
        &self.norm_abs
    }

    /// `Some(m)` when `nu = m` is a rational integer.
    pub fn as_rational_integer(&self) -> Option<Integer> {
        if self.nu.is_rational() && self.nu.p.denom() == &1 {
            Some(self.nu.p.numer().clone().abs())
        } else {
            None
        }
    }
}

impl fmt::Display for PrincipalConductor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nu)
    }
}

/// Residue class in `O_K / (nu)`, as reduced coordinates in the basis `(1, omega)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ResidueClass {
    pub a: Integer,
    pub b: Integer,
}

/// `O_K / (nu)` with the ideal lattice in Hermite normal form
/// `{(alpha, 0), (beta, gamma)}`, `0 <= beta < alpha`, `alpha * gamma = |N(nu)|`.
#[derive(Clone, Debug)]
pub struct ResidueRing {
    alpha: Integer,
    beta: Integer,
    gamma: Integer,
    /// `omega^2 = omega + c`.
    c: Integer,
    d: i64,
}

impl ResidueRing {
    pub fn new(field: &LengthOneField, nu: &PrincipalConductor) -> ResidueRing {
        let (a, b) = nu.nu.omega_coordinates().expect("conductor is integral");
        let c = Integer::from((field.d - 1) / 4);
        // Lattice generators nu = (a, b) and nu*omega = (b c, a + b).
        let (v1, v2) = ((a.clone(), b.clone()), ((&b * &c).complete(), (&a + &b).complete()));
        let (g, s, t) = v1.1.clone().extended_gcd(v2.1.clone(), Integer::new());
        let gamma = g.clone();
        let mut beta = (&s * &v1.0).complete() + (&t * &v2.0).complete();
        let alpha = if g == 0 {
            unreachable!("nonzero conductor spans a full lattice")
        } else {
            let u = (&v2.1 / &g).complete();
            let w = (&v1.1 / &g).complete();
            (u * &v1.0 - w * &v2.0).abs()
        };
        debug_assert_eq!((&alpha * &gamma).complete(), *nu.norm_abs());
        beta = beta.rem_euc(alpha.clone());
        ResidueRing { alpha, beta, gamma, c, d: field.d }
    }

    pub fn size(&self) -> Integer {
        (&self.alpha * &self.gamma).complete()
    }

    pub fn reduce(&self, a: Integer, b: Integer) -> ResidueClass {
        let (k, b_red) = b.div_rem_euc(self.gamma.clone());
        let a = a - k * &self.beta;
        ResidueClass { a: a.rem_euc(self.alpha.clone()), b: b_red }
    }

    pub fn reduce_element(&self, x: &FieldElement) -> Result<ResidueClass> {
        assert_eq!(x.d, self.d, "element of a different field");
        let (a, b) = x.omega_coordinates().ok_or_else(|| Error::NonIntegral(x.to_expr()))?;
        Ok(self.reduce(a, b))
    }

    pub fn one(&self) -> ResidueClass {
        self.reduce(Integer::from(1), Integer::new())
    }

    pub fn mul(&self, x: &ResidueClass, y: &ResidueClass) -> ResidueClass {
        // (a1 + b1 w)(a2 + b2 w) = a1 a2 + b1 b2 c + (a1 b2 + a2 b1 + b1 b2) w
        let bb = (&x.b * &y.b).complete();
        let a = (&x.a * &y.a).complete() + (&bb * &self.c).complete();
        let b = (&x.a * &y.b).complete() + (&y.a * &x.b).complete() + bb;
        self.reduce(a, b)
    }

    pub fn pow(&self, x: &ResidueClass, mut e: u64) -> ResidueClass {
        let mut base = x.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// All residue classes, for brute-force checks on small conductors.
    pub fn elements(&self) -> Vec<ResidueClass> {
        let alpha = self.alpha.to_u64().expect("small ring");
        let gamma = self.gamma.to_u64().expect("small ring");
        let mut out = Vec::with_capacity((alpha * gamma) as usize);
        for b in 0..gamma {
            for a in 0..alpha {
                out.push(ResidueClass { a: Integer::from(a), b: Integer::from(b) });
            }
        }
        out
    }
}

/// `x^e` reduced modulo `(nu)`.
pub fn residue_pow(x: &FieldElement, e: u64, nu: &PrincipalConductor, field: &LengthOneField) -> Result<ResidueClass> {
    let ring = ResidueRing::new(field, nu);
    let base = ring.reduce_element(x)?;
    Ok(ring.pow(&base, e))
}

/// Smallest `g >= 1` with `eps^g = 1 (mod nu)`.
pub fn unit_order(field: &LengthOneField, nu: &PrincipalConductor) -> Result<u64> {
    unit_order_bounded(field, nu, DEFAULT_ORDER_BOUND)
}

pub fn unit_order_bounded(field: &LengthOneField, nu: &PrincipalConductor, bound: u64) -> Result<u64> {
    let ring = ResidueRing::new(field, nu);
    let eps = ring.reduce_element(&field.epsilon())?;
    let one = ring.one();
    let mut acc = eps.clone();
    for g in 1..=bound {
        if acc == one {
            return Ok(g);
        }
        acc = ring.mul(&acc, &eps);
    }
    Err(Error::Overflow(bound))
}

/// Why [`g_formula_check`] did not compare against `p - (d/p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotApplicable {
    NotPrime,
    Split,
    Ramified,
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GFormulaCheck {
    pub p: u64,
    /// Kronecker symbol `(d/p)`.
    pub symbol: i32,
    pub g_computed: u64,
    /// `p - (d/p)` when the prime is inert.
    pub g_formula: Option<u64>,
    pub agree: Option<bool>,
    /// `g_formula` divisible by `g_computed` (always true for inert primes).
    pub divides: Option<bool>,
    pub not_applicable: Option<NotApplicable>,
}

fn is_prime(n: u64) -> bool {
    Integer::from(n).is_probably_prime(30) != rug::integer::IsPrime::No
}

/// Compares `g((p))` against `p - (d/p)` for primes that neither split nor ramify.
pub fn g_formula_check(field: &LengthOneField, p: u64) -> Result<GFormulaCheck> {
    let symbol = if p >= 2 { field.kronecker(p) } else { 0 };
    let g_computed = if p >= 2 {
        unit_order(field, &PrincipalConductor::rational(field, p as i64)?)?
    } else {
        0
    };
    let not_applicable = if !is_prime(p) {
        Some(NotApplicable::NotPrime)
    } else if symbol == 0 {
        Some(NotApplicable::Ramified)
    } else if symbol == 1 {
        Some(NotApplicable::Split)
    } else {
        None
    };
    let g_formula = not_applicable.is_none().then(|| (p as i64 - i64::from(symbol)) as u64);
    Ok(GFormulaCheck {
        p,
        symbol,
        g_computed,
        g_formula,
        agree: g_formula.map(|f| f == g_computed),
        divides: g_formula.map(|f| f % g_computed == 0),
        not_applicable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fields() {
        let f3 = make_field(3).unwrap();
        assert_eq!(f3.d(), 5);
        assert_eq!(f3.epsilon(), f3.element(Rational::from((3, 2)), Rational::from((1, 2))));
        let f5 = make_field(5).unwrap();
        assert_eq!(f5.d(), 21);
        assert_eq!(make_field(4), Err(Error::EvenDigit(4)));
        assert_eq!(make_field(2), Err(Error::DigitTooSmall(2)));
        // 11^2 - 4 = 117 = 9 * 13
        assert_eq!(make_field(11), Err(Error::NotSquareFree { a: 11, value: 117 }));
        assert_eq!(LengthOneField::from_d(21).unwrap().a(), 5);
        assert!(LengthOneField::from_d(13).is_err());
    }

    #[test]
    fn conjugation_norm_trace() {
        let f = make_field(3).unwrap();
        let eps = f.epsilon();
        assert_eq!(eps.conjugate(), f.element(Rational::from((3, 2)), Rational::from((-1, 2))));
        assert_eq!(f.element(4, 0).conjugate(), f.element(4, 0));
        assert_eq!(f.element(4, -1).conjugate(), f.element(4, 1));
        assert_eq!(eps.norm_trace(), (Rational::from(1), Rational::from(3)));
        assert_eq!(f.element(4, -1).norm_trace(), (Rational::from(11), Rational::from(8)));
        assert_eq!(f.element(1, 0).norm_trace(), (Rational::from(1), Rational::from(2)));
        for a in [3, 5, 9, 13, 15] {
            let f = make_field(a).unwrap();
            let e = f.epsilon();
            assert_eq!(e.mul(&e.conjugate()), f.element(1, 0));
            assert_eq!(e.add(&e.conjugate()), f.element(a, 0));
            assert_eq!(e.conjugate().conjugate(), e);
        }
    }

    #[test]
    fn one_and_epsilon_span_the_maximal_order() {
        for a in [3i64, 5, 9, 13, 15, 21] {
            let f = make_field(a).unwrap();
            // eps - (a-1)/2 = omega, so the basis change (1, eps) -> (1, omega) is unimodular
            let shifted = f.epsilon().sub(&f.element(Rational::from((a - 1, 2)), 0));
            assert_eq!(shifted, f.omega());
            let (ea, eb) = f.epsilon().omega_coordinates().unwrap();
            let det = Integer::from(1) * &eb - Integer::from(0) * &ea;
            assert_eq!(det.abs(), 1);
        }
    }

    #[test]
    fn integrality() {
        let f = make_field(3).unwrap();
        assert!(f.epsilon().is_integral());
        assert!(f.omega().is_integral());
        assert!(!f.element(Rational::from((1, 2)), 0).is_integral());
        assert!(!f.element(0, Rational::from((1, 2))).is_integral());
        let err = residue_pow(&f.element(Rational::from((1, 3)), 0), 2, &PrincipalConductor::rational(&f, 4).unwrap(), &f);
        assert!(matches!(err, Err(Error::NonIntegral(_))));
    }

    #[test]
    fn residue_powers_mod_four() {
        let f = make_field(3).unwrap();
        let four = PrincipalConductor::rational(&f, 4).unwrap();
        let ring = ResidueRing::new(&f, &four);
        let eps = f.epsilon();
        // eps = 1 + omega
        assert_eq!(residue_pow(&eps, 1, &four, &f).unwrap(), ResidueClass { a: 1.into(), b: 1.into() });
        // eps^3 = 5 + 8 omega = 1
        assert_eq!(f.epsilon().pow(3).unwrap().omega_coordinates(), Some((5.into(), 8.into())));
        assert_eq!(residue_pow(&eps, 3, &four, &f).unwrap(), ring.one());
        assert_eq!(residue_pow(&eps, 0, &four, &f).unwrap(), ring.one());
    }

    #[test]
    fn unit_orders_of_examples() {
        let f3 = make_field(3).unwrap();
        let f5 = make_field(5).unwrap();
        assert_eq!(unit_order(&f3, &PrincipalConductor::rational(&f3, 4).unwrap()).unwrap(), 3);
        assert_eq!(unit_order(&f3, &PrincipalConductor::parse(&f3, "4-1*sqrt(5)").unwrap()).unwrap(), 5);
        assert_eq!(unit_order(&f5, &PrincipalConductor::rational(&f5, 3).unwrap()).unwrap(), 3);
        assert_eq!(
            unit_order_bounded(&f3, &PrincipalConductor::rational(&f3, 1000).unwrap(), 2),
            Err(Error::Overflow(2))
        );
    }

    #[test]
    fn conductor_validation() {
        let f = make_field(3).unwrap();
        assert_eq!(PrincipalConductor::rational(&f, 0), Err(Error::ZeroConductor));
        assert!(matches!(PrincipalConductor::rational(&f, 1), Err(Error::UnitConductor(_))));
        assert!(matches!(PrincipalConductor::parse(&f, "(3+1*sqrt(5))/2"), Err(Error::UnitConductor(_))));
        assert!(matches!(PrincipalConductor::parse(&f, "4-1*sqrt(21)"), Err(Error::Parse { .. })));
        let c = PrincipalConductor::parse(&f, "4-1*sqrt(5)").unwrap();
        assert_eq!(c.norm_abs(), &11);
        assert_eq!(c.to_string(), "4-1*sqrt(5)");
        assert_eq!(c.as_rational_integer(), None);
        assert_eq!(PrincipalConductor::rational(&f, 4).unwrap().as_rational_integer(), Some(4.into()));
    }

    #[test]
    fn g_formula_examples() {
        let f = make_field(3).unwrap();
        let two = g_formula_check(&f, 2).unwrap();
        assert_eq!((two.symbol, two.g_formula, two.g_computed, two.agree), (-1, Some(3), 3, Some(true)));
        let three = g_formula_check(&f, 3).unwrap();
        assert_eq!((three.g_formula, three.g_computed), (Some(4), 4));
        let eleven = g_formula_check(&f, 11).unwrap();
        assert_eq!(eleven.not_applicable, Some(NotApplicable::Split));
        assert_eq!(g_formula_check(&f, 5).unwrap().not_applicable, Some(NotApplicable::Ramified));
        assert_eq!(g_formula_check(&f, 9).unwrap().not_applicable, Some(NotApplicable::NotPrime));
    }

    /// Brute-force order of the unit group of the residue ring.
    fn unit_group_order(ring: &ResidueRing) -> usize {
        let all = ring.elements();
        let one = ring.one();
        all.iter().filter(|x| all.iter().any(|y| ring.mul(x, y) == one)).count()
    }

    #[test]
    fn unit_order_divides_group_order() {
        let f = make_field(3).unwrap();
        for src in ["4", "6", "7", "4-1*sqrt(5)", "3+1*sqrt(5)", "(7+1*sqrt(5))/2", "9"] {
            let nu = PrincipalConductor::parse(&f, src).unwrap();
            let ring = ResidueRing::new(&f, &nu);
            let g = unit_order(&f, &nu).unwrap() as usize;
            assert_eq!(unit_group_order(&ring) % g, 0, "conductor {src}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn residue_pow_is_multiplicative(
                a in 1i64..30, b in -30i64..30, e1 in 0u64..40, e2 in 0u64..40,
                na in 2i64..15, nb in -6i64..6,
            ) {
                let f = make_field(3).unwrap();
                let nu = match PrincipalConductor::new(f.from_omega(&na.into(), &nb.into())) {
                    Ok(nu) => nu,
                    Err(_) => return Ok(()),
                };
                let x = f.from_omega(&a.into(), &b.into());
                let ring = ResidueRing::new(&f, &nu);
                let lhs = residue_pow(&x, e1 + e2, &nu, &f).unwrap();
                let rhs = ring.mul(&residue_pow(&x, e1, &nu, &f).unwrap(), &residue_pow(&x, e2, &nu, &f).unwrap());
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
