//! Chebyshev-type sequence `T_n(a)` and the points `tau_n` on the geodesic
//! joining `eps'` to `eps`.
//!
//! `T_0 = 2`, `T_1 = a`, `T_{n+2} = a T_{n+1} - T_n`, so `T_n = eps^n + eps'^n`.

use std::collections::HashMap;
use std::sync::RwLock;

use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::{rational_to_hp, HPComplex, HPReal, Precision};
use crate::quadratic_field::LengthOneField;

/// `(T_n, T_{n+1})` by the doubling identities
/// `T_{2k} = T_k^2 - 2`, `T_{2k+1} = T_k T_{k+1} - a`.
pub fn cheb_pair(a: i64, n: u64) -> (Integer, Integer) {
    let mut lo = Integer::from(2);
    let mut hi = Integer::from(a);
    for bit in (0..64 - n.leading_zeros()).rev() {
        let mixed = (&lo * &hi).complete() - a;
        if (n >> bit) & 1 == 1 {
            hi = hi.square() - 2u32;
            lo = mixed;
        } else {
            lo = lo.square() - 2u32;
            hi = mixed;
        }
    }
    (lo, hi)
}

/// `T_n(a)`.
pub fn cheb(a: i64, n: u64) -> Integer {
    cheb_pair(a, n).0
}

/// Product formula `T_n T_m = T_{n+m} + T_{|n-m|}`.
pub fn cheb_product_check(a: i64, n: u64, m: u64) -> bool {
    cheb(a, n) * cheb(a, m) == cheb(a, n + m) + cheb(a, n.abs_diff(m))
}

/// Memoised `T_n(a)` for one `a`; safe to share between threads.
#[derive(Debug)]
pub struct ChebyshevSeq {
    a: i64,
    cache: RwLock<HashMap<u64, Integer>>,
}

impl ChebyshevSeq {
    pub fn new(a: i64) -> Self {
        ChebyshevSeq { a, cache: RwLock::new(HashMap::new()) }
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn get(&self, n: u64) -> Integer {
        if let Some(v) = self.cache.read().expect("cache lock").get(&n) {
            return v.clone();
        }
        let (t, t1) = cheb_pair(self.a, n);
        let mut w = self.cache.write().expect("cache lock");
        w.insert(n + 1, t1);
        w.entry(n).or_insert(t).clone()
    }
}

/// `U = [[a, -1], [1, 0]]`, the matrix of multiplication by `eps` on the basis `(eps, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnitMatrix {
    pub a: i64,
}

pub type Matrix2 = [[Integer; 2]; 2];

fn mat_mul(x: &Matrix2, y: &Matrix2) -> Matrix2 {
    let e = |i: usize, j: usize| (&x[i][0] * &y[0][j]).complete() + (&x[i][1] * &y[1][j]).complete();
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

impl UnitMatrix {
    pub fn matrix(&self) -> Matrix2 {
        [[Integer::from(self.a), Integer::from(-1)], [Integer::from(1), Integer::new()]]
    }

    pub fn inverse(&self) -> Matrix2 {
        [[Integer::new(), Integer::from(1)], [Integer::from(-1), Integer::from(self.a)]]
    }

    /// `U^k` for any integer `k`, exactly.
    pub fn pow(&self, k: i64) -> Matrix2 {
        let mut base = if k >= 0 { self.matrix() } else { self.inverse() };
        let mut e = k.unsigned_abs();
        let mut acc: Matrix2 = [[Integer::from(1), Integer::new()], [Integer::new(), Integer::from(1)]];
        while e > 0 {
            if e & 1 == 1 {
                acc = mat_mul(&acc, &base);
            }
            base = mat_mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// `T^{-1} U^n T` with `T = diag(1, -1)` equals `U^n` transposed.
    pub fn power_transposed(&self, n: i64) -> Matrix2 {
        let m = self.pow(n);
        let [[p, q], [r, s]] = m;
        [[p, r], [q, s]]
    }
}

/// `tau_n = (T_{n+1} + i sqrt d) / T_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPoint {
    pub n: u64,
    pub t_n_lo: Integer,
    pub t_n_hi: Integer,
    pub tau: HPComplex,
}

impl GeodesicPoint {
    /// `Re tau_n` as an exact rational.
    pub fn real_part(&self) -> Rational {
        Rational::from((self.t_n_hi.clone(), self.t_n_lo.clone()))
    }
}

/// `tau_n` at the requested precision, computed afresh.
pub fn tau(field: &LengthOneField, n: u64, prec: Precision) -> GeodesicPoint {
    Geodesic::new(field.clone()).tau(n, prec)
}

/// Shared source of `tau_n`: caches `T_n` and `sqrt d` per precision.
#[derive(Debug)]
pub struct Geodesic {
    field: LengthOneField,
    seq: ChebyshevSeq,
    sqrt_d: RwLock<HashMap<u32, HPReal>>,
}

impl Geodesic {
    pub fn new(field: LengthOneField) -> Self {
        let seq = ChebyshevSeq::new(field.a());
        Geodesic { field, seq, sqrt_d: RwLock::new(HashMap::new()) }
    }

    pub fn field(&self) -> &LengthOneField {
        &self.field
    }

    pub fn cheb(&self, n: u64) -> Integer {
        self.seq.get(n)
    }

    pub fn sqrt_d(&self, prec: Precision) -> HPReal {
        if let Some(s) = self.sqrt_d.read().expect("sqrt lock").get(&prec.bits()) {
            return s.clone();
        }
        let s = self.field.sqrt_d(prec);
        self.sqrt_d.write().expect("sqrt lock").insert(prec.bits(), s.clone());
        s
    }

    pub fn tau(&self, n: u64, prec: Precision) -> GeodesicPoint {
        let t_n_lo = self.seq.get(n);
        let t_n_hi = self.seq.get(n + 1);
        let re = rational_to_hp(&Rational::from((t_n_hi.clone(), t_n_lo.clone())), prec);
        let im = (&self.sqrt_d(prec) / &rational_to_hp(&Rational::from(t_n_lo.clone()), prec)).round_to(prec);
        GeodesicPoint { n, t_n_lo, t_n_hi, tau: HPComplex::new(re, im) }
    }
}

/// `U^k tau = (p tau + q) / (r tau + s)` where `U^k = [[p, q], [r, s]]`.
pub fn moebius_u(field: &LengthOneField, k: i64, tau: &HPComplex) -> Result<HPComplex> {
    let [[p, q], [r, s]] = UnitMatrix { a: field.a() }.pow(k);
    let prec = tau.precision();
    let lift = |c: &Integer| HPComplex::from_real(rational_to_hp(&Rational::from(c.clone()), prec));
    let num = &(&lift(&p) * tau) + &lift(&q);
    let den = &(&lift(&r) * tau) + &lift(&s);
    if den.norm_sqr().is_zero() {
        return Err(Error::SingularPoint);
    }
    num.checked_div(&den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic_field::make_field;

    /// Plain three-term recurrence, used as the oracle for the doubling ladder.
    fn recurrence(a: i64, n: usize) -> Vec<Integer> {
        let mut v = vec![Integer::from(2), Integer::from(a)];
        while v.len() <= n {
            let k = v.len();
            let next = Integer::from(&v[k - 1] * a) - &v[k - 2];
            v.push(next);
        }
        v
    }

    #[test]
    fn small_values() {
        let t3: Vec<i64> = (0..10).map(|n| cheb(3, n).to_i64().unwrap()).collect();
        assert_eq!(t3, [2, 3, 7, 18, 47, 123, 322, 843, 2207, 5778]);
        let t5: Vec<i64> = (0..7).map(|n| cheb(5, n).to_i64().unwrap()).collect();
        assert_eq!(t5, [2, 5, 23, 110, 527, 2525, 12098]);
    }

    #[test]
    fn ladder_matches_recurrence() {
        for a in [3, 5, 13] {
            let v = recurrence(a, 200);
            for n in 0..=200u64 {
                assert_eq!(cheb(a, n), v[n as usize], "a = {a}, n = {n}");
            }
        }
    }

    #[test]
    fn cached_sequence() {
        let s = ChebyshevSeq::new(3);
        assert_eq!(s.get(18), 33_385_282);
        assert_eq!(s.get(17), 12_752_043);
        assert_eq!(s.get(19), cheb(3, 19));
    }

    #[test]
    fn unit_matrix_powers() {
        let u = UnitMatrix { a: 3 };
        let id = u.pow(0);
        assert_eq!(id, [[Integer::from(1), Integer::new()], [Integer::new(), Integer::from(1)]]);
        assert_eq!(mat_mul(&u.pow(5), &u.pow(-5)), id);
        // trace U^n = T_n
        for n in 1..12 {
            let m = u.pow(n);
            assert_eq!(Integer::from(&m[0][0] + &m[1][1]), cheb(3, n as u64));
        }
    }

    #[test]
    fn geodesic_points() {
        let f = make_field(3).unwrap();
        let prec = Precision::new(200).unwrap();
        let g = Geodesic::new(f.clone());
        for n in 0..8 {
            let p = g.tau(n, prec);
            // |tau_n - a/2|^2 = d/4 on the semicircle over eps', eps
            let shifted = &p.tau.re - &HPReal::from_f64(prec, 1.5);
            let r2 = &shifted.sqr() + &p.tau.im.sqr();
            assert!((&r2 - &HPReal::from_f64(prec, 1.25)).abs() < 1e-55);
            // U tau_n = tau_{n+2}
            let moved = moebius_u(&f, 1, &p.tau).unwrap();
            let target = g.tau(n + 2, prec).tau;
            assert!((&moved - &target).abs() < 1e-50, "n = {n}");
        }
        assert_eq!(g.tau(3, prec).real_part(), Rational::from((47, 18)));
    }

    #[test]
    fn matches_unit_powers() {
        let f = make_field(3).unwrap();
        let prec = Precision::new(256).unwrap();
        let eps = f.epsilon_hp(prec);
        let inv = &HPReal::one(prec) / &eps;
        let (mut up, mut down) = (HPReal::one(prec), HPReal::one(prec));
        for n in 0..=60u64 {
            let sum = (&up + &down).as_float().to_integer().unwrap();
            assert_eq!(sum, cheb(3, n));
            up = &up * &eps;
            down = &down * &inv;
        }
    }

    #[test]
    fn composition() {
        for n in 1..6u64 {
            let inner = cheb(3, n).to_i64().unwrap();
            for m in 0..6u64 {
                assert_eq!(cheb(inner, m), cheb(3, n * m));
            }
        }
    }

    #[test]
    fn ratio_limit_is_monotone() {
        let f = make_field(5).unwrap();
        let prec = Precision::new(256).unwrap();
        for k in 1..4u64 {
            let target = (0..k).fold(HPReal::one(prec), |acc, _| &acc * &f.epsilon_hp(prec));
            let mut last: Option<HPReal> = None;
            for n in 0..30u64 {
                let r = rational_to_hp(&Rational::from((cheb(5, n + k), cheb(5, n))), prec);
                let gap = (&r - &target).abs();
                if let Some(prev) = &last {
                    assert!(gap < *prev);
                }
                last = Some(gap);
            }
        }
    }

    #[test]
    fn moebius_lemma_to_precision() {
        let f = make_field(3).unwrap();
        let prec = Precision::new(256).unwrap();
        let g = Geodesic::new(f.clone());
        let bound = HPReal::with_val(prec, rug::Float::with_val(64, rug::Float::i_exp(1, 16 - 256)));
        for n in 0..=20u64 {
            let p = g.tau(n, prec);
            for k in 0..=20i64 {
                let moved = moebius_u(&f, k, &p.tau).unwrap();
                let err = (&moved - &g.tau(n + 2 * k as u64, prec).tau).abs();
                assert!(err <= bound, "n = {n}, k = {k}");
            }
            let back = moebius_u(&f, -3, &moebius_u(&f, 3, &p.tau).unwrap()).unwrap();
            assert!((&back - &p.tau).abs() <= bound);
        }
        let t1 = g.tau(1, prec);
        assert_eq!(t1.real_part(), Rational::from((7, 3)));
    }

    #[test]
    fn singular_point() {
        let f = make_field(3).unwrap();
        let prec = Precision::new(128).unwrap();
        assert_eq!(moebius_u(&f, 1, &HPComplex::zero(prec)), Err(Error::SingularPoint));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn product_formula(a in prop::sample::select(vec![3i64, 5, 9, 13, 15, 17]), n in 0u64..300, m in 0u64..300) {
                prop_assert!(cheb_product_check(a, n, m));
            }

            #[test]
            fn determinant_identity(a in prop::sample::select(vec![3i64, 5, 9, 13]), n in 0u64..300) {
                // T_{n+1}^2 - T_n T_{n+2} = -d
                let d = a * a - 4;
                let lhs = cheb(a, n + 1).square() - cheb(a, n) * cheb(a, n + 2);
                prop_assert_eq!(lhs, -d);
            }
        }
    }
}
