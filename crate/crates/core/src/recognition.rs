//! Integer relations (PSLQ) and minimal-polynomial recognition.
//!
//! A "none" answer only says that no relation with height up to the bound
//! exists at the working precision; it proves nothing about transcendence.

use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{HPComplex, HPReal, Precision};

/// An integer relation `sum c_i v_i ~ 0`, or a polynomial when the values are powers.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationCandidate {
    pub coefficients: Vec<Integer>,
    /// `|sum c_i v_i|` at the precision of the inputs.
    pub residual: HPReal,
    /// Index of the last nonzero coefficient; the polynomial degree for minpolys.
    pub degree: usize,
    pub height: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationJson {
    pub degree: usize,
    pub coefficients: Vec<String>,
    pub residual_dec: String,
    pub height: String,
}

impl RelationCandidate {
    fn new(coefficients: Vec<Integer>, values: &[HPReal]) -> Self {
        let residual = residual_of(&coefficients, values);
        let degree = coefficients.iter().rposition(|c| *c != 0).unwrap_or(0);
        let height = coefficients.iter().map(|c| c.clone().abs()).max().unwrap_or_default();
        RelationCandidate { coefficients, residual, degree, height }
    }

    pub fn to_json(&self) -> RelationJson {
        RelationJson {
            degree: self.degree,
            coefficients: self.coefficients.iter().map(Integer::to_string).collect(),
            residual_dec: self.residual.to_decimal(6),
            height: self.height.to_string(),
        }
    }

    /// Polynomial in `X`, highest degree first, e.g. `X^2 - X - 1`.
    pub fn poly_string(&self) -> String {
        let mut out = String::new();
        for (k, c) in self.coefficients.iter().enumerate().rev() {
            if *c == 0 {
                continue;
            }
            let neg = *c < 0;
            let mag = c.clone().abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match k {
                0 => String::new(),
                1 => "X".to_string(),
                _ => format!("X^{k}"),
            };
            if mag != 1 || k == 0 {
                out.push_str(&mag.to_string());
            }
            out.push_str(&mono);
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }

    /// Normalizes the sign so that the leading coefficient is positive.
    fn normalized(mut self) -> Self {
        if self.coefficients.get(self.degree).is_some_and(|c| *c < 0) {
            for c in &mut self.coefficients {
                *c = -c.clone();
            }
        }
        self
    }
}

fn residual_of(coefficients: &[Integer], values: &[HPReal]) -> HPReal {
    let prec = values[0].prec();
    let mut acc = Float::new(prec);
    for (c, v) in coefficients.iter().zip(values) {
        acc += Float::with_val(prec, c * v.as_float());
    }
    HPReal::from_float(acc.abs())
}

/// Bits required for a search of `len` values under `max_height`.
pub fn required_bits(len: usize, max_height: &Integer) -> u32 {
    let log_h = (max_height.significant_bits().max(1)) as f64;
    (4.0 * log_h * len as f64).ceil() as u32
}

const MAX_ITERATIONS: usize = 20_000;

/// PSLQ search for a relation among `values` with height at most `max_height`.
pub fn integer_relation(values: &[HPReal], max_height: &Integer, tol: &HPReal) -> Result<Option<RelationCandidate>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two values".into()));
    }
    if *max_height < 1 {
        return Err(Error::InvalidArgument("max_height must be positive".into()));
    }
    let have = values.iter().map(HPReal::prec).min().unwrap_or(0);
    let need = required_bits(n, max_height);
    if have < need {
        return Err(Error::InsufficientPrecision { have, need });
    }
    if let Some(i) = values.iter().position(HPReal::is_zero) {
        // a zero entry is its own relation
        let mut c = vec![Integer::new(); n];
        c[i] = Integer::from(1);
        return Ok(Some(RelationCandidate::new(c, values)));
    }
    let prec = have;
    let f = |v: f64| Float::with_val(prec, v);

    // normalized x and partial norms s_j = |x_j..x_{n-1}|
    let norm = values.iter().fold(f(0.0), |acc, v| acc + Float::with_val(prec, v.as_float().square_ref())).sqrt();
    let x: Vec<Float> = values.iter().map(|v| Float::with_val(prec, v.as_float() / &norm)).collect();
    let mut s = vec![f(0.0); n];
    let mut acc = f(0.0);
    for j in (0..n).rev() {
        acc += Float::with_val(prec, x[j].square_ref());
        s[j] = Float::with_val(prec, acc.sqrt_ref());
    }
    let mut y = x.clone();
    let mut h = vec![vec![f(0.0); n - 1]; n];
    for j in 0..n - 1 {
        h[j][j] = Float::with_val(prec, &s[j + 1] / &s[j]);
        for i in j + 1..n {
            let den = Float::with_val(prec, &s[j] * &s[j + 1]);
            h[i][j] = -Float::with_val(prec, &x[i] * &x[j]) / den;
        }
    }
    let ident = |i: usize, j: usize| Integer::from((i == j) as i32);
    let mut a: Vec<Vec<Integer>> = (0..n).map(|i| (0..n).map(|j| ident(i, j)).collect()).collect();
    let mut b = a.clone();
    let gamma = f(4.0 / 3.0).sqrt() + f(0.01);
    let limit = Integer::from(1) << (prec * 9 / 10);

    let reduce = |h: &mut Vec<Vec<Float>>, y: &mut Vec<Float>, a: &mut Vec<Vec<Integer>>, b: &mut Vec<Vec<Integer>>, i: usize, j: usize| {
        if h[j][j].is_zero() {
            return;
        }
        let q = Float::with_val(prec, &h[i][j] / &h[j][j]).round();
        if q.is_zero() || !q.is_finite() {
            return;
        }
        let t = q.to_integer().unwrap_or_default();
        let yi = y[i].clone();
        y[j] += Float::with_val(prec, &q * &yi);
        for k in 0..=j {
            let hj = h[j][k].clone();
            h[i][k] -= Float::with_val(prec, &q * &hj);
        }
        for k in 0..n {
            let aj = a[j][k].clone();
            a[i][k] -= &t * aj;
            let bi = b[k][i].clone();
            b[k][j] += &t * bi;
        }
    };

    // a small |y_j| exposes column j of B as a relation
    let pick = |y: &[Float], b: &[Vec<Integer>]| -> Option<RelationCandidate> {
        for (j, yj) in y.iter().enumerate() {
            if yj.is_zero() || Float::with_val(prec, yj.abs_ref()) < *tol.as_float() {
                let c: Vec<Integer> = (0..n).map(|k| b[k][j].clone()).collect();
                let cand = RelationCandidate::new(c, values);
                if cand.height <= *max_height && cand.height > 0 && cand.residual <= *tol {
                    return Some(cand);
                }
            }
        }
        None
    };

    for i in 1..n {
        for j in (0..i.min(n - 1)).rev() {
            reduce(&mut h, &mut y, &mut a, &mut b, i, j);
        }
    }
    if let Some(c) = pick(&y, &b) {
        return Ok(Some(c));
    }

    for _ in 0..MAX_ITERATIONS {
        // pick the row with the largest gamma^j |H_jj|
        let mut m = 0;
        let mut best = f(-1.0);
        let mut gpow = gamma.clone();
        for j in 0..n - 1 {
            let v = Float::with_val(prec, &gpow * Float::with_val(prec, h[j][j].abs_ref()));
            if v > best {
                best = v;
                m = j;
            }
            gpow *= &gamma;
        }
        y.swap(m, m + 1);
        a.swap(m, m + 1);
        h.swap(m, m + 1);
        for row in b.iter_mut() {
            row.swap(m, m + 1);
        }
        if let Some(c) = pick(&y, &b) {
            return Ok(Some(c));
        }
        if m + 2 < n {
            let t0 = (Float::with_val(prec, h[m][m].square_ref()) + Float::with_val(prec, h[m][m + 1].square_ref())).sqrt();
            if t0.is_zero() {
                continue;
            }
            let t1 = Float::with_val(prec, &h[m][m] / &t0);
            let t2 = Float::with_val(prec, &h[m][m + 1] / &t0);
            for row in h.iter_mut().skip(m) {
                let t3 = row[m].clone();
                let t4 = row[m + 1].clone();
                row[m] = Float::with_val(prec, &t1 * &t3) + Float::with_val(prec, &t2 * &t4);
                row[m + 1] = Float::with_val(prec, &t1 * &t4) - Float::with_val(prec, &t2 * &t3);
            }
        }
        for i in m + 1..n {
            for j in (0..(i.min(m + 2)).min(n - 1)).rev() {
                reduce(&mut h, &mut y, &mut a, &mut b, i, j);
            }
        }

        if let Some(c) = pick(&y, &b) {
            return Ok(Some(c));
        }

        // any relation has norm at least 1 / max |H_jj|
        let hmax = h.iter().enumerate().take(n - 1).map(|(j, r)| Float::with_val(prec, r[j].abs_ref())).fold(f(0.0), |m, v| if v > m { v } else { m });
        if hmax.is_zero() {
            break;
        }
        let bound = Float::with_val(prec, hmax.recip_ref());
        if bound > *max_height {
            return Ok(None);
        }
        let amax = a.iter().flatten().map(|v| v.clone().abs()).max().unwrap_or_default();
        if amax > limit {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Checks whether `coefficients` (lowest degree first) factor over `Z` into
/// pieces of degree at most 4, by grouping numerically computed roots.
///
/// `None` when the degree is too large for the trial search.
pub fn trial_irreducible(coefficients: &[Integer]) -> Option<bool> {
    let deg = coefficients.iter().rposition(|c| *c != 0)?;
    if deg <= 1 {
        return Some(true);
    }
    if deg > 8 {
        return None;
    }
    if coefficients[0] == 0 {
        return Some(false);
    }
    let prec = Precision::new(192).ok()?;
    let roots = poly_roots(&coefficients[..=deg], prec)?;
    let lead = coefficients[deg].clone().abs();
    let divisors: Vec<Integer> = (1..=lead.to_u64().unwrap_or(1).min(10_000))
        .map(Integer::from)
        .filter(|d| lead.is_divisible(d))
        .collect();
    let tol = 1e-30;
    for size in 1..=deg / 2 {
        for subset in combinations(deg, size) {
            // monic factor from the chosen roots
            let mut poly = vec![HPComplex::one(prec)];
            for &r in &subset {
                let mut next = vec![HPComplex::zero(prec); poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k + 1] = &next[k + 1] + c;
                    next[k] = &next[k] - &(c * &roots[r]);
                }
                poly = next;
            }
            for d in &divisors {
                let dh = HPReal::with_val(prec, d);
                let integral = poly.iter().all(|c| {
                    let v = c.re.as_float() * dh.as_float();
                    let v = Float::with_val(prec.bits(), v);
                    let dist = Float::with_val(prec.bits(), &v - Float::with_val(prec.bits(), v.round_ref())).abs();
                    dist < tol && c.im.abs() < tol
                });
                if integral {
                    return Some(false);
                }
            }
        }
    }
    Some(true)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Durand-Kerner iteration on the monic rescaling of `coefficients`.
fn poly_roots(coefficients: &[Integer], prec: Precision) -> Option<Vec<HPComplex>> {
    let deg = coefficients.len() - 1;
    let lead = HPReal::with_val(prec, &coefficients[deg]);
    let monic: Vec<HPReal> = coefficients.iter().map(|c| &HPReal::with_val(prec, c) / &lead).collect();
    let eval = |z: &HPComplex| {
        let mut acc = HPComplex::zero(prec);
        for c in monic.iter().rev() {
            acc = &(&acc * z) + &HPComplex::from_real(c.clone());
        }
        acc
    };
    let seed = HPComplex::from_f64(prec, 0.4, 0.9);
    let mut roots: Vec<HPComplex> = Vec::with_capacity(deg);
    let mut p = HPComplex::one(prec);
    for _ in 0..deg {
        roots.push(p.clone());
        p = &p * &seed;
    }
    for _ in 0..2000 {
        let mut moved = 0f64;
        for i in 0..deg {
            let mut den = HPComplex::one(prec);
            for j in 0..deg {
                if i != j {
                    den = &den * &(&roots[i] - &roots[j]);
                }
            }
            let step = eval(&roots[i]).checked_div(&den).ok()?;
            moved = moved.max(step.abs().to_f64());
            roots[i] = &roots[i] - &step;
        }
        if moved < 1e-50 {
            return Some(roots);
        }
    }
    Some(roots)
}

/// Result of [`recognize_minpoly`]: the candidate plus the trial-factorization report.
#[derive(Clone, Debug, PartialEq)]
pub struct MinpolyCandidate {
    pub relation: RelationCandidate,
    /// `Some(true)` when no factor of degree `<= deg/2` was found.
    pub irreducible: Option<bool>,
}

/// Lowest-degree integer polynomial with `|p(x)| <= tol`, sweeping degrees `1..=max_degree`.
pub fn recognize_minpoly(x: &HPReal, max_degree: usize, max_height: &Integer, tol: &HPReal) -> Result<Option<MinpolyCandidate>> {
    if max_degree == 0 {
        return Err(Error::InvalidArgument("max_degree must be at least 1".into()));
    }
    let have = x.prec();
    let need = required_bits(max_degree + 1, max_height);
    if have < need {
        return Err(Error::InsufficientPrecision { have, need });
    }
    let mut powers = vec![HPReal::one(x.precision()), x.clone()];
    for degree in 1..=max_degree {
        while powers.len() <= degree {
            let next = powers.last().expect("non-empty") * x;
            powers.push(next);
        }
        if let Some(rel) = integer_relation(&powers[..=degree], max_height, tol)? {
            if rel.degree == 0 {
                continue;
            }
            let rel = rel.normalized();
            let irreducible = trial_irreducible(&rel.coefficients);
            return Ok(Some(MinpolyCandidate { relation: rel, irreducible }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sqrt_int;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn tol(prec: Precision) -> HPReal {
        HPReal::with_val(prec, Float::i_exp(1, -(prec.bits() as i32) * 3 / 4))
    }

    fn ints(v: &[i64]) -> Vec<Integer> {
        v.iter().map(|&c| Integer::from(c)).collect()
    }

    fn proportional(a: &[Integer], b: &[Integer]) -> bool {
        // a_i b_j == a_j b_i for all pairs
        (0..a.len()).all(|i| (0..a.len()).all(|j| Integer::from(&a[i] * &b[j]) == Integer::from(&a[j] * &b[i])))
    }

    #[test]
    fn rational_pair() {
        let prec = p(128);
        let v = [HPReal::one(prec), HPReal::from_f64(prec, 0.5)];
        let r = integer_relation(&v, &Integer::from(100), &tol(prec)).unwrap().unwrap();
        assert!(proportional(&r.coefficients, &ints(&[1, -2])));
        assert!(r.residual.is_zero());
    }

    #[test]
    fn sqrt5_and_epsilon() {
        let prec = p(192);
        let s5 = sqrt_int(&Integer::from(5), prec);
        let eps = &(&s5 + 3) / 2;
        let v = [HPReal::one(prec), s5, eps];
        let r = integer_relation(&v, &Integer::from(1000), &tol(prec)).unwrap().unwrap();
        assert!(proportional(&r.coefficients, &ints(&[-3, -1, 2])), "{:?}", r.coefficients);
    }

    #[test]
    fn transcendental_looking_vector_has_no_small_relation() {
        let prec = p(192);
        let pi = HPReal::pi(prec);
        let e = HPReal::with_val(prec, Float::with_val(192, 1).exp());
        let v = [HPReal::one(prec), pi, e];
        assert!(integer_relation(&v, &Integer::from(100), &tol(prec)).unwrap().is_none());
    }

    #[test]
    fn insufficient_precision() {
        let prec = p(64);
        let v: Vec<HPReal> = (0..6).map(|k| HPReal::from_f64(prec, 1.0 / (k as f64 + 2.0))).collect();
        let err = integer_relation(&v, &Integer::from(1_000_000), &tol(prec)).unwrap_err();
        assert!(matches!(err, Error::InsufficientPrecision { .. }));
    }

    #[test]
    fn golden_ratio() {
        let prec = p(192);
        let phi = &(&sqrt_int(&Integer::from(5), prec) + 1) / 2;
        let m = recognize_minpoly(&phi, 4, &Integer::from(500), &tol(prec)).unwrap().unwrap();
        assert_eq!(m.relation.coefficients, ints(&[-1, -1, 1]));
        assert_eq!(m.relation.poly_string(), "X^2 - X - 1");
        assert_eq!(m.irreducible, Some(true));
    }

    #[test]
    fn one_half() {
        let prec = p(128);
        let m = recognize_minpoly(&HPReal::from_f64(prec, 0.5), 3, &Integer::from(100), &tol(prec)).unwrap().unwrap();
        assert_eq!(m.relation.coefficients, ints(&[-1, 2]));
        assert_eq!(m.relation.degree, 1);
    }

    #[test]
    fn trial_factorization() {
        // (X^2 - 2)(X^2 - 3) and (2X - 1)(X^2 + 1)
        assert_eq!(trial_irreducible(&ints(&[6, 0, -5, 0, 1])), Some(false));
        assert_eq!(trial_irreducible(&ints(&[-1, 2, -1, 2])), Some(false));
        assert_eq!(trial_irreducible(&ints(&[1, -3, 3, -3, 1])), Some(true));
        assert_eq!(trial_irreducible(&ints(&[-1, -1, 1])), Some(true));
    }

    #[test]
    fn json_shape() {
        let prec = p(128);
        let m = recognize_minpoly(&HPReal::from_f64(prec, 0.5), 2, &Integer::from(100), &tol(prec)).unwrap().unwrap();
        let j = serde_json::to_value(m.relation.to_json()).unwrap();
        assert_eq!(j["degree"], 1);
        assert_eq!(j["coefficients"], serde_json::json!(["-1", "2"]));
        assert_eq!(j["height"], "2");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn quadratic_surds_are_recognized(b in -20i64..=20, c in 1i64..=20, k in 2i64..=30) {
                // x = (b + sqrt k) / c satisfies c^2 X^2 - 2bc X + b^2 - k = 0
                let prec = p(256);
                let root = sqrt_int(&Integer::from(k), prec);
                prop_assume!(root.as_float().is_integer() == false);
                let x = &(&root + &HPReal::from_f64(prec, b as f64)) / &HPReal::from_f64(prec, c as f64);
                let m = recognize_minpoly(&x, 3, &Integer::from(10_000), &tol(prec)).unwrap().unwrap();
                let expect = ints(&[b * b - k, -2 * b * c, c * c]);
                prop_assert_eq!(m.relation.degree, 2);
                prop_assert!(proportional(&m.relation.coefficients, &expect));
                // soundness: the residual bound holds when re-evaluated at twice the precision
                let p2 = p(512);
                let root2 = sqrt_int(&Integer::from(k), p2);
                let x2 = &(&root2 + &HPReal::from_f64(p2, b as f64)) / &HPReal::from_f64(p2, c as f64);
                let powers = [HPReal::one(p2), x2.clone(), &x2 * &x2];
                prop_assert!(residual_of(&m.relation.coefficients, &powers) <= tol(prec));
            }
        }
    }
}
