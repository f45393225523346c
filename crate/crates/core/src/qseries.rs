//! q-Pochhammer products `f(q, z) = prod_{k>=0} (1 - z q^k)` and the double sine
//! function built from them.
//!
//! A product is evaluated in two parts. The leading factors, while `|z q^k|`
//! stays above a switch radius `r`, are multiplied out directly. The tail
//! `prod_{k>=K}(1 - w q^{k-K})` with `|w| <= r` is summed in log form,
//! `-sum_{j>=1} w^j / (j (1 - q^j))`, which converges geometrically in `r`
//! independently of how close `|q|` is to 1. The radius is tuned so that both
//! parts cost about the same, which makes the work grow like
//! `sqrt(1 / (1 - |q|))` rather than linearly.
//!
//! All inputs are taken at face value: the working precision is the larger of
//! the precisions of `q` and `z`, so callers that need guard bits must build
//! their inputs with them.

use rug::{Assign, Float};

use crate::error::{Error, Result};
use crate::extrapolate::Tableau;
use crate::numerics::{complex_exp_2pi_i, HPComplex, HPReal, Precision};

/// `(q, z)` for `f(q, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QPoint {
    pub q: HPComplex,
    pub z: HPComplex,
}

/// `(x, y, tau)` for `f(x, y, tau) = prod_{k>=0}(1 - e^{2 pi i ((k + x) tau + y)})`.
#[derive(Clone, Debug, PartialEq)]
pub struct XYTau {
    pub x: HPReal,
    pub y: HPReal,
    pub tau: HPComplex,
}

impl XYTau {
    /// The equivalent `(q, z) = (e^{2 pi i tau}, e^{2 pi i (x tau + y)})`.
    pub fn to_qpoint(&self) -> Result<QPoint> {
        if !(self.tau.im > 0.0) {
            return Err(Error::Domain { function: "qpochhammer_xy", detail: "Im(tau) must be positive".into() });
        }
        let p = self.tau.prec();
        let q = complex_exp_2pi_i(&self.tau, p)?;
        let xt = self.tau.scale(&self.x);
        let arg = HPComplex::new(&xt.re + &self.y, xt.im);
        let z = complex_exp_2pi_i(&arg, p)?;
        Ok(QPoint { q, z })
    }
}

/// A double sine value with its truncation data.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleSineValue {
    pub value: HPComplex,
    pub truncation_terms: u64,
    pub est_error: HPReal,
}

/// How a product will be split between direct factors and the log series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TermPlan {
    pub direct: u64,
    pub series: u64,
    /// `ln(1 / r)` for the switch radius `r`.
    pub switch_log: f64,
}

impl TermPlan {
    pub fn total(&self) -> u64 {
        self.direct + self.series
    }
}

/// Relative cost of one series term against one direct factor.
const SERIES_COST: f64 = 2.5;

/// Number of direct factors that makes the tail bound
/// `|z| |q|^K <= min(1/2, tol (1 - |q|) / 4)` hold, from `lambda = -ln|q|` and `ln|z|`.
pub fn direct_term_count(lambda: f64, ln_z: f64, abs_tol: f64) -> u64 {
    let one_minus_q = -(-lambda).exp_m1();
    let target = (0.5f64).min(abs_tol * one_minus_q / 4.0).ln();
    steps_below(lambda, ln_z, target)
}

/// Smallest `K >= 0` with `ln_z - K lambda <= target`.
fn steps_below(lambda: f64, ln_z: f64, target: f64) -> u64 {
    if ln_z <= target {
        return 0;
    }
    if lambda == f64::INFINITY {
        return 1;
    }
    ((ln_z - target) / lambda).ceil().max(0.0) as u64
}

/// Smallest `J` with `rho^{J+1} / ((J+1)(1 - |q|)(1 - rho)) <= tol / 2`.
fn series_term_count(ln_rho: f64, lambda: f64, abs_tol: f64) -> u64 {
    let one_minus_q = -(-lambda).exp_m1();
    let one_minus_rho = -ln_rho.exp_m1();
    let slack = (abs_tol / 2.0).ln() + one_minus_q.ln() + one_minus_rho.ln();
    // (J + 1) ln rho - ln(J + 1) <= slack; the log term only helps, so solve without it first
    let mut j = (slack / ln_rho).ceil().max(1.0) as u64 - 1;
    while j > 0 {
        let jj = j as f64;
        if jj * ln_rho - jj.ln() > slack {
            break;
        }
        j -= 1;
    }
    loop {
        let jj = (j + 1) as f64;
        if jj * ln_rho - jj.ln() <= slack {
            return j;
        }
        j += 1;
    }
}

/// Plans the split for `|q| = e^{-lambda}`, `|z| = e^{ln_z}` at tolerance `abs_tol`.
pub fn plan_terms(lambda: f64, ln_z: f64, abs_tol: f64) -> TermPlan {
    let direct_only = direct_term_count(lambda, ln_z, abs_tol);
    if lambda.is_infinite() {
        return TermPlan { direct: direct_only, series: 0, switch_log: f64::INFINITY };
    }
    let digits = (2.0 / abs_tol).ln();
    let ell = (SERIES_COST * digits * lambda).sqrt().max(lambda.min(1e-3));
    let k0 = steps_below(lambda, ln_z, -ell);
    let rho = (ln_z - k0 as f64 * lambda).min(-ell);
    let series = series_term_count(rho, lambda, abs_tol);
    if (direct_only as f64) <= k0 as f64 + SERIES_COST * series as f64 {
        TermPlan { direct: direct_only, series: 0, switch_log: f64::INFINITY }
    } else {
        TermPlan { direct: k0, series, switch_log: ell }
    }
}

/// A product in log form: `log` is one branch of the logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProduct {
    pub log: HPComplex,
    pub direct_terms: u64,
    pub series_terms: u64,
    /// Bound on the truncation error of `log`.
    pub tail_bound: f64,
}

impl LogProduct {
    pub fn terms(&self) -> u64 {
        self.direct_terms + self.series_terms
    }

    pub fn log_abs(&self) -> &HPReal {
        &self.log.re
    }

    pub fn value(&self) -> HPComplex {
        self.log.exp()
    }
}

/// Complex scratch value updated in place to avoid allocation in hot loops.
struct Cx {
    re: Float,
    im: Float,
}

impl Cx {
    fn from_hp(c: &HPComplex, prec: u32) -> Cx {
        Cx { re: Float::with_val(prec, c.re.as_float()), im: Float::with_val(prec, c.im.as_float()) }
    }

    fn one(prec: u32) -> Cx {
        Cx { re: Float::with_val(prec, 1), im: Float::new(prec) }
    }

    fn to_hp(&self) -> HPComplex {
        HPComplex::from_floats(self.re.clone(), self.im.clone())
    }

    /// `self *= other` using `t`, `u` as scratch.
    fn mul_assign(&mut self, other: &Cx, t: &mut Float, u: &mut Float) {
        t.assign(&self.re * &other.im + &self.im * &other.re);
        u.assign(&self.re * &other.re - &self.im * &other.im);
        std::mem::swap(&mut self.re, u);
        std::mem::swap(&mut self.im, t);
    }

    /// `self *= (1 - w)` using `t`, `u` as scratch.
    fn mul_one_minus(&mut self, w: &Cx, t: &mut Float, u: &mut Float) {
        // (a + bi)(1 - c - di) = a - (ac - bd) + (b - (ad + bc)) i
        t.assign(&self.re * &w.re - &self.im * &w.im);
        u.assign(&self.re * &w.im + &self.im * &w.re);
        self.re -= &*t;
        self.im -= &*u;
    }

    fn abs_sqr(&self) -> Float {
        Float::with_val(self.re.prec(), &self.re * &self.re + &self.im * &self.im)
    }
}

fn lambda_of(q: &HPComplex, prec: u32) -> Result<f64> {
    let n = q.norm_sqr();
    if n.is_zero() {
        return Ok(f64::INFINITY);
    }
    let lam = -Float::with_val(prec, n.as_float()).ln() / 2u32;
    let guard = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    if lam < guard {
        return Err(Error::QTooClose(q.abs().to_decimal(20)));
    }
    Ok(lam.to_f64())
}

fn ln_abs(z: &HPComplex) -> f64 {
    z.abs().ln_abs_f64()
}

fn validate_tol(abs_tol: f64) -> Result<()> {
    if !(abs_tol > 0.0 && abs_tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance {abs_tol} must be positive")));
    }
    Ok(())
}

/// Term plan for `f(q, z)` without evaluating it.
pub fn plan_for(q: &HPComplex, z: &HPComplex, abs_tol: f64) -> Result<TermPlan> {
    validate_tol(abs_tol)?;
    let prec = q.prec().max(z.prec());
    let lambda = lambda_of(q, prec)?;
    Ok(plan_terms(lambda, ln_abs(z), abs_tol))
}

/// `log f(q, z)` with `|log error| <= abs_tol / 2`.
pub fn log_qpochhammer(q: &HPComplex, z: &HPComplex, abs_tol: f64) -> Result<LogProduct> {
    validate_tol(abs_tol)?;
    let prec = q.prec().max(z.prec());
    let lambda = lambda_of(q, prec)?;
    let plan = plan_terms(lambda, ln_abs(z), abs_tol);

    let qc = Cx::from_hp(q, prec);
    let mut w = Cx::from_hp(z, prec);
    let mut acc = Cx::one(prec);
    let (mut t, mut u) = (Float::new(prec), Float::new(prec));
    for _ in 0..plan.direct {
        acc.mul_one_minus(&w, &mut t, &mut u);
        w.mul_assign(&qc, &mut t, &mut u);
    }
    let acc_abs = acc.abs_sqr();
    if acc_abs.is_zero() || !acc_abs.is_finite() {
        return Err(Error::NonConvergent("a factor of the product vanishes".into()));
    }
    let log_re = Float::with_val(prec, acc_abs.ln_ref()) / 2u32;
    let log_im = Float::with_val(prec, acc.im.atan2_ref(&acc.re));
    let mut log = HPComplex::from_floats(log_re, log_im);

    let mut tail_bound;
    let mut series_terms = 0;
    let ln_rho = ln_abs(&w.to_hp());
    if plan.series == 0 {
        // |log(1 - v)| <= 2|v| for |v| <= 1/2
        tail_bound = 2.0 * ln_rho.exp() / -(-lambda).exp_m1();
    } else {
        let j_max = series_term_count(ln_rho.min(-plan.switch_log), lambda, abs_tol);
        let mut wp = Cx::one(prec);
        let mut qp = Cx::one(prec);
        let mut sum = Cx { re: Float::new(prec), im: Float::new(prec) };
        let (mut den_re, mut den_im, mut den_n) = (Float::new(prec), Float::new(prec), Float::new(prec));
        for j in 1..=j_max {
            wp.mul_assign(&w, &mut t, &mut u);
            qp.mul_assign(&qc, &mut t, &mut u);
            // term = wp / (j (1 - qp))
            den_re.assign(1 - &qp.re);
            den_im.assign(-&qp.im);
            den_n.assign(&den_re * &den_re + &den_im * &den_im);
            den_n *= j;
            t.assign(&wp.re * &den_re + &wp.im * &den_im);
            t /= &den_n;
            sum.re += &t;
            t.assign(&wp.im * &den_re - &wp.re * &den_im);
            t /= &den_n;
            sum.im += &t;
        }
        series_terms = j_max;
        log = &log - &sum.to_hp();
        let jj = (j_max + 1) as f64;
        tail_bound = (jj * ln_rho - jj.ln() + lambda.ln_1p_neg_exp() - ln_rho.ln_one_minus_exp()).exp();
    }
    if !tail_bound.is_finite() {
        tail_bound = abs_tol / 2.0;
    }
    Ok(LogProduct { log, direct_terms: plan.direct, series_terms, tail_bound })
}

/// Small helpers for the tail bound in log space.
trait LogBounds {
    /// `-ln(1 - e^{-self})` for `self > 0`.
    fn ln_1p_neg_exp(self) -> f64;
    /// `ln(1 - e^{self})` for `self < 0`.
    fn ln_one_minus_exp(self) -> f64;
}

impl LogBounds for f64 {
    fn ln_1p_neg_exp(self) -> f64 {
        -(-(-self).exp_m1()).ln()
    }

    fn ln_one_minus_exp(self) -> f64 {
        (-self.exp_m1()).ln()
    }
}

/// `f(q, z)` with `|returned - true| <= abs_tol (1 + |true|)`.
pub fn qpochhammer(q: &HPComplex, z: &HPComplex, abs_tol: f64) -> Result<HPComplex> {
    Ok(log_qpochhammer(q, z, abs_tol)?.value())
}

/// Plain truncated product `prod_{k<K}(1 - z q^k)` with `K` from [`direct_term_count`].
pub fn qpochhammer_direct(q: &HPComplex, z: &HPComplex, abs_tol: f64) -> Result<HPComplex> {
    validate_tol(abs_tol)?;
    let prec = q.prec().max(z.prec());
    let lambda = lambda_of(q, prec)?;
    let k = direct_term_count(lambda, ln_abs(z), abs_tol);
    Ok(truncated_product(q, z, k))
}

/// `prod_{k<terms}(1 - z q^k)` exactly as written.
pub fn truncated_product(q: &HPComplex, z: &HPComplex, terms: u64) -> HPComplex {
    let prec = q.prec().max(z.prec());
    let qc = Cx::from_hp(q, prec);
    let mut w = Cx::from_hp(z, prec);
    let mut acc = Cx::one(prec);
    let (mut t, mut u) = (Float::new(prec), Float::new(prec));
    for _ in 0..terms {
        acc.mul_one_minus(&w, &mut t, &mut u);
        w.mul_assign(&qc, &mut t, &mut u);
    }
    acc.to_hp()
}

/// `f(x, y, tau)`.
pub fn qpochhammer_xy(x: &HPReal, y: &HPReal, tau: &HPComplex, abs_tol: f64) -> Result<HPComplex> {
    let p = XYTau { x: x.clone(), y: y.clone(), tau: tau.clone() }.to_qpoint()?;
    qpochhammer(&p.q, &p.z, abs_tol)
}

/// `log f(x, y, tau)`.
pub fn log_qpochhammer_xy(x: &HPReal, y: &HPReal, tau: &HPComplex, abs_tol: f64) -> Result<LogProduct> {
    let p = XYTau { x: x.clone(), y: y.clone(), tau: tau.clone() }.to_qpoint()?;
    log_qpochhammer(&p.q, &p.z, abs_tol)
}

fn require_upper(tau: &HPComplex, function: &'static str) -> Result<()> {
    if tau.im > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { function, detail: "Im(tau) must be positive".into() })
    }
}

/// Shintani's product formula
///
/// `S(tau, z) = i^{1/2} e^{(pi i/12)(tau + 1/tau)} e^{(pi i/2)(z^2/tau - (1 + 1/tau) z)}
///   prod_{m>=0}(1 - e^{2 pi i (m tau + z)}) / prod_{m>=1}(1 - e^{2 pi i (z - m)/tau})`
///
/// with `i^{1/2} = e^{i pi/4}`.
pub fn double_sine_tau(tau: &HPComplex, z: &HPComplex, abs_tol: f64) -> Result<DoubleSineValue> {
    require_upper(tau, "double_sine_tau")?;
    let prec = tau.prec().max(z.prec());
    let pr = Precision::new(prec)?;
    let inv = tau.recip()?;

    let q = complex_exp_2pi_i(tau, prec)?;
    let zq = complex_exp_2pi_i(z, prec)?;
    let num = log_qpochhammer(&q, &zq, abs_tol)?;

    // second product: q' = e^{-2 pi i / tau}, leading factor e^{2 pi i (z - 1)/tau}
    let q2 = complex_exp_2pi_i(&(-&inv), prec)?;
    let shifted = &(z * &inv) - &inv;
    let z2 = complex_exp_2pi_i(&shifted, prec)?;
    let den = log_qpochhammer(&q2, &z2, abs_tol)?;

    // exponent of the prefactor divided by pi i
    let pi = HPReal::pi(pr);
    let frac = |n: i32| HPComplex::from_real(&HPReal::one(pr) / &HPReal::with_val(pr, n));
    let a = &(tau + &inv) * &frac(12);
    let lin = &(&HPComplex::one(pr) + &inv) * z;
    let b = &(&(&z.sqr() * &inv) - &lin) * &frac(2);
    let e = &(&a + &b) + &frac(4);
    let pref_log = HPComplex::new(-(&e.im * &pi), &e.re * &pi);

    let total = &(&pref_log + &num.log) - &den.log;
    let value = total.exp();
    let err = HPReal::from_f64(pr, abs_tol) * (&HPReal::one(pr) + &value.abs());
    Ok(DoubleSineValue { value, truncation_terms: num.terms() + den.terms(), est_error: err })
}

/// `log |f(x, y, tau) / f(1 - y, x, -1/tau)|`, the modulus of `S(tau, x tau + y)`
/// with the prefactor stripped.
pub fn log_abs_yamamoto_ratio(x: &HPReal, y: &HPReal, tau: &HPComplex, abs_tol: f64) -> Result<(HPReal, u64)> {
    require_upper(tau, "double_sine_real")?;
    let num = log_qpochhammer_xy(x, y, tau, abs_tol)?;
    let neg_inv = -&tau.recip()?;
    let one_minus_y = &HPReal::one(y.precision()) - y;
    let den = log_qpochhammer_xy(&one_minus_y, x, &neg_inv, abs_tol)?;
    Ok((num.log_abs() - den.log_abs(), num.terms() + den.terms()))
}

/// `log |prefactor|` of the product formula at `z = x tau + y`:
/// `-(pi/2) Im(tau) (B2(x) - B2(y) / |tau|^2)` with `B2(t) = t^2 - t + 1/6`.
pub fn log_abs_prefactor(x: &HPReal, y: &HPReal, tau: &HPComplex) -> HPReal {
    let pr = tau.precision();
    let sixth = &HPReal::one(pr) / &HPReal::with_val(pr, 6);
    let b2 = |t: &HPReal| &(&t.sqr() - t) + &sixth;
    let inner = &b2(x) - &(&b2(y) / &tau.norm_sqr());
    let half_pi = &HPReal::pi(pr) / &HPReal::with_val(pr, 2);
    -(&(&half_pi * &tau.im) * &inner)
}

/// Result of the real double sine evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubleSineReal {
    pub value: HPReal,
    pub log_value: HPReal,
    pub est_error: HPReal,
    /// Number of approach points `omega + i delta_j` used.
    pub levels: usize,
    pub terms: u64,
}

/// Levels tried before giving up.
pub const MAX_APPROACH_LEVELS: usize = 48;

/// `S(omega, x omega + y) = lim |f(x, y, tau)/f(1 - y, x, -1/tau)|` as `tau -> omega`
/// vertically, `tau_j = omega + i delta_0 2^{-j}`, extrapolated to `delta = 0`
/// through a Neville tableau in `delta`.
///
/// The limit is real analytic in `delta` with radius `omega`, so the tableau
/// converges much faster than the first-order step it starts from.
pub fn double_sine_real(omega: &HPReal, x: &HPReal, y: &HPReal, abs_tol: f64) -> Result<DoubleSineReal> {
    validate_tol(abs_tol)?;
    if !(omega > &0.0) {
        return Err(Error::Domain { function: "double_sine_real", detail: "omega must be positive".into() });
    }
    let pr = omega.precision();
    let mut delta = &omega.min_one() / &HPReal::with_val(pr, 2);
    let half = &HPReal::one(pr) / &HPReal::with_val(pr, 2);
    let mut table = Tableau::new();
    let mut deltas: Vec<HPReal> = Vec::new();
    let mut terms = 0;
    let inner_tol = abs_tol / 16.0;
    guard_rational(omega, x, y, abs_tol)?;
    for level in 0..MAX_APPROACH_LEVELS {
        let tau = HPComplex::new(omega.clone(), delta.clone());
        let (log_ratio, t) = log_abs_yamamoto_ratio(x, y, &tau, inner_tol)?;
        terms += t;
        table.push(delta.clone(), log_ratio);
        if let Some(d) = table.diagonal_delta() {
            if level >= 3 && d < abs_tol / 4.0 {
                let log_value = table.best().expect("non-empty").clone();
                let value = eval_exp(&log_value);
                let est_error = &d * &value.max(&HPReal::one(pr));
                return Ok(DoubleSineReal { value, log_value, est_error, levels: level + 1, terms });
            }
            deltas.push(d);
            let n = deltas.len();
            if n > 5 && !(&(&deltas[n - 1] * 3) / 2 <= deltas[n - 6]) {
                return Err(Error::SlowConvergence(format!(
                    "differences {} -> {} over 5 levels",
                    deltas[n - 6].to_decimal(6),
                    deltas[n - 1].to_decimal(6)
                )));
            }
        }
        delta = &delta * &half;
    }
    Err(Error::SlowConvergence(format!("no convergence within {MAX_APPROACH_LEVELS} levels")))
}

/// Factors checked for the rational-`omega` guard.
const GUARD_FACTORS: u64 = 4096;

/// At `delta = 0` the factors are `1 - e^{2 pi i t}` with `t = (k + x) omega + y`
/// in the first product and `t = -(k + 1 - y) / omega + x` in the second. When
/// `omega` is rational one of them can vanish, and the limit no longer
/// describes the double sine; reject when `t` lies within `abs_tol` of an integer.
fn guard_rational(omega: &HPReal, x: &HPReal, y: &HPReal, abs_tol: f64) -> Result<()> {
    let pr = omega.precision();
    let one = HPReal::one(pr);
    let inv = &one / omega;
    let scan = |start: HPReal, step: &HPReal| -> bool {
        let mut t = start;
        for _ in 0..GUARD_FACTORS {
            let frac = HPReal::from_float(Float::with_val(pr.bits(), t.as_float().fract_ref()));
            let dist = frac.abs().min_half_gap();
            if dist < abs_tol {
                return true;
            }
            t = &t + step;
        }
        false
    };
    let first = &(x * omega) + y;
    let second = &(-&(&(&one - y) * &inv)) + x;
    if scan(first, omega) || scan(second, &(-&inv)) {
        return Err(Error::Domain {
            function: "double_sine_real",
            detail: "a factor vanishes in the limit; omega looks rational".into(),
        });
    }
    Ok(())
}

fn eval_exp(x: &HPReal) -> HPReal {
    HPReal::from_float(Float::with_val(x.prec(), x.as_float().exp_ref()))
}

trait MinOne {
    fn min_one(&self) -> HPReal;
    /// Distance from `self` in `[0, 1)` to the nearest integer.
    fn min_half_gap(&self) -> HPReal;
}

impl MinOne for HPReal {
    fn min_one(&self) -> HPReal {
        if self > &1.0 {
            HPReal::one(self.precision())
        } else {
            self.clone()
        }
    }

    fn min_half_gap(&self) -> HPReal {
        let other = &HPReal::one(self.precision()) - self;
        if &other < self {
            other
        } else {
            self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(bits: u32) -> Precision {
        Precision::new(bits).unwrap()
    }

    fn c(prec: Precision, re: f64, im: f64) -> HPComplex {
        HPComplex::from_f64(prec, re, im)
    }

    fn close(a: &HPComplex, b: &HPComplex, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn trivial_products() {
        let prec = p(128);
        let q = c(prec, 0.3, 0.2);
        assert!(close(&qpochhammer(&q, &HPComplex::zero(prec), 1e-30).unwrap(), &HPComplex::one(prec), 1e-35));
        let z = c(prec, 0.25, -0.5);
        let v = qpochhammer(&HPComplex::zero(prec), &z, 1e-30).unwrap();
        assert!(close(&v, &c(prec, 0.75, 0.5), 1e-35));
    }

    #[test]
    fn half_half() {
        // prod_{j>=1}(1 - 2^{-j}) by a 200-term product in exact rationals
        let prec = p(192);
        let mut oracle = rug::Rational::from(1);
        for j in 1..=200u32 {
            let f = rug::Rational::from(1) - rug::Rational::from((1, 1u32)) / rug::Rational::from(rug::Integer::from(1) << j);
            oracle *= f;
        }
        let oracle = crate::numerics::rational_to_hp(&oracle, prec);
        let half = c(prec, 0.5, 0.0);
        let v = qpochhammer(&half, &half, 1e-50).unwrap();
        assert!((&v.re - &oracle).abs() < 1e-50);
        assert!(v.re.to_decimal(10).starts_with("2.887880951"));
    }

    #[test]
    fn series_tail_matches_plain_product() {
        let prec = p(256);
        // |q| close to 1 forces the series path
        let tau = c(prec, 0.381966, 0.0005);
        let point = XYTau { x: HPReal::from_f64(prec, 0.3), y: HPReal::from_f64(prec, 0.7), tau }.to_qpoint().unwrap();
        let plan = plan_for(&point.q, &point.z, 1e-60).unwrap();
        assert!(plan.series > 0);
        let fast = qpochhammer(&point.q, &point.z, 1e-60).unwrap();
        let slow = qpochhammer_direct(&point.q, &point.z, 1e-60).unwrap();
        let rel = (&fast - &slow).abs() / slow.abs();
        assert!(rel < 1e-55, "relative gap {rel}");
        assert!(plan.total() * 20 < direct_term_count(2.0 * std::f64::consts::PI * 0.0005, 0.0, 1e-60));
    }

    #[test]
    fn too_close_to_one() {
        let prec = p(64);
        let q = c(prec, 1.0 - 1e-12, 0.0);
        assert!(matches!(qpochhammer(&q, &c(prec, 0.5, 0.0), 1e-10), Err(Error::QTooClose(_))));
        assert!(matches!(qpochhammer(&c(prec, 1.5, 0.0), &c(prec, 0.5, 0.0), 1e-10), Err(Error::QTooClose(_))));
    }

    #[test]
    fn xy_form_is_a_real_value_at_purely_imaginary_tau() {
        // f(1, 1/4, i) = prod (1 - i e^{-2 pi (k+1)}) and its conjugate partner
        let prec = p(128);
        let tau = c(prec, 0.0, 1.0);
        let one = HPReal::one(prec);
        let quarter = HPReal::from_f64(prec, 0.25);
        let v = qpochhammer_xy(&one, &quarter, &tau, 1e-35).unwrap();
        let q = HPComplex::from_real(eval_exp(&(&HPReal::pi(prec) * -2)));
        let z = HPComplex::new(HPReal::zero(prec), q.re.clone());
        let w = qpochhammer(&q, &z, 1e-35).unwrap();
        assert!(close(&v, &w, 1e-34));
        assert!((&v.abs() - &HPReal::one(prec)).abs() < 0.01);
    }

    #[test]
    fn self_reciprocal_point() {
        let prec = p(192);
        let tau = c(prec, 0.4, 1.3);
        let z = &(&HPComplex::one(prec) + &tau).scale(&HPReal::from_f64(prec, 0.5));
        let s = double_sine_tau(&tau, z, 1e-45).unwrap();
        assert!((&s.value.abs() - &HPReal::one(prec)).abs() < 1e-40);
    }

    #[test]
    fn yamamoto_ratio_plus_prefactor_is_the_double_sine_modulus() {
        let prec = p(192);
        for (tr, ti, x, y) in [(0.7, 0.9, 0.3, 0.6), (2.618, 0.01, 1.0, 0.25), (0.38, 0.2, 0.5, 0.1)] {
            let tau = c(prec, tr, ti);
            let (x, y) = (HPReal::from_f64(prec, x), HPReal::from_f64(prec, y));
            let z = HPComplex::new(&(&tau.re * &x) + &y, &tau.im * &x);
            let s = double_sine_tau(&tau, &z, 1e-45).unwrap();
            let (lr, _) = log_abs_yamamoto_ratio(&x, &y, &tau, 1e-45).unwrap();
            let total = &lr + &log_abs_prefactor(&x, &y, &tau);
            let expected = eval_exp(&total);
            assert!((&s.value.abs() - &expected).abs() < &expected * &HPReal::from_f64(prec, 1e-38));
        }
    }

    #[test]
    fn real_double_sine_at_the_self_reciprocal_point() {
        let prec = p(192);
        let omega = HPReal::from_f64(prec, 0.5) + crate::numerics::sqrt_int(&5.into(), prec) / HPReal::with_val(prec, 2);
        let half = HPReal::from_f64(prec, 0.5);
        let s = double_sine_real(&omega, &half, &half, 1e-40).unwrap();
        assert!((&s.value - &HPReal::one(prec)).abs() < 1e-38, "{}", s.value);
    }

    #[test]
    fn real_reflection() {
        let prec = p(192);
        let omega = crate::numerics::sqrt_int(&5.into(), prec);
        let (x, y) = (HPReal::from_f64(prec, 0.3), HPReal::from_f64(prec, 0.2));
        let one = HPReal::one(prec);
        let a = double_sine_real(&omega, &x, &y, 1e-40).unwrap();
        // 1 + omega - z = (1 - x) omega + (1 - y)
        let b = double_sine_real(&omega, &(&one - &x), &(&one - &y), 1e-40).unwrap();
        assert!((&(&a.value * &b.value) - &one).abs() < 1e-36);
        assert!(a.levels < 30);
    }

    #[test]
    fn rational_omega_is_rejected() {
        let prec = p(128);
        let omega = HPReal::one(prec);
        let x = HPReal::one(prec);
        let y = HPReal::zero(prec);
        assert!(double_sine_real(&omega, &x, &y, 1e-20).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const BITS: u32 = 160;

        fn tol() -> f64 {
            2f64.powi(20 - BITS as i32)
        }

        fn point() -> impl Strategy<Value = (f64, f64, f64, f64)> {
            (0.01f64..1.0, -1.0f64..1.0, -1.5f64..1.5, 0.15f64..2.0)
        }

        fn hp(v: f64) -> HPReal {
            HPReal::from_f64(p(BITS), v)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn y_periodicity((x, y, tr, ti) in point()) {
                let tau = c(p(BITS), tr, ti);
                let a = qpochhammer_xy(&hp(x), &hp(y), &tau, tol() / 64.0).unwrap();
                let b = qpochhammer_xy(&hp(x), &(&hp(y) + &HPReal::one(p(BITS))), &tau, tol() / 64.0).unwrap();
                prop_assert!((&a - &b).abs() <= tol() * (1.0 + a.abs().to_f64()));
            }

            #[test]
            fn tau_shift((x, y, tr, ti) in point()) {
                let tau = c(p(BITS), tr, ti);
                let shifted = &tau + &HPComplex::one(p(BITS));
                let a = qpochhammer_xy(&hp(x), &hp(y), &shifted, tol() / 64.0).unwrap();
                let b = qpochhammer_xy(&hp(x), &(&hp(x) + &hp(y)), &tau, tol() / 64.0).unwrap();
                prop_assert!((&a - &b).abs() <= tol() * (1.0 + a.abs().to_f64()));
            }

            #[test]
            fn parameterizations_agree((x, y, tr, ti) in point()) {
                let prec = p(BITS);
                let tau = c(prec, tr, ti);
                let a = qpochhammer_xy(&hp(x), &hp(y), &tau, tol() / 64.0).unwrap();
                let q = complex_exp_2pi_i(&tau, BITS).unwrap();
                let arg = HPComplex::new(&(&tau.re * &hp(x)) + &hp(y), &tau.im * &hp(x));
                let z = complex_exp_2pi_i(&arg, BITS).unwrap();
                let b = qpochhammer_direct(&q, &z, tol() / 64.0).unwrap();
                prop_assert!((&a - &b).abs() <= tol() * (1.0 + a.abs().to_f64()));
            }

            #[test]
            fn reflection((zr, zi, tr, ti) in (-1.0f64..2.0, -0.5f64..1.0, -1.5f64..1.5, 0.3f64..2.0)) {
                let prec = p(BITS);
                let tau = c(prec, tr, ti);
                let z = c(prec, zr, zi);
                let other = &(&HPComplex::one(prec) + &tau) - &z;
                let a = double_sine_tau(&tau, &z, tol() / 64.0).unwrap();
                let b = double_sine_tau(&tau, &other, tol() / 64.0).unwrap();
                let prod = &a.value * &b.value;
                prop_assert!((&prod - &HPComplex::one(prec)).abs() <= tol() * 4.0, "{}", prod);
            }

            #[test]
            fn halving_tolerance_stays_within_bound((x, y, tr, ti) in point(), e in 10i32..40) {
                let tau = c(p(BITS), tr, ti * 0.1);
                let t = 10f64.powi(-e);
                let a = log_qpochhammer_xy(&hp(x), &hp(y), &tau, t).unwrap();
                let b = log_qpochhammer_xy(&hp(x), &hp(y), &tau, t / 2.0).unwrap();
                let va = a.value();
                let gap = (&va - &b.value()).abs();
                prop_assert!(gap <= t * (1.0 + va.abs().to_f64()));
                prop_assert!(a.tail_bound <= t / 2.0 * 1.0001);
            }
        }
    }
}
