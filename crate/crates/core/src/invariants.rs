//! Estimates of the invariants `X_1`, `X_2` and `X = X_1 X_2` for the unit ray
//! class of a principal conductor.
//!
//! Every geodesic method produces a value at a finite index `n` that tends to
//! `X_1` as `n` grows:
//!
//! * `Expr1Limit`: `|f(x, y, tau_n) / f(x, y, tau_{n+2g})|` for an orbit pair `(x, y)`.
//! * `DoubleSineProd`: `|prod_k S(tau_{n+2(g-k)}, x_k tau + y_k)|`.
//! * `Expr2SingleQ`: expression 1 for `nu = m` regrouped over the single nome
//!   `q~ = e^{-2 pi sqrt d}`.
//! * `Expr3Real`: the same product written with real `sin^2 + sinh^2` factors
//!   along the subsequence `n = 2 g j`.
//!
//! `X1Generic` and `X2Generic` evaluate `prod_k S(omega, z_k)` at `omega = eps`
//! and `omega = eps'` directly through the vertical limit in [`qseries`].

use std::fmt;
use std::time::Instant;

use rug::{Assign, Complete, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::chebyshev::Geodesic;
use crate::cone::{decomposition, ConeDatum, DecompositionDatum};
use crate::error::{Error, Result};
use crate::extrapolate::{richardson_first_order, Tableau};
use crate::numerics::{exp_2pi_i_rational, frac_part, rational_to_hp, HPComplex, HPReal, Precision};
use crate::qseries::{self, double_sine_real, double_sine_tau, log_qpochhammer, plan_terms};
use crate::quadratic_field::{LengthOneField, PrincipalConductor};

/// Default cap on the number of product factors one estimate may use.
pub const DEFAULT_FACTOR_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_FACTOR_BUDGET`].
pub const BUDGET_ENV: &str = "SHINTANI_FACTOR_BUDGET";

/// Exact `Z_f` values are re-seeded from their rational phase this often in
/// long recurrences, so rounding drift never builds up over more than this many steps.
const RESEED: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Settings {
    pub precision: Precision,
    pub factor_budget: u64,
}

impl Settings {
    /// Precision as given, budget from [`BUDGET_ENV`] or the default.
    pub fn new(precision: Precision) -> Self {
        Settings { precision, factor_budget: budget_from_env() }
    }

    pub fn with_budget(self, factor_budget: u64) -> Self {
        Settings { factor_budget, ..self }
    }

    /// Tolerance handed to every product: `2^-(precision + 8)`.
    pub fn tolerance(&self) -> f64 {
        2f64.powi(-(self.precision.bits() as i32 + 8))
    }
}

impl Default for Settings {
    fn default() -> Self {
        Settings::new(Precision::default())
    }
}

/// Reads [`BUDGET_ENV`], accepting plain integers and forms like `1e8`.
pub fn budget_from_env() -> u64 {
    std::env::var(BUDGET_ENV).ok().and_then(|s| parse_budget(&s)).unwrap_or(DEFAULT_FACTOR_BUDGET)
}

pub fn parse_budget(s: &str) -> Option<u64> {
    let s = s.trim().replace('_', "");
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 1.0).map(|v| v as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "expr1")]
    Expr1Limit,
    #[serde(rename = "expr2")]
    Expr2SingleQ,
    #[serde(rename = "expr3")]
    Expr3Real,
    #[serde(rename = "dsine")]
    DoubleSineProd,
    #[serde(rename = "x1")]
    X1Generic,
    #[serde(rename = "x2")]
    X2Generic,
    #[serde(rename = "x")]
    Full,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Expr1Limit => "expr1",
            Method::Expr2SingleQ => "expr2",
            Method::Expr3Real => "expr3",
            Method::DoubleSineProd => "dsine",
            Method::X1Generic => "x1",
            Method::X2Generic => "x2",
            Method::Full => "x",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        let all = [
            Method::Expr1Limit,
            Method::Expr2SingleQ,
            Method::Expr3Real,
            Method::DoubleSineProd,
            Method::X1Generic,
            Method::X2Generic,
            Method::Full,
        ];
        if s == "full" {
            return Some(Method::Full);
        }
        all.into_iter().find(|m| m.name() == s)
    }

    /// Whether the method is indexed by a geodesic `n` (or `j` for expression 3).
    pub fn is_geodesic(self) -> bool {
        matches!(self, Method::Expr1Limit | Method::Expr2SingleQ | Method::Expr3Real | Method::DoubleSineProd)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index conventions for expressions 2 and 3.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `r = 0..T_n - 1` and `z_{n,r} = zeta_m q_n^r`, the regrouping of expression 1.
    #[default]
    Derived,
    /// `r = 0..T_n` and `z_{n,r} = e^{2 pi i r (T_{n+1}/T_n + 1/m)} e^{-2 pi sqrt(d) r / T_n}`.
    PaperLiteral,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "derived" => Some(Mode::Derived),
            "paper_literal" | "paper-literal" | "literal" => Some(Mode::PaperLiteral),
            _ => None,
        }
    }
}

/// One estimate with enough context to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantEstimate {
    pub method: Method,
    /// Geodesic index (`j` for expression 3); `None` for the generic evaluators.
    pub n: Option<u64>,
    pub value: HPReal,
    pub err_est: HPReal,
    pub a: i64,
    pub d: i64,
    pub nu: String,
    pub m: Option<i64>,
    pub g: u64,
    pub precision_bits: u32,
    pub mode: Option<Mode>,
    pub factors: u64,
    pub wall_ms: u64,
}

/// JSON form of an [`InvariantEstimate`]; high-precision values are decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantRecord {
    pub method: Method,
    pub a: i64,
    pub d: i64,
    pub nu: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<i64>,
    pub g: u64,
    pub n: Option<u64>,
    pub precision_bits: u32,
    pub value_dec: String,
    pub err_est_dec: String,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub factors: u64,
}

impl InvariantEstimate {
    pub fn to_record(&self) -> InvariantRecord {
        InvariantRecord {
            method: self.method,
            a: self.a,
            d: self.d,
            nu: self.nu.clone(),
            m: self.m,
            g: self.g,
            n: self.n,
            precision_bits: self.precision_bits,
            value_dec: self.value.to_decimal_full(),
            err_est_dec: self.err_est.to_decimal(12),
            wall_ms: self.wall_ms,
            mode: self.mode,
            factors: self.factors,
        }
    }
}

impl InvariantRecord {
    pub fn to_estimate(&self) -> Result<InvariantEstimate> {
        let prec = Precision::new(self.precision_bits)?;
        Ok(InvariantEstimate {
            method: self.method,
            n: self.n,
            value: HPReal::parse_decimal(&self.value_dec, prec)?,
            err_est: HPReal::parse_decimal(&self.err_est_dec, prec)?,
            a: self.a,
            d: self.d,
            nu: self.nu.clone(),
            m: self.m,
            g: self.g,
            precision_bits: self.precision_bits,
            mode: self.mode,
            factors: self.factors,
            wall_ms: self.wall_ms,
        })
    }
}

/// A raw value at one index, before any error estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub value: HPReal,
    pub factors: u64,
}

/// Everything needed to evaluate invariants for one `(field, nu)`.
#[derive(Debug)]
pub struct Invariants {
    field: LengthOneField,
    conductor: PrincipalConductor,
    datum: DecompositionDatum,
    geo: Geodesic,
    settings: Settings,
}

fn exp_hp(x: &HPReal) -> HPReal {
    HPReal::from_float(Float::with_val(x.prec(), x.as_float().exp_ref()))
}

fn two_pi_f64() -> f64 {
    2.0 * std::f64::consts::PI
}

impl Invariants {
    pub fn new(field: &LengthOneField, nu: &PrincipalConductor, settings: Settings) -> Result<Self> {
        let datum = decomposition(field, nu)?;
        Ok(Invariants {
            field: field.clone(),
            conductor: nu.clone(),
            datum,
            geo: Geodesic::new(field.clone()),
            settings,
        })
    }

    pub fn field(&self) -> &LengthOneField {
        &self.field
    }

    pub fn datum(&self) -> &DecompositionDatum {
        &self.datum
    }

    pub fn settings(&self) -> Settings {
        self.settings
    }

    pub fn g(&self) -> u64 {
        self.datum.g
    }

    /// `m` when the conductor is a rational integer.
    pub fn rational_m(&self) -> Result<i64> {
        self.conductor
            .as_rational_integer()
            .and_then(|m| m.to_i64())
            .ok_or_else(|| Error::ConductorNotRational(self.conductor.to_string()))
    }

    fn cheb(&self, n: u64) -> Integer {
        self.geo.cheb(n)
    }

    /// Target precision plus guard bits for `terms` factors around `tau_N`: the
    /// logs being subtracted are of size about `T_N`, and `1 - q^j` loses about
    /// `log2 T_N` bits to cancellation.
    fn working_precision(&self, big_n: u64, terms: u64) -> Precision {
        let t_bits = self.cheb(big_n).significant_bits();
        self.settings.precision.with_guard(terms.max(1)).plus(2 * t_bits + 8)
    }

    fn check_budget(&self, needed: u64) -> Result<()> {
        if needed > self.settings.factor_budget {
            return Err(Error::BudgetExceeded { needed, budget: self.settings.factor_budget });
        }
        Ok(())
    }

    fn lambda(&self, big_n: u64) -> f64 {
        // -ln|q_N| = 2 pi sqrt(d) / T_N
        two_pi_f64() * (self.field.d() as f64).sqrt() / self.cheb(big_n).to_f64()
    }

    fn plan_xy(&self, x: &Rational, big_n: u64) -> u64 {
        let lam = self.lambda(big_n);
        plan_terms(lam, -lam * x.to_f64(), self.settings.tolerance()).total()
    }

    fn anchor(&self, l: u64) -> &ConeDatum {
        &self.datum.data[(l % self.g()) as usize]
    }

    // ----- expression 1 -----

    /// Factor count for expression 1 at `n` with anchor `l`.
    pub fn expr1_cost(&self, n: u64, l: u64) -> u64 {
        let c = self.anchor(l);
        self.plan_xy(&c.x, n) + self.plan_xy(&c.x, n + 2 * self.g())
    }

    /// `(q, z)` for `f(x, y, tau_N)` from exact rational phases.
    fn xy_point(&self, x: &Rational, y: &Rational, big_n: u64, wp: Precision) -> (HPComplex, HPComplex) {
        let t = self.cheb(big_n);
        let t1 = self.cheb(big_n + 1);
        let re = Rational::from((t1, t.clone()));
        let im = &self.geo.sqrt_d(wp) / &rational_to_hp(&Rational::from(t), wp);
        let q = exp_2pi_i_rational(&re, &im, wp);
        let phase = Rational::from(x * &re) + y;
        let z = exp_2pi_i_rational(&phase, &im.mul_rational(x), wp);
        (q, z)
    }

    fn log_abs_f(&self, x: &Rational, y: &Rational, big_n: u64, wp: Precision) -> Result<(HPReal, u64)> {
        let (q, z) = self.xy_point(x, y, big_n, wp);
        let lp = log_qpochhammer(&q, &z, self.settings.tolerance())?;
        Ok((lp.log_abs().clone(), lp.terms()))
    }

    /// `|f(x_l, y_l, tau_n) / f(x_l, y_l, tau_{n+2g})|`; `l = 0` is the anchor pair.
    pub fn expr1_sample(&self, n: u64, l: u64) -> Result<Sample> {
        let cost = self.expr1_cost(n, l);
        self.check_budget(cost)?;
        let c = self.anchor(l);
        let top = n + 2 * self.g();
        let wp = self.working_precision(top, cost);
        let (num, t1) = self.log_abs_f(&c.x, &c.y, n, wp)?;
        let (den, t2) = self.log_abs_f(&c.x, &c.y, top, wp)?;
        let value = exp_hp(&(&num - &den)).round_to(self.settings.precision);
        Ok(Sample { value, factors: t1 + t2 })
    }

    // ----- double sine product along the geodesic -----

    /// Factor count for the double-sine product at `n`.
    pub fn dsine_cost(&self, n: u64) -> u64 {
        let g = self.g();
        let d = (self.field.d() as f64).sqrt();
        let tol = self.settings.tolerance();
        (1..=g)
            .map(|k| {
                let c = self.datum.entry(k as i64);
                let idx = n + 2 * (g - k);
                let lam = self.lambda(idx);
                // second product lives at -1/tau_M, whose imaginary part is that of tau_{M+2}
                let lam2 = two_pi_f64() * d / self.cheb(idx + 2).to_f64();
                let one_minus_y = 1.0 - c.y.to_f64();
                plan_terms(lam, -lam * c.x.to_f64(), tol).total()
                    + plan_terms(lam2, -lam2 * one_minus_y, tol).total()
            })
            .sum()
    }

    /// `|prod_{k=1}^{g} S(tau~_k, x_k tau~_k + y_k)|` with `tau~_k = tau_{n+2(g-k)}`,
    /// so that `tau~_g = tau_n` and `tau~_{k-1} = U tau~_k`.
    pub fn dsine_sample(&self, n: u64) -> Result<Sample> {
        let cost = self.dsine_cost(n);
        self.check_budget(cost)?;
        let g = self.g();
        let wp = self.working_precision(n + 2 * g + 2, cost);
        let tol = self.settings.tolerance();
        let mut log_total = HPReal::zero(wp);
        let mut factors = 0;
        for k in 1..=g {
            let c = self.datum.entry(k as i64);
            let tau = self.geo.tau(n + 2 * (g - k), wp).tau;
            let z = HPComplex::new(
                (&tau.re.mul_rational(&c.x)).add_rational(&c.y),
                tau.im.mul_rational(&c.x),
            );
            let s = double_sine_tau(&tau, &z, tol)?;
            factors += s.truncation_terms;
            log_total = &log_total + &HPReal::from_float(Float::with_val(wp.bits(), s.value.abs().as_float().ln_ref()));
        }
        Ok(Sample { value: exp_hp(&log_total).round_to(self.settings.precision), factors })
    }

    // ----- expression 2 -----

    fn inner_terms(&self) -> (f64, u64) {
        // q~ = e^{-2 pi sqrt d}; terms so that q~^K <= min(1/2, tol (1 - q~)/4)
        let lam = two_pi_f64() * (self.field.d() as f64).sqrt();
        (lam, qseries::direct_term_count(lam, 0.0, self.settings.tolerance() / 4.0).max(1))
    }

    /// Number of outer values `z_{n,r}` for the mode.
    fn outer_count(&self, big_n: u64, mode: Mode) -> Integer {
        match mode {
            Mode::Derived => self.cheb(big_n),
            Mode::PaperLiteral => self.cheb(big_n) + 1u32,
        }
    }

    pub fn expr2_cost(&self, n: u64, mode: Mode) -> u64 {
        let (_, k) = self.inner_terms();
        let outer = self.outer_count(n, mode) + self.outer_count(n + 2 * self.g(), mode);
        outer.to_u64().unwrap_or(u64::MAX).saturating_mul(k)
    }

    /// `log |prod_r f(q~, z_{N,r})|`.
    fn log_abs_expr2_side(&self, m: i64, big_n: u64, mode: Mode, wp: Precision) -> Result<(HPReal, u64)> {
        let t = self.cheb(big_n);
        let t1 = self.cheb(big_n + 1);
        let count = self.outer_count(big_n, mode).to_u64().ok_or(Error::BudgetExceeded {
            needed: u64::MAX,
            budget: self.settings.factor_budget,
        })?;
        let (lam, k_inner) = self.inner_terms();
        let p = wp.bits();
        let sqrt_d = self.geo.sqrt_d(wp);
        let qt = exp_hp(&(&(&HPReal::pi(wp) * -2) * &sqrt_d)).into_float();
        let inv_m = Rational::from((1, m));
        let re_tau = Rational::from((t1.clone(), t.clone()));
        // phase and decay of z_{N,r}, exactly
        let phase_at = |r: &Integer| -> Rational {
            match mode {
                Mode::Derived => Rational::from(((r * &t1).complete() % &t, t.clone())) + &inv_m,
                Mode::PaperLiteral => frac_part(&(Rational::from(&re_tau + &inv_m) * r)),
            }
        };
        let decay_at = |r: &Integer| -> HPReal {
            &sqrt_d.mul_int(r) / &rational_to_hp(&Rational::from(t.clone()), wp)
        };
        // step multiplier z_{r+1} / z_r
        let step_phase = match mode {
            Mode::Derived => re_tau.clone(),
            Mode::PaperLiteral => Rational::from(&re_tau + &inv_m),
        };
        let step = exp_2pi_i_rational(&step_phase, &decay_at(&Integer::from(1)), wp);
        let (step_re, step_im) = (step.re.into_float(), step.im.into_float());

        let mut log_acc = Float::new(p);
        let mut acc = Float::with_val(p, 1);
        let (mut zr, mut zi) = (Float::new(p), Float::new(p));
        let (mut wr, mut wi) = (Float::new(p), Float::new(p));
        let (mut s, mut u) = (Float::new(p), Float::new(p));
        let mut factors = 0u64;
        for r in 0..count {
            if r % RESEED == 0 {
                let ri = Integer::from(r);
                let z = exp_2pi_i_rational(&phase_at(&ri), &decay_at(&ri), wp);
                zr = z.re.into_float();
                zi = z.im.into_float();
                // keep the running product well inside the exponent range
                log_acc += Float::with_val(p, acc.ln_ref());
                acc.assign(1u32);
            }
            wr.clone_from(&zr);
            wi.clone_from(&zi);
            // the r = 0 factor 1 - 1 of the literal form vanishes identically; it is
            // common to both sides of the quotient and is left out
            let skip_first = mode == Mode::PaperLiteral && r == 0;
            for k in 0..k_inner {
                if !(skip_first && k == 0) {
                    // |1 - w|^2 = (1 - Re w)^2 + (Im w)^2
                    s.assign(1 - &wr);
                    s.square_mut();
                    u.assign(wi.square_ref());
                    s += &u;
                    acc *= &s;
                    factors += 1;
                }
                wr *= &qt;
                wi *= &qt;
            }
            s.assign(&zr * &step_re - &zi * &step_im);
            u.assign(&zr * &step_im + &zi * &step_re);
            std::mem::swap(&mut zr, &mut s);
            std::mem::swap(&mut zi, &mut u);
        }
        let _ = lam;
        log_acc += Float::with_val(p, acc.ln_ref());
        log_acc /= 2u32;
        Ok((HPReal::from_float(log_acc), factors))
    }

    /// `|prod_r f(q~, z_{n,r}) / prod_r f(q~, z_{n+2g,r})|` for `nu = m`.
    pub fn expr2_sample(&self, n: u64, mode: Mode) -> Result<Sample> {
        let m = self.rational_m()?;
        let cost = self.expr2_cost(n, mode);
        self.check_budget(cost)?;
        let top = n + 2 * self.g();
        let wp = self.working_precision(top, cost);
        let (num, f1) = self.log_abs_expr2_side(m, n, mode, wp)?;
        let (den, f2) = self.log_abs_expr2_side(m, top, mode, wp)?;
        let value = exp_hp(&(&num - &den)).round_to(self.settings.precision);
        Ok(Sample { value, factors: f1 + f2 })
    }

    // ----- expression 3 -----

    /// Smallest `k_max` whose tail bound meets the tolerance at geodesic index `N`.
    pub fn expr3_k_max(&self, big_n: u64) -> u64 {
        let mut k = 0;
        while self.expr3_tail_bound(big_n, k) > self.settings.tolerance() {
            k += 1;
        }
        k
    }

    /// Bound on `|log|` of the dropped layers `k > k_max`: every dropped factor is
    /// `|1 - w|^2` with `|w| <= e^{-2 pi sqrt(d) (r/T_N + k)}`.
    pub fn expr3_tail_bound(&self, big_n: u64, k_max: u64) -> f64 {
        let lam = two_pi_f64() * (self.field.d() as f64).sqrt();
        let t = self.cheb(big_n).to_f64();
        let over_r = (1.0 / -(-lam / t).exp_m1()).min(t + 1.0);
        let per_k = (-lam * (k_max + 1) as f64).exp() / -(-lam).exp_m1();
        4.0 * over_r * per_k
    }

    pub fn expr3_cost(&self, j: u64, k_max: u64) -> u64 {
        let g = self.g();
        let outer = self.cheb(2 * g * j) + self.cheb(2 * g * (j + 1));
        outer.to_u64().unwrap_or(u64::MAX).saturating_mul(k_max + 1)
    }

    /// `log prod_r prod_{k<=k_max} 2 e^{-pi sqrt(d) v} sqrt(sin^2(pi u) + sinh^2(pi sqrt(d) v))`
    /// at geodesic index `N`.
    fn log_expr3_side(&self, m: i64, big_n: u64, k_max: u64, mode: Mode, wp: Precision) -> Result<(HPReal, u64)> {
        let t = self.cheb(big_n);
        let t1 = self.cheb(big_n + 1);
        let count = self.outer_count(big_n, mode).to_u64().unwrap_or(u64::MAX);
        let p = wp.bits();
        let pi = HPReal::pi(wp).into_float();
        let sqrt_d = self.geo.sqrt_d(wp).into_float();
        let inv_m = Rational::from((1, m));
        let re_tau = Rational::from((t1.clone(), t.clone()));
        let t_f = Float::with_val(p, &t);
        // u_r = r c + u_0 and v_r = r / T_N + k
        let c = match mode {
            Mode::Derived => re_tau.clone(),
            Mode::PaperLiteral => Rational::from(&re_tau + &inv_m),
        };
        let u_at = |r: &Integer| -> Rational {
            match mode {
                Mode::Derived => Rational::from(((r * &t1).complete() % &t, t.clone())) + &inv_m,
                Mode::PaperLiteral => frac_part(&(Rational::from(&c * r))),
            }
        };
        let rot = Float::with_val(p, &pi * &frac_part(&c));
        let (rot_s, rot_c) = rot.sin_cos(Float::new(p));
        // pi sqrt(d) / T_N and its exponential, for e^{pi sqrt(d) v}
        let grow_step = Float::with_val(p, &pi * &sqrt_d) / &t_f;
        let grow = Float::with_val(p, grow_step.exp_ref());
        let layer = Float::with_val(p, Float::with_val(p, &pi * &sqrt_d).exp_ref());
        let shrink = Float::with_val(p, grow.recip_ref());
        let layer_down = Float::with_val(p, layer.recip_ref());

        let mut log_acc = Float::new(p);
        let mut acc = Float::with_val(p, 1);
        let (mut sn, mut cs) = (Float::new(p), Float::new(p));
        let (mut e_up, mut e_down) = (Float::new(p), Float::new(p));
        let (mut a, mut b, mut s2) = (Float::new(p), Float::new(p), Float::new(p));
        let (mut g_k, mut h_k, mut f) = (Float::new(p), Float::new(p), Float::new(p));
        let mut factors = 0u64;
        for r in 0..count {
            if r % RESEED == 0 {
                let ri = Integer::from(r);
                let ang = Float::with_val(p, &pi * &u_at(&ri));
                let (s_, c_) = ang.sin_cos(Float::new(p));
                sn = s_;
                cs = c_;
                e_up = Float::with_val(p, &grow_step * &ri);
                e_up.exp_mut();
                e_down = Float::with_val(p, e_up.recip_ref());
                log_acc += Float::with_val(p, acc.ln_ref());
                acc.assign(1u32);
            }
            s2.assign(sn.square_ref());
            s2 *= 4u32;
            g_k.clone_from(&e_up);
            h_k.clone_from(&e_down);
            for k in 0..=k_max {
                // with g = e^{pi sqrt(d) v} and h = 1/g, sinh = (g - h)/2 and
                // 4 e^{-2 pi sqrt(d) v} (sin^2 + sinh^2) = h^2 (4 sin^2 + (g - h)^2);
                // at u = v = 0 (literal range, r = k = 0) the factor is exactly zero on
                // both sides of the quotient and is left out
                let vanishing = s2.is_zero() && k == 0 && r == 0;
                if !vanishing {
                    a.assign(&g_k - &h_k);
                    a.square_mut();
                    a += &s2;
                    f.assign(h_k.square_ref());
                    f *= &a;
                    acc *= &f;
                    factors += 1;
                }
                g_k *= &layer;
                h_k *= &layer_down;
            }
            // rotate (cos, sin) of pi u by pi c; grow e^{pi sqrt(d) r / T_N}
            a.assign(&cs * &rot_c - &sn * &rot_s);
            b.assign(&sn * &rot_c + &cs * &rot_s);
            std::mem::swap(&mut cs, &mut a);
            std::mem::swap(&mut sn, &mut b);
            e_up *= &grow;
            e_down *= &shrink;
        }
        log_acc += Float::with_val(p, acc.ln_ref());
        log_acc /= 2u32;
        Ok((HPReal::from_float(log_acc), factors))
    }

    /// Expression 3 at subsequence index `j`: numerator at `N = 2 g j`,
    /// denominator at `N' = 2 g (j + 1)`.
    pub fn expr3_sample(&self, j: u64, k_max: Option<u64>, mode: Mode) -> Result<Sample> {
        let m = self.rational_m()?;
        let g = self.g();
        let (lo, hi) = (2 * g * j, 2 * g * (j + 1));
        let k_max = match k_max {
            Some(k) => {
                let bound = self.expr3_tail_bound(hi, k);
                if bound > self.settings.tolerance() {
                    return Err(Error::TailTooLarge {
                        bound: format!("{bound:.3e}"),
                        tol: format!("{:.3e}", self.settings.tolerance()),
                    });
                }
                k
            }
            None => self.expr3_k_max(hi),
        };
        let cost = self.expr3_cost(j, k_max);
        self.check_budget(cost)?;
        // real factors: only the size of the logs (about T_N) costs guard bits
        let wp = self.settings.precision.with_guard(cost.max(1)).plus(self.cheb(hi).significant_bits() + 8);
        let (num, f1) = self.log_expr3_side(m, lo, k_max, mode, wp)?;
        let (den, f2) = self.log_expr3_side(m, hi, k_max, mode, wp)?;
        let value = exp_hp(&(&num - &den)).round_to(self.settings.precision);
        Ok(Sample { value, factors: f1 + f2 })
    }

    // ----- generic evaluators -----

    fn generic_product(&self, omega: &HPReal) -> Result<(HPReal, HPReal, u64)> {
        let pr = self.settings.precision;
        let tol = self.settings.tolerance();
        let mut log_total = HPReal::zero(omega.precision());
        let mut rel_err = 0f64;
        let mut terms = 0;
        for c in &self.datum.data {
            let x = rational_to_hp(&c.x, omega.precision());
            let y = rational_to_hp(&c.y, omega.precision());
            let s = double_sine_real(omega, &x, &y, tol)?;
            log_total = &log_total + &s.log_value;
            rel_err += (&s.est_error / &s.value).to_f64();
            terms += s.terms;
        }
        let value = exp_hp(&log_total).round_to(pr);
        let err = &value * &HPReal::from_f64(pr, rel_err.max(tol));
        Ok((value, err, terms))
    }

    fn generic_precision(&self) -> Precision {
        self.settings.precision.plus(64)
    }

    /// `X_1 = prod_k S(eps, z_k)` through the vertical limit.
    pub fn x1_generic(&self) -> Result<InvariantEstimate> {
        let start = Instant::now();
        let omega = self.field.epsilon_hp(self.generic_precision());
        let (value, err, terms) = self.generic_product(&omega)?;
        Ok(self.estimate(Method::X1Generic, None, value, err, terms, None, start))
    }

    /// `X_2 = prod_k S(eps', z_k')` with `z_k' = x_k eps' + y_k`.
    pub fn x2_generic(&self) -> Result<InvariantEstimate> {
        let start = Instant::now();
        let wp = self.generic_precision();
        let eps = self.field.epsilon_hp(wp);
        let omega = &HPReal::from_f64(wp, self.field.a() as f64) - &eps;
        let (value, err, terms) = self.generic_product(&omega)?;
        Ok(self.estimate(Method::X2Generic, None, value, err, terms, None, start))
    }

    /// `X = X_1 X_2` from the two generic evaluations.
    pub fn full(&self) -> Result<[InvariantEstimate; 3]> {
        let start = Instant::now();
        let x1 = self.x1_generic()?;
        let x2 = self.x2_generic()?;
        let value = &x1.value * &x2.value;
        let err = &(&x1.err_est * &x2.value) + &(&x2.err_est * &x1.value);
        let x = self.estimate(Method::Full, None, value, err, x1.factors + x2.factors, None, start);
        Ok([x1, x2, x])
    }

    // ----- sampling and estimates -----

    /// Raw value of a geodesic method at index `n` (`j` for expression 3).
    pub fn sample(&self, method: Method, n: u64, mode: Mode) -> Result<Sample> {
        match method {
            Method::Expr1Limit => self.expr1_sample(n, 0),
            Method::DoubleSineProd => self.dsine_sample(n),
            Method::Expr2SingleQ => self.expr2_sample(n, mode),
            Method::Expr3Real => self.expr3_sample(n, None, mode),
            other => Err(Error::InvalidArgument(format!("{other} is not indexed by n"))),
        }
    }

    /// Factor count of [`Invariants::sample`] without running it.
    pub fn cost(&self, method: Method, n: u64, mode: Mode) -> Result<u64> {
        match method {
            Method::Expr1Limit => Ok(self.expr1_cost(n, 0)),
            Method::DoubleSineProd => Ok(self.dsine_cost(n)),
            Method::Expr2SingleQ => {
                self.rational_m()?;
                Ok(self.expr2_cost(n, mode))
            }
            Method::Expr3Real => {
                self.rational_m()?;
                let k = self.expr3_k_max(2 * self.g() * (n + 1));
                Ok(self.expr3_cost(n, k))
            }
            other => Err(Error::InvalidArgument(format!("{other} is not indexed by n"))),
        }
    }

    /// Largest index `n <= cap` whose cost fits the factor budget.
    pub fn max_index_within_budget(&self, method: Method, mode: Mode, cap: u64) -> Result<Option<u64>> {
        let mut best = None;
        for n in 0..=cap {
            if self.cost(method, n, mode)? <= self.settings.factor_budget {
                best = Some(n);
            } else {
                break;
            }
        }
        Ok(best)
    }

    /// Geodesic index whose `1 / T` drives the error of `method` at `n`.
    pub fn step_index(&self, method: Method, n: u64) -> u64 {
        match method {
            Method::Expr3Real => 2 * self.g() * n,
            _ => n,
        }
    }

    /// One estimate at `n`, with `err_est = |value(n) - value(n-1)|` when `n >= 1`.
    pub fn estimate_at(&self, method: Method, n: u64, mode: Mode) -> Result<InvariantEstimate> {
        let start = Instant::now();
        let cur = self.sample(method, n, mode)?;
        let (err, extra) = if n >= 1 {
            let prev = self.sample(method, n - 1, mode)?;
            ((&cur.value - &prev.value).abs(), prev.factors)
        } else {
            (cur.value.clone(), 0)
        };
        let mode = matches!(method, Method::Expr2SingleQ | Method::Expr3Real).then_some(mode);
        Ok(self.estimate(method, Some(n), cur.value, err, cur.factors + extra, mode, start))
    }

    #[allow(clippy::too_many_arguments)]
    fn estimate(
        &self,
        method: Method,
        n: Option<u64>,
        value: HPReal,
        err_est: HPReal,
        factors: u64,
        mode: Option<Mode>,
        start: Instant,
    ) -> InvariantEstimate {
        InvariantEstimate {
            method,
            n,
            value,
            err_est,
            a: self.field.a(),
            d: self.field.d(),
            nu: self.conductor.to_string(),
            m: self.conductor.as_rational_integer().and_then(|m| m.to_i64()),
            g: self.g(),
            precision_bits: self.settings.precision.bits(),
            mode,
            factors,
            wall_ms: start.elapsed().as_millis() as u64,
        }
    }

    /// Runs `method` over `ns` (ascending) and extrapolates in `h = 1/T`.
    pub fn converge(&self, method: Method, ns: &[u64], mode: Mode) -> Result<ConvergenceTable> {
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n values must be strictly ascending".into()));
        }
        let mut samples = Vec::with_capacity(ns.len());
        for &n in ns {
            let start = Instant::now();
            let s = self.sample(method, n, mode)?;
            samples.push((n, s, start.elapsed().as_millis() as u64));
        }
        let pr = self.settings.precision;
        let steps: Vec<HPReal> = ns
            .iter()
            .map(|&n| rational_to_hp(&Rational::from((1, self.cheb(self.step_index(method, n)))), pr))
            .collect();
        Ok(ConvergenceTable::build(method, &steps, samples))
    }
}

/// One row of a [`ConvergenceTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub n: u64,
    pub h: HPReal,
    pub value: HPReal,
    /// `value(n) - value(previous n)`.
    pub delta: Option<HPReal>,
    /// First-order Richardson step in `h` from the previous row.
    pub richardson: Option<HPReal>,
    /// Full Neville estimate from every row so far.
    pub extrapolated: HPReal,
    /// Change of the full estimate against the previous row.
    pub extrapolation_delta: Option<HPReal>,
    pub factors: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub method: Method,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    fn build(method: Method, steps: &[HPReal], samples: Vec<(u64, Sample, u64)>) -> Self {
        let mut tableau = Tableau::new();
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(samples.len());
        for (i, (n, s, ms)) in samples.into_iter().enumerate() {
            tableau.push(steps[i].clone(), s.value.clone());
            let prev = rows.last();
            let delta = prev.map(|p| &s.value - &p.value);
            let richardson = prev.map(|p| richardson_first_order(&p.h, &p.value, &steps[i], &s.value));
            let extrapolated = tableau.best().expect("non-empty").clone();
            let extrapolation_delta = prev.map(|p| &extrapolated - &p.extrapolated);
            rows.push(ConvergenceRow {
                n,
                h: steps[i].clone(),
                value: s.value,
                delta,
                richardson,
                extrapolated,
                extrapolation_delta,
                factors: s.factors,
                wall_ms: ms,
            });
        }
        ConvergenceTable { method, rows }
    }

    pub fn last(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }

    /// Best available limit: the full Neville estimate of the last row.
    pub fn limit(&self) -> Option<&HPReal> {
        self.rows.last().map(|r| &r.extrapolated)
    }

    /// Empirical error of [`ConvergenceTable::limit`]: the last change of the
    /// extrapolated value, or of the raw values when only one row exists.
    pub fn err_est(&self) -> Option<HPReal> {
        let last = self.rows.last()?;
        last.extrapolation_delta.as_ref().or(last.delta.as_ref()).map(HPReal::abs)
    }

    /// Whether successive raw deltas shrink in magnitude.
    pub fn deltas_shrink(&self) -> bool {
        let ds: Vec<HPReal> = self.rows.iter().filter_map(|r| r.delta.as_ref().map(HPReal::abs)).collect();
        ds.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_json(&self) -> ConvergenceJson {
        let dec = |x: &HPReal| x.to_decimal(30);
        ConvergenceJson {
            method: self.method,
            rows: self
                .rows
                .iter()
                .map(|r| ConvergenceRowJson {
                    n: r.n,
                    value_dec: r.value.to_decimal_full(),
                    delta_dec: r.delta.as_ref().map(dec),
                    richardson_dec: r.richardson.as_ref().map(dec),
                    extrapolated_dec: dec(&r.extrapolated),
                    factors: r.factors,
                    wall_ms: r.wall_ms,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceRowJson {
    pub n: u64,
    pub value_dec: String,
    pub delta_dec: Option<String>,
    pub richardson_dec: Option<String>,
    pub extrapolated_dec: String,
    pub factors: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceJson {
    pub method: Method,
    pub rows: Vec<ConvergenceRowJson>,
}

// ----- free-function entry points -----

fn context(field: &LengthOneField, nu: &PrincipalConductor, precision: Precision) -> Result<Invariants> {
    Invariants::new(field, nu, Settings::new(precision))
}

pub fn x1_expr1(field: &LengthOneField, nu: &PrincipalConductor, n: u64, precision: Precision) -> Result<InvariantEstimate> {
    context(field, nu, precision)?.estimate_at(Method::Expr1Limit, n, Mode::Derived)
}

pub fn x1_double_sine(
    field: &LengthOneField,
    nu: &PrincipalConductor,
    n: u64,
    precision: Precision,
) -> Result<InvariantEstimate> {
    context(field, nu, precision)?.estimate_at(Method::DoubleSineProd, n, Mode::Derived)
}

pub fn x1_expr2(field: &LengthOneField, m: i64, n: u64, precision: Precision, mode: Mode) -> Result<InvariantEstimate> {
    let nu = PrincipalConductor::rational(field, m)?;
    context(field, &nu, precision)?.estimate_at(Method::Expr2SingleQ, n, mode)
}

pub fn x1_expr3(
    field: &LengthOneField,
    m: i64,
    j: u64,
    k_max: Option<u64>,
    precision: Precision,
) -> Result<InvariantEstimate> {
    let nu = PrincipalConductor::rational(field, m)?;
    let inv = context(field, &nu, precision)?;
    let start = Instant::now();
    let cur = inv.expr3_sample(j, k_max, Mode::Derived)?;
    let (err, extra) = if j >= 1 {
        let prev = inv.expr3_sample(j - 1, k_max, Mode::Derived)?;
        ((&cur.value - &prev.value).abs(), prev.factors)
    } else {
        (cur.value.clone(), 0)
    };
    Ok(inv.estimate(Method::Expr3Real, Some(j), cur.value, err, cur.factors + extra, Some(Mode::Derived), start))
}

pub fn x2_generic(field: &LengthOneField, nu: &PrincipalConductor, precision: Precision) -> Result<InvariantEstimate> {
    context(field, nu, precision)?.x2_generic()
}

pub fn converge(
    field: &LengthOneField,
    nu: &PrincipalConductor,
    method: Method,
    ns: &[u64],
    precision: Precision,
) -> Result<ConvergenceTable> {
    context(field, nu, precision)?.converge(method, ns, Mode::Derived)
}

// ----- expression 2 in literal form against expression 1 -----

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralRow {
    pub n: u64,
    pub expr1_dec: String,
    pub derived_dec: String,
    pub literal_dec: String,
    /// `|derived - expr1|` at this `n`.
    pub derived_gap_dec: String,
    /// `|literal - expr1|` at this `n`.
    pub literal_gap_dec: String,
}

/// Machine-readable comparison of the two index conventions of expression 2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralComparison {
    pub a: i64,
    pub d: i64,
    pub m: i64,
    pub g: u64,
    pub precision_bits: u32,
    /// Extrapolated expression-1 limit used as the reference.
    pub expr1_limit_dec: String,
    pub expr1_limit_err_dec: String,
    pub literal_extrapolated_dec: String,
    pub derived_extrapolated_dec: String,
    pub rows: Vec<LiteralRow>,
    /// The literal range contains the factor `1 - 1` at `r = k = 0` on both
    /// sides; it is cancelled before taking the quotient.
    pub literal_zero_factor_cancelled: bool,
    pub derived_matches_expr1: bool,
    pub literal_converges_to_expr1_limit: bool,
    /// `|literal limit - expr1 limit|`.
    pub literal_limit_gap_dec: String,
}

/// Evaluates expression 2 in both modes over `ns` and compares against the
/// extrapolated expression-1 limit over `expr1_ns`.
pub fn paper_literal_report(inv: &Invariants, ns: &[u64], expr1_ns: &[u64]) -> Result<LiteralComparison> {
    let m = inv.rational_m()?;
    let e1 = inv.converge(Method::Expr1Limit, expr1_ns, Mode::Derived)?;
    let limit = e1.limit().expect("non-empty").clone();
    let limit_err = e1.err_est().unwrap_or_else(|| limit.clone());
    let derived = inv.converge(Method::Expr2SingleQ, ns, Mode::Derived)?;
    let literal = inv.converge(Method::Expr2SingleQ, ns, Mode::PaperLiteral)?;
    let dec = |x: &HPReal| x.to_decimal(25);
    let mut rows = Vec::new();
    let mut derived_ok = true;
    let tol = HPReal::from_f64(inv.settings.precision, inv.settings.tolerance() * 1e6);
    for ((n, dr), lr) in ns.iter().zip(&derived.rows).zip(&literal.rows) {
        let e = inv.expr1_sample(*n, 0)?.value;
        let dg = (&dr.value - &e).abs();
        if dg > tol {
            derived_ok = false;
        }
        rows.push(LiteralRow {
            n: *n,
            expr1_dec: dec(&e),
            derived_dec: dec(&dr.value),
            literal_dec: dec(&lr.value),
            derived_gap_dec: dg.to_decimal(6),
            literal_gap_dec: (&lr.value - &e).abs().to_decimal(6),
        });
    }
    let lit_limit = literal.limit().expect("non-empty").clone();
    let lit_err = literal.err_est().unwrap_or_else(|| lit_limit.clone());
    let gap = (&lit_limit - &limit).abs();
    let allowed = &(&lit_err + &limit_err) * 10;
    Ok(LiteralComparison {
        a: inv.field.a(),
        d: inv.field.d(),
        m,
        g: inv.g(),
        precision_bits: inv.settings.precision.bits(),
        expr1_limit_dec: dec(&limit),
        expr1_limit_err_dec: limit_err.to_decimal(6),
        literal_extrapolated_dec: dec(&lit_limit),
        derived_extrapolated_dec: dec(derived.limit().expect("non-empty")),
        rows,
        literal_zero_factor_cancelled: true,
        derived_matches_expr1: derived_ok,
        literal_converges_to_expr1_limit: gap <= allowed,
        literal_limit_gap_dec: gap.to_decimal(6),
    })
}

// ----- the open product and the sine product identity -----

/// `(P, log P)` for the product
/// `prod_{r=0}^{T_n} [sin^2(pi u_{r,m}) + sinh^2(pi sqrt(d) v_{r,k})]`
/// with `u_{r,m} = r (T_{n+1}/T_n + 1/m)` and `v_{r,k} = r/T_n + k`.
///
/// For `k = 0` the `r = 0` factor is exactly zero, so `P = 0` and `log P = -inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChallengeValue {
    pub p: HPReal,
    pub log_p: HPReal,
    /// Number of factors that vanish exactly.
    pub zero_factors: u64,
    /// `log` of the product over the non-vanishing factors.
    pub log_p_nonzero: HPReal,
}

pub fn challenge_product(field: &LengthOneField, m: i64, k: u64, n: u64, precision: Precision) -> Result<ChallengeValue> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be nonzero".into()));
    }
    let geo = Geodesic::new(field.clone());
    let t = geo.cheb(n);
    let t1 = geo.cheb(n + 1);
    let count = (&t + 1u32).complete().to_u64().ok_or(Error::InvalidArgument("n too large".into()))?;
    let wp = precision.with_guard(count).plus(16);
    let p = wp.bits();
    let pi = HPReal::pi(wp).into_float();
    let sqrt_d = geo.sqrt_d(wp).into_float();
    let c = Rational::from((t1, t.clone())) + Rational::from((1, m));
    let mut log_sum = Float::new(p);
    let mut zero = 0;
    for r in 0..count {
        let u = frac_part(&Rational::from(&c * r));
        let v = Rational::from((Integer::from(r), t.clone())) + k;
        let s = Float::with_val(p, &pi * &u).sin();
        let sh = Float::with_val(p, Float::with_val(p, &pi * &sqrt_d) * &v).sinh();
        let factor = Float::with_val(p, s.square_ref()) + Float::with_val(p, sh.square_ref());
        if factor.is_zero() {
            zero += 1;
            continue;
        }
        log_sum += factor.ln();
    }
    let log_nonzero = HPReal::from_float(log_sum).round_to(precision);
    let (pv, lp) = if zero > 0 {
        (HPReal::zero(precision), HPReal::from_float(Float::with_val(precision.bits(), rug::float::Special::NegInfinity)))
    } else {
        (exp_hp(&log_nonzero), log_nonzero.clone())
    };
    Ok(ChallengeValue { p: pv, log_p: lp, zero_factors: zero, log_p_nonzero: log_nonzero })
}

/// Checks `sin(n x) = 2^{n-1} prod_{r=0}^{n-1} sin(r pi / n + x)` at `2^{8-precision}` relative to `1 + |sin(n x)|`.
pub fn sine_identity_check(n: u32, x: &HPReal, precision: Precision) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let wp = precision.plus(32);
    let p = wp.bits();
    let xf = Float::with_val(p, x.as_float());
    let lhs = Float::with_val(p, &xf * n).sin();
    let pi = HPReal::pi(wp).into_float();
    let mut prod = Float::with_val(p, 1);
    for r in 0..n {
        let arg = Float::with_val(p, &pi * r) / n + &xf;
        prod *= arg.sin();
    }
    prod <<= n - 1;
    let diff = Float::with_val(p, &lhs - &prod).abs();
    let scale = Float::with_val(p, lhs.abs_ref()) + 1u32;
    let bound = Float::with_val(p, Float::i_exp(1, 8 - precision.bits() as i32)) * scale;
    Ok(diff <= bound)
}
