//! Shintani's cone decomposition for the unit ray class of a principal conductor.
//!
//! The datum is the orbit of one rational pair `(x, y)` under
//! `(x, y) -> (<a x + y>, {-x})`, which is the action of `U^T = [[a, 1], [-1, 0]]`
//! followed by reduction modulo 1. Everything here is exact.

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rational_to_hp, HPReal, Precision};
use crate::quadratic_field::{unit_order, FieldElement, LengthOneField, PrincipalConductor};

/// `<r>`: the representative of `r` modulo 1 in `(0, 1]`.
pub fn frac_angle(r: &Rational) -> Rational {
    let ceil = Integer::from(r.ceil_ref());
    Rational::from(r - ceil) + 1u32
}

/// `{r}`: the representative of `r` modulo 1 in `[0, 1)`.
pub fn frac_brace(r: &Rational) -> Rational {
    crate::numerics::frac_part(r)
}

/// One pair `(x_k, y_k)` of the decomposition datum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConeDatum {
    /// Index in `1..=g`; the anchor (initial pair) carries `k = g`.
    pub k: u64,
    pub x: Rational,
    pub y: Rational,
}

impl ConeDatum {
    pub fn pair(&self) -> (Rational, Rational) {
        (self.x.clone(), self.y.clone())
    }
}

/// `mu = 1/nu` written as `X eps + Y`.
fn mu_coordinates(field: &LengthOneField, nu: &PrincipalConductor) -> Result<(Rational, Rational)> {
    let mu = nu.nu().inverse().map_err(|_| Error::ZeroConductor)?;
    // eps = a/2 + sqrt(d)/2, so X eps + Y = (X a/2 + Y) + (X/2) sqrt(d)
    let x = Rational::from(&mu.q * 2u32);
    let y = Rational::from(&mu.p - Rational::from(&x * field.a()) / 2u32);
    Ok((x, y))
}

/// The anchor pair `(<X>, {Y})` where `1/nu = X eps + Y`.
pub fn initial_pair(field: &LengthOneField, nu: &PrincipalConductor) -> Result<(Rational, Rational)> {
    let (x, y) = mu_coordinates(field, nu)?;
    Ok((frac_angle(&x), frac_brace(&y)))
}

/// `(x, y) -> (<a x + y>, {-x})`.
pub fn step(pair: &(Rational, Rational), a: i64) -> (Rational, Rational) {
    let (x, y) = pair;
    let next_x = frac_angle(&(Rational::from(x * a) + y));
    let next_y = frac_brace(&Rational::from(-x));
    (next_x, next_y)
}

/// The decomposition datum `Z_f` together with its field and conductor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionDatum {
    pub field: LengthOneField,
    pub conductor: PrincipalConductor,
    pub g: u64,
    /// Step order starting at the anchor: `data[0]` has `k = g`, `data[i]` has `k = i`.
    pub data: Vec<ConeDatum>,
}

impl DecompositionDatum {
    /// Pair with index `k`, read modulo `g`.
    pub fn entry(&self, k: i64) -> &ConeDatum {
        let g = self.g as i64;
        &self.data[k.rem_euclid(g) as usize]
    }

    pub fn anchor(&self) -> &ConeDatum {
        &self.data[0]
    }

    /// `mu = 1/nu`.
    pub fn mu(&self) -> FieldElement {
        self.conductor.nu().inverse().expect("nonzero conductor")
    }

    /// Checks `x_k eps^(1-k) + y_k eps^(-k) - mu` lies in `O_K = <1, eps>`.
    pub fn membership_holds(&self, k: i64) -> bool {
        let e = self.field.epsilon();
        let c = self.entry(k);
        let first = e.pow(1 - k).expect("unit").scale(&c.x);
        let second = e.pow(-k).expect("unit").scale(&c.y);
        first.add(&second).sub(&self.mu()).is_integral()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.data.iter().map(|c| (&c.x, &c.y))
    }

    pub fn to_json(&self) -> Result<DecompositionJson> {
        let small = |r: &Integer| {
            r.to_i64().ok_or_else(|| Error::InvalidArgument(format!("{r} does not fit in 64 bits")))
        };
        let pairs = self
            .data
            .iter()
            .map(|c| {
                Ok([small(c.x.numer())?, small(c.x.denom())?, small(c.y.numer())?, small(c.y.denom())?])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecompositionJson {
            a: self.field.a(),
            d: self.field.d(),
            nu: self.conductor.to_string(),
            g: self.g,
            pairs,
        })
    }
}

/// Export format: `{a, d, nu, g, pairs: [[num, den, num, den], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub a: i64,
    pub d: i64,
    pub nu: String,
    pub g: u64,
    pub pairs: Vec<[i64; 4]>,
}

/// Iterates [`step`] from the anchor `g = unit_order` times and checks the orbit closes.
pub fn decomposition(field: &LengthOneField, nu: &PrincipalConductor) -> Result<DecompositionDatum> {
    let g = unit_order(field, nu)?;
    let start = initial_pair(field, nu)?;
    let mut data = Vec::with_capacity(g as usize);
    let mut cur = start.clone();
    for i in 0..g {
        let k = if i == 0 { g } else { i };
        data.push(ConeDatum { k, x: cur.0.clone(), y: cur.1.clone() });
        cur = step(&cur, field.a());
    }
    if cur != start {
        return Err(Error::PeriodMismatch(g));
    }
    Ok(DecompositionDatum { field: field.clone(), conductor: nu.clone(), g, data })
}

/// `z_k = x_k eps + y_k`.
pub fn z_of(entry: &ConeDatum, field: &LengthOneField, prec: Precision) -> HPReal {
    let eps = field.epsilon_hp(prec.plus(8));
    let z = &eps.mul_rational(&entry.x) + &rational_to_hp(&entry.y, prec.plus(8));
    z.round_to(prec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic_field::make_field;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn pairs_of(datum: &DecompositionDatum) -> Vec<(Rational, Rational)> {
        datum.data.iter().map(ConeDatum::pair).collect()
    }

    #[test]
    fn fractional_parts() {
        assert_eq!(frac_angle(&q(0, 1)), 1);
        assert_eq!(frac_angle(&q(13, 4)), q(1, 4));
        assert_eq!(frac_angle(&q(-3, 1)), 1);
        assert_eq!(frac_brace(&q(-2, 11)), q(9, 11));
        assert_eq!(frac_brace(&q(5, 1)), 0);
    }

    #[test]
    fn anchors() {
        let f3 = make_field(3).unwrap();
        let f5 = make_field(5).unwrap();
        let four = PrincipalConductor::rational(&f3, 4).unwrap();
        assert_eq!(initial_pair(&f3, &four).unwrap(), (q(1, 1), q(1, 4)));
        let nu = PrincipalConductor::parse(&f3, "4-1*sqrt(5)").unwrap();
        assert_eq!(initial_pair(&f3, &nu).unwrap(), (q(2, 11), q(1, 11)));
        let three = PrincipalConductor::rational(&f5, 3).unwrap();
        assert_eq!(initial_pair(&f5, &three).unwrap(), (q(1, 1), q(1, 3)));
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(&(q(1, 1), q(1, 4)), 3), (q(1, 4), q(0, 1)));
        assert_eq!(step(&(q(2, 11), q(1, 11)), 3), (q(7, 11), q(9, 11)));
        assert_eq!(step(&(q(1, 1), q(0, 1)), 3), (q(1, 1), q(0, 1)));
    }

    #[test]
    fn worked_examples() {
        let f3 = make_field(3).unwrap();
        let d = decomposition(&f3, &PrincipalConductor::rational(&f3, 4).unwrap()).unwrap();
        assert_eq!(d.g, 3);
        assert_eq!(pairs_of(&d), vec![(q(1, 1), q(1, 4)), (q(1, 4), q(0, 1)), (q(3, 4), q(3, 4))]);
        assert_eq!(d.anchor().k, 3);

        let d = decomposition(&f3, &PrincipalConductor::parse(&f3, "4-1*sqrt(5)").unwrap()).unwrap();
        let expected: Vec<_> = [(2, 1), (7, 9), (8, 4), (6, 3), (10, 5)]
            .iter()
            .map(|&(x, y)| (q(x, 11), q(y, 11)))
            .collect();
        assert_eq!(pairs_of(&d), expected);

        let f5 = make_field(5).unwrap();
        let d = decomposition(&f5, &PrincipalConductor::rational(&f5, 3).unwrap()).unwrap();
        assert_eq!(pairs_of(&d), vec![(q(1, 1), q(1, 3)), (q(1, 3), q(0, 1)), (q(2, 3), q(2, 3))]);
        assert!((-3..=6).all(|k| d.membership_holds(k)));
    }

    #[test]
    fn shintani_points() {
        let f3 = make_field(3).unwrap();
        let prec = Precision::new(128).unwrap();
        let z = z_of(&ConeDatum { k: 3, x: q(1, 1), y: q(1, 4) }, &f3, prec);
        assert!((&z - &HPReal::from_f64(prec, 2.868034)).abs() < 1e-6);
        let z = z_of(&ConeDatum { k: 1, x: q(1, 4), y: q(0, 1) }, &f3, prec);
        assert!((&z - &HPReal::from_f64(prec, 0.654508)).abs() < 1e-6);
        let z = z_of(&ConeDatum { k: 1, x: q(1, 1), y: q(0, 1) }, &f3, prec);
        assert_eq!(z, f3.epsilon_hp(prec));
    }

    #[test]
    fn json_export() {
        let f3 = make_field(3).unwrap();
        let d = decomposition(&f3, &PrincipalConductor::parse(&f3, "4-1*sqrt(5)").unwrap()).unwrap();
        let json = serde_json::to_string(&d.to_json().unwrap()).unwrap();
        assert!(json.starts_with(r#"{"a":3,"d":5,"nu":"4-1*sqrt(5)","g":5,"pairs":[[2,11,1,11],"#));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn conductor() -> impl Strategy<Value = (i64, i64, i64)> {
            (prop::sample::select(vec![3i64, 5, 9, 13]), -12i64..=12, -12i64..=12)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(60))]

            #[test]
            fn orbit_is_periodic_distinct_and_in_range((a, p, b) in conductor()) {
                let f = make_field(a).unwrap();
                let Ok(nu) = PrincipalConductor::new(f.from_omega(&p.into(), &b.into())) else {
                    return Ok(());
                };
                let d = decomposition(&f, &nu).unwrap();
                let mut seen = std::collections::HashSet::new();
                for c in &d.data {
                    prop_assert!(c.x > 0 && c.x <= 1);
                    prop_assert!(c.y >= 0 && c.y < 1);
                    prop_assert_eq!(Integer::from(nu.norm_abs() % c.x.denom()), 0);
                    prop_assert_eq!(Integer::from(nu.norm_abs() % c.y.denom()), 0);
                    prop_assert!(seen.insert(c.pair()));
                }
                let g = d.g as i64;
                for k in [0, 1, 2, g / 2, g - 1, g] {
                    prop_assert!(d.membership_holds(k), "membership fails at k = {}", k);
                }
                // step is U^T followed by reduction mod 1
                for c in &d.data {
                    let (x, y) = (&c.x, &c.y);
                    let raw = (Rational::from(x * a) + y, Rational::from(-x));
                    prop_assert_eq!(step(&c.pair(), a), (frac_angle(&raw.0), frac_brace(&raw.1)));
                }
                let mut cur = d.anchor().pair();
                for _ in 0..d.g {
                    cur = step(&cur, a);
                }
                prop_assert_eq!(cur, d.anchor().pair());
            }
        }
    }
}
