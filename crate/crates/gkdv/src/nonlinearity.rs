//! Polynomial-type nonlinearities `f` with `f(0) = f'(0) = 0`.
//!
//! A nonlinearity is a finite sum of signed monomials `a * u^p` with `p > 1`,
//! so the primitive `F` and the first three derivatives are exact.

use crate::error::{GkdvError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// One term `coef * u^exp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub exp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    Minus,
    Plus,
    Custom,
}

/// Default upper end of the negativity scan for the `plus` family.
pub const PLUS_SCAN_BOUND: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNonlinearity", into = "RawNonlinearity")]
pub struct Nonlinearity {
    kind: Family,
    terms: Vec<Monomial>,
    integer_exponents: bool,
}

#[derive(Serialize, Deserialize)]
struct RawNonlinearity {
    kind: Family,
    terms: Vec<Monomial>,
}

impl TryFrom<RawNonlinearity> for Nonlinearity {
    type Error = GkdvError;
    fn try_from(raw: RawNonlinearity) -> Result<Self> {
        Nonlinearity::from_terms(raw.kind, raw.terms)
    }
}

impl From<Nonlinearity> for RawNonlinearity {
    fn from(nl: Nonlinearity) -> Self {
        RawNonlinearity { kind: nl.kind, terms: nl.terms }
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() < 1.0e9
}

/// Falling factorial `p (p-1) ... (p-k+1)`.
fn falling(p: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (p - j as f64))
}

impl Nonlinearity {
    /// `f(u) = -u^p`.
    pub fn power(p: f64) -> Result<Self> {
        Self::from_terms(Family::Power, vec![Monomial { coef: -1.0, exp: p }])
    }

    /// The KdV nonlinearity `f(u) = -3u^2`.
    pub fn kdv() -> Self {
        Self::from_terms(Family::Custom, vec![Monomial { coef: -3.0, exp: 2.0 }])
            .expect("kdv is valid")
    }

    /// `f(u) = -A u^p + B u^q` with `p < q`.
    pub fn minus(a: f64, p: f64, b: f64, q: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(GkdvError::InvalidNonlinearity("minus family needs A, B > 0".into()));
        }
        if !(p < q) {
            return Err(GkdvError::InvalidNonlinearity("minus family needs p < q".into()));
        }
        Self::from_terms(
            Family::Minus,
            vec![Monomial { coef: -a, exp: p }, Monomial { coef: b, exp: q }],
        )
    }

    /// `f(u) = A u^p - B u^q + C u^r` with `p < q < r`, scanned for negativity on `(0, 10]`.
    pub fn plus(a: f64, p: f64, b: f64, q: f64, c: f64, r: f64) -> Result<Self> {
        Self::plus_with_scan(a, p, b, q, c, r, PLUS_SCAN_BOUND)
    }

    pub fn plus_with_scan(
        a: f64,
        p: f64,
        b: f64,
        q: f64,
        c: f64,
        r: f64,
        u_max: f64,
    ) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(GkdvError::InvalidNonlinearity("plus family needs A, B, C > 0".into()));
        }
        if !(p < q && q < r) {
            return Err(GkdvError::InvalidNonlinearity("plus family needs p < q < r".into()));
        }
        let nl = Self::from_terms(
            Family::Plus,
            vec![
                Monomial { coef: a, exp: p },
                Monomial { coef: -b, exp: q },
                Monomial { coef: c, exp: r },
            ],
        )?;
        let n = 10_000;
        let lo = u_max * 1e-8;
        let ratio = (u_max / lo).powf(1.0 / (n - 1) as f64);
        let negative = (0..n).any(|k| nl.f(lo * ratio.powi(k)) < 0.0);
        if !negative {
            return Err(GkdvError::InvalidNonlinearity(format!(
                "plus family is nonnegative on (0, {u_max}]"
            )));
        }
        Ok(nl)
    }

    pub fn custom(terms: Vec<Monomial>) -> Result<Self> {
        Self::from_terms(Family::Custom, terms)
    }

    fn from_terms(kind: Family, terms: Vec<Monomial>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GkdvError::InvalidNonlinearity("no terms".into()));
        }
        for t in &terms {
            if !(t.exp > 1.0) || !t.exp.is_finite() {
                return Err(GkdvError::InvalidNonlinearity(format!(
                    "exponent {} must exceed 1",
                    t.exp
                )));
            }
            if t.coef == 0.0 || !t.coef.is_finite() {
                return Err(GkdvError::InvalidNonlinearity(format!(
                    "coefficient {} must be finite and nonzero",
                    t.coef
                )));
            }
        }
        let integer_exponents = terms.iter().all(|t| is_integer(t.exp));
        Ok(Nonlinearity { kind, terms, integer_exponents })
    }

    pub fn kind(&self) -> Family {
        self.kind
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn has_integer_exponents(&self) -> bool {
        self.integer_exponents
    }

    fn check(&self, u: f64) -> Result<()> {
        if u < 0.0 {
            if let Some(t) = self.terms.iter().find(|t| !is_integer(t.exp)) {
                return Err(GkdvError::NegativeBase { u, exp: t.exp });
            }
        }
        Ok(())
    }

    #[inline]
    fn pow(&self, u: f64, e: f64) -> f64 {
        if is_integer(e) {
            u.powi(e as i32)
        } else {
            u.powf(e)
        }
    }

    fn raw_derivative(&self, u: f64, order: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let k = falling(t.exp, order);
                if k == 0.0 {
                    return 0.0;
                }
                let e = t.exp - order as f64;
                if u == 0.0 {
                    return if e > 0.0 { 0.0 } else if e == 0.0 { t.coef * k } else { f64::INFINITY };
                }
                t.coef * k * self.pow(u, e)
            })
            .sum()
    }

    /// `f^{(order)}(u)` for `order` in `0..=3`.
    pub fn eval(&self, u: f64, order: u32) -> Result<f64> {
        if order > 3 {
            return Err(GkdvError::InvalidArgument(format!("derivative order {order} > 3")));
        }
        self.check(u)?;
        Ok(self.raw_derivative(u, order))
    }

    /// Primitive `F(u)` with `F(0) = 0`.
    pub fn primitive(&self, u: f64) -> Result<f64> {
        self.check(u)?;
        Ok(self.raw_primitive(u))
    }

    fn raw_primitive(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|t| t.coef * self.pow(u, t.exp + 1.0) / (t.exp + 1.0)).sum()
    }

    /// `F(u) / u^2`, evaluated without forming `u^2` (finite for tiny `u`).
    pub(crate) fn primitive_over_square(&self, u: f64) -> f64 {
        self.terms.iter().map(|t| t.coef * self.pow(u, t.exp - 1.0) / (t.exp + 1.0)).sum()
    }

    /// `f(u)` without the domain check; callers guarantee `u >= 0` or integer exponents.
    #[inline]
    pub(crate) fn f(&self, u: f64) -> f64 {
        self.raw_derivative(u, 0)
    }

    #[inline]
    pub(crate) fn df(&self, u: f64) -> f64 {
        self.raw_derivative(u, 1)
    }

    #[inline]
    pub(crate) fn d2f(&self, u: f64) -> f64 {
        self.raw_derivative(u, 2)
    }

    #[inline]
    pub(crate) fn big_f(&self, u: f64) -> f64 {
        self.raw_primitive(u)
    }

    /// Fails if values contain negatives while some exponent is fractional.
    pub fn check_field(&self, values: &[f64]) -> Result<()> {
        if self.integer_exponents {
            return Ok(());
        }
        match values.iter().find(|&&u| u < 0.0) {
            Some(&u) => self.check(u),
            None => Ok(()),
        }
    }

    /// Compact textual form accepted by [`FromStr`].
    pub fn spec_string(&self) -> String {
        let t = &self.terms;
        match self.kind {
            Family::Power => format!("power:{}", t[0].exp),
            Family::Minus => format!("minus:{},{},{},{}", -t[0].coef, t[0].exp, t[1].coef, t[1].exp),
            Family::Plus => format!(
                "plus:{},{},{},{},{},{}",
                t[0].coef, t[0].exp, -t[1].coef, t[1].exp, t[2].coef, t[2].exp
            ),
            Family::Custom => {
                if t.len() == 1 && t[0].coef == -3.0 && t[0].exp == 2.0 {
                    return "kdv".into();
                }
                let parts: Vec<String> = t.iter().map(|m| format!("{}@{}", m.coef, m.exp)).collect();
                format!("custom:{}", parts.join(","))
            }
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

impl FromStr for Nonlinearity {
    type Err = GkdvError;

    /// Accepts `kdv`, `power:p`, `minus:A,p,B,q`, `plus:A,p,B,q,C,r`, `custom:a@p,b@q,...`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| GkdvError::ParseNonlinearity { spec: s.into(), reason: reason.into() };
        let s_trim = s.trim();
        if s_trim.eq_ignore_ascii_case("kdv") {
            return Ok(Nonlinearity::kdv());
        }
        let (head, tail) = s_trim.split_once(':').ok_or_else(|| err("expected `family:params`"))?;
        let numbers = |text: &str| -> Result<Vec<f64>> {
            text.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| err(&format!("bad number `{x}`"))))
                .collect()
        };
        let wrap = |r: Result<Nonlinearity>| r.map_err(|e| err(&e.to_string()));
        match head.trim().to_ascii_lowercase().as_str() {
            "power" => {
                let v = numbers(tail)?;
                if v.len() != 1 {
                    return Err(err("power takes one exponent"));
                }
                wrap(Nonlinearity::power(v[0]))
            }
            "minus" => {
                let v = numbers(tail)?;
                if v.len() != 4 {
                    return Err(err("minus takes A,p,B,q"));
                }
                wrap(Nonlinearity::minus(v[0], v[1], v[2], v[3]))
            }
            "plus" => {
                let v = numbers(tail)?;
                if v.len() != 6 {
                    return Err(err("plus takes A,p,B,q,C,r"));
                }
                wrap(Nonlinearity::plus(v[0], v[1], v[2], v[3], v[4], v[5]))
            }
            "custom" => {
                let terms = tail
                    .split(',')
                    .map(|term| {
                        let (a, p) = term.split_once('@').ok_or_else(|| err("custom terms are coef@exp"))?;
                        let coef = a.trim().parse::<f64>().map_err(|_| err(&format!("bad number `{a}`")))?;
                        let exp = p.trim().parse::<f64>().map_err(|_| err(&format!("bad number `{p}`")))?;
                        Ok(Monomial { coef, exp })
                    })
                    .collect::<Result<Vec<_>>>()?;
                wrap(Nonlinearity::custom(terms))
            }
            other => Err(err(&format!("unknown family `{other}`"))),
        }
    }
}
