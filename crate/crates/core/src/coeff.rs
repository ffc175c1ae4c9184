//! Exact coefficients: rational functions in the dimension symbol `n`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Polynomial in `n` with rational coefficients, lowest degree first.
/// The coefficient vector never has a trailing zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly(Vec<BigRational>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly(vec![c]);
        p.trim();
        p
    }

    pub fn from_i64(c: i64) -> Self {
        Self::constant(BigRational::from_integer(c.into()))
    }

    /// The monomial `n`.
    pub fn n() -> Self {
        Poly(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn from_coeffs(c: Vec<BigRational>) -> Self {
        let mut p = Poly(c);
        p.trim();
        p
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() <= 1
    }

    pub fn leading(&self) -> BigRational {
        self.0.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn constant_term(&self) -> BigRational {
        self.0.first().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|x| x * c).collect())
    }

    /// Euclidean division: `(quotient, remainder)`.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let dd = d.degree().unwrap();
        let lead = d.leading();
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quot = vec![BigRational::zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let c = &rem[i + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in d.0.iter().enumerate() {
                    rem[i + j] -= &c * dc;
                }
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        (Poly::from_coeffs(quot), Poly::from_coeffs(rem))
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let l = self.leading();
        self.scale(&(BigRational::one() / l))
    }

    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut a, mut b) = (a.clone(), b.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let len = self.0.len().max(o.0.len());
        let mut v = Vec::with_capacity(len);
        for i in 0..len {
            let a = self.0.get(i);
            let b = o.0.get(i);
            v.push(match (a, b) {
                (Some(a), Some(b)) => a + b,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => unreachable!(),
            });
        }
        Poly::from_coeffs(v)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut v = vec![BigRational::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly::from_coeffs(v)
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Poly {
    /// Prints as a sum of `c*n^k` terms, highest degree first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            first = false;
            let mono = match k {
                0 => String::new(),
                1 => "n".to_string(),
                _ => format!("n^{k}"),
            };
            if k == 0 {
                write!(f, "{}", fmt_rat(&a))?;
            } else if a.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{}*{mono}", fmt_rat(&a))?;
            }
        }
        Ok(())
    }
}

/// Error produced when specializing a coefficient at a pole.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("coefficient {coeff} has a pole at n = {at}")]
pub struct PoleError {
    pub coeff: String,
    pub at: String,
}

/// Rational function `num/den` in `n`, gcd-reduced with monic denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coeff {
    num: Poly,
    den: Poly,
}

impl Default for Coeff {
    fn default() -> Self {
        Coeff::zero()
    }
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff {
            num: Poly::zero(),
            den: Poly::from_i64(1),
        }
    }

    pub fn one() -> Self {
        Coeff::int(1)
    }

    pub fn int(c: i64) -> Self {
        Coeff {
            num: Poly::from_i64(c),
            den: Poly::from_i64(1),
        }
    }

    pub fn rational(p: i64, q: i64) -> Self {
        Coeff::from_rational(BigRational::new(p.into(), q.into()))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Coeff {
            num: Poly::constant(r),
            den: Poly::from_i64(1),
        }
    }

    /// The dimension symbol `n`.
    pub fn n() -> Self {
        Coeff {
            num: Poly::n(),
            den: Poly::from_i64(1),
        }
    }

    /// `n + c`
    pub fn n_plus(c: i64) -> Self {
        &Coeff::n() + &Coeff::int(c)
    }

    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return Coeff::zero();
        }
        let g = Poly::gcd(&num, &den);
        let (mut num, _) = num.div_rem(&g);
        let (mut den, _) = den.div_rem(&g);
        let l = den.leading();
        if !l.is_one() {
            let inv = BigRational::one() / l;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Coeff { num, den }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_constant() && self.num.is_constant() && self.num.constant_term().is_one()
    }

    /// True when the coefficient does not depend on `n`.
    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if self.is_constant() {
            Some(self.num.constant_term() / self.den.constant_term())
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.as_rational().and_then(|r| r.to_f64())
    }

    /// Substitute a value for `n`.
    pub fn specialize(&self, n: &BigRational) -> Result<Coeff, PoleError> {
        if self.is_constant() {
            return Ok(self.clone());
        }
        let d = self.den.eval(n);
        if d.is_zero() {
            return Err(PoleError {
                coeff: self.to_string(),
                at: n.to_string(),
            });
        }
        Ok(Coeff::from_rational(self.num.eval(n) / d))
    }

    pub fn specialize_int(&self, n: i64) -> Result<Coeff, PoleError> {
        self.specialize(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn is_negative_leading(&self) -> bool {
        self.num.leading().is_negative()
    }

    pub fn recip(&self) -> Coeff {
        assert!(!self.is_zero(), "reciprocal of zero coefficient");
        Coeff::new(self.den.clone(), self.num.clone())
    }

    /// Total order used for deterministic output only.
    pub fn cmp_key(&self, o: &Coeff) -> Ordering {
        self.to_string().cmp(&o.to_string())
    }
}

impl Add for &Coeff {
    type Output = Coeff;
    fn add(self, o: &Coeff) -> Coeff {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return Coeff::new(&self.num + &o.num, self.den.clone());
        }
        Coeff::new(
            &(&self.num * &o.den) + &(&o.num * &self.den),
            &self.den * &o.den,
        )
    }
}

impl Sub for &Coeff {
    type Output = Coeff;
    fn sub(self, o: &Coeff) -> Coeff {
        self + &(-o)
    }
}

impl Neg for &Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        Coeff {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Neg for Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        -&self
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, o: &Coeff) -> Coeff {
        if self.is_zero() || o.is_zero() {
            return Coeff::zero();
        }
        if self.den.is_constant() && o.den.is_constant() {
            // both denominators are 1 after normalization
            return Coeff {
                num: &self.num * &o.num,
                den: Poly::from_i64(1),
            };
        }
        Coeff::new(&self.num * &o.num, &self.den * &o.den)
    }
}

impl Div for &Coeff {
    type Output = Coeff;
    fn div(self, o: &Coeff) -> Coeff {
        self * &o.recip()
    }
}

macro_rules! owned_ops {
    ($t:ty, $($tr:ident $m:ident),*) => {$(
        impl $tr for $t {
            type Output = $t;
            fn $m(self, o: $t) -> $t { (&self).$m(&o) }
        }
    )*};
}
owned_ops!(Coeff, Add add, Sub sub, Mul mul, Div div);
owned_ops!(Poly, Add add, Sub sub, Mul mul);

impl fmt::Display for Coeff {
    /// Integers and fractions print bare; `n`-dependent values print as
    /// `(num)/(den)` or `(num)` so the output re-parses.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_rational() {
            return write!(f, "{}", fmt_rat(&r));
        }
        if self.den.is_constant() {
            write!(f, "({})", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_common_factors() {
        // (n^2 - 16)/(n - 4) = n + 4
        let num = &(&Poly::n() * &Poly::n()) - &Poly::from_i64(16);
        let den = &Poly::n() - &Poly::from_i64(4);
        let c = Coeff::new(num, den);
        assert_eq!(c, Coeff::n_plus(4));
    }

    #[test]
    fn schouten_normalization_round_trip() {
        // 1/(n-2) * (n-2) = 1
        let a = Coeff::n_plus(-2);
        let b = a.recip();
        assert!((&a * &b).is_one());
        assert_eq!(b.to_string(), "(1)/(n - 2)");
    }

    #[test]
    fn specialization_and_poles() {
        let c = Coeff::n_plus(-4);
        assert_eq!(c.specialize_int(6).unwrap(), Coeff::int(2));
        assert_eq!(c.specialize_int(4).unwrap(), Coeff::zero());
        let p = Coeff::n_plus(-2).recip();
        assert!(p.specialize_int(2).is_err());
        assert_eq!(p.specialize_int(6).unwrap(), Coeff::rational(1, 4));
    }

    #[test]
    fn denominator_is_monic() {
        let c = Coeff::new(Poly::from_i64(3), &Poly::n().scale(&BigRational::from_integer(2.into())) - &Poly::from_i64(2));
        assert!(c.denom().leading().is_one());
        assert_eq!(c.to_string(), "(3/2)/(n - 1)");
    }
}
