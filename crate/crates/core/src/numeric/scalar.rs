//! Number types for the jet oracle: `f64`, exact rationals, and the prime
//! field of order 2^61 − 1.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Scalar: Clone + Debug + PartialEq + Send + Sync + 'static {
    const EXACT: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn inv(&self) -> Option<Self>;
    fn is_zero(&self) -> bool;
    /// A real representative, for reporting.
    fn to_f64(&self) -> f64;
    /// `exp`, `sin`, `cos` of a constant term; exact types support only 0.
    fn exp(&self) -> Option<Self>;
    fn sin(&self) -> Option<Self>;
    fn cos(&self) -> Option<Self>;

    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }

    /// `self += a * b`
    fn fma(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    fn scale_i64(&self, k: i64) -> Self {
        self.mul(&Self::from_i64(k))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        (*self != 0.0).then(|| 1.0 / self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Option<Self> {
        Some(f64::exp(*self))
    }
    fn sin(&self) -> Option<Self> {
        Some(f64::sin(*self))
    }
    fn cos(&self) -> Option<Self> {
        Some(f64::cos(*self))
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn fma(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
}

fn exact_transcendental<S: Scalar>(x: &S, at_zero: i64) -> Option<S> {
    x.is_zero().then(|| S::from_i64(at_zero))
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        (!Zero::is_zero(self)).then(|| self.recip())
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn exp(&self) -> Option<Self> {
        exact_transcendental(self, 1)
    }
    fn sin(&self) -> Option<Self> {
        exact_transcendental(self, 0)
    }
    fn cos(&self) -> Option<Self> {
        exact_transcendental(self, 1)
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn fma(&mut self, a: &Self, b: &Self) {
        if !Zero::is_zero(a) && !Zero::is_zero(b) {
            *self += a * b;
        }
    }
}

/// Element of F_p, p = 2^61 − 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ModP(pub u64);

impl ModP {
    pub const P: u64 = (1 << 61) - 1;

    #[inline]
    fn reduce128(x: u128) -> u64 {
        let lo = (x as u64) & Self::P;
        let hi = (x >> 61) as u64;
        let mut s = lo + (hi & Self::P) + (hi >> 61);
        while s >= Self::P {
            s -= Self::P;
        }
        s
    }

    pub fn pow(self, mut e: u64) -> ModP {
        let mut b = self;
        let mut r = ModP(1);
        while e > 0 {
            if e & 1 == 1 {
                r = r.mul(&b);
            }
            b = b.mul(&b);
            e >>= 1;
        }
        r
    }

    fn from_bigint(v: &BigInt) -> ModP {
        let p = BigInt::from(Self::P);
        let r = v.mod_floor(&p);
        ModP(r.to_u64().unwrap())
    }

    /// Signed representative in (−p/2, p/2].
    pub fn signed(self) -> i64 {
        if self.0 > Self::P / 2 {
            -((Self::P - self.0) as i64)
        } else {
            self.0 as i64
        }
    }

    /// Smallest-height rational with this residue, when one with numerator
    /// and denominator below 2^30 exists (half-extended Euclid).
    pub fn reconstruct(self) -> Option<BigRational> {
        let bound: i128 = 1 << 30;
        let (mut r0, mut r1) = (Self::P as i128, self.0 as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 >= bound {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        if t1 == 0 || t1.abs() >= bound {
            return None;
        }
        let r = BigRational::new(BigInt::from(r1), BigInt::from(t1));
        (ModP::from_rational(&r) == self).then_some(r)
    }
}

impl Scalar for ModP {
    const EXACT: bool = true;
    fn zero() -> Self {
        ModP(0)
    }
    fn one() -> Self {
        ModP(1)
    }
    fn from_i64(v: i64) -> Self {
        ModP(v.rem_euclid(Self::P as i64) as u64)
    }
    fn from_rational(r: &BigRational) -> Self {
        let n = ModP::from_bigint(r.numer());
        let d = ModP::from_bigint(r.denom());
        n.mul(&d.inv().expect("denominator divisible by the field prime"))
    }
    #[inline]
    fn add(&self, o: &Self) -> Self {
        let s = self.0 + o.0;
        ModP(if s >= Self::P { s - Self::P } else { s })
    }
    #[inline]
    fn sub(&self, o: &Self) -> Self {
        ModP(if self.0 >= o.0 { self.0 - o.0 } else { self.0 + Self::P - o.0 })
    }
    #[inline]
    fn mul(&self, o: &Self) -> Self {
        ModP(Self::reduce128(self.0 as u128 * o.0 as u128))
    }
    fn neg(&self) -> Self {
        ModP(if self.0 == 0 { 0 } else { Self::P - self.0 })
    }
    fn inv(&self) -> Option<Self> {
        (self.0 != 0).then(|| self.pow(Self::P - 2))
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn to_f64(&self) -> f64 {
        match self.reconstruct() {
            Some(r) => ToPrimitive::to_f64(&r).unwrap_or(f64::NAN),
            None => self.signed() as f64,
        }
    }
    fn exp(&self) -> Option<Self> {
        exact_transcendental(self, 1)
    }
    fn sin(&self) -> Option<Self> {
        exact_transcendental(self, 0)
    }
    fn cos(&self) -> Option<Self> {
        exact_transcendental(self, 1)
    }
    #[inline]
    fn fma(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }
}

pub fn rational(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

pub fn is_negative(r: &BigRational) -> bool {
    r.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_inverse_and_reconstruction() {
        let x = ModP::from_rational(&rational(-17, 12));
        assert_eq!(x.mul(&x.inv().unwrap()), ModP(1));
        assert_eq!(x.reconstruct(), Some(rational(-17, 12)));
        assert_eq!(ModP::from_i64(-1).add(&ModP(1)), ModP(0));
    }

    #[test]
    fn exact_types_refuse_transcendental_values() {
        assert_eq!(ModP(0).exp(), Some(ModP(1)));
        assert_eq!(ModP(3).sin(), None);
        assert!(<BigRational as Scalar>::cos(&rational(1, 2)).is_none());
    }
}
