//! Scalar tower: exact complex rationals by default, complex floats where
//! transcendental constants force them.
//!
//! Every algebraic structure in this crate is generic over [`Scalar`]. The
//! supertrace and characteristic-form identities are exact claims, so tests
//! run them over [`Exact`]; rotation angles other than multiples of pi and
//! anything involving `exp`/`sin` of a free parameter run over [`C64`].

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Exact complex rational scalar.
pub type Exact = num_complex::Complex<BigRational>;

/// Complex double-precision scalar.
pub type C64 = Complex64;

/// Common interface of the two scalar modes.
///
/// `try_sqrt` returns `None` when the value has no representable square root
/// in the mode (non-perfect-square rationals in exact mode); callers surface
/// that as a "use float mode" error.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
    + Send
    + Sync
    + 'static
{
    /// The imaginary unit.
    fn i() -> Self;
    fn from_int(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn try_inv(&self) -> Option<Self>;
    fn conjugate(&self) -> Self;
    fn try_sqrt(&self) -> Option<Self>;
    /// Numeric view, for diagnostics and float cross-checks.
    fn to_c64(&self) -> C64;
    /// Wire form `re,im` with mode-native real parts (`p/q` or decimal).
    fn to_wire(&self) -> String;
    /// Exponential where the mode supports it (always for floats, only at
    /// zero for exact rationals).
    fn try_exp(&self) -> Option<Self>;

    fn pow_i64(&self, mut e: i64) -> Option<Self> {
        let mut base = if e < 0 {
            e = -e;
            self.try_inv()?
        } else {
            self.clone()
        };
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        Some(acc)
    }
}

fn big_sqrt_exact(x: &BigInt) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let r = x.sqrt();
    if &r.clone() * &r == *x {
        Some(r)
    } else {
        None
    }
}

fn rational_sqrt_exact(x: &BigRational) -> Option<BigRational> {
    if x.is_negative() {
        return None;
    }
    let n = big_sqrt_exact(x.numer())?;
    let d = big_sqrt_exact(x.denom())?;
    Some(BigRational::new(n, d))
}

impl Scalar for Exact {
    fn i() -> Self {
        Exact::new(BigRational::zero(), BigRational::one())
    }
    fn from_int(n: i64) -> Self {
        Exact::new(BigRational::from_integer(n.into()), BigRational::zero())
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Exact::new(
            BigRational::new(num.into(), den.into()),
            BigRational::zero(),
        )
    }
    fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            let n = &self.re * &self.re + &self.im * &self.im;
            Some(Exact::new(&self.re / &n, -&self.im / &n))
        }
    }
    fn conjugate(&self) -> Self {
        Exact::new(self.re.clone(), -self.im.clone())
    }
    fn try_sqrt(&self) -> Option<Self> {
        if self.im.is_zero() {
            if self.re.is_negative() {
                let r = rational_sqrt_exact(&-self.re.clone())?;
                Some(Exact::new(BigRational::zero(), r))
            } else {
                let r = rational_sqrt_exact(&self.re)?;
                Some(Exact::new(r, BigRational::zero()))
            }
        } else {
            None
        }
    }
    fn to_c64(&self) -> C64 {
        use num_traits::ToPrimitive;
        let f = |x: &BigRational| x.to_f64().unwrap_or(f64::NAN);
        C64::new(f(&self.re), f(&self.im))
    }
    fn to_wire(&self) -> String {
        format!("{},{}", self.re, self.im)
    }
    fn try_exp(&self) -> Option<Self> {
        if self.is_zero() {
            Some(Self::one())
        } else {
            None
        }
    }
}

impl Scalar for C64 {
    fn i() -> Self {
        C64::new(0.0, 1.0)
    }
    fn from_int(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        C64::new(num as f64 / den as f64, 0.0)
    }
    fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(C64::new(1.0, 0.0) / *self)
        }
    }
    fn conjugate(&self) -> Self {
        num_complex::Complex::conj(self)
    }
    fn try_sqrt(&self) -> Option<Self> {
        Some(num_complex::Complex::sqrt(*self))
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn to_wire(&self) -> String {
        format!("{:?},{:?}", self.re, self.im)
    }
    fn try_exp(&self) -> Option<Self> {
        Some(self.exp())
    }
}

/// (-1)^k as a scalar.
pub fn sign_pow<S: Scalar>(k: u32) -> S {
    if k % 2 == 0 {
        S::one()
    } else {
        -S::one()
    }
}

/// i^k as a scalar (k may be negative).
pub fn i_pow<S: Scalar>(k: i64) -> S {
    match k.rem_euclid(4) {
        0 => S::one(),
        1 => S::i(),
        2 => -S::one(),
        _ => -S::i(),
    }
}

/// k! as a scalar.
pub fn factorial<S: Scalar>(k: u32) -> S {
    let mut acc = S::one();
    for j in 2..=k as i64 {
        acc = acc * S::from_int(j);
    }
    acc
}

/// (k)!! over the odd integers up to k: 1, 1, 3, 15, ... used for even
/// Gaussian moments (E[x^{2p}] of exp(-x^2/2) is (2p-1)!!).
pub fn double_factorial_odd<S: Scalar>(k: u32) -> S {
    let mut acc = S::one();
    let mut j = 1i64;
    while j <= k as i64 {
        acc = acc * S::from_int(j);
        j += 2;
    }
    acc
}
