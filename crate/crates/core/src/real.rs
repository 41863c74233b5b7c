//! Scalar abstraction for the posterior algebra.
//!
//! Everything that touches kernel matrices (Cholesky factors, posterior
//! variances, projection distances, acquisition values) is generic over
//! [`Real`]. `f64` is the default; [`Mp`] is a fixed-precision binary float
//! for runs whose posterior variances fall far below `f64` round-off, such as
//! squared-exponential kernels after a few dozen design points.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

pub trait Real:
    Clone
    + fmt::Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign
    + SubAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
{
    /// Short identifier used in reports ("f64", "mp512", ...).
    const NAME: &'static str;

    /// Unit round-off of the representation.
    fn epsilon() -> f64;

    /// Relative scale used by the jitter and linear-dependence policies.
    /// `1e-12` for `f64`, `2^(24 - bits)` for multiprecision types.
    fn jitter_scale() -> f64;

    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// `self * rhs` without consuming either operand.
    fn mul_ref(&self, rhs: &Self) -> Self;

    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    /// `exp(self) - 1`, accurate for small arguments.
    fn exp_m1(&self) -> Self;
    fn ln(&self) -> Self;
    fn powf(&self, exponent: &Self) -> Self;
    fn abs(&self) -> Self;
    fn is_finite(&self) -> bool;

    fn is_sign_negative(&self) -> bool {
        *self < Self::zero()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    fn epsilon() -> f64 {
        f64::EPSILON
    }

    fn jitter_scale() -> f64 {
        1e-12
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn exp_m1(&self) -> Self {
        f64::exp_m1(*self)
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn powf(&self, exponent: &Self) -> Self {
        f64::powf(*self, *exponent)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> =
        RefCell::new(Consts::new().expect("astro-float constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Binary floating point with `BITS` bits of mantissa (rounded up to whole
/// 64-bit words), round-to-nearest-even.
#[derive(Clone)]
pub struct Mp<const BITS: usize>(BigFloat);

impl<const BITS: usize> Mp<BITS> {
    pub fn inner(&self) -> &BigFloat {
        &self.0
    }
}

impl<const BITS: usize> fmt::Debug for Mp<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mp<{}>({:e})", BITS, self.to_f64())
    }
}

impl<const BITS: usize> PartialEq for Mp<BITS> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<const BITS: usize> PartialOrd for Mp<BITS> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! mp_binop {
    ($tr:ident, $method:ident, $assign_tr:ident, $assign_method:ident, $op:ident) => {
        impl<const BITS: usize> $tr for Mp<BITS> {
            type Output = Self;
            fn $method(self, rhs: Self) -> Self {
                Mp(self.0.$op(&rhs.0, BITS, RM))
            }
        }
        impl<'a, const BITS: usize> $tr<&'a Mp<BITS>> for Mp<BITS> {
            type Output = Self;
            fn $method(self, rhs: &'a Mp<BITS>) -> Self {
                Mp(self.0.$op(&rhs.0, BITS, RM))
            }
        }
        impl<const BITS: usize> $assign_tr for Mp<BITS> {
            fn $assign_method(&mut self, rhs: Self) {
                self.0 = self.0.$op(&rhs.0, BITS, RM);
            }
        }
        impl<'a, const BITS: usize> $assign_tr<&'a Mp<BITS>> for Mp<BITS> {
            fn $assign_method(&mut self, rhs: &'a Mp<BITS>) {
                self.0 = self.0.$op(&rhs.0, BITS, RM);
            }
        }
    };
}

mp_binop!(Add, add, AddAssign, add_assign, add);
mp_binop!(Sub, sub, SubAssign, sub_assign, sub);

impl<const BITS: usize> Mul for Mp<BITS> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Mp(self.0.mul(&rhs.0, BITS, RM))
    }
}

impl<'a, const BITS: usize> Mul<&'a Mp<BITS>> for Mp<BITS> {
    type Output = Self;
    fn mul(self, rhs: &'a Mp<BITS>) -> Self {
        Mp(self.0.mul(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Div for Mp<BITS> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        Mp(self.0.div(&rhs.0, BITS, RM))
    }
}

impl<'a, const BITS: usize> Div<&'a Mp<BITS>> for Mp<BITS> {
    type Output = Self;
    fn div(self, rhs: &'a Mp<BITS>) -> Self {
        Mp(self.0.div(&rhs.0, BITS, RM))
    }
}

impl<const BITS: usize> Neg for Mp<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        Mp(self.0.neg())
    }
}

/// `x * 2^e` without intermediate overflow.
fn ldexp(x: f64, e: i64) -> f64 {
    if e > 2100 {
        return x * f64::INFINITY;
    }
    if e < -2200 {
        return x * 0.0;
    }
    let mut v = x;
    let mut rem = e;
    while rem > 1000 {
        v *= 2f64.powi(1000);
        rem -= 1000;
    }
    while rem < -1000 {
        v *= 2f64.powi(-1000);
        rem += 1000;
    }
    v * 2f64.powi(rem as i32)
}

impl<const BITS: usize> Real for Mp<BITS> {
    const NAME: &'static str = match BITS {
        128 => "mp128",
        256 => "mp256",
        384 => "mp384",
        512 => "mp512",
        1024 => "mp1024",
        _ => "mp",
    };

    fn epsilon() -> f64 {
        ldexp(1.0, -(BITS as i64))
    }

    fn jitter_scale() -> f64 {
        ldexp(1.0, 24 - BITS as i64)
    }

    fn from_f64(x: f64) -> Self {
        Mp(BigFloat::from_f64(x, BITS))
    }

    fn to_f64(&self) -> f64 {
        if self.0.is_nan() {
            return f64::NAN;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        if self.0.is_zero() {
            return 0.0;
        }
        match self.0.as_raw_parts() {
            Some((words, _, sign, exponent, _)) => {
                // mantissa is normalised to [1/2, 1); most significant word last
                let top = *words.last().unwrap_or(&0);
                let next = if words.len() > 1 {
                    words[words.len() - 2]
                } else {
                    0
                };
                let m = ((top as u128) << 64 | next as u128) as f64;
                let v = ldexp(m, exponent as i64 - 128);
                match sign {
                    Sign::Neg => -v,
                    Sign::Pos => v,
                }
            }
            None => f64::NAN,
        }
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        Mp(self.0.mul(&rhs.0, BITS, RM))
    }

    fn sqrt(&self) -> Self {
        Mp(self.0.sqrt(BITS, RM))
    }

    fn exp(&self) -> Self {
        with_consts(|cc| Mp(self.0.exp(BITS, RM, cc)))
    }

    fn exp_m1(&self) -> Self {
        if self.0.is_zero() {
            return Self::zero();
        }
        let magnitude = self.0.exponent().unwrap_or(0) as i64;
        if magnitude > 0 {
            return self.exp() - Self::one();
        }
        // |x| < 1: exp(x) - 1 cancels about -log2|x| leading bits
        let extra = (-magnitude) as usize + 64;
        let p = BITS + extra;
        with_consts(|cc| {
            let e = self.0.exp(p, RM, cc);
            let one = BigFloat::from_f64(1.0, p);
            let diff = e.sub(&one, p, RM);
            let mut out = diff;
            out.set_precision(BITS, RM).ok();
            Mp(out)
        })
    }

    fn ln(&self) -> Self {
        with_consts(|cc| Mp(self.0.ln(BITS, RM, cc)))
    }

    fn powf(&self, exponent: &Self) -> Self {
        with_consts(|cc| Mp(self.0.pow(&exponent.0, BITS, RM, cc)))
    }

    fn abs(&self) -> Self {
        Mp(self.0.abs())
    }

    fn is_finite(&self) -> bool {
        !(self.0.is_nan() || self.0.is_inf())
    }
}

/// Numeric precision selectable at run time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    F64,
    Mp256,
    Mp512,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F64 => <f64 as Real>::NAME,
            Precision::Mp256 => <Mp<256> as Real>::NAME,
            Precision::Mp512 => <Mp<512> as Real>::NAME,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "f64" => Some(Precision::F64),
            "mp256" => Some(Precision::Mp256),
            "mp512" => Some(Precision::Mp512),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = Mp<256>;

    #[test]
    fn mp_round_trips_f64() {
        for &x in &[
            0.0,
            1.0,
            -3.5,
            0.123456,
            1e-100,
            -7.25e200,
            1e-300,
            2f64.powi(-1020),
        ] {
            assert_eq!(M::from_f64(x).to_f64(), x, "{x}");
        }
    }

    #[test]
    fn mp_arithmetic_matches_f64_on_representable_values() {
        let a = M::from_f64(1.5);
        let b = M::from_f64(0.25);
        assert_eq!((a.clone() + &b).to_f64(), 1.75);
        assert_eq!((a.clone() - &b).to_f64(), 1.25);
        assert_eq!(a.mul_ref(&b).to_f64(), 0.375);
        assert_eq!((a / b).to_f64(), 6.0);
    }

    #[test]
    fn mp_transcendentals() {
        let one = M::one();
        assert!((one.exp().to_f64() - std::f64::consts::E).abs() < 1e-15);
        assert!((M::from_f64(2.0).sqrt().to_f64() - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((M::from_f64(10.0).ln().to_f64() - 10f64.ln()).abs() < 1e-15);
        let p = M::from_f64(2.0).powf(&M::from_f64(-0.5));
        assert!((p.to_f64() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mp_exp_m1_keeps_tiny_arguments() {
        let tiny = M::from_f64(1e-60);
        let v = tiny.exp_m1();
        assert!((v.to_f64() / 1e-60 - 1.0).abs() < 1e-15);
        let neg = M::from_f64(-0.3).exp_m1().to_f64();
        assert!((neg - (-0.3f64).exp_m1()).abs() < 1e-15);
    }

    #[test]
    fn mp_resolves_differences_below_f64_roundoff() {
        let one = M::one();
        let tiny = M::from_f64(1e-60);
        let d = (one.clone() + &tiny) - &one;
        assert!((d.to_f64() - 1e-60).abs() < 1e-70);
        assert!(M::epsilon() < 1e-70);
    }
}
