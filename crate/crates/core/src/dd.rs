//! Double-double arithmetic for phase reduction.
//!
//! A value is the unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`,
//! giving roughly 106 bits of significand. Only the operations needed to
//! evaluate `w * x^e` modulo a period to full double precision are
//! provided: error-free sums and products, `exp`, `ln` and `powf`.

use std::ops::{Add, Mul, Neg, Sub};

/// ln 2 split into three non-overlapping doubles.
const LN2: [f64; 3] = [
    std::f64::consts::LN_2,
    2.319_046_813_846_299_6e-17,
    5.707_708_438_416_212e-34,
];

/// 2π split into three non-overlapping doubles.
const TWO_PI: [f64; 3] = [
    std::f64::consts::TAU,
    2.449_293_598_294_706_4e-16,
    -5.989_539_619_436_679e-33,
];

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn from_prod(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = self.lo.mul_add(b, e);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let r = (self.hi - p - e + self.lo) / b;
        let (hi, lo) = quick_two_sum(q1, r);
        Self { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Self {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Self { hi, lo }
    }

    /// Multiplication by an exact power of two.
    #[inline]
    fn scale(self, factor: f64) -> Self {
        Self {
            hi: self.hi * factor,
            lo: self.lo * factor,
        }
    }

    fn from_parts3(parts: &[f64; 3], k: f64) -> Self {
        // k * (p0 + p1 + p2) for small integer-valued k
        let (h, e0) = two_prod(parts[0], k);
        let (m, e1) = two_prod(parts[1], k);
        let tail = e1 + parts[2] * k;
        Self { hi: h, lo: 0.0 } + Self { hi: e0, lo: 0.0 } + Self { hi: m, lo: tail }
    }

    /// `e^x`, accurate to a few units in the last double-double place for
    /// `|x| < 700`.
    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Self::ONE;
        }
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        let k = (self.hi / LN2[0]).round();
        let r = self - Self::from_parts3(&LN2, k);
        // e^r = (e^{r/2^8})^{2^8}; track p = e^s - 1 so squaring does not
        // amplify the rounding of the leading 1.
        const SQUARINGS: i32 = 8;
        let s = r.scale(1.0 / f64::from(1 << SQUARINGS));
        let mut term = s;
        let mut p = s;
        let mut i = 2.0;
        while i < 16.0 {
            term = (term * s).div_f64(i);
            p = p + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
            i += 1.0;
        }
        for _ in 0..SQUARINGS {
            // (1 + p)^2 - 1 = 2p + p^2
            p = p.scale(2.0) + p * p;
        }
        let result = p + Self::ONE;
        let pow2 = 2f64.powi(k as i32);
        result.scale(pow2)
    }

    /// Natural logarithm via one Newton step on `exp`.
    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(f64::NAN);
        }
        let y = Self::from_f64(self.hi.ln());
        // y + x e^{-y} - 1
        y + self * (-y).exp() - Self::ONE
    }

    /// `base^e` for a positive double base and double exponent.
    pub fn powf(base: f64, e: f64) -> Self {
        if e == 0.0 {
            return Self::ONE;
        }
        if e == 1.0 {
            return Self::from_f64(base);
        }
        (Self::from_f64(base).ln().mul_f64(e)).exp()
    }

    /// Remainder in `[0, m)` for a modulus `m` that is a power of two
    /// (typically 1 or 2).
    pub fn rem_pow2(self, m: f64) -> f64 {
        // both reductions are exact for a power-of-two modulus
        let a = self.hi - (self.hi / m).floor() * m;
        let b = self.lo - (self.lo / m).floor() * m;
        let r = a + b;
        if r >= m {
            r - m
        } else {
            r
        }
    }

    /// Remainder in `[0, m)` kept as a double-double.
    pub fn rem_pow2_dd(self, m: f64) -> Self {
        let a = self.hi - (self.hi / m).floor() * m;
        let b = self.lo - (self.lo / m).floor() * m;
        let mut r = Self::from_f64(a).add_f64(b);
        if r.hi >= m {
            r = r.add_f64(-m);
        }
        r
    }

    /// Remainder modulo 2π, returned in `[-π, π)`.
    pub fn rem_two_pi(self) -> f64 {
        wrap_angle(self.rem_two_pi_dd().to_f64())
    }

    /// Remainder modulo 2π as a double-double, within a rounding of `[-π, π)`.
    pub fn rem_two_pi_dd(self) -> Self {
        let q = (self.hi / TWO_PI[0]).round();
        let mut r = self - Self::from_parts3(&TWO_PI, q);
        if r.hi >= std::f64::consts::PI {
            r = r - Self::from_parts3(&TWO_PI, 1.0);
        } else if r.hi < -std::f64::consts::PI {
            r = r + Self::from_parts3(&TWO_PI, 1.0);
        }
        r
    }
}

/// π as a double-double.
pub const PI_DD: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};

/// Wraps an angle that is already within a few periods of zero to `[-π, π)`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = x;
    if !(-PI..PI).contains(&r) {
        r -= TWO_PI[0] * ((r + PI) / TWO_PI[0]).floor();
        if r >= PI {
            r -= TWO_PI[0];
        }
    }
    r
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = self.hi.mul_add(b.lo, self.lo.mul_add(b.hi, e));
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

/// `(x + k n) mod 2π` in `[-π, π)`, with the product `k n` formed exactly.
#[inline]
pub fn angle_plus_linear(x: f64, k: f64, n: f64) -> f64 {
    DoubleDouble::from_prod(k, n).add_f64(x).rem_two_pi()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_ln_roundtrip_is_double_double_accurate() {
        for &x in &[0.5, 1.0, 3.7, 10.0, 33.3, 41.9, -20.0] {
            let v = DoubleDouble::from_f64(x).exp().ln();
            let err = (v - DoubleDouble::from_f64(x)).to_f64().abs();
            assert!(err < 1e-29 * x.abs().max(1.0), "x={x} err={err}");
        }
    }

    #[test]
    fn exp_one_matches_e() {
        let e = DoubleDouble::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert_eq!(e.hi, std::f64::consts::E);
        assert!((e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-31);
    }

    #[test]
    fn integer_powers_reduce_exactly() {
        // (m^2)^{3/2} = m^3 is an integer, so the remainder mod 2 is m^3 mod 2.
        for m in [3u64, 1001, 65_537, 999_999, 1_000_000] {
            let n = (m * m) as f64;
            let v = DoubleDouble::powf(n, 1.5);
            let r = v.rem_pow2(2.0);
            let expect = (m % 2) as f64;
            let d = (r - expect).abs().min((r - expect - 2.0).abs()).min((r - expect + 2.0).abs());
            assert!(d < 5e-12, "m={m} r={r}");
        }
    }

    #[test]
    fn rem_two_pi_of_multiples() {
        let x = DoubleDouble::from_parts3(&TWO_PI, 123_456_789.0).add_f64(0.25);
        assert!((x.rem_two_pi() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dd_remainders() {
        let x = DoubleDouble::from_prod(3.0, 1.0e17).add_f64(0.75);
        let r = x.rem_pow2_dd(2.0);
        assert!((r.to_f64() - 0.75).abs() < 1e-15);
        let y = DoubleDouble::from_parts3(&TWO_PI, 1e9).add_f64(-0.5).rem_two_pi_dd();
        assert!((y.to_f64() + 0.5).abs() < 1e-12);
        assert!((PI_DD * DoubleDouble::from_f64(2.0) - DoubleDouble::from_parts3(&TWO_PI, 1.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-15);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-15);
    }
}
