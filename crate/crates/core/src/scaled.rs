//! Extended-exponent floats for products that leave the `f64` range.
//!
//! Coefficients of the closed-form sum grow like `4^i` while the weights
//! shrink like `(I(1 − I))^i`; either factor alone can overflow or
//! underflow long before their product does.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// `mantissa * 2^exponent`, with `mantissa` in `[0.5, 1)` or exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScaledFloat {
    mantissa: f64,
    exponent: i64,
}

impl ScaledFloat {
    pub const ZERO: Self = Self {
        mantissa: 0.0,
        exponent: 0,
    };

    pub fn from_f64(x: f64) -> Self {
        debug_assert!(x.is_finite() && x >= 0.0);
        if x == 0.0 {
            return Self::ZERO;
        }
        let (mantissa, exponent) = frexp(x);
        Self { mantissa, exponent }
    }

    /// Nearest representable value of `n` (within two ulps).
    pub fn from_biguint(n: &BigUint) -> Self {
        let bits = n.bits();
        if bits <= 64 {
            return Self::from_f64(n.to_u64().unwrap() as f64);
        }
        let shift = bits - 64;
        let top = (n >> shift).to_u64().unwrap();
        let mut s = Self::from_f64(top as f64);
        s.exponent += shift as i64;
        s
    }

    pub fn mul(self, other: Self) -> Self {
        if self.mantissa == 0.0 || other.mantissa == 0.0 {
            return Self::ZERO;
        }
        let (mantissa, e) = frexp(self.mantissa * other.mantissa);
        Self {
            mantissa,
            exponent: self.exponent + other.exponent + e,
        }
    }

    pub fn powi(self, mut k: u64) -> Self {
        let mut base = self;
        let mut acc = Self::from_f64(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }

    pub fn log2(self) -> f64 {
        if self.mantissa == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.exponent as f64 + self.mantissa.log2()
        }
    }

    pub fn to_f64(self) -> f64 {
        ldexp(self.mantissa, self.exponent)
    }
}

fn frexp(x: f64) -> (f64, i64) {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    if raw_exp == 0 {
        // subnormal: renormalise through a power-of-two scale
        let (m, e) = frexp(x * 2f64.powi(64));
        return (m, e - 64);
    }
    let mantissa = f64::from_bits((bits & !(0x7ff << 52)) | (1022 << 52));
    (mantissa, raw_exp - 1022)
}

fn ldexp(mut x: f64, mut e: i64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return 0.0;
        }
    }
    x * 2f64.powi(e as i32)
}

/// Neumaier's compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_normal_and_subnormal() {
        for x in [1.0, 0.4, 3.0e200, 1.0e-300, 5.0e-320, 123456.789] {
            assert_eq!(ScaledFloat::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn products_outside_f64_range() {
        let tiny = ScaledFloat::from_f64(0.1).powi(400);
        let huge = ScaledFloat::from_f64(10.0).powi(400);
        let one = tiny.mul(huge).to_f64();
        assert!((one - 1.0).abs() < 1e-13, "{one}");
        assert_eq!(tiny.to_f64(), 0.0);
    }

    #[test]
    fn biguint_conversion() {
        let n = BigUint::from(3u32).pow(700);
        let s = ScaledFloat::from_biguint(&n);
        let expected_log2 = 700.0 * 3f64.log2();
        let got_log2 = s.exponent as f64 + s.mantissa.log2();
        assert!((got_log2 - expected_log2).abs() < 1e-12);
        assert_eq!(
            ScaledFloat::from_biguint(&BigUint::from(12345u32)).to_f64(),
            12345.0
        );
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10_000 {
            s.add(1e-17);
        }
        assert!((s.value() - (1.0 + 1e-13)).abs() < 1e-16);
    }
}
