//! Fixed-width lane accumulators and a branch-free `exp`.
//!
//! `Lanes<W>` is a plain `[f64; W]` whose addition is a straight-line loop,
//! which LLVM lowers to packed instructions. [`exp_approx`] is written so that
//! a loop applying it over a slice vectorizes. Nothing is fused or
//! reassociated, so results do not depend on the instruction set selected at
//! runtime.

use std::ops::Add;

#[derive(Debug, Clone, Copy, PartialEq)]
#[repr(transparent)]
pub struct Lanes<const W: usize>(pub [f64; W]);

impl<const W: usize> Lanes<W> {
    #[inline(always)]
    pub fn splat(v: f64) -> Self {
        Lanes([v; W])
    }

    #[inline(always)]
    pub fn load(src: &[f64]) -> Self {
        let mut out = [0.0; W];
        out.copy_from_slice(&src[..W]);
        Lanes(out)
    }

    /// Collapses lanes left to right: `((l0 + l1) + l2) + ...`.
    #[inline(always)]
    pub fn sum_in_order(self) -> f64 {
        let mut s = self.0[0];
        for i in 1..W {
            s += self.0[i];
        }
        s
    }
}

impl<const W: usize> Add for Lanes<W> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        let mut out = [0.0; W];
        for i in 0..W {
            out[i] = self.0[i] + rhs.0[i];
        }
        Lanes(out)
    }
}

const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5 * 2^52: adding it rounds to the nearest integer and leaves that
// integer in the low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
/// Taylor coefficients `1/2!` up to `1/13!`.
const EXP_COEFFS: [f64; 12] = [
    0.5,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5_040.0,
    1.0 / 40_320.0,
    1.0 / 362_880.0,
    1.0 / 3_628_800.0,
    1.0 / 39_916_800.0,
    1.0 / 479_001_600.0,
    1.0 / 6_227_020_800.0,
];
/// `ln 2^-1075`: below this `e^x` rounds to zero.
const UNDERFLOW: f64 = -745.133_219_101_941_1;
const EXPONENT_SHIFT: f64 = 4_503_599_627_370_496.0;

/// Branch-free `exp` for lane evaluation.
///
/// Cody-Waite reduction `x = n ln2 + r`, `|r| <= ln2/2`, a degree-13 Taylor
/// polynomial for `e^r`, then scaling by `2^n` split across two
/// multiplications so that subnormal results are produced without a branch.
/// Arguments above 709.5 are clamped; below `ln 2^-1075` the result is zero.
/// Error is within 2 ulp over the normal range.
#[inline(always)]
pub fn exp_approx(x: f64) -> f64 {
    // Far-underflow lanes compute e^0 and are zeroed at the end, so the
    // common case never touches subnormal arithmetic.
    let underflow = x < UNDERFLOW;
    let x = if x > 709.5 { 709.5 } else { x };
    let x = if underflow { 0.0 } else { x };
    let n = (x * std::f64::consts::LOG2_E + ROUND_MAGIC) - ROUND_MAGIC;
    let r = (x - n * LN2_HI) - n * LN2_LO;

    // Estrin's scheme: the same polynomial as Horner's rule with a third of
    // the dependency chain.
    let c = &EXP_COEFFS;
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let q01 = (c[0] + c[1] * r) + (c[2] + c[3] * r) * r2;
    let q23 = (c[4] + c[5] * r) + (c[6] + c[7] * r) * r2;
    let q45 = (c[8] + c[9] * r) + (c[10] + c[11] * r) * r2;
    let p = (q01 + q23 * r4) + q45 * r8;
    let p = (p * r2 + r) + 1.0;

    // Integer work stays in f64 (exact here) because packed 64-bit
    // arithmetic shifts are missing below AVX-512.
    let n1 = (0.5 * n).floor();
    let n2 = n - n1;
    let v = p * pow2(n1) * pow2(n2);
    if underflow {
        0.0
    } else {
        v
    }
}

/// `2^k` for integral `k` in `[-1022, 1023]`: adding `2^52` leaves the biased
/// exponent in the low mantissa bits, and the shift moves it into place.
#[inline(always)]
fn pow2(k: f64) -> f64 {
    f64::from_bits((k + (1023.0 + EXPONENT_SHIFT)).to_bits() << 52)
}
