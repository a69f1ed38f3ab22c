//! Reduced-precision reciprocal, modelling the 11-bit hardware estimate of
//! x86 `rcpps`.

/// Mantissa bits cleared from the exact single-precision reciprocal.
const DROPPED_BITS: u32 = 23 - 11;
const KEEP_MASK: u32 = !((1 << DROPPED_BITS) - 1);

/// Approximate `1 / x` with 11 explicit mantissa bits, so that
/// `|r * x - 1| <= 2^-11`. Zero maps to infinity, non-finite values pass
/// through.
#[inline(always)]
pub fn fast_reciprocal(x: f32) -> f32 {
    let exact = 1.0 / x;
    if exact.is_finite() {
        f32::from_bits(exact.to_bits() & KEEP_MASK)
    } else {
        exact
    }
}

/// One Newton-Raphson step on top of [`fast_reciprocal`]:
/// `r' = r * (2 - x * r)`, roughly doubling the correct bits.
#[inline(always)]
pub fn fast_reciprocal_refined(x: f32) -> f32 {
    let r = fast_reciprocal(x);
    r * (2.0 - x * r)
}
