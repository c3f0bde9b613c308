//! Floating-point shim: `std` intrinsics when available, `libm` otherwise.
//!
//! `core` provides no transcendental or rounding functions for `f64`, so all
//! float math in this crate goes through these wrappers to stay
//! `no_std`-compatible without sprinkling `cfg` throughout the numeric code.

#![allow(dead_code)]

macro_rules! shim {
    ($(($name:ident, $libm:ident)),* $(,)?) => {
        $(
            #[inline(always)]
            pub(crate) fn $name(x: f64) -> f64 {
                #[cfg(feature = "std")]
                {
                    x.$name()
                }
                #[cfg(not(feature = "std"))]
                {
                    libm::$libm(x)
                }
            }
        )*
    };
}

shim!(
    (abs, fabs),
    (floor, floor),
    (ceil, ceil),
    (round, round),
    (sqrt, sqrt),
    (sin, sin),
    (cos, cos),
    (exp, exp),
    (ln, log),
    (asin, asin),
);

#[inline(always)]
pub(crate) fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, y)
    }
}

#[inline(always)]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.hypot(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::hypot(x, y)
    }
}

/// Fused multiply-add `a * b + c`.
#[inline(always)]
pub(crate) fn fma(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::fma(a, b, c)
    }
}

/// Least non-negative remainder of `x` modulo a positive `m`.
#[inline(always)]
pub(crate) fn rem_euclid(x: f64, m: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.rem_euclid(m)
    }
    #[cfg(not(feature = "std"))]
    {
        let r = x % m;
        if r < 0.0 {
            r + abs(m)
        } else {
            r
        }
    }
}

/// Complementary error function (not in `std`; always from `libm`).
#[inline(always)]
pub(crate) fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Natural log of the gamma function (always from `libm`).
#[inline(always)]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
