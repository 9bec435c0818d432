//! Tone operations on gamma-encoded values.
//!
//! Blacks, whites, shadows and highlights move every channel of a pixel by
//! the same offset, chosen so the pixel's gamma luminance `Y` follows the flow
//! of `dY/dt = w(Y)` for `t = v / 250`:
//!
//! | op         | mask `w(Y)` |
//! |------------|-------------|
//! | blacks     | `(1-Y)^4`   |
//! | shadows    | `(1-Y)^2`   |
//! | highlights | `Y^2`       |
//! | whites     | `Y^4`       |
//!
//! For small `t` this is `Y + t·w(Y)`. Because the luminance weights sum to
//! one, the output luminance is exactly the flowed value, so running the flow
//! for `-t` recovers the input.

use crate::color::luma;

const TONE_SCALE: f64 = 250.0;

/// Flow of `dx/ds = x^n` (n ≥ 2) from `x` for time `s`, `x ≥ 0`.
/// Returns `+inf` when the solution escapes in finite time.
#[inline]
pub(crate) fn power_flow(x: f64, n: i32, s: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = (n - 1) as f64;
    let base = 1.0 - k * s * x.powi(n - 1);
    if base <= 0.0 {
        f64::INFINITY
    } else {
        x * base.powf(-1.0 / k)
    }
}

fn offset_all(px: [f64; 3], d: f64) -> [f64; 3] {
    [px[0] + d, px[1] + d, px[2] + d]
}

/// Mask on the dark end: `w = (1-Y)^n`.
fn dark_tone(v: f64, n: i32) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let t = v / TONE_SCALE;
    move |px| {
        let y = luma(px);
        let shadow = power_flow((1.0 - y).max(0.0), n, -t);
        let target = if shadow.is_infinite() { f64::NEG_INFINITY } else { 1.0 - shadow };
        offset_all(px, target - y)
    }
}

/// Mask on the bright end: `w = Y^n`.
fn bright_tone(v: f64, n: i32) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let t = v / TONE_SCALE;
    move |px| {
        let y = luma(px);
        offset_all(px, power_flow(y.max(0.0), n, t) - y)
    }
}

pub(super) fn blacks(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    dark_tone(v, 4)
}

pub(super) fn shadows(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    dark_tone(v, 2)
}

pub(super) fn highlights(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    bright_tone(v, 2)
}

pub(super) fn whites(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    bright_tone(v, 4)
}

/// Scales every encoded channel around 0.5 by `2^(v/100)`.
pub(super) fn contrast(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let gain = (v / 100.0).exp2();
    move |px| px.map(|c| 0.5 + (c - 0.5) * gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// RK4 integration of dx/ds = x^n, independent of the closed form.
    fn rk4(x0: f64, n: i32, s: f64) -> f64 {
        let steps = 20_000;
        let h = s / steps as f64;
        let f = |x: f64| x.powi(n);
        let mut x = x0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn closed_form_matches_numeric_flow() {
        for n in [2, 4] {
            for &x in &[0.05, 0.3, 0.6, 0.95] {
                for &s in &[-0.4, -0.1, 0.1, 0.2] {
                    let exact = power_flow(x, n, s);
                    if exact.is_finite() && exact < 2.0 {
                        assert!((exact - rk4(x, n, s)).abs() < 1e-9, "n={n} x={x} s={s}");
                    }
                }
            }
        }
    }

    #[test]
    fn flow_inverts() {
        for n in [2, 4] {
            for i in 1..100 {
                let x = i as f64 / 100.0;
                let fwd = power_flow(x, n, 0.2);
                if fwd.is_finite() {
                    assert!((power_flow(fwd, n, -0.2) - x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn first_order_matches_additive_mask() {
        // Y + t·w(Y) for small t
        let t = 1.0 / TONE_SCALE;
        let px = [0.3, 0.4, 0.5];
        let y = luma(px);
        let out = blacks(1.0)(px);
        let expected = y + t * (1.0 - y).powi(4);
        assert!((luma(out) - expected).abs() < 1e-5);
        let out = highlights(1.0)(px);
        assert!((luma(out) - (y + t * y * y)).abs() < 1e-5);
    }

    #[test]
    fn black_pixel_cannot_be_darkened() {
        assert!(blacks(-60.0)([0.0; 3]).iter().all(|&c| c <= 0.0));
        assert!(shadows(-60.0)([0.0; 3]).iter().all(|&c| c <= 0.0));
        // whites and highlights have zero mask at black
        assert_eq!(whites(80.0)([0.0; 3]), [0.0; 3]);
        assert_eq!(highlights(80.0)([0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn contrast_keeps_pivot() {
        assert_eq!(contrast(70.0)([0.5; 3]), [0.5; 3]);
        let up = contrast(100.0)([0.75, 0.25, 0.5]);
        assert_eq!(up, [1.0, 0.0, 0.5]);
    }
}
