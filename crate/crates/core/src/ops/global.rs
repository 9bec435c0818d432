//! Exposure and the global color operations, all in linear light.

use crate::color::{linear_to_srgb, luma, srgb_to_linear};

#[inline]
fn to_linear(px: [f64; 3]) -> [f64; 3] {
    px.map(srgb_to_linear)
}

#[inline]
fn to_encoded(px: [f64; 3]) -> [f64; 3] {
    px.map(linear_to_srgb)
}

/// Chroma gain for a saturation value: `1 + v/100` below zero (so -100 is
/// grayscale) and its reciprocal mirror `1 / (1 - v/100)` above, capped at
/// 100x. `gain(v) * gain(-v) == 1` for `|v| < 99`.
pub(crate) fn saturation_gain(v: f64) -> f64 {
    if v <= 0.0 {
        (1.0 + v / 100.0).max(0.0)
    } else {
        1.0 / (1.0 - v / 100.0).max(0.01)
    }
}

pub(super) fn exposure(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let gain = (v / 50.0).exp2();
    move |px| to_encoded(to_linear(px).map(|c| c * gain))
}

pub(super) fn saturation(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let gain = saturation_gain(v);
    move |px| {
        let lin = to_linear(px);
        let y = luma(lin);
        if gain == 0.0 {
            // exact gray; avoids per-channel rounding differences
            let g = linear_to_srgb(y);
            return [g, g, g];
        }
        to_encoded(lin.map(|c| y + (c - y) * gain))
    }
}

pub(super) fn temperature(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let warm = (v / 200.0).exp2();
    move |px| {
        let lin = to_linear(px);
        to_encoded([lin[0] * warm, lin[1], lin[2] / warm])
    }
}

pub(super) fn tint(v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let green = (-v / 200.0).exp2();
    move |px| {
        let lin = to_linear(px);
        to_encoded([lin[0], lin[1] * green, lin[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_gain_is_self_inverse() {
        for v in 1..99 {
            let v = v as f64;
            assert!((saturation_gain(v) * saturation_gain(-v) - 1.0).abs() < 1e-12, "{v}");
        }
        assert_eq!(saturation_gain(-100.0), 0.0);
        assert_eq!(saturation_gain(0.0), 1.0);
        assert_eq!(saturation_gain(50.0), 2.0);
        assert_eq!(saturation_gain(-50.0), 0.5);
    }

    #[test]
    fn temperature_moves_red_and_blue_oppositely() {
        let px = [0.5, 0.5, 0.5];
        let warm = temperature(60.0)(px);
        assert!(warm[0] > 0.5 && warm[2] < 0.5);
        assert!((warm[1] - 0.5).abs() < 1e-12);
        let back = temperature(-60.0)(warm);
        for c in 0..3 {
            assert!((back[c] - px[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn tint_positive_reduces_green() {
        let out = tint(40.0)([0.4, 0.4, 0.4]);
        assert!(out[1] < 0.4);
        assert_eq!(out[0], out[2]);
    }
}
