//! Scalar color math shared by the operations and the statistics.

/// Rec. 709 luminance weights.
pub const LUMA_REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// sRGB electro-optical transfer function, encoded `[0,1]` to linear `[0,1]`.
#[inline]
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// Inverse of [`srgb_to_linear`].
#[inline]
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
pub fn luma(rgb: [f64; 3]) -> f64 {
    LUMA_REC709[0] * rgb[0] + LUMA_REC709[1] * rgb[1] + LUMA_REC709[2] * rgb[2]
}

/// HSV saturation `(max - min) / max`, zero for black.
#[inline]
pub fn hsv_saturation(rgb: [f64; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

/// Hue in degrees `[0, 360)`, saturation and value, all from non-negative RGB.
/// Neutral pixels report hue 0.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max <= 0.0 { 0.0 } else { delta / max };
    if delta <= 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h.rem_euclid(360.0), s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_endpoints_and_midpoint() {
        assert_eq!(srgb_to_linear(0.0), 0.0);
        assert!((srgb_to_linear(1.0) - 1.0).abs() < 1e-12);
        // ((0.5 + 0.055) / 1.055)^2.4
        let mid = srgb_to_linear(0.5);
        assert!((mid - 0.214_041_140_5).abs() < 1e-9, "{mid}");
    }

    #[test]
    fn transfer_round_trip() {
        for i in 0..=1000 {
            let v = i as f64 / 1000.0;
            assert!((linear_to_srgb(srgb_to_linear(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn hsv_round_trip() {
        let samples = [
            [1.0, 0.0, 0.0],
            [0.2, 0.7, 0.1],
            [0.3, 0.3, 0.9],
            [0.5, 0.5, 0.5],
            [0.9, 0.1, 0.6],
            [0.0, 0.0, 0.0],
        ];
        for rgb in samples {
            let (h, s, v) = rgb_to_hsv(rgb);
            let back = hsv_to_rgb(h, s, v);
            for c in 0..3 {
                assert!((back[c] - rgb[c]).abs() < 1e-12, "{rgb:?} -> {back:?}");
            }
        }
        assert_eq!(rgb_to_hsv([0.0, 0.0, 1.0]).0, 240.0);
    }
}
