//! Color-specific operations restricted to one of eight hue bands.
//!
//! Band membership is a cosine window running from the previous band center
//! up to this band's center (`sin²`) and down to the next center (`cos²`).
//! Adjacent windows share a segment and sum to one there, so the eight
//! weights form a partition of unity at every hue.
//!
//! Hue, saturation and value are taken on linear RGB. Pixels with zero
//! membership or zero saturation are returned untouched.

use std::f64::consts::FRAC_PI_2;

use super::global::saturation_gain;
use super::registry::{Band, BandChannel};
use crate::color::{hsv_to_rgb, linear_to_srgb, rgb_to_hsv, srgb_to_linear};

/// Maximum hue rotation in degrees at |v| = 100.
const MAX_HUE_SHIFT: f64 = 30.0;

/// Geometry of one band window: start of the rising segment, its length, and
/// the length of the falling segment after the center.
#[derive(Debug, Clone, Copy)]
struct Window {
    start: f64,
    center: f64,
    rise: f64,
    fall: f64,
}

enum Position {
    Outside,
    /// Distance from the window start, `0 < x < rise`.
    Rising(f64),
    /// Distance past the center, `0 <= y < fall`.
    Falling(f64),
}

impl Window {
    fn of(band: Band) -> Window {
        let i = band.index();
        let prev = Band::CENTERS[(i + 7) % 8];
        let center = Band::CENTERS[i];
        let next = Band::CENTERS[(i + 1) % 8];
        Window {
            start: prev,
            center,
            rise: (center - prev).rem_euclid(360.0),
            fall: (next - center).rem_euclid(360.0),
        }
    }

    fn locate(&self, hue: f64) -> Position {
        let d = (hue - self.start).rem_euclid(360.0);
        if d <= 0.0 {
            Position::Outside
        } else if d < self.rise {
            Position::Rising(d)
        } else if d < self.rise + self.fall {
            Position::Falling(d - self.rise)
        } else {
            Position::Outside
        }
    }

    fn weight(&self, hue: f64) -> f64 {
        match self.locate(hue) {
            Position::Outside => 0.0,
            Position::Rising(x) => (FRAC_PI_2 * x / self.rise).sin().powi(2),
            Position::Falling(y) => (FRAC_PI_2 * y / self.fall).cos().powi(2),
        }
    }

    /// Flow of `dh/dt = weight(h)` for time `t` (degrees).
    ///
    /// With `a = π / (2·rise)` and `b = π / (2·fall)` the time coordinate
    /// `τ(h)` is `-cot(a·x)/a` on the rising segment and `tan(b·y)/b` on the
    /// falling one; it is monotone across the window and zero at the center,
    /// so the flow is `h ↦ τ⁻¹(τ(h) + t)`. The edges are never reached.
    fn flow(&self, hue: f64, t: f64) -> f64 {
        let a = FRAC_PI_2 / self.rise;
        let b = FRAC_PI_2 / self.fall;
        let tau = match self.locate(hue) {
            Position::Outside => return hue,
            Position::Rising(x) => -1.0 / ((a * x).tan() * a),
            Position::Falling(y) => (b * y).tan() / b,
        };
        let tau = tau + t;
        let shifted = if tau < 0.0 {
            self.start + (FRAC_PI_2 + (a * tau).atan()) / a
        } else {
            self.center + (b * tau).atan() / b
        };
        shifted.rem_euclid(360.0)
    }
}

/// Membership of `hue` (degrees) in `band`.
pub fn band_weight(band: Band, hue: f64) -> f64 {
    Window::of(band).weight(hue)
}

/// Memberships of `hue` in all eight bands, in [`Band::ALL`] order.
pub fn band_weights(hue: f64) -> [f64; 8] {
    Band::ALL.map(|b| band_weight(b, hue))
}

pub(super) fn kernel(channel: BandChannel, band: Band, v: f64) -> impl Fn([f64; 3]) -> [f64; 3] + Sync {
    let window = Window::of(band);
    move |px| {
        let lin = px.map(srgb_to_linear);
        let (h, s, val) = rgb_to_hsv(lin);
        if s <= 0.0 || val <= 0.0 {
            return px;
        }
        let w = window.weight(h);
        if w <= 0.0 {
            return px;
        }
        let out = match channel {
            BandChannel::Hue => {
                let t = MAX_HUE_SHIFT * v / 100.0 * s;
                hsv_to_rgb(window.flow(h, t), s, val)
            }
            BandChannel::Saturation => hsv_to_rgb(h, s * saturation_gain(v * w), val),
            BandChannel::Luminance => {
                let gain = (v / 200.0 * w * s).exp2();
                hsv_to_rgb(h, s, val * gain)
            }
        };
        out.map(linear_to_srgb)
    }
}
