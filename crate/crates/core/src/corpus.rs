//! Procedural stand-ins for expert-edited photographs.
//!
//! Each image is a smooth two-color gradient with soft colored blobs, a strip
//! covering the full hue circle (so every color band has members), and a
//! little low-frequency texture. Values stay inside the mid tones, away from
//! the clip rails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::hsv_to_rgb;
use crate::image::{quantize, ImageBuffer};

const CORPUS_SEED: u64 = 0x5eed_c0de;

struct Blob {
    cx: f64,
    cy: f64,
    radius: f64,
    rgb: [f64; 3],
}

fn random_color(rng: &mut ChaCha8Rng, s: (f64, f64), v: (f64, f64)) -> [f64; 3] {
    let h = rng.random_range(0.0..360.0);
    hsv_to_rgb(h, rng.random_range(s.0..s.1), rng.random_range(v.0..v.1))
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|c| a[c] + (b[c] - a[c]) * t)
}

/// Deterministic synthetic "expert" image number `index`.
pub fn expert_image(index: u64, width: u32, height: u32) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    rng.set_stream(index);
    let top = random_color(&mut rng, (0.1, 0.5), (0.45, 0.75));
    let bottom = random_color(&mut rng, (0.1, 0.5), (0.3, 0.6));
    let blobs: Vec<Blob> = (0..rng.random_range(4..8))
        .map(|_| Blob {
            cx: rng.random_range(0.0..1.0),
            cy: rng.random_range(0.0..1.0),
            radius: rng.random_range(0.08..0.3),
            rgb: random_color(&mut rng, (0.3, 0.8), (0.35, 0.8)),
        })
        .collect();
    let hue_offset = rng.random_range(0.0..360.0);
    let strip_top = rng.random_range(0.55..0.75);
    let freq = [rng.random_range(2.0..6.0), rng.random_range(2.0..6.0)];
    let phase = rng.random_range(0.0..std::f64::consts::TAU);

    ImageBuffer::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) / width as f64;
        let v = (y as f64 + 0.5) / height as f64;
        let mut px = mix(top, bottom, v);
        for b in &blobs {
            let d2 = (u - b.cx).powi(2) + (v - b.cy).powi(2);
            let a = (-d2 / (2.0 * b.radius * b.radius)).exp() * 0.85;
            px = mix(px, b.rgb, a);
        }
        if v > strip_top && v < strip_top + 0.15 {
            let hue = (hue_offset + u * 360.0).rem_euclid(360.0);
            px = hsv_to_rgb(hue, 0.65, 0.7);
        }
        let texture = 0.03 * (freq[0] * u * 6.3 + phase).sin() * (freq[1] * v * 6.3).cos();
        px.map(|c| quantize((c + texture).clamp(0.08, 0.92)))
    })
}

/// The first `n` corpus images.
pub fn corpus(n: usize, width: u32, height: u32) -> Vec<ImageBuffer> {
    (0..n as u64).map(|i| expert_image(i, width, height)).collect()
}

/// The fixed mid-tone image used by the monotonicity checks.
pub fn test_image() -> ImageBuffer {
    expert_image(0, 128, 96)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::compute_stats;

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(expert_image(3, 32, 24), expert_image(3, 32, 24));
        assert_ne!(expert_image(3, 32, 24), expert_image(4, 32, 24));
    }

    #[test]
    fn stays_off_the_rails() {
        for img in corpus(5, 48, 32) {
            assert!(img.data().iter().all(|&s| (5000..=61000).contains(&s)));
            let stats = compute_stats(&img);
            assert!(stats.mean_luminance > 0.05 && stats.mean_luminance < 0.7);
        }
    }
}
