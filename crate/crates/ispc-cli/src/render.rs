//! Human-facing PNG renders: instance overlays, score maps, direction
//! fields. Colors are derived deterministically so renders are testable
//! byte-for-byte.

use std::path::Path;

use image::{Rgb, RgbImage};

use ispc_core::direction::DirectionField;
use ispc_core::pipeline::SceneLabeling;
use ispc_core::rng;
use ispc_core::template::SCORE_SENTINEL;
use ispc_core::Raster;

use crate::error::{CliError, Result};

/// Stable non-gray color for an instance id.
pub fn instance_color(id: u32) -> Rgb<u8> {
    let h = rng::mix((id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED);
    let r = 64 + (h & 0x7F) as u8;
    let g = 64 + ((h >> 8) & 0x7F) as u8;
    let mut b = 64 + ((h >> 16) & 0x7F) as u8;
    if r == g && g == b {
        b ^= 0x40; // never collide with the gray background
    }
    Rgb([r, g, b])
}

fn save(img: &RgbImage, out: &Path) -> Result<()> {
    let mut bytes: Vec<u8> = Vec::new();
    let mut cursor = std::io::Cursor::new(&mut bytes);
    img.write_to(&mut cursor, image::ImageFormat::Png)
        .map_err(|e| CliError::format(format!("{}: {e}", out.display())))?;
    crate::format::write_atomic(out, &bytes)
}

/// Instances in distinct colors over gray semantics.
pub fn render_labeling(labeling: &SceneLabeling, out: &Path) -> Result<()> {
    let (w, h) = labeling.dims();
    let mut img = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let id = *labeling.instance_ids.get(r, c);
            let px = if id != 0 {
                instance_color(id)
            } else {
                // Gray level keyed to the semantic label.
                let l = *labeling.background_semantic.get(r, c);
                let g = 60 + (l as u16 * 7 % 140) as u8;
                Rgb([g, g, g])
            };
            img.put_pixel(c as u32, r as u32, px);
        }
    }
    save(&img, out)
}

/// Score map as grayscale: [-1, 1] maps to [0, 255]; sentinel pixels are 0.
pub fn render_scores(scores: &Raster<f32>, out: &Path) -> Result<()> {
    let (w, h) = scores.dims();
    let mut img = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let s = *scores.get(r, c);
            let g = if s == SCORE_SENTINEL || !s.is_finite() {
                0
            } else {
                ((s.clamp(-1.0, 1.0) + 1.0) * 127.5) as u8
            };
            img.put_pixel(c as u32, r as u32, Rgb([g, g, g]));
        }
    }
    save(&img, out)
}

/// Direction field with hue-coded angle and magnitude-scaled value.
pub fn render_direction(field: &DirectionField, out: &Path) -> Result<()> {
    let (w, h) = field.dims();
    let mut img = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = field.vector(r, c);
            let m = field.magnitude_raw(r, c).clamp(0.0, 1.0);
            let px = if m == 0.0 {
                Rgb([0, 0, 0])
            } else {
                let hue = (y as f64).atan2(x as f64).to_degrees().rem_euclid(360.0);
                hsv_to_rgb(hue, 1.0, m as f64)
            };
            img.put_pixel(c as u32, r as u32, px);
        }
    }
    save(&img, out)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb<u8> {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |v: f64| ((v + m) * 255.0).round() as u8;
    Rgb([q(r), q(g), q(b)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ispc_core::pipeline::InstanceRecord;
    use ispc_core::PixelCoord;
    use std::collections::BTreeSet;
    use std::fs;

    fn sample_labeling(n: u32) -> SceneLabeling {
        let mut ids = Raster::filled(30, 20, 0u32);
        for i in 0..n {
            for r in 2..6 {
                for c in 0..4 {
                    ids.set(r, (i as usize) * 6 + c + 1, i + 1);
                }
            }
        }
        SceneLabeling {
            instance_ids: ids,
            records: (1..=n)
                .map(|id| InstanceRecord {
                    id,
                    label: 13,
                    depth_m: 11.0,
                    pixel_count: 16,
                    score: 0.9,
                    center: PixelCoord::new(0, 0),
                })
                .collect(),
            background_semantic: Raster::filled(30, 20, 0u8),
        }
    }

    fn distinct_non_gray(path: &Path) -> usize {
        let img = image::open(path).unwrap().to_rgb8();
        let mut colors = BTreeSet::new();
        for p in img.pixels() {
            let [r, g, b] = p.0;
            if !(r == g && g == b) {
                colors.insert((r, g, b));
            }
        }
        colors.len()
    }

    #[test]
    fn labeling_render_has_one_color_per_instance() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.png");
        render_labeling(&sample_labeling(4), &out).unwrap();
        assert_eq!(distinct_non_gray(&out), 4);
    }

    #[test]
    fn empty_labeling_renders_all_gray() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.png");
        render_labeling(&sample_labeling(0), &out).unwrap();
        assert_eq!(distinct_non_gray(&out), 0);
    }

    #[test]
    fn renders_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_labeling(&sample_labeling(3), &a).unwrap();
        render_labeling(&sample_labeling(3), &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn score_render_spans_gray_range() {
        let mut scores = Raster::filled(4, 2, SCORE_SENTINEL);
        scores.set(0, 0, 1.0);
        scores.set(0, 1, -1.0);
        scores.set(0, 2, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s.png");
        render_scores(&scores, &out).unwrap();
        let img = image::open(&out).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(0, 0).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(1, 0).0, [0, 0, 0]);
        assert_eq!(img.get_pixel(3, 0).0, [0, 0, 0]); // sentinel
    }
}
