//! Continuous direction recovery from discrete direction-class scores.
//!
//! Each pixel's estimate is the score-weighted circular mean of the bin
//! center vectors, normalized to unit length. The pre-normalization length is
//! kept as a per-pixel confidence (1 = crisp one-hot, 0 = uninformative).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scene::{ChannelTriple, DirectionBinning};

/// Below this raw length the weighted sum is treated as fully cancelled.
const CANCEL_EPS: f64 = 1e-12;

/// Per-pixel continuous direction estimates (x right, y up). Zero vectors
/// mark pixels whose score row is all-zero or fully cancels.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    width: usize,
    height: usize,
    vx: Vec<f32>,
    vy: Vec<f32>,
    magnitude_raw: Vec<f32>,
}

impl DirectionField {
    /// Builds a field from raw per-pixel vectors; each pixel's raw magnitude
    /// is the vector's length.
    pub fn from_vectors(width: usize, height: usize, vx: Vec<f32>, vy: Vec<f32>) -> Result<Self> {
        if vx.len() != width * height || vy.len() != width * height {
            return Err(Error::invalid("vector planes do not match dimensions"));
        }
        let magnitude_raw = vx
            .iter()
            .zip(&vy)
            .map(|(&x, &y)| libm::sqrtf(x * x + y * y))
            .collect();
        Ok(DirectionField {
            width,
            height,
            vx,
            vy,
            magnitude_raw,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Unit direction vector at a pixel, or (0, 0).
    pub fn vector(&self, row: usize, col: usize) -> (f32, f32) {
        let i = row * self.width + col;
        (self.vx[i], self.vy[i])
    }

    pub fn vector_at(&self, index: usize) -> (f32, f32) {
        (self.vx[index], self.vy[index])
    }

    /// Pre-normalization length in [0, 1].
    pub fn magnitude_raw(&self, row: usize, col: usize) -> f32 {
        self.magnitude_raw[row * self.width + col]
    }

    pub fn magnitude_at(&self, index: usize) -> f32 {
        self.magnitude_raw[index]
    }
}

/// Decodes one score row into a unit vector and its raw magnitude.
pub fn decode_pixel(scores: &[f32], bins: &DirectionBinning) -> Result<((f64, f64), f64)> {
    if scores.len() != bins.n_bins {
        return Err(Error::invalid("score row length does not match binning"));
    }
    let (mut x, mut y) = (0.0f64, 0.0f64);
    for (k, &s) in scores.iter().enumerate() {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::invalid("direction scores must be non-negative"));
        }
        let (ux, uy) = bins.unit(k);
        x += s as f64 * ux;
        y += s as f64 * uy;
    }
    let mag = libm::sqrt(x * x + y * y);
    if mag < CANCEL_EPS {
        return Ok(((0.0, 0.0), 0.0));
    }
    Ok(((x / mag, y / mag), mag))
}

/// Applies [`decode_pixel`] at every pixel of a triple's direction channel.
pub fn decode_field(triple: &ChannelTriple, bins: &DirectionBinning) -> Result<DirectionField> {
    let (width, height) = triple.dims();
    if triple.direction_scores.n_bins() != bins.n_bins {
        return Err(Error::invalid("triple bin count does not match binning"));
    }
    let n = width * height;
    let mut vx = vec![0.0f32; n];
    let mut vy = vec![0.0f32; n];
    let mut magnitude_raw = vec![0.0f32; n];
    for r in 0..height {
        for c in 0..width {
            let ((x, y), m) = decode_pixel(triple.direction_scores.scores(r, c), bins)?;
            let i = r * width + c;
            vx[i] = x as f32;
            vy[i] = y as f32;
            magnitude_raw[i] = m as f32;
        }
    }
    Ok(DirectionField {
        width,
        height,
        vx,
        vy,
        magnitude_raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode_scene, visible_center, InstanceAnnotation};
    use crate::raster::{PixelCoord, Raster};
    use crate::scene::{DepthLayering, LabelSet, ScoreVolume};
    use alloc::collections::BTreeMap;

    fn bins() -> DirectionBinning {
        DirectionBinning::default()
    }

    #[test]
    fn one_hot_is_identity() {
        let mut s = [0.0f32; 8];
        s[0] = 1.0;
        let ((x, y), m) = decode_pixel(&s, &bins()).unwrap();
        assert!((x - 1.0).abs() < 1e-12 && y.abs() < 1e-12);
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_neighbors_give_diagonal() {
        // 0.5 on the 0 deg bin plus 0.5 on the 90 deg bin: the vector sum is
        // (0.5, 0.5), i.e. 45 deg with raw magnitude sqrt(2)/2.
        let mut s = [0.0f32; 8];
        s[0] = 0.5;
        s[2] = 0.5;
        let ((x, y), m) = decode_pixel(&s, &bins()).unwrap();
        let e = core::f64::consts::FRAC_1_SQRT_2;
        assert!((x - e).abs() < 1e-9 && (y - e).abs() < 1e-9);
        assert!((m - e).abs() < 1e-9);
    }

    #[test]
    fn uniform_scores_cancel() {
        let s = [0.125f32; 8];
        let ((x, y), m) = decode_pixel(&s, &bins()).unwrap();
        assert_eq!((x, y), (0.0, 0.0));
        assert_eq!(m, 0.0);
    }

    #[test]
    fn negative_score_rejected() {
        let mut s = [0.0f32; 8];
        s[1] = -0.1;
        assert!(decode_pixel(&s, &bins()).is_err());
    }

    #[test]
    fn decode_matches_bin_centers_exactly() {
        let b = bins();
        for k in 0..8 {
            let mut s = [0.0f32; 8];
            s[k] = 1.0;
            let ((x, y), _) = decode_pixel(&s, &b).unwrap();
            let (ux, uy) = b.unit(k);
            assert!((x - ux).abs() < 1e-12 && (y - uy).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_softening_preserves_angle() {
        let b = bins();
        for k in 0..8 {
            let mut hard = [0.0f32; 8];
            hard[k] = 1.0;
            let mut soft = [0.0f32; 8];
            soft[k] = 0.8;
            soft[(k + 1) % 8] = 0.1;
            soft[(k + 7) % 8] = 0.1;
            let ((hx, hy), _) = decode_pixel(&hard, &b).unwrap();
            let ((sx, sy), _) = decode_pixel(&soft, &b).unwrap();
            let cross = hx * sy - hy * sx;
            assert!(cross.abs() < 1e-9, "bin {k} rotated by softening");
            assert!(hx * sx + hy * sy > 0.0);
        }
    }

    #[test]
    fn cyclic_shift_rotates_by_bin_width() {
        let b = bins();
        let mut rng = crate::rng::SplitMix64::new(42);
        for _ in 0..50 {
            let mut s = [0.0f32; 8];
            for v in &mut s {
                *v = rng.next_f64() as f32;
            }
            let ((x0, y0), m0) = decode_pixel(&s, &b).unwrap();
            let mut shifted = [0.0f32; 8];
            for k in 0..8 {
                shifted[(k + 1) % 8] = s[k];
            }
            let ((x1, y1), m1) = decode_pixel(&shifted, &b).unwrap();
            if m0 == 0.0 {
                assert_eq!(m1, 0.0);
                continue;
            }
            let w = b.bin_width_deg().to_radians();
            let (rx, ry) = (
                x0 * libm::cos(w) - y0 * libm::sin(w),
                x0 * libm::sin(w) + y0 * libm::cos(w),
            );
            assert!((x1 - rx).abs() < 1e-6 && (y1 - ry).abs() < 1e-6);
            assert!((m0 - m1).abs() < 1e-6);
        }
    }

    #[test]
    fn positive_scaling_leaves_direction_unchanged() {
        let b = bins();
        let mut s = [0.0f32; 8];
        s[1] = 0.3;
        s[2] = 0.6;
        s[5] = 0.1;
        let ((x0, y0), m0) = decode_pixel(&s, &b).unwrap();
        let scaled: alloc::vec::Vec<f32> = s.iter().map(|v| v * 3.5).collect();
        let ((x1, y1), m1) = decode_pixel(&scaled, &b).unwrap();
        // f32 inputs limit the achievable agreement.
        assert!((x0 - x1).abs() < 1e-6 && (y0 - y1).abs() < 1e-6);
        assert!((m1 - 3.5 * m0).abs() < 1e-6);
    }

    #[test]
    fn field_of_all_background_is_zero() {
        let triple = ChannelTriple {
            semantic: Raster::filled(5, 4, 0u8),
            depth: Raster::filled(5, 4, 0u8),
            direction_scores: ScoreVolume::zeros(5, 4, 8),
        };
        let field = decode_field(&triple, &bins()).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(field.vector(r, c), (0.0, 0.0));
                assert_eq!(field.magnitude_raw(r, c), 0.0);
            }
        }
    }

    #[test]
    fn encoded_square_decodes_within_half_bin() {
        // Every instance pixel's decoded vector lies within one bin half
        // width (22.5 deg) of the exact pixel-to-centroid direction.
        let labels = LabelSet::kitti();
        let car = 1u8;
        let mut ids = Raster::filled(24, 20, 0u32);
        let mut sem = Raster::filled(24, 20, 0u8);
        for r in 4..15 {
            for c in 6..17 {
                ids.set(r, c, 1);
                sem.set(r, c, car);
            }
        }
        let mut depths = BTreeMap::new();
        depths.insert(1, 20.0);
        let ann = InstanceAnnotation {
            instance_ids: ids,
            semantic: sem,
            instance_depths: depths,
        };
        let b = bins();
        let triple = encode_scene(&ann, &labels, &DepthLayering::kitti(), &b).unwrap();
        let field = decode_field(&triple, &b).unwrap();
        let center = visible_center(&ann.mask_of(1)).unwrap();
        for r in 4..15 {
            for c in 6..17 {
                let p = PixelCoord::new(c as i32, r as i32);
                if p == center {
                    continue;
                }
                let (vx, vy) = field.vector(r, c);
                let (dx, dy) = ((center.col - p.col) as f64, (p.row - center.row) as f64);
                let dn = libm::sqrt(dx * dx + dy * dy);
                let cosang = (vx as f64 * dx + vy as f64 * dy) / dn;
                let ang = libm::acos(cosang.clamp(-1.0, 1.0)).to_degrees();
                assert!(ang <= 22.5 + 1e-9, "pixel ({r},{c}) off by {ang} deg");
            }
        }
    }

    #[test]
    fn nonzero_vectors_are_unit_length() {
        let b = bins();
        let mut rng = crate::rng::SplitMix64::new(9);
        for _ in 0..200 {
            let mut s = [0.0f32; 8];
            for v in &mut s {
                *v = (rng.next_f64() * 0.5) as f32;
            }
            let ((x, y), m) = decode_pixel(&s, &b).unwrap();
            if m > 0.0 {
                let len = libm::sqrt(x * x + y * y);
                assert!((len - 1.0).abs() < 1e-6);
            }
        }
    }
}
