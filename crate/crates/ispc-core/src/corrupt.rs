//! Seeded, per-pixel-deterministic corruption of channel triples.
//!
//! Every random decision is keyed by (seed, pixel index, stage, counter)
//! through the counter-based generator in [`crate::rng`], so results are
//! independent of evaluation order and safe to parallelize.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{draw, unit_f64};
use crate::scene::{ChannelTriple, DepthLayering, LabelSet};

/// Per-channel perturbation strengths. All stages act independently per
/// pixel; a default spec is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Probability of replacing an object pixel's direction one-hot with a
    /// uniformly random bin.
    pub direction_flip_p: f64,
    /// Stddev (in bins) of a circular Gaussian blur over direction scores.
    pub direction_soften_sigma: f64,
    /// Probability of shifting an object pixel's depth class by ±1
    /// (clamped to the bounded class range).
    pub depth_jitter_p: f64,
    /// Probability of swapping an object pixel's label within its category.
    pub semantic_flip_p: f64,
    /// Rounds of random boundary erosion/dilation.
    pub boundary_erode_px: u32,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            direction_flip_p: 0.0,
            direction_soften_sigma: 0.0,
            depth_jitter_p: 0.0,
            semantic_flip_p: 0.0,
            boundary_erode_px: 0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (p, name) in [
            (self.direction_flip_p, "direction_flip_p"),
            (self.depth_jitter_p, "depth_jitter_p"),
            (self.semantic_flip_p, "semantic_flip_p"),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::invalid(alloc::format!(
                    "{name} out of [0,1]: {p}"
                )));
            }
        }
        if !(self.direction_soften_sigma >= 0.0) || !self.direction_soften_sigma.is_finite() {
            return Err(Error::invalid("direction_soften_sigma must be >= 0"));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.direction_flip_p == 0.0
            && self.direction_soften_sigma == 0.0
            && self.depth_jitter_p == 0.0
            && self.semantic_flip_p == 0.0
            && self.boundary_erode_px == 0
    }
}

const STAGE_BOUNDARY: u64 = 0;
const STAGE_SEMANTIC: u64 = 1;
const STAGE_DEPTH: u64 = 2;
const STAGE_DIRECTION: u64 = 3;

fn chance(seed: u64, pixel: u64, stage: u64, counter: u64, p: f64) -> bool {
    p > 0.0 && unit_f64(draw(seed, pixel, stage, counter)) < p
}

/// Applies all perturbation stages to a valid triple. Stage order:
/// boundary, semantic flip, depth jitter, direction flip, soften. The
/// output satisfies all triple invariants.
pub fn corrupt(
    triple: &ChannelTriple,
    spec: &NoiseSpec,
    labels: &LabelSet,
    layering: &DepthLayering,
) -> Result<ChannelTriple> {
    spec.validate()?;
    triple.validate()?;
    let mut out = triple.clone();
    if spec.is_identity() {
        return Ok(out);
    }
    let (w, h) = out.dims();
    let n_bins = out.direction_scores.n_bins();

    for round in 0..spec.boundary_erode_px {
        boundary_round(&mut out, spec.seed, round as u64, labels)?;
    }

    for i in 0..w * h {
        let sem = out.semantic.data()[i];
        if !labels.is_object(sem)? {
            continue;
        }
        let px = i as u64;

        if chance(spec.seed, px, STAGE_SEMANTIC, 0, spec.semantic_flip_p) {
            let cat = labels
                .category_of(sem)?
                .ok_or_else(|| Error::invalid("object label without category"))?;
            let peers: Vec<u8> = labels.categories[cat]
                .members
                .iter()
                .copied()
                .filter(|&l| l != sem)
                .collect();
            if !peers.is_empty() {
                let k = draw(spec.seed, px, STAGE_SEMANTIC, 1) as usize % peers.len();
                out.semantic.data_mut()[i] = peers[k];
            }
        }

        let depth = out.depth.data()[i];
        if depth != 0 && chance(spec.seed, px, STAGE_DEPTH, 0, spec.depth_jitter_p) {
            let up = draw(spec.seed, px, STAGE_DEPTH, 1) & 1 == 0;
            let max = layering.n_classes() as u8;
            out.depth.data_mut()[i] = if up {
                (depth + 1).min(max)
            } else {
                (depth - 1).max(1)
            };
        }

        if chance(spec.seed, px, STAGE_DIRECTION, 0, spec.direction_flip_p) {
            let bin = draw(spec.seed, px, STAGE_DIRECTION, 1) as usize % n_bins;
            let row = out.direction_scores.scores_mut_index(i);
            row.fill(0.0);
            row[bin] = 1.0;
        }
    }

    if spec.direction_soften_sigma > 0.0 {
        soften(&mut out, spec.direction_soften_sigma);
    }

    out.validate()?;
    Ok(out)
}

/// One round of boundary noise: with probability ½, an object pixel that
/// touches background is erased; with probability ½, a background pixel
/// that touches an object grows it by copying the first object neighbor's
/// channels (scan order up, left, right, down).
fn boundary_round(
    triple: &mut ChannelTriple,
    seed: u64,
    round: u64,
    labels: &LabelSet,
) -> Result<()> {
    let (w, h) = triple.dims();
    let snapshot = triple.clone();
    let is_obj = |i: usize| -> Result<bool> { labels.is_object(snapshot.semantic.data()[i]) };
    let neighbors = |r: usize, c: usize| {
        let mut out: [Option<usize>; 4] = [None; 4];
        if r > 0 {
            out[0] = Some((r - 1) * w + c);
        }
        if c > 0 {
            out[1] = Some(r * w + c - 1);
        }
        if c + 1 < w {
            out[2] = Some(r * w + c + 1);
        }
        if r + 1 < h {
            out[3] = Some((r + 1) * w + c);
        }
        out
    };
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let px = i as u64;
            let ns = neighbors(r, c);
            if is_obj(i)? {
                let touches_bg = ns.iter().flatten().any(|&n| !is_obj(n).unwrap_or(false));
                if touches_bg && chance(seed, px, STAGE_BOUNDARY, round * 2, 0.5) {
                    triple.semantic.data_mut()[i] = labels.background_id;
                    triple.depth.data_mut()[i] = 0;
                    triple.direction_scores.scores_mut_index(i).fill(0.0);
                }
            } else {
                let src = ns.iter().flatten().copied().find(|&n| is_obj(n).unwrap_or(false));
                if let Some(src) = src {
                    if chance(seed, px, STAGE_BOUNDARY, round * 2 + 1, 0.5) {
                        triple.semantic.data_mut()[i] = snapshot.semantic.data()[src];
                        triple.depth.data_mut()[i] = snapshot.depth.data()[src];
                        let row: Vec<f32> = snapshot.direction_scores.scores_index(src).into();
                        triple
                            .direction_scores
                            .scores_mut_index(i)
                            .copy_from_slice(&row);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Circular Gaussian blur of each nonzero score row, renormalized to sum 1.
fn soften(triple: &mut ChannelTriple, sigma: f64) {
    let n = triple.direction_scores.n_bins();
    // Kernel over circular bin distance 0..=n/2.
    let mut kernel = Vec::with_capacity(n);
    for k in 0..n {
        let d = k.min(n - k) as f64;
        kernel.push(libm::exp(-d * d / (2.0 * sigma * sigma)));
    }
    let (w, h) = triple.dims();
    let mut blurred = alloc::vec![0.0f32; n];
    for i in 0..w * h {
        let row = triple.direction_scores.scores_mut_index(i);
        let sum: f32 = row.iter().sum();
        if sum <= 0.0 {
            continue;
        }
        blurred.fill(0.0);
        for (j, &s) in row.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for (k, b) in blurred.iter_mut().enumerate() {
                let d = (n + k - j) % n;
                *b += s * kernel[d] as f32;
            }
        }
        let bsum: f32 = blurred.iter().sum();
        for (dst, &b) in row.iter_mut().zip(&blurred) {
            *dst = b / bsum;
        }
    }
}
