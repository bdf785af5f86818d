//! Ground-truth channel encoder: converts instance-level annotations into
//! the semantic/depth/direction channel representation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::{PixelCoord, Raster};
use crate::scene::{
    ChannelTriple, DepthClass, DepthLayering, DirectionBinning, LabelId, LabelSet, ScoreVolume,
    BACKGROUND_DEPTH_CLASS,
};

pub type InstanceId = u32;

/// Instance-level ground truth: per-pixel instance ids (0 = background), the
/// semantic map, and one metric depth per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub instance_ids: Raster<InstanceId>,
    pub semantic: Raster<LabelId>,
    pub instance_depths: BTreeMap<InstanceId, f64>,
}

impl InstanceAnnotation {
    pub fn dims(&self) -> (usize, usize) {
        self.instance_ids.dims()
    }

    pub fn validate(&self, labels: &LabelSet) -> Result<()> {
        self.instance_ids.check_dims(&self.semantic)?;
        for (i, &id) in self.instance_ids.data().iter().enumerate() {
            if id == 0 {
                continue;
            }
            match self.instance_depths.get(&id) {
                Some(&d) if d.is_finite() && d > 0.0 => {}
                Some(&d) => {
                    return Err(Error::invalid(format!(
                        "instance {id} has non-positive depth {d}"
                    )))
                }
                None => {
                    return Err(Error::invalid(format!("instance {id} has no depth entry")))
                }
            }
            if !labels.is_object(self.semantic.data()[i])? {
                return Err(Error::invalid(format!(
                    "pixel {i} of instance {id} carries non-object label {}",
                    self.semantic.data()[i]
                )));
            }
        }
        Ok(())
    }

    /// Pixel coordinates of one instance's visible mask, row-major order.
    pub fn mask_of(&self, id: InstanceId) -> Vec<PixelCoord> {
        let (w, _) = self.dims();
        self.instance_ids
            .data()
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v == id)
            .map(|(i, _)| PixelCoord::new((i % w) as i32, (i / w) as i32))
            .collect()
    }

    pub fn instance_ids_present(&self) -> Vec<InstanceId> {
        let mut ids: Vec<_> = self
            .instance_ids
            .data()
            .iter()
            .copied()
            .filter(|&v| v != 0)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Round half away from zero, so centroid examples are exactly reproducible.
fn round_away(x: f64) -> i32 {
    libm::round(x) as i32
}

/// Integer-rounded centroid of the visible mask pixels.
pub fn visible_center(mask: &[PixelCoord]) -> Result<PixelCoord> {
    if mask.is_empty() {
        return Err(Error::invalid("visible center of an empty mask"));
    }
    let n = mask.len() as f64;
    let (mut sc, mut sr) = (0.0f64, 0.0f64);
    for p in mask {
        sc += p.col as f64;
        sr += p.row as f64;
    }
    Ok(PixelCoord::new(round_away(sc / n), round_away(sr / n)))
}

/// Direction class of pixel `p` relative to its instance center `c`.
///
/// The angle is `atan2(-(c.row - p.row), c.col - p.col)`: 0 deg points
/// image-right, 90 deg image-up. A pixel exactly at the center gets bin 0.
pub fn encode_direction_class(p: PixelCoord, c: PixelCoord, bins: &DirectionBinning) -> usize {
    if p == c {
        return 0;
    }
    let dx = (c.col - p.col) as f64;
    let dy = (p.row - c.row) as f64;
    let theta = libm::atan2(dy, dx).to_degrees();
    bins.bin_of_deg(theta)
}

/// Encodes an annotated scene into the three-channel representation.
///
/// The semantic channel is copied through; the depth channel holds the
/// quantized per-instance depth on instance pixels and the background class
/// elsewhere; the direction channel is a one-hot of each pixel's direction
/// class toward its instance's visible center.
pub fn encode_scene(
    ann: &InstanceAnnotation,
    labels: &LabelSet,
    layering: &DepthLayering,
    bins: &DirectionBinning,
) -> Result<ChannelTriple> {
    ann.validate(labels)?;
    let (w, h) = ann.dims();

    let mut masks: BTreeMap<InstanceId, Vec<PixelCoord>> = BTreeMap::new();
    for (i, &id) in ann.instance_ids.data().iter().enumerate() {
        if id != 0 {
            masks
                .entry(id)
                .or_default()
                .push(PixelCoord::new((i % w) as i32, (i / w) as i32));
        }
    }

    let mut centers: BTreeMap<InstanceId, PixelCoord> = BTreeMap::new();
    let mut classes: BTreeMap<InstanceId, DepthClass> = BTreeMap::new();
    for (&id, mask) in &masks {
        centers.insert(id, visible_center(mask)?);
        let depth = ann.instance_depths[&id];
        classes.insert(id, layering.class_of(depth)?);
    }

    let mut depth = Raster::filled(w, h, BACKGROUND_DEPTH_CLASS);
    let mut scores = ScoreVolume::zeros(w, h, bins.n_bins);
    for (&id, mask) in &masks {
        let center = centers[&id];
        let class = classes[&id];
        for &p in mask {
            let (r, c) = (p.row as usize, p.col as usize);
            depth.set(r, c, class);
            let bin = encode_direction_class(p, center, bins);
            scores.scores_mut(r, c)[bin] = 1.0;
        }
    }

    Ok(ChannelTriple {
        semantic: ann.semantic.clone(),
        depth,
        direction_scores: scores,
    })
}
