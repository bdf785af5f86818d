//! Label registries, depth-class quantization, direction binning, and the
//! aligned channel containers consumed by every other module.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub type LabelId = u8;
pub type DepthClass = u8;
pub type CategoryId = usize;

/// Reserved depth class for non-object pixels.
pub const BACKGROUND_DEPTH_CLASS: DepthClass = 0;

/// One semantic label in a registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticLabel {
    pub id: LabelId,
    pub name: String,
    pub is_object: bool,
}

/// A group of object labels matched with one template shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub members: Vec<LabelId>,
}

/// Registry of semantic labels and the category partition of object labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub labels: Vec<SemanticLabel>,
    pub categories: Vec<Category>,
    pub background_id: LabelId,
}

impl LabelSet {
    /// Checks id density, uniqueness, and that categories form a total,
    /// disjoint partition of the object labels.
    pub fn validate(&self) -> Result<()> {
        for (i, label) in self.labels.iter().enumerate() {
            if label.id as usize != i {
                return Err(Error::invalid(format!(
                    "label ids must be dense from 0; position {i} holds id {}",
                    label.id
                )));
            }
        }
        let n = self.labels.len();
        if self.background_id as usize >= n {
            return Err(Error::invalid("background_id is not a registered label"));
        }
        if self.labels[self.background_id as usize].is_object {
            return Err(Error::invalid("background label must not be an object label"));
        }
        let mut owner = alloc::vec![None::<usize>; n];
        for (ci, cat) in self.categories.iter().enumerate() {
            for &m in &cat.members {
                let Some(slot) = owner.get_mut(m as usize) else {
                    return Err(Error::invalid(format!(
                        "category {} references unregistered label {m}",
                        cat.name
                    )));
                };
                if slot.is_some() {
                    return Err(Error::invalid(format!(
                        "label {m} belongs to more than one category"
                    )));
                }
                if !self.labels[m as usize].is_object {
                    return Err(Error::invalid(format!(
                        "non-object label {m} listed in category {}",
                        cat.name
                    )));
                }
                *slot = Some(ci);
            }
        }
        for label in &self.labels {
            if label.is_object && owner[label.id as usize].is_none() {
                return Err(Error::invalid(format!(
                    "object label {} ({}) belongs to no category",
                    label.id, label.name
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self, id: LabelId) -> Result<&SemanticLabel> {
        self.labels
            .get(id as usize)
            .ok_or_else(|| Error::invalid(format!("unregistered label id {id}")))
    }

    pub fn is_object(&self, id: LabelId) -> Result<bool> {
        Ok(self.label(id)?.is_object)
    }

    /// Maps an object label to its category index; `None` for non-object labels.
    pub fn category_of(&self, id: LabelId) -> Result<Option<CategoryId>> {
        self.label(id)?;
        for (ci, cat) in self.categories.iter().enumerate() {
            if cat.members.contains(&id) {
                return Ok(Some(ci));
            }
        }
        Ok(None)
    }

    pub fn category_by_name(&self, name: &str) -> Option<CategoryId> {
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn label_by_name(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().find(|l| l.name == name).map(|l| l.id)
    }

    pub fn object_labels(&self) -> impl Iterator<Item = &SemanticLabel> {
        self.labels.iter().filter(|l| l.is_object)
    }

    /// The 19-label street-scene registry with the 8 object classes grouped
    /// into the categories car, human, two-wheeler, and large-vehicle.
    pub fn cityscapes() -> Self {
        let names: [(&str, bool); 19] = [
            ("road", false),
            ("sidewalk", false),
            ("building", false),
            ("wall", false),
            ("fence", false),
            ("pole", false),
            ("traffic light", false),
            ("traffic sign", false),
            ("vegetation", false),
            ("terrain", false),
            ("sky", false),
            ("person", true),
            ("rider", true),
            ("car", true),
            ("truck", true),
            ("bus", true),
            ("train", true),
            ("motorcycle", true),
            ("bicycle", true),
        ];
        let labels = names
            .iter()
            .enumerate()
            .map(|(i, &(name, is_object))| SemanticLabel {
                id: i as LabelId,
                name: name.into(),
                is_object,
            })
            .collect();
        let cat = |name: &str, members: &[LabelId]| Category {
            name: name.into(),
            members: members.to_vec(),
        };
        LabelSet {
            labels,
            categories: alloc::vec![
                cat("car", &[13]),
                cat("human", &[11, 12]),
                cat("two-wheeler", &[17, 18]),
                cat("large-vehicle", &[14, 15, 16]),
            ],
            background_id: 0,
        }
    }

    /// Minimal registry for scenes with car instances only.
    pub fn kitti() -> Self {
        LabelSet {
            labels: alloc::vec![
                SemanticLabel {
                    id: 0,
                    name: "background".into(),
                    is_object: false,
                },
                SemanticLabel {
                    id: 1,
                    name: "car".into(),
                    is_object: true,
                },
            ],
            categories: alloc::vec![Category {
                name: "car".into(),
                members: alloc::vec![1],
            }],
            background_id: 0,
        }
    }
}

/// Quantization of metric instance depth into ordered classes. Class `k`
/// (1-based) covers `[boundaries_m[k-1], boundaries_m[k])`; the final range is
/// open-ended. Class 0 is reserved for background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthLayering {
    pub boundaries_m: Vec<f64>,
}

impl DepthLayering {
    pub fn new(boundaries_m: Vec<f64>) -> Result<Self> {
        if boundaries_m.len() < 2 {
            return Err(Error::invalid("depth layering needs at least 2 boundaries"));
        }
        if boundaries_m.len() > 250 {
            return Err(Error::invalid("too many depth classes for a u8 class id"));
        }
        for w in boundaries_m.windows(2) {
            if !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::invalid("depth boundaries must be finite and ascending"));
            }
        }
        if boundaries_m[0] < 0.0 {
            return Err(Error::invalid("depth boundaries must be non-negative"));
        }
        Ok(Self { boundaries_m })
    }

    /// Number of object depth classes (background excluded).
    pub fn n_classes(&self) -> usize {
        self.boundaries_m.len()
    }

    /// Quantizes a metric depth to its class id.
    pub fn class_of(&self, depth_m: f64) -> Result<DepthClass> {
        if !depth_m.is_finite() || depth_m <= 0.0 {
            return Err(Error::invalid(format!(
                "depth must be positive and finite, got {depth_m}"
            )));
        }
        if depth_m < self.boundaries_m[0] {
            return Err(Error::invalid(format!(
                "depth {depth_m} below first boundary {}",
                self.boundaries_m[0]
            )));
        }
        let mut k = self.boundaries_m.len();
        for (i, w) in self.boundaries_m.windows(2).enumerate() {
            if depth_m < w[1] {
                k = i + 1;
                break;
            }
        }
        Ok(k as DepthClass)
    }

    /// Representative metric depth for a class: the arithmetic midpoint for
    /// bounded ranges; the final open range returns its lower bound plus half
    /// the preceding range's width, which keeps midpoints monotone.
    pub fn midpoint(&self, k: DepthClass) -> Result<f64> {
        let n = self.n_classes();
        if k == BACKGROUND_DEPTH_CLASS || k as usize > n {
            return Err(Error::invalid(format!(
                "depth class {k} out of range 1..={n}"
            )));
        }
        let k = k as usize;
        let b = &self.boundaries_m;
        if k < n {
            Ok((b[k - 1] + b[k]) / 2.0)
        } else {
            Ok(b[n - 1] + (b[n - 1] - b[n - 2]) / 2.0)
        }
    }

    /// Width of a bounded class range.
    pub fn range_width(&self, k: DepthClass) -> Result<f64> {
        let n = self.n_classes();
        if k == BACKGROUND_DEPTH_CLASS || (k as usize) >= n {
            return Err(Error::invalid(format!(
                "class {k} is not a bounded class (1..={})",
                n - 1
            )));
        }
        let k = k as usize;
        Ok(self.boundaries_m[k] - self.boundaries_m[k - 1])
    }

    /// Depth-class ranges tuned for KITTI street scenes.
    pub fn kitti() -> Self {
        Self {
            boundaries_m: alloc::vec![
                0.0, 2.0, 3.5, 5.0, 6.0, 7.0, 8.5, 10.0, 12.0, 14.0, 17.0, 20.0, 24.0, 29.0,
                35.0, 43.0, 52.0, 63.0, 76.0,
            ],
        }
    }

    /// Depth-class ranges tuned for Cityscapes street scenes.
    pub fn cityscapes() -> Self {
        Self {
            boundaries_m: alloc::vec![
                0.0, 6.0, 8.0, 10.0, 12.0, 14.0, 17.0, 20.0, 23.0, 27.0, 31.0, 36.0, 41.0, 47.0,
                54.0, 63.0, 73.0, 86.0, 100.0,
            ],
        }
    }
}

/// Uniform discretization of the circle into direction classes. Bin `k`
/// covers `[k*w - w/2, k*w + w/2)` degrees modulo 360, with `w = 360/n_bins`.
/// Angles are measured with 0 deg pointing image-right and 90 deg image-up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionBinning {
    pub n_bins: usize,
}

impl Default for DirectionBinning {
    fn default() -> Self {
        Self { n_bins: 8 }
    }
}

impl DirectionBinning {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::invalid("direction binning needs at least 2 bins"));
        }
        Ok(Self { n_bins })
    }

    pub fn bin_width_deg(&self) -> f64 {
        360.0 / self.n_bins as f64
    }

    pub fn center_deg(&self, k: usize) -> f64 {
        k as f64 * self.bin_width_deg()
    }

    /// Unit vector of a bin center (x right, y up).
    pub fn unit(&self, k: usize) -> (f64, f64) {
        let rad = self.center_deg(k).to_radians();
        (libm::cos(rad), libm::sin(rad))
    }

    /// Bin containing an angle in degrees.
    pub fn bin_of_deg(&self, theta_deg: f64) -> usize {
        let w = self.bin_width_deg();
        let t = theta_deg % 360.0;
        let t = if t < 0.0 { t + 360.0 } else { t };
        (libm::floor((t + w / 2.0) / w) as usize) % self.n_bins
    }
}

/// Per-pixel score vector over direction bins, pixel-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVolume {
    width: usize,
    height: usize,
    n_bins: usize,
    data: Vec<f32>,
}

impl ScoreVolume {
    pub fn zeros(width: usize, height: usize, n_bins: usize) -> Self {
        Self {
            width,
            height,
            n_bins,
            data: alloc::vec![0.0; width * height * n_bins],
        }
    }

    pub fn from_vec(width: usize, height: usize, n_bins: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * n_bins {
            return Err(Error::invalid("score volume length mismatch"));
        }
        Ok(Self {
            width,
            height,
            n_bins,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn scores(&self, row: usize, col: usize) -> &[f32] {
        let i = (row * self.width + col) * self.n_bins;
        &self.data[i..i + self.n_bins]
    }

    pub fn scores_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let i = (row * self.width + col) * self.n_bins;
        &mut self.data[i..i + self.n_bins]
    }

    /// Score row by row-major pixel index.
    pub fn scores_index(&self, index: usize) -> &[f32] {
        &self.data[index * self.n_bins..(index + 1) * self.n_bins]
    }

    pub fn scores_mut_index(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.n_bins..(index + 1) * self.n_bins]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// The three aligned per-pixel channels for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTriple {
    pub semantic: Raster<LabelId>,
    pub depth: Raster<DepthClass>,
    pub direction_scores: ScoreVolume,
}

impl ChannelTriple {
    pub fn dims(&self) -> (usize, usize) {
        self.semantic.dims()
    }

    /// Checks dimension agreement and score-row normalization (each row is
    /// all-zero or sums to 1 within 1e-6).
    pub fn validate(&self) -> Result<()> {
        self.semantic.check_dims(&self.depth)?;
        if self.direction_scores.dims() != self.semantic.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.semantic.dims(),
                got: self.direction_scores.dims(),
            });
        }
        let n_bins = self.direction_scores.n_bins();
        for i in 0..self.semantic.len() {
            let row = &self.direction_scores.data()[i * n_bins..(i + 1) * n_bins];
            let mut sum = 0.0f64;
            for &s in row {
                if s < 0.0 || !s.is_finite() {
                    return Err(Error::invalid("direction scores must be non-negative"));
                }
                sum += s as f64;
            }
            if sum != 0.0 && libm::fabs(sum - 1.0) > 1e-6 {
                return Err(Error::invalid(format!(
                    "direction score row at pixel {i} sums to {sum}, expected 0 or 1"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        LabelSet::cityscapes().validate().unwrap();
        LabelSet::kitti().validate().unwrap();
        assert_eq!(DepthLayering::kitti().n_classes(), 19);
        assert_eq!(DepthLayering::cityscapes().n_classes(), 19);
    }

    #[test]
    fn street_scene_categories() {
        let labels = LabelSet::cityscapes();
        let names: Vec<_> = labels.categories.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["car", "human", "two-wheeler", "large-vehicle"]);
        let rider = labels.label_by_name("rider").unwrap();
        let human = labels.category_by_name("human").unwrap();
        assert_eq!(labels.category_of(rider).unwrap(), Some(human));
        let road = labels.label_by_name("road").unwrap();
        assert_eq!(labels.category_of(road).unwrap(), None);
        let bus = labels.label_by_name("bus").unwrap();
        let large = labels.category_by_name("large-vehicle").unwrap();
        assert_eq!(labels.category_of(bus).unwrap(), Some(large));
    }

    #[test]
    fn category_partition_is_total_and_disjoint() {
        // Oracle: enumerate the 8 object labels and assert each appears in
        // exactly one category.
        let labels = LabelSet::cityscapes();
        let object_ids: Vec<_> = labels.object_labels().map(|l| l.id).collect();
        assert_eq!(object_ids.len(), 8);
        for id in object_ids {
            let owners = labels
                .categories
                .iter()
                .filter(|c| c.members.contains(&id))
                .count();
            assert_eq!(owners, 1, "label {id}");
        }
    }

    #[test]
    fn category_of_unregistered_errors() {
        let labels = LabelSet::kitti();
        assert!(labels.category_of(99).is_err());
    }

    #[test]
    fn depth_class_examples() {
        let kitti = DepthLayering::kitti();
        assert_eq!(kitti.class_of(11.0).unwrap(), 8); // 10-12 m
        assert_eq!(kitti.class_of(500.0).unwrap(), 19); // open 76-inf
        let cs = DepthLayering::cityscapes();
        assert_eq!(cs.class_of(3.0).unwrap(), 1); // 0-6 m
    }

    #[test]
    fn depth_class_rejects_bad_input() {
        let kitti = DepthLayering::kitti();
        assert!(kitti.class_of(0.0).is_err());
        assert!(kitti.class_of(-5.0).is_err());
        assert!(kitti.class_of(f64::NAN).is_err());
        assert!(kitti.class_of(f64::INFINITY).is_err());
    }

    #[test]
    fn depth_midpoint_examples() {
        let kitti = DepthLayering::kitti();
        assert_eq!(kitti.midpoint(8).unwrap(), 11.0);
        // Open range: 76 + (76 - 63) / 2.
        assert_eq!(kitti.midpoint(19).unwrap(), 82.5);
        let cs = DepthLayering::cityscapes();
        assert_eq!(cs.midpoint(1).unwrap(), 3.0);
        assert!(kitti.midpoint(0).is_err());
        assert!(kitti.midpoint(20).is_err());
    }

    #[test]
    fn midpoint_monotone_and_interior() {
        for layering in [DepthLayering::kitti(), DepthLayering::cityscapes()] {
            let mut prev = f64::NEG_INFINITY;
            for k in 1..=layering.n_classes() as u8 {
                let m = layering.midpoint(k).unwrap();
                assert!(m > prev);
                prev = m;
                if (k as usize) < layering.n_classes() {
                    let lo = layering.boundaries_m[k as usize - 1];
                    let hi = layering.boundaries_m[k as usize];
                    assert!(lo < m && m < hi, "midpoint of class {k} outside range");
                }
            }
        }
    }

    #[test]
    fn quantize_midpoint_round_trip_bound() {
        let layering = DepthLayering::kitti();
        let mut d = 0.05;
        while d < 120.0 {
            let k = layering.class_of(d).unwrap();
            let m = layering.midpoint(k).unwrap();
            if (k as usize) < layering.n_classes() {
                let half = layering.range_width(k).unwrap() / 2.0;
                assert!(
                    (m - d).abs() <= half + 1e-12,
                    "d={d} class={k} mid={m} half={half}"
                );
            }
            d += 0.07;
        }
    }

    #[test]
    fn class_of_monotone() {
        let layering = DepthLayering::cityscapes();
        let mut prev = 0u8;
        let mut d = 0.01;
        while d < 300.0 {
            let k = layering.class_of(d).unwrap();
            assert!(k >= prev);
            prev = k;
            d += 0.11;
        }
    }

    #[test]
    fn bins_tile_the_circle() {
        let bins = DirectionBinning::default();
        assert_eq!(bins.bin_width_deg(), 45.0);
        let mut t = 0.0;
        while t < 360.0 {
            let k = bins.bin_of_deg(t);
            assert!(k < 8);
            // The containing bin's center is within half a bin width.
            let c = bins.center_deg(k);
            let diff = (t - c).rem_euclid(360.0);
            let diff = if diff > 180.0 { 360.0 - diff } else { diff };
            assert!(diff <= 22.5 + 1e-9, "t={t} k={k}");
            t += 0.25;
        }
        // Boundary convention: half-open on the upper side.
        assert_eq!(bins.bin_of_deg(22.5), 1);
        assert_eq!(bins.bin_of_deg(22.499), 0);
        assert_eq!(bins.bin_of_deg(337.5), 0);
    }

    #[test]
    fn triple_validation_catches_bad_rows() {
        let mut vol = ScoreVolume::zeros(2, 1, 8);
        vol.scores_mut(0, 0)[3] = 1.0;
        let triple = ChannelTriple {
            semantic: Raster::filled(2, 1, 0),
            depth: Raster::filled(2, 1, 0),
            direction_scores: vol,
        };
        triple.validate().unwrap();

        let mut bad = triple.clone();
        bad.direction_scores.scores_mut(0, 1)[0] = 0.5;
        assert!(bad.validate().is_err());
    }
}
