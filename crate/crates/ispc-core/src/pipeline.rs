//! Center extraction, pixel assignment, proposal fusion, and final labeling.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::direction::{decode_field, DirectionField};
use crate::error::{Error, Result};
use crate::raster::{PixelCoord, Raster};
use crate::scene::{
    CategoryId, ChannelTriple, DepthClass, DepthLayering, DirectionBinning, LabelId, LabelSet,
};
use crate::template::{pixel_categories, score_maps, ScoreMap, TemplateConfig, SCORE_SENTINEL};

/// Tunables for center extraction, assignment, fusion, and finalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Minimum NCC score for an accepted instance center.
    pub score_threshold: f32,
    /// Maximum angle (degrees) between a pixel's decoded direction and the
    /// vector toward a center for the two to "agree".
    pub agreement_deg: f64,
    /// Maximum depth-class difference for assignment and fusion.
    pub depth_tolerance: u8,
    /// Normalized bias above which a proposal is considered incomplete.
    pub bias_threshold: f64,
    /// Fusion search reach as a multiple of the proposal's template size.
    pub search_factor: f64,
    /// Proposals smaller than this are dropped.
    pub min_pixels: usize,
    /// Disables proposal fusion when false (ablation support).
    pub fusion_enabled: bool,
    /// Pixels with raw direction magnitude below this are left unassigned;
    /// 0 disables the gate.
    pub magnitude_gate: f32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            score_threshold: 0.3,
            agreement_deg: 67.5,
            depth_tolerance: 1,
            bias_threshold: 0.3,
            search_factor: 1.5,
            min_pixels: 10,
            fusion_enabled: true,
            magnitude_gate: 0.0,
        }
    }
}

/// A temporary instance center accepted by non-maximum suppression.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCenter {
    pub position: PixelCoord,
    pub category: CategoryId,
    pub depth_class: DepthClass,
    pub score: f32,
    pub template_width: usize,
    pub template_height: usize,
}

/// Pixels assigned to one temporary center, with the accumulated direction
/// bias (sum of member unit vectors, x right / y up).
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceProposal {
    pub center: InstanceCenter,
    /// Row-major pixel indices, sorted ascending.
    pub pixels: Vec<usize>,
    pub bias: (f64, f64),
}

impl InstanceProposal {
    /// Normalized bias length in [0, 1].
    pub fn normalized_bias(&self) -> f64 {
        if self.pixels.is_empty() {
            return 0.0;
        }
        libm::sqrt(self.bias.0 * self.bias.0 + self.bias.1 * self.bias.1) / self.pixels.len() as f64
    }
}

/// Final per-instance record.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub id: u32,
    pub label: LabelId,
    pub depth_m: f64,
    pub pixel_count: usize,
    /// NCC score of the instance's center; doubles as detection confidence.
    pub score: f32,
    pub center: PixelCoord,
}

/// The holistic output: instance masks, per-instance records, and the
/// pixel-level semantic channel passed through for non-instance pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLabeling {
    pub instance_ids: Raster<u32>,
    pub records: Vec<InstanceRecord>,
    pub background_semantic: Raster<LabelId>,
}

impl SceneLabeling {
    pub fn dims(&self) -> (usize, usize) {
        self.instance_ids.dims()
    }

    pub fn empty(width: usize, height: usize, semantic: Raster<LabelId>) -> Self {
        SceneLabeling {
            instance_ids: Raster::filled(width, height, 0),
            records: Vec::new(),
            background_semantic: semantic,
        }
    }
}

/// Greedy global-maximum NMS over a category's score maps.
///
/// Each pixel's effective score comes from the map matching its predicted
/// depth class (maps from [`score_maps`] hold the sentinel elsewhere, so a
/// plain elementwise maximum recovers that selection). The global maximum
/// above the threshold is accepted, scores inside its template-sized window
/// are suppressed, and the scan repeats. Ties break on (row, col).
pub fn find_centers(maps: &[ScoreMap], cfg: &PipelineConfig) -> Vec<InstanceCenter> {
    let mut centers = Vec::new();
    let mut categories: Vec<CategoryId> = maps.iter().map(|m| m.category).collect();
    categories.sort_unstable();
    categories.dedup();

    for cat in categories {
        let group: Vec<&ScoreMap> = maps.iter().filter(|m| m.category == cat).collect();
        let (w, h) = group[0].scores.dims();
        // Effective score and the index of the map supplying it.
        let mut eff = alloc::vec![SCORE_SENTINEL; w * h];
        let mut src = alloc::vec![usize::MAX; w * h];
        for (mi, map) in group.iter().enumerate() {
            debug_assert_eq!(map.scores.dims(), (w, h));
            for (i, &v) in map.scores.data().iter().enumerate() {
                if v > eff[i] {
                    eff[i] = v;
                    src[i] = mi;
                }
            }
        }
        loop {
            let mut best = SCORE_SENTINEL;
            let mut best_i = usize::MAX;
            for (i, &v) in eff.iter().enumerate() {
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            if best_i == usize::MAX || best < cfg.score_threshold {
                break;
            }
            let map = group[src[best_i]];
            let (row, col) = (best_i / w, best_i % w);
            centers.push(InstanceCenter {
                position: PixelCoord::new(col as i32, row as i32),
                category: cat,
                depth_class: map.depth_class,
                score: best,
                template_width: map.template_width,
                template_height: map.template_height,
            });
            let (hw, hh) = ((map.template_width - 1) / 2, (map.template_height - 1) / 2);
            let r0 = row.saturating_sub(hh);
            let r1 = (row + hh).min(h - 1);
            let c0 = col.saturating_sub(hw);
            let c1 = (col + hw).min(w - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    eff[r * w + c] = SCORE_SENTINEL;
                }
            }
        }
    }
    centers
}

fn angle_cos(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let na = libm::sqrt(ax * ax + ay * ay);
    let nb = libm::sqrt(bx * bx + by * by);
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    ((ax * bx + ay * by) / (na * nb)).clamp(-1.0, 1.0)
}

/// Assigns every object pixel to the closest agreeing center of its
/// category. A center agrees when its depth class is within the tolerance
/// and the angle between the pixel's decoded direction and the vector toward
/// the center is at most `agreement_deg`. Distance ties break on the earlier
/// center in `centers` order.
pub fn assign_pixels(
    centers: &[InstanceCenter],
    field: &DirectionField,
    triple: &ChannelTriple,
    labels: &LabelSet,
    cfg: &PipelineConfig,
) -> Result<Vec<InstanceProposal>> {
    let (w, h) = triple.dims();
    if field.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: field.dims(),
        });
    }
    let categories = pixel_categories(triple, labels)?;
    let cos_limit = libm::cos(cfg.agreement_deg.to_radians());

    let mut proposals: Vec<InstanceProposal> = centers
        .iter()
        .map(|c| InstanceProposal {
            center: c.clone(),
            pixels: Vec::new(),
            bias: (0.0, 0.0),
        })
        .collect();

    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let Some(cat) = categories[i] else { continue };
            let (vx, vy) = field.vector_at(i);
            let mag = field.magnitude_at(i);
            if mag == 0.0 || (vx == 0.0 && vy == 0.0) {
                continue; // no usable direction estimate
            }
            if cfg.magnitude_gate > 0.0 && mag < cfg.magnitude_gate {
                continue;
            }
            let depth = triple.depth.data()[i];
            let mut best: Option<(u64, usize)> = None;
            for (ci, center) in centers.iter().enumerate() {
                if center.category != cat {
                    continue;
                }
                let dk = (center.depth_class as i16 - depth as i16).unsigned_abs();
                if dk > cfg.depth_tolerance as u16 {
                    continue;
                }
                let dx = (center.position.col - c as i32) as f64;
                let dy = (r as i32 - center.position.row) as f64;
                if !(dx == 0.0 && dy == 0.0)
                    && angle_cos(vx as f64, vy as f64, dx, dy) < cos_limit
                {
                    continue;
                }
                let d2 = (dx * dx + dy * dy) as u64;
                match best {
                    Some((bd, _)) if bd <= d2 => {}
                    _ => best = Some((d2, ci)),
                }
            }
            if let Some((_, ci)) = best {
                proposals[ci].pixels.push(i);
                proposals[ci].bias.0 += vx as f64;
                proposals[ci].bias.1 += vy as f64;
            }
        }
    }

    proposals.retain(|p| !p.pixels.is_empty());
    Ok(proposals)
}

/// Merges incomplete proposals into the neighbor their bias points at.
///
/// While any proposal's normalized bias exceeds the threshold, a partner of
/// the same category within the depth tolerance is searched for along the
/// bias direction, within `search_factor` times the proposal's template
/// size. Merging keeps the higher-scoring center; each merge reduces the
/// proposal count, so the loop terminates.
pub fn fuse_proposals(
    mut proposals: Vec<InstanceProposal>,
    cfg: &PipelineConfig,
) -> Vec<InstanceProposal> {
    let cos_limit = libm::cos(cfg.agreement_deg.to_radians());
    loop {
        let mut merge: Option<(usize, usize)> = None;
        'outer: for i in 0..proposals.len() {
            let p = &proposals[i];
            let nb = p.normalized_bias();
            if nb <= cfg.bias_threshold {
                continue;
            }
            let (bx, by) = p.bias;
            let reach_c = cfg.search_factor * p.center.template_width as f64;
            let reach_r = cfg.search_factor * p.center.template_height as f64;
            let mut best: Option<(f64, usize)> = None;
            for (j, q) in proposals.iter().enumerate() {
                if j == i || q.center.category != p.center.category {
                    continue;
                }
                let dk = (q.center.depth_class as i16 - p.center.depth_class as i16)
                    .unsigned_abs();
                if dk > cfg.depth_tolerance as u16 {
                    continue;
                }
                let dx = (q.center.position.col - p.center.position.col) as f64;
                let dy = (p.center.position.row - q.center.position.row) as f64;
                if libm::fabs(dx) > reach_c || libm::fabs(dy) > reach_r {
                    continue;
                }
                if angle_cos(bx, by, dx, dy) < cos_limit {
                    continue;
                }
                let d2 = dx * dx + dy * dy;
                match best {
                    Some((bd, _)) if bd <= d2 => {}
                    _ => best = Some((d2, j)),
                }
            }
            if let Some((_, j)) = best {
                merge = Some((i, j));
                break 'outer;
            }
        }
        let Some((i, j)) = merge else { break };
        let (keep, absorb) = if proposals[j].center.score > proposals[i].center.score
            || (proposals[j].center.score == proposals[i].center.score && j < i)
        {
            (j, i)
        } else {
            (i, j)
        };
        let absorbed = proposals.remove(absorb);
        let keep = if absorb < keep { keep - 1 } else { keep };
        let target = &mut proposals[keep];
        target.pixels.extend_from_slice(&absorbed.pixels);
        target.pixels.sort_unstable();
        target.bias.0 += absorbed.bias.0;
        target.bias.1 += absorbed.bias.1;
    }
    proposals
}

/// Drops undersized proposals and produces the final labeling: per-instance
/// mean depth (from class midpoints), majority object label, and the
/// semantic channel passed through for non-instance pixels.
pub fn finalize(
    proposals: &[InstanceProposal],
    triple: &ChannelTriple,
    layering: &DepthLayering,
    labels: &LabelSet,
    cfg: &PipelineConfig,
) -> Result<SceneLabeling> {
    let (w, h) = triple.dims();

    struct Pending<'a> {
        proposal: &'a InstanceProposal,
        label: LabelId,
        depth_m: f64,
    }

    let mut pending = Vec::new();
    for p in proposals {
        if p.pixels.len() < cfg.min_pixels {
            continue;
        }
        // Majority object label; ties go to the lower label id.
        let mut counts = alloc::vec![0usize; labels.labels.len()];
        for &i in &p.pixels {
            let l = triple.semantic.data()[i];
            if labels.is_object(l)? {
                counts[l as usize] += 1;
            }
        }
        let (label, _) = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .ok_or_else(|| Error::invalid("empty label registry"))?;

        // Mean of class midpoints over member pixels with an object depth.
        let mut sum = 0.0f64;
        let mut n = 0usize;
        for &i in &p.pixels {
            let k = triple.depth.data()[i];
            if k != 0 {
                sum += layering.midpoint(k)?;
                n += 1;
            }
        }
        let depth_m = if n > 0 {
            sum / n as f64
        } else {
            layering.midpoint(p.center.depth_class)?
        };

        pending.push(Pending {
            proposal: p,
            label: label as LabelId,
            depth_m,
        });
    }

    // Deterministic id order: descending pixel count, then center position.
    pending.sort_by(|a, b| {
        b.proposal
            .pixels
            .len()
            .cmp(&a.proposal.pixels.len())
            .then_with(|| {
                (a.proposal.center.position.row, a.proposal.center.position.col)
                    .cmp(&(b.proposal.center.position.row, b.proposal.center.position.col))
            })
    });

    let mut instance_ids = Raster::filled(w, h, 0u32);
    let mut records = Vec::with_capacity(pending.len());
    for (idx, p) in pending.iter().enumerate() {
        let id = idx as u32 + 1;
        for &i in &p.proposal.pixels {
            instance_ids.data_mut()[i] = id;
        }
        records.push(InstanceRecord {
            id,
            label: p.label,
            depth_m: p.depth_m,
            pixel_count: p.proposal.pixels.len(),
            score: p.proposal.center.score,
            center: p.proposal.center.position,
        });
    }

    Ok(SceneLabeling {
        instance_ids,
        records,
        background_semantic: triple.semantic.clone(),
    })
}

/// Runs the whole decoding pipeline on one channel triple.
pub fn segment_scene(
    triple: &ChannelTriple,
    labels: &LabelSet,
    layering: &DepthLayering,
    bins: &DirectionBinning,
    template_cfg: &TemplateConfig,
    cfg: &PipelineConfig,
) -> Result<SceneLabeling> {
    triple.validate()?;
    let field = decode_field(triple, bins)?;
    let maps = score_maps(triple, &field, labels, layering, template_cfg)?;
    let centers = find_centers(&maps, cfg);
    let proposals = assign_pixels(&centers, &field, triple, labels, cfg)?;
    let proposals = if cfg.fusion_enabled {
        fuse_proposals(proposals, cfg)
    } else {
        proposals
    };
    finalize(&proposals, triple, layering, labels, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode_scene, InstanceAnnotation};
    use crate::template::synthesize_template;
    use alloc::collections::BTreeMap;

    fn setup() -> (LabelSet, DepthLayering, DirectionBinning, TemplateConfig, PipelineConfig) {
        (
            LabelSet::cityscapes(),
            DepthLayering::kitti(),
            DirectionBinning::default(),
            TemplateConfig::default(),
            PipelineConfig::default(),
        )
    }

    fn rect_scene(
        rects: &[(usize, usize, usize, usize, &str, f64)],
        w: usize,
        h: usize,
        labels: &LabelSet,
    ) -> InstanceAnnotation {
        // rects: (row0, col0, height, width, label name, depth)
        let mut ids = Raster::filled(w, h, 0u32);
        let mut sem = Raster::filled(w, h, labels.background_id);
        let mut depths = BTreeMap::new();
        for (n, &(r0, c0, rh, rw, name, d)) in rects.iter().enumerate() {
            let label = labels.label_by_name(name).unwrap();
            let id = n as u32 + 1;
            for r in r0..r0 + rh {
                for c in c0..c0 + rw {
                    ids.set(r, c, id);
                    sem.set(r, c, label);
                }
            }
            depths.insert(id, d);
        }
        InstanceAnnotation {
            instance_ids: ids,
            semantic: sem,
            instance_depths: depths,
        }
    }

    fn run(
        ann: &InstanceAnnotation,
        labels: &LabelSet,
        layering: &DepthLayering,
        bins: &DirectionBinning,
        tcfg: &TemplateConfig,
        cfg: &PipelineConfig,
    ) -> SceneLabeling {
        let triple = encode_scene(ann, labels, layering, bins).unwrap();
        segment_scene(&triple, labels, layering, bins, tcfg, cfg).unwrap()
    }

    #[test]
    fn single_instance_single_center() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(&[(10, 10, 12, 22, "car", 11.0)], 60, 40, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        assert_eq!(centers.len(), 1);
        let c = &centers[0];
        assert!((c.position.row - 15).abs() <= 1 && (c.position.col - 20).abs() <= 1);
    }

    #[test]
    fn well_separated_instances_two_centers() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(
            &[
                (10, 5, 12, 22, "car", 11.0),
                (10, 60, 12, 22, "car", 11.0),
            ],
            100,
            40,
            &labels,
        );
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        assert_eq!(centers.len(), 2);
    }

    #[test]
    fn overlapping_peaks_suppress_to_one() {
        // Two synthetic peaks closer than half a template in both axes: the
        // stronger survives, the weaker is suppressed.
        let (labels, layering, _, tcfg, cfg) = setup();
        let car = labels.category_by_name("car").unwrap();
        let t = synthesize_template(car, 8, &tcfg, &labels, &layering).unwrap();
        let mut scores = Raster::filled(60, 40, SCORE_SENTINEL);
        scores.set(20, 30, 0.9);
        scores.set(22, 33, 0.8); // within the 21x11 suppression window
        let map = ScoreMap {
            category: car,
            depth_class: 8,
            template_width: t.width,
            template_height: t.height,
            scores,
        };
        let centers = find_centers(&[map], &cfg);
        assert_eq!(centers.len(), 1);
        assert_eq!(centers[0].position, PixelCoord::new(30, 20));
    }

    #[test]
    fn equal_peaks_tie_break_lexicographic() {
        let (labels, layering, _, tcfg, cfg) = setup();
        let car = labels.category_by_name("car").unwrap();
        let t = synthesize_template(car, 8, &tcfg, &labels, &layering).unwrap();
        let mut scores = Raster::filled(60, 40, SCORE_SENTINEL);
        scores.set(22, 33, 0.9);
        scores.set(20, 30, 0.9);
        let map = ScoreMap {
            category: car,
            depth_class: 8,
            template_width: t.width,
            template_height: t.height,
            scores,
        };
        let centers = find_centers(&[map], &cfg);
        assert_eq!(centers.len(), 1);
        // (20, 30) precedes (22, 33) in row-major order.
        assert_eq!(centers[0].position, PixelCoord::new(30, 20));
    }

    #[test]
    fn empty_maps_give_no_centers() {
        let (_, _, _, _, cfg) = setup();
        assert!(find_centers(&[], &cfg).is_empty());
    }

    #[test]
    fn noise_free_round_trip_assigns_every_pixel() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(&[(10, 10, 12, 22, "car", 11.0)], 60, 40, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        assert_eq!(proposals.len(), 1);
        assert_eq!(proposals[0].pixels.len(), 12 * 22);
    }

    #[test]
    fn opposing_direction_stays_unassigned() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(&[(10, 10, 12, 22, "car", 11.0)], 60, 40, &labels);
        let mut triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        // Flip one pixel's one-hot to the opposite bin.
        let row = triple.direction_scores.scores_mut(11, 11);
        let bin = row.iter().position(|&s| s > 0.0).unwrap();
        row[bin] = 0.0;
        row[(bin + 4) % 8] = 1.0;
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        let total: usize = proposals.iter().map(|p| p.pixels.len()).sum();
        assert_eq!(total, 12 * 22 - 1);
    }

    #[test]
    fn equidistant_pixel_joins_earlier_center() {
        let (labels, _, _, _, cfg) = setup();
        let layering = DepthLayering::kitti();
        let bins = DirectionBinning::default();
        let car_cat = labels.category_by_name("car").unwrap();
        // Hand-built centers either side of a pixel whose direction is up,
        // perpendicular to both center offsets at 45 deg within tolerance.
        let mk = |col: i32| InstanceCenter {
            position: PixelCoord::new(col, 10),
            category: car_cat,
            depth_class: 8,
            score: 0.9,
            template_width: 9,
            template_height: 9,
        };
        let centers = [mk(6), mk(14)];
        let ann = rect_scene(&[(6, 2, 9, 17, "car", 11.0)], 24, 20, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        // Pixel (10, 10) is equidistant from both; its encoded direction is
        // toward the annotation centroid (10, 10)... it is the centroid, so
        // check a neighbor: (12, 10) decodes upward, equidistant to both
        // centers at 45 deg. It must join the first center in order.
        let i = 12 * 24 + 10;
        let owner = proposals
            .iter()
            .position(|p| p.pixels.contains(&i))
            .unwrap();
        assert_eq!(proposals[owner].center.position.col, 6);
    }

    #[test]
    fn complete_instances_have_near_zero_bias() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(
            &[
                (10, 5, 12, 22, "car", 11.0),
                (10, 60, 12, 22, "car", 11.0),
            ],
            100,
            40,
            &labels,
        );
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        assert_eq!(proposals.len(), 2);
        for p in &proposals {
            assert!(p.normalized_bias() < cfg.bias_threshold);
        }
        // Two complete neighbors survive fusion untouched.
        let fused = fuse_proposals(proposals.clone(), &cfg);
        assert_eq!(fused.len(), 2);
    }

    #[test]
    fn split_halves_fuse() {
        // Over-segmentation shape: two artificial centers both left of the
        // true centroid (col 30). The leftmost proposal only collects the
        // strip of pixels pointing rightward at it, so its bias points at
        // the neighbor and fusion merges the pair.
        let (labels, layering, bins, _, cfg) = setup();
        let car_cat = labels.category_by_name("car").unwrap();
        let ann = rect_scene(&[(10, 10, 12, 40, "car", 11.0)], 60, 40, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let mk = |col: i32, score: f32| InstanceCenter {
            position: PixelCoord::new(col, 15),
            category: car_cat,
            depth_class: 8,
            score,
            template_width: 21,
            template_height: 11,
        };
        let centers = [mk(14, 0.7), mk(26, 0.8)];
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        assert_eq!(proposals.len(), 2);
        let total: usize = proposals.iter().map(|p| p.pixels.len()).sum();
        let fused = fuse_proposals(proposals, &cfg);
        assert_eq!(fused.len(), 1);
        assert_eq!(fused[0].pixels.len(), total);
        // Higher-scoring center kept.
        assert_eq!(fused[0].center.position.col, 26);
    }

    #[test]
    fn fusion_is_idempotent() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(&[(10, 10, 12, 22, "car", 11.0)], 60, 40, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let maps = score_maps(&triple, &field, &labels, &layering, &tcfg).unwrap();
        let centers = find_centers(&maps, &cfg);
        let proposals = assign_pixels(&centers, &field, &triple, &labels, &cfg).unwrap();
        let once = fuse_proposals(proposals, &cfg);
        let twice = fuse_proposals(once.clone(), &cfg);
        assert_eq!(once, twice);
    }

    #[test]
    fn finalize_depth_and_majority_label() {
        let (labels, layering, bins, _, cfg) = setup();
        // One proposal whose member pixels carry 60% car / 40% truck labels
        // (painted after encoding): the majority label wins.
        let ann = rect_scene(&[(10, 10, 10, 20, "car", 11.0)], 60, 40, &labels);
        let mut triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let truck = labels.label_by_name("truck").unwrap();
        for r in 10..20 {
            for c in 22..30 {
                triple.semantic.set(r, c, truck); // 40% of the 20 columns
            }
        }
        let car_cat = labels.category_by_name("car").unwrap();
        let center = InstanceCenter {
            position: PixelCoord::new(19, 14),
            category: car_cat,
            depth_class: 8,
            score: 0.8,
            template_width: 21,
            template_height: 11,
        };
        let mut pixels = alloc::vec::Vec::new();
        for r in 10..20 {
            for c in 10..30 {
                pixels.push(r * 60 + c);
            }
        }
        let proposal = InstanceProposal {
            center,
            pixels,
            bias: (0.0, 0.0),
        };
        let out = finalize(&[proposal], &triple, &layering, &labels, &cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        let rec = &out.records[0];
        assert_eq!(rec.label, labels.label_by_name("car").unwrap());
        // All pixels carry depth class 8 -> mean midpoint 11.0 exactly.
        assert_eq!(rec.depth_m, 11.0);
    }

    #[test]
    fn tiny_proposals_are_dropped() {
        let (labels, layering, bins, _, cfg) = setup();
        let ann = rect_scene(&[(10, 10, 12, 22, "car", 11.0)], 60, 40, &labels);
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let field = decode_field(&triple, &bins).unwrap();
        let car_cat = labels.category_by_name("car").unwrap();
        let center = InstanceCenter {
            position: PixelCoord::new(20, 15),
            category: car_cat,
            depth_class: 8,
            score: 0.5,
            template_width: 9,
            template_height: 9,
        };
        let mut proposal = InstanceProposal {
            center,
            pixels: alloc::vec![15 * 60 + 20, 15 * 60 + 21, 15 * 60 + 22],
            bias: (0.0, 0.0),
        };
        proposal.pixels.truncate(3);
        let out = finalize(&[proposal], &triple, &layering, &labels, &cfg).unwrap();
        assert!(out.records.is_empty());
    }

    #[test]
    fn all_background_passes_through() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(&[], 30, 20, &labels);
        let out = run(&ann, &labels, &layering, &bins, &tcfg, &cfg);
        assert!(out.records.is_empty());
        assert!(out.instance_ids.data().iter().all(|&v| v == 0));
        assert_eq!(out.background_semantic, ann.semantic);
    }

    #[test]
    fn round_trip_recovers_instances_exactly() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(
            &[
                (8, 6, 14, 24, "car", 11.0),
                (8, 70, 14, 24, "car", 21.0),
                (26, 40, 12, 10, "person", 13.0),
            ],
            110,
            50,
            &labels,
        );
        let out = run(&ann, &labels, &layering, &bins, &tcfg, &cfg);
        assert_eq!(out.records.len(), 3);
        // Each recovered mask matches a GT mask with IoU >= 0.99.
        for gt_id in ann.instance_ids_present() {
            let gt: alloc::vec::Vec<usize> = ann
                .instance_ids
                .data()
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v == gt_id)
                .map(|(i, _)| i)
                .collect();
            let mut best = 0.0f64;
            for rec in &out.records {
                let pred: alloc::vec::Vec<usize> = out
                    .instance_ids
                    .data()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v == rec.id)
                    .map(|(i, _)| i)
                    .collect();
                let inter = pred.iter().filter(|i| gt.binary_search(i).is_ok()).count();
                let union = pred.len() + gt.len() - inter;
                best = best.max(inter as f64 / union as f64);
            }
            assert!(best >= 0.99, "gt {gt_id} best IoU {best}");
        }
    }

    #[test]
    fn output_masks_are_disjoint_and_object_labeled() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(
            &[
                (8, 6, 14, 24, "car", 11.0),
                (8, 70, 14, 24, "bus", 24.0),
            ],
            110,
            50,
            &labels,
        );
        let out = run(&ann, &labels, &layering, &bins, &tcfg, &cfg);
        for (i, &id) in out.instance_ids.data().iter().enumerate() {
            if id != 0 {
                let l = out.background_semantic.data()[i];
                assert!(labels.is_object(l).unwrap());
            }
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (labels, layering, bins, tcfg, cfg) = setup();
        let ann = rect_scene(
            &[
                (8, 6, 14, 24, "car", 11.0),
                (8, 70, 14, 24, "car", 21.0),
            ],
            110,
            50,
            &labels,
        );
        let triple = encode_scene(&ann, &labels, &layering, &bins).unwrap();
        let a = segment_scene(&triple, &labels, &layering, &bins, &tcfg, &cfg).unwrap();
        let b = segment_scene(&triple, &labels, &layering, &bins, &tcfg, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
