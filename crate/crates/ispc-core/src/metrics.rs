//! Instance, depth, and pixel-level evaluation metrics.
//!
//! Percentages are reported in [0, 100]. The 50% overlap rule is strict
//! everywhere: a pair counts only when IoU > 0.5. Conventions for empty
//! inputs: comparing nothing against nothing scores the ideal value.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encode::InstanceAnnotation;
use crate::error::{Error, Result};
use crate::pipeline::SceneLabeling;
use crate::raster::Raster;
use crate::scene::{LabelId, LabelSet};

/// One-to-one instance correspondence with IoU overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMatching {
    /// (pred id, gt id, IoU), each id appearing at most once.
    pub pairs: Vec<(u32, u32, f64)>,
    pub unmatched_pred: Vec<u32>,
    pub unmatched_gt: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZhangBlock {
    #[serde(rename = "IoU")]
    pub iou: f64,
    #[serde(rename = "MWCov")]
    pub mwcov: f64,
    #[serde(rename = "MUCov")]
    pub mucov: f64,
    #[serde(rename = "AvgPr")]
    pub avg_pr: f64,
    #[serde(rename = "AvgRe")]
    pub avg_re: f64,
    #[serde(rename = "AvgFP")]
    pub avg_fp: f64,
    #[serde(rename = "AvgFN")]
    pub avg_fn: f64,
    #[serde(rename = "InsPr")]
    pub ins_pr: f64,
    #[serde(rename = "InsRe")]
    pub ins_re: f64,
    #[serde(rename = "InsF1")]
    pub ins_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApBlock {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP100m")]
    pub ap100m: f64,
    #[serde(rename = "AP50m")]
    pub ap50m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthBlock {
    #[serde(rename = "MAE_m")]
    pub mae_m: f64,
    #[serde(rename = "RMSE_m")]
    pub rmse_m: f64,
    #[serde(rename = "ARD")]
    pub ard: f64,
    #[serde(rename = "δ1")]
    pub delta1: f64,
    #[serde(rename = "δ2")]
    pub delta2: f64,
    #[serde(rename = "δ3")]
    pub delta3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPixelMetrics {
    #[serde(rename = "IoU")]
    pub iou: f64,
    #[serde(rename = "iIoU")]
    pub i_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelBlock {
    /// Mean IoU over labels present in either map.
    #[serde(rename = "IoU_class")]
    pub iou_class: f64,
    /// Mean instance-weighted IoU over present object labels.
    #[serde(rename = "iIoU_class")]
    pub i_iou_class: f64,
    pub per_label: BTreeMap<String, LabelPixelMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub zhang: ZhangBlock,
    pub ap: ApBlock,
    pub depth: DepthBlock,
    pub pixel: PixelBlock,
}

/// Sorted row-major pixel index sets per instance id (id 0 excluded).
fn masks_of(ids: &Raster<u32>) -> BTreeMap<u32, Vec<usize>> {
    let mut masks: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &v) in ids.data().iter().enumerate() {
        if v != 0 {
            masks.entry(v).or_default().push(i);
        }
    }
    masks
}

fn mask_iou(a: &[usize], b: &[usize]) -> f64 {
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn mask_intersection(a: &[usize], b: &[usize]) -> usize {
    let mut inter = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter
}

/// Greedy one-to-one matching by descending IoU; pairs with IoU not
/// strictly above `threshold` are rejected. IoU ties break on the lower
/// (pred id, gt id).
pub fn match_instances(
    pred: &Raster<u32>,
    gt: &Raster<u32>,
    threshold: f64,
) -> Result<InstanceMatching> {
    pred.check_dims(gt)?;
    let pred_masks = masks_of(pred);
    let gt_masks = masks_of(gt);

    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for (&pid, pm) in &pred_masks {
        for (&gid, gm) in &gt_masks {
            let iou = mask_iou(pm, gm);
            if iou > threshold {
                candidates.push((iou, pid, gid));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut pairs = Vec::new();
    let mut used_pred: Vec<u32> = Vec::new();
    let mut used_gt: Vec<u32> = Vec::new();
    for (iou, pid, gid) in candidates {
        if used_pred.contains(&pid) || used_gt.contains(&gid) {
            continue;
        }
        used_pred.push(pid);
        used_gt.push(gid);
        pairs.push((pid, gid, iou));
    }
    let unmatched_pred = pred_masks
        .keys()
        .copied()
        .filter(|id| !used_pred.contains(id))
        .collect();
    let unmatched_gt = gt_masks
        .keys()
        .copied()
        .filter(|id| !used_gt.contains(id))
        .collect();
    Ok(InstanceMatching {
        pairs,
        unmatched_pred,
        unmatched_gt,
    })
}

fn pct(num: f64, den: f64, empty_value: f64) -> f64 {
    if den == 0.0 {
        empty_value
    } else {
        100.0 * num / den
    }
}

/// Coverage, pixel precision/recall, and instance-count metrics for a
/// single scene.
pub fn zhang_metrics(pred: &SceneLabeling, gt: &InstanceAnnotation) -> Result<ZhangBlock> {
    pred.instance_ids.check_dims(&gt.instance_ids)?;
    let pred_masks = masks_of(&pred.instance_ids);
    let gt_masks = masks_of(&gt.instance_ids);

    // Pixel IoU of the instance-covered unions.
    let pred_cover: Vec<usize> = pred
        .instance_ids
        .data()
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0)
        .map(|(i, _)| i)
        .collect();
    let gt_cover: Vec<usize> = gt
        .instance_ids
        .data()
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v != 0)
        .map(|(i, _)| i)
        .collect();
    let iou = if pred_cover.is_empty() && gt_cover.is_empty() {
        100.0
    } else {
        100.0 * mask_iou(&pred_cover, &gt_cover)
    };

    // Best-prediction coverage per GT instance.
    let mut weighted = 0.0f64;
    let mut unweighted = 0.0f64;
    let mut total_size = 0usize;
    for gm in gt_masks.values() {
        let best = pred_masks
            .values()
            .map(|pm| mask_iou(pm, gm))
            .fold(0.0f64, f64::max);
        weighted += best * gm.len() as f64;
        unweighted += best;
        total_size += gm.len();
    }
    let mwcov = pct(weighted, total_size as f64, 100.0);
    let mucov = pct(unweighted, gt_masks.len() as f64, 100.0);

    let matching = match_instances(&pred.instance_ids, &gt.instance_ids, 0.5)?;
    let mut pr_sum = 0.0f64;
    let mut re_sum = 0.0f64;
    for &(pid, gid, _) in &matching.pairs {
        let pm = &pred_masks[&pid];
        let gm = &gt_masks[&gid];
        let inter = mask_intersection(pm, gm) as f64;
        pr_sum += inter / pm.len() as f64;
        re_sum += inter / gm.len() as f64;
    }
    let n_pairs = matching.pairs.len() as f64;
    let empty_ok = pred_masks.is_empty() && gt_masks.is_empty();
    let avg_pr = pct(pr_sum, n_pairs, if empty_ok { 100.0 } else { 0.0 });
    let avg_re = pct(re_sum, n_pairs, if empty_ok { 100.0 } else { 0.0 });

    let ins_pr = pct(n_pairs, pred_masks.len() as f64, 100.0);
    let ins_re = pct(n_pairs, gt_masks.len() as f64, 100.0);
    let ins_f1 = if ins_pr + ins_re == 0.0 {
        0.0
    } else {
        2.0 * ins_pr * ins_re / (ins_pr + ins_re)
    };

    Ok(ZhangBlock {
        iou,
        mwcov,
        mucov,
        avg_pr,
        avg_re,
        avg_fp: matching.unmatched_pred.len() as f64,
        avg_fn: matching.unmatched_gt.len() as f64,
        ins_pr,
        ins_re,
        ins_f1,
    })
}

/// One ranked detection after per-scene matching at one overlap threshold.
#[derive(Debug, Clone, Copy)]
enum DetOutcome {
    TruePositive,
    FalsePositive,
    /// Matched a GT excluded by the depth cap; removed from the ranking.
    Ignored,
}

/// One scene's input to the AP family: predicted masks with confidences and
/// GT masks with metric depths.
pub struct ApScene {
    pub pred: Vec<(Vec<usize>, f32)>,
    pub gt: Vec<(Vec<usize>, f64)>,
}

impl ApScene {
    pub fn from_labeling(pred: &SceneLabeling, gt: &InstanceAnnotation) -> Result<ApScene> {
        pred.instance_ids.check_dims(&gt.instance_ids)?;
        let pred_masks = masks_of(&pred.instance_ids);
        let mut preds = Vec::new();
        for rec in &pred.records {
            let mask = pred_masks
                .get(&rec.id)
                .ok_or_else(|| Error::invalid("record id without pixels"))?;
            if !rec.score.is_finite() {
                return Err(Error::invalid("missing or non-finite confidence"));
            }
            preds.push((mask.clone(), rec.score));
        }
        let gt_masks = masks_of(&gt.instance_ids);
        let mut gts = Vec::new();
        for (&gid, gm) in &gt_masks {
            let depth = *gt
                .instance_depths
                .get(&gid)
                .ok_or_else(|| Error::invalid("ground-truth instance without depth"))?;
            gts.push((gm.clone(), depth));
        }
        Ok(ApScene { pred: preds, gt: gts })
    }
}

/// Matches one scene's detections at one overlap threshold and depth cap.
///
/// Detections are ranked by descending confidence (stable on input order);
/// each greedily claims the unclaimed GT with the highest IoU above the
/// threshold. Claims on GT beyond the cap remove the detection from the
/// ranking instead of counting as false positives.
fn scene_outcomes(scene: &ApScene, threshold: f64, cap: f64) -> Vec<(f32, DetOutcome)> {
    let mut order: Vec<usize> = (0..scene.pred.len()).collect();
    order.sort_by(|&a, &b| {
        scene.pred[b]
            .1
            .partial_cmp(&scene.pred[a].1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut claimed = alloc::vec![false; scene.gt.len()];
    let mut out = Vec::with_capacity(order.len());
    for di in order {
        let (mask, conf) = &scene.pred[di];
        let mut best: Option<(f64, usize)> = None;
        for (gi, (gm, _)) in scene.gt.iter().enumerate() {
            if claimed[gi] {
                continue;
            }
            let iou = mask_iou(mask, gm);
            if iou <= threshold {
                continue;
            }
            match best {
                Some((bi, _)) if bi >= iou => {}
                _ => best = Some((iou, gi)),
            }
        }
        let outcome = match best {
            Some((_, gi)) => {
                claimed[gi] = true;
                if scene.gt[gi].1 <= cap {
                    DetOutcome::TruePositive
                } else {
                    DetOutcome::Ignored
                }
            }
            None => DetOutcome::FalsePositive,
        };
        out.push((*conf, outcome));
    }
    out
}

/// Average precision at one overlap threshold, detections pooled across
/// scenes, with max-precision interpolation of the PR curve.
fn ap_at(scenes: &[ApScene], threshold: f64, cap: f64) -> f64 {
    let n_gt: usize = scenes
        .iter()
        .map(|s| s.gt.iter().filter(|(_, d)| *d <= cap).count())
        .sum();
    let mut ranked: Vec<(f32, DetOutcome)> = Vec::new();
    for s in scenes {
        ranked.extend(scene_outcomes(s, threshold, cap));
    }
    ranked.retain(|(_, o)| !matches!(o, DetOutcome::Ignored));
    if n_gt == 0 {
        return if ranked.is_empty() { 100.0 } else { 0.0 };
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut recall_prec: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
    for (_, o) in &ranked {
        match o {
            DetOutcome::TruePositive => tp += 1,
            DetOutcome::FalsePositive => fp += 1,
            DetOutcome::Ignored => unreachable!(),
        }
        recall_prec.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    // Monotone max-precision envelope, integrated over recall steps.
    let mut ap = 0.0f64;
    let mut prev_recall = 0.0f64;
    for i in 0..recall_prec.len() {
        let (r, _) = recall_prec[i];
        if r > prev_recall {
            let p_max = recall_prec[i..]
                .iter()
                .map(|&(_, p)| p)
                .fold(0.0f64, f64::max);
            ap += (r - prev_recall) * p_max;
            prev_recall = r;
        }
    }
    100.0 * ap
}

const AP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// AP over the 0.50..0.95 threshold ladder, plus AP50 and the depth-capped
/// variants (caps apply to GT depth).
pub fn cityscapes_ap(scenes: &[ApScene]) -> ApBlock {
    let mean_over_thresholds = |cap: f64| {
        AP_THRESHOLDS
            .iter()
            .map(|&t| ap_at(scenes, t, cap))
            .sum::<f64>()
            / AP_THRESHOLDS.len() as f64
    };
    ApBlock {
        ap: mean_over_thresholds(f64::INFINITY),
        ap50: ap_at(scenes, 0.50, f64::INFINITY),
        ap100m: mean_over_thresholds(100.0),
        ap50m: mean_over_thresholds(50.0),
    }
}

/// Depth error statistics over matched (predicted, ground-truth) depth
/// pairs in meters.
pub fn depth_metrics(pairs: &[(f64, f64)]) -> Result<DepthBlock> {
    for &(zp, z) in pairs {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::invalid("ground-truth depth must be positive"));
        }
        if !(zp > 0.0) || !zp.is_finite() {
            return Err(Error::invalid("predicted depth must be positive"));
        }
    }
    if pairs.is_empty() {
        return Ok(DepthBlock {
            mae_m: 0.0,
            rmse_m: 0.0,
            ard: 0.0,
            delta1: 100.0,
            delta2: 100.0,
            delta3: 100.0,
        });
    }
    let n = pairs.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut rel_sum = 0.0;
    let mut inliers = [0usize; 3];
    for &(zp, z) in pairs {
        let d = zp - z;
        abs_sum += libm::fabs(d);
        sq_sum += d * d;
        rel_sum += libm::fabs(d) / z;
        let ratio = if zp > z { zp / z } else { z / zp };
        for (i, count) in inliers.iter_mut().enumerate() {
            if ratio < libm::pow(1.25, (i + 1) as f64) {
                *count += 1;
            }
        }
    }
    Ok(DepthBlock {
        mae_m: abs_sum / n,
        rmse_m: libm::sqrt(sq_sum / n),
        ard: 100.0 * rel_sum / n,
        delta1: 100.0 * inliers[0] as f64 / n,
        delta2: 100.0 * inliers[1] as f64 / n,
        delta3: 100.0 * inliers[2] as f64 / n,
    })
}

/// Per-label pixel IoU and instance-size-weighted iIoU.
///
/// iIoU weights each GT-instance pixel's true-positive and false-negative
/// contribution by (average instance size of its label / its instance's
/// size); false positives stay unweighted. Labels without instances keep
/// iIoU equal to IoU.
pub fn pixel_semantic_metrics(
    pred_semantic: &Raster<LabelId>,
    gt_semantic: &Raster<LabelId>,
    gt_instances: &Raster<u32>,
    labels: &LabelSet,
) -> Result<PixelBlock> {
    pred_semantic.check_dims(gt_semantic)?;
    pred_semantic.check_dims(gt_instances)?;

    let mut present: Vec<LabelId> = pred_semantic
        .data()
        .iter()
        .chain(gt_semantic.data())
        .copied()
        .collect();
    present.sort_unstable();
    present.dedup();

    // Per-instance sizes and per-label average instance size.
    let inst_masks = masks_of(gt_instances);
    let mut label_sizes: BTreeMap<LabelId, Vec<usize>> = BTreeMap::new();
    let mut inst_label: BTreeMap<u32, LabelId> = BTreeMap::new();
    for (&iid, mask) in &inst_masks {
        let l = gt_semantic.data()[mask[0]];
        label_sizes.entry(l).or_default().push(mask.len());
        inst_label.insert(iid, l);
    }
    let avg_size: BTreeMap<LabelId, f64> = label_sizes
        .iter()
        .map(|(&l, sizes)| {
            (
                l,
                sizes.iter().sum::<usize>() as f64 / sizes.len() as f64,
            )
        })
        .collect();
    let inst_size: BTreeMap<u32, f64> = inst_masks
        .iter()
        .map(|(&iid, m)| (iid, m.len() as f64))
        .collect();

    let mut per_label = BTreeMap::new();
    let mut iou_sum = 0.0;
    let mut i_iou_sum = 0.0;
    let mut i_iou_count = 0usize;
    for &l in &present {
        let name = labels.label(l)?.name.clone();
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let mut wtp = 0.0f64;
        let mut wfn = 0.0f64;
        for (i, (&p, &g)) in pred_semantic
            .data()
            .iter()
            .zip(gt_semantic.data())
            .enumerate()
        {
            if p == l && g == l {
                tp += 1;
                wtp += pixel_weight(i, gt_instances, &inst_label, &inst_size, &avg_size, l);
            } else if p == l {
                fp += 1;
            } else if g == l {
                fn_ += 1;
                wfn += pixel_weight(i, gt_instances, &inst_label, &inst_size, &avg_size, l);
            }
        }
        let denom = (tp + fp + fn_) as f64;
        let iou = pct(tp as f64, denom, 100.0);
        let wdenom = wtp + fp as f64 + wfn;
        let i_iou = if labels.is_object(l)? && avg_size.contains_key(&l) {
            pct(wtp, wdenom, 100.0)
        } else {
            iou
        };
        iou_sum += iou;
        if labels.is_object(l)? {
            i_iou_sum += i_iou;
            i_iou_count += 1;
        }
        per_label.insert(name, LabelPixelMetrics { iou, i_iou });
    }

    Ok(PixelBlock {
        iou_class: pct(iou_sum, 100.0 * present.len() as f64, 100.0),
        i_iou_class: pct(i_iou_sum, 100.0 * i_iou_count as f64, 100.0),
        per_label,
    })
}

fn pixel_weight(
    index: usize,
    gt_instances: &Raster<u32>,
    inst_label: &BTreeMap<u32, LabelId>,
    inst_size: &BTreeMap<u32, f64>,
    avg_size: &BTreeMap<LabelId, f64>,
    label: LabelId,
) -> f64 {
    let iid = gt_instances.data()[index];
    if iid == 0 {
        return 1.0;
    }
    match (inst_label.get(&iid), inst_size.get(&iid), avg_size.get(&label)) {
        (Some(&l), Some(&size), Some(&avg)) if l == label && size > 0.0 => avg / size,
        _ => 1.0,
    }
}

/// Full single-scene report. Depth pairs come from >0.5-overlap matches
/// between predicted records and GT instance depths.
pub fn evaluate(
    pred: &SceneLabeling,
    gt: &InstanceAnnotation,
    labels: &LabelSet,
) -> Result<MetricReport> {
    let zhang = zhang_metrics(pred, gt)?;
    let scenes = [ApScene::from_labeling(pred, gt)?];
    let ap = cityscapes_ap(&scenes);
    let matching = match_instances(&pred.instance_ids, &gt.instance_ids, 0.5)?;
    let mut pairs = Vec::new();
    for &(pid, gid, _) in &matching.pairs {
        let rec = pred
            .records
            .iter()
            .find(|r| r.id == pid)
            .ok_or_else(|| Error::invalid("matched prediction without record"))?;
        let z = *gt
            .instance_depths
            .get(&gid)
            .ok_or_else(|| Error::invalid("matched ground truth without depth"))?;
        pairs.push((rec.depth_m, z));
    }
    let depth = depth_metrics(&pairs)?;
    let pixel = pixel_semantic_metrics(
        &pred.background_semantic,
        &gt.semantic,
        &gt.instance_ids,
        labels,
    )?;
    Ok(MetricReport {
        zhang,
        ap,
        depth,
        pixel,
    })
}

/// Multi-scene report: Zhang and depth blocks are per-scene means / pooled
/// pairs, the AP family pools detections across scenes, and pixel metrics
/// pool pixel counts by concatenation.
pub fn evaluate_batch(
    pairs: &[(&SceneLabeling, &InstanceAnnotation)],
    labels: &LabelSet,
) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no scenes to evaluate"));
    }
    let mut zhang_blocks = Vec::with_capacity(pairs.len());
    let mut scenes = Vec::with_capacity(pairs.len());
    let mut depth_pairs = Vec::new();
    for &(pred, gt) in pairs {
        zhang_blocks.push(zhang_metrics(pred, gt)?);
        scenes.push(ApScene::from_labeling(pred, gt)?);
        let matching = match_instances(&pred.instance_ids, &gt.instance_ids, 0.5)?;
        for &(pid, gid, _) in &matching.pairs {
            let rec = pred
                .records
                .iter()
                .find(|r| r.id == pid)
                .ok_or_else(|| Error::invalid("matched prediction without record"))?;
            let z = *gt
                .instance_depths
                .get(&gid)
                .ok_or_else(|| Error::invalid("matched ground truth without depth"))?;
            depth_pairs.push((rec.depth_m, z));
        }
    }
    let n = zhang_blocks.len() as f64;
    let mean = |f: fn(&ZhangBlock) -> f64| zhang_blocks.iter().map(f).sum::<f64>() / n;
    let zhang = ZhangBlock {
        iou: mean(|b| b.iou),
        mwcov: mean(|b| b.mwcov),
        mucov: mean(|b| b.mucov),
        avg_pr: mean(|b| b.avg_pr),
        avg_re: mean(|b| b.avg_re),
        avg_fp: mean(|b| b.avg_fp),
        avg_fn: mean(|b| b.avg_fn),
        ins_pr: mean(|b| b.ins_pr),
        ins_re: mean(|b| b.ins_re),
        ins_f1: mean(|b| b.ins_f1),
    };
    let ap = cityscapes_ap(&scenes);
    let depth = depth_metrics(&depth_pairs)?;

    // Pixel pooling: concatenate the scenes into one tall raster. Instance
    // ids are offset per scene to stay distinct.
    let (w, _) = pairs[0].0.dims();
    let mut pred_sem = Vec::new();
    let mut gt_sem = Vec::new();
    let mut gt_ids = Vec::new();
    let mut offset = 0u32;
    let mut rows = 0usize;
    for &(pred, gt) in pairs {
        let (pw, ph) = pred.dims();
        if pw != w {
            return Err(Error::invalid("batch scenes must share a width"));
        }
        pred_sem.extend_from_slice(pred.background_semantic.data());
        gt_sem.extend_from_slice(gt.semantic.data());
        gt_ids.extend(gt.instance_ids.data().iter().map(|&v| {
            if v == 0 {
                0
            } else {
                v + offset
            }
        }));
        offset += gt.instance_ids.data().iter().copied().max().unwrap_or(0);
        rows += ph;
    }
    let pixel = pixel_semantic_metrics(
        &Raster::from_vec(w, rows, pred_sem)?,
        &Raster::from_vec(w, rows, gt_sem)?,
        &Raster::from_vec(w, rows, gt_ids)?,
        labels,
    )?;

    Ok(MetricReport {
        zhang,
        ap,
        depth,
        pixel,
    })
}
