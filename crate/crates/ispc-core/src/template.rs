//! Center-pattern templates and normalized cross-correlation score maps.
//!
//! A template holds, for one (category, depth class), the ideal field of unit
//! vectors pointing from each cell toward the template center. Correlating it
//! against the decoded direction field yields a score map whose peaks mark
//! instance centers.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::direction::DirectionField;
use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scene::{CategoryId, ChannelTriple, DepthClass, DepthLayering, LabelSet};

/// Marks score-map pixels where NCC is undefined (zero-variance window) or
/// was not computed. Ordered below every valid score, so suppression and
/// thresholding need no special casing.
pub const SCORE_SENTINEL: f32 = f32::NEG_INFINITY;

/// Base template size for one category at the reference depth class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryTemplateSpec {
    pub category: String,
    pub base_width: u32,
    pub base_height: u32,
}

/// Template synthesis parameters. Base sizes are given at `reference_class`
/// and scaled inversely with the class's representative depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateConfig {
    pub reference_class: DepthClass,
    pub min_size: u32,
    pub max_size: u32,
    pub categories: Vec<CategoryTemplateSpec>,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        let spec = |category: &str, base_width, base_height| CategoryTemplateSpec {
            category: category.into(),
            base_width,
            base_height,
        };
        TemplateConfig {
            reference_class: 8,
            min_size: 5,
            max_size: 51,
            categories: alloc::vec![
                spec("car", 21, 11),
                spec("human", 9, 27),
                spec("two-wheeler", 11, 21),
                spec("large-vehicle", 33, 17),
            ],
        }
    }
}

impl TemplateConfig {
    pub fn base_for(&self, category_name: &str) -> Result<(u32, u32)> {
        self.categories
            .iter()
            .find(|s| s.category == category_name)
            .map(|s| (s.base_width, s.base_height))
            .ok_or_else(|| Error::invalid(format!("unknown category {category_name}")))
    }

    /// Continuous scale factor for a depth class relative to the reference
    /// class, before rounding and clamping.
    pub fn scale_for(&self, depth_class: DepthClass, layering: &DepthLayering) -> Result<f64> {
        let reference = layering.midpoint(self.reference_class)?;
        Ok(reference / layering.midpoint(depth_class)?)
    }
}

/// Ideal direction pattern for one (category, depth class).
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub category: CategoryId,
    pub depth_class: DepthClass,
    pub width: usize,
    pub height: usize,
    /// Unit vector toward the center per cell (x right, y up); zero at the
    /// center cell.
    pub pattern: Vec<(f32, f32)>,
    /// In-template flags; all true for the rectangular templates built here.
    pub mask: Vec<bool>,
}

impl Template {
    pub fn half_extents(&self) -> (usize, usize) {
        ((self.width - 1) / 2, (self.height - 1) / 2)
    }

    pub fn pattern_at(&self, row: usize, col: usize) -> (f32, f32) {
        self.pattern[row * self.width + col]
    }
}

fn odd_clamped(raw: f64, min: u32, max: u32) -> usize {
    let mut v = libm::round(raw) as i64;
    v = v.clamp(min as i64, max as i64);
    if v % 2 == 0 {
        v += 1;
    }
    v.max(3) as usize
}

/// Builds the template for one category at one depth class. The base size at
/// the reference class is scaled by `midpoint(reference) / midpoint(class)`,
/// clamped to the configured bounds and forced odd so the center is a cell.
pub fn synthesize_template(
    category: CategoryId,
    depth_class: DepthClass,
    cfg: &TemplateConfig,
    labels: &LabelSet,
    layering: &DepthLayering,
) -> Result<Template> {
    let cat = labels
        .categories
        .get(category)
        .ok_or_else(|| Error::invalid(format!("unknown category id {category}")))?;
    let (bw, bh) = cfg.base_for(&cat.name)?;
    let scale = cfg.scale_for(depth_class, layering)?;
    let width = odd_clamped(bw as f64 * scale, cfg.min_size, cfg.max_size);
    let height = odd_clamped(bh as f64 * scale, cfg.min_size, cfg.max_size);

    let (cc, cr) = ((width - 1) / 2, (height - 1) / 2);
    let mut pattern = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            if r == cr && c == cc {
                pattern.push((0.0, 0.0));
                continue;
            }
            let dx = cc as f64 - c as f64;
            let dy = r as f64 - cr as f64; // image rows grow down, y grows up
            let len = libm::sqrt(dx * dx + dy * dy);
            pattern.push(((dx / len) as f32, (dy / len) as f32));
        }
    }
    Ok(Template {
        category,
        depth_class,
        width,
        height,
        pattern,
        mask: alloc::vec![true; width * height],
    })
}

/// NCC score map of one template over a direction field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub category: CategoryId,
    pub depth_class: DepthClass,
    pub template_width: usize,
    pub template_height: usize,
    pub scores: Raster<f32>,
}

/// NCC at a single pixel. Field vectors at cells where `category_ok` is false
/// (or outside the image) contribute zero; the window and the template
/// pattern are flattened to `2*w*h` samples and compared zero-mean,
/// unit-norm.
pub fn ncc_at(
    field: &DirectionField,
    category_ok: impl Fn(usize, usize) -> bool,
    t: &Template,
    row: usize,
    col: usize,
) -> f32 {
    let (hw, hh) = t.half_extents();
    let (iw, ih) = (field.width() as i64, field.height() as i64);
    let mut n = 0usize;
    let (mut sum_x, mut sum_t) = (0.0f64, 0.0f64);
    let (mut sq_x, mut sq_t) = (0.0f64, 0.0f64);
    let mut dot = 0.0f64;
    for tr in 0..t.height {
        let ir = row as i64 + tr as i64 - hh as i64;
        for tc in 0..t.width {
            if !t.mask[tr * t.width + tc] {
                continue;
            }
            let ic = col as i64 + tc as i64 - hw as i64;
            let (px, py) = t.pattern[tr * t.width + tc];
            let (vx, vy) = if ir >= 0 && ir < ih && ic >= 0 && ic < iw {
                let (r, c) = (ir as usize, ic as usize);
                if category_ok(r, c) {
                    field.vector(r, c)
                } else {
                    (0.0, 0.0)
                }
            } else {
                (0.0, 0.0)
            };
            let (px, py, vx, vy) = (px as f64, py as f64, vx as f64, vy as f64);
            n += 2;
            sum_x += vx + vy;
            sum_t += px + py;
            sq_x += vx * vx + vy * vy;
            sq_t += px * px + py * py;
            dot += vx * px + vy * py;
        }
    }
    let n = n as f64;
    let var_x = sq_x - sum_x * sum_x / n;
    let var_t = sq_t - sum_t * sum_t / n;
    if var_x <= 1e-12 || var_t <= 1e-12 {
        return SCORE_SENTINEL;
    }
    let ncc = (dot - sum_x * sum_t / n) / libm::sqrt(var_x * var_t);
    ncc.clamp(-1.0, 1.0) as f32
}

/// Full NCC score map of `t` over the field. `category_mask` flags pixels
/// whose predicted category matches the template's; vectors elsewhere are
/// zeroed out of each window. Borders are zero-padded.
pub fn ncc_score_map(
    field: &DirectionField,
    category_mask: &Raster<bool>,
    t: &Template,
) -> Result<ScoreMap> {
    let (w, h) = field.dims();
    if category_mask.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: category_mask.dims(),
        });
    }
    if t.width > w || t.height > h {
        return Err(Error::invalid(format!(
            "template {}x{} larger than image {w}x{h}",
            t.width, t.height
        )));
    }
    let mut scores = Raster::filled(w, h, SCORE_SENTINEL);
    for r in 0..h {
        for c in 0..w {
            let v = ncc_at(field, |rr, cc| *category_mask.get(rr, cc), t, r, c);
            scores.set(r, c, v);
        }
    }
    Ok(ScoreMap {
        category: t.category,
        depth_class: t.depth_class,
        template_width: t.width,
        template_height: t.height,
        scores,
    })
}

/// Per-pixel category lookup table derived from the semantic channel.
pub fn pixel_categories(triple: &ChannelTriple, labels: &LabelSet) -> Result<Vec<Option<CategoryId>>> {
    let mut by_label: Vec<Option<CategoryId>> = Vec::with_capacity(labels.labels.len());
    for l in &labels.labels {
        by_label.push(labels.category_of(l.id)?);
    }
    triple
        .semantic
        .data()
        .iter()
        .map(|&id| {
            by_label
                .get(id as usize)
                .copied()
                .ok_or_else(|| Error::invalid(format!("unregistered label id {id}")))
        })
        .collect()
}

/// One NCC map per (category, depth class) pair present in the channels.
///
/// Scores are computed only at pixels whose predicted category and depth
/// class select that map; every other pixel holds the sentinel. Center
/// finding reads each pixel's effective score from the map matching its
/// predicted depth class, so the skipped pixels are never consulted.
pub fn score_maps(
    triple: &ChannelTriple,
    field: &DirectionField,
    labels: &LabelSet,
    layering: &DepthLayering,
    cfg: &TemplateConfig,
) -> Result<Vec<ScoreMap>> {
    let (w, h) = triple.dims();
    if field.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: (w, h),
            got: field.dims(),
        });
    }
    let categories = pixel_categories(triple, labels)?;

    let mut present: Vec<(CategoryId, DepthClass)> = Vec::new();
    for (i, cat) in categories.iter().enumerate() {
        if let Some(cat) = *cat {
            let class = triple.depth.data()[i];
            if class != 0 && !present.contains(&(cat, class)) {
                present.push((cat, class));
            }
        }
    }
    present.sort_unstable();

    let mut maps = Vec::with_capacity(present.len());
    for (cat, class) in present {
        let t = synthesize_template(cat, class, cfg, labels, layering)?;
        if t.width > w || t.height > h {
            return Err(Error::invalid(format!(
                "template {}x{} for category {cat} class {class} larger than image {w}x{h}",
                t.width, t.height
            )));
        }
        let mut scores = Raster::filled(w, h, SCORE_SENTINEL);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if categories[i] != Some(cat) || triple.depth.data()[i] != class {
                    continue;
                }
                let v = ncc_at(field, |rr, cc| categories[rr * w + cc] == Some(cat), &t, r, c);
                scores.set(r, c, v);
            }
        }
        maps.push(ScoreMap {
            category: cat,
            depth_class: class,
            template_width: t.width,
            template_height: t.height,
            scores,
        });
    }
    Ok(maps)
}
