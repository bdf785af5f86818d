//! Synthetic scene fixtures: declarative shape specs rasterized in
//! painter's order, plus a seeded random scene generator.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ispc_core::encode::{encode_scene, InstanceAnnotation};
use ispc_core::rng::SplitMix64;
use ispc_core::scene::LabelId;
use ispc_core::template::{synthesize_template, TemplateConfig};
use ispc_core::{ChannelTriple, DepthLayering, DirectionBinning, LabelSet, Raster};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Rectangle,
    Ellipse,
    /// Rectangle with its upper-right quadrant removed.
    LShape,
}

/// One synthetic instance. `row`/`col` give the top-left corner of the
/// bounding box. List order is occlusion order: later shapes paint over
/// earlier ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub label: String,
    pub depth_m: f64,
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_labels")]
    pub labels: String,
    #[serde(default = "default_layering")]
    pub layering: String,
    pub instances: Vec<ShapeSpec>,
}

fn default_version() -> u32 {
    crate::format::SCHEMA_VERSION
}

fn default_labels() -> String {
    "cityscapes".into()
}

fn default_layering() -> String {
    "kitti".into()
}

pub fn load_scene_spec(path: &Path) -> Result<SceneSpec> {
    let bytes =
        fs::read(path).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    let spec: SceneSpec = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    if spec.schema_version != crate::format::SCHEMA_VERSION {
        return Err(CliError::format(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            spec.schema_version
        )));
    }
    Ok(spec)
}

fn covers(shape: Shape, h: usize, w: usize, r: usize, c: usize) -> bool {
    match shape {
        Shape::Rectangle => true,
        Shape::Ellipse => {
            let cy = (h as f64 - 1.0) / 2.0;
            let cx = (w as f64 - 1.0) / 2.0;
            let ry = (h as f64 / 2.0).max(0.5);
            let rx = (w as f64 / 2.0).max(0.5);
            let dy = (r as f64 - cy) / ry;
            let dx = (c as f64 - cx) / rx;
            dy * dy + dx * dx <= 1.0
        }
        Shape::LShape => !(r < h / 2 && c >= w / 2),
    }
}

/// Rasterizes a scene spec into a ground-truth annotation. Instances that
/// end up fully occluded are dropped; surviving instances are renumbered
/// 1..n in listing order.
pub fn rasterize_scene(spec: &SceneSpec, labels: &LabelSet) -> Result<InstanceAnnotation> {
    if spec.width == 0 || spec.height == 0 {
        return Err(CliError::Pipeline("canvas must be non-empty".into()));
    }
    let mut ids = Raster::filled(spec.width, spec.height, 0u32);
    let mut sem: Raster<LabelId> = Raster::filled(spec.width, spec.height, labels.background_id);
    let mut painted: Vec<(u32, LabelId, f64)> = Vec::new();
    for (i, inst) in spec.instances.iter().enumerate() {
        let label = labels.label_by_name(&inst.label).ok_or_else(|| {
            CliError::Pipeline(format!("instance {i}: unknown label {:?}", inst.label))
        })?;
        if !(inst.depth_m > 0.0) || !inst.depth_m.is_finite() {
            return Err(CliError::Pipeline(format!(
                "instance {i}: depth must be positive, got {}",
                inst.depth_m
            )));
        }
        if inst.width == 0
            || inst.height == 0
            || inst.row + inst.height > spec.height
            || inst.col + inst.width > spec.width
        {
            return Err(CliError::Pipeline(format!(
                "instance {i}: shape exceeds the canvas"
            )));
        }
        let tmp_id = i as u32 + 1;
        for r in 0..inst.height {
            for c in 0..inst.width {
                if covers(inst.shape, inst.height, inst.width, r, c) {
                    ids.set(inst.row + r, inst.col + c, tmp_id);
                    sem.set(inst.row + r, inst.col + c, label);
                }
            }
        }
        painted.push((tmp_id, label, inst.depth_m));
    }
    // Drop fully occluded instances and renumber the survivors densely.
    let mut remap = vec![0u32; painted.len() + 1];
    let mut depths = std::collections::BTreeMap::new();
    let mut next = 1u32;
    for &(tmp_id, _, depth) in &painted {
        if ids.data().iter().any(|&v| v == tmp_id) {
            remap[tmp_id as usize] = next;
            depths.insert(next, depth);
            next += 1;
        }
    }
    for v in ids.data_mut() {
        if *v != 0 {
            *v = remap[*v as usize];
        }
    }
    Ok(InstanceAnnotation {
        instance_ids: ids,
        semantic: sem,
        instance_depths: depths.into_iter().collect(),
    })
}

/// Rasterizes and encodes in one step.
pub fn synthesize_scene(
    spec: &SceneSpec,
    labels: &LabelSet,
    layering: &DepthLayering,
    bins: &DirectionBinning,
) -> Result<(InstanceAnnotation, ChannelTriple)> {
    let ann = rasterize_scene(spec, labels)?;
    let triple = encode_scene(&ann, labels, layering, bins)?;
    Ok((ann, triple))
}

/// Deterministic random scene: `n` instances over all 4 categories and the
/// full depth-class range, placed on a jittered grid so that any two
/// instances are separated by more than the widest template. Instances take
/// the template footprint of their (category, class) so the matcher has a
/// well-posed target; depths sit at class midpoints.
pub fn random_scene_spec(
    seed: u64,
    n: usize,
    labels: &LabelSet,
    layering: &DepthLayering,
    tcfg: &TemplateConfig,
) -> SceneSpec {
    let mut rng = SplitMix64::new(seed);
    // Representative label per category (first member).
    let cat_labels: Vec<String> = labels
        .categories
        .iter()
        .map(|c| labels.labels[c.members[0] as usize].name.clone())
        .collect();
    let max_dim = tcfg.max_size as usize;
    // Grid pitch leaves more than one max template width between footprints.
    let pitch = max_dim * 2 + 10;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols.max(1)).max(1);
    let width = cols * pitch + pitch;
    let height = rows * pitch + pitch;

    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let cat = (rng.next_u64() % labels.categories.len() as u64) as usize;
        let class = (rng.next_u64() % layering.n_classes() as u64) as u8 + 1;
        let t = synthesize_template(cat, class, tcfg, labels, layering)
            .expect("preset templates synthesize");
        let shape = match rng.next_u64() % 3 {
            0 => Shape::Rectangle,
            1 => Shape::Ellipse,
            _ => Shape::Rectangle, // bias toward rectangles: crisper centers
        };
        let (gr, gc) = (i / cols, i % cols);
        let cell_r = gr * pitch + pitch / 2;
        let cell_c = gc * pitch + pitch / 2;
        let jitter = |rng: &mut SplitMix64| (rng.next_u64() % 7) as usize;
        instances.push(ShapeSpec {
            shape,
            label: cat_labels[cat].clone(),
            depth_m: layering.midpoint(class).expect("valid class"),
            row: cell_r + jitter(&mut rng),
            col: cell_c + jitter(&mut rng),
            height: t.height,
            width: t.width,
        });
    }
    SceneSpec {
        schema_version: crate::format::SCHEMA_VERSION,
        width,
        height,
        labels: "cityscapes".into(),
        layering: "kitti".into(),
        instances,
    }
}
