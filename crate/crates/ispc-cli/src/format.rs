//! The ISPC1 raster container and the on-disk layouts built from it.
//!
//! A container holds one channel-interleaved, row-major raster:
//! magic `ISPC1`, width (u32 LE), height (u32 LE), channel count (u16 LE),
//! element kind (u8: 0 = u8, 1 = f32 LE), then the payload.
//!
//! Scenes live under a shared path stem:
//! - channel triple: `<stem>.sem.ispc`, `<stem>.dep.ispc`, `<stem>.dir.ispc`
//! - instance ids (annotations and labelings): `<stem>.ins.ispc` (f32 ids)
//! - sidecar JSON: `<stem>.json` (ground-truth depths or instance records)
//!
//! All writes go through a temp file plus rename, so interrupted runs never
//! leave a corrupt artifact at the destination.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ispc_core::encode::InstanceAnnotation;
use ispc_core::pipeline::{InstanceRecord, SceneLabeling};
use ispc_core::scene::ScoreVolume;
use ispc_core::{ChannelTriple, PixelCoord, Raster};

use crate::error::{CliError, Result};

const MAGIC: &[u8; 5] = b"ISPC1";
const HEADER_LEN: usize = 5 + 4 + 4 + 2 + 1;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    U8,
    F32,
}

impl ElementKind {
    fn code(self) -> u8 {
        match self {
            ElementKind::U8 => 0,
            ElementKind::F32 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            ElementKind::U8 => 1,
            ElementKind::F32 => 4,
        }
    }

    fn from_code(code: u8, path: &Path) -> Result<Self> {
        match code {
            0 => Ok(ElementKind::U8),
            1 => Ok(ElementKind::F32),
            other => Err(CliError::format(format!(
                "{}: unknown element kind {other}",
                path.display()
            ))),
        }
    }
}

/// One decoded container.
pub struct Container {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub kind: ElementKind,
    pub payload: Vec<u8>,
}

impl Container {
    pub fn f32_values(&self) -> Vec<f32> {
        self.payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    }
}

/// Writes bytes atomically: temp file in the destination directory, then
/// rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::format(format!("{}: {e}", dir.display())))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::format(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", file_name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::format(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::format(format!("{}: {e}", path.display()))
    })?;
    Ok(())
}

pub fn write_container(
    path: &Path,
    width: usize,
    height: usize,
    channels: usize,
    kind: ElementKind,
    payload: &[u8],
) -> Result<()> {
    let expected = width * height * channels * kind.size();
    assert_eq!(payload.len(), expected, "container payload length");
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(width as u32).to_le_bytes());
    bytes.extend_from_slice(&(height as u32).to_le_bytes());
    bytes.extend_from_slice(&(channels as u16).to_le_bytes());
    bytes.push(kind.code());
    bytes.extend_from_slice(payload);
    write_atomic(path, &bytes)
}

pub fn read_container(path: &Path) -> Result<Container> {
    let bytes =
        fs::read(path).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(CliError::format(format!(
            "{}: missing ISPC1 magic",
            path.display()
        )));
    }
    let width = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let channels = u16::from_le_bytes(bytes[13..15].try_into().unwrap()) as usize;
    let kind = ElementKind::from_code(bytes[15], path)?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(kind.size()))
        .ok_or_else(|| CliError::format(format!("{}: header overflow", path.display())))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(CliError::format(format!(
            "{}: payload is {} bytes, header implies {expected}",
            path.display(),
            payload.len()
        )));
    }
    Ok(Container {
        width,
        height,
        channels,
        kind,
        payload: payload.to_vec(),
    })
}

fn suffixed(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn semantic_path(stem: &Path) -> PathBuf {
    suffixed(stem, ".sem.ispc")
}

pub fn depth_path(stem: &Path) -> PathBuf {
    suffixed(stem, ".dep.ispc")
}

pub fn direction_path(stem: &Path) -> PathBuf {
    suffixed(stem, ".dir.ispc")
}

pub fn instances_path(stem: &Path) -> PathBuf {
    suffixed(stem, ".ins.ispc")
}

pub fn json_path(stem: &Path) -> PathBuf {
    suffixed(stem, ".json")
}

fn read_u8_plane(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let c = read_container(path)?;
    if c.kind != ElementKind::U8 || c.channels != 1 {
        return Err(CliError::format(format!(
            "{}: expected a single u8 channel",
            path.display()
        )));
    }
    Ok((c.width, c.height, c.payload))
}

/// Writes the three channel files of a triple under one stem.
pub fn write_triple(stem: &Path, triple: &ChannelTriple) -> Result<()> {
    let (w, h) = triple.dims();
    write_container(
        &semantic_path(stem),
        w,
        h,
        1,
        ElementKind::U8,
        triple.semantic.data(),
    )?;
    write_container(
        &depth_path(stem),
        w,
        h,
        1,
        ElementKind::U8,
        triple.depth.data(),
    )?;
    let dir_bytes: Vec<u8> = triple
        .direction_scores
        .data()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    write_container(
        &direction_path(stem),
        w,
        h,
        triple.direction_scores.n_bins(),
        ElementKind::F32,
        &dir_bytes,
    )
}

/// Reads a triple back; the three files must agree on dimensions.
pub fn read_triple(stem: &Path) -> Result<ChannelTriple> {
    let sem_path = semantic_path(stem);
    let dep_path = depth_path(stem);
    let dir_path = direction_path(stem);
    let (sw, sh, sem) = read_u8_plane(&sem_path)?;
    let (dw, dh, dep) = read_u8_plane(&dep_path)?;
    if (sw, sh) != (dw, dh) {
        return Err(CliError::format(format!(
            "dimension mismatch: {} is {sw}x{sh}, {} is {dw}x{dh}",
            sem_path.display(),
            dep_path.display()
        )));
    }
    let dir = read_container(&dir_path)?;
    if (dir.width, dir.height) != (sw, sh) {
        return Err(CliError::format(format!(
            "dimension mismatch: {} is {sw}x{sh}, {} is {}x{}",
            sem_path.display(),
            dir_path.display(),
            dir.width,
            dir.height
        )));
    }
    if dir.kind != ElementKind::F32 {
        return Err(CliError::format(format!(
            "{}: direction scores must be f32",
            dir_path.display()
        )));
    }
    let volume = ScoreVolume::from_vec(sw, sh, dir.channels, dir.f32_values())
        .map_err(|e| CliError::format(format!("{}: {e}", dir_path.display())))?;
    Ok(ChannelTriple {
        semantic: Raster::from_vec(sw, sh, sem)
            .map_err(|e| CliError::format(format!("{}: {e}", sem_path.display())))?,
        depth: Raster::from_vec(dw, dh, dep)
            .map_err(|e| CliError::format(format!("{}: {e}", dep_path.display())))?,
        direction_scores: volume,
    })
}

fn write_instance_ids(path: &Path, ids: &Raster<u32>) -> Result<()> {
    let (w, h) = ids.dims();
    let bytes: Vec<u8> = ids
        .data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    write_container(path, w, h, 1, ElementKind::F32, &bytes)
}

fn read_instance_ids(path: &Path) -> Result<Raster<u32>> {
    let c = read_container(path)?;
    if c.kind != ElementKind::F32 || c.channels != 1 {
        return Err(CliError::format(format!(
            "{}: expected a single f32 channel",
            path.display()
        )));
    }
    let mut ids = Vec::with_capacity(c.width * c.height);
    for v in c.f32_values() {
        if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
            return Err(CliError::format(format!(
                "{}: instance id {v} is not a non-negative integer",
                path.display()
            )));
        }
        ids.push(v as u32);
    }
    Raster::from_vec(c.width, c.height, ids)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

/// Sidecar JSON for a ground-truth annotation stem.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotationSidecar {
    pub schema_version: u32,
    /// Instance id -> metric depth in meters.
    pub depths: BTreeMap<u32, f64>,
}

/// Writes `<stem>.ins.ispc`, `<stem>.sem.ispc`, and `<stem>.json`.
pub fn write_annotation(stem: &Path, ann: &InstanceAnnotation) -> Result<()> {
    write_instance_ids(&instances_path(stem), &ann.instance_ids)?;
    let (w, h) = ann.dims();
    write_container(
        &semantic_path(stem),
        w,
        h,
        1,
        ElementKind::U8,
        ann.semantic.data(),
    )?;
    let sidecar = AnnotationSidecar {
        schema_version: SCHEMA_VERSION,
        depths: ann.instance_depths.iter().map(|(&k, &v)| (k, v)).collect(),
    };
    let json = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| CliError::format(e.to_string()))?;
    write_atomic(&json_path(stem), &json)
}

pub fn read_depths_json(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let bytes =
        fs::read(path).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    // Either the annotation sidecar shape or a bare id -> depth map.
    if let Ok(sidecar) = serde_json::from_slice::<AnnotationSidecar>(&bytes) {
        return Ok(sidecar.depths);
    }
    serde_json::from_slice::<BTreeMap<u32, f64>>(&bytes)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))
}

/// Reads `<stem>.ins.ispc` and `<stem>.sem.ispc`, leaving depths empty.
pub fn read_annotation_without_depths(stem: &Path) -> Result<InstanceAnnotation> {
    let ins_path = instances_path(stem);
    let sem_path = semantic_path(stem);
    let ids = read_instance_ids(&ins_path)?;
    let (sw, sh, sem) = read_u8_plane(&sem_path)?;
    if ids.dims() != (sw, sh) {
        return Err(CliError::format(format!(
            "dimension mismatch: {} is {}x{}, {} is {sw}x{sh}",
            ins_path.display(),
            ids.dims().0,
            ids.dims().1,
            sem_path.display()
        )));
    }
    Ok(InstanceAnnotation {
        instance_ids: ids,
        semantic: Raster::from_vec(sw, sh, sem)
            .map_err(|e| CliError::format(format!("{}: {e}", sem_path.display())))?,
        instance_depths: BTreeMap::new(),
    })
}

pub fn read_annotation(stem: &Path) -> Result<InstanceAnnotation> {
    let mut ann = read_annotation_without_depths(stem)?;
    ann.instance_depths = read_depths_json(&json_path(stem))?.into_iter().collect();
    Ok(ann)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordJson {
    pub id: u32,
    pub label: u8,
    pub depth_m: f64,
    pub pixel_count: usize,
    pub score: f32,
    pub center_col: i32,
    pub center_row: i32,
}

/// Sidecar JSON for a labeling stem.
#[derive(Debug, Serialize, Deserialize)]
pub struct LabelingSidecar {
    pub schema_version: u32,
    pub records: Vec<RecordJson>,
}

/// Writes `<stem>.ins.ispc`, `<stem>.sem.ispc`, and `<stem>.json`.
pub fn write_labeling(stem: &Path, labeling: &SceneLabeling) -> Result<()> {
    write_instance_ids(&instances_path(stem), &labeling.instance_ids)?;
    let (w, h) = labeling.dims();
    write_container(
        &semantic_path(stem),
        w,
        h,
        1,
        ElementKind::U8,
        labeling.background_semantic.data(),
    )?;
    let sidecar = LabelingSidecar {
        schema_version: SCHEMA_VERSION,
        records: labeling
            .records
            .iter()
            .map(|r| RecordJson {
                id: r.id,
                label: r.label,
                depth_m: r.depth_m,
                pixel_count: r.pixel_count,
                score: r.score,
                center_col: r.center.col,
                center_row: r.center.row,
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&sidecar)
        .map_err(|e| CliError::format(e.to_string()))?;
    write_atomic(&json_path(stem), &json)
}

pub fn read_labeling(stem: &Path) -> Result<SceneLabeling> {
    let ins_path = instances_path(stem);
    let sem_path = semantic_path(stem);
    let ids = read_instance_ids(&ins_path)?;
    let (sw, sh, sem) = read_u8_plane(&sem_path)?;
    if ids.dims() != (sw, sh) {
        return Err(CliError::format(format!(
            "dimension mismatch: {} is {}x{}, {} is {sw}x{sh}",
            ins_path.display(),
            ids.dims().0,
            ids.dims().1,
            sem_path.display()
        )));
    }
    let json = json_path(stem);
    let bytes =
        fs::read(&json).map_err(|e| CliError::format(format!("{}: {e}", json.display())))?;
    let sidecar: LabelingSidecar = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::format(format!("{}: {e}", json.display())))?;
    Ok(SceneLabeling {
        instance_ids: ids,
        records: sidecar
            .records
            .into_iter()
            .map(|r| InstanceRecord {
                id: r.id,
                label: r.label,
                depth_m: r.depth_m,
                pixel_count: r.pixel_count,
                score: r.score,
                center: PixelCoord::new(r.center_col, r.center_row),
            })
            .collect(),
        background_semantic: Raster::from_vec(sw, sh, sem)
            .map_err(|e| CliError::format(format!("{}: {e}", sem_path.display())))?,
    })
}
