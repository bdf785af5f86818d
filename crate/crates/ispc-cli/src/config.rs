//! JSON configuration for the segment/corrupt workflows.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ispc_core::corrupt::NoiseSpec;
use ispc_core::pipeline::PipelineConfig;
use ispc_core::template::TemplateConfig;
use ispc_core::{DepthLayering, DirectionBinning, LabelSet};

use crate::error::{CliError, Result};

/// Full segmentation configuration. Every field has a default, so `{}` (or
/// an absent config file) selects the street-scene setup: the 19-label
/// registry with KITTI depth ranges and 8 direction bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub schema_version: u32,
    /// Label registry preset: "cityscapes" or "kitti".
    pub labels: String,
    /// Depth layering preset: "kitti" or "cityscapes".
    pub layering: String,
    pub n_direction_bins: usize,
    pub pipeline: PipelineConfig,
    pub template: TemplateConfig,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            schema_version: crate::format::SCHEMA_VERSION,
            labels: "cityscapes".into(),
            layering: "kitti".into(),
            n_direction_bins: 8,
            pipeline: PipelineConfig::default(),
            template: TemplateConfig::default(),
        }
    }
}

impl SegmentConfig {
    pub fn label_set(&self) -> Result<LabelSet> {
        match self.labels.as_str() {
            "cityscapes" => Ok(LabelSet::cityscapes()),
            "kitti" => Ok(LabelSet::kitti()),
            other => Err(CliError::format(format!("unknown label preset {other:?}"))),
        }
    }

    pub fn depth_layering(&self) -> Result<DepthLayering> {
        match self.layering.as_str() {
            "kitti" => Ok(DepthLayering::kitti()),
            "cityscapes" => Ok(DepthLayering::cityscapes()),
            other => Err(CliError::format(format!(
                "unknown layering preset {other:?}"
            ))),
        }
    }

    pub fn binning(&self) -> Result<DirectionBinning> {
        DirectionBinning::new(self.n_direction_bins)
            .map_err(|e| CliError::format(e.to_string()))
    }
}

fn check_version(version: u32, path: &Path) -> Result<()> {
    if version != crate::format::SCHEMA_VERSION {
        return Err(CliError::format(format!(
            "{}: unsupported schema_version {version}",
            path.display()
        )));
    }
    Ok(())
}

pub fn load_segment_config(path: Option<&Path>) -> Result<SegmentConfig> {
    let Some(path) = path else {
        return Ok(SegmentConfig::default());
    };
    let bytes =
        fs::read(path).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    let cfg: SegmentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    check_version(cfg.schema_version, path)?;
    Ok(cfg)
}

/// Noise configuration file: a NoiseSpec plus the schema version.
#[derive(Debug, Serialize, Deserialize)]
pub struct NoiseFile {
    #[serde(default = "default_version")]
    pub schema_version: u32,
    #[serde(flatten)]
    pub spec: NoiseSpec,
}

fn default_version() -> u32 {
    crate::format::SCHEMA_VERSION
}

pub fn load_noise_spec(path: &Path) -> Result<NoiseSpec> {
    let bytes =
        fs::read(path).map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    let file: NoiseFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::format(format!("{}: {e}", path.display())))?;
    check_version(file.schema_version, path)?;
    Ok(file.spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: SegmentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg.labels, "cityscapes");
        assert_eq!(cfg.layering, "kitti");
        assert_eq!(cfg.n_direction_bins, 8);
        assert_eq!(cfg.pipeline, PipelineConfig::default());
        cfg.label_set().unwrap();
        cfg.depth_layering().unwrap();
    }

    #[test]
    fn partial_override_keeps_rest() {
        let cfg: SegmentConfig =
            serde_json::from_str(r#"{"pipeline":{"fusion_enabled":false}}"#).unwrap();
        assert!(!cfg.pipeline.fusion_enabled);
        assert_eq!(cfg.pipeline.score_threshold, 0.3);
        assert_eq!(cfg.template, TemplateConfig::default());
    }

    #[test]
    fn bad_preset_rejected() {
        let cfg: SegmentConfig = serde_json::from_str(r#"{"labels":"voc"}"#).unwrap();
        assert!(cfg.label_set().is_err());
    }

    #[test]
    fn noise_file_flattens_spec() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("noise.json");
        std::fs::write(
            &path,
            r#"{"schema_version":1,"direction_flip_p":0.25,"seed":7}"#,
        )
        .unwrap();
        let spec = load_noise_spec(&path).unwrap();
        assert_eq!(spec.direction_flip_p, 0.25);
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("cfg.json");
        std::fs::write(&path, r#"{"schema_version":99}"#).unwrap();
        assert!(load_segment_config(Some(&path)).is_err());
    }
}
