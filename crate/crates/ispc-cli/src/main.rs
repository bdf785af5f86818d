use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ispc_core::corrupt::corrupt;
use ispc_core::direction::decode_field;
use ispc_core::metrics::{evaluate, MetricReport};
use ispc_core::pipeline::segment_scene;
use ispc_core::scene::ScoreVolume;
use ispc_core::{ChannelTriple, Raster};

use ispc_cli::config::{load_noise_spec, load_segment_config, SegmentConfig};
use ispc_cli::error::{CliError, Result};
use ispc_cli::{format, render, synth};

#[derive(Parser)]
#[command(name = "ispc", version, about = "Instance segmentation decoding pipeline")]
struct Cli {
    /// Worker thread cap; overrides the ISPC_THREADS environment variable.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode a ground-truth annotation into a channel triple.
    Encode {
        /// Annotation stem (reads <stem>.ins.ispc and <stem>.sem.ispc).
        annotation: PathBuf,
        /// JSON with per-instance depths in meters.
        depths: PathBuf,
        /// Output triple stem.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Decode channel triples into instance labelings.
    Segment {
        /// One or more triple stems.
        triples: Vec<PathBuf>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Output labeling stem (single input) or directory (multiple).
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare a predicted labeling against a ground-truth annotation.
    Evaluate {
        /// Predicted labeling stem.
        pred: PathBuf,
        /// Ground-truth annotation stem.
        gt: PathBuf,
        /// Output report JSON.
        #[arg(short, long)]
        out: PathBuf,
        /// Optional flat CSV with one metric per row.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Apply seeded noise to a channel triple.
    Corrupt {
        triple: PathBuf,
        /// Noise spec JSON.
        #[arg(short, long)]
        noise: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Rasterize a synthetic scene spec into an annotation plus triple.
    Synth {
        scene: PathBuf,
        /// Output stem for both the annotation and the triple.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render a labeling stem, a .dir.ispc file, or any single-channel
    /// .ispc raster to PNG.
    Render {
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn thread_count(jobs: Option<usize>) -> usize {
    jobs.or_else(|| {
        std::env::var("ISPC_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .filter(|&n| n > 0)
    .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn preset(
    config: Option<&Path>,
) -> Result<(
    SegmentConfig,
    ispc_core::LabelSet,
    ispc_core::DepthLayering,
    ispc_core::DirectionBinning,
)> {
    let cfg = load_segment_config(config)?;
    let labels = cfg.label_set()?;
    let layering = cfg.depth_layering()?;
    let bins = cfg.binning()?;
    Ok((cfg, labels, layering, bins))
}

fn run(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Pipeline(e.to_string()))?;

    match cli.cmd {
        Cmd::Encode {
            annotation,
            depths,
            out,
            config,
        } => {
            let (_, labels, layering, bins) = preset(config.as_deref())?;
            let mut ann = format::read_annotation_without_depths(&annotation)?;
            ann.instance_depths = format::read_depths_json(&depths)?.into_iter().collect();
            let triple = ispc_core::encode::encode_scene(&ann, &labels, &layering, &bins)?;
            format::write_triple(&out, &triple)
        }
        Cmd::Segment {
            triples,
            config,
            out,
        } => {
            if triples.is_empty() {
                return Err(CliError::Pipeline("no input triples given".into()));
            }
            let (cfg, labels, layering, bins) = preset(config.as_deref())?;
            let outputs: Vec<PathBuf> = if triples.len() == 1 {
                vec![out.clone()]
            } else {
                triples
                    .iter()
                    .map(|t| {
                        let name = t
                            .file_name()
                            .map(|n| n.to_string_lossy().into_owned())
                            .unwrap_or_else(|| "scene".into());
                        out.join(name)
                    })
                    .collect()
            };
            pool.install(|| {
                use rayon::prelude::*;
                triples
                    .par_iter()
                    .zip(outputs.par_iter())
                    .try_for_each(|(stem, out_stem)| {
                        let triple = format::read_triple(stem)?;
                        let labeling = segment_scene(
                            &triple,
                            &labels,
                            &layering,
                            &bins,
                            &cfg.template,
                            &cfg.pipeline,
                        )?;
                        format::write_labeling(out_stem, &labeling)
                    })
            })
        }
        Cmd::Evaluate {
            pred,
            gt,
            out,
            csv,
            config,
        } => {
            let (_, labels, _, _) = preset(config.as_deref())?;
            let labeling = format::read_labeling(&pred)?;
            let ann = format::read_annotation(&gt)?;
            let report = evaluate(&labeling, &ann, &labels)?;
            let json = serde_json::to_vec_pretty(&report)
                .map_err(|e| CliError::Pipeline(e.to_string()))?;
            format::write_atomic(&out, &json)?;
            if let Some(csv_path) = csv {
                format::write_atomic(&csv_path, report_csv(&report).as_bytes())?;
            }
            Ok(())
        }
        Cmd::Corrupt {
            triple,
            noise,
            out,
            config,
        } => {
            let (_, labels, layering, _) = preset(config.as_deref())?;
            let spec = load_noise_spec(&noise)?;
            let input = format::read_triple(&triple)?;
            let output = corrupt(&input, &spec, &labels, &layering)?;
            format::write_triple(&out, &output)
        }
        Cmd::Synth { scene, out } => {
            let spec = synth::load_scene_spec(&scene)?;
            let cfg = SegmentConfig {
                labels: spec.labels.clone(),
                layering: spec.layering.clone(),
                ..SegmentConfig::default()
            };
            let labels = cfg.label_set()?;
            let layering = cfg.depth_layering()?;
            let bins = cfg.binning()?;
            let (ann, triple) = synth::synthesize_scene(&spec, &labels, &layering, &bins)?;
            format::write_annotation(&out, &ann)?;
            format::write_triple(&out, &triple)
        }
        Cmd::Render { input, out } => do_render(&input, &out),
    }
}

fn do_render(input: &Path, out: &Path) -> Result<()> {
    let name = input.to_string_lossy();
    if name.ends_with(".dir.ispc") {
        let c = format::read_container(input)?;
        let volume = ScoreVolume::from_vec(c.width, c.height, c.channels, c.f32_values())
            .map_err(|e| CliError::format(format!("{}: {e}", input.display())))?;
        let triple = ChannelTriple {
            semantic: Raster::filled(c.width, c.height, 0),
            depth: Raster::filled(c.width, c.height, 0),
            direction_scores: volume,
        };
        let field = decode_field(&triple, &ispc_core::DirectionBinning::new(c.channels)?)?;
        return render::render_direction(&field, out);
    }
    if name.ends_with(".ispc") {
        let c = format::read_container(input)?;
        if c.channels != 1 {
            return Err(CliError::format(format!(
                "{}: can only render single-channel rasters",
                input.display()
            )));
        }
        let values: Vec<f32> = match c.kind {
            format::ElementKind::F32 => c.f32_values(),
            format::ElementKind::U8 => c.payload.iter().map(|&v| v as f32 / 255.0).collect(),
        };
        let raster = Raster::from_vec(c.width, c.height, values)
            .map_err(|e| CliError::format(format!("{}: {e}", input.display())))?;
        return render::render_scores(&raster, out);
    }
    // Otherwise treat the input as a labeling stem.
    let labeling = format::read_labeling(input)?;
    render::render_labeling(&labeling, out)
}

fn report_csv(report: &MetricReport) -> String {
    let mut rows = vec![("metric".to_string(), "value".to_string())];
    let json = serde_json::to_value(report).expect("report serializes");
    flatten_json("", &json, &mut rows);
    rows.iter()
        .map(|(k, v)| format!("{k},{v}\n"))
        .collect()
}

fn flatten_json(prefix: &str, value: &serde_json::Value, rows: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, v, rows);
            }
        }
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ispc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
