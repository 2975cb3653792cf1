//! `hypercs synth`: generate a scenario video, its ground truth, the
//! signature file, and a config echo.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;

use hypercs_core::cube::save_video;
use hypercs_core::synth::{default_scenario, generate_video, SynthConfig};

use crate::error::{CliError, Result};
use crate::manifest::{checksum_outputs, PipelineManifest, SynthStage};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML scenario description; defaults to the built-in 64x64x20,
    /// 140-frame scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory receiving video.hsc, truth.hsc, signature.txt, and
    /// synth-config.toml.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    /// Pipeline manifest to update.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Format(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text).map_err(|e| {
                CliError::Format(format!("malformed config {}: {e}", path.display()))
            })?
        }
        None => default_scenario(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Format(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let video_path = args.out_dir.join("video.hsc");
    let truth_path = args.out_dir.join("truth.hsc");
    let signature_path = args.out_dir.join("signature.txt");
    let config_path = args.out_dir.join("synth-config.toml");

    let (video, truth) = generate_video(&cfg)?;
    save_video(&video, &video_path)?;
    save_video(&truth.to_video()?, &truth_path)?;
    crate::util::save_signature(&cfg.unit_signature().values, &signature_path)?;
    let echo = toml::to_string_pretty(&cfg)
        .map_err(|e| CliError::Format(format!("cannot serialize config: {e}")))?;
    fs::write(&config_path, echo)
        .map_err(|e| CliError::Format(format!("cannot write {}: {e}", config_path.display())))?;

    if let Some(manifest_path) = &args.manifest {
        let mut manifest = PipelineManifest::load_or_default(manifest_path)?;
        manifest.synth = Some(SynthStage {
            config: cfg.clone(),
            video: video_path.to_string_lossy().into_owned(),
            truth: truth_path.to_string_lossy().into_owned(),
            signature: signature_path.to_string_lossy().into_owned(),
            checksums: checksum_outputs(&[
                video_path.as_path(),
                truth_path.as_path(),
                signature_path.as_path(),
                config_path.as_path(),
            ])?,
        });
        manifest.save(manifest_path)?;
    }

    eprintln!(
        "synth: {} frames of {}x{}x{} (seed {}, peak strength {}) -> {}",
        cfg.frame_count,
        cfg.n1,
        cfg.n2,
        cfg.bands,
        cfg.seed,
        cfg.plume.peak_strength,
        video_path.display()
    );
    Ok(())
}

/// Resolve paths written by `run` for tests and downstream stages.
pub fn output_paths(out_dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (
        out_dir.join("video.hsc"),
        out_dir.join("truth.hsc"),
        out_dir.join("signature.txt"),
    )
}
