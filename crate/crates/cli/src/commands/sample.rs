//! `hypercs sample`: band-wise compressive sampling of an HSC video into an
//! HSM measurement file.

use std::path::PathBuf;

use clap::Args;

use hypercs_core::cube::{flatten, load_video};
use hypercs_core::sampling::{build_sampler, sample_cube, save_measurements, MeasurementVideo};

use crate::error::Result;
use crate::manifest::{checksum_outputs, OperatorParams, PipelineManifest, SampleStage};

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Input HSC video.
    pub video: PathBuf,

    /// Output HSM measurement file.
    #[arg(long)]
    pub out: PathBuf,

    /// Sampling rate k/n.
    #[arg(long, default_value_t = 0.10)]
    pub rate: f64,

    /// Operator seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Pipeline manifest to update.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: &SampleArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => {
            let m = PipelineManifest::load_or_default(path)?;
            m.verify_input(&args.video)?;
            Some(m)
        }
        None => None,
    };

    let video = load_video(&args.video)?;
    let n = video.n1() * video.n2();
    let op = build_sampler(n, args.rate, args.seed)?;
    let frames = video
        .frames()
        .iter()
        .map(|frame| sample_cube(&op, &flatten(frame)))
        .collect::<hypercs_core::Result<Vec<_>>>()?;
    let measurements = MeasurementVideo::new(n, args.seed, args.rate, frames)?;
    save_measurements(&measurements, &args.out)?;

    if let (Some(manifest_path), Some(manifest)) = (&args.manifest, manifest.as_mut()) {
        manifest.sample = Some(SampleStage {
            input: args.video.to_string_lossy().into_owned(),
            output: args.out.to_string_lossy().into_owned(),
            rows: video.n1(),
            cols: video.n2(),
            operator: OperatorParams {
                n,
                rate: args.rate,
                seed: args.seed,
            },
            checksums: checksum_outputs(&[args.out.as_path()])?,
        });
        manifest.save(manifest_path)?;
    }

    eprintln!(
        "sample: {} frames, k = {} of n = {} ({:.1}%) -> {}",
        video.frame_count(),
        op.k(),
        n,
        100.0 * op.k() as f64 / n as f64,
        args.out.display()
    );
    Ok(())
}
