//! `hypercs reconstruct`: split Bregman reconstruction of an HSM file back
//! into an HSC video.

use std::path::PathBuf;

use clap::Args;

use hypercs_core::cube::{save_video, unflatten, CubeVideo};
use hypercs_core::sampling::load_measurements;
use hypercs_core::solver::{reconstruct_cube, SolverConfig};

use crate::error::{CliError, Result};
use crate::manifest::{checksum_outputs, PipelineManifest, ReconstructStage};

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Input HSM measurement file.
    pub measurements: PathBuf,

    /// Output HSC video.
    #[arg(long)]
    pub out: PathBuf,

    /// Spatial rows of the original video (defaults to the manifest's
    /// sample stage).
    #[arg(long)]
    pub rows: Option<usize>,

    /// Spatial columns of the original video (defaults to the manifest's
    /// sample stage).
    #[arg(long)]
    pub cols: Option<usize>,

    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,

    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,

    #[arg(long, default_value_t = 200)]
    pub max_outer: usize,

    #[arg(long, default_value_t = 2)]
    pub max_inner: usize,

    #[arg(long, default_value_t = 1e-6)]
    pub tol_constraint: f64,

    #[arg(long, default_value_t = 1e-8)]
    pub tol_change: f64,

    /// Fail (exit 5) if any band does not reach the constraint tolerance.
    #[arg(long)]
    pub strict: bool,

    /// Pipeline manifest to update.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: &ReconstructArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => {
            let m = PipelineManifest::load_or_default(path)?;
            m.verify_input(&args.measurements)?;
            Some(m)
        }
        None => None,
    };

    let (rows, cols) = match (args.rows, args.cols) {
        (Some(r), Some(c)) => (r, c),
        _ => {
            let sample = manifest
                .as_ref()
                .and_then(|m| m.sample.as_ref())
                .ok_or_else(|| {
                    CliError::Format(
                        "spatial shape unknown: pass --rows/--cols or a manifest whose sample \
                         stage recorded them"
                            .into(),
                    )
                })?;
            (
                args.rows.unwrap_or(sample.rows),
                args.cols.unwrap_or(sample.cols),
            )
        }
    };

    let measurements = load_measurements(&args.measurements)?;
    if rows * cols != measurements.n {
        return Err(CliError::Dimension(format!(
            "{rows}x{cols} = {} does not match the measurement length n = {}",
            rows * cols,
            measurements.n
        )));
    }
    let op = measurements.rebuild_operator()?;
    let cfg = SolverConfig {
        mu: args.mu,
        lambda: args.lambda,
        max_outer: args.max_outer,
        max_inner: args.max_inner,
        tol_constraint: args.tol_constraint,
        tol_change: args.tol_change,
    };
    cfg.validate()?;

    let total_frames = measurements.frames.len();
    let mut frames = Vec::with_capacity(total_frames);
    let mut converged_bands = 0usize;
    let mut total_bands = 0usize;
    for (t, frame) in measurements.frames.iter().enumerate() {
        let (flat, reports) = reconstruct_cube(frame, &op, &cfg)?;
        converged_bands += reports.iter().filter(|r| r.converged).count();
        total_bands += reports.len();
        frames.push(unflatten(&flat, rows, cols)?);
        if (t + 1) % 10 == 0 || t + 1 == total_frames {
            eprintln!("reconstruct: frame {}/{total_frames}", t + 1);
        }
    }
    let video = CubeVideo::new(frames)?;
    save_video(&video, &args.out)?;

    if converged_bands < total_bands {
        eprintln!(
            "reconstruct: {} of {total_bands} bands stopped at max_outer without reaching \
             the constraint tolerance",
            total_bands - converged_bands
        );
        if args.strict {
            return Err(CliError::NonConvergence {
                unconverged: total_bands - converged_bands,
                total: total_bands,
            });
        }
    }

    if let (Some(manifest_path), Some(manifest)) = (&args.manifest, manifest.as_mut()) {
        manifest.reconstruct = Some(ReconstructStage {
            input: args.measurements.to_string_lossy().into_owned(),
            output: args.out.to_string_lossy().into_owned(),
            rows,
            cols,
            solver: cfg,
            converged_bands,
            total_bands,
            checksums: checksum_outputs(&[args.out.as_path()])?,
        });
        manifest.save(manifest_path)?;
    }

    eprintln!(
        "reconstruct: {total_frames} frames, {converged_bands}/{total_bands} bands converged -> {}",
        args.out.display()
    );
    Ok(())
}
