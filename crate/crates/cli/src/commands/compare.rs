//! `hypercs compare`: merge the two arms' count curves (and optionally
//! their separation gaps) into a comparison CSV and a summary.

use std::fs;
use std::path::PathBuf;

use clap::Args;

use crate::error::{CliError, Result};
use crate::manifest::{checksum_outputs, CompareStage, PipelineManifest};
use crate::util;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Counts CSV of the raw arm.
    pub counts_raw: PathBuf,

    /// Counts CSV of the reconstructed arm.
    pub counts_recon: PathBuf,

    /// Output comparison CSV (`frame,count_raw,count_recon`).
    #[arg(long)]
    pub out: PathBuf,

    /// Summary text file (key=value lines); also printed to stdout.
    #[arg(long)]
    pub summary: Option<PathBuf>,

    /// Gaps CSV of the raw arm.
    #[arg(long, requires = "gaps_recon")]
    pub gaps_raw: Option<PathBuf>,

    /// Gaps CSV of the reconstructed arm.
    #[arg(long, requires = "gaps_raw")]
    pub gaps_recon: Option<PathBuf>,

    /// Pipeline manifest to update.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn peak(rows: &[(usize, usize)]) -> (usize, usize) {
    let mut best = (0usize, 0usize);
    let mut first = true;
    for &(frame, count) in rows {
        if first || count > best.1 {
            best = (frame, count);
            first = false;
        }
    }
    best
}

pub fn run(args: &CompareArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => {
            let m = PipelineManifest::load_or_default(path)?;
            m.verify_input(&args.counts_raw)?;
            m.verify_input(&args.counts_recon)?;
            Some(m)
        }
        None => None,
    };

    let raw = util::read_counts_csv(&args.counts_raw)?;
    let recon = util::read_counts_csv(&args.counts_recon)?;
    if raw.len() != recon.len()
        || raw.iter().zip(&recon).any(|((fa, _), (fb, _))| fa != fb)
    {
        return Err(CliError::Dimension(format!(
            "count curves disagree on frames: {} has {} rows, {} has {}",
            args.counts_raw.display(),
            raw.len(),
            args.counts_recon.display(),
            recon.len()
        )));
    }

    let mut csv = String::from("frame,count_raw,count_recon\n");
    let mut frames_recon_above = 0usize;
    for ((frame, c_raw), (_, c_recon)) in raw.iter().zip(&recon) {
        csv.push_str(&format!("{frame},{c_raw},{c_recon}\n"));
        if c_recon > c_raw {
            frames_recon_above += 1;
        }
    }
    fs::write(&args.out, csv)
        .map_err(|e| CliError::Format(format!("cannot write {}: {e}", args.out.display())))?;

    let (peak_frame_raw, peak_count_raw) = peak(&raw);
    let (peak_frame_recon, peak_count_recon) = peak(&recon);

    let mut summary = String::new();
    summary.push_str(&format!("frames_total={}\n", raw.len()));
    summary.push_str(&format!("peak_frame_raw={peak_frame_raw}\n"));
    summary.push_str(&format!("peak_count_raw={peak_count_raw}\n"));
    summary.push_str(&format!("peak_frame_recon={peak_frame_recon}\n"));
    summary.push_str(&format!("peak_count_recon={peak_count_recon}\n"));
    summary.push_str(&format!("frames_recon_above_raw={frames_recon_above}\n"));

    if let (Some(gaps_raw_path), Some(gaps_recon_path)) = (&args.gaps_raw, &args.gaps_recon) {
        let gaps_raw = util::read_gaps_csv(gaps_raw_path)?;
        let gaps_recon = util::read_gaps_csv(gaps_recon_path)?;
        let mut compared = 0usize;
        let mut recon_wins = 0usize;
        let mut max_raw = f64::NEG_INFINITY;
        let mut max_recon = f64::NEG_INFINITY;
        let recon_by_frame: std::collections::BTreeMap<usize, f64> =
            gaps_recon.iter().cloned().collect();
        for &(frame, g_raw) in &gaps_raw {
            if let Some(&g_recon) = recon_by_frame.get(&frame) {
                compared += 1;
                if g_recon >= g_raw {
                    recon_wins += 1;
                }
                max_raw = max_raw.max(g_raw);
                max_recon = max_recon.max(g_recon);
            }
        }
        summary.push_str(&format!("gap_frames_compared={compared}\n"));
        summary.push_str(&format!("gap_recon_wins={recon_wins}\n"));
        if compared > 0 {
            summary.push_str(&format!("max_gap_raw={max_raw}\n"));
            summary.push_str(&format!("max_gap_recon={max_recon}\n"));
        }
    }

    print!("{summary}");
    let mut outputs = vec![args.out.clone()];
    if let Some(summary_path) = &args.summary {
        fs::write(summary_path, &summary).map_err(|e| {
            CliError::Format(format!("cannot write {}: {e}", summary_path.display()))
        })?;
        outputs.push(summary_path.clone());
    }

    if let (Some(manifest_path), Some(manifest)) = (&args.manifest, manifest.as_mut()) {
        let output_refs: Vec<&std::path::Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.compare = Some(CompareStage {
            counts_raw: args.counts_raw.to_string_lossy().into_owned(),
            counts_recon: args.counts_recon.to_string_lossy().into_owned(),
            output: args.out.to_string_lossy().into_owned(),
            summary: args
                .summary
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned()),
            checksums: checksum_outputs(&output_refs)?,
        });
        manifest.save(manifest_path)?;
    }
    Ok(())
}
