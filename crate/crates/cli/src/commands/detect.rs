//! `hypercs detect`: score one pipeline arm (raw or reconstructed video)
//! with the configured statistic, calibrate its threshold on designated
//! background frames, and emit counts, histogram, optional gaps, and a
//! metadata sidecar.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use hypercs_core::cube::load_video;
use hypercs_core::detection::{detect_video, histogram, separation_gap};
use hypercs_core::synth::MASK_FRACTION;
use hypercs_core::{Centering, DetectionConfig, Spectrum, Statistic};

use crate::error::{CliError, Result};
use crate::manifest::{checksum_outputs, DetectStage, PipelineManifest};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    Ace,
    Bulk,
    BulkPersistence,
}

impl From<StatisticArg> for Statistic {
    fn from(v: StatisticArg) -> Self {
        match v {
            StatisticArg::Ace => Statistic::Ace,
            StatisticArg::Bulk => Statistic::Bulk,
            StatisticArg::BulkPersistence => Statistic::BulkPersistence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CenteringArg {
    Demeaned,
    Raw,
}

impl From<CenteringArg> for Centering {
    fn from(v: CenteringArg) -> Self {
        match v {
            CenteringArg::Demeaned => Centering::Demeaned,
            CenteringArg::Raw => Centering::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input HSC video (one pipeline arm).
    pub video: PathBuf,

    /// Target signature file (one float per line, length = bands).
    #[arg(long)]
    pub signature: PathBuf,

    /// Chemical-free frames for the background model and threshold,
    /// e.g. `0..20` or `0..10,120..140`.
    #[arg(long)]
    pub background_frames: String,

    /// Output counts CSV (`frame,count`).
    #[arg(long)]
    pub out_counts: PathBuf,

    /// Output histogram CSV (`bin_left,bin_right,count`).
    #[arg(long)]
    pub out_histogram: Option<PathBuf>,

    /// Frame to histogram; defaults to the frame with the highest count
    /// (lowest index on ties).
    #[arg(long)]
    pub histogram_frame: Option<usize>,

    #[arg(long, default_value_t = 50)]
    pub histogram_bins: usize,

    /// Metadata sidecar (threshold and model parameters).
    #[arg(long)]
    pub out_meta: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = StatisticArg::BulkPersistence)]
    pub statistic: StatisticArg,

    /// Bulk-coherence neighborhood radius (window is (2r+1) x (2r+1)).
    #[arg(long, default_value_t = 1)]
    pub radius: usize,

    /// Persistence run length.
    #[arg(long, default_value_t = 5)]
    pub persistence: usize,

    /// Threshold margin: threshold = (1 + delta) * background max.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,

    #[arg(long, value_enum, default_value_t = CenteringArg::Demeaned)]
    pub centering: CenteringArg,

    /// Ground-truth concentration video (1-band HSC) for separation gaps.
    #[arg(long, requires = "truth_kappa")]
    pub truth: Option<PathBuf>,

    /// Peak strength used to generate the truth video; the plume mask is
    /// alpha > 0.05 * kappa.
    #[arg(long)]
    pub truth_kappa: Option<f64>,

    /// Gaps CSV (`frame,gap`), one row per frame with both classes present.
    #[arg(long, requires = "truth")]
    pub out_gaps: Option<PathBuf>,

    /// Label for this arm in the manifest (defaults to the video file
    /// stem).
    #[arg(long)]
    pub arm: Option<String>,

    /// Pipeline manifest to update.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: &DetectArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => {
            let m = PipelineManifest::load_or_default(path)?;
            m.verify_input(&args.video)?;
            m.verify_input(&args.signature)?;
            Some(m)
        }
        None => None,
    };

    let video = load_video(&args.video)?;
    let signature = Spectrum::new(util::load_signature(&args.signature)?);
    let background = util::parse_frame_set(&args.background_frames)?;
    let cfg = DetectionConfig {
        neighborhood_radius: args.radius,
        persistence_length: args.persistence,
        threshold_margin: args.delta,
        statistic: args.statistic.into(),
        centering: args.centering.into(),
    };

    let detection = detect_video(&video, &signature, &background, &cfg)?;
    util::write_counts_csv(detection.series.counts(), &args.out_counts)?;

    let mut outputs: Vec<PathBuf> = vec![args.out_counts.clone()];

    if let Some(hist_path) = &args.out_histogram {
        let frame = match args.histogram_frame {
            Some(t) => {
                if t >= video.frame_count() {
                    return Err(CliError::BadArgs(format!(
                        "histogram frame {t} out of range ({} frames)",
                        video.frame_count()
                    )));
                }
                t
            }
            None => {
                let counts = detection.series.counts();
                counts
                    .iter()
                    .enumerate()
                    .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            }
        };
        let counts = histogram(detection.series.map(frame), args.histogram_bins)?;
        let mut text = String::from("bin_left,bin_right,count\n");
        let bins = args.histogram_bins as f64;
        for (i, c) in counts.iter().enumerate() {
            text.push_str(&format!("{},{},{c}\n", i as f64 / bins, (i + 1) as f64 / bins));
        }
        fs::write(hist_path, text)
            .map_err(|e| CliError::Format(format!("cannot write {}: {e}", hist_path.display())))?;
        outputs.push(hist_path.clone());
    }

    let mut gaps_written = None;
    if let (Some(truth_path), Some(kappa)) = (&args.truth, args.truth_kappa) {
        let truth = load_video(truth_path)?;
        if truth.bands() != 1 {
            return Err(CliError::Dimension(format!(
                "truth video must have exactly 1 band, found {}",
                truth.bands()
            )));
        }
        if truth.frame_count() != video.frame_count()
            || truth.n1() != video.n1()
            || truth.n2() != video.n2()
        {
            return Err(CliError::Dimension(
                "truth video shape does not match the input video".into(),
            ));
        }
        if let Some(gaps_path) = &args.out_gaps {
            let cut = MASK_FRACTION * kappa;
            let mut gaps = Vec::new();
            // Gaps are computed on the statistic maps (before persistence
            // zeroing), which carry the continuous class distributions.
            for t in 0..video.frame_count() {
                let mask: Vec<bool> = truth.frame(t).band(0).iter().map(|&a| a > cut).collect();
                if let Ok(gap) = separation_gap(&detection.statistic_maps[t], &mask) {
                    gaps.push((t, gap));
                }
            }
            util::write_gaps_csv(&gaps, gaps_path)?;
            outputs.push(gaps_path.clone());
            gaps_written = Some(gaps_path.clone());
        }
    }

    if let Some(meta_path) = &args.out_meta {
        let model = &detection.model;
        let text = format!(
            "input={}\nsignature={}\nbackground_frames={}\nstatistic={:?}\nradius={}\n\
             persistence={}\ndelta={}\ncentering={:?}\nthreshold={}\nepsilon={}\nbands={}\n\
             frames={}\n",
            args.video.display(),
            args.signature.display(),
            args.background_frames,
            cfg.statistic,
            cfg.neighborhood_radius,
            cfg.persistence_length,
            cfg.threshold_margin,
            cfg.centering,
            detection.series.threshold(),
            model.epsilon(),
            model.bands(),
            video.frame_count(),
        );
        fs::write(meta_path, text)
            .map_err(|e| CliError::Format(format!("cannot write {}: {e}", meta_path.display())))?;
        outputs.push(meta_path.clone());
    }

    if let (Some(manifest_path), Some(manifest)) = (&args.manifest, manifest.as_mut()) {
        let arm = args.arm.clone().unwrap_or_else(|| {
            args.video
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "arm".into())
        });
        let output_refs: Vec<&std::path::Path> = outputs.iter().map(PathBuf::as_path).collect();
        manifest.detect.insert(
            arm,
            DetectStage {
                input: args.video.to_string_lossy().into_owned(),
                signature: args.signature.to_string_lossy().into_owned(),
                background_frames: args.background_frames.clone(),
                config: cfg.clone(),
                threshold: detection.series.threshold(),
                counts: args.out_counts.to_string_lossy().into_owned(),
                histogram: args
                    .out_histogram
                    .as_ref()
                    .map(|p| p.to_string_lossy().into_owned()),
                gaps: gaps_written.map(|p| p.to_string_lossy().into_owned()),
                checksums: checksum_outputs(&output_refs)?,
            },
        );
        manifest.save(manifest_path)?;
    }

    let peak = detection
        .series
        .counts()
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
        .map(|(i, c)| (i, *c))
        .unwrap_or((0, 0));
    eprintln!(
        "detect: threshold {:.6}, peak count {} at frame {} -> {}",
        detection.series.threshold(),
        peak.1,
        peak.0,
        args.out_counts.display()
    );
    Ok(())
}
