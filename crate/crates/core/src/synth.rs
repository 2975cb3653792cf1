//! Synthetic hyperspectral plume videos with ground truth.
//!
//! Each pixel spectrum is `background(r, c) + alpha(r, c, t) * signature +
//! noise`, where the concentration `alpha = kappa * envelope(t) *
//! exp(-dist^2 / (2 sigma^2))` follows a piecewise-linear release envelope
//! (rise to the peak frame, fall to the decay frame, zero outside). The
//! background is piecewise-smooth — dyadic plateaus by default, so bands are
//! genuinely compressible in the Haar basis — plus per-band offsets. All
//! randomness is drawn from the config seed; frames use derived seeds and
//! can be generated in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{CubeVideo, HyperCube, Spectrum};
use crate::error::{CoreError, Result};

/// Ground-truth mask cut-off as a fraction of the peak strength.
pub const MASK_FRACTION: f64 = 0.05;

/// Spatial background field of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackgroundField {
    /// Constant plateaus on a dyadic block grid; exactly sparse in the Haar
    /// basis of the row-major flattened band.
    DyadicPlateau { block_size: usize, amplitude: f64 },
    /// Low-order (quadratic) 2-D polynomial with seeded coefficients.
    Polynomial { amplitude: f64 },
}

/// Plume geometry and release timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlumeConfig {
    pub center_r: f64,
    pub center_c: f64,
    /// Spatial Gaussian width in pixels.
    pub sigma: f64,
    /// Frame at which the release begins (concentration 0 here).
    pub release_start: usize,
    /// Frame of peak concentration (envelope 1).
    pub peak: usize,
    /// Frame at which the concentration returns to 0.
    pub decay: usize,
    /// Peak concentration `kappa`, in signature units.
    pub peak_strength: f64,
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n1: usize,
    pub n2: usize,
    pub bands: usize,
    pub frame_count: usize,
    pub seed: u64,
    pub background: BackgroundField,
    /// Per-band offsets are drawn uniformly from `[0, band_offset_scale)`.
    pub band_offset_scale: f64,
    /// Target signature; normalized to unit length internally.
    pub signature: Vec<f64>,
    pub plume: PlumeConfig,
    /// Per-element Gaussian noise scale.
    pub noise_sigma: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.bands == 0 || self.frame_count == 0 {
            return Err(CoreError::InvalidArgument(
                "scenario dimensions must be positive".into(),
            ));
        }
        if self.signature.len() != self.bands {
            return Err(CoreError::DimensionMismatch(format!(
                "signature has {} entries, scenario has {} bands",
                self.signature.len(),
                self.bands
            )));
        }
        let norm: f64 = self.signature.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(CoreError::DegenerateSignature);
        }
        let p = &self.plume;
        if !(p.release_start < p.peak && p.peak < p.decay && p.decay <= self.frame_count) {
            return Err(CoreError::InvalidArgument(format!(
                "release timing must satisfy release_start < peak < decay <= frame_count, \
                 got {} < {} < {} <= {}",
                p.release_start, p.peak, p.decay, self.frame_count
            )));
        }
        if !(p.sigma > 0.0) {
            return Err(CoreError::InvalidArgument(
                "plume sigma must be positive".into(),
            ));
        }
        if !(p.peak_strength >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(CoreError::InvalidArgument(
                "peak strength and noise sigma must be non-negative".into(),
            ));
        }
        if let BackgroundField::DyadicPlateau { block_size, .. } = self.background {
            if block_size == 0
                || !block_size.is_power_of_two()
                || self.n1 % block_size != 0
                || self.n2 % block_size != 0
            {
                return Err(CoreError::InvalidArgument(format!(
                    "plateau block size {block_size} must be a power of two dividing {}x{}",
                    self.n1, self.n2
                )));
            }
        }
        Ok(())
    }

    /// The unit-norm signature actually injected.
    pub fn unit_signature(&self) -> Spectrum {
        let norm: f64 = self.signature.iter().map(|v| v * v).sum::<f64>().sqrt();
        Spectrum::new(self.signature.iter().map(|v| v / norm).collect())
    }

    /// Piecewise-linear release envelope at frame `t`, in `[0, 1]`.
    pub fn envelope(&self, t: usize) -> f64 {
        let p = &self.plume;
        if t <= p.release_start || t >= p.decay {
            0.0
        } else if t <= p.peak {
            (t - p.release_start) as f64 / (p.peak - p.release_start) as f64
        } else {
            (p.decay - t) as f64 / (p.decay - p.peak) as f64
        }
    }
}

/// Per-frame concentration fields and the derived plume mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    n1: usize,
    n2: usize,
    kappa: f64,
    /// `alpha[t][r * n2 + c]` is the injected concentration.
    alpha: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn alpha(&self, t: usize) -> &[f64] {
        &self.alpha[t]
    }

    pub fn frame_count(&self) -> usize {
        self.alpha.len()
    }

    /// Boolean plume mask for frame `t`: `alpha > MASK_FRACTION * kappa`.
    pub fn mask(&self, t: usize) -> Vec<bool> {
        let cut = MASK_FRACTION * self.kappa;
        self.alpha[t].iter().map(|&a| a > cut).collect()
    }

    /// Export the concentrations as a 1-band video (for the ground-truth HSC
    /// sidecar).
    pub fn to_video(&self) -> Result<CubeVideo> {
        let frames: Result<Vec<HyperCube>> = self
            .alpha
            .iter()
            .map(|a| HyperCube::new(self.n1, self.n2, 1, a.clone()))
            .collect();
        CubeVideo::new(frames?)
    }
}

/// SplitMix64 step, used to derive independent per-frame noise seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn background_field(cfg: &SynthConfig, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let (n1, n2) = (cfg.n1, cfg.n2);
    match cfg.background {
        BackgroundField::DyadicPlateau {
            block_size,
            amplitude,
        } => {
            let blocks_r = n1 / block_size;
            let blocks_c = n2 / block_size;
            let levels: Vec<f64> = (0..blocks_r * blocks_c)
                .map(|_| rng.random::<f64>() * amplitude)
                .collect();
            let mut field = vec![0.0; n1 * n2];
            for r in 0..n1 {
                for c in 0..n2 {
                    field[r * n2 + c] = levels[(r / block_size) * blocks_c + (c / block_size)];
                }
            }
            field
        }
        BackgroundField::Polynomial { amplitude } => {
            let coeffs: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let mut field = vec![0.0; n1 * n2];
            for r in 0..n1 {
                let y = r as f64 / n1 as f64;
                for c in 0..n2 {
                    let x = c as f64 / n2 as f64;
                    let p = coeffs[0]
                        + coeffs[1] * x
                        + coeffs[2] * y
                        + coeffs[3] * x * x
                        + coeffs[4] * x * y
                        + coeffs[5] * y * y;
                    field[r * n2 + c] = amplitude * (p + 2.0) / 4.0;
                }
            }
            field
        }
    }
}

/// Generate the scenario video and its ground truth. Deterministic in the
/// config (bitwise-identical on regeneration).
pub fn generate_video(cfg: &SynthConfig) -> Result<(CubeVideo, GroundTruth)> {
    cfg.validate()?;
    let (n1, n2, b) = (cfg.n1, cfg.n2, cfg.bands);
    let pixels = n1 * n2;

    // Scene-level draws come from the master seed, in fixed order: field,
    // then band offsets.
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let field = background_field(cfg, &mut rng);
    let offsets: Vec<f64> = (0..b)
        .map(|_| rng.random::<f64>() * cfg.band_offset_scale)
        .collect();
    let signature = cfg.unit_signature();

    // Gaussian footprint of the plume, shared by all frames.
    let footprint: Vec<f64> = (0..pixels)
        .map(|p| {
            let r = (p / n2) as f64;
            let c = (p % n2) as f64;
            let d2 = (r - cfg.plume.center_r).powi(2) + (c - cfg.plume.center_c).powi(2);
            (-d2 / (2.0 * cfg.plume.sigma * cfg.plume.sigma)).exp()
        })
        .collect();

    let results: Result<Vec<(HyperCube, Vec<f64>)>> = (0..cfg.frame_count)
        .into_par_iter()
        .map(|t| {
            let env = cfg.envelope(t) * cfg.plume.peak_strength;
            let alpha: Vec<f64> = footprint.iter().map(|&f| env * f).collect();

            let mut frame_rng =
                ChaCha12Rng::seed_from_u64(splitmix64(cfg.seed ^ (t as u64).wrapping_mul(0xA5A5_A5A5_A5A5_A5A5).wrapping_add(1)));
            let mut data = vec![0.0; pixels * b];
            for j in 0..b {
                let base = j * pixels;
                let off = offsets[j];
                let sig = signature.values[j];
                for p in 0..pixels {
                    let noise: f64 = if cfg.noise_sigma > 0.0 {
                        let n: f64 = StandardNormal.sample(&mut frame_rng);
                        cfg.noise_sigma * n
                    } else {
                        0.0
                    };
                    data[base + p] = field[p] + off + alpha[p] * sig + noise;
                }
            }
            Ok((HyperCube::new(n1, n2, b, data)?, alpha))
        })
        .collect();

    let (frames, alpha): (Vec<_>, Vec<_>) = results?.into_iter().unzip();
    Ok((
        CubeVideo::new(frames)?,
        GroundTruth {
            n1,
            n2,
            kappa: cfg.plume.peak_strength,
            alpha,
        },
    ))
}

/// The canonical desk-scale scenario: a 64x64, 20-band, 140-frame video
/// whose release starts at frame 20, peaks around frame 40, and dissipates
/// by frame 70.
pub fn default_scenario() -> SynthConfig {
    let bands = 20;
    // Smooth single-lobe signature across bands, unit-normalized by the
    // generator.
    let signature: Vec<f64> = (0..bands)
        .map(|j| {
            let x = (j as f64 - bands as f64 / 3.0) / (bands as f64 / 8.0);
            (-0.5 * x * x).exp()
        })
        .collect();
    SynthConfig {
        n1: 64,
        n2: 64,
        bands,
        frame_count: 140,
        seed: 42,
        background: BackgroundField::DyadicPlateau {
            block_size: 32,
            amplitude: 1.0,
        },
        band_offset_scale: 0.5,
        signature,
        plume: PlumeConfig {
            center_r: 31.5,
            center_c: 31.5,
            sigma: 6.0,
            release_start: 20,
            peak: 40,
            decay: 70,
            peak_strength: 0.6,
        },
        noise_sigma: 0.02,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{ace, estimate_background};

    fn small_config() -> SynthConfig {
        SynthConfig {
            n1: 16,
            n2: 16,
            bands: 4,
            frame_count: 24,
            seed: 7,
            background: BackgroundField::DyadicPlateau {
                block_size: 4,
                amplitude: 1.0,
            },
            band_offset_scale: 0.5,
            signature: vec![1.0, 2.0, 2.0, 1.0],
            plume: PlumeConfig {
                center_r: 7.5,
                center_c: 7.5,
                sigma: 2.0,
                release_start: 4,
                peak: 10,
                decay: 18,
                peak_strength: 0.8,
            },
            noise_sigma: 0.01,
        }
    }

    #[test]
    fn default_scenario_matches_canonical_timing() {
        let cfg = default_scenario();
        assert_eq!((cfg.n1, cfg.n2, cfg.bands, cfg.frame_count), (64, 64, 20, 140));
        assert_eq!(cfg.plume.release_start, 20);
        assert_eq!(cfg.plume.peak, 40);
        assert_eq!(cfg.plume.decay, 70);
        cfg.validate().unwrap();
    }

    #[test]
    fn zero_noise_zero_strength_is_static_background() {
        let mut cfg = small_config();
        cfg.noise_sigma = 0.0;
        cfg.plume.peak_strength = 0.0;
        let (video, truth) = generate_video(&cfg).unwrap();
        for t in 1..video.frame_count() {
            assert_eq!(video.frame(t), video.frame(0));
        }
        assert!(truth.alpha(10).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn peak_center_carries_exact_signature() {
        let mut cfg = small_config();
        cfg.noise_sigma = 0.0;
        cfg.plume.center_r = 7.0;
        cfg.plume.center_c = 7.0;
        let (video, _) = generate_video(&cfg).unwrap();
        let at_peak = video.frame(cfg.plume.peak).pixel_spectrum(7, 7);
        let background = video.frame(0).pixel_spectrum(7, 7);
        let sig = cfg.unit_signature();
        for j in 0..cfg.bands {
            let diff = at_peak.values[j] - background.values[j];
            let want = cfg.plume.peak_strength * sig.values[j];
            assert!(
                (diff - want).abs() < 1e-12,
                "band {j}: got {diff}, want {want}"
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small_config();
        let (v1, t1) = generate_video(&cfg).unwrap();
        let (v2, t2) = generate_video(&cfg).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn mask_is_monotone_in_strength() {
        let cfg_lo = small_config();
        let mut cfg_hi = small_config();
        cfg_hi.plume.peak_strength = cfg_lo.plume.peak_strength * 3.0;
        let (_, truth_lo) = generate_video(&cfg_lo).unwrap();
        let (_, truth_hi) = generate_video(&cfg_hi).unwrap();
        for t in 0..cfg_lo.frame_count {
            for (lo, hi) in truth_lo.mask(t).iter().zip(truth_hi.mask(t)) {
                assert!(!lo || hi, "raising kappa removed a mask pixel");
            }
        }
    }

    #[test]
    fn strong_noiseless_plume_has_near_unit_ace() {
        let mut cfg = small_config();
        cfg.noise_sigma = 0.0;
        // 10x the background dynamic range (amplitude + offsets).
        cfg.plume.peak_strength = 15.0;
        let (video, _) = generate_video(&cfg).unwrap();
        let background_frames: Vec<usize> = (0..cfg.plume.release_start).collect();
        let model = estimate_background(&video, &background_frames).unwrap();
        let put = video.frame(cfg.plume.peak).pixel_spectrum(7, 7);
        let got = ace(&put, &cfg.unit_signature(), &model).unwrap();
        assert!(got > 0.99, "ACE at plume center = {got}");
    }

    #[test]
    fn validation_rejects_bad_timing() {
        let mut cfg = small_config();
        cfg.plume.release_start = 12;
        cfg.plume.peak = 10;
        assert!(cfg.validate().is_err());

        let mut cfg = small_config();
        cfg.plume.decay = 30;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn envelope_shape() {
        let cfg = small_config();
        assert_eq!(cfg.envelope(0), 0.0);
        assert_eq!(cfg.envelope(cfg.plume.release_start), 0.0);
        assert_eq!(cfg.envelope(cfg.plume.peak), 1.0);
        assert!(cfg.envelope(7) > 0.0 && cfg.envelope(7) < 1.0);
        assert_eq!(cfg.envelope(cfg.plume.decay), 0.0);
        assert_eq!(cfg.envelope(cfg.frame_count - 1), 0.0);
    }

    #[test]
    fn ground_truth_video_round_trip() {
        let cfg = small_config();
        let (_, truth) = generate_video(&cfg).unwrap();
        let video = truth.to_video().unwrap();
        assert_eq!(video.frame_count(), cfg.frame_count);
        assert_eq!(video.bands(), 1);
        assert_eq!(video.frame(cfg.plume.peak).data(), truth.alpha(cfg.plume.peak));
    }
}
