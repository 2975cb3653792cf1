//! Chemical detection: background covariance model, the adaptive
//! coherence/cosine estimator (ACE), bulk (multipulse) coherence over
//! spatial neighborhoods, temporal persistence filtering, and algorithmic
//! threshold calibration from chemical-free background frames.
//!
//! ACE scores the pixel under test `x` against a target signature `s` as
//! the squared cosine of the angle between them in the background-whitened
//! space,
//!
//! ```text
//! (s^T G^{-1} x)^2 / ((s^T G^{-1} s) (x^T G^{-1} x)),
//! ```
//!
//! where `G` is the maximum-likelihood covariance of background pixels. The
//! pixel under test is centered by the background mean before the ratio (the
//! raw uncentered variant is available behind [`Centering`]); the signature
//! is a pure direction and is used as given. `G^{-1}` is applied through a
//! Cholesky factor, never by explicit inversion.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cube::{CubeVideo, HyperCube, Spectrum};
use crate::error::{CoreError, Result};

/// Diagonal-loading candidates: the smallest value that makes the loaded
/// covariance numerically positive definite is applied.
const LOADING_CANDIDATES: [f64; 4] = [0.0, 1e-6, 1e-4, 1e-2];

/// Loaded eigenvalue floor, as a fraction of the mean diagonal entry.
const EIGENVALUE_FLOOR: f64 = 1e-10;

/// Background mean spectrum and regularized MLE covariance, with a
/// factorization sufficient to apply the inverse.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    mean: Spectrum,
    covariance: DMatrix<f64>,
    epsilon: f64,
    /// Lower Cholesky factor of the loaded covariance, row-major.
    whitener: Vec<f64>,
    bands: usize,
}

impl BackgroundModel {
    /// Build a model from an explicit mean and covariance (for example one
    /// estimated offline). The covariance must be symmetric to 1e-12
    /// relative; it is diagonally loaded by the smallest candidate fraction
    /// that makes it numerically positive definite, then factored.
    pub fn from_moments(mean: Spectrum, covariance: DMatrix<f64>) -> Result<Self> {
        let b = mean.len();
        if covariance.nrows() != b || covariance.ncols() != b {
            return Err(CoreError::DimensionMismatch(format!(
                "covariance is {}x{}, mean has {b} bands",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let scale = covariance
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..b {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(CoreError::InvalidArgument(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }

        let mean_diag = covariance.trace() / b as f64;
        if mean_diag <= 0.0 {
            return Err(CoreError::DegenerateBackground(
                "all background pixels are identical (rank-0 covariance); \
                 diagonal loading cannot regularize a zero matrix — designate \
                 more varied background frames"
                    .into(),
            ));
        }

        let min_eig = nalgebra::SymmetricEigen::new(covariance.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let floor = EIGENVALUE_FLOOR * mean_diag;
        let epsilon = LOADING_CANDIDATES
            .iter()
            .cloned()
            .find(|eps| min_eig + eps * mean_diag >= floor)
            .ok_or_else(|| {
                CoreError::DegenerateBackground(
                    "covariance remains indefinite after maximum diagonal loading".into(),
                )
            })?;

        let mut loaded = covariance;
        for i in 0..b {
            loaded[(i, i)] += epsilon * mean_diag;
        }

        let chol = nalgebra::Cholesky::new(loaded.clone()).ok_or_else(|| {
            CoreError::DegenerateBackground(
                "Cholesky factorization failed after diagonal loading".into(),
            )
        })?;
        let l = chol.l();
        let mut whitener = vec![0.0; b * b];
        for i in 0..b {
            for j in 0..=i {
                whitener[i * b + j] = l[(i, j)];
            }
        }

        Ok(BackgroundModel {
            mean,
            covariance: loaded,
            epsilon,
            whitener,
            bands: b,
        })
    }

    pub fn mean(&self) -> &Spectrum {
        &self.mean
    }

    /// The loaded covariance actually used by the detector.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Diagonal-loading fraction that was applied (0 when the MLE estimate
    /// was already positive definite).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Solve `L z = v` for the cached lower Cholesky factor, writing `z`
    /// into `dst`; `v^T G^{-1} w = whiten(v) . whiten(w)`.
    fn whiten_into(&self, v: &[f64], dst: &mut [f64]) {
        let b = self.bands;
        for i in 0..b {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.whitener[i * b + j] * dst[j];
            }
            dst[i] = acc / self.whitener[i * b + i];
        }
    }

    /// `G^{-1} v` via two triangular solves (test and diagnostic use).
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let b = self.bands;
        let mut z = vec![0.0; b];
        self.whiten_into(v, &mut z);
        // Back substitution with L^T.
        let mut out = vec![0.0; b];
        for i in (0..b).rev() {
            let mut acc = z[i];
            for j in i + 1..b {
                acc -= self.whitener[j * b + i] * out[j];
            }
            out[i] = acc / self.whitener[i * b + i];
        }
        out
    }
}

/// Whether ACE centers the pixel under test by the background mean.
/// Demeaned is the default throughout the pipeline; Raw evaluates the
/// ratio exactly as written, with no centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Centering {
    Demeaned,
    Raw,
}

/// Which statistic a detection run thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Ace,
    Bulk,
    BulkPersistence,
}

/// Detection parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionConfig {
    /// Neighborhood radius `r` for bulk coherence: a square `(2r+1) x
    /// (2r+1)` window, truncated at image borders.
    pub neighborhood_radius: usize,
    /// Minimum run length of above-threshold frames for the persistence
    /// filter.
    pub persistence_length: usize,
    /// Threshold margin `delta`: threshold = (1 + delta) * background max.
    pub threshold_margin: f64,
    pub statistic: Statistic,
    pub centering: Centering,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            neighborhood_radius: 1,
            persistence_length: 5,
            threshold_margin: 0.05,
            statistic: Statistic::BulkPersistence,
            centering: Centering::Demeaned,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.persistence_length == 0 {
            return Err(CoreError::InvalidArgument(
                "persistence length must be at least 1".into(),
            ));
        }
        if !(self.threshold_margin >= 0.0 && self.threshold_margin.is_finite()) {
            return Err(CoreError::InvalidArgument(
                "threshold margin must be a non-negative finite number".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel statistic values for one frame; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    n1: usize,
    n2: usize,
    values: Vec<f64>,
}

impl DetectionMap {
    pub fn new(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n1 * n2 {
            return Err(CoreError::DimensionMismatch(format!(
                "map {n1}x{n2} needs {} values, got {}",
                n1 * n2,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CoreError::InvalidArgument(format!(
                "detection values must lie in [0, 1], found {bad}"
            )));
        }
        Ok(Self { n1, n2, values })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.n2 + c]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Per-frame detection maps with their shared threshold and above-threshold
/// counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSeries {
    maps: Vec<DetectionMap>,
    threshold: f64,
    counts: Vec<usize>,
}

impl DetectionSeries {
    pub fn new(maps: Vec<DetectionMap>, threshold: f64) -> Result<Self> {
        let first = maps.first().ok_or_else(|| {
            CoreError::InvalidArgument("detection series must have at least one frame".into())
        })?;
        let (n1, n2) = (first.n1, first.n2);
        for (t, m) in maps.iter().enumerate() {
            if (m.n1, m.n2) != (n1, n2) {
                return Err(CoreError::DimensionMismatch(format!(
                    "map {t} is {}x{}, expected {n1}x{n2}",
                    m.n1, m.n2
                )));
            }
        }
        let counts = maps.iter().map(|m| count_above(m, threshold)).collect();
        Ok(Self {
            maps,
            threshold,
            counts,
        })
    }

    pub fn maps(&self) -> &[DetectionMap] {
        &self.maps
    }

    pub fn map(&self, t: usize) -> &DetectionMap {
        &self.maps[t]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn frame_count(&self) -> usize {
        self.maps.len()
    }
}

/// Estimate the background model from designated chemical-free frames:
/// mean spectrum over all their pixels and the MLE covariance
/// `(1/N) sum (x - mean)(x - mean)^T`, diagonally loaded just enough to be
/// numerically positive definite.
pub fn estimate_background(video: &CubeVideo, frame_indices: &[usize]) -> Result<BackgroundModel> {
    if frame_indices.is_empty() {
        return Err(CoreError::InvalidArgument(
            "background frame set is empty".into(),
        ));
    }
    for &t in frame_indices {
        if t >= video.frame_count() {
            return Err(CoreError::InvalidArgument(format!(
                "background frame {t} out of range (video has {} frames)",
                video.frame_count()
            )));
        }
    }
    let b = video.bands();
    let pixels = video.n1() * video.n2();
    let count = (frame_indices.len() * pixels) as f64;

    let mut mean = vec![0.0; b];
    for &t in frame_indices {
        let frame = video.frame(t);
        for j in 0..b {
            mean[j] += frame.band(j).iter().sum::<f64>();
        }
    }
    for m in mean.iter_mut() {
        *m /= count;
    }

    let mut cov = DMatrix::<f64>::zeros(b, b);
    let mut centered = vec![0.0; b];
    for &t in frame_indices {
        let frame = video.frame(t);
        for p in 0..pixels {
            for j in 0..b {
                centered[j] = frame.band(j)[p] - mean[j];
            }
            for i in 0..b {
                let ci = centered[i];
                for j in 0..=i {
                    cov[(i, j)] += ci * centered[j];
                }
            }
        }
    }
    for i in 0..b {
        for j in 0..=i {
            let v = cov[(i, j)] / count;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    BackgroundModel::from_moments(Spectrum::new(mean), cov)
}

fn centered_values(v: &[f64], model: &BackgroundModel, centering: Centering) -> Vec<f64> {
    match centering {
        Centering::Demeaned => v
            .iter()
            .zip(&model.mean.values)
            .map(|(a, m)| a - m)
            .collect(),
        Centering::Raw => v.to_vec(),
    }
}

/// ACE with an explicit centering choice for the pixel under test.
pub fn ace_with(
    x: &Spectrum,
    s: &Spectrum,
    model: &BackgroundModel,
    centering: Centering,
) -> Result<f64> {
    let b = model.bands();
    if x.len() != b || s.len() != b {
        return Err(CoreError::DimensionMismatch(format!(
            "spectra have lengths {} and {}, model has {b} bands",
            x.len(),
            s.len()
        )));
    }
    if s.values.iter().all(|&v| v == 0.0) {
        return Err(CoreError::DegenerateSignature);
    }
    let xc = centered_values(&x.values, model, centering);
    if xc.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }

    let mut zs = vec![0.0; b];
    let mut zx = vec![0.0; b];
    model.whiten_into(&s.values, &mut zs);
    model.whiten_into(&xc, &mut zx);

    let dot: f64 = zs.iter().zip(&zx).map(|(a, b)| a * b).sum();
    let ss: f64 = zs.iter().map(|v| v * v).sum();
    let xx: f64 = zx.iter().map(|v| v * v).sum();
    Ok((dot * dot / (ss * xx)).clamp(0.0, 1.0))
}

/// ACE of a single pixel under test against the target signature, with the
/// pixel demeaned by the background mean.
pub fn ace(x: &Spectrum, s: &Spectrum, model: &BackgroundModel) -> Result<f64> {
    ace_with(x, s, model, Centering::Demeaned)
}

/// Per-pixel ACE over one cube, with the map laid out on the cube's spatial
/// grid.
pub fn ace_map_with(
    cube: &HyperCube,
    s: &Spectrum,
    model: &BackgroundModel,
    centering: Centering,
) -> Result<DetectionMap> {
    let b = model.bands();
    if cube.bands() != b || s.len() != b {
        return Err(CoreError::DimensionMismatch(format!(
            "cube has {} bands, signature {}, model {b}",
            cube.bands(),
            s.len()
        )));
    }
    if s.values.iter().all(|&v| v == 0.0) {
        return Err(CoreError::DegenerateSignature);
    }
    let mut zs = vec![0.0; b];
    model.whiten_into(&s.values, &mut zs);
    let ss: f64 = zs.iter().map(|v| v * v).sum();

    let pixels = cube.pixels();
    let values: Vec<f64> = (0..pixels)
        .into_par_iter()
        .map_init(
            || (vec![0.0; b], vec![0.0; b]),
            |(xc, zx), p| {
                let mut all_zero = true;
                for j in 0..b {
                    let v = cube.band(j)[p];
                    xc[j] = match centering {
                        Centering::Demeaned => v - model.mean.values[j],
                        Centering::Raw => v,
                    };
                    all_zero &= xc[j] == 0.0;
                }
                if all_zero {
                    return 0.0;
                }
                model.whiten_into(xc, zx);
                let mut dot = 0.0;
                let mut xx = 0.0;
                for j in 0..b {
                    dot += zs[j] * zx[j];
                    xx += zx[j] * zx[j];
                }
                (dot * dot / (ss * xx)).clamp(0.0, 1.0)
            },
        )
        .collect();
    DetectionMap::new(cube.n1(), cube.n2(), values)
}

/// Per-pixel ACE map with default (demeaned) centering.
pub fn ace_map(cube: &HyperCube, s: &Spectrum, model: &BackgroundModel) -> Result<DetectionMap> {
    ace_map_with(cube, s, model, Centering::Demeaned)
}

/// Bulk (multipulse) coherence: each output pixel is
/// `1 - prod (1 - c_i)` over the `(2r+1) x (2r+1)` neighborhood, truncated
/// at image borders.
pub fn bulk_coherence(map: &DetectionMap, radius: usize) -> DetectionMap {
    if radius == 0 {
        return map.clone();
    }
    let (n1, n2) = (map.n1, map.n2);
    let r = radius as isize;
    let mut values = Vec::with_capacity(n1 * n2);
    for row in 0..n1 as isize {
        for col in 0..n2 as isize {
            let mut product = 1.0;
            for dr in -r..=r {
                let rr = row + dr;
                if rr < 0 || rr >= n1 as isize {
                    continue;
                }
                for dc in -r..=r {
                    let cc = col + dc;
                    if cc < 0 || cc >= n2 as isize {
                        continue;
                    }
                    product *= 1.0 - map.values[rr as usize * n2 + cc as usize];
                }
            }
            values.push((1.0 - product).clamp(0.0, 1.0));
        }
    }
    DetectionMap { n1, n2, values }
}

/// Temporal persistence gate: a pixel's value at frame `t` survives only if
/// `t` lies in a run of at least `min_run` consecutive frames whose values
/// exceed `threshold`; everything else becomes 0.
pub fn persistence_filter(
    series: &DetectionSeries,
    threshold: f64,
    min_run: usize,
) -> Result<DetectionSeries> {
    if min_run == 0 {
        return Err(CoreError::InvalidArgument(
            "persistence run length must be at least 1".into(),
        ));
    }
    let frames = series.maps.len();
    let (n1, n2) = (series.maps[0].n1, series.maps[0].n2);
    let pixels = n1 * n2;

    let mut filtered: Vec<Vec<f64>> = vec![vec![0.0; pixels]; frames];
    for p in 0..pixels {
        let mut t = 0;
        while t < frames {
            if series.maps[t].values[p] > threshold {
                let start = t;
                while t < frames && series.maps[t].values[p] > threshold {
                    t += 1;
                }
                if t - start >= min_run {
                    for (tt, frame) in filtered.iter_mut().enumerate().take(t).skip(start) {
                        frame[p] = series.maps[tt].values[p];
                    }
                }
            } else {
                t += 1;
            }
        }
    }

    let maps = filtered
        .into_iter()
        .map(|values| DetectionMap { n1, n2, values })
        .collect();
    DetectionSeries::new(maps, threshold)
}

/// Calibrate the detection threshold from background-only statistic maps:
/// `(1 + delta) * max` over every pixel of every map.
pub fn calibrate_threshold(background_maps: &[DetectionMap], delta: f64) -> Result<f64> {
    if background_maps.is_empty() {
        return Err(CoreError::InvalidArgument(
            "threshold calibration needs at least one background map".into(),
        ));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(CoreError::InvalidArgument(
            "threshold margin must be non-negative and finite".into(),
        ));
    }
    let max = background_maps
        .iter()
        .map(DetectionMap::max)
        .fold(0.0, f64::max);
    Ok((1.0 + delta) * max)
}

/// Number of pixels strictly above the threshold.
pub fn count_above(map: &DetectionMap, threshold: f64) -> usize {
    map.values.iter().filter(|&&v| v > threshold).count()
}

/// Histogram over uniform bins on `[0, 1]`; bins are left-inclusive,
/// right-exclusive, with the last bin closed. Counts sum to the pixel count.
pub fn histogram(map: &DetectionMap, bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(CoreError::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    let mut counts = vec![0usize; bins];
    for &v in &map.values {
        let idx = ((v * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Nearest-rank percentile of `values` (p in [0, 100]); `values` must be
/// non-empty.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Separation between the plume and background classes of one statistic
/// map: the 10th percentile of plume-pixel values minus the 99.9th
/// percentile of background-pixel values. Positive gaps mean the classes
/// are disjoint at those quantiles.
pub fn separation_gap(map: &DetectionMap, plume_mask: &[bool]) -> Result<f64> {
    if plume_mask.len() != map.values.len() {
        return Err(CoreError::DimensionMismatch(format!(
            "mask has {} entries, map has {}",
            plume_mask.len(),
            map.values.len()
        )));
    }
    let mut plume = Vec::new();
    let mut background = Vec::new();
    for (&v, &is_plume) in map.values.iter().zip(plume_mask) {
        if is_plume {
            plume.push(v);
        } else {
            background.push(v);
        }
    }
    if plume.is_empty() || background.is_empty() {
        return Err(CoreError::InvalidArgument(
            "separation gap needs both plume and background pixels".into(),
        ));
    }
    plume.sort_by(|a, b| a.partial_cmp(b).unwrap());
    background.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(percentile(&plume, 10.0) - percentile(&background, 99.9))
}

/// Full detection result for one video arm.
#[derive(Debug, Clone)]
pub struct VideoDetection {
    pub model: BackgroundModel,
    pub series: DetectionSeries,
    /// Raw statistic maps before persistence (equal to the series maps for
    /// non-persistence statistics).
    pub statistic_maps: Vec<DetectionMap>,
}

/// Run the configured statistic over every frame of a video, calibrate the
/// threshold on the designated background frames, and apply persistence if
/// requested. Each pipeline arm (raw, reconstructed) must call this with its
/// own video so models and thresholds are never shared.
pub fn detect_video(
    video: &CubeVideo,
    signature: &Spectrum,
    background_frames: &[usize],
    cfg: &DetectionConfig,
) -> Result<VideoDetection> {
    cfg.validate()?;
    let model = estimate_background(video, background_frames)?;

    let maps: Result<Vec<DetectionMap>> = video
        .frames()
        .par_iter()
        .map(|frame| {
            let map = ace_map_with(frame, signature, &model, cfg.centering)?;
            Ok(match cfg.statistic {
                Statistic::Ace => map,
                Statistic::Bulk | Statistic::BulkPersistence => {
                    bulk_coherence(&map, cfg.neighborhood_radius)
                }
            })
        })
        .collect();
    let maps = maps?;

    let background_maps: Vec<DetectionMap> = background_frames
        .iter()
        .map(|&t| maps[t].clone())
        .collect();
    let threshold = calibrate_threshold(&background_maps, cfg.threshold_margin)?;

    let series = DetectionSeries::new(maps.clone(), threshold)?;
    let series = match cfg.statistic {
        Statistic::BulkPersistence => {
            persistence_filter(&series, threshold, cfg.persistence_length)?
        }
        _ => series,
    };

    Ok(VideoDetection {
        model,
        series,
        statistic_maps: maps,
    })
}
