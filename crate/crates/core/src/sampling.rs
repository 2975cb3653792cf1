//! The measurement operator `S`: a seeded, randomized, row-subsampled
//! Walsh-Hadamard matrix applied through the fast transform.
//!
//! `S = (1/sqrt(n)) R H D P`, where `P` is a random column permutation, `D` a
//! random diagonal of signs, `H` the natural-order Hadamard matrix, and `R`
//! keeps `k` rows. Row 0 (the constant row) is always kept so the band mean
//! survives sampling. Because `D^2 = I` and `H H^T = n I`, the normalized
//! rows are orthonormal: `S S^T = I_k` exactly in exact arithmetic, which is
//! what lets the solver use a closed-form inner inverse.
//!
//! The operator is never materialized in the hot path; `apply` and
//! `apply_adjoint` run in `O(n log n)` via the fast transform. A dense
//! [`materialize`] built from the closed form `H[i][j] = (-1)^popcount(i & j)`
//! exists for validating the fast paths.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::cube::FlatCube;
use crate::error::{CoreError, Result};

/// Magic bytes prefixing every HSM measurement file.
pub const HSM_MAGIC: [u8; 4] = *b"HSM1";

/// Seeded, row-subsampled Walsh-Hadamard measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOperator {
    n: usize,
    k: usize,
    seed: u64,
    rate: f64,
    /// Sorted, distinct, always contains row 0.
    row_indices: Vec<usize>,
    column_permutation: Vec<usize>,
    sign_flips: Vec<f64>,
}

impl SamplingOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The requested sampling rate (the realized rate is `k() / n()`).
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_indices
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.column_permutation
    }

    pub fn sign_flips(&self) -> &[f64] {
        &self.sign_flips
    }
}

/// In-place natural-order fast Walsh-Hadamard transform (unnormalized,
/// Sylvester ordering). Length must be a power of two.
pub fn fwht_in_place(buf: &mut [f64]) {
    let n = buf.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            let (lo, hi) = buf[i..i + 2 * h].split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let x = *a;
                let y = *b;
                *a = x + y;
                *b = x - y;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Build the operator for signal length `n` (power of two) at the given
/// sampling rate, deterministically from `seed`.
///
/// `k = max(1, floor(rate * n))`; the constant row 0 is always retained and
/// the remaining `k - 1` rows are drawn uniformly without replacement from
/// `[1, n)`.
pub fn build_sampler(n: usize, rate: f64, seed: u64) -> Result<SamplingOperator> {
    if n == 0 || !n.is_power_of_two() {
        return Err(CoreError::NotPowerOfTwo(n));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "sampling rate must be in (0, 1], got {rate}"
        )));
    }
    let k = ((rate * n as f64).floor() as usize).clamp(1, n);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Draw order is fixed: rows, then permutation, then signs.
    let mut row_indices = vec![0usize];
    if k > 1 {
        let extra = rand::seq::index::sample(&mut rng, n - 1, k - 1);
        row_indices.extend(extra.iter().map(|i| i + 1));
    }
    row_indices.sort_unstable();

    let mut column_permutation: Vec<usize> = (0..n).collect();
    column_permutation.shuffle(&mut rng);

    let sign_flips: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();

    Ok(SamplingOperator {
        n,
        k,
        seed,
        rate,
        row_indices,
        column_permutation,
        sign_flips,
    })
}

/// `y = S x`: permute, sign-flip, fast transform, keep the selected rows,
/// scale by `1/sqrt(n)`.
pub fn apply(op: &SamplingOperator, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != op.n {
        return Err(CoreError::DimensionMismatch(format!(
            "apply expects length {}, got {}",
            op.n,
            x.len()
        )));
    }
    let mut buf = vec![0.0; op.n];
    for (i, out) in buf.iter_mut().enumerate() {
        *out = x[op.column_permutation[i]] * op.sign_flips[i];
    }
    fwht_in_place(&mut buf);
    let scale = 1.0 / (op.n as f64).sqrt();
    Ok(op.row_indices.iter().map(|&r| buf[r] * scale).collect())
}

/// `x = S^T y`: the exact adjoint of [`apply`]. Since the rows of `S` are
/// orthonormal, `apply(apply_adjoint(y)) == y`.
pub fn apply_adjoint(op: &SamplingOperator, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != op.k {
        return Err(CoreError::DimensionMismatch(format!(
            "adjoint expects length {}, got {}",
            op.k,
            y.len()
        )));
    }
    let mut buf = vec![0.0; op.n];
    for (j, &r) in op.row_indices.iter().enumerate() {
        buf[r] = y[j];
    }
    fwht_in_place(&mut buf);
    let scale = 1.0 / (op.n as f64).sqrt();
    let mut out = vec![0.0; op.n];
    for i in 0..op.n {
        out[op.column_permutation[i]] = buf[i] * op.sign_flips[i] * scale;
    }
    Ok(out)
}

/// The `k x b` measurement matrix `Y = S X` for one cube, with its sampling
/// rate. Band `j`'s measurements occupy `values[j * k .. (j + 1) * k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    k: usize,
    b: usize,
    rate: f64,
    values: Vec<f64>,
}

impl Measurements {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bands(&self) -> usize {
        self.b
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Measurements of band `j`.
    pub fn band(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }
}

/// Sample every band of a flat cube: `Y = S X`, column by column.
pub fn sample_cube(op: &SamplingOperator, flat: &FlatCube) -> Result<Measurements> {
    if flat.n() != op.n {
        return Err(CoreError::DimensionMismatch(format!(
            "cube has n = {}, operator expects {}",
            flat.n(),
            op.n
        )));
    }
    let mut values = Vec::with_capacity(op.k * flat.bands());
    for col in flat.columns() {
        values.extend(apply(op, col)?);
    }
    Ok(Measurements {
        k: op.k,
        b: flat.bands(),
        rate: op.rate,
        values,
    })
}

/// Dense `k x n` realization of the operator, built from the closed form
/// `H[i][j] = (-1)^popcount(i & j)` rather than the fast transform, so it can
/// serve as an independent oracle for the fast paths. Intended for `n <=
/// 4096`.
pub fn materialize(op: &SamplingOperator) -> Vec<Vec<f64>> {
    let scale = 1.0 / (op.n as f64).sqrt();
    op.row_indices
        .iter()
        .map(|&r| {
            let mut row = vec![0.0; op.n];
            for i in 0..op.n {
                let h = if (r & i).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                row[op.column_permutation[i]] = h * op.sign_flips[i] * scale;
            }
            row
        })
        .collect()
}

/// A sampled video: per-frame measurements plus everything needed to rebuild
/// the operator exactly (`n`, `rate`, `seed`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVideo {
    pub n: usize,
    pub seed: u64,
    pub rate: f64,
    pub frames: Vec<Measurements>,
}

impl MeasurementVideo {
    pub fn new(n: usize, seed: u64, rate: f64, frames: Vec<Measurements>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| {
            CoreError::InvalidArgument("measurement video must have at least one frame".into())
        })?;
        let (k, b) = (first.k, first.b);
        for (t, f) in frames.iter().enumerate() {
            if (f.k, f.b) != (k, b) {
                return Err(CoreError::DimensionMismatch(format!(
                    "measurement frame {t} is {}x{}, expected {k}x{b}",
                    f.k, f.b
                )));
            }
        }
        Ok(Self {
            n,
            seed,
            rate,
            frames,
        })
    }

    pub fn k(&self) -> usize {
        self.frames[0].k
    }

    pub fn bands(&self) -> usize {
        self.frames[0].b
    }

    /// Rebuild the exact operator that produced these measurements.
    pub fn rebuild_operator(&self) -> Result<SamplingOperator> {
        let op = build_sampler(self.n, self.rate, self.seed)?;
        if op.k != self.k() {
            return Err(CoreError::DimensionMismatch(format!(
                "rebuilt operator has k = {}, measurements have k = {}",
                op.k,
                self.k()
            )));
        }
        Ok(op)
    }
}

/// Write measurements in the HSM format: magic `HSM1`, u32 `n, k, b,
/// frame_count`, u64 `seed`, f64 `rate` (all little-endian), then `k * b`
/// f32 values per frame, bands consecutive within a frame.
pub fn save_measurements<P: AsRef<Path>>(video: &MeasurementVideo, path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&HSM_MAGIC)?;
    w.write_u32::<LittleEndian>(video.n as u32)?;
    w.write_u32::<LittleEndian>(video.k() as u32)?;
    w.write_u32::<LittleEndian>(video.bands() as u32)?;
    w.write_u32::<LittleEndian>(video.frames.len() as u32)?;
    w.write_u64::<LittleEndian>(video.seed)?;
    w.write_f64::<LittleEndian>(video.rate)?;
    for frame in &video.frames {
        for &v in &frame.values {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read an HSM measurement file written by [`save_measurements`].
pub fn load_measurements<P: AsRef<Path>>(path: P) -> Result<MeasurementVideo> {
    let file = File::open(path)?;
    let byte_len = file.metadata().map(|m| m.len()).unwrap_or(0);
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != HSM_MAGIC {
        return Err(CoreError::BadMagic {
            expected: HSM_MAGIC,
            found: magic,
        });
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let k = r.read_u32::<LittleEndian>()? as usize;
    let b = r.read_u32::<LittleEndian>()? as usize;
    let frame_count = r.read_u32::<LittleEndian>()? as usize;
    let seed = r.read_u64::<LittleEndian>()?;
    let rate = r.read_f64::<LittleEndian>()?;
    if n == 0 || k == 0 || b == 0 || frame_count == 0 {
        return Err(CoreError::InvalidArgument(
            "HSM header has a zero dimension".into(),
        ));
    }
    if k > n {
        return Err(CoreError::DimensionMismatch(format!(
            "HSM header has k = {k} > n = {n}"
        )));
    }
    let frame_len = k.checked_mul(b).ok_or(CoreError::DimensionOverflow)?;
    let total = frame_len
        .checked_mul(frame_count)
        .and_then(|t| t.checked_mul(4))
        .ok_or(CoreError::DimensionOverflow)?;
    let header_bytes = 4 + 4 * 4 + 8 + 8;
    let found = byte_len.saturating_sub(header_bytes);
    if found != total as u64 {
        return Err(CoreError::Truncated {
            expected: total as u64,
            found,
        });
    }

    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let mut values = vec![0.0f64; frame_len];
        for v in values.iter_mut() {
            *v = r.read_f32::<LittleEndian>()? as f64;
        }
        frames.push(Measurements { k, b, rate, values });
    }
    MeasurementVideo::new(n, seed, rate, frames)
}
