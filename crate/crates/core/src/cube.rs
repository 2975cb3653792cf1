//! Hyperspectral cube data model and HSC file I/O.
//!
//! A cube is an `n1 x n2 x b` radiance array stored band-major (band varies
//! slowest, rows within a band row-major). The whole pipeline works on the
//! flattened view: each band becomes a column vector of length `n = n1 * n2`,
//! flattened row-major, so element `(r, c)` of band `j` lands at row
//! `r * n2 + c` of column `j`. Values are `f64` in memory and `f32` on disk.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{CoreError, Result};

/// Magic bytes prefixing every HSC video file.
pub const HSC_MAGIC: [u8; 4] = *b"HSC1";

/// A single hyperspectral cube: `n1` rows, `n2` columns, `b` bands.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    n1: usize,
    n2: usize,
    b: usize,
    /// Band-major data of length `n1 * n2 * b`; band `j` occupies
    /// `data[j * n1 * n2 .. (j + 1) * n1 * n2]` in row-major order.
    data: Vec<f64>,
}

impl HyperCube {
    /// Build a cube from band-major data, checking shape and finiteness.
    pub fn new(n1: usize, n2: usize, b: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || b == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "cube dimensions must be positive, got {n1}x{n2}x{b}"
            )));
        }
        let expected = n1
            .checked_mul(n2)
            .and_then(|n| n.checked_mul(b))
            .ok_or(CoreError::DimensionOverflow)?;
        if data.len() != expected {
            return Err(CoreError::DimensionMismatch(format!(
                "cube {n1}x{n2}x{b} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { index });
        }
        Ok(Self { n1, n2, b, data })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn bands(&self) -> usize {
        self.b
    }

    /// Pixels per band (`n1 * n2`).
    pub fn pixels(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Row-major slice of one band.
    pub fn band(&self, j: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn value(&self, r: usize, c: usize, j: usize) -> f64 {
        self.data[j * self.pixels() + r * self.n2 + c]
    }

    /// Spectrum of the pixel at `(r, c)`: one value per band.
    pub fn pixel_spectrum(&self, r: usize, c: usize) -> Spectrum {
        let n = self.pixels();
        let offset = r * self.n2 + c;
        let values = (0..self.b).map(|j| self.data[j * n + offset]).collect();
        Spectrum { values }
    }
}

/// A cube with each band flattened to a column vector: the matrix
/// `X` with `n = n1 * n2` rows and `b` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatCube {
    n: usize,
    /// `b` columns, each of length `n`.
    columns: Vec<Vec<f64>>,
}

impl FlatCube {
    /// Assemble a flat cube from equal-length columns.
    pub fn new(columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(CoreError::InvalidArgument(
                "flat cube needs at least one column".into(),
            ));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "flat cube columns must be non-empty".into(),
            ));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(CoreError::DimensionMismatch(format!(
                    "column {j} has length {}, expected {n}",
                    col.len()
                )));
            }
        }
        Ok(Self { n, columns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bands(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Sum of per-column l1 norms; equals the l1 norm of the matrix
    /// flattened to a length `n * b` vector.
    pub fn l1_norm(&self) -> f64 {
        self.columns
            .iter()
            .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }
}

/// A time-ordered sequence of dimension-identical cubes.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeVideo {
    frames: Vec<HyperCube>,
}

impl CubeVideo {
    pub fn new(frames: Vec<HyperCube>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| CoreError::InvalidArgument("video must have at least one frame".into()))?;
        let (n1, n2, b) = (first.n1, first.n2, first.b);
        for (t, f) in frames.iter().enumerate() {
            if (f.n1, f.n2, f.b) != (n1, n2, b) {
                return Err(CoreError::DimensionMismatch(format!(
                    "frame {t} is {}x{}x{}, expected {n1}x{n2}x{b}",
                    f.n1, f.n2, f.b
                )));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[HyperCube] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &HyperCube {
        &self.frames[t]
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn n1(&self) -> usize {
        self.frames[0].n1
    }

    pub fn n2(&self) -> usize {
        self.frames[0].n2
    }

    pub fn bands(&self) -> usize {
        self.frames[0].b
    }
}

/// A spectral vector of length `b` (target signature or pixel under test).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Flatten each band of a cube to a column vector (row-major within the
/// band), producing the matrix `X`.
pub fn flatten(cube: &HyperCube) -> FlatCube {
    let n = cube.pixels();
    let columns = (0..cube.b).map(|j| cube.band(j).to_vec()).collect();
    FlatCube { n, columns }
}

/// Inverse of [`flatten`]: reshape columns back into an `n1 x n2 x b` cube.
pub fn unflatten(flat: &FlatCube, n1: usize, n2: usize) -> Result<HyperCube> {
    let n = n1
        .checked_mul(n2)
        .ok_or(CoreError::DimensionOverflow)?;
    if n != flat.n {
        return Err(CoreError::DimensionMismatch(format!(
            "{n1}x{n2} = {n} does not match flat length {}",
            flat.n
        )));
    }
    let mut data = Vec::with_capacity(n * flat.bands());
    for col in &flat.columns {
        data.extend_from_slice(col);
    }
    HyperCube::new(n1, n2, flat.bands(), data)
}

/// Extract the `h x w` spatial window with top-left corner `(r0, c0)` from
/// every band.
pub fn extract_roi(cube: &HyperCube, r0: usize, c0: usize, h: usize, w: usize) -> Result<HyperCube> {
    if h == 0 || w == 0 {
        return Err(CoreError::InvalidArgument(
            "window dimensions must be positive".into(),
        ));
    }
    let r_end = r0.checked_add(h).ok_or(CoreError::DimensionOverflow)?;
    let c_end = c0.checked_add(w).ok_or(CoreError::DimensionOverflow)?;
    if r_end > cube.n1 || c_end > cube.n2 {
        return Err(CoreError::InvalidArgument(format!(
            "window [{r0}..{r_end})x[{c0}..{c_end}) exceeds {}x{} bounds",
            cube.n1, cube.n2
        )));
    }
    let mut data = Vec::with_capacity(h * w * cube.b);
    for j in 0..cube.b {
        let band = cube.band(j);
        for r in r0..r_end {
            data.extend_from_slice(&band[r * cube.n2 + c0..r * cube.n2 + c_end]);
        }
    }
    HyperCube::new(h, w, cube.b, data)
}

/// Write a video in the HSC format: magic `HSC1`, u32 `n1, n2, b,
/// frame_count` (little-endian), then the frames as consecutive f32
/// payloads, each frame band-major, each band row-major.
pub fn save_video<P: AsRef<Path>>(video: &CubeVideo, path: P) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&HSC_MAGIC)?;
    w.write_u32::<LittleEndian>(video.n1() as u32)?;
    w.write_u32::<LittleEndian>(video.n2() as u32)?;
    w.write_u32::<LittleEndian>(video.bands() as u32)?;
    w.write_u32::<LittleEndian>(video.frame_count() as u32)?;
    for frame in video.frames() {
        for &v in frame.data() {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a video in the HSC format. Fails with distinct errors on bad magic,
/// dimension overflow, and truncated or oversized payloads.
pub fn load_video<P: AsRef<Path>>(path: P) -> Result<CubeVideo> {
    let file = File::open(path)?;
    let payload_hint = file.metadata().map(|m| m.len()).unwrap_or(0);
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != HSC_MAGIC {
        return Err(CoreError::BadMagic {
            expected: HSC_MAGIC,
            found: magic,
        });
    }
    let n1 = r.read_u32::<LittleEndian>()? as usize;
    let n2 = r.read_u32::<LittleEndian>()? as usize;
    let b = r.read_u32::<LittleEndian>()? as usize;
    let frame_count = r.read_u32::<LittleEndian>()? as usize;
    if n1 == 0 || n2 == 0 || b == 0 || frame_count == 0 {
        return Err(CoreError::InvalidArgument(
            "HSC header has a zero dimension".into(),
        ));
    }
    let frame_len = n1
        .checked_mul(n2)
        .and_then(|n| n.checked_mul(b))
        .ok_or(CoreError::DimensionOverflow)?;
    let total = frame_len
        .checked_mul(frame_count)
        .and_then(|t| t.checked_mul(4))
        .ok_or(CoreError::DimensionOverflow)?;
    let expected_bytes = total as u64;
    let found_bytes = payload_hint.saturating_sub(20);
    if found_bytes != expected_bytes {
        return Err(CoreError::Truncated {
            expected: expected_bytes,
            found: found_bytes,
        });
    }

    let mut frames = Vec::with_capacity(frame_count);
    for _ in 0..frame_count {
        let mut data = vec![0.0f64; frame_len];
        for v in data.iter_mut() {
            *v = r.read_f32::<LittleEndian>()? as f64;
        }
        frames.push(HyperCube::new(n1, n2, b, data)?);
    }
    CubeVideo::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_cube(n1: usize, n2: usize, b: usize, seed: u64) -> HyperCube {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let data = (0..n1 * n2 * b).map(|_| rng.random::<f64>()).collect();
        HyperCube::new(n1, n2, b, data).unwrap()
    }

    #[test]
    fn flatten_singleton() {
        let cube = HyperCube::new(1, 1, 1, vec![5.0]).unwrap();
        let flat = flatten(&cube);
        assert_eq!(flat.n(), 1);
        assert_eq!(flat.column(0), &[5.0]);
    }

    #[test]
    fn flatten_is_row_major() {
        let cube = HyperCube::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let flat = flatten(&cube);
        assert_eq!(flat.column(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn flatten_index_arithmetic() {
        // Element (r, c) of band j must land at row r * n2 + c of column j.
        let cube = random_cube(2, 2, 2, 1);
        let flat = flatten(&cube);
        assert_eq!(flat.bands(), 2);
        for j in 0..2 {
            assert_eq!(flat.column(j).len(), 4);
            for r in 0..2 {
                for c in 0..2 {
                    assert_eq!(flat.column(j)[r * 2 + c], cube.value(r, c, j));
                }
            }
        }
    }

    #[test]
    fn unflatten_round_trip() {
        let cube = random_cube(4, 4, 3, 2);
        let back = unflatten(&flatten(&cube), 4, 4).unwrap();
        assert_eq!(back, cube);
    }

    #[test]
    fn unflatten_rejects_bad_shape() {
        let flat = FlatCube::new(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert!(matches!(
            unflatten(&flat, 4, 2),
            Err(CoreError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn unflatten_column_layout() {
        let flat = FlatCube::new(vec![vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let cube = unflatten(&flat, 2, 2).unwrap();
        assert_eq!(cube.value(0, 0, 0), 1.0);
        assert_eq!(cube.value(0, 1, 0), 2.0);
        assert_eq!(cube.value(1, 0, 0), 3.0);
        assert_eq!(cube.value(1, 1, 0), 4.0);
    }

    #[test]
    fn video_round_trip_is_bitwise() {
        // f32 on disk: seed the cube from exact f32 values so the round trip
        // is bit-exact.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let frames: Vec<HyperCube> = (0..3)
            .map(|_| {
                let data = (0..8 * 8 * 4)
                    .map(|_| rng.random::<f32>() as f64)
                    .collect();
                HyperCube::new(8, 8, 4, data).unwrap()
            })
            .collect();
        let video = CubeVideo::new(frames).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("video.hsc");
        save_video(&video, &path).unwrap();
        let loaded = load_video(&path).unwrap();
        assert_eq!(loaded, video);
    }

    #[test]
    fn load_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.hsc");
        std::fs::write(&path, b"XXXX\x01\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_video(&path), Err(CoreError::BadMagic { .. })));
    }

    #[test]
    fn load_rejects_truncated_payload() {
        // Header promises 140 frames of 64x64x20 f32s; supply only one value.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.hsc");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&HSC_MAGIC);
        for dim in [64u32, 64, 20, 140] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match load_video(&path) {
            Err(CoreError::Truncated { expected, found }) => {
                assert_eq!(expected, 140 * 64 * 64 * 20 * 4);
                assert_eq!(found, 4);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_dimension_overflow() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("huge.hsc");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&HSC_MAGIC);
        for dim in [u32::MAX, u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_video(&path),
            Err(CoreError::DimensionOverflow)
        ));
    }

    #[test]
    fn roi_full_window_is_identity() {
        let cube = random_cube(4, 6, 2, 4);
        let roi = extract_roi(&cube, 0, 0, 4, 6).unwrap();
        assert_eq!(roi, cube);
    }

    #[test]
    fn roi_extracts_subwindow() {
        let cube = random_cube(128, 128, 20, 5);
        let roi = extract_roi(&cube, 10, 20, 64, 64).unwrap();
        assert_eq!((roi.n1(), roi.n2(), roi.bands()), (64, 64, 20));
        for j in 0..20 {
            for r in 0..64 {
                for c in 0..64 {
                    assert_eq!(roi.value(r, c, j), cube.value(10 + r, 20 + c, j));
                }
            }
        }
    }

    #[test]
    fn roi_rejects_out_of_bounds() {
        let cube = random_cube(4, 4, 1, 6);
        assert!(extract_roi(&cube, 2, 0, 3, 4).is_err());
        assert!(extract_roi(&cube, 0, 0, 4, 5).is_err());
    }

    #[test]
    fn cube_rejects_non_finite() {
        let err = HyperCube::new(1, 2, 1, vec![1.0, f64::NAN]);
        assert!(matches!(err, Err(CoreError::NonFinite { index: 1 })));
    }

    #[test]
    fn video_rejects_mismatched_frames() {
        let a = random_cube(2, 2, 1, 7);
        let b = random_cube(2, 3, 1, 8);
        assert!(CubeVideo::new(vec![a, b]).is_err());
    }
}
