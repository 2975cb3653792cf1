//! Orthonormal 1-D Haar transform, the sparsifying basis of the solver.
//!
//! The transform is full depth (`L = log2 n` levels) with the orthonormal
//! pair `(a, b) -> ((a + b)/sqrt(2), (a - b)/sqrt(2))` applied recursively to
//! the approximation half, so the analysis matrix `H` is orthogonal and
//! `H^{-1} = H^T`. Inputs must have power-of-two length; non-conforming
//! lengths are rejected rather than padded, because padding would silently
//! change the measurement model downstream.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::cube::FlatCube;
use crate::error::{CoreError, Result};

/// Coefficients of a full-depth Haar analysis. `values[0]` is the scaling
/// coefficient; details follow coarsest to finest.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    values: Vec<f64>,
    levels: u32,
}

impl WaveletCoeffs {
    /// Wrap a raw coefficient vector (power-of-two length) so it can be
    /// synthesized with [`haar_inverse`].
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let levels = check_power_of_two(values.len())?;
        Ok(Self { values, levels })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Decomposition depth `L = log2 n`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_power_of_two(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(CoreError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

/// In-place full-depth Haar analysis; `scratch` must be at least as long as
/// `buf`. Length is assumed to be a power of two.
pub(crate) fn haar_forward_in_place(buf: &mut [f64], scratch: &mut [f64]) {
    let mut len = buf.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let a = buf[2 * i];
            let b = buf[2 * i + 1];
            scratch[i] = (a + b) * FRAC_1_SQRT_2;
            scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
        }
        buf[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

/// In-place full-depth Haar synthesis (inverse of
/// [`haar_forward_in_place`]).
pub(crate) fn haar_inverse_in_place(buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for i in 0..half {
            let s = buf[i];
            let d = buf[half + i];
            scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
        }
        buf[..len].copy_from_slice(&scratch[..len]);
        len *= 2;
    }
}

/// Full-depth orthonormal Haar analysis of a power-of-two-length signal.
pub fn haar_forward(x: &[f64]) -> Result<WaveletCoeffs> {
    let levels = check_power_of_two(x.len())?;
    let mut values = x.to_vec();
    let mut scratch = vec![0.0; x.len()];
    haar_forward_in_place(&mut values, &mut scratch);
    Ok(WaveletCoeffs { values, levels })
}

/// Haar synthesis: reconstruct the signal from its coefficients.
pub fn haar_inverse(coeffs: &WaveletCoeffs) -> Vec<f64> {
    let mut out = coeffs.values.clone();
    let mut scratch = vec![0.0; out.len()];
    haar_inverse_in_place(&mut out, &mut scratch);
    out
}

/// Column-wise Haar analysis of a flat cube: the matrix `U = HX`.
pub fn haar_forward_cube(flat: &FlatCube) -> Result<FlatCube> {
    check_power_of_two(flat.n())?;
    let mut scratch = vec![0.0; flat.n()];
    let columns = flat
        .columns()
        .iter()
        .map(|col| {
            let mut out = col.clone();
            haar_forward_in_place(&mut out, &mut scratch);
            out
        })
        .collect();
    FlatCube::new(columns)
}

/// Column-wise Haar synthesis, inverse of [`haar_forward_cube`].
pub fn haar_inverse_cube(flat: &FlatCube) -> Result<FlatCube> {
    check_power_of_two(flat.n())?;
    let mut scratch = vec![0.0; flat.n()];
    let columns = flat
        .columns()
        .iter()
        .map(|col| {
            let mut out = col.clone();
            haar_inverse_in_place(&mut out, &mut scratch);
            out
        })
        .collect();
    FlatCube::new(columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn l2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn constant_signal_is_one_sparse() {
        for log_n in 0..8 {
            let n = 1usize << log_n;
            let c = 3.25;
            let coeffs = haar_forward(&vec![c; n]).unwrap();
            assert!((coeffs.values()[0] - (n as f64).sqrt() * c).abs() < 1e-12);
            for &v in &coeffs.values()[1..] {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn four_ones_transform() {
        let coeffs = haar_forward(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let expected = [2.0, 0.0, 0.0, 0.0];
        for (got, want) in coeffs.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(coeffs.levels(), 2);
    }

    #[test]
    fn inverse_of_scaling_coefficient() {
        let coeffs = haar_forward(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        let back = haar_inverse(&coeffs);
        for v in back {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            haar_forward(&[0.0; 6]),
            Err(CoreError::NotPowerOfTwo(6))
        ));
        assert!(matches!(
            haar_forward(&[]),
            Err(CoreError::NotPowerOfTwo(0))
        ));
    }

    #[test]
    fn round_trip_length_4096() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..4096).map(|_| rng.random::<f64>() - 0.5).collect();
        let back = haar_inverse(&haar_forward(&x).unwrap());
        let err: f64 = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err / l2(&x) < 1e-10);
    }

    #[test]
    fn zero_maps_to_zero() {
        let coeffs = haar_forward(&[0.0; 8]).unwrap();
        assert!(coeffs.values().iter().all(|&v| v == 0.0));
        assert!(haar_inverse(&coeffs).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_is_conserved() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for log_n in [1, 4, 9, 16] {
            let n = 1usize << log_n;
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let coeffs = haar_forward(&x).unwrap();
            let rel = (l2(coeffs.values()) - l2(&x)).abs() / l2(&x);
            assert!(rel < 1e-10, "n={n}: relative energy error {rel}");
        }
    }

    #[test]
    fn cube_transform_matches_per_column() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let columns: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..16).map(|_| rng.random::<f64>()).collect())
            .collect();
        let flat = FlatCube::new(columns.clone()).unwrap();
        let transformed = haar_forward_cube(&flat).unwrap();
        for (j, col) in columns.iter().enumerate() {
            let single = haar_forward(col).unwrap();
            assert_eq!(transformed.column(j), single.values());
        }
        let back = haar_inverse_cube(&transformed).unwrap();
        for j in 0..3 {
            for (a, b) in back.column(j).iter().zip(&columns[j]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cube_l1_norm_is_sum_of_columns() {
        let flat = FlatCube::new(vec![vec![1.0, -2.0], vec![3.0, -4.0]]).unwrap();
        assert!((flat.l1_norm() - 10.0).abs() < 1e-15);
        let per_column: f64 = (0..2)
            .map(|j| flat.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .sum();
        assert_eq!(flat.l1_norm(), per_column);
    }
}
