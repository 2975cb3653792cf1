//! Solver correctness: feasibility trend, closed-form u-update against a
//! conjugate-gradient oracle, projection identity, exact sparse recovery,
//! and the smooth-background regression bound at 10% sampling.

use hypercs_core::cube::flatten;
use hypercs_core::sampling::{apply, apply_adjoint, build_sampler, SamplingOperator};
use hypercs_core::solver::{reconstruct_band, reconstruct_cube, SolverConfig};
use hypercs_core::synth;
use hypercs_core::wavelet::{haar_forward, haar_inverse, WaveletCoeffs};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    num / l2(want)
}

/// Ground truth `x = H^{-1} c` with `c` exactly `sparsity`-sparse,
/// magnitudes in [1, 2), random signs.
fn sparse_truth(n: usize, sparsity: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut slots: Vec<usize> = (0..n).collect();
    slots.shuffle(&mut rng);
    let mut coeffs = vec![0.0; n];
    for &slot in slots.iter().take(sparsity) {
        let mag = 1.0 + rng.random::<f64>();
        coeffs[slot] = if rng.random::<bool>() { mag } else { -mag };
    }
    haar_inverse(&WaveletCoeffs::from_values(coeffs).unwrap())
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

#[test]
fn feasibility_residual_is_non_increasing() {
    // The constraint residual after outer iteration t is non-increasing in
    // t (up to 1e-12 slack) when each Bregman subproblem is solved to
    // optimality, so the inner loop runs to convergence here. Residuals are
    // observed by re-running the deterministic solver with increasing
    // iteration caps.
    for seed in 0..3u64 {
        let n = 256;
        let op = build_sampler(n, 0.3, 40 + seed).unwrap();
        let x = sparse_truth(n, 12, 50 + seed);
        let y = apply(&op, &x).unwrap();
        let mut last = f64::INFINITY;
        for t in 1..=25 {
            let cfg = SolverConfig {
                max_outer: t,
                max_inner: 500,
                tol_change: 1e-13,
                tol_constraint: 1e-14,
                ..SolverConfig::default()
            };
            let (_, report) = reconstruct_band(&y, &op, &cfg).unwrap();
            assert!(
                report.final_constraint_residual <= last + 1e-12,
                "seed {seed}, outer {t}: residual rose from {last} to {}",
                report.final_constraint_residual
            );
            last = report.final_constraint_residual;
        }
    }
}

/// Conjugate gradient for `(lambda I + mu A^T A) u = w`, with `A = S H^{-1}`
/// applied through the public fast paths. Independent of the closed-form
/// projection inverse inside the solver.
fn cg_solve(op: &SamplingOperator, lambda: f64, mu: f64, w: &[f64], iters: usize) -> Vec<f64> {
    let n = w.len();
    let matvec = |v: &[f64]| -> Vec<f64> {
        let x = haar_inverse(&WaveletCoeffs::from_values(v.to_vec()).unwrap());
        let av = apply(op, &x).unwrap();
        let atav = haar_forward(&apply_adjoint(op, &av).unwrap())
            .unwrap()
            .into_values();
        (0..n).map(|i| lambda * v[i] + mu * atav[i]).collect()
    };
    let mut u = vec![0.0; n];
    let mut r = w.to_vec();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..iters {
        let ap = matvec(&p);
        let alpha = rs / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new.sqrt() < 1e-14 {
            break;
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    u
}

#[test]
fn closed_form_update_matches_conjugate_gradient() {
    // u = (w - mu/(lambda+mu) P w) / lambda must solve
    // (lambda I + mu P) u = w, where P = A^T A.
    for (lambda, mu, seed) in [(1.0, 1.0, 60u64), (0.5, 2.0, 61), (3.0, 0.7, 62)] {
        let n = 256;
        let op = build_sampler(n, 0.3, seed).unwrap();
        let w = random_vec(n, 70 + seed);

        let x = haar_inverse(&WaveletCoeffs::from_values(w.clone()).unwrap());
        let aw = apply(&op, &x).unwrap();
        let pw = haar_forward(&apply_adjoint(&op, &aw).unwrap())
            .unwrap()
            .into_values();
        let coeff = mu / (lambda + mu);
        let closed: Vec<f64> = (0..n).map(|i| (w[i] - coeff * pw[i]) / lambda).collect();

        let iterative = cg_solve(&op, lambda, mu, &w, 200);
        let err = rel_err(&closed, &iterative);
        assert!(
            err < 1e-8,
            "lambda={lambda}, mu={mu}: closed form vs CG differ by {err}"
        );
    }
}

#[test]
fn projection_identity_a_at_is_identity() {
    // A A^T = S H^{-1} (S H^{-1})^T = S S^T = I, the orthonormality the
    // closed-form update rests on.
    let op = build_sampler(1024, 0.2, 80).unwrap();
    for trial in 0..20 {
        let y = random_vec(op.k(), 90 + trial);
        let x = haar_inverse(
            &haar_forward(&apply_adjoint(&op, &y).unwrap()).unwrap(),
        );
        let back = apply(&op, &x).unwrap();
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn exact_recovery_across_seeds() {
    for seed in 0..4u64 {
        let op = build_sampler(1024, 0.3, 300 + seed).unwrap();
        let x = sparse_truth(1024, 20, 400 + seed);
        let y = apply(&op, &x).unwrap();
        let (got, report) = reconstruct_band(&y, &op, &SolverConfig::default()).unwrap();
        let err = rel_err(&got, &x);
        assert!(
            err < 1e-4,
            "seed {seed}: error {err} after {} outer iterations",
            report.outer_iterations
        );
        assert!(report.outer_iterations <= 200);
    }
}

#[test]
fn smooth_background_cube_reconstructs_within_regression_bound() {
    // One frame of the default synthetic scenario, 10% sampling: per-band
    // relative error stays under the pinned regression bound of 0.1. The
    // background is dyadic-plateau, hence genuinely Haar-compressible.
    let mut cfg = synth::default_scenario();
    cfg.noise_sigma = 0.0;
    let (video, _) = synth::generate_video(&cfg).unwrap();
    let frame = flatten(video.frame(0));

    let op = build_sampler(frame.n(), 0.10, 7).unwrap();
    let meas = hypercs_core::sampling::sample_cube(&op, &frame).unwrap();
    let (recon, _) = reconstruct_cube(&meas, &op, &SolverConfig::default()).unwrap();

    for j in 0..frame.bands() {
        let err = rel_err(recon.column(j), frame.column(j));
        assert!(err < 0.1, "band {j}: relative error {err}");
    }
}
