//! Eigen-analysis of induced transition matrices and the geometry of the
//! 1-eigensubspace `span{e}`.
//!
//! The projection and distance helpers only need the mean of a vector and
//! never touch the eigensolver, so the learning-path experiments stay usable
//! on instances where the full eigenbasis is degenerate.

use std::fmt::Write as _;

use faer::linalg::solvers::Eigen;
use faer::prelude::*;
use faer::{c64, Mat};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mdp::InducedTransition;
use crate::numeric::{fmt_f64, l2_norm, mean};

/// Default tolerance for every spectral-assumption test.
pub const ASSUMPTION_TOL: f64 = 1e-8;

/// Eigenvalues within this distance of 1 are treated as one cluster whose
/// basis is re-anchored on `e`.
const UNIT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// The eigenvalue-1 cluster first, then non-increasing magnitude; ties
    /// broken by larger real part, then larger imaginary part, so conjugate
    /// pairs stay adjacent.
    pub eigenvalues: Vec<Complex64>,
    /// Column `i` is the unit-norm eigenvector of `eigenvalues[i]`.
    pub eigenvectors: Mat<c64>,
    pub diagonalizable: bool,
    /// `|lambda_i| - |lambda_{i+1}|`.
    pub magnitude_gaps: Vec<f64>,
    /// Smallest singular value of the eigenvector matrix.
    pub basis_sigma_min: f64,
    /// Largest relative eigenpair residual `|P h - lambda h| / |h|`.
    pub max_residual: f64,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|r| self.eigenvectors[(r, i)]).collect()
    }

    /// CSV with columns `index,re_lambda,im_lambda,magnitude,gap_to_next`;
    /// the last row leaves the gap empty.
    pub fn spectral_csv(&self) -> String {
        let mut out = String::from("index,re_lambda,im_lambda,magnitude,gap_to_next\n");
        for (i, lambda) in self.eigenvalues.iter().enumerate() {
            let gap = self.magnitude_gaps.get(i).map(|g| fmt_f64(*g)).unwrap_or_default();
            let _ = writeln!(
                out,
                "{i},{},{},{},{gap}",
                fmt_f64(lambda.re),
                fmt_f64(lambda.im),
                fmt_f64(lambda.norm())
            );
        }
        out
    }
}

fn singular_values_real(m: &Mat<f64>) -> Option<Vec<f64>> {
    m.singular_values().ok()
}

fn condition_estimate(m: &Mat<f64>) -> f64 {
    match singular_values_real(m) {
        Some(s) if !s.is_empty() => s[0] / s[s.len() - 1],
        _ => f64::INFINITY,
    }
}

fn normalize_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    // rotate so the largest-magnitude component is real and positive
    let pivot = v
        .iter()
        .copied()
        .fold(Complex64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() + 1e-12 { z } else { best });
    let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
    for z in v.iter_mut() {
        *z = *z * phase / norm;
    }
}

/// Replaces the computed basis of the eigenvalue-1 cluster by an orthonormal
/// basis of the same span whose first vector is `e / sqrt(N)`.
fn anchor_unit_cluster(vectors: &mut [Vec<Complex64>]) {
    let n = vectors.first().map_or(0, Vec::len);
    let e = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut basis: Vec<Vec<Complex64>> = vec![vec![e; n]];
    let mut candidates: Vec<Vec<Complex64>> = vectors.to_vec();
    // drop the candidate most parallel to e; the rest complete the span
    let overlap = |v: &Vec<Complex64>| v.iter().map(|z| *z * e).sum::<Complex64>().norm();
    if let Some(drop) = (0..candidates.len()).max_by(|&a, &b| overlap(&candidates[a]).total_cmp(&overlap(&candidates[b]))) {
        candidates.remove(drop);
    }
    for mut v in candidates {
        for b in &basis {
            let dot: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        normalize_phase(&mut v);
        basis.push(v);
    }
    for (slot, b) in vectors.iter_mut().zip(basis) {
        *slot = b;
    }
}

/// Full eigendecomposition of a row-stochastic matrix.
pub fn eigendecompose(p_pi: &InducedTransition) -> Result<EigenDecomposition> {
    let m = p_pi.matrix();
    let n = m.nrows();
    let evd = Eigen::new_from_real(m.as_ref()).map_err(|_| Error::Eigensolver {
        condition: condition_estimate(m),
    })?;

    let raw_values: Vec<Complex64> = (0..n).map(|i| evd.S()[i]).collect();
    if raw_values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigensolver {
            condition: condition_estimate(m),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (raw_values[a], raw_values[b]);
        zb.norm()
            .total_cmp(&za.norm())
            .then(zb.re.total_cmp(&za.re))
            .then(zb.im.total_cmp(&za.im))
    });
    // periodic chains put other roots of unity at modulus 1 up to rounding;
    // the unit cluster always leads
    let is_unit = |i: &usize| (raw_values[*i] - Complex64::new(1.0, 0.0)).norm() <= UNIT_CLUSTER_TOL;
    let (mut order, rest): (Vec<usize>, Vec<usize>) = order.into_iter().partition(is_unit);
    order.extend(rest);
    let eigenvalues: Vec<Complex64> = order.iter().map(|&i| raw_values[i]).collect();
    let mut vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&i| {
            let mut v: Vec<Complex64> = (0..n).map(|r| evd.U()[(r, i)]).collect();
            normalize_phase(&mut v);
            v
        })
        .collect();

    let unit_cluster: Vec<usize> = (0..n)
        .filter(|&i| (eigenvalues[i] - Complex64::new(1.0, 0.0)).norm() <= UNIT_CLUSTER_TOL)
        .collect();
    if !unit_cluster.is_empty() && unit_cluster.iter().enumerate().all(|(k, &i)| k == i) {
        anchor_unit_cluster(&mut vectors[..unit_cluster.len()]);
    }

    let eigenvectors = Mat::from_fn(n, n, |r, c| vectors[c][r]);
    let sigma = eigenvectors.singular_values().map_err(|_| Error::Eigensolver {
        condition: condition_estimate(m),
    })?;
    let basis_sigma_min = sigma.last().copied().unwrap_or(0.0);

    let mut max_residual = 0.0_f64;
    for (lambda, v) in eigenvalues.iter().zip(&vectors) {
        let mut res = 0.0;
        for r in 0..n {
            let pv: Complex64 = (0..n).map(|c| v[c] * m[(r, c)]).sum();
            res += (pv - lambda * v[r]).norm_sqr();
        }
        let vnorm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        max_residual = max_residual.max(res.sqrt() / vnorm);
    }

    let magnitude_gaps = eigenvalues.windows(2).map(|w| w[0].norm() - w[1].norm()).collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        diagonalizable: basis_sigma_min >= ASSUMPTION_TOL,
        magnitude_gaps,
        basis_sigma_min,
        max_residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Eigenvalue with a non-negligible imaginary part.
    Complex { index: usize, im: f64 },
    /// Eigenvector matrix is numerically singular.
    RankDeficient { sigma_min: f64 },
    /// `|lambda_index| - |lambda_{index+1}|` below tolerance.
    MagnitudeTie { index: usize, gap: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub holds: bool,
    pub tol: f64,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn summary(&self) -> String {
        if self.holds {
            return "real-diagonalizable with strictly decreasing magnitudes".into();
        }
        let (mut complex, mut ties, mut rank) = (0, 0, None);
        for v in &self.violations {
            match v {
                Violation::Complex { .. } => complex += 1,
                Violation::MagnitudeTie { .. } => ties += 1,
                Violation::RankDeficient { sigma_min } => rank = Some(*sigma_min),
            }
        }
        let mut parts = Vec::new();
        if complex > 0 {
            parts.push(format!("{complex} complex eigenvalue(s)"));
        }
        if ties > 0 {
            parts.push(format!("{ties} magnitude tie(s)"));
        }
        if let Some(s) = rank {
            parts.push(format!("rank-deficient eigenbasis (sigma_min {s:e})"));
        }
        format!("assumption fails (tol {:e}): {}", self.tol, parts.join(", "))
    }
}

/// Tests real diagonalizability with strictly decreasing eigenvalue magnitudes.
pub fn check_assumption_one(decomp: &EigenDecomposition, tol: f64) -> AssumptionReport {
    let mut violations = Vec::new();
    for (index, lambda) in decomp.eigenvalues.iter().enumerate() {
        if lambda.im.abs() > tol {
            violations.push(Violation::Complex { index, im: lambda.im });
        }
    }
    if decomp.basis_sigma_min < tol {
        violations.push(Violation::RankDeficient {
            sigma_min: decomp.basis_sigma_min,
        });
    }
    for (index, gap) in decomp.magnitude_gaps.iter().enumerate() {
        if *gap < tol {
            violations.push(Violation::MagnitudeTie { index, gap: *gap });
        }
    }
    AssumptionReport {
        holds: violations.is_empty(),
        tol,
        violations,
    }
}

/// Closest point to `b` on `span{e}`: the constant vector at `mean(b)`.
pub fn project_to_one_eigensubspace(b: &[f64]) -> Result<Vec<f64>> {
    if b.is_empty() {
        return Err(Error::param("b", "cannot project an empty vector"));
    }
    Ok(vec![mean(b); b.len()])
}

/// Euclidean distance from `b` to `span{e}`; zero for an empty vector.
pub fn distance_to_one_eigensubspace(b: &[f64]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let m = mean(b);
    b.iter().map(|x| (x - m) * (x - m)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct ErrorDecomposition {
    /// Coefficients of the initial error in the eigenbasis.
    pub coefficients: Vec<Complex64>,
    /// Euclidean norm of the reconstruction error.
    pub residual: f64,
}

/// Expresses `error0` as a combination of eigenvectors.
pub fn decompose_error(decomp: &EigenDecomposition, error0: &[f64]) -> Result<ErrorDecomposition> {
    let n = decomp.dim();
    if error0.len() != n {
        return Err(Error::shape("error vector", n, error0.len()));
    }
    if !decomp.diagonalizable {
        return Err(Error::NotDiagonalizable(Box::new(check_assumption_one(
            decomp,
            ASSUMPTION_TOL,
        ))));
    }
    let rhs = Mat::from_fn(n, 1, |i, _| c64::new(error0[i], 0.0));
    let alpha = decomp.eigenvectors.partial_piv_lu().solve(&rhs);
    let coefficients: Vec<Complex64> = (0..n).map(|i| alpha[(i, 0)]).collect();
    let residual = (0..n)
        .map(|r| {
            let recon: Complex64 = (0..n).map(|c| decomp.eigenvectors[(r, c)] * coefficients[c]).sum();
            (recon - error0[r]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt();
    Ok(ErrorDecomposition {
        coefficients,
        residual,
    })
}

/// Evaluates `sum_i alpha_i exp(t (gamma lambda_i - 1)) H_i` at each time.
///
/// The sum is formed in complex arithmetic; conjugate pairs cancel their
/// imaginary parts. Residue up to `1e-8 * max(1, |error0|)` is dropped, more
/// is an error.
pub fn predict_error_trajectory(
    decomp: &EigenDecomposition,
    error: &ErrorDecomposition,
    gamma: f64,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = decomp.dim();
    if error.coefficients.len() != n {
        return Err(Error::shape("coefficients", n, error.coefficients.len()));
    }
    let scale = {
        let recon: Vec<f64> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| decomp.eigenvectors[(r, c)] * error.coefficients[c])
                    .sum::<Complex64>()
                    .re
            })
            .collect();
        l2_norm(&recon).max(1.0)
    };
    times
        .iter()
        .map(|&t| {
            let weights: Vec<Complex64> = decomp
                .eigenvalues
                .iter()
                .zip(&error.coefficients)
                .map(|(lambda, alpha)| alpha * (t * (gamma * lambda - 1.0)).exp())
                .collect();
            let mut row = Vec::with_capacity(n);
            let mut residue = 0.0_f64;
            for r in 0..n {
                let z: Complex64 = (0..n).map(|c| decomp.eigenvectors[(r, c)] * weights[c]).sum();
                residue = residue.max(z.im.abs());
                row.push(z.re);
            }
            if residue > 1e-8 * scale {
                return Err(Error::ImaginaryResidue { residue });
            }
            Ok(row)
        })
        .collect()
}
