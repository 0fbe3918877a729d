//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use faer::prelude::*;
use faer::{Mat, Scale};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the unscaled [13/13] approximant is accurate to
/// unit roundoff in double precision.
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` for a square real matrix.
pub fn expm(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }

    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = if squarings > 0 {
        a * Scale(0.5_f64.powi(squarings))
    } else {
        a.clone()
    };

    let b = &PADE13;
    let ident = Mat::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * Scale(b[13]) + &a4 * Scale(b[11]) + &a2 * Scale(b[9]))
        + &a6 * Scale(b[7])
        + &a4 * Scale(b[5])
        + &a2 * Scale(b[3])
        + &ident * Scale(b[1]);
    let u = &a * &u_inner;
    let v = &a6 * (&a6 * Scale(b[12]) + &a4 * Scale(b[10]) + &a2 * Scale(b[8]))
        + &a6 * Scale(b[6])
        + &a4 * Scale(b[4])
        + &a2 * Scale(b[2])
        + &ident * Scale(b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let e = expm(&Mat::zeros(4, 4));
        for i in 0..4 {
            for j in 0..4 {
                assert!((e[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_entries_exponentiate() {
        let d = [-30.0, -1.0, 0.5, 2.0];
        let a = Mat::from_fn(4, 4, |i, j| if i == j { d[i] } else { 0.0 });
        let e = expm(&a);
        for (i, x) in d.iter().enumerate() {
            let rel = (e[(i, i)] - x.exp()).abs() / x.exp();
            assert!(rel < 1e-13, "{i}: {rel}");
        }
    }

    #[test]
    fn rotation_generator() {
        // exp([[0, -t], [t, 0]]) = [[cos t, -sin t], [sin t, cos t]]
        let t = 7.3;
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -t,
            (1, 0) => t,
            _ => 0.0,
        });
        let e = expm(&a);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-12);
        assert!((e[(1, 0)] - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn nilpotent_is_exact_polynomial() {
        // exp(N) = I + N + N^2/2 for a strictly upper triangular 3x3
        let a = Mat::from_fn(3, 3, |i, j| if j == i + 1 { 2.0 } else { 0.0 });
        let e = expm(&a);
        assert!((e[(0, 1)] - 2.0).abs() < 1e-14);
        assert!((e[(0, 2)] - 2.0).abs() < 1e-14);
        assert!(e[(2, 0)].abs() < 1e-15);
    }
}
