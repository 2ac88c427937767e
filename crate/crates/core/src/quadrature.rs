//! Gauss rules for the named weights on the reference interval `[-1, 1]`.
//!
//! Weights are normalized to sum to one, i.e. the rules integrate against the
//! probability measure proportional to the weight function.

use nalgebra::DMatrix;

/// Gauss–Chebyshev (first kind) rule for `(1/pi)(1 - x^2)^{-1/2} dx`.
pub fn gauss_chebyshev1(n: usize) -> (Vec<f64>, Vec<f64>) {
    let nodes = (0..n)
        .map(|k| -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    (nodes, vec![1.0 / n as f64; n])
}

/// Gauss–Jacobi rule for the weight `(1 - x)^a (1 + x)^b` via Golub–Welsch.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let ab = a + b;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        jac[(k, k)] = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            let off2 = if m == 1.0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + a) * (m + b) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            jac[(k, k + 1)] = off2.sqrt();
            jac[(k + 1, k)] = off2.sqrt();
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1 / total).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_jacobi(10, 0.0, 0.0);
        // E[x^2] under the uniform probability on [-1,1] is 1/3, E[x^8] = 1/9
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-14);
        assert!((m8 - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_chebyshev_matches_closed_form() {
        let (x, w) = gauss_jacobi(12, -0.5, -0.5);
        let (xc, wc) = gauss_chebyshev1(12);
        for i in 0..12 {
            assert!((x[i] - xc[i]).abs() < 1e-12);
            assert!((w[i] - wc[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_moment() {
        // weight (1-x): normalized mean is -1/3
        let (x, w) = gauss_jacobi(5, 1.0, 0.0);
        let mean: f64 = x.iter().zip(&w).map(|(x, w)| w * x).sum();
        assert!((mean + 1.0 / 3.0).abs() < 1e-14);
    }
}
