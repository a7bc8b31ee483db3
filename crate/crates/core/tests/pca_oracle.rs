//! PCA cross-check against an independent Jacobi eigensolver: the 2D
//! projection must match the top-2 eigenvector projection (up to sign), its
//! per-column variances must equal the top eigenvalues, and the discarded
//! variance must equal the sum of the dropped eigenvalues.

use graphmix::{pca_2d, standard_normal, DenseMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors as columns), sorted by
/// descending eigenvalue.
fn jacobi_eigen(matrix: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols());
    let mut a = matrix.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q) * a.get(p, q);
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-30 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());
    let eigenvalues = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, col, v.get(row, i));
        }
    }
    (eigenvalues, vectors)
}

fn random_data(seed: u64, n: usize, d: usize) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DenseMatrix::zeros(n, d);
    // Anisotropic scales keep the eigenvalue spectrum well separated.
    let scales: Vec<f64> = (0..d).map(|k| 3.0 / (k + 1) as f64).collect();
    for row in 0..n {
        for (col, &scale) in scales.iter().enumerate() {
            x.set(row, col, scale * standard_normal(&mut rng));
        }
    }
    x
}

fn centered(x: &DenseMatrix) -> DenseMatrix {
    let mut c = x.clone();
    c.center_columns();
    c
}

fn covariance(xc: &DenseMatrix) -> DenseMatrix {
    let mut cov = xc.transpose_matmul(xc);
    cov.scale(1.0 / (xc.rows() - 1) as f64);
    cov
}

#[test]
fn projection_matches_jacobi_eigenvector_projection() {
    for seed in [1u64, 2, 3, 4, 5] {
        let x = random_data(seed, 40, 5);
        let projection = pca_2d(&x).unwrap();
        let xc = centered(&x);
        let (_, vectors) = jacobi_eigen(&covariance(&xc));
        for component in 0..2 {
            let oracle: Vec<f64> = (0..x.rows())
                .map(|row| {
                    (0..x.cols()).map(|k| xc.get(row, k) * vectors.get(k, component)).sum()
                })
                .collect();
            // Eigenvectors are sign-ambiguous; align before comparing.
            let dot: f64 =
                (0..x.rows()).map(|r| oracle[r] * projection.get(r, component)).sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            for (row, &o) in oracle.iter().enumerate() {
                let got = sign * projection.get(row, component);
                assert!(
                    (got - o).abs() <= 1e-6,
                    "seed {seed} component {component} row {row}: {got} vs oracle {o}"
                );
            }
        }
    }
}

#[test]
fn projection_variances_equal_top_two_eigenvalues() {
    let x = random_data(7, 60, 6);
    let projection = pca_2d(&x).unwrap();
    let (eigenvalues, _) = jacobi_eigen(&covariance(&centered(&x)));
    for component in 0..2 {
        let mean: f64 =
            (0..x.rows()).map(|r| projection.get(r, component)).sum::<f64>() / x.rows() as f64;
        let var: f64 = (0..x.rows())
            .map(|r| (projection.get(r, component) - mean).powi(2))
            .sum::<f64>()
            / (x.rows() - 1) as f64;
        assert!(
            (var - eigenvalues[component]).abs() <= 1e-6,
            "component {component}: variance {var} vs eigenvalue {}",
            eigenvalues[component]
        );
    }
}

#[test]
fn discarded_variance_equals_dropped_eigenvalue_sum() {
    let x = random_data(11, 50, 5);
    let projection = pca_2d(&x).unwrap();
    let xc = centered(&x);
    let (eigenvalues, _) = jacobi_eigen(&covariance(&xc));
    let total: f64 = xc.data().iter().map(|v| v * v).sum::<f64>() / (xc.rows() - 1) as f64;
    let kept: f64 = (0..2)
        .map(|component| {
            (0..x.rows()).map(|r| projection.get(r, component).powi(2)).sum::<f64>()
                / (xc.rows() - 1) as f64
        })
        .sum();
    let dropped: f64 = eigenvalues[2..].iter().sum();
    assert!(
        ((total - kept) - dropped).abs() <= 1e-6,
        "total {total} − kept {kept} should equal dropped {dropped}"
    );
}

#[test]
fn jacobi_oracle_solves_a_known_matrix() {
    // Eigenvalues of [[2,1],[1,2]] are 3 and 1 with eigenvectors (1,1)/√2
    // and (1,−1)/√2 — guards the oracle itself.
    let m = DenseMatrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]);
    let (values, vectors) = jacobi_eigen(&m);
    assert!((values[0] - 3.0).abs() < 1e-12);
    assert!((values[1] - 1.0).abs() < 1e-12);
    let ratio = vectors.get(0, 0) / vectors.get(1, 0);
    assert!((ratio - 1.0).abs() < 1e-9);
}
