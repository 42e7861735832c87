//! Shared test helpers: an eigensolver oracle independent of the
//! implementation's linear algebra.

use polarnet::Graph;

/// Cyclic Jacobi eigendecomposition on plain nested Vecs, sharing no
/// numerics with the nalgebra-based implementation under test. Returns
/// (eigenvalues, eigenvector columns).
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-30 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let eigenvalues = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// Brute-force Laplacian pseudoinverse: invert nonzero eigenvalues in the
/// Jacobi eigenbasis.
pub fn pinv_oracle(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut lap = vec![vec![0.0; n]; n];
    for &(a, b) in graph.edges() {
        lap[a][b] -= 1.0;
        lap[b][a] -= 1.0;
        lap[a][a] += 1.0;
        lap[b][b] += 1.0;
    }
    let (eigenvalues, v) = jacobi_eigen(lap);
    let max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = 1e-10 * max.max(1.0);
    let mut pinv = vec![vec![0.0; n]; n];
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        if lambda.abs() <= tol {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                pinv[i][j] += v[i][k] * v[j][k] / lambda;
            }
        }
    }
    pinv
}
