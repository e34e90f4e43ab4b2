//! Dense symmetric eigensolvers: cyclic Jacobi for full matrices and
//! implicit-shift QL for the tridiagonal systems Lanczos produces.
//!
//! Jacobi is slower than tridiagonalization but unconditionally robust and
//! delivers orthogonal eigenvectors at machine precision, which is what the
//! oracle role of the dense path needs.

/// Eigendecomposition of a symmetric matrix given as a row-major n×n buffer.
/// Returns eigenvalues ascending and matching unit eigenvectors (each a
/// length-n column).
pub(crate) fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n > 0 {
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for _sweep in 0..64 {
            let off: f64 = {
                let mut s = 0.0;
                for p in 0..n {
                    for q in (p + 1)..n {
                        s += a[p * n + q] * a[p * n + q];
                    }
                }
                (2.0 * s).sqrt()
            };
            if off <= 1e-15 * norm {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    let (app, aqq) = (a[p * n + p], a[q * n + q]);
                    a[p * n + p] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                    a[q * n + q] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for i in 0..n {
                        if i != p && i != q {
                            let aip = a[i * n + p];
                            let aiq = a[i * n + q];
                            a[i * n + p] = c * aip - s * aiq;
                            a[p * n + i] = a[i * n + p];
                            a[i * n + q] = s * aip + c * aiq;
                            a[q * n + i] = a[i * n + q];
                        }
                        let vip = v[i * n + p];
                        let viq = v[i * n + q];
                        v[i * n + p] = c * vip - s * viq;
                        v[i * n + q] = s * vip + c * viq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].partial_cmp(&a[y * n + y]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&j| a[j * n + j]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    (vals, vecs)
}

/// Eigendecomposition of a symmetric tridiagonal matrix (diagonal `d`,
/// off-diagonal `e`, `e.len() == d.len() - 1`) by QL with implicit shifts.
/// Returns eigenvalues ascending and eigenvectors of the tridiagonal system
/// (length-k columns).
pub(crate) fn tridiag_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0f64; n];
    e[..n - 1].copy_from_slice(off);
    let mut z = vec![0.0f64; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }

    for l in 0..n {
        let mut iter = 0;
        loop {
            // find the first negligible off-diagonal at or after l
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0f64, 1.0f64);
            let mut p = 0.0f64;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[k * n + i + 1];
                    z[k * n + i + 1] = s * z[k * n + i] + c * f;
                    z[k * n + i] = c * z[k * n + i] - s * f;
                }
                if i == l {
                    d[l] -= p;
                    e[l] = g;
                    e[m] = 0.0;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| z[i * n + j]).collect())
        .collect();
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct_residual(a: &[f64], n: usize, vals: &[f64], vecs: &[Vec<f64>]) -> f64 {
        let mut worst = 0.0f64;
        for (lam, v) in vals.iter().zip(vecs) {
            let mut r = 0.0;
            for i in 0..n {
                let mut av = 0.0;
                for j in 0..n {
                    av += a[i * n + j] * v[j];
                }
                r += (av - lam * v[i]).powi(2);
            }
            worst = worst.max(r.sqrt());
        }
        worst
    }

    #[test]
    fn jacobi_on_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1usize, 2, 5, 30, 80] {
            let mut a = vec![0.0f64; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen::<f64>() - 0.5;
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let (vals, vecs) = jacobi_eigen(a.clone(), n);
            assert!(reconstruct_residual(&a, n, &vals, &vecs) < 1e-11);
            for w in vals.windows(2) {
                assert!(w[0] <= w[1]);
            }
            // orthonormal columns
            for x in 0..n {
                for y in x..n {
                    let dot: f64 = vecs[x].iter().zip(&vecs[y]).map(|(a, b)| a * b).sum();
                    let want = if x == y { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn jacobi_handles_degenerate_spectra() {
        // diag(2, 2, 2, 0) rotated is still exactly resolvable
        let n = 4;
        let a = vec![
            1.5, 0.5, 0.0, -0.5, //
            0.5, 1.5, 0.0, 0.5, //
            0.0, 0.0, 2.0, 0.0, //
            -0.5, 0.5, 0.0, 1.5,
        ];
        let (vals, vecs) = jacobi_eigen(a.clone(), n);
        assert!(reconstruct_residual(&a, n, &vals, &vecs) < 1e-13);
    }

    #[test]
    fn tridiagonal_matches_jacobi() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1usize, 2, 3, 10, 60] {
            let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let e: Vec<f64> = (0..n.saturating_sub(1)).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut full = vec![0.0f64; n * n];
            for i in 0..n {
                full[i * n + i] = d[i];
                if i + 1 < n {
                    full[i * n + i + 1] = e[i];
                    full[(i + 1) * n + i] = e[i];
                }
            }
            let (tv, tvec) = tridiag_eigen(&d, &e);
            assert!(reconstruct_residual(&full, n, &tv, &tvec) < 1e-11);
            let (jv, _) = jacobi_eigen(full, n);
            for (a, b) in tv.iter().zip(jv) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }
}
