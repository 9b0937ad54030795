use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as matrix columns. Jacobi is used instead of a
/// tridiagonalization-based solver because it keeps the eigenvector basis
/// orthogonal to machine precision even for exactly degenerate clusters.
pub fn hermitian_eigen(mat: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = mat.nrows();
    if mat.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mat.ncols(),
        });
    }
    // Work on the Hermitian average to suppress representation noise.
    let mut a = (mat + mat.adjoint()).scale(0.5);
    let mut v = DMatrix::<Complex64>::identity(n, n);
    if n <= 1 {
        let vals = (0..n).map(|i| a[(i, i)].re).collect();
        return Ok((vals, v));
    }

    let scale = a.norm().max(1e-300);
    let tol = 1e-15 * scale;
    let max_sweeps = 100;

    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let abs_apq = apq.norm();
                if abs_apq <= 1e-300 {
                    a[(p, q)] = Complex64::ZERO;
                    a[(q, p)] = Complex64::ZERO;
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Unitary plane rotation J (identity outside rows/cols p, q):
                //   J[p][p] = c, J[p][q] = s*u, J[q][p] = -s*conj(u), J[q][q] = c
                // with u = apq/|apq|; the angle zeroes (J^H A J)[p][q].
                let u = apq / abs_apq;
                let tau = (aqq - app) / (2.0 * abs_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A <- A J (columns p, q)
                for r in 0..n {
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    a[(r, p)] = arp * c - arq * s * u.conj();
                    a[(r, q)] = arp * s * u + arq * c;
                }
                // A <- J^H A (rows p, q)
                for r in 0..n {
                    let apr = a[(p, r)];
                    let aqr = a[(q, r)];
                    a[(p, r)] = apr * c - aqr * s * u;
                    a[(q, r)] = apr * s * u.conj() + aqr * c;
                }
                // Clean the annihilated pair and keep the diagonal real.
                a[(p, q)] = Complex64::ZERO;
                a[(q, p)] = Complex64::ZERO;
                a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

                // V <- V J
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp * c - vrq * s * u.conj();
                    v[(r, q)] = vrp * s * u + vrq * c;
                }
            }
        }
    }

    let mut off = 0.0f64;
    for p in 0..n {
        for q in p + 1..n {
            off += a[(p, q)].norm_sqr();
        }
    }
    if off.sqrt() > 1e3 * tol {
        return Err(Error::NoConvergence {
            iterations: max_sweeps,
            best_residual: off.sqrt(),
            tolerance: tol,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    Ok((values, vectors))
}

/// Real-symmetric convenience wrapper.
pub fn symmetric_eigen_real(mat: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mat.nrows();
    let complex = DMatrix::<Complex64>::from_fn(n, mat.ncols(), |i, j| {
        Complex64::new(mat[(i, j)], 0.0)
    });
    let (vals, vecs) = hermitian_eigen(&complex)?;
    let real_vecs = DMatrix::<f64>::from_fn(n, n, |i, j| vecs[(i, j)].re);
    Ok((vals, real_vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    #[test]
    fn diagonal_matrix_is_fixed_point() {
        let m = DMatrix::<Complex64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let (vals, _) = hermitian_eigen(&m).unwrap();
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn random_hermitian_residuals_and_orthogonality() {
        let n = 40;
        let mut stream = RandomStream::new(5, 0);
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(stream.normal(), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(stream.normal(), stream.normal());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        for k in 0..n {
            let v = vecs.column(k);
            let mv = &m * v;
            let r = (&mv - v.scale(vals[k])).norm();
            assert!(r < 1e-10 * m.norm(), "residual {r} at {k}");
        }
        let gram = vecs.adjoint() * &vecs;
        let dev = (&gram - DMatrix::<Complex64>::identity(n, n)).norm();
        assert!(dev < 1e-12, "orthogonality deviation {dev}");
    }

    #[test]
    fn degenerate_cluster_stays_clean() {
        // Projector-like matrix with an exactly threefold eigenvalue.
        let n = 6;
        let mut stream = RandomStream::new(9, 0);
        // random unitary via Gram-Schmidt on a random complex matrix
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        for _ in 0..n {
            let mut c: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(stream.normal(), stream.normal()))
                .collect();
            for b in &cols {
                let ov = crate::numerics::inner(b, &c);
                crate::numerics::axpy(&mut c, -ov, b);
            }
            let nc = crate::numerics::norm(&c);
            crate::numerics::scale(&mut c, 1.0 / nc);
            cols.push(c);
        }
        let u = DMatrix::<Complex64>::from_fn(n, n, |i, j| cols[j][i]);
        let d = [2.0, 2.0, 2.0, -1.0, 0.5, 7.0];
        let diag = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let m = &u * diag * u.adjoint();
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        let mut expect = d.to_vec();
        expect.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in 0..n {
            let v = vecs.column(k);
            let r = (&m * v - v.scale(vals[k])).norm();
            assert!(r < 1e-12, "residual {r} at {k}");
        }
    }
}
