use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Reduced density matrix of one subsystem of a pure state.
///
/// `local_dims` lists the local dimension of each site; the state is indexed
/// with the first site as the most significant digit. Returns the
/// `local_dims[site]`-dimensional density matrix obtained by tracing out the
/// other sites.
pub fn single_site_reduced_density(
    state: &[Complex64],
    site: usize,
    local_dims: &[usize],
) -> Result<DMatrix<Complex64>> {
    let total: usize = local_dims.iter().product();
    if total != state.len() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: state.len(),
        });
    }
    if site >= local_dims.len() {
        return Err(Error::InvalidParameter {
            name: "site",
            reason: format!("site {site} for {} sites", local_dims.len()),
        });
    }
    let d = local_dims[site];
    // Strides: index = left * (d * right_dim) + s * right_dim + right.
    let right_dim: usize = local_dims[site + 1..].iter().product();
    let left_dim: usize = local_dims[..site].iter().product();

    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for left in 0..left_dim {
        for right in 0..right_dim {
            for a in 0..d {
                let ia = (left * d + a) * right_dim + right;
                for b in 0..d {
                    let ib = (left * d + b) * right_dim + right;
                    rho[(a, b)] += state[ia] * state[ib].conj();
                }
            }
        }
    }
    Ok(rho)
}

/// Von Neumann entropy in bits: S = −Σ p log₂ p over the eigenvalues of rho.
pub fn von_neumann_entropy(rho: &DMatrix<Complex64>) -> Result<f64> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch {
            expected: rho.nrows(),
            got: rho.ncols(),
        });
    }
    let herm_dev = (rho - rho.adjoint()).norm();
    if herm_dev > 1e-10 {
        return Err(Error::NotHermitian {
            deviation: herm_dev,
        });
    }
    let trace: Complex64 = rho.trace();
    if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("trace {trace} differs from 1"),
        });
    }
    let (eigenvalues, _) = super::jacobi::hermitian_eigen(rho)?;
    let mut s = 0.0;
    for &p in eigenvalues.iter() {
        if p < -1e-10 {
            return Err(Error::NegativeEigenvalue { value: p });
        }
        if p > 0.0 {
            s -= p * p.log2();
        }
    }
    Ok(s.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn product_state_is_pure() {
        // |↑↑↑↑⟩ with ↑ = index 0
        let mut state = vec![Complex64::ZERO; 16];
        state[0] = c(1.0);
        let rho = single_site_reduced_density(&state, 1, &[2, 2, 2, 2]).unwrap();
        assert!((rho[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!(rho[(1, 1)].norm() < 1e-14);
        assert!(von_neumann_entropy(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn singlet_is_maximally_mixed() {
        // |Ψ⁻⟩ = (|01⟩ − |10⟩)/√2
        let inv = 1.0 / 2.0f64.sqrt();
        let state = vec![c(0.0), c(inv), c(-inv), c(0.0)];
        let rho = single_site_reduced_density(&state, 1, &[2, 2]).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-14);
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-14);
        assert!(rho[(0, 1)].norm() < 1e-14);
        assert!((von_neumann_entropy(&rho).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let state = vec![c(1.0); 8];
        assert!(matches!(
            single_site_reduced_density(&state, 0, &[2, 2, 2, 2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        let mut rho = DMatrix::<Complex64>::zeros(2, 2);
        rho[(0, 0)] = c(1.5);
        rho[(1, 1)] = c(-0.5);
        assert!(matches!(
            von_neumann_entropy(&rho),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn complementary_bipartitions_share_spectrum() {
        // random two-qubit pure state: reduced states of site 0 and site 1
        // have the same eigenvalues.
        let mut stream = crate::numerics::RandomStream::new(3, 0);
        let mut state: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(stream.normal(), stream.normal()))
            .collect();
        let n = crate::numerics::norm(&state);
        for x in state.iter_mut() {
            *x /= n;
        }
        let r0 = single_site_reduced_density(&state, 0, &[2, 2]).unwrap();
        let r1 = single_site_reduced_density(&state, 1, &[2, 2]).unwrap();
        let (e0, _) = crate::numerics::hermitian_eigen(&r0).unwrap();
        let (e1, _) = crate::numerics::hermitian_eigen(&r1).unwrap();
        for (a, b) in e0.iter().zip(&e1) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
