//! Shared linear-algebra and stochastic substrate: sparse Hermitian
//! operators, eigensolvers, reduced density matrices, reproducible
//! random streams.

mod density;
mod eigen;
mod jacobi;
mod rng;
mod sparse;

pub use density::{single_site_reduced_density, von_neumann_entropy};
pub use eigen::{
    degenerate_groups, dense_eigenpairs, fix_phase, lowest_eigenpairs, lowest_eigenpairs_seeded,
    lowest_eigenpairs_with, solve_lowest, EigenOptions, Spectrum, DEGENERACY_REL_TOL,
    DENSE_DIM_LIMIT,
};
pub use jacobi::{hermitian_eigen, symmetric_eigen_real};
pub use rng::RandomStream;
pub use sparse::{SparseBuilder, SparseOperator};

use num_complex::Complex64;

/// Inner product <a|b> with conjugation on the left argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// y += alpha * x
pub fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// v *= alpha
pub fn scale(v: &mut [Complex64], alpha: f64) {
    for x in v.iter_mut() {
        *x *= alpha;
    }
}
