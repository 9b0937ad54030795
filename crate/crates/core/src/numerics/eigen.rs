use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{axpy, inner, norm, scale, RandomStream, SparseOperator};
use crate::{Error, Result};

/// Relative gap below which eigenvalues are treated as degenerate.
pub const DEGENERACY_REL_TOL: f64 = 1e-8;

/// Ordered eigenpairs of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending eigenvalues (GHz).
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// ||H v - E v|| per pair.
    pub residual_norms: Vec<f64>,
}

impl Spectrum {
    /// Index ranges of degenerate groups: eigenvalues closer than
    /// `DEGENERACY_REL_TOL` times the spectral width are grouped.
    pub fn degenerate_groups(&self) -> Vec<std::ops::Range<usize>> {
        degenerate_groups(&self.eigenvalues, DEGENERACY_REL_TOL)
    }
}

/// Group ascending eigenvalues into clusters separated by less than
/// `rel_tol` times the spectral width.
pub fn degenerate_groups(eigenvalues: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    if eigenvalues.is_empty() {
        return Vec::new();
    }
    let width = (eigenvalues[eigenvalues.len() - 1] - eigenvalues[0]).abs().max(1e-300);
    let tol = rel_tol * width.max(eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs())));
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..eigenvalues.len() {
        if eigenvalues[i] - eigenvalues[i - 1] > tol {
            groups.push(start..i);
            start = i;
        }
    }
    groups.push(start..eigenvalues.len());
    groups
}

/// Options for the iterative solver.
#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance relative to a bound on ||H||.
    pub tol: f64,
    /// Maximum matrix applications per eigenpair.
    pub max_iter: usize,
    /// Basis size at which a thick restart is performed.
    pub max_basis: usize,
    /// Number of Ritz vectors retained across a restart.
    pub restart_keep: usize,
    /// Seed for the deterministic start vectors.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 8000,
            max_basis: 220,
            restart_keep: 18,
            seed: 0x5eed_1a3c,
        }
    }
}

/// Below this dimension a full dense diagonalization is cheaper and more
/// reliable than the iterative solver.
pub const DENSE_DIM_LIMIT: usize = 1024;

/// Lowest `k` eigenpairs, dispatching to the dense solver for small
/// operators and deflated Lanczos otherwise.
pub fn solve_lowest(op: &SparseOperator, k: usize, tol: f64) -> Result<Spectrum> {
    if op.dim() <= DENSE_DIM_LIMIT {
        dense_eigenpairs(op)
    } else {
        lowest_eigenpairs(op, k.min(op.dim()), tol)
    }
}

/// Lowest `k` eigenpairs by deflated Lanczos with full reorthogonalization
/// and thick restarts. Deterministic up to phase and degenerate-subspace
/// rotation; the phase is fixed so the largest component is real positive.
pub fn lowest_eigenpairs(op: &SparseOperator, k: usize, tol: f64) -> Result<Spectrum> {
    lowest_eigenpairs_with(
        op,
        k,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

/// As [`lowest_eigenpairs`] with explicit options.
pub fn lowest_eigenpairs_with(
    op: &SparseOperator,
    k: usize,
    opts: &EigenOptions,
) -> Result<Spectrum> {
    lowest_eigenpairs_seeded(op, k, opts, &[])
}

/// As [`lowest_eigenpairs_with`], warm-started from approximate eigenvectors
/// (one per target, in ascending order; missing or degenerate entries fall
/// back to the deterministic random start). Useful when solving a family of
/// nearby operators, e.g. finite-difference stencils.
pub fn lowest_eigenpairs_seeded(
    op: &SparseOperator,
    k: usize,
    opts: &EigenOptions,
    starts: &[Vec<Complex64>],
) -> Result<Spectrum> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: op.hermiticity_deviation(),
        });
    }
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("k = {k} outside 1..={n}"),
        });
    }
    if opts.tol <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: "tolerance must be positive".into(),
        });
    }

    let scale_bound = op.norm_bound().max(1e-300);
    let abs_tol = opts.tol * scale_bound;

    let mut locked_vecs: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let mut locked_vals: Vec<f64> = Vec::with_capacity(k);
    let mut locked_res: Vec<f64> = Vec::with_capacity(k);

    for target in 0..k {
        let start = starts.get(target).map(|v| v.as_slice());
        let (val, vec, res) = deflated_pair(op, &locked_vecs, target, abs_tol, opts, start)?;
        locked_vals.push(val);
        locked_vecs.push(vec);
        locked_res.push(res);
    }

    // Deflation returns values in nearly ascending order; enforce it.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| locked_vals[i]).collect();
    let mut eigenvectors: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    let residual_norms: Vec<f64> = order.iter().map(|&i| locked_res[i]).collect();
    for &i in &order {
        let mut v = std::mem::take(&mut locked_vecs[i]);
        fix_phase(&mut v);
        eigenvectors.push(v);
    }

    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residual_norms,
    })
}

/// One deflated eigenpair: smallest eigenvalue of H restricted to the
/// orthogonal complement of `locked`.
fn deflated_pair(
    op: &SparseOperator,
    locked: &[Vec<Complex64>],
    target: usize,
    abs_tol: f64,
    opts: &EigenOptions,
    start: Option<&[Complex64]>,
) -> Result<(f64, Vec<Complex64>, f64)> {
    let n = op.dim();
    let avail = n - locked.len();

    let mut stream = RandomStream::new(opts.seed, target as u64);
    let mut q: Vec<Complex64> = match start {
        Some(s) if s.len() == n && norm(s) > 1e-12 => s.to_vec(),
        _ => (0..n)
            .map(|_| Complex64::new(stream.normal(), stream.normal()))
            .collect(),
    };
    orthogonalize(&mut q, locked);
    orthogonalize(&mut q, locked);
    let mut qn = norm(&q);
    if qn < 1e-12 && start.is_some() {
        // Warm start collapsed onto the locked subspace; fall back to the
        // deterministic random start.
        q = (0..n)
            .map(|_| Complex64::new(stream.normal(), stream.normal()))
            .collect();
        orthogonalize(&mut q, locked);
        orthogonalize(&mut q, locked);
        qn = norm(&q);
    }
    if qn < 1e-12 {
        return Err(Error::NoConvergence {
            iterations: 0,
            best_residual: f64::INFINITY,
            tolerance: abs_tol,
        });
    }
    scale(&mut q, 1.0 / qn);

    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    // Projected matrix Q^H A Q, stored dense (small).
    let mut proj = DMatrix::<Complex64>::zeros(0, 0);
    let mut iterations = 0usize;
    let mut best_residual = f64::INFINITY;
    let norm_bound = op.norm_bound().max(1.0);
    // Rayleigh-Ritz is much more expensive than one Lanczos step, so
    // convergence is only probed periodically.
    const CHECK_INTERVAL: usize = 10;

    loop {
        // Append current q to the basis and extend the projection.
        basis.push(q.clone());
        let m = basis.len();
        let mut w = op.apply(&q);
        iterations += 1;
        orthogonalize(&mut w, locked);
        let mut col = vec![Complex64::ZERO; m];
        for (i, b) in basis.iter().enumerate() {
            let c = inner(b, &w);
            col[i] = c;
            axpy(&mut w, -c, b);
        }
        // second Gram-Schmidt pass for numerical orthogonality
        for b in locked.iter() {
            let c = inner(b, &w);
            axpy(&mut w, -c, b);
        }
        for (i, b) in basis.iter().enumerate() {
            let c = inner(b, &w);
            col[i] += c;
            axpy(&mut w, -c, b);
        }
        let beta = norm(&w);

        let mut newproj = DMatrix::<Complex64>::zeros(m, m);
        newproj.view_mut((0, 0), (m - 1, m - 1)).copy_from(&proj);
        for i in 0..m {
            newproj[(i, m - 1)] = col[i];
            newproj[(m - 1, i)] = col[i].conj();
        }
        newproj[(m - 1, m - 1)] = Complex64::new(col[m - 1].re, 0.0);
        proj = newproj;

        let exhausted = beta < 1e-13 * norm_bound || m == avail;
        let at_cap = m >= opts.max_basis;
        let out_of_budget = iterations >= opts.max_iter;
        if !(exhausted || at_cap || out_of_budget || m % CHECK_INTERVAL == 0) {
            debug_assert!(beta > 0.0);
            q = w;
            scale(&mut q, 1.0 / beta);
            continue;
        }

        // Rayleigh-Ritz on the projected matrix.
        let (ritz_vals, ritz_vecs) = super::jacobi::hermitian_eigen(&proj)?;
        let theta = ritz_vals[0];
        let s = ritz_vecs.column(0);
        let est_residual = beta * s[m - 1].norm();
        best_residual = best_residual.min(est_residual);

        if est_residual <= abs_tol || exhausted {
            // Assemble the Ritz vector and verify the true residual.
            let mut y = vec![Complex64::ZERO; n];
            for (i, b) in basis.iter().enumerate() {
                axpy(&mut y, s[i], b);
            }
            let yn = norm(&y);
            scale(&mut y, 1.0 / yn);
            let hy = op.apply(&y);
            let mut r = hy;
            axpy(&mut r, Complex64::new(-theta, 0.0), &y);
            // Project the residual off locked directions: the deflated
            // operator is what we solved.
            orthogonalize(&mut r, locked);
            let true_res = norm(&r);
            if true_res <= abs_tol.max(10.0 * est_residual) || exhausted {
                return Ok((theta, y, true_res));
            }
        }
        if out_of_budget {
            return Err(Error::NoConvergence {
                iterations,
                best_residual,
                tolerance: abs_tol,
            });
        }

        if at_cap && !exhausted {
            // Thick restart: keep the lowest Ritz vectors, continue with the
            // residual direction. The projected matrix is recomputed column
            // by column as vectors re-enter the basis, so no arrow bookkeeping
            // is needed beyond re-projection.
            let keep = opts.restart_keep.min(m - 1).max(1);
            let mut new_basis: Vec<Vec<Complex64>> = Vec::with_capacity(keep);
            let mut new_proj = DMatrix::<Complex64>::zeros(keep, keep);
            for j in 0..keep {
                let sj = ritz_vecs.column(j);
                let mut y = vec![Complex64::ZERO; n];
                for (i, b) in basis.iter().enumerate() {
                    axpy(&mut y, sj[i], b);
                }
                let yn = norm(&y);
                scale(&mut y, 1.0 / yn);
                new_basis.push(y);
                new_proj[(j, j)] = Complex64::new(ritz_vals[j], 0.0);
            }
            basis = new_basis;
            proj = new_proj;
            if beta > 1e-300 {
                // Continue with the residual direction; the next iteration
                // recovers the arrow couplings from exact inner products.
                q = w;
                scale(&mut q, 1.0 / beta);
                continue;
            }
        }

        if beta <= 1e-13 * norm_bound {
            // Invariant subspace smaller than requested accuracy demands:
            // restart with a fresh random direction orthogonal to everything.
            let mut fresh: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(stream.normal(), stream.normal()))
                .collect();
            orthogonalize(&mut fresh, locked);
            for b in &basis {
                let c = inner(b, &fresh);
                axpy(&mut fresh, -c, b);
            }
            let fnorm = norm(&fresh);
            if fnorm < 1e-12 {
                // Space exhausted; handled by `exhausted` above.
                continue;
            }
            scale(&mut fresh, 1.0 / fnorm);
            q = fresh;
        } else {
            q = w;
            scale(&mut q, 1.0 / beta);
        }
    }
}

fn orthogonalize(v: &mut [Complex64], against: &[Vec<Complex64>]) {
    for b in against {
        let c = inner(b, v);
        axpy(v, -c, b);
    }
}

/// Make the largest-magnitude component real and positive.
pub fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_norm = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let nrm = x.norm_sqr();
        if nrm > best_norm + 1e-18 {
            best_norm = nrm;
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let phase = pivot / pivot.norm();
        let corr = phase.conj();
        for x in v.iter_mut() {
            *x *= corr;
        }
    }
}

/// Full dense diagonalization (oracle / small systems).
pub fn dense_eigenpairs(op: &SparseOperator) -> Result<Spectrum> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: op.hermiticity_deviation(),
        });
    }
    let dense = op.to_dense();
    let (vals, vecs) = super::jacobi::hermitian_eigen(&dense)?;
    let n = op.dim();
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    let mut residual_norms = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: Vec<Complex64> = vecs.column(i).iter().copied().collect();
        fix_phase(&mut v);
        let hv = op.apply(&v);
        let mut r = hv;
        axpy(&mut r, Complex64::new(-vals[i], 0.0), &v);
        eigenvalues.push(vals[i]);
        residual_norms.push(norm(&r));
        eigenvectors.push(v);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SparseBuilder;

    fn diag_op(values: &[f64]) -> SparseOperator {
        SparseOperator::from_real_diagonal(values)
    }

    #[test]
    fn two_by_two_diagonal() {
        let op = diag_op(&[0.0, 5.0]);
        let s = lowest_eigenpairs(&op, 2, 1e-10).unwrap();
        assert!((s.eigenvalues[0] - 0.0).abs() < 1e-10);
        assert!((s.eigenvalues[1] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_k() {
        let op = diag_op(&[0.0, 5.0]);
        assert!(lowest_eigenpairs(&op, 0, 1e-10).is_err());
        assert!(lowest_eigenpairs(&op, 3, 1e-10).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut b = SparseBuilder::new(2);
        b.add(0, 1, Complex64::new(1.0, 0.0));
        b.add(1, 0, Complex64::new(2.0, 0.0));
        let op = b.build(false).unwrap();
        assert!(matches!(
            lowest_eigenpairs(&op, 1, 1e-10),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn random_hermitian_matches_dense() {
        let n = 60;
        let mut stream = RandomStream::new(7, 0);
        let mut b = SparseBuilder::new(n);
        for i in 0..n {
            b.add(i, i, Complex64::new(stream.normal() * 3.0, 0.0));
        }
        for _ in 0..200 {
            let i = (stream.uniform() * n as f64) as usize % n;
            let j = (stream.uniform() * n as f64) as usize % n;
            if i == j {
                continue;
            }
            let v = Complex64::new(stream.normal(), stream.normal()) * 0.5;
            b.add_with_conjugate(i, j, v);
        }
        let op = b.build(true).unwrap();
        let dense = dense_eigenpairs(&op).unwrap();
        let iter = lowest_eigenpairs(&op, 6, 1e-11).unwrap();
        for i in 0..6 {
            assert!(
                (dense.eigenvalues[i] - iter.eigenvalues[i]).abs()
                    < 1e-9 * op.norm_bound().max(1.0),
                "pair {i}: dense {} vs iterative {}",
                dense.eigenvalues[i],
                iter.eigenvalues[i]
            );
        }
    }

    #[test]
    fn degenerate_eigenvalues_found() {
        // 8x8 with a triple degeneracy at the bottom.
        let op = diag_op(&[1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = lowest_eigenpairs(&op, 4, 1e-11).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-9);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-9);
        assert!((s.eigenvalues[2] - 1.0).abs() < 1e-9);
        assert!((s.eigenvalues[3] - 2.0).abs() < 1e-9);
        // orthonormality
        for i in 0..4 {
            for j in 0..4 {
                let d = inner(&s.eigenvectors[i], &s.eigenvectors[j]).norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10);
            }
        }
        let groups = s.degenerate_groups();
        assert_eq!(groups[0], 0..3);
    }

    #[test]
    fn residual_bound_holds() {
        let op = diag_op(&[0.4, 0.9, 1.7, 2.1, 9.0]);
        let s = lowest_eigenpairs(&op, 3, 1e-12).unwrap();
        for (i, &r) in s.residual_norms.iter().enumerate() {
            assert!(r <= 1e-10 * op.norm_bound(), "pair {i} residual {r}");
        }
    }
}
