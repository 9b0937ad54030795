//! Excitation-number, translation and inversion symmetries of the spin ring:
//! operator construction, state labelling, resolution of degenerate
//! eigenspaces into simultaneous symmetry eigenstates, and the matrix-element
//! cancellation identity behind the protected qubit pair.
//!
//! Basis convention: site m in 0..M holds one spin-1/2; digit 0 encodes spin
//! up (sigma_z = +1), digit 1 spin down, packed with site 0 as the most
//! significant digit. The excitation number operator counts up spins.

use num_complex::Complex64;

use crate::numerics::{inner, norm, SparseBuilder, SparseOperator};
use crate::{Error, Result};

/// Which symmetry operator to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    /// N = sum_m (1 + sigma_z_m)/2.
    Number,
    /// Cyclic translation with T sigma_m T^{-1} = sigma_{m+1}.
    Translation,
    /// Reflection with I sigma_m I = sigma_{M+1-m} (1-based sites).
    Inversion,
}

/// Simultaneous eigenvalues of (N, T, I) for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryLabels {
    /// Excitation number.
    pub n: i64,
    /// Translation eigenvalue, a root of unity.
    pub tau: Complex64,
    /// Inversion eigenvalue, +1 or -1; `None` when tau is complex so the
    /// state cannot be an inversion eigenstate.
    pub iota: Option<i8>,
    /// Worst eigen-residual among the classified operators.
    pub residual: f64,
}

fn digit(index: usize, site: usize, m: usize) -> usize {
    (index >> (m - 1 - site)) & 1
}

/// Index obtained by translating every site by one (site m -> m+1 cyclic).
fn translate_index(index: usize, m: usize) -> usize {
    let mut out = 0usize;
    for site in 0..m {
        let d = digit(index, site, m);
        let dest = (site + 1) % m;
        out |= d << (m - 1 - dest);
    }
    out
}

/// Index obtained by reflecting the ring (site m -> M-1-m, 0-based).
fn invert_index(index: usize, m: usize) -> usize {
    let mut out = 0usize;
    for site in 0..m {
        let d = digit(index, site, m);
        let dest = m - 1 - site;
        out |= d << (m - 1 - dest);
    }
    out
}

/// Build one of the ring symmetry operators on the 2^M spin space.
pub fn symmetry_operator(kind: SymmetryKind, m: usize) -> Result<SparseOperator> {
    if m < 2 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: format!("need at least 2 sites, got {m}"),
        });
    }
    let dim = 1usize << m;
    let mut b = SparseBuilder::new(dim);
    match kind {
        SymmetryKind::Number => {
            for idx in 0..dim {
                let ups = m - (idx.count_ones() as usize);
                b.add(idx, idx, Complex64::new(ups as f64, 0.0));
            }
            b.build(true)
        }
        SymmetryKind::Translation => {
            for idx in 0..dim {
                b.add(translate_index(idx, m), idx, Complex64::new(1.0, 0.0));
            }
            b.build(false)
        }
        SymmetryKind::Inversion => {
            for idx in 0..dim {
                b.add(invert_index(idx, m), idx, Complex64::new(1.0, 0.0));
            }
            b.build(true)
        }
    }
}

/// Apply the translation permutation to a state vector.
pub fn apply_translation(state: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; state.len()];
    for (idx, &amp) in state.iter().enumerate() {
        out[translate_index(idx, m)] = amp;
    }
    out
}

/// Apply the inversion permutation to a state vector.
pub fn apply_inversion(state: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; state.len()];
    for (idx, &amp) in state.iter().enumerate() {
        out[invert_index(idx, m)] = amp;
    }
    out
}

/// Apply a single-site Pauli operator (axis 0=x, 1=y, 2=z; site 0-based).
pub fn apply_pauli(state: &[Complex64], site: usize, axis: usize, m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; state.len()];
    let bit = 1usize << (m - 1 - site);
    for (idx, &amp) in state.iter().enumerate() {
        if amp == Complex64::ZERO {
            continue;
        }
        let up = idx & bit == 0;
        match axis {
            0 => out[idx ^ bit] += amp,
            1 => {
                // sigma_y |up> = i |down>, sigma_y |down> = -i |up>
                let f = if up {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
                out[idx ^ bit] += f * amp;
            }
            2 => {
                let s = if up { 1.0 } else { -1.0 };
                out[idx] += amp * s;
            }
            _ => unreachable!("axis must be 0..3"),
        }
    }
    out
}

fn rayleigh_and_residual(
    state: &[Complex64],
    applied: &[Complex64],
) -> (Complex64, f64) {
    let q = inner(state, applied);
    let mut r: Vec<Complex64> = applied.to_vec();
    for (ri, si) in r.iter_mut().zip(state) {
        *ri -= q * si;
    }
    (q, norm(&r))
}

/// Classify a state by its (N, T, I) eigenvalues via Rayleigh quotients.
///
/// The state must be a unit-norm simultaneous eigenvector within 1e-6 of N
/// and T; the inversion label is attached only when the translation
/// eigenvalue is real (otherwise inversion maps the state out of its
/// T-eigenspace and no label exists).
pub fn classify_state(state: &[Complex64], m: usize) -> Result<SymmetryLabels> {
    const TOL: f64 = 1e-6;
    if state.len() != 1 << m {
        return Err(Error::DimensionMismatch {
            expected: 1 << m,
            got: state.len(),
        });
    }

    let napp = apply_number(state, m);
    let (nq, nres) = rayleigh_and_residual(state, &napp);
    if nres > TOL {
        return Err(Error::NotAnEigenvector {
            operator: "excitation number",
            residual: nres,
        });
    }
    let n = nq.re.round() as i64;

    let tapp = apply_translation(state, m);
    let (tau, tres) = rayleigh_and_residual(state, &tapp);
    if tres > TOL {
        return Err(Error::NotAnEigenvector {
            operator: "translation",
            residual: tres,
        });
    }

    let mut residual = nres.max(tres);
    let iota = if tau.im.abs() < TOL {
        let iapp = apply_inversion(state, m);
        let (iq, ires) = rayleigh_and_residual(state, &iapp);
        if ires > TOL {
            return Err(Error::NotAnEigenvector {
                operator: "inversion",
                residual: ires,
            });
        }
        residual = residual.max(ires);
        Some(if iq.re >= 0.0 { 1 } else { -1 })
    } else {
        None
    };

    Ok(SymmetryLabels {
        n,
        tau,
        iota,
        residual,
    })
}

/// Apply the excitation-number operator.
pub fn apply_number(state: &[Complex64], m: usize) -> Vec<Complex64> {
    state
        .iter()
        .enumerate()
        .map(|(idx, &amp)| amp * (m - idx.count_ones() as usize) as f64)
        .collect()
}

/// One symmetry-resolved member of a degenerate group.
#[derive(Debug, Clone)]
pub struct ResolvedState {
    pub vector: Vec<Complex64>,
    pub labels: SymmetryLabels,
}

/// Rotate a degenerate eigenspace into simultaneous eigenstates of N, then
/// T, then I (the latter only within real-tau eigenspaces, since I maps tau
/// to its conjugate). Output is sorted by (n, Re tau, iota).
pub fn resolve_degenerate_group(
    vectors: &[Vec<Complex64>],
    m: usize,
) -> Result<Vec<ResolvedState>> {
    use nalgebra::DMatrix;
    let k = vectors.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let dim = 1usize << m;
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }

    // Project an operator application onto the subspace basis.
    let project = |applied: &[Vec<Complex64>]| -> DMatrix<Complex64> {
        DMatrix::from_fn(k, k, |i, j| inner(&vectors[i], &applied[j]))
    };
    let n_app: Vec<Vec<Complex64>> = vectors.iter().map(|v| apply_number(v, m)).collect();
    let t_app: Vec<Vec<Complex64>> = vectors.iter().map(|v| apply_translation(v, m)).collect();
    let i_app: Vec<Vec<Complex64>> = vectors.iter().map(|v| apply_inversion(v, m)).collect();
    let n_sub = project(&n_app);
    let t_sub = project(&t_app);
    let i_sub = project(&i_app);

    // Sequential diagonalization in subspace coordinates: each block of
    // coefficient vectors is refined by the next operator.
    let mut blocks: Vec<Vec<nalgebra::DVector<Complex64>>> =
        vec![(0..k).map(|i| unit_coeff(k, i)).collect()];

    // 1. excitation number (Hermitian)
    blocks = split_blocks(blocks, &n_sub, 1e-6, false)?;
    // 2. translation: unitary, diagonalize Hermitian and anti-Hermitian parts
    let t_h = (&t_sub + t_sub.adjoint()).scale(0.5);
    let t_a = (&t_sub - t_sub.adjoint()) * Complex64::new(0.0, -0.5);
    blocks = split_blocks(blocks, &t_h, 1e-6, false)?;
    blocks = split_blocks(blocks, &t_a, 1e-6, false)?;
    // 3. inversion, only where tau is real (anti-Hermitian part ~ 0)
    let mut resolved_coeffs: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(k);
    for block in blocks {
        let tau_im = rayleigh_sub(&t_a, &block[0]).re;
        if tau_im.abs() < 1e-6 && block.len() >= 1 {
            let refined = split_blocks(vec![block], &i_sub, 1e-6, false)?;
            for blk in refined {
                resolved_coeffs.extend(blk);
            }
        } else {
            resolved_coeffs.extend(block);
        }
    }

    // Map back to full space, classify, sort.
    let mut out: Vec<ResolvedState> = Vec::with_capacity(k);
    for c in resolved_coeffs {
        let mut v = vec![Complex64::ZERO; dim];
        for (j, basis_vec) in vectors.iter().enumerate() {
            crate::numerics::axpy(&mut v, c[j], basis_vec);
        }
        let nv = norm(&v);
        if nv < 1e-12 {
            return Err(Error::UnresolvedDegeneracy {
                reason: "resolved coefficient vector collapsed to zero".into(),
            });
        }
        crate::numerics::scale(&mut v, 1.0 / nv);
        crate::numerics::fix_phase(&mut v);
        let labels = classify_state(&v, m).map_err(|e| Error::UnresolvedDegeneracy {
            reason: format!("resolved state fails classification: {e}"),
        })?;
        out.push(ResolvedState { vector: v, labels });
    }
    out.sort_by(|a, b| {
        (a.labels.n, a.labels.tau.re, a.labels.iota.unwrap_or(0))
            .partial_cmp(&(b.labels.n, b.labels.tau.re, b.labels.iota.unwrap_or(0)))
            .unwrap()
    });
    Ok(out)
}

fn unit_coeff(k: usize, i: usize) -> nalgebra::DVector<Complex64> {
    let mut v = nalgebra::DVector::zeros(k);
    v[i] = Complex64::new(1.0, 0.0);
    v
}

fn rayleigh_sub(
    op: &nalgebra::DMatrix<Complex64>,
    c: &nalgebra::DVector<Complex64>,
) -> Complex64 {
    (c.adjoint() * op * c)[(0, 0)] / (c.adjoint() * c)[(0, 0)]
}

/// Refine blocks of coefficient vectors into eigen-blocks of a Hermitian
/// operator restricted to each block's span.
fn split_blocks(
    blocks: Vec<Vec<nalgebra::DVector<Complex64>>>,
    op: &nalgebra::DMatrix<Complex64>,
    tol: f64,
    _unused: bool,
) -> Result<Vec<Vec<nalgebra::DVector<Complex64>>>> {
    use nalgebra::{DMatrix, DVector};
    let mut out = Vec::new();
    for block in blocks {
        let b = block.len();
        if b == 1 {
            out.push(block);
            continue;
        }
        // Orthonormalize block coefficients (they are orthonormal already in
        // exact arithmetic; re-orthonormalize defensively).
        let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(b);
        for mut c in block {
            for q in &basis {
                let ov = (q.adjoint() * &c)[(0, 0)];
                c -= q * ov;
            }
            let nc = c.norm();
            if nc < 1e-10 {
                return Err(Error::UnresolvedDegeneracy {
                    reason: "degenerate block basis is rank-deficient".into(),
                });
            }
            basis.push(c / Complex64::new(nc, 0.0));
        }
        let sub = DMatrix::from_fn(b, b, |i, j| (basis[i].adjoint() * op * &basis[j])[(0, 0)]);
        let herm_dev = (&sub - sub.adjoint()).norm();
        if herm_dev > 1e-6 {
            return Err(Error::UnresolvedDegeneracy {
                reason: format!(
                    "operator does not preserve degenerate block (deviation {herm_dev:.3e})"
                ),
            });
        }
        let sub_h = (&sub + sub.adjoint()).scale(0.5);
        let (vals, vecs) = crate::numerics::hermitian_eigen(&sub_h).map_err(|e| {
            Error::UnresolvedDegeneracy {
                reason: format!("block eigensolve failed: {e}"),
            }
        })?;
        let mut current: Vec<DVector<Complex64>> = Vec::new();
        let mut current_val = f64::NAN;
        for i in 0..b {
            let val = vals[i];
            let mut vec = DVector::zeros(basis[0].len());
            for (j, q) in basis.iter().enumerate() {
                vec += q * vecs[(j, i)];
            }
            if current.is_empty() || (val - current_val).abs() <= tol {
                current.push(vec);
                current_val = val;
            } else {
                out.push(std::mem::take(&mut current));
                current.push(vec);
                current_val = val;
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
    }
    Ok(out)
}

/// Result of the matrix-element cancellation identity at one site.
#[derive(Debug, Clone)]
pub struct CancellationCheck {
    /// Max over Pauli axes of |<1|sigma|0> - <U1|sigma|U0>| with
    /// U = T^{2i-M-1} I; an operator identity, so small for any states.
    pub identity_residual: f64,
    /// Max over Pauli axes of the raw |<1|sigma_site|0>|.
    pub raw_element: f64,
}

/// Check the site-resolved cancellation identity: U_i = T^{2i-M-1} I fixes
/// site i, so <1|sigma_i|0> equals its U_i-conjugate; with opposite-sign real
/// translation labels and equal inversion labels the conjugate carries a
/// minus sign and the element must vanish.
pub fn cancellation_check(
    state0: &[Complex64],
    state1: &[Complex64],
    site: usize,
    m: usize,
) -> Result<CancellationCheck> {
    if m % 2 != 0 {
        return Err(Error::InvalidParameter {
            name: "M",
            reason: "cancellation identity requires even M".into(),
        });
    }
    if site >= m {
        return Err(Error::InvalidParameter {
            name: "site",
            reason: format!("site {site} out of range for M = {m}"),
        });
    }
    // U = T^k I with k = 2(site+1) - M - 1 (1-based site), taken mod M.
    let k = ((2 * (site as i64 + 1) - m as i64 - 1).rem_euclid(m as i64)) as usize;
    let apply_u = |s: &[Complex64]| {
        let mut v = apply_inversion(s, m);
        for _ in 0..k {
            v = apply_translation(&v, m);
        }
        v
    };
    let u0 = apply_u(state0);
    let u1 = apply_u(state1);

    let mut identity_residual = 0.0f64;
    let mut raw_element = 0.0f64;
    for axis in 0..3 {
        let s0 = apply_pauli(state0, site, axis, m);
        let m1 = inner(state1, &s0);
        let su0 = apply_pauli(&u0, site, axis, m);
        let m2 = inner(&u1, &su0);
        identity_residual = identity_residual.max((m1 - m2).norm());
        raw_element = raw_element.max(m1.norm());
    }
    Ok(CancellationCheck {
        identity_residual,
        raw_element,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn translation_has_finite_order() {
        let m = 4;
        let t = symmetry_operator(SymmetryKind::Translation, m).unwrap();
        let dim = 1 << m;
        for col in 0..dim {
            let mut v = vec![Complex64::ZERO; dim];
            v[col] = c(1.0);
            for _ in 0..m {
                v = t.apply(&v);
            }
            for (i, x) in v.iter().enumerate() {
                let expect = if i == col { 1.0 } else { 0.0 };
                assert!((x.re - expect).abs() < 1e-12 && x.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inversion_squares_to_identity() {
        let m = 6;
        let dim = 1 << m;
        for col in [0usize, 5, 17, 63] {
            let mut v = vec![Complex64::ZERO; dim];
            v[col] = c(1.0);
            let w = apply_inversion(&apply_inversion(&v, m), m);
            assert_eq!(
                w.iter().position(|x| x.norm() > 0.5).unwrap(),
                col
            );
        }
    }

    #[test]
    fn number_counts_up_spins() {
        // |up up down down> : digits 0011 -> index 3
        let m = 4;
        let mut v = vec![Complex64::ZERO; 16];
        v[3] = c(1.0);
        let nv = apply_number(&v, m);
        assert!((nv[3].re - 2.0).abs() < 1e-14);
        let labels = classify_state(&{
            // |up up up up>
            let mut w = vec![Complex64::ZERO; 16];
            w[0] = c(1.0);
            w
        }, m)
        .unwrap();
        assert_eq!(labels.n, 4);
        assert!((labels.tau - c(1.0)).norm() < 1e-10);
        assert_eq!(labels.iota, Some(1));
    }

    #[test]
    fn translation_commutation_with_inversion() {
        // T I = I T^{-1}: check on every basis state of M=6.
        let m = 6;
        let dim = 1 << m;
        for col in 0..dim {
            let mut v = vec![Complex64::ZERO; dim];
            v[col] = c(1.0);
            let lhs = apply_translation(&apply_inversion(&v, m), m);
            // T^{-1} = T^{M-1}
            let mut rhs = v.clone();
            for _ in 0..m - 1 {
                rhs = apply_translation(&rhs, m);
            }
            rhs = apply_inversion(&rhs, m);
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn classify_rejects_non_eigenvector() {
        let m = 4;
        let mut v = vec![Complex64::ZERO; 16];
        v[0] = c(1.0 / 2.0f64.sqrt()); // n = 4
        v[3] = c(1.0 / 2.0f64.sqrt()); // n = 2
        assert!(matches!(
            classify_state(&v, m),
            Err(Error::NotAnEigenvector { .. })
        ));
    }

    #[test]
    fn labels_invariant_under_global_phase() {
        let m = 4;
        let mut v = vec![Complex64::ZERO; 16];
        v[0] = c(1.0);
        let a = classify_state(&v, m).unwrap();
        let ph = Complex64::from_polar(1.0, 1.234);
        let w: Vec<Complex64> = v.iter().map(|x| x * ph).collect();
        let b = classify_state(&w, m).unwrap();
        assert_eq!(a.n, b.n);
        assert!((a.tau - b.tau).norm() < 1e-10);
        assert_eq!(a.iota, b.iota);
    }

    #[test]
    fn resolve_plane_wave_pair() {
        // Degenerate span of |1000> and |0100> shifted states: the N=3
        // single-down-spin sector of the zero Hamiltonian. Take two basis
        // states and resolve; outputs must be T eigenstates.
        let m = 4;
        let dim = 1 << m;
        let mk = |idx: usize| {
            let mut v = vec![Complex64::ZERO; dim];
            v[idx] = c(1.0);
            v
        };
        // all four single-down states (translations of each other)
        let group = vec![mk(0b1000), mk(0b0100), mk(0b0010), mk(0b0001)];
        let resolved = resolve_degenerate_group(&group, m).unwrap();
        assert_eq!(resolved.len(), 4);
        for r in &resolved {
            assert_eq!(r.labels.n, 3);
            assert!((r.labels.tau.norm() - 1.0).abs() < 1e-8);
            assert!(r.labels.residual < 1e-8);
            assert!((r.labels.tau.powu(m as u32) - c(1.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn cancellation_identity_holds_for_any_states() {
        let m = 4;
        let mut s0 = vec![Complex64::ZERO; 16];
        let mut s1 = vec![Complex64::ZERO; 16];
        let mut stream = crate::numerics::RandomStream::new(11, 0);
        for x in s0.iter_mut().chain(s1.iter_mut()) {
            *x = Complex64::new(stream.normal(), stream.normal());
        }
        let n0 = norm(&s0);
        let n1 = norm(&s1);
        crate::numerics::scale(&mut s0, 1.0 / n0);
        crate::numerics::scale(&mut s1, 1.0 / n1);
        for site in 0..m {
            let chk = cancellation_check(&s0, &s1, site, m).unwrap();
            assert!(chk.identity_residual < 1e-10, "site {site}");
        }
    }
}
