use num_complex::Complex64;

use crate::{Error, Result};

/// Hermiticity check tolerance on entries.
const HERMITIAN_TOL: f64 = 1e-12;

/// Accumulating COO builder for [`SparseOperator`].
pub struct SparseBuilder {
    dim: usize,
    entries: std::collections::HashMap<(u32, u32), Complex64>,
}

impl SparseBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: std::collections::HashMap::new(),
        }
    }

    /// Add `value` at (row, col), accumulating duplicates.
    pub fn add(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.dim && col < self.dim);
        if value != Complex64::ZERO {
            *self
                .entries
                .entry((row as u32, col as u32))
                .or_insert(Complex64::ZERO) += value;
        }
    }

    /// Add `value` at (row, col) and its conjugate at (col, row).
    pub fn add_with_conjugate(&mut self, row: usize, col: usize, value: Complex64) {
        self.add(row, col, value);
        self.add(col, row, value.conj());
    }

    /// Finish into CSR form, checking Hermiticity when requested.
    pub fn build(self, hermitian: bool) -> Result<SparseOperator> {
        let mut triplets: Vec<(u32, u32, Complex64)> = self
            .entries
            .into_iter()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut indptr = vec![0usize; self.dim + 1];
        for &(r, _, _) in &triplets {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..self.dim {
            indptr[i + 1] += indptr[i];
        }
        let indices: Vec<u32> = triplets.iter().map(|t| t.1).collect();
        let data: Vec<Complex64> = triplets.iter().map(|t| t.2).collect();

        let op = SparseOperator {
            dim: self.dim,
            indptr,
            indices,
            data,
            hermitian,
        };
        if hermitian {
            let dev = op.hermiticity_deviation();
            if dev > HERMITIAN_TOL * op.max_abs_entry().max(1.0) {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(op)
    }
}

/// Sparse complex operator in CSR form, immutable after construction.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<Complex64>,
    hermitian: bool,
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Zero operator of the given dimension.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            data: Vec::new(),
            hermitian: true,
        }
    }

    /// Diagonal operator from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut b = SparseBuilder::new(dim);
        for (i, &v) in diag.iter().enumerate() {
            b.add(i, i, Complex64::new(v, 0.0));
        }
        b.build(true).expect("real diagonal is Hermitian")
    }

    /// y = A x
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for row in 0..self.dim {
            let mut acc = Complex64::ZERO;
            for k in self.indptr[row]..self.indptr[row + 1] {
                acc += self.data[k] * x[self.indices[k] as usize];
            }
            y[row] = acc;
        }
    }

    /// A x as a fresh vector.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::ZERO; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// <bra| A |ket>
    pub fn expectation(&self, bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
        let ax = self.apply(ket);
        super::inner(bra, &ax)
    }

    /// Entry-wise max |a_ij - conj(a_ji)|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                let col = self.indices[k] as usize;
                let transposed = self.get(col, row);
                dev = dev.max((self.data[k] - transposed.conj()).norm());
            }
        }
        dev
    }

    fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Entry lookup (binary search within the row).
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let lo = self.indptr[row];
        let hi = self.indptr[row + 1];
        match self.indices[lo..hi].binary_search(&(col as u32)) {
            Ok(k) => self.data[lo + k],
            Err(_) => Complex64::ZERO,
        }
    }

    /// Gershgorin upper bound on the spectral norm: max_i sum_j |a_ij|.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|row| {
                self.data[self.indptr[row]..self.indptr[row + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// A + B
    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut b = SparseBuilder::new(self.dim);
        for op in [self, other] {
            for row in 0..op.dim {
                for k in op.indptr[row]..op.indptr[row + 1] {
                    b.add(row, op.indices[k] as usize, op.data[k]);
                }
            }
        }
        b.build(self.hermitian && other.hermitian)
    }

    /// alpha * A
    pub fn scaled(&self, alpha: f64) -> SparseOperator {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        out
    }

    /// Dense copy as nalgebra matrix.
    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                m[(row, self.indices[k] as usize)] = self.data[k];
            }
        }
        m
    }

    /// Iterate over stored entries as (row, col, value).
    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |row| {
            (self.indptr[row]..self.indptr[row + 1])
                .map(move |k| (row, self.indices[k] as usize, self.data[k]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_accumulates_and_matvec() {
        let mut b = SparseBuilder::new(3);
        b.add(0, 1, Complex64::new(1.0, 2.0));
        b.add(0, 1, Complex64::new(1.0, 0.0));
        b.add(1, 0, Complex64::new(2.0, -2.0));
        b.add(2, 2, Complex64::new(5.0, 0.0));
        let op = b.build(true).unwrap();
        assert_eq!(op.nnz(), 3);
        let x = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 1.0),
        ];
        let y = op.apply(&x);
        assert!((y[0] - Complex64::new(2.0, 2.0) * Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((y[2] - Complex64::new(5.0, 5.0)).norm() < 1e-14);
    }

    #[test]
    fn hermiticity_enforced() {
        let mut b = SparseBuilder::new(2);
        b.add(0, 1, Complex64::new(1.0, 0.0));
        // missing conjugate entry
        let err = b.build(true);
        assert!(matches!(err, Err(Error::NotHermitian { .. })));
    }
}
