//! Small row-major square matrices.
//!
//! Only what channel materialization and the covariance oracle need; this is
//! not a general linear-algebra type.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Materialized channel matrix `C_a(n)` (or its inverse), `2^n x 2^n`.
pub type DenseChannelMatrix = DenseMatrix;

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length is not `dim * dim`.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "expected {dim}x{dim} entries");
        Self { dim, entries }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.entries[i * m.dim + i] = *v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.dim.max(1))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.entries[j * self.dim + i] = self.entries[i * self.dim + j];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let out_row = &mut out.entries[i * n..(i + 1) * n];
            for k in 0..n {
                let lhs = self.entries[i * n + k];
                if lhs == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.entries[k * n..(k + 1) * n];
                for (o, r) in out_row.iter_mut().zip(rhs_row) {
                    *o += lhs * r;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "dimension mismatch in matvec");
        self.rows()
            .take(self.dim)
            .map(|row| row.iter().zip(v).map(|(c, x)| c * x).sum())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dim];
        for row in self.rows().take(self.dim) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Largest absolute entrywise difference; `f64::INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Symmetric about both the main diagonal and the anti-diagonal, within `tol`.
    pub fn is_bisymmetric(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let v = self.get(i, j);
                (v - self.get(j, i)).abs() <= tol && (v - self.get(n - 1 - j, n - 1 - i)).abs() <= tol
            })
        })
    }

    /// Distinct entry values, sorted descending, merging values closer than `tol`.
    pub fn distinct_values(&self, tol: f64) -> Vec<f64> {
        let mut values = self.entries.clone();
        values.sort_by(|x, y| y.total_cmp(x));
        values.dedup_by(|x, y| (*x - *y).abs() <= tol);
        values
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix({}x{}) [", self.dim, self.dim)?;
        for row in self.rows().take(self.dim) {
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

/// An empty vector with room for `len` values. Large buffers are marked as
/// candidates for transparent huge pages, which cuts first-touch page faults
/// when a big matrix is filled.
pub(crate) fn large_buffer(len: usize) -> Vec<f64> {
    let buf = Vec::with_capacity(len);
    #[cfg(target_os = "linux")]
    advise_huge_pages(&buf);
    buf
}

#[cfg(target_os = "linux")]
fn advise_huge_pages(buf: &Vec<f64>) {
    const HUGE: usize = 1 << 21;
    let bytes = buf.capacity() * std::mem::size_of::<f64>();
    if bytes < 4 * HUGE {
        return;
    }
    let start = buf.as_ptr() as usize;
    let end = start + bytes;
    let aligned = (start + HUGE - 1) & !(HUGE - 1);
    if aligned < end {
        // SAFETY: the range lies inside this allocation and the call is only
        // advisory; a failure leaves ordinary pages in place.
        unsafe {
            libc::madvise(aligned as *mut libc::c_void, end - aligned, libc::MADV_HUGEPAGE);
        }
    }
}
