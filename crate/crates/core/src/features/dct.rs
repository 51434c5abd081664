//! Orthonormal two-dimensional DCT-II.
//!
//! The transform is separable: a length-`n` DCT-II is the matrix
//! `A[k, i] = a_k cos(pi (2i + 1) k / 2n)` with `a_0 = sqrt(1/n)` and
//! `a_k = sqrt(2/n)` otherwise. `A` is orthogonal, so the 2-D transform
//! `A_r M A_c^T` preserves the Frobenius norm and is inverted by
//! `A_r^T Y A_c`.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// The first `keep` rows of the orthonormal DCT-II matrix of size `n`.
pub fn dct_basis(n: usize, keep: usize) -> Array2<f64> {
    assert!(keep <= n, "cannot keep {keep} of {n} frequencies");
    let dc = (1.0 / n as f64).sqrt();
    let ac = (2.0 / n as f64).sqrt();
    Array2::from_shape_fn((keep, n), |(k, i)| {
        let scale = if k == 0 { dc } else { ac };
        scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

fn check_input(m: &ArrayView2<'_, f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid("DCT input must be at least 1x1"));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("DCT input"));
    }
    Ok(())
}

/// Precomputed (possibly truncated) bases for a fixed input shape.
#[derive(Debug, Clone)]
pub struct DctPlan {
    row_basis: Array2<f64>,
    col_basis: Array2<f64>,
}

impl DctPlan {
    /// Full transform for `rows`×`cols` inputs.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self::low_frequency(rows, cols, rows, cols)
    }

    /// Computes only the top-left `keep_rows`×`keep_cols` coefficient block.
    pub fn low_frequency(rows: usize, cols: usize, keep_rows: usize, keep_cols: usize) -> Self {
        DctPlan {
            row_basis: dct_basis(rows, keep_rows),
            col_basis: dct_basis(cols, keep_cols),
        }
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.row_basis.ncols(), self.col_basis.ncols())
    }

    pub fn output_shape(&self) -> (usize, usize) {
        (self.row_basis.nrows(), self.col_basis.nrows())
    }

    pub fn forward(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_input(&m)?;
        let (rows, cols) = self.input_shape();
        if m.dim() != (rows, cols) {
            return Err(Error::invalid(format!(
                "DCT plan expects {rows}x{cols}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        // Along rows first (each row against the column basis), then columns.
        let along_rows = m.dot(&self.col_basis.t());
        Ok(self.row_basis.dot(&along_rows))
    }
}

/// Full orthonormal 2-D DCT-II.
pub fn dct2_orthonormal(m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_input(&m)?;
    DctPlan::new(m.nrows(), m.ncols()).forward(m)
}

/// Inverse of [`dct2_orthonormal`] (orthonormal DCT-III).
pub fn idct2_orthonormal(y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    check_input(&y)?;
    let rows = dct_basis(y.nrows(), y.nrows());
    let cols = dct_basis(y.ncols(), y.ncols());
    Ok(rows.t().dot(&y).dot(&cols))
}

/// Top-left `size`×`size` block of the DCT of `m`, flattened row-major.
pub fn low_frequency_block(m: ArrayView2<'_, f64>, size: usize) -> Result<Vec<f64>> {
    if size == 0 || size > m.nrows() || size > m.ncols() {
        return Err(Error::invalid(format!(
            "filter size {size} does not fit a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let plan = DctPlan::low_frequency(m.nrows(), m.ncols(), size, size);
    Ok(plan.forward(m)?.iter().copied().collect())
}
