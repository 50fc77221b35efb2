//! Dense order-3 tensors, row-major matrices and the exact multilinear
//! operations used throughout the crate.
//!
//! Formulas in the docs use 1-based indices `(i, j, k)`; the API is 0-based.
//! Entry `(i, j, k)` of an `n1 x n2 x n3` tensor lives at linear offset
//! `(i * n2 + j) * n3 + k` (0-based), so a mode-1 slice `T[i, :, :]` is a
//! contiguous row-major `n2 x n3` block.
//!
//! Unfolding column conventions (0-based):
//!
//! | mode | shape          | entry `(i, j, k)` goes to   |
//! |------|----------------|-----------------------------|
//! | 1    | `n1 x n2*n3`   | row `i`, column `j*n3 + k`  |
//! | 2    | `n2 x n1*n3`   | row `j`, column `i*n3 + k`  |
//! | 3    | `n3 x n1*n2`   | row `k`, column `i*n2 + j`  |

use std::fmt;

use crate::error::{Error, Result};

/// Unfolding mode of an order-3 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// 0-based axis index.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;

    fn try_from(m: usize) -> Result<Self> {
        match m {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::arg(format!("unfolding mode must be 1, 2 or 3, got {m}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.axis() + 1)
    }
}

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(p) => Err(Error::Numeric(format!("{what} has a non-finite entry at offset {p}"))),
        None => Ok(()),
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat({}x{})", self.rows, self.cols)?;
        if self.rows * self.cols <= 64 {
            f.debug_list().entries(self.data.chunks(self.cols)).finish()?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::arg(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_finite(&data, "matrix")?;
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::arg("ragged rows"));
        }
        Mat::new(r, c, rows.concat())
    }

    /// Single-column matrix holding `v`.
    pub fn column(v: &[f64]) -> Result<Self> {
        Mat::new(v.len(), 1, v.to_vec())
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = v;
        }
        m
    }

    /// Wraps data produced internally; dims and length must agree.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Mat::from_raw(self.cols, self.rows, out)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Mat {
        Mat::from_raw(self.rows, self.cols, self.data.iter().map(|v| alpha * v).collect())
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(Error::arg(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Mat::from_raw(self.rows, self.cols, data))
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(Error::arg(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        // SAFETY: all three buffers are sized m*k, k*n and m*n with the
        // row-major strides passed below.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                k as isize,
                1,
                rhs.data.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(Mat::from_raw(m, n, out))
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::arg(format!(
                "cannot multiply {}x{} by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(self.data.chunks_exact(self.cols).map(|row| dot(row, v)).collect())
    }

    /// `selfᵀ v`.
    pub fn tmatvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::arg(format!(
                "cannot multiply ({}x{})ᵀ by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &a) in self.data.chunks_exact(self.cols).zip(v) {
            axpy(a, row, &mut out);
        }
        Ok(out)
    }
}

/// Kronecker product `a ⊠ b`: entry `(p1*i + r, p2*j + s)` equals `a[i,j] * b[r,s]`
/// where `b` is `p1 x p2`.
pub fn kronecker(a: &Mat, b: &Mat) -> Mat {
    let (n1, n2) = a.shape();
    let (p1, p2) = b.shape();
    let cols = n2 * p2;
    let mut out = vec![0.0; n1 * p1 * cols];
    for i in 0..n1 {
        for j in 0..n2 {
            let aij = a.get(i, j);
            for r in 0..p1 {
                let base = (i * p1 + r) * cols + j * p2;
                for (o, &brs) in out[base..base + p2].iter_mut().zip(b.row(r)) {
                    *o = aij * brs;
                }
            }
        }
    }
    Mat::from_raw(n1 * p1, cols, out)
}

/// Kronecker product of two vectors, `(u ⊠ w)[i*len(w) + k] = u[i] w[k]`.
pub fn kronecker_vec(u: &[f64], w: &[f64]) -> Vec<f64> {
    u.iter().flat_map(|&a| w.iter().map(move |&b| a * b)).collect()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators so the loop vectorizes
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Returns `v / ‖v‖`, or `None` when the norm is zero or not finite.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

/// Dense `n1 x n2 x n3` tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor3({}x{}x{})", self.dims[0], self.dims[1], self.dims[2])
    }
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::arg(format!("tensor dimensions must be positive, got {dims:?}")));
        }
        let len = dims.iter().product::<usize>();
        if data.len() != len {
            return Err(Error::arg(format!(
                "tensor {dims:?} needs {len} entries, got {}",
                data.len()
            )));
        }
        check_finite(&data, "tensor")?;
        Ok(Tensor3 { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dimensions must be positive");
        Tensor3 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub(crate) fn from_raw(dims: [usize; 3], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Tensor3 { dims, data }
    }

    /// Builds a tensor from `f(i, j, k)` evaluated at every 0-based index.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3::new(dims, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Contiguous `n2 x n3` slice `T[i, :, :]`.
    pub fn slice1(&self, i: usize) -> &[f64] {
        let s = self.dims[1] * self.dims[2];
        &self.data[i * s..(i + 1) * s]
    }

    /// Frontal slice `T[:, :, k]` as an `n1 x n2` matrix.
    pub fn frontal_slice(&self, k: usize) -> Mat {
        let [n1, n2, n3] = self.dims;
        let data = (0..n1 * n2).map(|ij| self.data[ij * n3 + k]).collect();
        Mat::from_raw(n1, n2, data)
    }

    pub fn unfold(&self, mode: Mode) -> Mat {
        let [n1, n2, n3] = self.dims;
        match mode {
            Mode::One => Mat::from_raw(n1, n2 * n3, self.data.clone()),
            Mode::Two => {
                let mut out = vec![0.0; self.data.len()];
                for i in 0..n1 {
                    for j in 0..n2 {
                        let src = self.offset(i, j, 0);
                        let dst = j * n1 * n3 + i * n3;
                        out[dst..dst + n3].copy_from_slice(&self.data[src..src + n3]);
                    }
                }
                Mat::from_raw(n2, n1 * n3, out)
            }
            Mode::Three => {
                let mut out = vec![0.0; self.data.len()];
                let cols = n1 * n2;
                for (ij, fibre) in self.data.chunks_exact(n3).enumerate() {
                    for (k, &v) in fibre.iter().enumerate() {
                        out[k * cols + ij] = v;
                    }
                }
                Mat::from_raw(n3, cols, out)
            }
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &Mat, mode: Mode, dims: [usize; 3]) -> Result<Tensor3> {
        let [n1, n2, n3] = dims;
        let expected = match mode {
            Mode::One => (n1, n2 * n3),
            Mode::Two => (n2, n1 * n3),
            Mode::Three => (n3, n1 * n2),
        };
        if m.shape() != expected {
            return Err(Error::arg(format!(
                "mode-{mode} unfolding of {dims:?} must be {expected:?}, got {:?}",
                m.shape()
            )));
        }
        Tensor3::from_fn(dims, |i, j, k| match mode {
            Mode::One => m.get(i, j * n3 + k),
            Mode::Two => m.get(j, i * n3 + k),
            Mode::Three => m.get(k, i * n2 + j),
        })
    }

    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::arg(format!(
                "inner product of tensors with dims {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn frobenius(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `⟨T, u ⊗ v ⊗ w⟩`.
    pub fn rank1_inner(&self, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
        let x = self.contract_12(u, v)?;
        Ok(dot(&x, w))
    }

    fn check_len(&self, axis: usize, v: &[f64]) -> Result<()> {
        if v.len() != self.dims[axis] {
            return Err(Error::arg(format!(
                "vector of length {} does not match mode-{} dimension {}",
                v.len(),
                axis + 1,
                self.dims[axis]
            )));
        }
        Ok(())
    }

    /// `T ×₂ v ×₃ w`, a vector of length `n1`.
    pub fn contract_23(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(1, v)?;
        self.check_len(2, w)?;
        let [n1, n2, n3] = self.dims;
        let mut out = vec![0.0; n1];
        for (i, o) in out.iter_mut().enumerate() {
            let slice = self.slice1(i);
            *o = (0..n2).map(|j| v[j] * dot(&slice[j * n3..(j + 1) * n3], w)).sum();
        }
        Ok(out)
    }

    /// `T ×₁ u ×₃ w`, a vector of length `n2`.
    pub fn contract_13(&self, u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(0, u)?;
        self.check_len(2, w)?;
        let [n1, n2, n3] = self.dims;
        let mut out = vec![0.0; n2];
        for i in 0..n1 {
            let slice = self.slice1(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o += u[i] * dot(&slice[j * n3..(j + 1) * n3], w);
            }
        }
        Ok(out)
    }

    /// `T ×₁ u ×₂ v`, a vector of length `n3`.
    pub fn contract_12(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(0, u)?;
        self.check_len(1, v)?;
        let [n1, n2, n3] = self.dims;
        let mut out = vec![0.0; n3];
        for i in 0..n1 {
            let slice = self.slice1(i);
            for j in 0..n2 {
                axpy(u[i] * v[j], &slice[j * n3..(j + 1) * n3], &mut out);
            }
        }
        Ok(out)
    }

    /// Weighted slice sum `Σ_k w_k T[:, :, k]` (an `n1 x n2` matrix).
    pub fn contract_3(&self, w: &[f64]) -> Result<Mat> {
        self.check_len(2, w)?;
        let [n1, n2, _] = self.dims;
        let n3 = w.len();
        let data = self.data.chunks_exact(n3).map(|fibre| dot(fibre, w)).collect();
        Ok(Mat::from_raw(n1, n2, data))
    }
}

/// `[A ⊗ w]_{i,j,k} = A_{i,j} w_k`.
pub fn outer_mv(a: &Mat, w: &[f64]) -> Result<Tensor3> {
    if w.is_empty() {
        return Err(Error::arg("outer product with an empty vector"));
    }
    let data = a
        .data()
        .iter()
        .flat_map(|&aij| w.iter().map(move |&wk| aij * wk))
        .collect();
    Tensor3::new([a.rows(), a.cols(), w.len()], data)
}

/// `[u ⊗ v ⊗ w]_{i,j,k} = u_i v_j w_k`.
pub fn outer_vvv(u: &[f64], v: &[f64], w: &[f64]) -> Result<Tensor3> {
    if u.is_empty() || v.is_empty() || w.is_empty() {
        return Err(Error::arg("outer product with an empty vector"));
    }
    let uv = Mat::new(u.len(), v.len(), kronecker_vec(u, v))?;
    outer_mv(&uv, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_from_index() {
        assert_eq!(Mode::try_from(2).unwrap(), Mode::Two);
        assert!(matches!(Mode::try_from(0), Err(Error::Argument(_))));
        assert!(matches!(Mode::try_from(4), Err(Error::Argument(_))));
    }

    #[test]
    fn unfold_index_identity_2x2x2() {
        let t = Tensor3::from_fn([2, 2, 2], |i, j, k| (100 * i + 10 * j + k) as f64).unwrap();
        // 1-based (1,2,1) -> row 1, column n3*(2-1)+1 = 3; 0-based row 0, column 2
        assert_eq!(t.unfold(Mode::One).get(0, 2), t.get(0, 1, 0));
    }

    #[test]
    fn unfold_rank_one_mode1_row() {
        let t = outer_vvv(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]).unwrap();
        let u1 = t.unfold(Mode::One);
        assert_eq!(u1.shape(), (2, 4));
        assert_eq!(u1.row(0), &[15.0, 18.0, 20.0, 24.0]);
        assert_eq!(u1.row(1), &[30.0, 36.0, 40.0, 48.0]);
    }

    #[test]
    fn outer_mv_identity_slices() {
        let t = outer_mv(&Mat::identity(2), &[1.0, 0.0]).unwrap();
        assert_eq!(t.frontal_slice(0), Mat::identity(2));
        assert_eq!(t.frontal_slice(1), Mat::zeros(2, 2));
    }

    #[test]
    fn outer_vvv_single_entry() {
        let t = outer_vvv(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.data().iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn kronecker_identity() {
        assert_eq!(kronecker(&Mat::identity(2), &Mat::identity(2)), Mat::identity(4));
    }

    #[test]
    fn kronecker_vector_as_column() {
        let u = Mat::column(&[1.0, 2.0]).unwrap();
        let w = Mat::column(&[3.0, 4.0, 5.0]).unwrap();
        let k = kronecker(&u, &w);
        assert_eq!(k.shape(), (6, 1));
        assert_eq!(k.data(), kronecker_vec(&[1.0, 2.0], &[3.0, 4.0, 5.0]).as_slice());
    }

    #[test]
    fn inner_with_zero_and_mismatch() {
        let t = Tensor3::from_fn([2, 3, 2], |i, j, k| (i + j * k) as f64 + 0.5).unwrap();
        assert_eq!(t.inner(&Tensor3::zeros([2, 3, 2])).unwrap(), 0.0);
        assert!((t.inner(&t).unwrap() - t.frobenius().powi(2)).abs() < 1e-12);
        assert!(matches!(t.inner(&Tensor3::zeros([2, 2, 3])), Err(Error::Argument(_))));
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(Tensor3::new([2, 2, 2], vec![0.0; 7]).is_err());
        assert!(Tensor3::new([0, 2, 2], vec![]).is_err());
        assert!(matches!(
            Tensor3::new([1, 1, 1], vec![f64::NAN]),
            Err(Error::Numeric(_))
        ));
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn fold_rejects_wrong_shape() {
        let m = Mat::zeros(3, 3);
        assert!(Tensor3::fold(&m, Mode::Two, [2, 2, 2]).is_err());
    }

    #[test]
    fn contractions_match_brute_force() {
        let t = Tensor3::from_fn([3, 4, 5], |i, j, k| ((i * 7 + j * 3 + k) % 5) as f64 - 2.0).unwrap();
        let u = [0.3, -1.0, 2.0];
        let v = [1.0, 0.5, -0.5, 0.25];
        let w = [1.0, -1.0, 0.0, 2.0, 0.5];
        let mut a = [0.0; 3];
        let mut b = [0.0; 4];
        let mut c = [0.0; 5];
        for i in 0..3 {
            for j in 0..4 {
                for k in 0..5 {
                    let x = t.get(i, j, k);
                    a[i] += x * v[j] * w[k];
                    b[j] += x * u[i] * w[k];
                    c[k] += x * u[i] * v[j];
                }
            }
        }
        let close = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&t.contract_23(&v, &w).unwrap(), &a));
        assert!(close(&t.contract_13(&u, &w).unwrap(), &b));
        assert!(close(&t.contract_12(&u, &v).unwrap(), &c));
        let bar = t.contract_3(&w).unwrap();
        let expect: f64 = (0..5).map(|k| w[k] * t.get(1, 2, k)).sum();
        assert!((bar.get(1, 2) - expect).abs() < 1e-12);
    }
}
