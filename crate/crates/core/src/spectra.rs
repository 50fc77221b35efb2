//! Gram matrices of unfoldings, the centering-and-scaling transforms, a
//! cyclic Jacobi symmetric eigensolver and empirical spectral summaries.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Mat, Mode, Tensor3};

/// Number of long-dimension columns folded into one partial Gram product.
/// Chunk boundaries depend only on the input shape, so the floating-point
/// reduction order (and hence the result) is independent of thread count.
const GRAM_CHUNK: usize = 16_384;
const GRAM_BLOCK: usize = 128;

/// `C += A Aᵀ` on the block upper triangle, `A` being `r x k` with strides
/// `(rs, cs)` starting at `a`.
///
/// # Safety
/// Every `a + i*rs + l*cs` for `i < r`, `l < k` must be in bounds, and `c`
/// must hold `r*r` values.
unsafe fn syrk_upper(r: usize, k: usize, a: *const f64, rs: isize, cs: isize, c: &mut [f64]) {
    debug_assert_eq!(c.len(), r * r);
    for bi in (0..r).step_by(GRAM_BLOCK) {
        let mi = GRAM_BLOCK.min(r - bi);
        for bj in (bi..r).step_by(GRAM_BLOCK) {
            let nj = GRAM_BLOCK.min(r - bj);
            matrixmultiply::dgemm(
                mi,
                k,
                nj,
                1.0,
                a.offset(bi as isize * rs),
                rs,
                cs,
                a.offset(bj as isize * rs),
                cs,
                rs,
                1.0,
                c.as_mut_ptr().add(bi * r + bj),
                r as isize,
                1,
            );
        }
    }
}

fn mirror_upper(c: &mut [f64], r: usize) {
    for i in 0..r {
        for j in 0..i {
            c[i * r + j] = c[j * r + i];
        }
    }
}

fn sum_partials(parts: Vec<Vec<f64>>, r: usize) -> Vec<f64> {
    let mut acc = vec![0.0; r * r];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
    }
    mirror_upper(&mut acc, r);
    acc
}

/// `U Uᵀ` for a row-major `rows x cols` matrix.
pub fn gram(u: &Mat) -> Mat {
    let (r, k) = u.shape();
    let data = u.data();
    let parts: Vec<Vec<f64>> = (0..k)
        .step_by(GRAM_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let len = GRAM_CHUNK.min(k - start);
            let mut c = vec![0.0; r * r];
            // SAFETY: columns start..start+len of every row are in bounds.
            unsafe { syrk_upper(r, len, data.as_ptr().add(start), k as isize, 1, &mut c) };
            c
        })
        .collect();
    Mat::from_raw(r, r, sum_partials(parts, r))
}

/// `T^(mode) T^(mode)ᵀ` computed straight from the tensor storage, without
/// materializing the unfolding.
pub fn gram_unfolding(t: &Tensor3, mode: Mode) -> Mat {
    let [n1, n2, n3] = t.dims();
    let data = t.data();
    match mode {
        Mode::One => {
            let u = Mat::from_raw(n1, n2 * n3, data.to_vec());
            gram(&u)
        }
        Mode::Two => {
            // T2 T2ᵀ = Σ_i S_i S_iᵀ with S_i = T[i, :, :] contiguous n2 x n3.
            let group = (GRAM_CHUNK / n3).max(1);
            let parts: Vec<Vec<f64>> = (0..n1)
                .step_by(group)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|start| {
                    let mut c = vec![0.0; n2 * n2];
                    for i in start..(start + group).min(n1) {
                        let s = t.slice1(i);
                        // SAFETY: slice i is n2 x n3 row-major.
                        unsafe { syrk_upper(n2, n3, s.as_ptr(), n3 as isize, 1, &mut c) };
                    }
                    c
                })
                .collect();
            Mat::from_raw(n2, n2, sum_partials(parts, n2))
        }
        Mode::Three => {
            // T3 = Aᵀ with A the (n1 n2) x n3 row-major view of the data.
            let k = n1 * n2;
            let parts: Vec<Vec<f64>> = (0..k)
                .step_by(GRAM_CHUNK)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|start| {
                    let len = GRAM_CHUNK.min(k - start);
                    let mut c = vec![0.0; n3 * n3];
                    // SAFETY: rows start..start+len of the (k x n3) view.
                    unsafe {
                        syrk_upper(n3, len, data.as_ptr().add(start * n3), 1, n3 as isize, &mut c)
                    };
                    c
                })
                .collect();
            Mat::from_raw(n3, n3, sum_partials(parts, n3))
        }
    }
}

/// Scale and shift of the centered-and-scaled Gram matrix of `mode`:
/// `scale * G - shift * I` with `scale = n_T / √(n1 n2 n3)` and
/// `shift = (n_mode + product of the other two dims) / √(n1 n2 n3)`.
pub fn center_scale_coefficients(dims: [usize; 3], mode: Mode) -> (f64, f64) {
    let [n1, n2, n3] = dims.map(|d| d as f64);
    let root = (n1 * n2 * n3).sqrt();
    let n_t = n1 + n2 + n3;
    let own = dims[mode.axis()] as f64;
    let others = n1 * n2 * n3 / own;
    (n_t / root, (own + others) / root)
}

fn center_scale(g: &Mat, dims: [usize; 3], mode: Mode) -> Result<Mat> {
    let n = dims[mode.axis()];
    if g.shape() != (n, n) {
        return Err(Error::arg(format!(
            "mode-{mode} Gram matrix of a {dims:?} tensor must be {n}x{n}, got {:?}",
            g.shape()
        )));
    }
    let (scale, shift) = center_scale_coefficients(dims, mode);
    let mut out = g.scale(scale);
    for i in 0..n {
        let v = out.get(i, i) - shift;
        out.set(i, i, v);
    }
    Ok(out)
}

/// `(n_T/√(n1n2n3)) G − ((n2 + n1 n3)/√(n1n2n3)) I` for the mode-2 Gram `G`.
pub fn center_scale_mode2(g: &Mat, dims: [usize; 3]) -> Result<Mat> {
    center_scale(g, dims, Mode::Two)
}

/// `(n_T/√(n1n2n3)) G − ((n3 + n1 n2)/√(n1n2n3)) I` for the mode-3 Gram `G`.
pub fn center_scale_mode3(g: &Mat, dims: [usize; 3]) -> Result<Mat> {
    center_scale(g, dims, Mode::Three)
}

/// Affine transform recorded on a [`SpectrumResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    None,
    Mode2,
    Mode3,
    Oracle,
}

/// Full eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: Mat,
    pub centering: Centering,
    pub sweeps: usize,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.col(j)
    }

    pub fn largest(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn top_eigenvector(&self) -> Vec<f64> {
        self.eigenvector(self.len() - 1)
    }

    /// Maps every eigenvalue `λ` to `scale * λ - shift` (`scale > 0` keeps
    /// the ordering and eigenvectors).
    pub fn with_affine(mut self, scale: f64, shift: f64, centering: Centering) -> Self {
        assert!(scale > 0.0, "affine scale must be positive");
        for l in &mut self.eigenvalues {
            *l = scale * *l - shift;
        }
        self.centering = centering;
        self
    }

    /// `‖S − V Λ Vᵀ‖_F / ‖S‖_F`.
    pub fn reconstruction_error(&self, s: &Mat) -> f64 {
        let v = &self.eigenvectors;
        let mut vl = v.clone();
        let n = self.len();
        for r in 0..n {
            for c in 0..n {
                vl.set(r, c, v.get(r, c) * self.eigenvalues[c]);
            }
        }
        let rec = vl.matmul(&v.transpose()).expect("square");
        let denom = s.frobenius().max(f64::MIN_POSITIVE);
        s.sub(&rec).expect("same shape").frobenius() / denom
    }
}

const MAX_SWEEPS: usize = 100;
const REL_TOL: f64 = 1e-12;

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

/// Round-robin pairings: each round is a set of disjoint index pairs and the
/// `N-1` rounds together cover every pair once.
fn tournament_rounds(n: usize) -> Vec<Vec<(usize, usize)>> {
    let players = n + n % 2;
    let last = players - 1;
    (0..last)
        .map(|r| {
            let mut pairs = Vec::with_capacity(players / 2);
            if last < n {
                pairs.push((r.min(last), r.max(last)));
            }
            for i in 1..players / 2 {
                let p = (r + i) % last;
                let q = (r + last - i) % last;
                pairs.push((p.min(q), p.max(q)));
            }
            pairs
        })
        .collect()
}

/// `rows[p], rows[q] <- c·p − s·q, s·p + c·q` for every rotation.
fn rotate_rows(m: &mut [f64], n: usize, rots: &[(usize, usize, f64, f64)]) {
    for &(p, q, c, s) in rots {
        let (lo, hi) = m.split_at_mut(q * n);
        let rp = &mut lo[p * n..(p + 1) * n];
        let rq = &mut hi[..n];
        for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
            let (xv, yv) = (*x, *y);
            *x = c * xv - s * yv;
            *y = s * xv + c * yv;
        }
    }
}

const TILE: usize = 32;

fn transpose_in_place(m: &mut [f64], n: usize) {
    for bi in (0..n).step_by(TILE) {
        for bj in (bi..n).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + TILE).min(n) {
                    m.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first. Rotations are applied in
/// round-robin order (disjoint pairs per round), so each round is a single
/// orthogonal similarity applied with contiguous row updates.
/// Converges when the off-diagonal Frobenius norm drops below
/// `1e-12 ‖S‖_F`, with at most 100 sweeps. Eigenvectors are sign-normalized
/// so their largest-magnitude component is positive.
pub fn sym_eigen(s: &Mat) -> Result<SpectrumResult> {
    if !s.is_square() {
        return Err(Error::arg(format!("eigensolver needs a square matrix, got {:?}", s.shape())));
    }
    if s.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigensolver input has non-finite entries".into()));
    }
    let n = s.rows();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }
    let mut vt = Mat::identity(n).into_data();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = REL_TOL * norm;
    // entries this small cannot keep the off-diagonal norm above target
    let skip = 0.1 * target / n as f64;

    let rounds = tournament_rounds(n);
    let mut sweeps = 0;
    let mut rots = Vec::with_capacity(n / 2 + 1);
    loop {
        let off = off_diagonal_norm(&a, n);
        if off <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::Solver {
                sweeps,
                off_norm: off,
                target,
                n,
            });
        }
        sweeps += 1;
        for pairs in &rounds {
            rots.clear();
            for &(p, q) in pairs {
                let apq = a[p * n + q];
                if apq.abs() <= skip {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                rots.push((p, q, c, t * c));
            }
            if rots.is_empty() {
                continue;
            }
            // A <- Jᵀ A J as two row passes around a transpose (the result
            // is symmetric), V stored transposed so its update is a row pass too
            rotate_rows(&mut a, n, &rots);
            transpose_in_place(&mut a, n);
            rotate_rows(&mut a, n, &rots);
            rotate_rows(&mut vt, n, &rots);
            for &(p, q, _, _) in &rots {
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        let col = &vt[src * n..(src + 1) * n];
        for &x in col {
            if x.abs() > best.abs() {
                best = x;
                sign = x.signum();
            }
        }
        for (r, &x) in col.iter().enumerate() {
            vecs[r * n + dst] = sign * x;
        }
    }
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors: Mat::from_raw(n, n, vecs),
        centering: Centering::None,
        sweeps,
    })
}

/// Normalized histogram plus the exact empirical CDF of a set of eigenvalues.
#[derive(Debug, Clone)]
pub struct EsdSummary {
    /// `bins + 1` ascending bin edges.
    pub edges: Vec<f64>,
    /// Fraction of eigenvalues in each bin; sums to 1.
    pub masses: Vec<f64>,
    pub largest: f64,
    pub second_largest: Option<f64>,
    sorted: Vec<f64>,
}

impl EsdSummary {
    /// Histogram over `[min λ, max λ]` (the last bin is closed).
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::arg("histogram needs at least one bin"));
        }
        if values.is_empty() {
            return Err(Error::arg("empirical distribution of an empty spectrum"));
        }
        let sorted = crate::stats::sorted(values.to_vec());
        let lo = sorted[0];
        let hi = *sorted.last().unwrap();
        let (lo_edge, hi_edge) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let width = (hi_edge - lo_edge) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|b| lo_edge + b as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &x in &sorted {
            let b = (((x - lo_edge) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let n = sorted.len() as f64;
        let masses = counts.iter().map(|&c| c as f64 / n).collect();
        let largest = hi;
        let second_largest = (sorted.len() >= 2).then(|| sorted[sorted.len() - 2]);
        Ok(EsdSummary {
            edges,
            masses,
            largest,
            second_largest,
            sorted,
        })
    }

    pub fn from_spectrum(sr: &SpectrumResult, bins: usize) -> Result<Self> {
        Self::from_values(&sr.eigenvalues, bins)
    }

    /// Empirical CDF `#{λ ≤ x} / n` (right-continuous step function).
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// Histogram densities (mass / bin width).
    pub fn densities(&self) -> Vec<f64> {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }
}

/// Convenience wrapper matching the spectral-summary operation.
pub fn esd(sr: &SpectrumResult, bins: usize) -> Result<EsdSummary> {
    EsdSummary::from_spectrum(sr, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(r: usize, c: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_sym(n: usize, seed: u64) -> Mat {
        let a = random_mat(n, n, seed);
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.set(i, j, a.get(i, j) + a.get(j, i));
            }
        }
        s
    }

    #[test]
    fn gram_small_cases() {
        assert_eq!(gram(&Mat::identity(3)), Mat::identity(3));
        let g = gram(&Mat::new(1, 2, vec![3.0, 4.0]).unwrap());
        assert_eq!(g.data(), &[25.0]);
    }

    #[test]
    fn gram_is_psd_and_matches_naive() {
        let u = random_mat(3, 5, 1);
        let g = gram(&u);
        let naive = u.matmul(&u.transpose()).unwrap();
        assert!(g.max_abs_diff(&naive) < 1e-12);
        assert!(g.max_abs_diff(&g.transpose()) == 0.0);
        let sr = sym_eigen(&g).unwrap();
        assert!(sr.eigenvalues.iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn gram_chunking_on_long_rows() {
        let u = random_mat(4, GRAM_CHUNK * 2 + 17, 2);
        let naive = u.matmul(&u.transpose()).unwrap();
        let g = gram(&u);
        assert!(g.max_abs_diff(&naive) < 1e-9);
    }

    #[test]
    fn gram_unfolding_matches_explicit_unfold() {
        let data = random_mat(1, 5 * 6 * 7, 3).into_data();
        let t = Tensor3::new([5, 6, 7], data).unwrap();
        for mode in Mode::ALL {
            let expect = gram(&t.unfold(mode));
            let got = gram_unfolding(&t, mode);
            assert!(got.max_abs_diff(&expect) < 1e-12, "mode {mode}");
        }
    }

    #[test]
    fn centering_point_maps_to_zero() {
        let dims = [6, 4, 3];
        let n_t = 13.0;
        let g = Mat::identity(4).scale((4.0 + 18.0) / n_t);
        let c = center_scale_mode2(&g, dims).unwrap();
        assert!(c.data().iter().all(|v| v.abs() < 1e-14));
        assert!(center_scale_mode2(&Mat::identity(3), dims).is_err());
        assert!(center_scale_mode3(&Mat::identity(3), dims).is_ok());
    }

    #[test]
    fn centering_trace_identity() {
        let dims = [6, 4, 3];
        let g = gram(&random_mat(4, 9, 4));
        let c = center_scale_mode2(&g, dims).unwrap();
        let root = (72.0f64).sqrt();
        let expect = (13.0 * g.trace() - 4.0 * (4.0 + 18.0)) / root;
        assert!((c.trace() - expect).abs() < 1e-12);
    }

    #[test]
    fn eigen_diagonal() {
        let sr = sym_eigen(&Mat::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(sr.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(sr.eigenvector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(sr.eigenvector(2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn eigen_two_by_two() {
        let sr = sym_eigen(&Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        assert!((sr.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((sr.eigenvalues[1] - 3.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = sr.eigenvector(0);
        let v1 = sr.eigenvector(1);
        assert!((v0[0].abs() - h).abs() < 1e-14 && (v0[0] + v0[1]).abs() < 1e-14);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] - h).abs() < 1e-14);
    }

    #[test]
    fn eigen_random_reconstruction() {
        for (n, seed) in [(50, 5), (7, 6), (1, 7)] {
            let s = random_sym(n, seed);
            let sr = sym_eigen(&s).unwrap();
            assert!(sr.reconstruction_error(&s) < 1e-10);
            let vtv = sr.eigenvectors.transpose().matmul(&sr.eigenvectors).unwrap();
            assert!(vtv.max_abs_diff(&Mat::identity(n)) < 1e-10);
            assert!(sr.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_rejects_nan_and_rectangular() {
        let mut s = Mat::identity(2);
        s.data_mut()[1] = f64::NAN;
        assert!(matches!(sym_eigen(&s), Err(Error::Numeric(_))));
        assert!(matches!(sym_eigen(&Mat::zeros(2, 3)), Err(Error::Argument(_))));
    }

    #[test]
    fn eigen_zero_matrix() {
        let sr = sym_eigen(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(sr.eigenvalues, vec![0.0; 3]);
        assert_eq!(sr.sweeps, 0);
    }

    #[test]
    fn tournament_covers_all_pairs() {
        for n in [2, 5, 8] {
            let mut seen = std::collections::HashSet::new();
            for round in tournament_rounds(n) {
                let mut used = std::collections::HashSet::new();
                for (p, q) in round {
                    assert!(p < q && q < n);
                    assert!(used.insert(p) && used.insert(q));
                    assert!(seen.insert((p, q)));
                }
            }
            assert_eq!(seen.len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn esd_single_bin_and_cdf() {
        let e = EsdSummary::from_values(&[0.0, 0.0, 0.0], 1).unwrap();
        assert_eq!(e.masses, vec![1.0]);
        let e = EsdSummary::from_values(&[3.0, 1.0, 2.0, 5.0], 4).unwrap();
        assert_eq!(e.cdf(5.0), 1.0);
        assert_eq!(e.cdf(1.0 - 1e-9), 0.0);
        assert_eq!(e.cdf(1.0), 0.25);
        assert_eq!(e.largest, 5.0);
        assert_eq!(e.second_largest, Some(3.0));
        assert!((e.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(EsdSummary::from_values(&[1.0], 0).is_err());
    }
}
