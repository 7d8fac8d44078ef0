//! Dense complex linear-algebra helpers on top of nalgebra.
//!
//! nalgebra provides the factorizations (SVD, Hermitian eigen, complex Schur,
//! LU, QR); this module adds what it lacks: sorted spectra, eigenvectors of
//! general complex matrices, orthonormal complements and rank decisions.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// Singular value counts as nonzero iff it exceeds this fraction of the largest.
pub const RANK_TOLERANCE: f64 = 1e-9;

pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Full singular value decomposition `m = u · diag(values) · v^H` with `u`
/// and `v` square unitaries and values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: CMat,
    pub v: CMat,
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

impl Svd {
    pub fn full(m: &CMat) -> Self {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Self { values: Vec::new(), u: CMat::identity(rows, rows), v: CMat::identity(cols, cols) };
        }
        let svd = to_faer(m).svd().expect("SVD of a finite matrix converges");
        let values = svd.S().column_vector().iter().map(|z| z.re).collect();
        Self { values, u: from_faer(svd.U()), v: from_faer(svd.V()) }
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    Svd::full(m).values
}

/// Ratio of largest to smallest singular value; infinite for singular input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Number of singular values above `RANK_TOLERANCE` times the largest.
pub fn numerical_rank(svals: &[f64]) -> usize {
    let max = svals.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    svals.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
}

/// Relative Frobenius distance `||a - b|| / max(||b||, tiny)`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `a^{-1} b` via LU; `None` if `a` is exactly singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

/// Thin Q factor of a full-column-rank matrix.
pub fn orthonormalize_columns(m: &CMat) -> CMat {
    m.clone().qr().q()
}

/// Rows spanning the same space as `m`, made orthonormal.
pub fn orthonormalize_rows(m: &CMat) -> CMat {
    orthonormalize_columns(&m.adjoint()).adjoint()
}

/// Each column scaled to unit Euclidean norm (zero columns are left alone).
pub fn unit_columns(m: &CMat) -> CMat {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
    out
}

/// Hermitian eigen-decomposition with eigenvalues in ascending order.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Eigenvectors of the `count` smallest eigenvalues of a Hermitian matrix.
pub fn least_eigenvectors(m: &CMat, count: usize) -> CMat {
    let (_, vectors) = hermitian_eigen(m);
    vectors.columns(0, count).into_owned()
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal-column matrix `q` (N x d), returned as N x (N - d).
pub fn orthonormal_complement(q: &CMat) -> CMat {
    let n = q.nrows();
    let d = q.ncols();
    let projector = CMat::identity(n, n) - q * q.adjoint();
    let (_, vectors) = hermitian_eigen(&projector);
    // eigenvalues of the projector are 0 (d times) then 1 (n - d times)
    vectors.columns(d, n - d).into_owned()
}

/// Full left singular basis of `m` together with its singular values, both
/// sorted by decreasing singular value. The basis is always a complete
/// N x N unitary; there are `min(rows, cols)` singular values.
pub fn left_singular_basis(m: &CMat) -> (Vec<f64>, CMat) {
    let svd = Svd::full(m);
    (svd.values, svd.u)
}

/// Rotate a vector so that its first largest-modulus entry is real positive.
pub fn normalize_phase(v: &mut DVector<C64>) {
    let mut pivot = 0;
    let mut best = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            pivot = i;
        }
    }
    if best > 0.0 {
        let rot = v[pivot].conj() / best;
        *v *= rot;
    }
}

/// Eigen-decomposition of a general square complex matrix.
///
/// Eigenvalues are sorted by descending modulus. Each eigenvector has unit
/// norm with its first largest-modulus component real and positive.
/// Eigenvectors are recovered from the complex Schur form by triangular
/// back-substitution.
pub fn eigen(m: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidParameter(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::DegenerateChannel("non-finite entries in chain map".into()));
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::DegenerateChannel("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let mut pairs: Vec<(C64, DVector<C64>)> = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = DVector::<C64>::zeros(n);
        y[k] = c64(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = c64(0.0, 0.0);
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = c64(small, 0.0);
            }
            y[j] = -acc / denom;
        }
        let mut x = &q * y;
        let norm = x.norm();
        x.unscale_mut(norm);
        normalize_phase(&mut x);
        pairs.push((lambda, x));
    }
    pairs.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = CMat::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    Ok((values, vectors))
}

/// Block-diagonal matrix from square or rectangular blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, seed: u64) -> CMat {
        complex_gaussian(&mut ChaCha8Rng::seed_from_u64(seed), n, m)
    }

    #[test]
    fn eigen_pairs_satisfy_definition() {
        for seed in 0..20 {
            let m = random(6, 6, seed);
            let (values, vectors) = eigen(&m).unwrap();
            for (k, lambda) in values.iter().enumerate() {
                let v = vectors.column(k);
                let residual = (&m * v - v * *lambda).norm();
                assert!(residual < 1e-10 * m.norm(), "seed {seed} k {k}: {residual}");
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            for w in values.windows(2) {
                assert!(w[0].norm() >= w[1].norm());
            }
        }
    }

    #[test]
    fn eigen_phase_convention() {
        let m = random(5, 5, 3);
        let (_, vectors) = eigen(&m).unwrap();
        for col in vectors.column_iter() {
            let pivot = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .1;
            assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
        }
    }

    #[test]
    fn eigen_of_diagonal() {
        let m = CMat::from_diagonal(&DVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 3.0), c64(-2.0, 0.0)]));
        let (values, vectors) = eigen(&m).unwrap();
        assert_eq!(values, vec![c64(0.0, 3.0), c64(-2.0, 0.0), c64(1.0, 0.0)]);
        assert!((vectors[(1, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let q = orthonormalize_columns(&random(5, 2, 11));
        let c = orthonormal_complement(&q);
        assert_eq!(c.shape(), (5, 3));
        assert!((c.adjoint() * &c - CMat::identity(3, 3)).norm() < 1e-12);
        assert!((q.adjoint() * &c).norm() < 1e-12);
    }

    #[test]
    fn left_basis_of_tall_matrix_is_unitary() {
        let m = random(5, 2, 4);
        let (s, u) = left_singular_basis(&m);
        assert_eq!(s.len(), 2);
        assert_eq!(numerical_rank(&s), 2);
        assert!((u.adjoint() * &u - CMat::identity(5, 5)).norm() < 1e-12);
        // trailing columns annihilate the span
        assert!((u.columns(2, 3).adjoint() * &m).norm() < 1e-12);
    }

    #[test]
    fn rank_threshold_is_relative() {
        assert_eq!(numerical_rank(&[1.0, 1e-8, 1e-10]), 2);
        assert_eq!(numerical_rank(&[1e-20, 1e-30]), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0]), 0);
    }

    #[test]
    fn block_diag_layout() {
        let a = CMat::from_element(1, 2, c64(1.0, 0.0));
        let b = CMat::from_element(2, 1, c64(2.0, 0.0));
        let d = block_diag(&[a, b]);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 1)], c64(1.0, 0.0));
        assert_eq!(d[(2, 2)], c64(2.0, 0.0));
        assert_eq!(d[(1, 0)], c64(0.0, 0.0));
    }
}
