//! Dense complex linear algebra shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. The helpers here add the few
//! conventions the rest of the crate relies on: eigenvalues sorted ascending,
//! singular values sorted descending, and a fixed phase for singular vectors
//! so results are reproducible across runs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const EIGEN_MAX_ITER: usize = 10_000;

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Squared Frobenius norm.
#[inline]
pub fn frob_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
///
/// The input is symmetrized as `(M + M*)/2` before decomposition, so tiny
/// rounding asymmetry in products like `Y Y*` is harmless.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::dims(
            "hermitian_eigen",
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if !is_finite(m) {
        return Err(Error::Numerical("non-finite entry in eigen input".into()));
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Hermitian eigendecomposition did not converge".into()))?;

    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Thin SVD `M = U diag(s) Vh` of an `m x n` matrix, `r = min(m, n)`.
pub struct ThinSvd {
    /// `m x r`
    pub u: CMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `r x n`
    pub v_adjoint: CMatrix,
}

/// Thin SVD with singular values sorted descending and each left singular
/// vector rotated so its largest-modulus entry is real-positive (the matching
/// right vector gets the compensating phase, leaving `U diag(s) Vh` intact).
///
/// Computed with faer: nalgebra's complex SVD loses accuracy on
/// rank-deficient inputs such as `H* S` with `K < N`.
pub fn thin_svd(m: &CMatrix) -> Result<ThinSvd> {
    if !is_finite(m) {
        return Err(Error::Numerical("non-finite entry in SVD input".into()));
    }
    let (rows, cols) = m.shape();
    let fm = faer::Mat::<C64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = fm
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());

    let r = rows.min(cols);
    let mut u_out = CMatrix::zeros(rows, r);
    let mut vh_out = CMatrix::zeros(r, cols);
    let mut values = Vec::with_capacity(r);
    for k in 0..r {
        let pivot =
            (0..rows).map(|i| u[(i, k)]).fold(
                C64::new(0.0, 0.0),
                |best, z| if z.norm() > best.norm() { z } else { best },
            );
        let rot = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..rows {
            u_out[(i, k)] = u[(i, k)] * rot;
        }
        for j in 0..cols {
            vh_out[(k, j)] = v[(j, k)].conj() * rot.conj();
        }
        values.push(s[k].re);
    }
    Ok(ThinSvd {
        u: u_out,
        singular_values: values,
        v_adjoint: vh_out,
    })
}

/// Kronecker product of two column vectors.
pub fn kron(a: &CVector, b: &CVector) -> CVector {
    let mut out = CVector::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// `rows x cols` matrix of i.i.d. CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    })
}

/// Haar-ish random unitary from the QR factor of a complex Gaussian matrix,
/// with the diagonal of R made real-positive.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = complex_gaussian(n, n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let mut col = q.column_mut(j);
            col *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = complex_gaussian(5, 5, &mut rng);
        let h = &a * a.adjoint();
        let (w, q) = hermitian_eigen(&h).unwrap();
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
        let d = CMatrix::from_diagonal(&DVector::from_iterator(5, w.iter().map(|&x| C64::new(x, 0.0))));
        let back = &q * d * q.adjoint();
        assert!(frob_sq(&(back - &h)).sqrt() < 1e-10 * frob_sq(&h).sqrt());
    }

    #[test]
    fn svd_reconstructs_with_fixed_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = complex_gaussian(4, 7, &mut rng);
        let svd = thin_svd(&m).unwrap();
        assert_eq!(svd.u.shape(), (4, 4));
        assert_eq!(svd.v_adjoint.shape(), (4, 7));
        assert!(svd.singular_values.windows(2).all(|p| p[0] >= p[1]));
        let s = CMatrix::from_diagonal(&DVector::from_iterator(
            4,
            svd.singular_values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let back = &svd.u * s * &svd.v_adjoint;
        assert!(frob_sq(&(back - &m)).sqrt() < 1e-10);
        for col in svd.u.column_iter() {
            let pivot = col.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
        }
    }

    #[test]
    fn svd_accurate_on_rank_deficient_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let h = complex_gaussian(3, 6, &mut rng);
            let s = complex_gaussian(3, 6, &mut rng);
            let m = h.adjoint() * s;
            let svd = thin_svd(&m).unwrap();
            let d = CMatrix::from_diagonal(&DVector::from_iterator(
                6,
                svd.singular_values.iter().map(|&x| C64::new(x, 0.0)),
            ));
            let back = &svd.u * d * &svd.v_adjoint;
            assert!(frob_sq(&(back - &m)).sqrt() < 1e-12 * frob_sq(&m).sqrt());
            let uu = svd.u.adjoint() * &svd.u - CMatrix::identity(6, 6);
            let vv = &svd.v_adjoint * svd.v_adjoint.adjoint() - CMatrix::identity(6, 6);
            assert!(frob_sq(&uu).sqrt() < 1e-12 && frob_sq(&vv).sqrt() < 1e-12);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_unitary(6, &mut rng);
        let err = &q.adjoint() * &q - CMatrix::identity(6, 6);
        assert!(frob_sq(&err).sqrt() < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_square() {
        assert!(hermitian_eigen(&CMatrix::zeros(2, 3)).is_err());
    }
}
