//! Slice-wise factorizations and solves in the Fourier domain.
//!
//! Every routine transforms its operands along the tubes, works on each
//! spectral slice as an ordinary complex matrix and transforms back. Results
//! are computed on the independent half of the spectrum and mirrored.

use nalgebra::{Cholesky, DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{dft_tubes, half_len, idft_tubes, CMatrix, SpectralTensor};
use crate::tensor::{identity, Tensor3};

/// Singular-value ratio under which a spectral slice counts as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// Relative threshold on triangular diagonals, shared with tube invertibility.
pub const TRIANGULAR_TOL: f64 = crate::spectral::TUBE_INVERTIBILITY_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrMode {
    /// `Q` is `n1 x min(n1, n2)`.
    Economy,
    /// `Q` is `n1 x n1`.
    Full,
}

#[derive(Clone, Debug)]
pub struct TQrResult {
    pub q: Tensor3,
    pub r: Tensor3,
}

#[derive(Clone, Debug)]
pub struct TSvdResult {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
}

/// Which triangular system [`f_tri_solve`] applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriSide {
    /// `X * R^-1`
    RightInverse,
    /// `R^-1 * X`
    LeftInverse,
    /// `R^-T * X`
    TransposeLeftInverse,
}

fn is_self_conjugate(j: usize, n3: usize) -> bool {
    j == 0 || 2 * j == n3
}

fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Householder QR of a complex matrix with real nonnegative `R` diagonal.
///
/// Returns the full `m x m` unitary factor and the `m x n` upper-trapezoidal
/// factor.
pub(crate) fn householder_qr(a: &CMatrix) -> (CMatrix, CMatrix) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut q = CMatrix::identity(m, m);
    for k in 0..m.min(n) {
        let x = r.view((k, k), (m - k, 1)).into_owned();
        let xnorm = x.norm();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = x[(0, 0)];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[(0, 0)] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        v /= Complex64::new(vnorm, 0.0);
        // R <- (I - 2 v v^H) R on the trailing block
        {
            let mut block = r.view_mut((k, k), (m - k, n - k));
            let w = v.adjoint() * &block;
            block -= (&v * w) * Complex64::new(2.0, 0.0);
        }
        // Q <- Q (I - 2 v v^H)
        {
            let mut block = q.view_mut((0, k), (m, m - k));
            let w = &block * &v;
            block -= (w * v.adjoint()) * Complex64::new(2.0, 0.0);
        }
        for i in k + 1..m {
            r[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    // fix the diagonal to be real and nonnegative
    for k in 0..m.min(n) {
        let d = r[(k, k)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            let conj = phase.conj();
            for j in k..n {
                r[(k, j)] *= conj;
            }
            for i in 0..m {
                q[(i, k)] *= phase;
            }
            r[(k, k)] = Complex64::new(mag, 0.0);
        }
    }
    (q, r)
}

pub(crate) fn slice_qr(a: &CMatrix, mode: QrMode) -> (CMatrix, CMatrix) {
    let (q, r) = householder_qr(a);
    match mode {
        QrMode::Full => (q, r),
        QrMode::Economy => {
            let k = a.nrows().min(a.ncols());
            (q.columns(0, k).into_owned(), r.rows(0, k).into_owned())
        }
    }
}

/// t-QR factorization `A = Q * R` with orthogonal `Q` and f-upper-triangular `R`.
pub fn tqr(a: &Tensor3, mode: QrMode) -> Result<TQrResult> {
    let (q, r) = tqr_spectral(&dft_tubes(a), mode);
    Ok(TQrResult {
        q: idft_tubes(&q)?,
        r: idft_tubes(&r)?,
    })
}

pub fn tqr_spectral(a: &SpectralTensor, mode: QrMode) -> (SpectralTensor, SpectralTensor) {
    let n3 = a.n3();
    let parts: Vec<(CMatrix, CMatrix)> = (0..half_len(n3).min(n3))
        .map(|j| slice_qr(a.slice(j), mode))
        .collect();
    let q = SpectralTensor::from_half_fn(n3, |j| parts[j].0.clone());
    let r = SpectralTensor::from_half_fn(n3, |j| parts[j].1.clone());
    (q, r)
}

fn slice_svd(a: &CMatrix, self_conjugate: bool) -> (CMatrix, Vec<f64>, CMatrix) {
    if self_conjugate {
        let real = a.map(|z| z.re);
        let svd = SVD::new(real, true, true);
        let u = to_complex(svd.u.as_ref().expect("u requested"));
        let vt = to_complex(svd.v_t.as_ref().expect("v requested"));
        (u, svd.singular_values.iter().cloned().collect(), vt.adjoint())
    } else {
        let svd = SVD::new(a.clone(), true, true);
        let u = svd.u.clone().expect("u requested");
        let v = svd.v_t.as_ref().expect("v requested").adjoint();
        (u, svd.singular_values.iter().cloned().collect(), v)
    }
}

/// Singular values of one spectral slice, descending.
pub(crate) fn slice_singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().cloned().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Economy t-SVD `A = U * S * V^T`.
pub fn tsvd(a: &Tensor3) -> Result<TSvdResult> {
    let spec = dft_tubes(a);
    let n3 = spec.n3();
    let parts: Vec<(CMatrix, Vec<f64>, CMatrix)> = (0..half_len(n3).min(n3))
        .map(|j| slice_svd(spec.slice(j), is_self_conjugate(j, n3)))
        .collect();
    let r = a.n1().min(a.n2());
    let u = SpectralTensor::from_half_fn(n3, |j| parts[j].0.columns(0, r).into_owned());
    let v = SpectralTensor::from_half_fn(n3, |j| parts[j].2.columns(0, r).into_owned());
    let s = SpectralTensor::from_half_fn(n3, |j| {
        CMatrix::from_fn(r, r, |i, k| {
            if i == k {
                Complex64::new(parts[j].1[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    });
    Ok(TSvdResult {
        u: idft_tubes(&u)?,
        s: idft_tubes(&s)?,
        v: idft_tubes(&v)?,
    })
}

/// Spectral singular values, one descending vector per spectral slice.
pub fn spectral_singular_values(a: &Tensor3) -> Vec<Vec<f64>> {
    dft_tubes(a)
        .slices()
        .iter()
        .map(slice_singular_values)
        .collect()
}

fn check_full_column_rank(j: usize, c: &CMatrix) -> Result<()> {
    let s = slice_singular_values(c);
    let hi = s.first().cloned().unwrap_or(0.0);
    let lo = if c.nrows() < c.ncols() {
        0.0
    } else {
        s.last().cloned().unwrap_or(0.0)
    };
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio < RANK_TOL {
        return Err(Error::RankDeficient {
            slice: j,
            smallest: lo,
            ratio,
        });
    }
    Ok(())
}

/// Least-squares solve of one full-column-rank slice via Householder QR.
pub(crate) fn slice_lstsq(j: usize, c: &CMatrix, d: &CMatrix) -> Result<CMatrix> {
    check_full_column_rank(j, c)?;
    let (q, r) = slice_qr(c, QrMode::Economy);
    let rhs = q.adjoint() * d;
    r.solve_upper_triangular(&rhs)
        .ok_or(Error::SingularTriangular { slice: j, index: 0 })
}

/// Minimizes `||C * Y - D||_F` one spectral slice at a time.
pub fn tls_solve(c: &Tensor3, d: &Tensor3) -> Result<Tensor3> {
    if c.n1() != d.n1() || c.n3() != d.n3() {
        return Err(Error::shape(
            "tls_solve",
            format!("{:?} vs {:?}", c.shape(), d.shape()),
        ));
    }
    idft_tubes(&tls_solve_spectral(&dft_tubes(c), &dft_tubes(d))?)
}

pub fn tls_solve_spectral(c: &SpectralTensor, d: &SpectralTensor) -> Result<SpectralTensor> {
    if c.n1() != d.n1() || c.n3() != d.n3() {
        return Err(Error::shape(
            "tls_solve",
            format!("{:?} vs {:?}", c.shape(), d.shape()),
        ));
    }
    c.try_map_slices(|j, cj| slice_lstsq(j, cj, d.slice(j)))
}

fn check_triangular(j: usize, r: &CMatrix) -> Result<()> {
    let n = r.nrows();
    let hi = (0..n).map(|i| r[(i, i)].norm()).fold(0.0f64, f64::max);
    for i in 0..n {
        if r[(i, i)].norm() <= TRIANGULAR_TOL * hi || hi == 0.0 {
            return Err(Error::SingularTriangular { slice: j, index: i });
        }
    }
    Ok(())
}

pub(crate) fn slice_tri_solve(j: usize, r: &CMatrix, x: &CMatrix, side: TriSide) -> Result<CMatrix> {
    check_triangular(j, r)?;
    let singular = || Error::SingularTriangular { slice: j, index: 0 };
    match side {
        TriSide::LeftInverse => r.solve_upper_triangular(x).ok_or_else(singular),
        TriSide::TransposeLeftInverse => {
            r.adjoint().solve_lower_triangular(x).ok_or_else(singular)
        }
        TriSide::RightInverse => {
            // Y R = X  <=>  R^T Y^T = X^T
            let yt = r
                .transpose()
                .solve_lower_triangular(&x.transpose())
                .ok_or_else(singular)?;
            Ok(yt.transpose())
        }
    }
}

/// Applies the inverse of an f-upper-triangular tensor without forming it.
pub fn f_tri_solve(r: &Tensor3, x: &Tensor3, side: TriSide) -> Result<Tensor3> {
    if r.n1() != r.n2() || r.n3() != x.n3() {
        return Err(Error::shape(
            "f_tri_solve",
            format!("R {:?}, X {:?}", r.shape(), x.shape()),
        ));
    }
    let ok = match side {
        TriSide::RightInverse => x.n2() == r.n1(),
        _ => x.n1() == r.n1(),
    };
    if !ok {
        return Err(Error::shape(
            "f_tri_solve",
            format!("R {:?}, X {:?}", r.shape(), x.shape()),
        ));
    }
    idft_tubes(&f_tri_solve_spectral(&dft_tubes(r), &dft_tubes(x), side)?)
}

pub fn f_tri_solve_spectral(
    r: &SpectralTensor,
    x: &SpectralTensor,
    side: TriSide,
) -> Result<SpectralTensor> {
    x.try_map_slices(|j, xj| slice_tri_solve(j, r.slice(j), xj, side))
}

/// Which of the two equivalent closed forms [`direct_trls_with`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TikhonovForm {
    /// `(A^T A + l^2 I_n)^-1 A^T B`
    Gram,
    /// `A^T (A A^T + l^2 I_m)^-1 B`
    Outer,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

fn hpd_solve(mut g: CMatrix, lambda2: f64, rhs: &CMatrix) -> CMatrix {
    for i in 0..g.nrows() {
        g[(i, i)] += Complex64::new(lambda2, 0.0);
    }
    Cholesky::new(g)
        .expect("Gram matrix plus a positive shift is positive definite")
        .solve(rhs)
}

fn slice_tikhonov(a: &CMatrix, b: &CMatrix, lambda: f64, form: TikhonovForm) -> CMatrix {
    let ah = a.adjoint();
    match form {
        TikhonovForm::Gram => hpd_solve(&ah * a, lambda * lambda, &(&ah * b)),
        TikhonovForm::Outer => &ah * hpd_solve(a * &ah, lambda * lambda, b),
    }
}

/// Exact Tikhonov solution from the regularized normal equations, using the
/// smaller of the two closed forms.
pub fn direct_trls(a: &Tensor3, b: &Tensor3, lambda: f64) -> Result<Tensor3> {
    let form = if a.n2() <= a.n1() {
        TikhonovForm::Gram
    } else {
        TikhonovForm::Outer
    };
    direct_trls_with(a, b, lambda, form)
}

pub fn direct_trls_with(
    a: &Tensor3,
    b: &Tensor3,
    lambda: f64,
    form: TikhonovForm,
) -> Result<Tensor3> {
    check_lambda(lambda)?;
    if a.n1() != b.n1() || a.n3() != b.n3() {
        return Err(Error::shape(
            "direct_trls",
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    let x = direct_trls_spectral(&dft_tubes(a), &dft_tubes(b), lambda, Some(form))?;
    idft_tubes(&x)
}

pub fn direct_trls_spectral(
    a: &SpectralTensor,
    b: &SpectralTensor,
    lambda: f64,
    form: Option<TikhonovForm>,
) -> Result<SpectralTensor> {
    check_lambda(lambda)?;
    if a.n1() != b.n1() || a.n3() != b.n3() {
        return Err(Error::shape(
            "direct_trls",
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    let form = form.unwrap_or(if a.n2() <= a.n1() {
        TikhonovForm::Gram
    } else {
        TikhonovForm::Outer
    });
    Ok(a.map_slices(|j, aj| slice_tikhonov(aj, b.slice(j), lambda, form)))
}

/// `[A, lambda I_m]`.
pub fn augmented_operator(a: &Tensor3, lambda: f64) -> Result<Tensor3> {
    a.hstack(&identity(a.n1(), a.n3()).scale(lambda))
}

/// Minimum-Frobenius-norm solution of `min ||[A, lambda I] * Xhat - B||_F`.
///
/// Computed from the economy t-QR of `[A, lambda I]^T = Q * R` as
/// `Xhat = Q * R^-T * B`. The top `n` rows coincide with the Tikhonov
/// solution; the result has `n + m` rows.
pub fn min_norm_augmented_ls(a: &Tensor3, b: &Tensor3, lambda: f64) -> Result<Tensor3> {
    check_lambda(lambda)?;
    if a.n1() != b.n1() || a.n3() != b.n3() {
        return Err(Error::shape(
            "min_norm_augmented_ls",
            format!("A {:?}, B {:?}", a.shape(), b.shape()),
        ));
    }
    let a_lambda_t = crate::tensor::transpose(&augmented_operator(a, lambda)?);
    let (q, r) = tqr_spectral(&dft_tubes(&a_lambda_t), QrMode::Economy);
    let y = f_tri_solve_spectral(&r, &dft_tubes(b), TriSide::TransposeLeftInverse)?;
    idft_tubes(&q.mul(&y)?)
}
