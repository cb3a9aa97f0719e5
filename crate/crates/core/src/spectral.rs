//! Fourier-domain view of third-order tensors and the t-product algebra.
//!
//! The forward transform is the unnormalized DFT along every tube; the inverse
//! carries the `1/n3` factor. In that convention the t-product is a plain
//! matrix product in every spectral slice and the tensor transpose is the
//! per-slice conjugate transpose.
//!
//! A spectrum of a real tensor is conjugate symmetric, `slice(n3 - j) =
//! conj(slice(j))`, so slice-wise maps only evaluate slices `0..=n3/2` and
//! mirror the rest.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::NormalRng;
use crate::tensor::{fro_norm, Tensor3, TubalScalar};

pub type CMatrix = DMatrix<Complex64>;

/// Relative threshold below which a spectral coefficient counts as zero when
/// deciding whether a tube is invertible.
pub const TUBE_INVERTIBILITY_TOL: f64 = 1e-10;

/// Relative tolerance for the zero-slice branch of [`normalize`].
pub const NORMALIZE_TOL: f64 = 1e-12;

/// Largest admissible imaginary part after an inverse transform, relative to
/// `1 + ||result||_F`.
pub const REAL_OUTPUT_TOL: f64 = 1e-8;

// below this many complex entries per half spectrum, slice maps run serially
const PARALLEL_THRESHOLD: usize = 1 << 15;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Number of spectral slices that determine the rest by conjugate symmetry.
#[inline]
pub fn half_len(n3: usize) -> usize {
    n3 / 2 + 1
}

#[inline]
fn mirror_of(j: usize, n3: usize) -> usize {
    (n3 - j) % n3
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTensor {
    n1: usize,
    n2: usize,
    slices: Vec<CMatrix>,
}

impl SpectralTensor {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            slices: vec![CMatrix::zeros(n1, n2); n3],
        }
    }

    pub fn from_slices(slices: Vec<CMatrix>) -> Result<Self> {
        let (n1, n2) = slices
            .first()
            .map(|s| s.shape())
            .ok_or_else(|| Error::InvalidArgument("no spectral slices".into()))?;
        if slices.iter().any(|s| s.shape() != (n1, n2)) {
            return Err(Error::shape("from_slices", "slices differ in shape"));
        }
        Ok(Self { n1, n2, slices })
    }

    /// Builds a spectrum by evaluating `f` on the independent slices and
    /// mirroring conjugates onto the rest.
    pub fn from_half_fn(n3: usize, f: impl Fn(usize) -> CMatrix + Sync) -> Self {
        Self::try_from_half_fn(n3, |j| Ok(f(j))).expect("infallible")
    }

    pub fn try_from_half_fn(
        n3: usize,
        f: impl Fn(usize) -> Result<CMatrix> + Sync,
    ) -> Result<Self> {
        let half = half_len(n3).min(n3);
        let first = f(0)?;
        let (n1, n2) = first.shape();
        let rest: Vec<CMatrix> = if n1 * n2 * half >= PARALLEL_THRESHOLD {
            (1..half).into_par_iter().map(&f).collect::<Result<_>>()?
        } else {
            (1..half).map(&f).collect::<Result<_>>()?
        };
        let mut slices = Vec::with_capacity(n3);
        slices.push(first);
        slices.extend(rest);
        for j in half..n3 {
            let m = slices[mirror_of(j, n3)].map(|z| z.conj());
            slices.push(m);
        }
        if slices.iter().any(|s| s.shape() != (n1, n2)) {
            return Err(Error::shape("slice map", "slices differ in shape"));
        }
        Ok(Self { n1, n2, slices })
    }

    pub fn map_slices(&self, f: impl Fn(usize, &CMatrix) -> CMatrix + Sync) -> Self {
        Self::from_half_fn(self.n3(), |j| f(j, &self.slices[j]))
    }

    pub fn try_map_slices(
        &self,
        f: impl Fn(usize, &CMatrix) -> Result<CMatrix> + Sync,
    ) -> Result<Self> {
        Self::try_from_half_fn(self.n3(), |j| f(j, &self.slices[j]))
    }

    #[inline]
    pub fn n1(&self) -> usize {
        self.n1
    }

    #[inline]
    pub fn n2(&self) -> usize {
        self.n2
    }

    #[inline]
    pub fn n3(&self) -> usize {
        self.slices.len()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3())
    }

    #[inline]
    pub fn slice(&self, j: usize) -> &CMatrix {
        &self.slices[j]
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    /// Slice-wise product: the spectral form of the t-product.
    pub fn mul(&self, rhs: &SpectralTensor) -> Result<SpectralTensor> {
        if self.n2 != rhs.n1 || self.n3() != rhs.n3() {
            return Err(Error::shape(
                "tprod",
                format!("{:?} * {:?}", self.shape(), rhs.shape()),
            ));
        }
        Ok(Self::from_half_fn(self.n3(), |j| {
            &self.slices[j] * &rhs.slices[j]
        }))
    }

    /// Spectral form of the tensor transpose.
    pub fn adjoint(&self) -> SpectralTensor {
        self.map_slices(|_, m| m.adjoint())
    }

    pub fn add(&self, rhs: &SpectralTensor) -> Result<SpectralTensor> {
        self.zip(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &SpectralTensor) -> Result<SpectralTensor> {
        self.zip(rhs, "sub", |a, b| a - b)
    }

    fn zip(
        &self,
        rhs: &SpectralTensor,
        op: &'static str,
        f: impl Fn(&CMatrix, &CMatrix) -> CMatrix + Sync,
    ) -> Result<SpectralTensor> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), rhs.shape()),
            ));
        }
        Ok(Self::from_half_fn(self.n3(), |j| {
            f(&self.slices[j], &rhs.slices[j])
        }))
    }

    /// Multiplies on the right by a tube given by its spectrum.
    pub fn mul_tube(&self, tube: &[Complex64]) -> SpectralTensor {
        self.map_slices(|j, m| m * tube[j])
    }

    pub fn scale(&self, s: f64) -> SpectralTensor {
        self.map_slices(|_, m| m * Complex64::new(s, 0.0))
    }

    pub fn lateral(&self, j: usize) -> SpectralTensor {
        self.cols(j..j + 1)
    }

    pub fn cols(&self, cols: std::ops::Range<usize>) -> SpectralTensor {
        Self {
            n1: self.n1,
            n2: cols.len(),
            slices: self
                .slices
                .iter()
                .map(|s| s.columns(cols.start, cols.len()).into_owned())
                .collect(),
        }
    }

    pub fn rows(&self, rows: std::ops::Range<usize>) -> SpectralTensor {
        Self {
            n1: rows.len(),
            n2: self.n2,
            slices: self
                .slices
                .iter()
                .map(|s| s.rows(rows.start, rows.len()).into_owned())
                .collect(),
        }
    }

    /// Appends rows below every slice.
    pub fn vstack(&self, below: &SpectralTensor) -> Result<SpectralTensor> {
        if self.n2 != below.n2 || self.n3() != below.n3() {
            return Err(Error::shape(
                "vstack",
                format!("{:?} over {:?}", self.shape(), below.shape()),
            ));
        }
        let slices = self
            .slices
            .iter()
            .zip(&below.slices)
            .map(|(a, b)| {
                let mut m = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
                m.rows_mut(0, a.nrows()).copy_from(a);
                m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
                m
            })
            .collect();
        Ok(Self {
            n1: self.n1 + below.n1,
            n2: self.n2,
            slices,
        })
    }

    pub fn hstack(&self, right: &SpectralTensor) -> Result<SpectralTensor> {
        if self.n1 != right.n1 || self.n3() != right.n3() {
            return Err(Error::shape(
                "hstack",
                format!("{:?} beside {:?}", self.shape(), right.shape()),
            ));
        }
        let slices = self
            .slices
            .iter()
            .zip(&right.slices)
            .map(|(a, b)| {
                let mut m = CMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                m.columns_mut(0, a.ncols()).copy_from(a);
                m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
                m
            })
            .collect();
        Ok(Self {
            n1: self.n1,
            n2: self.n2 + right.n2,
            slices,
        })
    }

    pub fn set_lateral(&mut self, j: usize, x: &SpectralTensor) {
        for (s, xs) in self.slices.iter_mut().zip(&x.slices) {
            s.set_column(j, &xs.column(0));
        }
    }

    /// Spectrum of the tube at `(i, j)`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.slices.iter().map(|s| s[(i, j)]).collect()
    }

    /// Spectral Frobenius norm; equals `sqrt(n3) * ||A||_F` of the real tensor.
    pub fn fro_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Unnormalized DFT of every tube `(i, j, :)`.
pub fn dft_tubes(a: &Tensor3) -> SpectralTensor {
    let (n1, n2, n3) = a.shape();
    let len = n1 * n2;
    if n3 == 0 || len == 0 {
        return SpectralTensor {
            n1,
            n2,
            slices: vec![CMatrix::zeros(n1, n2); n3],
        };
    }
    let data = a.as_slice();
    let mut buf = vec![Complex64::new(0.0, 0.0); len * n3];
    for t in 0..len {
        for k in 0..n3 {
            buf[t * n3 + k] = Complex64::new(data[k * len + t], 0.0);
        }
    }
    if n3 > 1 {
        plan(n3, false).process(&mut buf);
    }
    let slices = (0..n3)
        .map(|k| CMatrix::from_fn(n1, n2, |i, j| buf[(j * n1 + i) * n3 + k]))
        .collect();
    SpectralTensor { n1, n2, slices }
}

/// Inverse DFT along tubes with `1/n3` scaling, returning the real part.
///
/// Fails when the imaginary residue exceeds [`REAL_OUTPUT_TOL`], which means
/// the input was not the spectrum of a real tensor.
pub fn idft_tubes(s: &SpectralTensor) -> Result<Tensor3> {
    let (n1, n2, n3) = s.shape();
    let len = n1 * n2;
    if n3 == 0 || len == 0 {
        return Ok(Tensor3::zeros(n1, n2, n3));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); len * n3];
    for (k, slice) in s.slices.iter().enumerate() {
        for (t, z) in slice.as_slice().iter().enumerate() {
            buf[t * n3 + k] = *z;
        }
    }
    if n3 > 1 {
        plan(n3, true).process(&mut buf);
    }
    let inv = 1.0 / n3 as f64;
    let mut max_imag = 0.0f64;
    let mut data = vec![0.0; len * n3];
    for t in 0..len {
        for k in 0..n3 {
            let z = buf[t * n3 + k] * inv;
            max_imag = max_imag.max(z.im.abs());
            data[k * len + t] = z.re;
        }
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let out = Tensor3::from_vec_unchecked(n1, n2, n3, data);
    let limit = REAL_OUTPUT_TOL * (1.0 + fro_norm(&out));
    if max_imag > limit {
        return Err(Error::NotConjugateSymmetric { max_imag, limit });
    }
    Ok(out)
}

/// The t-product `A * B`.
pub fn tprod(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    if a.n2() != b.n1() || a.n3() != b.n3() {
        return Err(Error::shape(
            "tprod",
            format!("{:?} * {:?}", a.shape(), b.shape()),
        ));
    }
    idft_tubes(&dft_tubes(a).mul(&dft_tubes(b))?)
}

fn tube_magnitudes(spec: &[Complex64]) -> (f64, f64) {
    spec.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| {
        let m = z.norm();
        (lo.min(m), hi.max(m))
    })
}

/// `(min, max)` spectral magnitudes of a tube.
pub fn tube_spectrum_range(a: &TubalScalar) -> (f64, f64) {
    let spec = dft_tubes(a);
    let vals: Vec<Complex64> = spec.tube(0, 0);
    tube_magnitudes(&vals)
}

/// Invertibility test for a tube spectrum: every coefficient must exceed
/// `tol * scale`, where `scale` defaults to the tube's own largest magnitude.
pub fn spectrum_invertible(spec: &[Complex64], tol: f64, scale: Option<f64>) -> bool {
    let (lo, hi) = tube_magnitudes(spec);
    let reference = scale.unwrap_or(hi);
    hi > 0.0 && lo > tol * reference
}

/// Inverse of a tube under the t-product.
pub fn tube_inverse(a: &TubalScalar, tol: f64) -> Result<TubalScalar> {
    if a.n1() != 1 || a.n2() != 1 {
        return Err(Error::shape("tube_inverse", format!("{:?}", a.shape())));
    }
    let spec = dft_tubes(a);
    let vals = spec.tube(0, 0);
    let (lo, hi) = tube_magnitudes(&vals);
    if !spectrum_invertible(&vals, tol, None) {
        return Err(Error::NonInvertibleTube {
            min_magnitude: lo,
            max_magnitude: hi,
        });
    }
    idft_tubes(&spec.map_slices(|_, m| m.map(|z| z.inv())))
}

/// Tube length `||X^T * X||_F / ||X||_F` of a lateral slice.
pub fn tube_length(x: &Tensor3) -> Result<f64> {
    if x.n2() != 1 {
        return Err(Error::shape("tube_length", format!("{:?}", x.shape())));
    }
    let nx = fro_norm(x);
    if nx == 0.0 {
        return Err(Error::ZeroInput("tube_length"));
    }
    let xt = crate::tensor::transpose(x);
    Ok(fro_norm(&tprod(&xt, x)?) / nx)
}

/// Spectral output of [`normalize_spectral`].
#[derive(Clone, Debug)]
pub struct Normalized {
    pub v: SpectralTensor,
    /// Spectrum of the tube `a`; real and nonnegative.
    pub a: Vec<Complex64>,
    /// Whether some spectral slice fell below tolerance and was replaced by
    /// a random unit vector with a zeroed coefficient.
    pub replaced: bool,
}

/// Normalization of a lateral slice carried out in the Fourier domain.
///
/// Each spectral slice is scaled to unit 2-norm and its norm becomes the
/// matching coefficient of `a`. Slices with norm below
/// `NORMALIZE_TOL * max_j ||x^(j)||` (floor `1e-300`) are replaced by a random
/// unit vector drawn from `rng` and get coefficient zero.
pub fn normalize_spectral(x: &SpectralTensor, rng: &mut NormalRng) -> Result<Normalized> {
    normalize_spectral_impl(x, rng, false)
}

/// As [`normalize_spectral`], but an all-zero input takes the replacement
/// branch in every slice instead of failing.
pub(crate) fn normalize_spectral_impl(
    x: &SpectralTensor,
    rng: &mut NormalRng,
    allow_zero: bool,
) -> Result<Normalized> {
    if x.n2() != 1 {
        return Err(Error::shape("normalize", format!("{:?}", x.shape())));
    }
    let (n, n3) = (x.n1(), x.n3());
    let norms: Vec<f64> = x.slices.iter().map(|s| s.norm()).collect();
    let max = norms.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 && !allow_zero {
        return Err(Error::ZeroInput("normalize"));
    }
    let tol = (NORMALIZE_TOL * max).max(1e-300);
    let half = half_len(n3).min(n3);
    let mut slices = vec![CMatrix::zeros(n, 1); n3];
    let mut a = vec![Complex64::new(0.0, 0.0); n3];
    let mut replaced = false;
    for j in 0..half {
        if norms[j] >= tol {
            slices[j] = x.slices[j].map(|z| z / norms[j]);
            a[j] = Complex64::new(norms[j], 0.0);
        } else {
            replaced = true;
            let mut r = vec![0.0; n];
            rng.fill_normal(&mut r);
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            slices[j] = CMatrix::from_fn(n, 1, |i, _| Complex64::new(r[i] / rn, 0.0));
        }
    }
    for j in half..n3 {
        let src = mirror_of(j, n3);
        slices[j] = slices[src].map(|z| z.conj());
        a[j] = a[src];
    }
    Ok(Normalized {
        v: SpectralTensor { n1: n, n2: 1, slices },
        a,
        replaced,
    })
}

/// Splits a nonzero lateral slice as `X = V * a` with `V` of unit length.
pub fn normalize(x: &Tensor3, rng: &mut NormalRng) -> Result<(Tensor3, TubalScalar)> {
    if x.n2() != 1 {
        return Err(Error::shape("normalize", format!("{:?}", x.shape())));
    }
    let out = normalize_spectral(&dft_tubes(x), rng)?;
    let v = idft_tubes(&out.v)?;
    let a = idft_tubes(&tube_from_spectrum(&out.a))?;
    Ok((v, a))
}

/// Wraps a tube spectrum as a `1 x 1 x p` spectral tensor.
pub fn tube_from_spectrum(spec: &[Complex64]) -> SpectralTensor {
    SpectralTensor {
        n1: 1,
        n2: 1,
        slices: spec.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect(),
    }
}
