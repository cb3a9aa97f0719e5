//! Tensor Golub-Kahan bidiagonalization.
//!
//! Starting from `b`, the process builds `W_k` (n x k x p), `Q_{k+1}`
//! (m x (k+1) x p) and the lower bidiagonal tensor `Pbar_k` of tubes
//! `c_1..c_k` (diagonal) and `z_2..z_{k+1}` (subdiagonal) with
//!
//! ```text
//! A * W_k = Q_{k+1} * Pbar_k,    A^T * Q_k = W_k * P_k^T
//! ```
//!
//! The recurrence runs entirely on spectra. A step whose new tube `c_i` or
//! `z_{i+1}` is not invertible ends the process early with `breakdown` set.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::SpectralOperator;
use crate::rng::NormalRng;
use crate::spectral::{
    dft_tubes, idft_tubes, normalize_spectral_impl, tube_from_spectrum, CMatrix, SpectralTensor,
    TUBE_INVERTIBILITY_TOL,
};
use crate::tensor::{Tensor3, TubalScalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GkbOptions {
    pub steps: usize,
    pub reorthogonalize: bool,
    /// Seed for the random vectors drawn when a spectral slice vanishes.
    pub seed: u64,
}

impl GkbOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            reorthogonalize: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GkbResult {
    pub w: Tensor3,
    pub q: Tensor3,
    pub pbar: Tensor3,
    pub z1: TubalScalar,
    pub steps: usize,
    pub breakdown: bool,
}

/// Spectral form of the decomposition, as consumed by the solvers.
#[derive(Clone, Debug)]
pub struct SpectralGkb {
    pub w: Vec<SpectralTensor>,
    pub q: Vec<SpectralTensor>,
    pub c: Vec<Vec<Complex64>>,
    /// `z[0]` is `z_1`; `z[i]` is the subdiagonal tube below `c_i`.
    pub z: Vec<Vec<Complex64>>,
    pub breakdown: bool,
}

impl SpectralGkb {
    pub fn steps(&self) -> usize {
        self.w.len()
    }

    /// `W_k` as an `n x k x p` spectrum.
    pub fn w_basis(&self, n: usize, p: usize) -> SpectralTensor {
        stack_columns(&self.w, n, p)
    }

    pub fn q_basis(&self, m: usize, p: usize) -> SpectralTensor {
        stack_columns(&self.q, m, p)
    }

    /// `Pbar_k` as a `(k+1) x k x p` spectrum.
    pub fn pbar(&self, p: usize) -> SpectralTensor {
        let k = self.steps();
        SpectralTensor::from_half_fn(p, |j| {
            let mut m = CMatrix::zeros(k + 1, k);
            for i in 0..k {
                m[(i, i)] = self.c[i][j];
                m[(i + 1, i)] = self.z[i + 1][j];
            }
            m
        })
    }
}

fn stack_columns(cols: &[SpectralTensor], rows: usize, p: usize) -> SpectralTensor {
    SpectralTensor::from_half_fn(p, |j| {
        let mut m = CMatrix::zeros(rows, cols.len());
        for (i, c) in cols.iter().enumerate() {
            m.set_column(i, &c.slice(j).column(0));
        }
        m
    })
}

fn max_magnitude(t: &[Complex64]) -> f64 {
    t.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_magnitude(t: &[Complex64]) -> f64 {
    t.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
}

/// `v -= sum_j basis_j * (basis_j^T * v)`, one basis vector at a time.
fn reorthogonalize(v: &mut SpectralTensor, basis: &[SpectralTensor]) {
    for b in basis {
        *v = v.map_slices(|j, vj| {
            let coeff = b.slice(j).column(0).dotc(&vj.column(0));
            vj - b.slice(j) * coeff
        });
    }
}

/// `x - y * t` for a lateral slice `y` and tube spectrum `t`.
fn sub_scaled(x: &SpectralTensor, y: &SpectralTensor, t: &[Complex64]) -> SpectralTensor {
    x.map_slices(|j, xj| xj - y.slice(j) * t[j])
}

/// Runs the bidiagonalization against a spectral operator.
pub fn tgkb_spectral(
    op: &impl SpectralOperator,
    b: &SpectralTensor,
    opts: GkbOptions,
) -> Result<SpectralGkb> {
    let (m, n, p) = (op.rows(), op.cols(), op.tube_len());
    if b.shape() != (m, 1, p) {
        return Err(Error::shape(
            "tgkb",
            format!("b is {:?}, operator is {m}x{n}x{p}", b.shape()),
        ));
    }
    if opts.steps < 1 || opts.steps > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "steps must lie in 1..={}, got {}",
            m.min(n),
            opts.steps
        )));
    }
    if op.apply_transpose(b).fro_norm() == 0.0 {
        return Err(Error::ZeroInput("tgkb: A^T * b"));
    }
    let mut rng = NormalRng::new(opts.seed);

    let first = normalize_spectral_impl(b, &mut rng, false)?;
    let mut out = SpectralGkb {
        w: Vec::with_capacity(opts.steps),
        q: vec![first.v],
        c: Vec::with_capacity(opts.steps),
        z: vec![first.a],
        breakdown: false,
    };
    let mut scale = max_magnitude(&out.z[0]);
    if min_magnitude(&out.z[0]) <= TUBE_INVERTIBILITY_TOL * scale {
        out.breakdown = true;
        return Ok(out);
    }

    for i in 0..opts.steps {
        let qi = &out.q[i];
        let mut w = op.apply_transpose(qi);
        if i > 0 {
            w = sub_scaled(&w, &out.w[i - 1], &out.z[i]);
        }
        if opts.reorthogonalize {
            reorthogonalize(&mut w, &out.w);
        }
        let nw = normalize_spectral_impl(&w, &mut rng, true)?;
        scale = scale.max(max_magnitude(&nw.a));
        if min_magnitude(&nw.a) <= TUBE_INVERTIBILITY_TOL * scale {
            out.breakdown = true;
            break;
        }
        out.w.push(nw.v);
        out.c.push(nw.a);

        let mut q = sub_scaled(&op.apply(&out.w[i]), &out.q[i], &out.c[i]);
        if opts.reorthogonalize {
            reorthogonalize(&mut q, &out.q);
        }
        let nq = normalize_spectral_impl(&q, &mut rng, true)?;
        scale = scale.max(max_magnitude(&nq.a));
        let ok = min_magnitude(&nq.a) > TUBE_INVERTIBILITY_TOL * scale;
        out.q.push(nq.v);
        out.z.push(nq.a);
        if !ok {
            out.breakdown = true;
            break;
        }
    }
    Ok(out)
}

/// Tensor Golub-Kahan bidiagonalization of `A` started from the lateral slice `b`.
pub fn tgkb(a: &Tensor3, b: &Tensor3, opts: GkbOptions) -> Result<GkbResult> {
    if b.n2() != 1 || b.n1() != a.n1() || b.n3() != a.n3() {
        return Err(Error::shape(
            "tgkb",
            format!("A {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    let spec = tgkb_spectral(&dft_tubes(a), &dft_tubes(b), opts)?;
    let (m, n, p) = a.shape();
    let k = spec.steps();
    let q = spec.q_basis(m, p);
    Ok(GkbResult {
        w: idft_tubes(&spec.w_basis(n, p))?,
        q: idft_tubes(&q.cols(0..k + 1))?,
        pbar: idft_tubes(&spec.pbar(p))?,
        z1: idft_tubes(&tube_from_spectrum(&spec.z[0]))?,
        steps: k,
        breakdown: spec.breakdown,
    })
}
