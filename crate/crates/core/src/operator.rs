//! Linear operators acting on lateral slices in the Fourier domain.

use crate::spectral::{CMatrix, SpectralTensor};

/// A tensor `A` (m x n x p) known through its action on spectral lateral slices.
pub trait SpectralOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn tube_len(&self) -> usize;

    /// `A * x` for `x` of shape `n x c x p`.
    fn apply(&self, x: &SpectralTensor) -> SpectralTensor;

    /// `A^T * y` for `y` of shape `m x c x p`.
    fn apply_transpose(&self, y: &SpectralTensor) -> SpectralTensor;
}

impl SpectralOperator for SpectralTensor {
    fn rows(&self) -> usize {
        self.n1()
    }

    fn cols(&self) -> usize {
        self.n2()
    }

    fn tube_len(&self) -> usize {
        self.n3()
    }

    fn apply(&self, x: &SpectralTensor) -> SpectralTensor {
        SpectralTensor::from_half_fn(self.n3(), |j| self.slice(j) * x.slice(j))
    }

    fn apply_transpose(&self, y: &SpectralTensor) -> SpectralTensor {
        SpectralTensor::from_half_fn(self.n3(), |j| self.slice(j).ad_mul(y.slice(j)))
    }
}

/// `[A; r]`: a base operator with extra rows appended, without copying the base.
#[derive(Clone, Copy, Debug)]
pub struct RowAppended<'a> {
    base: &'a SpectralTensor,
    extra: &'a SpectralTensor,
}

impl<'a> RowAppended<'a> {
    /// `extra` must have `base.n2()` columns and the same tube length.
    pub fn new(base: &'a SpectralTensor, extra: &'a SpectralTensor) -> Self {
        assert_eq!(base.n2(), extra.n2(), "appended rows must match column count");
        assert_eq!(base.n3(), extra.n3(), "appended rows must match tube length");
        Self { base, extra }
    }
}

impl SpectralOperator for RowAppended<'_> {
    fn rows(&self) -> usize {
        self.base.n1() + self.extra.n1()
    }

    fn cols(&self) -> usize {
        self.base.n2()
    }

    fn tube_len(&self) -> usize {
        self.base.n3()
    }

    fn apply(&self, x: &SpectralTensor) -> SpectralTensor {
        let (m, e) = (self.base.n1(), self.extra.n1());
        SpectralTensor::from_half_fn(self.tube_len(), |j| {
            let xj = x.slice(j);
            let mut out = CMatrix::zeros(m + e, xj.ncols());
            out.rows_mut(0, m).copy_from(&(self.base.slice(j) * xj));
            out.rows_mut(m, e).copy_from(&(self.extra.slice(j) * xj));
            out
        })
    }

    fn apply_transpose(&self, y: &SpectralTensor) -> SpectralTensor {
        let (m, e) = (self.base.n1(), self.extra.n1());
        SpectralTensor::from_half_fn(self.tube_len(), |j| {
            let yj = y.slice(j);
            self.base.slice(j).ad_mul(&yj.rows(0, m)) + self.extra.slice(j).ad_mul(&yj.rows(m, e))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{randn_tensor, NormalRng};
    use crate::spectral::{dft_tubes, idft_tubes, tprod};
    use crate::tensor::{rel_error, transpose};

    #[test]
    fn row_appended_matches_materialized_stack() {
        let mut rng = NormalRng::new(1);
        let a = randn_tensor(5, 3, 4, &mut rng);
        let r = randn_tensor(1, 3, 4, &mut rng);
        let stacked = a.vstack(&r).unwrap();
        let (sa, sr) = (dft_tubes(&a), dft_tubes(&r));
        let op = RowAppended::new(&sa, &sr);
        let x = randn_tensor(3, 2, 4, &mut rng);
        let y = randn_tensor(6, 2, 4, &mut rng);
        let ax = idft_tubes(&op.apply(&dft_tubes(&x))).unwrap();
        assert!(rel_error(&ax, &tprod(&stacked, &x).unwrap()).unwrap() < 1e-13);
        let aty = idft_tubes(&op.apply_transpose(&dft_tubes(&y))).unwrap();
        let oracle = tprod(&transpose(&stacked), &y).unwrap();
        assert!(rel_error(&aty, &oracle).unwrap() < 1e-13);
    }
}
