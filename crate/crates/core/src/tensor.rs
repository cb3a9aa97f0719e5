//! Dense real third-order tensors.
//!
//! Storage is frontal-slice-major and column-major within each slice, so the
//! entry `(i, j, k)` lives at `k * n1 * n2 + j * n1 + i`. Every tube `(i, j, :)`
//! therefore has the uniform stride `n1 * n2`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

/// A `1 x 1 x p` tube, the scalar of t-product algebra.
pub type TubalScalar = Tensor3;

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        }
    }

    /// Builds a tensor from storage-order data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n1 * n2 * n3 {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for shape {n1}x{n2}x{n3}", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { n1, n2, n3, data })
    }

    pub(crate) fn from_vec_unchecked(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n1 * n2 * n3);
        Self { n1, n2, n3, data }
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { n1, n2, n3, data }
    }

    /// Builds a tensor whose frontal slices are the given matrices.
    pub fn from_frontal_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no frontal slices".into()))?;
        let (n1, n2) = first.shape();
        let mut data = Vec::with_capacity(n1 * n2 * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(Error::shape(
                    "from_frontal_slices",
                    format!("slice {k} is {:?}, expected {n1}x{n2}", s.shape()),
                ));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::from_vec(n1, n2, slices.len(), data)
    }

    /// Builds a `1 x 1 x p` tube.
    pub fn tube(entries: &[f64]) -> Self {
        Self::from_vec_unchecked(1, 1, entries.len(), entries.to_vec())
    }

    /// The identity tube `e1 = (1, 0, ..., 0)`.
    pub fn unit_tube(p: usize) -> Self {
        identity(1, p)
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
        self.n3
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.n1 * self.n2 + j * self.n1 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn frontal_slice(&self, k: usize) -> DMatrix<f64> {
        let len = self.n1 * self.n2;
        DMatrix::from_column_slice(self.n1, self.n2, &self.data[k * len..(k + 1) * len])
    }

    /// Entries of tube `(i, j, :)`.
    pub fn tube_at(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.n3).map(|k| self.get(i, j, k)).collect()
    }

    /// Lateral slice `A(:, j, :)` as an `n1 x 1 x n3` tensor.
    pub fn lateral_slice(&self, j: usize) -> Tensor3 {
        let mut out = Vec::with_capacity(self.n1 * self.n3);
        for k in 0..self.n3 {
            let start = self.index(0, j, k);
            out.extend_from_slice(&self.data[start..start + self.n1]);
        }
        Self::from_vec_unchecked(self.n1, 1, self.n3, out)
    }

    pub fn set_lateral_slice(&mut self, j: usize, x: &Tensor3) -> Result<()> {
        if x.n1 != self.n1 || x.n2 != 1 || x.n3 != self.n3 || j >= self.n2 {
            return Err(Error::shape(
                "set_lateral_slice",
                format!("{:?} into column {j} of {:?}", x.shape(), self.shape()),
            ));
        }
        for k in 0..self.n3 {
            let start = self.index(0, j, k);
            self.data[start..start + self.n1]
                .copy_from_slice(&x.data[k * self.n1..(k + 1) * self.n1]);
        }
        Ok(())
    }

    /// Horizontal slice `A(i, :, :)` as a `1 x n2 x n3` tensor.
    pub fn horizontal_slice(&self, i: usize) -> Tensor3 {
        Tensor3::from_fn(1, self.n2, self.n3, |_, j, k| self.get(i, j, k))
    }

    /// Sub-tensor of rows `rows.start..rows.end`.
    pub fn rows(&self, rows: std::ops::Range<usize>) -> Tensor3 {
        Tensor3::from_fn(rows.len(), self.n2, self.n3, |i, j, k| {
            self.get(rows.start + i, j, k)
        })
    }

    /// Sub-tensor of lateral slices `cols.start..cols.end`.
    pub fn cols(&self, cols: std::ops::Range<usize>) -> Tensor3 {
        Tensor3::from_fn(self.n1, cols.len(), self.n3, |i, j, k| {
            self.get(i, cols.start + j, k)
        })
    }

    /// Stacks `[self; below]` vertically (along the first mode).
    pub fn vstack(&self, below: &Tensor3) -> Result<Tensor3> {
        if self.n2 != below.n2 || self.n3 != below.n3 {
            return Err(Error::shape(
                "vstack",
                format!("{:?} over {:?}", self.shape(), below.shape()),
            ));
        }
        let n1 = self.n1 + below.n1;
        let mut data = Vec::with_capacity(n1 * self.n2 * self.n3);
        for k in 0..self.n3 {
            for j in 0..self.n2 {
                let a = self.index(0, j, k);
                data.extend_from_slice(&self.data[a..a + self.n1]);
                let b = below.index(0, j, k);
                data.extend_from_slice(&below.data[b..b + below.n1]);
            }
        }
        Ok(Self::from_vec_unchecked(n1, self.n2, self.n3, data))
    }

    /// Concatenates `[self, right]` along the second mode.
    pub fn hstack(&self, right: &Tensor3) -> Result<Tensor3> {
        if self.n1 != right.n1 || self.n3 != right.n3 {
            return Err(Error::shape(
                "hstack",
                format!("{:?} beside {:?}", self.shape(), right.shape()),
            ));
        }
        let n2 = self.n2 + right.n2;
        let mut data = Vec::with_capacity(self.n1 * n2 * self.n3);
        let (ls, rs) = (self.n1 * self.n2, right.n1 * right.n2);
        for k in 0..self.n3 {
            data.extend_from_slice(&self.data[k * ls..(k + 1) * ls]);
            data.extend_from_slice(&right.data[k * rs..(k + 1) * rs]);
        }
        Ok(Self::from_vec_unchecked(self.n1, n2, self.n3, data))
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        Self::from_vec_unchecked(
            self.n1,
            self.n2,
            self.n3,
            self.data.iter().map(|v| v * s).collect(),
        )
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Tensor3,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor3> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(Self::from_vec_unchecked(
            self.n1,
            self.n2,
            self.n3,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// The identity tensor: first frontal slice `I_n`, the rest zero.
pub fn identity(n: usize, p: usize) -> Tensor3 {
    let mut t = Tensor3::zeros(n, n, p);
    for i in 0..n {
        t.set(i, i, 0, 1.0);
    }
    t
}

/// Tensor transpose: every frontal slice transposed, slices 2..n3 reversed.
pub fn transpose(a: &Tensor3) -> Tensor3 {
    let n3 = a.n3;
    Tensor3::from_fn(a.n2, a.n1, n3, |i, j, k| {
        let src = if k == 0 { 0 } else { n3 - k };
        a.get(j, i, src)
    })
}

pub fn fro_norm(a: &Tensor3) -> f64 {
    // scaled accumulation keeps tiny and huge entries from under/overflowing
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = a.data.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * sum.sqrt()
}

/// `||x - reference||_F / ||reference||_F`.
pub fn rel_error(x: &Tensor3, reference: &Tensor3) -> Result<f64> {
    let denom = fro_norm(reference);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(fro_norm(&x.sub(reference)?) / denom)
}

/// Block-circulant matrix of size `n1*n3 x n2*n3`. Test oracle.
pub fn bcirc(a: &Tensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = a.shape();
    let mut m = DMatrix::zeros(n1 * n3, n2 * n3);
    for bi in 0..n3 {
        for bj in 0..n3 {
            let k = (bi + n3 - bj) % n3;
            for j in 0..n2 {
                for i in 0..n1 {
                    m[(bi * n1 + i, bj * n2 + j)] = a.get(i, j, k);
                }
            }
        }
    }
    m
}

/// Stacks the frontal slices into an `n1*n3 x n2` matrix.
pub fn unfold(a: &Tensor3) -> DMatrix<f64> {
    let (n1, n2, n3) = a.shape();
    DMatrix::from_fn(n1 * n3, n2, |r, j| a.get(r % n1, j, r / n1))
}

pub fn fold(m: &DMatrix<f64>, n1: usize, n2: usize, n3: usize) -> Result<Tensor3> {
    if m.nrows() != n1 * n3 || m.ncols() != n2 {
        return Err(Error::shape(
            "fold",
            format!("{:?} into {n1}x{n2}x{n3}", m.shape()),
        ));
    }
    Ok(Tensor3::from_fn(n1, n2, n3, |i, j, k| m[(k * n1 + i, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor3 {
        Tensor3::from_fn(2, 3, 4, |i, j, k| (i + 10 * j + 100 * k) as f64)
    }

    #[test]
    fn storage_is_slice_major_column_major() {
        let t = sample();
        assert_eq!(t.as_slice()[0..3], [0.0, 1.0, 10.0]);
        assert_eq!(t.as_slice()[6], 100.0);
        assert_eq!(t.frontal_slice(1)[(1, 2)], 121.0);
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Tensor3::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            Tensor3::from_vec(2, 2, 2, v),
            Err(Error::NonFinite(3))
        ));
    }

    #[test]
    fn bcirc_of_two_tube() {
        let m = bcirc(&Tensor3::tube(&[1.0, 2.0]));
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
    }

    #[test]
    fn fold_inverts_unfold() {
        let t = sample();
        assert_eq!(fold(&unfold(&t), 2, 3, 4).unwrap(), t);
        assert!(fold(&unfold(&t), 3, 3, 4).is_err());
    }

    #[test]
    fn transpose_reverses_tube() {
        let t = transpose(&Tensor3::tube(&[1.0, 2.0, 3.0]));
        assert_eq!(t.as_slice(), &[1.0, 3.0, 2.0]);
        let m = Tensor3::from_fn(2, 3, 1, |i, j, _| (i * 3 + j) as f64);
        assert_eq!(
            transpose(&m).frontal_slice(0),
            m.frontal_slice(0).transpose()
        );
        assert_eq!(transpose(&transpose(&sample())), sample());
    }

    #[test]
    fn identity_layout() {
        let id = identity(2, 3);
        assert_eq!(id.frontal_slice(0), DMatrix::identity(2, 2));
        assert!(id.frontal_slice(1).iter().all(|&v| v == 0.0));
        assert!(id.frontal_slice(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norms() {
        let ones = Tensor3::from_fn(2, 2, 2, |_, _, _| 1.0);
        assert!((fro_norm(&ones) - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(rel_error(&ones, &ones).unwrap(), 0.0);
        assert!((rel_error(&ones.scale(2.0), &ones).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            rel_error(&ones, &Tensor3::zeros(2, 2, 2)),
            Err(Error::ZeroReference)
        ));
    }

    #[test]
    fn stacking() {
        let t = sample();
        let v = t.rows(0..1).vstack(&t.rows(1..2)).unwrap();
        assert_eq!(v, t);
        let h = t.cols(0..1).hstack(&t.cols(1..3)).unwrap();
        assert_eq!(h, t);
        let mut u = Tensor3::zeros(2, 3, 4);
        for j in 0..3 {
            u.set_lateral_slice(j, &t.lateral_slice(j)).unwrap();
        }
        assert_eq!(u, t);
        assert_eq!(t.horizontal_slice(1).tube_at(0, 2), t.tube_at(1, 2));
    }
}
