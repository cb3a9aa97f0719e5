//! Seeded test problems: a random operator of ill-determined tubal rank and
//! a separable `baart x prolate` operator with slice-scaled noise.
//!
//! Every instance is a pure function of its parameters. Draws come from one
//! [`NormalRng`] stream in a fixed order documented on each generator.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::factor::tsvd;
use crate::rng::{randn_tensor, NormalRng};
use crate::solvers::{TrlsProblem, UpdateSample};
use crate::spectral::tprod;
use crate::tensor::{fro_norm, transpose, Tensor3};

/// Scale applied to the trailing singular tubes in [`gen_example1`].
pub const EXAMPLE1_TAIL_SCALE: f64 = 1e-2;
/// Number of trailing singular tubes that get scaled down.
pub const EXAMPLE1_TAIL_LEN: usize = 3;
pub const EXAMPLE1_LAMBDA: f64 = 1e2;
pub const PROLATE_ALPHA: f64 = 0.46;

/// Default regularization parameter for [`gen_example2`].
pub fn example2_lambda() -> f64 {
    1.0 / 3.91e-2_f64.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExampleKind {
    /// Random operator with three tiny singular tubes.
    IllDeterminedRank,
    /// `baart`-weighted copies of a `prolate` matrix.
    BaartProlate,
}

impl ExampleKind {
    pub fn number(self) -> u32 {
        match self {
            ExampleKind::IllDeterminedRank => 1,
            ExampleKind::BaartProlate => 2,
        }
    }

    pub fn from_number(n: u32) -> Result<Self> {
        match n {
            1 => Ok(ExampleKind::IllDeterminedRank),
            2 => Ok(ExampleKind::BaartProlate),
            _ => Err(Error::InvalidArgument(format!("unknown example {n}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub kind: ExampleKind,
    pub a: Tensor3,
    pub b: Tensor3,
    pub b_true: Option<Tensor3>,
    pub x_true: Option<Tensor3>,
    pub a1: Tensor3,
    pub b1: Tensor3,
    pub lambda_default: f64,
    pub delta: f64,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn problem(&self) -> TrlsProblem {
        TrlsProblem {
            a: self.a.clone(),
            b: self.b.clone(),
            lambda: self.lambda_default,
        }
    }

    pub fn problem_with_lambda(&self, lambda: f64) -> Result<TrlsProblem> {
        TrlsProblem::new(self.a.clone(), self.b.clone(), lambda)
    }

    pub fn sample(&self) -> UpdateSample {
        UpdateSample::new(self.a1.clone(), self.b1.clone())
    }
}

/// Random `m x m x m` operator whose last three singular tubes are shrunk.
///
/// Stream order: `A'` (m x m x m), `B` (m x c x m), `a1` (m x 1 x m),
/// `b1` (c x 1 x m), each filled in storage order.
pub fn gen_example1(m: usize, c: usize, seed: u64) -> Result<ProblemInstance> {
    if m < 4 {
        return Err(Error::InvalidArgument(format!("example 1 needs m >= 4, got {m}")));
    }
    check_columns(c)?;
    let mut rng = NormalRng::new(seed);
    let a_raw = randn_tensor(m, m, m, &mut rng);
    let b = randn_tensor(m, c, m, &mut rng);
    let a1 = randn_tensor(m, 1, m, &mut rng);
    let b1 = randn_tensor(c, 1, m, &mut rng);

    let svd = tsvd(&a_raw)?;
    let mut s = svd.s;
    for i in m - EXAMPLE1_TAIL_LEN..m {
        for k in 0..m {
            s.set(i, i, k, s.get(i, i, k) * EXAMPLE1_TAIL_SCALE);
        }
    }
    let a = tprod(&tprod(&svd.u, &s)?, &transpose(&svd.v))?;
    Ok(ProblemInstance {
        kind: ExampleKind::IllDeterminedRank,
        a,
        b,
        b_true: None,
        x_true: None,
        a1,
        b1,
        lambda_default: EXAMPLE1_LAMBDA,
        delta: 0.0,
        seed,
    })
}

/// Galerkin discretization of the first-kind Fredholm equation with kernel
/// `exp(s cos t)`, `s in [0, pi/2]`, `t in [0, pi]`, on box functions.
///
/// Follows the Regularization Tools reference. For odd `m` the midpoint
/// cosine of the middle column vanishes and its analytic limit is used.
pub fn baart(m: usize) -> Result<DMatrix<f64>> {
    if m < 3 {
        return Err(Error::InvalidArgument(format!("baart needs m >= 3, got {m}")));
    }
    let n = m as f64;
    let hs = PI / (2.0 * n);
    let ht = PI / n;
    let scale = 1.0 / (3.0 * 2f64.sqrt());
    let ihs: Vec<f64> = (0..=m).map(|i| i as f64 * hs).collect();
    // integral over each s-cell of exp(s * co), exact in s
    let cell_integrals = |co: f64, zero_limit: bool| -> Vec<f64> {
        if zero_limit {
            vec![hs; m]
        } else {
            (0..m)
                .map(|i| ((ihs[i + 1] * co).exp() - (ihs[i] * co).exp()) / co)
                .collect()
        }
    };
    let mut out = DMatrix::zeros(m, m);
    let mut f3 = cell_integrals(1.0, false);
    for j in 1..=m {
        let f1 = f3;
        let co2 = ((j as f64 - 0.5) * ht).cos();
        let co3 = (j as f64 * ht).cos();
        let f2 = cell_integrals(co2, 2 * j == m + 1);
        f3 = cell_integrals(co3, 2 * j == m);
        for i in 0..m {
            out[(i, j - 1)] = scale * (f1[i] + 4.0 * f2[i] + f3[i]);
        }
    }
    Ok(out)
}

/// Symmetric Toeplitz matrix with first row `2 alpha`,
/// `sin(2 pi alpha k) / (pi k)`.
pub fn prolate(m: usize, alpha: f64) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument("prolate needs m >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "prolate needs 0 < alpha < 0.5, got {alpha}"
        )));
    }
    let first: Vec<f64> = (0..m)
        .map(|k| {
            if k == 0 {
                2.0 * alpha
            } else {
                let k = k as f64;
                (2.0 * PI * alpha * k).sin() / (PI * k)
            }
        })
        .collect();
    Ok(DMatrix::from_fn(m, m, |i, j| first[i.abs_diff(j)]))
}

/// `m x m x m` operator with frontal slice `i` equal to
/// `baart(m)[i, 0] * prolate(m, 0.46)`, all-ones `X_true`, and noise scaled
/// so every lateral slice of `B` has relative error `delta`.
///
/// Stream order: `E0` (m x c x m), `a1` (m x 1 x m), `b1` (c x 1 x m).
pub fn gen_example2(m: usize, c: usize, delta: f64, seed: u64) -> Result<ProblemInstance> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
    }
    check_columns(c)?;
    let weights = baart(m)?;
    let base = prolate(m, PROLATE_ALPHA)?;
    let slices: Vec<DMatrix<f64>> = (0..m).map(|i| &base * weights[(i, 0)]).collect();
    let a = Tensor3::from_frontal_slices(&slices)?;
    let x_true = Tensor3::from_fn(m, c, m, |_, _, _| 1.0);
    let b_true = tprod(&a, &x_true)?;

    let mut rng = NormalRng::new(seed);
    let noise = randn_tensor(m, c, m, &mut rng);
    let a1 = randn_tensor(m, 1, m, &mut rng);
    let b1 = randn_tensor(c, 1, m, &mut rng);

    let mut b = b_true.clone();
    if delta > 0.0 {
        for j in 0..c {
            let e0 = noise.lateral_slice(j);
            let target = fro_norm(&b_true.lateral_slice(j));
            let e = e0.scale(delta * target / fro_norm(&e0));
            b.set_lateral_slice(j, &b_true.lateral_slice(j).add(&e)?)?;
        }
    }
    Ok(ProblemInstance {
        kind: ExampleKind::BaartProlate,
        a,
        b,
        b_true: Some(b_true),
        x_true: Some(x_true),
        a1,
        b1,
        lambda_default: example2_lambda(),
        delta,
        seed,
    })
}

fn check_columns(c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::InvalidArgument("need at least one column".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rel_error;

    fn tube_norms(s: &Tensor3) -> Vec<f64> {
        (0..s.n1().min(s.n2()))
            .map(|i| s.tube_at(i, i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    #[test]
    fn example1_tail_tubes_are_scaled() {
        let m = 10;
        let inst = gen_example1(m, 2, 3).unwrap();
        let mut rng = NormalRng::new(3);
        let a_raw = randn_tensor(m, m, m, &mut rng);
        let before = tube_norms(&tsvd(&a_raw).unwrap().s);
        let after = tube_norms(&tsvd(&inst.a).unwrap().s);
        for i in 0..m {
            let expect = if i >= m - 3 { 1e-2 * before[i] } else { before[i] };
            assert!((after[i] - expect).abs() <= 1e-10 * before[0], "tube {i}");
        }
        assert!(after[m - 3] < 0.05 * after[m - 4]);
    }

    #[test]
    fn example1_shapes_and_determinism() {
        let inst = gen_example1(6, 3, 9).unwrap();
        assert_eq!(inst.a.shape(), (6, 6, 6));
        assert_eq!(inst.b.shape(), (6, 3, 6));
        assert_eq!(inst.a1.shape(), (6, 1, 6));
        assert_eq!(inst.b1.shape(), (3, 1, 6));
        assert_eq!(inst, gen_example1(6, 3, 9).unwrap());
        assert_ne!(inst.b, gen_example1(6, 3, 10).unwrap().b);
        assert!(gen_example1(3, 3, 9).is_err());
    }

    #[test]
    fn baart_is_severely_ill_conditioned() {
        let a = baart(20).unwrap();
        let sv = a.singular_values();
        let (max, min) = sv.iter().fold((0.0f64, f64::INFINITY), |(hi, lo), &v| (hi.max(v), lo.min(v)));
        assert!(max / min > 1e15);
        assert!(baart(2).is_err());
    }

    #[test]
    fn baart_first_column_and_row_shapes() {
        let a = baart(8).unwrap();
        assert_eq!(a.shape(), (8, 8));
        for i in 0..8 {
            assert!(a[(i, 0)] > 0.0);
        }
        for i in 1..8 {
            assert!(a[(i, 0)] > a[(i - 1, 0)]);
            assert!(a[(0, i)] < a[(0, i - 1)]);
        }
        assert!((a[(0, 0)] - 0.306_026_14).abs() < 1e-8);
    }

    #[test]
    fn baart_odd_order_is_finite() {
        let a = baart(7).unwrap();
        assert!(a.iter().all(|v| v.is_finite() && *v > 0.0));
        // the middle column sits between its neighbours on the first row
        assert!(a[(0, 3)] < a[(0, 2)] && a[(0, 3)] > a[(0, 4)]);
    }

    #[test]
    fn prolate_structure() {
        let p = prolate(8, 0.46).unwrap();
        assert_eq!(p[(0, 0)], 0.92);
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(p[(i, j)].to_bits(), p[(j, i)].to_bits());
                if i > 0 && j > 0 {
                    assert_eq!(p[(i, j)].to_bits(), p[(i - 1, j - 1)].to_bits());
                }
            }
        }
        assert!(prolate(8, 0.5).is_err());
        assert!(prolate(8, 0.0).is_err());
    }

    #[test]
    fn prolate_is_spd_and_ill_conditioned() {
        let eig = prolate(50, 0.46).unwrap().symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0 && min < 1e-4, "{min}");
    }

    #[test]
    fn example2_noise_level_is_exact() {
        let inst = gen_example2(8, 3, 1e-3, 5).unwrap();
        let b_true = inst.b_true.as_ref().unwrap();
        for j in 0..3 {
            let r = rel_error(&inst.b.lateral_slice(j), &b_true.lateral_slice(j)).unwrap();
            assert!((r - 1e-3).abs() < 1e-12, "slice {j}: {r}");
        }
        let clean = gen_example2(8, 3, 0.0, 5).unwrap();
        assert_eq!(clean.b, clean.b_true.clone().unwrap());
        assert_eq!(clean.a1, inst.a1);
        assert_eq!(inst, gen_example2(8, 3, 1e-3, 5).unwrap());
    }

    #[test]
    fn example2_slices_are_scaled_prolate() {
        let m = 6;
        let inst = gen_example2(m, 2, 0.0, 1).unwrap();
        let w = baart(m).unwrap();
        let p = prolate(m, PROLATE_ALPHA).unwrap();
        for i in 0..m {
            assert_eq!(inst.a.frontal_slice(i), &p * w[(i, 0)]);
        }
        let x = inst.x_true.unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 1.0));
        assert!((inst.lambda_default - 5.057_217_1).abs() < 1e-6);
    }
}
