//! Tikhonov solvers: the Golub-Kahan-Tikhonov projection method and the
//! incremental update for one new horizontal sample.
//!
//! For a new sample `(a1, b1)` the enlarged problem has `A~ = [A; a1^T]` and
//! `B~ = [B; b1^T]`. With the residual row `W = b1^T - a1^T * X` and an
//! invertible tube `W_l = W(:, l, :)`, its solution is
//!
//! ```text
//! X~ = X + (X~_l - X_l) * W_l^-1 * W
//! ```
//!
//! where `X~_l` solves the one-column problem on `A~` with right-hand side
//! `B~(:, l, :)`. Only that single column is ever solved afresh.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factor::{direct_trls_spectral, slice_lstsq, slice_tri_solve, tqr_spectral, QrMode, TriSide};
use crate::krylov::{tgkb_spectral, GkbOptions};
use crate::operator::{RowAppended, SpectralOperator};
use crate::spectral::{
    dft_tubes, idft_tubes, spectrum_invertible, CMatrix, SpectralTensor, TUBE_INVERTIBILITY_TOL,
};
use crate::tensor::{fro_norm, Tensor3};

/// Options for the Golub-Kahan-Tikhonov solver.
pub type GktOptions = GkbOptions;

/// `W ~ 0` short-circuit factor for [`irls_update`].
pub const RESIDUAL_ROW_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct TrlsProblem {
    pub a: Tensor3,
    pub b: Tensor3,
    pub lambda: f64,
}

impl TrlsProblem {
    pub fn new(a: Tensor3, b: Tensor3, lambda: f64) -> Result<Self> {
        if a.n1() != b.n1() || a.n3() != b.n3() {
            return Err(Error::shape(
                "TrlsProblem",
                format!("A {:?}, B {:?}", a.shape(), b.shape()),
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { a, b, lambda })
    }

    /// The problem with one more horizontal sample appended.
    pub fn augmented(&self, s: &UpdateSample) -> Result<TrlsProblem> {
        s.check(self.a.n2(), self.b.n2(), self.a.n3())?;
        Ok(TrlsProblem {
            a: self.a.vstack(&crate::tensor::transpose(&s.a1))?,
            b: self.b.vstack(&crate::tensor::transpose(&s.b1))?,
            lambda: self.lambda,
        })
    }
}

/// A new horizontal sample: `a1` is `n x 1 x p`, `b1` is `c x 1 x p`.
#[derive(Clone, Debug)]
pub struct UpdateSample {
    pub a1: Tensor3,
    pub b1: Tensor3,
}

impl UpdateSample {
    pub fn new(a1: Tensor3, b1: Tensor3) -> Self {
        Self { a1, b1 }
    }

    fn check(&self, n: usize, c: usize, p: usize) -> Result<()> {
        if self.a1.shape() != (n, 1, p) || self.b1.shape() != (c, 1, p) {
            return Err(Error::shape(
                "UpdateSample",
                format!(
                    "a1 {:?}, b1 {:?}; expected {n}x1x{p} and {c}x1x{p}",
                    self.a1.shape(),
                    self.b1.shape()
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubSolver {
    /// Golub-Kahan-Tikhonov with the given options.
    Gkt(GktOptions),
    /// Regularized normal equations per spectral slice.
    Direct,
}

/// Solves the one-column Tikhonov problem with the projection method.
///
/// Works in the Fourier domain throughout: GKB against `op`, t-QR of the
/// right basis, projected stacked least squares, then `X = W * R^-1 * Z`.
pub fn tgkt_solve_slice_spectral(
    op: &impl SpectralOperator,
    b: &SpectralTensor,
    lambda: f64,
    opts: GktOptions,
) -> Result<SpectralTensor> {
    check_lambda(lambda)?;
    let (n, p) = (op.cols(), op.tube_len());
    let gkb = tgkb_spectral(op, b, opts)?;
    let k = gkb.steps();
    if k == 0 {
        return Err(Error::BreakdownAtStart);
    }
    let w = gkb.w_basis(n, p);
    let pbar = gkb.pbar(p);
    let (_, r) = tqr_spectral(&w, QrMode::Economy);
    let z1 = &gkb.z[0];
    let lam = Complex64::new(lambda, 0.0);
    SpectralTensor::try_from_half_fn(p, |j| {
        let ptilde = slice_tri_solve(j, r.slice(j), pbar.slice(j), TriSide::RightInverse)?;
        let mut stacked = CMatrix::zeros(2 * k + 1, k);
        stacked.rows_mut(0, k + 1).copy_from(&ptilde);
        for i in 0..k {
            stacked[(k + 1 + i, i)] = lam;
        }
        let mut rhs = CMatrix::zeros(2 * k + 1, 1);
        rhs[(0, 0)] = z1[j];
        let zj = slice_lstsq(j, &stacked, &rhs)?;
        let y = slice_tri_solve(j, r.slice(j), &zj, TriSide::LeftInverse)?;
        Ok(w.slice(j) * y)
    })
}

/// One lateral slice of the Tikhonov problem by the projection method.
pub fn tgkt_solve_slice(a: &Tensor3, b: &Tensor3, lambda: f64, opts: GktOptions) -> Result<Tensor3> {
    if b.n2() != 1 || b.n1() != a.n1() || b.n3() != a.n3() {
        return Err(Error::shape(
            "tgkt_solve_slice",
            format!("A {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    idft_tubes(&tgkt_solve_slice_spectral(
        &dft_tubes(a),
        &dft_tubes(b),
        lambda,
        opts,
    )?)
}

/// Solves every lateral slice of `B` independently by the projection method.
pub fn tgkt_solve_spectral(
    op: &impl SpectralOperator,
    b: &SpectralTensor,
    lambda: f64,
    opts: GktOptions,
) -> Result<SpectralTensor> {
    let mut x = SpectralTensor::zeros(op.cols(), b.n2(), op.tube_len());
    for j in 0..b.n2() {
        let col = tgkt_solve_slice_spectral(op, &b.lateral(j), lambda, opts).map_err(|e| {
            Error::Slice {
                slice: j,
                source: Box::new(e),
            }
        })?;
        x.set_lateral(j, &col);
    }
    Ok(x)
}

pub fn tgkt_solve(problem: &TrlsProblem, opts: GktOptions) -> Result<Tensor3> {
    let x = tgkt_solve_spectral(
        &dft_tubes(&problem.a),
        &dft_tubes(&problem.b),
        problem.lambda,
        opts,
    )?;
    idft_tubes(&x)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// `b1^T - a1^T * X`, a `1 x c x p` row.
pub fn compute_residual_tube_row(x: &Tensor3, s: &UpdateSample) -> Result<Tensor3> {
    s.check(x.n1(), x.n2(), x.n3())?;
    idft_tubes(&residual_row_spectral(
        &dft_tubes(x),
        &dft_tubes(&s.a1),
        &dft_tubes(&s.b1),
    ))
}

fn residual_row_spectral(x: &SpectralTensor, a1: &SpectralTensor, b1: &SpectralTensor) -> SpectralTensor {
    x.map_slices(|j, xj| b1.slice(j).adjoint() - a1.slice(j).ad_mul(xj))
}

/// Index `l` whose tube `W(:, l, :)` is invertible, together with its
/// smallest spectral magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexChoice {
    pub index: usize,
    pub min_magnitude: f64,
}

fn choose_index_spectral(w: &SpectralTensor) -> Result<IndexChoice> {
    let mins: Vec<f64> = (0..w.n2())
        .map(|l| {
            w.tube(0, l)
                .iter()
                .map(|z| z.norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // first index wins ties
    let best = mins
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |acc, (l, &v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((l, v)),
        });
    match best {
        Some((l, v)) if spectrum_invertible(&w.tube(0, l), TUBE_INVERTIBILITY_TOL, None) => {
            Ok(IndexChoice {
                index: l,
                min_magnitude: v,
            })
        }
        _ => Err(Error::NoInvertibleTube(mins)),
    }
}

/// Picks the column of the residual row whose tube is most safely invertible.
pub fn choose_invertible_index(w: &Tensor3) -> Result<IndexChoice> {
    if w.n1() != 1 {
        return Err(Error::shape("choose_invertible_index", format!("{:?}", w.shape())));
    }
    choose_index_spectral(&dft_tubes(w))
}

/// What happened during one incremental update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateReport {
    pub index: Option<usize>,
    /// Smallest spectral magnitude of `W_l`; `1 / min_magnitude` bounds the
    /// amplification applied to the subproblem error.
    pub min_magnitude: Option<f64>,
    pub short_circuit: bool,
    pub fallback: bool,
    pub residual_norm: f64,
}

#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub x: Tensor3,
    pub report: UpdateReport,
}

struct SpectralUpdate {
    x: SpectralTensor,
    report: UpdateReport,
}

fn solve_columns(
    a: &SpectralTensor,
    row: &SpectralTensor,
    b: &SpectralTensor,
    lambda: f64,
    sub: SubSolver,
) -> Result<SpectralTensor> {
    match sub {
        SubSolver::Gkt(opts) => tgkt_solve_spectral(&RowAppended::new(a, row), b, lambda, opts),
        SubSolver::Direct => direct_trls_spectral(&a.vstack(row)?, b, lambda, None),
    }
}

/// Spectra of the current problem.
struct SpectralProblem<'a> {
    a: &'a SpectralTensor,
    b: &'a SpectralTensor,
    lambda: f64,
}

/// Core of the update on spectra.
fn irls_update_spectral(
    problem: SpectralProblem<'_>,
    x: &SpectralTensor,
    a1: &SpectralTensor,
    b1: &SpectralTensor,
    sub: SubSolver,
    threshold: f64,
) -> Result<SpectralUpdate> {
    let SpectralProblem { a, b, lambda } = problem;
    let w = residual_row_spectral(x, a1, b1);
    let row = a1.adjoint();
    let b1t = b1.adjoint();
    // spectral norm is sqrt(p) times the real one
    let residual_norm = w.fro_norm() / (w.n3() as f64).sqrt();
    let mut report = UpdateReport {
        residual_norm,
        ..Default::default()
    };
    if residual_norm <= threshold {
        report.short_circuit = true;
        return Ok(SpectralUpdate {
            x: x.clone(),
            report,
        });
    }
    let choice = match choose_index_spectral(&w) {
        Ok(c) => c,
        Err(Error::NoInvertibleTube(_)) => {
            report.fallback = true;
            let bt = b.vstack(&b1t)?;
            let x = solve_columns(a, &row, &bt, lambda, sub)?;
            return Ok(SpectralUpdate { x, report });
        }
        Err(e) => return Err(e),
    };
    report.index = Some(choice.index);
    report.min_magnitude = Some(choice.min_magnitude);
    let l = choice.index;

    let rhs = b.lateral(l).vstack(&b1t.lateral(l))?;
    let xl_new = solve_columns(a, &row, &rhs, lambda, sub)?;
    let delta = xl_new.sub(&x.lateral(l))?;
    let updated = x.map_slices(|j, xj| {
        let wj = w.slice(j);
        let coeff = wj / wj[(0, l)];
        xj + delta.slice(j) * coeff
    });
    Ok(SpectralUpdate { x: updated, report })
}

fn short_circuit_threshold(x: &Tensor3, s: &UpdateSample) -> f64 {
    RESIDUAL_ROW_TOL * (fro_norm(&s.b1) + fro_norm(&s.a1) * fro_norm(x))
}

/// Folds one horizontal sample into the solution `x_star` of `problem`.
///
/// Falls back to solving the enlarged problem from scratch (and says so in
/// the report) when no tube of the residual row is invertible.
pub fn irls_update(
    problem: &TrlsProblem,
    x_star: &Tensor3,
    sample: &UpdateSample,
    sub: SubSolver,
) -> Result<UpdateOutcome> {
    let (_, n, p) = problem.a.shape();
    let c = problem.b.n2();
    if x_star.shape() != (n, c, p) {
        return Err(Error::shape(
            "irls_update",
            format!("X {:?}, expected {n}x{c}x{p}", x_star.shape()),
        ));
    }
    sample.check(n, c, p)?;
    let (a_hat, b_hat) = (dft_tubes(&problem.a), dft_tubes(&problem.b));
    let out = irls_update_spectral(
        SpectralProblem {
            a: &a_hat,
            b: &b_hat,
            lambda: problem.lambda,
        },
        &dft_tubes(x_star),
        &dft_tubes(&sample.a1),
        &dft_tubes(&sample.b1),
        sub,
        short_circuit_threshold(x_star, sample),
    )?;
    let x = if out.report.short_circuit {
        x_star.clone()
    } else {
        idft_tubes(&out.x)?
    };
    Ok(UpdateOutcome {
        x,
        report: out.report,
    })
}

/// A streaming Tikhonov problem whose data grows one horizontal sample at a
/// time. Keeps the spectrum of `A` so each update only transforms the new row.
#[derive(Clone, Debug)]
pub struct Session {
    problem: TrlsProblem,
    x: Tensor3,
    a_hat: SpectralTensor,
    b_hat: SpectralTensor,
    samples: usize,
}

impl Session {
    /// Starts from a problem and its (already computed) solution.
    pub fn new(problem: TrlsProblem, x: Tensor3) -> Result<Self> {
        let (_, n, p) = problem.a.shape();
        if x.shape() != (n, problem.b.n2(), p) {
            return Err(Error::shape(
                "Session",
                format!("X {:?} for A {:?}", x.shape(), problem.a.shape()),
            ));
        }
        Ok(Self {
            a_hat: dft_tubes(&problem.a),
            b_hat: dft_tubes(&problem.b),
            problem,
            x,
            samples: 0,
        })
    }

    pub fn problem(&self) -> &TrlsProblem {
        &self.problem
    }

    pub fn solution(&self) -> &Tensor3 {
        &self.x
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    /// Sets the number of samples already absorbed, for restored sessions.
    pub fn with_sample_count(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn into_parts(self) -> (TrlsProblem, Tensor3) {
        (self.problem, self.x)
    }

    /// Absorbs one sample. On error the session is left unchanged.
    pub fn absorb(&mut self, sample: &UpdateSample, sub: SubSolver) -> Result<UpdateReport> {
        let (n, c, p) = self.x.shape();
        sample.check(n, c, p)?;
        let a1 = dft_tubes(&sample.a1);
        let b1 = dft_tubes(&sample.b1);
        let out = irls_update_spectral(
            SpectralProblem {
                a: &self.a_hat,
                b: &self.b_hat,
                lambda: self.problem.lambda,
            },
            &dft_tubes(&self.x),
            &a1,
            &b1,
            sub,
            short_circuit_threshold(&self.x, sample),
        )?;
        let x = if out.report.short_circuit {
            self.x.clone()
        } else {
            idft_tubes(&out.x)?
        };
        let grown = self.problem.augmented(sample)?;
        self.a_hat = self.a_hat.vstack(&a1.adjoint())?;
        self.b_hat = self.b_hat.vstack(&b1.adjoint())?;
        self.problem = grown;
        self.x = x;
        self.samples += 1;
        Ok(out.report)
    }
}

/// Applies [`irls_update`] for each sample in turn and returns the final solution.
pub fn irls_stream(
    problem: &TrlsProblem,
    x_star: &Tensor3,
    samples: &[UpdateSample],
    sub: SubSolver,
) -> Result<Tensor3> {
    let mut session = Session::new(problem.clone(), x_star.clone())?;
    for s in samples {
        session.absorb(s, sub)?;
    }
    Ok(session.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::direct_trls;
    use crate::rng::{randn_tensor, NormalRng};
    use crate::spectral::tprod;
    use crate::tensor::{identity, rel_error, transpose};
    use nalgebra::DMatrix;

    fn random_problem(m: usize, n: usize, c: usize, p: usize, lambda: f64, seed: u64) -> (TrlsProblem, UpdateSample) {
        let mut rng = NormalRng::new(seed);
        let a = randn_tensor(m, n, p, &mut rng);
        let b = randn_tensor(m, c, p, &mut rng);
        let a1 = randn_tensor(n, 1, p, &mut rng);
        let b1 = randn_tensor(c, 1, p, &mut rng);
        (
            TrlsProblem::new(a, b, lambda).unwrap(),
            UpdateSample::new(a1, b1),
        )
    }

    #[test]
    fn gkt_on_identity() {
        let b = randn_tensor(5, 1, 3, &mut NormalRng::new(1));
        let lambda = 0.5;
        let x = tgkt_solve_slice(&identity(5, 3), &b, lambda, GktOptions::new(3)).unwrap();
        assert!(rel_error(&x, &b.scale(1.0 / (1.0 + lambda * lambda))).unwrap() < 1e-10);
    }

    #[test]
    fn gkt_matches_unregularized_ls() {
        let mut rng = NormalRng::new(2);
        let a = randn_tensor(8, 8, 2, &mut rng);
        let b = randn_tensor(8, 1, 2, &mut rng);
        let x = tgkt_solve_slice(&a, &b, 1e-6, GktOptions::new(8)).unwrap();
        // dense per-slice oracle on the Fourier coefficients of a real 2-tube:
        // slices are A1 + A2 and A1 - A2
        let (a1, a2) = (a.frontal_slice(0), a.frontal_slice(1));
        let (b1, b2) = (b.frontal_slice(0), b.frontal_slice(1));
        let s0 = (&a1 + &a2).lu().solve(&(&b1 + &b2)).unwrap();
        let s1 = (&a1 - &a2).lu().solve(&(&b1 - &b2)).unwrap();
        let oracle = Tensor3::from_frontal_slices(&[(&s0 + &s1) / 2.0, (&s0 - &s1) / 2.0]).unwrap();
        assert!(rel_error(&x, &oracle).unwrap() < 1e-5);
    }

    #[test]
    fn gkt_is_exact_at_full_dimension() {
        let mut rng = NormalRng::new(3);
        let a = randn_tensor(6, 4, 3, &mut rng);
        let b = randn_tensor(6, 1, 3, &mut rng);
        let x = tgkt_solve_slice(&a, &b, 0.4, GktOptions::new(4)).unwrap();
        assert!(rel_error(&x, &direct_trls(&a, &b, 0.4).unwrap()).unwrap() <= 1e-8);
    }

    #[test]
    fn gkt_multi_column() {
        let mut rng = NormalRng::new(4);
        let a = randn_tensor(6, 4, 3, &mut rng);
        let b = randn_tensor(6, 3, 3, &mut rng);
        let problem = TrlsProblem::new(a.clone(), b.clone(), 0.4).unwrap();
        let x = tgkt_solve(&problem, GktOptions::new(3)).unwrap();
        for j in 0..3 {
            let xj = tgkt_solve_slice(&a, &b.lateral_slice(j), 0.4, GktOptions::new(3)).unwrap();
            assert!(rel_error(&x.lateral_slice(j), &xj).unwrap() < 1e-14);
        }
        let id = TrlsProblem::new(identity(6, 3), b.clone(), 2.0).unwrap();
        let x = tgkt_solve(&id, GktOptions::new(2)).unwrap();
        assert!(rel_error(&x, &b.scale(0.2)).unwrap() < 1e-10);
    }

    #[test]
    fn gkt_slice_errors_carry_index() {
        let mut b = randn_tensor(4, 2, 2, &mut NormalRng::new(5));
        b.set_lateral_slice(1, &Tensor3::zeros(4, 1, 2)).unwrap();
        let p = TrlsProblem::new(identity(4, 2), b, 1.0).unwrap();
        match tgkt_solve(&p, GktOptions::new(2)) {
            Err(Error::Slice { slice: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_row() {
        let (_, s) = random_problem(4, 3, 2, 3, 1.0, 6);
        let x = randn_tensor(3, 2, 3, &mut NormalRng::new(7));
        let w = compute_residual_tube_row(&x, &s).unwrap();
        // bcirc oracle
        let a1t = transpose(&s.a1);
        let prod = crate::tensor::fold(
            &(crate::tensor::bcirc(&a1t) * crate::tensor::unfold(&x)),
            1,
            2,
            3,
        )
        .unwrap();
        let oracle = transpose(&s.b1).sub(&prod).unwrap();
        assert!(fro_norm(&w.sub(&oracle).unwrap()) <= 1e-12);

        let w0 = compute_residual_tube_row(&Tensor3::zeros(3, 2, 3), &s).unwrap();
        assert!(rel_error(&w0, &transpose(&s.b1)).unwrap() < 1e-15);

        let consistent = UpdateSample::new(s.a1.clone(), transpose(&tprod(&transpose(&s.a1), &x).unwrap()));
        let w = compute_residual_tube_row(&x, &consistent).unwrap();
        assert!(fro_norm(&w) < 1e-12);

    }

    #[test]
    fn index_choice() {
        let mut w = Tensor3::zeros(1, 3, 4);
        w.set(0, 1, 0, 1.0);
        assert_eq!(choose_invertible_index(&w).unwrap().index, 1);

        let w = Tensor3::from_vec(1, 2, 2, vec![1.0, 2.0, 1.0, 0.0]).unwrap();
        let choice = choose_invertible_index(&w).unwrap();
        assert_eq!(choice.index, 1);
        assert!((choice.min_magnitude - 2.0).abs() < 1e-15);

        match choose_invertible_index(&Tensor3::zeros(1, 3, 2)) {
            Err(Error::NoInvertibleTube(m)) => assert_eq!(m.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn update_with_consistent_sample_is_noop() {
        let (p, s) = random_problem(5, 3, 2, 2, 0.5, 8);
        let x = direct_trls(&p.a, &p.b, p.lambda).unwrap();
        let b1 = transpose(&tprod(&transpose(&s.a1), &x).unwrap());
        let s = UpdateSample::new(s.a1, b1);
        let out = irls_update(&p, &x, &s, SubSolver::Direct).unwrap();
        assert!(out.report.short_circuit || rel_error(&out.x, &x).unwrap() < 1e-12);
        let exact = UpdateSample::new(Tensor3::zeros(3, 1, 2), Tensor3::zeros(2, 1, 2));
        let out = irls_update(&p, &x, &exact, SubSolver::Direct).unwrap();
        assert!(out.report.short_circuit);
        assert_eq!(out.x, x);
    }

    #[test]
    fn update_matches_direct_solve_of_enlarged_problem() {
        let (p, s) = random_problem(4, 3, 2, 2, 0.5, 9);
        let x = direct_trls(&p.a, &p.b, p.lambda).unwrap();
        let out = irls_update(&p, &x, &s, SubSolver::Direct).unwrap();
        let big = p.augmented(&s).unwrap();
        let exact = direct_trls(&big.a, &big.b, big.lambda).unwrap();
        assert!(rel_error(&out.x, &exact).unwrap() <= 1e-10);
        assert!(out.report.index.is_some() && !out.report.fallback);
    }

    #[test]
    fn update_with_gkt_subsolver() {
        let (p, s) = random_problem(10, 6, 4, 3, 1.0, 10);
        let x = direct_trls(&p.a, &p.b, p.lambda).unwrap();
        let out = irls_update(&p, &x, &s, SubSolver::Gkt(GktOptions::new(6))).unwrap();
        let big = p.augmented(&s).unwrap();
        let exact = direct_trls(&big.a, &big.b, big.lambda).unwrap();
        assert!(rel_error(&out.x, &exact).unwrap() <= 1e-8);
    }

    #[test]
    fn update_falls_back_without_invertible_tube() {
        // p = 2 and every residual tube of the form (t, t): the odd Fourier
        // coefficient vanishes, so no W_l is invertible
        let p = 2;
        let a = Tensor3::from_fn(4, 3, p, |i, j, k| ((i + 2 * j + k) % 5) as f64 + 0.5);
        let b = Tensor3::zeros(4, 2, p);
        let problem = TrlsProblem::new(a, b, 0.7).unwrap();
        let x = Tensor3::zeros(3, 2, p);
        let s = UpdateSample::new(
            Tensor3::from_fn(3, 1, p, |i, _, k| 1.0 + i as f64 - k as f64),
            Tensor3::from_fn(2, 1, p, |i, _, _| 1.0 + i as f64),
        );
        let out = irls_update(&problem, &x, &s, SubSolver::Direct).unwrap();
        assert!(out.report.fallback);
        let big = problem.augmented(&s).unwrap();
        let exact = direct_trls(&big.a, &big.b, big.lambda).unwrap();
        assert!(rel_error(&out.x, &exact).unwrap() < 1e-12);
    }

    #[test]
    fn stream_composes_updates() {
        let (p, s1) = random_problem(5, 4, 3, 3, 0.8, 11);
        let mut rng = NormalRng::new(12);
        let s2 = UpdateSample::new(randn_tensor(4, 1, 3, &mut rng), randn_tensor(3, 1, 3, &mut rng));
        let x = direct_trls(&p.a, &p.b, p.lambda).unwrap();
        assert_eq!(irls_stream(&p, &x, &[], SubSolver::Direct).unwrap(), x);
        let out = irls_stream(&p, &x, &[s1.clone(), s2.clone()], SubSolver::Direct).unwrap();
        let big = p.augmented(&s1).unwrap().augmented(&s2).unwrap();
        let exact = direct_trls(&big.a, &big.b, big.lambda).unwrap();
        assert!(rel_error(&out, &exact).unwrap() <= 1e-9);
    }

    #[test]
    fn session_is_unchanged_after_failure() {
        let (p, s) = random_problem(5, 4, 3, 3, 0.8, 13);
        let x = direct_trls(&p.a, &p.b, p.lambda).unwrap();
        let mut session = Session::new(p, x.clone()).unwrap();
        let bad = UpdateSample::new(Tensor3::zeros(2, 1, 3), s.b1.clone());
        assert!(session.absorb(&bad, SubSolver::Direct).is_err());
        assert_eq!(session.sample_count(), 0);
        assert_eq!(session.solution(), &x);
        session.absorb(&s, SubSolver::Direct).unwrap();
        assert_eq!(session.sample_count(), 1);
        assert_eq!(session.problem().a.n1(), 6);
    }

    #[test]
    fn dense_tikhonov_sanity() {
        // n3 = 1 reduces to the matrix problem
        let (p, _) = random_problem(6, 3, 1, 1, 0.3, 14);
        let am = p.a.frontal_slice(0);
        let oracle: DMatrix<f64> = (am.transpose() * &am + DMatrix::identity(3, 3) * 0.09)
            .try_inverse()
            .unwrap()
            * am.transpose()
            * p.b.frontal_slice(0);
        let x = tgkt_solve(&p, GktOptions::new(3)).unwrap();
        assert!((x.frontal_slice(0) - oracle).norm() < 1e-8);
    }
}
