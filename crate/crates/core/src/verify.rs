//! Seeded property suites behind `tirls verify`.
//!
//! Each suite draws `trials` random instances, records the worst error of
//! its invariant and passes when that error stays within the tolerance.
//! Results depend only on the seed and the trial count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::factor::{direct_trls, min_norm_augmented_ls, tqr, tsvd, QrMode};
use crate::krylov::{tgkb, GkbOptions};
use crate::rng::{randn_tensor, NormalRng};
use crate::solvers::{irls_update, SubSolver, TrlsProblem, UpdateSample};
use crate::spectral::{dft_tubes, idft_tubes, normalize, tprod};
use crate::tensor::{bcirc, fold, fro_norm, identity, rel_error, transpose, unfold, Tensor3};

pub const LAMBDAS: [f64; 3] = [1e-2, 1.0, 1e2];

/// Kernels under test. Swapping one for a faulty version must make the
/// suites that depend on it fail.
#[derive(Clone, Copy)]
pub struct Kernels {
    pub transpose: fn(&Tensor3) -> Tensor3,
}

impl Default for Kernels {
    fn default() -> Self {
        Self { transpose }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub tolerance: f64,
    pub trials: usize,
    pub worst: f64,
    /// First error raised by the code under test, if any.
    pub failure: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.worst <= self.tolerance
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        match &self.failure {
            Some(msg) => format!("{status} {:<18} trials={} error: {msg}", self.name, self.trials),
            None => format!(
                "{status} {:<18} trials={} worst={:.3e} tol={:.0e}",
                self.name, self.trials, self.worst, self.tolerance
            ),
        }
    }
}

type TrialFn = fn(&Kernels, &mut ChaCha8Rng) -> Result<f64>;

struct Suite {
    name: &'static str,
    tolerance: f64,
    trial: TrialFn,
}

const SUITES: [Suite; 9] = [
    Suite { name: "tprod-bcirc", tolerance: 1e-11, trial: trial_tprod_bcirc },
    Suite { name: "fft-roundtrip", tolerance: 1e-13, trial: trial_fft_roundtrip },
    Suite { name: "transpose-law", tolerance: 1e-11, trial: trial_transpose_law },
    Suite { name: "tqr", tolerance: 1e-10, trial: trial_tqr },
    Suite { name: "tsvd", tolerance: 1e-9, trial: trial_tsvd },
    Suite { name: "gkb-identities", tolerance: 1e-8, trial: trial_gkb },
    Suite { name: "normalize", tolerance: 1e-10, trial: trial_normalize },
    Suite { name: "augmented-ls", tolerance: 1e-10, trial: trial_augmented_ls },
    Suite { name: "update-identity", tolerance: 1e-9, trial: trial_update_identity },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

fn run_suite(index: usize, kernels: &Kernels, seed: u64, trials: usize) -> SuiteOutcome {
    let suite = &SUITES[index];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut worst = 0.0f64;
    let mut failure = None;
    for _ in 0..trials {
        match (suite.trial)(kernels, &mut rng) {
            // NaN must fail the suite
            Ok(e) => worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) },
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    SuiteOutcome {
        name: suite.name,
        tolerance: suite.tolerance,
        trials,
        worst,
        failure,
    }
}

/// Runs one named suite. Returns `None` for an unknown name.
pub fn run_named(name: &str, kernels: &Kernels, seed: u64, trials: usize) -> Option<SuiteOutcome> {
    SUITES
        .iter()
        .position(|s| s.name == name)
        .map(|i| run_suite(i, kernels, seed, trials))
}

pub fn run_all(kernels: &Kernels, seed: u64, trials: usize) -> Vec<SuiteOutcome> {
    (0..SUITES.len()).map(|i| run_suite(i, kernels, seed, trials)).collect()
}

fn normal_stream(rng: &mut ChaCha8Rng) -> NormalRng {
    NormalRng::new(rng.random())
}

fn trial_tprod_bcirc(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, c, p) = (
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        rng.random_range(1..=5),
    );
    let mut g = normal_stream(rng);
    let a = randn_tensor(m, n, p, &mut g);
    let b = randn_tensor(n, c, p, &mut g);
    let oracle = fold(&(bcirc(&a) * unfold(&b)), m, c, p)?;
    rel_error(&tprod(&a, &b)?, &oracle)
}

fn trial_fft_roundtrip(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, p) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=16));
    let a = randn_tensor(m, n, p, &mut normal_stream(rng));
    rel_error(&idft_tubes(&dft_tubes(&a))?, &a)
}

fn trial_transpose_law(k: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, c, p) = (
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        rng.random_range(1..=6),
        rng.random_range(1..=5),
    );
    let mut g = normal_stream(rng);
    let a = randn_tensor(m, n, p, &mut g);
    let b = randn_tensor(n, c, p, &mut g);
    let t = k.transpose;
    let law = rel_error(&t(&tprod(&a, &b)?), &tprod(&t(&b), &t(&a))?)?;
    let circ = (bcirc(&t(&a)) - bcirc(&a).transpose()).norm() / bcirc(&a).norm();
    Ok(law.max(circ))
}

fn trial_tqr(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, p) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=5));
    let a = randn_tensor(m, n, p, &mut normal_stream(rng));
    let mut worst = 0.0f64;
    for mode in [QrMode::Economy, QrMode::Full] {
        let f = tqr(&a, mode)?;
        worst = worst.max(rel_error(&tprod(&f.q, &f.r)?, &a)?);
        let qtq = tprod(&transpose(&f.q), &f.q)?;
        worst = worst.max(fro_norm(&qtq.sub(&identity(f.q.n2(), p))?));
    }
    Ok(worst)
}

fn trial_tsvd(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, p) = (rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=5));
    let a = randn_tensor(m, n, p, &mut normal_stream(rng));
    let f = tsvd(&a)?;
    let rebuilt = tprod(&tprod(&f.u, &f.s)?, &transpose(&f.v))?;
    let utu = tprod(&transpose(&f.u), &f.u)?;
    let vtv = tprod(&transpose(&f.v), &f.v)?;
    Ok(rel_error(&rebuilt, &a)?
        .max(fro_norm(&utu.sub(&identity(f.u.n2(), p))?))
        .max(fro_norm(&vtv.sub(&identity(f.v.n2(), p))?)))
}

fn trial_gkb(k: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (m, n, p) = (rng.random_range(2..=9), rng.random_range(2..=9), rng.random_range(1..=5));
    let steps = rng.random_range(1..=m.min(n));
    let mut g = normal_stream(rng);
    let a = randn_tensor(m, n, p, &mut g);
    let b = randn_tensor(m, 1, p, &mut g);
    let mut opts = GkbOptions::new(steps);
    opts.seed = rng.random();
    let r = tgkb(&a, &b, opts)?;
    let t = k.transpose;
    let kk = r.steps;
    let forward = rel_error(&tprod(&a, &r.w)?, &tprod(&r.q, &r.pbar)?)?;
    let pk = r.pbar.rows(0..kk);
    let backward = rel_error(&tprod(&t(&a), &r.q.cols(0..kk))?, &tprod(&r.w, &t(&pk))?)?;
    let wtw = tprod(&t(&r.w), &r.w)?;
    // after a breakdown the trailing left vector carries a vanishing coefficient
    let q = if r.breakdown { r.q.cols(0..kk) } else { r.q.clone() };
    let qtq = tprod(&t(&q), &q)?;
    Ok(forward
        .max(backward)
        .max(fro_norm(&wtw.sub(&identity(kk, p))?))
        .max(fro_norm(&qtq.sub(&identity(q.n2(), p))?)))
}

fn trial_normalize(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n, p) = (rng.random_range(1..=8), rng.random_range(1..=8));
    let mut g = normal_stream(rng);
    let x = randn_tensor(n, 1, p, &mut g);
    let (v, a) = normalize(&x, &mut g)?;
    let rebuilt = rel_error(&tprod(&v, &a)?, &x)?;
    let vtv = tprod(&transpose(&v), &v)?;
    Ok(rebuilt.max(fro_norm(&vtv.sub(&Tensor3::unit_tube(p))?)))
}

/// Random Tikhonov instance with a new sample: `m, n <= 12`, `c <= 6`,
/// `p <= 8`, `lambda` drawn from [`LAMBDAS`].
pub fn random_update_instance(rng: &mut ChaCha8Rng) -> Result<(TrlsProblem, UpdateSample)> {
    let (m, n, c, p) = (
        rng.random_range(1..=12),
        rng.random_range(1..=12),
        rng.random_range(1..=6),
        rng.random_range(1..=8),
    );
    let lambda = LAMBDAS[rng.random_range(0..LAMBDAS.len())];
    let mut g = normal_stream(rng);
    let a = randn_tensor(m, n, p, &mut g);
    let b = randn_tensor(m, c, p, &mut g);
    let a1 = randn_tensor(n, 1, p, &mut g);
    let b1 = randn_tensor(c, 1, p, &mut g);
    Ok((TrlsProblem::new(a, b, lambda)?, UpdateSample::new(a1, b1)))
}

fn trial_augmented_ls(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (p, _) = random_update_instance(rng)?;
    let top = min_norm_augmented_ls(&p.a, &p.b, p.lambda)?.rows(0..p.a.n2());
    rel_error(&top, &direct_trls(&p.a, &p.b, p.lambda)?)
}

fn trial_update_identity(_: &Kernels, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (p, s) = random_update_instance(rng)?;
    let x = direct_trls(&p.a, &p.b, p.lambda)?;
    let updated = irls_update(&p, &x, &s, SubSolver::Direct)?;
    let grown = p.augmented(&s)?;
    rel_error(&updated.x, &direct_trls(&grown.a, &grown.b, grown.lambda)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_and_repeat() {
        let first = run_all(&Kernels::default(), 7, 3);
        for o in &first {
            assert!(o.passed(), "{}", o.summary_line());
        }
        assert_eq!(first, run_all(&Kernels::default(), 7, 3));
    }

    #[test]
    fn sign_flipped_transpose_is_caught() {
        fn flipped(a: &Tensor3) -> Tensor3 {
            transpose(a).scale(-1.0)
        }
        let k = Kernels { transpose: flipped };
        let law = run_named("transpose-law", &k, 1, 2).unwrap();
        assert!(!law.passed());
        assert!(law.summary_line().starts_with("FAIL transpose-law"));
        assert!(run_named("tqr", &k, 1, 2).unwrap().passed());
        assert!(run_named("nope", &k, 1, 1).is_none());
    }
}
