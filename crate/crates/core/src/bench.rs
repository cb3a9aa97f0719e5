//! Benchmark harness comparing the incremental update with a from-scratch
//! projection solve after one new sample arrives.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::factor::direct_trls;
use crate::problems::{gen_example1, gen_example2, ExampleKind, ProblemInstance};
use crate::solvers::{irls_update, tgkt_solve, GktOptions, SubSolver, UpdateReport};
use crate::tensor::{rel_error, Tensor3};

pub const CSV_HEADER: &str = "c,method,err,k,cpu_seconds";
/// Timing repetitions; the median is reported.
pub const TIMING_REPEATS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Incremental,
    FromScratch,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Incremental => "t-IRLS",
            Method::FromScratch => "t-GKT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub c: usize,
    pub method: Method,
    pub err: f64,
    pub k: usize,
    pub cpu_seconds: f64,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.4e},{},{:.6}",
            self.c,
            self.method.label(),
            self.err,
            self.k,
            self.cpu_seconds
        )
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub kind: ExampleKind,
    pub m: usize,
    pub c_list: Vec<usize>,
    /// Overrides the example's default regularization parameter.
    pub lambda: Option<f64>,
    pub k: usize,
    pub delta: f64,
    pub seed: u64,
}

/// Everything measured for one column count.
#[derive(Clone, Debug)]
pub struct BenchCase {
    pub rows: [BenchRow; 2],
    pub report: UpdateReport,
}

/// Median wall time of `TIMING_REPEATS` calls, with the last result.
fn time_median<T>(mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(TIMING_REPEATS);
    let mut last = None;
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        let out = f()?;
        times.push(start.elapsed().as_secs_f64());
        last = Some(out);
    }
    times.sort_by(f64::total_cmp);
    Ok((last.expect("at least one repetition"), times[TIMING_REPEATS / 2]))
}

pub fn generate(kind: ExampleKind, m: usize, c: usize, delta: f64, seed: u64) -> Result<ProblemInstance> {
    match kind {
        ExampleKind::IllDeterminedRank => gen_example1(m, c, seed),
        ExampleKind::BaartProlate => gen_example2(m, c, delta, seed),
    }
}

/// Runs one column count: direct base solve, then the timed update and the
/// timed from-scratch solve, both scored against the direct solution of the
/// enlarged problem.
pub fn bench_case(cfg: &BenchConfig, c: usize) -> Result<BenchCase> {
    let inst = generate(cfg.kind, cfg.m, c, cfg.delta, cfg.seed)?;
    let problem = inst.problem_with_lambda(cfg.lambda.unwrap_or(inst.lambda_default))?;
    let sample = inst.sample();
    let x_star = direct_trls(&problem.a, &problem.b, problem.lambda)?;
    let grown = problem.augmented(&sample)?;
    let exact = direct_trls(&grown.a, &grown.b, grown.lambda)?;
    let opts = GktOptions::new(cfg.k);

    let (update, t_update) = time_median(|| irls_update(&problem, &x_star, &sample, SubSolver::Gkt(opts)))?;
    let (scratch, t_scratch): (Tensor3, f64) = time_median(|| tgkt_solve(&grown, opts))?;
    let row = |method, x: &Tensor3, cpu_seconds| -> Result<BenchRow> {
        Ok(BenchRow {
            c,
            method,
            err: rel_error(x, &exact)?,
            k: cfg.k,
            cpu_seconds,
        })
    };
    Ok(BenchCase {
        rows: [
            row(Method::Incremental, &update.x, t_update)?,
            row(Method::FromScratch, &scratch, t_scratch)?,
        ],
        report: update.report,
    })
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchCase>> {
    if cfg.c_list.is_empty() {
        return Err(Error::InvalidArgument("c_list must not be empty".into()));
    }
    cfg.c_list.iter().map(|&c| bench_case(cfg, c)).collect()
}

pub fn write_csv(out: &mut impl Write, cases: &[BenchCase]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for case in cases {
        for row in &case.rows {
            writeln!(out, "{}", row.csv_line())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench_rows() {
        let cfg = BenchConfig {
            kind: ExampleKind::IllDeterminedRank,
            m: 6,
            c_list: vec![2, 3],
            lambda: None,
            k: 6,
            delta: 0.0,
            seed: 1,
        };
        let cases = run_bench(&cfg).unwrap();
        assert_eq!(cases.len(), 2);
        for case in &cases {
            for row in &case.rows {
                assert!(row.err < 1e-8, "{row:?}");
            }
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &cases).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().starts_with("2,t-IRLS,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn empty_c_list_is_rejected() {
        let cfg = BenchConfig {
            kind: ExampleKind::BaartProlate,
            m: 6,
            c_list: vec![],
            lambda: None,
            k: 3,
            delta: 1e-3,
            seed: 1,
        };
        assert!(matches!(run_bench(&cfg), Err(Error::InvalidArgument(_))));
    }
}
