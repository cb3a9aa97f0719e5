//! Acceptance suite. Runs every criterion in sequence (timings are not
//! disturbed by parallel tests), prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::Instant;

use tensor_rls::bench::{bench_case, BenchCase, BenchConfig, Method};
use tensor_rls::problems::ExampleKind;
use tensor_rls::verify::{run_all, run_named, Kernels, SuiteOutcome};

const SEED: u64 = 20_240_601;

struct Criterion {
    id: u32,
    passed: bool,
    detail: String,
}

fn report(id: u32, passed: bool, detail: String) -> Criterion {
    let c = Criterion { id, passed, detail };
    println!("{} criterion {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail);
    c
}

fn suite(name: &str, trials: usize) -> SuiteOutcome {
    run_named(name, &Kernels::default(), SEED, trials).expect("known suite")
}

fn update_identity() -> Criterion {
    let start = Instant::now();
    let o = suite("update-identity", 200);
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        o.passed() && secs < 30.0,
        format!("incremental update == direct re-solve over 200 instances: worst rel_error {:.2e} (tol 1e-9), {secs:.2}s (limit 30s)", o.worst),
    )
}

fn augmented_top_block() -> Criterion {
    let o = suite("augmented-ls", 100);
    report(
        2,
        o.passed(),
        format!("top block of min-norm augmented LS == direct Tikhonov over 100 instances: worst rel_error {:.2e} (tol 1e-10)", o.worst),
    )
}

fn row(case: &BenchCase, method: Method) -> (f64, f64) {
    let r = case.rows.iter().find(|r| r.method == method).expect("row present");
    (r.err, r.cpu_seconds)
}

fn speedup(case: &BenchCase) -> f64 {
    row(case, Method::FromScratch).1 / row(case, Method::Incremental).1
}

struct TrendSpec {
    id: u32,
    kind: ExampleKind,
    m: usize,
    delta: f64,
    /// `(c, k)` pairs whose errors must stay below `err_tol`.
    accuracy: &'static [(usize, usize)],
    err_tol: f64,
    /// `(c, k)` at which the speedup is measured.
    timing: (usize, usize),
    limit_secs: f64,
}

fn trend(spec: &TrendSpec) -> Criterion {
    let start = Instant::now();
    let cfg = |k: usize| BenchConfig {
        kind: spec.kind,
        m: spec.m,
        c_list: vec![],
        lambda: None,
        k,
        delta: spec.delta,
        seed: SEED,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let mut run = |c: usize, k: usize| -> Option<BenchCase> {
        match bench_case(&cfg(k), c) {
            Ok(case) => Some(case),
            Err(e) => {
                parts.push(format!("c={c}: {e}"));
                None
            }
        }
    };
    let mut cases = Vec::new();
    for &(c, k) in spec.accuracy {
        cases.push((c, k, run(c, k)));
    }
    let (tc, tk) = spec.timing;
    let timing = if spec.accuracy.contains(&spec.timing) {
        cases.iter().find(|(c, k, _)| (*c, *k) == spec.timing).and_then(|(_, _, r)| r.clone())
    } else {
        run(tc, tk)
    };
    for (c, k, case) in &cases {
        match case {
            Some(case) => {
                let (ei, _) = row(case, Method::Incremental);
                let (eg, _) = row(case, Method::FromScratch);
                ok &= ei <= spec.err_tol && eg <= spec.err_tol;
                parts.push(format!("c={c} k={k} Err t-IRLS {ei:.2e} t-GKT {eg:.2e} (tol {:.0e})", spec.err_tol));
            }
            None => ok = false,
        }
    }
    match &timing {
        Some(case) => {
            let s = speedup(case);
            ok &= s >= 5.0;
            parts.push(format!("c={tc} k={tk} speedup {s:.1}x (floor 5x)"));
        }
        None => ok = false,
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < spec.limit_secs;
    parts.push(format!("{secs:.1}s (limit {:.0}s)", spec.limit_secs));
    report(spec.id, ok, parts.join("; "))
}

fn kernel_suites() -> Criterion {
    let names = ["tprod-bcirc", "fft-roundtrip", "tqr", "tsvd", "gkb-identities", "normalize"];
    let outcomes: Vec<SuiteOutcome> = names.iter().map(|n| suite(n, 100)).collect();
    let detail = outcomes
        .iter()
        .map(|o| format!("{} {:.1e}<={:.0e}", o.name, o.worst, o.tolerance))
        .collect::<Vec<_>>()
        .join(", ");
    report(5, outcomes.iter().all(SuiteOutcome::passed), detail)
}

fn determinism() -> Criterion {
    let bin = env!("CARGO_BIN_EXE_tirls");
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut ok = true;
    let mut parts = Vec::new();
    for example in ["1", "2"] {
        let dirs = [tmp.path().join(format!("{example}a")), tmp.path().join(format!("{example}b"))];
        for d in &dirs {
            let out = Command::new(bin)
                .args(["gen", "--example", example, "--m", "8", "--c", "3", "--seed", "11", "--out"])
                .arg(d)
                .output()
                .expect("run tirls gen");
            ok &= out.status.success();
        }
        let mut names: Vec<_> = fs::read_dir(&dirs[0]).expect("gen output").map(|e| e.unwrap().file_name()).collect();
        names.sort();
        let same = names
            .iter()
            .all(|n| fs::read(dirs[0].join(n)).ok() == fs::read(dirs[1].join(n)).ok());
        ok &= same && !names.is_empty();
        parts.push(format!("gen {example}: {} files {}", names.len(), if same { "byte-identical" } else { "DIFFER" }));
    }
    let verify = || {
        Command::new(bin)
            .args(["verify", "--seed", "5", "--trials", "3"])
            .output()
            .expect("run tirls verify")
    };
    let (first, second) = (verify(), verify());
    let same = first.stdout == second.stdout && first.status.success() && second.status.success();
    ok &= same;
    parts.push(format!("verify: {}", if same { "identical" } else { "DIFFER" }));
    let in_process = run_all(&Kernels::default(), 5, 3) == run_all(&Kernels::default(), 5, 3);
    ok &= in_process;
    report(6, ok, parts.join("; "))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results = vec![update_identity(), augmented_top_block()];
    results.push(trend(&TrendSpec {
        id: 3,
        kind: ExampleKind::IllDeterminedRank,
        m: 30,
        delta: 0.0,
        accuracy: &[(10, 4)],
        err_tol: 1e-3,
        timing: (100, 7),
        limit_secs: 120.0,
    }));
    results.push(trend(&TrendSpec {
        id: 4,
        kind: ExampleKind::BaartProlate,
        m: 50,
        delta: 1e-3,
        accuracy: &[(10, 5), (50, 5)],
        err_tol: 5e-3,
        timing: (50, 5),
        limit_secs: 180.0,
    }));
    results.push(kernel_suites());
    results.push(determinism());
    let substitutes = results.iter().filter(|c| [3, 4, 5].contains(&c.id)).all(|c| c.passed);
    results.push(report(
        7,
        substitutes,
        "absolute table values are not reproduced; the ratio and magnitude bounds of criteria 3 and 4 and the suites of criterion 5 stand in for them".into(),
    ));
    let failed = results.iter().filter(|c| !c.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
