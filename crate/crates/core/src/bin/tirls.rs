//! `tirls`: generate test problems, solve, stream updates into a session,
//! benchmark and verify.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.
//! `TIRLS_THREADS` sets the worker count for slice-parallel kernels.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tensor_rls::bench::{run_bench, write_csv, BenchConfig};
use tensor_rls::factor::direct_trls;
use tensor_rls::io::{read_tensor, shape_string, write_tensor, Manifest, SessionDir, SessionSettings};
use tensor_rls::problems::{gen_example1, gen_example2, ExampleKind};
use tensor_rls::solvers::{tgkt_solve, GktOptions, SubSolver, TrlsProblem, UpdateSample};
use tensor_rls::tensor::{fro_norm, rel_error};
use tensor_rls::verify::{run_all, Kernels};
use tensor_rls::{tprod, Error};

#[derive(Parser)]
#[command(name = "tirls", version, about = "Tensor Tikhonov regularization with incremental updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded test problem into a directory.
    Gen(GenArgs),
    /// Solve a Tikhonov problem from tensor files.
    Solve(SolveArgs),
    /// Start a streaming session from A and B (the base problem is solved directly).
    Init(InitArgs),
    /// Fold one new horizontal sample into a session.
    Update(UpdateArgs),
    /// Time the incremental update against a from-scratch solve; writes CSV.
    Bench(BenchArgs),
    /// Run the seeded property suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Gkt,
    Direct,
}

#[derive(Args)]
struct GenArgs {
    /// Example number: 1 (ill-determined rank) or 2 (baart x prolate).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    example: u32,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    c: usize,
    /// Relative noise level per lateral slice (example 2).
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "gkt")]
    method: Method,
    /// Krylov steps; required for `gkt`.
    #[arg(long)]
    k: Option<usize>,
    /// Seed for start vectors that replace vanishing Krylov directions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also solve directly and print the relative difference.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct InitArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Subsolver for later updates.
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct UpdateArgs {
    #[arg(long)]
    session: PathBuf,
    #[arg(long)]
    a1: PathBuf,
    #[arg(long)]
    b1: PathBuf,
    /// Overrides the session's subsolver for this update.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    example: u32,
    #[arg(long)]
    m: usize,
    /// Comma-separated column counts, e.g. `10,100`.
    #[arg(long, value_delimiter = ',', required = true)]
    c_list: Vec<usize>,
    /// Defaults to the example's own value.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn subsolver(method: Method, k: Option<usize>, seed: u64) -> std::result::Result<SubSolver, Failure> {
    match (method, k) {
        (Method::Direct, _) => Ok(SubSolver::Direct),
        (Method::Gkt, Some(k)) if k >= 1 => {
            let mut opts = GktOptions::new(k);
            opts.seed = seed;
            Ok(SubSolver::Gkt(opts))
        }
        (Method::Gkt, Some(_)) => Err(Failure::Usage("--k must be at least 1".into())),
        (Method::Gkt, None) => Err(Failure::Usage("--k is required with --method gkt".into())),
    }
}

fn positive_lambda(lambda: f64) -> std::result::Result<f64, Failure> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Failure::Usage(format!("--lambda must be positive, got {lambda}")))
    }
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let kind = ExampleKind::from_number(args.example)?;
    let inst = match kind {
        ExampleKind::IllDeterminedRank => gen_example1(args.m, args.c, args.seed),
        ExampleKind::BaartProlate => gen_example2(args.m, args.c, args.delta, args.seed),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&args.out)?;
    let out = |name: &str| args.out.join(name);
    write_tensor(out("A.t3d"), &inst.a)?;
    write_tensor(out("B.t3d"), &inst.b)?;
    write_tensor(out("a1.t3d"), &inst.a1)?;
    write_tensor(out("b1.t3d"), &inst.b1)?;
    if let (Some(bt), Some(xt)) = (&inst.b_true, &inst.x_true) {
        write_tensor(out("B_true.t3d"), bt)?;
        write_tensor(out("X_true.t3d"), xt)?;
    }
    let mut manifest = Manifest::new();
    manifest
        .set("example", args.example)
        .set("m", args.m)
        .set("c", args.c)
        .set("seed", args.seed)
        .set("lambda_default", inst.lambda_default);
    if kind == ExampleKind::BaartProlate {
        manifest.set("delta", args.delta);
    }
    manifest.write(out("manifest.txt"))?;
    println!("wrote {} (A {}, B {})", args.out.display(), shape_string(&inst.a), shape_string(&inst.b));
    Ok(())
}

fn load_problem(a: &Path, b: &Path, lambda: f64) -> std::result::Result<TrlsProblem, Failure> {
    Ok(TrlsProblem::new(read_tensor(a)?, read_tensor(b)?, positive_lambda(lambda)?)?)
}

fn cmd_solve(args: SolveArgs) -> CmdResult {
    let sub = subsolver(args.solver.method, args.solver.k, args.solver.seed)?;
    let problem = load_problem(&args.a, &args.b, args.lambda)?;
    let start = Instant::now();
    let x = match sub {
        SubSolver::Gkt(opts) => tgkt_solve(&problem, opts)?,
        SubSolver::Direct => direct_trls(&problem.a, &problem.b, problem.lambda)?,
    };
    let wall = start.elapsed().as_secs_f64();
    write_tensor(&args.out, &x)?;
    let residual = tprod(&problem.a, &x)?.sub(&problem.b)?;
    let b_norm = fro_norm(&problem.b);
    let rel_residual = if b_norm > 0.0 { fro_norm(&residual) / b_norm } else { fro_norm(&residual) };
    println!("rel_residual={rel_residual:.6e}");
    println!("wall_seconds={wall:.6}");
    if args.check {
        let exact = direct_trls(&problem.a, &problem.b, problem.lambda)?;
        println!("rel_error_vs_direct={:.6e}", rel_error(&x, &exact)?);
    }
    Ok(())
}

fn cmd_init(args: InitArgs) -> CmdResult {
    let sub = subsolver(args.solver.method, args.solver.k, args.solver.seed)?;
    let problem = load_problem(&args.a, &args.b, args.lambda)?;
    let x = direct_trls(&problem.a, &problem.b, problem.lambda)?;
    let dir = SessionDir::create(&args.session, problem, x, SessionSettings::new(sub, args.solver.seed))?;
    println!("session {} ready", dir.path().display());
    Ok(())
}

fn cmd_update(args: UpdateArgs) -> CmdResult {
    let mut dir = SessionDir::open(&args.session)?;
    let sub = match args.method {
        Some(m) => Some(subsolver(m, args.k, dir.settings().seed)?),
        None => match (dir.settings().subsolver, args.k) {
            (SubSolver::Gkt(mut opts), Some(k)) => {
                opts.steps = k;
                Some(SubSolver::Gkt(opts))
            }
            _ => None,
        },
    };
    let sample = UpdateSample::new(read_tensor(&args.a1)?, read_tensor(&args.b1)?);
    let start = Instant::now();
    let report = dir.update(&sample, sub)?;
    let wall = start.elapsed().as_secs_f64();
    if report.short_circuit {
        println!("short-circuit: W=0");
    } else if report.fallback {
        println!("fallback: no invertible tube in W, solved the grown problem from scratch");
    } else {
        println!("index: {}", report.index.expect("index set when no fallback"));
        println!(
            "min_spectral_magnitude: {:.6e}",
            report.min_magnitude.expect("magnitude set when no fallback")
        );
    }
    println!("residual_row_norm: {:.6e}", report.residual_norm);
    println!("samples: {}", dir.session().sample_count());
    println!("wall_seconds: {wall:.6}");
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    if args.c_list.is_empty() {
        return Err(Failure::Usage("--c-list must name at least one column count".into()));
    }
    if args.k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    if let Some(l) = args.lambda {
        positive_lambda(l)?;
    }
    let cfg = BenchConfig {
        kind: ExampleKind::from_number(args.example)?,
        m: args.m,
        c_list: args.c_list,
        lambda: args.lambda,
        k: args.k,
        delta: args.delta,
        seed: args.seed,
    };
    let cases = run_bench(&cfg)?;
    match args.csv {
        Some(path) => {
            let mut f = fs::File::create(path)?;
            write_csv(&mut f, &cases)?;
        }
        None => write_csv(&mut std::io::stdout().lock(), &cases)?,
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let outcomes = run_all(&Kernels::default(), args.seed, args.trials as usize);
    for o in &outcomes {
        println!("{}", o.summary_line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} suite(s) failed")));
    }
    Ok(())
}

fn configure_threads() -> std::result::Result<(), Failure> {
    if let Ok(raw) = std::env::var("TIRLS_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Failure::Usage(format!("TIRLS_THREADS must be a positive integer, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Init(a) => cmd_init(a),
        Command::Update(a) => cmd_update(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
