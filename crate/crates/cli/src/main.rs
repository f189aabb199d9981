use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lgo_core::analysis::{self, BarrierSpec, Verdict};
use lgo_core::io::{self, SolutionFile};
use lgo_core::levelset::{self, Stencil};
use lgo_core::solver::{self, CertificateOptions, CertificateThresholds};
use lgo_core::{no_obstacle, scenarios, MetricKind, ProblemSpec, ScalarField, SolverParams};

const EXIT_OK: u8 = 0;
const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;
const EXIT_BARRIER: u8 = 4;

#[derive(Parser)]
#[command(name = "lgo", version, about = "Anisotropic obstacle least-gradient solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the relaxed problem and write a solution file.
    Solve(SolveArgs),
    /// Check the optimality certificate of a stored solution.
    Verify(VerifyArgs),
    /// Solve one threshold problem by min-cut.
    Levelset(LevelsetArgs),
    /// Reconstruct u by stacking threshold cuts.
    Stack(StackArgs),
    /// Check the comparison principle on two problems.
    Compare(CompareArgs),
    /// Evaluate the barrier condition on the domain boundary.
    BarrierCheck(BarrierArgs),
    /// Build a boundary barrier at a point and check its properties.
    Barrier(BuildBarrierArgs),
    /// Estimate the Hölder exponent of a stored solution.
    Modulus(ModulusArgs),
    /// Write one of the built-in reference problems.
    Example(ExampleArgs),
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative duality-gap tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Plain primal-dual iteration without adaptive restarts.
    #[arg(long)]
    no_restart: bool,
}

impl SolverFlags {
    fn params(&self) -> SolverParams {
        SolverParams {
            tau: self.tau,
            sigma: self.sigma,
            max_iters: self.max_iters,
            tol_gap: self.tol,
            restart: !self.no_restart,
            primal_weight: !self.no_restart,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    tol_contact: Option<f64>,
}

#[derive(Args)]
struct LevelsetArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    t: f64,
    /// Neighbourhood size: 4 or 8.
    #[arg(long, default_value_t = 4)]
    stencil: u32,
    /// Write the 0/1 set as a field file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StackArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Number of equally spaced thresholds over the data range.
    #[arg(long, default_value_t = 33)]
    thresholds: usize,
    #[arg(long, default_value_t = 4)]
    stencil: u32,
    /// Compare against a stored solution.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    problem2: PathBuf,
    /// Stored solutions; both problems are solved when omitted.
    #[arg(long, requires = "solution2")]
    solution: Option<PathBuf>,
    #[arg(long, requires = "solution")]
    solution2: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct BarrierArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value_t = 64)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Upper,
    Lower,
}

#[derive(Args)]
struct BuildBarrierArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long, allow_hyphen_values = true)]
    y0: f64,
    /// Defaults to the recipe from the datum and the solution bound.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Upper)]
    sign: SignArg,
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regime {
    /// Target α/2 for Hölder-α data.
    Holder,
    /// Target (1+α)/2 for C^{1,α} data.
    Lipschitz,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    Interior,
    Closure,
}

#[derive(Args)]
struct ModulusArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    /// Regularity exponent of the data.
    #[arg(long)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Regime::Holder)]
    regime: Regime,
    #[arg(long, value_enum, default_value_t = RegionArg::Interior)]
    region: RegionArg,
    /// Random cell pairs (at least 10000).
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Constant,
    Step,
    Block,
    Disk,
    Square,
}

#[derive(Args)]
struct ExampleArgs {
    #[arg(value_enum)]
    name: ExampleName,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value = "euclidean-weighted")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
}

/// Exit code of a verb that ran to completion.
struct Exit(u8);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Levelset(a) => cmd_levelset(a),
        Command::Stack(a) => cmd_stack(a),
        Command::Compare(a) => cmd_compare(a),
        Command::BarrierCheck(a) => cmd_barrier_check(a),
        Command::Barrier(a) => cmd_barrier(a),
        Command::Modulus(a) => cmd_modulus(a),
        Command::Example(a) => cmd_example(a),
    }
    .map(|Exit(c)| c)
}

fn load_problem(path: &Path) -> Result<ProblemSpec> {
    io::load_problem(path).with_context(|| format!("reading problem {}", path.display()))
}

fn load_solution(path: &Path, problem: &ProblemSpec) -> Result<SolutionFile> {
    let s = io::load_solution(path).with_context(|| format!("reading solution {}", path.display()))?;
    if !s.matches(problem.grid()) {
        bail!(
            "solution grid {}x{} h={} does not match problem grid {}x{} h={}",
            s.nx,
            s.ny,
            s.h,
            problem.grid().nx(),
            problem.grid().ny(),
            problem.grid().h()
        );
    }
    Ok(s)
}

fn stencil(n: u32) -> Result<Stencil> {
    Ok(Stencil::from_count(n)?)
}

fn print_lines(lines: impl IntoIterator<Item = String>) {
    for l in lines {
        println!("{l}");
    }
}

fn cmd_solve(a: SolveArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let sol = solver::solve_relaxed(&problem, &a.solver.params())?;
    io::save_solution(&a.out, &SolutionFile::from_solution(problem.grid(), &sol))
        .with_context(|| format!("writing {}", a.out.display()))?;
    print_lines([
        format!("energy={}", io::fmt_g17(sol.primal_energy)),
        format!("dual={}", io::fmt_g17(sol.dual_energy)),
        format!("gap={}", io::fmt_g17(sol.gap)),
        format!("relative_gap={:e}", sol.relative_gap()),
        format!("iters={}", sol.iters),
        format!("converged={}", sol.converged as u8),
    ]);
    Ok(Exit(if sol.converged { EXIT_OK } else { EXIT_NOT_CONVERGED }))
}

fn cmd_verify(a: VerifyArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let s = load_solution(&a.solution, &problem)?;
    let opts = CertificateOptions { tol_contact: a.tol_contact, ..Default::default() };
    let report = solver::extract_certificate(&problem, &s.u, &s.t, &opts)?;
    let energy = solver::primal_energy(&problem, &s.u)?;
    let dual = solver::bounded_dual_energy(&problem, &s.t)?;
    let rel = |x: f64, y: f64| if x == y { 0.0 } else { (x - y).abs() / x.abs().max(y.abs()).max(1e-300) };
    let footer_residual = rel(energy, s.energy).max(rel(dual, s.dual));
    let th = CertificateThresholds::default();
    let pass = report.passes(&th);
    print_lines(report.to_lines());
    print_lines([
        format!("energy={}", io::fmt_g17(energy)),
        format!("dual={}", io::fmt_g17(dual)),
        format!("footer_residual={footer_residual:e}"),
        format!("pass={}", pass as u8),
    ]);
    Ok(Exit(if pass { EXIT_OK } else { EXIT_CHECK_FAILED }))
}

/// Perimeter bias of the stencil on a calibration disk of radius 16 cells.
fn bias_line(s: Stencil) -> Result<String> {
    Ok(format!("stencil_bias_r16={:.6}", levelset::stencil_bias(s, 16.0)?))
}

fn cmd_levelset(a: LevelsetArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let s = stencil(a.stencil)?;
    let ls = levelset::solve_levelset(&problem, a.t, s)?;
    let g = problem.grid();
    let cells = (0..g.len()).filter(|&k| g.is_interior(k) && ls.set[k] > 0.5).count();
    print_lines([
        format!("t={}", io::fmt_g17(a.t)),
        format!("stencil={}", s.count()),
        format!("cut_value={}", io::fmt_g17(ls.cut_value)),
        format!("cells_in_set={cells}"),
        bias_line(s)?,
    ]);
    if let Some(out) = a.out {
        std::fs::write(&out, io::write_field("set", g.h(), &ls.set))?;
    }
    Ok(Exit(EXIT_OK))
}

fn cmd_stack(a: StackArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let s = stencil(a.stencil)?;
    let ts = levelset::uniform_thresholds(&problem, a.thresholds)?;
    let st = levelset::stack_levelsets(&problem, &ts, s)?;
    let mut lines = vec![
        format!("thresholds={}", ts.len()),
        format!("stencil={}", s.count()),
        format!("nestedness_violations={}", st.nestedness.violations),
        bias_line(s)?,
    ];
    if let Some(path) = &a.solution {
        let sol = load_solution(path, &problem)?;
        let mask = problem.grid().interior_mask();
        lines.push(format!("max_diff_to_solution={:e}", st.u.max_abs_diff(&sol.u, Some(&mask))));
    }
    print_lines(lines);
    if let Some(out) = a.out {
        std::fs::write(&out, io::write_field("u", problem.grid().h(), &st.u))?;
    }
    Ok(Exit(EXIT_OK))
}

fn cmd_compare(a: CompareArgs) -> Result<Exit> {
    let p1 = load_problem(&a.problem)?;
    let p2 = load_problem(&a.problem2)?;
    if p1.grid() != p2.grid() {
        bail!("problems are posed on different grids");
    }
    let mut converged = true;
    let (u1, u2) = match (&a.solution, &a.solution2) {
        (Some(s1), Some(s2)) => (load_solution(s1, &p1)?.u, load_solution(s2, &p2)?.u),
        _ => {
            let params = a.solver.params();
            let s1 = solver::solve_relaxed(&p1, &params)?;
            let s2 = solver::solve_relaxed(&p2, &params)?;
            converged = s1.converged && s2.converged;
            (s1.u, s2.u)
        }
    };
    let r = analysis::check_comparison(&p1, &p2, &u1, &u2)?;
    print_lines(r.to_lines());
    Ok(Exit(if !converged {
        EXIT_NOT_CONVERGED
    } else if r.passes() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }))
}

fn cmd_barrier_check(a: BarrierArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let r = analysis::barrier_condition_check(&problem, a.samples, a.seed)?;
    print_lines(r.to_lines());
    Ok(Exit(if r.verdict == Verdict::Satisfied { EXIT_OK } else { EXIT_BARRIER }))
}

fn cmd_barrier(a: BuildBarrierArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let u = a.solution.as_deref().map(|p| load_solution(p, &problem)).transpose()?.map(|s| s.u);
    let spec = BarrierSpec {
        x0: (a.x0, a.y0),
        k: a.k,
        lambda: a.lambda,
        alpha: a.alpha,
        delta: a.delta,
        sign: match a.sign {
            SignArg::Upper => analysis::BarrierSign::Upper,
            SignArg::Lower => analysis::BarrierSign::Lower,
        },
    };
    let b = analysis::build_barrier(&problem, &spec, u.as_ref())?;
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:e}"));
    let mut lines = vec![
        format!("k={}", io::fmt_g17(b.k)),
        format!("f_x0={}", io::fmt_g17(b.f_x0)),
        format!("patch_cells={}", b.patch.iter().filter(|&&p| p).count()),
        format!("min_grad={:e}", b.min_grad),
        format!("operator_sign_fraction={}", b.operator_sign_fraction),
        format!("operator_worst={:e}", b.operator_worst),
        format!("boundary_violation={}", opt(b.boundary_violation)),
        format!("patch_violation={}", opt(b.patch_violation)),
    ];
    let ok = b.min_grad > 0.0 && b.operator_sign_fraction == 1.0;
    lines.push(format!("pass={}", ok as u8));
    print_lines(lines);
    if let Some(out) = a.out {
        std::fs::write(&out, io::write_field("w", problem.grid().h(), &b.w))?;
    }
    Ok(Exit(if ok { EXIT_OK } else { EXIT_CHECK_FAILED }))
}

fn cmd_modulus(a: ModulusArgs) -> Result<Exit> {
    let problem = load_problem(&a.problem)?;
    let s = load_solution(&a.solution, &problem)?;
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        bail!("--alpha must lie in (0, 1]");
    }
    let target = match a.regime {
        Regime::Holder => 0.5 * a.alpha,
        Regime::Lipschitz => 0.5 * (1.0 + a.alpha),
    };
    let g = problem.grid();
    let region: Vec<bool> = match a.region {
        RegionArg::Interior => g.interior_mask(),
        RegionArg::Closure => (0..g.len()).map(|k| g.label(k) != lgo_core::CellLabel::Exterior).collect(),
    };
    // u = f on the boundary band
    let mut u = s.u.clone();
    for k in 0..g.len() {
        if !g.is_interior(k) {
            u[k] = problem.f()[k];
        }
    }
    let r = analysis::holder_modulus(g, &u, &region, target, a.samples, a.seed)?;
    print_lines(r.to_lines());
    Ok(Exit(if r.meets_target { EXIT_OK } else { EXIT_CHECK_FAILED }))
}

fn cmd_example(a: ExampleArgs) -> Result<Exit> {
    let kind: MetricKind = a.metric.parse()?;
    let n = a.n;
    let p = match a.name {
        ExampleName::Constant => scenarios::constant(n, kind, 1.0)?,
        ExampleName::Step => scenarios::step(n, kind)?,
        ExampleName::Block => scenarios::block_obstacle(n, kind)?,
        ExampleName::Disk => scenarios::disk(n, kind, 1.0, |x, _| x, |_, _| no_obstacle(1.0))?,
        ExampleName::Square => {
            let g = scenarios::square_grid_exact(n)?;
            let (nx, ny) = g.dims();
            let m = lgo_core::MetricField::uniform(kind, nx, ny, 1.0)?;
            ProblemSpec::new(g, m, ScalarField::filled(nx, ny, no_obstacle(1.0)), ScalarField::zeros(nx, ny))?
        }
    };
    io::save_problem(&a.out, &p).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(Exit(EXIT_OK))
}
