use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use confluxlab::costmodels::{self, ModelId};
use confluxlab::factor::{default_block_size, default_memory, step_cost_audit, FactorConfig, FactorKind, FactorResult};
use confluxlab::pebble::{self, GameMode, OracleCaps};
use confluxlab::simnet::CSV_HEADER;
use confluxlab::{DenseMatrix, Error, GridSpec};

const SCHEMA: &str = "# schema_version=1";

#[derive(Parser)]
#[command(name = "confluxlab", version, about = "I/O lower bounds and communication-accounted LU/Cholesky")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the parallel I/O lower bound of a DAAP program.
    Derive(DeriveArgs),
    /// Factorize a matrix on the simulated machine and report traffic.
    Factorize(FactorArgs),
    /// Per-step traffic of one outer iteration against the step formulas.
    Audit {
        #[command(flatten)]
        run: FactorArgs,
        /// Outer iteration to audit (0-based).
        #[arg(long, default_value_t = 1)]
        step: usize,
    },
    /// Run a grid of factorizations and emit one CSV row per rank.
    Sweep(SweepArgs),
    /// Pebble a cDAG: greedy schedule, exact optimum, or replay.
    Pebble(PebbleArgs),
    /// Evaluate the closed-form communication models.
    Models(ModelArgs),
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    program: PathBuf,
    /// Fast memory per processor, in words.
    #[arg(long)]
    memory: f64,
    #[arg(long, default_value_t = 1)]
    procs: usize,
    /// Problem sizes at which to evaluate the bound.
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<i64>,
    /// Write the evaluated bound as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Lu,
    Chol,
}

impl From<Kind> for FactorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Lu => FactorKind::Lu,
            Kind::Chol => FactorKind::Cholesky,
        }
    }
}

#[derive(Args, Clone)]
struct FactorArgs {
    #[arg(long, value_enum, default_value = "lu")]
    kind: Kind,
    /// Matrix order; ignored when --input is given.
    #[arg(long = "n", default_value_t = 256)]
    n: usize,
    /// Processor grid `Px,Py,Pz`.
    #[arg(long, default_value = "2,2,2")]
    grid: String,
    /// Block size v (default 2PM/N^2 adjusted to divisibility).
    #[arg(long)]
    block: Option<usize>,
    /// Words per rank (default N^2 Pz / P).
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Read the matrix from a binary file instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fail with exit code 3 when the residual exceeds 1e-8 N.
    #[arg(long)]
    check: bool,
    /// Embed the matrix in the next valid size with an identity border.
    #[arg(long)]
    pad: bool,
    /// Treat the memory budget as a hard limit.
    #[arg(long)]
    hard_memory: bool,
    /// Write the per-rank traffic CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "lu")]
    kind: Kind,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Grids as `Px,Py,Pz`; repeat the flag or separate with `;`.
    #[arg(long, required = true)]
    grids: Vec<String>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PebbleArgs {
    /// cDAG in the `v <id> in|out|mid` / `e <src> <dst>` format.
    #[arg(long, conflicts_with = "program", required_unless_present = "program")]
    cdag: Option<PathBuf>,
    /// Build the cDAG from a DAAP program instead (needs --n).
    #[arg(long, requires = "n")]
    program: Option<PathBuf>,
    #[arg(long = "n")]
    n: Option<i64>,
    #[arg(long)]
    memory: usize,
    /// Number of ranks; more than one plays the parallel game.
    #[arg(long, default_value_t = 1)]
    procs: usize,
    /// Exhaustive search for the optimal I/O (small graphs only).
    #[arg(long)]
    brute_force: bool,
    /// Replay a schedule file and report its I/O.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Write the schedule found (witness or greedy) here.
    #[arg(long)]
    witness: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    n: Vec<f64>,
    #[arg(long = "procs", value_delimiter = ',', required = true)]
    procs: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    memory: Vec<f64>,
    /// Models to evaluate (default all).
    #[arg(long, value_delimiter = ',')]
    model: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Derive(a) => derive(a),
        Command::Factorize(a) => factorize(a),
        Command::Audit { run, step } => audit(run, step),
        Command::Sweep(a) => sweep(a),
        Command::Pebble(a) => pebble_cmd(a),
        Command::Models(a) => models(a),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_grid(s: &str) -> Result<GridSpec, Error> {
    GridSpec::parse(s).map_err(|e| Error::Parse(format!("grid '{s}': {e}")))
}

/// Six significant digits, integers without a fraction.
fn num(x: f64) -> String {
    if (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0) {
        format!("{}", x.round())
    } else {
        format!("{}", format!("{x:.5e}").parse::<f64>().unwrap_or(x))
    }
}

fn derive(a: DeriveArgs) -> Result<(), Error> {
    let prog = confluxlab::parse_daap(&read(&a.program)?)?;
    let report = confluxlab::parallel_bound(&prog, a.memory, a.procs)?;
    for line in &report.trace {
        println!("{line}");
    }
    for d in &report.diagnostics {
        log::warn!("{d}");
    }
    if let Some((coef, deg, m_exp)) = report.leading_term() {
        println!("leading term: {} N^{deg} / (P M^{})", num(coef), num(m_exp));
    }
    let mut csv = format!("{SCHEMA}\nN,P,M,bound\n");
    for &n in &a.n {
        let q = report.q(n);
        println!("N = {n}: Q >= {}", num(q));
        if a.procs > 1 {
            if let Some(w) = report.regime_warning(n) {
                log::warn!("{w}");
            }
        }
        csv.push_str(&format!("{n},{},{},{q}\n", a.procs, a.memory));
    }
    if let Some(out) = &a.out {
        fs::write(out, csv)?;
    }
    Ok(())
}

/// Smallest order `>= n` that `grid` and `block` (or the default block) can factor.
fn padded_order(n: usize, grid: GridSpec, block: Option<usize>, memory: Option<usize>) -> usize {
    match block {
        Some(v) => {
            let step = v * grid.px;
            n.div_ceil(step) * step
        }
        None => (n..)
            .find(|&m| default_block_size(m, grid, memory.unwrap_or_else(|| default_memory(m, grid))).is_some())
            .expect("some order is always valid"),
    }
}

fn config_for(args: &FactorArgs, n: usize, grid: GridSpec) -> Result<FactorConfig, Error> {
    let memory = args.memory.unwrap_or_else(|| default_memory(n, grid));
    let v = match args.block {
        Some(v) => v,
        None => default_block_size(n, grid, memory)
            .ok_or_else(|| Error::Domain(format!("no block size fits N = {n} on grid {grid}; pass --block or --pad")))?,
    };
    let mut cfg = FactorConfig::new(grid, n).with_block(v).with_memory(memory);
    cfg.hard_memory = args.hard_memory;
    Ok(cfg)
}

fn run_factor(args: &FactorArgs) -> Result<FactorResult, Error> {
    let grid = parse_grid(&args.grid)?;
    let kind: FactorKind = args.kind.into();
    let mut a = match &args.input {
        Some(p) => {
            let mut f = fs::File::open(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
            DenseMatrix::read_from(&mut f)?
        }
        None => match kind {
            FactorKind::Lu => DenseMatrix::random(args.n, args.n, args.seed),
            FactorKind::Cholesky => DenseMatrix::random_spd(args.n, args.seed),
        },
    };
    let n0 = a.rows();
    if args.pad && a.is_square() {
        let n = padded_order(n0, grid, args.block, args.memory);
        if n != n0 {
            log::info!("padding N = {n0} to {n}");
            a = a.pad_identity(n);
        }
    }
    let cfg = config_for(args, a.rows(), grid)?;
    let result = match kind {
        FactorKind::Lu => confluxlab::conflux(&a, &cfg)?,
        FactorKind::Cholesky => confluxlab::confchox(&a, &cfg)?,
    };
    if !result.over_budget.is_empty() {
        log::warn!("{} rank(s) exceeded the memory budget of {} words", result.over_budget.len(), cfg.memory);
    }
    Ok(result)
}

fn model_for(kind: FactorKind) -> ModelId {
    match kind {
        FactorKind::Lu => ModelId::Conflux,
        FactorKind::Cholesky => ModelId::Confchox,
    }
}

fn factorize(args: FactorArgs) -> Result<(), Error> {
    let r = run_factor(&args)?;
    let c = &r.config;
    let model = costmodels::model_words(model_for(r.kind), r.n as f64, c.grid.p() as f64, c.memory as f64);
    println!("kind {} N {} grid {} v {} M {}", r.kind, r.n, c.grid, c.v, c.memory);
    println!("residual {:.3e} ({})", r.residual, if r.residual_ok() { "ok" } else { "FAILED" });
    println!(
        "per-rank received words: max {} mean {:.1}; model {:.1} (leading {:.1}); ratio {:.3}",
        r.stats.max_recv(),
        r.stats.mean_recv(),
        model.full,
        model.leading,
        r.stats.max_recv() as f64 / model.full
    );
    println!("total words {}", r.stats.total_sent());
    if let Some(w) = costmodels::regime_warning(r.n as f64, c.grid.p() as f64, c.memory as f64) {
        log::warn!("{w}");
    }
    emit(args.out.as_deref(), &r.stats.to_csv())?;
    if args.check && !r.residual_ok() {
        return Err(Error::Domain(format!("residual {:.3e} exceeds {:.1e}", r.residual, 1e-8 * r.n as f64)));
    }
    Ok(())
}

fn audit(args: FactorArgs, t: usize) -> Result<(), Error> {
    let r = run_factor(&args)?;
    let steps = r.n / r.config.v;
    if t >= steps {
        return Err(Error::Domain(format!("iteration {t} out of range: the run has {steps} outer iterations")));
    }
    let mut csv = format!("{SCHEMA}\nt,step,data_max,index_max,mean,predicted\n");
    for s in step_cost_audit(&r, t) {
        println!("{s}");
        csv.push_str(&format!("{t},{},{},{},{},{}\n", s.step, s.data_max, s.index_max, s.mean, s.predicted));
    }
    if let Some(out) = &args.out {
        fs::write(out, csv)?;
    }
    Ok(())
}

/// Column header of the sweep CSV.
const SWEEP_HEADER: &str = "kind,N,grid,v,M,model,model_words,ratio";

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let grids: Vec<GridSpec> = a
        .grids
        .iter()
        .flat_map(|g| g.split(';'))
        .filter(|g| !g.trim().is_empty())
        .map(parse_grid)
        .collect::<Result<_, _>>()?;
    let mut csv = format!("{SCHEMA}\n{SWEEP_HEADER},{CSV_HEADER}\n");
    for &grid in &grids {
        for &n in &a.n_list {
            let args = FactorArgs {
                kind: a.kind,
                n,
                grid: format!("{},{},{}", grid.px, grid.py, grid.pz),
                block: a.block,
                memory: None,
                seed: a.seed,
                input: None,
                check: false,
                pad: false,
                hard_memory: false,
                out: None,
            };
            let r = run_factor(&args)?;
            let c = &r.config;
            let id = model_for(r.kind);
            let model = costmodels::model_words(id, n as f64, grid.p() as f64, c.memory as f64).full;
            let g = format!("{}x{}x{}", grid.px, grid.py, grid.pz);
            for line in r.stats.to_csv().lines().skip(2) {
                let recv: f64 = line.split(',').nth(5).and_then(|s| s.parse().ok()).unwrap_or(0.0);
                csv.push_str(&format!("{},{n},{g},{},{},{id},{model},{:.6},{line}\n", r.kind, c.v, c.memory, recv / model));
            }
        }
    }
    emit(a.out.as_deref(), &csv)
}

fn pebble_cmd(a: PebbleArgs) -> Result<(), Error> {
    let mut bound = None;
    let file = match (&a.cdag, &a.program) {
        (Some(p), _) => pebble::parse_cdag(&read(p)?)?,
        (None, Some(p)) => {
            let prog = confluxlab::parse_daap(&read(p)?)?;
            let n = a.n.expect("clap enforces --n");
            let cdag = confluxlab::build_cdag(&prog, n)?;
            bound = Some(confluxlab::program_bound(&prog, a.memory as f64)?.q_seq(n));
            let ids = (0..cdag.len() as u64).collect();
            pebble::CdagFile { cdag, ids }
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let g = &file.cdag;
    let mode = if a.procs > 1 { GameMode::parallel(a.procs) } else { GameMode::Sequential };
    println!("vertices {} edges {} inputs {} outputs {}", g.len(), g.edge_count(), g.inputs().len(), g.outputs().len());
    if let Some(b) = bound {
        println!("derived sequential bound: Q >= {}", num(b));
    }
    let mut found = None;
    if let Some(path) = &a.schedule {
        let moves = pebble::parse_schedule(&read(path)?, &file)?;
        let c = pebble::run_schedule(g, &moves, a.memory, mode)?;
        println!("schedule: {} moves, Q = {} (max per rank {})", moves.len(), c.total(), c.max_per_rank());
    }
    if a.brute_force {
        let r = pebble::brute_force_optimal_q(g, a.memory, mode, OracleCaps::default())?;
        println!("optimal: Q_opt = {} ({} states explored)", r.q, r.states_explored);
        if let Some(b) = bound {
            println!("Q_opt >= bound: {}", r.q as f64 >= b - 1e-9);
        }
        found = Some(r.witness);
    } else if a.schedule.is_none() && mode == GameMode::Sequential {
        let s = pebble::greedy_schedule(g, a.memory)?;
        let c = pebble::run_schedule(g, &s, a.memory, mode)?;
        println!("greedy: Q = {} (upper bound)", c.total());
        found = Some(s);
    }
    if let (Some(path), Some(s)) = (&a.witness, found) {
        fs::write(path, pebble::write_schedule(&s, &file.ids))?;
    }
    Ok(())
}

fn models(a: ModelArgs) -> Result<(), Error> {
    let ids: Vec<ModelId> = if a.model.is_empty() {
        ModelId::ALL.to_vec()
    } else {
        a.model.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    let mut points = Vec::new();
    for &n in &a.n {
        for &p in &a.procs {
            for &m in &a.memory {
                if !(n > 0.0 && p > 0.0 && m > 0.0) {
                    return Err(Error::Domain(format!("N, P and M must be positive (got {n}, {p}, {m})")));
                }
                if let Some(w) = costmodels::regime_warning(n, p, m) {
                    log::warn!("{w}");
                }
                points.push((n, p, m));
            }
        }
    }
    let mut csv = costmodels::models_csv(&ids, &points);
    csv.insert_str(SCHEMA.len() + 1, "# words include lower-order terms with coefficient 1 for all but the lower bounds\n");
    emit(a.out.as_deref(), &csv)
}
