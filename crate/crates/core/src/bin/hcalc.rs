use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcalc::curves::{self, ModifyLineParams};
use hcalc::harness::{emit_report, run_all, Report, RunConfig, SuiteResult};
use hcalc::maximizer::{verify_trajectory, MaximizeSpec};
use hcalc::metric::{self, BatchQuery};
use hcalc::uds::{BoxRegion, NCover, DEFAULT_CLIP, DEFAULT_DEPTH};
use hcalc::{Error, HorizontalVector, Point, Result};

/// Writes to stdout; a closed pipe ends the program quietly.
fn emit(args: std::fmt::Arguments<'_>) {
    if let Err(e) = io::stdout().lock().write_fmt(args) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

macro_rules! outln {
    ($($arg:tt)*) => { emit(format_args!("{}\n", format_args!($($arg)*))) };
}

#[derive(Parser)]
#[command(name = "hcalc", version, about = "Calculus and distance checks on the Heisenberg group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and print a summary.
    Verify(VerifyArgs),
    /// Bracket the CC distance between two points.
    Dist(DistArgs),
    /// Build horizontal curves.
    #[command(subcommand)]
    Curve(CurveCommand),
    /// Build and query the tube covers.
    #[command(subcommand)]
    Uds(UdsCommand),
    /// Run the maximizer from a JSON spec.
    Maximize(MaximizeArgs),
    /// Run every suite and write the JSON report with CSV sidecars.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count applied to every suite.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Group dimension.
    #[arg(long)]
    n: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_env(std::env::vars())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.set_all_trials(t);
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite to run; repeatable. All suites by default.
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[command(flatten)]
    run: RunArgs,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV sidecars (defaults to the report's directory).
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct DistArgs {
    /// Comma-separated coordinates `a_1..a_n,b_1..b_n,c`.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    /// JSON lines `{"x": [...], "y": [...]}`; `-` reads stdin.
    #[arg(long, conflicts_with_all = ["x", "y"])]
    batch: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CurveCommand {
    /// Two-leg curve from the origin (or `--x`) to `x y`.
    GammaY {
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
    },
    /// Line through `x` in direction `e`, modified to pass through `x delta_r(u)`.
    Modify {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        u: String,
        #[arg(long, allow_hyphen_values = true)]
        e: String,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Enumeration height (8 in H^1 and 5 otherwise by default).
    #[arg(long)]
    height: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    clip: f64,
}

impl CoverArgs {
    fn build(&self) -> Result<NCover> {
        let height = self.height.unwrap_or(if self.n == 1 { 8 } else { 5 });
        NCover::build(self.n, height, self.depth, self.clip)
    }
}

#[derive(Subcommand)]
enum UdsCommand {
    /// Build the cover and print (or write) its manifest.
    Build {
        #[command(flatten)]
        cover: CoverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of a level's volume inside a cube.
    Measure {
        #[command(flatten)]
        cover: CoverArgs,
        #[arg(long)]
        level: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        half_width: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Membership of a point in each level.
    Query {
        #[command(flatten)]
        cover: CoverArgs,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
}

#[derive(Args)]
struct MaximizeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trajectory as JSON lines; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_coords(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse coordinate `{s}`")))
        })
        .collect()
}

fn parse_point(text: &str) -> Result<Point> {
    Point::from_coords(&parse_coords(text)?)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn summarize(results: &[SuiteResult]) -> bool {
    let mut all = true;
    for r in results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        all &= r.passed();
        let time = r.wall_time.map(|t| format!("{t:.2}s")).unwrap_or_default();
        outln!(
            "{status}  {:<28} trials {:>7}  failures {:>4}  worst margin {:>12.4e}  {time}",
            r.suite,
            r.trials,
            r.failures,
            r.worst_margin
        );
        for note in &r.notes {
            outln!("      {note}");
        }
    }
    outln!("aggregate: {}", if all { "pass" } else { "FAIL" });
    all
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let cfg = args.run.load()?;
    let results = run_all(&cfg, &args.suites)?;
    let pass = summarize(&results);
    if let Some(out) = args.out.as_ref().or(cfg.output.report.as_ref()) {
        let report = Report::new(&cfg, &results)?;
        emit_report(&report, out, cfg.output.csv_dir.as_deref())?;
    }
    Ok(pass)
}

fn report(args: &ReportArgs) -> Result<bool> {
    let cfg = args.run.load()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.report.clone())
        .ok_or_else(|| Error::Config("report needs --out or output.report".into()))?;
    let results = run_all(&cfg, &[])?;
    let pass = summarize(&results);
    let report = Report::new(&cfg, &results)?;
    let csv_dir = args.csv_dir.clone().or_else(|| cfg.output.csv_dir.clone());
    for p in emit_report(&report, &out, csv_dir.as_deref())? {
        outln!("wrote {}", p.display());
    }
    Ok(pass)
}

fn dist(args: &DistArgs) -> Result<()> {
    if let Some(batch) = &args.batch {
        let reader: Box<dyn BufRead> = if batch.as_os_str() == "-" {
            Box::new(io::stdin().lock())
        } else {
            Box::new(io::BufReader::new(std::fs::File::open(batch)?))
        };
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let query: BatchQuery = serde_json::from_str(&line)?;
            let answer = metric::answer(&query)?;
            outln!("{}", serde_json::to_string(&answer)?);
        }
        return Ok(());
    }
    let (Some(x), Some(y)) = (&args.x, &args.y) else {
        return Err(Error::InvalidArgument("dist needs --x and --y, or --batch".into()));
    };
    let b = metric::cc_bounds(&parse_point(x)?, &parse_point(y)?)?;
    outln!("lower {:.12}  upper {:.12}  gap {:.3e}", b.lower, b.upper, b.gap());
    Ok(())
}

fn curve(cmd: &CurveCommand) -> Result<()> {
    let path = match cmd {
        CurveCommand::GammaY { y, x } => {
            let g = curves::gamma_y(&parse_point(y)?)?;
            match x {
                Some(x) => g.translate(&parse_point(x)?)?,
                None => g,
            }
        }
        CurveCommand::Modify { x, u, e, r, delta, eta } => {
            let params = ModifyLineParams {
                x: parse_point(x)?,
                u: parse_point(u)?,
                e: HorizontalVector::new(parse_coords(e)?)?,
                r: *r,
                delta: *delta,
                eta: *eta,
            };
            let (path, zeta) = curves::modify_line(&params)?;
            eprintln!("zeta = {zeta}");
            path
        }
    };
    outln!("{}", serde_json::to_string_pretty(&path)?);
    Ok(())
}

fn uds(cmd: &UdsCommand) -> Result<()> {
    match cmd {
        UdsCommand::Build { cover, out } => {
            let c = cover.build()?;
            let text = serde_json::to_string_pretty(&c.manifest())? + "\n";
            write_out(out.as_deref(), &text)
        }
        UdsCommand::Measure {
            cover,
            level,
            samples,
            half_width,
            seed,
        } => {
            let c = cover.build()?;
            let region = BoxRegion::cube(cover.n, &vec![0.0; 2 * cover.n + 1], *half_width);
            let m = c.measure_mc(*level, &region, *samples, *seed)?;
            outln!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
        UdsCommand::Query { cover, point } => {
            let c = cover.build()?;
            let x = parse_point(point)?;
            for k in 1..=c.depth() {
                outln!("level {k:>2}: {}", if c.contains(&x, k)? { "inside" } else { "outside" });
            }
            Ok(())
        }
    }
}

fn maximize(args: &MaximizeArgs) -> Result<bool> {
    let spec = MaximizeSpec::from_json(&std::fs::read_to_string(&args.config)?)?;
    let traj = spec.run()?;
    write_out(args.out.as_deref(), &traj.to_jsonl()?)?;
    let report = verify_trajectory(&traj);
    eprintln!("steps {}  violations {}", report.steps, report.violations.len());
    for v in &report.violations {
        eprintln!("  {v}");
    }
    if let Some(reason) = &traj.terminated {
        eprintln!("terminated: {reason}");
    }
    Ok(report.clean() && traj.terminated.is_none())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Verify(a) => verify(a),
        Command::Report(a) => report(a),
        Command::Maximize(a) => maximize(a),
        Command::Dist(a) => dist(a).map(|_| true),
        Command::Curve(c) => curve(c).map(|_| true),
        Command::Uds(c) => uds(c).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
