use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use kronmag::bench::{estimate_cost, run_bench, sample_mode, write_csv, BenchSettings, Mode, Sweep};
use kronmag::stats::{self, DEFAULT_ALPHA};
use kronmag::{
    dedupe, expected_edges, sample_colors, ColorAssignment, Error, ModelConfig, MuVector,
    ParamStack, RngStream,
};

#[derive(Parser)]
#[command(name = "kronmag", version, about = "Sample KPGM and MAGM graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Kronecker product graph (modes: exact, bdp)
    SampleKpgm(Common),
    /// Sample a multiplicative attribute graph (modes: ar, simple, exact)
    SampleMagm(Common),
    /// Print e_K and, with --mu and --n, e_M, e_MK and e_KM
    ExpectedEdges(Common),
    /// Print the expected proposal balls of the accept-reject sampler
    EstimateCost(Common),
    /// Run statistical checks and print a TSV report
    Validate {
        #[command(flatten)]
        common: Common,
        /// theorem1, theorem3, equivalence, theorem2 or all
        #[arg(long, default_value = "all")]
        check: String,
        /// Repetitions per check (runs, instances or seeds)
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Time a sampler over a sweep and print CSV
    Bench {
        #[command(flatten)]
        common: Common,
        /// mu=lo:hi:step, d=lo:hi:step, or a comma list
        #[arg(long)]
        sweep: Sweep,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Number of attribute levels
    #[arg(long)]
    d: Option<usize>,
    /// Number of nodes (MAGM)
    #[arg(long)]
    n: Option<u32>,
    /// `a,b;c,d` per level, one per line, or @path to such a file
    #[arg(long)]
    theta: Option<String>,
    /// Repeat a single theta matrix d times
    #[arg(long)]
    replicate: bool,
    /// Comma-separated per-level values or one value for all levels
    #[arg(long)]
    mu: Option<String>,
    /// Decimal or 0x-prefixed hexadecimal
    #[arg(long, env = "KRONMAG_SEED", value_parser = parse_seed, default_value = "0")]
    seed: u64,
    /// Output file (standard output when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Read node colors from a `node<TAB>color` file
    #[arg(long)]
    colors: Option<PathBuf>,
    /// Write the node colors used to this file
    #[arg(long)]
    emit_colors: Option<PathBuf>,
    /// Collapse repeated edges
    #[arg(long)]
    dedupe: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| format!("`{s}` is not a decimal or 0x-hex u64"))
}

impl Common {
    fn theta(&self) -> kronmag::Result<ParamStack> {
        let spec = self
            .theta
            .as_deref()
            .ok_or_else(|| Error::Argument("--theta is required".into()))?;
        let text = match spec.strip_prefix('@') {
            Some(path) => std::fs::read_to_string(path)?,
            None => spec.to_owned(),
        };
        let d = match self.d {
            Some(d) => d,
            None if !self.replicate => text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .count(),
            None => return Err(Error::Argument("--replicate needs --d".into())),
        };
        ParamStack::parse(&text, d, self.replicate)
    }

    fn mu(&self, d: usize) -> kronmag::Result<Option<MuVector>> {
        self.mu.as_deref().map(|m| MuVector::parse(m, d)).transpose()
    }

    fn magm_config(&self) -> kronmag::Result<ModelConfig> {
        let theta = self.theta()?;
        let mu = self
            .mu(theta.depth())?
            .ok_or_else(|| Error::Argument("--mu is required".into()))?;
        let n = self
            .n
            .ok_or_else(|| Error::Argument("--n is required".into()))?;
        ModelConfig::magm(theta, mu, n, self.seed)
    }

    fn read_colors(&self, d: usize) -> kronmag::Result<Option<ColorAssignment>> {
        self.colors
            .as_ref()
            .map(|p| ColorAssignment::read_tsv(BufReader::new(File::open(p)?), d))
            .transpose()
    }
}

fn create(path: &Path) -> kronmag::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn with_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> kronmag::Result<()>) -> kronmag::Result<()> {
    match out {
        Some(p) => f(&mut create(p)?),
        None => f(&mut io::stdout().lock()),
    }
}

/// Stream every sample command draws from; estimate-cost replays its colors.
fn sample_stream(seed: u64) -> RngStream {
    RngStream::new(seed, "sample")
}

fn run_sample(args: &Common, kpgm: bool) -> kronmag::Result<()> {
    let (config, mode) = if kpgm {
        (ModelConfig::kpgm(args.theta()?, args.seed)?, args.mode.unwrap_or(Mode::Bdp))
    } else {
        (args.magm_config()?, args.mode.unwrap_or(Mode::Ar))
    };
    if kpgm && !matches!(mode, Mode::Exact | Mode::Bdp) {
        return Err(Error::Argument(format!("sample-kpgm supports exact and bdp, not {mode}")));
    }
    if !kpgm && mode == Mode::Bdp {
        return Err(Error::Argument("sample-magm supports ar, simple and exact".into()));
    }
    let colors = if kpgm { None } else { args.read_colors(config.d)? };

    let mut stream = sample_stream(args.seed);
    let start = Instant::now();
    let (mut edges, colors) = sample_mode(mode, &config, &mut stream, colors, args.threads)?;
    if args.dedupe {
        edges = dedupe(&edges);
    }
    let seconds = start.elapsed().as_secs_f64();

    with_output(args.out.as_deref(), |w| edges.write_to(w))?;
    if let (Some(path), Some(colors)) = (&args.emit_colors, &colors) {
        colors.write_tsv(create(path)?)?;
    }
    let summary = format!("edges={} seconds={seconds:.6}", edges.len());
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

/// Shortest decimal that survives rounding to 12 significant digits.
fn fmt_num(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

fn run_expected(args: &Common) -> kronmag::Result<()> {
    let theta = args.theta()?;
    let mu = args.mu(theta.depth())?;
    let n = match args.n {
        Some(n) => u64::from(n),
        None => 1u64 << theta.depth().min(63),
    };
    let e = expected_edges(&theta, mu.as_ref(), n)?;
    let mut line = format!("e_K={}", fmt_num(e.e_k));
    if let (Some(m), Some(mk), Some(km)) = (e.e_m, e.e_mk, e.e_km) {
        line.push_str(&format!(" e_M={} e_MK={} e_KM={}", fmt_num(m), fmt_num(mk), fmt_num(km)));
    }
    println!("{line}");
    Ok(())
}

fn run_cost(args: &Common) -> kronmag::Result<()> {
    let config = args.magm_config()?;
    let colors = match args.read_colors(config.d)? {
        Some(c) => c,
        None => sample_colors(config.require_mu()?, config.n, &mut sample_stream(args.seed).fork("colors")),
    };
    let cost = estimate_cost(&config, &colors)?;
    let [ff, fi, iff, ii] = cost.blocks.map(fmt_num);
    println!("FF={ff} FI={fi} IF={iff} II={ii} total={}", fmt_num(cost.total));
    Ok(())
}

struct Row {
    check: &'static str,
    parameters: String,
    statistic: f64,
    p_value: Option<f64>,
    pass: bool,
}

fn run_validate(args: &Common, check: &str, runs: Option<usize>) -> kronmag::Result<bool> {
    let all = check == "all";
    let wanted = |name: &str| all || check.split(',').any(|c| c.trim() == name);
    if !all {
        for c in check.split(',') {
            if !["theorem1", "theorem3", "equivalence", "theorem2"].contains(&c.trim()) {
                return Err(Error::Argument(format!("unknown check `{c}`")));
            }
        }
    }
    let skip = |name: &str, why: &str| eprintln!("skipping {name}: {why}");
    let mut rows = Vec::new();
    let theta = args.theta.as_ref().map(|_| args.theta()).transpose()?;

    if wanted("theorem1") {
        match &theta {
            Some(t) if t.depth() <= 3 => {
                let runs = runs.unwrap_or(100_000);
                let r = stats::verify_theorem1(t, runs, DEFAULT_ALPHA, args.seed)?;
                let side = 1usize << t.depth();
                for (cell, g) in r.cells.iter().enumerate() {
                    rows.push(Row {
                        check: "theorem1",
                        parameters: format!("cell=({},{}) runs={runs}", cell / side, cell % side),
                        statistic: g.statistic,
                        p_value: Some(g.p_value),
                        pass: g.pass,
                    });
                }
                let max_r = r.max_abs_correlation();
                rows.push(Row {
                    check: "theorem1",
                    parameters: format!("max_abs_correlation pairs={}", r.correlations.len()),
                    statistic: max_r,
                    p_value: None,
                    pass: max_r < 0.01,
                });
            }
            _ => skip("theorem1", "needs --theta with d <= 3"),
        }
    }
    if wanted("theorem3") {
        match args.d.or(theta.as_ref().map(ParamStack::depth)) {
            Some(d) if (1..=8).contains(&d) => {
                let trials = runs.unwrap_or(100);
                let ok = stats::verify_theorem3(d, trials, args.seed)?;
                rows.push(Row {
                    check: "theorem3",
                    parameters: format!("d={d} instances={trials}"),
                    statistic: if ok { 0.0 } else { 1.0 },
                    p_value: None,
                    pass: ok,
                });
            }
            _ => skip("theorem3", "needs --d between 1 and 8"),
        }
    }
    if wanted("equivalence") {
        match (&theta, args.n, &args.mu) {
            (Some(_), Some(n), Some(_)) if n <= stats::MAX_EQUIVALENCE_NODES => {
                let config = args.magm_config()?;
                let colors = match args.read_colors(config.d)? {
                    Some(c) => c,
                    None => sample_colors(config.require_mu()?, n, &mut RngStream::new(args.seed, "validate/colors")),
                };
                let runs = runs.unwrap_or(100_000);
                let g = stats::verify_sampler_equivalence(&config, &colors, runs, DEFAULT_ALPHA, 1.0)?;
                rows.push(Row {
                    check: "equivalence",
                    parameters: format!("n={n} d={} runs={runs} df={}", config.d, g.degrees_of_freedom),
                    statistic: g.statistic,
                    p_value: Some(g.p_value),
                    pass: g.pass,
                });
            }
            _ => skip("equivalence", "needs --theta, --mu and --n <= 16"),
        }
    }
    if wanted("theorem2") {
        match (&theta, args.n, &args.mu) {
            (Some(t), Some(n), Some(_)) if n >= 1 << 10 => {
                let mu = args.mu(t.depth())?.expect("checked");
                let seeds = runs.unwrap_or(100) as u64;
                let frac = stats::verify_theorem2(n, &mu, args.seed..args.seed + seeds)?;
                rows.push(Row {
                    check: "theorem2",
                    parameters: format!("n={n} mu={mu} seeds={seeds}"),
                    statistic: frac,
                    p_value: None,
                    pass: frac >= 0.95,
                });
            }
            _ => skip("theorem2", "needs --theta, --mu and --n >= 1024"),
        }
    }

    let mut ok = true;
    with_output(args.out.as_deref(), |w| {
        writeln!(w, "check\tparameters\tstatistic\tp_value\tpass")?;
        for r in &rows {
            let p = r.p_value.map_or("NA".to_owned(), |p| format!("{p:.6e}"));
            writeln!(w, "{}\t{}\t{}\t{p}\t{}", r.check, r.parameters, r.statistic, r.pass)?;
            ok &= r.pass;
        }
        Ok(())
    })?;
    Ok(ok)
}

fn run_bench_cmd(args: &Common, sweep: &Sweep, reps: usize) -> kronmag::Result<()> {
    let theta = args.theta()?;
    let base = theta.levels()[0];
    if theta.levels().iter().any(|m| *m != base) {
        return Err(Error::Argument("bench needs a single replicated theta matrix".into()));
    }
    let mu = match &args.mu {
        Some(m) => m
            .trim()
            .parse()
            .map_err(|_| Error::Argument("bench takes a scalar --mu".into()))?,
        None => 0.5,
    };
    let settings = BenchSettings {
        theta: base,
        d: theta.depth(),
        n: args.n,
        mu,
        mode: args.mode.unwrap_or(Mode::Ar),
        reps,
        seed: args.seed,
        threads: args.threads,
    };
    let records = run_bench(&settings, sweep)?;
    with_output(args.out.as_deref(), |w| write_csv(&records, w))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Argument(_) | Error::Parse(_) => 2,
        Error::Validity { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SampleKpgm(a) => run_sample(a, true).map(|_| true),
        Command::SampleMagm(a) => run_sample(a, false).map(|_| true),
        Command::ExpectedEdges(a) => run_expected(a).map(|_| true),
        Command::EstimateCost(a) => run_cost(a).map(|_| true),
        Command::Validate { common, check, runs } => run_validate(common, check, *runs),
        Command::Bench { common, sweep, reps } => run_bench_cmd(common, sweep, *reps).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if exit_code(&e) == 2 {
                eprintln!("run `kronmag --help` for usage");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
