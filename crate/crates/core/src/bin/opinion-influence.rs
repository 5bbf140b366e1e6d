use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use opinion_influence::analytics::{default_social_influence, influence_report};
use opinion_influence::dynamics::{
    Scenario, SnapshotPolicy, TargetSet, Timing, DEFAULT_EPSILON, DEFAULT_HORIZON,
};
use opinion_influence::harness::verify::{self, VerifyOptions};
use opinion_influence::harness::{
    compare_timing_options, coverage_count, emit_csv, emit_plot_data, emit_svg, parse_timings,
    parse_values, run_sweep, write_csv, write_provenance, Factor, SweepConfig, TargetSelection,
};
use opinion_influence::linalg::DEFAULT_STOCHASTIC_TOL;
use opinion_influence::netgen::{
    generate_interaction_matrix, read_matrix_csv, write_matrix_csv, NetworkSpec,
};
use opinion_influence::rng::DetRng;

#[derive(Parser)]
#[command(
    name = "opinion-influence",
    version,
    about = "DeGroot opinion dynamics with a temporary external agent"
)]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true, env = "OPINION_INFLUENCE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a timing-option sweep over one factor and write CSV.
    Sweep(SweepArgs),
    /// Re-derive the analytic results numerically; exit 1 on any failure.
    Verify(VerifyArgs),
    /// Write a random interaction matrix as CSV.
    GenNetwork(GenArgs),
    /// Simulate one scenario on a matrix CSV and print its influence report.
    Influence(InfluenceArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// duration | coverage | intensity
    #[arg(long)]
    factor: Option<Factor>,
    /// Comma list or start:stop:step.
    #[arg(long)]
    values: Option<String>,
    /// Comma list of consensus, start, uniform.
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    coverage: Option<f64>,
    #[arg(long)]
    duration: Option<usize>,
    /// random | top_influence
    #[arg(long)]
    target_selection: Option<TargetSelection>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Columnar plot data, one block per timing option.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// SVG line chart.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Print the timing comparison to stderr.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = VerifyOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = VerifyOptions::default().networks)]
    networks: usize,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = NetworkSpec::default().n)]
    n: usize,
    #[arg(long, default_value_t = NetworkSpec::default().edge_density)]
    density: f64,
    #[arg(long, default_value_t = NetworkSpec::default().self_loop_min)]
    self_loop_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfluenceArgs {
    /// Interaction matrix CSV.
    #[arg(long)]
    matrix: PathBuf,
    /// Comma list of 0-based target indices.
    #[arg(long, conflicts_with = "coverage")]
    targets: Option<String>,
    /// Fraction of agents to target instead of an explicit list.
    #[arg(long)]
    coverage: Option<f64>,
    #[arg(long, default_value = "random")]
    target_selection: TargetSelection,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    duration: usize,
    #[arg(long, default_value = "consensus")]
    timing: Timing,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the full trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print a CSV header and row instead of key = value lines.
    #[arg(long)]
    csv: bool,
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            SweepConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => SweepConfig::default(),
    };
    if let Some(factor) = args.factor {
        if factor != cfg.factor {
            cfg.values = factor.default_values();
        }
        cfg.factor = factor;
    }
    if let Some(v) = &args.values {
        cfg.values = parse_values(v)?;
    }
    if let Some(t) = &args.timing {
        cfg.timings = parse_timings(t)?;
    }
    if let Some(n) = args.n {
        cfg.network.n = n;
    }
    if let Some(d) = args.density {
        cfg.network.edge_density = d;
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(c) = args.coverage {
        cfg.coverage = c;
    }
    if let Some(k) = args.duration {
        cfg.duration = k;
    }
    if let Some(sel) = args.target_selection {
        cfg.target_selection = sel;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = sweep_config(&args)?;
    let table = run_sweep(&cfg)?;
    let unconverged: usize = table.rows.iter().map(|r| r.nonconverged).sum();
    if unconverged > 0 {
        eprintln!(
            "warning: {unconverged} runs did not reach consensus within {} rounds; \
             they are excluded from the means (see the nonconverged column)",
            cfg.horizon
        );
    }
    match &args.out {
        Some(path) => {
            emit_csv(&table, path)?;
            let meta = path.with_extension("meta");
            write_provenance(&table, BufWriter::new(File::create(&meta)?))?;
        }
        None => write_csv(&table, io::stdout().lock())?,
    }
    if let Some(path) = &args.plot {
        emit_plot_data(&table, path)?;
    }
    if let Some(path) = &args.svg {
        emit_svg(&table, path)?;
    }
    if args.compare {
        let cmp = compare_timing_options(&table)?;
        let mut err = io::stderr().lock();
        for v in &cmp.per_value {
            let order: Vec<&str> = v.ordering.iter().map(|t| t.as_str()).collect();
            writeln!(
                err,
                "{} = {:<6} order {:<26} consensus-start {:>10} consensus-uniform {:>10}{}",
                cmp.factor,
                v.value,
                order.join(" > "),
                v.consensus_minus_start
                    .map_or("-".into(), |g| format!("{g:.6}")),
                v.consensus_minus_uniform
                    .map_or("-".into(), |g| format!("{g:.6}")),
                if v.ordering_violated {
                    "  ordering violated"
                } else {
                    ""
                }
            )?;
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let opts = VerifyOptions {
        seed: args.seed,
        networks: args.networks,
        ..VerifyOptions::default()
    };
    let outcomes = verify::run_all(&opts)?;
    for o in &outcomes {
        println!("{o}");
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = NetworkSpec::new(args.n, args.density, args.self_loop_min, args.seed);
    let t = generate_interaction_matrix(&spec)?;
    match args.out {
        Some(path) => write_matrix_csv(&t, BufWriter::new(File::create(path)?))?,
        None => write_matrix_csv(&t, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_influence(args: InfluenceArgs) -> Result<()> {
    let file =
        File::open(&args.matrix).with_context(|| format!("opening {}", args.matrix.display()))?;
    let t = read_matrix_csv(BufReader::new(file), DEFAULT_STOCHASTIC_TOL)?;
    let n = t.n();
    let targets = match (&args.targets, args.coverage) {
        (Some(list), _) => {
            let ix = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .context("parsing --targets")?;
            TargetSet::new(ix, n)?
        }
        (None, Some(c)) => {
            let m = coverage_count(c, n);
            let ranked = match args.target_selection {
                TargetSelection::TopInfluence => default_social_influence(&t)?.top(m),
                TargetSelection::Random => {
                    let mut order: Vec<usize> = (0..n).collect();
                    DetRng::new(args.seed).shuffle(&mut order);
                    order.truncate(m);
                    order
                }
            };
            TargetSet::new(ranked, n)?
        }
        (None, None) => bail!("one of --targets or --coverage is required"),
    };
    let scenario = Scenario::new(t, targets, args.lambda, args.duration, args.timing)
        .with_horizon(args.horizon)
        .with_epsilon(args.epsilon)
        .with_seed(args.seed)
        .with_snapshots(if args.trace.is_some() {
            SnapshotPolicy::Full
        } else {
            SnapshotPolicy::Key
        });
    let (report, trace) = influence_report(&scenario)?;
    if let Some(path) = &args.trace {
        trace.write_csv(BufWriter::new(File::create(path)?))?;
    }
    if args.csv {
        let mut w = csv::Writer::from_writer(io::stdout().lock());
        w.write_record(opinion_influence::InfluenceReport::CSV_HEADER)?;
        w.write_record(report.csv_record())?;
        w.flush()?;
    } else {
        print!("{}", report.to_key_value());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::GenNetwork(a) => cmd_gen(a).map(|_| true),
        Command::Influence(a) => cmd_influence(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
