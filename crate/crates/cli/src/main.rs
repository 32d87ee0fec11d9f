use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use upolar::analysis::{
    default_class, track_positions, verify_bound_sandwich, verify_general_rate_trends, verify_less_noisy_preservation,
    verify_slow_polarization, verify_universality, Report,
};
use upolar::bounds::bound_table;
use upolar::channels::parse_descriptor;
use upolar::construction::{attach_fast_stage_with_margin, build_general, TransformPlan, DEFAULT_FAST_MARGIN};
use upolar::sim::{design_delta, run_mc, SimConfig};
use upolar::{Budget, Channel};

#[derive(Parser)]
#[command(name = "upolar", version, about = "Universal polar transforms, codes and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the capacity bounds on the upgraded slow channel as CSV.
    Tables {
        #[arg(long, default_value_t = 0.5)]
        capacity: f64,
        #[arg(long, default_value_t = 40)]
        n: usize,
        /// Comma-separated subset of rows to print.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
    },
    /// Build a transform plan, or a full code when `--m` is given.
    Build {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the tracked metrics of every input position as CSV.
    Track {
        #[command(flatten)]
        plan: PlanArgs,
        /// Read the plan from a file instead of building it.
        #[arg(long, conflicts_with_all = ["n", "k", "b", "g"])]
        plan_file: Option<PathBuf>,
        #[arg(long, default_value = "bsc:0.11")]
        channel: String,
        #[arg(long, default_value = "512", value_parser = parse_budget)]
        budget: Budget,
    },
    /// Run a verification suite and print its JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        plan: PlanArgs,
        /// Channel under test, or the noisier channel for `less-noisy`.
        #[arg(long)]
        channel: Option<String>,
        /// Less noisy channel for `less-noisy`.
        #[arg(long, default_value = "bec:0.2")]
        better: String,
        /// Class capacity for `universality`.
        #[arg(long, default_value_t = 0.5)]
        capacity: f64,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value = "256", value_parser = parse_budget)]
        budget: Budget,
    },
    /// Estimate block and bit error rates by Monte Carlo.
    Simulate {
        /// Flat key = value configuration; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "K", alias = "k")]
        k: Option<usize>,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long)]
        g: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        channel: Option<String>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct PlanArgs {
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long = "K", alias = "k", default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value_t = 1)]
    g: usize,
}

#[derive(Args, Clone, Copy)]
struct DesignArgs {
    /// Erasure level targeted by the fast stage.
    #[arg(long, conflicts_with = "design_capacity")]
    delta: Option<f64>,
    /// Derive `delta` from the bounds for this class capacity.
    #[arg(long)]
    design_capacity: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Universality,
    LessNoisy,
    Trends,
    Polarization,
    Bounds,
}

fn parse_budget(s: &str) -> Result<Budget, String> {
    if s.eq_ignore_ascii_case("exact") {
        return Ok(Budget::Exact);
    }
    s.parse::<usize>()
        .map(Budget::Quantized)
        .map_err(|_| format!("expected 'exact' or an alphabet size, got '{s}'"))
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn build_plan(p: PlanArgs) -> upolar::Result<TransformPlan> {
    build_general(p.b, p.g, p.n, p.k)
}

fn resolve_delta(d: DesignArgs, n: usize) -> upolar::Result<Option<f64>> {
    match (d.delta, d.design_capacity) {
        (Some(x), _) => Ok(Some(x)),
        (None, Some(c)) => design_delta(c, n).map(Some),
        (None, None) => Ok(None),
    }
}

/// Writes to stdout; a reader that closes the pipe early is not an error.
fn out(text: &str) -> Res<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(text: &str, output: Option<&PathBuf>) -> Res<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => out(text)?,
    }
    Ok(())
}

fn tables(capacity: f64, n: usize, rows: &[usize]) -> Res<String> {
    let table = bound_table(capacity, n)?;
    let mut s = String::from("n,lowerI,upperI\n");
    for r in table.iter().filter(|r| rows.is_empty() || rows.contains(&r.n)) {
        writeln!(s, "{},{:.12},{:.12}", r.n, r.lower, r.upper)?;
    }
    Ok(s)
}

fn track(plan: &TransformPlan, w: &Channel, budget: Budget) -> Res<String> {
    let metrics = track_positions(plan, w, budget)?;
    let good: std::collections::HashSet<usize> = plan.good_indices.iter().copied().collect();
    let mut s = String::from("position,label,level,kind,sub_index,good,capacity,bhattacharyya,entropy\n");
    for (p, (l, m)) in plan.labels.iter().zip(&metrics).enumerate() {
        writeln!(
            s,
            "{p},{l},{},{},{},{},{:.12},{:.12},{:.12}",
            l.level,
            l.kind,
            l.sub_index,
            u8::from(good.contains(&p)),
            m.capacity,
            m.bhattacharyya,
            m.entropy
        )?;
    }
    Ok(s)
}

fn verify(
    suite: Suite,
    p: PlanArgs,
    channel: Option<&str>,
    better: &str,
    capacity: f64,
    n_max: usize,
    budget: Budget,
) -> Res<Report> {
    let rate = p.g as f64 / (p.b + p.g) as f64;
    let channel_or = |default: String| -> upolar::Result<Channel> { parse_descriptor(channel.unwrap_or(&default)) };
    Ok(match suite {
        Suite::Universality => {
            let plan = build_plan(p)?;
            let class = match channel {
                Some(c) => vec![(c.to_string(), parse_descriptor(c)?)],
                None => default_class(capacity)?,
            };
            verify_universality(&plan, &class, budget)?
        }
        Suite::LessNoisy => {
            let w = channel_or("bsc:0.11".into())?;
            verify_less_noisy_preservation(&parse_descriptor::<f64>(better)?, &w)?
        }
        Suite::Trends => {
            let w = channel_or(format!("bec:{}", 1.0 - rate))?;
            verify_general_rate_trends(p.b, p.g, &w, n_max, budget)?
        }
        Suite::Polarization => verify_slow_polarization(&channel_or("bec:0.5".into())?, n_max, budget),
        Suite::Bounds => verify_bound_sandwich(&channel_or("bsc:0.110027864438".into())?, n_max, budget)?,
    })
}

fn run(cli: Cli) -> Res<bool> {
    match cli.command {
        Command::Tables { capacity, n, rows } => out(&tables(capacity, n, &rows)?)?,
        Command::Build {
            plan,
            m,
            design,
            output,
        } => {
            let built = build_plan(plan)?;
            let text = match m {
                None => built.to_text(),
                Some(m) => {
                    let delta =
                        resolve_delta(design, plan.n)?.ok_or("building a code needs --delta or --design-capacity")?;
                    let spec =
                        attach_fast_stage_with_margin(&built, m, delta, design.margin.unwrap_or(DEFAULT_FAST_MARGIN))?;
                    serde_json::to_string_pretty(&spec)? + "\n"
                }
            };
            emit(&text, output.as_ref())?;
        }
        Command::Track {
            plan,
            plan_file,
            channel,
            budget,
        } => {
            let plan = match plan_file {
                Some(path) => TransformPlan::from_text(&std::fs::read_to_string(path)?)?,
                None => build_plan(plan)?,
            };
            out(&track(&plan, &parse_descriptor(&channel)?, budget)?)?;
        }
        Command::Verify {
            suite,
            plan,
            channel,
            better,
            capacity,
            n_max,
            budget,
        } => {
            let report = verify(suite, plan, channel.as_deref(), &better, capacity, n_max, budget)?;
            out(&(report.to_json() + "\n"))?;
            return Ok(report.passed);
        }
        Command::Simulate {
            config,
            n,
            k,
            b,
            g,
            m,
            design,
            channel,
            trials,
            seed,
            output,
        } => {
            let mut cfg = match config {
                Some(path) => SimConfig::load(&path)?,
                None => SimConfig::default(),
            };
            cfg.n = n.unwrap_or(cfg.n);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.b = b.unwrap_or(cfg.b);
            cfg.g = g.unwrap_or(cfg.g);
            cfg.m = m.unwrap_or(cfg.m);
            cfg.delta = resolve_delta(design, cfg.n)?.unwrap_or(cfg.delta);
            cfg.margin = design.margin.unwrap_or(cfg.margin);
            cfg.channel = channel.unwrap_or(cfg.channel);
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.output = output.or(cfg.output);
            let result = run_mc(&cfg)?;
            out(&(result.to_json() + "\n"))?;
            eprintln!("wall time {:.3} s", result.wall_time.as_secs_f64());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
